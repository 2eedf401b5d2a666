use std::fmt::Write;

use crate::tiling::window::Hierarchy;

/// Axis-aligned rectangles, one per tile meeting `[lo, hi)`, filled with the
/// prototile colours. The y axis points up as in lattice coordinates.
pub fn patch_svg(hier: &Hierarchy, lo: [i64; 2], hi: [i64; 2], cell_px: f64) -> String {
    let sub = hier.substitution();
    let (w, h) = ((hi[0] - lo[0]) as f64 * cell_px, (hi[1] - lo[1]) as f64 * cell_px);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<g stroke="#222" stroke-width="{}">"##, (cell_px * 0.05).max(0.1));
    let mut tiles = Vec::new();
    hier.for_each_tile_in(lo, hi, |t| tiles.push(*t));
    tiles.sort_by_key(|t| (t.anchor[1], t.anchor[0]));
    for t in tiles {
        let p = &sub.prototiles()[t.tile];
        let x = (t.anchor[0] - lo[0]) as f64 * cell_px;
        let y = h - (t.anchor[1] - lo[1] + p.extent[1] as i64) as f64 * cell_px;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{}" height="{}" fill="{}"><title>{}</title></rect>"#,
            p.extent[0] as f64 * cell_px,
            p.extent[1] as f64 * cell_px,
            p.color,
            p.label
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}
