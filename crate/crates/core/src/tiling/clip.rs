//! Exact measure of an axis-aligned box intersected with a Euclidean ball.

/// Axis-aligned box in real coordinates. In d = 1 only the first axis is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl CellBox {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        CellBox { lo, hi }
    }

    pub fn from_lattice(anchor: [i64; 2], extent: [i64; 2]) -> Self {
        CellBox {
            lo: [anchor[0] as f64, anchor[1] as f64],
            hi: [(anchor[0] + extent[0]) as f64, (anchor[1] + extent[1]) as f64],
        }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        let w = self.hi[0] - self.lo[0];
        if dim == 1 { w } else { w * (self.hi[1] - self.lo[1]) }
    }
}

/// Primitive of `sqrt(r² − t²)`.
fn segment_primitive(t: f64, r: f64) -> f64 {
    let t = t.clamp(-r, r);
    0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).clamp(-1.0, 1.0).asin())
}

/// Area of `{0 ≤ X ≤ x, 0 ≤ Y ≤ y, X² + Y² ≤ r²}` for `x, y ≥ 0`.
fn quadrant_area(x: f64, y: f64, r: f64) -> f64 {
    let (x, y) = (x.min(r), y.min(r));
    if x <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    if x * x + y * y <= r * r {
        return x * y;
    }
    // Below height y until the arc drops under it at t*, then the circular segment.
    let t_star = (r * r - y * y).max(0.0).sqrt();
    y * t_star + segment_primitive(x, r) - segment_primitive(t_star, r)
}

/// Oriented version of [`quadrant_area`]: the integral over the rectangle
/// spanned by the origin and `(a, b)`, signed by orientation.
fn corner_area(a: f64, b: f64, r: f64) -> f64 {
    let s = a.signum() * b.signum();
    if s == 0.0 { 0.0 } else { s * quadrant_area(a.abs(), b.abs(), r) }
}

/// `Leb(box ∩ B(center, r))`, exact up to rounding. In d = 1 the ball is the
/// interval `[center − r, center + r]`.
pub fn clipped_cell_volume(cell: &CellBox, center: [f64; 2], r: f64, dim: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if dim == 1 {
        let lo = cell.lo[0].max(center[0] - r);
        let hi = cell.hi[0].min(center[0] + r);
        return (hi - lo).max(0.0);
    }
    let x0 = cell.lo[0] - center[0];
    let x1 = cell.hi[0] - center[0];
    let y0 = cell.lo[1] - center[1];
    let y1 = cell.hi[1] - center[1];
    // Fast exits keep full interior cells exact.
    let far = |a: f64, b: f64| a.abs().max(b.abs());
    let near = |a: f64, b: f64| if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
    let (fx, fy) = (far(x0, x1), far(y0, y1));
    if fx * fx + fy * fy <= r * r {
        return (x1 - x0) * (y1 - y0);
    }
    let (nx, ny) = (near(x0, x1), near(y0, y1));
    if nx * nx + ny * ny >= r * r {
        return 0.0;
    }
    let area = corner_area(x1, y1, r) - corner_area(x0, y1, r) - corner_area(x1, y0, r) + corner_area(x0, y0, r);
    area.clamp(0.0, (x1 - x0) * (y1 - y0))
}

/// Leb of the ball of radius `r` in dimension `dim`.
pub fn ball_volume(r: f64, dim: usize) -> f64 {
    if dim == 1 { 2.0 * r } else { std::f64::consts::PI * r * r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn inside_outside_quarter() {
        let unit = CellBox::new([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(clipped_cell_volume(&unit, [0.5, 0.5], 10.0, 2), 1.0);
        assert_eq!(clipped_cell_volume(&unit, [5.0, 5.0], 1.0, 2), 0.0);
        assert!((clipped_cell_volume(&unit, [0.0, 0.0], 1.0, 2) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn ball_inside_box() {
        let b = CellBox::new([-3.0, -3.0], [3.0, 3.0]);
        assert!((clipped_cell_volume(&b, [0.2, -0.1], 1.5, 2) - PI * 2.25).abs() < 1e-12);
    }

    #[test]
    fn half_disk() {
        let b = CellBox::new([0.0, -5.0], [5.0, 5.0]);
        assert!((clipped_cell_volume(&b, [0.0, 0.0], 2.0, 2) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional() {
        let b = CellBox::new([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(clipped_cell_volume(&b, [1.25, 0.5], 0.5, 1), 0.25);
        assert_eq!(clipped_cell_volume(&b, [0.5, 0.5], 3.0, 1), 1.0);
    }
}
