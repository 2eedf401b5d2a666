use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::subst::{Substitution, COORD_BOUND};
use crate::tiling::clip::CellBox;

/// A supertile of order `level`: the expanded support of prototile `tile`
/// with its lower-left corner at `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Supertile {
    pub level: u32,
    pub tile: usize,
    pub anchor: [i64; 2],
}

/// Path of child indices from the root supertile, deepest last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Address {
    pub root_type: usize,
    pub digits: Vec<u8>,
}

impl Address {
    /// Number of substitution steps below the root.
    pub fn depth(&self) -> usize {
        self.digits.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellInfo {
    /// Zero-based prototile index.
    pub tile: usize,
    /// Anchor (lower-left cell) of the tile containing the cell.
    pub tile_anchor: [i64; 2],
    /// Position of the cell inside its tile.
    pub offset: [i64; 2],
}

#[derive(Debug, Clone)]
struct MemoEntry {
    tile: usize,
    anchor: [i64; 2],
    digits: Vec<u8>,
}

/// The patch `ζⁿ(T_root)` with its full supertile hierarchy, placed with the
/// root's lower-left corner at the lattice origin. Immutable once built.
#[derive(Debug)]
pub struct Hierarchy {
    sub: Arc<Substitution>,
    root: usize,
    levels: u32,
    scales: Vec<[i64; 2]>,
    memo_level: u32,
    block_dims: [i64; 2],
    blocks: Vec<u32>,
    entries: Vec<MemoEntry>,
}

impl Hierarchy {
    pub fn new(sub: Arc<Substitution>, root: usize, levels: u32) -> Result<Self> {
        if root >= sub.num_types() {
            return Err(Error::Precondition(format!("root type {} out of range", root + 1)));
        }
        let scales = (0..=levels).map(|k| sub.level_scale(k)).collect::<Result<Vec<_>>>()?;
        let ext = sub.prototiles()[root].extent;
        let top = scales[levels as usize];
        for a in 0..2 {
            if top[a].checked_mul(ext[a] as i64).is_none_or(|v| v > COORD_BOUND) {
                return Err(Error::Overflow(format!("window of {levels} levels exceeds coordinate bound")));
            }
        }
        // Top ⌈n/2⌉ levels are memoized on a grid of level-h blocks.
        let memo_level = levels / 2;
        let block = scales[memo_level as usize];
        let block_dims = [top[0] * ext[0] as i64 / block[0], top[1] * ext[1] as i64 / block[1]];
        let n_blocks = block_dims[0]
            .checked_mul(block_dims[1])
            .filter(|&b| b <= 1 << 28)
            .ok_or_else(|| Error::Overflow("memo grid too large".into()))?;
        let mut h = Hierarchy {
            sub,
            root,
            levels,
            scales,
            memo_level,
            block_dims,
            blocks: vec![u32::MAX; n_blocks as usize],
            entries: Vec::new(),
        };
        let mut stack = vec![(h.root_supertile(), Vec::<u8>::new())];
        while let Some((st, digits)) = stack.pop() {
            if st.level == memo_level {
                let idx = h.entries.len() as u32;
                let e = h.sub.prototiles()[st.tile].extent;
                let (bx, by) = (st.anchor[0] / block[0], st.anchor[1] / block[1]);
                for dy in 0..e[1] as i64 {
                    for dx in 0..e[0] as i64 {
                        h.blocks[((by + dy) * block_dims[0] + bx + dx) as usize] = idx;
                    }
                }
                h.entries.push(MemoEntry { tile: st.tile, anchor: st.anchor, digits });
                continue;
            }
            for (k, child) in h.children(&st).enumerate() {
                let mut d = digits.clone();
                d.push(k as u8);
                stack.push((child, d));
            }
        }
        Ok(h)
    }

    pub fn substitution(&self) -> &Arc<Substitution> {
        &self.sub
    }

    pub fn dim(&self) -> usize {
        self.sub.dim()
    }

    pub fn root_type(&self) -> usize {
        self.root
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn scale(&self, k: u32) -> [i64; 2] {
        self.scales[k as usize]
    }

    pub fn root_supertile(&self) -> Supertile {
        Supertile { level: self.levels, tile: self.root, anchor: [0, 0] }
    }

    /// Lattice side lengths of a supertile.
    pub fn extent(&self, st: &Supertile) -> [i64; 2] {
        let s = self.scales[st.level as usize];
        let e = self.sub.prototiles()[st.tile].extent;
        [s[0] * e[0] as i64, s[1] * e[1] as i64]
    }

    pub fn cell_box(&self, st: &Supertile) -> CellBox {
        CellBox::from_lattice(st.anchor, self.extent(st))
    }

    /// Lattice size of the whole window.
    pub fn size(&self) -> [i64; 2] {
        self.extent(&self.root_supertile())
    }

    pub fn contains(&self, cell: [i64; 2]) -> bool {
        let s = self.size();
        cell[0] >= 0 && cell[1] >= 0 && cell[0] < s[0] && cell[1] < s[1]
    }

    pub fn children<'a>(&'a self, st: &Supertile) -> impl Iterator<Item = Supertile> + 'a {
        let st = *st;
        debug_assert!(st.level > 0);
        let s = self.scales[st.level as usize - 1];
        self.sub.rule(st.tile).iter().map(move |c| Supertile {
            level: st.level - 1,
            tile: c.tile,
            anchor: [st.anchor[0] + s[0] * c.offset[0], st.anchor[1] + s[1] * c.offset[1]],
        })
    }

    fn child_containing(&self, st: &Supertile, cell: [i64; 2]) -> (usize, Supertile) {
        self.children(st)
            .enumerate()
            .find(|(_, c)| {
                let e = self.extent(c);
                cell[0] >= c.anchor[0]
                    && cell[1] >= c.anchor[1]
                    && cell[0] < c.anchor[0] + e[0]
                    && cell[1] < c.anchor[1] + e[1]
            })
            .expect("validated rules cover the parent")
    }

    fn check_cell(&self, cell: [i64; 2]) -> Result<()> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(Error::Margin(format!("cell ({}, {}) lies outside the window", cell[0], cell[1])))
        }
    }

    fn memo_start(&self, cell: [i64; 2]) -> (Supertile, &[u8]) {
        let b = self.scales[self.memo_level as usize];
        let idx = self.blocks[((cell[1] / b[1]) * self.block_dims[0] + cell[0] / b[0]) as usize];
        let e = &self.entries[idx as usize];
        (Supertile { level: self.memo_level, tile: e.tile, anchor: e.anchor }, &e.digits)
    }

    /// Prototile covering a lattice cell, by digit descent from the memoized level.
    pub fn type_at(&self, cell: [i64; 2]) -> Result<CellInfo> {
        self.check_cell(cell)?;
        let (mut st, _) = self.memo_start(cell);
        while st.level > 0 {
            st = self.child_containing(&st, cell).1;
        }
        Ok(CellInfo {
            tile: st.tile,
            tile_anchor: st.anchor,
            offset: [cell[0] - st.anchor[0], cell[1] - st.anchor[1]],
        })
    }

    /// The order-`k` supertile containing a cell, with its address.
    pub fn supertile_at(&self, cell: [i64; 2], k: u32) -> Result<(Supertile, Address)> {
        self.check_cell(cell)?;
        if k > self.levels {
            return Err(Error::Precondition(format!("level {k} above window depth {}", self.levels)));
        }
        let (mut st, mut digits) = if k <= self.memo_level {
            let (st, d) = self.memo_start(cell);
            (st, d.to_vec())
        } else {
            (self.root_supertile(), Vec::new())
        };
        while st.level > k {
            let (i, child) = self.child_containing(&st, cell);
            digits.push(i as u8);
            st = child;
        }
        Ok((st, Address { root_type: self.root, digits }))
    }

    /// Follows an address from the root.
    pub fn decode(&self, address: &Address) -> Result<Supertile> {
        if address.root_type != self.root || address.digits.len() > self.levels as usize {
            return Err(Error::Precondition("address does not belong to this window".into()));
        }
        let mut st = self.root_supertile();
        for &d in &address.digits {
            st = self
                .children(&st)
                .nth(d as usize)
                .ok_or_else(|| Error::Precondition(format!("digit {d} out of range")))?;
        }
        Ok(st)
    }

    /// Visits level-0 tiles meeting the lattice rectangle `[lo, hi)`.
    pub fn for_each_tile_in(&self, lo: [i64; 2], hi: [i64; 2], mut visit: impl FnMut(&Supertile)) {
        let mut stack = vec![self.root_supertile()];
        while let Some(st) = stack.pop() {
            let e = self.extent(&st);
            if st.anchor[0] >= hi[0] || st.anchor[1] >= hi[1] || st.anchor[0] + e[0] <= lo[0] || st.anchor[1] + e[1] <= lo[1] {
                continue;
            }
            if st.level == 0 {
                visit(&st);
            } else {
                stack.extend(self.children(&st));
            }
        }
    }

    /// Dense map of the cells in `[lo, hi)`: each entry is a slot index
    /// identifying `(tile, offset inside tile)`, see [`SlotTable`].
    pub fn materialize(&self, lo: [i64; 2], hi: [i64; 2]) -> Result<Region> {
        if lo[0] < 0 || lo[1] < 0 || hi[0] > self.size()[0] || hi[1] > self.size()[1] || lo[0] >= hi[0] || lo[1] >= hi[1] {
            return Err(Error::Margin(format!("region {lo:?}..{hi:?} not inside window")));
        }
        let slots = SlotTable::new(&self.sub);
        let w = (hi[0] - lo[0]) as usize;
        let h = (hi[1] - lo[1]) as usize;
        let mut cells = vec![0u16; w * h];
        self.for_each_tile_in(lo, hi, |t| {
            let e = self.sub.prototiles()[t.tile].extent;
            for dy in 0..e[1] as i64 {
                for dx in 0..e[0] as i64 {
                    let (x, y) = (t.anchor[0] + dx - lo[0], t.anchor[1] + dy - lo[1]);
                    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                        cells[y as usize * w + x as usize] = slots.slot(t.tile, [dx, dy]) as u16;
                    }
                }
            }
        });
        Ok(Region { lo, width: w, height: h, cells })
    }
}

/// Flat numbering of `(prototile, cell offset)` pairs.
#[derive(Debug, Clone)]
pub struct SlotTable {
    base: Vec<usize>,
    widths: Vec<usize>,
    total: usize,
}

impl SlotTable {
    pub fn new(sub: &Substitution) -> Self {
        let mut base = Vec::new();
        let mut widths = Vec::new();
        let mut total = 0;
        for p in sub.prototiles() {
            base.push(total);
            widths.push(p.extent[0] as usize);
            total += p.cells() as usize;
        }
        SlotTable { base, widths, total }
    }

    pub fn slot(&self, tile: usize, offset: [i64; 2]) -> usize {
        self.base[tile] + offset[1] as usize * self.widths[tile] + offset[0] as usize
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Inverse of [`SlotTable::slot`].
    pub fn decode(&self, slot: usize) -> (usize, [i64; 2]) {
        let tile = self.base.iter().rposition(|&b| b <= slot).expect("slot in range");
        let local = slot - self.base[tile];
        (tile, [(local % self.widths[tile]) as i64, (local / self.widths[tile]) as i64])
    }
}

/// Dense rectangle of cell slots.
#[derive(Debug, Clone)]
pub struct Region {
    pub lo: [i64; 2],
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u16>,
}

impl Region {
    pub fn at(&self, x: usize, y: usize) -> u16 {
        self.cells[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnchorMode {
    /// Centre of the window's bounding box.
    Center,
    /// Centre of the supertile reached by following these digits from the root.
    CellAddress(Vec<u8>),
}

/// A hierarchy with a chosen point playing the role of the origin of ℝᵈ.
/// Re-anchoring is the translation action on tilings.
#[derive(Debug, Clone)]
pub struct Window {
    hier: Arc<Hierarchy>,
    origin: [f64; 2],
}

pub fn make_window(sub: Arc<Substitution>, root_type: usize, levels: u32, anchor: AnchorMode) -> Result<Window> {
    let hier = Arc::new(Hierarchy::new(sub, root_type, levels)?);
    let origin = match anchor {
        AnchorMode::Center => {
            let s = hier.size();
            [s[0] as f64 / 2.0, s[1] as f64 / 2.0]
        }
        AnchorMode::CellAddress(digits) => {
            let st = hier.decode(&Address { root_type, digits })?;
            let b = hier.cell_box(&st);
            [(b.lo[0] + b.hi[0]) / 2.0, (b.lo[1] + b.hi[1]) / 2.0]
        }
    };
    Ok(Window { hier, origin })
}

impl Window {
    pub fn from_hierarchy(hier: Arc<Hierarchy>, origin: [f64; 2]) -> Self {
        Window { hier, origin }
    }

    pub fn hierarchy(&self) -> &Arc<Hierarchy> {
        &self.hier
    }

    pub fn substitution(&self) -> &Arc<Substitution> {
        self.hier.substitution()
    }

    pub fn dim(&self) -> usize {
        self.hier.dim()
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// The same tiling seen from another point.
    pub fn with_origin(&self, origin: [f64; 2]) -> Window {
        Window { hier: Arc::clone(&self.hier), origin }
    }

    /// Largest `R` with `B(origin, R)` inside the window support.
    pub fn margin(&self) -> f64 {
        let s = self.hier.size();
        let mx = self.origin[0].min(s[0] as f64 - self.origin[0]);
        if self.dim() == 1 {
            mx
        } else {
            mx.min(self.origin[1]).min(s[1] as f64 - self.origin[1])
        }
    }

    pub fn check_margin(&self, r: f64) -> Result<()> {
        if r <= self.margin() {
            Ok(())
        } else {
            Err(Error::Margin(format!("radius {r} exceeds window margin {}", self.margin())))
        }
    }

    /// Lattice cell containing the origin.
    pub fn origin_cell(&self) -> [i64; 2] {
        [self.origin[0].floor() as i64, self.origin[1].floor() as i64]
    }

    /// The window of `ζ(T)`: one more level, origin scaled by the expansion.
    pub fn substituted(&self) -> Result<Window> {
        let hier = Arc::new(Hierarchy::new(Arc::clone(self.substitution()), self.hier.root_type(), self.hier.levels() + 1)?);
        let s = hier.scale(1);
        Ok(Window { hier, origin: [self.origin[0] * s[0] as f64, self.origin[1] * s[1] as f64] })
    }

    /// Uniform random origins at distance at least `keep_out` from the edge.
    pub fn sample_anchors(&self, count: usize, keep_out: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
        let s = self.hier.size();
        let span = |len: i64| -> Result<(f64, f64)> {
            let (lo, hi) = (keep_out, len as f64 - keep_out);
            if hi <= lo {
                Err(Error::Margin(format!("keep-out {keep_out} leaves no interior in a window of side {len}")))
            } else {
                Ok((lo, hi))
            }
        };
        let (x0, x1) = span(s[0])?;
        let (y0, y1) = if self.dim() == 1 { (0.5, 0.5) } else { span(s[1])? };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let x = rng.gen_range(x0..x1);
                let y = if self.dim() == 1 { y0 } else { rng.gen_range(y0..y1) };
                [x, y]
            })
            .collect())
    }

    pub fn type_at(&self, cell: [i64; 2]) -> Result<CellInfo> {
        self.hier.type_at(cell)
    }

    pub fn supertile_at(&self, cell: [i64; 2], k: u32) -> Result<(Supertile, Address)> {
        self.hier.supertile_at(cell, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::tiling::expand::{expand, Patch};

    fn brute_force(sub: &Arc<Substitution>, root: usize, n: u32) -> std::collections::HashMap<[i64; 2], (usize, [i64; 2])> {
        let patch = expand(sub, &Patch::single(root), n).unwrap();
        let mut map = std::collections::HashMap::new();
        for t in &patch.tiles {
            let e = sub.prototiles()[t.tile].extent;
            for dy in 0..e[1] as i64 {
                for dx in 0..e[0] as i64 {
                    map.insert([t.anchor[0] + dx, t.anchor[1] + dy], (t.tile, t.anchor));
                }
            }
        }
        map
    }

    #[test]
    fn type_at_matches_full_expansion() {
        for sub in builtins::all() {
            let sub = Arc::new(sub);
            for root in 0..sub.num_types() {
                for n in 0..=4 {
                    let w = make_window(Arc::clone(&sub), root, n, AnchorMode::Center).unwrap();
                    let truth = brute_force(&sub, root, n);
                    let size = w.hierarchy().size();
                    assert_eq!(truth.len() as i64, size[0] * size[1]);
                    for (cell, (tile, anchor)) in &truth {
                        let info = w.type_at(*cell).unwrap();
                        assert_eq!((info.tile, info.tile_anchor), (*tile, *anchor), "{} {cell:?}", sub.name());
                    }
                }
            }
        }
    }

    #[test]
    fn window_geometry() {
        let sym = Arc::new(builtins::sym95());
        let w = make_window(Arc::clone(&sym), 0, 6, AnchorMode::Center).unwrap();
        assert_eq!(w.hierarchy().size(), [729, 729]);
        assert!(w.margin() >= 364.0);
        let ab = Arc::new(builtins::ab42());
        let w = make_window(ab, 0, 8, AnchorMode::Center).unwrap();
        assert_eq!(w.hierarchy().size()[0], 65536);
        assert_eq!(w.margin(), 32768.0);
        let w0 = make_window(sym, 1, 0, AnchorMode::Center).unwrap();
        assert_eq!(w0.hierarchy().size(), [1, 1]);
        assert_eq!(w0.type_at([0, 0]).unwrap().tile, 1);
    }

    #[test]
    fn sym95_rule_lookups() {
        let sym = Arc::new(builtins::sym95());
        let w = make_window(Arc::clone(&sym), 0, 5, AnchorMode::Center).unwrap();
        assert_eq!(w.type_at([0, 0]).unwrap().tile, 0);
        assert_eq!(w.type_at([2, 0]).unwrap().tile, 1);
        assert!(matches!(w.type_at([243, 0]), Err(Error::Margin(_))));
    }

    #[test]
    fn supertile_nesting_and_addresses() {
        let table = Arc::new(builtins::table());
        let w = make_window(table, 0, 5, AnchorMode::Center).unwrap();
        let h = w.hierarchy();
        let size = h.size();
        for y in (0..size[1]).step_by(3) {
            for x in (0..size[0]).step_by(5) {
                let cell = [x, y];
                let (t0, _) = h.supertile_at(cell, 0).unwrap();
                let info = h.type_at(cell).unwrap();
                assert_eq!((t0.tile, t0.anchor), (info.tile, info.tile_anchor));
                let (top, addr) = h.supertile_at(cell, 5).unwrap();
                assert_eq!(top, h.root_supertile());
                assert!(addr.digits.is_empty());
                for k in 0..5 {
                    let (inner, a_in) = h.supertile_at(cell, k).unwrap();
                    let (outer, a_out) = h.supertile_at(cell, k + 1).unwrap();
                    let (bi, bo) = (h.cell_box(&inner), h.cell_box(&outer));
                    assert!(bo.lo[0] <= bi.lo[0] && bo.lo[1] <= bi.lo[1] && bi.hi[0] <= bo.hi[0] && bi.hi[1] <= bo.hi[1]);
                    assert_eq!(&a_in.digits[..a_out.digits.len()], &a_out.digits[..]);
                    assert_eq!(h.decode(&a_in).unwrap(), inner);
                    // The digit at this level is a valid child of the parent's rule.
                    let digit = a_in.digits[a_out.digits.len()] as usize;
                    assert_eq!(table_rule_child(h, &outer, digit), inner.tile);
                }
            }
        }
    }

    fn table_rule_child(h: &Hierarchy, parent: &Supertile, digit: usize) -> usize {
        h.substitution().rule(parent.tile)[digit].tile
    }

    #[test]
    fn slot_table_round_trip() {
        let table = builtins::table();
        let slots = SlotTable::new(&table);
        assert_eq!(slots.len(), 4);
        for tile in 0..2 {
            let e = table.prototiles()[tile].extent;
            for dy in 0..e[1] as i64 {
                for dx in 0..e[0] as i64 {
                    assert_eq!(slots.decode(slots.slot(tile, [dx, dy])), (tile, [dx, dy]));
                }
            }
        }
    }

    #[test]
    fn materialize_agrees_with_type_at() {
        let table = Arc::new(builtins::table());
        let w = make_window(Arc::clone(&table), 1, 6, AnchorMode::Center).unwrap();
        let h = w.hierarchy();
        let slots = SlotTable::new(&table);
        let region = h.materialize([10, 7], [50, 40]).unwrap();
        for y in 0..region.height {
            for x in 0..region.width {
                let info = h.type_at([10 + x as i64, 7 + y as i64]).unwrap();
                assert_eq!(region.at(x, y) as usize, slots.slot(info.tile, info.offset));
            }
        }
    }

    #[test]
    fn anchors_are_seeded_and_interior() {
        let sym = Arc::new(builtins::sym95());
        let w = make_window(sym, 0, 5, AnchorMode::Center).unwrap();
        let a = w.sample_anchors(50, 40.0, 7).unwrap();
        assert_eq!(a, w.sample_anchors(50, 40.0, 7).unwrap());
        assert!(a.iter().all(|p| w.with_origin(*p).margin() >= 40.0));
        assert!(w.sample_anchors(1, 200.0, 7).is_err());
    }

    #[test]
    fn cell_address_anchor() {
        let sym = Arc::new(builtins::sym95());
        let w = make_window(sym, 0, 3, AnchorMode::CellAddress(vec![2, 0, 0])).unwrap();
        // digit 2 of rule A is the child at (2, 0): a level-2 supertile at x = 18.
        assert_eq!(w.origin(), [18.5, 0.5]);
    }
}
