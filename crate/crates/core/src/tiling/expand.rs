use crate::error::{Error, Result};
use crate::subst::{Substitution, COORD_BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatchTile {
    pub tile: usize,
    pub anchor: [i64; 2],
}

/// A finite set of level-0 tiles with lattice anchors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Patch {
    pub tiles: Vec<PatchTile>,
}

impl Patch {
    pub fn single(tile: usize) -> Self {
        Patch { tiles: vec![PatchTile { tile, anchor: [0, 0] }] }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Tile counts per prototile.
    pub fn counts(&self, m: usize) -> Vec<u64> {
        let mut c = vec![0; m];
        for t in &self.tiles {
            c[t.tile] += 1;
        }
        c
    }
}

/// Applies the substitution `steps` times: every anchor is scaled by the
/// expansion and replaced by the children of its rule.
pub fn expand(sub: &Substitution, patch: &Patch, steps: u32) -> Result<Patch> {
    let scale = sub.level_scale(1)?;
    let overflow = || Error::Overflow(format!("patch coordinates exceed {COORD_BOUND}"));
    let mut cur = patch.clone();
    for t in &cur.tiles {
        if t.tile >= sub.num_types() {
            return Err(Error::Precondition(format!("tile type {} out of range", t.tile + 1)));
        }
    }
    for _ in 0..steps {
        let mut next = Vec::with_capacity(cur.tiles.len() * 4);
        for t in &cur.tiles {
            let base = [
                t.anchor[0].checked_mul(scale[0]).ok_or_else(overflow)?,
                t.anchor[1].checked_mul(scale[1]).ok_or_else(overflow)?,
            ];
            for c in sub.rule(t.tile) {
                let a = [base[0] + c.offset[0], base[1] + c.offset[1]];
                if a[0].abs() > COORD_BOUND || a[1].abs() > COORD_BOUND {
                    return Err(overflow());
                }
                next.push(PatchTile { tile: c.tile, anchor: a });
            }
        }
        cur.tiles = next;
    }
    Ok(cur)
}
