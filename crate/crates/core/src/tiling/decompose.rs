//! Top-down decomposition of a domain into maximal supertiles plus clipped
//! boundary tiles.

use crate::error::Result;
use crate::tiling::clip::{ball_volume, clipped_cell_volume, CellBox};
use crate::tiling::window::{Hierarchy, Supertile, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    Inside,
    Outside,
    Partial,
}

/// A region of the plane that can classify boxes against itself.
pub trait Domain {
    fn classify(&self, b: &CellBox) -> Overlap;
    /// `Leb(b ∩ domain)`.
    fn clipped(&self, b: &CellBox) -> f64;
    fn volume(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
    pub dim: usize,
}

impl Domain for Ball {
    fn classify(&self, b: &CellBox) -> Overlap {
        let (c, r) = (self.center, self.radius);
        if self.dim == 1 {
            if b.lo[0] >= c[0] - r && b.hi[0] <= c[0] + r {
                return Overlap::Inside;
            }
            if b.hi[0] <= c[0] - r || b.lo[0] >= c[0] + r {
                return Overlap::Outside;
            }
            return Overlap::Partial;
        }
        let far = |lo: f64, hi: f64, x: f64| (x - lo).abs().max((hi - x).abs());
        let near = |lo: f64, hi: f64, x: f64| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 };
        let (fx, fy) = (far(b.lo[0], b.hi[0], c[0]), far(b.lo[1], b.hi[1], c[1]));
        if fx * fx + fy * fy <= r * r {
            return Overlap::Inside;
        }
        let (nx, ny) = (near(b.lo[0], b.hi[0], c[0]), near(b.lo[1], b.hi[1], c[1]));
        if nx * nx + ny * ny >= r * r {
            Overlap::Outside
        } else {
            Overlap::Partial
        }
    }

    fn clipped(&self, b: &CellBox) -> f64 {
        clipped_cell_volume(b, self.center, self.radius, self.dim)
    }

    fn volume(&self) -> f64 {
        ball_volume(self.radius, self.dim)
    }
}

/// Axis-aligned box domain. In d = 1 only the first axis matters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub bounds: CellBox,
    pub dim: usize,
}

impl Domain for BoxDomain {
    fn classify(&self, b: &CellBox) -> Overlap {
        let axes = self.dim.min(2);
        let d = &self.bounds;
        if (0..axes).all(|a| b.lo[a] >= d.lo[a] && b.hi[a] <= d.hi[a]) {
            Overlap::Inside
        } else if (0..axes).any(|a| b.hi[a] <= d.lo[a] || b.lo[a] >= d.hi[a]) {
            Overlap::Outside
        } else {
            Overlap::Partial
        }
    }

    fn clipped(&self, b: &CellBox) -> f64 {
        let d = &self.bounds;
        (0..self.dim.min(2))
            .map(|a| (b.hi[a].min(d.hi[a]) - b.lo[a].max(d.lo[a])).max(0.0))
            .product()
    }

    fn volume(&self) -> f64 {
        self.bounds.volume(self.dim)
    }
}

/// Level-0 tile cut by the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTile {
    pub tile: usize,
    pub anchor: [i64; 2],
    /// Clipped volume over tile volume, in (0, 1].
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub pieces: Vec<Supertile>,
    pub boundary: Vec<BoundaryTile>,
}

/// Decomposition of `B(origin, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallDecomposition {
    pub radius: f64,
    pub center: [f64; 2],
    pub pieces: Vec<Supertile>,
    pub boundary_cells: Vec<BoundaryTile>,
}

impl Decomposition {
    /// Total covered volume.
    pub fn volume(&self, hier: &Hierarchy) -> f64 {
        let vols = hier.substitution().volumes();
        let inner: f64 = self.pieces.iter().map(|p| hier.cell_box(p).volume(hier.dim())).sum();
        let edge: f64 = self.boundary.iter().map(|b| b.fraction * vols[b.tile]).sum();
        inner + edge
    }
}

impl BallDecomposition {
    pub fn volume(&self, hier: &Hierarchy) -> f64 {
        Decomposition { pieces: self.pieces.clone(), boundary: self.boundary_cells.clone() }.volume(hier)
    }
}

/// Maximal supertiles inside `domain` and clipped level-0 tiles straddling its
/// boundary. Does not check that the domain lies in the window.
pub fn decompose(hier: &Hierarchy, domain: &impl Domain) -> Decomposition {
    let mut out = Decomposition { pieces: Vec::new(), boundary: Vec::new() };
    let mut stack = vec![hier.root_supertile()];
    while let Some(st) = stack.pop() {
        let b = hier.cell_box(&st);
        match domain.classify(&b) {
            Overlap::Outside => {}
            Overlap::Inside => out.pieces.push(st),
            Overlap::Partial if st.level == 0 => {
                let fraction = domain.clipped(&b) / b.volume(hier.dim());
                if fraction > 0.0 {
                    out.boundary.push(BoundaryTile { tile: st.tile, anchor: st.anchor, fraction: fraction.min(1.0) });
                }
            }
            Overlap::Partial => {
                // Reverse so that the traversal order is the rule order.
                let kids: Vec<_> = hier.children(&st).collect();
                stack.extend(kids.into_iter().rev());
            }
        }
    }
    out
}

pub fn ball_decomposition(window: &Window, r: f64) -> Result<BallDecomposition> {
    window.check_margin(r)?;
    let ball = Ball { center: window.origin(), radius: r, dim: window.dim() };
    let d = decompose(window.hierarchy(), &ball);
    Ok(BallDecomposition { radius: r, center: window.origin(), pieces: d.pieces, boundary_cells: d.boundary })
}
