//! Finite windows of tilings and domain decompositions.

pub mod clip;
pub mod decompose;
pub mod expand;
pub mod svg;
pub mod window;

pub use clip::{ball_volume, clipped_cell_volume, CellBox};
pub use decompose::{ball_decomposition, decompose, Ball, BallDecomposition, BoundaryTile, BoxDomain, Decomposition, Domain, Overlap};
pub use expand::{expand, Patch, PatchTile};
pub use svg::patch_svg;
pub use window::{make_window, Address, AnchorMode, CellInfo, Hierarchy, Region, SlotTable, Supertile, Window};
