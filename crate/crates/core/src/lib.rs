//! Dyadic hypersingular operators on the unit disc and the unit cube.
//!
//! The crate computes, on explicit grids:
//!
//! * dyadic Carleson boxes for two shifted arc systems ([`geometry`]) and
//!   graded sparse families with sparseness witnesses ([`sparse`]);
//! * the maximal operator `M_t f(z) = sup_{Q ∋ z} |Q|^{-t} ∫_Q |f|`, graded
//!   sparse operators and level-set decompositions ([`operators`]);
//! * Bergman-type kernels `(1 - z w̄)^{-2t}` and their moduli by quadrature,
//!   with pointwise sparse domination checks ([`bergman`]);
//! * exact corner norms, Lebesgue and Lorentz quantities ([`norms`]);
//! * the exponent-plane classification and Bourgain interpolation
//!   ([`regions`]);
//! * radial weights and the weighted endpoint criteria ([`weights`]).
//!
//! [`experiment`] drives all of it from a flat config and backs the
//! `hypersingular` command-line tool.
//!
//! Disc points are stored as `(1 - |z|, arg z / 2π)` so that quantities near
//! the boundary keep full relative precision.

pub mod bergman;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grid;
pub mod norms;
pub mod operators;
pub mod regions;
pub mod sparse;
pub mod weights;

pub use error::{Error, Result};
pub use geometry::{CarlesonBox, DiscPoint, DyadicArc, DyadicSystem, MeasureConvention};
pub use grid::{CubeGrid, DiscGrid, Grid, GridFunction, PolarGrid, RadialGrid, RadialLayout};
pub use operators::{MaximalOperator, PositiveOperator, SparseOperator};
pub use sparse::{DyadicCube, GradedSparseFamily};
