//! Numerical toolkit for λ-hypersurfaces, i.e. immersions satisfying
//! `<X, N> + H = λ`.
//!
//! - [`geometry`]: pointwise geometry of graphs `(x, f(x))` and the λ-residual.
//! - [`surfaces`]: plane / sphere / cylinder with their closed-form λ.
//! - [`grid`], [`solver`]: the graphic λ-equation on uniform grids and its
//!   damped Newton solver.
//! - [`operator`]: the drift operator `L_(λ,f)` and the `ψ = log det g` inequality.
//! - [`flow`]: the weighted volume-preserving curvature flow for closed curves.
//! - [`diagnostics`]: Gauss-map hemisphere certificates and area growth.

pub mod diagnostics;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod operator;
pub mod solver;
pub mod sparse;
pub mod surfaces;

pub use geometry::{GradHess, PointGeometry};
pub use grid::{DomainShape, GridDomain, NodeKind, ScalarField};
pub use surfaces::{CanonicalGraph, CanonicalSurface, Orientation, SurfaceSample};
