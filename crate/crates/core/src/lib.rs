//! Operator-adapted function spaces on finite grids.
//!
//! The crate discretizes self-adjoint operators (Laplacian, Schrödinger with
//! electric and magnetic potentials, divergence-form elliptic operators),
//! builds their functional calculus, and measures the objects that the
//! Littlewood–Paley theory of such operators is built on:
//!
//! - dyadic partitions of unity on the spectrum ([`partition`]),
//! - Besov and Triebel–Lizorkin norms and the block retraction `S`/`R` ([`spaces`]),
//! - kernel decay, Gaussian heat bounds and the maximal-function lemma ([`bounds`]),
//! - Peetre K-functionals and interpolation-norm identities ([`interp`]).
//!
//! Everything runs on dense eigendecompositions of small grids, with a
//! Chebyshev path for vector application on larger ones.

pub mod bounds;
pub mod cache;
pub mod calculus;
pub mod error;
pub mod grid;
pub mod interp;
pub mod operators;
pub mod partition;
pub mod spaces;

pub use calculus::{KernelMatrix, SpectralDecomposition};
pub use error::{Error, Result};
pub use grid::{Boundary, Grid, GridFunction, GridSpec};
pub use num_complex::Complex64;
pub use operators::{OperatorKind, PotentialSpec, SelfAdjointOperator};
pub use partition::{DyadicSystem, PartitionPair, TransitionProfile, WindowFamily};
pub use spaces::{BlockSequence, Flavor, SpaceParams};
