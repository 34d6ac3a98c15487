//! Pseudo-probability solutions of the dilation equation
//! `μ(A) = Σ_k p_k μ(MA − k)` on the line (`M = 2`) and on the plane
//! (`M = 1+i`, twin-dragon tiles), in exact arithmetic over `ℚ(√d)`.
//!
//! Two cascades are provided:
//!
//! * [`cascade`]: discrete approximants `μₙ` on `M⁻ⁿΓ`, with a brute-force
//!   oracle and exact checks of the weight identities they satisfy;
//! * [`transfer`] + [`refine`]: the tile-measure eigenproblem at scale 0,
//!   then refinement of tile measures scale by scale.
//!
//! [`correspond`] lifts line data to the plane through shared binary
//! addresses, and [`emit`] renders and serializes everything.

pub mod cascade;
pub mod correspond;
pub mod emit;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod measure;
pub mod refine;
pub mod scalarfield;
pub mod transfer;

pub use error::{Error, Result};
pub use lattice::{Dilation, LatticeElem, Parity, RadixAddress, TileValueMap};
pub use measure::{CoefficientMask, DiscreteMeasure};
pub use scalarfield::{QuadScalar, Rational};
