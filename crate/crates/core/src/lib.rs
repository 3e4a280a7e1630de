//! Numerical toolkit for free noncommutative function theory.
//!
//! The crate is organised bottom-up:
//!
//! * [`freemonoid`]: words over `{1..d}`, the index set of every coefficient.
//! * [`ncseries`]: truncated free formal power series and their
//!   Cauchy–Hadamard radius.
//! * [`nceval`]: matrix tuples with their row norm and joint spectral radius;
//!   certified evaluation of series at matrix points.
//! * [`realization`]: NC rational/meromorphic expressions and their linear
//!   pencil realizations.
//! * [`fock`]: the degree-truncated full Fock space, its creation operators
//!   and Szegő kernels.
//! * [`hardy`]: kernels and wandering dimensions of row multipliers;
//!   directional varieties and the easy half of the Nullstellensatz.
//! * [`randmat`]: seeded Gaussian ensembles and strong/trace convergence
//!   experiments.

pub mod error;
pub mod fock;
pub mod freemonoid;
pub mod hardy;
pub mod linalg;
pub mod nceval;
pub mod ncseries;
pub mod randmat;
pub mod realization;

pub use error::{Error, Result};
pub use fock::FockBasis;
pub use freemonoid::Word;
pub use nceval::MatrixTuple;
pub use ncseries::FreeSeries;
pub use realization::{RationalExpr, Realization};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
