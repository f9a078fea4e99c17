//! Finite-dimensional prequantum classical statistical field theory.
//!
//! The phase space is `Ω = Q × P` with `Q = P = ℝⁿ`. Statistical states are
//! zero-mean Gaussian measures on `Ω`, physical variables are symplectically
//! invariant polynomials in quadratic forms, and the map [`correspondence`]
//! projects both onto density operators and Hermitian observables on `ℂⁿ`.
//!
//! Modules:
//!
//! * [`phase`]: phase vectors, block operators, the symplectic operator `J`
//!   and the real/complex dictionary.
//! * [`gaussian`]: real and complex covariances, sampling, pure states.
//! * [`dynamics`]: Hamiltonian flows and their liftings to variables and
//!   measures, Poisson brackets, ensembles with random initial data.
//! * [`correspondence`]: the map `T`, exact and sampled averages and the
//!   small-`h` scaling study.

pub mod correspondence;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod gaussian;
pub mod linalg;
pub mod phase;
pub mod rng;
pub mod stats;
pub mod variable;
pub mod wick;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use correspondence::{DensityOperator, QuantumObservable};
pub use dynamics::FlowOperator;
pub use gaussian::{ComplexCovariance, GaussianState};
pub use phase::{BlockOperator, ComplexOperator, ComplexVector, PhaseVector, SymplecticOperator};
pub use variable::PolynomialVariable;
