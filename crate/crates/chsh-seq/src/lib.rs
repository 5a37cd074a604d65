//! Bell-CHSH experiments with uniformly mixed sequential measurements.
//!
//! In the usual Bell-test setup, Alice's and Bob's observables commute
//! (they act on different tensor factors), the marginal laws (no-signaling
//! conditions) hold automatically, and the CHSH quantity is limited by
//! Tsirelson's bound 2√2. This crate models the more general situation in
//! which the two parties' measurements may be incompatible and are executed
//! sequentially in a uniformly random order. Order effects then generically
//! violate the marginal laws, and the CHSH quantity is bounded by 2√3
//! instead.
//!
//! The crate provides:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigendecomposition,
//!   operator norms, tensor products, matrix exponentials;
//! - [`observables`]: dichotomic (±1) observables with spectral projectors;
//! - [`sequential`]: Born rule, projective collapse, mixed sequential joint
//!   distributions, marginal-law deviations;
//! - [`chsh`]: correlation functions, the symmetrized CHSH operator, the
//!   norm decomposition of its square, bound classification;
//! - [`montecarlo`]: seeded, shard-deterministic trajectory sampling;
//! - [`optimizer`]: derivative-free search for extremal CHSH values under
//!   structural constraints;
//! - [`cli`]: scenario files, reports, and the `chsh-seq` command-line tool.

pub mod chsh;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod observables;
pub mod optimizer;
pub mod sequential;

pub use chsh::{BellScenario, BoundClass, CHSHReport};
pub use error::{Error, Result};
pub use linalg::{Complex64, ComplexMatrix};
pub use observables::{DichotomicObservable, Sign, Signature, Site};
pub use sequential::QuantumState;
