//! Finite models of noncommutative martingales: Hardy and BMO norms,
//! John–Nirenberg functionals, atoms and the standard examples.
//!
//! The model is `ℓ∞(S; M_n(ℂ))` with the trace `τ(x) = Σ_s μ_s tr(x_s)/n`
//! and the filtration generated by a refining sequence of partitions of
//! `S`. Levels are 1-based; the finest level consists of singletons.

pub mod atoms;
pub mod error;
pub mod instances;
pub mod jn;
pub mod norms;
pub mod operator;
pub mod sampling;
pub mod space;
pub mod spectral;

pub use error::{NcError, Result};
pub use norms::{Exponent, NormFamily, NormReport};
pub use operator::{MartingaleDiffs, Operator, ProjectionWitness, SpectralFn};
pub use space::TraceSpace;
