//! Hermitean quadratic forms on atomic direct integrals of Hilbert spaces.
//!
//! The crate models forms `Q(Φ) = Σ_α μ({α}) <Φ(α), H_α Φ(α)>` that need not
//! be bounded above or below, builds the self-adjoint operator representing
//! them fiber by fiber, and provides numerical checks for the structural
//! properties involved (orthogonal additivity, closability, graph-norm
//! bounds, spectral representation, group invariance).

pub mod cli;
pub mod config;
pub mod direct_integral;
pub mod error;
pub mod forms;
pub mod group;
pub mod measure;
pub mod models;
pub mod report;
pub mod sampling;
pub mod spectral;

pub use direct_integral::{CVector, FiberLayout, FiberMetric, Section};
pub use error::{Error, Result};
pub use forms::{CMatrix, DirectIntegralForm, QuadraticForm};
pub use measure::{Atom, AtomicMeasureSpace, IndexSet, Partition};
pub use spectral::{decompose, BorelSet, SpectralModel, Verdict};
