//! First-detected-return statistics of a monitored quantum system.
//!
//! A closed system prepared in |Ψ⟩ evolves freely and is probed by
//! projective yes/no measurements of |Ψ⟩ at random times τ_1, τ_2, …
//! drawn independently from a waiting-time distribution. This crate
//! computes the statistics of the first successful detection:
//!
//! - [`trajectory`] simulates single realizations and samples
//!   first-detection events (Monte Carlo route);
//! - [`superop`] averages the evolution over the waiting time exactly,
//!   as dense superoperators on the doubled index space;
//! - [`analysis`] extracts generating functions and moments, including the
//!   quantization of the mean detection count to the accessible
//!   Hilbert-space dimension N, and the stroboscopic closed forms;
//! - [`winding`] computes the topological side of the same story:
//!   per-realization winding numbers of truncated amplitude loops and
//!   their averaged and correlator-based counterparts;
//! - [`two_level`] holds closed forms for the symmetric two-level system,
//!   used as ground truth throughout the test suite.
//!
//! All engines consume a [`spectral::CanonicalSpectralModel`], since every
//! observable depends on the Hamiltonian and the state only through the
//! energy levels E_j and their overlap weights p_j = |⟨E_j|Ψ⟩|².

pub mod analysis;
pub mod error;
pub mod spectral;
pub mod superop;
pub mod times;
pub mod trajectory;
pub mod two_level;
pub mod winding;

pub use analysis::{MomentMethod, MomentReport};
pub use error::{Error, Result};
pub use spectral::{
    canonicalize, spectral_decompose, CanonicalSpectralModel, RawSpectralModel,
};
pub use superop::{IdentityReport, SuperoperatorSet};
pub use times::TimeDistribution;
pub use trajectory::{FirstDetectionSample, Trajectory};
pub use two_level::{FluctuationRow, TwoLevelParams};
pub use winding::{WindingMethod, WindingResult};

/// Complex double, the scalar type of all amplitudes and superoperators.
pub type C64 = num_complex::Complex64;
