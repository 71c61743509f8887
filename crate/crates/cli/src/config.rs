//! JSON experiment configuration shared by all subcommands.
//!
//! A single schema covers every command; fields irrelevant to the chosen
//! command may be present and are ignored, unknown fields are rejected.

use monret::{
    spectral_decompose, CanonicalSpectralModel, RawSpectralModel, TimeDistribution, C64,
};
use ndarray::{Array1, Array2};
use serde::Deserialize;

/// Top-level experiment configuration. Every field is optional at parse
/// time; each command checks for what it needs and rejects the rest of the
/// way with a schema error.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelInput>,
    pub dist: Option<TimeDistribution>,
    /// Measurement cap for Monte Carlo sampling (default 1e6).
    pub k_max: Option<u64>,
    /// Number of Monte Carlo realizations (default 100_000).
    pub samples: Option<u64>,
    /// RNG seed; the --seed flag overrides it, absent both it defaults to 0.
    pub seed: Option<u64>,
    /// Frequency grid size for sweeps and winding (command-specific default).
    pub omega_points: Option<usize>,
    /// Highest moment order to report (default 2).
    pub m_max: Option<u32>,
    /// Relative tolerance for truncated moment series (default 1e-10).
    pub rel_tol: Option<f64>,
    /// Measurements per trajectory realization (default 40).
    pub steps: Option<usize>,
    /// Number of trajectory realizations (default 3).
    pub realizations: Option<u64>,
    /// Coupling grid for the fluctuation curves.
    pub j_grid: Option<Vec<f64>>,
    /// Exponential rate and stroboscopic period for the fluctuation curves
    /// (default 1.0).
    pub tau_or_rate: Option<f64>,
}

/// Spectral model input: either explicit levels or a Hamiltonian matrix
/// with an initial state, both in plain-JSON form.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelInput {
    Levels(LevelsInput),
    Hamiltonian(HamiltonianInput),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsInput {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Complex entries are `[re, im]` pairs; the matrix is a list of rows.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianInput {
    pub hamiltonian: Vec<Vec<[f64; 2]>>,
    pub initial_state: Vec<[f64; 2]>,
}

impl ModelInput {
    /// Validate the raw input and reduce it to the canonical level model.
    pub fn to_canonical(&self) -> monret::Result<CanonicalSpectralModel> {
        let raw = match self {
            ModelInput::Levels(levels) => {
                if levels.energies.len() != levels.weights.len() {
                    return Err(monret::Error::InvalidModel(format!(
                        "{} energies but {} weights",
                        levels.energies.len(),
                        levels.weights.len()
                    )));
                }
                let raw = RawSpectralModel::new(
                    levels
                        .energies
                        .iter()
                        .zip(&levels.weights)
                        .map(|(&e, &w)| (e, w))
                        .collect(),
                );
                raw.validate()?;
                raw
            }
            ModelInput::Hamiltonian(input) => {
                let n = input.hamiltonian.len();
                if n == 0 || input.hamiltonian.iter().any(|row| row.len() != n) {
                    return Err(monret::Error::InvalidModel(
                        "hamiltonian must be a nonempty square matrix of [re, im] pairs"
                            .into(),
                    ));
                }
                if input.initial_state.len() != n {
                    return Err(monret::Error::InvalidModel(format!(
                        "initial state has {} entries for a {n}x{n} hamiltonian",
                        input.initial_state.len()
                    )));
                }
                let h = Array2::from_shape_fn((n, n), |(i, j)| {
                    let [re, im] = input.hamiltonian[i][j];
                    C64::new(re, im)
                });
                let psi = Array1::from_iter(
                    input.initial_state.iter().map(|&[re, im]| C64::new(re, im)),
                );
                spectral_decompose(&h, &psi)?
            }
        };
        monret::canonicalize(&raw, monret::spectral::DEGENERACY_TOL)
    }
}

impl ExperimentConfig {
    pub fn model(&self) -> monret::Result<CanonicalSpectralModel> {
        self.model
            .as_ref()
            .ok_or_else(|| monret::Error::InvalidModel("config is missing \"model\"".into()))?
            .to_canonical()
    }

    pub fn dist(&self) -> monret::Result<TimeDistribution> {
        let d = self.dist.clone().ok_or_else(|| {
            monret::Error::InvalidDistribution("config is missing \"dist\"".into())
        })?;
        d.validate()?;
        Ok(d)
    }
}
