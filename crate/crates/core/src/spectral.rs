//! Spectral representation of the monitored system.
//!
//! Everything downstream depends on the Hamiltonian and initial state only
//! through the energy levels and their overlap weights, so ingestion reduces
//! any input to a [`CanonicalSpectralModel`]: strictly increasing energies
//! with strictly positive weights summing to one. The canonical dimension is
//! the accessible Hilbert-space dimension that the mean detection count
//! quantizes to.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default absolute gap below which two energy levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Spectral weights below this floor are treated as inaccessible and dropped.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Tolerance on user-supplied weight sums and state norms.
pub const INPUT_TOL: f64 = 1e-10;

/// Unprocessed (energy, weight) pairs, possibly unsorted or degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectralModel {
    pub levels: Vec<(f64, f64)>,
}

impl RawSpectralModel {
    pub fn new(levels: Vec<(f64, f64)>) -> Self {
        RawSpectralModel { levels }
    }

    /// Ingestion check for user-supplied models: finite entries, nonnegative
    /// weights, total weight 1 within [`INPUT_TOL`].
    pub fn validate(&self) -> Result<()> {
        check_levels(&self.levels)?;
        let total: f64 = self.levels.iter().map(|&(_, w)| w).sum();
        if (total - 1.0).abs() > INPUT_TOL {
            return Err(Error::InvalidModel(format!(
                "weights must sum to 1, got {total:.17e}"
            )));
        }
        Ok(())
    }
}

impl From<&CanonicalSpectralModel> for RawSpectralModel {
    fn from(m: &CanonicalSpectralModel) -> Self {
        RawSpectralModel::new(m.energies.iter().copied().zip(m.weights.iter().copied()).collect())
    }
}

fn check_levels(levels: &[(f64, f64)]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidModel("model has no levels".into()));
    }
    for &(e, w) in levels {
        if !e.is_finite() {
            return Err(Error::InvalidModel(format!("non-finite energy {e}")));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "weight at energy {e} must be finite and nonnegative, got {w}"
            )));
        }
    }
    Ok(())
}

/// Distinct energy levels with strictly positive weights summing to one.
///
/// Construct via [`canonicalize`] (which merges degeneracies and drops
/// negligible weights) or [`CanonicalSpectralModel::new`] for levels already
/// known to be distinct.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalSpectralModel {
    energies: Vec<f64>,
    weights: Vec<f64>,
    #[serde(skip)]
    root_weights: Vec<f64>,
}

impl CanonicalSpectralModel {
    /// Validating constructor: energies strictly increasing and finite,
    /// weights strictly positive and summing to 1 within [`INPUT_TOL`].
    pub fn new(energies: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if energies.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} energies vs {} weights",
                energies.len(),
                weights.len()
            )));
        }
        check_levels(&energies.iter().copied().zip(weights.iter().copied()).collect::<Vec<_>>())?;
        for pair in energies.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidModel(format!(
                    "energies must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&w) = weights.iter().find(|&&w| w <= 0.0) {
            return Err(Error::InvalidModel(format!(
                "canonical weights must be strictly positive, got {w}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > INPUT_TOL {
            return Err(Error::InvalidModel(format!(
                "canonical weights must sum to 1, got {total:.17e}"
            )));
        }
        let root_weights = weights.iter().map(|&w| w.sqrt()).collect();
        Ok(CanonicalSpectralModel { energies, weights, root_weights })
    }

    /// Accessible Hilbert-space dimension N.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Square roots of the weights, the overlaps ⟨E_j|Ψ⟩ in the real gauge.
    pub fn root_weights(&self) -> &[f64] {
        &self.root_weights
    }
}

/// Eigendecompose a Hamiltonian and project the initial state onto its
/// eigenbasis, producing raw (energy, weight) pairs with weights
/// |⟨E_j|Ψ⟩|². Degenerate levels are left unmerged; run [`canonicalize`].
pub fn spectral_decompose(
    hamiltonian: &Array2<C64>,
    initial_state: &Array1<C64>,
) -> Result<RawSpectralModel> {
    let n = initial_state.len();
    if hamiltonian.nrows() != n || hamiltonian.ncols() != n || n == 0 {
        return Err(Error::InvalidModel(format!(
            "Hamiltonian is {}x{} but the state has dimension {n}",
            hamiltonian.nrows(),
            hamiltonian.ncols()
        )));
    }
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            residual = residual.max((hamiltonian[(i, j)] - hamiltonian[(j, i)].conj()).norm());
        }
    }
    if residual > INPUT_TOL {
        return Err(Error::NotHermitian { residual });
    }
    let norm_sq: f64 = initial_state.iter().map(|c| c.norm_sqr()).sum();
    let deviation = (norm_sq - 1.0).abs();
    if deviation > INPUT_TOL {
        return Err(Error::NotNormalized { deviation });
    }

    let (energies, vectors) = hamiltonian.eigh(UPLO::Lower)?;
    let levels: Vec<(f64, f64)> = energies
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let overlap: C64 =
                (0..n).map(|i| vectors[(i, j)].conj() * initial_state[i]).sum();
            (e, overlap.norm_sqr())
        })
        .collect();
    let total: f64 = levels.iter().map(|&(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NumericalHealth(format!(
            "eigenbasis weights sum to {total:.17e}, expected 1"
        )));
    }
    Ok(RawSpectralModel::new(levels))
}

/// Merge levels closer than `degeneracy_tol` (weights summed, energy set to
/// the weight-averaged cluster center), drop weights below [`WEIGHT_FLOOR`],
/// and renormalize the survivors.
///
/// Already-canonical inputs are returned unchanged, so repeated
/// canonicalization is exact.
pub fn canonicalize(
    raw: &RawSpectralModel,
    degeneracy_tol: f64,
) -> Result<CanonicalSpectralModel> {
    if !(degeneracy_tol > 0.0 && degeneracy_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "degeneracy tolerance must be positive and finite, got {degeneracy_tol}"
        )));
    }
    check_levels(&raw.levels)?;

    if let Some(done) = fast_path(&raw.levels, degeneracy_tol) {
        return done;
    }

    let mut levels = raw.levels.clone();
    levels.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Chain clustering: a gap ≤ tol joins the next level to the open cluster,
    // so cluster extents can exceed tol while inter-cluster gaps never do.
    let mut energies = Vec::new();
    let mut weights = Vec::new();
    let mut start = 0;
    for i in 0..levels.len() {
        let cluster_ends = i + 1 == levels.len() || levels[i + 1].0 - levels[i].0 > degeneracy_tol;
        if !cluster_ends {
            continue;
        }
        let cluster = &levels[start..=i];
        start = i + 1;
        let total: f64 = cluster.iter().map(|&(_, w)| w).sum();
        if total < WEIGHT_FLOOR {
            continue;
        }
        let center = if cluster.len() == 1 {
            cluster[0].0
        } else {
            cluster.iter().map(|&(e, w)| e * w).sum::<f64>() / total
        };
        energies.push(center);
        weights.push(total);
    }
    if energies.is_empty() {
        return Err(Error::EmptyAccessibleSpace);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    CanonicalSpectralModel::new(energies, weights)
}

/// Detect inputs that canonicalization would not change: sorted with every
/// gap above tolerance, no weight below the floor, and total weight already
/// 1 to rounding.
fn fast_path(
    levels: &[(f64, f64)],
    degeneracy_tol: f64,
) -> Option<Result<CanonicalSpectralModel>> {
    let sorted_and_separated = levels
        .windows(2)
        .all(|pair| pair[1].0 - pair[0].0 > degeneracy_tol);
    if !sorted_and_separated || levels.iter().any(|&(_, w)| w < WEIGHT_FLOOR) {
        return None;
    }
    let total: f64 = levels.iter().map(|&(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-14 * levels.len() as f64 {
        return None;
    }
    let (energies, weights) = levels.iter().copied().unzip();
    Some(CanonicalSpectralModel::new(energies, weights))
}
