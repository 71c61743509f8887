//! Averaged-evolution superoperators on the doubled (bra ⊗ ket) space.
//!
//! Averaging one measurement cycle over the waiting time turns the pure-state
//! recursion into linear algebra on N²-dimensional compound vectors indexed
//! row-major by (j1, j2): a Kronecker product acts as
//! [A×B]_{(j1j2),(j3j4)} = A_{j1j3} B_{j2j4}. The cycle factorizes into
//!
//! - the averaged phase matrix, diagonal with entries
//!   ⟨e^{i(ω + E_{j1} − E_{j2})τ}⟩ (ω an optional frequency shift),
//! - the missed-detection projector (1−EΠ)×(1−EΠ), with Π = diag(p) and E
//!   the all-ones matrix,
//!
//! giving the propagator Γ̂ = D̂·Ĉ for surviving trajectories and the source
//! Ĝ = D̂·(EΠ×EΠ) injecting the initial pair state. Return statistics are
//! traces Tr[Γ̂^{k−1}Ĝ]; because EΠ×EΠ = 1·π̂ᵀ is rank one (π̂ the vector of
//! weight products p_{j3}p_{j4}), every such trace contracts to
//! π̂ᵀ Γ̂^{k−1} u with u the source column D̂·1. Powers are evaluated by
//! repeated application, never by eigendecomposition: Γ̂ is not normal.
//!
//! One-sided averages Ĉ₁ = (⟨D*⟩(1−EΠ))×1 and Ĉ₂ = 1×(⟨D⟩(1−EΠ)) extend the
//! same algebra to amplitude correlators ⟨φ_k* φ_{k'}⟩ at unequal orders.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, FactorizeInto, ReciprocalConditionNum, Solve};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::CanonicalSpectralModel;
use crate::times::TimeDistribution;

/// Off-diagonal averaged-phase moduli above 1 − this mark a resonant pair.
pub const RESONANCE_TOL: f64 = 1e-8;
/// Reciprocal condition numbers below this abort resolvent solves.
pub const RCOND_FLOOR: f64 = 1e-12;

/// Immutable bundle of the dense N²×N² operators for one (model,
/// distribution, frequency shift) triple.
#[derive(Debug, Clone)]
pub struct SuperoperatorSet {
    n: usize,
    omega_shift: f64,
    weights: Vec<f64>,
    /// Diagonal of the averaged phase matrix D̂, compound index (j1, j2).
    d_avg: Array1<C64>,
    /// Missed-detection projector Ĉ = (1−EΠ)×(1−EΠ).
    c_miss: Array2<C64>,
    /// Propagator Γ̂ = D̂·Ĉ.
    gamma: Array2<C64>,
    /// Source Ĝ = D̂·(EΠ×EΠ) = u·π̂ᵀ, materialized dense.
    g_source: Array2<C64>,
    /// Bra-side one-step average Ĉ₁ = (⟨D*⟩(1−EΠ))×1.
    c_left: Array2<C64>,
    /// Ket-side one-step average Ĉ₂ = 1×(⟨D⟩(1−EΠ)).
    c_right: Array2<C64>,
    /// π̂, the weight-product vector p_{j3}p_{j4}.
    weight_pairs: Array1<f64>,
    /// Off-diagonal (j1, j2) pairs whose averaged phase is unimodular to
    /// within the resonance tolerance; nonempty means 1−Γ̂ is near-singular.
    resonant_pairs: Vec<(usize, usize)>,
    radius: f64,
}

/// Residuals of the exact matrix identities obeyed by D̂ and Ĉ.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityReport {
    /// Max deviation of the weighted diagonal-row contraction of
    /// ⟨D̂⟩^{−1} − Ĉ from the weight-product vector π̂.
    pub residual1: f64,
    /// Max deviation of the row sums of (⟨D̂⟩^{−1} − Ĉ)^{−1} from
    /// δ_{j1j2}/p_{j1}.
    pub residual2: f64,
    /// Reciprocal condition estimate of the inverted matrix.
    pub rcond: f64,
}

impl SuperoperatorSet {
    /// Assemble all operators for the given model, waiting-time
    /// distribution, and frequency shift ω.
    ///
    /// Never fails on resonance: near-unimodular off-diagonal phase
    /// averages are recorded in [`SuperoperatorSet::resonant_pairs`] as a
    /// warning, and downstream solves fail with structured errors instead.
    pub fn build(
        model: &CanonicalSpectralModel,
        d: &TimeDistribution,
        omega_shift: f64,
    ) -> Result<Self> {
        d.validate()?;
        if !omega_shift.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency shift must be finite, got {omega_shift}"
            )));
        }
        let n = model.dim();
        let nn = n * n;
        let e = model.energies();
        let p = model.weights();
        let pair = |j1: usize, j2: usize| j1 * n + j2;

        let mut d_avg = Array1::zeros(nn);
        let mut resonant_pairs = Vec::new();
        for j1 in 0..n {
            for j2 in 0..n {
                let value = d.char_fn(omega_shift + e[j1] - e[j2]);
                d_avg[pair(j1, j2)] = value;
                if j1 != j2 && value.norm() > 1.0 - RESONANCE_TOL {
                    resonant_pairs.push((j1, j2));
                }
            }
        }

        // miss_{ik} = δ_{ik} − p_k, the one-sided missed-detection factor.
        let miss = |i: usize, k: usize| if i == k { 1.0 - p[k] } else { -p[k] };

        let mut c_miss = Array2::zeros((nn, nn));
        let mut c_left = Array2::zeros((nn, nn));
        let mut c_right = Array2::zeros((nn, nn));
        for j1 in 0..n {
            let bra_avg = d.char_fn(e[j1]);
            for j2 in 0..n {
                let r = pair(j1, j2);
                let ket_avg = d.char_fn(-e[j2]);
                for j3 in 0..n {
                    for j4 in 0..n {
                        c_miss[(r, pair(j3, j4))] =
                            C64::new(miss(j1, j3) * miss(j2, j4), 0.0);
                    }
                    c_left[(r, pair(j3, j2))] = bra_avg * miss(j1, j3);
                    c_right[(r, pair(j1, j3))] = ket_avg * miss(j2, j3);
                }
            }
        }

        let weight_pairs = Array1::from_iter(
            (0..nn).map(|i| p[i / n] * p[i % n]),
        );
        let mut gamma = c_miss.clone();
        let mut g_source = Array2::zeros((nn, nn));
        for r in 0..nn {
            for c in 0..nn {
                gamma[(r, c)] *= d_avg[r];
                g_source[(r, c)] = d_avg[r] * weight_pairs[c];
            }
        }

        let radius = gamma
            .eigvals()?
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if radius > 1.0 + 1e-10 {
            return Err(Error::NumericalHealth(format!(
                "propagator spectral radius {radius:.17e} exceeds 1"
            )));
        }

        Ok(SuperoperatorSet {
            n,
            omega_shift,
            weights: p.to_vec(),
            d_avg,
            c_miss,
            gamma,
            g_source,
            c_left,
            c_right,
            weight_pairs,
            resonant_pairs,
            radius,
        })
    }

    /// Accessible-space dimension N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Compound-space dimension N².
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn omega_shift(&self) -> f64 {
        self.omega_shift
    }

    pub fn resonant_pairs(&self) -> &[(usize, usize)] {
        &self.resonant_pairs
    }

    /// Largest eigenvalue modulus of the propagator Γ̂.
    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    pub fn propagator(&self) -> &Array2<C64> {
        &self.gamma
    }

    pub fn source(&self) -> &Array2<C64> {
        &self.g_source
    }

    /// Source column u = D̂·1; the source factorizes as Ĝ = u·π̂ᵀ.
    pub fn source_column(&self) -> &Array1<C64> {
        &self.d_avg
    }

    /// π̂ᵀ·v, the contraction closing every trace against the source.
    pub fn source_trace(&self, v: &Array1<C64>) -> C64 {
        v.iter().zip(&self.weight_pairs).map(|(x, &w)| x * w).sum()
    }

    /// Exact time-averaged return probability ⟨|φ_k|²⟩ = Tr[Γ̂^{k−1}Ĝ].
    pub fn avg_return_prob(&self, k: u64) -> Result<f64> {
        if k < 1 {
            return Err(Error::InvalidArgument("return order k must be >= 1".into()));
        }
        let mut v = self.d_avg.clone();
        for _ in 1..k {
            v = self.gamma.dot(&v);
        }
        self.real_probability(self.source_trace(&v), k)
    }

    /// Return probabilities for k = 1..=k_max in one propagator sweep.
    pub fn return_probs(&self, k_max: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(k_max);
        let mut v = self.d_avg.clone();
        for k in 1..=k_max {
            out.push(self.real_probability(self.source_trace(&v), k as u64)?);
            if k < k_max {
                v = self.gamma.dot(&v);
            }
        }
        Ok(out)
    }

    fn real_probability(&self, trace: C64, k: u64) -> Result<f64> {
        if trace.im.abs() > 1e-12 {
            return Err(Error::NumericalHealth(format!(
                "return probability at k={k} has imaginary part {:.3e}",
                trace.im
            )));
        }
        if !(-1e-10..=1.0 + 1e-10).contains(&trace.re) {
            return Err(Error::NumericalHealth(format!(
                "return probability at k={k} outside [0,1]: {:.17e}",
                trace.re
            )));
        }
        Ok(trace.re.clamp(0.0, 1.0))
    }

    /// Amplitude correlator ⟨φ_k* φ_{k'}⟩, Hermitian in (k, k').
    ///
    /// The later index rides on whichever one-sided average matches its
    /// side: Tr[Ĉ₁^{k−k'} Γ̂^{k'−1} Ĝ] for k ≥ k', Tr[Ĉ₂^{k'−k} Γ̂^{k−1} Ĝ]
    /// for k' ≥ k.
    pub fn correlator(&self, k: u64, kp: u64) -> Result<C64> {
        if k < 1 || kp < 1 {
            return Err(Error::InvalidArgument("correlator orders must be >= 1".into()));
        }
        let (shared, excess, one_sided) = if k >= kp {
            (kp, k - kp, &self.c_left)
        } else {
            (k, kp - k, &self.c_right)
        };
        let mut v = self.d_avg.clone();
        for _ in 1..shared {
            v = self.gamma.dot(&v);
        }
        for _ in 0..excess {
            v = one_sided.dot(&v);
        }
        Ok(self.source_trace(&v))
    }

    /// Dense table of correlators for 1 ≤ k, k' ≤ k_max, each triangle
    /// computed through its own one-sided average.
    pub fn correlator_table(&self, k_max: usize) -> Result<Array2<C64>> {
        let mut table = Array2::zeros((k_max, k_max));
        let mut shared = self.d_avg.clone();
        for base in 1..=k_max {
            table[(base - 1, base - 1)] = self.source_trace(&shared);
            let mut upper = shared.clone();
            let mut lower = shared.clone();
            for far in base + 1..=k_max {
                lower = self.c_left.dot(&lower);
                upper = self.c_right.dot(&upper);
                table[(far - 1, base - 1)] = self.source_trace(&lower);
                table[(base - 1, far - 1)] = self.source_trace(&upper);
            }
            if base < k_max {
                shared = self.gamma.dot(&shared);
            }
        }
        Ok(table)
    }

    /// Solve (1 − zΓ̂)·x = rhs, guarding against near-singular resolvents.
    pub fn resolvent_solve(&self, z: C64, rhs: &Array1<C64>) -> Result<Array1<C64>> {
        let nn = self.dim();
        let mut a = -z * &self.gamma;
        for i in 0..nn {
            a[(i, i)] += 1.0;
        }
        let lu = a.factorize_into()?;
        let rcond = lu.rcond()?;
        if rcond < RCOND_FLOOR {
            return Err(Error::Resonance {
                detail: format!(
                    "resolvent 1 - z*propagator is near-singular at z = {z}"
                ),
                rcond: Some(rcond),
            });
        }
        Ok(lu.solve(rhs)?)
    }

    /// Residuals of two exact identities tying D̂, Ĉ, and the weights
    /// together; both vanish identically for any model and distribution.
    ///
    /// The first contracts the diagonal rows of M = ⟨D̂⟩^{−1} − Ĉ with the
    /// weights: Σ_j p_j·M_{(jj),(j3j4)} = p_{j3}p_{j4}. The second sums the
    /// rows of M^{−1}: Σ_{j3j4} M^{−1}_{(j1j2),(j3j4)} = δ_{j1j2}/p_{j1}.
    pub fn verify_identities(&self) -> Result<IdentityReport> {
        let n = self.n;
        let nn = self.dim();
        for (i, v) in self.d_avg.iter().enumerate() {
            if v.norm() < 1e-14 {
                return Err(Error::NumericalHealth(format!(
                    "averaged phase for pair ({}, {}) vanishes; its inverse is undefined",
                    i / n,
                    i % n
                )));
            }
        }
        let mut m = -&self.c_miss;
        for i in 0..nn {
            m[(i, i)] += 1.0 / self.d_avg[i];
        }

        let mut residual1 = 0.0f64;
        for c in 0..nn {
            let contracted: C64 = (0..n)
                .map(|j| self.weights[j] * m[(j * n + j, c)])
                .sum();
            residual1 = residual1.max((contracted - self.weight_pairs[c]).norm());
        }

        let lu = m.factorize_into()?;
        let rcond = lu.rcond()?;
        if rcond < RCOND_FLOOR {
            return Err(Error::Resonance {
                detail: "identity check matrix is near-singular".into(),
                rcond: Some(rcond),
            });
        }
        let row_sums = lu.solve(&Array1::from_elem(nn, C64::new(1.0, 0.0)))?;
        let mut residual2 = 0.0f64;
        for j1 in 0..n {
            for j2 in 0..n {
                let want = if j1 == j2 { 1.0 / self.weights[j1] } else { 0.0 };
                residual2 = residual2
                    .max((row_sums[j1 * n + j2] - C64::new(want, 0.0)).norm());
            }
        }
        Ok(IdentityReport { residual1, residual2, rcond })
    }
}
