//! Generating functions and moments of the first-detection statistics.
//!
//! The averaged return probabilities ⟨|φ_k|²⟩ are organized by two
//! generating functions,
//!
//! - F(ω)  = Σ_k e^{iωk} ⟨|φ_k|²⟩, a resolvent trace at z = e^{iω},
//! - F_τ(ω) = Σ_k ⟨e^{iω(τ_1+…+τ_k)}|φ_k|²⟩, the same trace built from the
//!   frequency-shifted superoperator set,
//!
//! both normalized to 1 at ω = 0 because detection is eventually certain.
//! The mean detection count and higher moments follow from derivatives at
//! ω = 0; the mean comes from a double resolvent solve and is quantized to
//! the accessible dimension N, while higher moments are summed as truncated
//! series with a certified geometric tail bound.
//!
//! For strictly periodic monitoring the generating function of amplitudes
//! collapses to ũ(ω) = Σ_j p_j ζ_j/(1−ζ_j) with ζ_j = e^{i(ω−E_jτ₀)}; each
//! term has real part −1/2 away from ζ_j = 1, which forces the detection
//! amplitude φ̃ = 1 − 1/(1+ũ) onto the unit circle and underlies the
//! winding-number quantization.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::CanonicalSpectralModel;
use crate::superop::SuperoperatorSet;
use crate::times::TimeDistribution;
use crate::trajectory::FirstDetectionSample;

/// Spectral radii above 1 − this make moment series uncertifiable.
pub const RADIUS_CEILING: f64 = 1e-8;
/// Hard cap on summed series terms.
pub const SERIES_CAP: u64 = 1_000_000;
/// A stroboscopic phase counts as resonant when |1 − ζ_j| falls below this.
pub const STROBO_RESONANCE_TOL: f64 = 1e-8;

/// How a [`MomentReport`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    Exact,
    MonteCarlo,
    #[serde(rename = "closed_form_2ls")]
    ClosedForm2ls,
}

/// Moments of the first-detection count k and time t.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub method: MomentMethod,
    pub mean_k: f64,
    pub mean_t: f64,
    /// ⟨k^m⟩ for m = 1..=m_max.
    pub moments_k: BTreeMap<u32, f64>,
    /// ⟨t^m⟩ for m = 1..=m_max.
    pub moments_t: BTreeMap<u32, f64>,
    /// Series length (exact) or sample cap (Monte Carlo).
    pub truncation_k: u64,
    /// Bound on the omitted series tail at the highest order; 0 for Monte
    /// Carlo, where censoring is reported instead.
    pub tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub censored_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_errors_k: Option<BTreeMap<u32, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_errors_t: Option<BTreeMap<u32, f64>>,
}

/// F(ω) = e^{iω}·Tr[(1 − e^{iω}Γ̂)^{−1}Ĝ] on a prebuilt unshifted set.
pub fn generating_f_with(s: &SuperoperatorSet, omega: f64) -> Result<C64> {
    let z = C64::from_polar(1.0, omega);
    let x = s.resolvent_solve(z, s.source_column())?;
    Ok(z * s.source_trace(&x))
}

/// F(ω) for the given model and waiting-time distribution.
pub fn generating_f(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    omega: f64,
) -> Result<C64> {
    let s = SuperoperatorSet::build(model, d, 0.0)?;
    generating_f_with(&s, omega)
}

/// F_τ(ω) = Tr[(1 − Γ̂_ω)^{−1}Ĝ_ω], built from the ω-shifted set.
pub fn generating_f_tau(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    omega: f64,
) -> Result<C64> {
    let s = SuperoperatorSet::build(model, d, omega)?;
    let x = s.resolvent_solve(C64::new(1.0, 0.0), s.source_column())?;
    Ok(s.source_trace(&x))
}

/// Mean detection count k̄ on a prebuilt unshifted set.
pub fn mean_k_with(s: &SuperoperatorSet) -> Result<f64> {
    let one = C64::new(1.0, 0.0);
    let x = s.resolvent_solve(one, s.source_column())?;
    let x = s.resolvent_solve(one, &x)?;
    let value = s.source_trace(&x);
    if value.im.abs() > 1e-10 {
        return Err(Error::NumericalHealth(format!(
            "mean detection count has imaginary part {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Mean detection count k̄ = Tr[(1−Γ̂)^{−2}Ĝ]; equals the accessible
/// dimension N.
pub fn mean_k(model: &CanonicalSpectralModel, d: &TimeDistribution) -> Result<f64> {
    mean_k_with(&SuperoperatorSet::build(model, d, 0.0)?)
}

/// Mean detection time t̄ = ⟨τ⟩·k̄.
pub fn mean_t(model: &CanonicalSpectralModel, d: &TimeDistribution) -> Result<f64> {
    Ok(d.mean() * mean_k(model, d)?)
}

/// ⟨k^m⟩ as a truncated series Σ_k k^m ⟨|φ_k|²⟩ with tail bound below
/// `rel_tol` (the moments are ≥ 1, so the absolute bound is also relative).
pub fn moment(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    m: u32,
    rel_tol: f64,
) -> Result<f64> {
    let report = moment_report_exact(model, d, m.max(1), rel_tol)?;
    report
        .moments_k
        .get(&m.max(1))
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("moment order {m} not computed")))
}

/// Geometric envelope (C, ρ_b) with ⟨|φ_k|²⟩ ≤ C·ρ_b^{k−1}, calibrated on
/// the first 20 return probabilities; ρ_b is floored at 1e-8 so nilpotent
/// propagators (exact zero radius) still get a finite calibration.
pub fn decay_envelope(s: &SuperoperatorSet) -> Result<(f64, f64)> {
    let rho_b = s.spectral_radius().max(1e-8);
    let head = s.return_probs(20)?;
    let mut c_env = 1e-30f64;
    let mut scale = 1.0;
    for &p in &head {
        c_env = c_env.max(p / scale);
        scale *= rho_b;
    }
    Ok((c_env, rho_b))
}

/// Series truncation K and the tail bound Σ_{k>K} k^m C ρ^{k−1} ≤
/// C·(K+1)^m·ρ^K/(1 − ρ·e^{m/(K+1)}), valid whenever ρ·e^{m/(K+1)} < 1.
fn tail_bound(c: f64, rho: f64, m: u32, k: u64) -> f64 {
    let kp1 = (k + 1) as f64;
    let damped = rho * (m as f64 / kp1).exp();
    if damped >= 1.0 {
        return f64::INFINITY;
    }
    c * kp1.powi(m as i32) * rho.powf(k as f64) / (1.0 - damped)
}

fn binom(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact moment report: k-moments by truncated series, t-moments by the
/// convolution recursion ⟨t^m⟩ = Σ_k ⟨|φ_k|²⟩·E[(τ_1+…+τ_k)^m] with
/// E[S_k^j] = Σ_i C(j,i)·E[S_{k−1}^i]·⟨τ^{j−i}⟩.
pub fn moment_report_exact(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    m_max: u32,
    rel_tol: f64,
) -> Result<MomentReport> {
    if m_max < 1 {
        return Err(Error::InvalidArgument("moment order must be >= 1".into()));
    }
    if !(rel_tol > 0.0 && rel_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let s = SuperoperatorSet::build(model, d, 0.0)?;
    let rho = s.spectral_radius();
    if rho >= 1.0 - RADIUS_CEILING {
        return Err(Error::Resonance {
            detail: format!(
                "propagator spectral radius {rho:.12} touches 1: the detection \
                 statistics have a divergent moment series at this resonance"
            ),
            rcond: None,
        });
    }
    let (c_env, rho_b) = decay_envelope(&s)?;

    let mut k_trunc = ((rel_tol * (1.0 - rho_b) / c_env).ln() / rho_b.ln()).ceil() as u64;
    k_trunc = k_trunc.clamp(20, SERIES_CAP);
    while tail_bound(c_env, rho_b, m_max, k_trunc) > rel_tol && k_trunc < SERIES_CAP {
        k_trunc = (k_trunc * 2).min(SERIES_CAP);
    }
    let bound = tail_bound(c_env, rho_b, m_max, k_trunc);
    if bound > rel_tol {
        return Err(Error::NumericalHealth(format!(
            "series tail bound {bound:.3e} still above {rel_tol:.3e} at the \
             {SERIES_CAP}-term cap"
        )));
    }

    let mu: Vec<f64> = (0..=m_max).map(|j| d.raw_moment(j)).collect();
    let mut conv = vec![0.0f64; m_max as usize + 1];
    conv[0] = 1.0;
    let mut moments_k: BTreeMap<u32, f64> = (1..=m_max).map(|m| (m, 0.0)).collect();
    let mut moments_t = moments_k.clone();

    let probs = s.return_probs(k_trunc as usize)?;
    for (idx, &p) in probs.iter().enumerate() {
        let k = (idx + 1) as f64;
        let next: Vec<f64> = (0..=m_max as usize)
            .map(|j| {
                (0..=j)
                    .map(|i| binom(j as u32, i as u32) * conv[i] * mu[j - i])
                    .sum()
            })
            .collect();
        conv = next;
        let mut k_pow = 1.0;
        for m in 1..=m_max {
            k_pow *= k;
            *moments_k.get_mut(&m).unwrap() += k_pow * p;
            *moments_t.get_mut(&m).unwrap() += conv[m as usize] * p;
        }
    }

    Ok(MomentReport {
        method: MomentMethod::Exact,
        mean_k: moments_k[&1],
        mean_t: moments_t[&1],
        moments_k,
        moments_t,
        truncation_k: k_trunc,
        tail_bound: bound,
        censored_fraction: None,
        std_errors_k: None,
        std_errors_t: None,
    })
}

/// Empirical moment report from first-detection samples, with standard
/// errors and the censored fraction.
pub fn moment_report_mc(
    samples: &[FirstDetectionSample],
    m_max: u32,
    k_max: u64,
) -> Result<MomentReport> {
    if samples.is_empty() || m_max < 1 {
        return Err(Error::InvalidArgument(
            "need at least one sample and moment order >= 1".into(),
        ));
    }
    let n = samples.len() as f64;
    let censored = samples.iter().filter(|s| s.censored).count() as f64;
    let mut moments_k = BTreeMap::new();
    let mut moments_t = BTreeMap::new();
    let mut se_k = BTreeMap::new();
    let mut se_t = BTreeMap::new();
    for m in 1..=m_max {
        let acc = |values: &mut dyn Iterator<Item = f64>| {
            let powers: Vec<f64> = values.map(|v| v.powi(m as i32)).collect();
            let mean = powers.iter().sum::<f64>() / n;
            let var = powers.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, (var / n).sqrt())
        };
        let (mk, sk) = acc(&mut samples.iter().map(|s| s.k as f64));
        let (mt, st) = acc(&mut samples.iter().map(|s| s.t));
        moments_k.insert(m, mk);
        moments_t.insert(m, mt);
        se_k.insert(m, sk);
        se_t.insert(m, st);
    }
    Ok(MomentReport {
        method: MomentMethod::MonteCarlo,
        mean_k: moments_k[&1],
        mean_t: moments_t[&1],
        moments_k,
        moments_t,
        truncation_k: k_max,
        tail_bound: 0.0,
        censored_fraction: Some(censored / n),
        std_errors_k: Some(se_k),
        std_errors_t: Some(se_t),
    })
}

/// Stroboscopic amplitude generating function ũ(ω) = Σ_j p_j ζ_j/(1−ζ_j)
/// with ζ_j = e^{i(ω−E_jτ₀)}; off-resonance Re ũ = −1/2 identically.
pub fn stroboscopic_u(
    model: &CanonicalSpectralModel,
    tau0: f64,
    omega: f64,
) -> Result<C64> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "stroboscopic period must be positive, got {tau0}"
        )));
    }
    let mut u = C64::new(0.0, 0.0);
    for (&e, &p) in model.energies().iter().zip(model.weights()) {
        let zeta = C64::from_polar(1.0, omega - e * tau0);
        let denom = C64::new(1.0, 0.0) - zeta;
        if denom.norm() < STROBO_RESONANCE_TOL {
            return Err(Error::Resonance {
                detail: format!(
                    "frequency {omega} is resonant with level at energy {e} \
                     for period {tau0}"
                ),
                rcond: None,
            });
        }
        u += p * zeta / denom;
    }
    Ok(u)
}

/// Stroboscopic detection amplitude φ̃(ω) = 1 − 1/(1 + ũ(ω)), unimodular
/// off-resonance.
pub fn stroboscopic_phi(
    model: &CanonicalSpectralModel,
    tau0: f64,
    omega: f64,
) -> Result<C64> {
    let u = stroboscopic_u(model, tau0, omega)?;
    let denom = C64::new(1.0, 0.0) + u;
    // Off-resonance |1 + ũ| ≥ 1/2, so a small denominator means a resonance
    // slipped past the per-level screen.
    if denom.norm() < 1e-10 {
        return Err(Error::Resonance {
            detail: format!("1 + u vanishes at frequency {omega}"),
            rcond: None,
        });
    }
    Ok(C64::new(1.0, 0.0) - denom.inv())
}
