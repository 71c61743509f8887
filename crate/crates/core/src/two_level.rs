//! Closed forms for the symmetric two-level system, the workhorse
//! ground-truth model.
//!
//! Levels at ±J with equal weight 1/2 make every return amplitude real:
//! φ₁ = cos(Jτ₁), and later orders pick up one factor per step,
//! φ_k = −sin(Jτ₁)·cos(Jτ₂)⋯cos(Jτ_{k−1})·sin(Jτ_k). Averages close over
//! c = ⟨cos 2Jτ⟩ alone, giving compact generating functions and the
//! second-moment curve 2(3−c)/(1−c), which diverges exactly at the
//! stroboscopic resonances cos 2Jτ₀ = 1.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::CanonicalSpectralModel;
use crate::times::TimeDistribution;

/// Symmetric two-level system: energies ±J, weights 1/2 each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoLevelParams {
    pub j: f64,
    pub dist: TimeDistribution,
}

/// One row of the fluctuation table: second moments of the detection count
/// for the random (exponential) and stroboscopic (fixed-period) protocols.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FluctuationRow {
    pub j: f64,
    pub random: f64,
    /// `f64::INFINITY` marks the divergent resonance points Jτ₀ = nπ.
    pub stroboscopic: f64,
}

impl TwoLevelParams {
    pub fn new(j: f64, dist: TimeDistribution) -> Result<Self> {
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "level half-splitting must be positive and finite, got {j}"
            )));
        }
        dist.validate()?;
        Ok(TwoLevelParams { j, dist })
    }

    /// The corresponding canonical model for the general-N engines.
    pub fn model(&self) -> CanonicalSpectralModel {
        CanonicalSpectralModel::new(vec![-self.j, self.j], vec![0.5, 0.5])
            .expect("symmetric two-level model is always canonical")
    }

    /// c = ⟨cos 2Jτ⟩, the single average all closed forms depend on.
    pub fn avg_cos_2j_tau(&self) -> f64 {
        self.dist.char_fn(2.0 * self.j).re
    }

    /// Closed-form amplitudes φ_1..φ_n (real for this model).
    pub fn phi_k_closed(&self, taus: &[f64]) -> Result<Vec<C64>> {
        if taus.is_empty() {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        for &tau in taus {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "time steps must be positive and finite, got {tau}"
                )));
            }
        }
        let j = self.j;
        let mut out = Vec::with_capacity(taus.len());
        out.push(C64::new((j * taus[0]).cos(), 0.0));
        // Running product −sin(Jτ₁)cos(Jτ₂)⋯cos(Jτ_{k−1}).
        let mut chain = -(j * taus[0]).sin();
        for (i, &tau) in taus.iter().enumerate().skip(1) {
            out.push(C64::new(chain * (j * tau).sin(), 0.0));
            if i + 1 < taus.len() {
                chain *= (j * tau).cos();
            }
        }
        Ok(out)
    }

    /// Closed-form survival S_n = sin²(Jτ₁)·cos²(Jτ₂)⋯cos²(Jτ_n).
    pub fn survival_closed(&self, taus: &[f64]) -> Result<f64> {
        if taus.is_empty() {
            return Err(Error::InvalidArgument("need at least one time step".into()));
        }
        let j = self.j;
        let mut s = (j * taus[0]).sin().powi(2);
        for &tau in &taus[1..] {
            s *= (j * tau).cos().powi(2);
        }
        Ok(s)
    }

    /// Closed-form F(ω) = e^{iω}[(2e^{iω}−1)c − 1] / [e^{iω}(c+1) − 2].
    pub fn closed_f(&self, omega: f64) -> Result<C64> {
        let c = C64::new(self.avg_cos_2j_tau(), 0.0);
        let z = C64::from_polar(1.0, omega);
        let denom = z * (c + 1.0) - 2.0;
        self.guard_denominator(denom, omega)?;
        Ok(z * ((2.0 * z - 1.0) * c - 1.0) / denom)
    }

    /// Closed-form F_τ(ω) = [(2A−1)B − A] / [B + A − 2] with A = ⟨e^{iωτ}⟩
    /// and B = ⟨e^{iωτ}cos 2Jτ⟩ = [char(ω+2J) + char(ω−2J)]/2.
    pub fn closed_f_tau(&self, omega: f64) -> Result<C64> {
        let a = self.dist.char_fn(omega);
        let b = 0.5
            * (self.dist.char_fn(omega + 2.0 * self.j)
                + self.dist.char_fn(omega - 2.0 * self.j));
        let denom = b + a - 2.0;
        self.guard_denominator(denom, omega)?;
        Ok(((2.0 * a - 1.0) * b - a) / denom)
    }

    fn guard_denominator(&self, denom: C64, omega: f64) -> Result<()> {
        if denom.norm() <= 1e-10 {
            return Err(Error::Resonance {
                detail: format!(
                    "closed-form denominator vanishes at frequency {omega} \
                     (cos 2J-average {})",
                    self.avg_cos_2j_tau()
                ),
                rcond: None,
            });
        }
        Ok(())
    }

    /// Closed-form second moment of the detection count, 2(3−c)/(1−c);
    /// infinite at the stroboscopic resonances c → 1.
    pub fn second_moment_closed(&self) -> f64 {
        second_moment_from_cos(self.avg_cos_2j_tau())
    }
}

fn second_moment_from_cos(c: f64) -> f64 {
    if 1.0 - c < 1e-9 {
        f64::INFINITY
    } else {
        2.0 * (3.0 - c) / (1.0 - c)
    }
}

/// Second-moment curves over a grid of J values: the random protocol uses
/// Exponential(rate), the stroboscopic protocol Fixed(τ₀), both with the
/// same `tau_or_rate` parameter.
pub fn fluctuation_curves(j_grid: &[f64], tau_or_rate: f64) -> Result<Vec<FluctuationRow>> {
    if !(tau_or_rate > 0.0 && tau_or_rate.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate/period must be positive and finite, got {tau_or_rate}"
        )));
    }
    let exp = TimeDistribution::Exponential { rate: tau_or_rate };
    j_grid
        .iter()
        .map(|&j| {
            if !(j > 0.0 && j.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "coupling grid values must be positive, got {j}"
                )));
            }
            Ok(FluctuationRow {
                j,
                random: second_moment_from_cos(exp.char_fn(2.0 * j).re),
                stroboscopic: second_moment_from_cos((2.0 * j * tau_or_rate).cos()),
            })
        })
        .collect()
}
