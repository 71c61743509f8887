//! Waiting-time distributions for the intervals between measurements.
//!
//! The exact engine consumes a distribution only through its characteristic
//! function ⟨e^{izτ}⟩, evaluated in closed form per variant; sampling is
//! needed only by the Monte Carlo path. `Fixed` realizes the stroboscopic
//! protocol as a point mass.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the waiting time between consecutive measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum TimeDistribution {
    /// Point mass at `tau0` > 0: measurements at a fixed period.
    Fixed { tau0: f64 },
    /// Density rate·e^{−rate·τ} on (0, ∞).
    Exponential { rate: f64 },
    /// Uniform density on [a, b), 0 ≤ a < b.
    Uniform { a: f64, b: f64 },
    /// Density ∝ τ^{shape−1} e^{−rate·τ} on (0, ∞).
    Gamma { shape: f64, rate: f64 },
}

impl TimeDistribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        match *self {
            TimeDistribution::Fixed { tau0 } => {
                if !(tau0 > 0.0 && tau0.is_finite()) {
                    return bad(format!("fixed period must be positive and finite, got {tau0}"));
                }
            }
            TimeDistribution::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return bad(format!("exponential rate must be positive and finite, got {rate}"));
                }
            }
            TimeDistribution::Uniform { a, b } => {
                if !(a >= 0.0 && b > a && b.is_finite()) {
                    return bad(format!("uniform support needs 0 <= a < b, got [{a}, {b})"));
                }
            }
            TimeDistribution::Gamma { shape, rate } => {
                if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
                    return bad(format!(
                        "gamma parameters must be positive and finite, got shape {shape}, rate {rate}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Characteristic function ⟨e^{izτ}⟩ at real frequency `z`.
    ///
    /// Always lands in the closed unit disk; `char_fn(0) = 1` and
    /// `char_fn(-z) = conj(char_fn(z))` hold to rounding.
    pub fn char_fn(&self, z: f64) -> C64 {
        match *self {
            TimeDistribution::Fixed { tau0 } => C64::from_polar(1.0, z * tau0),
            TimeDistribution::Exponential { rate } => C64::new(rate, 0.0) / C64::new(rate, -z),
            TimeDistribution::Uniform { a, b } => {
                if z == 0.0 {
                    return C64::new(1.0, 0.0);
                }
                // (e^{izb} - e^{iza}) / (iz(b-a)), with e^{iθ} - 1 evaluated as
                // -2sin²(θ/2) + i·sinθ to keep accuracy for small θ.
                let theta = z * (b - a);
                let half = 0.5 * theta;
                let num = C64::new(-2.0 * half.sin().powi(2), theta.sin());
                C64::from_polar(1.0, z * a) * num / C64::new(0.0, theta)
            }
            TimeDistribution::Gamma { shape, rate } => {
                // Principal branch of (1 - iz/rate)^{-shape}; the base always
                // has real part 1, so no branch cut is crossed for real z.
                let base = C64::new(1.0, -z / rate);
                (-shape * base.ln()).exp()
            }
        }
    }

    /// Mean waiting time ⟨τ⟩.
    pub fn mean(&self) -> f64 {
        match *self {
            TimeDistribution::Fixed { tau0 } => tau0,
            TimeDistribution::Exponential { rate } => 1.0 / rate,
            TimeDistribution::Uniform { a, b } => 0.5 * (a + b),
            TimeDistribution::Gamma { shape, rate } => shape / rate,
        }
    }

    /// Raw moment ⟨τ^m⟩ in closed form; `raw_moment(0) = 1`.
    pub fn raw_moment(&self, m: u32) -> f64 {
        match *self {
            TimeDistribution::Fixed { tau0 } => tau0.powi(m as i32),
            TimeDistribution::Exponential { rate } => {
                (1..=m).map(|i| i as f64 / rate).product()
            }
            TimeDistribution::Uniform { a, b } => {
                (b.powi(m as i32 + 1) - a.powi(m as i32 + 1))
                    / ((m as f64 + 1.0) * (b - a))
            }
            TimeDistribution::Gamma { shape, rate } => {
                (0..m).map(|i| (shape + i as f64) / rate).product()
            }
        }
    }

    /// Draw one waiting time; always strictly positive.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TimeDistribution::Fixed { tau0 } => tau0,
            TimeDistribution::Exponential { rate } => {
                let d = rand_distr::Exp::new(rate).expect("validated rate");
                loop {
                    let t = d.sample(rng);
                    if t > 0.0 {
                        return t;
                    }
                }
            }
            TimeDistribution::Uniform { a, b } => {
                let d = rand_distr::Uniform::new(a, b);
                loop {
                    let t = d.sample(rng);
                    if t > 0.0 {
                        return t;
                    }
                }
            }
            TimeDistribution::Gamma { shape, rate } => {
                let d = rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated parameters");
                loop {
                    let t = d.sample(rng);
                    if t > 0.0 {
                        return t;
                    }
                }
            }
        }
    }
}
