//! Per-realization simulation of the monitored evolution.
//!
//! One measurement cycle applies the free phases e^{−iE_jτ_k} and then asks
//! whether the system is back in the initial state. In the energy basis the
//! whole cycle acts on an N-vector: rotate, read off the return amplitude
//! φ_k as the overlap with the initial weights, project the detected
//! component out. Ten thousand steps on a ten-level model cost microseconds,
//! which is what makes the Monte Carlo estimators below practical.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::CanonicalSpectralModel;
use crate::times::TimeDistribution;

/// Default cap on measurements per sampled realization.
pub const DEFAULT_K_MAX: u64 = 1_000_000;

/// Amplitudes and survival record for one fixed time-step sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub taus: Vec<f64>,
    /// First-detected-return amplitudes φ_1..φ_n.
    pub amplitudes: Vec<C64>,
    /// Detection probabilities |φ_k|².
    pub detection_probs: Vec<f64>,
    /// Survival probabilities S_1..S_n, non-increasing, with
    /// Σ_{k≤n}|φ_k|² + S_n = 1.
    pub survival: Vec<f64>,
}

/// Outcome of one sampled monitoring run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstDetectionSample {
    /// Number of measurements until detection (or the cap, if censored).
    pub k: u64,
    /// Wall-clock detection time τ_1 + … + τ_k.
    pub t: f64,
    /// True when the cap was reached with survival probability left over.
    pub censored: bool,
}

/// Incremental state of the rotate/overlap/project cycle.
struct Stepper<'m> {
    model: &'m CanonicalSpectralModel,
    state: Vec<C64>,
}

impl<'m> Stepper<'m> {
    fn new(model: &'m CanonicalSpectralModel) -> Self {
        let state = model.root_weights().iter().map(|&q| C64::new(q, 0.0)).collect();
        Stepper { model, state }
    }

    /// Advance one measurement cycle; returns (φ_k, post-measurement ‖state‖²).
    fn step(&mut self, tau: f64) -> (C64, f64) {
        let q = self.model.root_weights();
        for (a, &e) in self.state.iter_mut().zip(self.model.energies()) {
            *a *= C64::from_polar(1.0, -e * tau);
        }
        let phi: C64 = self.state.iter().zip(q).map(|(a, &qj)| qj * a).sum();
        let mut norm_sq = 0.0;
        for (a, &qj) in self.state.iter_mut().zip(q) {
            *a -= phi * qj;
            norm_sq += a.norm_sqr();
        }
        (phi, norm_sq)
    }
}

/// Amplitudes φ_k, detection probabilities, and survival for an explicit
/// time-step sequence.
///
/// Survival is taken from the post-measurement state norm; it is checked
/// each step against the partial-sum route 1 − Σ|φ|², and a mismatch above
/// 1e-8 aborts with a numerical-health error.
pub fn amplitudes_for(model: &CanonicalSpectralModel, taus: &[f64]) -> Result<Trajectory> {
    for &tau in taus {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time steps must be positive and finite, got {tau}"
            )));
        }
    }
    let mut stepper = Stepper::new(model);
    let mut amplitudes = Vec::with_capacity(taus.len());
    let mut detection_probs = Vec::with_capacity(taus.len());
    let mut survival = Vec::with_capacity(taus.len());
    let mut detected_mass = 0.0;
    for &tau in taus {
        let (phi, s_state) = stepper.step(tau);
        detected_mass += phi.norm_sqr();
        let s_sum = 1.0 - detected_mass;
        if (s_state - s_sum).abs() > 1e-8 {
            return Err(Error::NumericalHealth(format!(
                "survival routes disagree at step {}: state norm {s_state:.17e} \
                 vs partial sum {s_sum:.17e}",
                amplitudes.len() + 1
            )));
        }
        amplitudes.push(phi);
        detection_probs.push(phi.norm_sqr());
        survival.push(s_state);
    }
    Ok(Trajectory { taus: taus.to_vec(), amplitudes, detection_probs, survival })
}

/// Sample one first-detection event: draw waiting times sequentially and
/// declare detection at step k with conditional probability |φ_k|²/S_{k−1}.
///
/// Unbounded in principle; `k_max` caps the walk and marks the sample
/// censored instead of failing.
pub fn sample_first_detection<R: Rng + ?Sized>(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    rng: &mut R,
    k_max: u64,
) -> FirstDetectionSample {
    let k_max = k_max.max(1);
    let mut stepper = Stepper::new(model);
    let mut s_prev = 1.0f64;
    let mut t = 0.0;
    for k in 1..=k_max {
        let tau = d.sample(rng);
        t += tau;
        let (phi, s_next) = stepper.step(tau);
        let p_cond = if s_prev > 0.0 { (phi.norm_sqr() / s_prev).min(1.0) } else { 1.0 };
        if rng.gen::<f64>() < p_cond {
            return FirstDetectionSample { k, t, censored: false };
        }
        s_prev = s_next;
    }
    FirstDetectionSample { k: k_max, t, censored: true }
}

/// Sample `n_samples` independent first-detection events.
///
/// Each sample owns RNG stream `1 + index` of a generator seeded with
/// `seed`, so results are identical for any worker count and are returned
/// in sample order.
pub fn sample_many(
    model: &CanonicalSpectralModel,
    d: &TimeDistribution,
    k_max: u64,
    n_samples: usize,
    seed: u64,
) -> Vec<FirstDetectionSample> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(1 + i as u64);
            sample_first_detection(model, d, &mut rng, k_max)
        })
        .collect()
}

/// Truncated generating function φ̃_M(ω) = Σ_{k=1}^{M} e^{iωk} φ_k on a
/// frequency grid in [0, 2π).
pub fn truncated_ft(tr: &Trajectory, omega_grid: &[f64]) -> Result<Vec<C64>> {
    if tr.amplitudes.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot transform an empty trajectory".into(),
        ));
    }
    for &w in omega_grid {
        if !(0.0..std::f64::consts::TAU).contains(&w) {
            return Err(Error::InvalidArgument(format!(
                "frequency {w} outside [0, 2*pi)"
            )));
        }
    }
    Ok(omega_grid
        .iter()
        .map(|&w| {
            let z = C64::from_polar(1.0, w);
            let mut acc = C64::new(0.0, 0.0);
            for &phi in tr.amplitudes.iter().rev() {
                acc = acc * z + phi;
            }
            acc * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{canonicalize, RawSpectralModel, DEGENERACY_TOL};
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    fn two_level(j: f64) -> CanonicalSpectralModel {
        CanonicalSpectralModel::new(vec![-j, j], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn two_level_at_quarter_period() {
        let tr = amplitudes_for(&two_level(1.0), &[PI / 2.0, PI / 2.0]).unwrap();
        assert!(tr.amplitudes[0].norm() < 1e-12);
        assert!((tr.amplitudes[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!(tr.survival[1].abs() < 1e-12);
    }

    #[test]
    fn single_level_detects_immediately() {
        let m = CanonicalSpectralModel::new(vec![0.7], vec![1.0]).unwrap();
        let tr = amplitudes_for(&m, &[2.0]).unwrap();
        assert!((tr.amplitudes[0] - C64::from_polar(1.0, -0.7 * 2.0)).norm() < 1e-15);
        assert!((tr.detection_probs[0] - 1.0).abs() < 1e-15);
        assert!(tr.survival[0].abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_steps() {
        let m = two_level(1.0);
        assert!(amplitudes_for(&m, &[1.0, 0.0]).is_err());
        assert!(amplitudes_for(&m, &[-0.3]).is_err());
    }

    #[test]
    fn truncated_ft_direct_cases() {
        let m = CanonicalSpectralModel::new(vec![0.0], vec![1.0]).unwrap();
        let tr = amplitudes_for(&m, &[1.0]).unwrap();
        let grid = [0.0, 0.5, 3.0];
        for (w, v) in grid.iter().zip(truncated_ft(&tr, &grid).unwrap()) {
            assert!((v - C64::from_polar(1.0, *w)).norm() < 1e-14);
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }

        let tr = amplitudes_for(&two_level(1.0), &[PI / 2.0, PI / 2.0]).unwrap();
        for (w, v) in grid.iter().zip(truncated_ft(&tr, &grid).unwrap()) {
            assert!((v - -C64::from_polar(1.0, 2.0 * w)).norm() < 1e-12);
        }

        assert!(truncated_ft(&tr, &[7.0]).is_err());
        let empty = Trajectory {
            taus: vec![],
            amplitudes: vec![],
            detection_probs: vec![],
            survival: vec![],
        };
        assert!(truncated_ft(&empty, &grid).is_err());
    }

    #[test]
    fn fixed_quarter_period_always_detects_at_two() {
        let m = two_level(1.0);
        let d = TimeDistribution::Fixed { tau0: PI / 2.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..64 {
            let s = sample_first_detection(&m, &d, &mut rng, 100);
            assert_eq!(s.k, 2);
            assert!((s.t - PI).abs() < 1e-12);
            assert!(!s.censored);
        }
    }

    #[test]
    fn single_level_always_detects_at_one() {
        let m = CanonicalSpectralModel::new(vec![1.0], vec![1.0]).unwrap();
        let d = TimeDistribution::Exponential { rate: 1.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..64 {
            assert_eq!(sample_first_detection(&m, &d, &mut rng, 100).k, 1);
        }
    }

    #[test]
    fn empirical_mean_matches_dimension() {
        let m = two_level(1.0);
        let d = TimeDistribution::Exponential { rate: 1.0 };
        let n = 20_000;
        let samples = sample_many(&m, &d, DEFAULT_K_MAX, n, 42);
        assert!(samples.iter().all(|s| !s.censored));
        let mean = samples.iter().map(|s| s.k as f64).sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s.k as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - 2.0).abs() < 3.0 * se,
            "mean {mean} vs 2 with standard error {se}"
        );
    }

    #[test]
    fn sampling_is_deterministic_across_worker_counts() {
        let m = two_level(1.0);
        let d = TimeDistribution::Exponential { rate: 1.0 };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_many(&m, &d, 1000, 500, 7))
        };
        let one = run(1);
        assert_eq!(one, run(4));
        assert_ne!(one, {
            let mut alt = one.clone();
            alt.reverse();
            alt
        });
    }

    #[test]
    fn censoring_reports_cap() {
        // Quarter-period steps make the first detection impossible (φ_1 = 0),
        // so a cap of 1 always censors, deterministically.
        let m = two_level(1.0);
        let d = TimeDistribution::Fixed { tau0: PI / 2.0 };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s = sample_first_detection(&m, &d, &mut rng, 1);
        assert!(s.censored);
        assert_eq!(s.k, 1);
        assert!((s.t - PI / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn trajectory_invariants_hold(
            seed_levels in proptest::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 2..6),
            taus in proptest::collection::vec(0.01f64..4.0, 1..200),
        ) {
            let total: f64 = seed_levels.iter().map(|&(_, w)| w).sum();
            let raw = RawSpectralModel::new(
                seed_levels.iter().map(|&(e, w)| (e, w / total)).collect(),
            );
            let m = canonicalize(&raw, DEGENERACY_TOL).unwrap();
            let tr = amplitudes_for(&m, &taus).unwrap();
            let mut mass = 0.0;
            let mut prev = 1.0;
            for k in 0..taus.len() {
                mass += tr.detection_probs[k];
                prop_assert!((mass + tr.survival[k] - 1.0).abs() <= 1e-10);
                prop_assert!(tr.survival[k] <= prev + 1e-12);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&tr.survival[k]));
                prev = tr.survival[k];
            }
        }
    }
}
