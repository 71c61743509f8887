//! Shared oracle simulators and random-instance generators.
//!
//! The oracles are deliberately naive: dense unitaries, an explicit
//! projector matrix, no recursion shortcuts. They are the reference the
//! engines are measured against.

// Each integration-test binary compiles its own copy and uses a subset.
#![allow(dead_code)]

use monret::{CanonicalSpectralModel, SuperoperatorSet, TimeDistribution, C64};
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Dense projector 1 − |ψ⟩⟨ψ|.
fn complement_projector(psi: &Array1<C64>) -> Array2<C64> {
    let n = psi.len();
    let mut p = Array2::from_shape_fn((n, n), |(i, j)| -psi[i] * psi[j].conj());
    for i in 0..n {
        p[(i, i)] += 1.0;
    }
    p
}

/// State-vector simulation in the energy eigenbasis: rotate with
/// diag(e^{−iE_jτ}), read the overlap, apply the dense projector, repeat.
/// Returns (amplitudes, survival probabilities).
pub fn oracle_amplitudes_levels(
    model: &CanonicalSpectralModel,
    taus: &[f64],
) -> (Vec<C64>, Vec<f64>) {
    let psi = Array1::from_iter(model.root_weights().iter().map(|&q| C64::new(q, 0.0)));
    let proj = complement_projector(&psi);
    let energies = model.energies();
    let mut chi = psi.clone();
    let mut amplitudes = Vec::with_capacity(taus.len());
    let mut survival = Vec::with_capacity(taus.len());
    for &tau in taus {
        let rotated = Array1::from_iter(
            chi.iter()
                .zip(energies)
                .map(|(&c, &e)| c * C64::from_polar(1.0, -e * tau)),
        );
        let phi: C64 = psi.iter().zip(&rotated).map(|(&p, &r)| p.conj() * r).sum();
        amplitudes.push(phi);
        chi = proj.dot(&rotated);
        survival.push(chi.iter().map(|c| c.norm_sqr()).sum());
    }
    (amplitudes, survival)
}

/// State-vector simulation in an arbitrary basis: U(τ) = V e^{−iΛτ} V† from
/// the eigendecomposition of H, projector 1 − |ψ⟩⟨ψ| as a dense matrix.
pub fn oracle_amplitudes_matrix(
    hamiltonian: &Array2<C64>,
    psi: &Array1<C64>,
    taus: &[f64],
) -> (Vec<C64>, Vec<f64>) {
    let (evals, vecs) = hamiltonian.eigh(UPLO::Lower).expect("oracle eigendecomposition");
    let vecs_dagger = vecs.t().mapv(|x| x.conj());
    let proj = complement_projector(psi);
    let mut chi = psi.clone();
    let mut amplitudes = Vec::with_capacity(taus.len());
    let mut survival = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut coeffs = vecs_dagger.dot(&chi);
        for (c, &e) in coeffs.iter_mut().zip(&evals) {
            *c *= C64::from_polar(1.0, -e * tau);
        }
        let rotated = vecs.dot(&coeffs);
        let phi: C64 = psi.iter().zip(&rotated).map(|(&p, &r)| p.conj() * r).sum();
        amplitudes.push(phi);
        chi = proj.dot(&rotated);
        survival.push(chi.iter().map(|c| c.norm_sqr()).sum());
    }
    (amplitudes, survival)
}

/// Random model with pairwise gaps ≥ `min_gap` and weights ≥ `w_floor`.
pub fn random_model(
    rng: &mut ChaCha12Rng,
    n: usize,
    min_gap: f64,
    w_floor: f64,
) -> CanonicalSpectralModel {
    let mut energies = Vec::with_capacity(n);
    let mut e = rng.gen_range(-2.0..-1.0);
    for _ in 0..n {
        energies.push(e);
        e += rng.gen_range(min_gap..min_gap + 1.2);
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> =
        raw.iter().map(|u| w_floor + (1.0 - n as f64 * w_floor) * u / total).collect();
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    CanonicalSpectralModel::new(energies, weights).expect("generated model is canonical")
}

/// Random Hermitian matrix (bounded spectrum) and a random unit state.
pub fn random_hermitian(rng: &mut ChaCha12Rng, n: usize) -> (Array2<C64>, Array1<C64>) {
    let a = Array2::from_shape_fn((n, n), |_| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = (&a + &a.t().mapv(|x| x.conj())) * C64::new(0.5, 0.0);
    let mut psi = Array1::from_shape_fn(n, |_| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv_inplace(|c| c / norm);
    (h, psi)
}

/// Random distribution from the family index (0 fixed, 1 exponential,
/// 2 uniform, 3 gamma), parameters in ranges that keep moments moderate.
pub fn random_dist(rng: &mut ChaCha12Rng, family: usize) -> TimeDistribution {
    match family % 4 {
        0 => TimeDistribution::Fixed { tau0: rng.gen_range(0.4..2.2) },
        1 => TimeDistribution::Exponential { rate: rng.gen_range(0.4..1.6) },
        2 => {
            let a = rng.gen_range(0.1..0.9);
            TimeDistribution::Uniform { a, b: a + rng.gen_range(0.6..2.0) }
        }
        _ => TimeDistribution::Gamma {
            shape: rng.gen_range(0.7..3.5),
            rate: rng.gen_range(0.5..2.0),
        },
    }
}

/// Draw a distribution of the given family until the propagator's spectral
/// radius is at most `radius_cap`, keeping resolvent conditioning far from
/// the test tolerances. Returns the distribution with its operator set.
pub fn off_resonant_dist(
    rng: &mut ChaCha12Rng,
    model: &CanonicalSpectralModel,
    family: usize,
    radius_cap: f64,
) -> (TimeDistribution, SuperoperatorSet) {
    for _ in 0..200 {
        let dist = random_dist(rng, family);
        if let Ok(set) = SuperoperatorSet::build(model, &dist, 0.0) {
            if set.spectral_radius() <= radius_cap {
                return (dist, set);
            }
        }
    }
    panic!("no off-resonant distribution found in 200 draws (family {family})");
}

/// Smallest |⟨e^{izτ}⟩| over all pairwise energy gaps of the model; the
/// identity checks invert these averaged phases.
pub fn min_abs_char(model: &CanonicalSpectralModel, d: &TimeDistribution) -> f64 {
    let energies = model.energies();
    let mut min = f64::INFINITY;
    for &a in energies {
        for &b in energies {
            min = min.min(d.char_fn(a - b).norm());
        }
    }
    min
}
