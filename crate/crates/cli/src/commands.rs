//! Subcommand implementations: compute first, then write artifacts.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use monret::analysis::{self, decay_envelope};
use monret::trajectory::{amplitudes_for, sample_many, truncated_ft};
use monret::winding::{correlator_tail_bound, winding_adaptive};
use monret::{Error, MomentReport, SuperoperatorSet, C64};

use crate::config::ExperimentConfig;
use crate::output::{fmt_f, to_json, write_all, Artifact};
use crate::Failure;

/// Thresholds for the `verify` residual table.
const VERIFY_RESIDUAL_TOL: f64 = 1e-8;
const VERIFY_NORM_TOL: f64 = 1e-5;
/// Correlator truncation cap for the normalization check.
const VERIFY_K_CAP: usize = 8192;

fn json_artifact<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<Artifact, Failure> {
    let body = to_json(value).map_err(|e| Failure {
        code: 1,
        message: format!("serializing {name}: {e}"),
    })?;
    Ok(Artifact::new(dir, name, body))
}

fn emit(artifacts: &[Artifact]) -> Result<(), Failure> {
    write_all(artifacts).map_err(|e| Failure {
        code: 1,
        message: format!("writing artifacts: {e}"),
    })
}

fn frequency_grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| TAU * i as f64 / points as f64).collect()
}

/// Exact moment report plus a generating-function sweep over [0, 2π).
pub fn exact(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<(), Failure> {
    let model = cfg.model()?;
    let dist = cfg.dist()?;
    let m_max = cfg.m_max.unwrap_or(2);
    let rel_tol = cfg.rel_tol.unwrap_or(1e-10);
    let omega_points = cfg.omega_points.unwrap_or(256);

    let report = analysis::moment_report_exact(&model, &dist, m_max, rel_tol)?;
    let set = SuperoperatorSet::build(&model, &dist, 0.0)?;
    let mut csv = String::from("omega,re_F,im_F,re_Ftau,im_Ftau\n");
    for omega in frequency_grid(omega_points) {
        let f = analysis::generating_f_with(&set, omega)?;
        let ftau = analysis::generating_f_tau(&model, &dist, omega)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f(omega),
            fmt_f(f.re),
            fmt_f(f.im),
            fmt_f(ftau.re),
            fmt_f(ftau.im)
        ));
    }

    let artifacts = vec![
        json_artifact(out, "report.json", &report)?,
        Artifact::new(out, "fsweep.csv", csv),
    ];
    emit(&artifacts)?;
    if !quiet {
        println!(
            "exact: N = {}, mean_k = {:.12}, mean_t = {:.12}, truncation K = {}",
            model.dim(),
            report.mean_k,
            report.mean_t,
            report.truncation_k
        );
        for artifact in &artifacts {
            println!("wrote {}", artifact.path.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleReport<'a> {
    seed: u64,
    samples: u64,
    k_max: u64,
    report: &'a MomentReport,
}

/// Monte Carlo sampling: detection-count histogram plus empirical moments.
pub fn sample(
    cfg: &ExperimentConfig,
    out: &Path,
    seed_flag: Option<u64>,
    quiet: bool,
) -> Result<(), Failure> {
    let model = cfg.model()?;
    let dist = cfg.dist()?;
    let samples = cfg.samples.unwrap_or(100_000).max(1);
    let k_max = cfg.k_max.unwrap_or(1_000_000);
    let m_max = cfg.m_max.unwrap_or(2);
    let seed = seed_flag.or(cfg.seed).unwrap_or(0);

    let data = sample_many(&model, &dist, k_max, samples as usize, seed);
    let report = analysis::moment_report_mc(&data, m_max, k_max)?;

    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for s in data.iter().filter(|s| !s.censored) {
        *counts.entry(s.k).or_insert(0) += 1;
    }
    let mut csv = format!("# seed = {seed}\nk,count,frequency\n");
    for (k, count) in &counts {
        csv.push_str(&format!(
            "{k},{count},{}\n",
            fmt_f(*count as f64 / samples as f64)
        ));
    }

    let wrapped = SampleReport {
        seed,
        samples,
        k_max,
        report: &report,
    };
    let artifacts = vec![
        json_artifact(out, "report.json", &wrapped)?,
        Artifact::new(out, "histogram.csv", csv),
    ];
    emit(&artifacts)?;
    if !quiet {
        let se = report
            .std_errors_k
            .as_ref()
            .and_then(|m| m.get(&1).copied())
            .unwrap_or(0.0);
        println!(
            "sample: seed = {seed}, mean_k = {:.6} +- {:.6}, censored fraction = {:.3e}",
            report.mean_k,
            se,
            report.censored_fraction.unwrap_or(0.0)
        );
        for artifact in &artifacts {
            println!("wrote {}", artifact.path.display());
        }
    }
    Ok(())
}

/// Per-realization detection-amplitude loops φ̃(ω) and their windings.
pub fn trajectory(
    cfg: &ExperimentConfig,
    out: &Path,
    seed_flag: Option<u64>,
    quiet: bool,
) -> Result<(), Failure> {
    let model = cfg.model()?;
    let dist = cfg.dist()?;
    let steps = cfg.steps.unwrap_or(40).max(1);
    let realizations = cfg.realizations.unwrap_or(3).max(1);
    let omega_points = cfg.omega_points.unwrap_or(512).max(4);
    let seed = seed_flag.or(cfg.seed).unwrap_or(0);

    let grid = frequency_grid(omega_points);
    let mut artifacts = Vec::new();
    let mut summary = format!("# seed = {seed}\nrealization,winding,raw,residual\n");
    let mut printed = Vec::new();
    for r in 0..realizations {
        // Stream (1 + r) keeps realizations independent of each other while
        // staying reproducible for any realization count.
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(1 + r);
        let taus: Vec<f64> = (0..steps).map(|_| dist.sample(&mut rng)).collect();
        let traj = amplitudes_for(&model, &taus)?;
        let phis = truncated_ft(&traj, &grid)?;
        let winding = winding_adaptive(
            |w| truncated_ft(&traj, &[w]).map(|v| v[0]),
            omega_points,
        )?;

        let mut csv = format!(
            "# seed = {seed}\n# realization = {r}\n# steps = {steps}\n# winding = {}\n\
             omega,re_phi,im_phi\n",
            winding.value
        );
        for (w, phi) in grid.iter().zip(&phis) {
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_f(*w),
                fmt_f(phi.re),
                fmt_f(phi.im)
            ));
        }
        artifacts.push(Artifact::new(out, &format!("trajectory_{r:02}.csv"), csv));
        summary.push_str(&format!(
            "{r},{},{},{}\n",
            winding.value,
            fmt_f(winding.raw),
            fmt_f(winding.residual)
        ));
        printed.push((r, winding.value));
    }
    artifacts.push(Artifact::new(out, "windings.csv", summary));
    emit(&artifacts)?;
    if !quiet {
        for (r, w) in printed {
            println!("trajectory {r}: winding = {w}");
        }
        for artifact in &artifacts {
            println!("wrote {}", artifact.path.display());
        }
    }
    Ok(())
}

/// Fluctuation curves for the symmetric two-level system over a J grid.
pub fn fluctuations(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<(), Failure> {
    let j_grid = cfg.j_grid.as_ref().ok_or_else(|| {
        Failure::from(Error::InvalidArgument(
            "config is missing \"j_grid\"".into(),
        ))
    })?;
    let tau_or_rate = cfg.tau_or_rate.unwrap_or(1.0);
    let rows = monret::two_level::fluctuation_curves(j_grid, tau_or_rate)?;

    let mut csv = String::from("J,second_moment_random,second_moment_stroboscopic\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_f(row.j),
            fmt_f(row.random),
            fmt_f(row.stroboscopic)
        ));
    }
    let artifacts = vec![Artifact::new(out, "fluctuations.csv", csv)];
    emit(&artifacts)?;
    if !quiet {
        println!("fluctuations: {} grid points", rows.len());
        println!("wrote {}", artifacts[0].path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    identity_vector_residual: f64,
    identity_rowsum_residual: f64,
    rcond: f64,
    mean_k_residual: f64,
    f0_residual: f64,
    ftau0_residual: f64,
    norm_max_deviation: f64,
    norm_truncation_k: usize,
    pass: bool,
}

/// Identity suite: matrix identities, mean quantization, generating-function
/// normalization, and the truncated correlator double sum.
pub fn verify(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<(), Failure> {
    let model = cfg.model()?;
    let dist = cfg.dist()?;
    let omega_points = cfg.omega_points.unwrap_or(16).max(1);

    let set = SuperoperatorSet::build(&model, &dist, 0.0)?;
    if set.spectral_radius() >= 1.0 - analysis::RADIUS_CEILING {
        return Err(Failure::from(Error::Resonance {
            detail: format!(
                "propagator spectral radius {:.12} touches 1; pick an \
                 off-resonant distribution",
                set.spectral_radius()
            ),
            rcond: None,
        }));
    }
    let identities = set.verify_identities()?;
    let mean_k_residual = (analysis::mean_k_with(&set)? - model.dim() as f64).abs();
    let f0_residual = (analysis::generating_f_with(&set, 0.0)? - C64::new(1.0, 0.0)).norm();
    let ftau0_residual =
        (analysis::generating_f_tau(&model, &dist, 0.0)? - C64::new(1.0, 0.0)).norm();

    // Truncate the correlator so the double sum carries all but < 1e-6 of
    // its mass, then check Σ_{k,k'≤K} e^{iω(k−k')}⟨φ_k φ*_{k'}⟩ = 1.
    let (c_env, rho_b) = decay_envelope(&set)?;
    let mut k_trunc = 64usize;
    while correlator_tail_bound(c_env, rho_b, k_trunc) >= 1e-6 && k_trunc < VERIFY_K_CAP {
        k_trunc *= 2;
    }
    let tail = correlator_tail_bound(c_env, rho_b, k_trunc);
    if tail >= 1e-6 {
        return Err(Failure::from(Error::NumericalHealth(format!(
            "correlator tail bound {tail:.3e} still above 1e-6 at K = {k_trunc}; \
             the spectral radius {rho_b:.6} is too close to 1"
        ))));
    }
    let table = set.correlator_table(k_trunc)?;
    let mut norm_max_deviation = 0.0f64;
    for i in 0..omega_points {
        let omega = TAU * (i as f64 + 0.5) / omega_points as f64;
        let phase = C64::from_polar(1.0, omega);
        let mut powers = Vec::with_capacity(k_trunc + 1);
        let mut acc = C64::new(1.0, 0.0);
        for _ in 0..=k_trunc {
            powers.push(acc);
            acc *= phase;
        }
        let mut total = C64::new(0.0, 0.0);
        for k in 1..=k_trunc {
            for kp in 1..=k_trunc {
                total += powers[k] * powers[kp].conj() * table[(k - 1, kp - 1)];
            }
        }
        norm_max_deviation = norm_max_deviation.max((total - C64::new(1.0, 0.0)).norm());
    }

    let rows = [
        ("identity (vector form)", identities.residual1, VERIFY_RESIDUAL_TOL),
        ("identity (row sums)", identities.residual2, VERIFY_RESIDUAL_TOL),
        ("mean_k - N", mean_k_residual, VERIFY_RESIDUAL_TOL),
        ("F(0) - 1", f0_residual, VERIFY_RESIDUAL_TOL),
        ("F_tau(0) - 1", ftau0_residual, VERIFY_RESIDUAL_TOL),
        ("normalization sum - 1", norm_max_deviation, VERIFY_NORM_TOL),
    ];
    let pass = rows.iter().all(|(_, value, tol)| value <= tol);

    let report = VerifyReport {
        identity_vector_residual: identities.residual1,
        identity_rowsum_residual: identities.residual2,
        rcond: identities.rcond,
        mean_k_residual,
        f0_residual,
        ftau0_residual,
        norm_max_deviation,
        norm_truncation_k: k_trunc,
        pass,
    };
    let artifacts = vec![json_artifact(out, "verify.json", &report)?];
    emit(&artifacts)?;

    if !quiet {
        println!("{:<28} {:>12} {:>9} status", "check", "residual", "tol");
        for (name, value, tol) in rows {
            println!(
                "{name:<28} {value:>12.3e} {tol:>9.0e} {}",
                if value <= tol { "ok" } else { "FAIL" }
            );
        }
        println!("wrote {}", artifacts[0].path.display());
    }
    if pass {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: "verification failed; see the residual table".into(),
        })
    }
}
