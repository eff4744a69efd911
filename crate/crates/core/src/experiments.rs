//! End-to-end studies: the latent counter-example, the support-recovery
//! error versus lag sweep over random consensus networks, and the CMI
//! asymmetry on the nonlinear system.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynamics::{
    simulate_consensus, simulate_linear, simulate_nonlinear_example, spectral_radius, true_support,
    ConsensusParams, LatentLinearSystem,
};
use crate::infotheory::{cmi_knn, CmiEstimate, SampleSet};
use crate::io::fmt_f64;
use crate::varfit::{fit_var, recover_support, support_error};
use crate::{Error, Result};

/// Shortest trajectory accepted by the counter-example runs.
pub const INTRO_MIN_LEN: usize = 1000;

fn check_intro_len(trajectory_len: usize) -> Result<()> {
    if trajectory_len < INTRO_MIN_LEN {
        return Err(Error::InvalidParameter(format!(
            "trajectory_len = {trajectory_len} is below the minimum of {INTRO_MIN_LEN}"
        )));
    }
    Ok(())
}

/// Lag-1 fit on the two observed coordinates of the counter-example system.
/// The latent `Z` makes the estimate report a spurious `X2 -> X1` weight.
pub fn run_intro_example(trajectory_len: usize, noise_var: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_intro_len(trajectory_len)?;
    let sys = LatentLinearSystem::intro_example(noise_var);
    let traj = simulate_linear(&sys, trajectory_len, &DVector::zeros(2), seed)?;
    Ok(fit_var(&traj, 1, 1)?.lag1().clone())
}

/// Elementwise mean of [`run_intro_example`] over seeds
/// `base_seed .. base_seed + n_seeds`.
pub fn run_intro_averaged(trajectory_len: usize, noise_var: f64, base_seed: u64, n_seeds: usize) -> Result<DMatrix<f64>> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
    }
    let fits = (0..n_seeds as u64)
        .into_par_iter()
        .map(|s| run_intro_example(trajectory_len, noise_var, base_seed.wrapping_add(s)))
        .collect::<Result<Vec<_>>>()?;
    let sum = fits.iter().fold(DMatrix::zeros(2, 2), |acc, f| acc + f);
    Ok(sum / n_seeds as f64)
}

/// The same system with `Z` observed: a noiseless third coordinate and a
/// 3-variable lag-1 fit, which recovers the full transition matrix.
pub fn run_intro_full_observation(trajectory_len: usize, noise_var: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_intro_len(trajectory_len)?;
    let full = LatentLinearSystem::intro_example(noise_var).full_matrix();
    let sys = LatentLinearSystem::fully_observed(full, DVector::from_vec(vec![noise_var, noise_var, 0.0]))?;
    let traj = simulate_linear(&sys, trajectory_len, &DVector::zeros(3), seed)?;
    Ok(fit_var(&traj, 1, 1)?.lag1().clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Config {
    /// Network parameters; `consensus.p` is overridden by each entry of
    /// `p_values`.
    pub consensus: ConsensusParams,
    pub trajectory_len: usize,
    pub instances: usize,
    pub lag_values: Vec<usize>,
    pub p_values: Vec<f64>,
    pub threshold: f64,
    pub base_seed: u64,
}

impl Fig1Config {
    /// Desk-scale sweep: 50 instances of length 10^4, lags 1..=12,
    /// p in {0.05, 0.10, 0.15}, threshold a/2.
    pub fn desk_scale(base_seed: u64) -> Self {
        let consensus = ConsensusParams::default();
        let threshold = consensus.a / 2.0;
        Self {
            consensus,
            trajectory_len: 10_000,
            instances: 50,
            lag_values: (1..=12).collect(),
            p_values: vec![0.05, 0.10, 0.15],
            threshold,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.instances == 0 {
            return bad("instances must be >= 1".into());
        }
        if self.trajectory_len == 0 {
            return bad("trajectory_len must be >= 1".into());
        }
        if self.lag_values.is_empty() || self.lag_values[0] == 0 {
            return bad("lag_values must be non-empty and start at >= 1".into());
        }
        if self.lag_values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lag_values must be strictly ascending".into());
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|&p| !(p > 0.0 && p < 0.5)) {
            return bad("p_values must be non-empty and inside (0, 0.5)".into());
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold = {} must be >= 0", self.threshold));
        }
        ConsensusParams { p: self.p_values[0], ..self.consensus.clone() }.validate()
    }
}

/// One point of the error-versus-lag curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub p: f64,
    pub lag: usize,
    pub avg_error: f64,
    pub instances_used: usize,
    pub failures: usize,
}

/// Per-instance support errors for one `p`: `errors[instance][lag_index]`,
/// `None` for instances rejected as unstable or ungeneratable.
#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Series {
    pub p: f64,
    pub lag_values: Vec<usize>,
    pub errors: Vec<Option<Vec<usize>>>,
}

impl Fig1Series {
    /// Errors at lag index `li` for the successful instances, in instance order.
    pub fn errors_at(&self, li: usize) -> Vec<usize> {
        self.errors.iter().flatten().map(|e| e[li]).collect()
    }

    pub fn failures(&self) -> usize {
        self.errors.iter().filter(|e| e.is_none()).count()
    }
}

fn run_instance(config: &Fig1Config, params: &ConsensusParams, seed: u64) -> Result<Option<Vec<usize>>> {
    let (system, traj) = match simulate_consensus(params, config.trajectory_len, seed) {
        Ok(out) => out,
        Err(Error::GenerationFailed { .. } | Error::Unstable { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if spectral_radius(&system.full_matrix()) >= 1.0 {
        return Ok(None);
    }
    let truth = true_support(&system, 0.0);
    config
        .lag_values
        .iter()
        .map(|&lag| {
            let fit = fit_var(&traj, lag, lag)?;
            support_error(&recover_support(&fit, config.threshold), &truth)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Runs every instance once per `p` and fits each requested lag to the same
/// trajectory. Instance `i` uses seed `base_seed + i` for every `p`.
pub fn run_fig1_detailed(config: &Fig1Config) -> Result<Vec<Fig1Series>> {
    config.validate()?;
    let mut p_values = config.p_values.clone();
    p_values.sort_by(f64::total_cmp);
    p_values
        .into_iter()
        .map(|p| {
            let params = ConsensusParams { p, ..config.consensus.clone() };
            let errors = (0..config.instances as u64)
                .into_par_iter()
                .map(|i| run_instance(config, &params, config.base_seed.wrapping_add(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Fig1Series { p, lag_values: config.lag_values.clone(), errors })
        })
        .collect()
}

/// Average support error for every `(p, lag)` cell, sorted by `(p, lag)`.
pub fn run_fig1(config: &Fig1Config) -> Result<Vec<CurvePoint>> {
    let series = run_fig1_detailed(config)?;
    let mut points = Vec::new();
    for s in &series {
        for (li, &lag) in s.lag_values.iter().enumerate() {
            let errs = s.errors_at(li);
            if errs.is_empty() {
                return Err(Error::AllInstancesFailed { p: s.p, lag });
            }
            let total: usize = errs.iter().sum();
            points.push(CurvePoint {
                p: s.p,
                lag,
                avg_error: total as f64 / errs.len() as f64,
                instances_used: errs.len(),
                failures: s.failures(),
            });
        }
    }
    Ok(points)
}

pub const FIG1_CSV_HEADER: &str = "p,lag,avg_error,instances_used,failures";

pub fn fig1_csv(points: &[CurvePoint]) -> String {
    let mut out = format!("{FIG1_CSV_HEADER}\n");
    for pt in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(pt.p),
            pt.lag,
            fmt_f64(pt.avg_error),
            pt.instances_used,
            pt.failures
        )
        .unwrap();
    }
    out
}

pub fn read_fig1_csv(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == FIG1_CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{FIG1_CSV_HEADER}`"))),
    }
    lines
        .map(|(idx, line)| {
            let ln = idx + 1;
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(Error::parse(ln, "expected 5 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(ln, e.to_string()));
            let cnt = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(ln, e.to_string()));
            Ok(CurvePoint {
                p: num(f[0])?,
                lag: cnt(f[1])?,
                avg_error: num(f[2])?,
                instances_used: cnt(f[3])?,
                failures: cnt(f[4])?,
            })
        })
        .collect()
}

/// Noise variance of the nonlinear example.
pub const NONLINEAR_NOISE_VAR: f64 = 0.1;

/// `(I(X1(1); X2(0) | X1(0)), I(X2(1); X1(0) | X2(0)))` on the nonlinear
/// system. The first has true value zero; the second is positive because
/// `X1` drives `X2`.
pub fn run_nonlinear(n_samples: usize, k: usize, seed: u64) -> Result<(CmiEstimate, CmiEstimate)> {
    run_nonlinear_with(n_samples, k, NONLINEAR_NOISE_VAR, seed)
}

pub fn run_nonlinear_with(n_samples: usize, k: usize, noise_var: f64, seed: u64) -> Result<(CmiEstimate, CmiEstimate)> {
    if n_samples <= k {
        return Err(Error::InvalidParameter(format!("n_samples = {n_samples} must exceed k = {k}")));
    }
    let state = simulate_nonlinear_example(n_samples, noise_var, seed)?;
    let labels = crate::dynamics::NonlinearExampleState::COLUMN_LABELS.map(String::from).to_vec();
    let samples = SampleSet::new(state.samples, labels)?;
    // Columns: 0 = X1(0), 1 = X2(0), 2 = X1(1), 3 = X2(1).
    let first = cmi_knn(&samples, &[2], &[1], &[0], k)?;
    let second = cmi_knn(&samples, &[3], &[0], &[1], k)?;
    Ok((first, second))
}

pub const NONLINEAR_CSV_HEADER: &str = "quantity,value,k,n_samples";

pub fn nonlinear_csv(first: &CmiEstimate, second: &CmiEstimate) -> String {
    let mut out = format!("{NONLINEAR_CSV_HEADER}\n");
    for (name, est) in [("cmi_x1_given", first), ("cmi_x2_given", second)] {
        writeln!(out, "{name},{},{},{}", fmt_f64(est.value), est.k, est.n_samples).unwrap();
    }
    out
}

/// Rows of a nonlinear result file as `(quantity, value, k, n_samples)`.
pub fn read_nonlinear_csv(text: &str) -> Result<Vec<(String, f64, usize, usize)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == NONLINEAR_CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{NONLINEAR_CSV_HEADER}`"))),
    }
    lines
        .map(|(idx, line)| {
            let ln = idx + 1;
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::parse(ln, "expected 4 fields"));
            }
            let err = |e: &dyn std::fmt::Display| Error::parse(ln, e.to_string());
            Ok((
                f[0].to_owned(),
                f[1].parse().map_err(|e| err(&e))?,
                f[2].parse().map_err(|e| err(&e))?,
                f[3].parse().map_err(|e| err(&e))?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intro_rejects_short_runs() {
        assert!(matches!(run_intro_example(999, 1.0, 0), Err(Error::InvalidParameter(_))));
        assert!(run_intro_full_observation(10, 1.0, 0).is_err());
    }

    #[test]
    fn full_observation_recovers_transition_matrix() {
        let est = run_intro_full_observation(100_000, 1.0, 3).unwrap();
        let truth = LatentLinearSystem::intro_example(1.0).full_matrix();
        assert!((&est - &truth).amax() < 0.02, "{est}");
    }

    #[test]
    fn near_empty_network_has_no_errors() {
        let config = Fig1Config {
            instances: 1,
            p_values: vec![0.001],
            lag_values: vec![1, 2, 3],
            trajectory_len: 2000,
            ..Fig1Config::desk_scale(0)
        };
        let points = run_fig1(&config).unwrap();
        assert_eq!(points.len(), 3);
        for pt in &points {
            assert_eq!(pt.instances_used + pt.failures, 1);
            assert!(pt.avg_error <= 1.0, "{pt:?}");
        }
    }

    #[test]
    fn config_validation() {
        let base = Fig1Config::desk_scale(0);
        for bad in [
            Fig1Config { instances: 0, ..base.clone() },
            Fig1Config { lag_values: vec![], ..base.clone() },
            Fig1Config { lag_values: vec![3, 2], ..base.clone() },
            Fig1Config { p_values: vec![0.0], ..base.clone() },
            Fig1Config { p_values: vec![0.5], ..base.clone() },
            Fig1Config { threshold: -1.0, ..base.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn fig1_csv_round_trip() {
        let pts = vec![
            CurvePoint { p: 0.05, lag: 1, avg_error: 2.34, instances_used: 48, failures: 2 },
            CurvePoint { p: 0.1, lag: 12, avg_error: 0.0, instances_used: 50, failures: 0 },
        ];
        let text = fig1_csv(&pts);
        assert!(text.starts_with("p,lag,avg_error,instances_used,failures\n"));
        assert_eq!(read_fig1_csv(&text).unwrap(), pts);
    }

    #[test]
    fn nonlinear_rejects_small_samples() {
        assert!(run_nonlinear(10, 10, 0).is_err());
    }

    #[test]
    fn nonlinear_csv_layout() {
        let (a, b) = run_nonlinear(300, 5, 1).unwrap();
        let rows = read_nonlinear_csv(&nonlinear_csv(&a, &b)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "cmi_x1_given");
        assert_eq!(rows[1], ("cmi_x2_given".to_string(), b.value, 5, 300));
    }
}
