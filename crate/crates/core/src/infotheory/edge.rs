use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::{cmi_knn, CmiEstimate, SampleSet};
use crate::dynamics::{simulate_linear, LatentLinearSystem, NonlinearExample, Trajectory};
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// kNN estimates are not trusted beyond this many conditioning variables.
pub const MAX_CONDITIONING_DIM: usize = 20;

/// Generator of independent realizations of an observed process.
pub trait ReplicaSource: Sync {
    /// Number of observed coordinates.
    fn dim(&self) -> usize;

    /// One realization of `X(0..=steps)`.
    fn replica(&self, steps: usize, seed: u64) -> Result<Trajectory>;
}

/// Linear latent system started from a fixed observed state.
#[derive(Clone, Debug)]
pub struct LinearReplicas {
    pub system: LatentLinearSystem,
    pub x0: DVector<f64>,
}

impl LinearReplicas {
    /// Replicas started from `X(0) = 0`.
    pub fn from_origin(system: LatentLinearSystem) -> Self {
        let x0 = DVector::zeros(system.n());
        Self { system, x0 }
    }
}

impl ReplicaSource for LinearReplicas {
    fn dim(&self) -> usize {
        self.system.n()
    }

    fn replica(&self, steps: usize, seed: u64) -> Result<Trajectory> {
        simulate_linear(&self.system, steps, &self.x0, seed)
    }
}

impl ReplicaSource for NonlinearExample {
    fn dim(&self) -> usize {
        2
    }

    fn replica(&self, steps: usize, seed: u64) -> Result<Trajectory> {
        self.path(steps, seed)
    }
}

/// Test of the edge `X_j -> X_i` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeQuery {
    pub i: usize,
    pub j: usize,
    pub t: usize,
    /// Conditioning uses the `min(t, history_window)` most recent steps.
    pub history_window: usize,
    pub k: usize,
    pub threshold: f64,
    pub n_replicas: usize,
    pub seed: u64,
}

/// Samples of `(X_i(t), X_j(t-1), past \ X_j(t-1))` from independent
/// replicas. Column 0 is the target, column 1 the candidate cause, the rest
/// the conditioning set with deterministic (constant) columns removed.
pub fn edge_samples<S: ReplicaSource + ?Sized>(source: &S, query: &EdgeQuery) -> Result<SampleSet> {
    let n = source.dim();
    let EdgeQuery { i, j, t, history_window, .. } = *query;
    if i >= n || j >= n {
        return Err(Error::Dimension(format!("edge ({j} -> {i}) out of range for n = {n}")));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("t must be >= 1".into()));
    }
    if history_window == 0 {
        return Err(Error::InvalidParameter("history_window must be >= 1".into()));
    }
    if query.n_replicas < 2 {
        return Err(Error::InvalidParameter("n_replicas must be >= 2".into()));
    }
    let window = t.min(history_window);
    let cond_dim = n * window - 1;
    if cond_dim > MAX_CONDITIONING_DIM {
        return Err(Error::Dimensionality { dim: cond_dim, max: MAX_CONDITIONING_DIM });
    }

    // (time, coordinate, label) for every sampled column.
    let mut columns = vec![(t, i, format!("x{}({t})", i + 1)), (t - 1, j, format!("x{}({})", j + 1, t - 1))];
    for s in t - window..t {
        for c in 0..n {
            if !(s == t - 1 && c == j) {
                columns.push((s, c, format!("x{}({s})", c + 1)));
            }
        }
    }

    let mut master = rng_for(query.seed, Stream::Replicas);
    let seeds: Vec<u64> = (0..query.n_replicas).map(|_| master.gen()).collect();
    let rows: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&s| {
            let path = source.replica(t, s)?;
            Ok(columns.iter().map(|&(time, c, _)| path.data[(time, c)]).collect())
        })
        .collect::<Result<_>>()?;

    let is_constant = |col: usize| rows.iter().all(|r| r[col] == rows[0][col]);
    for (col, what) in [(0, "target"), (1, "candidate cause")] {
        if is_constant(col) {
            return Err(Error::Degenerate(format!("{what} {} is deterministic", columns[col].2)));
        }
    }
    let keep: Vec<usize> = (0..columns.len()).filter(|&c| c < 2 || !is_constant(c)).collect();
    let points = DMatrix::from_fn(rows.len(), keep.len(), |r, c| rows[r][keep[c]]);
    let labels = keep.iter().map(|&c| columns[c].2.clone()).collect();
    SampleSet::new(points, labels)
}

/// Declares `X_j -> X_i` iff the estimated
/// `I(X_i(t); X_j(t-1) | past \ X_j(t-1))` exceeds `threshold`.
///
/// Samples come from `n_replicas` independent realizations rather than from
/// windows of a single path, so no stationarity is assumed.
pub fn edge_test<S: ReplicaSource + ?Sized>(source: &S, query: &EdgeQuery) -> Result<(bool, CmiEstimate)> {
    let samples = edge_samples(source, query)?;
    let z: Vec<usize> = (2..samples.dim()).collect();
    let est = cmi_knn(&samples, &[0], &[1], &z, query.k)?;
    Ok((est.value > query.threshold, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::gaussian_cmi;

    fn query(i: usize, j: usize, t: usize, window: usize, replicas: usize, seed: u64) -> EdgeQuery {
        EdgeQuery { i, j, t, history_window: window, k: 10, threshold: 0.1, n_replicas: replicas, seed }
    }

    #[test]
    fn sample_layout_drops_constant_start() {
        let src = LinearReplicas::from_origin(LatentLinearSystem::intro_example(0.1));
        let s = edge_samples(&src, &query(0, 1, 2, 2, 50, 1)).unwrap();
        // X(0) = 0 is constant, leaving target, cause and X1(1).
        assert_eq!(s.column_labels, vec!["x1(2)", "x2(1)", "x1(1)"]);
    }

    #[test]
    fn rejects_large_conditioning_sets() {
        let sys = LatentLinearSystem::fully_observed(DMatrix::zeros(7, 7), DVector::from_element(7, 0.1)).unwrap();
        let src = LinearReplicas::from_origin(sys);
        // 7 * 3 - 1 = 20 conditioning variables is the largest accepted set.
        assert!(edge_test(&src, &query(0, 1, 5, 3, 100, 0)).is_ok());
        let err = edge_test(&src, &query(0, 1, 5, 4, 100, 0)).unwrap_err();
        assert!(matches!(err, Error::Dimensionality { dim: 27, max: 20 }), "{err}");
    }

    #[test]
    fn deterministic_cause_is_reported() {
        let src = LinearReplicas::from_origin(LatentLinearSystem::intro_example(0.1));
        // X(0) is the fixed start, so X_j(0) carries no randomness.
        assert!(matches!(edge_test(&src, &query(1, 0, 1, 1, 50, 0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn linear_edge_matches_closed_form() {
        let sys = LatentLinearSystem::fully_observed(
            DMatrix::from_row_slice(2, 2, &[0.2, 0.5, 0.0, 0.3]),
            DVector::from_element(2, 0.1),
        )
        .unwrap();
        let src = LinearReplicas::from_origin(sys);
        let (edge, est) = edge_test(&src, &query(0, 1, 2, 1, 4000, 9)).unwrap();
        let exact = gaussian_cmi(0.5, 0.1, 0.1).unwrap();
        assert!(edge);
        assert!((est.value - exact).abs() < 0.1, "{} vs {exact}", est.value);
    }

    #[test]
    fn nonlinear_reverse_direction_is_absent() {
        let src = NonlinearExample::default();
        let q = EdgeQuery { threshold: 0.15, ..query(0, 1, 1, 1, 1000, 5) };
        let (edge, _) = edge_test(&src, &q).unwrap();
        assert!(!edge);
        let q = EdgeQuery { threshold: 0.15, ..query(1, 0, 1, 1, 1000, 5) };
        let (edge, est) = edge_test(&src, &q).unwrap();
        assert!(edge, "{}", est.value);
    }
}
