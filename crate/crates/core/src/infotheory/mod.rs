//! Conditional mutual information from samples.
//!
//! Entropies use the Kozachenko–Leonenko estimator under the maximum norm,
//!
//! ```text
//! H = psi(N) - psi(k) + d ln 2 + (d / N) sum_i ln eps_i
//! ```
//!
//! with `eps_i` the distance from sample `i` to its k-th nearest neighbour.
//! A CMI is the combination `H(X,Z) + H(Y,Z) - H(Z) - H(X,Y,Z)` of four
//! independent estimates sharing `k`. Everything is in nats.

mod edge;
pub mod knn;

pub use edge::{edge_samples, edge_test, EdgeQuery, LinearReplicas, ReplicaSource, MAX_CONDITIONING_DIM};

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::digamma;

use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Relative magnitude of the tie-breaking jitter.
pub const JITTER_SCALE: f64 = 1e-10;
const JITTER_SEED: u64 = 0x6a69_7474_6572;

/// I.i.d. samples, one row per draw and one column per scalar variable.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: DMatrix<f64>,
    pub column_labels: Vec<String>,
}

impl SampleSet {
    pub fn new(points: DMatrix<f64>, column_labels: Vec<String>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(Error::InvalidParameter("a sample set needs at least 2 rows".into()));
        }
        if points.ncols() == 0 {
            return Err(Error::Dimension("a sample set needs at least one column".into()));
        }
        if column_labels.len() != points.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                column_labels.len(),
                points.ncols()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("samples must be finite".into()));
        }
        Ok(Self { points, column_labels })
    }

    /// Columns labelled `c0, c1, ...`.
    pub fn unlabelled(points: DMatrix<f64>) -> Result<Self> {
        let labels = (0..points.ncols()).map(|c| format!("c{c}")).collect();
        Self::new(points, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.column_labels.iter().position(|l| l == label)
    }

    fn row_major(&self, cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_samples() * cols.len());
        for r in 0..self.n_samples() {
            out.extend(cols.iter().map(|&c| self.points[(r, c)]));
        }
        out
    }
}

/// A CMI value with the joint entropies it was assembled from.
#[derive(Clone, Debug, PartialEq)]
pub struct CmiEstimate {
    pub value: f64,
    pub k: usize,
    pub n_samples: usize,
    pub h_xz: f64,
    pub h_yz: f64,
    pub h_z: f64,
    pub h_xyz: f64,
}

impl CmiEstimate {
    pub const CSV_HEADER: &'static str = "value,k,n_samples,h_xz,h_yz,h_z,h_xyz";

    pub fn to_csv_row(&self) -> String {
        use crate::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{}",
            fmt_f64(self.value),
            self.k,
            self.n_samples,
            fmt_f64(self.h_xz),
            fmt_f64(self.h_yz),
            fmt_f64(self.h_z),
            fmt_f64(self.h_xyz)
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != 7 {
            return Err(Error::parse(1, format!("expected 7 fields, found {}", fields.len())));
        }
        let float = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::parse(1, format!("{s:?}: {e}")));
        let count = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::parse(1, format!("{s:?}: {e}")));
        Ok(Self {
            value: float(fields[0])?,
            k: count(fields[1])?,
            n_samples: count(fields[2])?,
            h_xz: float(fields[3])?,
            h_yz: float(fields[4])?,
            h_z: float(fields[5])?,
            h_xyz: float(fields[6])?,
        })
    }
}

/// Kozachenko–Leonenko differential entropy of all columns jointly.
pub fn knn_entropy(samples: &SampleSet, k: usize) -> Result<f64> {
    let cols: Vec<usize> = (0..samples.dim()).collect();
    entropy_of_columns(samples, &cols, k)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k >= n {
        return Err(Error::InvalidParameter(format!("k = {k} must be below the sample count {n}")));
    }
    Ok(())
}

fn entropy_of_columns(samples: &SampleSet, cols: &[usize], k: usize) -> Result<f64> {
    let n = samples.n_samples();
    check_k(k, n)?;
    let dim = cols.len();
    let mut points = samples.row_major(cols);
    let mut eps = knn::KdTree::build(&points, dim).kth_distances(k);

    if eps.iter().any(|&e| e == 0.0) {
        jitter(&mut points, dim);
        eps = knn::KdTree::build(&points, dim).kth_distances(k);
        if eps.iter().any(|&e| e == 0.0) {
            return Err(Error::Degenerate("zero neighbour distance survives jitter".into()));
        }
    }

    // Summing in sorted order makes the estimate independent of row order.
    let mut logs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let mean_log: f64 = logs.iter().sum::<f64>() / n as f64;
    let d = dim as f64;
    Ok(digamma(n as f64) - digamma(k as f64) + d * std::f64::consts::LN_2 + d * mean_log)
}

/// Adds seeded noise of size `JITTER_SCALE * sd` to each column, with unit
/// scale for constant columns.
fn jitter(points: &mut [f64], dim: usize) {
    let n = points.len() / dim;
    let mut rng = rng_for(JITTER_SEED, Stream::Jitter);
    let scales: Vec<f64> = (0..dim)
        .map(|c| {
            let mean = (0..n).map(|r| points[r * dim + c]).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (points[r * dim + c] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            JITTER_SCALE * if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    for (i, v) in points.iter_mut().enumerate() {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += scales[i % dim] * e;
    }
}

/// `I(X; Y | Z)` from four kNN entropy estimates. With empty `z_cols` this
/// is the mutual information `H(X) + H(Y) - H(X,Y)`.
pub fn cmi_knn(
    samples: &SampleSet,
    x_cols: &[usize],
    y_cols: &[usize],
    z_cols: &[usize],
    k: usize,
) -> Result<CmiEstimate> {
    let d = samples.dim();
    if x_cols.is_empty() || y_cols.is_empty() {
        return Err(Error::InvalidParameter("x and y column sets must be non-empty".into()));
    }
    let mut seen = BTreeSet::new();
    for &c in x_cols.iter().chain(y_cols).chain(z_cols) {
        if c >= d {
            return Err(Error::Dimension(format!("column {c} out of range for {d} columns")));
        }
        if !seen.insert(c) {
            return Err(Error::InvalidParameter(format!("column {c} appears in more than one set")));
        }
    }
    check_k(k, samples.n_samples())?;

    let join = |a: &[usize], b: &[usize]| -> Vec<usize> { a.iter().chain(b).copied().collect() };
    let h_xz = entropy_of_columns(samples, &join(x_cols, z_cols), k)?;
    let h_yz = entropy_of_columns(samples, &join(y_cols, z_cols), k)?;
    let h_z = if z_cols.is_empty() { 0.0 } else { entropy_of_columns(samples, z_cols, k)? };
    let h_xyz = entropy_of_columns(samples, &join(&join(x_cols, y_cols), z_cols), k)?;

    Ok(CmiEstimate {
        value: h_xz + h_yz - h_z - h_xyz,
        k,
        n_samples: samples.n_samples(),
        h_xz,
        h_yz,
        h_z,
        h_xyz,
    })
}

/// Closed-form criterion for linear-Gaussian dynamics past the latent
/// transient: `1/2 ln(1 + a11_ij^2 var_j / var_i)`, in nats.
pub fn gaussian_cmi(a11_ij: f64, var_i: f64, var_j: f64) -> Result<f64> {
    if !(var_i > 0.0 && var_i.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target noise variance must be > 0, got {var_i}"
        )));
    }
    if !(var_j >= 0.0 && var_j.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "source noise variance must be >= 0, got {var_j}"
        )));
    }
    Ok(0.5 * (a11_ij * a11_ij * var_j / var_i).ln_1p())
}
