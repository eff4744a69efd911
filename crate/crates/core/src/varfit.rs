//! Least-squares VAR fitting on observed trajectories, support recovery of
//! the lag-1 coefficient matrix, and the single-coefficient Wald statistic.
//!
//! With an acyclic latent part (`A22^l = 0`) the observed process is an
//! exact VAR of order `l + 1` once `t > l`, so the lag-1 coefficient of a fit
//! with `lag >= l + 1` is a consistent estimate of `A11`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Trajectory;
use crate::{Error, Result};

/// Fitted VAR(`lag`) model `X(t) = sum_k coeffs[k] X(t-1-k) + e(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarFit {
    pub lag: usize,
    /// `coeffs[k](i, j)` weighs `X_j(t-1-k)` in the equation for `X_i(t)`.
    pub coeffs: Vec<DMatrix<f64>>,
    /// Per-equation mean squared residual.
    pub residual_var: DVector<f64>,
    /// Rows used in the regression.
    pub sample_count: usize,
    /// Index of the first regression target row is `max(lag, drop_prefix)`.
    pub drop_prefix: usize,
    /// The regressor stack was rank deficient; coefficients are the
    /// minimum-norm solution.
    pub degenerate: bool,
}

impl VarFit {
    pub fn dim(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.nrows())
    }

    /// Lag-1 coefficient matrix, the estimate of `A11`.
    pub fn lag1(&self) -> &DMatrix<f64> {
        &self.coeffs[0]
    }

    pub fn first_target_row(&self) -> usize {
        self.lag.max(self.drop_prefix)
    }
}

/// Rows `[X(t-1), ..., X(t-lag)]` and targets `X(t)` for `t = start..len`.
fn design(traj: &Trajectory, lag: usize, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = traj.dim();
    let rows = traj.len() - start;
    let x = DMatrix::from_fn(rows, n * lag, |r, c| {
        let (k, j) = (c / n, c % n);
        traj.data[(start + r - 1 - k, j)]
    });
    let y = traj.data.rows(start, rows).into_owned();
    (x, y)
}

fn rank_tolerance(s_max: f64, rows: usize, cols: usize) -> f64 {
    s_max * rows.max(cols) as f64 * f64::EPSILON
}

/// Multivariate least-squares fit of a VAR(`lag`) without intercept.
///
/// Targets start at row `max(lag, drop_prefix)`. The solve goes through a
/// Householder QR of the regressor stack; if the triangular factor is
/// numerically rank deficient the minimum-norm solution is taken from its
/// SVD and `degenerate` is set.
pub fn fit_var(traj: &Trajectory, lag: usize, drop_prefix: usize) -> Result<VarFit> {
    if lag == 0 {
        return Err(Error::InvalidParameter("lag must be >= 1".into()));
    }
    let n = traj.dim();
    if n == 0 {
        return Err(Error::Dimension("trajectory has no coordinates".into()));
    }
    let needed = lag + drop_prefix + n * lag + 1;
    if traj.len() < needed {
        return Err(Error::InsufficientRows { needed, available: traj.len() });
    }
    let start = lag.max(drop_prefix);
    let (x, y) = design(traj, lag, start);
    let (rows, p) = x.shape();

    let qr = x.clone().qr();
    let r = qr.r();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, p).into_owned();

    let svd = r.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = rank_tolerance(s_max, rows, p);
    let degenerate = s_max == 0.0 || svd.singular_values.iter().any(|&s| s <= tol);
    let beta = if degenerate {
        svd.solve(&qty, tol).map_err(|e| Error::Degenerate(e.to_string()))?
    } else {
        r.solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Degenerate("triangular factor is singular".into()))?
    };

    let resid = &y - &x * &beta;
    let residual_var = DVector::from_iterator(
        n,
        resid.column_iter().map(|c| c.norm_squared() / rows as f64),
    );
    let coeffs = (0..lag)
        .map(|k| DMatrix::from_fn(n, n, |i, j| beta[(k * n + j, i)]))
        .collect();

    Ok(VarFit { lag, coeffs, residual_var, sample_count: rows, drop_prefix, degenerate })
}

/// Entry `(i, j)` set iff `|fit.lag1()(i, j)| > threshold`.
///
/// With known edge magnitude `a`, `threshold = a / 2` is the usual choice.
pub fn recover_support(fit: &VarFit, threshold: f64) -> SupportMatrix {
    SupportMatrix::from_threshold(fit.lag1(), threshold)
}

/// Wald statistic `coef^2 / Var(coef)` for lag-1 coefficient `(i, j)`,
/// where `Var(coef) = residual_var[i] * [(R^T R)^-1]_(j, j)` and `R` is the
/// stacked regressor matrix the fit was computed from. Asymptotically
/// chi-squared with one degree of freedom when the coefficient is zero.
pub fn wald_statistic(fit: &VarFit, traj: &Trajectory, i: usize, j: usize) -> Result<f64> {
    let n = fit.dim();
    if traj.dim() != n {
        return Err(Error::Dimension(format!(
            "fit has {n} coordinates, trajectory has {}",
            traj.dim()
        )));
    }
    if i >= n || j >= n {
        return Err(Error::Dimension(format!("entry ({i}, {j}) out of range for n = {n}")));
    }
    let start = fit.first_target_row();
    if traj.len() <= start || traj.len() - start != fit.sample_count {
        return Err(Error::Dimension("trajectory does not match the fit's sample count".into()));
    }
    let (x, _) = design(traj, fit.lag, start);
    let (rows, p) = x.shape();
    let r = x.qr().r();

    let diag_max = r.diagonal().amax();
    let tol = rank_tolerance(diag_max, rows, p);
    if diag_max == 0.0 || r.diagonal().iter().any(|d| d.abs() <= tol) {
        return Err(Error::Degenerate(format!(
            "R^T R is singular (regressor stack of {rows}x{p} is rank deficient)"
        )));
    }
    // [(R^T R)^-1]_jj = |R^-T e_j|^2
    let mut e = DVector::zeros(p);
    e[j] = 1.0;
    let v = r
        .tr_solve_upper_triangular(&e)
        .ok_or_else(|| Error::Degenerate("triangular factor is singular".into()))?;

    let coef = fit.lag1()[(i, j)];
    let numerator = coef * coef;
    if numerator == 0.0 {
        return Ok(0.0);
    }
    Ok(numerator / (fit.residual_var[i] * v.norm_squared()))
}

/// Number of entries where the two supports differ, i.e. the squared
/// Frobenius norm of their difference.
pub fn support_error(est: &SupportMatrix, truth: &SupportMatrix) -> Result<usize> {
    if est.dim() != truth.dim() {
        return Err(Error::Dimension(format!(
            "support sizes differ: {} vs {}",
            est.dim(),
            truth.dim()
        )));
    }
    Ok(est.entries.iter().zip(&truth.entries).filter(|(a, b)| a != b).count())
}

/// Binary `n x n` adjacency; entry `(i, j)` means `X_j(t-1) -> X_i(t)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SupportMatrix {
    n: usize,
    entries: Vec<bool>,
}

impl SupportMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![false; n * n] }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "support rows must have length {n}, found {}",
                bad.len()
            )));
        }
        Ok(Self { n, entries: rows.concat() })
    }

    pub fn from_threshold(mat: &DMatrix<f64>, threshold: f64) -> Self {
        assert!(mat.is_square(), "support of a non-square matrix");
        let n = mat.nrows();
        let entries = (0..n * n).map(|k| mat[(k / n, k % n)].abs() > threshold).collect();
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.entries[i * self.n + j] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }
}

impl fmt::Display for SupportMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.n.max(1)).take(self.n) {
            let line: String = row.iter().map(|&e| if e { '1' } else { '0' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for SupportMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows = s
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(idx, l)| {
                l.trim()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(Error::parse(idx + 1, format!("unexpected character {other:?}"))),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }
}
