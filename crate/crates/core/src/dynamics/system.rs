use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::Trajectory;
use crate::rng::{rng_for, Stream};
use crate::varfit::SupportMatrix;
use crate::{Error, Result};

/// Any observed or latent state larger than this aborts the simulation.
pub const STATE_LIMIT: f64 = 1e12;

/// Linear system with observed block `X` (size n) and latent block `Z`
/// (size m):
///
/// ```text
/// X(t) = A11 X(t-1) + A12 Z(t-1) + w(t)
/// Z(t) = A21 X(t-1) + A22 Z(t-1)
/// ```
///
/// `w(t)` is zero-mean Gaussian with per-coordinate variance `noise_var`;
/// the latent block carries no noise.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentLinearSystem {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub noise_var: DVector<f64>,
    pub z0: DVector<f64>,
}

impl LatentLinearSystem {
    pub fn new(
        a11: DMatrix<f64>,
        a12: DMatrix<f64>,
        a21: DMatrix<f64>,
        a22: DMatrix<f64>,
        noise_var: DVector<f64>,
        z0: DVector<f64>,
    ) -> Result<Self> {
        let sys = Self { a11, a12, a21, a22, noise_var, z0 };
        sys.validate()?;
        Ok(sys)
    }

    /// System with no latent states.
    pub fn fully_observed(a11: DMatrix<f64>, noise_var: DVector<f64>) -> Result<Self> {
        let n = a11.nrows();
        Self::new(
            a11,
            DMatrix::zeros(n, 0),
            DMatrix::zeros(0, n),
            DMatrix::zeros(0, 0),
            noise_var,
            DVector::zeros(0),
        )
    }

    /// The three-state counter-example: two observed processes driven by one
    /// latent process, where a lag-1 fit on the observed pair reports a
    /// spurious `X2 -> X1` edge.
    pub fn intro_example(noise_var: f64) -> Self {
        Self {
            a11: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.1]),
            a12: DMatrix::from_row_slice(2, 1, &[0.5, 0.9]),
            a21: DMatrix::from_row_slice(1, 2, &[0.9, 0.0]),
            a22: DMatrix::from_element(1, 1, 0.5),
            noise_var: DVector::from_element(2, noise_var),
            z0: DVector::zeros(1),
        }
    }

    pub fn n(&self) -> usize {
        self.a11.nrows()
    }

    pub fn m(&self) -> usize {
        self.a22.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let check = |name: &str, mat: &DMatrix<f64>, r: usize, c: usize| {
            if mat.shape() != (r, c) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        check("a11", &self.a11, n, n)?;
        check("a12", &self.a12, n, m)?;
        check("a21", &self.a21, m, n)?;
        check("a22", &self.a22, m, m)?;
        if self.noise_var.len() != n {
            return Err(Error::Dimension(format!(
                "noise_var has length {}, expected {n}",
                self.noise_var.len()
            )));
        }
        if self.noise_var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("noise_var entries must be finite and >= 0".into()));
        }
        if self.z0.len() != m {
            return Err(Error::Dimension(format!(
                "z0 has length {}, expected {m}",
                self.z0.len()
            )));
        }
        if self.z0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("z0 has non-finite entries".into()));
        }
        Ok(())
    }

    /// Full `(n+m) x (n+m)` transition matrix `[A11 A12; A21 A22]`.
    pub fn full_matrix(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut a = DMatrix::zeros(n + m, n + m);
        a.view_mut((0, 0), (n, n)).copy_from(&self.a11);
        a.view_mut((0, n), (n, m)).copy_from(&self.a12);
        a.view_mut((n, 0), (m, n)).copy_from(&self.a21);
        a.view_mut((n, n), (m, m)).copy_from(&self.a22);
        a
    }
}

/// Rolls the system forward `steps` times from `x0`, returning the
/// `(steps + 1) x n` observed trajectory. Equal seeds give bit-identical
/// output.
pub fn simulate_linear(
    system: &LatentLinearSystem,
    steps: usize,
    x0: &DVector<f64>,
    seed: u64,
) -> Result<Trajectory> {
    system.validate()?;
    let n = system.n();
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("x0 has non-finite entries".into()));
    }

    let mut rng = rng_for(seed, Stream::Noise);
    let noise_sd: Vec<f64> = system.noise_var.iter().map(|v| v.sqrt()).collect();
    let mut data = DMatrix::zeros(steps + 1, n);
    data.row_mut(0).copy_from(&x0.transpose());

    let mut x = x0.clone();
    let mut z = system.z0.clone();
    let mut x_next = DVector::zeros(n);
    let mut z_next = DVector::zeros(system.m());
    for t in 1..=steps {
        x_next.gemv(1.0, &system.a11, &x, 0.0);
        x_next.gemv(1.0, &system.a12, &z, 1.0);
        for (xi, sd) in x_next.iter_mut().zip(&noise_sd) {
            let e: f64 = StandardNormal.sample(&mut rng);
            *xi += sd * e;
        }
        z_next.gemv(1.0, &system.a21, &x, 0.0);
        z_next.gemv(1.0, &system.a22, &z, 1.0);

        let diverged = x_next
            .iter()
            .chain(z_next.iter())
            .any(|v| !v.is_finite() || v.abs() > STATE_LIMIT);
        if diverged {
            return Err(Error::Unstable { step: t, limit: STATE_LIMIT });
        }
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut z, &mut z_next);
        data.row_mut(t).copy_from(&x.transpose());
    }
    Trajectory::new(data, seed)
}

/// Smallest `l` in `1..=dim` with `max |mat^l| <= tol`. A nilpotent `d x d`
/// matrix always satisfies `M^d = 0`, so `None` means not nilpotent.
///
/// The empty matrix is treated as zero and returns `Some(1)`.
pub fn nilpotency_index(mat: &DMatrix<f64>, tol: f64) -> Option<usize> {
    assert!(mat.is_square(), "nilpotency_index needs a square matrix");
    let dim = mat.nrows();
    if dim == 0 {
        return Some(1);
    }
    let mut power = mat.clone();
    for l in 1..=dim {
        if power.amax() <= tol {
            return Some(l);
        }
        power = &power * mat;
    }
    None
}

/// Ground-truth 1-step causal graph among observed processes:
/// entry `(i, j)` is set iff `|A11(i, j)| > tol`.
pub fn true_support(system: &LatentLinearSystem, tol: f64) -> SupportMatrix {
    SupportMatrix::from_threshold(&system.a11, tol)
}

/// Coefficients `A*_0 .. A*_l` of the observed-only VAR representation:
/// `A*_0 = A11`, `A*_k = A12 A22^(k-1) A21`.
pub fn reduced_var_coeffs(system: &LatentLinearSystem, l: usize) -> Vec<DMatrix<f64>> {
    let m = system.m();
    let mut out = Vec::with_capacity(l + 1);
    out.push(system.a11.clone());
    let mut power = DMatrix::<f64>::identity(m, m);
    for _ in 1..=l {
        out.push(&system.a12 * &power * &system.a21);
        power = &power * &system.a22;
    }
    out
}

/// Largest eigenvalue modulus.
///
/// Falls back to Gelfand's formula `lim |A^k|^(1/k)` when the Schur
/// iteration does not converge.
pub fn spectral_radius(mat: &DMatrix<f64>) -> f64 {
    assert!(mat.is_square(), "spectral_radius needs a square matrix");
    if mat.nrows() == 0 {
        return 0.0;
    }
    match Schur::try_new(mat.clone(), f64::EPSILON, 10_000) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max),
        None => gelfand_radius(mat),
    }
}

fn gelfand_radius(mat: &DMatrix<f64>) -> f64 {
    const SQUARINGS: i32 = 20;
    let norm = mat.norm();
    if norm == 0.0 {
        return 0.0;
    }
    // A^(2^s) = exp(log_scale) * power with |power| = 1.
    let mut power = mat / norm;
    let mut log_scale = norm.ln();
    for _ in 0..SQUARINGS {
        power = &power * &power;
        let c = power.norm();
        if c == 0.0 {
            return 0.0;
        }
        power /= c;
        log_scale = 2.0 * log_scale + c.ln();
    }
    (log_scale / 2f64.powi(SQUARINGS)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn identity_without_noise_is_constant() {
        let sys = LatentLinearSystem::fully_observed(scalar(1.0), DVector::zeros(1)).unwrap();
        let traj = simulate_linear(&sys, 5, &DVector::from_element(1, 3.0), 9).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.data.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn intro_first_step() {
        let sys = LatentLinearSystem::intro_example(0.0);
        let traj = simulate_linear(&sys, 3, &DVector::from_vec(vec![1.0, 1.0]), 0).unwrap();
        assert_eq!(traj.data[(1, 0)], 0.0);
        assert!((traj.data[(1, 1)] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn latent_relay_alternates() {
        let sys = LatentLinearSystem::new(
            scalar(0.0),
            scalar(1.0),
            scalar(1.0),
            scalar(0.0),
            DVector::zeros(1),
            DVector::from_element(1, 2.0),
        )
        .unwrap();
        let traj = simulate_linear(&sys, 3, &DVector::from_element(1, 5.0), 0).unwrap();
        let xs: Vec<f64> = traj.data.column(0).iter().copied().collect();
        assert_eq!(xs, vec![5.0, 2.0, 5.0, 2.0]);
    }

    #[test]
    fn divergence_reports_step() {
        let sys = LatentLinearSystem::fully_observed(scalar(10.0), DVector::zeros(1)).unwrap();
        let err = simulate_linear(&sys, 100, &DVector::from_element(1, 1.0), 0).unwrap_err();
        // 10^t exceeds 1e12 first at t = 13.
        assert!(matches!(err, Error::Unstable { step: 13, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = LatentLinearSystem::intro_example(0.1);
        assert!(matches!(
            simulate_linear(&sys, 3, &DVector::zeros(3), 0),
            Err(Error::Dimension(_))
        ));
        assert!(simulate_linear(&sys, 0, &DVector::zeros(2), 0).is_err());

        let mut bad = sys.clone();
        bad.noise_var[0] = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = sys;
        bad.a12 = DMatrix::zeros(2, 2);
        assert!(matches!(bad.validate(), Err(Error::Dimension(_))));
    }

    #[test]
    fn same_seed_same_bits() {
        let sys = LatentLinearSystem::intro_example(0.3);
        let x0 = DVector::zeros(2);
        let a = simulate_linear(&sys, 200, &x0, 42).unwrap();
        let b = simulate_linear(&sys, 200, &x0, 42).unwrap();
        let c = simulate_linear(&sys, 200, &x0, 43).unwrap();
        assert!(a.data.iter().zip(b.data.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn nilpotency_examples() {
        assert_eq!(nilpotency_index(&DMatrix::identity(3, 3), 0.0), None);
        let shift = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(nilpotency_index(&shift, 0.0), Some(3));
        assert_eq!(nilpotency_index(&DMatrix::zeros(4, 4), 0.0), Some(1));
    }

    #[test]
    fn support_examples() {
        let zero = LatentLinearSystem::fully_observed(DMatrix::zeros(3, 3), DVector::zeros(3)).unwrap();
        assert_eq!(true_support(&zero, 1e-9).count_ones(), 0);

        let intro = true_support(&LatentLinearSystem::intro_example(0.1), 1e-9);
        assert_eq!(intro, SupportMatrix::from_rows(&[vec![false, false], vec![true, true]]).unwrap());

        let tiny = LatentLinearSystem::fully_observed(
            DMatrix::from_row_slice(2, 2, &[1e-12, 1.0, 0.0, 0.0]),
            DVector::zeros(2),
        )
        .unwrap();
        let s = true_support(&tiny, 1e-9);
        assert!(!s.get(0, 0));
        assert!(s.get(0, 1));
    }

    #[test]
    fn reduced_coeffs_examples() {
        let no_latent =
            LatentLinearSystem::fully_observed(DMatrix::from_element(2, 2, 0.3), DVector::zeros(2))
                .unwrap();
        let coeffs = reduced_var_coeffs(&no_latent, 3);
        assert_eq!(coeffs[0], no_latent.a11);
        assert!(coeffs[1..].iter().all(|c| c.amax() == 0.0));

        let scalar_sys = LatentLinearSystem::new(
            scalar(0.3),
            scalar(2.0),
            scalar(0.5),
            scalar(0.0),
            DVector::zeros(1),
            DVector::zeros(1),
        )
        .unwrap();
        let coeffs = reduced_var_coeffs(&scalar_sys, 2);
        assert_eq!(coeffs.len(), 3);
        assert_eq!(coeffs[0][(0, 0)], 0.3);
        assert_eq!(coeffs[1][(0, 0)], 1.0);
        assert_eq!(coeffs[2][(0, 0)], 0.0);

        let coeffs = reduced_var_coeffs(&LatentLinearSystem::intro_example(0.1), 3);
        let expected1 = DMatrix::from_row_slice(2, 2, &[0.45, 0.0, 0.81, 0.0]);
        assert!((&coeffs[1] - &expected1).amax() < 1e-15);
        assert!((&coeffs[2] - &expected1 * 0.5).amax() < 1e-15);
        assert!((&coeffs[3] - &expected1 * 0.25).amax() < 1e-15);
    }

    #[test]
    fn gelfand_fallback_agrees() {
        let (c, s) = (0.9 * 0.3f64.cos(), 0.9 * 0.3f64.sin());
        for (mat, rho) in [
            (DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.3]), 0.5),
            (DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), 0.9),
            (DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), 0.0),
        ] {
            assert!((gelfand_radius(&mat) - rho).abs() < 1e-4, "{mat}");
            assert!((spectral_radius(&mat) - rho).abs() < 1e-9, "{mat}");
        }
    }

    #[test]
    fn intro_spectral_radius() {
        let rho = spectral_radius(&LatentLinearSystem::intro_example(0.1).full_matrix());
        // Eigenvalues 0.1 and (0.5 +/- sqrt(2.05)) / 2.
        assert!((rho - (0.5 + 2.05f64.sqrt()) / 2.0).abs() < 1e-12);
    }
}
