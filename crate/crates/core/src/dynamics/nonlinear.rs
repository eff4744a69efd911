use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::{Trajectory, STATE_LIMIT};
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Noiseless one-step map of the three-state nonlinear system:
///
/// ```text
/// X1' = 0.2 X1 + 0.4 sqrt|Z|
/// X2' = 0.5 X1^2 + 0.9 Z
/// Z'  = 0.9 X1^3 + 0.4 Z
/// ```
///
/// `X2` influences nothing; `X1` drives `X2` directly.
pub fn nonlinear_step(x1: f64, _x2: f64, z: f64) -> (f64, f64, f64) {
    (
        0.2 * x1 + 0.4 * z.abs().sqrt(),
        0.5 * x1 * x1 + 0.9 * z,
        0.9 * x1 * x1 * x1 + 0.4 * z,
    )
}

/// `N` i.i.d. draws of `(X1(0), X2(0), X1(1), X2(1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearExampleState {
    pub samples: DMatrix<f64>,
    pub noise_var: f64,
}

impl NonlinearExampleState {
    pub const COLUMN_LABELS: [&'static str; 4] = ["x1_0", "x2_0", "x1_1", "x2_1"];
}

/// One step of the nonlinear system from `X1(0), X2(0) ~ N(0, 1)` and
/// `Z(0) = 0`, repeated `n_samples` times.
pub fn simulate_nonlinear_example(n_samples: usize, noise_var: f64, seed: u64) -> Result<NonlinearExampleState> {
    simulate_nonlinear_example_with(n_samples, noise_var, 0.0, seed)
}

pub fn simulate_nonlinear_example_with(
    n_samples: usize,
    noise_var: f64,
    z0: f64,
    seed: u64,
) -> Result<NonlinearExampleState> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    check_noise(noise_var)?;
    if !z0.is_finite() {
        return Err(Error::InvalidParameter("z0 must be finite".into()));
    }
    let mut init = rng_for(seed, Stream::InitialState);
    let mut noise = rng_for(seed, Stream::Noise);
    let sd = noise_var.sqrt();
    let mut samples = DMatrix::zeros(n_samples, 4);
    for r in 0..n_samples {
        let x1: f64 = StandardNormal.sample(&mut init);
        let x2: f64 = StandardNormal.sample(&mut init);
        let (y1, y2, _) = nonlinear_step(x1, x2, z0);
        let e1: f64 = StandardNormal.sample(&mut noise);
        let e2: f64 = StandardNormal.sample(&mut noise);
        samples[(r, 0)] = x1;
        samples[(r, 1)] = x2;
        samples[(r, 2)] = y1 + sd * e1;
        samples[(r, 3)] = y2 + sd * e2;
    }
    Ok(NonlinearExampleState { samples, noise_var })
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_var = {noise_var} must be >= 0")));
    }
    Ok(())
}

/// The nonlinear system as a path generator over several steps, with
/// standard normal observed initial state and fixed latent `Z(0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearExample {
    pub noise_var: f64,
    pub z0: f64,
}

impl Default for NonlinearExample {
    fn default() -> Self {
        Self { noise_var: 0.1, z0: 0.0 }
    }
}

impl NonlinearExample {
    /// Observed path `(X1(t), X2(t))` for `t = 0..=steps`.
    pub fn path(&self, steps: usize, seed: u64) -> Result<Trajectory> {
        check_noise(self.noise_var)?;
        let mut init = rng_for(seed, Stream::InitialState);
        let mut noise = rng_for(seed, Stream::Noise);
        let sd = self.noise_var.sqrt();
        let mut data = DMatrix::zeros(steps + 1, 2);
        let mut x1: f64 = StandardNormal.sample(&mut init);
        let mut x2: f64 = StandardNormal.sample(&mut init);
        let mut z = self.z0;
        data[(0, 0)] = x1;
        data[(0, 1)] = x2;
        for t in 1..=steps {
            let (y1, y2, z_next) = nonlinear_step(x1, x2, z);
            let e1: f64 = StandardNormal.sample(&mut noise);
            let e2: f64 = StandardNormal.sample(&mut noise);
            x1 = y1 + sd * e1;
            x2 = y2 + sd * e2;
            z = z_next;
            if [x1, x2, z].iter().any(|v| !v.is_finite() || v.abs() > STATE_LIMIT) {
                return Err(Error::Unstable { step: t, limit: STATE_LIMIT });
            }
            data[(t, 0)] = x1;
            data[(t, 1)] = x2;
        }
        Trajectory::new(data, seed)
    }
}
