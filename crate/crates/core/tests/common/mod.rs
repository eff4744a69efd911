#![allow(dead_code)]

use latent_causal::{nilpotency_index, spectral_radius, LatentLinearSystem};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stable system with an acyclic (hence nilpotent) latent block.
/// The latent order is shuffled so `a22` is not simply triangular.
pub fn random_nilpotent_system(seed: u64, max_n: usize, max_m: usize, radius_bound: f64) -> LatentLinearSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(1..=max_n);
        let m = rng.gen_range(1..=max_m);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let mut a22 = DMatrix::zeros(m, m);
        for u in 0..m {
            for v in 0..u {
                if rng.gen_bool(0.5) {
                    a22[(order[u], order[v])] = rng.gen_range(-0.8..0.8);
                }
            }
        }
        let mut uniform = |rows, cols, half: f64| DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-half..half));
        let a11 = uniform(n, n, 0.4);
        let a12 = uniform(n, m, 0.5);
        let a21 = uniform(m, n, 0.5);
        let noise_var = DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
        let sys = LatentLinearSystem::new(a11, a12, a21, a22, noise_var, DVector::zeros(m)).unwrap();
        debug_assert!(nilpotency_index(&sys.a22, 0.0).is_some());
        if spectral_radius(&sys.full_matrix()) < radius_bound {
            return sys;
        }
    }
}

/// Latent block nilpotency index, which is never `None` for these systems.
pub fn index_of(sys: &LatentLinearSystem) -> usize {
    nilpotency_index(&sys.a22, 0.0).expect("acyclic latent block")
}

/// Standard normal samples from an independent generator.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}
