use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{simulate_linear, LatentLinearSystem, Trajectory};
use crate::rng::{rng_for, Stream};
use crate::{Error, Result};

/// Random weighted consensus network over `n` observed and `m` latent nodes.
///
/// Off-diagonal weights touching an observed node are drawn from
/// `{-a, 0, a}` with probabilities `[p, 1-2p, p]`; latent-latent weights
/// from `{-b, 0, b}` with `[q, 1-2q, q]`. Noise of variance `sigma2` enters
/// observed nodes only.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusParams {
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub sigma2: f64,
    pub max_tries: usize,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        Self { n: 10, m: 10, p: 0.1, q: 0.1, a: 0.2, b: 0.7, sigma2: 0.1, max_tries: 1000 }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..=0.5).contains(&self.p) {
            return bad(format!("p = {} outside [0, 0.5]", self.p));
        }
        if !(0.0..=0.5).contains(&self.q) {
            return bad(format!("q = {} outside [0, 0.5]", self.q));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad(format!("a = {} must be > 0", self.a));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad(format!("b = {} must be > 0", self.b));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 = {} must be >= 0", self.sigma2));
        }
        if self.max_tries == 0 {
            return bad("max_tries must be >= 1".into());
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        Ok(())
    }
}

/// One draw from `{-magnitude, 0, magnitude}` with probabilities
/// `[prob, 1 - 2 prob, prob]`.
pub fn draw_weight<R: Rng + ?Sized>(rng: &mut R, prob: f64, magnitude: f64) -> f64 {
    let u: f64 = rng.gen();
    if u < prob {
        -magnitude
    } else if u >= 1.0 - prob {
        magnitude
    } else {
        0.0
    }
}

/// Edge weights `w` of a consensus network, with the self weight set to
/// `w_ii = sum_{j != i} w_ij`. Nodes `0..n` are observed, `n..n+m` latent.
pub fn sample_consensus_weights<R: Rng + ?Sized>(params: &ConsensusParams, rng: &mut R) -> DMatrix<f64> {
    let size = params.n + params.m;
    let mut w = DMatrix::zeros(size, size);
    for i in 0..size {
        for j in 0..size {
            if i == j {
                continue;
            }
            w[(i, j)] = if i >= params.n && j >= params.n {
                draw_weight(rng, params.q, params.b)
            } else {
                draw_weight(rng, params.p, params.a)
            };
        }
    }
    for i in 0..size {
        w[(i, i)] = off_diagonal_row_sum(&w, i);
    }
    w
}

fn off_diagonal_row_sum(w: &DMatrix<f64>, i: usize) -> f64 {
    (0..w.ncols()).filter(|&j| j != i).map(|j| w[(i, j)]).sum()
}

/// Transition matrix of the consensus update
/// `V_i(t) = w_ii V_i + sum_{j != i} w_ij (V_j - V_i)`:
/// `A(i, k) = w_ik` off the diagonal and `A(i, i) = w_ii - sum_{j != i} w_ij`.
pub fn consensus_matrix(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = weights.clone();
    for i in 0..a.nrows() {
        a[(i, i)] = weights[(i, i)] - off_diagonal_row_sum(weights, i);
    }
    a
}

/// True when the nonzero off-diagonal pattern among nodes `n..` has no
/// directed cycle.
pub fn latent_part_is_acyclic(weights: &DMatrix<f64>, n: usize) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        Active,
        Done,
    }
    let size = weights.nrows();
    let m = size.saturating_sub(n);
    let mut marks = vec![Mark::Unvisited; m];

    // Iterative DFS; edge u -> v when node n+v feeds node n+u.
    for root in 0..m {
        if marks[root] != Mark::Unvisited {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        marks[root] = Mark::Active;
        while let Some((u, next)) = stack.last_mut() {
            let u = *u;
            if let Some(v) = (*next..m).find(|&v| v != u && weights[(n + u, n + v)] != 0.0) {
                *next = v + 1;
                match marks[v] {
                    Mark::Active => return false,
                    Mark::Unvisited => {
                        marks[v] = Mark::Active;
                        stack.push((v, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                marks[u] = Mark::Done;
                stack.pop();
            }
        }
    }
    true
}

/// A sampled network together with the system it induces.
#[derive(Clone, Debug)]
pub struct ConsensusNetwork {
    pub weights: DMatrix<f64>,
    pub system: LatentLinearSystem,
    /// Number of draws needed to obtain an acyclic latent part.
    pub tries: usize,
}

impl ConsensusNetwork {
    /// Draws weights until the latent subgraph is acyclic.
    pub fn sample(params: &ConsensusParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = rng_for(seed, Stream::Weights);
        for tries in 1..=params.max_tries {
            let weights = sample_consensus_weights(params, &mut rng);
            if !latent_part_is_acyclic(&weights, params.n) {
                continue;
            }
            let a = consensus_matrix(&weights);
            let (n, m) = (params.n, params.m);
            let system = LatentLinearSystem::new(
                a.view((0, 0), (n, n)).into_owned(),
                a.view((0, n), (n, m)).into_owned(),
                a.view((n, 0), (m, n)).into_owned(),
                a.view((n, n), (m, m)).into_owned(),
                DVector::from_element(n, params.sigma2),
                DVector::zeros(m),
            )?;
            return Ok(Self { weights, system, tries });
        }
        Err(Error::GenerationFailed { tries: params.max_tries })
    }
}

/// Samples a consensus network with acyclic latent part and simulates it for
/// `steps` steps from `X(0) = 0`.
pub fn simulate_consensus(
    params: &ConsensusParams,
    steps: usize,
    seed: u64,
) -> Result<(LatentLinearSystem, Trajectory)> {
    let net = ConsensusNetwork::sample(params, seed)?;
    let traj = simulate_linear(&net.system, steps, &DVector::zeros(params.n), seed)?;
    Ok((net.system, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::nilpotency_index;

    #[test]
    fn zero_probabilities_give_empty_network() {
        let params = ConsensusParams { p: 0.0, q: 0.0, ..Default::default() };
        let net = ConsensusNetwork::sample(&params, 3).unwrap();
        assert_eq!(net.tries, 1);
        assert_eq!(net.system.a11.amax(), 0.0);
        assert_eq!(net.system.a22.amax(), 0.0);
    }

    #[test]
    fn cyclic_first_draw_exhausts_tries() {
        let params = ConsensusParams { m: 3, q: 0.5, max_tries: 1, ..Default::default() };
        // Search for a seed whose first draw has a latent 2-cycle.
        let seed = (0..1000u64)
            .find(|&s| {
                let w = sample_consensus_weights(&params, &mut rng_for(s, Stream::Weights));
                (0..3).any(|u| {
                    (0..3).any(|v| u != v && w[(10 + u, 10 + v)] != 0.0 && w[(10 + v, 10 + u)] != 0.0)
                })
            })
            .expect("some seed produces a 2-cycle");
        let err = simulate_consensus(&params, 10, seed).unwrap_err();
        assert!(matches!(err, Error::GenerationFailed { tries: 1 }), "{err}");
    }

    #[test]
    fn default_settings_shape() {
        let params = ConsensusParams::default();
        for seed in 0..10 {
            let net = ConsensusNetwork::sample(&params, seed).unwrap();
            assert!(nilpotency_index(&net.system.a22, 0.0).is_some());
            for i in 0..10 {
                for j in 0..10 {
                    let v = net.system.a11[(i, j)];
                    if i != j {
                        assert!(v == 0.0 || v.abs() == 0.2, "a11[{i},{j}] = {v}");
                    }
                }
            }
            assert!(net.system.noise_var.iter().all(|&v| v == 0.1));
        }
    }

    #[test]
    fn diagonal_follows_self_weight_rule() {
        let params = ConsensusParams { p: 0.3, q: 0.05, ..Default::default() };
        let net = ConsensusNetwork::sample(&params, 11).unwrap();
        let a = net.system.full_matrix();
        for i in 0..a.nrows() {
            let recomputed = net.weights[(i, i)] - off_diagonal_row_sum(&net.weights, i);
            assert_eq!(a[(i, i)].to_bits(), recomputed.to_bits());
            assert_eq!(a[(i, i)], 0.0);
        }
    }

    #[test]
    fn acyclicity_check() {
        let mut w = DMatrix::zeros(4, 4);
        // Latent nodes 1..4 (n = 1): chain 1 <- 2 <- 3.
        w[(1, 2)] = 1.0;
        w[(2, 3)] = 1.0;
        assert!(latent_part_is_acyclic(&w, 1));
        w[(3, 1)] = 1.0;
        assert!(!latent_part_is_acyclic(&w, 1));
        // Observed-latent edges never count.
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        assert!(latent_part_is_acyclic(&w, 1));
    }

    #[test]
    fn invalid_params() {
        for params in [
            ConsensusParams { p: 0.6, ..Default::default() },
            ConsensusParams { q: -0.1, ..Default::default() },
            ConsensusParams { a: 0.0, ..Default::default() },
            ConsensusParams { sigma2: -1.0, ..Default::default() },
            ConsensusParams { max_tries: 0, ..Default::default() },
        ] {
            assert!(matches!(params.validate(), Err(Error::InvalidParameter(_))));
        }
    }
}
