//! Exact k-th nearest neighbour distances under the maximum norm.
//!
//! Points are stored row-major in a flat slice of `n_points * dim` values.
//! The kd-tree and the brute-force scan return the same distances.

use rayon::prelude::*;

const LEAF_SIZE: usize = 16;

#[inline]
fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| f64::max(acc, (x - y).abs()))
}

/// Distance from each point to its k-th nearest other point, by scanning
/// every pair.
pub fn brute_force_kth_distances(points: &[f64], dim: usize, k: usize) -> Vec<f64> {
    let n = points.len() / dim;
    assert!(k >= 1 && k < n, "need 1 <= k < n");
    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = &points[i * dim..(i + 1) * dim];
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| max_dist(p, &points[j * dim..(j + 1) * dim]))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [f64], dim: usize) -> Self {
        assert!(dim >= 1 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut tree = KdTree { points, dim, order: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    fn coord(&self, idx: usize, axis: usize) -> f64 {
        self.points[idx * self.dim + axis]
    }

    fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx * self.dim..(idx + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        // Split the widest axis at its median.
        let axis = (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.order[start..end].iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), &i| {
                        let v = self.coord(i, a);
                        (lo.min(v), hi.max(v))
                    },
                );
                (a, hi - lo)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(a, _)| a)
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i * dim + axis].total_cmp(&points[j * dim + axis])
        });
        let value = self.coord(self.order[mid], axis);

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[slot] = Node::Split { axis, value, left, right };
        slot
    }

    /// Distance from point `idx` to its k-th nearest other point.
    pub fn kth_distance(&self, idx: usize, k: usize) -> f64 {
        let mut best = Vec::with_capacity(k + 1);
        self.search(0, idx, k, &mut best);
        best[k - 1]
    }

    fn search(&self, node: usize, query: usize, k: usize, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let q = self.point(query);
                for &i in &self.order[start..end] {
                    if i == query {
                        continue;
                    }
                    let d = max_dist(q, self.point(i));
                    if best.len() < k || d < best[k - 1] {
                        let pos = best.partition_point(|&b| b <= d);
                        best.insert(pos, d);
                        best.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = self.coord(query, axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, best);
                if best.len() < k || diff.abs() < best[k - 1] {
                    self.search(far, query, k, best);
                }
            }
        }
    }

    pub fn kth_distances(&self, k: usize) -> Vec<f64> {
        let n = self.order.len();
        assert!(k >= 1 && k < n, "need 1 <= k < n");
        (0..n).into_par_iter().map(|i| self.kth_distance(i, k)).collect()
    }
}
