use rand::seq::SliceRandom;
use rand::Rng;

use super::{check_observations, Observation, SurrogateError};

const SIGMA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        dim: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned regression tree whose leaves hold the mean training loss.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    min_leaf_size: usize,
}

impl RegressionTree {
    fn fit<R: Rng + ?Sized>(xs: &[&[f64]], ys: &[f64], min_leaf_size: usize, rng: &mut R) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            min_leaf_size,
        };
        let mut idx: Vec<usize> = (0..ys.len()).collect();
        tree.grow(xs, ys, &mut idx, rng);
        tree
    }

    fn grow<R: Rng + ?Sized>(&mut self, xs: &[&[f64]], ys: &[f64], idx: &mut [usize], rng: &mut R) -> usize {
        let node = self.nodes.len();
        let mean = idx.iter().map(|&i| ys[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf(mean));

        let constant = idx.iter().all(|&i| ys[i] == ys[idx[0]]);
        if constant || idx.len() < 2 * self.min_leaf_size {
            return node;
        }
        let Some((dim, threshold)) = self.best_split(xs, ys, idx, rng) else {
            return node;
        };

        let mid = partition(idx, |i| xs[i][dim] <= threshold);
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.grow(xs, ys, left_idx, rng);
        let right = self.grow(xs, ys, right_idx, rng);
        self.nodes[node] = Node::Split {
            dim,
            threshold,
            left,
            right,
        };
        node
    }

    /// Searches a random subset of ⌈d/3⌉ dimensions; when none of them admits
    /// a valid split the remaining dimensions are tried as well.
    fn best_split<R: Rng + ?Sized>(
        &self,
        xs: &[&[f64]],
        ys: &[f64],
        idx: &[usize],
        rng: &mut R,
    ) -> Option<(usize, f64)> {
        let d = xs[idx[0]].len();
        let mut dims: Vec<usize> = (0..d).collect();
        dims.shuffle(rng);
        let subset = d.div_ceil(3).max(1);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for (k, &dim) in dims.iter().enumerate() {
            if k >= subset && best.is_some() {
                break;
            }
            order.sort_by(|&a, &b| xs[a][dim].total_cmp(&xs[b][dim]));
            let n = order.len();
            let total: f64 = order.iter().map(|&i| ys[i]).sum();
            let total_sq: f64 = order.iter().map(|&i| ys[i] * ys[i]).sum();
            let (mut left_sum, mut left_sq) = (0.0, 0.0);
            for pos in 1..n {
                let y = ys[order[pos - 1]];
                left_sum += y;
                left_sq += y * y;
                if pos < self.min_leaf_size || n - pos < self.min_leaf_size {
                    continue;
                }
                let lo = xs[order[pos - 1]][dim];
                let hi = xs[order[pos]][dim];
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / pos as f64)
                    + (right_sq - right_sum * right_sum / (n - pos) as f64);
                if best.is_none_or(|(b, _, _)| sse < b) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((sse, dim, threshold));
                }
            }
        }
        best.map(|(_, dim, threshold)| (dim, threshold))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Leaf(v) => return v,
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => node = if x[dim] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..idx.len() {
        if pred(idx[k]) {
            idx.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

/// Bagged regression trees; the spread of per-tree predictions serves as the
/// predictive uncertainty.
#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    dim: usize,
}

impl RandomForest {
    pub fn fit<R: Rng + ?Sized>(
        observations: &[Observation],
        n_trees: usize,
        min_leaf_size: usize,
        rng: &mut R,
    ) -> Result<Self, SurrogateError> {
        if observations.len() < 2 {
            return Err(SurrogateError::InsufficientData {
                needed: 2,
                got: observations.len(),
            });
        }
        let dim = check_observations(observations)?;
        let min_leaf_size = min_leaf_size.max(1);
        let n = observations.len();
        let trees = (0..n_trees.max(1))
            .map(|_| {
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let xs: Vec<&[f64]> = sample.iter().map(|&i| observations[i].x.as_slice()).collect();
                let ys: Vec<f64> = sample.iter().map(|&i| observations[i].loss).collect();
                RegressionTree::fit(&xs, &ys, min_leaf_size, rng)
            })
            .collect();
        Ok(Self { trees, dim })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Mean and population standard deviation of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.dim);
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        mean_and_std(&preds)
    }
}

pub(crate) fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt().max(SIGMA_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(x: &[f64], loss: f64) -> Observation {
        Observation::new(x.to_vec(), 1, loss)
    }

    #[test]
    fn constant_response_predicts_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<_> = (0..20).map(|i| obs(&[i as f64 / 20.0, (i % 3) as f64], 0.7)).collect();
        let rf = RandomForest::fit(&data, 8, 1, &mut rng).unwrap();
        for q in [[0.0, 0.0], [0.5, 2.0], [5.0, -1.0]] {
            let (mu, sigma) = rf.predict(&q);
            assert!((mu - 0.7).abs() < 1e-12);
            assert_eq!(sigma, SIGMA_FLOOR);
        }
    }

    #[test]
    fn two_points_interpolate_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = vec![obs(&[0.2], 1.0), obs(&[0.8], 3.0)];
        let rf = RandomForest::fit(&data, 16, 1, &mut rng).unwrap();
        for tree in rf.trees() {
            let (a, b) = (tree.predict(&[0.2]), tree.predict(&[0.8]));
            // a tree sees {0.2}, {0.8}, or both; in every case it reproduces
            // the points it saw exactly
            assert!(
                (a == 1.0 && b == 3.0) || (a == 1.0 && b == 1.0) || (a == 3.0 && b == 3.0),
                "tree predicted ({a}, {b})"
            );
        }
    }

    #[test]
    fn leaves_respect_min_leaf_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<_> = (0..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                obs(&[x], (x * 7.0).sin())
            })
            .collect();
        let rf = RandomForest::fit(&data, 4, 5, &mut rng).unwrap();
        for tree in rf.trees() {
            // 40 bootstrap points, leaves of at least 5 => at most 8 leaves
            assert!(tree.n_leaves() <= 8);
        }
    }

    #[test]
    fn too_few_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = RandomForest::fit(&[obs(&[0.1], 1.0)], 4, 1, &mut rng).unwrap_err();
        assert_eq!(err, SurrogateError::InsufficientData { needed: 2, got: 1 });
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = RandomForest::fit(&[obs(&[0.1], 1.0), obs(&[0.1, 0.2], 1.0)], 4, 1, &mut rng).unwrap_err();
        assert!(matches!(err, SurrogateError::DimensionMismatch { .. }));
    }

    #[test]
    fn population_std_of_two_values() {
        assert_eq!(mean_and_std(&[0.0, 1.0]), (0.5, 0.5));
    }
}
