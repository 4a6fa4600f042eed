use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::mtp::{FeatureMatrix, MtpDataset, ScoreType, Triplet};

use super::{DataError, DatasetBundle};

/// A low-rank matrix completion problem together with its generating factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthMatrix {
    pub bundle: DatasetBundle,
    /// `n x rank`, row-major.
    pub u: Vec<f64>,
    /// `m x rank`, row-major.
    pub v: Vec<f64>,
    pub rank: usize,
    /// Noisy `n x m` matrix from which the observed cells were taken.
    pub full: Vec<f64>,
}

impl SynthMatrix {
    /// Noise-free entry `(U Vᵀ)_{ij}`.
    pub fn signal(&self, i: usize, j: usize) -> f64 {
        let k = self.rank;
        (0..k).map(|r| self.u[i * k + r] * self.v[j * k + r]).sum()
    }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `Y = U Vᵀ + ε` with standard normal factors and `ε ~ N(0, noise_std²)`;
/// `round(observed_fraction·n·m)` cells are observed, chosen uniformly.
/// Neither side carries features.
pub fn synth_matrix_completion(
    n: usize,
    m: usize,
    rank: usize,
    noise_std: f64,
    observed_fraction: f64,
    seed: u64,
) -> Result<SynthMatrix, DataError> {
    if n == 0 || m == 0 || rank == 0 {
        return Err(DataError::Invalid("n, m and rank must be positive".into()));
    }
    if !(observed_fraction > 0.0 && observed_fraction <= 1.0) {
        return Err(DataError::Invalid(format!(
            "observed fraction {observed_fraction} outside (0, 1]"
        )));
    }
    let noise = Normal::new(0.0, noise_std)
        .map_err(|_| DataError::Invalid(format!("noise std {noise_std} must be non-negative")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = gaussian(&mut rng, n * rank);
    let v = gaussian(&mut rng, m * rank);
    let mut full = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let s: f64 = (0..rank).map(|r| u[i * rank + r] * v[j * rank + r]).sum();
            full[i * m + j] = s + noise.sample(&mut rng);
        }
    }
    let k = ((observed_fraction * (n * m) as f64).round() as usize).clamp(1, n * m);
    let mut cells = sample(&mut rng, n * m, k).into_vec();
    cells.sort_unstable();
    let triplets = cells.into_iter().map(|c| Triplet::new(c / m, c % m, full[c])).collect();
    let train = MtpDataset::new(ids("i", n), ids("t", m), None, None, triplets, ScoreType::Real)?;
    Ok(SynthMatrix {
        bundle: DatasetBundle::new(train, None),
        u,
        v,
        rank,
        full,
    })
}

/// Multi-label data: standard normal instance features and, per target, a
/// random linear score `w_j·x`. The top `round(density·n)` instances of each
/// target (at least one, at most `n - 1`) are positive, so every target has
/// both classes. All cells are observed; targets carry no features.
pub fn synth_multilabel(n: usize, m: usize, d_x: usize, density: f64, seed: u64) -> Result<DatasetBundle, DataError> {
    if d_x == 0 {
        return Err(DataError::Invalid("instance feature dimension must be positive".into()));
    }
    if n < 2 || m == 0 {
        return Err(DataError::Invalid("need at least two instances and one target".into()));
    }
    if !(density > 0.0 && density < 1.0) {
        return Err(DataError::Invalid(format!("density {density} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n * d_x);
    let w = gaussian(&mut rng, m * d_x);
    let positives = ((density * n as f64).round() as usize).clamp(1, n - 1);
    let mut labels = vec![0.0; n * m];
    for j in 0..m {
        let wj = &w[j * d_x..(j + 1) * d_x];
        let scores: Vec<f64> = (0..n)
            .map(|i| x[i * d_x..(i + 1) * d_x].iter().zip(wj).map(|(a, b)| a * b).sum())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        for &i in &order[..positives] {
            labels[i * m + j] = 1.0;
        }
    }
    let triplets = (0..n * m).map(|c| Triplet::new(c / m, c % m, labels[c])).collect();
    let features = FeatureMatrix::new(d_x, x)?;
    let train = MtpDataset::new(
        ids("i", n),
        ids("t", m),
        Some(features),
        None,
        triplets,
        ScoreType::Binary,
    )?;
    Ok(DatasetBundle::new(train, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_minors_vanish() {
        let s = synth_matrix_completion(6, 5, 1, 0.0, 1.0, 3).unwrap();
        let y = |i: usize, j: usize| s.full[i * 5 + j];
        for i in 0..5 {
            for j in 0..4 {
                let det = y(i, j) * y(i + 1, j + 1) - y(i, j + 1) * y(i + 1, j);
                assert!(det.abs() < 1e-9);
            }
        }
        assert_eq!(s.bundle.train.triplets.len(), 30);
    }

    #[test]
    fn multilabel_density_and_errors() {
        let b = synth_multilabel(400, 6, 4, 0.5, 1).unwrap();
        for j in 0..6 {
            let pos = b
                .train
                .triplets
                .iter()
                .filter(|t| t.target == j && t.score == 1.0)
                .count();
            assert!((pos as f64 / 400.0 - 0.5).abs() <= 0.05);
        }
        assert!(synth_multilabel(10, 2, 0, 0.5, 1).is_err());
        assert_eq!(
            synth_multilabel(30, 3, 2, 0.2, 9).unwrap(),
            synth_multilabel(30, 3, 2, 0.2, 9).unwrap()
        );
    }
}
