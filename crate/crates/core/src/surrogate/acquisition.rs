use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::space::ConfigSpace;

use super::RandomForest;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

pub fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / std::f64::consts::SQRT_2)
}

/// Expected improvement of a candidate with predictive mean `mu` and
/// standard deviation `sigma` over the best observed loss `o_min`
/// (minimisation).
pub fn expected_improvement(mu: f64, sigma: f64, o_min: f64) -> f64 {
    if sigma < 1e-12 {
        return (o_min - mu).max(0.0);
    }
    let u = (o_min - mu) / sigma;
    (sigma * (u * normal_cdf(u) + normal_pdf(u))).max(0.0)
}

/// Candidate generator for maximising EI: uniform random configurations plus
/// Gaussian perturbations around the best observed points.
#[derive(Debug, Clone)]
pub struct EiCandidatePool {
    pub n_random: usize,
    pub n_local: usize,
    pub n_best: usize,
    pub local_std: f64,
}

impl Default for EiCandidatePool {
    fn default() -> Self {
        Self {
            n_random: 1000,
            n_local: 20,
            n_best: 5,
            local_std: 0.05,
        }
    }
}

impl EiCandidatePool {
    /// Builds the encoded candidate set. `best` holds encoded configurations
    /// sorted by ascending loss. Perturbed points are decoded and re-encoded so
    /// every candidate corresponds to a valid configuration.
    pub fn candidates<R: Rng + ?Sized>(&self, space: &ConfigSpace, best: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_random + self.n_best * self.n_local);
        for _ in 0..self.n_random {
            let c = space.sample(rng);
            out.push(space.encode(&c).expect("sampled configuration is valid"));
        }
        let noise = Normal::new(0.0, self.local_std).expect("positive std");
        for center in best.iter().take(self.n_best) {
            for _ in 0..self.n_local {
                let x: Vec<f64> = center.iter().map(|v| (v + noise.sample(rng)).clamp(0.0, 1.0)).collect();
                let c = space.decode(&x).expect("dimension matches space");
                out.push(space.encode(&c).expect("decoded configuration is valid"));
            }
        }
        out
    }

    /// Returns the candidate with the highest EI (first on ties) and its EI.
    pub fn maximize<R: Rng + ?Sized>(
        &self,
        forest: &RandomForest,
        space: &ConfigSpace,
        best: &[Vec<f64>],
        o_min: f64,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let mut top: Option<(Vec<f64>, f64)> = None;
        for x in self.candidates(space, best, rng) {
            let (mu, sigma) = forest.predict(&x);
            let ei = expected_improvement(mu, sigma, o_min);
            if top.as_ref().is_none_or(|(_, b)| ei > *b) {
                top = Some((x, ei));
            }
        }
        top.expect("candidate pool is non-empty")
    }
}
