use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::space::{EncodingLayout, Segment};

use super::{check_observations, Observation, SurrogateError};

/// Fraction of observations forming the "good" density.
pub const DEFAULT_GAMMA: f64 = 0.15;
pub const DEFAULT_KDE_CANDIDATES: usize = 64;
const BANDWIDTH_FLOOR: f64 = 1e-3;
/// Weight of the uniform component mixed into every categorical kernel.
const CATEGORICAL_UNIFORM_WEIGHT: f64 = 0.1;

/// Product-kernel density over encoded configurations: Gaussian kernels on
/// numeric coordinates, smoothed indicator kernels on one-hot blocks.
#[derive(Debug, Clone)]
pub enum Kde {
    Uniform {
        layout: EncodingLayout,
    },
    Mixture {
        layout: EncodingLayout,
        points: Vec<Vec<f64>>,
        /// Indexed by segment; unused for one-hot segments.
        bandwidths: Vec<f64>,
    },
}

fn argmax(block: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in block.iter().enumerate() {
        if *v > block[best] {
            best = i;
        }
    }
    best
}

impl Kde {
    pub fn uniform(layout: EncodingLayout) -> Self {
        Kde::Uniform { layout }
    }

    pub fn fit(layout: &EncodingLayout, points: Vec<Vec<f64>>) -> Self {
        let n = points.len() as f64;
        let exponent = -1.0 / (layout.segments.len() as f64 + 4.0);
        let bandwidths = layout
            .segments
            .iter()
            .map(|seg| match *seg {
                Segment::Numeric { offset } => {
                    let mean = points.iter().map(|p| p[offset]).sum::<f64>() / n;
                    let var = points.iter().map(|p| (p[offset] - mean).powi(2)).sum::<f64>() / n;
                    (var.sqrt() * n.powf(exponent)).max(BANDWIDTH_FLOOR)
                }
                Segment::OneHot { .. } => 0.0,
            })
            .collect();
        Kde::Mixture {
            layout: layout.clone(),
            points,
            bandwidths,
        }
    }

    pub fn layout(&self) -> &EncodingLayout {
        match self {
            Kde::Uniform { layout } | Kde::Mixture { layout, .. } => layout,
        }
    }

    pub fn n_points(&self) -> usize {
        match self {
            Kde::Uniform { .. } => 0,
            Kde::Mixture { points, .. } => points.len(),
        }
    }

    pub fn bandwidths(&self) -> &[f64] {
        match self {
            Kde::Uniform { .. } => &[],
            Kde::Mixture { bandwidths, .. } => bandwidths,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        match self {
            Kde::Uniform { .. } => &[],
            Kde::Mixture { points, .. } => points,
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Kde::Uniform { layout } => layout
                .segments
                .iter()
                .map(|seg| match *seg {
                    Segment::Numeric { .. } => 0.0,
                    Segment::OneHot { width, .. } => -(width as f64).ln(),
                })
                .sum(),
            Kde::Mixture {
                layout,
                points,
                bandwidths,
            } => {
                let terms: Vec<f64> = points.iter().map(|p| kernel_log(layout, bandwidths, p, x)).collect();
                log_sum_exp(&terms) - (points.len() as f64).ln()
            }
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Draws one point: pick a kernel centre, perturb numeric coordinates and
    /// clamp them to [0, 1], resample each categorical with the uniform weight.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Kde::Uniform { layout } => {
                let mut x = vec![0.0; layout.dim];
                for seg in &layout.segments {
                    match *seg {
                        Segment::Numeric { offset } => x[offset] = rng.random::<f64>(),
                        Segment::OneHot { offset, width } => x[offset + rng.random_range(0..width)] = 1.0,
                    }
                }
                x
            }
            Kde::Mixture {
                layout,
                points,
                bandwidths,
            } => {
                let centre = &points[rng.random_range(0..points.len())];
                let mut x = vec![0.0; layout.dim];
                for (seg, bw) in layout.segments.iter().zip(bandwidths) {
                    match *seg {
                        Segment::Numeric { offset } => {
                            let noise = Normal::new(0.0, *bw).expect("bandwidth > 0");
                            x[offset] = (centre[offset] + noise.sample(rng)).clamp(0.0, 1.0);
                        }
                        Segment::OneHot { offset, width } => {
                            let choice = if rng.random::<f64>() < CATEGORICAL_UNIFORM_WEIGHT {
                                rng.random_range(0..width)
                            } else {
                                argmax(&centre[offset..offset + width])
                            };
                            x[offset + choice] = 1.0;
                        }
                    }
                }
                x
            }
        }
    }
}

fn kernel_log(layout: &EncodingLayout, bandwidths: &[f64], centre: &[f64], x: &[f64]) -> f64 {
    const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
    let mut acc = 0.0;
    for (seg, bw) in layout.segments.iter().zip(bandwidths) {
        match *seg {
            Segment::Numeric { offset } => {
                let z = (x[offset] - centre[offset]) / bw;
                acc += -0.5 * z * z - bw.ln() - LN_SQRT_2PI;
            }
            Segment::OneHot { offset, width } => {
                let same = argmax(&x[offset..offset + width]) == argmax(&centre[offset..offset + width]);
                let uniform = CATEGORICAL_UNIFORM_WEIGHT / width as f64;
                let p = if same {
                    1.0 - CATEGORICAL_UNIFORM_WEIGHT + uniform
                } else {
                    uniform
                };
                acc += p.ln();
            }
        }
    }
    acc
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Densities of the best γ-fraction of observations ("good") and of the rest.
#[derive(Debug, Clone)]
pub struct KdePair {
    pub good: Kde,
    pub bad: Kde,
    pub gamma: f64,
}

impl KdePair {
    /// Fits the pair on observations from a single budget level. With `d` the
    /// encoded dimension, at least `min_points` (default `d + 2`) observations
    /// are required and the good model always holds `max(⌈γN⌉, d + 1)` points.
    pub fn fit(
        observations: &[Observation],
        layout: &EncodingLayout,
        gamma: f64,
        min_points: Option<usize>,
    ) -> Result<Self, SurrogateError> {
        let d = layout.dim;
        let needed = min_points.unwrap_or(d + 2).max(2);
        if observations.len() < needed {
            return Err(SurrogateError::InsufficientData {
                needed,
                got: observations.len(),
            });
        }
        let dim = check_observations(observations)?;
        if dim != d {
            return Err(SurrogateError::DimensionMismatch {
                expected: d,
                actual: dim,
            });
        }
        let n = observations.len();
        let n_good = ((gamma * n as f64).ceil() as usize).max(d + 1);
        if n_good >= n {
            return Err(SurrogateError::InsufficientData {
                needed: n_good + 1,
                got: n,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| observations[a].loss.total_cmp(&observations[b].loss));
        let pick = |ids: &[usize]| -> Vec<Vec<f64>> { ids.iter().map(|&i| observations[i].x.clone()).collect() };
        Ok(Self {
            good: Kde::fit(layout, pick(&order[..n_good])),
            bad: Kde::fit(layout, pick(&order[n_good..])),
            gamma,
        })
    }

    /// log good(x) − log bad(x)
    pub fn log_ratio(&self, x: &[f64]) -> f64 {
        self.good.log_density(x) - self.bad.log_density(x)
    }

    pub fn candidates<R: Rng + ?Sized>(&self, n_candidates: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n_candidates.max(1)).map(|_| self.good.sample(rng)).collect()
    }

    /// Samples candidates from the good density and returns the one with the
    /// largest good/bad ratio (first on ties).
    pub fn propose<R: Rng + ?Sized>(&self, n_candidates: usize, rng: &mut R) -> Vec<f64> {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for x in self.candidates(n_candidates, rng) {
            let r = self.log_ratio(&x);
            if best.as_ref().is_none_or(|(_, b)| r > *b) {
                best = Some((x, r));
            }
        }
        best.expect("at least one candidate").0
    }
}
