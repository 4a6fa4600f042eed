use std::collections::BTreeMap;

use super::{MetricError, ScoredCell};

/// Root mean squared error over all cells.
pub fn micro_rmse(cells: &[ScoredCell]) -> Result<f64, MetricError> {
    if cells.is_empty() {
        return Err(MetricError::Empty);
    }
    let sse: f64 = cells.iter().map(|c| (c.prediction - c.truth).powi(2)).sum();
    Ok((sse / cells.len() as f64).sqrt())
}

/// Mean over targets of RMSE relative to the per-target train-mean predictor.
///
/// `train_means[j]` is the training mean of target `j`. Targets whose test
/// cells all equal that mean (zero denominator) are skipped.
pub fn macro_rrmse(cells: &[ScoredCell], train_means: &[f64]) -> Result<f64, MetricError> {
    let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for c in cells {
        let mean = *train_means
            .get(c.target)
            .ok_or(MetricError::MissingTargetMean(c.target))?;
        if !mean.is_finite() {
            return Err(MetricError::MissingTargetMean(c.target));
        }
        let e = sums.entry(c.target).or_insert((0.0, 0.0));
        e.0 += (c.prediction - c.truth).powi(2);
        e.1 += (mean - c.truth).powi(2);
    }
    let ratios: Vec<f64> = sums
        .values()
        .filter(|(_, den)| *den > 0.0)
        .map(|(num, den)| (num / den).sqrt())
        .collect();
    if ratios.is_empty() {
        return Err(MetricError::NoValidTarget);
    }
    Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cells(target: usize, pairs: &[(f64, f64)]) -> Vec<ScoredCell> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(truth, prediction))| ScoredCell {
                instance: i,
                target,
                truth,
                prediction,
            })
            .collect()
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(micro_rmse(&cells(0, &[(1.0, 1.0), (2.0, 2.0)])).unwrap(), 0.0);
        assert_eq!(micro_rmse(&cells(0, &[(0.0, 1.0), (0.0, -1.0)])).unwrap(), 1.0);
        assert_abs_diff_eq!(
            micro_rmse(&cells(0, &[(0.0, 3.0), (0.0, 4.0)])).unwrap(),
            12.5f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rrmse_examples() {
        let c = cells(0, &[(1.0, 1.5), (3.0, 2.5)]);
        assert_abs_diff_eq!(macro_rrmse(&c, &[2.0]).unwrap(), 0.5, epsilon = 1e-15);
        let mean_pred = cells(0, &[(1.0, 2.0), (3.0, 2.0)]);
        assert_eq!(macro_rrmse(&mean_pred, &[2.0]).unwrap(), 1.0);
        let perfect = cells(0, &[(1.0, 1.0), (3.0, 3.0)]);
        assert_eq!(macro_rrmse(&perfect, &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn rrmse_skips_zero_denominator() {
        let mut c = cells(0, &[(2.0, 5.0)]);
        c.extend(cells(1, &[(1.0, 1.5), (3.0, 2.5)]));
        assert_abs_diff_eq!(macro_rrmse(&c, &[2.0, 2.0]).unwrap(), 0.5, epsilon = 1e-15);
    }
}
