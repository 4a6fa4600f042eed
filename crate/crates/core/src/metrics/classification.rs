use std::collections::BTreeMap;

use super::{MetricError, ScoredCell};

/// Indices sorted by descending score, grouped into runs of equal scores.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Average precision: the mean, over positives, of the precision at the rank
/// of each positive. Tied scores are processed as one block whose precision
/// is taken at the block boundary.
pub fn aupr(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut seen = 0usize;
    let mut hits = 0usize;
    let mut ap = 0.0;
    for group in tie_groups(scores) {
        let group_hits = group.iter().filter(|&&i| labels[i]).count();
        seen += group.len();
        hits += group_hits;
        ap += group_hits as f64 * hits as f64 / seen as f64;
    }
    Ok(ap / positives as f64)
}

/// Area under the ROC curve via the Mann-Whitney statistic; ties count ½.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    if negatives == 0 {
        return Err(MetricError::NoNegatives);
    }
    // walk from the lowest score up, counting negatives strictly below
    let mut groups = tie_groups(scores);
    groups.reverse();
    let mut negatives_below = 0usize;
    let mut concordant = 0.0;
    for group in groups {
        let pos = group.iter().filter(|&&i| labels[i]).count();
        let neg = group.len() - pos;
        concordant += pos as f64 * (negatives_below as f64 + 0.5 * neg as f64);
        negatives_below += neg;
    }
    Ok(concordant / (positives as f64 * negatives as f64))
}

fn labels_of(cells: &[ScoredCell]) -> Result<Vec<bool>, MetricError> {
    cells
        .iter()
        .map(|c| {
            if c.truth == 1.0 {
                Ok(true)
            } else if c.truth == 0.0 {
                Ok(false)
            } else {
                Err(MetricError::NonBinary)
            }
        })
        .collect()
}

fn per_target(cells: &[ScoredCell]) -> BTreeMap<usize, Vec<ScoredCell>> {
    let mut by_target: BTreeMap<usize, Vec<ScoredCell>> = BTreeMap::new();
    for c in cells {
        by_target.entry(c.target).or_default().push(*c);
    }
    by_target
}

fn macro_average(
    cells: &[ScoredCell],
    metric: fn(&[f64], &[bool]) -> Result<f64, MetricError>,
) -> Result<f64, MetricError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for group in per_target(cells).values() {
        let labels = labels_of(group)?;
        let pos = labels.iter().filter(|l| **l).count();
        if pos == 0 || pos == labels.len() {
            continue;
        }
        let scores: Vec<f64> = group.iter().map(|c| c.prediction).collect();
        total += metric(&scores, &labels)?;
        count += 1;
    }
    if count == 0 {
        return Err(MetricError::NoValidTarget);
    }
    Ok(total / count as f64)
}

/// Unweighted mean of per-target AUPR over targets having at least one
/// positive and one negative test cell.
pub fn macro_aupr(cells: &[ScoredCell]) -> Result<f64, MetricError> {
    macro_average(cells, aupr)
}

/// AUPR over all cells pooled into a single ranking.
pub fn micro_aupr(cells: &[ScoredCell]) -> Result<f64, MetricError> {
    let labels = labels_of(cells)?;
    let scores: Vec<f64> = cells.iter().map(|c| c.prediction).collect();
    aupr(&scores, &labels)
}

pub fn macro_auroc(cells: &[ScoredCell]) -> Result<f64, MetricError> {
    macro_average(cells, auroc)
}

pub fn micro_auroc(cells: &[ScoredCell]) -> Result<f64, MetricError> {
    let labels = labels_of(cells)?;
    let scores: Vec<f64> = cells.iter().map(|c| c.prediction).collect();
    auroc(&scores, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn aupr_worked_example() {
        let ap = aupr(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert_abs_diff_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn aupr_all_positive() {
        assert_eq!(aupr(&[0.1, 0.5, 0.3], &[true, true, true]).unwrap(), 1.0);
    }

    #[test]
    fn aupr_without_positives() {
        assert_eq!(aupr(&[0.1], &[false]), Err(MetricError::NoPositives));
    }

    #[test]
    fn aupr_ties_use_group_boundary() {
        // one block of four, two positives: precision 2/4 for both
        assert_abs_diff_eq!(
            aupr(&[0.5; 4], &[true, false, true, false]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[true, false, false, true]).unwrap(), 0.5);
        assert_abs_diff_eq!(
            auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(),
            0.75,
            epsilon = 1e-15
        );
    }
}
