use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MtpDataset, MtpError, Triplet, ValidationSetting};

/// Train/validation/test membership over the triplets of one dataset.
///
/// Each vector holds triplet indices in ascending order. In setting D,
/// triplets pairing a test-side id with a train-side id are `discarded`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub setting: ValidationSetting,
    pub seed: u64,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub discarded: Vec<usize>,
}

/// Materialised folds.
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    pub train: Vec<Triplet>,
    pub validation: Vec<Triplet>,
    pub test: Vec<Triplet>,
}

impl SplitPlan {
    pub fn folds(&self, d: &MtpDataset) -> Folds {
        let pick = |ids: &[usize]| ids.iter().map(|&i| d.triplets[i]).collect();
        Folds {
            train: pick(&self.train),
            validation: pick(&self.validation),
            test: pick(&self.test),
        }
    }
}

fn fold_size(fraction: f64, n: usize, what: &str) -> Result<usize, MtpError> {
    let k = (fraction * n as f64).round() as usize;
    if k == 0 || k >= n {
        return Err(MtpError::EmptyFold(format!(
            "{what}: fraction {fraction} of {n} leaves an empty fold"
        )));
    }
    Ok(k)
}

/// Picks `fraction` of the ids present in `present` as held out.
fn hold_out_ids(present: &[bool], fraction: f64, rng: &mut ChaCha8Rng, what: &str) -> Result<Vec<bool>, MtpError> {
    let mut ids: Vec<usize> = (0..present.len()).filter(|&i| present[i]).collect();
    let k = fold_size(fraction, ids.len(), what)?;
    ids.shuffle(rng);
    let mut held = vec![false; present.len()];
    for &i in &ids[..k] {
        held[i] = true;
    }
    Ok(held)
}

/// Uniformly moves `fraction` of `pool` into a validation fold.
fn split_validation(
    pool: Vec<usize>,
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>), MtpError> {
    let k = fold_size(fraction, pool.len(), "validation")?;
    let mut shuffled = pool;
    shuffled.shuffle(rng);
    let mut validation = shuffled[..k].to_vec();
    let mut train = shuffled[k..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok((train, validation))
}

/// Splits a dataset into train, validation and test folds for the given
/// validation setting. The test fold follows the setting; the validation fold
/// is always a uniform sample of the remaining training triplets.
pub fn split(
    d: &MtpDataset,
    setting: ValidationSetting,
    test_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, MtpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d.triplets.len();
    let mut test = Vec::new();
    let mut pool = Vec::new();
    let mut discarded = Vec::new();

    match setting {
        ValidationSetting::A => {
            let k = fold_size(test_fraction, n, "test")?;
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            test = idx[..k].to_vec();
            pool = idx[k..].to_vec();
            test.sort_unstable();
            pool.sort_unstable();
        }
        ValidationSetting::B | ValidationSetting::C | ValidationSetting::D => {
            let held_i = if matches!(setting, ValidationSetting::B | ValidationSetting::D) {
                Some(hold_out_ids(
                    &d.observed_instances(),
                    test_fraction,
                    &mut rng,
                    "test instances",
                )?)
            } else {
                None
            };
            let held_t = if matches!(setting, ValidationSetting::C | ValidationSetting::D) {
                Some(hold_out_ids(
                    &d.observed_targets(),
                    test_fraction,
                    &mut rng,
                    "test targets",
                )?)
            } else {
                None
            };
            for (k, t) in d.triplets.iter().enumerate() {
                let ti = held_i.as_ref().map(|h| h[t.instance]);
                let tt = held_t.as_ref().map(|h| h[t.target]);
                match (ti, tt) {
                    (Some(true), None) | (None, Some(true)) | (Some(true), Some(true)) => test.push(k),
                    (Some(false), Some(true)) | (Some(true), Some(false)) => discarded.push(k),
                    _ => pool.push(k),
                }
            }
            if test.is_empty() || pool.is_empty() {
                return Err(MtpError::EmptyFold(format!(
                    "setting {setting}: test or train fold is empty"
                )));
            }
        }
    }

    let (train, validation) = split_validation(pool, val_fraction, &mut rng)?;
    Ok(SplitPlan {
        setting,
        seed,
        train,
        validation,
        test,
        discarded,
    })
}

/// Splits a training set whose test fold is supplied separately: only the
/// validation fold is drawn.
pub fn split_train_validation(
    d: &MtpDataset,
    setting: ValidationSetting,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitPlan, MtpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, validation) = split_validation((0..d.triplets.len()).collect(), val_fraction, &mut rng)?;
    Ok(SplitPlan {
        setting,
        seed,
        train,
        validation,
        test: Vec::new(),
        discarded: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtp::ScoreType;
    use std::collections::HashSet;

    fn full(n: usize, m: usize) -> MtpDataset {
        let triplets = (0..n)
            .flat_map(|i| (0..m).map(move |j| Triplet::new(i, j, (i * m + j) as f64)))
            .collect();
        MtpDataset::new(
            (0..n).map(|i| format!("i{i}")).collect(),
            (0..m).map(|j| format!("t{j}")).collect(),
            None,
            None,
            triplets,
            ScoreType::Real,
        )
        .unwrap()
    }

    fn assert_partition(plan: &SplitPlan, n: usize) {
        let mut all: Vec<usize> = plan
            .train
            .iter()
            .chain(&plan.validation)
            .chain(&plan.test)
            .chain(&plan.discarded)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn setting_a_counts() {
        let d = full(10, 10);
        let plan = split(&d, ValidationSetting::A, 0.2, 0.2, 7).unwrap();
        assert_eq!((plan.test.len(), plan.validation.len(), plan.train.len()), (20, 16, 64));
        assert_partition(&plan, 100);
    }

    #[test]
    fn setting_b_holds_out_whole_instances() {
        let d = full(10, 10);
        let plan = split(&d, ValidationSetting::B, 0.2, 0.2, 3).unwrap();
        assert_eq!(plan.test.len(), 20);
        let test_inst: HashSet<_> = plan.test.iter().map(|&k| d.triplets[k].instance).collect();
        assert_eq!(test_inst.len(), 2);
        for &k in plan.train.iter().chain(&plan.validation) {
            assert!(!test_inst.contains(&d.triplets[k].instance));
        }
        assert_partition(&plan, 100);
    }

    #[test]
    fn setting_c_holds_out_whole_targets() {
        let d = full(10, 10);
        let plan = split(&d, ValidationSetting::C, 0.2, 0.2, 3).unwrap();
        let test_t: HashSet<_> = plan.test.iter().map(|&k| d.triplets[k].target).collect();
        assert_eq!(test_t.len(), 2);
        for &k in &plan.train {
            assert!(!test_t.contains(&d.triplets[k].target));
        }
    }

    #[test]
    fn setting_d_discards_mixed_pairs() {
        let d = full(10, 10);
        let plan = split(&d, ValidationSetting::D, 0.2, 0.2, 5).unwrap();
        assert_eq!(plan.test.len(), 4);
        assert_eq!(plan.discarded.len(), 32);
        assert_partition(&plan, 100);
    }

    #[test]
    fn deterministic_under_seed() {
        let d = full(6, 7);
        assert_eq!(
            split(&d, ValidationSetting::A, 0.2, 0.2, 1).unwrap(),
            split(&d, ValidationSetting::A, 0.2, 0.2, 1).unwrap()
        );
        assert_ne!(
            split(&d, ValidationSetting::A, 0.2, 0.2, 1).unwrap(),
            split(&d, ValidationSetting::A, 0.2, 0.2, 2).unwrap()
        );
    }

    #[test]
    fn empty_fold_is_an_error() {
        let d = full(2, 1);
        assert!(matches!(
            split(&d, ValidationSetting::B, 0.2, 0.2, 0),
            Err(MtpError::EmptyFold(_))
        ));
    }
}
