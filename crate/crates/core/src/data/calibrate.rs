use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::objective::MtpObjective;
use crate::space::ConfigSpace;

use super::DataError;

/// Smallest power of `eta` that is at least `mean_best_epoch`, clamped to
/// `[eta, cap]`. A cap below `eta` wins.
pub fn round_up_budget(mean_best_epoch: f64, eta: u32, cap: u32) -> u32 {
    let eta = eta.max(2);
    let mut r: u64 = u64::from(eta);
    while (r as f64) < mean_best_epoch && r < u64::from(cap) {
        r *= u64::from(eta);
    }
    r.min(u64::from(cap)) as u32
}

/// Trains `n_probe` random configurations to `epoch_cap` epochs (with early
/// stopping) and turns their mean best epoch into a maximum budget.
pub fn calibrate_max_budget(
    objective: &MtpObjective,
    space: &ConfigSpace,
    n_probe: usize,
    epoch_cap: u32,
    eta: u32,
    seed: u64,
) -> Result<u32, DataError> {
    if n_probe == 0 || epoch_cap == 0 {
        return Err(DataError::Invalid("need at least one probe and one epoch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_epochs = Vec::with_capacity(n_probe);
    let mut last_error = String::new();
    for _ in 0..n_probe {
        let config = space.sample(&mut rng);
        match objective.fit(&config, epoch_cap, None) {
            Ok((_, out)) => best_epochs.push(f64::from(out.checkpoint.best_epoch.max(1))),
            Err(e) => last_error = e.to_string(),
        }
    }
    if best_epochs.is_empty() {
        return Err(DataError::Calibration(format!(
            "all probes failed; last error: {last_error}"
        )));
    }
    let mean = best_epochs.iter().sum::<f64>() / best_epochs.len() as f64;
    Ok(round_up_budget(mean, eta, epoch_cap))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_up_budget(1.0, 3, 100), 3);
        assert_eq!(round_up_budget(20.4, 3, 100), 27);
        assert_eq!(round_up_budget(81.0, 3, 50), 50);
        assert_eq!(round_up_budget(27.0, 3, 100), 27);
        assert_eq!(round_up_budget(5.0, 3, 2), 2);
    }
}
