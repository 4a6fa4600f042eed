use super::{HpoError, TrialId};

/// One Hyperband bracket: stage `s`, initial configuration count, and
/// initial budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BracketSpec {
    pub s: u32,
    pub n: u64,
    pub r: u32,
}

fn check_eta(eta: u32) -> Result<(), HpoError> {
    if eta < 2 {
        return Err(HpoError::InvalidEta(eta));
    }
    Ok(())
}

/// Successive-halving rungs `(n_k, r_k)`.
///
/// `n_k = max(⌊n/ηᵏ⌋, 1)` and `r_k = min(r0·ηᵏ, R)`, stopping after the
/// first rung that has a single configuration or reaches `R`. The last rung
/// always trains to `R`, which matters when rounding left `r0·ηᵏ` short of it.
pub fn sh_schedule(n: u64, r0: u32, eta: u32, max_budget: u32) -> Result<Vec<(u64, u32)>, HpoError> {
    check_eta(eta)?;
    if n == 0 || r0 == 0 || r0 > max_budget {
        return Err(HpoError::InvalidSchedule(format!(
            "need n >= 1 and 1 <= r0 <= R, got n={n}, r0={r0}, R={max_budget}"
        )));
    }
    let mut rungs = Vec::new();
    let mut div: u64 = 1;
    let mut r = u64::from(r0);
    loop {
        let n_k = (n / div).max(1);
        let r_k = r.min(u64::from(max_budget)) as u32;
        rungs.push((n_k, r_k));
        if n_k == 1 || r_k == max_budget {
            rungs.last_mut().expect("pushed").1 = max_budget;
            return Ok(rungs);
        }
        div = div.saturating_mul(u64::from(eta));
        r = r.saturating_mul(u64::from(eta));
    }
}

/// `⌊log_η R⌋` computed on integers.
pub fn s_max(max_budget: u32, eta: u32) -> Result<u32, HpoError> {
    check_eta(eta)?;
    let mut s = 0;
    let mut p = u64::from(eta);
    while p <= u64::from(max_budget) {
        s += 1;
        p *= u64::from(eta);
    }
    Ok(s)
}

/// Hyperband brackets from the most exploratory (`s = s_max`) down to plain
/// full-budget evaluation (`s = 0`).
///
/// `n_s = ⌈(s_max+1)·ηˢ/(s+1)⌉` and `r_s = R·η⁻ˢ`, rounded to the nearest
/// integer (at least 1) when `R` is not a power of `η`.
pub fn hyperband_brackets(max_budget: u32, eta: u32) -> Result<Vec<BracketSpec>, HpoError> {
    if max_budget == 0 {
        return Err(HpoError::InvalidSchedule("R must be at least 1".into()));
    }
    let s_max = s_max(max_budget, eta)?;
    let eta = u64::from(eta);
    Ok((0..=s_max)
        .rev()
        .map(|s| {
            let pow = eta.pow(s);
            let num = u64::from(s_max + 1) * pow;
            let den = u64::from(s + 1);
            let r = ((f64::from(max_budget) / pow as f64).round() as u32).max(1);
            BracketSpec {
                s,
                n: num.div_ceil(den),
                r,
            }
        })
        .collect())
}

/// Epochs trained by one full bracket when survivors resume from their
/// checkpoints and pay only the budget increment.
pub fn bracket_cost(rungs: &[(u64, u32)]) -> u64 {
    let mut prev = 0u32;
    let mut total = 0u64;
    for &(n, r) in rungs {
        total += n * u64::from(r - prev);
        prev = r;
    }
    total
}

/// Epochs of one pass over all brackets.
pub fn hyperband_cycle_cost(max_budget: u32, eta: u32) -> Result<u64, HpoError> {
    let mut total = 0;
    for b in hyperband_brackets(max_budget, eta)? {
        total += bracket_cost(&sh_schedule(b.n, b.r, eta, max_budget)?);
    }
    Ok(total)
}

/// Keeps the `max(⌊n/η⌋, 1)` lowest losses, ties to the lower id. Failed
/// trials are passed as `None` and rank after every finite loss.
pub fn promote(results: &[(TrialId, Option<f64>)], eta: u32) -> Result<Vec<TrialId>, HpoError> {
    check_eta(eta)?;
    let keep = (results.len() / eta as usize).max(1).min(results.len());
    let key = |v: &Option<f64>| match v {
        Some(x) if !x.is_nan() => *x,
        _ => f64::INFINITY,
    };
    let mut order: Vec<&(TrialId, Option<f64>)> = results.iter().collect();
    order.sort_by(|a, b| key(&a.1).total_cmp(&key(&b.1)).then(a.0.cmp(&b.0)));
    Ok(order[..keep].iter().map(|(id, _)| *id).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: u32, n: u64, r: u32) -> BracketSpec {
        BracketSpec { s, n, r }
    }

    #[test]
    fn sh_examples() {
        assert_eq!(sh_schedule(9, 1, 3, 9).unwrap(), vec![(9, 1), (3, 3), (1, 9)]);
        assert_eq!(sh_schedule(1, 4, 3, 9).unwrap(), vec![(1, 9)]);
        assert_eq!(sh_schedule(64, 1, 2, 76).unwrap().last(), Some(&(1, 76)));
        assert_eq!(sh_schedule(2, 9, 3, 9).unwrap(), vec![(2, 9)]);
        assert!(matches!(sh_schedule(9, 1, 1, 9), Err(HpoError::InvalidEta(1))));
    }

    #[test]
    fn brackets_for_27() {
        assert_eq!(
            hyperband_brackets(27, 3).unwrap(),
            vec![b(3, 27, 1), b(2, 12, 3), b(1, 6, 9), b(0, 4, 27)]
        );
        assert_eq!(hyperband_brackets(1, 3).unwrap(), vec![b(0, 1, 1)]);
    }

    #[test]
    fn brackets_for_4_eta_2() {
        // s_max = 2, n_2 = ⌈(3/3)·4⌉ = 4
        assert_eq!(
            hyperband_brackets(4, 2).unwrap(),
            vec![b(2, 4, 1), b(1, 3, 2), b(0, 3, 4)]
        );
    }

    #[test]
    fn cycle_cost_for_27() {
        assert_eq!(hyperband_cycle_cost(27, 3).unwrap(), 81 + 78 + 90 + 108);
    }

    #[test]
    fn promote_examples() {
        assert_eq!(
            promote(&[(0, Some(0.3)), (1, Some(0.1)), (2, Some(0.2))], 3).unwrap(),
            vec![1]
        );
        assert_eq!(
            promote(&[(0, Some(0.1)), (1, Some(0.1)), (2, Some(0.5))], 3).unwrap(),
            vec![0]
        );
        assert_eq!(promote(&[(4, None), (7, Some(9.0))], 2).unwrap(), vec![7]);
    }
}
