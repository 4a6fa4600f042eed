use mtptune_core::hpo::{hyperband_brackets, promote, s_max, sh_schedule};
use mtptune_core::metrics::{auroc, average_ranks, Direction};
use mtptune_core::space::{ConfigSpace, ParamSpec, Value};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mixed_space() -> ConfigSpace {
    ConfigSpace::new(vec![
        ParamSpec::real("lr", 1e-4, 1e-1, true).unwrap(),
        ParamSpec::real("mom", 0.0, 0.99, false).unwrap(),
        ParamSpec::integer("emb", 8, 256, true).unwrap(),
        ParamSpec::integer("layers", 1, 3, false).unwrap(),
        ParamSpec::categorical("batch", vec![256i64, 512, 1024]).unwrap(),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn samples_validate_and_encode_into_the_unit_cube(seed in any::<u64>()) {
        let space = mixed_space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let c = space.sample(&mut rng);
            prop_assert!(space.validate(&c).is_ok());
            let e = space.encode(&c).unwrap();
            prop_assert!(e.iter().all(|x| (0.0..=1.0).contains(x)));
            let d = space.decode(&e).unwrap();
            for (name, v) in c.iter() {
                match (v, d.get(name).unwrap()) {
                    (Value::Real(a), Value::Real(b)) => prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0)),
                    (a, b) => prop_assert_eq!(a, b),
                }
            }
        }
    }

    #[test]
    fn brackets_end_at_the_maximum_budget(max_budget in 1u32..2000, eta in 2u32..6) {
        let brackets = hyperband_brackets(max_budget, eta).unwrap();
        let top = s_max(max_budget, eta).unwrap();
        prop_assert_eq!(brackets.len() as u32, top + 1);
        prop_assert!(u64::from(eta).pow(top) <= u64::from(max_budget));
        prop_assert!(u64::from(eta).pow(top + 1) > u64::from(max_budget));
        for b in brackets {
            prop_assert!(b.r >= 1 && b.r <= max_budget);
            let rungs = sh_schedule(b.n, b.r, eta, max_budget).unwrap();
            prop_assert!(rungs.windows(2).all(|w| w[0].0 >= w[1].0 && w[0].1 < w[1].1));
            prop_assert_eq!(rungs.last().unwrap().1, max_budget);
        }
    }

    #[test]
    fn promote_keeps_the_best_fraction(losses in prop::collection::vec(prop::option::of(-10.0f64..10.0), 1..40), eta in 2u32..5) {
        let results: Vec<(u64, Option<f64>)> = losses.iter().enumerate().map(|(i, l)| (i as u64, *l)).collect();
        let kept = promote(&results, eta).unwrap();
        prop_assert_eq!(kept.len(), (losses.len() / eta as usize).max(1));
        let key = |id: u64| losses[id as usize].unwrap_or(f64::INFINITY);
        for w in kept.windows(2) {
            prop_assert!(key(w[0]) < key(w[1]) || (key(w[0]) == key(w[1]) && w[0] < w[1]));
        }
        let worst_kept = key(*kept.last().unwrap());
        for (id, _) in &results {
            if !kept.contains(id) {
                prop_assert!(key(*id) >= worst_kept);
            }
        }
    }

    #[test]
    fn average_ranks_sum_to_triangular(values in prop::collection::vec(prop::option::of(0i32..5), 1..12)) {
        let values: Vec<Option<f64>> = values.into_iter().map(|v| v.map(f64::from)).collect();
        let k = values.len() as f64;
        for dir in [Direction::LowerIsBetter, Direction::HigherIsBetter] {
            let ranks = average_ranks(&values, dir);
            prop_assert!((ranks.iter().sum::<f64>() - k * (k + 1.0) / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn auroc_flips_under_negation(scores in prop::collection::vec(-1.0f64..1.0, 2..30), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<bool> = scores.iter().map(|_| rand::Rng::random(&mut rng)).collect();
        labels[0] = true;
        labels[1] = false;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auroc(&scores, &labels).unwrap();
        let b = auroc(&neg, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }
}
