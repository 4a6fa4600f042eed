use approx::assert_abs_diff_eq;
use mtptune_core::data::synth_matrix_completion;
use mtptune_core::mtp::{MtpDataset, ScoreType, Triplet};
use mtptune_core::net::{
    predict_pairs, train, Activation, BranchInput, BranchSpec, Checkpoint, HeadSpec, Input, LossKind, NetError,
    OutputKind, TrainConfig, TwoBranchModel,
};

fn ids(p: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{p}{i}")).collect()
}

fn one_hot_pair(k: usize, head: HeadSpec, output: OutputKind) -> TwoBranchModel {
    TwoBranchModel::with_inputs(
        BranchInput::OneHot(1),
        BranchInput::OneHot(1),
        &BranchSpec::lookup(k),
        &BranchSpec::lookup(k),
        &head,
        output,
        0,
    )
    .unwrap()
}

#[test]
fn dot_head_forward() {
    let mut m = one_hot_pair(2, HeadSpec::Dot, OutputKind::Logistic);
    m.tensor_mut("instance.0.weight").unwrap().copy_from_slice(&[1.0, 2.0]);
    m.tensor_mut("target.0.weight").unwrap().copy_from_slice(&[3.0, -1.0]);
    assert_abs_diff_eq!(m.forward(Input::Index(0), Input::Index(0)), 0.7310586, epsilon = 1e-7);
    m.tensor_mut("instance.0.weight").unwrap().fill(0.0);
    assert_eq!(m.forward(Input::Index(0), Input::Index(0)), 0.5);
}

#[test]
fn mlp_head_forward() {
    let head = HeadSpec::Mlp {
        input_dim: 2,
        hidden: vec![2],
        activation: Activation::Relu,
    };
    let mut m = one_hot_pair(1, head, OutputKind::Logistic);
    m.tensor_mut("instance.0.weight").unwrap()[0] = 0.5;
    m.tensor_mut("target.0.weight").unwrap()[0] = -0.5;
    m.tensor_mut("head.0.weight")
        .unwrap()
        .copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
    m.tensor_mut("head.0.bias").unwrap().fill(0.0);
    m.tensor_mut("head.h").unwrap().copy_from_slice(&[1.0, 1.0]);
    assert_abs_diff_eq!(m.forward(Input::Index(0), Input::Index(0)), 0.6224593, epsilon = 1e-7);
}

#[test]
fn build_rules() {
    let d = MtpDataset::new(
        ids("i", 5),
        ids("t", 3),
        None,
        None,
        vec![Triplet::new(0, 0, 1.0)],
        ScoreType::Real,
    )
    .unwrap();
    let spec = BranchSpec::lookup(4);
    let m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 7).unwrap();
    assert_eq!(
        m.branch_input(mtptune_core::net::Side::Instance),
        BranchInput::OneHot(5)
    );
    assert_eq!(m.tensor("instance.0.weight").unwrap().len(), 5 * 4);
    let again = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 7).unwrap();
    assert_eq!(m, again);
    // He-truncated: |w| <= 2 * sqrt(2 / fan_in)
    let bound = 2.0 * (2.0f64 / 5.0).sqrt();
    assert!(m.tensor("instance.0.weight").unwrap().iter().all(|w| w.abs() <= bound));

    let bad_head = HeadSpec::Mlp {
        input_dim: 7,
        hidden: vec![],
        activation: Activation::Relu,
    };
    assert!(matches!(
        TwoBranchModel::build(&d, &spec, &spec, &bad_head, OutputKind::Identity, 7),
        Err(NetError::DimensionMismatch(_))
    ));
    let deep = BranchSpec {
        n_layers: 2,
        width: 8,
        embedding_dim: 4,
        activation: Activation::Relu,
    };
    assert!(matches!(
        TwoBranchModel::build(&d, &deep, &spec, &HeadSpec::Dot, OutputKind::Identity, 7),
        Err(NetError::InvalidSpec(_))
    ));
}

fn rank_one(n: usize) -> MtpDataset {
    let u: Vec<f64> = (0..n).map(|i| 0.5 + i as f64 / n as f64).collect();
    let v: Vec<f64> = (0..n).map(|j| 1.0 - j as f64 / (2 * n) as f64).collect();
    let triplets = (0..n * n)
        .map(|c| Triplet::new(c / n, c % n, u[c / n] * v[c % n]))
        .collect();
    MtpDataset::new(ids("i", n), ids("t", n), None, None, triplets, ScoreType::Real).unwrap()
}

#[test]
fn learns_rank_one_matrix() {
    let d = rank_one(8);
    let spec = BranchSpec::lookup(2);
    let mut m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 3).unwrap();
    let mut cfg = TrainConfig::new(0.05, 16, LossKind::Mse, 3);
    cfg.patience = 1000;
    let out = train(&mut m, &d, &d.triplets, &[], &cfg, 200, None).unwrap();
    assert_eq!(out.history.len(), 200);
    let mse = m.loss_and_gradient(&d, &d.triplets, LossKind::Mse, None);
    assert!(mse < 1e-3, "training mse {mse}");
}

fn mc_problem() -> (MtpDataset, Vec<Triplet>, Vec<Triplet>) {
    let s = synth_matrix_completion(12, 10, 2, 0.05, 0.6, 5).unwrap();
    let d = s.bundle.train;
    let pick = |keep: bool| -> Vec<Triplet> {
        d.triplets
            .iter()
            .enumerate()
            .filter(|(k, _)| (k % 5 == 0) == keep)
            .map(|(_, t)| *t)
            .collect()
    };
    let (tr, val) = (pick(false), pick(true));
    (d, tr, val)
}

#[test]
fn resume_matches_straight_run() {
    let (d, tr, val) = mc_problem();
    let spec = BranchSpec::lookup(3);
    let fresh = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 11).unwrap();
    let cfg = TrainConfig::new(0.02, 8, LossKind::Mse, 11);

    let mut straight = fresh.clone();
    let full = train(&mut straight, &d, &tr, &val, &cfg, 10, None).unwrap();

    let mut staged = fresh.clone();
    let first = train(&mut staged, &d, &tr, &val, &cfg, 5, None).unwrap();
    let bytes = first.checkpoint.to_bytes();
    let restored = Checkpoint::from_bytes(&bytes).unwrap();
    let mut resumed = fresh;
    let second = train(&mut resumed, &d, &tr, &val, &cfg, 10, Some(&restored)).unwrap();

    assert_eq!(second.checkpoint, full.checkpoint);
    assert_eq!(resumed.params(), straight.params());
    let mut joined = first.history.clone();
    joined.extend(&second.history);
    assert_eq!(joined, full.history);

    // no extra epochs: the checkpoint comes back unchanged
    let mut idle = staged.clone();
    let same = train(&mut idle, &d, &tr, &val, &cfg, 5, Some(&first.checkpoint)).unwrap();
    assert_eq!(same.checkpoint, first.checkpoint);
    assert!(same.history.is_empty());
    assert!(matches!(
        train(&mut idle, &d, &tr, &val, &cfg, 4, Some(&first.checkpoint)),
        Err(NetError::BudgetBelowCheckpoint { .. })
    ));
}

#[test]
fn reported_loss_is_best_epoch() {
    let (d, tr, val) = mc_problem();
    let spec = BranchSpec::lookup(4);
    let mut m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 2).unwrap();
    let mut cfg = TrainConfig::new(0.08, 4, LossKind::Mse, 2);
    cfg.patience = 3;
    let out = train(&mut m, &d, &tr, &val, &cfg, 60, None).unwrap();
    let min = out.history.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(out.val_loss(), min);
    assert_eq!(out.history[out.checkpoint.best_epoch as usize - 1], min);
    if out.checkpoint.stopped {
        assert!(out.history.len() < 60);
        assert_eq!(out.checkpoint.epochs_since_improvement, 3);
    }
}

#[test]
fn swapped_branches_train_identically() {
    let (d, tr, val) = mc_problem();
    let t = |v: &[Triplet]| -> Vec<Triplet> { v.iter().map(|x| Triplet::new(x.target, x.instance, x.score)).collect() };
    let dt = MtpDataset::new(
        d.target_ids.clone(),
        d.instance_ids.clone(),
        None,
        None,
        t(&d.triplets),
        ScoreType::Real,
    )
    .unwrap();
    let spec = BranchSpec::lookup(3);
    let mut a = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 4).unwrap();
    let mut b = a.swap_branches().unwrap();
    let cfg = TrainConfig::new(0.03, 8, LossKind::Mse, 9);
    let ha = train(&mut a, &d, &tr, &val, &cfg, 8, None).unwrap().history;
    let hb = train(&mut b, &dt, &t(&tr), &t(&val), &cfg, 8, None).unwrap().history;
    assert_eq!(ha, hb);
}

#[test]
fn one_hot_side_cannot_predict_unseen_ids() {
    let (d, tr, _) = mc_problem();
    let spec = BranchSpec::lookup(3);
    let m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 4).unwrap();
    let seen: Vec<Triplet> = tr.iter().filter(|t| t.instance != 0).copied().collect();
    match predict_pairs(&m, &d, &[(0, 0)], &seen) {
        Err(NetError::Infeasible { side, index }) => {
            assert_eq!(side, mtptune_core::net::Side::Instance);
            assert_eq!(index, 0);
            assert!(NetError::Infeasible { side, index }.to_string().contains("instance"));
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
    assert_eq!(predict_pairs(&m, &d, &[(1, 1), (2, 3)], &tr).unwrap().len(), 2);
}

#[test]
fn bce_requires_binary_scores() {
    let (d, tr, val) = mc_problem();
    let spec = BranchSpec::lookup(2);
    let mut m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Logistic, 1).unwrap();
    let cfg = TrainConfig::new(0.01, 8, LossKind::Bce, 1);
    assert!(matches!(
        train(&mut m, &d, &tr, &val, &cfg, 2, None),
        Err(NetError::NonBinaryScore(_))
    ));
}

#[test]
fn divergence_is_reported() {
    let (d, tr, val) = mc_problem();
    let spec = BranchSpec::lookup(2);
    let mut m = TwoBranchModel::build(&d, &spec, &spec, &HeadSpec::Dot, OutputKind::Identity, 1).unwrap();
    m.params_mut()[0] = f64::MAX;
    let cfg = TrainConfig::new(0.01, 8, LossKind::Mse, 1);
    assert!(matches!(
        train(&mut m, &d, &tr, &val, &cfg, 3, None),
        Err(NetError::Diverged { epoch: 1 })
    ));
}
