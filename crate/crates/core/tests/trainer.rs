use std::f64::consts::PI;
use std::sync::Arc;

use pinnkit_core::checkpoint::Checkpoint;
use pinnkit_core::losses::{CausalityConfig, PdeKind};
use pinnkit_core::models::{Mlp, ModelSpec, Network};
use pinnkit_core::optimizers::SwitchPolicy;
use pinnkit_core::trainer::{
    curriculum_run, data_parallel_train, loss_and_gradient, param_hash, resume, sample_lhs, sample_lhs_per_axis,
    sharded_gradient, train, train_with, Balancing, BoundaryKind, CollocationSet, CurriculumStage, Problem, Sampling,
    SamplingConfig, TrainConfig, TrainState,
};
use proptest::prelude::*;

fn advection() -> Problem {
    Problem {
        pde: PdeKind::Advection { c: 1.0 },
        bounds: vec![(0.0, 2.0 * PI), (0.0, 1.0)],
        initial: Arc::new(|x: &[f64]| vec![x[0].sin()]),
        boundary: BoundaryKind::Periodic { derivative: true },
    }
}

fn small_net(seed: u64) -> Mlp {
    Mlp::new(
        ModelSpec {
            input_bounds: Some(advection().bounds),
            ..ModelSpec::mlp(2, 8, 2, 1)
        },
        seed,
    )
    .unwrap()
}

fn sampling() -> SamplingConfig {
    SamplingConfig {
        interior: Sampling::Uniform {
            dims: vec![8, 8],
            ends: vec![],
        },
        initial: 16,
        boundary: 8,
    }
}

fn data() -> CollocationSet {
    CollocationSet::build(&advection(), &sampling(), 7).unwrap()
}

#[test]
fn resume_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        balancing: Some(Balancing {
            alpha: 0.9,
            update_period: 5,
        }),
        switch: Some(SwitchPolicy::EpochThreshold { epoch: 20 }),
        ..TrainConfig::default()
    };
    let mut straight = small_net(1);
    train(&mut straight, &advection(), &data(), &cfg).unwrap();

    // Stop at epoch 25, inside the L-BFGS phase, and continue from disk.
    let mut first = small_net(1);
    let part = TrainConfig { epochs: 25, ..cfg.clone() };
    let rep = train(&mut first, &advection(), &data(), &part).unwrap();
    let path = dir.path().join("mid.ckpt");
    rep.state.to_checkpoint(&first).save(&path).unwrap();

    let mut second = small_net(99);
    let ck = Checkpoint::load(&path).unwrap();
    let state = TrainState::from_checkpoint(&ck, &mut second).unwrap();
    assert_eq!(state.epoch, 25);
    resume(&mut second, &advection(), &data(), &cfg, state).unwrap();
    assert_eq!(
        straight.params().flatten_trainable(),
        second.params().flatten_trainable()
    );
}

#[test]
fn checkpoints_and_metrics_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        save_every: 3,
        run_dir: Some(dir.path().to_path_buf()),
        ..TrainConfig::default()
    };
    let mut net = small_net(2);
    train_with(&mut net, &advection(), &sampling(), &cfg, None).unwrap();
    for name in ["epoch0000003.ckpt", "epoch0000006.ckpt", "final.ckpt", "metrics.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn single_worker_data_parallel_matches_serial() {
    let cfg = TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    };
    let mut serial = small_net(3);
    train(&mut serial, &advection(), &data(), &cfg).unwrap();
    let mut replica = small_net(3);
    data_parallel_train(&mut replica, &advection(), &data(), &cfg, 1).unwrap();
    assert_eq!(serial.params().flatten_trainable(), replica.params().flatten_trainable());
}

#[test]
fn four_workers_average_to_serial_gradient() {
    let net = small_net(4);
    let cfg = TrainConfig::default();
    let serial = loss_and_gradient(&net, &advection(), &data(), &cfg).unwrap().1;
    let sharded = sharded_gradient(&net, &advection(), &data(), &cfg, 4).unwrap();
    for (a, b) in serial.iter().zip(&sharded) {
        assert!((a - b).abs() <= 1e-12);
    }
    let mut replica = small_net(4);
    let rep = data_parallel_train(&mut replica, &advection(), &data(), &cfg.clone(), 4);
    assert!(rep.is_ok());
    let h = param_hash(&replica.params().flatten_trainable());
    assert_ne!(h, param_hash(&net.params().flatten_trainable()));
}

#[test]
fn data_parallel_rejects_switching() {
    let cfg = TrainConfig {
        switch: Some(SwitchPolicy::EpochThreshold { epoch: 1 }),
        ..TrainConfig::default()
    };
    assert!(data_parallel_train(&mut small_net(5), &advection(), &data(), &cfg, 2).is_err());
}

#[test]
fn causality_with_lbfgs_trains() {
    let cfg = TrainConfig {
        epochs: 12,
        causality: Some(CausalityConfig { segments: 4, eps: 1.0 }),
        switch: Some(SwitchPolicy::EpochThreshold { epoch: 6 }),
        ..TrainConfig::default()
    };
    let mut net = small_net(6);
    let rep = train(&mut net, &advection(), &data(), &cfg).unwrap();
    assert_eq!(rep.switched_at, Some(6));
    let h = &rep.state.history;
    assert!(h.last().unwrap() < &h[0]);
}

#[test]
fn curriculum_carries_parameters_forward() {
    let stages = vec![
        CurriculumStage {
            pde: Some(PdeKind::Advection { c: 1.0 }),
            epochs: 5,
            ..Default::default()
        },
        CurriculumStage {
            pde: Some(PdeKind::Advection { c: 2.0 }),
            interior: Some(Sampling::Uniform {
                dims: vec![8, 12],
                ends: vec![],
            }),
            epochs: 5,
            ..Default::default()
        },
    ];
    let mut net = small_net(8);
    let before = net.params().flatten_trainable();
    let reps = curriculum_run(&mut net, &advection(), &sampling(), &stages, &TrainConfig::default(), true).unwrap();
    assert_eq!(reps.len(), 2);
    assert_eq!(reps[1].state.epoch, 5);
    assert_ne!(before, net.params().flatten_trainable());
    let shrinking = vec![stages[1].clone(), stages[0].clone()];
    assert!(curriculum_run(&mut net, &advection(), &sampling(), &shrinking, &TrainConfig::default(), true).is_err());
}

#[test]
fn divergence_keeps_last_good_parameters() {
    let cfg = TrainConfig {
        epochs: 50,
        adam: pinnkit_core::optimizers::AdamConfig {
            lr: 1e6,
            ..Default::default()
        },
        ..TrainConfig::default()
    };
    let mut net = small_net(9);
    let out = train(&mut net, &advection(), &data(), &cfg);
    if out.is_err() {
        assert!(net.params().flatten_trainable().iter().all(|v| v.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lhs_has_one_point_per_stratum(n in 1usize..200, seed in any::<u64>()) {
        let b = [(-1.0, 3.0), (0.0, 0.5)];
        let pts = sample_lhs(&b, n, seed).unwrap();
        prop_assert_eq!(pts.rows(), n);
        for (j, &(lo, hi)) in b.iter().enumerate() {
            let mut seen = vec![false; n];
            for r in 0..n {
                let v = pts.at(r, j);
                prop_assert!(v >= lo && v <= hi);
                let k = (((v - lo) / (hi - lo)) * n as f64).floor().min(n as f64 - 1.0) as usize;
                prop_assert!(!seen[k]);
                seen[k] = true;
            }
        }
        prop_assert_eq!(sample_lhs(&b, n, seed).unwrap(), pts);
    }

    #[test]
    fn per_axis_lhs_is_a_product(nx in 1usize..20, nt in 1usize..20, seed in any::<u64>()) {
        let pts = sample_lhs_per_axis(&[(0.0, 1.0), (0.0, 2.0)], &[nx, nt], seed).unwrap();
        prop_assert_eq!(pts.rows(), nx * nt);
        let mut xs: Vec<f64> = (0..pts.rows()).map(|r| pts.at(r, 0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        prop_assert_eq!(xs.len(), nx);
    }

    #[test]
    fn shards_partition_the_interior(w in 1usize..9) {
        let d = data();
        let shards = d.shards(w).unwrap();
        prop_assert_eq!(shards.len(), w);
        let total: usize = shards.iter().map(|s| s.interior.rows()).sum();
        prop_assert_eq!(total, d.interior.rows());
        for s in &shards {
            prop_assert_eq!(&s.initial, &d.initial);
        }
    }
}
