use partsketch::dataset::{generate_dataset, DatasetConfig, ShapeClass};
use partsketch::model::ModelConfig;
use partsketch::nn::LrSchedule;
use partsketch::trainer::{refiner_pairs, train_refiner_on, train_sketch2shape_on, TrainConfig, LOSS_HEADER};

fn tiny_data() -> Vec<partsketch::dataset::TrainSample> {
    generate_dataset(&DatasetConfig {
        classes: vec![ShapeClass::Chair],
        count: 3,
        seed: 11,
        m: Some(8),
        d_model: 32,
        partial_fraction: 1.0,
        views: vec![1],
        abstract_style: false,
    })
    .unwrap()
}

fn cfg() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 2,
        schedule: Some(LrSchedule {
            lr_start: 1e-4,
            lr_end: 1e-3,
            warmup_epochs: 1,
        }),
        model: ModelConfig::desk(),
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = tiny_data();
    let a = train_sketch2shape_on(&cfg(), &data, &[]).unwrap();
    let b = train_sketch2shape_on(&cfg(), &data, &[]).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.model.params, b.model.params);
    let other = train_sketch2shape_on(&TrainConfig { seed: 9, ..cfg() }, &data, &[]).unwrap();
    assert_ne!(a.model.params, other.model.params);
}

#[test]
fn partial_samples_feed_the_part_loss() {
    let data = tiny_data();
    assert!(data.len() > 3, "partial fraction 1 adds partial samples");
    let out = train_sketch2shape_on(&cfg(), &data, &[]).unwrap();
    assert!(out.curve.iter().all(|l| l.loss_part > 0.0 && l.loss_cls > 0.0));
}

#[test]
fn max_steps_and_outputs() {
    let data = tiny_data();
    let dir = tempfile::tempdir().unwrap();
    let c = TrainConfig {
        epochs: 50,
        max_steps: Some(3),
        out_dir: Some(dir.path().to_path_buf()),
        ..cfg()
    };
    let out = train_sketch2shape_on(&c, &data, &data[..1]).unwrap();
    assert_eq!(out.steps, 3);
    assert!(out.curve.iter().all(|l| l.heldout_loss_full.is_some()));
    let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(LOSS_HEADER));
    for name in ["model_final.ckpt", "model_best.ckpt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn refiner_trains_on_distinct_targets() {
    let data = tiny_data();
    let pairs = refiner_pairs(&data, None).unwrap();
    assert_eq!(pairs.len(), 3);
    let out = train_refiner_on(&cfg(), &pairs).unwrap();
    assert_eq!(out.steps, 4);
    assert!(out.curve.iter().all(|l| l.loss_refine.is_finite()));
}

#[test]
fn cosine_floor_schedule() {
    let c = TrainConfig {
        epochs: 100,
        lr_floor: Some(1e-5),
        schedule: Some(LrSchedule {
            lr_start: 1e-4,
            lr_end: 3e-3,
            warmup_epochs: 10,
        }),
        ..TrainConfig::default()
    };
    assert!((c.lr_at(0, 4) - 1e-4).abs() < 1e-15);
    assert!((c.lr_at(10, 4) - 3e-3).abs() < 1e-15);
    assert!((c.lr_at(99, 4) - 1e-5).abs() < 1e-15);
    for e in 10..99 {
        assert!(c.lr_at(e + 1, 4) <= c.lr_at(e, 4));
    }
    // a step budget pulls the end of the decay forward: 200 steps at 4 per epoch
    let capped = TrainConfig { max_steps: Some(200), ..c.clone() };
    assert!((capped.lr_at(49, 4) - 1e-5).abs() < 1e-15);
    assert!((capped.lr_at(80, 4) - 1e-5).abs() < 1e-15);
    // without a floor the warmup ramp holds
    let plain = TrainConfig { lr_floor: None, ..c };
    assert!((plain.lr_at(60, 4) - 3e-3).abs() < 1e-15);
}

#[test]
fn invalid_configs_are_rejected() {
    let data = tiny_data();
    for bad in [
        TrainConfig { batch_size: 0, ..cfg() },
        TrainConfig { lr_floor: Some(-1.0), ..cfg() },
        TrainConfig { partial_fraction: 2.0, ..cfg() },
    ] {
        let err = train_sketch2shape_on(&bad, &data, &[]).err().unwrap();
        assert_eq!(err.code(), "config_error", "{err}");
    }
}
