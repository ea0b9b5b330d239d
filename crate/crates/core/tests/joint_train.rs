use fve::train::evaluate::predict_linear;
use fve::train::linear::Linear;
use fve::train::{
    prepare_images, run_arm, synth_parts, Accuracy, Arm, ImageInput, PartOrder, PartsConfig, ToyModel, TrainConfig,
    Trainer, Visibility,
};
use fve::{set_reduction, Reduction};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn small_parts() -> PartsConfig {
    PartsConfig {
        images_per_class: 10,
        cells_per_part: 4,
        ..PartsConfig::default()
    }
}

fn images(n: usize, rows: usize, d_in: usize, rng: &mut ChaCha8Rng) -> Vec<ImageInput> {
    (0..n)
        .map(|i| ImageInput::new(Array2::from_shape_fn((rows, d_in), |_| StandardNormal.sample(rng)), i % 2))
        .collect()
}

#[test]
fn extractor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let imgs = images(2, 6, 3, &mut rng);
    let cfg = TrainConfig {
        k: 2,
        feature_dim: 2,
        filter_norm: false,
        ..TrainConfig::default()
    };
    let mut model = ToyModel::new(&cfg, 3, 2, &imgs).unwrap();
    model.classifier = Linear::random(2 * 2 * 2, 2, 1.0, &mut rng);
    let gmm = model.gmm().unwrap();
    let pass = model.forward_with(&gmm, &imgs).unwrap();
    let grads = model.backward(&gmm, &imgs, &pass).unwrap();

    let eps = 1e-6;
    let loss = |m: &ToyModel| m.forward_with(&gmm, &imgs).unwrap().loss;
    for i in 0..3 {
        for j in 0..2 {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.extractor.weight[[i, j]] += eps;
            minus.extractor.weight[[i, j]] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let g = grads.extractor.weight[[i, j]];
            assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1.0), "w[{i},{j}]: {g} vs {fd}");
        }
    }
}

#[test]
fn zero_learning_rate_still_moves_the_mixture() {
    let ds = synth_parts(&small_parts()).unwrap();
    let train = prepare_images(&ds.train, PartOrder::Shuffled, Visibility::ZeroFilled);
    let cfg = TrainConfig {
        epochs: 2,
        base_lr: 0.0,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(cfg, &train, ds.num_classes).unwrap();
    let before = trainer.model.clone();
    trainer.fit(&train, |_| {}).unwrap();
    assert_eq!(trainer.model.extractor, before.extractor);
    assert_eq!(trainer.model.classifier, before.classifier);
    assert!(trainer.model.gmm_state.t() > 0);
    assert_ne!(trainer.model.gmm().unwrap(), before.gmm().unwrap());
}

#[test]
fn training_lowers_the_loss() {
    let ds = synth_parts(&small_parts()).unwrap();
    let train = prepare_images(&ds.train, PartOrder::Ordered, Visibility::ZeroFilled);
    let cfg = TrainConfig {
        epochs: 10,
        decay_epochs: vec![],
        ..TrainConfig::default()
    };
    let mut steps = 0;
    let losses = Trainer::new(cfg, &train, ds.num_classes).unwrap().fit(&train, |_| steps += 1).unwrap();
    assert_eq!(losses.len(), 10);
    assert_eq!(steps, 10 * train.len().div_ceil(32));
    assert!(losses[9] < losses[0], "{losses:?}");
}

#[test]
fn evaluation_is_deterministic() {
    set_reduction(Reduction::Deterministic);
    let ds = synth_parts(&small_parts()).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let a = run_arm(&ds, Arm::FveShuffled, &cfg, |_| {}).unwrap();
    let b = run_arm(&ds, Arm::FveShuffled, &cfg, |_| {}).unwrap();
    assert_eq!(a, b);
}

#[test]
fn random_guessing_scores_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let labels: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..10)).collect();
    let layer = Linear::random(5, 10, 1.0, &mut rng);
    let x = Array2::from_shape_fn((labels.len(), 5), |_| StandardNormal.sample(&mut rng));
    let acc = Accuracy::from_predictions(&predict_linear(&layer, x.view()), &labels, 10);
    assert!((acc.overall - 0.1).abs() < 0.01, "{}", acc.overall);
    assert_eq!(acc.total, 20_000);
}

#[test]
fn separable_parts_are_learned() {
    let parts = PartsConfig {
        images_per_class: 30,
        visibility_rate: 1.0,
        noise: 0.1,
        ..PartsConfig::default()
    };
    let ds = synth_parts(&parts).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        decay_epochs: vec![20],
        ..TrainConfig::default()
    };
    let acc = run_arm(&ds, Arm::FveOrdered, &cfg, |_| {}).unwrap().test_accuracy;
    assert!(acc >= 0.99, "{acc}");
}
