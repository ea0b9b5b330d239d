//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! report is always printed; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fve::bench::bench_forward;
use fve::exec::{set_reduction, Reduction};
use fve::fve::{analytic_jacobian, jacobian_fd, random_instance, relative_error};
use fve::io::{synth_circle, CircleConfig};
use fve::streaming::fit_streaming;
use fve::train::{
    experiment::seeded, median, prepare_images, run_arm, run_k_pair, synth_parts, Arm, PartOrder, PartsConfig,
    TrainConfig, Trainer, Visibility,
};
use fve::{em_full, encode, DiagGmm, EmaState, FeatureBatch, InitSpec, InitStrategy};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

const SEEDS: u64 = 5;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut configs, mut worst) = (0, 0.0f64);
    for k in [1, 2, 5] {
        for d in [2, 8] {
            for n in [1, 3, 16] {
                for _ in 0..6 {
                    let (gmm, set) = random_instance(k, d, n, &mut rng);
                    let analytic = analytic_jacobian(&gmm, set.view()).unwrap();
                    let numeric = jacobian_fd(&gmm, set.view(), 1e-5).unwrap();
                    worst = worst.max(relative_error(&analytic, &numeric));
                    configs += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        configs >= 100 && worst <= 1e-5 && secs < 60.0,
        format!("{configs} configurations, max relative error {worst:.2e}, {secs:.1}s"),
    )
}

fn circle_convergence() -> Outcome {
    let cfg = CircleConfig::default();
    let data = synth_circle(&cfg).unwrap();
    let init = InitSpec::new(InitStrategy::KMeans, 0);
    let fit = fit_streaming(&data.batch, 10, 0.9, 128, 50, &init, 0).unwrap();
    let gmm = fit.state.bias_corrected().unwrap();

    let mut pairs = Vec::new();
    for c in 0..10 {
        let center = cfg.center(c);
        for j in 0..10 {
            let m = gmm.means().row(j).to_owned();
            pairs.push(((center[0] - m[0]).hypot(center[1] - m[1]), c, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut used_c, mut used_j, mut worst) = ([false; 10], [false; 10], 0.0f64);
    for (dist, c, j) in pairs {
        if !used_c[c] && !used_j[j] {
            used_c[c] = true;
            used_j[j] = true;
            worst = worst.max(dist);
        }
    }
    let weight_dev = gmm.weights().iter().map(|w| (w - 0.1).abs()).fold(0.0, f64::max);
    let reference = em_full(&data.batch, 10, &init, 500, 1e-10).unwrap().trace.last();
    outcome(
        worst <= 0.1 && weight_dev <= 0.05,
        format!(
            "after 50 steps: max center distance {worst:.4}, max |w - 0.1| {weight_dev:.4}; log-likelihood {:.4} vs full-batch {reference:.4}",
            fit.trace[49]
        ),
    )
}

/// Bias-corrected running mean and biased variance, coded from scratch.
struct RunningMoments {
    lambda: f64,
    t: i32,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl RunningMoments {
    fn push(&mut self, rows: &Array2<f64>) {
        let n = rows.nrows() as f64;
        for j in 0..rows.ncols() {
            let m = rows.column(j).sum() / n;
            let v = rows.column(j).iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            self.mean[j] = self.lambda * self.mean[j] + (1.0 - self.lambda) * m;
            self.var[j] = self.lambda * self.var[j] + (1.0 - self.lambda) * v;
        }
        self.t += 1;
    }

    fn corrected(&self) -> (Vec<f64>, Vec<f64>) {
        let c = 1.0 - self.lambda.powi(self.t);
        (self.mean.iter().map(|m| m / c).collect(), self.var.iter().map(|v| v / c).collect())
    }
}

fn single_component_tracker() -> Outcome {
    let d = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = EmaState::new(DiagGmm::single(&[0.0; 3], &[1.0; 3]).unwrap(), 0.9).unwrap();
    let mut tracker = RunningMoments {
        lambda: 0.9,
        t: 0,
        mean: vec![0.0; d],
        var: vec![0.0; d],
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let shift = normal(&mut rng);
        let rows = Array2::from_shape_fn((n, d), |(_, j)| shift + (j as f64 + 1.0) * normal(&mut rng));
        state.step(&FeatureBatch::new(rows.clone()).unwrap()).unwrap();
        tracker.push(&rows);
        let g = state.bias_corrected().unwrap();
        let (m, v) = tracker.corrected();
        for j in 0..d {
            worst = worst.max((g.means()[[0, j]] - m[j]).abs()).max((g.variances()[[0, j]] - v[j]).abs());
        }
    }
    outcome(worst <= 1e-12, format!("1000 batches, max deviation {worst:.1e}"))
}

fn random_mixture_data(rng: &mut ChaCha8Rng) -> (FeatureBatch, usize) {
    let k = rng.random_range(1..=5);
    let d = rng.random_range(1..=4);
    let n = rng.random_range(40..200);
    let centers = Array2::from_shape_fn((k, d), |_| 3.0 * normal(rng));
    let scales: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
    let rows = Array2::from_shape_fn((n, d), |(i, j)| centers[[i % k, j]] + scales[i % k] * normal(rng));
    (FeatureBatch::new(rows).unwrap(), k)
}

fn em_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_drop, mut flagged, mut iterations) = (0.0f64, 0, 0);
    for problem in 0..50u64 {
        let (batch, k) = random_mixture_data(&mut rng);
        let strategy = if problem % 2 == 0 { InitStrategy::KMeansPlusPlus } else { InitStrategy::RandomSubset };
        let fit = em_full(&batch, k, &InitSpec::new(strategy, problem), 300, 1e-12).unwrap();
        let trace = &fit.trace;
        let mut prev = trace.initial;
        for (i, &ll) in trace.log_likelihood.iter().enumerate() {
            iterations += 1;
            if trace.is_flagged(i) {
                flagged += 1;
            } else {
                worst_drop = worst_drop.max(prev - ll);
            }
            prev = ll;
        }
    }
    outcome(
        worst_drop <= 1e-9,
        format!("50 problems, {iterations} iterations ({flagged} flagged), largest decrease {worst_drop:.1e}"),
    )
}

fn set_invariance() -> Outcome {
    set_reduction(Reduction::Deterministic);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut sizes = [false; 64];
    for case in 0..1000 {
        let n = case % 64 + 1;
        let k = rng.random_range(1..=4);
        let d = rng.random_range(1..=5);
        let (gmm, set) = random_instance(k, d, n, &mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted = set.select(ndarray::Axis(0), &order);
        let a = encode(&gmm, set.view()).unwrap();
        let b = encode(&gmm, permuted.view()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(a.values()) != bits(b.values()) || a.values().iter().any(|v| !v.is_finite()) {
            mismatches += 1;
        }
        sizes[n - 1] = true;
    }
    outcome(
        mismatches == 0 && sizes.iter().all(|&s| s),
        format!("1000 cases, sizes 1..=64 all encoded, {mismatches} non-identical permutations"),
    )
}

fn telescoping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for stream in 0..3 {
        let (k, d) = (3 + stream, 2);
        let init = DiagGmm::new(
            Array1::from_elem(k, 1.0 / k as f64),
            Array2::from_shape_fn((k, d), |_| normal(&mut rng)),
            Array2::ones((k, d)),
        )
        .unwrap();
        let mut state = EmaState::new(init, 0.9).unwrap();
        for _ in 0..500 {
            let n = rng.random_range(1..30);
            let rows = Array2::from_shape_fn((n, d), |_| 2.0 * normal(&mut rng));
            state.step(&FeatureBatch::new(rows).unwrap()).unwrap();
            let total: f64 = state.bias_corrected().unwrap().weights().sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    outcome(worst <= 1e-12, format!("3 streams x 500 steps, max |sum - 1| {worst:.1e}"))
}

fn order_visibility() -> Outcome {
    let test_size = synth_parts(&PartsConfig::default()).unwrap().test.len();
    let runs: Vec<Vec<f64>> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let (parts, train) = seeded(&PartsConfig::default(), &TrainConfig::default(), seed);
            let ds = synth_parts(&parts).unwrap();
            Arm::ALL.into_iter().map(|arm| run_arm(&ds, arm, &train, |_| {}).unwrap().test_accuracy).collect()
        })
        .collect();
    let acc: Vec<Vec<f64>> = (0..Arm::ALL.len()).map(|i| runs.iter().map(|r| r[i]).collect()).collect();
    let med: Vec<f64> = acc.iter().map(|a| median(a)).collect();
    let [fve_ord, fve_shuf, fve_vis, gap_ord, gap_shuf] = [med[0], med[1], med[2], med[3], med[4]];
    // Compare in whole test images so that 0.5% is not at the mercy of rounding.
    let images = |a: f64| (a * test_size as f64).round() as i64;
    let half_pct = (0.005 * test_size as f64).floor() as i64;
    let a = images(fve_shuf) >= images(fve_ord) - half_pct;
    let b = gap_shuf <= gap_ord;
    let c = (images(fve_vis) - images(fve_shuf)).abs() <= half_pct;
    outcome(
        a && b && c,
        format!(
            "medians over {SEEDS} seeds ({test_size} test images): FVE ordered {fve_ord:.4} shuffled {fve_shuf:.4} visible-only {fve_vis:.4}; GAP ordered {gap_ord:.4} shuffled {gap_shuf:.4} [(a) {} (b) {} (c) {}]",
            mark(a),
            mark(b),
            mark(c)
        ),
    )
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "fail"
    }
}

fn joint_vs_conventional() -> Outcome {
    let ks = [1, 2, 5, 10];
    let runs: Vec<Vec<(f64, f64)>> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let (parts, train) = seeded(&PartsConfig::default(), &TrainConfig::default(), seed);
            let ds = synth_parts(&parts).unwrap();
            ks.iter()
                .map(|&k| {
                    let r = run_k_pair(&ds, k, &train).unwrap();
                    (r.joint_accuracy, r.conventional_accuracy)
                })
                .collect()
        })
        .collect();
    let joint: Vec<Vec<f64>> = (0..ks.len()).map(|i| runs.iter().map(|r| r[i].0).collect()).collect();
    let conv: Vec<Vec<f64>> = (0..ks.len()).map(|i| runs.iter().map(|r| r[i].1).collect()).collect();
    let jm: Vec<f64> = joint.iter().map(|a| median(a)).collect();
    let cm: Vec<f64> = conv.iter().map(|a| median(a)).collect();
    let range = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    let (jr, cr) = (range(&jm), range(&cm));
    let fmt = |v: &[f64]| v.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join("/");
    outcome(
        jr < cr,
        format!("K=1/2/5/10 medians: joint {} (range {jr:.3}), conventional {} (range {cr:.3})", fmt(&jm), fmt(&cm)),
    )
}

fn overhead() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (k, d, groups, per) = (10, 32, 64, 48);
    let rows = Array2::from_shape_fn((groups * per, d), |_| normal(&mut rng));
    let ids = (0..groups * per).map(|i| (i / per) as u64).collect();
    let batch = FeatureBatch::with_groups(rows, ids).unwrap();
    let init = fve::init::initialize(&batch, k, &InitSpec::new(InitStrategy::KMeansPlusPlus, 0)).unwrap();
    let r = bench_forward(&EmaState::new(init, 0.9).unwrap(), &batch, 10, 10).unwrap();
    let sane = [r.em_update_fraction, r.encode_fraction].iter().all(|f| f.is_finite() && *f >= 0.0 && *f <= 1.0);
    outcome(
        sane,
        format!(
            "informational: {} rows in {} groups, K={k}, D={d}: total {:.2} ms, EM update {:.1}%, encode {:.1}%, head {:.1}%",
            r.rows,
            r.groups,
            r.total_s * 1e3,
            100.0 * r.em_update_fraction,
            100.0 * r.encode_fraction,
            100.0 * r.head_s / r.total_s
        ),
    )
}

fn gradient_isolation() -> Outcome {
    set_reduction(Reduction::Deterministic);
    let parts = PartsConfig {
        images_per_class: 20,
        ..PartsConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let ds = synth_parts(&parts).unwrap();
    let train = prepare_images(&ds.train, PartOrder::Shuffled, Visibility::ZeroFilled);
    let mut trainer = Trainer::new(cfg, &train, ds.num_classes).unwrap().record_features();
    let start = trainer.model.gmm_state.clone();
    trainer.fit(&train, |_| {}).unwrap();

    let mut replay = start;
    for batch in trainer.recorded().unwrap() {
        replay = fve::streaming_step(&replay, batch).unwrap();
    }
    let end = &trainer.model.gmm_state;
    let same = replay.t() == end.t()
        && replay.accumulators() == end.accumulators()
        && replay.bias_corrected().unwrap() == end.bias_corrected().unwrap();
    outcome(same && end.t() > 0, format!("{} steps replayed, bit-identical: {same}", end.t()))
}

/// Not a numbered criterion: the train-gmm example asks for the streaming
/// log-likelihood to come within 2% of full-batch EM by step 50.
fn streaming_likelihood_note() -> String {
    let data = synth_circle(&CircleConfig::default()).unwrap();
    let init = InitSpec::new(InitStrategy::KMeans, 0);
    let reference = em_full(&data.batch, 10, &init, 500, 1e-10).unwrap().trace.last();
    let fit = fit_streaming(&data.batch, 10, 0.9, 128, 50, &init, 0).unwrap();
    let best = fit.trace.iter().map(|v| (v - reference).abs() / reference.abs()).fold(f64::INFINITY, f64::min);
    let long = fit_streaming(&data.batch, 10, 0.9, 128, 400, &init, 0).unwrap();
    let tail = long.trace[200..].iter().sum::<f64>() / 200.0;
    format!(
        "note: train-gmm log-likelihood within 2% of full-batch EM by step 50: {} (closest {:.2}%; steps 200-400 average {:.2}% away)",
        if best <= 0.02 { "met" } else { "not met" },
        100.0 * best,
        100.0 * (tail - reference).abs() / reference.abs()
    )
}

fn main() -> ExitCode {
    set_reduction(Reduction::Deterministic);
    let criteria: [Criterion; 10] = [
        ("gradient oracle", gradient_oracle),
        ("unit-circle streaming convergence", circle_convergence),
        ("single-component running moments", single_component_tracker),
        ("full-batch EM monotonicity", em_monotonicity),
        ("set-function invariants", set_invariance),
        ("telescoping weight identity", telescoping),
        ("order/visibility toy analogue", order_visibility),
        ("joint vs conventional stability over K", joint_vs_conventional),
        ("overhead harness", overhead),
        ("end-to-end gradient isolation", gradient_isolation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {name}: {} ({}) [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{}", streaming_likelihood_note());
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
