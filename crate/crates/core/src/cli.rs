//! The `fve` command line.
//!
//! Every subcommand runs with deterministic reductions, so repeated
//! invocations with the same flags write identical bytes. Failures print a
//! single `error kind=<class> message=<text>` line on stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::bench_forward;
use crate::error::{FveError, Result};
use crate::exec::{set_reduction, Reduction};
use crate::fve::{encode_groups, gradcheck, normalize_fv, GradcheckConfig};
use crate::gmm::em_full;
use crate::init::{InitSpec, InitStrategy};
use crate::io::csv::{write_circle_labels, write_fisher_vectors, write_group_labels, write_trace};
use crate::io::synth::parts_to_batch;
use crate::io::{
    read_features_path, read_gmm_path, synth_circle, write_features_path, write_gmm_path, CircleConfig, DemoConfig,
    Difficulty, GmmSnapshot,
};
use crate::parts::filter_by_norm;
use crate::streaming::{fit_streaming, DEFAULT_LAMBDA};
use crate::train::{run_arm, synth_parts, Arm, StepMetrics};

/// Gradient-check failure threshold on the max relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "fve", version, about = "Fisher vector encoding with streaming EM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic feature file and its labels sidecar.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Streaming mini-batch EM.
    TrainGmm(TrainGmmArgs),
    /// Reference full-batch EM.
    EmFull(EmFullArgs),
    /// One Fisher vector per group, as CSV.
    Encode(EncodeArgs),
    /// Analytic backward pass against central differences.
    Gradcheck(GradcheckArgs),
    /// Joint training on the synthetic part task and its baselines.
    DemoJoint(DemoArgs),
    /// Share of forward time spent in the EM update and the encoding.
    Bench(BenchArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    Circle(CircleArgs),
    Parts(PartsArgs),
}

#[derive(Debug, Args)]
pub struct CircleArgs {
    #[arg(long, default_value_t = 10)]
    pub num_components: usize,
    #[arg(long, default_value_t = 400)]
    pub samples_per_class: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value = "simple")]
    pub difficulty: Difficulty,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>.labels.csv`.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PartsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataOverrides,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct DataOverrides {
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub images_per_class: Option<usize>,
    #[arg(long)]
    pub parts_max: Option<usize>,
    #[arg(long)]
    pub cells_per_part: Option<usize>,
    #[arg(long)]
    pub d_in: Option<usize>,
    #[arg(long)]
    pub visibility_rate: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub signal: Option<f64>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub decay_epochs: Option<Vec<usize>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub filter_norm: Option<bool>,
    #[arg(long)]
    pub fusion: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub arms: Option<Vec<String>>,
}

macro_rules! override_fields {
    ($src:expr, $dst:expr, $($f:ident),*) => {
        $(if let Some(v) = $src.$f.clone() { $dst.$f = v; })*
    };
}

impl DataOverrides {
    fn apply(&self, cfg: &mut DemoConfig) {
        override_fields!(self, cfg, num_classes, images_per_class, parts_max, cells_per_part, d_in, visibility_rate, noise, signal, offset, seed);
    }
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut DemoConfig) -> Result<()> {
        override_fields!(self, cfg, epochs, batch_size, base_lr, lr_decay, decay_epochs, lambda, k, feature_dim, filter_norm, fusion);
        if let Some(names) = &self.arms {
            cfg.arms = names.iter().map(|n| parse_arm(n)).collect::<Result<_>>()?;
        }
        Ok(())
    }
}

fn parse_arm(name: &str) -> Result<Arm> {
    Arm::ALL
        .into_iter()
        .find(|a| a.name() == name)
        .ok_or_else(|| FveError::InvalidParameter(format!("unknown arm {name:?}")))
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// `kmeans`, `kmeans-plus-plus` or `random-subset`.
    #[arg(long, default_value = "kmeans-plus-plus")]
    pub init: InitStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainGmmArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step log-likelihood CSV; stdout when omitted.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmFullArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub gmm: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub filter_norm: bool,
    /// Comma-separated subset of `power,l2`.
    #[arg(long, value_delimiter = ',')]
    pub normalize: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Flat TOML file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataOverrides,
    #[command(flatten)]
    pub train: TrainOverrides,
    /// JSON-lines destination; stdout when omitted.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub gmm: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sidecar(out: &Path, labels: Option<&PathBuf>) -> PathBuf {
    labels.cloned().unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".labels.csv");
        PathBuf::from(s)
    })
}

fn load_demo_config(path: Option<&Path>) -> Result<DemoConfig> {
    path.map_or_else(|| Ok(DemoConfig::default()), DemoConfig::load)
}

#[derive(Serialize)]
struct StepLine<'a> {
    event: &'static str,
    arm: &'a str,
    #[serde(flatten)]
    metrics: &'a StepMetrics,
}

#[derive(Serialize)]
struct FinalLine<'a> {
    event: &'static str,
    arm: &'a str,
    seed: u64,
    test_accuracy: f64,
}

fn json_line<W: Write + ?Sized, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    set_reduction(Reduction::Deterministic);
    match cli.command {
        Command::Synth(SynthCommand::Circle(a)) => {
            let cfg = CircleConfig {
                num_components: a.num_components,
                samples_per_class: a.samples_per_class,
                sigma: a.sigma,
                difficulty: a.difficulty,
                seed: a.seed,
            };
            let data = synth_circle(&cfg)?;
            write_features_path(&a.out, &data.batch)?;
            let mut w = output(Some(&sidecar(&a.out, a.labels.as_ref())))?;
            write_circle_labels(&mut w, &data.labels)?;
            w.flush()?;
        }
        Command::Synth(SynthCommand::Parts(a)) => {
            let mut cfg = load_demo_config(a.config.as_deref())?;
            a.data.apply(&mut cfg);
            let ds = synth_parts(&cfg.parts())?;
            let (batch, labels) = parts_to_batch(&ds)?;
            write_features_path(&a.out, &batch)?;
            let mut w = output(Some(&sidecar(&a.out, a.labels.as_ref())))?;
            write_group_labels(&mut w, &labels)?;
            w.flush()?;
        }
        Command::TrainGmm(a) => {
            let data = read_features_path(&a.input)?;
            let init = InitSpec::new(a.init.init, a.init.seed);
            let fit = fit_streaming(&data, a.k, a.lambda, a.batch_size, a.steps, &init, a.init.seed)?;
            write_gmm_path(&a.out, &GmmSnapshot::from_state(&fit.state)?)?;
            let mut w = output(a.trace.as_deref())?;
            write_trace(&mut w, &fit.trace)?;
            w.flush()?;
        }
        Command::EmFull(a) => {
            let data = read_features_path(&a.input)?;
            let init = InitSpec::new(a.init.init, a.init.seed);
            let fit = em_full(&data, a.k, &init, a.max_iters, a.tol)?;
            write_gmm_path(&a.out, &GmmSnapshot::from_gmm(fit.gmm))?;
            let mut w = output(a.trace.as_deref())?;
            write_trace(&mut w, &fit.trace.log_likelihood)?;
            w.flush()?;
        }
        Command::Encode(a) => {
            let (mut power, mut l2) = (false, false);
            for n in &a.normalize {
                match n.as_str() {
                    "power" => power = true,
                    "l2" => l2 = true,
                    "" | "none" => {}
                    other => return Err(FveError::InvalidParameter(format!("unknown normalization {other:?}"))),
                }
            }
            let gmm = read_gmm_path(&a.gmm)?.gmm;
            let mut data = read_features_path(&a.input)?;
            if a.filter_norm {
                data = filter_by_norm(&data).0;
            }
            let fvs: Vec<_> = encode_groups(&gmm, &data)?
                .into_iter()
                .map(|(_, fv)| if power || l2 { normalize_fv(&fv, power, l2) } else { fv })
                .collect();
            let mut w = output(a.out.as_deref())?;
            write_fisher_vectors(&mut w, gmm.k(), gmm.dim(), &fvs)?;
            w.flush()?;
        }
        Command::Gradcheck(a) => {
            let report = gradcheck(&GradcheckConfig {
                k: a.k,
                d: a.d,
                n: a.n,
                trials: a.trials,
                eps: a.eps,
                seed: a.seed,
            })?;
            println!("trials={} max_relative_error={:e}", report.trials, report.max_relative_error);
            if !(report.max_relative_error <= GRADCHECK_TOLERANCE) {
                eprintln!(
                    "error kind=gradcheck_failed message=max relative error {:e} exceeds {:e}",
                    report.max_relative_error, GRADCHECK_TOLERANCE
                );
                return Ok(1);
            }
        }
        Command::DemoJoint(a) => {
            let mut cfg = load_demo_config(a.config.as_deref())?;
            a.data.apply(&mut cfg);
            a.train.apply(&mut cfg)?;
            let ds = synth_parts(&cfg.parts())?;
            let train = cfg.train();
            let mut w = output(a.metrics.as_deref())?;
            let mut outcomes = Vec::new();
            for &arm in &cfg.arms {
                let mut failed = None;
                let outcome = run_arm(&ds, arm, &train, |m| {
                    if failed.is_none() {
                        let line = StepLine { event: "step", arm: arm.name(), metrics: m };
                        failed = json_line(&mut w, &line).err();
                    }
                })?;
                if let Some(e) = failed {
                    return Err(e);
                }
                outcomes.push(outcome);
            }
            for o in &outcomes {
                let line = FinalLine {
                    event: "final",
                    arm: o.arm.name(),
                    seed: o.seed,
                    test_accuracy: o.test_accuracy,
                };
                json_line(&mut w, &line)?;
            }
            w.flush()?;
        }
        Command::Bench(a) => {
            let state = read_gmm_path(&a.gmm)?.to_state(DEFAULT_LAMBDA)?;
            let data = read_features_path(&a.input)?;
            let report = bench_forward(&state, &data, a.classes, a.iterations)?;
            let mut w = output(None)?;
            json_line(&mut w, &report)?;
            w.flush()?;
        }
    }
    Ok(0)
}

/// Parses `std::env::args`, runs, and reports failures on one stderr line.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage message={first}");
            return 2;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error kind={} message={}", e.kind(), e.to_string().replace('\n', " "));
            1
        }
    }
}
