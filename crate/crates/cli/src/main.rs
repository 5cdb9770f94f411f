use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use sas_autofocus::gd::{crossval_lr, default_lr_grid, focus_gd, FocusResult, GdConfig, WeightFn};
use sas_autofocus::iqa::{evaluate, DespeckleConfig, Method};
use sas_autofocus::learned::{infer, load_checkpoint, save_checkpoint, train, TrainConfig};
use sas_autofocus::slc::io::{read_slc, write_png, write_slc};
use sas_autofocus::slc::{drc, NUM_COEFFS, MIN_DEGREE};
use sas_autofocus::synth::{
    build_dataset, corrupt, sample_corruption, DatasetConfig, DatasetManifest, Split,
};
use sas_autofocus::{MetricKind, PhasePolynomial, SlcImage};

#[derive(Parser, Debug)]
#[command(name = "sasaf", version, about = "Autofocus for synthetic aperture sonar imagery")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Image side length for synthesized data.
    #[arg(long, global = true, default_value_t = 256)]
    size: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for per-image parallelism. Defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truth / corrupted dataset and its manifest.
    Synth {
        #[arg(long, default_value_t = 120)]
        train: usize,
        #[arg(long, default_value_t = 120)]
        val: usize,
        #[arg(long, default_value_t = 264)]
        test: usize,
    },
    /// Apply a phase error to an SLC file.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        /// Comma separated c2..c10 in radians. Drawn at random from the seed when omitted.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        coeffs: Option<Vec<f64>>,
    },
    /// Refocus an SLC file by gradient descent on a sharpness metric.
    FocusGd {
        #[command(flatten)]
        io: FocusIo,
        #[arg(long, default_value = "mns")]
        metric: MetricKind,
        /// Step size. Selected from the standard grid on the input when omitted.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[command(flatten)]
        weight: WeightArgs,
    },
    /// Refocus an SLC file with a trained regressor in one pass.
    FocusDeep {
        #[command(flatten)]
        io: FocusIo,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train the regressor on the train/val splits of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
    },
    /// Score correction methods on the test split.
    Eval {
        #[command(flatten)]
        methods: MethodArgs,
        /// TV regularization weight of the despeckler.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Time correction methods on the test split.
    Bench {
        #[command(flatten)]
        methods: MethodArgs,
    },
}

#[derive(Args, Debug)]
struct FocusIo {
    #[arg(long)]
    input: PathBuf,
    /// Corrected SLC path. Defaults to focused.slc in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the dynamic-range-compressed magnitude as PNG.
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WeightArgs {
    #[arg(long, value_enum, default_value_t = WeightKind::Identity)]
    weight: WeightKind,
    /// Window side for the low-contrast mask.
    #[arg(long, default_value_t = 5)]
    window: usize,
    /// Local deviation quantile below which pixels are masked.
    #[arg(long, default_value_t = 0.25)]
    quantile: f64,
}

#[derive(Args, Debug)]
struct MethodArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1..,
          default_values_t = [MethodName::Identity, MethodName::GdMns])]
    methods: Vec<MethodName>,
    /// Checkpoint for the learned method.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Step size shared by the gradient-descent methods. Cross-validated per
    /// metric on the validation split when omitted.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 10)]
    iters: usize,
    /// Validation images used for step-size selection.
    #[arg(long, default_value_t = 8)]
    cv_images: usize,
    #[command(flatten)]
    weight: WeightArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum WeightKind {
    Identity,
    Lowcontrast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodName {
    Identity,
    Oracle,
    #[value(name = "gd_mns")]
    GdMns,
    #[value(name = "gd_me")]
    GdMe,
    #[value(name = "gd_osf")]
    GdOsf,
    #[value(name = "gd_ssi")]
    GdSsi,
    Learned,
}

impl MethodName {
    fn metric(self) -> Option<MetricKind> {
        match self {
            MethodName::GdMns => Some(MetricKind::Mns),
            MethodName::GdMe => Some(MetricKind::Me),
            MethodName::GdOsf => Some(MetricKind::osf()),
            MethodName::GdSsi => Some(MetricKind::Ssi),
            _ => None,
        }
    }
}

impl WeightArgs {
    fn build(&self) -> Result<WeightFn> {
        Ok(match self.weight {
            WeightKind::Identity => WeightFn::Identity,
            WeightKind::Lowcontrast => WeightFn::low_contrast(self.window, self.quantile)?,
        })
    }
}

fn usage_error(kind: ErrorKind, msg: &str) -> ! {
    Cli::command().error(kind, msg).exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Checked up front so a bad combination never starts any work.
    if let Command::Eval { methods, .. } | Command::Bench { methods } = &cli.command {
        if methods.methods.contains(&MethodName::Learned) && methods.model.is_none() {
            usage_error(ErrorKind::MissingRequiredArgument, "method `learned` requires --model");
        }
    }
    if cli.threads == Some(0) {
        usage_error(ErrorKind::InvalidValue, "--threads must be at least 1");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Synth { train, val, test } => cmd_synth(&cli, *train, *val, *test),
        Command::Corrupt { input, coeffs } => cmd_corrupt(&cli, input, coeffs.as_deref()),
        Command::FocusGd { io, metric, lr, iters, weight } => {
            let g_e = read_input(&io.input)?;
            let weight = weight.build()?;
            let lr = match lr {
                Some(lr) => *lr,
                None => crossval_lr(std::slice::from_ref(&g_e), *metric, &default_lr_grid(), *iters, weight.clone())?,
            };
            let cfg = GdConfig { metric: *metric, learning_rate: lr, iterations: *iters, weight };
            let result = focus_gd(&g_e, &cfg)?;
            emit_focus(&cli, io, &result)
        }
        Command::FocusDeep { io, model } => {
            let params = load_checkpoint(model).with_context(|| format!("loading model {}", model.display()))?;
            let g_e = read_input(&io.input)?;
            let result = infer(&g_e, &params)?;
            emit_focus(&cli, io, &result)
        }
        Command::Train { manifest, epochs, batch, lr } => cmd_train(&cli, manifest, *epochs, *batch, *lr),
        Command::Eval { methods, lambda } => cmd_eval(&cli, methods, *lambda),
        Command::Bench { methods } => cmd_bench(methods),
    }
}

fn cmd_synth(cli: &Cli, train: usize, val: usize, test: usize) -> Result<()> {
    let cfg = DatasetConfig { train, val, test, base_seed: cli.seed, size: cli.size };
    let manifest = build_dataset(&cfg, &cli.out)?;
    println!("wrote {} records to {}", manifest.records.len(), cli.out.display());
    Ok(())
}

fn cmd_corrupt(cli: &Cli, input: &Path, coeffs: Option<&[f64]>) -> Result<()> {
    let g = read_input(input)?;
    let p = match coeffs {
        Some(c) => PhasePolynomial::from_slice(c)?,
        None => sample_corruption(g.size(), cli.seed).realized,
    };
    let g_e = corrupt(&g, &p)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    write_slc(&g_e, cli.out.join("corrupted.slc"))?;
    println!("{}", coeff_header());
    println!("{}", join(p.coeffs()));
    Ok(())
}

fn cmd_train(cli: &Cli, manifest: &Path, epochs: usize, batch: usize, lr: f64) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    let cfg = TrainConfig {
        batch_size: batch,
        learning_rate: lr,
        epochs,
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let (params, history) = train(&manifest, &cfg)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    save_checkpoint(&params, cli.out.join("model.daf1"))?;
    let history_path = cli.out.join("history.csv");
    fs::write(&history_path, history.to_csv_string())
        .with_context(|| format!("writing {}", history_path.display()))?;
    println!(
        "selected epoch {} with validation loss {}",
        history.selected_epoch,
        history.best_val_loss()
    );
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &MethodArgs, lambda: f64) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let methods = build_methods(&manifest, args)?;
    let despeckle = DespeckleConfig { lambda, ..DespeckleConfig::default() };
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let csv_path = cli.out.join("eval.csv");
    let summary = evaluate(&manifest, &methods, Some(&csv_path), &despeckle)?;
    for m in &summary.methods {
        println!("{m}");
    }
    let failures = summary.records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        bail!("{failures} method/image pairs failed; see {}", csv_path.display());
    }
    Ok(())
}

fn cmd_bench(args: &MethodArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let methods = build_methods(&manifest, args)?;
    let test: Vec<_> = manifest.split(Split::Test).collect();
    if test.len() < 2 {
        bail!("bench needs at least two test images (the first is a warm-up)");
    }
    let images = test
        .iter()
        .map(|r| manifest.load_corrupted(r))
        .collect::<sas_autofocus::Result<Vec<_>>>()?;

    let mut out = String::from("method,iterations,mean_runtime_s\n");
    for method in &methods {
        let iterations = match method {
            Method::Gd(cfg) => cfg.iterations,
            Method::Learned(_) => 1,
            Method::Identity | Method::Oracle => 0,
        };
        method.run(&images[0], test[0])?;
        let mut total = 0.0;
        for (g_e, record) in images.iter().zip(&test).skip(1) {
            let t = Instant::now();
            method.run(g_e, record)?;
            total += t.elapsed().as_secs_f64();
        }
        let mean = total / (images.len() - 1) as f64;
        let _ = writeln!(out, "{},{},{}", method.name(), iterations, mean);
    }
    print!("{out}");
    Ok(())
}

fn build_methods(manifest: &DatasetManifest, args: &MethodArgs) -> Result<Vec<Method>> {
    let weight = args.weight.build()?;
    let mut cv_images: Option<Vec<SlcImage>> = None;
    let mut methods = Vec::with_capacity(args.methods.len());
    for &name in &args.methods {
        let method = match name {
            MethodName::Identity => Method::Identity,
            MethodName::Oracle => Method::Oracle,
            MethodName::Learned => {
                let path = args.model.as_ref().expect("checked before dispatch");
                let params = load_checkpoint(path)
                    .with_context(|| format!("loading model {}", path.display()))?;
                Method::Learned(Arc::new(params))
            }
            gd => {
                let metric = gd.metric().expect("gradient-descent method");
                let lr = match args.lr {
                    Some(lr) => lr,
                    None => {
                        if cv_images.is_none() {
                            cv_images = Some(validation_images(manifest, args.cv_images)?);
                        }
                        let images = cv_images.as_deref().unwrap_or_default();
                        let lr = crossval_lr(images, metric, &default_lr_grid(), args.iters, weight.clone())?;
                        eprintln!("{}: selected lr {lr}", metric.name());
                        lr
                    }
                };
                Method::Gd(GdConfig { metric, learning_rate: lr, iterations: args.iters, weight: weight.clone() })
            }
        };
        methods.push(method);
    }
    Ok(methods)
}

fn validation_images(manifest: &DatasetManifest, n: usize) -> Result<Vec<SlcImage>> {
    let images = manifest
        .split(Split::Val)
        .take(n)
        .map(|r| manifest.load_corrupted(r))
        .collect::<sas_autofocus::Result<Vec<_>>>()?;
    if images.is_empty() {
        bail!("no validation images for step-size selection; pass --lr");
    }
    Ok(images)
}

fn emit_focus(cli: &Cli, io: &FocusIo, result: &FocusResult) -> Result<()> {
    let output = io.output.clone().unwrap_or_else(|| cli.out.join("focused.slc"));
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_slc(&result.g_hat, &output)?;
    if let Some(png) = &io.png {
        write_png(&drc(&result.g_hat)?, png)?;
    }
    let mut out = format!("iteration,objective,{}\n", coeff_header());
    for (i, (obj, p)) in result.trace.iter().zip(&result.coeff_trace).enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, obj, join(p.coeffs()));
    }
    print!("{out}");
    Ok(())
}

fn read_input(path: &Path) -> Result<SlcImage> {
    read_slc(path).with_context(|| format!("reading {}", path.display()))
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn coeff_header() -> String {
    (0..NUM_COEFFS).map(|i| format!("c{}", i + MIN_DEGREE)).collect::<Vec<_>>().join(",")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
