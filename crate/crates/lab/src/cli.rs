//! Command-line interface. [`run`] returns the process exit status: 0 on
//! success, 1 for usage or validation errors, 2 for a numerical abort.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use olnl_core::{NoiseKind, Variant};

use crate::ablate::{self, Grid};
use crate::artifacts;
use crate::checkpoint::Checkpoint;
use crate::config::{self, Overrides};
use crate::dataset;
use crate::error::{LabError, Result};
use crate::eval;
use crate::fsio;
use crate::oracle;
use crate::report;
use crate::runner::{self, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "olnl", version, about = "Open-set noisy-label learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a noisy benchmark and write its train and test splits.
    Synth(SynthArgs),
    /// Train one configured run.
    Train(TrainArgs),
    /// Run a variant grid over shared seeds and tabulate it.
    Ablate(AblateArgs),
    /// Recompute accuracy and selection quality from a checkpoint.
    Eval(EvalArgs),
    /// Diff the library partition against an independent reference.
    OracleCheck(OracleArgs),
    /// Tabulate finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseArg {
    Sym,
    Asym,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Sym => NoiseKind::Symmetric,
            NoiseArg::Asym => NoiseKind::Asymmetric,
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: olnl_core::Error| e.to_string())
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Seeds data, noise and model together.
    #[arg(long)]
    seed: Option<u64>,
    /// Closed-set noise rate.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    /// Any configuration key, e.g. `experiment.margin.tau_p=2.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainingArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

impl ConfigArgs {
    fn overrides(&self, training: Option<&TrainingArgs>, variant: Option<Variant>) -> Overrides {
        Overrides {
            preset: self.preset.clone(),
            seed: self.seed,
            rate: self.rate,
            noise: self.noise.map(Into::into),
            variant,
            epochs: training.and_then(|t| t.epochs),
            warmup: training.and_then(|t| t.warmup),
            lr: training.and_then(|t| t.lr),
            batch_size: training.and_then(|t| t.batch_size),
            sets: self.sets.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Total classes, out-of-distribution ones included.
    #[arg(long)]
    classes: Option<usize>,
    /// Fraction of classes turned into open-set noise; 0 disables it.
    #[arg(long)]
    ood_fraction: Option<f64>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Output directory; defaults to `<output root>/data/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Run directory; defaults to `<output root>/<run name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from the checkpoint in the run directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this many completed epochs.
    #[arg(long)]
    until: Option<usize>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    training: TrainingArgs,
    /// Comma-separated variants; all by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Vec<Variant>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    seeds: Vec<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Directory for the runs and the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// A checkpoint file or a run directory holding one.
    path: PathBuf,
    /// Where to write the JSON result; defaults next to the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Samples per seed.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 8)]
    classes: usize,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Run directories, each holding a summary.json.
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Directory for report.csv and report.md; defaults to the output root.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Ablate(a) => ablate_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::OracleCheck(a) => oracle_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut o = a.config.overrides(None, None);
    let mut put = |k: &str, v: String| o.sets.insert(0, format!("{k}={v}"));
    if let Some(c) = a.classes {
        put("benchmark.total_classes", c.to_string());
    }
    if let Some(f) = a.ood_fraction {
        put("benchmark.noise.open_set", (f > 0.0).to_string());
        if f > 0.0 {
            put("benchmark.noise.open_fraction", format!("{f:?}"));
        }
    }
    if let Some(n) = a.train_per_class {
        put("benchmark.train_per_class", n.to_string());
    }
    if let Some(n) = a.test_per_class {
        put("benchmark.test_per_class", n.to_string());
    }
    if let Some(d) = a.dim {
        put("benchmark.dim", d.to_string());
    }
    let cfg = config::resolve(a.config.config.as_deref(), &o)?;
    let (train, test) = cfg.benchmark.build()?;
    let b = &cfg.benchmark;
    let dir = a.out.unwrap_or_else(|| {
        let name = cfg.run_name();
        let data_name = name.rsplit_once('-').map_or(name.as_str(), |(head, _)| head);
        let data_name = data_name.rsplit_once('-').map_or(data_name, |(head, _)| head);
        fsio::output_root().join("data").join(format!("{data_name}-s{}", b.seed))
    });
    dataset::write(&dir.join("train.csv"), &train)?;
    dataset::write(&dir.join("test.csv"), &test)?;
    fsio::write_atomic(&dir.join(artifacts::CONFIG_FILE), cfg.to_toml()?.as_bytes())?;
    let counts = train.status_counts();
    println!("wrote {} ({} train, {} test samples)", dir.display(), train.len(), test.len());
    println!("known classes {}, dim {}", train.classes, train.dim);
    println!("n_all = {}", (b.noise.overall_rate() * 1e9).round() / 1e9);
    println!(
        "realized: clean {} closed-noise {} open-noise {} (noise rate {:.4})",
        counts.clean,
        counts.closed,
        counts.open,
        train.noise_rate()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let o = a.config.overrides(Some(&a.training), a.variant);
    let cfg = config::resolve(a.config.config.as_deref(), &o)?;
    let dir = a.out.unwrap_or_else(|| fsio::output_root().join(cfg.run_name()));
    let result = runner::run(&cfg, &dir, &RunOptions { resume: a.resume, until: a.until })?;
    match &result.summary {
        Some(s) => println!(
            "{}: last-10 test accuracy {:.4}, final {:.4} ({:.1}s)",
            dir.display(),
            s.last10_mean.unwrap_or(f64::NAN),
            s.final_test_acc.unwrap_or(f64::NAN),
            s.wall_clock_seconds
        ),
        None => println!("{}: stopped after epoch {}, checkpoint saved", dir.display(), result.rows.len()),
    }
    Ok(())
}

fn ablate_cmd(a: AblateArgs) -> Result<()> {
    let o = a.config.overrides(Some(&a.training), None);
    let grid = Grid {
        variants: if a.variants.is_empty() { Variant::ALL.to_vec() } else { a.variants },
        seeds: a.seeds,
        jobs: a.jobs,
    };
    let configs = ablate::plan(a.config.config.as_deref(), &o, &grid)?;
    let root = a.out.unwrap_or_else(|| {
        let c = &configs[0];
        let kind = match c.benchmark.noise.kind {
            NoiseKind::Symmetric => "sym",
            NoiseKind::Asymmetric => "asym",
        };
        fsio::output_root().join(format!("ablate-{}-{kind}{}", c.preset, c.benchmark.noise.closed_rate))
    });
    let dirs = ablate::run_all(&configs, &root, grid.jobs)?;
    let rows = report::emit_report(&dirs, &root)?;
    print!("{}", report::to_markdown(&rows));
    println!("wrote {}", root.join("report.md").display());
    Ok(())
}

fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(artifacts::CHECKPOINT_FILE)
    } else {
        p.to_path_buf()
    }
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let path = checkpoint_path(&a.path);
    let ckpt = Checkpoint::load(&path)?;
    let r = eval::evaluate(&ckpt)?;
    let out = a.out.unwrap_or_else(|| path.with_file_name(eval::EVAL_FILE));
    r.save(&out)?;
    let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!("epoch {} variant {}", r.epoch, r.variant);
    println!("train accuracy {:.4}, test accuracy {:.4}", r.train_acc, r.test_acc);
    println!(
        "sets clean {} id-high {} id-rest {} ood {}",
        r.counts[0], r.counts[1], r.counts[2], r.counts[3]
    );
    println!(
        "clean precision {} recall {}; ood precision {} recall {}",
        pct(r.quality.clean.precision),
        pct(r.quality.clean.recall),
        pct(r.quality.ood.precision),
        pct(r.quality.ood.recall)
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn oracle_cmd(a: OracleArgs) -> Result<()> {
    if a.classes < 2 || a.n == 0 || a.seeds.is_empty() {
        return Err(LabError::Invalid("oracle-check needs --n >= 1, --classes >= 2 and a seed".into()));
    }
    let r = oracle::check(a.n, &a.seeds, a.classes)?;
    println!(
        "compared {} samples x {} seeds x {} configurations; sets clean {} id-high {} id-rest {} ood {}",
        r.samples,
        a.seeds.len(),
        r.configs,
        r.coverage[0],
        r.coverage[1],
        r.coverage[2],
        r.coverage[3]
    );
    for e in &r.examples {
        println!("  {e}");
    }
    println!("{} mismatches", r.mismatches);
    if r.mismatches > 0 {
        return Err(LabError::Invalid(format!("{} partition mismatches", r.mismatches)));
    }
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let out = a.out.unwrap_or_else(fsio::output_root);
    let rows = report::emit_report(&a.runs, &out)?;
    print!("{}", report::to_markdown(&rows));
    println!("wrote {}", out.join("report.md").display());
    Ok(())
}
