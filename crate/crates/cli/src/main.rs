use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use wsgan_core::data::{load_dataset, save_dataset};
use wsgan_core::harness::{
    nearest_prototype_labels, random_lf_specs, resolve_output, run_augmentation, run_benchmark,
    run_theory_suite, synth_dataset, DatasetSpec, ExperimentConfig, LfSpecRanges, RunManifest,
};
use wsgan_core::metrics::{accuracy, pseudolabel_accuracy};
use wsgan_core::theory::TheoryGrid;
use wsgan_core::weaksup::io::{load_label_matrix, save_label_matrix};
use wsgan_core::weaksup::{
    dawid_skene_fit, generate_synthetic_lfs, lf_stats, majority_vote, DawidSkeneOptions, LfSpec,
    PosteriorTable,
};
use wsgan_core::wsgan::{
    fit, initialize, load_checkpoint, predict_pseudolabels, save_checkpoint, save_history_csv,
    AugmentMode, Mode, TrainingConfig, TrainingHistory,
};
use wsgan_core::Error;

const EXIT_INVARIANT: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wsgan",
    version,
    about = "Weak supervision label models and WSGAN experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian-mixture dataset and write it as CSV.
    SynthData(SynthDataArgs),
    /// Draw synthetic labeling functions for a dataset and write the vote matrix.
    SynthLfs(SynthLfsArgs),
    /// Aggregate a vote matrix with majority vote or Dawid-Skene.
    FitLabelmodel(FitArgs),
    /// Train one model and write a checkpoint and per-epoch history.
    Train(TrainArgs),
    /// Run every model over every seed of an experiment config.
    Benchmark(BenchmarkArgs),
    /// Measure end-classifier accuracy with and without synthetic points.
    Augment(AugmentArgs),
    /// Check the majority-vote and noisy-channel bounds over a grid.
    Theory(TheoryArgs),
    /// Print the tables of a finished run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthDataArgs {
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(short, long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.6)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "data.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthLfsArgs {
    /// Dataset CSV; its labels drive the votes.
    #[arg(long)]
    data: PathBuf,
    /// JSON list of LF specs; replaces the random draw.
    #[arg(long)]
    specs: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    count: usize,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.55, 0.9])]
    accuracy: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.1, 0.3])]
    propensity: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    seed: u64,
    #[arg(short, long, default_value = "votes.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelModel {
    Mv,
    DawidSkene,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    votes: PathBuf,
    #[arg(long, value_enum, default_value = "mv")]
    model: LabelModel,
    /// Dataset CSV used only to score the posteriors.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(short, long, default_value = "posteriors.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    votes: PathBuf,
    /// encoder, vector or infogan.
    #[arg(long, default_value = "encoder")]
    mode: Mode,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Alignment weight.
    #[arg(long)]
    beta: Option<f64>,
    /// Mutual-information weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// JSON training config; flags above override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from a checkpoint for `--epochs` more epochs.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(short, long, default_value = "runs/train")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl ExperimentArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(e) = self.epochs {
            cfg.training.epochs = e;
        }
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Print the default config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentChoice {
    SyntheticPl,
    LfPl,
    Both,
}

#[derive(Args)]
struct AugmentArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long)]
    n_synth: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    mode: AugmentChoice,
}

#[derive(Args)]
struct TheoryArgs {
    /// Grid file (JSON); list flags below override its fields.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lf_errors: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    joints: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start from an empty grid instead of the default one.
    #[arg(long)]
    empty: bool,
    #[arg(short, long, default_value = "runs/theory")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory written by `benchmark`, `augment` or `theory`.
    dir: PathBuf,
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

fn synth_data(a: SynthDataArgs) -> anyhow::Result<ExitCode> {
    let spec = DatasetSpec {
        classes: a.classes,
        dim: a.dim,
        n: a.n,
        radius: a.radius,
        sigma: a.sigma,
        seed: a.seed,
    };
    let d = synth_dataset(&spec)?;
    let out = resolve_output(&a.out);
    ensure_parent(&out)?;
    save_dataset(&d, &out)?;
    let proxy = accuracy(
        &nearest_prototype_labels(&spec.prototypes(), &d.features),
        &d.labels,
    )?;
    println!(
        "wrote {} samples to {} (nearest-prototype accuracy {proxy:.4})",
        d.n(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn synth_lfs(a: SynthLfsArgs) -> anyhow::Result<ExitCode> {
    let d = load_dataset(&a.data, None)?;
    let specs: Vec<LfSpec> = match &a.specs {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => {
            let ranges = LfSpecRanges {
                count: a.count,
                accuracy: (a.accuracy[0], a.accuracy[1]),
                propensity: (a.propensity[0], a.propensity[1]),
            };
            random_lf_specs(d.classes, &ranges, a.seed)?
        }
    };
    let l = generate_synthetic_lfs(&d.labels, d.classes, &specs)?;
    let out = resolve_output(&a.out);
    ensure_parent(&out)?;
    save_label_matrix(&l, Some(&specs), &out)?;
    let stats = lf_stats(&l, &d.labels)?;
    println!("lf  class  target_acc  acc     target_prop  coverage");
    for (j, (s, st)) in specs.iter().zip(&stats.per_lf).enumerate() {
        println!(
            "{j:<3} {:<6} {:<11.3} {:<7} {:<12.3} {:.3}",
            s.target_class,
            s.target_accuracy,
            st.accuracy.map_or("-".into(), |v| format!("{v:.3}")),
            s.target_propensity,
            st.coverage
        );
    }
    println!("wrote {}x{} votes to {}", l.n(), l.m(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_posteriors(t: &PosteriorTable, path: &Path) -> anyhow::Result<()> {
    let mut s = String::new();
    let header: Vec<String> = (0..t.classes()).map(|k| format!("p_{k}")).collect();
    writeln!(s, "{},covered", header.join(","))?;
    for i in 0..t.n() {
        let row: Vec<String> = t.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(s, "{},{}", row.join(","), t.covered()[i] as u8)?;
    }
    ensure_parent(path)?;
    fs::write(path, s)?;
    Ok(())
}

fn fit_labelmodel(a: FitArgs) -> anyhow::Result<ExitCode> {
    let (l, meta) = load_label_matrix(&a.votes)?;
    let table = match a.model {
        LabelModel::Mv => majority_vote(&l),
        LabelModel::DawidSkene => {
            let opts = DawidSkeneOptions {
                max_iters: a.max_iters,
                tol: a.tol,
                ..Default::default()
            };
            let fit = dawid_skene_fit(&l, &opts)?;
            println!(
                "dawid-skene: {} iterations, converged {}, log-likelihood {:.4}",
                fit.iterations,
                fit.converged,
                fit.log_likelihood.last().copied().unwrap_or(f64::NAN)
            );
            fit.posteriors
        }
    };
    if let Some(p) = &a.data {
        let d = load_dataset(p, Some(meta.classes))?;
        match pseudolabel_accuracy(&table, &d.labels)? {
            Some(acc) => println!("covered-set accuracy {acc:.4}"),
            None => println!("no covered rows"),
        }
    }
    let out = resolve_output(&a.out);
    write_posteriors(&table, &out)?;
    println!("wrote {} posteriors to {}", table.n(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(a: TrainArgs) -> anyhow::Result<ExitCode> {
    let (l, meta) = load_label_matrix(&a.votes)?;
    let d = load_dataset(&a.data, Some(meta.classes))?;
    let out = resolve_output(&a.out);
    fs::create_dir_all(&out)?;
    let mut history = TrainingHistory::default();
    let mut bundle = match &a.resume {
        Some(p) => {
            let b = load_checkpoint(p)?;
            info!("resuming from epoch {}", b.epochs_done);
            b
        }
        None => {
            let mut cfg = match &a.config {
                Some(p) => serde_json::from_str::<TrainingConfig>(&fs::read_to_string(p)?)?,
                None => TrainingConfig::default(),
            };
            cfg.mode = a.mode;
            cfg.seed = a.seed;
            cfg.epochs = a.epochs;
            if let Some(b) = a.beta {
                cfg.align_weight = b;
            }
            if let Some(x) = a.alpha {
                cfg.info_weight = x;
            }
            initialize(&d, &l, &cfg)?
        }
    };
    fit(&mut bundle, &d, &l, a.epochs, &mut history, None)?;
    let ck = out.join("checkpoint.json");
    save_checkpoint(&bundle, &ck)?;
    save_history_csv(&history, &out.join("history.csv"))?;
    let pl = predict_pseudolabels(&bundle, &d.features, &l)?;
    let crisp = pl.table.crisp();
    let acc = accuracy(&crisp, &d.labels)?;
    if let Some(r) = history.records.last() {
        println!(
            "epoch {}: d {:.4} g {:.4} info {:.4} align {:.4} ari {:.4}",
            r.epoch, r.d_loss, r.g_loss, r.info_loss, r.align_loss, r.ari
        );
    }
    println!(
        "pseudolabel accuracy on all rows {acc:.4}; checkpoint {}",
        ck.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn print_csv(path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<Vec<String>> = text
        .lines()
        .map(|l| {
            l.split(',')
                .map(|c| match c.parse::<f64>() {
                    Ok(v) if c.contains('.') || c.contains('e') => format!("{v:.4}"),
                    _ => c.to_string(),
                })
                .collect()
        })
        .collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|j| {
            rows.iter()
                .filter_map(|r| r.get(j))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    println!("== {}", path.display());
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, c)| format!("{c:<w$}", w = widths[j]))
            .collect();
        println!("{}", cells.join("  ").trim_end());
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> anyhow::Result<ExitCode> {
    if a.print_config {
        println!(
            "{}",
            serde_json::to_string_pretty(&ExperimentConfig::default())?
        );
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = a.experiment.load()?;
    let outcome = run_benchmark(&cfg)?;
    print_csv(&outcome.output_dir.join("summary.csv"))?;
    if !outcome.manifest.failures.is_empty() {
        for f in &outcome.manifest.failures {
            warn!("seed {} {}: {}", f.seed, f.task, f.error);
        }
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn augment(a: AugmentArgs) -> anyhow::Result<ExitCode> {
    let cfg = a.experiment.load()?;
    let modes = match a.mode {
        AugmentChoice::SyntheticPl => vec![AugmentMode::SyntheticPl],
        AugmentChoice::LfPl => vec![AugmentMode::LfPl],
        AugmentChoice::Both => vec![AugmentMode::SyntheticPl, AugmentMode::LfPl],
    };
    let n_synth = a.n_synth.unwrap_or(cfg.augmentation.n_synth);
    let outcome = run_augmentation(&cfg, n_synth, &modes)?;
    print_csv(&cfg.resolved_output_dir().join("augmentation.csv"))?;
    for m in &modes {
        if let Some(d) = outcome.mean_delta(*m) {
            println!("{} mean delta {:+.2} points", m.as_str(), 100.0 * d);
        }
    }
    if !outcome.manifest.failures.is_empty() {
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(a: TheoryArgs) -> anyhow::Result<ExitCode> {
    let mut grid = match (&a.grid, a.empty) {
        (Some(p), _) => serde_json::from_str::<TheoryGrid>(&fs::read_to_string(p)?)?,
        (None, true) => TheoryGrid::empty(),
        (None, false) => TheoryGrid::default(),
    };
    if let Some(v) = a.m {
        grid.m_values = v;
    }
    if let Some(v) = a.alpha {
        grid.alpha_values = v;
    }
    if let Some(v) = a.lf_errors {
        grid.lf_errors = v;
    }
    if let Some(v) = a.eps {
        grid.channel_eps = v;
    }
    if let Some(v) = a.trials {
        grid.mc_trials = v;
    }
    if let Some(v) = a.joints {
        grid.joints = v;
    }
    if let Some(v) = a.pairs {
        grid.hellinger_pairs = v;
    }
    if let Some(v) = a.seed {
        grid.seed = v;
    }
    let out = resolve_output(&a.out);
    let (report, files) = run_theory_suite(&grid, &out)?;
    print!("{}", report.to_text());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let dir = resolve_output(&a.dir);
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut shown = 0;
    for name in ["summary.csv", "per_seed.csv", "augmentation.csv"] {
        let p = dir.join(name);
        if p.exists() {
            print_csv(&p)?;
            shown += 1;
        }
    }
    let theory = dir.join("theory.txt");
    if theory.exists() {
        println!("== {}", theory.display());
        print!("{}", fs::read_to_string(&theory)?);
        shown += 1;
    }
    for name in ["manifest.json", "augmentation_manifest.json"] {
        let p = dir.join(name);
        if p.exists() {
            let m: RunManifest = serde_json::from_str(&fs::read_to_string(&p)?)?;
            m.verify_files()?;
            println!(
                "{name}: config {} tool {}, {} files present, {} failures",
                &m.config_hash[..12.min(m.config_hash.len())],
                m.tool_version,
                m.all_files().count(),
                m.failures.len()
            );
        }
    }
    if shown == 0 {
        bail!("no report files in {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SynthData(a) => synth_data(a),
        Command::SynthLfs(a) => synth_lfs(a),
        Command::FitLabelmodel(a) => fit_labelmodel(a),
        Command::Train(a) => train_cmd(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Augment(a) => augment(a),
        Command::Theory(a) => theory(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::InvariantViolation(_)) => ExitCode::from(EXIT_INVARIANT),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
