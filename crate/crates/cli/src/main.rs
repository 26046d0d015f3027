//! `avblend`: generate, split, analyze, augment and evaluate AV-labelled
//! expression-coefficient corpora.
//!
//! Every subcommand writes its outputs plus a `run.json` into `--out`.
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or validation error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avblend::avspace::{
    av_histogram, describe_all, kbin_cluster, kmeans_cluster, occupancy_report, ClusterMethod,
};
use avblend::blending::{augment, AugmentConfig, AugmentReport};
use avblend::dataset::{
    load_dataset, save_dataset, split_by_subject, Alignment, BlendMethod, Partition,
};
use avblend::metrics::{eval_predictions, Windowing};
use avblend::selection::{SelectionConfig, TargetStrategy};
use avblend::synthgen::{generate_corpus, GenConfig, Quadrant};
use avblend::Error;
use clap::{error::ErrorKind, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "avblend",
    version,
    about = "Rebalance AV-labelled corpora by blending expression coefficients"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output directory (required).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Generate a synthetic corpus and its linear oracle.
    Gen(GenArgs),
    /// Assign videos to train/val/test by subject.
    Split(SplitArgs),
    /// Report cluster occupancy and the per-frame AV histogram.
    Analyze(AnalyzeArgs),
    /// Add blended synthetic videos to the train partition.
    Augment(AugmentArgs),
    /// Score a prediction CSV against windowed ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 40)]
    subjects: usize,
    #[arg(long, default_value_t = 3)]
    videos_per_subject: usize,
    /// Quadrant to over-represent: ++, +-, -+ or --.
    #[arg(long, allow_hyphen_values = true)]
    skew: Option<Quadrant>,
    /// Probability that a subject is biased into the skew quadrant.
    #[arg(long, default_value_t = 0.0)]
    skew_fraction: f64,
    #[arg(long, default_value_t = 500)]
    min_len: usize,
    #[arg(long, default_value_t = 672)]
    max_len: usize,
    #[arg(long, default_value_t = 50.0)]
    fps: f64,
    #[arg(long, default_value_t = 4)]
    harmonics: usize,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.5)]
    archetype_spread: f64,
    /// Highest sinusoid frequency in Hz.
    #[arg(long, default_value_t = 1.0)]
    max_frequency: f64,
}

#[derive(Args, Debug, Serialize)]
struct SplitArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    input: PathBuf,
    /// Train, val and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0.8,0.1,0.1")]
    ratios: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Clustering {
    Kbin,
    Kmeans,
}

impl From<Clustering> for ClusterMethod {
    fn from(c: Clustering) -> Self {
        match c {
            Clustering::Kbin => ClusterMethod::Kbin,
            Clustering::Kmeans => ClusterMethod::Kmeans,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PartitionArg {
    Train,
    Val,
    Test,
    All,
}

impl PartitionArg {
    fn partition(self) -> Option<Partition> {
        match self {
            PartitionArg::Train => Some(Partition::Train),
            PartitionArg::Val => Some(Partition::Val),
            PartitionArg::Test => Some(Partition::Test),
            PartitionArg::All => None,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Clustering::Kbin)]
    clustering: Clustering,
    /// Number of clusters; a perfect square for kbin.
    #[arg(long, default_value_t = 16)]
    k: usize,
    #[arg(long, value_enum, default_value_t = PartitionArg::All)]
    partition: PartitionArg,
    /// Histogram bins per axis.
    #[arg(long, default_value_t = 20)]
    hist_bins: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Strategy {
    Random,
    Near,
    Similar,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Blend {
    Random,
    SelectiveWeighted,
    FullWeighted,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlignmentArg {
    VideoBased,
    FrameBased,
}

#[derive(Args, Debug, Serialize)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of source videos.
    #[arg(long, default_value_t = 100)]
    sources: usize,
    /// Targets per source.
    #[arg(long, default_value_t = 6)]
    targets: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Similar)]
    strategy: Strategy,
    #[arg(long, value_enum, default_value_t = Blend::FullWeighted)]
    blend: Blend,
    #[arg(long, value_enum, default_value_t = AlignmentArg::VideoBased)]
    alignment: AlignmentArg,
    #[arg(long, value_enum, default_value_t = Clustering::Kbin)]
    clustering: Clustering,
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// Never pair a source with a video of the same subject.
    #[arg(long)]
    exclude_same_subject: bool,
    /// K-bin grid used for the before/after balance report.
    #[arg(long, default_value_t = 16)]
    report_k: usize,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Dataset directory or manifest holding the ground truth.
    #[arg(long)]
    input: PathBuf,
    /// Prediction CSV: video_id,window_start,arousal_pred,valence_pred.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = PartitionArg::Test)]
    partition: PartitionArg,
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 50)]
    stride: usize,
}

/// Reproducibility record. Thread count and output directory are left out:
/// neither affects results, and omitting them keeps output trees
/// comparable across runs.
#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    command: &'a Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();

    let cli = Cli::parse();
    let Some(out) = cli.out.clone() else {
        Cli::command()
            .error(
                ErrorKind::MissingRequiredArgument,
                "the following required argument was not provided: --out <OUT>",
            )
            .exit();
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            log::error!("cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli, &out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(if e.is_io() { 1 } else { 2 })
        }
    }
}

fn report(e: &Error) {
    log::error!("{e}");
    if let Error::PredictionKeys { missing, extra } = e {
        for k in missing {
            log::error!("missing prediction: {k}");
        }
        for k in extra {
            log::error!("unexpected prediction: {k}");
        }
    }
}

fn run(cli: &Cli, out: &Path) -> avblend::Result<()> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    match &cli.command {
        Command::Gen(a) => gen(a, cli.seed, out)?,
        Command::Split(a) => split(a, cli.seed, out)?,
        Command::Analyze(a) => analyze(a, cli.seed, out)?,
        Command::Augment(a) => augment_cmd(a, cli.seed, out)?,
        Command::Eval(a) => eval(a, out)?,
    }
    let record = RunRecord {
        tool: "avblend",
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        command: &cli.command,
    };
    write_json(&out.join("run.json"), &record)
}

fn gen(a: &GenArgs, seed: u64, out: &Path) -> avblend::Result<()> {
    if a.skew.is_none() && a.skew_fraction > 0.0 {
        return Err(Error::Config("--skew-fraction needs --skew".into()));
    }
    let cfg = GenConfig {
        n_subjects: a.subjects,
        videos_per_subject: a.videos_per_subject,
        len_range: (a.min_len, a.max_len),
        fps: a.fps,
        n_harmonics: a.harmonics,
        skew_quadrant: a.skew,
        skew_fraction: a.skew_fraction,
        amplitude: a.amplitude,
        archetype_spread: a.archetype_spread,
        max_frequency: a.max_frequency,
        seed,
    };
    let (d, oracle) = generate_corpus(&cfg)?;
    save_dataset(&d, out)?;
    let path = out.join("oracle.json");
    fs::write(&path, oracle.to_json()).map_err(|e| io_err(&path, e))?;
    log::info!(
        "generated {} videos from {} subjects",
        d.videos.len(),
        a.subjects
    );
    Ok(())
}

fn split(a: &SplitArgs, seed: u64, out: &Path) -> avblend::Result<()> {
    let [train, val, test] = a.ratios[..] else {
        return Err(Error::Config(format!(
            "--ratios needs 3 values, got {}",
            a.ratios.len()
        )));
    };
    let d = load_dataset(&a.input)?;
    if d.split.is_some() {
        log::warn!(
            "{} already has a split; it will be replaced",
            a.input.display()
        );
    }
    let d = avblend::dataset::Dataset { split: None, ..d };
    let s = split_by_subject(&d, [train, val, test], seed)?;
    save_dataset(&s, out)?;
    for p in Partition::ALL {
        log::info!("{p}: {} videos", s.partition(p).len());
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs, seed: u64, out: &Path) -> avblend::Result<()> {
    if a.hist_bins == 0 {
        return Err(Error::Config("--hist-bins must be positive".into()));
    }
    let d = load_dataset(&a.input)?;
    let videos = match a.partition.partition() {
        None => d.videos.iter().collect(),
        Some(p) => {
            if d.split.is_none() {
                return Err(Error::Config(format!(
                    "--partition {p} needs a split dataset"
                )));
            }
            d.partition(p)
        }
    };
    let descs = describe_all(&videos)?;
    let c = match a.clustering {
        Clustering::Kbin => kbin_cluster(&descs, a.k)?,
        Clustering::Kmeans => kmeans_cluster(&descs, a.k, seed)?,
    };
    let occ = occupancy_report(&c)?;

    let mut csv = String::from("cluster_id,count\n");
    for (i, n) in occ.counts.iter().enumerate() {
        writeln!(csv, "{i},{n}").unwrap();
    }
    write_text(&out.join("occupancy.csv"), &csv)?;

    #[derive(Serialize)]
    struct Summary {
        min_count: usize,
        entropy: f64,
        #[serde(rename = "K")]
        k: usize,
        method: String,
        n_videos: usize,
    }
    let summary = Summary {
        min_count: occ.min_count,
        entropy: occ.entropy,
        k: a.k,
        method: ClusterMethod::from(a.clustering).to_string(),
        n_videos: videos.len(),
    };
    write_json(&out.join("summary.json"), &summary)?;

    let mut hist = String::from("a_bin,v_bin,count\n");
    for (ai, row) in av_histogram(videos.iter().copied(), a.hist_bins)
        .iter()
        .enumerate()
    {
        for (vi, n) in row.iter().enumerate() {
            writeln!(hist, "{ai},{vi},{n}").unwrap();
        }
    }
    write_text(&out.join("histogram.csv"), &hist)?;
    log::info!(
        "{} videos, min count {}, entropy {:.4}",
        videos.len(),
        occ.min_count,
        occ.entropy
    );
    Ok(())
}

fn augment_cmd(a: &AugmentArgs, seed: u64, out: &Path) -> avblend::Result<()> {
    let alignment = match a.alignment {
        AlignmentArg::VideoBased => Alignment::VideoBased,
        AlignmentArg::FrameBased => {
            log::warn!(
                "frame-based alignment splices frames from different time steps; \
                 expect less temporally coherent sequences than video-based"
            );
            Alignment::FrameBased
        }
    };
    let cfg = AugmentConfig {
        clustering: a.clustering.into(),
        k: a.k,
        selection: SelectionConfig {
            n_sources: a.sources,
            n_targets_per_source: a.targets,
            target_strategy: match a.strategy {
                Strategy::Random => TargetStrategy::Random,
                Strategy::Near => TargetStrategy::Near,
                Strategy::Similar => TargetStrategy::Similar,
            },
            exclude_same_subject: a.exclude_same_subject,
            seed,
        },
        alignment,
        blend_method: match a.blend {
            Blend::Random => BlendMethod::Random,
            Blend::SelectiveWeighted => BlendMethod::SelectiveWeighted,
            Blend::FullWeighted => BlendMethod::FullWeighted,
        },
        seed,
    };
    let d = load_dataset(&a.input)?;
    let augmented = augment(&d, &cfg)?;
    let report = AugmentReport::compute(&d, &augmented, a.report_k)?;
    save_dataset(&augmented, out)?;

    #[derive(Serialize)]
    struct ReportFile<'a> {
        #[serde(flatten)]
        report: &'a AugmentReport,
        report_k: usize,
    }
    write_json(
        &out.join("report.json"),
        &ReportFile {
            report: &report,
            report_k: a.report_k,
        },
    )?;
    log::info!(
        "{} synthetic videos; entropy {:.4} -> {:.4}, min count {} -> {}",
        report.n_synthetic,
        report.entropy_before,
        report.entropy_after,
        report.min_count_before,
        report.min_count_after
    );
    Ok(())
}

fn eval(a: &EvalArgs, out: &Path) -> avblend::Result<()> {
    let Some(partition) = a.partition.partition() else {
        return Err(Error::Config("eval needs a single partition".into()));
    };
    let d = load_dataset(&a.input)?;
    let windowing = Windowing {
        length: a.window,
        stride: a.stride,
    };
    let r = eval_predictions(&a.predictions, &d, partition, windowing)?;
    write_json(&out.join("metrics.json"), &r)?;
    log::info!(
        "CCC arousal {:.4}, valence {:.4}, mean {:.4} over {} windows",
        r.ccc_arousal,
        r.ccc_valence,
        r.ccc_mean,
        r.n_windows
    );
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> avblend::Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> avblend::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_text(path, &text)
}
