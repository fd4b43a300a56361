use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use est_core::convert::{calibrate_thresholds, convert, CalibrationReport, DEFAULT_PERCENTILE};
use est_core::data::{self, gen_synthetic, Dataset};
use est_core::metrics::{
    accuracy, attention_heatmap, mean_spike_count, metrics_rows, population_of, reduction, synops,
    write_heatmap_csv, write_metrics_csv, MetricsRow, QK_SCORE_LAYERS,
};
use est_core::snn::{run_batch, GainMode, Mode, PsaSchedule, SnnModel};
use est_core::train::{train_sgd, SgdConfig};
use est_core::{io, AnnDims, AnnParams, EstError};

use crate::output::write_atomic;
use crate::{EXIT_CONFIG, EXIT_RUNTIME};

pub const DEFAULT_SWEEP: &str = "2,4,8,16,32,64,128,256";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<EstError> for CliError {
    fn from(e: EstError) -> Self {
        match e {
            EstError::Config(msg) => CliError::Config(msg),
            EstError::Threshold(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "est",
    version,
    about = "Spiking transformer with partial-information self-attention"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic Gaussian-blob dataset as label-first CSV.
    GenData(GenDataArgs),
    /// Train the ReLU-attention transformer with SGD.
    Train(TrainArgs),
    /// Calibrate IF thresholds from ANN activations; writes a JSON report.
    Calibrate(CalibrateArgs),
    /// Bind ANN weights and thresholds into a spiking model file.
    Convert(ConvertArgs),
    /// Run spiking inference and write per-layer metrics.
    Infer(InferArgs),
    /// Run spiking inference at several T values, one metrics row each.
    Sweep(SweepArgs),
    /// Run SA and PSA on identical data and report the reduction.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SeedArg {
    /// Seed for all randomness.
    #[arg(long, env = "EST_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Dataset: label-first CSV, or IDX images when --idx-labels is given.
    #[arg(long)]
    pub data: PathBuf,
    /// IDX label file paired with --data.
    #[arg(long)]
    pub idx_labels: Option<PathBuf>,
}

impl DataArgs {
    fn load(
        &self,
        n_tokens: usize,
        d_model: usize,
        n_classes: Option<usize>,
    ) -> CliResult<Dataset> {
        let d = match &self.idx_labels {
            Some(labels) => data::load_idx(&self.data, labels, n_tokens)?,
            None => data::load_csv(&self.data, n_tokens, d_model, n_classes)?,
        };
        if d.d_model != d_model || d.n_tokens != n_tokens {
            return Err(config(format!(
                "data is {} tokens x {} features, model expects {n_tokens} x {d_model}",
                d.n_tokens, d.d_model
            )));
        }
        if let Some(c) = n_classes {
            if d.n_classes > c {
                return Err(config(format!(
                    "data has {} classes, model has {c}",
                    d.n_classes
                )));
            }
        }
        Ok(d)
    }
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Total samples; must be a multiple of --classes.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub tokens: usize,
    #[arg(long, default_value_t = 8)]
    pub dmodel: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub tokens: usize,
    #[arg(long, default_value_t = 8)]
    pub dmodel: usize,
    #[arg(long, default_value_t = 4)]
    pub dhead: usize,
    /// MLP width; defaults to 2 * dmodel.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    /// Number of classes; defaults to max label + 1.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Mini-batch size; 0 for full batch.
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct CalibrationArgs {
    /// Percentile of each population's activations used as its threshold.
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    pub percentile: f64,
    /// Calibrate on a seeded subset of at most this many samples (0 = all).
    #[arg(long, default_value_t = 0)]
    pub calib_n: usize,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub calib: CalibrationArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainArg {
    /// T / T_qk
    Auto,
    /// No compensation.
    #[value(name = "1")]
    One,
}

impl From<GainArg> for GainMode {
    fn from(g: GainArg) -> Self {
        match g {
            GainArg::Auto => GainMode::Auto,
            GainArg::One => GainMode::Unity,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Sa,
    Psa,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sa => Mode::Sa,
            ModeArg::Psa => Mode::Psa,
        }
    }
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 64)]
    pub timesteps: usize,
    /// Fraction of steps in which Q/K are active.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub gain: GainArg,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub ann: PathBuf,
    /// Calibration report from `est calibrate`.
    #[arg(long)]
    pub calib: PathBuf,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[arg(long, value_enum, default_value = "psa")]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Label for the run_id column.
    #[arg(long, default_value = "run")]
    pub run_id: String,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub snn: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Override the model's step count.
    #[arg(long)]
    pub timesteps: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Score firing-rate heatmap CSV (first block).
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// Operation report JSON.
    #[arg(long)]
    pub ops: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub snn: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated T values.
    #[arg(long, default_value = DEFAULT_SWEEP)]
    pub timesteps: String,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub calib: CalibrationArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Summary CSV: SA row, PSA row, reduction row.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-layer metrics for both modes.
    #[arg(long)]
    pub layers_out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Convert(a) => convert_cmd(a),
        Command::Infer(a) => infer(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
    }
}

fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("reading {}: {e}", path.display())))
}

fn load_ann(path: &Path) -> CliResult<AnnParams> {
    Ok(io::ann_from_json(&read_to_string(path)?)?)
}

fn load_snn(path: &Path) -> CliResult<SnnModel> {
    Ok(io::snn_from_json(&read_to_string(path)?)?)
}

fn check_workers(w: usize) -> CliResult<()> {
    if w == 0 {
        return Err(config("--workers must be >= 1"));
    }
    Ok(())
}

fn check_timesteps(t: usize) -> CliResult<()> {
    if t == 0 {
        return Err(config("--timesteps must be >= 1"));
    }
    Ok(())
}

fn check_percentile(p: f64) -> CliResult<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(config(format!(
            "--percentile must lie in (0, 100], got {p}"
        )));
    }
    Ok(())
}

fn schedule_from(a: &ScheduleArgs) -> CliResult<PsaSchedule> {
    check_timesteps(a.timesteps)?;
    Ok(PsaSchedule::new(a.timesteps, a.rho, a.gain.into())?)
}

fn gen_data(a: GenDataArgs) -> CliResult<()> {
    if a.classes == 0 || a.n == 0 || a.tokens == 0 || a.dmodel == 0 {
        return Err(config("--classes, --n, --tokens and --dmodel must be >= 1"));
    }
    if !a.n.is_multiple_of(a.classes) {
        return Err(config(format!(
            "--n ({}) must be a multiple of --classes ({})",
            a.n, a.classes
        )));
    }
    let d = gen_synthetic(a.n / a.classes, a.classes, a.tokens, a.dmodel, a.seed.seed)?;
    let mut buf = Vec::new();
    data::write_csv(&d, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    Ok(())
}

fn train(a: TrainArgs) -> CliResult<()> {
    if a.epochs == 0 {
        return Err(config("--epochs must be >= 1"));
    }
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return Err(config("--lr must be > 0"));
    }
    let mut dims = AnnDims {
        n_tokens: a.tokens,
        d_model: a.dmodel,
        d_head: a.dhead,
        d_hidden: a.hidden.unwrap_or(2 * a.dmodel),
        n_classes: a.classes.unwrap_or(1),
        blocks: a.blocks,
    };
    dims.validate()?;
    let data = a.data.load(a.tokens, a.dmodel, a.classes)?;
    dims.n_classes = a.classes.unwrap_or(data.n_classes);
    let init = AnnParams::init(dims, a.seed.seed)?;
    let cfg = SgdConfig {
        batch_size: a.batch,
        ..SgdConfig::new(a.epochs, a.lr, a.seed.seed)
    };
    let (params, log) = train_sgd(&init, &data, &cfg)?;
    eprintln!(
        "trained {} epochs: loss {:.6} -> {:.6}, train accuracy {:.4}",
        a.epochs,
        log.losses[0],
        log.losses.last().copied().unwrap_or(f64::NAN),
        log.accuracies.last().copied().unwrap_or(f64::NAN)
    );
    write_atomic(&a.out, io::ann_to_json(&params)?.as_bytes())?;
    Ok(())
}

fn calibration_set(data: &Dataset, args: &CalibrationArgs, seed: u64) -> Dataset {
    if args.calib_n == 0 {
        data.clone()
    } else {
        data.subsample(args.calib_n, seed)
    }
}

fn calibrate(a: CalibrateArgs) -> CliResult<()> {
    check_percentile(a.calib.percentile)?;
    let ann = load_ann(&a.ann)?;
    let d = ann.dims;
    let data = a.data.load(d.n_tokens, d.d_model, Some(d.n_classes))?;
    let calib = calibration_set(&data, &a.calib, a.seed.seed);
    let (_, report) = calibrate_thresholds(&ann, &calib, a.calib.percentile)?;
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    write_atomic(&a.out, text.as_bytes())?;
    Ok(())
}

fn convert_cmd(a: ConvertArgs) -> CliResult<()> {
    let schedule = schedule_from(&a.schedule)?;
    let ann = load_ann(&a.ann)?;
    let report: CalibrationReport =
        serde_json::from_str(&read_to_string(&a.calib)?).map_err(anyhow::Error::from)?;
    let m = convert(&ann, &report.thresholds(), schedule, a.mode.into())?;
    write_atomic(&a.out, io::snn_to_json(&m)?.as_bytes())?;
    Ok(())
}

struct Evaluated {
    rows: Vec<MetricsRow>,
    output: est_core::snn::BatchOutput,
    accuracy: f64,
}

fn evaluate(m: &SnnModel, data: &Dataset, run: &RunArgs) -> CliResult<Evaluated> {
    let output = run_batch(m, &data.inputs, run.workers)?;
    let acc = accuracy(&output.logits, &data.labels)?;
    let rows = metrics_rows(&run.run_id, m, &output.record, acc)?;
    Ok(Evaluated {
        rows,
        output,
        accuracy: acc,
    })
}

fn metrics_bytes(rows: &[MetricsRow]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_metrics_csv(rows, &mut buf)?;
    Ok(buf)
}

fn infer(a: InferArgs) -> CliResult<()> {
    check_workers(a.run.workers)?;
    if let Some(t) = a.timesteps {
        check_timesteps(t)?;
    }
    let mut m = load_snn(&a.snn)?;
    if let Some(t) = a.timesteps {
        m = m.with_timesteps(t)?;
    }
    let d = m.params.dims;
    let data = a.data.load(d.n_tokens, d.d_model, Some(d.n_classes))?;
    let ev = evaluate(&m, &data, &a.run)?;

    let metrics = metrics_bytes(&ev.rows)?;
    let heatmap = match &a.heatmap {
        Some(_) => {
            let mut buf = Vec::new();
            write_heatmap_csv(&attention_heatmap(&ev.output.record, 0)?, &mut buf)?;
            Some(buf)
        }
        None => None,
    };
    let ops = match &a.ops {
        Some(_) => Some(
            serde_json::to_string_pretty(&synops(&ev.output.record, &m)?)
                .map_err(anyhow::Error::from)?,
        ),
        None => None,
    };
    write_atomic(&a.out, &metrics)?;
    if let (Some(path), Some(buf)) = (&a.heatmap, heatmap) {
        write_atomic(path, &buf)?;
    }
    if let (Some(path), Some(text)) = (&a.ops, ops) {
        write_atomic(path, text.as_bytes())?;
    }
    eprintln!("accuracy {:.4} over {} samples", ev.accuracy, data.len());
    Ok(())
}

pub fn parse_timesteps_list(s: &str) -> CliResult<Vec<usize>> {
    let list = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| config(format!("bad T value {p:?} in --timesteps")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if list.is_empty() {
        return Err(config("--timesteps list is empty"));
    }
    for &t in &list {
        check_timesteps(t)?;
    }
    Ok(list)
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    check_workers(a.run.workers)?;
    let ts = parse_timesteps_list(&a.timesteps)?;
    let base = load_snn(&a.snn)?;
    let d = base.params.dims;
    let data = a.data.load(d.n_tokens, d.d_model, Some(d.n_classes))?;
    let mut rows = Vec::with_capacity(ts.len());
    for t in ts {
        let m = base.with_timesteps(t)?;
        let ev = evaluate(&m, &data, &a.run)?;
        rows.push(ev.rows.last().expect("total row").clone());
    }
    write_atomic(&a.out, &metrics_bytes(&rows)?)?;
    Ok(())
}

fn compare(a: CompareArgs) -> CliResult<()> {
    check_workers(a.run.workers)?;
    check_percentile(a.calib.percentile)?;
    let psa_schedule = schedule_from(&a.schedule)?;
    let ann = load_ann(&a.ann)?;
    let d = ann.dims;
    let data = a.data.load(d.n_tokens, d.d_model, Some(d.n_classes))?;
    let calib = calibration_set(&data, &a.calib, a.seed.seed);
    let (th, _) = calibrate_thresholds(&ann, &calib, a.calib.percentile)?;

    let sa = convert(
        &ann,
        &th,
        PsaSchedule::full(a.schedule.timesteps)?,
        Mode::Sa,
    )?;
    let psa = convert(&ann, &th, psa_schedule, Mode::Psa)?;
    let sa_ev = evaluate(&sa, &data, &a.run)?;
    let psa_ev = evaluate(&psa, &data, &a.run)?;

    let qk_spikes = |ev: &Evaluated| -> CliResult<f64> {
        let means = mean_spike_count(&ev.output.record)?;
        Ok(means
            .iter()
            .filter(|(n, _)| QK_SCORE_LAYERS.contains(&population_of(n)))
            .map(|(_, v)| v)
            .sum())
    };
    let sa_ops = synops(&sa_ev.output.record, &sa)?;
    let psa_ops = synops(&psa_ev.output.record, &psa)?;
    let total = |ev: &Evaluated| ev.rows.last().expect("total row").clone();
    let reduction_row = MetricsRow {
        run_id: a.run.run_id.clone(),
        mode: "reduction".into(),
        timesteps: psa.schedule.timesteps(),
        rho: psa.schedule.rho(),
        gain: psa.schedule.gain(),
        layer: QK_SCORE_LAYERS.join("+"),
        mean_spike_count: reduction(qk_spikes(&sa_ev)?, qk_spikes(&psa_ev)?),
        synops: reduction(
            sa_ops.ops_of(&QK_SCORE_LAYERS) as f64,
            psa_ops.ops_of(&QK_SCORE_LAYERS) as f64,
        ),
        accuracy: sa_ev.accuracy - psa_ev.accuracy,
    };
    let summary = vec![total(&sa_ev), total(&psa_ev), reduction_row];
    let summary_bytes = metrics_bytes(&summary)?;
    let layers_bytes = match &a.layers_out {
        Some(_) => {
            let mut rows = sa_ev.rows.clone();
            rows.extend(psa_ev.rows.iter().cloned());
            Some(metrics_bytes(&rows)?)
        }
        None => None,
    };
    write_atomic(&a.out, &summary_bytes)?;
    if let (Some(path), Some(buf)) = (&a.layers_out, layers_bytes) {
        write_atomic(path, &buf)?;
    }
    Ok(())
}
