use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaitae_client::{Client, ClientError, DEFAULT_SERVER};
use gaitae_core::api::*;
use gaitae_core::autoencoder::{filters_to_csv, JointLayout, ModelFile, TrainConfig};
use gaitae_core::evalmetrics::{roc_to_csv, Label, LabeledScore};
use gaitae_core::harness::experiment::{DataSource, Granularity, SequenceRecord};
use gaitae_core::harness::io::{index_to_csv, load_dataset, model_path, read_text, write_bytes, write_dataset, write_text};
use gaitae_core::harness::{ExperimentSplit, GaitKind, GaitSequence, HarnessError, Manifest};
use gaitae_core::index::{aggregate, FusionMode};
use gaitae_core::AxisTag;

const SPLIT_FILE: &str = "split.json";

/// Gait abnormality scoring with per-axis sparse auto-encoders.
///
/// Every subcommand is executed by a running `gaitae-server`; files are read
/// and written locally.
#[derive(Debug, Parser)]
#[command(name = "gaitae", version)]
struct Cli {
    /// Base URL of the service.
    #[arg(long, global = true, env = "GAITAE_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    /// Experiment manifest (JSON); flags override its fields.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train the three axis models on normal sequences.
    Train(TrainArgs),
    /// Score one sequence with a trained model directory.
    Score(ScoreArgs),
    /// ROC, AUC, EER and EER-threshold metrics for labeled scores.
    Eval(EvalArgs),
    /// Render second-layer weights of a model as joint-layout images.
    InspectFilters(FilterArgs),
    /// Run a full experiment.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    plan: PlanOverrides,
}

#[derive(Debug, Args)]
struct PlanOverrides {
    /// Seed of the synthetic data.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    train_subjects: Option<usize>,
    #[arg(long)]
    test_subjects: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainOverrides {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    sparsity_weight: Option<f64>,
    #[arg(long)]
    l2_weight: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Seed for weight initialization and shuffling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory with an index.json.
    #[arg(long)]
    data: PathBuf,
    /// Directory for model_x.json, model_y.json, model_z.json and training.json.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated training subjects (default: the manifest split, then
    /// the dataset's split.json, then every subject).
    #[arg(long, value_delimiter = ',')]
    subjects: Option<Vec<String>>,
    /// Also write per-batch losses to training_log.csv.
    #[arg(long)]
    log: bool,
    #[command(flatten)]
    train: TrainOverrides,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Weighted,
    Unweighted,
}

impl From<ModeArg> for FusionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Weighted => FusionMode::Weighted,
            ModeArg::Unweighted => FusionMode::Unweighted,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GranularityArg {
    Frame,
    Segment,
    Sequence,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Self {
        match g {
            GranularityArg::Frame => Granularity::Frame,
            GranularityArg::Segment => Granularity::Segment,
            GranularityArg::Sequence => Granularity::Sequence,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Directory holding model_x.json, model_y.json and model_z.json.
    #[arg(long)]
    models: PathBuf,
    /// Skeleton CSV of one sequence.
    #[arg(long)]
    input: PathBuf,
    /// Output index CSV; the aggregate JSON is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "weighted")]
    mode: ModeArg,
    #[arg(long)]
    segment_length: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// CSV with `score,label` columns, label being normal or abnormal.
    #[arg(long, conflicts_with = "index")]
    scores: Option<PathBuf>,
    /// Index CSV written by `score`, as PATH=normal or PATH=abnormal.
    #[arg(long, value_parser = parse_labeled_path)]
    index: Vec<(PathBuf, Label)>,
    /// Granularity at which index CSVs are compared.
    #[arg(long, value_enum, default_value = "frame")]
    granularity: GranularityArg,
    #[arg(long)]
    segment_length: Option<usize>,
    /// Directory for report.json and roc.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pixel magnification of the PGM images.
    #[arg(long, default_value_t = 16)]
    scale: usize,
    /// Joint layout JSON (width, height, positions); default is a stick figure.
    #[arg(long)]
    layout: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    segment_length: Option<usize>,
    #[command(flatten)]
    plan: PlanOverrides,
    #[command(flatten)]
    train: TrainOverrides,
}

fn parse_label(s: &str) -> Result<Label, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "normal" | "0" => Ok(Label::Normal),
        "abnormal" | "1" => Ok(Label::Abnormal),
        other => Err(format!("unknown label {other:?}")),
    }
}

fn parse_labeled_path(s: &str) -> Result<(PathBuf, Label), String> {
    let (path, label) = s.rsplit_once('=').ok_or("expected PATH=LABEL")?;
    Ok((PathBuf::from(path), parse_label(label)?))
}

/// Error reported on stderr as JSON.
#[derive(Debug)]
struct Failure(ErrorBody);

impl Failure {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        Failure(ErrorBody::new(kind, message))
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure(e.to_body())
    }
}

impl From<gaitae_core::Error> for Failure {
    fn from(e: gaitae_core::Error) -> Self {
        Failure(ErrorBody::from(&e))
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        gaitae_core::Error::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn load_manifest(path: Option<&Path>) -> CliResult<Manifest> {
    let Some(path) = path else {
        return Ok(Manifest::default());
    };
    let mut m: Manifest = serde_json::from_str(&read_text(path)?)
        .map_err(|e| HarnessError::Json(format!("{}: {e}", path.display())))?;
    // Dataset paths are relative to the manifest.
    if let DataSource::Directory { path: dir } = &mut m.data {
        if Path::new(dir.as_str()).is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            *dir = base.join(&*dir).to_string_lossy().into_owned();
        }
    }
    Ok(m)
}

impl PlanOverrides {
    fn apply(&self, m: &mut Manifest) -> CliResult {
        let any = self.data_seed.is_some()
            || self.frames.is_some()
            || self.train_subjects.is_some()
            || self.test_subjects.is_some()
            || self.noise_sigma.is_some();
        let DataSource::Synthetic(plan) = &mut m.data else {
            return if any {
                Err(Failure::new("usage", "synthetic data flags need a synthetic manifest"))
            } else {
                Ok(())
            };
        };
        if let Some(v) = self.data_seed {
            plan.seed = v;
        }
        if let Some(v) = self.frames {
            plan.n_frames = v;
        }
        if let Some(v) = self.train_subjects {
            plan.train_subjects = v;
        }
        if let Some(v) = self.test_subjects {
            plan.test_subjects = v;
        }
        if let Some(v) = self.noise_sigma {
            plan.noise_sigma = v;
        }
        Ok(())
    }
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.momentum {
            cfg.momentum = v;
        }
        if let Some(v) = self.sparsity_weight {
            cfg.sparsity_weight = v;
        }
        if let Some(v) = self.l2_weight {
            cfg.l2_weight = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}

async fn synth(client: &Client, manifest: Manifest, args: SynthArgs) -> CliResult {
    let mut manifest = manifest;
    args.plan.apply(&mut manifest)?;
    let DataSource::Synthetic(plan) = manifest.data else {
        return Err(Failure::new("usage", "synth needs a manifest with synthetic data"));
    };
    let resp = client.synth(&SynthRequest { plan }).await?;
    let sequences = resp
        .sequences
        .iter()
        .map(SequenceRecord::parse)
        .collect::<Result<Vec<GaitSequence>, _>>()?;
    write_dataset(&args.out, &sequences)?;
    let split = ExperimentSplit {
        train_subjects: resp.train_subjects,
        test_subjects: resp.test_subjects,
    };
    write_text(&args.out.join(SPLIT_FILE), &to_json(&split))?;
    println!("wrote {} sequences to {}", sequences.len(), args.out.display());
    Ok(())
}

async fn train(client: &Client, manifest: Manifest, args: TrainArgs) -> CliResult {
    let mut config = manifest.train.clone();
    args.train.apply(&mut config);
    let subjects: Option<Vec<String>> = match (&args.subjects, &manifest.split) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(split)) => Some(split.train_subjects.clone()),
        (None, None) => {
            let path = args.data.join(SPLIT_FILE);
            if path.exists() {
                let split: ExperimentSplit = serde_json::from_str(&read_text(&path)?)
                    .map_err(|e| HarnessError::Json(format!("{}: {e}", path.display())))?;
                Some(split.train_subjects)
            } else {
                None
            }
        }
    };
    let sequences: Vec<SequenceRecord> = load_dataset(&args.data)?
        .iter()
        .filter(|s| !s.gait.is_abnormal())
        .filter(|s| subjects.as_ref().is_none_or(|ids| ids.contains(&s.subject_id)))
        .map(SequenceRecord::from_sequence)
        .collect();
    if sequences.is_empty() {
        return Err(Failure::new("data", "no normal sequences for the selected subjects"));
    }
    let resp = client.train(&TrainRequest { sequences, config }, args.log).await?;
    for m in &resp.models {
        write_text(&model_path(&args.out, m.axis_tag), &to_json(m))?;
    }
    if let Some(logs) = &resp.logs {
        let mut csv = String::from("axis,epoch,batch,recon_loss,kl_penalty,l2_term,total_loss\n");
        for (axis, log) in AxisTag::ALL.iter().zip(logs) {
            for b in log {
                csv.push_str(&format!(
                    "{axis},{},{},{},{},{},{}\n",
                    b.epoch, b.batch, b.recon_loss, b.kl_penalty, b.l2_term, b.total_loss
                ));
            }
        }
        write_text(&args.out.join("training_log.csv"), &csv)?;
    }
    let summary = serde_json::json!({
        "bundle_id": resp.bundle_id,
        "frames": resp.frames,
        "weights": resp.weights,
        "train_mse": resp.train_mse,
        "epoch_loss": resp.epoch_loss,
    });
    write_text(&args.out.join("training.json"), &to_json(&summary))?;
    println!(
        "trained on {} frames; weights x={} y={} z={}",
        resp.frames, resp.weights.x, resp.weights.y, resp.weights.z
    );
    Ok(())
}

fn read_models(dir: &Path) -> CliResult<Vec<ModelFile>> {
    AxisTag::ALL
        .iter()
        .map(|&axis| {
            let path = model_path(dir, axis);
            serde_json::from_str(&read_text(&path)?)
                .map_err(|e| HarnessError::Json(format!("{}: {e}", path.display())).into())
        })
        .collect()
}

async fn score(client: &Client, manifest: Manifest, args: ScoreArgs) -> CliResult {
    let name = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    let req = ScoreRequest {
        models: read_models(&args.models)?,
        sequence: SequenceRecord {
            subject_id: name.clone(),
            gait: GaitKind::Normal,
            csv: read_text(&args.input)?,
        },
        options: ScoreOptions {
            mode: args.mode.into(),
            segment_length: args.segment_length.unwrap_or(manifest.segment_length),
        },
    };
    let mut resp = client.score(&req).await?;
    resp.summary.sequence = name;
    write_text(&args.out, &index_to_csv(&resp.frame_indices, &resp.per_frame))?;
    write_text(&args.out.with_extension("json"), &to_json(&resp.summary))?;
    println!("per-sequence index {}", resp.summary.per_sequence);
    Ok(())
}

fn read_score_csv(path: &Path) -> CliResult<Vec<LabeledScore>> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| HarnessError::Parse { line, message: e.to_string() })?;
        if rec.len() != 2 {
            return Err(HarnessError::ColumnCount { line, expected: 2, found: rec.len() }.into());
        }
        let score: f64 = rec[0]
            .trim()
            .parse()
            .map_err(|e| HarnessError::Parse { line, message: format!("score: {e}") })?;
        let label = parse_label(&rec[1]).map_err(|message| HarnessError::Parse { line, message })?;
        out.push(LabeledScore::new(score, label));
    }
    Ok(out)
}

fn read_index_csv(path: &Path) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| HarnessError::Parse { line, message: e.to_string() })?;
        let value = rec
            .get(1)
            .ok_or(HarnessError::ColumnCount { line, expected: 2, found: rec.len() })?;
        out.push(
            value
                .trim()
                .parse()
                .map_err(|e| HarnessError::Parse { line, message: format!("{}: {e}", path.display()) })?,
        );
    }
    Ok(out)
}

async fn eval(client: &Client, manifest: Manifest, args: EvalArgs) -> CliResult {
    let scores = match &args.scores {
        Some(path) => read_score_csv(path)?,
        None if args.index.is_empty() => {
            return Err(Failure::new("usage", "eval needs --scores or at least one --index"));
        }
        None => {
            let segment_length = args.segment_length.unwrap_or(manifest.segment_length);
            let mut scores = Vec::new();
            for (path, label) in &args.index {
                let series = aggregate(&read_index_csv(path)?, segment_length).map_err(gaitae_core::Error::from)?;
                let values = match Granularity::from(args.granularity) {
                    Granularity::Frame => series.per_frame,
                    Granularity::Segment => series.per_segment,
                    Granularity::Sequence => vec![series.per_sequence],
                };
                scores.extend(values.into_iter().map(|v| LabeledScore::new(v, *label)));
            }
            scores
        }
    };
    let resp = client.eval(&EvalRequest { scores }).await?;
    if let Some(out) = &args.out {
        write_text(&out.join("report.json"), &to_json(&resp.report))?;
        write_text(&out.join("roc.csv"), &roc_to_csv(&resp.roc))?;
    }
    print!("{}", resp.table);
    Ok(())
}

async fn inspect_filters(client: &Client, args: FilterArgs) -> CliResult {
    let text = read_text(&args.model)?;
    let model: ModelFile = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Json(format!("{}: {e}", args.model.display())))?;
    let layout: Option<JointLayout> = match &args.layout {
        Some(p) => Some(
            serde_json::from_str(&read_text(p)?).map_err(|e| HarnessError::Json(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let resp = client.filters(&FiltersRequest { model, layout }).await?;
    for f in &resp.filters {
        write_bytes(&args.out.join(format!("filter_{:03}.pgm", f.unit)), &f.to_pgm(args.scale.max(1)))?;
    }
    write_text(&args.out.join("filters.csv"), &filters_to_csv(&resp.filters))?;
    println!("wrote {} filters to {}", resp.filters.len(), args.out.display());
    Ok(())
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

async fn run(client: &Client, manifest: Manifest, args: RunArgs) -> CliResult {
    let mut manifest = manifest;
    args.plan.apply(&mut manifest)?;
    args.train.apply(&mut manifest.train);
    if let Some(s) = args.segment_length {
        manifest.segment_length = s;
    }
    write_text(&args.out.join("manifest.json"), &to_json(&manifest))?;
    let shipped = manifest.with_inline_data()?;
    let resp = client.experiment(&ExperimentRequest { manifest: shipped }).await?;
    let report = &resp.report;

    for m in &resp.models {
        write_text(&model_path(&args.out.join("models"), m.axis_tag), &to_json(m))?;
    }
    for row in &report.rows {
        write_text(&args.out.join("roc").join(format!("{}.csv", slug(&row.name))), &roc_to_csv(&row.roc))?;
    }
    for s in &report.scored {
        for mode in [FusionMode::Weighted, FusionMode::Unweighted] {
            let per_frame = s.scores.by_mode(mode);
            let series = aggregate(per_frame, manifest.segment_length).map_err(gaitae_core::Error::from)?;
            let tag = match mode {
                FusionMode::Weighted => "weighted",
                FusionMode::Unweighted => "sum",
            };
            let base = args.out.join("indices").join(format!("{}_{tag}", s.name()));
            write_text(&base.with_extension("csv"), &index_to_csv(&s.frame_indices, per_frame))?;
            let summary = gaitae_core::harness::io::IndexSummary::new(
                &s.name(),
                mode,
                match mode {
                    FusionMode::Weighted => report.training.weights,
                    FusionMode::Unweighted => gaitae_core::index::FusionWeights::ONES,
                },
                &series,
            );
            write_text(&base.with_extension("json"), &to_json(&summary))?;
        }
    }
    write_text(&args.out.join("report.json"), &to_json(report))?;
    write_text(&args.out.join("table.txt"), &resp.table)?;
    print!("{}", resp.table);
    Ok(())
}

async fn dispatch(cli: Cli) -> CliResult {
    let client = Client::new(&cli.server);
    let manifest = load_manifest(cli.manifest.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(&client, manifest, a).await,
        Command::Train(a) => train(&client, manifest, a).await,
        Command::Score(a) => score(&client, manifest, a).await,
        Command::Eval(a) => eval(&client, manifest, a).await,
        Command::InspectFilters(a) => inspect_filters(&client, a).await,
        Command::Run(a) => run(&client, manifest, a).await,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = ErrorBody::new("usage", e.to_string().trim());
            eprintln!("{}", serde_json::to_string(&body).expect("error serializes"));
            return ExitCode::from(2);
        }
    };
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(body)) => {
            eprintln!("{}", serde_json::to_string(&body).expect("error serializes"));
            ExitCode::FAILURE
        }
    }
}
