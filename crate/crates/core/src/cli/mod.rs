//! Command-line front end: `gatescope dataset | train | finetune | analyze`.
//!
//! Every run owns one output directory (guarded by a `.lock` file), writes
//! the fully resolved config to `config.json` before computing anything, and
//! finishes with a `manifest.json` listing each output and its sha256.

mod config;
mod rundir;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{AnalyzeRunConfig, DatasetRunConfig, ExperimentKind, ModelShape, TrainRunConfig};
pub use rundir::{ExperimentOutputs, RunDir, RunManifest};

use crate::error::{Error, Result};
use crate::experiments::{self, write_records, AblationConfig};
use crate::io;
use crate::tasks::{make_dataset, Dataset, LossRegime};
use crate::training::{checkpoint_path, train, TrainRun};
use crate::transformer::{Checkpoint, NamedKnockout, Transformer};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GATESCOPE_OUT";

#[derive(Debug, Parser)]
#[command(name = "gatescope", version, about = "Attention-knockout and patching lab on a miniature two-modality transformer")]
pub struct Cli {
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $GATESCOPE_OUT/<command> or runs/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Global seed, applied to corpus, model init, training and analyses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and save the synthetic corpus.
    Dataset(DatasetArgs),
    /// Train a model from scratch.
    Train(TrainArgs),
    /// Continue training a checkpoint, optionally with the text-to-[EOI] mask.
    Finetune(FinetuneArgs),
    /// Run analyses against a checkpoint.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub t_img: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Saved corpus directory; generated from the config when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// native | text_only
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Block text queries from the [EOI] key during training.
    #[arg(long)]
    pub mask_eoi: bool,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Checkpoint header to start from.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeWhat {
    ModalityGap,
    AttentionProfile,
    Probe,
    Ablate,
    Patch,
    FinetuneDynamics,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub experiment: Option<AnalyzeWhat>,
    /// Run all six analyses.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated knockout names for `ablate`.
    #[arg(long, value_delimiter = ',')]
    pub spec: Option<Vec<String>>,
    /// Comma-separated residual layers for `modality-gap`, `probe` and `patch`.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// External reference vectors for `probe` (saved point set header).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub per_pair: Option<usize>,
    /// Fine-tuning steps for `finetune-dynamics`.
    #[arg(long)]
    pub steps: Option<usize>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    // Fails only if a pool already exists, e.g. when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    let name = match &cli.command {
        Command::Dataset(_) => "dataset",
        Command::Train(_) => "train",
        Command::Finetune(_) => "finetune",
        Command::Analyze(_) => "analyze",
    };
    let out = match &cli.out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(name),
    };
    match &cli.command {
        Command::Dataset(a) => cmd_dataset(&cli, a, &out),
        Command::Train(a) => cmd_train(&cli, a, None, &out),
        Command::Finetune(a) => cmd_train(&cli, &a.train, Some(a), &out),
        Command::Analyze(a) => cmd_analyze(&cli, a, &out),
    }
}

fn load_config<C: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<C> {
    match path {
        Some(p) => io::read_json(p).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", p.display())),
            other => other,
        }),
        None => Ok(C::default()),
    }
}

fn load_corpus(dir: &Option<PathBuf>, cfg: &crate::tasks::DatasetConfig) -> Result<Dataset> {
    match dir {
        Some(d) => Dataset::load(d),
        None => make_dataset(cfg),
    }
}

fn cmd_dataset(cli: &Cli, a: &DatasetArgs, out: &Path) -> Result<()> {
    let mut cfg: DatasetRunConfig = load_config(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let d = &mut cfg.data;
    d.n_classes = a.classes.unwrap_or(d.n_classes);
    d.n_per_class = a.per_class.unwrap_or(d.n_per_class);
    d.noise_eps = a.noise.unwrap_or(d.noise_eps);
    d.t_img = a.t_img.unwrap_or(d.t_img);
    cfg.resolve();
    cfg.data.validate()?;

    let run = RunDir::acquire(out)?;
    let config_hash = run.snapshot(&cfg)?;
    let data = make_dataset(&cfg.data)?;
    data.save(&run.join("corpus"))?;
    let mut outputs = vec![run.output("config.json")?];
    for f in ["corpus/manifest.json", "corpus/corpus.json", "corpus/train.jsonl", "corpus/test.jsonl"] {
        outputs.push(run.output(f)?);
    }
    log::info!(
        "wrote {} train / {} test documents to {}",
        data.train.len(),
        data.test.len(),
        run.path.display()
    );
    finish(&run, "dataset", config_hash, None, outputs, Vec::new())
}

fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let ck_dir = dir.join("checkpoints");
    let entries = std::fs::read_dir(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
    let mut best: Option<PathBuf> = None;
    for e in entries {
        let p = e.map_err(|e| Error::io(&ck_dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") && best.as_ref().is_none_or(|b| p > *b) {
            best = Some(p);
        }
    }
    best.ok_or_else(|| Error::Config(format!("--resume: no checkpoint in {}", ck_dir.display())))
}

fn cmd_train(cli: &Cli, a: &TrainArgs, ft: Option<&FinetuneArgs>, out: &Path) -> Result<()> {
    let mut cfg: TrainRunConfig = match (&cli.config, ft) {
        (None, Some(_)) => TrainRunConfig::finetune_default(),
        _ => load_config(&cli.config)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.data {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(f) = ft.and_then(|f| f.from.clone()) {
        cfg.from = Some(f);
    }
    let t = &mut cfg.train;
    if let Some(r) = &a.regime {
        t.regime = r.parse::<LossRegime>()?;
    }
    t.steps = a.steps.unwrap_or(t.steps);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.optim.lr0 = a.lr.unwrap_or(t.optim.lr0);
    t.eval_every = a.eval_every.unwrap_or(t.eval_every);
    t.checkpoint_every = a.checkpoint_every.unwrap_or(t.checkpoint_every);
    t.eoi_mask |= a.mask_eoi;
    cfg.resolve();
    cfg.train.validate()?;
    let command = if ft.is_some() { "finetune" } else { "train" };
    if ft.is_some() && cfg.from.is_none() {
        return Err(Error::Config("finetune needs --from <checkpoint>".into()));
    }

    let run = RunDir::acquire(out)?;
    let config_hash = run.snapshot(&cfg)?;
    let data = load_corpus(&cfg.data_dir, &cfg.data)?;
    let (model, source_hash) = match &cfg.from {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let h = ck.hash();
            (ck.model, Some(h))
        }
        None => (Transformer::<f32>::init(cfg.model.config(&data.vocab, cfg.seed))?, None),
    };
    let resume = if a.resume {
        let p = latest_checkpoint(&run.path)?;
        log::info!("resuming from {}", p.display());
        Some(Checkpoint::load(&p)?)
    } else {
        None
    };
    let result = train(
        model,
        &data,
        &cfg.train,
        TrainRun {
            out_dir: Some(run.path.clone()),
            resume,
        },
    )?;
    let gate = experiments::ablation_experiment(
        &result.checkpoint,
        &data,
        &AblationConfig {
            specs: vec![],
            captions: false,
            seed: cfg.seed,
        },
    )?
    .narrow_gate;
    log::info!(
        "narrow gate: accuracy {:.3}, drop under text-to-eoi {:.3}, under text-to-img {:.3}",
        gate.accuracy,
        gate.eoi_drop,
        gate.image_drop
    );
    let mut outputs = vec![run.output("config.json")?, run.output("metrics.csv")?];
    outputs.push(run.write_json("narrow_gate.json", &gate)?);
    let final_path = checkpoint_path(&run.path, result.checkpoint.step);
    let mut cks: Vec<PathBuf> = std::fs::read_dir(run.join("checkpoints"))
        .map_err(|e| Error::io(run.join("checkpoints"), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    cks.sort();
    for p in cks {
        let rel = p.strip_prefix(&run.path).expect("inside run dir").to_string_lossy().into_owned();
        outputs.push(run.output(&rel)?);
    }
    log::info!("final checkpoint {}", final_path.display());
    finish(&run, command, config_hash, source_hash, outputs, Vec::new())
}

fn cmd_analyze(cli: &Cli, a: &AnalyzeArgs, out: &Path) -> Result<()> {
    let mut cfg: AnalyzeRunConfig = load_config(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &a.checkpoint {
        cfg.checkpoint = Some(p.clone());
    }
    if let Some(d) = &a.data {
        cfg.data_dir = Some(d.clone());
    }
    if a.all {
        cfg.experiments = ExperimentKind::ALL.to_vec();
    } else if let Some(w) = a.experiment {
        cfg.experiments = vec![ExperimentKind::from(w)];
    }
    if cfg.experiments.is_empty() {
        return Err(Error::Config("name an analysis or pass --all".into()));
    }
    if let Some(specs) = &a.spec {
        cfg.ablation.specs = specs.iter().map(|s| s.parse::<NamedKnockout>()).collect::<Result<_>>()?;
    }
    if let Some(l) = &a.layers {
        cfg.modality_gap.layers = Some(l.clone());
        cfg.probe.layers = Some(l.clone());
        cfg.patching.layers = Some(l.clone());
    }
    cfg.attention_profile.threshold = a.threshold.unwrap_or(cfg.attention_profile.threshold);
    cfg.probe.k = a.k.unwrap_or(cfg.probe.k);
    if a.reference.is_some() {
        cfg.probe.reference = a.reference.clone();
    }
    cfg.patching.per_pair = a.per_pair.unwrap_or(cfg.patching.per_pair);
    cfg.finetune.steps = a.steps.unwrap_or(cfg.finetune.steps);
    cfg.resolve();
    let ck_path = cfg
        .checkpoint
        .clone()
        .ok_or_else(|| Error::Config("analyze needs --checkpoint <header.json>".into()))?;

    let run = RunDir::acquire(out)?;
    let config_hash = run.snapshot(&cfg)?;
    let ck = Checkpoint::load(&ck_path)?;
    let data = load_corpus(&cfg.data_dir, &cfg.data)?;
    let mut outputs = vec![run.output("config.json")?];
    let mut exps = Vec::new();
    for kind in &cfg.experiments {
        log::info!("running {}", kind.name());
        let mut files = Vec::new();
        let records = match kind {
            ExperimentKind::ModalityGap => experiments::modality_gap_experiment(&ck, &data, &cfg.modality_gap)?,
            ExperimentKind::AttentionProfile => experiments::attention_profile_experiment(&ck, &data, &cfg.attention_profile)?,
            ExperimentKind::Probe => experiments::semantic_probe_experiment(&ck, &data, &cfg.probe)?,
            ExperimentKind::Ablate => {
                let r = experiments::ablation_experiment(&ck, &data, &cfg.ablation)?;
                files.push(run.write_json("narrow_gate.json", &r.narrow_gate)?);
                r.records
            }
            ExperimentKind::Patch => experiments::patching_experiment(&ck, &data, &cfg.patching)?,
            ExperimentKind::FinetuneDynamics => experiments::finetune_experiment(&ck, &data, &cfg.finetune)?.records,
        };
        files.extend(write_records(&run.path, kind.file_stem(), &records)?);
        exps.push(ExperimentOutputs {
            name: kind.name().into(),
            files,
        });
    }
    outputs.extend(exps.iter().flat_map(|e| e.files.clone()));
    finish(&run, "analyze", config_hash, Some(ck.hash()), outputs, exps)
}

fn finish(
    run: &RunDir,
    command: &str,
    config_hash: String,
    checkpoint: Option<String>,
    outputs: Vec<experiments::OutputFile>,
    experiments: Vec<ExperimentOutputs>,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.into(),
        config_hash,
        checkpoint,
        outputs,
        experiments,
    };
    io::write_json(&run.join("manifest.json"), &manifest)?;
    log::info!("manifest written to {}", run.join("manifest.json").display());
    Ok(())
}
