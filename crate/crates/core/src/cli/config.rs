use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cli::AnalyzeWhat;
use crate::experiments::{AblationConfig, AttentionProfileConfig, FinetuneConfig, ModalityGapConfig, PatchingConfig, ProbeConfig};
use crate::tasks::{DatasetConfig, Vocabulary};
use crate::training::TrainConfig;
use crate::transformer::ModelConfig;

const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetRunConfig {
    pub seed: u64,
    pub data: DatasetConfig,
}

impl Default for DatasetRunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            data: DatasetConfig::default(),
        }
    }
}

impl DatasetRunConfig {
    pub fn resolve(&mut self) {
        self.data.seed = self.seed;
    }
}

/// Architecture knobs; vocabulary and context come from the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelShape {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_mlp: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        let desk = ModelConfig::desk(1, [0, 0], [0, 0]);
        Self {
            n_layers: desk.n_layers,
            n_heads: desk.n_heads,
            d_model: desk.d_model,
            d_mlp: desk.d_mlp,
        }
    }
}

impl ModelShape {
    pub fn config(&self, vocab: &Vocabulary, seed: u64) -> ModelConfig {
        ModelConfig {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_model: self.d_model,
            d_mlp: self.d_mlp,
            seed,
            ..vocab.desk_model()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub seed: u64,
    pub data: DatasetConfig,
    /// Load this saved corpus instead of generating one.
    pub data_dir: Option<PathBuf>,
    pub model: ModelShape,
    pub train: TrainConfig,
    /// Starting checkpoint (fine-tuning).
    pub from: Option<PathBuf>,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            data: DatasetConfig::default(),
            data_dir: None,
            model: ModelShape::default(),
            train: TrainConfig::default(),
            from: None,
        }
    }
}

impl TrainRunConfig {
    /// Fine-tuning defaults: the fine-tuning experiment's schedule.
    pub fn finetune_default() -> Self {
        Self {
            train: FinetuneConfig::default().train_config(false),
            ..Default::default()
        }
    }

    pub fn resolve(&mut self) {
        self.data.seed = self.seed;
        self.train.seed = self.seed;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ModalityGap,
    AttentionProfile,
    Probe,
    Ablate,
    Patch,
    FinetuneDynamics,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::ModalityGap,
        ExperimentKind::AttentionProfile,
        ExperimentKind::Probe,
        ExperimentKind::Ablate,
        ExperimentKind::Patch,
        ExperimentKind::FinetuneDynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ModalityGap => "modality-gap",
            ExperimentKind::AttentionProfile => "attention-profile",
            ExperimentKind::Probe => "probe",
            ExperimentKind::Ablate => "ablate",
            ExperimentKind::Patch => "patch",
            ExperimentKind::FinetuneDynamics => "finetune-dynamics",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            ExperimentKind::ModalityGap => "modality_gap",
            ExperimentKind::AttentionProfile => "attention_profile",
            ExperimentKind::Probe => "semantic_probe",
            ExperimentKind::Ablate => "ablation",
            ExperimentKind::Patch => "patching",
            ExperimentKind::FinetuneDynamics => "finetune_dynamics",
        }
    }
}

impl From<AnalyzeWhat> for ExperimentKind {
    fn from(w: AnalyzeWhat) -> Self {
        match w {
            AnalyzeWhat::ModalityGap => ExperimentKind::ModalityGap,
            AnalyzeWhat::AttentionProfile => ExperimentKind::AttentionProfile,
            AnalyzeWhat::Probe => ExperimentKind::Probe,
            AnalyzeWhat::Ablate => ExperimentKind::Ablate,
            AnalyzeWhat::Patch => ExperimentKind::Patch,
            AnalyzeWhat::FinetuneDynamics => ExperimentKind::FinetuneDynamics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeRunConfig {
    pub seed: u64,
    pub data: DatasetConfig,
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub experiments: Vec<ExperimentKind>,
    pub modality_gap: ModalityGapConfig,
    pub attention_profile: AttentionProfileConfig,
    pub probe: ProbeConfig,
    pub ablation: AblationConfig,
    pub patching: PatchingConfig,
    pub finetune: FinetuneConfig,
}

impl Default for AnalyzeRunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            data: DatasetConfig::default(),
            data_dir: None,
            checkpoint: None,
            experiments: Vec::new(),
            modality_gap: Default::default(),
            attention_profile: Default::default(),
            probe: Default::default(),
            ablation: Default::default(),
            patching: Default::default(),
            finetune: Default::default(),
        }
    }
}

impl AnalyzeRunConfig {
    pub fn resolve(&mut self) {
        let s = self.seed;
        self.data.seed = s;
        self.modality_gap.seed = s;
        self.attention_profile.seed = s;
        self.probe.seed = s;
        self.ablation.seed = s;
        self.patching.seed = s;
        self.finetune.seed = s;
    }
}
