use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    /// Content hash of the analysed checkpoint.
    pub checkpoint: String,
    /// Hash of the experiment config together with the corpus config.
    pub config_hash: String,
    pub seed: u64,
    /// Free-form run condition: knockout name, class pair, fine-tuning curve.
    pub condition: String,
    pub step: Option<usize>,
    pub layer: Option<usize>,
    /// `layer / n_layers`.
    pub depth: Option<f64>,
    pub group: String,
    pub metric: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Fields shared by every record of one experiment run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub experiment: String,
    pub checkpoint: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_layers: usize,
}

impl Stamp {
    pub fn new<C: Serialize>(experiment: &str, checkpoint: String, config: &C, seed: u64, n_layers: usize) -> Result<Self> {
        Ok(Self {
            experiment: experiment.into(),
            checkpoint,
            config_hash: io::config_hash(config)?,
            seed,
            n_layers,
        })
    }

    pub fn rec(&self, metric: &str, value: f64) -> ExperimentRecord {
        ExperimentRecord {
            experiment: self.experiment.clone(),
            checkpoint: self.checkpoint.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            condition: String::new(),
            step: None,
            layer: None,
            depth: None,
            group: String::new(),
            metric: metric.into(),
            value,
            ci_low: None,
            ci_high: None,
        }
    }

    pub fn at_layer(&self, layer: usize, metric: &str, value: f64) -> ExperimentRecord {
        let mut r = self.rec(metric, value);
        r.layer = Some(layer);
        r.depth = Some(layer as f64 / self.n_layers as f64);
        r
    }
}

impl ExperimentRecord {
    pub fn group(mut self, g: impl Into<String>) -> Self {
        self.group = g.into();
        self
    }

    pub fn condition(mut self, c: impl Into<String>) -> Self {
        self.condition = c.into();
        self
    }

    pub fn step(mut self, s: usize) -> Self {
        self.step = Some(s);
        self
    }

    pub fn ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci_low = Some(lo);
        self.ci_high = Some(hi);
        self
    }

    pub const CSV_HEADER: &'static str =
        "experiment,checkpoint,config_hash,seed,condition,step,layer,depth,group,metric,value,ci_low,ci_high";

    pub fn csv(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.checkpoint,
            self.config_hash,
            self.seed,
            self.condition,
            opt(self.step),
            opt(self.layer),
            opt(self.depth),
            self.group,
            self.metric,
            self.value,
            opt(self.ci_low),
            opt(self.ci_high)
        )
    }
}

/// Canonical order: experiment, condition, step, layer, group, metric.
pub fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| {
        (&a.experiment, &a.condition, a.step, a.layer, &a.group, &a.metric)
            .cmp(&(&b.experiment, &b.condition, b.step, b.layer, &b.group, &b.metric))
    });
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

/// Writes `<name>.csv` and `<name>.jsonl` into `dir` after sorting.
pub fn write_records(dir: &Path, name: &str, records: &[ExperimentRecord]) -> Result<Vec<OutputFile>> {
    let mut rows = records.to_vec();
    sort_records(&mut rows);
    let mut csv = String::from(ExperimentRecord::CSV_HEADER);
    csv.push('\n');
    let mut jsonl = Vec::new();
    for r in &rows {
        csv.push_str(&r.csv());
        csv.push('\n');
        serde_json::to_writer(&mut jsonl, r)?;
        jsonl.push(b'\n');
    }
    let mut out = Vec::new();
    for (file, bytes) in [(format!("{name}.csv"), csv.into_bytes()), (format!("{name}.jsonl"), jsonl)] {
        io::write_bytes(&dir.join(&file), &bytes)?;
        out.push(OutputFile {
            sha256: io::sha256_hex(&bytes),
            path: file,
        });
    }
    Ok(out)
}
