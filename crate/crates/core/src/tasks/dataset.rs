use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::tasks::{build_document, derive_seed, generate_classes, ClassSpec, DocOptions, DocRegime, Document, LossRegime, Vocabulary};

/// Sampling weights of the three document layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeMix {
    pub classification_prompt: f64,
    pub image_first_caption: f64,
    pub caption_first_image: f64,
}

impl Default for RegimeMix {
    fn default() -> Self {
        Self {
            classification_prompt: 0.4,
            image_first_caption: 0.3,
            caption_first_image: 0.3,
        }
    }
}

impl RegimeMix {
    fn weights(&self) -> [(DocRegime, f64); 3] {
        [
            (DocRegime::ClassificationPrompt, self.classification_prompt),
            (DocRegime::ImageFirstCaption, self.image_first_caption),
            (DocRegime::CaptionFirstImage, self.caption_first_image),
        ]
    }

    fn sample(&self, u: f64) -> DocRegime {
        let w = self.weights();
        let total: f64 = w.iter().map(|x| x.1).sum();
        let mut acc = 0.0;
        for (r, p) in w {
            acc += p / total;
            if u < acc {
                return r;
            }
        }
        w.iter().rev().find(|x| x.1 > 0.0).map(|x| x.0).unwrap_or(DocRegime::ClassificationPrompt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_classes: usize,
    pub n_per_class: usize,
    pub t_img: usize,
    pub n_image_codes: usize,
    pub noise_eps: f64,
    pub regime_mix: RegimeMix,
    /// Train and test fractions.
    pub split: [f64; 2],
    pub loss_regime: LossRegime,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_classes: 20,
            n_per_class: 100,
            t_img: 36,
            n_image_codes: 64,
            noise_eps: 0.1,
            regime_mix: RegimeMix::default(),
            split: [0.8, 0.2],
            loss_regime: LossRegime::Native,
            max_seq_len: 64,
            seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let [tr, te] = self.split;
        if tr < 0.0 || te < 0.0 || (tr + te - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {tr} + {te} must be nonnegative and sum to 1")));
        }
        if te > 0.0 && self.n_per_class < 2 {
            return Err(Error::Config(format!(
                "n_per_class = {} cannot be split with a nonzero test fraction",
                self.n_per_class
            )));
        }
        let w = self.regime_mix.weights();
        if w.iter().any(|x| x.1 < 0.0 || !x.1.is_finite()) || w.iter().all(|x| x.1 == 0.0) {
            return Err(Error::Config("regime mix weights must be nonnegative and not all zero".into()));
        }
        if !(0.0..0.5).contains(&self.noise_eps) {
            return Err(Error::Config(format!("noise_eps {} outside [0, 0.5)", self.noise_eps)));
        }
        Ok(())
    }

    fn n_train_per_class(&self) -> usize {
        let n = (self.n_per_class as f64 * self.split[0]).round() as usize;
        if self.split[1] > 0.0 {
            n.min(self.n_per_class - 1)
        } else {
            self.n_per_class
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub vocab: Vocabulary,
    pub classes: Vec<ClassSpec>,
    pub train: Vec<Document>,
    pub test: Vec<Document>,
    /// Disjoint class pairs for patching.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CorpusMeta {
    vocab: Vocabulary,
    classes: Vec<ClassSpec>,
    pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CorpusManifest {
    config: DatasetConfig,
    config_hash: String,
    files: Vec<(String, String)>,
}

/// Builds the corpus. Every document draws its image and layout from a seed
/// derived from `(seed, class, index)`, so generation is order-independent.
pub fn make_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let vocab = Vocabulary::new(config.n_image_codes, config.n_classes)?;
    let classes = generate_classes(&vocab, config.t_img, derive_seed(config.seed, &[0]))?;
    let opts = DocOptions {
        noise_eps: config.noise_eps,
        loss_regime: config.loss_regime,
        max_seq_len: config.max_seq_len,
    };
    let n_train = config.n_train_per_class();
    let jobs: Vec<(usize, usize)> = (0..config.n_classes)
        .flat_map(|c| (0..config.n_per_class).map(move |i| (c, i)))
        .collect();
    let docs: Vec<(bool, Document)> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[2, c as u64, i as u64]));
            let regime = config.regime_mix.sample(rng.gen::<f64>());
            let doc_seed = derive_seed(config.seed, &[1, c as u64, i as u64]);
            build_document(&classes[c], regime, &vocab, &opts, doc_seed).map(|d| (i < n_train, d))
        })
        .collect::<Result<_>>()?;
    let (train, test): (Vec<_>, Vec<_>) = docs.into_iter().partition(|x| x.0);

    let mut order: Vec<usize> = (0..config.n_classes).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[3])));
    let pairs = order.chunks_exact(2).map(|p| (p[0], p[1])).collect();

    Ok(Dataset {
        config: config.clone(),
        vocab,
        classes,
        train: train.into_iter().map(|x| x.1).collect(),
        test: test.into_iter().map(|x| x.1).collect(),
        pairs,
    })
}

fn to_jsonl(docs: &[Document]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn from_jsonl(bytes: &str) -> Result<Vec<Document>> {
    bytes
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

impl Dataset {
    pub fn config_hash(&self) -> Result<String> {
        io::config_hash(&self.config)
    }

    /// Documents of one class within a split, in generation order.
    pub fn class_docs(docs: &[Document], class: usize) -> impl Iterator<Item = &Document> {
        docs.iter().filter(move |d| d.class == class)
    }

    /// Writes `train.jsonl`, `test.jsonl`, `corpus.json` and `manifest.json`
    /// (config, config hash and per-file sha256) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        let meta = CorpusMeta {
            vocab: self.vocab.clone(),
            classes: self.classes.clone(),
            pairs: self.pairs.clone(),
        };
        let mut meta_bytes = serde_json::to_vec_pretty(&meta)?;
        meta_bytes.push(b'\n');
        let files = [
            ("corpus.json", meta_bytes),
            ("train.jsonl", to_jsonl(&self.train)?),
            ("test.jsonl", to_jsonl(&self.test)?),
        ];
        let mut hashes = Vec::new();
        for (name, bytes) in &files {
            io::write_bytes(&dir.join(name), bytes)?;
            hashes.push((name.to_string(), io::sha256_hex(bytes)));
        }
        io::write_json(
            &dir.join("manifest.json"),
            &CorpusManifest {
                config: self.config.clone(),
                config_hash: self.config_hash()?,
                files: hashes,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: CorpusManifest = io::read_json(&dir.join("manifest.json"))?;
        if manifest.config_hash != io::config_hash(&manifest.config)? {
            return Err(Error::InvalidInput(format!(
                "corpus manifest in {} has a stale config hash",
                dir.display()
            )));
        }
        for (name, hash) in &manifest.files {
            let bytes = io::read_bytes(&dir.join(name))?;
            if &io::sha256_hex(&bytes) != hash {
                return Err(Error::InvalidInput(format!("{name} does not match its manifest hash")));
            }
        }
        let meta: CorpusMeta = io::read_json(&dir.join("corpus.json"))?;
        Ok(Self {
            config: manifest.config,
            vocab: meta.vocab,
            classes: meta.classes,
            train: from_jsonl(&io::read_string(&dir.join("train.jsonl"))?)?,
            test: from_jsonl(&io::read_string(&dir.join("test.jsonl"))?)?,
            pairs: meta.pairs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stratified_split() {
        let d = make_dataset(&DatasetConfig::default()).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (1600, 400));
        for c in 0..20 {
            assert_eq!(Dataset::class_docs(&d.train, c).count(), 80);
            assert_eq!(Dataset::class_docs(&d.test, c).count(), 20);
        }
        assert_eq!(d.pairs.len(), 10);
        let mut seen: Vec<usize> = d.pairs.iter().flat_map(|p| [p.0, p.1]).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_round_trips() {
        let cfg = DatasetConfig {
            n_per_class: 10,
            ..Default::default()
        };
        let a = make_dataset(&cfg).unwrap();
        let b = make_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("train.jsonl")).unwrap();
        assert_eq!(Dataset::load(dir.path()).unwrap(), a);
        b.save(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join("train.jsonl")).unwrap(), first);
        let other = make_dataset(&DatasetConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(other.train[0].seq.ids, a.train[0].seq.ids);
    }

    #[test]
    fn regime_mix_is_roughly_respected() {
        let d = make_dataset(&DatasetConfig::default()).unwrap();
        let n = (d.train.len() + d.test.len()) as f64;
        let frac = |r| d.train.iter().chain(&d.test).filter(|x| x.regime == r).count() as f64 / n;
        assert!((frac(DocRegime::ClassificationPrompt) - 0.4).abs() < 0.04);
        assert!((frac(DocRegime::CaptionFirstImage) - 0.3).abs() < 0.04);
    }

    #[test]
    fn config_errors() {
        let bad = DatasetConfig {
            n_per_class: 1,
            ..Default::default()
        };
        assert!(make_dataset(&bad).is_err());
        let ok = DatasetConfig {
            n_per_class: 1,
            split: [1.0, 0.0],
            ..Default::default()
        };
        assert_eq!(make_dataset(&ok).unwrap().test.len(), 0);
        let bad = DatasetConfig {
            split: [0.7, 0.2],
            ..Default::default()
        };
        assert!(make_dataset(&bad).is_err());
    }
}
