use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transformer::TokenSequence;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSel {
    All,
    Only(Vec<usize>),
}

impl LayerSel {
    fn contains(&self, layer: usize) -> bool {
        match self {
            LayerSel::All => true,
            LayerSel::Only(ls) => ls.contains(&layer),
        }
    }
}

/// Blocks every `query -> key` attention edge at the selected layers, all heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutEdge {
    pub layers: LayerSel,
    pub queries: Vec<usize>,
    pub keys: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnockoutSpec {
    pub edges: Vec<KnockoutEdge>,
}

/// Per-layer boolean masks (`true` = blocked), row-major `len x len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnockoutMask {
    pub len: usize,
    pub layers: Vec<Option<Vec<bool>>>,
}

impl KnockoutMask {
    pub fn blocked(&self, layer: usize, query: usize, key: usize) -> bool {
        self.layers[layer]
            .as_ref()
            .is_some_and(|m| m[query * self.len + key])
    }
}

impl KnockoutSpec {
    pub fn is_empty(&self) -> bool {
        self.edges.iter().all(|e| e.queries.is_empty() || e.keys.is_empty())
    }

    pub fn union(mut self, other: KnockoutSpec) -> Self {
        self.edges.extend(other.edges);
        self
    }

    /// Validates bounds and builds dense masks; rejects fully masked rows.
    pub fn compile(&self, len: usize, n_layers: usize) -> Result<KnockoutMask> {
        let mut layers: Vec<Option<Vec<bool>>> = vec![None; n_layers];
        for edge in &self.edges {
            if let LayerSel::Only(ls) = &edge.layers {
                if let Some(&bad) = ls.iter().find(|&&l| l >= n_layers) {
                    return Err(Error::OutOfBounds(format!(
                        "knockout layer {bad} >= n_layers {n_layers}"
                    )));
                }
            }
            if let Some(&bad) = edge.queries.iter().chain(&edge.keys).find(|&&p| p >= len) {
                return Err(Error::OutOfBounds(format!(
                    "knockout position {bad} >= sequence length {len}"
                )));
            }
            for (l, slot) in layers.iter_mut().enumerate() {
                if !edge.layers.contains(l) || edge.queries.is_empty() || edge.keys.is_empty() {
                    continue;
                }
                let m = slot.get_or_insert_with(|| vec![false; len * len]);
                for &q in &edge.queries {
                    for &k in &edge.keys {
                        m[q * len + k] = true;
                    }
                }
            }
        }
        for (l, m) in layers.iter().enumerate() {
            let Some(m) = m else { continue };
            if let Some(q) = (0..len).find(|&q| (0..=q).all(|k| m[q * len + k])) {
                return Err(Error::InvalidInput(format!(
                    "knockout masks every key of query {q} at layer {l}"
                )));
            }
        }
        Ok(KnockoutMask { len, layers })
    }
}

/// Knockouts defined relative to a sequence's end-of-image position.
///
/// "Text" queries are all positions after `[EOI]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedKnockout {
    None,
    /// Text queries cannot read the `[EOI]` key.
    TextToEoi,
    /// Text queries cannot read image-code keys (`[EOI]` excluded).
    TextToImage,
    /// Text queries cannot read one absolute position.
    TextToToken(usize),
    Union(Vec<NamedKnockout>),
}

impl NamedKnockout {
    pub const VALID_NAMES: &'static str =
        "none, text-to-eoi, text-to-img, text-to-token:<pos>, or '+'-joined unions";

    /// Blocks all text queries from everything up to and including `[EOI]`
    /// apart from the image-independent `[BOS]`/`[BOI]` prefix.
    pub fn full_gate() -> Self {
        NamedKnockout::Union(vec![NamedKnockout::TextToImage, NamedKnockout::TextToEoi])
    }

    pub fn resolve(&self, seq: &TokenSequence) -> KnockoutSpec {
        let queries: Vec<usize> = seq.text_positions().collect();
        let keys: Vec<usize> = match self {
            NamedKnockout::None => return KnockoutSpec::default(),
            NamedKnockout::TextToEoi => vec![seq.n_eoi],
            NamedKnockout::TextToImage => seq.image_span().collect(),
            NamedKnockout::TextToToken(p) => vec![*p],
            NamedKnockout::Union(parts) => {
                return parts
                    .iter()
                    .fold(KnockoutSpec::default(), |acc, p| acc.union(p.resolve(seq)))
            }
        };
        KnockoutSpec {
            edges: vec![KnockoutEdge {
                layers: LayerSel::All,
                queries,
                keys,
            }],
        }
    }
}

impl fmt::Display for NamedKnockout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedKnockout::None => write!(f, "none"),
            NamedKnockout::TextToEoi => write!(f, "text-to-eoi"),
            NamedKnockout::TextToImage => write!(f, "text-to-img"),
            NamedKnockout::TextToToken(p) => write!(f, "text-to-token:{p}"),
            NamedKnockout::Union(parts) => {
                let names: Vec<String> = parts.iter().map(ToString::to_string).collect();
                write!(f, "{}", names.join("+"))
            }
        }
    }
}

impl FromStr for NamedKnockout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        if parts.len() > 1 {
            return Ok(NamedKnockout::Union(
                parts.into_iter().map(str::parse).collect::<Result<_>>()?,
            ));
        }
        let one = parts[0];
        match one {
            "none" => Ok(NamedKnockout::None),
            "text-to-eoi" => Ok(NamedKnockout::TextToEoi),
            "text-to-img" => Ok(NamedKnockout::TextToImage),
            _ => one
                .strip_prefix("text-to-token:")
                .and_then(|p| p.parse().ok())
                .map(NamedKnockout::TextToToken)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "unknown knockout {one:?}; valid names: {}",
                        Self::VALID_NAMES
                    ))
                }),
        }
    }
}

/// Overwrites the residual at `position` before block `layer` runs.
///
/// `layer == n_layers` addresses the final residual stream, read only by the
/// final norm and the unembedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub layer: usize,
    pub position: usize,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub entries: Vec<PatchEntry>,
}

impl PatchSpec {
    pub fn single(layer: usize, position: usize, vector: Vec<f64>) -> Self {
        Self {
            entries: vec![PatchEntry {
                layer,
                position,
                vector,
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, len: usize, n_layers: usize, d_model: usize) -> Result<()> {
        for e in &self.entries {
            if e.layer > n_layers || e.position >= len {
                return Err(Error::OutOfBounds(format!(
                    "patch at layer {} position {} outside {} layers x {len} positions",
                    e.layer, e.position, n_layers
                )));
            }
            if e.vector.len() != d_model {
                return Err(Error::Shape(format!(
                    "patch vector has {} entries, d_model is {d_model}",
                    e.vector.len()
                )));
            }
            if e.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("patch vector is not finite".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for s in ["none", "text-to-eoi", "text-to-img", "text-to-token:7", "text-to-img+text-to-eoi"] {
            let k: NamedKnockout = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        let err = "text-to-moon".parse::<NamedKnockout>().unwrap_err();
        assert!(err.to_string().contains("text-to-eoi"));
    }

    #[test]
    fn compile_rejects_full_rows_and_bounds() {
        let spec = KnockoutSpec {
            edges: vec![KnockoutEdge {
                layers: LayerSel::All,
                queries: vec![0],
                keys: vec![0],
            }],
        };
        assert!(spec.compile(3, 2).is_err());
        let spec = KnockoutSpec {
            edges: vec![KnockoutEdge {
                layers: LayerSel::Only(vec![5]),
                queries: vec![1],
                keys: vec![0],
            }],
        };
        assert!(matches!(spec.compile(3, 2), Err(Error::OutOfBounds(_))));
        let ok = KnockoutSpec {
            edges: vec![KnockoutEdge {
                layers: LayerSel::Only(vec![1]),
                queries: vec![2],
                keys: vec![0, 1],
            }],
        }
        .compile(3, 2)
        .unwrap();
        assert!(ok.layers[0].is_none());
        assert!(ok.blocked(1, 2, 0) && ok.blocked(1, 2, 1) && !ok.blocked(1, 2, 2));
    }
}
