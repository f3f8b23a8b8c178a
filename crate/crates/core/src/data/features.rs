use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::text::{fnv1a64, tokenize};
use super::{io, DataError, FeatureRecord};

/// Source of initial node representations.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureProvider {
    /// Tokens hashed with FNV-1a into `dim` buckets, counted, L2-normalized.
    HashedBagOfWords { dim: usize },
    /// Standard Gaussian vector seeded from `(seed, node key)`, normalized.
    SeededRandom { dim: usize, seed: u64 },
    /// Vectors loaded from a `features.jsonl` file, normalized on lookup.
    ExternalFile {
        path: PathBuf,
        dim: usize,
        table: HashMap<String, Vec<f64>>,
    },
}

/// Serializable description of a provider, for config echoes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FeatureSpec {
    HashedBagOfWords { dim: usize },
    SeededRandom { dim: usize, seed: u64 },
    ExternalFile { path: PathBuf },
}

impl FeatureProvider {
    pub fn external(path: &Path) -> Result<Self, DataError> {
        Self::from_records(path, io::read_jsonl(path)?)
    }

    /// External provider over already-loaded records; `path` is kept for echoes.
    pub fn from_records(path: &Path, records: Vec<FeatureRecord>) -> Result<Self, DataError> {
        let dim = records.first().map_or(0, |r| r.vec.len());
        let mut table = HashMap::with_capacity(records.len());
        for r in records {
            if r.vec.len() != dim {
                return Err(DataError::Feature(format!(
                    "`{}` has {} entries, expected {dim}",
                    r.node,
                    r.vec.len()
                )));
            }
            if table.insert(r.node.clone(), r.vec).is_some() {
                return Err(DataError::DuplicateId {
                    kind: "feature node",
                    id: r.node,
                });
            }
        }
        Ok(Self::ExternalFile {
            path: path.to_path_buf(),
            dim,
            table,
        })
    }

    pub fn from_spec(spec: &FeatureSpec) -> Result<Self, DataError> {
        Ok(match spec {
            FeatureSpec::HashedBagOfWords { dim } => Self::HashedBagOfWords { dim: *dim },
            FeatureSpec::SeededRandom { dim, seed } => Self::SeededRandom { dim: *dim, seed: *seed },
            FeatureSpec::ExternalFile { path } => Self::external(path)?,
        })
    }

    pub fn spec(&self) -> FeatureSpec {
        match self {
            Self::HashedBagOfWords { dim } => FeatureSpec::HashedBagOfWords { dim: *dim },
            Self::SeededRandom { dim, seed } => FeatureSpec::SeededRandom { dim: *dim, seed: *seed },
            Self::ExternalFile { path, .. } => FeatureSpec::ExternalFile { path: path.clone() },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::HashedBagOfWords { dim } | Self::SeededRandom { dim, .. } | Self::ExternalFile { dim, .. } => *dim,
        }
    }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Feature vector for one node. `node_key` is the `u:<id>` / `t:<id>` key.
pub fn featurize(text: &str, provider: &FeatureProvider, node_key: &str) -> Result<Vec<f64>, DataError> {
    match provider {
        FeatureProvider::HashedBagOfWords { dim } => {
            if *dim == 0 {
                return Err(DataError::Feature("feature dim must be at least 1".into()));
            }
            let mut v = vec![0.0; *dim];
            for tok in tokenize(text) {
                v[(fnv1a64(tok.as_bytes()) % *dim as u64) as usize] += 1.0;
            }
            Ok(normalized(v))
        }
        FeatureProvider::SeededRandom { dim, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(node_key.as_bytes()));
            let v = (0..*dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            Ok(normalized(v))
        }
        FeatureProvider::ExternalFile { table, .. } => table
            .get(node_key)
            .cloned()
            .map(normalized)
            .ok_or_else(|| DataError::Feature(format!("no external feature for `{node_key}`"))),
    }
}
