use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

/// Per labeled user assignment, aligned with the labeled-user list it was drawn for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMask {
    pub assignment: Vec<Split>,
    pub seed: u64,
}

impl SplitMask {
    pub fn indices(&self, which: Split) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == which)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, which: Split) -> usize {
        self.assignment.iter().filter(|s| **s == which).count()
    }
}

/// Uniform random partition with `round(ratio * n)` training users, kept in `[1, n - 1]`.
pub fn split_dataset(users: usize, ratio: f64, seed: u64) -> Result<SplitMask, TrainError> {
    if users < 2 {
        return Err(TrainError::Config(format!(
            "need at least 2 labeled users to split, got {users}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrainError::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let train = ((ratio * users as f64).round() as usize).clamp(1, users - 1);
    let mut order: Vec<usize> = (0..users).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![Split::Validation; users];
    for &i in &order[..train] {
        assignment[i] = Split::Train;
    }
    Ok(SplitMask { assignment, seed })
}
