use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Metrics, TrainConfig, TrainOutcome};
use crate::data::{read_json, write_json, DataError};
use crate::model::ModelParams;

pub const CHECKPOINT_FORMAT: u32 = 1;

/// Best parameters of a run together with the config that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub best_epoch: usize,
    pub validation: Metrics,
    pub params: ModelParams,
    /// Arguments of the command that wrote the checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT,
            config: outcome.report.config.clone(),
            best_epoch: outcome.report.best_epoch,
            validation: outcome.report.best_validation,
            params: outcome.params.clone(),
            run: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_json(path, self)
    }

    /// Loads and checks the format version and every parameter shape.
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let ck: Self = read_json(path)?;
        if ck.format_version != CHECKPOINT_FORMAT {
            return Err(DataError::Checkpoint(format!(
                "format version {} is not {CHECKPOINT_FORMAT}",
                ck.format_version
            )));
        }
        ck.params
            .check(&ck.config.model)
            .map_err(|e| DataError::Checkpoint(e.to_string()))?;
        Ok(ck)
    }
}
