//! Split, mini-batch training loop, metrics, checkpoints and efficiency reporting.

mod baseline;
mod checkpoint;
mod efficiency;
mod metrics;
mod split;
mod trainer;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use baseline::{logistic_baseline, BaselineConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use efficiency::{efficiency_report, EfficiencyReport, EfficiencyRow, DEFAULT_F1_FLOOR};
pub use metrics::{auc, evaluate_metrics, Metrics, DECISION_THRESHOLD};
pub use split::{split_dataset, Split, SplitMask};
pub use trainer::{
    config_hash, metrics_csv, predict, train_model, EpochRecord, Seeds, Timing, TrainConfig, TrainOutcome, TrainReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl TrainError {
    /// True for numeric failures as opposed to configuration or data problems.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TrainError::NonFinite(_)
                | TrainError::Tensor(TensorError::NonFinite { .. })
                | TrainError::Model(ModelError::Tensor(TensorError::NonFinite { .. }))
        )
    }
}
