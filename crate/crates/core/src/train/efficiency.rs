use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Timing, TrainReport};
use crate::model::Ablation;

/// Runs scoring below this F1 are flagged.
pub const DEFAULT_F1_FLOOR: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub label: String,
    pub layers: usize,
    pub ablation: Ablation,
    pub f1_positive: f64,
    pub f1_macro: f64,
    pub training_seconds: f64,
    pub below_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub f1_floor: f64,
    /// Fastest first.
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyReport {
    pub fn included(&self) -> impl Iterator<Item = &EfficiencyRow> {
        self.rows.iter().filter(|r| !r.below_floor)
    }

    pub fn table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(5);
        let mut out = format!("{:<width$}  K  ablation     F1      macro-F1  seconds\n", "model");
        for r in &self.rows {
            let ablation = serde_json::to_value(r.ablation).expect("ablation serializes");
            let _ = writeln!(
                out,
                "{:<width$}  {}  {:<11}  {:.4}  {:.4}    {:.3}{}",
                r.label,
                r.layers,
                ablation.as_str().unwrap_or_default(),
                r.f1_positive,
                r.f1_macro,
                r.training_seconds,
                if r.below_floor { "  (below floor)" } else { "" }
            );
        }
        out
    }
}

/// One row per run, using each run's best validation epoch.
pub fn efficiency_report(runs: &[(String, TrainReport, Timing)], f1_floor: f64) -> EfficiencyReport {
    let mut rows: Vec<EfficiencyRow> = runs
        .iter()
        .map(|(label, report, timing)| EfficiencyRow {
            label: label.clone(),
            layers: report.config.model.layers,
            ablation: report.config.model.ablation,
            f1_positive: report.best_validation.f1_positive,
            f1_macro: report.best_validation.f1_macro,
            training_seconds: timing.training_seconds,
            below_floor: report.best_validation.f1_positive < f1_floor,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.training_seconds
            .total_cmp(&b.training_seconds)
            .then_with(|| a.label.cmp(&b.label))
    });
    EfficiencyReport { f1_floor, rows }
}
