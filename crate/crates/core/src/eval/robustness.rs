use std::path::Path;

use serde::Serialize;

use super::{evaluate, MetricReport};
use crate::error::{Error, Result};
use crate::ingest::{inject_social_noise, Dataset};
use crate::trainer::{self, normalize_tensor, Model, TrainRunConfig};

/// Relative drop `(clean - noisy) / clean` in percent. NaN when `clean` is zero.
pub fn dec_percent(clean: f64, noisy: f64) -> f64 {
    if clean == 0.0 {
        return f64::NAN;
    }
    100.0 * (clean - noisy) / clean
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub ratio: f64,
    pub noise_edges: usize,
    pub hr1: f64,
    pub hr3: f64,
    pub ndcg3: f64,
    pub dec_hr1: f64,
    pub dec_hr3: f64,
    pub dec_ndcg3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTable {
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessTable {
    pub const CSV_HEADER: &'static str =
        "ratio,noise_edges,hr1,hr3,ndcg3,dec_hr1,dec_hr3,dec_ndcg3";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.ratio, r.noise_edges, r.hr1, r.hr3, r.ndcg3, r.dec_hr1, r.dec_hr3, r.dec_ndcg3
            ));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io("eval::RobustnessTable::write_csv", path, e))
    }

    pub fn row(&self, ratio: f64) -> Option<&RobustnessRow> {
        self.rows.iter().find(|r| r.ratio == ratio)
    }
}

/// Metrics of the best snapshot of a full run on `dataset`.
fn train_and_score(dataset: &Dataset, config: &TrainRunConfig) -> Result<MetricReport> {
    let result = trainer::run(dataset, config)?;
    if let Some(best) = &result.best {
        return Ok(best.metrics.clone());
    }
    let tensor = trainer::initial_tensor(&dataset.social, config)?;
    let slices = normalize_tensor(&tensor);
    let adj = crate::graph::symmetric_normalize(&dataset.train);
    let fwd = Model::new(&adj, &slices, config).forward(&result.final_state)?;
    evaluate(
        dataset,
        fwd.interest.users.view(),
        fwd.interest.items.view(),
    )
}

/// Trains on the clean dataset and on copies with `ratio * |E|` random social
/// edges injected, and reports each run's metrics with its drop relative to
/// the clean run.
pub fn robustness_harness(
    dataset: &Dataset,
    ratios: &[f64],
    config: &TrainRunConfig,
    noise_seed: u64,
) -> Result<RobustnessTable> {
    const OP: &str = "eval::robustness_harness";
    if let Some(bad) = ratios.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
        return Err(Error::config(
            OP,
            format!("noise ratio {bad} outside [0, 1)"),
        ));
    }
    let clean = train_and_score(dataset, config)?;
    let mut rows = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let (metrics, noise_edges) = if ratio == 0.0 {
            (clean.clone(), 0)
        } else {
            let (noisy, labels) = inject_social_noise(&dataset.social, ratio, noise_seed)?;
            (
                train_and_score(&dataset.with_social(noisy)?, config)?,
                labels.len(),
            )
        };
        rows.push(RobustnessRow {
            ratio,
            noise_edges,
            hr1: metrics.hr1,
            hr3: metrics.hr3,
            ndcg3: metrics.ndcg3,
            dec_hr1: dec_percent(clean.hr1, metrics.hr1),
            dec_hr3: dec_percent(clean.hr3, metrics.hr3),
            dec_ndcg3: dec_percent(clean.ndcg3, metrics.ndcg3),
        });
    }
    Ok(RobustnessTable { rows })
}
