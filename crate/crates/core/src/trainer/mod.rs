//! Adam optimization, the epoch loop with early stopping, and the outer
//! train / enhance / slide loop.

mod adam;
mod config;
mod model;

pub use adam::{adam_step, OptimizerState, ParamGradients, BETA1, BETA2, EPSILON};
pub use config::TrainRunConfig;
pub use model::{Forward, Model};

use std::path::Path;

use serde::Serialize;

use crate::denoise::{build_enhanced_slice, FusionResult};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricReport};
use crate::graph::{
    build_initial_tensor, symmetric_normalize, NormalizedAdjacency, SocialGraph, SocialTensor,
};
use crate::ingest::Dataset;
use crate::objective::{LossReport, TripletBatch, TripletSampler};
use crate::propagation::{AggMode, EmbeddingState, MlpAggregator};
use crate::rng::{self, streams, Rng};

/// One epoch: mean batch losses and the evaluation afterwards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRow {
    pub iteration: usize,
    /// Epoch counter over the whole run, from 0.
    pub step: usize,
    pub loss: LossReport,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub epochs: usize,
    pub best_hr3: f64,
    pub improved: bool,
    pub kept: usize,
    pub dropped: usize,
    pub added: usize,
}

/// Best evaluated state so far.
#[derive(Debug, Clone)]
pub struct BestSnapshot {
    pub state: EmbeddingState,
    pub metrics: MetricReport,
    pub iteration: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub epochs: Vec<EpochRow>,
    pub iterations: Vec<IterationRow>,
}

impl RunLog {
    pub const CSV_HEADER: &'static str =
        "iteration,step,l_rec,l_soc,l_omega1,l_omega2,l2,total,hr1,hr3,ndcg3";

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration,
                r.step,
                r.loss.csv_fields(),
                r.metrics.csv_fields()
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io("trainer::RunLog::write_csv", path, e))
    }

    /// Highest HR@3 among the logged epochs.
    pub fn max_hr3(&self) -> Option<f64> {
        self.epochs.iter().map(|r| r.metrics.hr3).reduce(f64::max)
    }
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Option<BestSnapshot>,
    pub final_state: EmbeddingState,
    pub tensor: SocialTensor,
    /// Fusion output of every iteration that enhanced the graph.
    pub enhancements: Vec<FusionResult>,
    pub log: RunLog,
}

impl RunResult {
    /// State to evaluate or export: the best snapshot, else the final state.
    pub fn best_state(&self) -> &EmbeddingState {
        self.best.as_ref().map_or(&self.final_state, |b| &b.state)
    }

    /// JSON summary: best metrics, iteration rows and the config.
    pub fn summary_json(&self, config: &TrainRunConfig) -> String {
        let best = self.best.as_ref().map(|b| {
            serde_json::json!({
                "iteration": b.iteration,
                "step": b.step,
                "metrics": b.metrics,
            })
        });
        let value = serde_json::json!({
            "best": best,
            "iterations": self.log.iterations,
            "epochs": self.log.epochs.len(),
            "seed": config.seed,
            "config": config,
        });
        serde_json::to_string_pretty(&value).expect("summary serializes")
    }
}

/// Fresh parameters for `dataset` under `config`.
pub fn initial_state(dataset: &Dataset, config: &TrainRunConfig) -> Result<EmbeddingState> {
    let state = EmbeddingState::init(
        dataset.num_users(),
        dataset.num_items(),
        config.dim,
        config.init_std,
        config.seed,
    )?;
    Ok(match config.agg {
        AggMode::Mean => state,
        AggMode::Mlp => {
            state.with_aggregator(MlpAggregator::identity(config.dim, config.effective_tau()))
        }
    })
}

/// Initial tensor: `tau - 1` perturbed copies and the observed graph, or the
/// observed graph alone when the tensor is disabled.
pub fn initial_tensor(social: &SocialGraph, config: &TrainRunConfig) -> Result<SocialTensor> {
    if config.use_tensor {
        build_initial_tensor(social, config.tau, config.perturb_prob, config.seed)
    } else {
        SocialTensor::from_slices(vec![social.clone()], 0)
    }
}

pub fn normalize_tensor(tensor: &SocialTensor) -> Vec<NormalizedAdjacency> {
    tensor.slices().map(symmetric_normalize).collect()
}

fn batch_dump(batch: &TripletBatch) -> Box<Vec<(usize, usize, usize)>> {
    Box::new(
        batch
            .items
            .iter()
            .chain(&batch.social)
            .map(|t| (t.anchor, t.positive, t.negative))
            .collect(),
    )
}

fn mean_report(sum: LossReport, batches: usize) -> LossReport {
    let k = batches.max(1) as f64;
    LossReport {
        rec: sum.rec / k,
        soc: sum.soc / k,
        social_coord: sum.social_coord / k,
        interest_coord: sum.interest_coord / k,
        l2: sum.l2 / k,
        total: sum.total / k,
    }
}

/// Mutable training state threaded through iterations.
pub struct TrainSession<'d> {
    pub dataset: &'d Dataset,
    pub config: TrainRunConfig,
    pub state: EmbeddingState,
    pub optimizer: OptimizerState,
    pub best: Option<BestSnapshot>,
    pub log: RunLog,
    interactions: NormalizedAdjacency,
    rng: Rng,
}

impl<'d> TrainSession<'d> {
    pub fn new(dataset: &'d Dataset, config: TrainRunConfig) -> Result<Self> {
        config.validate()?;
        let state = initial_state(dataset, &config)?;
        Ok(Self::with_state(dataset, config, state))
    }

    pub fn with_state(dataset: &'d Dataset, config: TrainRunConfig, state: EmbeddingState) -> Self {
        Self {
            dataset,
            optimizer: OptimizerState::new(&state),
            interactions: symmetric_normalize(&dataset.train),
            rng: rng::seeded(config.seed, streams::SAMPLER),
            config,
            state,
            best: None,
            log: RunLog::default(),
        }
    }

    pub fn interactions(&self) -> &NormalizedAdjacency {
        &self.interactions
    }

    /// Runs up to `epochs_per_iteration` epochs on `tensor`. Returns whether
    /// the best HR@3 improved.
    pub fn train_iteration(&mut self, tensor: &SocialTensor, iteration: usize) -> Result<bool> {
        const OP: &str = "trainer::train_iteration";
        if tensor.tau() != self.config.effective_tau() {
            return Err(Error::InvalidState {
                op: OP,
                msg: format!(
                    "tensor holds {} slices, config expects {}",
                    tensor.tau(),
                    self.config.effective_tau()
                ),
            });
        }
        if self.config.reset_optimizer {
            self.optimizer = OptimizerState::new(&self.state);
        }
        let slices = normalize_tensor(tensor);
        let model = Model::new(&self.interactions, &slices, &self.config);
        let sampler = TripletSampler::new(&self.dataset.train, tensor.newest())?;
        let batches = self
            .dataset
            .train
            .num_edges()
            .div_ceil(self.config.batch_size)
            .max(1);

        let mut improved = false;
        let mut stale = 0;
        for _ in 0..self.config.epochs_per_iteration {
            let mut sum = LossReport::default();
            for _ in 0..batches {
                let batch = sampler.sample(self.config.batch_size, &mut self.rng);
                let (report, grads) = model.loss_and_gradients(&self.state, &batch)?;
                sum.accumulate(&report);
                adam_step(
                    &mut self.state,
                    &grads,
                    &mut self.optimizer,
                    self.config.learning_rate,
                )
                .map_err(|e| match e {
                    Error::NonFinite { param, step, .. } => Error::NonFinite {
                        param,
                        step,
                        batch: Some(batch_dump(&batch)),
                    },
                    other => other,
                })?;
                if !self.state.is_finite() {
                    return Err(Error::NonFinite {
                        param: "state",
                        step: self.optimizer.step(),
                        batch: Some(batch_dump(&batch)),
                    });
                }
            }
            let fwd = model.forward(&self.state)?;
            let metrics = evaluate(
                self.dataset,
                fwd.interest.users.view(),
                fwd.interest.items.view(),
            )?;
            let step = self.log.epochs.len();
            log::info!(
                "iteration {iteration} epoch {step}: loss {:.5} hr@3 {:.4} ndcg@3 {:.4}",
                sum.total / batches as f64,
                metrics.hr3,
                metrics.ndcg3
            );
            if self
                .best
                .as_ref()
                .is_none_or(|b| metrics.hr3 > b.metrics.hr3)
            {
                self.best = Some(BestSnapshot {
                    state: self.state.clone(),
                    metrics: metrics.clone(),
                    iteration,
                    step,
                });
                improved = true;
                stale = 0;
            } else {
                stale += 1;
            }
            self.log.epochs.push(EpochRow {
                iteration,
                step,
                loss: mean_report(sum, batches),
                metrics,
            });
            if stale >= self.config.patience {
                log::info!(
                    "iteration {iteration}: no improvement for {stale} epochs, stopping early"
                );
                break;
            }
        }
        Ok(improved)
    }

    /// Enhanced replacement for the newest slice, from the current embeddings.
    pub fn enhance(&self, tensor: &SocialTensor) -> Result<FusionResult> {
        let slices = normalize_tensor(tensor);
        let model = Model::new(&self.interactions, &slices, &self.config);
        let fwd = model.forward(&self.state)?;
        build_enhanced_slice(
            fwd.interest.users.view(),
            fwd.social.users.view(),
            tensor.newest(),
            self.config.prior,
            self.config.symmetrize_union,
        )
    }
}

/// What an observer sees after each outer iteration.
#[derive(Debug)]
pub struct IterationEvent<'a> {
    /// From 1.
    pub iteration: usize,
    /// Tensor after the slide (unchanged when enhancement is off).
    pub tensor: &'a SocialTensor,
    pub fusion: Option<&'a FusionResult>,
    pub state: &'a EmbeddingState,
    pub log: &'a RunLog,
}

pub fn run(dataset: &Dataset, config: &TrainRunConfig) -> Result<RunResult> {
    run_with(dataset, config, |_| Ok(()))
}

/// Builds the initial tensor, then repeats train, enhance, slide until
/// `max_iterations` or until the best HR@3 has not moved for `patience`
/// iterations.
pub fn run_with<F>(dataset: &Dataset, config: &TrainRunConfig, mut observer: F) -> Result<RunResult>
where
    F: FnMut(&IterationEvent<'_>) -> Result<()>,
{
    let mut session = TrainSession::new(dataset, config.clone())?;
    let mut tensor = initial_tensor(&dataset.social, config)?;
    let mut enhancements = Vec::new();
    let mut stale = 0;

    for iteration in 1..=config.max_iterations {
        let first = session.log.epochs.len();
        let improved = session.train_iteration(&tensor, iteration)?;
        let (mut kept, mut dropped, mut added) = (0, 0, 0);
        if config.denoise {
            let fusion = session.enhance(&tensor)?;
            (kept, dropped, added) = (fusion.kept(), fusion.dropped(), fusion.added());
            tensor = tensor.slide_window(fusion.graph.clone())?;
            enhancements.push(fusion);
        }
        session.log.iterations.push(IterationRow {
            iteration,
            epochs: session.log.epochs.len() - first,
            best_hr3: session.best.as_ref().map_or(0.0, |b| b.metrics.hr3),
            improved,
            kept,
            dropped,
            added,
        });
        observer(&IterationEvent {
            iteration,
            tensor: &tensor,
            fusion: if config.denoise {
                enhancements.last()
            } else {
                None
            },
            state: &session.state,
            log: &session.log,
        })?;
        stale = if improved { 0 } else { stale + 1 };
        if stale >= config.patience {
            log::info!(
                "no improvement for {stale} iterations, stopping after iteration {iteration}"
            );
            break;
        }
    }

    Ok(RunResult {
        best: session.best,
        final_state: session.state,
        tensor,
        enhancements,
        log: session.log,
    })
}
