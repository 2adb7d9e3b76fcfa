//! The training loop: batch sampling, curriculum annealing of the mass
//! weight, Adam, loss history and checkpoints.

mod adam;
mod objective;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use objective::{evaluate_loss, loss_and_grad};

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Surface;
use crate::network::FieldModel;
use crate::physics::{
    BoundaryPoint, BoundarySide, CollocationPoint, GrayScottParams, InitialCondition, InitialPoint,
    LossBatches, LossBreakdown, LossWeights, MassQuadrature,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("loss is not finite ({0})")]
    NonFiniteLoss(f64),
    #[error("gradient entry {index} is not finite")]
    NonFiniteGradient { index: usize },
    #[error("training diverged at epoch {epoch}")]
    Divergence {
        epoch: usize,
        last_good: Box<FieldModel>,
        history: LossHistory,
    },
    #[error("checkpoint callback failed: {0}")]
    Checkpoint(String),
}

/// Optimization schedule and batch sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_epochs: usize,
    pub collocation_batch: usize,
    pub bc_batch: usize,
    pub ic_batch: usize,
    pub lr: f64,
    pub adam_betas: [f64; 2],
    pub adam_eps: f64,
    /// Epochs over which the mass weight ramps from 0 to `lambda_max`.
    pub anneal_epochs: usize,
    pub lambda_max: f64,
    pub lambda_pde: f64,
    pub lambda_bc: f64,
    pub lambda_ic: f64,
    pub seed: u64,
    /// Checkpoint after every this many epochs (0 disables); the final
    /// state is always checkpointed.
    pub checkpoint_every: usize,
    /// Spatial nodes of the mass quadrature.
    pub mass_points: usize,
    /// Stratified time slices of the mass term per epoch.
    pub mass_slices: usize,
    /// Penalize the `V` balance as well.
    pub mass_include_v: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_epochs: 10_000,
            collocation_batch: 8192,
            bc_batch: 2048,
            ic_batch: 2048,
            lr: 1e-3,
            adam_betas: [0.9, 0.999],
            adam_eps: 1e-8,
            anneal_epochs: 5000,
            lambda_max: 1.0,
            lambda_pde: 1.0,
            lambda_bc: 10.0,
            lambda_ic: 10.0,
            seed: 42,
            checkpoint_every: 1000,
            mass_points: 4096,
            mass_slices: 8,
            mass_include_v: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |field, reason: &str| {
            Err(TrainError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        for (field, n) in [
            ("collocation_batch", self.collocation_batch),
            ("bc_batch", self.bc_batch),
            ("ic_batch", self.ic_batch),
            ("mass_points", self.mass_points),
            ("mass_slices", self.mass_slices),
        ] {
            if n == 0 {
                return err(field, "must be at least 1");
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return err("lr", "must be positive and finite");
        }
        if self.adam_betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return err("adam_betas", "each beta must lie in [0, 1)");
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return err("adam_eps", "must be positive and finite");
        }
        if self.anneal_epochs > self.n_epochs {
            return err("anneal_epochs", "must not exceed n_epochs");
        }
        self.base_weights(self.lambda_max)
            .validate()
            .map_err(|e| TrainError::Config {
                field: "lambda",
                reason: e.to_string(),
            })
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_betas[0],
            beta2: self.adam_betas[1],
            eps: self.adam_eps,
        }
    }

    /// Loss weights with the given mass weight.
    pub fn base_weights(&self, lambda_mass: f64) -> LossWeights {
        LossWeights {
            pde: self.lambda_pde,
            bc: self.lambda_bc,
            ic: self.lambda_ic,
            mass: lambda_mass,
        }
    }
}

/// `λ_max · min(1, epoch / anneal_epochs)`.
pub fn anneal_lambda(epoch: usize, config: &TrainConfig) -> f64 {
    if config.anneal_epochs == 0 {
        return config.lambda_max;
    }
    let frac = epoch as f64 / config.anneal_epochs as f64;
    config.lambda_max * frac.min(1.0)
}

/// Which part of the space-time domain a batch covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchKind {
    Interior,
    Boundary,
    Initial,
}

/// A sampled space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub u: f64,
    pub v: f64,
    pub t: f64,
    pub side: Option<BoundarySide>,
    /// Arclength position along `side`.
    pub s: f64,
}

/// Uniform samples over `[0,1]² × [0,T]`, the four edges, or `t = 0`.
pub fn sample_batch<R: Rng>(kind: BatchKind, n: usize, horizon: f64, rng: &mut R) -> Vec<SamplePoint> {
    (0..n)
        .map(|_| match kind {
            BatchKind::Interior => {
                let (u, v, t) = (rng.random(), rng.random(), rng.random::<f64>() * horizon);
                SamplePoint {
                    u,
                    v,
                    t,
                    side: None,
                    s: 0.0,
                }
            }
            BatchKind::Boundary => {
                let side = BoundarySide::ALL[rng.random_range(0..4)];
                let s: f64 = rng.random();
                let t = rng.random::<f64>() * horizon;
                let (u, v) = side.point(s);
                SamplePoint {
                    u,
                    v,
                    t,
                    side: Some(side),
                    s,
                }
            }
            BatchKind::Initial => SamplePoint {
                u: rng.random(),
                v: rng.random(),
                t: 0.0,
                side: None,
                s: 0.0,
            },
        })
        .collect()
}

/// The fixed ingredients of a training problem.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub surface: &'a dyn Surface,
    pub physics: &'a GrayScottParams,
    pub ic: &'a InitialCondition,
}

impl Problem<'_> {
    /// Fresh batches for one epoch.
    pub fn sample<R: Rng>(&self, config: &TrainConfig, horizon: f64, rng: &mut R) -> LossBatches {
        let collocation = sample_batch(BatchKind::Interior, config.collocation_batch, horizon, rng)
            .into_iter()
            .map(|p| CollocationPoint::new(self.surface, self.physics, p.u, p.v, p.t))
            .collect();
        let boundary = sample_batch(BatchKind::Boundary, config.bc_batch, horizon, rng)
            .into_iter()
            .map(|p| BoundaryPoint::new(self.surface, p.side.expect("edge point"), p.s, p.t))
            .collect();
        let initial = sample_batch(BatchKind::Initial, config.ic_batch, horizon, rng)
            .into_iter()
            .map(|p| InitialPoint::new(self.ic, p.u, p.v))
            .collect();
        let k = config.mass_slices;
        let mass_times = (0..k)
            .map(|s| (s as f64 + rng.random::<f64>()) / k as f64 * horizon)
            .collect();
        LossBatches {
            collocation,
            boundary,
            initial,
            mass_times,
        }
    }

    pub fn quadrature(&self, config: &TrainConfig) -> MassQuadrature {
        MassQuadrature::halton(self.surface, self.physics, config.mass_points, config.mass_include_v)
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub l_pde: f64,
    pub l_bc: f64,
    pub l_ic: f64,
    pub l_mass: f64,
    pub lambda_mass: f64,
    pub total: f64,
    pub wall_ms: f64,
}

impl LossRecord {
    pub fn new(epoch: usize, loss: &LossBreakdown, wall_ms: f64) -> Self {
        Self {
            epoch,
            l_pde: loss.l_pde,
            l_bc: loss.l_bc,
            l_ic: loss.l_ic,
            l_mass: loss.l_mass,
            lambda_mass: loss.weights.mass,
            total: loss.total,
            wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

pub const HISTORY_HEADER: &str = "epoch,l_pde,l_bc,l_ic,l_mass,lambda_mass,total,wall_ms";

/// Nine significant digits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    /// Write as CSV. With `wall_time` off the timing column is written as
    /// zero so that reruns produce identical files.
    pub fn write_csv<W: Write>(&self, mut w: W, wall_time: bool) -> std::io::Result<()> {
        writeln!(w, "{HISTORY_HEADER}")?;
        for r in &self.records {
            let ms = if wall_time { r.wall_ms } else { 0.0 };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.epoch,
                fmt_sig9(r.l_pde),
                fmt_sig9(r.l_bc),
                fmt_sig9(r.l_ic),
                fmt_sig9(r.l_mass),
                fmt_sig9(r.lambda_mass),
                fmt_sig9(r.total),
                fmt_sig9(ms)
            )?;
        }
        Ok(())
    }
}

/// Hooks called by [`train`].
pub trait TrainObserver {
    fn on_epoch(&mut self, _record: &LossRecord) {}

    /// Called with the number of completed epochs.
    fn on_checkpoint(&mut self, _epochs: usize, _model: &FieldModel) -> Result<(), String> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FieldModel,
    pub history: LossHistory,
    pub adam: AdamState,
}

/// Run the configured number of epochs.
///
/// Each epoch samples fresh batches, evaluates the loss and its parameter
/// gradient, and applies one Adam step. A step whose loss or gradient is
/// not finite is skipped; two in a row abort with the last good model.
pub fn train(
    mut model: FieldModel,
    problem: &Problem,
    config: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let quad = problem.quadrature(config);
    let adam_cfg = config.adam();
    let mut adam = AdamState::new(model.param_count());
    let mut history = LossHistory::default();
    let mut last_good = model.clone();
    let mut bad_streak = 0;

    for epoch in 0..config.n_epochs {
        let start = Instant::now();
        let batches = problem.sample(config, model.horizon, &mut rng);
        let weights = config.base_weights(anneal_lambda(epoch, config));
        let step = loss_and_grad(&model, &batches, &quad, problem.physics, &weights).and_then(
            |(loss, grad)| {
                model
                    .params
                    .update(|p| adam_step(p, &grad, &mut adam, &adam_cfg))?;
                Ok(loss)
            },
        );
        let loss = match step {
            Ok(loss) => {
                bad_streak = 0;
                last_good = model.clone();
                loss
            }
            Err(TrainError::NonFiniteLoss(_)) | Err(TrainError::NonFiniteGradient { .. }) => {
                bad_streak += 1;
                if bad_streak >= 2 {
                    return Err(TrainError::Divergence {
                        epoch,
                        last_good: Box::new(last_good),
                        history,
                    });
                }
                evaluate_loss(&model, &batches, &quad, problem.physics, &weights)
            }
            Err(e) => return Err(e),
        };
        let record = LossRecord::new(epoch, &loss, start.elapsed().as_secs_f64() * 1e3);
        observer.on_epoch(&record);
        history.records.push(record);
        let done = epoch + 1;
        let cadence = config.checkpoint_every > 0 && done % config.checkpoint_every == 0;
        if cadence || done == config.n_epochs {
            observer
                .on_checkpoint(done, &model)
                .map_err(TrainError::Checkpoint)?;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        adam,
    })
}
