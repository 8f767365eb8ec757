//! Full-batch training: hierarchical level schedule, corruption, encode,
//! remask, decode, masked cosine loss and Adam.

mod adam;
mod loss;
mod variant;

pub use adam::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use loss::{cosine_distance, reconstruction_loss, reconstruction_loss_on_tape};
pub use variant::{Full, NoCorruption, RandomMasking, SingleMask, Variant, VariantRegistry};

use crate::autodiff::{AutodiffError, Matrix, Tape, Var};
use crate::centrality::{node_scores, CentralityError, CentralityMethod, PowerIterConfig};
use crate::corruption::{apply_corruption, sample_node_mask, CorruptionError, NodeMask};
use crate::gat::{decode, encode, remask, Architecture, AttentionGraph, GatError, ModelParams, NOISE_PARAM};
use crate::graph::Graph;
use crate::masking::{dimension_importance, features_at_level, MaskSchedule, MaskingError};
use crate::rng::{stream_rng, Stream};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("zero-norm vector in cosine")]
    ZeroNorm,
    #[error("loss needs at least one noisy node")]
    EmptyNoisySet,
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error(transparent)]
    Masking(#[from] MaskingError),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Gat(#[from] GatError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

impl TrainError {
    fn is_numerical(&self) -> bool {
        matches!(
            self,
            TrainError::Autodiff(AutodiffError::NonFinite(_))
                | TrainError::Gat(GatError::Autodiff(AutodiffError::NonFinite(_)))
                | TrainError::Corruption(CorruptionError::Autodiff(AutodiffError::NonFinite(_)))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * (1 + cos(pi * epoch / epochs)) / 2`.
    Cosine,
}

impl LrSchedule {
    pub fn at(self, lr: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => lr,
            LrSchedule::Cosine => lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Fraction of the still-unmasked dimensions masked per round.
    pub pf: f64,
    /// Per-epoch probability that a node is noisy.
    pub pn: f64,
    /// Epochs between masking rounds.
    pub num: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub heads: usize,
    pub seed: u64,
    pub centrality: CentralityMethod,
    pub power_iter: PowerIterConfig,
    pub variant: String,
    /// Detach the reconstruction target from the noise row.
    pub stop_grad_target: bool,
    pub lr_schedule: LrSchedule,
    /// Report zero wall time so epoch records are byte-reproducible.
    pub strict: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pf: 0.1,
            pn: 0.5,
            num: 200,
            epochs: 500,
            lr: 0.001,
            weight_decay: 0.0,
            hidden: 64,
            heads: 4,
            seed: 0,
            centrality: CentralityMethod::InDegree,
            power_iter: PowerIterConfig::default(),
            variant: "full".to_string(),
            stop_grad_target: false,
            lr_schedule: LrSchedule::Constant,
            strict: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.num == 0 {
            return bad("num must be at least 1".into());
        }
        if !(self.pf > 0.0 && self.pf < 1.0) {
            return Err(MaskingError::RateOutOfRange(self.pf).into());
        }
        if !(0.0..=1.0).contains(&self.pn) {
            return Err(CorruptionError::RateOutOfRange(self.pn).into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        self.power_iter.validate()?;
        Ok(())
    }

    /// `floor((epochs - 1) / num)`.
    pub fn implied_rounds(&self) -> usize {
        (self.epochs.max(1) - 1) / self.num.max(1)
    }
}

/// Level used at each epoch under `variant`.
pub fn epoch_levels(epochs: usize, num: usize, variant: &dyn Variant) -> Vec<usize> {
    let rounds = variant.rounds((epochs.max(1) - 1) / num.max(1));
    (0..epochs).map(|e| variant.level(e, num, rounds)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub level: usize,
    pub loss: f64,
    pub noisy_count: usize,
    pub ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub variant: String,
    /// Dimension masking order actually used.
    pub mask_order: Vec<usize>,
    pub mask_counts: Vec<usize>,
    /// Trainable scalars, noise row included only when the variant corrupts.
    pub param_count: usize,
    pub checkpoint: Option<std::path::PathBuf>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    /// Mean loss over epochs `start..end` (clamped to the run).
    pub fn mean_loss(&self, start: usize, end: usize) -> Option<f64> {
        let end = end.min(self.records.len());
        (start < end).then(|| self.records[start..end].iter().map(|r| r.loss).sum::<f64>() / (end - start) as f64)
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serializes");
            writeln!(out, "{line}").expect("writing to a String");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassOptions {
    pub corrupt: bool,
    pub stop_grad_target: bool,
}

/// Every intermediate of one training forward pass.
pub struct ForwardPass {
    pub vars: BTreeMap<String, Var>,
    pub x_tilde: Var,
    pub h: Var,
    pub h_tilde: Var,
    pub z: Var,
    pub loss: Var,
}

/// Records corrupt, encode, remask, decode and the loss for features `x`.
/// Every parameter in `model.store` becomes a tape parameter, except the noise
/// row when `opts.corrupt` is false.
pub fn forward_pass(
    tape: &mut Tape,
    ag: &AttentionGraph,
    x: &Matrix,
    mask: &NodeMask,
    model: &ModelParams,
    opts: PassOptions,
) -> Result<ForwardPass, TrainError> {
    let store = if opts.corrupt {
        model.store.clone()
    } else {
        model.store.filtered(|n| n != NOISE_PARAM)
    };
    let vars = tape.params_from(&store)?;
    let xv = tape.constant(x.clone())?;
    let x_tilde = if opts.corrupt {
        let w = *vars
            .get(NOISE_PARAM)
            .ok_or_else(|| GatError::MissingParam(NOISE_PARAM.to_string()))?;
        apply_corruption(tape, xv, mask, w)?
    } else {
        xv
    };
    let h = encode(tape, ag, x_tilde, &model.arch, &vars)?;
    let h_tilde = remask(tape, h, mask)?;
    let z = decode(tape, ag, h_tilde, &model.arch, &vars)?;
    let target = if opts.stop_grad_target {
        tape.detach(x_tilde)?
    } else {
        x_tilde
    };
    let loss = reconstruction_loss_on_tape(tape, target, z, mask)?;
    Ok(ForwardPass {
        vars,
        x_tilde,
        h,
        h_tilde,
        z,
        loss,
    })
}

/// Builds the masking schedule the run will use.
pub fn plan_schedule(g: &Graph, cfg: &TrainConfig, variant: &dyn Variant) -> Result<MaskSchedule, TrainError> {
    let rounds = variant.rounds(cfg.implied_rounds());
    if rounds == 0 {
        return Ok(MaskSchedule::unmasked(g.n_dims()));
    }
    let scores = node_scores(g, cfg.centrality, &cfg.power_iter)?;
    let sd = dimension_importance(g, &scores)?;
    let order = variant.ordering().order(&sd, &mut stream_rng(cfg.seed, Stream::Permutation));
    Ok(MaskSchedule::from_order(order, cfg.pf, rounds)?)
}

pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<(ModelParams, TrainReport), TrainError> {
    train_with(g, cfg, &VariantRegistry::with_defaults())
}

pub fn train_with(
    g: &Graph,
    cfg: &TrainConfig,
    registry: &VariantRegistry,
) -> Result<(ModelParams, TrainReport), TrainError> {
    cfg.validate()?;
    let variant = registry.get(&cfg.variant)?;
    let schedule = plan_schedule(g, cfg, variant)?;
    let rounds = schedule.rounds();
    let ag = AttentionGraph::new(g);

    let arch = Architecture::new(g.n_dims(), cfg.hidden, cfg.heads)?;
    let mut model = ModelParams::init(arch, &mut stream_rng(cfg.seed, Stream::Init));
    let opts = PassOptions {
        corrupt: variant.corrupts(),
        stop_grad_target: cfg.stop_grad_target,
    };
    if !opts.corrupt {
        model.store.remove(NOISE_PARAM);
    }
    let mut mask_rng = stream_rng(cfg.seed, Stream::NodeMask);
    let mut adam = AdamState::new();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut current: Option<(usize, Matrix)> = None;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let level = variant.level(epoch, cfg.num, rounds);
        if current.as_ref().map(|(l, _)| *l) != Some(level) {
            current = Some((level, features_at_level(g, &schedule, level)?.matrix));
        }
        let x = &current.as_ref().expect("set above").1;
        let mask = sample_node_mask(g.n_nodes(), cfg.pn, &mut mask_rng)?;
        if mask.count() == 0 {
            return Err(CorruptionError::AllClean(cfg.pn).into());
        }

        let diverged = |e: TrainError| {
            if e.is_numerical() {
                TrainError::Diverged {
                    epoch,
                    detail: e.to_string(),
                }
            } else {
                e
            }
        };
        let mut tape = Tape::new();
        let pass = forward_pass(&mut tape, &ag, x, &mask, &model, opts).map_err(diverged)?;
        let loss = tape.scalar(pass.loss);
        if !loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                detail: format!("loss is {loss}"),
            });
        }
        let grads = tape.backward(pass.loss).map_err(|e| diverged(e.into()))?;
        let lr = cfg.lr_schedule.at(cfg.lr, epoch, cfg.epochs);
        adam_step(&mut model.store, &grads.params(), &mut adam, lr, cfg.weight_decay)?;
        if let Some((name, _)) = model.store.iter().find(|(_, m)| m.iter().any(|v| !v.is_finite())) {
            return Err(TrainError::Diverged {
                epoch,
                detail: format!("parameter {name} became non-finite"),
            });
        }

        records.push(EpochRecord {
            epoch,
            level,
            loss,
            noisy_count: mask.count(),
            ms: if cfg.strict { 0 } else { start.elapsed().as_millis() as u64 },
        });
    }

    let report = TrainReport {
        records,
        variant: variant.name().to_string(),
        mask_order: schedule.order().to_vec(),
        mask_counts: schedule.counts().to_vec(),
        param_count: model.store.n_scalars(),
        checkpoint: None,
    };
    Ok((model, report))
}
