//! Training the shared encoder on radar/lidar triplets.
//!
//! Every step draws a batch of triplets by planar distance, runs the six
//! descriptors of each triplet through the network and the spectral signature,
//! and backpropagates the chosen loss into the parameters with Adam. Parameters
//! and optimizer moments are rounded to single precision after every update so
//! a checkpoint written mid-run resumes bit-for-bit.

mod adam;
mod loss;
mod sampler;

use std::fmt;
use std::str::FromStr;

pub use adam::{adam_step, AdamState};
pub use loss::{combined_loss, joint_triplet_loss, slot, transform_loss, triplet_loss, LossGrad, Role};
pub use sampler::{sample_triplets, TripletSample, TripletSampler};

use crate::dataset::Location;
use crate::descriptor::Modality;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::net::{Architecture, ForwardCache, NetParams, ParamGrads};
use crate::rng::{derive_seed, keyed_rng};
use crate::spectral::{SignatureTrace, SpectralEngine, SpectralSignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Triplet hinge averaged over every radar/lidar role assignment.
    Joint,
    /// Joint hinge plus a weighted radar-to-lidar distance at each place.
    Combined,
    /// One network per modality, each trained on its own triplets only.
    Separate,
}

impl LossMode {
    pub fn name(self) -> &'static str {
        match self {
            LossMode::Joint => "joint",
            LossMode::Combined => "combined",
            LossMode::Separate => "separate",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(LossMode::Joint),
            "combined" => Ok(LossMode::Combined),
            "separate" => Ok(LossMode::Separate),
            other => Err(Error::InvalidConfig(format!("unknown loss mode {other:?} (joint, combined, separate)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    /// Weight of the cross-modal term in [`LossMode::Combined`].
    pub alpha: f64,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Triplets drawn per epoch; the step count is this over the batch size.
    pub samples_per_epoch: usize,
    pub d_pos: f64,
    pub d_neg: f64,
    pub loss_mode: LossMode,
    /// Separate radar and lidar networks. Always on in [`LossMode::Separate`].
    pub two_networks: bool,
    pub arch: Architecture,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 1.0,
            alpha: 0.2,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            batch_size: 16,
            epochs: 6,
            samples_per_epoch: 1400,
            d_pos: 3.0,
            d_neg: 25.0,
            loss_mode: LossMode::Joint,
            two_networks: false,
            arch: Architecture::standard(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.epochs > 0 && self.samples_per_epoch < self.batch_size {
            return bad(format!(
                "samples_per_epoch ({}) is smaller than one batch ({})",
                self.samples_per_epoch, self.batch_size
            ));
        }
        if !(self.d_pos >= 0.0 && self.d_pos < self.d_neg) {
            return bad(format!("need 0 <= d_pos < d_neg, got {} and {}", self.d_pos, self.d_neg));
        }
        if self.arch.widths.contains(&0) {
            return bad("architecture widths must be positive".into());
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.samples_per_epoch / self.batch_size.max(1)
    }

    pub fn uses_two_networks(&self) -> bool {
        self.two_networks || self.loss_mode == LossMode::Separate
    }

    /// Learning rate in effect during `epoch` (zero-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}

/// One encoder for both modalities, or one per modality.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Shared(NetParams),
    Dual { radar: NetParams, lidar: NetParams },
}

impl Model {
    /// Fresh parameters; the two networks of a dual model get distinct seeds.
    pub fn init(seed: u64, arch: Architecture, two_networks: bool) -> Self {
        if two_networks {
            Model::Dual {
                radar: NetParams::init(derive_seed(seed, &[INIT_STREAM, 1]), arch),
                lidar: NetParams::init(derive_seed(seed, &[INIT_STREAM, 2]), arch),
            }
        } else {
            Model::Shared(NetParams::init(derive_seed(seed, &[INIT_STREAM, 0]), arch))
        }
    }

    pub fn from_nets(mut nets: Vec<NetParams>) -> Result<Self> {
        match nets.len() {
            1 => Ok(Model::Shared(nets.remove(0))),
            2 => {
                let lidar = nets.remove(1);
                let radar = nets.remove(0);
                if radar.arch != lidar.arch {
                    return Err(Error::ShapeMismatch("radar and lidar networks differ in architecture".into()));
                }
                Ok(Model::Dual { radar, lidar })
            }
            n => Err(Error::InvalidConfig(format!("a model holds one or two networks, not {n}"))),
        }
    }

    pub fn arch(&self) -> Architecture {
        self.nets()[0].arch
    }

    /// Networks in storage order: the shared one, or radar then lidar.
    pub fn nets(&self) -> Vec<&NetParams> {
        match self {
            Model::Shared(n) => vec![n],
            Model::Dual { radar, lidar } => vec![radar, lidar],
        }
    }

    fn nets_mut(&mut self) -> Vec<&mut NetParams> {
        match self {
            Model::Shared(n) => vec![n],
            Model::Dual { radar, lidar } => vec![radar, lidar],
        }
    }

    /// Index into [`Model::nets`] of the network serving `modality`.
    pub fn net_index(&self, modality: Modality) -> usize {
        match (self, modality) {
            (Model::Shared(_), _) | (Model::Dual { .. }, Modality::Radar) => 0,
            (Model::Dual { .. }, Modality::Lidar) => 1,
        }
    }

    pub fn net(&self, modality: Modality) -> &NetParams {
        self.nets()[self.net_index(modality)]
    }

    pub fn signature(&self, modality: Modality, descriptor: &Grid) -> Result<SpectralSignature> {
        SpectralEngine::standard().signature(&self.net(modality).embed(descriptor)?)
    }

    /// Signatures of every location's descriptor of one modality.
    pub fn signatures(&self, locations: &[Location], modality: Modality) -> Result<Vec<SpectralSignature>> {
        locations.iter().map(|l| self.signature(modality, l.descriptor(modality))).collect()
    }
}

const INIT_STREAM: u64 = 0x1417;
const SAMPLER_STREAM: u64 = 0x5A3F;

/// Which descriptors of a triplet enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// All six descriptors under the joint hinge.
    Joint,
    /// Only one modality's three descriptors under the plain hinge.
    Single(Modality),
}

/// Mean loss over a batch and its gradient for each network of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub loss: f64,
    pub grads: Vec<ParamGrads>,
}

struct Pass {
    net: usize,
    cache: ForwardCache,
    trace: SignatureTrace,
}

fn run(model: &Model, engine: &SpectralEngine, modality: Modality, input: &Grid) -> Result<Pass> {
    let net = model.net_index(modality);
    let (embedding, cache) = model.nets()[net].forward(input)?;
    let trace = engine.signature_traced(&embedding)?;
    Ok(Pass { net, cache, trace })
}

/// Loss and parameter gradients of one batch. `alpha` adds the cross-modal
/// term over all three places of each triplet (joint pairing only).
pub fn batch_gradients(
    model: &Model,
    data: &[Location],
    triplets: &[TripletSample],
    pairing: Pairing,
    margin: f64,
    alpha: Option<f64>,
) -> Result<BatchGradients> {
    if triplets.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let engine = SpectralEngine::standard();
    let nets = model.nets();
    let mut grads: Vec<ParamGrads> = nets.iter().map(|n| ParamGrads::zeros(&n.arch)).collect();
    let mut total = 0.0;
    let get = |i: usize| {
        data.get(i).ok_or(Error::IndexOutOfRange { index: i, len: data.len() })
    };
    for t in triplets {
        let places = [get(t.anchor)?, get(t.positive)?, get(t.negative)?];
        let (passes, lg) = match pairing {
            Pairing::Joint => {
                let mut passes = Vec::with_capacity(6);
                for place in places {
                    passes.push(run(model, engine, Modality::Radar, place.descriptor(Modality::Radar))?);
                    passes.push(run(model, engine, Modality::Lidar, place.descriptor(Modality::Lidar))?);
                }
                let s: Vec<&Grid> = passes.iter().map(|p| &p.trace.signature.values).collect();
                let joint = joint_triplet_loss([s[0], s[1], s[2], s[3], s[4], s[5]], margin)?;
                let lg = match alpha {
                    Some(a) => {
                        let pairs: Vec<(&Grid, &Grid)> = s.chunks(2).map(|c| (c[0], c[1])).collect();
                        combined_loss(&joint, &transform_loss(&pairs)?, a)?
                    }
                    None => joint,
                };
                (passes, lg)
            }
            Pairing::Single(m) => {
                let passes = places.iter().map(|p| run(model, engine, m, p.descriptor(m))).collect::<Result<Vec<_>>>()?;
                let s: Vec<&Grid> = passes.iter().map(|p| &p.trace.signature.values).collect();
                let lg = triplet_loss(s[0], s[1], s[2], margin)?;
                (passes, lg)
            }
        };
        total += lg.value;
        for (pass, g) in passes.iter().zip(&lg.grads) {
            if g.is_all_zero() {
                continue;
            }
            let g_embed = engine.signature_backward(&pass.trace, g)?;
            let (pg, _) = nets[pass.net].backward(&pass.cache, &g_embed)?;
            grads[pass.net].add_assign(&pg);
        }
    }
    let scale = 1.0 / triplets.len() as f64;
    grads.iter_mut().for_each(|g| g.scale(scale));
    Ok(BatchGradients { loss: total * scale, grads })
}

/// Loss and gradients of one batch under the configured mode.
pub fn step_gradients(model: &Model, data: &[Location], triplets: &[TripletSample], cfg: &TrainConfig) -> Result<BatchGradients> {
    match cfg.loss_mode {
        LossMode::Joint => batch_gradients(model, data, triplets, Pairing::Joint, cfg.margin, None),
        LossMode::Combined => batch_gradients(model, data, triplets, Pairing::Joint, cfg.margin, Some(cfg.alpha)),
        LossMode::Separate => {
            let r = batch_gradients(model, data, triplets, Pairing::Single(Modality::Radar), cfg.margin, None)?;
            let l = batch_gradients(model, data, triplets, Pairing::Single(Modality::Lidar), cfg.margin, None)?;
            let mut grads = r.grads;
            for (g, h) in grads.iter_mut().zip(&l.grads) {
                g.add_assign(h);
            }
            Ok(BatchGradients { loss: 0.5 * (r.loss + l.loss), grads })
        }
    }
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: u64,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("step,epoch,loss,lr\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.step, r.epoch, r.loss, r.lr));
    }
    s
}

/// Everything needed to continue or reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: Model,
    /// One optimizer per network, in [`Model::nets`] order.
    pub optimizers: Vec<AdamState>,
    pub step: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub seed: u64,
    pub history: Vec<HistoryRow>,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig) -> Self {
        let model = Model::init(cfg.seed, cfg.arch, cfg.uses_two_networks());
        let optimizers = model.nets().iter().map(|n| AdamState::new(n.parameter_count())).collect();
        Self { model, optimizers, step: 0, epoch: 0, seed: cfg.seed, history: Vec::new() }
    }

    /// Applies one set of per-network gradients at learning rate `lr`.
    pub fn apply(&mut self, grads: &[ParamGrads], lr: f64) -> Result<()> {
        let nets = self.model.nets_mut();
        if grads.len() != nets.len() || self.optimizers.len() != nets.len() {
            return Err(Error::ShapeMismatch(format!("{} gradient sets for {} networks", grads.len(), nets.len())));
        }
        // Check all networks first so a failure leaves the state untouched.
        let flat_grads: Vec<Vec<f64>> = grads.iter().map(ParamGrads::flat_values).collect();
        for g in &flat_grads {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(i));
            }
        }
        for ((net, g), opt) in nets.into_iter().zip(&flat_grads).zip(&mut self.optimizers) {
            let mut p = net.flat_values();
            adam_step(&mut p, g, opt, lr)?;
            p.iter_mut().for_each(|v| *v = *v as f32 as f64);
            opt.round_to_f32();
            net.set_flat(&p)?;
        }
        Ok(())
    }
}

/// Trains from scratch, calling `on_epoch` after every completed epoch.
pub fn train_with(
    data: &[Location],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&TrainState) -> Result<()>,
) -> Result<TrainState> {
    cfg.validate()?;
    let mut state = TrainState::new(cfg);
    if cfg.epochs == 0 {
        return Ok(state);
    }
    let poses: Vec<_> = data.iter().map(|l| l.pose).collect();
    let sampler = TripletSampler::new(&poses, cfg.d_pos, cfg.d_neg)?;
    let mut rng = keyed_rng(cfg.seed, &[SAMPLER_STREAM]);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        for _ in 0..cfg.steps_per_epoch() {
            let batch = sampler.sample(cfg.batch_size, &mut rng);
            let bg = step_gradients(&state.model, data, &batch, cfg)?;
            state.apply(&bg.grads, lr)?;
            state.step += 1;
            state.history.push(HistoryRow { step: state.step, epoch, loss: bg.loss, lr });
        }
        state.epoch = epoch + 1;
        on_epoch(&state)?;
    }
    Ok(state)
}

pub fn train(data: &[Location], cfg: &TrainConfig) -> Result<TrainState> {
    train_with(data, cfg, |_| Ok(()))
}
