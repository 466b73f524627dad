//! Variational autoencoder with arbitrary conditioning.
//!
//! Three networks share one column layout:
//! * proposal `q(z | x, b)` sees every known value,
//! * prior `p(z | x_obs, b)` sees only the observed part,
//! * decoder `p(x_hidden | z, x_obs, b)` emits two outputs per column.
//!
//! Continuous and binary columns are modelled as Gaussians (mean, softplus
//! scale); one-hot groups use the first output of each member as a logit.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nn::Mlp;
use super::{complete, known_columns, present_color_slots, validate_request_mask, with_layout, Imputer, Normalizer};
use crate::error::ModelError;
use crate::features::{FeatureKind, FeatureVector, Layout};

pub const CHECKPOINT_FORMAT: &str = "palettizer-vaeac/1";

const LATENT_MIN_SD: f64 = 1e-3;
// In standardized units; a smaller floor lets near-constant columns
// dominate the shared layers with 1/sd^3 gradient spikes.
const DECODER_MIN_SD: f64 = 0.1;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Column kinds plus the member columns of every one-hot group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub kinds: Vec<FeatureKind>,
    pub groups: Vec<Vec<usize>>,
}

impl ColumnSpec {
    pub fn new(kinds: Vec<FeatureKind>) -> Self {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, k) in kinds.iter().enumerate() {
            if let FeatureKind::Categorical { group } = k {
                groups.entry(*group).or_default().push(c);
            }
        }
        Self {
            kinds,
            groups: groups.into_values().collect(),
        }
    }

    pub fn from_layout(layout: &Layout) -> Self {
        Self::new(layout.kinds())
    }

    pub fn width(&self) -> usize {
        self.kinds.len()
    }
}

/// One minibatch in normalized units. `known`, `hidden` are 0/1 matrices;
/// the loss covers entries that are both. `eps` is the latent noise.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub known: Array2<f64>,
    pub hidden: Array2<f64>,
    pub eps: Array2<f64>,
}

/// Per-item averages over a batch. `loss = recon + kl = -ELBO`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
    /// Smallest per-item KL in the batch.
    pub min_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeacNetwork {
    pub columns: ColumnSpec,
    pub latent: usize,
    pub proposal: Mlp,
    pub prior: Mlp,
    pub decoder: Mlp,
}

impl VaeacNetwork {
    pub fn new<R: Rng>(columns: ColumnSpec, hidden: &[usize], latent: usize, rng: &mut R) -> Self {
        let w = columns.width();
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend_from_slice(hidden);
            s.push(output);
            s
        };
        let proposal = Mlp::new(&sizes(2 * w, 2 * latent), rng);
        let prior = Mlp::new(&sizes(2 * w, 2 * latent), rng);
        let decoder = Mlp::new(&sizes(latent + 2 * w, 2 * w), rng);
        Self {
            columns,
            latent,
            proposal,
            prior,
            decoder,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.width()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            columns: self.columns.clone(),
            latent: self.latent,
            proposal: self.proposal.zeros_like(),
            prior: self.prior.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.proposal
            .params()
            .chain(self.prior.params())
            .chain(self.decoder.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.proposal
            .params_mut()
            .chain(self.prior.params_mut())
            .chain(self.decoder.params_mut())
    }

    pub fn param_count(&self) -> usize {
        self.proposal.param_count() + self.prior.param_count() + self.decoder.param_count()
    }

    pub fn loss(&self, batch: &Batch) -> BatchLoss {
        self.evaluate(batch, None)
    }

    /// Loss plus its gradient, accumulated into `grad`.
    pub fn loss_and_grad(&self, batch: &Batch, grad: &mut VaeacNetwork) -> BatchLoss {
        self.evaluate(batch, Some(grad))
    }

    /// Negative log-likelihood of the known, hidden entries under decoder
    /// output `d`, with its gradient w.r.t. `d` scaled by `scale`.
    fn reconstruction(&self, b: &Batch, d: &Array2<f64>, scale: f64) -> (f64, Array2<f64>) {
        let n = b.x.nrows();
        let w = self.width();
        let mut dd = Array2::zeros((n, 2 * w));
        let mut recon = 0.0;
        for i in 0..n {
            for c in 0..w {
                if matches!(self.columns.kinds[c], FeatureKind::Categorical { .. }) {
                    continue;
                }
                if b.known[[i, c]] * b.hidden[[i, c]] < 0.5 {
                    continue;
                }
                let (mu, raw) = (d[[i, 2 * c]], d[[i, 2 * c + 1]]);
                let sd = softplus(raw) + DECODER_MIN_SD;
                let r = b.x[[i, c]] - mu;
                recon += 0.5 * LN_2PI + sd.ln() + r * r / (2.0 * sd * sd);
                dd[[i, 2 * c]] = -r / (sd * sd) * scale;
                dd[[i, 2 * c + 1]] = (1.0 / sd - r * r / (sd * sd * sd)) * sigmoid(raw) * scale;
            }
            for g in &self.columns.groups {
                if !g.iter().any(|&c| b.known[[i, c]] * b.hidden[[i, c]] > 0.5) {
                    continue;
                }
                let max = g.iter().map(|&c| d[[i, 2 * c]]).fold(f64::MIN, f64::max);
                let lse = max + g.iter().map(|&c| (d[[i, 2 * c]] - max).exp()).sum::<f64>().ln();
                let total: f64 = g.iter().map(|&c| b.x[[i, c]]).sum();
                for &c in g {
                    let logit = d[[i, 2 * c]];
                    recon += b.x[[i, c]] * (lse - logit);
                    dd[[i, 2 * c]] = ((logit - lse).exp() * total - b.x[[i, c]]) * scale;
                }
            }
        }
        (recon, dd)
    }

    fn evaluate(&self, b: &Batch, grad: Option<&mut VaeacNetwork>) -> BatchLoss {
        let n = b.x.nrows();
        let l = self.latent;
        let inv_n = 1.0 / n as f64;
        let xk = &b.x * &b.known;
        let xo = &b.x * &b.hidden.mapv(|h| 1.0 - h);
        let cat = |parts: &[&Array2<f64>]| {
            let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
            concatenate(Axis(1), &views).expect("batch parts share rows")
        };
        let (q, tq) = self.proposal.forward_traced(&cat(&[&xk, &b.hidden]));
        let (p, tp) = self.prior.forward_traced(&cat(&[&xo, &b.hidden]));

        let mut z = Array2::zeros((n, l));
        let mut dq = Array2::zeros((n, 2 * l));
        let mut dp = Array2::zeros((n, 2 * l));
        let mut kl_total = 0.0;
        let mut min_kl = f64::INFINITY;
        for i in 0..n {
            let mut kl_i = 0.0;
            for j in 0..l {
                let (mq, rq) = (q[[i, j]], q[[i, l + j]]);
                let (mp, rp) = (p[[i, j]], p[[i, l + j]]);
                let sq = softplus(rq) + LATENT_MIN_SD;
                let sp = softplus(rp) + LATENT_MIN_SD;
                z[[i, j]] = mq + sq * b.eps[[i, j]];
                let dm = mq - mp;
                let e2 = sq * sq + dm * dm;
                kl_i += (sp / sq).ln() + e2 / (2.0 * sp * sp) - 0.5;
                dq[[i, j]] = dm / (sp * sp) * inv_n;
                dp[[i, j]] = -dm / (sp * sp) * inv_n;
                dq[[i, l + j]] = (-1.0 / sq + sq / (sp * sp)) * sigmoid(rq) * inv_n;
                dp[[i, l + j]] = (1.0 / sp - e2 / (sp * sp * sp)) * sigmoid(rp) * inv_n;
            }
            kl_total += kl_i;
            min_kl = min_kl.min(kl_i);
        }

        let (d, td) = self.decoder.forward_traced(&cat(&[&z, &xo, &b.hidden]));
        let (recon, dd) = self.reconstruction(b, &d, inv_n);

        if let Some(grad) = grad {
            let d_in = self.decoder.backward(&td, dd, &mut grad.decoder);
            for i in 0..n {
                for j in 0..l {
                    let dz = d_in[[i, j]];
                    dq[[i, j]] += dz;
                    dq[[i, l + j]] += dz * b.eps[[i, j]] * sigmoid(q[[i, l + j]]);
                }
            }
            self.proposal.backward(&tq, dq, &mut grad.proposal);
            self.prior.backward(&tp, dp, &mut grad.prior);
        }

        BatchLoss {
            loss: (recon + kl_total) * inv_n,
            recon: recon * inv_n,
            kl: kl_total * inv_n,
            min_kl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Global gradient-norm ceiling.
    pub grad_clip: f64,
    /// Chance of hiding each present color triple in a training mask.
    pub p_hide: f64,
    /// Share of the training corpus held out for model selection.
    pub validation_fraction: f64,
    /// Sampling temperature used by [`Imputer::impute`].
    pub temperature: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            latent: 32,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.01,
            optimizer: Optimizer::Sgd { momentum: 0.9 },
            grad_clip: 5.0,
            p_hide: 0.5,
            validation_fraction: 0.1,
            temperature: 0.3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if self.latent == 0 || self.epochs == 0 || self.batch_size == 0 {
            return bad("latent, epochs and batch_size must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.p_hide) || !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("p_hide must lie in [0, 1] and validation_fraction in [0, 1)");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) || !(self.grad_clip > 0.0) {
            return bad("temperature must be non-negative and grad_clip positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean minibatch ELBO per epoch (before each step).
    pub train_elbo: Vec<f64>,
    /// Held-out ELBO per epoch with fixed masks and noise.
    pub validation_elbo: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
    pub wall_time_secs: f64,
    pub train_size: usize,
    pub validation_size: usize,
    /// Smallest per-item KL seen in any training batch.
    pub min_kl: f64,
}

impl TrainReport {
    /// Bitwise equality on everything except wall time.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        bits(&self.train_elbo) == bits(&other.train_elbo)
            && bits(&self.validation_elbo) == bits(&other.validation_elbo)
            && self.selected_epoch == other.selected_epoch
            && self.train_size == other.train_size
            && self.validation_size == other.validation_size
            && self.min_kl.to_bits() == other.min_kl.to_bits()
    }

    pub fn best_validation_elbo(&self) -> f64 {
        self.validation_elbo[self.selected_epoch - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeacModel {
    pub format: String,
    pub layout: Layout,
    pub normalizer: Normalizer,
    pub network: VaeacNetwork,
    pub config: TrainConfig,
}

/// Normalized rows with hidden/unknown entries zeroed.
struct Prepared {
    x: Array2<f64>,
    known: Array2<f64>,
    present: Vec<Vec<usize>>,
}

fn prepare(corpus: &[&FeatureVector], norm: &Normalizer) -> Prepared {
    let w = norm.width();
    let mut x = Array2::zeros((corpus.len(), w));
    let mut known = Array2::zeros((corpus.len(), w));
    let mut present = Vec::with_capacity(corpus.len());
    for (i, v) in corpus.iter().enumerate() {
        let k = known_columns(v);
        let z = norm.normalize(&v.values);
        for c in 0..w {
            if k[c] {
                x[[i, c]] = z[c];
                known[[i, c]] = 1.0;
            }
        }
        present.push(present_color_slots(v));
    }
    Prepared { x, known, present }
}

fn sample_batch<R: Rng>(data: &Prepared, rows: &[usize], layout: &Layout, p_hide: f64, latent: usize, rng: &mut R) -> Batch {
    let w = data.x.ncols();
    let mut x = Array2::zeros((rows.len(), w));
    let mut known = Array2::zeros((rows.len(), w));
    let mut hidden = Array2::zeros((rows.len(), w));
    for (i, &r) in rows.iter().enumerate() {
        x.row_mut(i).assign(&data.x.row(r));
        known.row_mut(i).assign(&data.known.row(r));
        for c in 0..w {
            hidden[[i, c]] = 1.0 - data.known[[r, c]];
        }
        for &s in &data.present[r] {
            if rng.gen::<f64>() < p_hide {
                let o = layout.color_offset(s);
                for c in o..o + 3 {
                    hidden[[i, c]] = 1.0;
                }
            }
        }
    }
    let eps = Array2::from_shape_simple_fn((rows.len(), latent), || rng.sample(StandardNormal));
    Batch { x, known, hidden, eps }
}

struct OptimizerState {
    kind: Optimizer,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        Self {
            kind,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, net: &mut VaeacNetwork, grad: &[f64], lr: f64) {
        self.t += 1;
        match self.kind {
            Optimizer::Sgd { momentum } => {
                for ((p, &g), m) in net.params_mut().zip(grad).zip(&mut self.m) {
                    *m = momentum * *m - lr * g;
                    *p += *m;
                }
            }
            Optimizer::Adam { beta1, beta2 } => {
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for (((p, &g), m), v) in net.params_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                }
            }
        }
    }
}

/// Fit a model on `corpus` (the training split). A share of it is held out
/// for validation; the epoch with the best validation ELBO is kept.
pub fn train(corpus: &[FeatureVector], config: &TrainConfig) -> Result<(VaeacModel, TrainReport), ModelError> {
    let started = Instant::now();
    config.validate()?;
    let layout = corpus.first().ok_or(ModelError::EmptyCorpus)?.layout;
    for v in corpus {
        v.check_layout(&layout)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if corpus.len() < 2 {
        0
    } else {
        ((corpus.len() as f64 * config.validation_fraction).round() as usize).clamp(1, corpus.len() - 1)
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set: Vec<&FeatureVector> = train_idx.iter().map(|&i| &corpus[i]).collect();
    // With a single item there is nothing to hold out; validate on it.
    let val_set: Vec<&FeatureVector> = if n_val == 0 {
        train_set.clone()
    } else {
        val_idx.iter().map(|&i| &corpus[i]).collect()
    };

    let owned: Vec<FeatureVector> = train_set.iter().map(|v| (*v).clone()).collect();
    let normalizer = Normalizer::fit(&owned, &layout)?;
    let train_data = prepare(&train_set, &normalizer);
    let val_data = prepare(&val_set, &normalizer);

    let mut net = VaeacNetwork::new(ColumnSpec::from_layout(&layout), &config.hidden, config.latent, &mut rng);
    let mut val_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED_0F_7A11);
    let val_rows: Vec<usize> = (0..val_set.len()).collect();
    let val_batch = sample_batch(&val_data, &val_rows, &layout, config.p_hide, config.latent, &mut val_rng);

    let mut opt = OptimizerState::new(config.optimizer, net.param_count());
    let batches_per_epoch = train_set.len().div_ceil(config.batch_size);
    let total_steps = (batches_per_epoch * config.epochs) as f64;
    let mut step = 0usize;
    let mut rows: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, usize, VaeacNetwork)> = None;
    let mut train_elbo = Vec::with_capacity(config.epochs);
    let mut validation_elbo = Vec::with_capacity(config.epochs);
    let mut min_kl = f64::INFINITY;
    let mut grad = net.zeros_like();
    let mut flat = vec![0.0; net.param_count()];

    for epoch in 1..=config.epochs {
        rows.shuffle(&mut rng);
        let mut elbo_sum = 0.0;
        for chunk in rows.chunks(config.batch_size) {
            let batch = sample_batch(&train_data, chunk, &layout, config.p_hide, config.latent, &mut rng);
            for g in grad.params_mut() {
                *g = 0.0;
            }
            let loss = net.loss_and_grad(&batch, &mut grad);
            elbo_sum -= loss.loss * chunk.len() as f64;
            min_kl = min_kl.min(loss.min_kl);

            for (f, g) in flat.iter_mut().zip(grad.params()) {
                *f = *g;
            }
            let norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > config.grad_clip {
                let s = config.grad_clip / norm;
                flat.iter_mut().for_each(|g| *g *= s);
            }
            let lr = config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps).cos());
            opt.step(&mut net, &flat, lr);
            step += 1;
        }
        train_elbo.push(elbo_sum / train_set.len() as f64);
        let val = -net.loss(&val_batch).loss;
        validation_elbo.push(val);
        if best.as_ref().map_or(true, |b| val > b.0) {
            best = Some((val, epoch, net.clone()));
        }
    }

    let (_, selected_epoch, network) = best.expect("at least one epoch");
    let report = TrainReport {
        train_elbo,
        validation_elbo,
        selected_epoch,
        wall_time_secs: started.elapsed().as_secs_f64(),
        train_size: train_set.len(),
        validation_size: n_val,
        min_kl,
    };
    let model = VaeacModel {
        format: CHECKPOINT_FORMAT.into(),
        layout,
        normalizer,
        network,
        config: config.clone(),
    };
    Ok((model, report))
}

impl VaeacModel {
    pub fn spatial_features_enabled(&self) -> bool {
        self.layout.spatial
    }

    pub fn latent_dim(&self) -> usize {
        self.network.latent
    }

    /// `n` samples at the given temperature: 0 returns the decoder mean
    /// for the prior mean, deterministically.
    pub fn impute_with(
        &self,
        request: &FeatureVector,
        n: usize,
        seed: u64,
        temperature: f64,
    ) -> Result<Vec<FeatureVector>, ModelError> {
        validate_request_mask(request)?;
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(ModelError::InvalidRequest("temperature must be non-negative".into()));
        }
        with_layout(request, &self.layout, |req| Ok(self.sample(req, n, seed, temperature)))
    }

    fn sample(&self, req: &FeatureVector, n: usize, seed: u64, t: f64) -> Vec<FeatureVector> {
        if n == 0 {
            return Vec::new();
        }
        if !req.mask.iter().any(|&m| m) {
            return vec![req.clone(); n];
        }
        let w = self.network.width();
        let l = self.network.latent;
        let z_norm = self.normalizer.normalize(&req.values);
        let mut xo = Array2::zeros((n, w));
        let mut hidden = Array2::zeros((n, w));
        for i in 0..n {
            for c in 0..w {
                if req.mask[c] {
                    hidden[[i, c]] = 1.0;
                } else {
                    xo[[i, c]] = z_norm[c];
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cat = |parts: &[&Array2<f64>]| {
            let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
            concatenate(Axis(1), &views).expect("rows match")
        };
        let p = self.network.prior.forward(&cat(&[&xo, &hidden]));
        let mut z = Array2::zeros((n, l));
        for i in 0..n {
            for j in 0..l {
                let e: f64 = rng.sample(StandardNormal);
                let sd = softplus(p[[i, l + j]]) + LATENT_MIN_SD;
                z[[i, j]] = p[[i, j]] + t * sd * e;
            }
        }
        let d = self.network.decoder.forward(&cat(&[&z, &xo, &hidden]));
        (0..n)
            .map(|i| {
                let mut gen = req.values.clone();
                for c in 0..w {
                    if !req.mask[c] || matches!(self.network.columns.kinds[c], FeatureKind::Categorical { .. }) {
                        continue;
                    }
                    let e: f64 = rng.sample(StandardNormal);
                    let sd = softplus(d[[i, 2 * c + 1]]) + DECODER_MIN_SD;
                    gen[c] = self.normalizer.denormalize(c, d[[i, 2 * c]] + t * sd * e);
                }
                for g in &self.network.columns.groups {
                    if g.iter().any(|&c| req.mask[c]) {
                        let best = g
                            .iter()
                            .copied()
                            .max_by(|&a, &b| d[[i, 2 * a]].total_cmp(&d[[i, 2 * b]]).then(b.cmp(&a)))
                            .unwrap();
                        for &c in g {
                            gen[c] = if c == best { 1.0 } else { 0.0 };
                        }
                    }
                }
                complete(req, &gen, true)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| ModelError::Format(format!("unreadable checkpoint: {e}")))?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
        if format != CHECKPOINT_FORMAT {
            return Err(ModelError::Format(format.to_string()));
        }
        let model: VaeacModel =
            serde_json::from_value(v).map_err(|e| ModelError::Format(format!("malformed checkpoint: {e}")))?;
        if model.network.width() != model.layout.width() || model.normalizer.width() != model.layout.width() {
            return Err(ModelError::WidthMismatch {
                expected: model.layout.width(),
                got: model.network.width(),
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let s = std::fs::read_to_string(path).map_err(|e| ModelError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

impl Imputer for VaeacModel {
    fn name(&self) -> &str {
        if self.layout.spatial {
            "vaeac"
        } else {
            "vaeac-nonspatial"
        }
    }

    fn impute(&self, request: &FeatureVector, n: usize, seed: u64) -> Result<Vec<FeatureVector>, ModelError> {
        self.impute_with(request, n, seed, self.config.temperature)
    }
}
