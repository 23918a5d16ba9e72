//! Contrastive training loop, optimizers, gradient checking, and
//! checkpointing.
//!
//! Training resamples pairs every epoch, sums per-pair gradients over each
//! mini-batch in a fixed order, optionally clips the summed gradient's
//! global L2 norm, and applies one SGD or Adam step per batch.  Everything
//! is deterministic in the configured seed: pair sampling, batch order,
//! initialization, and (because per-pair work is joined in order even when
//! computed in parallel) the floating-point result itself.
//!
//! [`gradient_check`] compares backpropagated gradients against central
//! finite differences over every parameter and is both a test fixture and
//! a CLI-exposed self-check.  [`save_checkpoint`] / [`load_checkpoint`]
//! round-trip a model bit-exactly together with its vocabulary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{make_pairs, top_k_labels, PairLabel, TweetRecord};
use crate::encoder::{
    backward, encode_indices, init_params, lstm_pass, Direction, Hyper, ModelParams, ParamGrads,
    DEFAULT_EMBED_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_OUT_DIM,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, sample_references};
use crate::features::{TrigramSequence, TrigramVocab};
use crate::loss::{check_margin, cosine, pair_loss, pair_loss_grad, BatchLoss};

/// Adam first-moment decay.
pub const ADAM_BETA1: f64 = 0.9;
/// Adam second-moment decay.
pub const ADAM_BETA2: f64 = 0.999;
/// Adam denominator fuzz.
pub const ADAM_EPS: f64 = 1e-8;

/// How many references per label back the dev-set macro-F1 probe.
pub const DEV_REFS_PER_LABEL: usize = 20;

/// Relative-error floor for gradient checking: differences are measured
/// against `max(|analytic| + |numeric|, this)` so that components with
/// near-zero gradient do not blow up the ratio on finite-difference noise.
pub const GRADCHECK_REL_FLOOR: f64 = 1e-4;

// Distinct seed streams derived from the one configured seed.
const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4531;
const DEV_PAIR_SALT: u64 = 0x4445_5650_4149_5253;
const REF_SALT: u64 = 0x5245_4653_414d_504c;

/// Which update rule [`train_batch`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::BadConfig(format!(
                "unknown optimizer {other:?}; expected \"sgd\" or \"adam\""
            ))),
        }
    }
}

/// Everything that shapes one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    /// Margin `m` of the contrastive loss; also the cosine threshold used
    /// for dev pair accuracy.
    pub margin: f64,
    /// Global L2 clip applied to each batch's summed gradient; `None`
    /// disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub positives_per_anchor: usize,
    /// Run the dev-set probes every this many epochs (and always on the
    /// final epoch).
    pub eval_every: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            margin: 0.5,
            grad_clip: Some(5.0),
            seed: 42,
            positives_per_anchor: 4,
            eval_every: 5,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            out_dim: DEFAULT_OUT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_margin(self.margin)?;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::BadConfig(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        positive("epochs", self.epochs)?;
        positive("batch_size", self.batch_size)?;
        positive("positives_per_anchor", self.positives_per_anchor)?;
        positive("eval_every", self.eval_every)?;
        positive("embed_dim", self.embed_dim)?;
        positive("hidden_dim", self.hidden_dim)?;
        positive("out_dim", self.out_dim)?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::BadConfig(format!(
                    "grad_clip must be positive and finite, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Adam moment estimates, one slot per model parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ParamGrads,
    v: ParamGrads,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m: ParamGrads::zeros_like(params),
            v: ParamGrads::zeros_like(params),
            t: 0,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// Mutable optimizer state carried across batches.
#[derive(Debug, Clone)]
pub enum OptState {
    Sgd,
    Adam(Box<AdamState>),
}

impl OptState {
    pub fn new(optimizer: Optimizer, params: &ModelParams) -> Self {
        match optimizer {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam => OptState::Adam(Box::new(AdamState::new(params))),
        }
    }
}

/// Plain gradient descent: `θ ← θ − lr·g`.
pub fn sgd_step(params: &mut ModelParams, grads: &ParamGrads, lr: f64) {
    for (p, g) in params.groups_mut().into_iter().zip(grads.groups()) {
        for (w, &gw) in p.iter_mut().zip(g) {
            *w -= lr * gw;
        }
    }
}

/// One Adam update with bias correction:
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − lr·m̂ / (√v̂ + ε)`.
pub fn adam_step(params: &mut ModelParams, grads: &ParamGrads, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (((p, g), m), v) in params
        .groups_mut()
        .into_iter()
        .zip(grads.groups())
        .zip(state.m.groups_mut())
        .zip(state.v.groups_mut())
    {
        for (((w, &gw), mw), vw) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mw = ADAM_BETA1 * *mw + (1.0 - ADAM_BETA1) * gw;
            *vw = ADAM_BETA2 * *vw + (1.0 - ADAM_BETA2) * gw * gw;
            let m_hat = *mw / bc1;
            let v_hat = *vw / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Apply one step of whichever optimizer `state` carries.
pub fn apply_step(params: &mut ModelParams, grads: &ParamGrads, state: &mut OptState, lr: f64) {
    match state {
        OptState::Sgd => sgd_step(params, grads, lr),
        OptState::Adam(s) => adam_step(params, grads, s, lr),
    }
}

/// Rescale `grads` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grads.sq_l2_norm().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// One training pair, as trigram index sequences.
#[derive(Debug, Clone, Copy)]
pub struct PairItem<'a> {
    pub anchor: &'a [u32],
    pub reference: &'a [u32],
    pub y: PairLabel,
}

/// Run one mini-batch: encode every pair, sum the per-pair gradients in
/// batch order, clip, and apply one optimizer step.
///
/// Per-pair losses and gradients are computed in parallel but joined in
/// batch order with plain summation, so the result is bit-identical across
/// thread counts.  If the mean batch loss comes out non-finite the step is
/// *skipped* (leaving `params` untouched) and the loss is returned for the
/// caller to act on.
pub fn train_batch(
    params: &mut ModelParams,
    state: &mut OptState,
    batch: &[PairItem<'_>],
    config: &TrainConfig,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let p: &ModelParams = params;
    let per_pair: Vec<(f64, ParamGrads)> = batch
        .par_iter()
        .map(|item| -> Result<(f64, ParamGrads)> {
            let (u, tape_u) = encode_indices(item.anchor, 0, p)?;
            let (v, tape_v) = encode_indices(item.reference, 1, p)?;
            let (loss, du, dv) = pair_loss_grad(&u.v, &v.v, item.y, config.margin)?;
            let grads = backward(&tape_u, &du, &tape_v, &dv, p)?;
            Ok((loss, grads))
        })
        .collect::<Result<_>>()?;

    let mut total = ParamGrads::zeros_like(params);
    let mut sum = 0.0;
    for (loss, g) in &per_pair {
        sum += loss;
        total.add_assign(g);
    }
    let count = batch.len();
    let mean = sum / count as f64;

    if mean.is_finite() {
        if let Some(max_norm) = config.grad_clip {
            clip_global_norm(&mut total, max_norm);
        }
        apply_step(params, &total, state, config.learning_rate);
    }
    Ok(BatchLoss { sum, mean, count })
}

/// One line of training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean contrastive loss over every pair seen this epoch.
    pub mean_loss: f64,
    /// Fraction of dev pairs whose cosine falls on the correct side of the
    /// margin; only present on probe epochs.
    pub dev_pair_acc: Option<f64>,
    /// Reference-voting macro-F1 on the dev set; only present on probe
    /// epochs.
    pub dev_macro_f1: Option<f64>,
    /// Wall-clock duration of the epoch.
    pub seconds: f64,
}

/// Per-epoch records, exportable as CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// CSV with header `epoch,mean_loss,dev_pair_acc,dev_macro_f1,seconds`;
    /// absent probe values render as empty fields.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,mean_loss,dev_pair_acc,dev_macro_f1,seconds\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:.6},{},{},{:.3}\n",
                r.epoch,
                r.mean_loss,
                opt(r.dev_pair_acc),
                opt(r.dev_macro_f1),
                r.seconds,
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// A trained model together with its training history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: TrainHistory,
}

fn index_sequences(records: &[TweetRecord], vocab: &TrigramVocab) -> Result<Vec<Vec<u32>>> {
    records
        .iter()
        .map(|r| Ok(TrigramSequence::from_record(r, vocab)?.indices))
        .collect()
}

/// Train a fresh model on `poor` anchors against `rich` references.  See
/// [`train_with_progress`] for the mechanics; this variant just discards
/// progress callbacks.
pub fn train(
    poor: &[TweetRecord],
    rich: &[TweetRecord],
    dev: Option<&[TweetRecord]>,
    vocab: &TrigramVocab,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(poor, rich, dev, vocab, config, |_| {})
}

/// Train a fresh model, invoking `progress` after every finished epoch.
///
/// Each epoch resamples pairs with `seed + epoch`, shuffles positives and
/// negatives together, and walks them in mini-batches through
/// [`train_batch`].  When a dev set is given, probe epochs (every
/// `eval_every`-th epoch plus the last) also report dev pair accuracy and
/// the macro-F1 of reference voting with references sampled from `rich`.
/// A non-finite mean batch loss aborts with [`Error::Diverged`].
pub fn train_with_progress(
    poor: &[TweetRecord],
    rich: &[TweetRecord],
    dev: Option<&[TweetRecord]>,
    vocab: &TrigramVocab,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if poor.is_empty() || rich.is_empty() {
        return Err(Error::NoUsableRecords);
    }
    let poor_seqs = index_sequences(poor, vocab)?;
    let rich_seqs = index_sequences(rich, vocab)?;

    let dev = dev.filter(|d| !d.is_empty());
    // Dev probes use one fixed pair sample for comparability across epochs.
    let dev_pairs = dev
        .map(|d| {
            make_pairs(
                d,
                rich,
                config.positives_per_anchor,
                config.seed ^ DEV_PAIR_SALT,
            )
        })
        .transpose()?;
    let dev_seqs = dev.map(|d| index_sequences(d, vocab)).transpose()?;
    let rich_labels = dev
        .map(|_| {
            let distinct = rich
                .iter()
                .map(|r| r.label.as_str())
                .collect::<std::collections::BTreeSet<_>>();
            top_k_labels(rich, distinct.len())
        })
        .transpose()?;

    let mut params = init_params(
        vocab.v(),
        config.embed_dim,
        config.hidden_dim,
        config.out_dim,
        config.seed,
    );
    let mut state = OptState::new(config.optimizer, &params);
    let mut history = TrainHistory::default();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let pairs = make_pairs(
            poor,
            rich,
            config.positives_per_anchor,
            config.seed.wrapping_add(epoch as u64),
        )?;
        let mut order: Vec<_> = pairs.positives.iter().chain(&pairs.negatives).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64) ^ SHUFFLE_SALT);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut n_pairs = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let items: Vec<PairItem<'_>> = chunk
                .iter()
                .map(|p| PairItem {
                    anchor: &poor_seqs[p.anchor],
                    reference: &rich_seqs[p.reference],
                    y: p.y,
                })
                .collect();
            let bl = train_batch(&mut params, &mut state, &items, config)?;
            if !bl.mean.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += bl.sum;
            n_pairs += bl.count;
        }
        let mean_loss = loss_sum / n_pairs as f64;

        let probe = dev.is_some() && (epoch % config.eval_every == 0 || epoch == config.epochs);
        let (dev_pair_acc, dev_macro_f1) = if probe {
            let d_pairs = dev_pairs.as_ref().unwrap();
            let d_seqs = dev_seqs.as_ref().unwrap();
            let acc = dev_pair_accuracy(
                d_pairs.positives.iter().chain(&d_pairs.negatives),
                d_seqs,
                &rich_seqs,
                &params,
                config.margin,
            )?;
            let refs = sample_references(
                rich,
                &params,
                vocab,
                rich_labels.as_ref().unwrap(),
                DEV_REFS_PER_LABEL,
                config.seed ^ REF_SALT,
            )?;
            let metrics = evaluate(dev.unwrap(), &params, vocab, &refs, config.margin)?;
            (Some(acc), Some(metrics.macro_avg.f1))
        } else {
            (None, None)
        };

        let record = EpochRecord {
            epoch,
            mean_loss,
            dev_pair_acc,
            dev_macro_f1,
            seconds: started.elapsed().as_secs_f64(),
        };
        progress(&record);
        history.epochs.push(record);
    }

    Ok(TrainOutcome { params, history })
}

/// Fraction of pairs whose cosine lands on the correct side of the margin:
/// same-label pairs should score above it, different-label pairs at or
/// below it.
fn dev_pair_accuracy<'a>(
    pairs: impl Iterator<Item = &'a crate::corpus::PairExample>,
    anchor_seqs: &[Vec<u32>],
    ref_seqs: &[Vec<u32>],
    params: &ModelParams,
    margin: f64,
) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for p in pairs {
        let (u, _) = encode_indices(&anchor_seqs[p.anchor], 0, params)?;
        let (v, _) = encode_indices(&ref_seqs[p.reference], 1, params)?;
        let predicted_same = cosine(&u.v, &v.v) > margin;
        if predicted_same == (p.y == PairLabel::Same) {
            correct += 1;
        }
        total += 1;
    }
    Ok(correct as f64 / total as f64)
}

// --- gradient checking ---------------------------------------------------

/// Aggregate report groups for gradient checking.
pub const REPORT_GROUPS: [&str; 4] = ["embedding", "fwd", "bwd", "projection"];

fn report_slot(group_idx: usize) -> usize {
    match group_idx {
        0 => 0,
        1..=3 => 1,
        4..=6 => 2,
        _ => 3,
    }
}

/// Worst relative error of one aggregate parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    pub groups: Vec<GroupCheck>,
    /// True when zero trials ran, in which case [`Self::pass`] holds
    /// trivially and the report says so.
    pub vacuous: bool,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_err < self.tolerance)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vacuous {
            writeln!(f, "warning: 0 trials requested; the check is vacuous")?;
        }
        for g in &self.groups {
            writeln!(f, "group {:<10} max rel err {:.3e}", g.name, g.max_rel_err)?;
        }
        write!(
            f,
            "gradient check: {} ({} trials, eps {:.1e}, tolerance {:.1e})",
            if self.pass() { "PASS" } else { "FAIL" },
            self.trials,
            self.epsilon,
            self.tolerance,
        )
    }
}

/// Compare `analytic` against central finite differences of `f` around
/// `base`, returning the worst relative error per aggregate report group.
fn fd_max_rel_errs(
    base: &ModelParams,
    analytic: &ParamGrads,
    epsilon: f64,
    f: impl Fn(&ModelParams) -> Result<f64>,
) -> Result<[f64; 4]> {
    let mut work = base.clone();
    let mut maxes = [0.0f64; 4];
    for g in 0..base.groups().len() {
        let len = base.groups()[g].len();
        let slot = report_slot(g);
        for i in 0..len {
            let orig = base.groups()[g][i];
            work.groups_mut()[g][i] = orig + epsilon;
            let f_plus = f(&work)?;
            work.groups_mut()[g][i] = orig - epsilon;
            let f_minus = f(&work)?;
            work.groups_mut()[g][i] = orig;
            let numeric = (f_plus - f_minus) / (2.0 * epsilon);
            let a = analytic.groups()[g][i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(GRADCHECK_REL_FLOOR);
            if rel > maxes[slot] {
                maxes[slot] = rel;
            }
        }
    }
    Ok(maxes)
}

/// Smallest distance of any output-unit preactivation from the rectifier's
/// kink at zero, for one sequence under one parameter set.
fn min_rectifier_margin(seq: &[u32], params: &ModelParams) -> Result<f64> {
    let (h_fwd, _) = lstm_pass(seq, params, Direction::Forward)?;
    let (h_bwd, _) = lstm_pass(seq, params, Direction::Backward)?;
    let mut concat = h_fwd;
    concat.extend_from_slice(&h_bwd);
    let mut pre = params.proj_b.clone();
    params.proj_w.matvec_acc(&concat, &mut pre);
    Ok(pre.iter().fold(f64::INFINITY, |m, &s| m.min(s.abs())))
}

/// Verify backpropagation against central finite differences on a small
/// synthetic fixture: `n_trials` random pairs, every parameter perturbed by
/// `±epsilon`, worst relative error per group compared to `tolerance`.
/// Zero trials yield a vacuous pass flagged as such in the report.
///
/// The loss is not differentiable exactly at the rectifier and hinge kinks,
/// where central differences do not estimate a derivative, so trial
/// configurations landing within the perturbation's reach of a kink are
/// deterministically redrawn with a different init seed.
pub fn gradient_check(
    config: &TrainConfig,
    n_trials: usize,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    config.validate()?;
    if !(epsilon.is_finite() && epsilon > 0.0) || !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::BadConfig(
            "gradient check epsilon and tolerance must be positive".into(),
        ));
    }
    if n_trials == 0 {
        return Ok(GradCheckReport {
            trials: 0,
            epsilon,
            tolerance,
            groups: REPORT_GROUPS
                .iter()
                .map(|&name| GroupCheck {
                    name,
                    max_rel_err: 0.0,
                })
                .collect(),
            vacuous: true,
        });
    }

    // A tiny three-theme synthetic corpus gives realistic variable-length
    // sequences with both shared and distinct trigrams.
    let labels = crate::corpus::LabelSet::balanced(
        [
            crate::emoji::RED_HEART.to_string(),
            "😊".into(),
            "😬".into(),
        ],
        4,
    )?;
    let records = crate::corpus::synth_generate(4, &labels, 0.1, config.seed)?;
    let vocab = crate::features::build_vocab(&records, 1)?;
    let seqs = index_sequences(&records, &vocab)?;

    // A perturbation of ±ε moves any preactivation by at most ε times the
    // local slope; requiring this much clearance from the kink keeps every
    // finite-difference evaluation on one smooth branch.
    let kink_guard = 200.0 * epsilon;

    let mut maxes = [0.0f64; 4];
    for t in 0..n_trials {
        let a = &seqs[t % seqs.len()];
        let mut b_idx = (t * 5 + 2) % seqs.len();
        if b_idx == t % seqs.len() {
            b_idx = (b_idx + 1) % seqs.len();
        }
        let b = &seqs[b_idx];

        let (params, u, tape_u, v, tape_v, y) = 'redraw: {
            for attempt in 0..64u64 {
                let params = init_params(
                    vocab.v(),
                    config.embed_dim,
                    config.hidden_dim,
                    config.out_dim,
                    config
                        .seed
                        .wrapping_add(t as u64)
                        .wrapping_add(attempt.wrapping_mul(0x9e37)),
                );
                if min_rectifier_margin(a, &params)?.min(min_rectifier_margin(b, &params)?)
                    <= kink_guard
                {
                    continue;
                }
                let (u, tape_u) = encode_indices(a, 0, &params)?;
                let (v, tape_v) = encode_indices(b, 1, &params)?;
                // Fully-rectified towers make the trial vacuous (the
                // degenerate-cosine guard zeroes everything); redraw those
                // too so every trial carries signal.
                if crate::tensor::l2_norm(&u.v) < 1e-6 || crate::tensor::l2_norm(&v.v) < 1e-6 {
                    continue;
                }
                // Alternate the pair label, but step off the hinge when the
                // cosine sits close to the margin.
                let base_cos = cosine(&u.v, &v.v);
                let y = if t % 2 == 0 || (base_cos - config.margin).abs() < 0.05 {
                    PairLabel::Same
                } else {
                    PairLabel::Different
                };
                break 'redraw (params, u, tape_u, v, tape_v, y);
            }
            return Err(Error::BadConfig(
                "gradient check could not find a kink-free configuration; \
                 try a smaller epsilon"
                    .into(),
            ));
        };

        let (_, du, dv) = pair_loss_grad(&u.v, &v.v, y, config.margin)?;
        let analytic = backward(&tape_u, &du, &tape_v, &dv, &params)?;
        let trial = fd_max_rel_errs(&params, &analytic, epsilon, |p| {
            let (u, _) = encode_indices(a, 0, p)?;
            let (v, _) = encode_indices(b, 1, p)?;
            pair_loss(&u.v, &v.v, y, config.margin)
        })?;
        for (m, t) in maxes.iter_mut().zip(trial) {
            *m = m.max(t);
        }
    }

    Ok(GradCheckReport {
        trials: n_trials,
        epsilon,
        tolerance,
        groups: REPORT_GROUPS
            .iter()
            .zip(maxes)
            .map(|(&name, max_rel_err)| GroupCheck { name, max_rel_err })
            .collect(),
        vacuous: false,
    })
}

// --- checkpointing --------------------------------------------------------

/// Leading bytes of every checkpoint file.
pub const CHECKPOINT_MAGIC: &[u8] = b"CESNA1\n";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    #[serde(rename = "V")]
    v: u32,
    e: usize,
    h: usize,
    d: usize,
    min_count: u32,
    /// SHA-256 hex digest of the sidecar vocabulary file's contents.
    vocab_hash: String,
}

/// Where a checkpoint's vocabulary sidecar lives: `<checkpoint>.vocab`.
pub fn vocab_sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut os = checkpoint.as_os_str().to_owned();
    os.push(".vocab");
    PathBuf::from(os)
}

/// Write the model to `path` and its vocabulary to `<path>.vocab`.
///
/// Layout: the magic line, one JSON header line carrying the shape and the
/// vocabulary hash, then every parameter group as little-endian f64 in
/// [`crate::encoder::GROUP_NAMES`] order.  Identical inputs produce
/// byte-identical files.
pub fn save_checkpoint(params: &ModelParams, vocab: &TrigramVocab, path: &Path) -> Result<()> {
    let header = CheckpointHeader {
        v: params.hyper.vocab_size,
        e: params.hyper.embed_dim,
        h: params.hyper.hidden_dim,
        d: params.hyper.out_dim,
        min_count: vocab.min_count(),
        vocab_hash: vocab.content_hash(),
    };
    let mut bytes = Vec::with_capacity(params.n_params() * 8 + 256);
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(
        serde_json::to_string(&header)
            .map_err(|e| Error::CheckpointHeader(e.to_string()))?
            .as_bytes(),
    );
    bytes.push(b'\n');
    for group in params.groups() {
        for &w in group {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    vocab.save(&vocab_sidecar_path(path))?;
    Ok(())
}

/// Read a checkpoint and its vocabulary sidecar back, verifying the magic,
/// the exact tensor byte count, and the vocabulary hash.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, TrigramVocab)> {
    let bytes = fs::read(path)?;
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(Error::CheckpointMagic);
    }
    let rest = &bytes[CHECKPOINT_MAGIC.len()..];
    let header_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CheckpointHeader("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&rest[..header_end])
        .map_err(|e| Error::CheckpointHeader(e.to_string()))?;
    let tensor_bytes = &rest[header_end + 1..];

    // Size-check against the header before allocating anything.
    let (v, e, h, d) = (
        header.v as u128,
        header.e as u128,
        header.h as u128,
        header.d as u128,
    );
    let n_params = (v + 1) * e + 2 * (4 * h * e + 4 * h * h + 4 * h) + d * 2 * h + d;
    let expected = n_params.saturating_mul(8);
    if tensor_bytes.len() as u128 != expected {
        return Err(Error::CheckpointSize {
            expected: expected.min(usize::MAX as u128) as usize,
            found: tensor_bytes.len(),
        });
    }

    let hyper = Hyper {
        vocab_size: header.v,
        embed_dim: header.e,
        hidden_dim: header.h,
        out_dim: header.d,
    };
    let mut params = ModelParams::zeros(hyper);
    let mut offset = 0;
    for group in params.groups_mut() {
        for w in group.iter_mut() {
            *w = f64::from_le_bytes(tensor_bytes[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
    }

    let vocab = TrigramVocab::load(&vocab_sidecar_path(path))?;
    if vocab.v() != header.v || vocab.min_count() != header.min_count {
        return Err(Error::CheckpointHeader(format!(
            "header says V={}, min_count={} but the sidecar vocabulary has V={}, min_count={}",
            header.v,
            header.min_count,
            vocab.v(),
            vocab.min_count()
        )));
    }
    let found = vocab.content_hash();
    if found != header.vocab_hash {
        return Err(Error::VocabHashMismatch {
            expected: header.vocab_hash,
            found,
        });
    }
    Ok((params, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_generate, LabelSet};
    use crate::features::build_vocab;

    fn tiny_params() -> ModelParams {
        ModelParams::zeros(Hyper {
            vocab_size: 1,
            embed_dim: 1,
            hidden_dim: 1,
            out_dim: 1,
        })
    }

    fn grad_with_first_embedding(value: f64, params: &ModelParams) -> ParamGrads {
        let mut g = ParamGrads::zeros_like(params);
        g.groups_mut()[0][0] = value;
        g
    }

    #[test]
    fn sgd_step_is_a_plain_scaled_subtraction() {
        let mut params = tiny_params();
        params.groups_mut()[0][0] = 1.0;
        let g = grad_with_first_embedding(0.5, &params);
        sgd_step(&mut params, &g, 0.1);
        assert_eq!(params.groups()[0][0], 1.0 - 0.1 * 0.5);
        // Untouched parameters stay untouched.
        assert_eq!(params.groups()[1][0], 0.0);
    }

    #[test]
    fn adam_step_matches_hand_computed_updates() {
        // One parameter, constant gradient 0.5, lr 0.1.  Worked by hand:
        // both bias-corrected steps reduce to lr·0.5/(0.5 + ε).
        let mut params = tiny_params();
        params.groups_mut()[0][0] = 1.0;
        let g = grad_with_first_embedding(0.5, &params);
        let mut state = AdamState::new(&params);

        adam_step(&mut params, &g, &mut state, 0.1);
        let m1: f64 = 0.1 * 0.5; // (1-β₁)g
        let v1: f64 = 0.001 * 0.25; // (1-β₂)g²
        let step1 = 0.1 * (m1 / 0.1) / ((v1 / 0.001).sqrt() + ADAM_EPS);
        assert!((params.groups()[0][0] - (1.0 - step1)).abs() < 1e-15);
        assert_eq!(state.steps(), 1);

        adam_step(&mut params, &g, &mut state, 0.1);
        let m2 = ADAM_BETA1 * m1 + 0.1 * 0.5;
        let v2 = ADAM_BETA2 * v1 + 0.001 * 0.25;
        let step2 = 0.1 * (m2 / (1.0 - ADAM_BETA1 * ADAM_BETA1))
            / ((v2 / (1.0 - ADAM_BETA2 * ADAM_BETA2)).sqrt() + ADAM_EPS);
        assert!((params.groups()[0][0] - (1.0 - step1 - step2)).abs() < 1e-15);
        assert_eq!(state.steps(), 2);
    }

    #[test]
    fn clipping_rescales_only_oversized_gradients() {
        let mut params = tiny_params();
        let mut g = ParamGrads::zeros_like(&params);
        g.groups_mut()[0][0] = 3.0;
        g.groups_mut()[7][0] = 4.0; // ‖g‖ = 5
        let before = clip_global_norm(&mut g, 2.5);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((g.sq_l2_norm().sqrt() - 2.5).abs() < 1e-12);
        // Direction preserved.
        assert!((g.groups()[0][0] / g.groups()[7][0] - 0.75).abs() < 1e-12);

        let mut small = ParamGrads::zeros_like(&params);
        small.groups_mut()[0][0] = 1.0;
        let bits = small.groups()[0][0].to_bits();
        clip_global_norm(&mut small, 2.5);
        assert_eq!(
            small.groups()[0][0].to_bits(),
            bits,
            "within-budget gradients pass through untouched"
        );
        let _ = &mut params;
    }

    fn two_text_fixture() -> (TrigramVocab, Vec<u32>, Vec<u32>) {
        let recs = vec![
            TweetRecord {
                id: 1,
                text: "the cat sat on the mat".into(),
                label: "😊".into(),
                language: "en".into(),
            },
            TweetRecord {
                id: 2,
                text: "a dog ran over the hill".into(),
                label: "😬".into(),
                language: "en".into(),
            },
        ];
        let vocab = build_vocab(&recs, 1).unwrap();
        let a = TrigramSequence::from_record(&recs[0], &vocab)
            .unwrap()
            .indices;
        let b = TrigramSequence::from_record(&recs[1], &vocab)
            .unwrap()
            .indices;
        (vocab, a, b)
    }

    #[test]
    fn repeated_steps_on_one_positive_pair_align_the_embeddings() {
        let (vocab, a, b) = two_text_fixture();
        let config = TrainConfig {
            embed_dim: 8,
            hidden_dim: 8,
            out_dim: 16,
            ..TrainConfig::default()
        };
        let mut params = init_params(vocab.v(), 8, 8, 16, 7);
        let mut state = OptState::new(Optimizer::Adam, &params);
        let batch = [PairItem {
            anchor: &a,
            reference: &b,
            y: PairLabel::Same,
        }];
        let mut final_cos = 0.0;
        for _ in 0..500 {
            train_batch(&mut params, &mut state, &batch, &config).unwrap();
            let (u, _) = encode_indices(&a, 0, &params).unwrap();
            let (v, _) = encode_indices(&b, 1, &params).unwrap();
            final_cos = cosine(&u.v, &v.v);
            if final_cos > 0.99 {
                break;
            }
        }
        assert!(final_cos > 0.99, "cosine only reached {final_cos}");
    }

    #[test]
    fn repeated_steps_on_one_negative_pair_separate_the_embeddings() {
        let (vocab, a, b) = two_text_fixture();
        let config = TrainConfig {
            embed_dim: 8,
            hidden_dim: 8,
            out_dim: 16,
            ..TrainConfig::default()
        };
        let mut params = init_params(vocab.v(), 8, 8, 16, 7);
        let mut state = OptState::new(Optimizer::Adam, &params);
        let batch = [PairItem {
            anchor: &a,
            reference: &b,
            y: PairLabel::Different,
        }];
        for _ in 0..500 {
            let bl = train_batch(&mut params, &mut state, &batch, &config).unwrap();
            if bl.mean == 0.0 {
                break;
            }
        }
        let (u, _) = encode_indices(&a, 0, &params).unwrap();
        let (v, _) = encode_indices(&b, 1, &params).unwrap();
        assert!(
            cosine(&u.v, &v.v) <= config.margin,
            "negative pair should end at or below the margin"
        );
    }

    #[test]
    fn nonfinite_loss_skips_the_optimizer_step() {
        let (vocab, a, b) = two_text_fixture();
        let config = TrainConfig::default();
        let mut params = init_params(
            vocab.v(),
            config.embed_dim,
            config.hidden_dim,
            config.out_dim,
            7,
        );
        // An infinite projection bias survives rectification (unlike NaN,
        // which the clamp maps to 0) and turns both cosines non-finite.
        params.proj_b[0] = f64::INFINITY;
        let snapshot = params.clone();
        let mut state = OptState::new(Optimizer::Adam, &params);
        let batch = [PairItem {
            anchor: &a,
            reference: &b,
            y: PairLabel::Same,
        }];
        let bl = train_batch(&mut params, &mut state, &batch, &config).unwrap();
        assert!(!bl.mean.is_finite());
        for (now, before) in params.groups().iter().zip(snapshot.groups()) {
            for (x, y) in now.iter().zip(before.iter()) {
                assert_eq!(
                    x.to_bits(),
                    y.to_bits(),
                    "a skipped step must leave parameters untouched"
                );
            }
        }
    }

    #[test]
    fn empty_batches_are_rejected() {
        let (vocab, _, _) = two_text_fixture();
        let config = TrainConfig::default();
        let mut params = init_params(vocab.v(), 4, 4, 4, 7);
        let mut state = OptState::new(Optimizer::Sgd, &params);
        assert!(matches!(
            train_batch(&mut params, &mut state, &[], &config),
            Err(Error::EmptyBatch)
        ));
    }

    fn small_corpus() -> (Vec<TweetRecord>, TrigramVocab) {
        let ls = LabelSet::balanced(["😊", "😬"].map(String::from), 6).unwrap();
        let records = synth_generate(6, &ls, 0.0, 11).unwrap();
        let vocab = build_vocab(&records, 1).unwrap();
        (records, vocab)
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 8,
            embed_dim: 4,
            hidden_dim: 4,
            out_dim: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (records, vocab) = small_corpus();
        let config = small_config();
        let run = || train(&records, &records, Some(&records), &vocab, &config).unwrap();
        let (a, b) = (run(), run());
        for (ga, gb) in a.params.groups().iter().zip(b.params.groups()) {
            for (x, y) in ga.iter().zip(gb.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        for (ra, rb) in a.history.epochs.iter().zip(&b.history.epochs) {
            assert_eq!(ra.mean_loss.to_bits(), rb.mean_loss.to_bits());
            assert_eq!(ra.dev_pair_acc, rb.dev_pair_acc);
            assert_eq!(ra.dev_macro_f1, rb.dev_macro_f1);
        }
    }

    #[test]
    fn dev_probes_follow_the_eval_schedule() {
        let (records, vocab) = small_corpus();
        let config = TrainConfig {
            epochs: 5,
            eval_every: 2,
            ..small_config()
        };
        let out = train(&records, &records, Some(&records), &vocab, &config).unwrap();
        let probed: Vec<bool> = out
            .history
            .epochs
            .iter()
            .map(|r| r.dev_pair_acc.is_some())
            .collect();
        assert_eq!(
            probed,
            [false, true, false, true, true],
            "epochs 2, 4 and the final epoch probe the dev set"
        );
        for r in &out.history.epochs {
            assert_eq!(r.dev_pair_acc.is_some(), r.dev_macro_f1.is_some());
            assert!(r.seconds >= 0.0);
            assert!(r.mean_loss.is_finite());
        }
    }

    #[test]
    fn without_a_dev_set_probe_fields_stay_empty() {
        let (records, vocab) = small_corpus();
        let out = train(&records, &records, None, &vocab, &small_config()).unwrap();
        assert!(out
            .history
            .epochs
            .iter()
            .all(|r| r.dev_pair_acc.is_none() && r.dev_macro_f1.is_none()));
    }

    #[test]
    fn an_absurd_learning_rate_diverges_with_context() {
        let (records, vocab) = small_corpus();
        let config = TrainConfig {
            learning_rate: 1e200,
            epochs: 3,
            ..small_config()
        };
        match train(&records, &records, None, &vocab, &config) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn history_csv_has_the_documented_shape() {
        let history = TrainHistory {
            epochs: vec![
                EpochRecord {
                    epoch: 1,
                    mean_loss: 0.987654321,
                    dev_pair_acc: None,
                    dev_macro_f1: None,
                    seconds: 1.5,
                },
                EpochRecord {
                    epoch: 2,
                    mean_loss: 0.75,
                    dev_pair_acc: Some(0.8125),
                    dev_macro_f1: Some(0.5),
                    seconds: 2.0,
                },
            ],
        };
        assert_eq!(
            history.to_csv_string(),
            "epoch,mean_loss,dev_pair_acc,dev_macro_f1,seconds\n\
             1,0.987654,,,1.500\n\
             2,0.750000,0.812500,0.500000,2.000\n"
        );
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly() {
        let (records, vocab) = small_corpus();
        let params = init_params(vocab.v(), 4, 3, 5, 17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &vocab, &path).unwrap();
        let (loaded, loaded_vocab) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.hyper, params.hyper);
        for (a, b) in loaded.groups().iter().zip(params.groups()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(loaded_vocab.to_file_string(), vocab.to_file_string());
        // Embeddings from the reloaded model are bit-identical too.
        let seq = TrigramSequence::from_record(&records[0], &vocab).unwrap();
        let (u, _) = encode_indices(&seq.indices, 0, &params).unwrap();
        let (w, _) = encode_indices(&seq.indices, 0, &loaded).unwrap();
        assert!(u
            .v
            .iter()
            .zip(&w.v)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let (_, vocab) = small_corpus();
        let params = init_params(vocab.v(), 4, 3, 5, 17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &vocab, &path).unwrap();

        // Bad magic.
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad_magic.ckpt");
        fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(Error::CheckpointMagic)));

        // Truncated tensors.
        let bytes = fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        fs::write(&cut, &bytes[..bytes.len() - 8]).unwrap();
        fs::copy(vocab_sidecar_path(&path), vocab_sidecar_path(&cut)).unwrap();
        assert!(matches!(
            load_checkpoint(&cut),
            Err(Error::CheckpointSize { .. })
        ));

        // Tampered vocabulary sidecar: rewrite the first trigram's text to
        // something that still parses but hashes differently.
        let tampered = dir.path().join("tampered.ckpt");
        fs::copy(&path, &tampered).unwrap();
        let sidecar = fs::read_to_string(vocab_sidecar_path(&path)).unwrap();
        let first = vocab.trigram(1).unwrap();
        let edited = sidecar.replacen(first, "zzz", 1);
        assert_ne!(edited, sidecar, "fixture must actually change the file");
        fs::write(vocab_sidecar_path(&tampered), edited).unwrap();
        assert!(matches!(
            load_checkpoint(&tampered),
            Err(Error::VocabHashMismatch { .. })
        ));

        // Missing sidecar.
        let lonely = dir.path().join("lonely.ckpt");
        fs::copy(&path, &lonely).unwrap();
        assert!(load_checkpoint(&lonely).is_err());
    }

    #[test]
    fn gradient_check_passes_at_small_scale() {
        let config = TrainConfig {
            embed_dim: 4,
            hidden_dim: 4,
            out_dim: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let report = gradient_check(&config, 3, 1e-5, 1e-4).unwrap();
        assert!(report.pass(), "{report}");
        assert!(!report.vacuous);
        assert_eq!(
            report.groups.iter().map(|g| g.name).collect::<Vec<_>>(),
            REPORT_GROUPS
        );
        for g in &report.groups {
            assert!(g.max_rel_err > 0.0, "group {} saw no signal at all", g.name);
        }
    }

    #[test]
    fn gradient_check_passes_with_the_default_seed_and_shape() {
        // The default seed once landed a rectifier preactivation 2e-6 from
        // zero, inside the finite-difference window; the kink-redraw logic
        // must keep this configuration green.
        let config = TrainConfig {
            embed_dim: 4,
            hidden_dim: 4,
            out_dim: 8,
            ..TrainConfig::default()
        };
        let report = gradient_check(&config, 10, 1e-5, 1e-4).unwrap();
        assert!(report.pass(), "{report}");
    }

    #[test]
    fn gradient_check_flags_a_planted_error() {
        // Corrupt one analytic gradient entry and make sure the comparator
        // actually notices; this guards the checker itself against rot.
        let (records, vocab) = small_corpus();
        let params = init_params(vocab.v(), 4, 4, 8, 5);
        let a = TrigramSequence::from_record(&records[0], &vocab)
            .unwrap()
            .indices;
        let b = TrigramSequence::from_record(&records[1], &vocab)
            .unwrap()
            .indices;
        let (u, tu) = encode_indices(&a, 0, &params).unwrap();
        let (v, tv) = encode_indices(&b, 1, &params).unwrap();
        let (_, du, dv) = pair_loss_grad(&u.v, &v.v, PairLabel::Same, 0.5).unwrap();
        let mut analytic = backward(&tu, &du, &tv, &dv, &params).unwrap();

        let honest = fd_max_rel_errs(&params, &analytic, 1e-5, |p| {
            let (u, _) = encode_indices(&a, 0, p)?;
            let (v, _) = encode_indices(&b, 1, p)?;
            pair_loss(&u.v, &v.v, PairLabel::Same, 0.5)
        })
        .unwrap();
        assert!(honest.iter().all(|&m| m < 1e-4));

        // Flip the sign of the largest projection-weight gradient.
        let slot = analytic.groups()[7]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        analytic.groups_mut()[7][slot] *= -1.0;
        let corrupted = fd_max_rel_errs(&params, &analytic, 1e-5, |p| {
            let (u, _) = encode_indices(&a, 0, p)?;
            let (v, _) = encode_indices(&b, 1, p)?;
            pair_loss(&u.v, &v.v, PairLabel::Same, 0.5)
        })
        .unwrap();
        assert!(
            corrupted[3] > 1e-4,
            "planted error went unnoticed: {corrupted:?}"
        );
    }

    #[test]
    fn zero_trials_make_a_vacuous_pass() {
        let report = gradient_check(&TrainConfig::default(), 0, 1e-5, 1e-4).unwrap();
        assert!(report.vacuous);
        assert!(report.pass());
        assert!(format!("{report}").contains("vacuous"));
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let bad_margin = TrainConfig {
            margin: 1.5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            bad_margin.validate(),
            Err(Error::MarginOutOfRange(_))
        ));
        let bad_lr = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad_lr.validate(), Err(Error::BadConfig(_))));
        let bad_clip = TrainConfig {
            grad_clip: Some(-1.0),
            ..TrainConfig::default()
        };
        assert!(matches!(bad_clip.validate(), Err(Error::BadConfig(_))));
        let bad_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(bad_epochs.validate(), Err(Error::BadConfig(_))));
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn optimizer_names_parse_case_insensitively() {
        assert_eq!("adam".parse::<Optimizer>().unwrap(), Optimizer::Adam);
        assert_eq!("SGD".parse::<Optimizer>().unwrap(), Optimizer::Sgd);
        assert!("momentum".parse::<Optimizer>().is_err());
        assert_eq!(Optimizer::Adam.to_string(), "adam");
    }
}
