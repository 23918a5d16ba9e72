//! The sentence encoder: embedding lookup, a bidirectional LSTM, and a
//! rectified linear projection.
//!
//! A trigram index sequence is embedded row-by-row, run through one LSTM
//! in input order and another in reverse order, and the two final hidden
//! states are concatenated and projected:
//!
//! ```text
//! s = max{0, W·[h_fwd; h_bwd] + b}
//! ```
//!
//! Both sides of a contrastive pair are encoded by this *same* function
//! over the *same* [`ModelParams`] — there is no separate left/right
//! tower, so twin outputs are bit-identical by construction.  The forward
//! pass records a tape of activations; [`backward`] replays it to produce
//! exact gradients for every parameter, summing both towers' contributions
//! into one shared gradient.
//!
//! All math is `f64` and allocation-order deterministic: identical inputs
//! and parameters give bit-identical outputs and gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::TrigramSequence;
use crate::tensor::{axpy, dot, Mat};

/// Default embedding width `e`.
pub const DEFAULT_EMBED_DIM: usize = 32;
/// Default LSTM hidden width `h` per direction.
pub const DEFAULT_HIDDEN_DIM: usize = 64;
/// Default output embedding width `d`.
pub const DEFAULT_OUT_DIM: usize = 128;

/// Model shape hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    /// Number of known trigrams `V`; the embedding table has `V + 1` rows
    /// (row 0 is the unknown-trigram slot).
    pub vocab_size: u32,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

/// Weights of one LSTM direction.
///
/// Gates are packed row-wise in `[input; forget; candidate; output]`
/// blocks of `hidden_dim` rows each, so both weight matrices have
/// `4 * hidden_dim` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `4h × e` input-to-hidden weights.
    pub w_ih: Mat,
    /// `4h × h` hidden-to-hidden weights.
    pub w_hh: Mat,
    /// `4h` gate biases.
    pub bias: Vec<f64>,
}

/// Every trainable tensor of the encoder, shared by both towers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hyper: Hyper,
    /// `(V + 1) × e` trigram embeddings; row 0 embeds unknown trigrams.
    pub embedding: Mat,
    pub fwd: LstmDirection,
    pub bwd: LstmDirection,
    /// `d × 2h` output projection.
    pub proj_w: Mat,
    /// `d` projection bias.
    pub proj_b: Vec<f64>,
}

/// Names of the parameter groups, aligned with [`ModelParams::groups`].
pub const GROUP_NAMES: [&str; 9] = [
    "embedding",
    "fwd.w_ih",
    "fwd.w_hh",
    "fwd.bias",
    "bwd.w_ih",
    "bwd.w_hh",
    "bwd.bias",
    "proj.w",
    "proj.b",
];

impl ModelParams {
    /// A model of the given shape with every parameter at zero, e.g. as a
    /// container about to be filled from a checkpoint.
    pub fn zeros(hyper: Hyper) -> Self {
        let Hyper {
            vocab_size,
            embed_dim: e,
            hidden_dim: h,
            out_dim: d,
        } = hyper;
        let dir = || LstmDirection {
            w_ih: Mat::zeros(4 * h, e),
            w_hh: Mat::zeros(4 * h, h),
            bias: vec![0.0; 4 * h],
        };
        ModelParams {
            hyper,
            embedding: Mat::zeros(vocab_size as usize + 1, e),
            fwd: dir(),
            bwd: dir(),
            proj_w: Mat::zeros(d, 2 * h),
            proj_b: vec![0.0; d],
        }
    }

    /// Flat views of every parameter group, in [`GROUP_NAMES`] order.
    pub fn groups(&self) -> [&[f64]; 9] {
        [
            self.embedding.as_slice(),
            self.fwd.w_ih.as_slice(),
            self.fwd.w_hh.as_slice(),
            &self.fwd.bias,
            self.bwd.w_ih.as_slice(),
            self.bwd.w_hh.as_slice(),
            &self.bwd.bias,
            self.proj_w.as_slice(),
            &self.proj_b,
        ]
    }

    /// Mutable flat views of every parameter group, in [`GROUP_NAMES`]
    /// order.
    pub fn groups_mut(&mut self) -> [&mut [f64]; 9] {
        let ModelParams {
            embedding,
            fwd,
            bwd,
            proj_w,
            proj_b,
            ..
        } = self;
        [
            embedding.as_mut_slice(),
            fwd.w_ih.as_mut_slice(),
            fwd.w_hh.as_mut_slice(),
            &mut fwd.bias,
            bwd.w_ih.as_mut_slice(),
            bwd.w_hh.as_mut_slice(),
            &mut bwd.bias,
            proj_w.as_mut_slice(),
            &mut proj_b[..],
        ]
    }

    /// Total number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }
}

fn init_direction(rng: &mut ChaCha8Rng, e: usize, h: usize) -> LstmDirection {
    let bound_ih = 1.0 / (e as f64).sqrt();
    let bound_hh = 1.0 / (h as f64).sqrt();
    let w_ih = Mat::from_fn(4 * h, e, |_, _| rng.random_range(-bound_ih..bound_ih));
    let w_hh = Mat::from_fn(4 * h, h, |_, _| rng.random_range(-bound_hh..bound_hh));
    // Zero biases except the forget gate, which starts open at 1.0 so that
    // early training does not wash out the cell state.
    let mut bias = vec![0.0; 4 * h];
    bias[h..2 * h].iter_mut().for_each(|b| *b = 1.0);
    LstmDirection { w_ih, w_hh, bias }
}

/// Deterministically initialize a model: weights drawn uniformly from
/// `[-1/√fan_in, +1/√fan_in]`, biases zero except the forget gates at 1.
/// The same seed always yields the same parameters.
pub fn init_params(
    vocab_size: u32,
    embed_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    seed: u64,
) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (e, h, d) = (embed_dim, hidden_dim, out_dim);
    let bound_e = 1.0 / (e as f64).sqrt();
    let embedding = Mat::from_fn(vocab_size as usize + 1, e, |_, _| {
        rng.random_range(-bound_e..bound_e)
    });
    let fwd = init_direction(&mut rng, e, h);
    let bwd = init_direction(&mut rng, e, h);
    let bound_p = 1.0 / (2.0 * h as f64).sqrt();
    let proj_w = Mat::from_fn(d, 2 * h, |_, _| rng.random_range(-bound_p..bound_p));
    let proj_b = vec![0.0; d];
    ModelParams {
        hyper: Hyper {
            vocab_size,
            embed_dim: e,
            hidden_dim: h,
            out_dim: d,
        },
        embedding,
        fwd,
        bwd,
        proj_w,
        proj_b,
    }
}

/// Which way an LSTM pass walks the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Activation record of one LSTM pass, consumed by backpropagation.
///
/// Row `t` of each matrix holds the step-`t` value; `indices[t]` is the
/// embedding row the step consumed (already in walk order, i.e. reversed
/// for a backward pass).
#[derive(Debug, Clone)]
pub struct LstmTape {
    indices: Vec<u32>,
    h_prev: Mat,
    c_prev: Mat,
    gate_i: Mat,
    gate_f: Mat,
    gate_g: Mat,
    gate_o: Mat,
    tanh_c: Mat,
    final_h: Vec<f64>,
}

impl LstmTape {
    /// Final hidden state of the pass.
    pub fn final_h(&self) -> &[f64] {
        &self.final_h
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_indices(seq: &[u32], params: &ModelParams) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let rows = params.embedding.rows() as u32;
    if let Some(&bad) = seq.iter().find(|&&i| i >= rows) {
        return Err(Error::ShapeMismatch(format!(
            "trigram index {bad} out of range for embedding table with {rows} rows"
        )));
    }
    Ok(())
}

/// Run one LSTM direction over `seq`, returning the final hidden state and
/// the activation tape.
pub fn lstm_pass(
    seq: &[u32],
    params: &ModelParams,
    dir: Direction,
) -> Result<(Vec<f64>, LstmTape)> {
    check_indices(seq, params)?;
    let h = params.hyper.hidden_dim;
    let dirp = match dir {
        Direction::Forward => &params.fwd,
        Direction::Backward => &params.bwd,
    };
    let indices: Vec<u32> = match dir {
        Direction::Forward => seq.to_vec(),
        Direction::Backward => seq.iter().rev().copied().collect(),
    };
    let t_len = indices.len();
    let mut tape = LstmTape {
        indices,
        h_prev: Mat::zeros(t_len, h),
        c_prev: Mat::zeros(t_len, h),
        gate_i: Mat::zeros(t_len, h),
        gate_f: Mat::zeros(t_len, h),
        gate_g: Mat::zeros(t_len, h),
        gate_o: Mat::zeros(t_len, h),
        tanh_c: Mat::zeros(t_len, h),
        final_h: Vec::new(),
    };

    let mut h_state = vec![0.0; h];
    let mut c_state = vec![0.0; h];
    let mut gates = vec![0.0; 4 * h];
    for t in 0..t_len {
        let x = params.embedding.row(tape.indices[t] as usize);
        tape.h_prev.row_mut(t).copy_from_slice(&h_state);
        tape.c_prev.row_mut(t).copy_from_slice(&c_state);

        gates.copy_from_slice(&dirp.bias);
        dirp.w_ih.matvec_acc(x, &mut gates);
        dirp.w_hh.matvec_acc(&h_state, &mut gates);

        for j in 0..h {
            let i_g = sigmoid(gates[j]);
            let f_g = sigmoid(gates[h + j]);
            let g_g = gates[2 * h + j].tanh();
            let o_g = sigmoid(gates[3 * h + j]);
            let c = f_g * c_state[j] + i_g * g_g;
            let tc = c.tanh();
            tape.gate_i.set(t, j, i_g);
            tape.gate_f.set(t, j, f_g);
            tape.gate_g.set(t, j, g_g);
            tape.gate_o.set(t, j, o_g);
            tape.tanh_c.set(t, j, tc);
            c_state[j] = c;
            h_state[j] = o_g * tc;
        }
    }
    tape.final_h = h_state.clone();
    Ok((h_state, tape))
}

/// A sentence embedding and the id of the record it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub v: Vec<f64>,
    pub source_id: u64,
}

/// Activation record of a full encode, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct EncoderTape {
    fwd: LstmTape,
    bwd: LstmTape,
    /// `[h_fwd; h_bwd]`, the projection input.
    concat: Vec<f64>,
    /// Which output units were strictly positive before rectification.
    /// Units at exactly zero count as inactive, so their subgradient is 0.
    active: Vec<bool>,
}

/// Encode a trigram index sequence into a `d`-dimensional embedding.
pub fn encode_indices(
    seq: &[u32],
    source_id: u64,
    params: &ModelParams,
) -> Result<(Embedding, EncoderTape)> {
    let h = params.hyper.hidden_dim;
    let d = params.hyper.out_dim;
    let (h_fwd, fwd_tape) = lstm_pass(seq, params, Direction::Forward)?;
    let (h_bwd, bwd_tape) = lstm_pass(seq, params, Direction::Backward)?;

    let mut concat = Vec::with_capacity(2 * h);
    concat.extend_from_slice(&h_fwd);
    concat.extend_from_slice(&h_bwd);

    let mut v = params.proj_b.clone();
    params.proj_w.matvec_acc(&concat, &mut v);
    let mut active = vec![false; d];
    for (j, s) in v.iter_mut().enumerate() {
        if *s > 0.0 {
            active[j] = true;
        } else {
            *s = 0.0;
        }
    }
    Ok((
        Embedding { v, source_id },
        EncoderTape {
            fwd: fwd_tape,
            bwd: bwd_tape,
            concat,
            active,
        },
    ))
}

/// Encode a [`TrigramSequence`], carrying its source id through.
pub fn encode(seq: &TrigramSequence, params: &ModelParams) -> Result<(Embedding, EncoderTape)> {
    encode_indices(&seq.indices, seq.source_id, params)
}

/// Gradient of one LSTM direction's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DirGrads {
    pub w_ih: Mat,
    pub w_hh: Mat,
    pub bias: Vec<f64>,
}

/// Gradients for every tensor in [`ModelParams`], same shapes and group
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub embedding: Mat,
    pub fwd: DirGrads,
    pub bwd: DirGrads,
    pub proj_w: Mat,
    pub proj_b: Vec<f64>,
}

impl ParamGrads {
    /// All-zero gradients shaped like `params`.
    pub fn zeros_like(params: &ModelParams) -> Self {
        let Hyper {
            embed_dim: e,
            hidden_dim: h,
            out_dim: d,
            ..
        } = params.hyper;
        let dir = || DirGrads {
            w_ih: Mat::zeros(4 * h, e),
            w_hh: Mat::zeros(4 * h, h),
            bias: vec![0.0; 4 * h],
        };
        ParamGrads {
            embedding: Mat::zeros(params.embedding.rows(), e),
            fwd: dir(),
            bwd: dir(),
            proj_w: Mat::zeros(d, 2 * h),
            proj_b: vec![0.0; d],
        }
    }

    /// Flat views in [`GROUP_NAMES`] order.
    pub fn groups(&self) -> [&[f64]; 9] {
        [
            self.embedding.as_slice(),
            self.fwd.w_ih.as_slice(),
            self.fwd.w_hh.as_slice(),
            &self.fwd.bias,
            self.bwd.w_ih.as_slice(),
            self.bwd.w_hh.as_slice(),
            &self.bwd.bias,
            self.proj_w.as_slice(),
            &self.proj_b,
        ]
    }

    /// Mutable flat views in [`GROUP_NAMES`] order.
    pub fn groups_mut(&mut self) -> [&mut [f64]; 9] {
        let ParamGrads {
            embedding,
            fwd,
            bwd,
            proj_w,
            proj_b,
        } = self;
        [
            embedding.as_mut_slice(),
            fwd.w_ih.as_mut_slice(),
            fwd.w_hh.as_mut_slice(),
            &mut fwd.bias,
            bwd.w_ih.as_mut_slice(),
            bwd.w_hh.as_mut_slice(),
            &mut bwd.bias,
            proj_w.as_mut_slice(),
            &mut proj_b[..],
        ]
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.groups_mut().into_iter().zip(other.groups()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Multiply every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for g in self.groups_mut() {
            for x in g {
                *x *= factor;
            }
        }
    }

    /// Global squared L2 norm across all groups.
    pub fn sq_l2_norm(&self) -> f64 {
        self.groups().iter().map(|g| dot(g, g)).sum()
    }
}

/// Backpropagate one tower: `grad_out` is `∂loss/∂embedding` (length `d`);
/// gradients accumulate into `into`.
pub fn tower_backward(
    tape: &EncoderTape,
    grad_out: &[f64],
    params: &ModelParams,
    into: &mut ParamGrads,
) -> Result<()> {
    let h = params.hyper.hidden_dim;
    let d = params.hyper.out_dim;
    if grad_out.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient has length {}, expected {d}",
            grad_out.len()
        )));
    }
    // Rectifier: units that were clamped (including exactly zero) pass no
    // gradient.
    let ds: Vec<f64> = grad_out
        .iter()
        .zip(&tape.active)
        .map(|(&g, &a)| if a { g } else { 0.0 })
        .collect();

    axpy(1.0, &ds, &mut into.proj_b);
    into.proj_w.add_outer(&ds, &tape.concat);

    let mut d_concat = vec![0.0; 2 * h];
    params.proj_w.t_matvec_acc(&ds, &mut d_concat);
    lstm_backward(
        &tape.fwd,
        &d_concat[..h],
        &params.fwd,
        params,
        &mut into.fwd,
        &mut into.embedding,
    );
    lstm_backward(
        &tape.bwd,
        &d_concat[h..],
        &params.bwd,
        params,
        &mut into.bwd,
        &mut into.embedding,
    );
    Ok(())
}

/// Backpropagation through time for one direction.  `d_final` is the
/// gradient flowing into the pass's final hidden state.
fn lstm_backward(
    tape: &LstmTape,
    d_final: &[f64],
    dirp: &LstmDirection,
    params: &ModelParams,
    g: &mut DirGrads,
    g_emb: &mut Mat,
) {
    let h = d_final.len();
    let t_len = tape.indices.len();
    let mut dh_next = d_final.to_vec();
    let mut dc_next = vec![0.0; h];
    let mut d_gates = vec![0.0; 4 * h];
    let mut dx = vec![0.0; params.hyper.embed_dim];
    for t in (0..t_len).rev() {
        let (i_g, f_g, g_g, o_g) = (
            tape.gate_i.row(t),
            tape.gate_f.row(t),
            tape.gate_g.row(t),
            tape.gate_o.row(t),
        );
        let (tc, c_prev, h_prev) = (tape.tanh_c.row(t), tape.c_prev.row(t), tape.h_prev.row(t));
        for j in 0..h {
            let dh = dh_next[j];
            let dc = dh * o_g[j] * (1.0 - tc[j] * tc[j]) + dc_next[j];
            d_gates[j] = dc * g_g[j] * i_g[j] * (1.0 - i_g[j]);
            d_gates[h + j] = dc * c_prev[j] * f_g[j] * (1.0 - f_g[j]);
            d_gates[2 * h + j] = dc * i_g[j] * (1.0 - g_g[j] * g_g[j]);
            d_gates[3 * h + j] = dh * tc[j] * o_g[j] * (1.0 - o_g[j]);
            dc_next[j] = dc * f_g[j];
        }
        axpy(1.0, &d_gates, &mut g.bias);
        let x = params.embedding.row(tape.indices[t] as usize);
        g.w_ih.add_outer(&d_gates, x);
        g.w_hh.add_outer(&d_gates, h_prev);

        dx.iter_mut().for_each(|v| *v = 0.0);
        dirp.w_ih.t_matvec_acc(&d_gates, &mut dx);
        axpy(1.0, &dx, g_emb.row_mut(tape.indices[t] as usize));

        dh_next.iter_mut().for_each(|v| *v = 0.0);
        dirp.w_hh.t_matvec_acc(&d_gates, &mut dh_next);
    }
}

/// Backpropagate a whole pair: each tower's gradient is computed into its
/// own buffer and the two are then summed entrywise, so the result does not
/// depend on which text played the anchor role.
pub fn backward(
    tape_a: &EncoderTape,
    grad_a: &[f64],
    tape_b: &EncoderTape,
    grad_b: &[f64],
    params: &ModelParams,
) -> Result<ParamGrads> {
    let mut ga = ParamGrads::zeros_like(params);
    tower_backward(tape_a, grad_a, params, &mut ga)?;
    let mut gb = ParamGrads::zeros_like(params);
    tower_backward(tape_b, grad_b, params, &mut gb)?;
    ga.add_assign(&gb);
    Ok(ga)
}
