//! Forward/backward implementations of the layers the models need:
//! embedding lookup, LSTM cells and sequences (uni- and bidirectional),
//! width-{3,4,5} 1-d convolution with max-over-time pooling, affine
//! projection and stabilized softmax cross-entropy.
//!
//! Every backward accumulates (`+=`) into its gradient arguments so one
//! buffer can collect a whole batch.

use crate::error::{Error, Result};
use crate::nn::tensor::{axpy, dot, matvec, matvec_transpose_acc, outer_acc, Tensor};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------- embedding

/// Row lookup: output row t is `e[ids[t]]`.
pub fn embed_forward(ids: &[usize], e: &Tensor) -> Result<Tensor> {
    if ids.is_empty() {
        return Err(Error::Invalid("embed: empty id sequence".into()));
    }
    let v = e.rows();
    let d = e.cols();
    let mut out = Tensor::zeros(&[ids.len(), d]);
    for (t, &id) in ids.iter().enumerate() {
        if id >= v {
            return Err(Error::TokenOutOfRange { id, vocab: v });
        }
        out.row_mut(t).copy_from_slice(e.row(id));
    }
    Ok(out)
}

/// Accumulates the upstream rows into the looked-up embedding rows.
pub fn embed_backward(ids: &[usize], upstream: &Tensor, grad_e: &mut Tensor) {
    debug_assert_eq!(ids.len(), upstream.rows());
    for (t, &id) in ids.iter().enumerate() {
        axpy(1.0, upstream.row(t), grad_e.row_mut(id));
    }
}

// ---------------------------------------------------------------- LSTM cell

/// Per-step activations needed by the backward pass. Gate rows of the
/// weight matrix are ordered [input; forget; output; candidate].
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub joined: Vec<f64>, // [x; h_prev]
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_o: Vec<f64>,
    pub cand: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &Tensor,
    b: &Tensor,
) -> Result<(Vec<f64>, Vec<f64>, LstmStepCache)> {
    let h_dim = h_prev.len();
    if w.rows() != 4 * h_dim || w.cols() != x.len() + h_dim || b.len() != 4 * h_dim {
        return Err(Error::ShapeMismatch {
            op: "lstm_cell",
            detail: format!(
                "w {:?}, b {:?} vs x {} h {}",
                w.shape(),
                b.shape(),
                x.len(),
                h_dim
            ),
        });
    }
    let mut joined = Vec::with_capacity(x.len() + h_dim);
    joined.extend_from_slice(x);
    joined.extend_from_slice(h_prev);

    let mut acts = vec![0.0; 4 * h_dim];
    matvec(w, &joined, &mut acts);
    for (a, bias) in acts.iter_mut().zip(b.data()) {
        *a += bias;
    }

    let mut gate_i = vec![0.0; h_dim];
    let mut gate_f = vec![0.0; h_dim];
    let mut gate_o = vec![0.0; h_dim];
    let mut cand = vec![0.0; h_dim];
    for k in 0..h_dim {
        gate_i[k] = sigmoid(acts[k]);
        gate_f[k] = sigmoid(acts[h_dim + k]);
        gate_o[k] = sigmoid(acts[2 * h_dim + k]);
        cand[k] = acts[3 * h_dim + k].tanh();
    }

    let mut c = vec![0.0; h_dim];
    let mut tanh_c = vec![0.0; h_dim];
    let mut h = vec![0.0; h_dim];
    for k in 0..h_dim {
        c[k] = gate_f[k] * c_prev[k] + gate_i[k] * cand[k];
        tanh_c[k] = c[k].tanh();
        h[k] = gate_o[k] * tanh_c[k];
    }

    let cache = LstmStepCache {
        joined,
        gate_i,
        gate_f,
        gate_o,
        cand,
        c_prev: c_prev.to_vec(),
        c,
        tanh_c,
    };
    let c_out = cache.c.clone();
    Ok((h, c_out, cache))
}

/// `dh`/`dc` are the incoming gradients on this step's outputs; `dx`,
/// `dh_prev`, `dc_prev`, `dw`, `db` all accumulate.
#[allow(clippy::too_many_arguments)]
pub fn lstm_cell_backward(
    cache: &LstmStepCache,
    w: &Tensor,
    dh: &[f64],
    dc: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
    dx: &mut [f64],
    dh_prev: &mut [f64],
    dc_prev: &mut [f64],
) {
    let h_dim = dh.len();
    let x_dim = cache.joined.len() - h_dim;
    let mut d_acts = vec![0.0; 4 * h_dim];
    for k in 0..h_dim {
        let d_out_gate = dh[k] * cache.tanh_c[k];
        let dc_total = dc[k] + dh[k] * cache.gate_o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
        let d_in_gate = dc_total * cache.cand[k];
        let d_forget = dc_total * cache.c_prev[k];
        let d_cand = dc_total * cache.gate_i[k];
        dc_prev[k] += dc_total * cache.gate_f[k];

        let (i, f, o, g) = (cache.gate_i[k], cache.gate_f[k], cache.gate_o[k], cache.cand[k]);
        d_acts[k] = d_in_gate * i * (1.0 - i);
        d_acts[h_dim + k] = d_forget * f * (1.0 - f);
        d_acts[2 * h_dim + k] = d_out_gate * o * (1.0 - o);
        d_acts[3 * h_dim + k] = d_cand * (1.0 - g * g);
    }
    outer_acc(dw, &d_acts, &cache.joined);
    axpy(1.0, &d_acts, db.data_mut());

    let mut d_joined = vec![0.0; cache.joined.len()];
    matvec_transpose_acc(w, &d_acts, &mut d_joined);
    axpy(1.0, &d_joined[..x_dim], dx);
    axpy(1.0, &d_joined[x_dim..], dh_prev);
}

// ------------------------------------------------------------ LSTM sequence

/// Unrolled forward pass over a whole sequence (zero initial state unless
/// given). Keeps per-step caches for BPTT.
#[derive(Debug)]
pub struct LstmRun {
    pub hidden: Vec<Vec<f64>>, // h_t per step
    pub caches: Vec<LstmStepCache>,
    pub h_last: Vec<f64>,
    pub c_last: Vec<f64>,
}

pub fn lstm_seq_forward(
    inputs: &Tensor, // L x d_in
    w: &Tensor,
    b: &Tensor,
    init: Option<(&[f64], &[f64])>,
) -> Result<LstmRun> {
    let h_dim = b.len() / 4;
    let steps = inputs.rows();
    let zero = vec![0.0; h_dim];
    let (mut h, mut c) = match init {
        Some((h0, c0)) => (h0.to_vec(), c0.to_vec()),
        None => (zero.clone(), zero),
    };
    let mut hidden = Vec::with_capacity(steps);
    let mut caches = Vec::with_capacity(steps);
    for t in 0..steps {
        let (h_new, c_new, cache) = lstm_cell_forward(inputs.row(t), &h, &c, w, b)?;
        hidden.push(h_new.clone());
        caches.push(cache);
        h = h_new;
        c = c_new;
    }
    Ok(LstmRun {
        hidden,
        caches,
        h_last: h,
        c_last: c,
    })
}

/// BPTT over a forward run. `d_hidden[t]` is the gradient on step t's
/// hidden output; `d_last` optionally adds (dh, dc) on the final state.
/// Returns the input gradients; (dh0, dc0) land in `d_init` when given.
#[allow(clippy::too_many_arguments)]
pub fn lstm_seq_backward(
    run: &LstmRun,
    w: &Tensor,
    d_hidden: &[Vec<f64>],
    d_last: Option<(&[f64], &[f64])>,
    dw: &mut Tensor,
    db: &mut Tensor,
    d_init: Option<(&mut [f64], &mut [f64])>,
) -> Tensor {
    let steps = run.caches.len();
    let h_dim = run.h_last.len();
    let x_dim = if steps > 0 {
        run.caches[0].joined.len() - h_dim
    } else {
        0
    };
    let mut d_inputs = Tensor::zeros(&[steps, x_dim]);
    let mut dh = vec![0.0; h_dim];
    let mut dc = vec![0.0; h_dim];
    if let Some((dh_last, dc_last)) = d_last {
        axpy(1.0, dh_last, &mut dh);
        axpy(1.0, dc_last, &mut dc);
    }
    let mut dh_prev = vec![0.0; h_dim];
    let mut dc_prev = vec![0.0; h_dim];
    for t in (0..steps).rev() {
        axpy(1.0, &d_hidden[t], &mut dh);
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        dc_prev.iter_mut().for_each(|v| *v = 0.0);
        lstm_cell_backward(
            &run.caches[t],
            w,
            &dh,
            &dc,
            dw,
            db,
            d_inputs.row_mut(t),
            &mut dh_prev,
            &mut dc_prev,
        );
        std::mem::swap(&mut dh, &mut dh_prev);
        std::mem::swap(&mut dc, &mut dc_prev);
    }
    if let Some((dh0, dc0)) = d_init {
        axpy(1.0, &dh, dh0);
        axpy(1.0, &dc, dc0);
    }
    d_inputs
}

// ------------------------------------------------------------ bidirectional

#[derive(Debug)]
pub struct BiLstmRun {
    pub forward: LstmRun,
    pub backward: LstmRun, // processes the reversed sequence
    pub outputs: Tensor,   // L x 2h: [h_fwd[t] ; h_bwd at original position t]
    pub final_state: Vec<f64>, // [h_fwd last ; h_bwd last]
}

/// Concatenated forward/backward encoding per position. The backward
/// half at original position t is the state after consuming tokens
/// L-1..=t, so `final_state` pairs the two ends of the sequence.
pub fn bilstm_forward(
    inputs: &Tensor,
    w_fwd: &Tensor,
    b_fwd: &Tensor,
    w_bwd: &Tensor,
    b_bwd: &Tensor,
) -> Result<BiLstmRun> {
    let steps = inputs.rows();
    let mut reversed = Tensor::zeros(&[steps, inputs.cols()]);
    for t in 0..steps {
        reversed.row_mut(t).copy_from_slice(inputs.row(steps - 1 - t));
    }
    let forward = lstm_seq_forward(inputs, w_fwd, b_fwd, None)?;
    let backward = lstm_seq_forward(&reversed, w_bwd, b_bwd, None)?;
    let h_dim = forward.h_last.len();
    let mut outputs = Tensor::zeros(&[steps, 2 * h_dim]);
    for t in 0..steps {
        outputs.row_mut(t)[..h_dim].copy_from_slice(&forward.hidden[t]);
        outputs.row_mut(t)[h_dim..].copy_from_slice(&backward.hidden[steps - 1 - t]);
    }
    let mut final_state = forward.h_last.clone();
    final_state.extend_from_slice(&backward.h_last);
    Ok(BiLstmRun {
        forward,
        backward,
        outputs,
        final_state,
    })
}

/// `d_outputs`: L x 2h gradient on the concatenated outputs;
/// `d_final`: optional gradient on `final_state`.
#[allow(clippy::too_many_arguments)]
pub fn bilstm_backward(
    run: &BiLstmRun,
    w_fwd: &Tensor,
    w_bwd: &Tensor,
    d_outputs: Option<&Tensor>,
    d_final: Option<&[f64]>,
    dw_fwd: &mut Tensor,
    db_fwd: &mut Tensor,
    dw_bwd: &mut Tensor,
    db_bwd: &mut Tensor,
) -> Tensor {
    let steps = run.forward.caches.len();
    let h_dim = run.forward.h_last.len();
    let mut d_h_fwd = vec![vec![0.0; h_dim]; steps];
    let mut d_h_bwd = vec![vec![0.0; h_dim]; steps];
    if let Some(d_out) = d_outputs {
        for t in 0..steps {
            axpy(1.0, &d_out.row(t)[..h_dim], &mut d_h_fwd[t]);
            // row t's second half came from the reversed run's step L-1-t
            axpy(1.0, &d_out.row(t)[h_dim..], &mut d_h_bwd[steps - 1 - t]);
        }
    }
    let zeros = vec![0.0; h_dim];
    let (d_final_fwd, d_final_bwd) = match d_final {
        Some(df) => (df[..h_dim].to_vec(), df[h_dim..].to_vec()),
        None => (zeros.clone(), zeros),
    };
    let d_in_fwd = lstm_seq_backward(
        &run.forward,
        w_fwd,
        &d_h_fwd,
        Some((&d_final_fwd, &vec![0.0; h_dim])),
        dw_fwd,
        db_fwd,
        None,
    );
    let d_in_bwd_rev = lstm_seq_backward(
        &run.backward,
        w_bwd,
        &d_h_bwd,
        Some((&d_final_bwd, &vec![0.0; h_dim])),
        dw_bwd,
        db_bwd,
        None,
    );
    let x_dim = d_in_fwd.cols();
    let mut d_inputs = Tensor::zeros(&[steps, x_dim]);
    for t in 0..steps {
        let row = d_inputs.row_mut(t);
        axpy(1.0, d_in_fwd.row(t), row);
        axpy(1.0, d_in_bwd_rev.row(steps - 1 - t), row);
    }
    d_inputs
}

// ----------------------------------------------------- conv + max-over-time

/// One bank of filters of a single width over an embedded sequence.
/// `weights`: [n_filters, width * d_embed]; windows are contiguous slices
/// of the row-major sequence. Pooled value k = max over positions of
/// relu(w_k . window + b_k).
#[derive(Debug)]
pub struct ConvPoolCache {
    pub width: usize,
    pub argmax: Vec<usize>,  // winning window start per filter
    pub pre_act: Vec<f64>,   // winning pre-activation per filter
}

pub fn conv_maxpool_forward(
    seq: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    width: usize,
) -> Result<(Vec<f64>, ConvPoolCache)> {
    let steps = seq.rows();
    let d = seq.cols();
    if steps < width {
        return Err(Error::ShapeMismatch {
            op: "conv_maxpool",
            detail: format!("sequence length {steps} shorter than filter width {width}"),
        });
    }
    if weights.cols() != width * d {
        return Err(Error::ShapeMismatch {
            op: "conv_maxpool",
            detail: format!("filter cols {} vs width*d {}", weights.cols(), width * d),
        });
    }
    let n_f = weights.rows();
    let mut pooled = vec![0.0; n_f];
    let mut argmax = vec![0usize; n_f];
    let mut pre_act = vec![f64::NEG_INFINITY; n_f];
    let flat = seq.data();
    for pos in 0..=(steps - width) {
        let window = &flat[pos * d..(pos + width) * d];
        for k in 0..n_f {
            let z = dot(weights.row(k), window) + bias.data()[k];
            if z > pre_act[k] {
                pre_act[k] = z;
                argmax[k] = pos;
            }
        }
    }
    for k in 0..n_f {
        pooled[k] = pre_act[k].max(0.0);
    }
    Ok((
        pooled,
        ConvPoolCache {
            width,
            argmax,
            pre_act,
        },
    ))
}

/// Gradient flows only into each filter's argmax window (and only when the
/// winning pre-activation cleared the ReLU).
pub fn conv_maxpool_backward(
    cache: &ConvPoolCache,
    seq: &Tensor,
    weights: &Tensor,
    d_pooled: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
    d_seq: &mut Tensor,
) {
    let d = seq.cols();
    let width = cache.width;
    let flat = seq.data();
    for (k, &g) in d_pooled.iter().enumerate() {
        if g == 0.0 || cache.pre_act[k] <= 0.0 {
            continue;
        }
        let pos = cache.argmax[k];
        let window = &flat[pos * d..(pos + width) * d];
        axpy(g, window, dw.row_mut(k));
        db.data_mut()[k] += g;
        let d_window = &mut d_seq.data_mut()[pos * d..(pos + width) * d];
        axpy(g, weights.row(k), d_window);
    }
}

// --------------------------------------------------------------- projection

pub fn affine_forward(x: &[f64], w: &Tensor, b: &Tensor, out: &mut [f64]) {
    matvec(w, x, out);
    for (o, bias) in out.iter_mut().zip(b.data()) {
        *o += bias;
    }
}

pub fn affine_backward(
    x: &[f64],
    w: &Tensor,
    dy: &[f64],
    dw: &mut Tensor,
    db: &mut Tensor,
    dx: &mut [f64],
) {
    outer_acc(dw, dy, x);
    axpy(1.0, dy, db.data_mut());
    matvec_transpose_acc(w, dy, dx);
}

// ------------------------------------------------------------------ softmax

/// Max-stabilized softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// dlogits_i += p_i * (dp_i - sum_j p_j dp_j)
pub fn softmax_backward(probs: &[f64], d_probs: &[f64], d_logits: &mut [f64]) {
    let inner = dot(probs, d_probs);
    for ((dl, &p), &dp) in d_logits.iter_mut().zip(probs).zip(d_probs) {
        *dl += p * (dp - inner);
    }
}

/// Stabilized `-log softmax(logits)[target]` and the softmax itself
/// (whose gradient is `softmax - onehot(target)`).
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Invalid(format!(
            "xent target {} out of range {}",
            target,
            logits.len()
        )));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let loss = sum.ln() - (logits[target] - m);
    probs.iter_mut().for_each(|v| *v /= sum);
    Ok((loss, probs))
}
