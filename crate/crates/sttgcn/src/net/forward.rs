//! Forward pass. Every stage has a thin public entry point that validates
//! shapes, plus traced internals used by [`super::backward`].
//!
//! Time-indexed feature sequences are `Vec<DenseMatrix>` with one `N x C`
//! matrix per step. A module application stacks three consecutive steps into
//! a `3N x C` matrix (step-major: node `i` at relative step `t` sits at row
//! `t*N + i`).
//!
//! The whole pass is batched: a batch of B samples runs as one set of wide
//! matrix products. The layer stack lays its module applications out as
//! column blocks indexed by (sample, position) for the adjacency product
//! and as row-stacked blocks for the weight products; the dilated branch
//! and the output block stack samples along rows. Per output element the
//! accumulation order matches the single-sample path exactly, so batched
//! and per-sample execution agree bitwise.

use super::params::{DilatedLayerParams, GluConvParams, ModelParams, SttgclParams};
use super::{ModelConfig, CONVS_PER_MODULE, DILATED_KERNEL, DILATED_LAYERS};
use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, DenseTensor3};

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn add_row_bias(m: &mut DenseMatrix, bias: &[f64]) {
    debug_assert_eq!(m.cols(), bias.len());
    for r in 0..m.rows() {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub(crate) fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    DenseMatrix::from_vec(a.rows(), a.cols(), data)
}

/// Stack `steps[offset..offset+3]` into one `3N x C` matrix.
fn stack3(steps: &[DenseMatrix], offset: usize) -> DenseMatrix {
    let n = steps[offset].rows();
    let c = steps[offset].cols();
    let mut out = DenseMatrix::zeros(3 * n, c);
    for t in 0..3 {
        for i in 0..n {
            out.row_mut(t * n + i).copy_from_slice(steps[offset + t].row(i));
        }
    }
    out
}

/// `(3N x blocks*C)` column-blocked -> `(blocks*3N x C)` row-stacked.
fn wide_to_rows(w: &DenseMatrix, blocks: usize, c: usize) -> DenseMatrix {
    let rows3n = w.rows();
    let mut out = DenseMatrix::zeros(blocks * rows3n, c);
    for p in 0..blocks {
        for r in 0..rows3n {
            out.row_mut(p * rows3n + r)
                .copy_from_slice(&w.row(r)[p * c..(p + 1) * c]);
        }
    }
    out
}

/// Inverse of [`wide_to_rows`].
fn rows_to_wide(r: &DenseMatrix, blocks: usize, c: usize) -> DenseMatrix {
    let rows3n = r.rows() / blocks;
    let mut out = DenseMatrix::zeros(rows3n, blocks * c);
    for p in 0..blocks {
        for row in 0..rows3n {
            out.row_mut(row)[p * c..(p + 1) * c].copy_from_slice(r.row(p * rows3n + row));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

pub(crate) struct ConvTrace {
    /// Propagated input `A' h` for every (sample, position) block,
    /// row-stacked `(B*P*3N) x C_in`.
    pub(crate) prop_rows: DenseMatrix,
    /// Value path pre-gating, row-stacked.
    pub(crate) value: DenseMatrix,
    /// Sigmoid of the gate path, row-stacked.
    pub(crate) gate: DenseMatrix,
}

pub(crate) struct LayerTrace {
    /// Module applications per sample.
    pub(crate) positions: usize,
    pub(crate) convs: Vec<ConvTrace>,
    /// Row-stacked output of each stacked conv, the max-pool inputs.
    pub(crate) outputs: Vec<DenseMatrix>,
}

pub(crate) struct DilatedLayerTrace {
    /// Inputs the layer consumed: per step, samples stacked along rows
    /// (`B*N x C_in`).
    pub(crate) inputs: Vec<DenseMatrix>,
    /// Pre-gating value path per output step.
    pub(crate) value: Vec<DenseMatrix>,
    /// Sigmoid of the gate path per output step.
    pub(crate) gate: Vec<DenseMatrix>,
}

/// Cached activations of one forward pass (any batch size), sufficient for
/// exact reverse-mode gradients.
pub struct ForwardTrace {
    pub(crate) batch: usize,
    pub(crate) inputs: Vec<DenseTensor3>,
    pub(crate) layers: Vec<LayerTrace>,
    pub(crate) dilated: Vec<DilatedLayerTrace>,
    /// `(B*N) x fc_in`.
    pub(crate) features: DenseMatrix,
    pub(crate) hidden_pre: DenseMatrix,
    pub(crate) hidden_post: DenseMatrix,
    /// Per-sensor scale used to denormalize predictions.
    pub(crate) std: Vec<f64>,
}

impl ForwardTrace {
    pub fn batch_len(&self) -> usize {
        self.batch
    }
}

// ---------------------------------------------------------------------------
// Public single-application stages
// ---------------------------------------------------------------------------

/// Position embedding: per step `t` and node `i`,
/// `out[t][i] = x[t,i,:] W_in + b_in + temporal[t] + spatial[i]`.
pub fn position_embed(
    x: &DenseTensor3,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<Vec<DenseMatrix>> {
    let (t_len, n, c) = x.dims();
    if t_len != cfg.window || n != cfg.n_nodes || c != cfg.in_features {
        return Err(Error::usage(format!(
            "position_embed: input {t_len}x{n}x{c} does not match config {}x{}x{}",
            cfg.window, cfg.n_nodes, cfg.in_features
        )));
    }
    let c0 = cfg.embed_width();
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut h = DenseMatrix::zeros(n, c0);
        embed_into(&mut h, x, t, params);
        out.push(h);
    }
    Ok(out)
}

/// Write one embedded step into `h` (`N x c0`).
fn embed_into(h: &mut DenseMatrix, x: &DenseTensor3, t: usize, params: &ModelParams) {
    let (_, n, c) = x.dims();
    for i in 0..n {
        let row = h.row_mut(i);
        for f in 0..c {
            let xv = x.get(t, i, f);
            if xv != 0.0 {
                for (o, w) in row.iter_mut().zip(params.w_in.row(f)) {
                    *o += xv * w;
                }
            }
        }
        for (k, o) in row.iter_mut().enumerate() {
            *o += params.b_in[k] + params.temporal_embed.get(t, k) + params.spatial_embed.get(i, k);
        }
    }
}

/// Gated graph convolution: `(A' h W1 + b1) * sigmoid(A' h W2 + b2)`.
pub fn glu_graph_conv(
    h: &DenseMatrix,
    aprime: &DenseMatrix,
    conv: &GluConvParams,
) -> Result<DenseMatrix> {
    if aprime.rows() != aprime.cols() || aprime.cols() != h.rows() {
        return Err(Error::usage(format!(
            "glu_graph_conv: adjacency {}x{} incompatible with input {}x{}",
            aprime.rows(),
            aprime.cols(),
            h.rows(),
            h.cols()
        )));
    }
    if conv.w1.rows() != h.cols() || conv.w1.shape() != conv.w2.shape() {
        return Err(Error::usage(format!(
            "glu_graph_conv: weights {}x{} incompatible with input width {}",
            conv.w1.rows(),
            conv.w1.cols(),
            h.cols()
        )));
    }
    let propagated = aprime.matmul(h);
    let mut value = propagated.matmul(&conv.w1);
    add_row_bias(&mut value, &conv.b1);
    let mut gate = propagated.matmul(&conv.w2);
    add_row_bias(&mut gate, &conv.b2);
    for v in gate.data_mut() {
        *v = sigmoid(*v);
    }
    Ok(hadamard(&value, &gate))
}

/// One synchronous module: three stacked gated graph convolutions on a
/// `3N x C` stacked triple, elementwise-max aggregation of the three conv
/// outputs, cropped to the middle step's `N` rows.
pub fn stsgcm_forward(
    x3: &DenseMatrix,
    aprime: &DenseMatrix,
    module: &SttgclParams,
) -> Result<DenseMatrix> {
    if module.convs.len() != CONVS_PER_MODULE {
        return Err(Error::usage(format!(
            "module must hold {CONVS_PER_MODULE} convolutions, has {}",
            module.convs.len()
        )));
    }
    if x3.rows() % 3 != 0 {
        return Err(Error::usage(format!(
            "stacked input rows {} not divisible by 3",
            x3.rows()
        )));
    }
    let mut h = x3.clone();
    let mut outputs = Vec::with_capacity(CONVS_PER_MODULE);
    for conv in &module.convs {
        h = glu_graph_conv(&h, aprime, conv)?;
        outputs.push(h.clone());
    }
    let n = x3.rows() / 3;
    let width = outputs[0].cols();
    let mut cropped = DenseMatrix::zeros(n, width);
    for i in 0..n {
        for c in 0..width {
            let mut best = outputs[0].get(n + i, c);
            for o in &outputs[1..] {
                best = best.max(o.get(n + i, c));
            }
            cropped.set(i, c, best);
        }
    }
    Ok(cropped)
}

/// One layer: the shared module applied to every triple of consecutive
/// steps; the time axis shrinks by two.
pub fn sttgcl_forward(
    x: &[DenseMatrix],
    aprime: &DenseMatrix,
    layer: &SttgclParams,
) -> Result<Vec<DenseMatrix>> {
    if x.len() < 3 {
        return Err(Error::usage(format!(
            "layer input has {} steps, need at least 3",
            x.len()
        )));
    }
    stsgcm_forward(&stack3(x, 0), aprime, layer)?;
    let seqs = vec![x.to_vec()];
    let (_, mut out) = sttgcl_traced(&seqs, aprime, layer);
    Ok(out.pop().expect("one sequence in, one out"))
}

/// Batched layer forward over `B` step sequences: every (sample, position)
/// module application at once.
pub(crate) fn sttgcl_traced(
    seqs: &[Vec<DenseMatrix>],
    aprime: &DenseMatrix,
    layer: &SttgclParams,
) -> (LayerTrace, Vec<Vec<DenseMatrix>>) {
    let batch = seqs.len();
    let positions = seqs[0].len() - 2;
    let n = seqs[0][0].rows();
    let c_in = seqs[0][0].cols();
    let blocks = batch * positions;

    // Column-blocked stack of every (sample, position) 3-step input.
    let mut wide = DenseMatrix::zeros(3 * n, blocks * c_in);
    for (b, seq) in seqs.iter().enumerate() {
        for p in 0..positions {
            let col = (b * positions + p) * c_in;
            for t in 0..3 {
                for i in 0..n {
                    wide.row_mut(t * n + i)[col..col + c_in].copy_from_slice(seq[p + t].row(i));
                }
            }
        }
    }

    let mut convs = Vec::with_capacity(CONVS_PER_MODULE);
    let mut outputs: Vec<DenseMatrix> = Vec::with_capacity(CONVS_PER_MODULE);
    let mut current_wide = wide;
    let mut width_in = c_in;
    for conv in &layer.convs {
        let prop_wide = aprime.matmul(&current_wide);
        let prop_rows = wide_to_rows(&prop_wide, blocks, width_in);
        let mut value = prop_rows.matmul(&conv.w1);
        add_row_bias(&mut value, &conv.b1);
        let mut gate = prop_rows.matmul(&conv.w2);
        add_row_bias(&mut gate, &conv.b2);
        for v in gate.data_mut() {
            *v = sigmoid(*v);
        }
        let out_rows = hadamard(&value, &gate);
        width_in = out_rows.cols();
        current_wide = rows_to_wide(&out_rows, blocks, width_in);
        convs.push(ConvTrace { prop_rows, value, gate });
        outputs.push(out_rows);
    }

    // Elementwise max over the conv outputs, cropped to each application's
    // middle step.
    let width = outputs[0].cols();
    let mut out = Vec::with_capacity(batch);
    for b in 0..batch {
        let mut steps = Vec::with_capacity(positions);
        for p in 0..positions {
            let block = b * positions + p;
            let mut cropped = DenseMatrix::zeros(n, width);
            for i in 0..n {
                let r = block * 3 * n + n + i;
                for c in 0..width {
                    let mut best = outputs[0].get(r, c);
                    for o in &outputs[1..] {
                        best = best.max(o.get(r, c));
                    }
                    cropped.set(i, c, best);
                }
            }
            steps.push(cropped);
        }
        out.push(steps);
    }
    (LayerTrace { positions, convs, outputs }, out)
}

/// Two gated dilated convolution layers along time, per-node shared
/// weights, valid (no padding) correlation:
/// `out[t] = (sum_k in[t + k*d] Wv[k] + bv) * sigmoid(gate path)`.
pub fn dilated_conv_forward(
    x: &[DenseMatrix],
    branch: &[DilatedLayerParams],
    dilation: usize,
) -> Result<Vec<DenseMatrix>> {
    if branch.len() != DILATED_LAYERS {
        return Err(Error::usage(format!(
            "dilated branch must hold {DILATED_LAYERS} layers, has {}",
            branch.len()
        )));
    }
    let shrink = DILATED_LAYERS * (DILATED_KERNEL - 1) * dilation;
    if x.len() <= shrink {
        return Err(Error::usage(format!(
            "dilated receptive field {shrink} does not fit {} steps",
            x.len()
        )));
    }
    let (_, out) = dilated_traced(x, branch, dilation);
    Ok(out)
}

fn dilated_layer_traced(
    x: &[DenseMatrix],
    layer: &DilatedLayerParams,
    dilation: usize,
) -> (DilatedLayerTrace, Vec<DenseMatrix>) {
    let t_out = x.len() - (DILATED_KERNEL - 1) * dilation;
    let mut value = Vec::with_capacity(t_out);
    let mut gate = Vec::with_capacity(t_out);
    let mut out = Vec::with_capacity(t_out);
    for t in 0..t_out {
        let mut v = x[t].matmul(&layer.value_w[0]);
        let mut g = x[t].matmul(&layer.gate_w[0]);
        for k in 1..DILATED_KERNEL {
            v.add_assign(&x[t + k * dilation].matmul(&layer.value_w[k]));
            g.add_assign(&x[t + k * dilation].matmul(&layer.gate_w[k]));
        }
        add_row_bias(&mut v, &layer.value_b);
        add_row_bias(&mut g, &layer.gate_b);
        for gv in g.data_mut() {
            *gv = sigmoid(*gv);
        }
        out.push(hadamard(&v, &g));
        value.push(v);
        gate.push(g);
    }
    let trace = DilatedLayerTrace { inputs: x.to_vec(), value, gate };
    (trace, out)
}

pub(crate) fn dilated_traced(
    x: &[DenseMatrix],
    branch: &[DilatedLayerParams],
    dilation: usize,
) -> (Vec<DilatedLayerTrace>, Vec<DenseMatrix>) {
    let mut traces = Vec::with_capacity(branch.len());
    let mut current = x.to_vec();
    for layer in branch {
        let (trace, out) = dilated_layer_traced(&current, layer, dilation);
        traces.push(trace);
        current = out;
    }
    (traces, current)
}

/// Output block: crop both branches to their latest `merged_steps` steps,
/// concatenate along features, flatten per node (step-major), then two
/// shared fully connected layers with a ReLU between them.
pub fn output_block(
    stt_out: &[DenseMatrix],
    dil_out: &[DenseMatrix],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<DenseMatrix> {
    if stt_out.is_empty() || dil_out.is_empty() {
        return Err(Error::usage("output block needs nonempty branches".to_string()));
    }
    let (_, _, _, pred) = output_block_traced(stt_out, dil_out, params, cfg)?;
    Ok(pred)
}

/// Branch steps may stack several samples along rows; the flattening then
/// applies per stacked row.
#[allow(clippy::type_complexity)]
fn output_block_traced(
    stt_out: &[DenseMatrix],
    dil_out: &[DenseMatrix],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix)> {
    let t_min = stt_out.len().min(dil_out.len());
    let rows = stt_out[0].rows();
    let c_stt = stt_out[0].cols();
    let c_dil = dil_out[0].cols();
    let c_tot = c_stt + c_dil;
    if params.w_fc1.rows() != t_min * c_tot {
        return Err(Error::usage(format!(
            "output block: fc1 expects {} features, branches provide {}",
            params.w_fc1.rows(),
            t_min * c_tot
        )));
    }
    let stt_off = stt_out.len() - t_min;
    let dil_off = dil_out.len() - t_min;

    let mut features = DenseMatrix::zeros(rows, t_min * c_tot);
    for i in 0..rows {
        let row = features.row_mut(i);
        for t in 0..t_min {
            let base = t * c_tot;
            row[base..base + c_stt].copy_from_slice(stt_out[stt_off + t].row(i));
            row[base + c_stt..base + c_tot].copy_from_slice(dil_out[dil_off + t].row(i));
        }
    }

    let mut hidden_pre = features.matmul(&params.w_fc1);
    add_row_bias(&mut hidden_pre, &params.b_fc1);
    let mut hidden_post = hidden_pre.clone();
    for v in hidden_post.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut pred = hidden_post.matmul(&params.w_fc2);
    add_row_bias(&mut pred, &params.b_fc2);
    let _ = cfg;
    Ok((features, hidden_pre, hidden_post, pred))
}

/// Pointwise Huber loss averaged over all elements: squared branch for
/// `|pred - y| <= delta`, linear branch beyond.
pub fn huber_loss(y: &DenseMatrix, y_pred: &DenseMatrix, delta: f64) -> Result<f64> {
    if y.shape() != y_pred.shape() {
        return Err(Error::usage(format!(
            "huber_loss: shapes {:?} vs {:?}",
            y.shape(),
            y_pred.shape()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::usage("huber_loss: delta must be > 0".to_string()));
    }
    let mut sum = 0.0;
    for (t, p) in y.data().iter().zip(y_pred.data()) {
        let r = p - t;
        sum += if r.abs() <= delta {
            0.5 * r * r
        } else {
            delta * r.abs() - 0.5 * delta * delta
        };
    }
    Ok(sum / y.data().len() as f64)
}

/// Gradient of [`huber_loss`] with respect to the predictions (the mean is
/// folded in). The boundary `|r| = delta` uses the squared branch.
pub fn huber_grad(y: &DenseMatrix, y_pred: &DenseMatrix, delta: f64) -> Result<DenseMatrix> {
    if y.shape() != y_pred.shape() {
        return Err(Error::usage("huber_grad: shape mismatch".to_string()));
    }
    let scale = 1.0 / y.data().len() as f64;
    let data = y
        .data()
        .iter()
        .zip(y_pred.data())
        .map(|(t, p)| {
            let r = p - t;
            let g = if r.abs() <= delta { r } else { delta * r.signum() };
            g * scale
        })
        .collect();
    Ok(DenseMatrix::from_vec(y.rows(), y.cols(), data))
}

// ---------------------------------------------------------------------------
// Full passes
// ---------------------------------------------------------------------------

/// Full forward pass of one sample. Returns the denormalized `N x horizon`
/// predictions and a batch-of-one trace for [`super::backward`].
pub fn forward_sample(
    x: &DenseTensor3,
    aprime: &DenseMatrix,
    params: &ModelParams,
    cfg: &ModelConfig,
    stats: &NormStats,
) -> Result<(DenseMatrix, ForwardTrace)> {
    let (mut preds, trace) = forward(&[x], aprime, params, cfg, stats)?;
    Ok((preds.pop().expect("one sample in, one out"), trace))
}

/// Batch forward: denormalized predictions per sample plus one shared trace
/// covering the whole batch.
pub fn forward(
    batch: &[&DenseTensor3],
    aprime: &DenseMatrix,
    params: &ModelParams,
    cfg: &ModelConfig,
    stats: &NormStats,
) -> Result<(Vec<DenseMatrix>, ForwardTrace)> {
    if batch.is_empty() {
        return Err(Error::usage("empty batch".to_string()));
    }
    if aprime.rows() != 3 * cfg.n_nodes || aprime.cols() != 3 * cfg.n_nodes {
        return Err(Error::usage(format!(
            "adjacency is {}x{}, config expects {}x{}",
            aprime.rows(),
            aprime.cols(),
            3 * cfg.n_nodes,
            3 * cfg.n_nodes
        )));
    }
    if stats.std.len() != cfg.n_nodes {
        return Err(Error::usage("normalization stats do not match node count".to_string()));
    }
    for x in batch {
        let (t_len, n, c) = x.dims();
        if t_len != cfg.window || n != cfg.n_nodes || c != cfg.in_features {
            return Err(Error::usage(format!(
                "sample {t_len}x{n}x{c} does not match config {}x{}x{}",
                cfg.window, cfg.n_nodes, cfg.in_features
            )));
        }
    }

    let b = batch.len();
    let n = cfg.n_nodes;
    let c0 = cfg.embed_width();

    // Embedding, kept per sample for the layer stack.
    let mut embedded: Vec<Vec<DenseMatrix>> = Vec::with_capacity(b);
    for x in batch {
        let mut steps = Vec::with_capacity(cfg.window);
        for t in 0..cfg.window {
            let mut h = DenseMatrix::zeros(n, c0);
            embed_into(&mut h, x, t, params);
            steps.push(h);
        }
        embedded.push(steps);
    }

    let mut layer_traces = Vec::with_capacity(params.layers.len());
    let mut current = embedded.clone();
    for layer in &params.layers {
        let (trace, out) = sttgcl_traced(&current, aprime, layer);
        layer_traces.push(trace);
        current = out;
    }

    // Dilated branch on row-stacked steps.
    let stack_steps = |seqs: &[Vec<DenseMatrix>], t: usize| -> DenseMatrix {
        let width = seqs[0][t].cols();
        let mut m = DenseMatrix::zeros(b * n, width);
        for (s, seq) in seqs.iter().enumerate() {
            for i in 0..n {
                m.row_mut(s * n + i).copy_from_slice(seq[t].row(i));
            }
        }
        m
    };
    let stacked_embedded: Vec<DenseMatrix> =
        (0..cfg.window).map(|t| stack_steps(&embedded, t)).collect();
    let (dilated_traces, dil_out) = dilated_traced(&stacked_embedded, &params.dilated, cfg.dilation);

    let stacked_stt: Vec<DenseMatrix> =
        (0..cfg.stt_steps()).map(|t| stack_steps(&current, t)).collect();

    let (features, hidden_pre, hidden_post, pred_norm) =
        output_block_traced(&stacked_stt, &dil_out, params, cfg)?;

    // Denormalize and split per sample.
    let mut preds = Vec::with_capacity(b);
    for s in 0..b {
        let mut p = DenseMatrix::zeros(n, cfg.horizon);
        for i in 0..n {
            let sd = stats.std[i];
            let mean = stats.mean[i];
            for (slot, v) in p.row_mut(i).iter_mut().zip(pred_norm.row(s * n + i)) {
                *slot = v * sd + mean;
            }
        }
        preds.push(p);
    }

    let trace = ForwardTrace {
        batch: b,
        inputs: batch.iter().map(|x| (*x).clone()).collect(),
        layers: layer_traces,
        dilated: dilated_traces,
        features,
        hidden_pre,
        hidden_post,
        std: stats.std.clone(),
    };
    Ok((preds, trace))
}
