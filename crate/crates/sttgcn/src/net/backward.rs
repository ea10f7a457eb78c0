//! Hand-written reverse-mode gradients against the cached forward trace.
//! Each function mirrors one forward stage in reverse, in the same batched
//! layouts; gradients accumulate into a `ModelParams`-shaped container.

use super::forward::ForwardTrace;
use super::params::{DilatedLayerParams, ModelParams, SttgclParams};
use super::{ModelConfig, DILATED_KERNEL};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

fn add_col_sums(acc: &mut [f64], m: &DenseMatrix) {
    debug_assert_eq!(acc.len(), m.cols());
    for r in 0..m.rows() {
        for (a, v) in acc.iter_mut().zip(m.row(r)) {
            *a += v;
        }
    }
}

fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    DenseMatrix::from_vec(a.rows(), a.cols(), data)
}

/// `(blocks*3N x C)` row-stacked -> `(3N x blocks*C)` column-blocked.
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

/// Backward of one batched layer: crop adjoint, max-pool routing (ties to
/// the lowest conv index, matching the forward), the conv chain, and the
/// unstacking of every (sample, position) triple back onto the input steps.
fn layer_backward(
    d_out: &[Vec<DenseMatrix>],
    trace: &super::forward::LayerTrace,
    layer: &SttgclParams,
    aprime: &DenseMatrix,
    grads: &mut SttgclParams,
    n: usize,
    c_in: usize,
) -> Vec<Vec<DenseMatrix>> {
    let batch = d_out.len();
    let positions = trace.positions;
    let blocks = batch * positions;

    // Crop adjoint + max routing, directly in the row-stacked layout.
    let width = trace.outputs[0].cols();
    let mut d_outputs: Vec<DenseMatrix> = trace
        .outputs
        .iter()
        .map(|o| DenseMatrix::zeros(o.rows(), o.cols()))
        .collect();
    for (b, sample_d) in d_out.iter().enumerate() {
        for (p, d_pos) in sample_d.iter().enumerate() {
            let block = b * positions + p;
            for i in 0..n {
                let r = block * 3 * n + n + i;
                for c in 0..width {
                    let g = d_pos.get(i, c);
                    if g == 0.0 {
                        continue;
                    }
                    let mut best_j = 0;
                    let mut best = trace.outputs[0].get(r, c);
                    for (j, o) in trace.outputs.iter().enumerate().skip(1) {
                        let v = o.get(r, c);
                        if v > best {
                            best = v;
                            best_j = j;
                        }
                    }
                    let cur = d_outputs[best_j].get(r, c);
                    d_outputs[best_j].set(r, c, cur + g);
                }
            }
        }
    }

    // Conv chain in reverse; d_h is row-stacked.
    let last = trace.convs.len() - 1;
    let mut d_h = d_outputs[last].clone();
    let mut d_input_wide: Option<DenseMatrix> = None;
    for j in (0..=last).rev() {
        let conv_trace = &trace.convs[j];
        let conv = &layer.convs[j];
        let grad = &mut grads.convs[j];

        let d_value = hadamard(&d_h, &conv_trace.gate);
        let mut d_gate = hadamard(&d_h, &conv_trace.value);
        for (dg, g) in d_gate.data_mut().iter_mut().zip(conv_trace.gate.data()) {
            *dg *= g * (1.0 - g);
        }
        grad.w1.add_assign(&conv_trace.prop_rows.matmul_tn(&d_value));
        add_col_sums(&mut grad.b1, &d_value);
        grad.w2.add_assign(&conv_trace.prop_rows.matmul_tn(&d_gate));
        add_col_sums(&mut grad.b2, &d_gate);

        let mut d_prop = d_value.matmul_nt(&conv.w1);
        d_prop.add_assign(&d_gate.matmul_nt(&conv.w2));
        let d_prop_wide = rows_to_wide(&d_prop, blocks, d_prop.cols());
        let d_in_wide = aprime.matmul_tn(&d_prop_wide);

        if j == 0 {
            d_input_wide = Some(d_in_wide);
        } else {
            // Gradient w.r.t. the previous conv's row-stacked output.
            let width_prev = trace.outputs[j - 1].cols();
            let mut d_prev = d_outputs[j - 1].clone();
            for block in 0..blocks {
                for r in 0..3 * n {
                    let src = &d_in_wide.row(r)[block * width_prev..(block + 1) * width_prev];
                    for (acc, v) in d_prev.row_mut(block * 3 * n + r).iter_mut().zip(src) {
                        *acc += v;
                    }
                }
            }
            d_h = d_prev;
        }
    }

    // Unstack the wide input gradient onto every sample's input steps.
    let d_wide = d_input_wide.expect("conv chain ran");
    let t_in = positions + 2;
    let mut d_input = vec![vec![DenseMatrix::zeros(n, c_in); t_in]; batch];
    for (b, sample_d) in d_input.iter_mut().enumerate() {
        for p in 0..positions {
            let block = b * positions + p;
            for t in 0..3 {
                for i in 0..n {
                    let src = &d_wide.row(t * n + i)[block * c_in..(block + 1) * c_in];
                    for (acc, v) in sample_d[p + t].row_mut(i).iter_mut().zip(src) {
                        *acc += v;
                    }
                }
            }
        }
    }
    d_input
}

fn dilated_layer_backward(
    d_out: &[DenseMatrix],
    trace: &super::forward::DilatedLayerTrace,
    layer: &DilatedLayerParams,
    dilation: usize,
    grad: &mut DilatedLayerParams,
) -> Vec<DenseMatrix> {
    let rows = trace.inputs[0].rows();
    let c_in = trace.inputs[0].cols();
    let mut d_input = vec![DenseMatrix::zeros(rows, c_in); trace.inputs.len()];
    for (t, d) in d_out.iter().enumerate() {
        let d_v = hadamard(d, &trace.gate[t]);
        let mut d_g = hadamard(d, &trace.value[t]);
        for (dg, g) in d_g.data_mut().iter_mut().zip(trace.gate[t].data()) {
            *dg *= g * (1.0 - g);
        }
        add_col_sums(&mut grad.value_b, &d_v);
        add_col_sums(&mut grad.gate_b, &d_g);
        for k in 0..DILATED_KERNEL {
            let src = &trace.inputs[t + k * dilation];
            grad.value_w[k].add_assign(&src.matmul_tn(&d_v));
            grad.gate_w[k].add_assign(&src.matmul_tn(&d_g));
            let mut d_src = d_v.matmul_nt(&layer.value_w[k]);
            d_src.add_assign(&d_g.matmul_nt(&layer.gate_w[k]));
            d_input[t + k * dilation].add_assign(&d_src);
        }
    }
    d_input
}

/// Exact parameter gradients for a traced forward pass. `loss_grads` holds
/// one `N x horizon` gradient (with respect to the denormalized
/// predictions) per sample in the trace's batch.
pub fn backward(
    trace: &ForwardTrace,
    loss_grads: &[DenseMatrix],
    aprime: &DenseMatrix,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ModelParams> {
    let mut grads = ModelParams::zeros(cfg);
    backward_accumulate(trace, loss_grads, aprime, params, cfg, &mut grads)?;
    Ok(grads)
}

/// As [`backward`], accumulating into an existing gradient container.
pub fn backward_accumulate(
    trace: &ForwardTrace,
    loss_grads: &[DenseMatrix],
    aprime: &DenseMatrix,
    params: &ModelParams,
    cfg: &ModelConfig,
    grads: &mut ModelParams,
) -> Result<()> {
    let b = trace.batch;
    let n = cfg.n_nodes;
    if loss_grads.len() != b {
        return Err(Error::usage(format!(
            "got {} loss gradients for a trace of batch {b}",
            loss_grads.len()
        )));
    }
    for lg in loss_grads {
        if lg.shape() != (n, cfg.horizon) {
            return Err(Error::usage(format!(
                "loss gradient is {}x{}, expected {}x{}",
                lg.rows(),
                lg.cols(),
                n,
                cfg.horizon
            )));
        }
    }

    // Denormalization adjoint, stacked along rows:
    // d/d pred_norm = d/d pred * sigma_i.
    let mut d_pred = DenseMatrix::zeros(b * n, cfg.horizon);
    for (s, lg) in loss_grads.iter().enumerate() {
        for i in 0..n {
            let sd = trace.std[i];
            for (slot, v) in d_pred.row_mut(s * n + i).iter_mut().zip(lg.row(i)) {
                *slot = v * sd;
            }
        }
    }

    // Output block.
    grads.w_fc2.add_assign(&trace.hidden_post.matmul_tn(&d_pred));
    add_col_sums(&mut grads.b_fc2, &d_pred);
    let d_hidden_post = d_pred.matmul_nt(&params.w_fc2);
    let mut d_hidden_pre = d_hidden_post;
    for (dv, pre) in d_hidden_pre.data_mut().iter_mut().zip(trace.hidden_pre.data()) {
        if *pre <= 0.0 {
            *dv = 0.0;
        }
    }
    grads.w_fc1.add_assign(&trace.features.matmul_tn(&d_hidden_pre));
    add_col_sums(&mut grads.b_fc1, &d_hidden_pre);
    let d_features = d_hidden_pre.matmul_nt(&params.w_fc1);

    // Split features back into the cropped branch gradients (row-stacked).
    let t_min = cfg.merged_steps();
    let c_stt = cfg.stt_width();
    let c_dil = cfg.dilated_channels;
    let c_tot = c_stt + c_dil;
    let stt_len = cfg.stt_steps();
    let dil_len = cfg.dilated_steps();
    let mut d_stt_stacked = vec![DenseMatrix::zeros(b * n, c_stt); stt_len];
    let mut d_dil = vec![DenseMatrix::zeros(b * n, c_dil); dil_len];
    let stt_off = stt_len - t_min;
    let dil_off = dil_len - t_min;
    for r in 0..b * n {
        let row = d_features.row(r);
        for t in 0..t_min {
            let base = t * c_tot;
            d_stt_stacked[stt_off + t]
                .row_mut(r)
                .copy_from_slice(&row[base..base + c_stt]);
            d_dil[dil_off + t]
                .row_mut(r)
                .copy_from_slice(&row[base + c_stt..base + c_tot]);
        }
    }

    // Dilated branch, layers in reverse.
    let mut d_dil_current = d_dil;
    for l in (0..params.dilated.len()).rev() {
        d_dil_current = dilated_layer_backward(
            &d_dil_current,
            &trace.dilated[l],
            &params.dilated[l],
            cfg.dilation,
            &mut grads.dilated[l],
        );
    }
    let d_embedded_from_dilated = d_dil_current;

    // Layer stack in reverse, per-sample step gradients.
    let mut d_layer_out: Vec<Vec<DenseMatrix>> = (0..b)
        .map(|s| {
            (0..stt_len)
                .map(|t| {
                    DenseMatrix::from_fn(n, c_stt, |i, c| d_stt_stacked[t].get(s * n + i, c))
                })
                .collect()
        })
        .collect();
    for l in (0..params.layers.len()).rev() {
        let c_in = if l == 0 { cfg.embed_width() } else { cfg.stt_width() };
        d_layer_out = layer_backward(
            &d_layer_out,
            &trace.layers[l],
            &params.layers[l],
            aprime,
            &mut grads.layers[l],
            n,
            c_in,
        );
    }

    // Merge both branches' gradients at the embedding, then the embedding
    // parameters themselves.
    for (s, sample_d) in d_layer_out.iter_mut().enumerate() {
        for (t, dh) in sample_d.iter_mut().enumerate() {
            for i in 0..n {
                let src = d_embedded_from_dilated[t].row(s * n + i);
                for (acc, v) in dh.row_mut(i).iter_mut().zip(src) {
                    *acc += v;
                }
            }
        }
    }

    for (s, sample_d) in d_layer_out.iter().enumerate() {
        let input = &trace.inputs[s];
        for (t, dh) in sample_d.iter().enumerate() {
            add_col_sums(grads.temporal_embed.row_mut(t), dh);
            add_col_sums(&mut grads.b_in, dh);
            for i in 0..n {
                for (acc, v) in grads.spatial_embed.row_mut(i).iter_mut().zip(dh.row(i)) {
                    *acc += v;
                }
                for f in 0..cfg.in_features {
                    let xv = input.get(t, i, f);
                    if xv != 0.0 {
                        for (acc, v) in grads.w_in.row_mut(f).iter_mut().zip(dh.row(i)) {
                            *acc += xv * v;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
