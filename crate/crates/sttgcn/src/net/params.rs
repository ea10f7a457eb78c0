//! Learnable parameter containers, initialization, and the flat enumeration
//! used by the optimizer, checkpoints and gradient checks.
//!
//! Flat enumeration order (row-major within each piece):
//! 1. temporal embedding (`T x c0`), 2. spatial embedding (`N x c0`),
//! 3. input projection weight (`C x c0`) and bias,
//! 4. per layer, per stacked conv: `w1`, `b1`, `w2`, `b2`,
//! 5. per dilated layer: value taps (kernel-position order), value bias,
//!    gate taps, gate bias,
//! 6. output block: `w_fc1, b_fc1, w_fc2, b_fc2`.

use super::{ModelConfig, CONVS_PER_MODULE, DILATED_KERNEL, DILATED_LAYERS};
use crate::tensor::DenseMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One gated graph convolution: value path `w1, b1`, gate path `w2, b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GluConvParams {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

/// The three stacked gated convolutions of one synchronous module (shared
/// across the module applications within a layer).
#[derive(Debug, Clone, PartialEq)]
pub struct SttgclParams {
    pub convs: Vec<GluConvParams>,
}

/// One gated dilated convolution layer; `value_w[k]`/`gate_w[k]` is the
/// `C_in x C_out` mixing matrix of kernel position `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedLayerParams {
    pub value_w: Vec<DenseMatrix>,
    pub value_b: Vec<f64>,
    pub gate_w: Vec<DenseMatrix>,
    pub gate_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub temporal_embed: DenseMatrix,
    pub spatial_embed: DenseMatrix,
    pub w_in: DenseMatrix,
    pub b_in: Vec<f64>,
    pub layers: Vec<SttgclParams>,
    pub dilated: Vec<DilatedLayerParams>,
    pub w_fc1: DenseMatrix,
    pub b_fc1: Vec<f64>,
    pub w_fc2: DenseMatrix,
    pub b_fc2: Vec<f64>,
}

fn conv_in_width(cfg: &ModelConfig, layer: usize, conv: usize) -> usize {
    if conv == 0 {
        if layer == 0 {
            cfg.embed_width()
        } else {
            cfg.stt_width()
        }
    } else {
        cfg.filters[conv - 1]
    }
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> ModelParams {
        let c0 = cfg.embed_width();
        let layers = (0..cfg.layers)
            .map(|l| SttgclParams {
                convs: (0..CONVS_PER_MODULE)
                    .map(|c| GluConvParams {
                        w1: DenseMatrix::zeros(conv_in_width(cfg, l, c), cfg.filters[c]),
                        b1: vec![0.0; cfg.filters[c]],
                        w2: DenseMatrix::zeros(conv_in_width(cfg, l, c), cfg.filters[c]),
                        b2: vec![0.0; cfg.filters[c]],
                    })
                    .collect(),
            })
            .collect();
        let dilated = (0..DILATED_LAYERS)
            .map(|l| {
                let c_in = if l == 0 { c0 } else { cfg.dilated_channels };
                DilatedLayerParams {
                    value_w: (0..DILATED_KERNEL)
                        .map(|_| DenseMatrix::zeros(c_in, cfg.dilated_channels))
                        .collect(),
                    value_b: vec![0.0; cfg.dilated_channels],
                    gate_w: (0..DILATED_KERNEL)
                        .map(|_| DenseMatrix::zeros(c_in, cfg.dilated_channels))
                        .collect(),
                    gate_b: vec![0.0; cfg.dilated_channels],
                }
            })
            .collect();
        ModelParams {
            temporal_embed: DenseMatrix::zeros(cfg.window, c0),
            spatial_embed: DenseMatrix::zeros(cfg.n_nodes, c0),
            w_in: DenseMatrix::zeros(cfg.in_features, c0),
            b_in: vec![0.0; c0],
            layers,
            dilated,
            w_fc1: DenseMatrix::zeros(cfg.fc_in(), cfg.fc_hidden),
            b_fc1: vec![0.0; cfg.fc_hidden],
            w_fc2: DenseMatrix::zeros(cfg.fc_hidden, cfg.horizon),
            b_fc2: vec![0.0; cfg.horizon],
        }
    }

    /// Standard initialization: embeddings zero, biases zero, every weight
    /// matrix uniform in `+-sqrt(6 / (fan_in + fan_out))`. Draw order
    /// follows the flat enumeration (embeddings and biases draw nothing).
    pub fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams {
        let mut p = ModelParams::zeros(cfg);
        fill_xavier(&mut p.w_in, rng, cfg.in_features, cfg.embed_width());
        let filters = cfg.filters;
        for (l, layer) in p.layers.iter_mut().enumerate() {
            for (c, conv) in layer.convs.iter_mut().enumerate() {
                let fan_in = conv_in_width(cfg, l, c);
                fill_xavier(&mut conv.w1, rng, fan_in, filters[c]);
                fill_xavier(&mut conv.w2, rng, fan_in, filters[c]);
            }
        }
        for (l, dil) in p.dilated.iter_mut().enumerate() {
            let c_in = if l == 0 { cfg.embed_width() } else { cfg.dilated_channels };
            let fan_in = DILATED_KERNEL * c_in;
            for w in &mut dil.value_w {
                fill_xavier(w, rng, fan_in, cfg.dilated_channels);
            }
            for w in &mut dil.gate_w {
                fill_xavier(w, rng, fan_in, cfg.dilated_channels);
            }
        }
        fill_xavier(&mut p.w_fc1, rng, cfg.fc_in(), cfg.fc_hidden);
        fill_xavier(&mut p.w_fc2, rng, cfg.fc_hidden, cfg.horizon);
        p
    }

    /// Named parameter groups in the flat enumeration order.
    pub fn group_names(&self) -> Vec<String> {
        let mut names = vec![
            "temporal_embed".to_string(),
            "spatial_embed".to_string(),
            "w_in".to_string(),
            "b_in".to_string(),
        ];
        for l in 0..self.layers.len() {
            for c in 0..self.layers[l].convs.len() {
                for part in ["w1", "b1", "w2", "b2"] {
                    names.push(format!("layer{l}.conv{c}.{part}"));
                }
            }
        }
        for l in 0..self.dilated.len() {
            for k in 0..DILATED_KERNEL {
                names.push(format!("dilated{l}.value_w{k}"));
            }
            names.push(format!("dilated{l}.value_b"));
            for k in 0..DILATED_KERNEL {
                names.push(format!("dilated{l}.gate_w{k}"));
            }
            names.push(format!("dilated{l}.gate_b"));
        }
        names.extend(["w_fc1", "b_fc1", "w_fc2", "b_fc2"].map(String::from));
        names
    }

    fn for_each_slice<'a>(&'a self, mut f: impl FnMut(&'a [f64])) {
        f(self.temporal_embed.data());
        f(self.spatial_embed.data());
        f(self.w_in.data());
        f(&self.b_in);
        for layer in &self.layers {
            for conv in &layer.convs {
                f(conv.w1.data());
                f(&conv.b1);
                f(conv.w2.data());
                f(&conv.b2);
            }
        }
        for dil in &self.dilated {
            for w in &dil.value_w {
                f(w.data());
            }
            f(&dil.value_b);
            for w in &dil.gate_w {
                f(w.data());
            }
            f(&dil.gate_b);
        }
        f(self.w_fc1.data());
        f(&self.b_fc1);
        f(self.w_fc2.data());
        f(&self.b_fc2);
    }

    fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.temporal_embed.data_mut());
        f(self.spatial_embed.data_mut());
        f(self.w_in.data_mut());
        f(&mut self.b_in);
        for layer in &mut self.layers {
            for conv in &mut layer.convs {
                f(conv.w1.data_mut());
                f(&mut conv.b1);
                f(conv.w2.data_mut());
                f(&mut conv.b2);
            }
        }
        for dil in &mut self.dilated {
            for w in &mut dil.value_w {
                f(w.data_mut());
            }
            f(&mut dil.value_b);
            for w in &mut dil.gate_w {
                f(w.data_mut());
            }
            f(&mut dil.gate_b);
        }
        f(self.w_fc1.data_mut());
        f(&mut self.b_fc1);
        f(self.w_fc2.data_mut());
        f(&mut self.b_fc2);
    }

    pub fn total_count(&self) -> usize {
        let mut n = 0;
        self.for_each_slice(|s| n += s.len());
        n
    }

    /// Concatenation of all groups in enumeration order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_count());
        self.for_each_slice(|s| out.extend_from_slice(s));
        out
    }

    /// Inverse of [`ModelParams::to_flat`]. Panics if the length is wrong.
    pub fn copy_from_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter vector length mismatch");
    }

    /// Group (name, range-in-flat-vector) pairs, for per-group gradient
    /// checks.
    pub fn group_ranges(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let names = self.group_names();
        let mut ranges = Vec::with_capacity(names.len());
        let mut offset = 0;
        let mut idx = 0;
        self.for_each_slice(|s| {
            ranges.push((names[idx].clone(), offset..offset + s.len()));
            offset += s.len();
            idx += 1;
        });
        ranges
    }
}

fn fill_xavier(m: &mut DenseMatrix, rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.data_mut() {
        *v = rng.random_range(-bound..=bound);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::defaults(4);
        cfg.layers = 2;
        cfg.filters = [8, 8, 8];
        cfg.dilated_channels = 8;
        cfg.fc_hidden = 16;
        cfg
    }

    #[test]
    fn total_count_matches_closed_form() {
        for cfg in [tiny_cfg(), ModelConfig::defaults(170), ModelConfig::defaults(12)] {
            let p = ModelParams::zeros(&cfg);
            assert_eq!(p.total_count(), cfg.param_count(), "{cfg:?}");
        }
    }

    #[test]
    fn flat_roundtrip() {
        let cfg = tiny_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::init(&cfg, &mut rng);
        let flat = p.to_flat();
        let mut q = ModelParams::zeros(&cfg);
        q.copy_from_flat(&flat);
        assert_eq!(p, q);

        let ranges = p.group_ranges();
        assert_eq!(ranges.last().unwrap().1.end, flat.len());
        // Ranges tile the vector without gaps.
        let mut expect = 0;
        for (_, r) in &ranges {
            assert_eq!(r.start, expect);
            expect = r.end;
        }
    }

    #[test]
    fn init_is_seeded_and_embeds_zero() {
        let cfg = tiny_cfg();
        let a = ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        let b = ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        assert!(a.temporal_embed.data().iter().all(|v| *v == 0.0));
        assert!(a.spatial_embed.data().iter().all(|v| *v == 0.0));
        assert!(a.w_fc1.data().iter().any(|v| *v != 0.0));
    }
}
