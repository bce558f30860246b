//! Residual Swin-Transformer blocks: window self-attention with alternating
//! shifted windows (window 8, MLP ratio 2), used by the SwinIR-lite model
//! and as the transformer feature-extractor option of the operator
//! pipelines. Grids are reflect-padded to window multiples and cropped back
//! by the caller.

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{Graph, ParamId, Params, Var};
use crate::models::baselines::Upsampler;
use crate::models::rrdb::Conv3x3;
use crate::Result;

pub const WINDOW: usize = 8;
const MLP_RATIO: usize = 2;
const LN_EPS: f64 = 1e-5;

fn trunc_normal(params: &mut Params, rng: &mut ChaCha20Rng, name: &str, shape: &[usize]) -> ParamId {
    let w = ArrayD::from_shape_simple_fn(IxDyn(shape), || {
        let g: f64 = StandardNormal.sample(rng);
        (g * 0.02).clamp(-0.04, 0.04)
    });
    params.add(name, w)
}

fn ones(params: &mut Params, name: &str, n: usize) -> ParamId {
    params.add(name, ArrayD::from_elem(IxDyn(&[n]), 1.0))
}

fn zeros(params: &mut Params, name: &str, shape: &[usize]) -> ParamId {
    params.add(name, ArrayD::zeros(IxDyn(shape)))
}

struct SwinLayer {
    norm1_g: ParamId,
    norm1_b: ParamId,
    wqkv: ParamId,
    bqkv: ParamId,
    wproj: ParamId,
    bproj: ParamId,
    norm2_g: ParamId,
    norm2_b: ParamId,
    mlp_w1: ParamId,
    mlp_b1: ParamId,
    mlp_w2: ParamId,
    mlp_b2: ParamId,
    heads: usize,
    shift: bool,
}

impl SwinLayer {
    fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        c: usize,
        heads: usize,
        shift: bool,
    ) -> Self {
        Self {
            norm1_g: ones(params, &format!("{name}.norm1.g"), c),
            norm1_b: zeros(params, &format!("{name}.norm1.b"), &[c]),
            wqkv: trunc_normal(params, rng, &format!("{name}.qkv.w"), &[c, 3 * c]),
            bqkv: zeros(params, &format!("{name}.qkv.b"), &[3 * c]),
            wproj: trunc_normal(params, rng, &format!("{name}.proj.w"), &[c, c]),
            bproj: zeros(params, &format!("{name}.proj.b"), &[c]),
            norm2_g: ones(params, &format!("{name}.norm2.g"), c),
            norm2_b: zeros(params, &format!("{name}.norm2.b"), &[c]),
            mlp_w1: trunc_normal(params, rng, &format!("{name}.mlp.w1"), &[c, MLP_RATIO * c]),
            mlp_b1: zeros(params, &format!("{name}.mlp.b1"), &[MLP_RATIO * c]),
            mlp_w2: trunc_normal(params, rng, &format!("{name}.mlp.w2"), &[MLP_RATIO * c, c]),
            mlp_b2: zeros(params, &format!("{name}.mlp.b2"), &[c]),
            heads,
            shift,
        }
    }

    /// x: (B,C,H,W) with H, W multiples of the window size.
    fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let shape = g.shape(x).to_vec();
        let (b, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let win = WINDOW.min(h).min(w);
        let (nh, nw) = (h / win, w / win);
        let t = win * win;
        let bw = b * nh * nw;
        let dh = c / self.heads;

        let residual = x;
        let half = (win / 2) as isize;
        let xs = if self.shift {
            g.roll2d(x, -half, -half)
        } else {
            x
        };
        // Window partition to (bw, t, c).
        let part = g.reshape(xs, &[b, c, nh, win, nw, win]);
        let part = g.permute(part, &[0, 2, 4, 3, 5, 1]);
        let tokens = g.reshape(part, &[bw, t, c]);

        let n1g = g.param(p, self.norm1_g);
        let n1b = g.param(p, self.norm1_b);
        let normed = g.layer_norm(tokens, n1g, n1b, LN_EPS);

        let flat = g.reshape(normed, &[bw * t, c]);
        let wqkv = g.param(p, self.wqkv);
        let qkv = g.matmul(flat, wqkv);
        let bqkv = g.param(p, self.bqkv);
        let qkv = g.add_bias_last(qkv, bqkv);
        let qkv = g.reshape(qkv, &[bw, t, 3, self.heads, dh]);
        let qkv = g.permute(qkv, &[2, 0, 3, 1, 4]); // (3, bw, heads, t, dh)
        let split = |g: &mut Graph, idx: usize| {
            let s = g.slice(qkv, &[idx, 0, 0, 0, 0], &[1, bw, self.heads, t, dh]);
            g.reshape(s, &[bw * self.heads, t, dh])
        };
        let q = split(g, 0);
        let k = split(g, 1);
        let v = split(g, 2);

        let q = g.scale(q, 1.0 / (dh as f64).sqrt());
        let kt = g.permute(k, &[0, 2, 1]);
        let scores = g.matmul(q, kt);
        let attn = g.softmax(scores);
        let ctx = g.matmul(attn, v); // (bw*heads, t, dh)
        let ctx = g.reshape(ctx, &[bw, self.heads, t, dh]);
        let ctx = g.permute(ctx, &[0, 2, 1, 3]);
        let ctx = g.reshape(ctx, &[bw * t, c]);
        let wproj = g.param(p, self.wproj);
        let out = g.matmul(ctx, wproj);
        let bproj = g.param(p, self.bproj);
        let out = g.add_bias_last(out, bproj);

        // Un-partition back to (B,C,H,W).
        let out = g.reshape(out, &[b, nh, nw, win, win, c]);
        let out = g.permute(out, &[0, 5, 1, 3, 2, 4]);
        let out = g.reshape(out, &[b, c, h, w]);
        let out = if self.shift {
            g.roll2d(out, half, half)
        } else {
            out
        };
        let x = g.add(residual, out);

        // Token MLP with pre-norm and GELU.
        let t2 = g.permute(x, &[0, 2, 3, 1]);
        let t2 = g.reshape(t2, &[b * h * w, c]);
        let n2g = g.param(p, self.norm2_g);
        let n2b = g.param(p, self.norm2_b);
        let normed2 = g.layer_norm(t2, n2g, n2b, LN_EPS);
        let w1 = g.param(p, self.mlp_w1);
        let m = g.matmul(normed2, w1);
        let b1 = g.param(p, self.mlp_b1);
        let m = g.add_bias_last(m, b1);
        let m = g.gelu(m);
        let w2 = g.param(p, self.mlp_w2);
        let m = g.matmul(m, w2);
        let b2 = g.param(p, self.mlp_b2);
        let m = g.add_bias_last(m, b2);
        let m = g.reshape(m, &[b, h, w, c]);
        let m = g.permute(m, &[0, 3, 1, 2]);
        g.add(x, m)
    }
}

/// Residual Swin-Transformer block: attention layers with alternating
/// shifts, a trailing 3x3 conv, and a block-level residual.
pub struct Rstb {
    layers: Vec<SwinLayer>,
    conv: Conv3x3,
}

impl Rstb {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        c: usize,
        n_layers: usize,
        heads: usize,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|i| {
                SwinLayer::new(
                    params,
                    rng,
                    &format!("{name}.layer{i}"),
                    c,
                    heads,
                    i % 2 == 1,
                )
            })
            .collect();
        let conv = Conv3x3::new(params, rng, &format!("{name}.conv"), c, c, 3, 1.0);
        Self { layers, conv }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let mut h = x;
        for layer in &self.layers {
            h = layer.forward(g, p, h);
        }
        let conv = self.conv.forward(g, p, h);
        g.add(x, conv)
    }
}

pub fn pick_heads(width: usize) -> usize {
    for h in [4usize, 2, 1] {
        if width % h == 0 {
            return h;
        }
    }
    1
}

/// Shallow conv + RSTB trunk + conv with a global residual. Pads the grid
/// to window multiples with reflection; the returned features stay padded
/// and carry the original size for the caller to crop.
pub struct SwinBackbone {
    shallow: Conv3x3,
    blocks: Vec<Rstb>,
    conv_after: Conv3x3,
    pub width: usize,
}

pub struct PaddedFeatures {
    pub features: Var,
    pub orig_h: usize,
    pub orig_w: usize,
}

impl SwinBackbone {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        cin: usize,
        width: usize,
        n_blocks: usize,
        layers_per_block: usize,
    ) -> Self {
        let heads = pick_heads(width);
        let shallow = Conv3x3::new(params, rng, &format!("{name}.shallow"), cin, width, 3, 1.0);
        let blocks = (0..n_blocks)
            .map(|i| {
                Rstb::new(
                    params,
                    rng,
                    &format!("{name}.rstb{i}"),
                    width,
                    layers_per_block,
                    heads,
                )
            })
            .collect();
        let conv_after = Conv3x3::new(params, rng, &format!("{name}.conv_after"), width, width, 3, 1.0);
        Self {
            shallow,
            blocks,
            conv_after,
            width,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> PaddedFeatures {
        let shape = g.shape(x).to_vec();
        let (h, w) = (shape[2], shape[3]);
        let pad_b = (WINDOW - h % WINDOW) % WINDOW;
        let pad_r = (WINDOW - w % WINDOW) % WINDOW;
        let padded = if pad_b > 0 || pad_r > 0 {
            g.pad2d(x, (0, pad_b, 0, pad_r), true)
        } else {
            x
        };
        let feat = self.shallow.forward(g, p, padded);
        let mut t = feat;
        for b in &self.blocks {
            t = b.forward(g, p, t);
        }
        let t = self.conv_after.forward(g, p, t);
        let features = g.add(feat, t);
        PaddedFeatures {
            features,
            orig_h: h,
            orig_w: w,
        }
    }
}

/// SwinIR-lite: backbone, sub-pixel upsampler, projection back to the data
/// channels, then a crop to factor × the original (pre-padding) size.
pub struct SwinIrLite {
    backbone: SwinBackbone,
    upsampler: Upsampler,
    last: Conv3x3,
    pub factor: usize,
}

impl SwinIrLite {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        cin: usize,
        width: usize,
        n_blocks: usize,
        factor: usize,
    ) -> Result<Self> {
        let backbone = SwinBackbone::new(params, rng, "swinir", cin, width, n_blocks, 4);
        let upsampler = Upsampler::new(params, rng, "swinir", width, factor)?;
        let last = Conv3x3::new(params, rng, "swinir.last", width, cin, 3, 1.0);
        Ok(Self {
            backbone,
            upsampler,
            last,
            factor,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let padded = self.backbone.forward(g, p, x);
        let up = self.upsampler.forward(g, p, padded.features);
        let out = self.last.forward(g, p, up);
        let shape = g.shape(out).to_vec();
        let want_h = padded.orig_h * self.factor;
        let want_w = padded.orig_w * self.factor;
        if shape[2] == want_h && shape[3] == want_w {
            out
        } else {
            g.slice(out, &[0, 0, 0, 0], &[shape[0], shape[1], want_h, want_w])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn swinir_padding_chain_shapes() {
        // 53x53 input is reflect-padded to 56x56 internally, upsampled x5 to
        // 280x280 and cropped back to 265x265.
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let model = SwinIrLite::new(&mut params, &mut rng, 1, 4, 1, 5).unwrap();
        let mut g = Graph::new();
        let x = g.input(ArrayD::zeros(IxDyn(&[1, 1, 53, 53])));
        let y = model.forward(&mut g, &params, x);
        assert_eq!(g.shape(y), &[1, 1, 265, 265]);
    }

    #[test]
    fn window_aligned_input_no_padding() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let model = SwinIrLite::new(&mut params, &mut rng, 2, 8, 2, 2).unwrap();
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_shape_fn(IxDyn(&[2, 2, 16, 16]), |ix| {
            (ix[2] as f64 * 0.4 + ix[3] as f64 * 0.3).sin()
        }));
        let y = model.forward(&mut g, &params, x);
        assert_eq!(g.shape(y), &[2, 2, 32, 32]);
        assert!(g.value(y).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rstb_preserves_grid() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let block = Rstb::new(&mut params, &mut rng, "rstb", 8, 2, 4);
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_shape_fn(IxDyn(&[1, 8, 16, 16]), |ix| {
            ix[1] as f64 * 0.1 - ix[2] as f64 * 0.05
        }));
        let y = block.forward(&mut g, &params, x);
        assert_eq!(g.shape(y), g.shape(x));
    }

    #[test]
    fn attention_grads_flow_end_to_end() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let model = SwinIrLite::new(&mut params, &mut rng, 1, 4, 1, 2).unwrap();
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_shape_fn(IxDyn(&[1, 1, 8, 8]), |ix| {
            (ix[2] * 8 + ix[3]) as f64 * 0.01
        }));
        let y = model.forward(&mut g, &params, x);
        let y2 = g.mul(y, y);
        let loss = g.mean_all(y2);
        let grads = g.backward(loss, &params);
        assert!(grads.l2_norm() > 0.0, "gradients must reach the parameters");
        assert!(grads.l2_norm().is_finite());
    }
}
