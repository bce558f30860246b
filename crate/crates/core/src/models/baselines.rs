//! Conventional super-resolution baselines: SRCNN, EDSR-lite, the
//! ESRGAN-lite generator and its discriminator, plus the shared sub-pixel
//! (pixel-shuffle) upsampler.

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{Graph, ParamId, Params, Var};
use crate::models::rrdb::{Conv3x3, RrdbNet};
use crate::{Error, Result};

const LRELU_SLOPE: f64 = 0.2;

/// Decompose an upsampling factor into pixel-shuffle stages of 2, 3 and 5.
pub fn shuffle_stages(s: usize) -> Result<Vec<usize>> {
    if s < 2 {
        return Err(Error::validation(format!("upsampling factor {s} must be >= 2")));
    }
    let mut rem = s;
    let mut stages = Vec::new();
    for f in [2usize, 3, 5] {
        while rem % f == 0 {
            stages.push(f);
            rem /= f;
        }
    }
    if rem != 1 {
        return Err(Error::validation(format!(
            "factor {s} is not a product of pixel-shuffle stages (factors of 2, 3, 5)"
        )));
    }
    Ok(stages)
}

/// Sub-pixel upsampler: per stage a 3x3 conv to width·f² channels followed
/// by pixel shuffle and LeakyReLU.
pub struct Upsampler {
    stages: Vec<(Conv3x3, usize)>,
}

impl Upsampler {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        width: usize,
        s: usize,
    ) -> Result<Self> {
        let stages = shuffle_stages(s)?
            .into_iter()
            .enumerate()
            .map(|(i, f)| {
                let conv = Conv3x3::new(
                    params,
                    rng,
                    &format!("{name}.up{i}"),
                    width,
                    width * f * f,
                    3,
                    1.0,
                );
                (conv, f)
            })
            .collect();
        Ok(Self { stages })
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let mut h = x;
        for (conv, f) in &self.stages {
            h = conv.forward(g, p, h);
            h = g.pixel_shuffle(h, *f);
            h = g.leaky_relu(h, LRELU_SLOPE);
        }
        h
    }
}

/// SRCNN: bicubic upsampling followed by a 9-5-5 conv stack (channels
/// C→64→32→C) applied as a residual correction on the interpolation.
pub struct Srcnn {
    conv1: Conv3x3,
    conv2: Conv3x3,
    conv3: Conv3x3,
    pub factor: usize,
}

impl Srcnn {
    pub fn new(params: &mut Params, rng: &mut ChaCha20Rng, cin: usize, factor: usize) -> Self {
        Self {
            conv1: Conv3x3::new(params, rng, "srcnn.conv1", cin, 64, 9, 1.0),
            conv2: Conv3x3::new(params, rng, "srcnn.conv2", 64, 32, 5, 1.0),
            conv3: Conv3x3::zeroed(params, "srcnn.conv3", 32, cin, 5),
            factor,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let shape = g.shape(x).to_vec();
        let up = g.bicubic(x, shape[2] * self.factor, shape[3] * self.factor);
        let h = self.conv1.forward(g, p, up);
        let h = g.relu(h);
        let h = self.conv2.forward(g, p, h);
        let h = g.relu(h);
        let h = self.conv3.forward(g, p, h);
        g.add(up, h)
    }

    pub fn expected_param_count(cin: usize) -> usize {
        (cin * 64 * 81 + 64) + (64 * 32 * 25 + 32) + (32 * cin * 25 + cin)
    }
}

/// EDSR-lite: conv stem, residual blocks, trunk conv with global skip, then
/// the sub-pixel upsampler and a final projection.
pub struct EdsrLite {
    stem: Conv3x3,
    blocks: Vec<(Conv3x3, Conv3x3)>,
    trunk: Conv3x3,
    upsampler: Upsampler,
    last: Conv3x3,
    pub factor: usize,
}

impl EdsrLite {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        cin: usize,
        width: usize,
        n_blocks: usize,
        factor: usize,
    ) -> Result<Self> {
        let stem = Conv3x3::new(params, rng, "edsr.stem", cin, width, 3, 1.0);
        let blocks = (0..n_blocks)
            .map(|i| {
                (
                    Conv3x3::new(params, rng, &format!("edsr.block{i}.conv1"), width, width, 3, 1.0),
                    Conv3x3::new(params, rng, &format!("edsr.block{i}.conv2"), width, width, 3, 0.1),
                )
            })
            .collect();
        let trunk = Conv3x3::new(params, rng, "edsr.trunk", width, width, 3, 1.0);
        let upsampler = Upsampler::new(params, rng, "edsr", width, factor)?;
        let last = Conv3x3::new(params, rng, "edsr.last", width, cin, 3, 1.0);
        Ok(Self {
            stem,
            blocks,
            trunk,
            upsampler,
            last,
            factor,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let feat = self.stem.forward(g, p, x);
        let mut h = feat;
        for (c1, c2) in &self.blocks {
            let r = c1.forward(g, p, h);
            let r = g.relu(r);
            let r = c2.forward(g, p, r);
            h = g.add(h, r);
        }
        let t = self.trunk.forward(g, p, h);
        let h = g.add(feat, t);
        let h = self.upsampler.forward(g, p, h);
        self.last.forward(g, p, h)
    }
}

/// ESRGAN-lite generator: RRDB feature extraction plus the sub-pixel
/// upsampler and a final projection.
pub struct EsrganGenerator {
    pub extractor: RrdbNet,
    upsampler: Upsampler,
    last: Conv3x3,
    pub factor: usize,
}

impl EsrganGenerator {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        cin: usize,
        width: usize,
        n_blocks: usize,
        factor: usize,
    ) -> Result<Self> {
        let gc = (width / 2).max(4);
        let extractor = RrdbNet::new(params, rng, "esrgan.ext", cin, width, gc, n_blocks);
        let upsampler = Upsampler::new(params, rng, "esrgan", width, factor)?;
        let last = Conv3x3::new(params, rng, "esrgan.last", width, cin, 3, 1.0);
        Ok(Self {
            extractor,
            upsampler,
            last,
            factor,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let feat = self.extractor.forward(g, p, x);
        let up = self.upsampler.forward(g, p, feat);
        self.last.forward(g, p, up)
    }
}

/// Small conv discriminator: four stride-2 convs and a linear head on the
/// spatially pooled features. The head is zero-initialized so a fresh
/// discriminator sits at the balanced point (zero logits).
pub struct Discriminator {
    convs: Vec<Conv3x3>,
    head_w: ParamId,
    head_b: ParamId,
    feat_ch: usize,
}

impl Discriminator {
    pub fn new(params: &mut Params, rng: &mut ChaCha20Rng, cin: usize) -> Self {
        let chans = [cin, 32, 64, 128, 256];
        let convs = (0..4)
            .map(|i| {
                Conv3x3::new(
                    params,
                    rng,
                    &format!("disc.conv{i}"),
                    chans[i],
                    chans[i + 1],
                    3,
                    1.0,
                )
            })
            .collect();
        let head_w = params.add("disc.head.w", ArrayD::zeros(IxDyn(&[256, 1])));
        let head_b = params.add("disc.head.b", ArrayD::zeros(IxDyn(&[1])));
        Self {
            convs,
            head_w,
            head_b,
            feat_ch: 256,
        }
    }

    /// Per-sample logits, shape (B, 1).
    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let mut h = x;
        for conv in &self.convs {
            let w = g.param(p, conv.w);
            let b = g.param(p, conv.b);
            h = g.conv2d(h, w, Some(b), 2, 1, crate::autodiff::kernels::PadMode::Zero);
            h = g.leaky_relu(h, LRELU_SLOPE);
        }
        // Global average pool via matmul with a constant 1/(HW) vector.
        let shape = g.shape(h).to_vec();
        let (b, c, hh, ww) = (shape[0], shape[1], shape[2], shape[3]);
        let flat = g.reshape(h, &[b * c, 1, hh * ww]);
        let pool_mat = g.input(ArrayD::from_elem(
            IxDyn(&[b * c, hh * ww, 1]),
            1.0 / (hh * ww) as f64,
        ));
        let pooled = g.matmul(flat, pool_mat); // (B*C, 1, 1)
        let pooled = g.reshape(pooled, &[b, c]);
        debug_assert_eq!(c, self.feat_ch);
        let w = g.param(p, self.head_w);
        let logits = g.matmul(pooled, w); // (B, 1)
        let bias = g.param(p, self.head_b);
        g.add_bias_last(logits, bias)
    }
}
