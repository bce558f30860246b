//! Spectral convolution layers, local kernel layers and the operator stacks
//! (plain block stacks and the U-shaped variant) used by the neural-operator
//! pipelines.

use ndarray::{Array3, ArrayD, IxDyn};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::kernels::{self, mode_slot, PadMode};
use crate::autodiff::{Graph, ParamId, Params, Var};
use crate::{Error, Result};

/// Spectral convolution parameters: four complex corner blocks, each
/// out×in×modes_y×modes_x, stored as re/im pairs on the trailing axis.
#[derive(Debug, Clone)]
pub struct SpectralConvParams {
    pub in_channels: usize,
    pub out_channels: usize,
    pub modes_y: usize,
    pub modes_x: usize,
    /// (4, out, in, modes_y, modes_x, 2).
    pub weights: ArrayD<f64>,
}

impl SpectralConvParams {
    pub fn zeros(in_channels: usize, out_channels: usize, modes_y: usize, modes_x: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            modes_y,
            modes_x,
            weights: ArrayD::zeros(IxDyn(&[4, out_channels, in_channels, modes_y, modes_x, 2])),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expect = [
            4,
            self.out_channels,
            self.in_channels,
            self.modes_y,
            self.modes_x,
            2,
        ];
        if self.weights.shape() != expect {
            return Err(Error::shape(format!(
                "spectral weights shape {:?}, expected {:?}",
                self.weights.shape(),
                expect
            )));
        }
        if self.modes_y == 0 || self.modes_x == 0 {
            return Err(Error::validation("modes must be >= 1"));
        }
        if !self.weights.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("non-finite spectral weights"));
        }
        Ok(())
    }

    /// Set the complex weight for one signed frequency pair (all channels
    /// must be addressed separately). Frequencies outside the retained band
    /// are an error.
    pub fn set_mode(
        &mut self,
        fy: isize,
        fx: isize,
        out_ch: usize,
        in_ch: usize,
        re: f64,
        im: f64,
    ) -> Result<()> {
        let (q, r, c) = mode_slot(fy, fx);
        if r >= self.modes_y || c >= self.modes_x {
            return Err(Error::validation(format!(
                "frequency ({fy},{fx}) outside retained modes {}x{}",
                self.modes_y, self.modes_x
            )));
        }
        self.weights[[q, out_ch, in_ch, r, c, 0]] = re;
        self.weights[[q, out_ch, in_ch, r, c, 1]] = im;
        Ok(())
    }

    /// Learnable scalar count; complex weights count as two reals.
    pub fn param_count(&self) -> usize {
        self.weights.len()
    }
}

/// Standalone spectral convolution on one (C,H,W) field.
pub fn spectral_conv2d(x: &Array3<f64>, p: &SpectralConvParams) -> Result<Array3<f64>> {
    p.validate()?;
    let (c, _h, _w) = x.dim();
    if c != p.in_channels {
        return Err(Error::shape(format!(
            "input has {c} channels, params expect {}",
            p.in_channels
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::validation("non-finite input to spectral_conv2d"));
    }
    let x4 = x
        .view()
        .insert_axis(ndarray::Axis(0))
        .into_dimensionality()
        .unwrap()
        .to_owned();
    let out = kernels::spectral_conv(&x4.view(), &p.weights.view());
    Ok(out.index_axis_move(ndarray::Axis(0), 0))
}

fn gaussian(rng: &mut ChaCha20Rng, std: f64) -> f64 {
    let g: f64 = StandardNormal.sample(rng);
    g * std
}

fn he_conv_init(
    params: &mut Params,
    rng: &mut ChaCha20Rng,
    name: &str,
    cout: usize,
    cin: usize,
    k: usize,
    scale: f64,
) -> ParamId {
    let std = scale * (2.0 / (cin * k * k) as f64).sqrt();
    let w = ArrayD::from_shape_simple_fn(IxDyn(&[cout, cin, k, k]), || gaussian(rng, std));
    params.add(name, w)
}

/// 1x1 pointwise convolution layer.
#[derive(Debug, Clone)]
pub struct Pointwise {
    pub w: ParamId,
    pub b: ParamId,
}

impl Pointwise {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Self {
        let w = he_conv_init(params, rng, &format!("{name}.w"), cout, cin, 1, 1.0);
        let b = params.add(format!("{name}.b"), ArrayD::zeros(IxDyn(&[cout])));
        Self { w, b }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let w = g.param(p, self.w);
        let b = g.param(p, self.b);
        g.conv2d(x, w, Some(b), 1, 0, PadMode::Zero)
    }

    /// Overwrite with a block-identity map: out channel i copies in channel
    /// i (zeros elsewhere), bias zero.
    pub fn make_identity(&self, params: &mut Params) {
        let w = params.get_mut(self.w);
        w.fill(0.0);
        let shape = w.shape().to_vec();
        let n = shape[0].min(shape[1]);
        for i in 0..n {
            w[[i, i, 0, 0]] = 1.0;
        }
        params.get_mut(self.b).fill(0.0);
    }
}

/// Local kernel layers: a zero-sum 3x3 differential stencil scaled by
/// 1/grid_spacing and a 5x5 local integral kernel scaled by grid_spacing²,
/// both depthwise with replicate padding so the continuous operator is
/// grid-independent.
#[derive(Debug, Clone)]
pub struct LocalLayer {
    pub stencil: ParamId,
    pub integral: ParamId,
}

impl LocalLayer {
    pub fn new(params: &mut Params, rng: &mut ChaCha20Rng, name: &str, channels: usize) -> Self {
        let stencil = ArrayD::from_shape_simple_fn(IxDyn(&[channels, 3, 3]), || {
            gaussian(rng, 0.05)
        });
        let integral = ArrayD::from_shape_simple_fn(IxDyn(&[channels, 5, 5]), || {
            gaussian(rng, 0.02)
        });
        Self {
            stencil: params.add(format!("{name}.stencil"), stencil),
            integral: params.add(format!("{name}.integral"), integral),
        }
    }

    /// Initialize the stencil as a central x-difference and zero the
    /// integral kernel (used by finite-difference contract tests).
    pub fn make_central_difference(&self, params: &mut Params) {
        let s = params.get_mut(self.stencil);
        s.fill(0.0);
        let c = s.shape()[0];
        for ch in 0..c {
            s[[ch, 1, 0]] = -0.5;
            s[[ch, 1, 2]] = 0.5;
        }
        params.get_mut(self.integral).fill(0.0);
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var, grid_spacing: f64) -> Var {
        let raw = g.param(p, self.stencil);
        let centered = g.zero_center_kernel(raw);
        let diff = g.dwconv2d(x, centered);
        let diff = g.scale(diff, 1.0 / grid_spacing);
        let ik = g.param(p, self.integral);
        let integ = g.dwconv2d(x, ik);
        let integ = g.scale(integ, grid_spacing * grid_spacing);
        g.add(diff, integ)
    }
}

/// One FNO block: spectral convolution plus a parallel pointwise path (and
/// optional local layers), summed and passed through GELU. The enclosing
/// stack skips the activation on its last block.
#[derive(Debug, Clone)]
pub struct FnoBlock {
    pub spectral: ParamId,
    pub pointwise: Pointwise,
    pub local: Option<LocalLayer>,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl FnoBlock {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        cin: usize,
        cout: usize,
        modes: usize,
        local: bool,
    ) -> Self {
        let std = 1.0 / ((cin * 4 * modes * modes) as f64).sqrt();
        let w = ArrayD::from_shape_simple_fn(IxDyn(&[4, cout, cin, modes, modes, 2]), || {
            gaussian(rng, std)
        });
        let spectral = params.add(format!("{name}.spectral"), w);
        let pointwise = Pointwise::new(params, rng, &format!("{name}.pointwise"), cin, cout);
        let local = local.then(|| LocalLayer::new(params, rng, &format!("{name}.local"), cout));
        Self {
            spectral,
            pointwise,
            local,
            in_channels: cin,
            out_channels: cout,
        }
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        p: &Params,
        x: Var,
        grid_spacing: f64,
        activate: bool,
    ) -> Var {
        let w = g.param(p, self.spectral);
        let spec = g.spectral_conv(x, w);
        let point = self.pointwise.forward(g, p, x);
        let mut y = g.add(spec, point);
        if let Some(local) = &self.local {
            // The local branches act on the pointwise path's output width;
            // with cin == cout they can read the input directly.
            let l = local.forward(g, p, x, grid_spacing);
            y = g.add(y, l);
        }
        if activate {
            g.gelu(y)
        } else {
            y
        }
    }

    pub fn make_identity(&self, params: &mut Params) {
        params.get_mut(self.spectral).fill(0.0);
        self.pointwise.make_identity(params);
        if let Some(local) = &self.local {
            params.get_mut(local.stencil).fill(0.0);
            params.get_mut(local.integral).fill(0.0);
        }
    }
}

/// Resolution-agnostic operator stage: same grid in and out, parameters
/// reusable across grids. Implemented by the built-in stacks and by
/// registered plugins.
pub trait OperatorStack {
    fn forward(&self, g: &mut Graph, p: &Params, x: Var, grid_spacing: f64) -> Var;
    /// Channel width at input and output.
    fn width(&self) -> usize;
    /// Zero the stack into a pass-through map if supported (testing hook).
    fn make_identity(&self, params: &mut Params) {
        let _ = params;
    }
}

/// Plain stack of FNO blocks at constant width; GELU between blocks, none
/// after the last.
pub struct FnoStack {
    pub blocks: Vec<FnoBlock>,
    width: usize,
}

impl FnoStack {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        width: usize,
        n_blocks: usize,
        modes: usize,
        local: bool,
    ) -> Self {
        let blocks = (0..n_blocks.max(1))
            .map(|i| {
                FnoBlock::new(
                    params,
                    rng,
                    &format!("{name}.block{i}"),
                    width,
                    width,
                    modes,
                    local,
                )
            })
            .collect();
        Self { blocks, width }
    }
}

impl OperatorStack for FnoStack {
    fn forward(&self, g: &mut Graph, p: &Params, x: Var, grid_spacing: f64) -> Var {
        let n = self.blocks.len();
        let mut h = x;
        for (i, block) in self.blocks.iter().enumerate() {
            h = block.forward(g, p, h, grid_spacing, i + 1 < n);
        }
        h
    }

    fn width(&self) -> usize {
        self.width
    }

    fn make_identity(&self, params: &mut Params) {
        for b in &self.blocks {
            b.make_identity(params);
        }
    }
}

/// U-shaped operator stack: two channel-doubling downsampling stages with
/// grid halving via spectral truncation, a bottleneck, and two mirrored
/// upsampling stages with concatenated skips. Upsampling resizes back to the
/// exact recorded sizes, so odd grids round-trip.
pub struct DunoStack {
    down1: FnoBlock,
    down2: FnoBlock,
    bottleneck: FnoBlock,
    up1: FnoBlock,
    up2: FnoBlock,
    width: usize,
}

impl DunoStack {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        width: usize,
        modes: usize,
        local: bool,
    ) -> Self {
        let w = width;
        Self {
            down1: FnoBlock::new(params, rng, &format!("{name}.down1"), w, 2 * w, modes, local),
            down2: FnoBlock::new(
                params,
                rng,
                &format!("{name}.down2"),
                2 * w,
                4 * w,
                modes,
                local,
            ),
            bottleneck: FnoBlock::new(
                params,
                rng,
                &format!("{name}.bottleneck"),
                4 * w,
                4 * w,
                modes,
                local,
            ),
            up1: FnoBlock::new(params, rng, &format!("{name}.up1"), 8 * w, 2 * w, modes, local),
            up2: FnoBlock::new(params, rng, &format!("{name}.up2"), 4 * w, w, modes, local),
            width,
        }
    }
}

fn half(n: usize) -> usize {
    n.div_ceil(2).max(4)
}

impl OperatorStack for DunoStack {
    fn forward(&self, g: &mut Graph, p: &Params, x: Var, grid_spacing: f64) -> Var {
        let shape = g.shape(x).to_vec();
        let (h0, w0) = (shape[2], shape[3]);
        let (h1, w1) = (half(h0), half(w0));
        let (h2, w2) = (half(h1), half(w1));
        let dx1 = grid_spacing * h0 as f64 / h1 as f64;
        let dx2 = grid_spacing * h0 as f64 / h2 as f64;

        let d1 = self.down1.forward(g, p, x, grid_spacing, true);
        let x1 = g.spectral_resize(d1, h1, w1);
        let d2 = self.down2.forward(g, p, x1, dx1, true);
        let x2 = g.spectral_resize(d2, h2, w2);
        let b = self.bottleneck.forward(g, p, x2, dx2, true);

        let u1 = g.spectral_resize(b, h1, w1);
        let cat1 = g.concat(&[u1, d2], 1);
        let m1 = self.up1.forward(g, p, cat1, dx1, true);
        let u2 = g.spectral_resize(m1, h0, w0);
        let cat2 = g.concat(&[u2, d1], 1);
        self.up2.forward(g, p, cat2, grid_spacing, false)
    }

    fn width(&self) -> usize {
        self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::SeedableRng;

    fn cos_mode(h: usize, w: usize, fy: usize, fx: usize) -> Array3<f64> {
        Array3::from_shape_fn((1, h, w), |(_, y, x)| {
            (2.0 * std::f64::consts::PI * ((fy * y) as f64 / h as f64 + (fx * x) as f64 / w as f64))
                .cos()
        })
    }

    #[test]
    fn zero_input_zero_output() {
        let mut p = SpectralConvParams::zeros(1, 1, 4, 4);
        p.weights.fill(0.3);
        let x = Array3::zeros((1, 8, 8));
        let y = spectral_conv2d(&x, &p).unwrap();
        assert!(y.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn single_mode_doubling() {
        // cos at (2,3) occupies bins (2,3) and (-2,-3); weight 2+0i at both
        // doubles the input.
        let mut p = SpectralConvParams::zeros(1, 1, 4, 4);
        p.set_mode(2, 3, 0, 0, 2.0, 0.0).unwrap();
        p.set_mode(-2, -3, 0, 0, 2.0, 0.0).unwrap();
        let x = cos_mode(8, 8, 2, 3);
        let y = spectral_conv2d(&x, &p).unwrap();
        for (a, b) in y.iter().zip(x.iter()) {
            assert!((a - 2.0 * b).abs() < 1e-5, "{a} vs 2*{b}");
        }
    }

    #[test]
    fn mode_above_cutoff_truncated() {
        let mut p = SpectralConvParams::zeros(1, 1, 2, 2);
        p.weights.fill(0.7);
        // Mode (3,3) on 8x8 is strictly above a 2x2 cutoff on both axes.
        let x = cos_mode(8, 8, 3, 3);
        let y = spectral_conv2d(&x, &p).unwrap();
        assert!(
            y.iter().all(|&v| v.abs() < 1e-6),
            "truncated mode must produce zero output"
        );
    }

    #[test]
    fn full_modes_match_circular_convolution_oracle() {
        use crate::fft;
        use num_complex::Complex64;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut p = SpectralConvParams::zeros(1, 1, 4, 4);
        p.weights.mapv_inplace(|_| gaussian(&mut rng, 0.5));
        let x = Array3::from_shape_simple_fn((1, 8, 8), || gaussian(&mut rng, 1.0));
        let y = spectral_conv2d(&x, &p).unwrap();
        // Build the full weight spectrum and take its inverse transform as
        // the spatial kernel.
        let mut what = ndarray::Array2::<Complex64>::zeros((8, 8));
        for fy in -4i64..4 {
            for fx in -4i64..4 {
                let (q, r, c) = mode_slot(fy as isize, fx as isize);
                if r < 4 && c < 4 {
                    let row = ((fy + 8) % 8) as usize;
                    let col = ((fx + 8) % 8) as usize;
                    what[[row, col]] = Complex64::new(
                        p.weights[[q, 0, 0, r, c, 0]],
                        p.weights[[q, 0, 0, r, c, 1]],
                    );
                }
            }
        }
        let kernel = fft::ifft2(&what);
        let plane = x.index_axis(ndarray::Axis(0), 0).to_owned();
        let oracle = crate::oracles::circular_convolution_real(&plane.view(), &kernel);
        for (a, b) in y.iter().zip(oracle.iter()) {
            assert!(
                (a - b).abs() < 1e-5 * b.abs().max(1.0),
                "spectral {a} vs circular-conv oracle {b}"
            );
        }
    }

    #[test]
    fn local_layer_constant_input_zero_differential() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let layer = LocalLayer::new(&mut params, &mut rng, "local", 2);
        params.get_mut(layer.integral).fill(0.0);
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_elem(IxDyn(&[1, 2, 6, 6]), 3.3));
        let y = layer.forward(&mut g, &params, x, 0.5);
        assert!(
            g.value(y).iter().all(|v| v.abs() < 1e-12),
            "zero-sum stencil must kill constants"
        );
    }

    #[test]
    fn local_layer_central_difference_ramp() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let layer = LocalLayer::new(&mut params, &mut rng, "local", 1);
        layer.make_central_difference(&mut params);
        let h = 2.0;
        let ramp = ArrayD::from_shape_fn(IxDyn(&[1, 1, 8, 8]), |ix| ix[3] as f64 * 0.7);
        let mut g = Graph::new();
        let x = g.input(ramp);
        let y = layer.forward(&mut g, &params, x, h);
        let v = g.value(y);
        for yy in 0..8 {
            for xx in 1..7 {
                let got = v[[0, 0, yy, xx]];
                assert!(
                    (got - 0.7 / h).abs() < 1e-5,
                    "interior ramp response {got}, expected {}",
                    0.7 / h
                );
            }
        }
    }

    #[test]
    fn local_layer_halved_spacing_doubles_response() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let layer = LocalLayer::new(&mut params, &mut rng, "local", 1);
        layer.make_central_difference(&mut params);
        let ramp = ArrayD::from_shape_fn(IxDyn(&[1, 1, 8, 8]), |ix| ix[3] as f64);
        let run = |h: f64| {
            let mut g = Graph::new();
            let x = g.input(ramp.clone());
            let y = layer.forward(&mut g, &params, x, h);
            g.value(y)[[0, 0, 4, 4]]
        };
        let a = run(1.0);
        let b = run(0.5);
        assert!((b - 2.0 * a).abs() < 1e-12, "1/h scaling: {a} vs {b}");
    }

    #[test]
    fn duno_round_trips_odd_grids() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let stack = DunoStack::new(&mut params, &mut rng, "duno", 3, 4, false);
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_shape_fn(IxDyn(&[1, 3, 13, 11]), |ix| {
            (ix[2] as f64 * 0.3 - ix[3] as f64 * 0.2).sin()
        }));
        let y = stack.forward(&mut g, &params, x, 1.0);
        assert_eq!(g.shape(y), &[1, 3, 13, 11], "same-grid contract");
    }
}
