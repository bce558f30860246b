//! Residual-in-residual dense block feature extractor.
//!
//! Structure: 3x3 conv stem, n RRDB blocks (each three dense blocks of five
//! 3x3 convolutions with dense connections and residual scaling 0.2), a
//! trunk conv and a global residual back to the stem features. The trunk
//! conv and every dense block's fifth conv are zero-initialized, so a
//! freshly built extractor is a pure residual path: its output equals the
//! stem output for any input.

use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::kernels::PadMode;
use crate::autodiff::{Graph, ParamId, Params, Var};

pub const RESIDUAL_SCALE: f64 = 0.2;
const LRELU_SLOPE: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub w: ParamId,
    pub b: ParamId,
    pub k: usize,
}

impl Conv3x3 {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        init_scale: f64,
    ) -> Self {
        let std = init_scale * (2.0 / (cin * k * k) as f64).sqrt();
        let w = ArrayD::from_shape_simple_fn(IxDyn(&[cout, cin, k, k]), || {
            let g: f64 = StandardNormal.sample(rng);
            g * std
        });
        Self {
            w: params.add(format!("{name}.w"), w),
            b: params.add(format!("{name}.b"), ArrayD::zeros(IxDyn(&[cout]))),
            k,
        }
    }

    pub fn zeroed(params: &mut Params, name: &str, cin: usize, cout: usize, k: usize) -> Self {
        Self {
            w: params.add(
                format!("{name}.w"),
                ArrayD::zeros(IxDyn(&[cout, cin, k, k])),
            ),
            b: params.add(format!("{name}.b"), ArrayD::zeros(IxDyn(&[cout]))),
            k,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let w = g.param(p, self.w);
        let b = g.param(p, self.b);
        g.conv2d(x, w, Some(b), 1, self.k / 2, PadMode::Zero)
    }
}

/// Five 3x3 convolutions with dense connections; output x + 0.2·conv5(...).
#[derive(Debug, Clone)]
struct DenseBlock {
    convs: [Conv3x3; 5],
}

impl DenseBlock {
    fn new(params: &mut Params, rng: &mut ChaCha20Rng, name: &str, nf: usize, gc: usize) -> Self {
        let convs = [
            Conv3x3::new(params, rng, &format!("{name}.conv1"), nf, gc, 3, 0.1),
            Conv3x3::new(params, rng, &format!("{name}.conv2"), nf + gc, gc, 3, 0.1),
            Conv3x3::new(params, rng, &format!("{name}.conv3"), nf + 2 * gc, gc, 3, 0.1),
            Conv3x3::new(params, rng, &format!("{name}.conv4"), nf + 3 * gc, gc, 3, 0.1),
            Conv3x3::zeroed(params, &format!("{name}.conv5"), nf + 4 * gc, nf, 3),
        ];
        Self { convs }
    }

    fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let c1 = self.convs[0].forward(g, p, x);
        let c1 = g.leaky_relu(c1, LRELU_SLOPE);
        let in2 = g.concat(&[x, c1], 1);
        let c2 = self.convs[1].forward(g, p, in2);
        let c2 = g.leaky_relu(c2, LRELU_SLOPE);
        let in3 = g.concat(&[x, c1, c2], 1);
        let c3 = self.convs[2].forward(g, p, in3);
        let c3 = g.leaky_relu(c3, LRELU_SLOPE);
        let in4 = g.concat(&[x, c1, c2, c3], 1);
        let c4 = self.convs[3].forward(g, p, in4);
        let c4 = g.leaky_relu(c4, LRELU_SLOPE);
        let in5 = g.concat(&[x, c1, c2, c3, c4], 1);
        let c5 = self.convs[4].forward(g, p, in5);
        let scaled = g.scale(c5, RESIDUAL_SCALE);
        g.add(x, scaled)
    }
}

/// One RRDB: three chained dense blocks, outer residual interpolated with
/// scale 0.2 so a pass-through chain stays a pass-through.
#[derive(Debug, Clone)]
struct Rrdb {
    blocks: [DenseBlock; 3],
}

impl Rrdb {
    fn new(params: &mut Params, rng: &mut ChaCha20Rng, name: &str, nf: usize, gc: usize) -> Self {
        Self {
            blocks: [
                DenseBlock::new(params, rng, &format!("{name}.db1"), nf, gc),
                DenseBlock::new(params, rng, &format!("{name}.db2"), nf, gc),
                DenseBlock::new(params, rng, &format!("{name}.db3"), nf, gc),
            ],
        }
    }

    fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let mut h = x;
        for b in &self.blocks {
            h = b.forward(g, p, h);
        }
        // x + 0.2*(chain - x)
        let delta = g.sub(h, x);
        let scaled = g.scale(delta, RESIDUAL_SCALE);
        g.add(x, scaled)
    }
}

/// The full extractor: spatial size preserved, output width `nf`.
pub struct RrdbNet {
    stem: Conv3x3,
    blocks: Vec<Rrdb>,
    trunk: Conv3x3,
    pub nf: usize,
    pub gc: usize,
}

impl RrdbNet {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha20Rng,
        name: &str,
        cin: usize,
        nf: usize,
        gc: usize,
        n_blocks: usize,
    ) -> Self {
        let stem = Conv3x3::new(params, rng, &format!("{name}.stem"), cin, nf, 3, 1.0);
        let blocks = (0..n_blocks)
            .map(|i| Rrdb::new(params, rng, &format!("{name}.rrdb{i}"), nf, gc))
            .collect();
        let trunk = Conv3x3::zeroed(params, &format!("{name}.trunk"), nf, nf, 3);
        Self {
            stem,
            blocks,
            trunk,
            nf,
            gc,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        let feat = self.stem.forward(g, p, x);
        let mut h = feat;
        for b in &self.blocks {
            h = b.forward(g, p, h);
        }
        let trunk = self.trunk.forward(g, p, h);
        g.add(feat, trunk)
    }

    /// Stem output alone, for the zero-init residual contract tests.
    pub fn stem_only(&self, g: &mut Graph, p: &Params, x: Var) -> Var {
        self.stem.forward(g, p, x)
    }

    /// Closed-form learnable scalar count of this extractor.
    pub fn expected_param_count(cin: usize, nf: usize, gc: usize, n_blocks: usize) -> usize {
        let conv = |ci: usize, co: usize, k: usize| ci * co * k * k + co;
        let dense = conv(nf, gc, 3)
            + conv(nf + gc, gc, 3)
            + conv(nf + 2 * gc, gc, 3)
            + conv(nf + 3 * gc, gc, 3)
            + conv(nf + 4 * gc, nf, 3);
        conv(cin, nf, 3) + n_blocks * 3 * dense + conv(nf, nf, 3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fresh_extractor_is_stem_passthrough() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let net = RrdbNet::new(&mut params, &mut rng, "ext", 2, 8, 4, 6);
        let mut g = Graph::new();
        let x = g.input(ArrayD::from_shape_fn(IxDyn(&[1, 2, 6, 6]), |ix| {
            (ix[2] * 6 + ix[3]) as f64 * 0.1 - 1.0
        }));
        let out = net.forward(&mut g, &params, x);
        let stem = net.stem_only(&mut g, &params, x);
        for (a, b) in g.value(out).iter().zip(g.value(stem).iter()) {
            assert!(
                (a - b).abs() < 1e-12,
                "zero-init trunk and dense conv5 give a stem pass-through"
            );
        }
    }

    #[test]
    fn zero_input_gives_stem_bias_map() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let net = RrdbNet::new(&mut params, &mut rng, "ext", 1, 4, 4, 6);
        // Give the stem a recognizable bias.
        let bias = params.get_mut(net.stem.b);
        for (i, v) in bias.iter_mut().enumerate() {
            *v = i as f64 + 1.0;
        }
        let mut g = Graph::new();
        let x = g.input(ArrayD::zeros(IxDyn(&[1, 1, 5, 5])));
        let out = net.forward(&mut g, &params, x);
        let v = g.value(out);
        for c in 0..4 {
            let expect = c as f64 + 1.0;
            for y in 0..5 {
                for x_ in 0..5 {
                    assert!((v[[0, c, y, x_]] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spatial_size_preserved() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let net = RrdbNet::new(&mut params, &mut rng, "ext", 2, 6, 4, 6);
        for (h, w) in [(4usize, 4usize), (9, 13), (16, 8)] {
            let mut g = Graph::new();
            let x = g.input(ArrayD::zeros(IxDyn(&[1, 2, h, w])));
            let out = net.forward(&mut g, &params, x);
            assert_eq!(g.shape(out), &[1, 6, h, w]);
        }
    }

    #[test]
    fn param_count_matches_closed_form() {
        let mut params = Params::new();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (cin, nf, gc, n) = (2, 64, 32, 12);
        let _net = RrdbNet::new(&mut params, &mut rng, "ext", cin, nf, gc, n);
        assert_eq!(
            params.scalar_count(),
            RrdbNet::expected_param_count(cin, nf, gc, n)
        );
    }
}
