//! Reverse-mode tape over f64 ndarrays.
//!
//! Every trainable model builds a fresh [`Graph`] per forward pass; the tape
//! records op nodes, [`Graph::backward`] walks them in reverse and returns
//! per-parameter gradients. Kernels are sequential and accumulation order is
//! fixed, so fixed-seed runs are bitwise reproducible.

pub mod kernels;

use std::collections::HashMap;

use ndarray::{ArrayD, Axis, IxDyn};

use kernels::{ConvGeom, PadMode};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Handle to a named parameter tensor in a [`Params`] store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    /// Position in the store's creation order.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors. Creation order is the checkpoint payload order.
#[derive(Debug, Clone, Default)]
pub struct Params {
    items: Vec<(String, ArrayD<f64>)>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: ArrayD<f64>) -> ParamId {
        self.items.push((name.into(), value));
        ParamId(self.items.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &ArrayD<f64> {
        &self.items[id.0].1
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ArrayD<f64> {
        &mut self.items[id.0].1
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &ArrayD<f64>)> {
        self.items
            .iter()
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total learnable scalar count (complex weights are stored as re/im
    /// pairs, so they contribute two reals each).
    pub fn scalar_count(&self) -> usize {
        self.items.iter().map(|(_, v)| v.len()).sum()
    }
}

/// Per-parameter gradients aligned with a [`Params`] store.
#[derive(Debug, Clone)]
pub struct Grads {
    slots: Vec<Option<ArrayD<f64>>>,
}

impl Grads {
    pub fn zeros(params: &Params) -> Self {
        Self {
            slots: vec![None; params.len()],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&ArrayD<f64>> {
        self.slots[id.0].as_ref()
    }

    pub fn accumulate(&mut self, id: ParamId, g: &ArrayD<f64>) {
        match &mut self.slots[id.0] {
            Some(slot) => kernels::acc(slot, g),
            slot @ None => *slot = Some(g.clone()),
        }
    }

    /// Global gradient L2 norm over all populated slots.
    pub fn l2_norm(&self) -> f64 {
        self.slots
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

enum Op {
    Leaf {
        param: Option<ParamId>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddBiasChan(Var, Var),
    AddBiasLast(Var, Var),
    Matmul(Var, Var),
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        mode: PadMode,
    },
    DwConv2d {
        x: Var,
        w: Var,
    },
    PixelShuffle(Var, usize),
    Bicubic {
        x: Var,
        in_h: usize,
        in_w: usize,
    },
    SpectralConv {
        x: Var,
        w: Var,
    },
    SpectralResize {
        x: Var,
        in_h: usize,
        in_w: usize,
    },
    Gelu(Var),
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Abs(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    },
    Softmax(Var),
    Reshape(Var),
    Permute {
        x: Var,
        axes: Vec<usize>,
    },
    Concat {
        xs: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        starts: Vec<usize>,
    },
    Pad2d {
        x: Var,
        in_h: usize,
        in_w: usize,
        pads: (usize, usize, usize, usize),
        reflect: bool,
    },
    Roll2d {
        x: Var,
        dy: isize,
        dx: isize,
    },
    ZeroCenterKernel(Var),
    MeanAll(Var),
    SumAll(Var),
}

struct Node {
    value: ArrayD<f64>,
    op: Op,
}

/// The tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound_params: HashMap<usize, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    // Non-finite values are allowed to flow; the training loop checks the
    // loss and aborts with a divergence diagnostic.
    fn push(&mut self, value: ArrayD<f64>, op: Op) -> Var {
        // Every node value is kept in standard layout so reshapes and slice
        // access stay trivial.
        self.nodes.push(Node {
            value: standardize(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input leaf (no gradient tracked beyond the tape).
    pub fn input(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// Bind a parameter tensor as a leaf. Repeated binds of the same id
    /// return the same node so gradient accumulation stays single-slotted.
    pub fn param(&mut self, params: &Params, id: ParamId) -> Var {
        if let Some(v) = self.bound_params.get(&id.0) {
            return *v;
        }
        let v = self.push(params.get(id).clone(), Op::Leaf { param: Some(id) });
        self.bound_params.insert(id.0, v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    /// x (B,C,H,W) + bias (C), broadcast over batch and space.
    pub fn add_bias_chan(&mut self, x: Var, bias: Var) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let bv = &self.nodes[bias.0].value;
        assert_eq!(bv.ndim(), 1, "channel bias must be 1-d");
        assert_eq!(xv.dim().1, bv.len(), "bias length mismatch");
        let mut out = xv.to_owned();
        for (ci, mut lane) in out.axis_iter_mut(Axis(1)).enumerate() {
            let b = bv[[ci]];
            lane.mapv_inplace(|v| v + b);
        }
        self.push(out.into_dyn(), Op::AddBiasChan(x, bias))
    }

    /// x (..., D) + bias (D).
    pub fn add_bias_last(&mut self, x: Var, bias: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let bv = &self.nodes[bias.0].value;
        let d = *xv.shape().last().expect("non-scalar");
        assert_eq!(bv.len(), d, "last-dim bias mismatch");
        let mut out = xv.clone();
        let rows = out.len() / d;
        let flat = out.as_slice_mut().expect("standard layout");
        let bslice = bv.as_slice().expect("standard layout");
        for r in 0..rows {
            for c in 0..d {
                flat[r * d + c] += bslice[c];
            }
        }
        self.push(out, Op::AddBiasLast(x, bias))
    }

    /// Batched matmul. Accepts (N,a,b)x(N,b,c) or plain 2-d operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = to3(&self.nodes[a.0].value);
        let bv = to3(&self.nodes[b.0].value);
        let out = kernels::batch_matmul(&av.view(), &bv.view());
        let out = if self.nodes[a.0].value.ndim() == 2 {
            out.index_axis(Axis(0), 0).to_owned().into_dyn()
        } else {
            out.into_dyn()
        };
        self.push(out, Op::Matmul(a, b))
    }

    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        mode: PadMode,
    ) -> Var {
        let geom = ConvGeom { stride, pad, mode };
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let wv = kernels::apply_view4(&self.nodes[w.0].value);
        let bias = b.map(|bv| {
            self.nodes[bv.0]
                .value
                .view()
                .into_dimensionality()
                .expect("bias is 1-d")
                .to_owned()
        });
        let out = kernels::conv2d(&xv, &wv, bias.as_ref(), &geom);
        self.push(
            out.into_dyn(),
            Op::Conv2d {
                x,
                w,
                b,
                stride,
                pad,
                mode,
            },
        )
    }

    /// Depthwise conv, replicate padding, same-size output.
    pub fn dwconv2d(&mut self, x: Var, w: Var) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let wv = self.nodes[w.0]
            .value
            .view()
            .into_dimensionality()
            .expect("depthwise weight is 3-d");
        let out = kernels::dwconv2d(&xv, &wv);
        self.push(out.into_dyn(), Op::DwConv2d { x, w })
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let out = kernels::pixel_shuffle(&xv, r);
        self.push(out.into_dyn(), Op::PixelShuffle(x, r))
    }

    pub fn bicubic(&mut self, x: Var, out_h: usize, out_w: usize) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let (_, _, in_h, in_w) = xv.dim();
        let out = kernels::bicubic_batch(&xv, out_h, out_w);
        self.push(out.into_dyn(), Op::Bicubic { x, in_h, in_w })
    }

    pub fn spectral_conv(&mut self, x: Var, w: Var) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let out = kernels::spectral_conv(&xv, &self.nodes[w.0].value.view());
        self.push(out.into_dyn(), Op::SpectralConv { x, w })
    }

    pub fn spectral_resize(&mut self, x: Var, out_h: usize, out_w: usize) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let (_, _, in_h, in_w) = xv.dim();
        let out = kernels::spectral_resize(&xv, out_h, out_w);
        self.push(out.into_dyn(), Op::SpectralResize { x, in_h, in_w })
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.nodes[x.0].value.mapv(gelu);
        self.push(v, Op::Gelu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let v = self.nodes[x.0]
            .value
            .mapv(|t| if t >= 0.0 { t } else { slope * t });
        self.push(v, Op::LeakyRelu(x, slope))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.nodes[x.0].value.mapv(|t| t.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.nodes[x.0].value.mapv(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    /// softplus(x) = ln(1 + e^x), evaluated stably.
    pub fn softplus(&mut self, x: Var) -> Var {
        let v = self.nodes[x.0].value.mapv(softplus);
        self.push(v, Op::Softplus(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.nodes[x.0].value.mapv(f64::abs);
        self.push(v, Op::Abs(x))
    }

    /// Layer norm over the last axis with learned scale and shift.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = &self.nodes[x.0].value;
        let d = *xv.shape().last().expect("non-scalar");
        let g = self.nodes[gamma.0].value.as_slice().unwrap().to_vec();
        let b = self.nodes[beta.0].value.as_slice().unwrap().to_vec();
        assert_eq!(g.len(), d);
        let mut out = xv.clone();
        {
            let flat = out.as_slice_mut().unwrap();
            let rows = flat.len() / d;
            for r in 0..rows {
                let row = &mut flat[r * d..(r + 1) * d];
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let inv = 1.0 / (var + eps).sqrt();
                for c in 0..d {
                    row[c] = (row[c] - mean) * inv * g[c] + b[c];
                }
            }
        }
        self.push(out, Op::LayerNorm { x, gamma, beta, eps })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let d = *xv.shape().last().expect("non-scalar");
        let mut out = xv.clone();
        {
            let flat = out.as_slice_mut().unwrap();
            let rows = flat.len() / d;
            for r in 0..rows {
                let row = &mut flat[r * d..(r + 1) * d];
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    sum += *v;
                }
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
        }
        self.push(out, Op::Softmax(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        // Node values are standard layout by construction.
        let v = self.nodes[x.0]
            .value
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("reshape size mismatch");
        self.push(v, Op::Reshape(x))
    }

    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Var {
        let v = self.nodes[x.0]
            .value
            .view()
            .permuted_axes(IxDyn(axes))
            .to_owned();
        self.push(
            v,
            Op::Permute {
                x,
                axes: axes.to_vec(),
            },
        )
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Var {
        let views: Vec<_> = xs.iter().map(|v| self.nodes[v.0].value.view()).collect();
        let v = ndarray::concatenate(Axis(axis), &views).expect("concat shape mismatch");
        self.push(
            v,
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
        )
    }

    /// Crop: starts plus output lengths per axis.
    pub fn slice(&mut self, x: Var, starts: &[usize], lens: &[usize]) -> Var {
        let xv = &self.nodes[x.0].value;
        let ranges: Vec<ndarray::SliceInfoElem> = starts
            .iter()
            .zip(lens.iter())
            .map(|(&s, &l)| ndarray::SliceInfoElem::Slice {
                start: s as isize,
                end: Some((s + l) as isize),
                step: 1,
            })
            .collect();
        let v = xv.slice(ranges.as_slice()).to_owned();
        self.push(
            v,
            Op::Slice {
                x,
                starts: starts.to_vec(),
            },
        )
    }

    pub fn pad2d(&mut self, x: Var, pads: (usize, usize, usize, usize), reflect: bool) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let (_, _, in_h, in_w) = xv.dim();
        let out = kernels::pad2d(&xv, pads, reflect);
        self.push(
            out.into_dyn(),
            Op::Pad2d {
                x,
                in_h,
                in_w,
                pads,
                reflect,
            },
        )
    }

    pub fn roll2d(&mut self, x: Var, dy: isize, dx: isize) -> Var {
        let xv = kernels::apply_view4(&self.nodes[x.0].value);
        let out = kernels::roll2d(&xv, dy, dx);
        self.push(out.into_dyn(), Op::Roll2d { x, dy, dx })
    }

    /// Project a (C,kh,kw) kernel onto zero-sum taps: subtract each
    /// channel's mean over the kernel support.
    pub fn zero_center_kernel(&mut self, x: Var) -> Var {
        let v = zero_center(&self.nodes[x.0].value);
        self.push(v, Op::ZeroCenterKernel(x))
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let xv = &self.nodes[x.0].value;
        let m = xv.sum() / xv.len() as f64;
        self.push(ArrayD::from_elem(IxDyn(&[]), m), Op::MeanAll(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.sum();
        self.push(ArrayD::from_elem(IxDyn(&[]), s), Op::SumAll(x))
    }

    /// Mean squared error between two tensors, as a scalar node.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let sq = self.mul(d, d);
        self.mean_all(sq)
    }

    /// Mean absolute error between two tensors.
    pub fn l1(&mut self, a: Var, b: Var) -> Var {
        let d = self.sub(a, b);
        let ad = self.abs(d);
        self.mean_all(ad)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = &self.nodes[v.0].value;
        assert_eq!(val.len(), 1, "expected a scalar node");
        *val.iter().next().unwrap()
    }

    /// Reverse pass from a scalar loss. Returns gradients for bound params.
    pub fn backward(&self, loss: Var, params: &Params) -> Grads {
        self.backward_detailed(loss, params, &[]).0
    }

    /// Reverse pass that also returns gradients for selected leaf inputs
    /// (used to chain losses across separate graphs).
    pub fn backward_detailed(
        &self,
        loss: Var,
        params: &Params,
        inputs: &[Var],
    ) -> (Grads, Vec<Option<ArrayD<f64>>>) {
        let mut grads: Vec<Option<ArrayD<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(ArrayD::from_elem(self.nodes[loss.0].value.shape(), 1.0));
        let mut out = Grads::zeros(params);
        for i in (0..self.nodes.len()).rev() {
            // Leaf gradients stay in place so input grads survive the walk.
            if matches!(self.nodes[i].op, Op::Leaf { .. }) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf { .. } => unreachable!(),
                Op::Add(a, b) => {
                    self.acc_into(&mut grads, *a, g.clone());
                    self.acc_into(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    self.acc_into(&mut grads, *a, g.clone());
                    self.acc_into(&mut grads, *b, g.mapv(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = &g * &self.nodes[b.0].value;
                    let gb = &g * &self.nodes[a.0].value;
                    self.acc_into(&mut grads, *a, ga);
                    self.acc_into(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => {
                    self.acc_into(&mut grads, *a, g.mapv(|v| v * c));
                }
                Op::AddBiasChan(x, bias) => {
                    let g4 = kernels::apply_view4(&g);
                    let c = g4.dim().1;
                    let mut gb = ArrayD::zeros(IxDyn(&[c]));
                    for ci in 0..c {
                        gb[[ci]] = g4.index_axis(Axis(1), ci).sum();
                    }
                    self.acc_into(&mut grads, *bias, gb);
                    self.acc_into(&mut grads, *x, g);
                }
                Op::AddBiasLast(x, bias) => {
                    let d = *g.shape().last().unwrap();
                    let mut gb = vec![0.0; d];
                    let flat = g.as_slice().unwrap();
                    for (k, v) in flat.iter().enumerate() {
                        gb[k % d] += v;
                    }
                    self.acc_into(&mut grads, *bias, ArrayD::from_shape_vec(IxDyn(&[d]), gb).unwrap());
                    self.acc_into(&mut grads, *x, g);
                }
                Op::Matmul(a, b) => {
                    let av = to3(&self.nodes[a.0].value);
                    let bv = to3(&self.nodes[b.0].value);
                    let gv = to3(&g);
                    let bt = bv.view().permuted_axes([0, 2, 1]).to_owned();
                    let at = av.view().permuted_axes([0, 2, 1]).to_owned();
                    let ga = kernels::batch_matmul(&gv.view(), &bt.view());
                    let gb = kernels::batch_matmul(&at.view(), &gv.view());
                    let (ga, gb) = if self.nodes[a.0].value.ndim() == 2 {
                        (
                            ga.index_axis(Axis(0), 0).to_owned().into_dyn(),
                            gb.index_axis(Axis(0), 0).to_owned().into_dyn(),
                        )
                    } else {
                        (ga.into_dyn(), gb.into_dyn())
                    };
                    self.acc_into(&mut grads, *a, ga);
                    self.acc_into(&mut grads, *b, gb);
                }
                Op::Conv2d {
                    x,
                    w,
                    b,
                    stride,
                    pad,
                    mode,
                } => {
                    let geom = ConvGeom {
                        stride: *stride,
                        pad: *pad,
                        mode: *mode,
                    };
                    let xv = kernels::apply_view4(&self.nodes[x.0].value);
                    let wv = kernels::apply_view4(&self.nodes[w.0].value);
                    let gv = kernels::apply_view4(&g);
                    let (dx, dw, db) = kernels::conv2d_vjp(&xv, &wv, &gv, &geom, b.is_some());
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                    self.acc_into(&mut grads, *w, dw.into_dyn());
                    if let (Some(bvar), Some(db)) = (b, db) {
                        self.acc_into(&mut grads, *bvar, db.into_dyn());
                    }
                }
                Op::DwConv2d { x, w } => {
                    let xv = kernels::apply_view4(&self.nodes[x.0].value);
                    let wv = self.nodes[w.0]
                        .value
                        .view()
                        .into_dimensionality()
                        .unwrap();
                    let gv = kernels::apply_view4(&g);
                    let (dx, dw) = kernels::dwconv2d_vjp(&xv, &wv, &gv);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                    self.acc_into(&mut grads, *w, dw.into_dyn());
                }
                Op::PixelShuffle(x, r) => {
                    let gv = kernels::apply_view4(&g);
                    let dx = kernels::pixel_shuffle_vjp(&gv, *r);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                }
                Op::Bicubic { x, in_h, in_w } => {
                    let gv = kernels::apply_view4(&g);
                    let dx = kernels::bicubic_batch_vjp(&gv, *in_h, *in_w);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                }
                Op::SpectralConv { x, w } => {
                    let xv = kernels::apply_view4(&self.nodes[x.0].value);
                    let gv = kernels::apply_view4(&g);
                    let (dx, dw) =
                        kernels::spectral_conv_vjp(&xv, &self.nodes[w.0].value.view(), &gv);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                    self.acc_into(&mut grads, *w, dw);
                }
                Op::SpectralResize { x, in_h, in_w } => {
                    let gv = kernels::apply_view4(&g);
                    let dx = kernels::spectral_resize_vjp(&gv, *in_h, *in_w);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                }
                Op::Gelu(x) => {
                    let dx = self.nodes[x.0].value.mapv(gelu_grad);
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::LeakyRelu(x, slope) => {
                    let s = *slope;
                    let dx = self.nodes[x.0]
                        .value
                        .mapv(|v| if v >= 0.0 { 1.0 } else { s });
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::Relu(x) => {
                    let dx = self.nodes[x.0].value.mapv(|v| if v >= 0.0 { 1.0 } else { 0.0 });
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::Sigmoid(x) => {
                    let y = &self.nodes[i].value;
                    let dx = y.mapv(|s| s * (1.0 - s));
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::Softplus(x) => {
                    let dx = self.nodes[x.0].value.mapv(sigmoid);
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::Abs(x) => {
                    let dx = self.nodes[x.0].value.mapv(|v| {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    });
                    self.acc_into(&mut grads, *x, &g * &dx);
                }
                Op::LayerNorm { x, gamma, beta, eps } => {
                    let (dx, dgamma, dbeta) = layer_norm_vjp(
                        &self.nodes[x.0].value,
                        &self.nodes[gamma.0].value,
                        *eps,
                        &g,
                    );
                    self.acc_into(&mut grads, *x, dx);
                    self.acc_into(&mut grads, *gamma, dgamma);
                    self.acc_into(&mut grads, *beta, dbeta);
                }
                Op::Softmax(x) => {
                    let y = &self.nodes[i].value;
                    let d = *y.shape().last().unwrap();
                    let mut dx = y.clone();
                    {
                        let dxf = dx.as_slice_mut().unwrap();
                        let yf = y.as_slice().unwrap();
                        let gf = g.as_slice().unwrap();
                        let rows = yf.len() / d;
                        for r in 0..rows {
                            let off = r * d;
                            let dot: f64 = (0..d).map(|c| gf[off + c] * yf[off + c]).sum();
                            for c in 0..d {
                                dxf[off + c] = yf[off + c] * (gf[off + c] - dot);
                            }
                        }
                    }
                    self.acc_into(&mut grads, *x, dx);
                }
                Op::Reshape(x) => {
                    let dx = g
                        .into_shape_with_order(IxDyn(self.nodes[x.0].value.shape()))
                        .expect("reshape grad");
                    self.acc_into(&mut grads, *x, dx);
                }
                Op::Permute { x, axes } => {
                    let mut inverse = vec![0usize; axes.len()];
                    for (pos, &ax) in axes.iter().enumerate() {
                        inverse[ax] = pos;
                    }
                    let dx = g.view().permuted_axes(IxDyn(&inverse)).to_owned();
                    self.acc_into(&mut grads, *x, dx);
                }
                Op::Concat { xs, axis } => {
                    let mut offset = 0;
                    for xv in xs {
                        let len = self.nodes[xv.0].value.shape()[*axis];
                        let part = g
                            .slice_axis(Axis(*axis), ndarray::Slice::from(offset..offset + len))
                            .to_owned();
                        self.acc_into(&mut grads, *xv, part);
                        offset += len;
                    }
                }
                Op::Slice { x, starts } => {
                    let mut dx = ArrayD::zeros(self.nodes[x.0].value.raw_dim());
                    let ranges: Vec<ndarray::SliceInfoElem> = starts
                        .iter()
                        .zip(g.shape().iter())
                        .map(|(&s, &l)| ndarray::SliceInfoElem::Slice {
                            start: s as isize,
                            end: Some((s + l) as isize),
                            step: 1,
                        })
                        .collect();
                    dx.slice_mut(ranges.as_slice()).assign(&g);
                    self.acc_into(&mut grads, *x, dx);
                }
                Op::Pad2d {
                    x,
                    in_h,
                    in_w,
                    pads,
                    reflect,
                } => {
                    let gv = kernels::apply_view4(&g);
                    let dx = kernels::pad2d_vjp(&gv, *in_h, *in_w, *pads, *reflect);
                    self.acc_into(&mut grads, *x, dx.into_dyn());
                }
                Op::Roll2d { x, dy, dx } => {
                    let gv = kernels::apply_view4(&g);
                    let back = kernels::roll2d(&gv, -dy, -dx);
                    self.acc_into(&mut grads, *x, back.into_dyn());
                }
                Op::ZeroCenterKernel(x) => {
                    // The projection is symmetric, so the adjoint is the
                    // same centering applied to the gradient.
                    self.acc_into(&mut grads, *x, zero_center(&g));
                }
                Op::MeanAll(x) => {
                    let n = self.nodes[x.0].value.len() as f64;
                    let gv = *g.iter().next().unwrap();
                    let dx = ArrayD::from_elem(self.nodes[x.0].value.raw_dim(), gv / n);
                    self.acc_into(&mut grads, *x, dx);
                }
                Op::SumAll(x) => {
                    let gv = *g.iter().next().unwrap();
                    let dx = ArrayD::from_elem(self.nodes[x.0].value.raw_dim(), gv);
                    self.acc_into(&mut grads, *x, dx);
                }
            }
        }
        // Collect parameter gradients from the surviving leaf slots.
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = &node.op {
                if let Some(g) = &grads[i] {
                    out.accumulate(*pid, g);
                }
            }
        }
        let input_grads = inputs.iter().map(|v| grads[v.0].clone()).collect();
        (out, input_grads)
    }

    fn acc_into(&self, grads: &mut [Option<ArrayD<f64>>], v: Var, g: ArrayD<f64>) {
        let g = standardize(g);
        match &mut grads[v.0] {
            Some(slot) => kernels::acc(slot, &g),
            slot @ None => *slot = Some(g),
        }
    }
}

fn standardize(a: ArrayD<f64>) -> ArrayD<f64> {
    if a.is_standard_layout() {
        a
    } else {
        let shape = a.raw_dim();
        ArrayD::from_shape_vec(shape, a.iter().cloned().collect()).unwrap()
    }
}

fn zero_center(x: &ArrayD<f64>) -> ArrayD<f64> {
    assert_eq!(x.ndim(), 3, "zero_center_kernel expects (C,kh,kw)");
    let (kh, kw) = (x.shape()[1], x.shape()[2]);
    let n = (kh * kw) as f64;
    let mut out = x.clone();
    for mut plane in out.axis_iter_mut(Axis(0)) {
        let mean = plane.sum() / n;
        plane.mapv_inplace(|v| v - mean);
    }
    out
}

fn to3(x: &ArrayD<f64>) -> ndarray::Array3<f64> {
    match x.ndim() {
        2 => {
            let (a, b) = (x.shape()[0], x.shape()[1]);
            x.view()
                .into_shape_with_order((1, a, b))
                .unwrap()
                .to_owned()
        }
        3 => x.view().into_dimensionality().unwrap().to_owned(),
        n => panic!("matmul expects 2-d or 3-d tensors, got {n}-d"),
    }
}

const GELU_C: f64 = 0.044715;

fn gelu(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let u = k * (x + GELU_C * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        (1.0 + x.exp()).ln()
    }
}

fn layer_norm_vjp(
    x: &ArrayD<f64>,
    gamma: &ArrayD<f64>,
    eps: f64,
    g: &ArrayD<f64>,
) -> (ArrayD<f64>, ArrayD<f64>, ArrayD<f64>) {
    let d = *x.shape().last().unwrap();
    let xf = x.as_slice().unwrap();
    let gf = g.as_slice().unwrap();
    let gam = gamma.as_slice().unwrap();
    let rows = xf.len() / d;
    let mut dx = vec![0.0; xf.len()];
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for r in 0..rows {
        let off = r * d;
        let row = &xf[off..off + d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        // xhat and the two reduction terms.
        let mut sum_gy = 0.0;
        let mut sum_gy_xhat = 0.0;
        for c in 0..d {
            let xhat = (row[c] - mean) * inv;
            let gy = gf[off + c] * gam[c];
            sum_gy += gy;
            sum_gy_xhat += gy * xhat;
            dgamma[c] += gf[off + c] * xhat;
            dbeta[c] += gf[off + c];
        }
        for c in 0..d {
            let xhat = (row[c] - mean) * inv;
            let gy = gf[off + c] * gam[c];
            dx[off + c] = inv * (gy - sum_gy / d as f64 - xhat * sum_gy_xhat / d as f64);
        }
    }
    (
        ArrayD::from_shape_vec(x.raw_dim(), dx).unwrap(),
        ArrayD::from_shape_vec(IxDyn(&[d]), dgamma).unwrap(),
        ArrayD::from_shape_vec(IxDyn(&[d]), dbeta).unwrap(),
    )
}
