//! Numeric kernels behind the autodiff ops: im2col convolution, separable
//! bicubic application, spectral mixing, pixel shuffle. Forward and
//! vector-Jacobian-product pairs live side by side so the adjoints stay in
//! sync with the primal code.

use ndarray::{Array1, Array2, Array4, ArrayView4, ArrayViewMut4, Axis};
use num_complex::Complex64;

use crate::fft::{fft2, ifft2};
use crate::regrid::axis_taps;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Replicate,
}

/// Map a padded coordinate to a source index, or None when it falls in zero
/// padding.
#[inline]
fn src_index(i: isize, n: usize, mode: PadMode) -> Option<usize> {
    if i >= 0 && (i as usize) < n {
        Some(i as usize)
    } else {
        match mode {
            PadMode::Zero => None,
            PadMode::Replicate => Some(i.clamp(0, n as isize - 1) as usize),
        }
    }
}

pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
    pub mode: PadMode,
}

pub fn conv_out_size(n: usize, k: usize, geom: &ConvGeom) -> usize {
    (n + 2 * geom.pad - k) / geom.stride + 1
}

/// im2col for one sample: (Cin,H,W) view -> (Cin*kh*kw, Ho*Wo).
fn im2col(
    x: &ndarray::ArrayView3<f64>,
    kh: usize,
    kw: usize,
    geom: &ConvGeom,
) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let ho = conv_out_size(h, kh, geom);
    let wo = conv_out_size(w, kw, geom);
    let mut col = Array2::<f64>::zeros((c * kh * kw, ho * wo));
    for ci in 0..c {
        for dy in 0..kh {
            for dx in 0..kw {
                let row = (ci * kh + dy) * kw + dx;
                let mut out_idx = 0;
                for oy in 0..ho {
                    let iy = (oy * geom.stride + dy) as isize - geom.pad as isize;
                    let iy = src_index(iy, h, geom.mode);
                    for ox in 0..wo {
                        let ix = (ox * geom.stride + dx) as isize - geom.pad as isize;
                        let v = match (iy, src_index(ix, w, geom.mode)) {
                            (Some(iy), Some(ix)) => x[[ci, iy, ix]],
                            _ => 0.0,
                        };
                        col[[row, out_idx]] = v;
                        out_idx += 1;
                    }
                }
            }
        }
    }
    col
}

/// col2im scatter: transpose of [`im2col`].
fn col2im(
    col: &Array2<f64>,
    gx: &mut ndarray::ArrayViewMut3<f64>,
    kh: usize,
    kw: usize,
    geom: &ConvGeom,
) {
    let (c, h, w) = gx.dim();
    let ho = conv_out_size(h, kh, geom);
    let wo = conv_out_size(w, kw, geom);
    for ci in 0..c {
        for dy in 0..kh {
            for dx in 0..kw {
                let row = (ci * kh + dy) * kw + dx;
                let mut out_idx = 0;
                for oy in 0..ho {
                    let iy = (oy * geom.stride + dy) as isize - geom.pad as isize;
                    let iy = src_index(iy, h, geom.mode);
                    for ox in 0..wo {
                        let ix = (ox * geom.stride + dx) as isize - geom.pad as isize;
                        if let (Some(iy), Some(ix)) = (iy, src_index(ix, w, geom.mode)) {
                            gx[[ci, iy, ix]] += col[[row, out_idx]];
                        }
                        out_idx += 1;
                    }
                }
            }
        }
    }
}

/// Batched conv2d forward: x (B,Cin,H,W), w (Cout,Cin,kh,kw) -> (B,Cout,Ho,Wo).
pub fn conv2d(
    x: &ArrayView4<f64>,
    w: &ArrayView4<f64>,
    bias: Option<&Array1<f64>>,
    geom: &ConvGeom,
) -> Array4<f64> {
    let (b, cin, h, wd) = x.dim();
    let (cout, cin_w, kh, kw) = w.dim();
    assert_eq!(cin, cin_w, "conv2d channel mismatch: {cin} vs {cin_w}");
    let ho = conv_out_size(h, kh, geom);
    let wo = conv_out_size(wd, kw, geom);
    let w_mat = w
        .to_shape((cout, cin * kh * kw))
        .expect("weight reshape")
        .to_owned();
    let mut out = Array4::<f64>::zeros((b, cout, ho, wo));
    for bi in 0..b {
        let col = im2col(&x.index_axis(Axis(0), bi), kh, kw, geom);
        let y = w_mat.dot(&col); // (Cout, Ho*Wo)
        let mut dst = out.index_axis_mut(Axis(0), bi);
        for co in 0..cout {
            let bias_v = bias.map(|bv| bv[co]).unwrap_or(0.0);
            let src = y.row(co);
            let mut plane = dst.index_axis_mut(Axis(0), co);
            for (o, v) in plane.iter_mut().zip(src.iter()) {
                *o = v + bias_v;
            }
        }
    }
    out
}

/// Conv2d VJP. Returns (dx, dw, db). The im2col buffers are recomputed here
/// rather than stored by the tape.
pub fn conv2d_vjp(
    x: &ArrayView4<f64>,
    w: &ArrayView4<f64>,
    g: &ArrayView4<f64>,
    geom: &ConvGeom,
    want_db: bool,
) -> (Array4<f64>, Array4<f64>, Option<Array1<f64>>) {
    let (b, cin, h, wd) = x.dim();
    let (cout, _, kh, kw) = w.dim();
    let (_, _, ho, wo) = g.dim();
    let w_mat = w
        .to_shape((cout, cin * kh * kw))
        .expect("weight reshape")
        .to_owned();
    let mut dx = Array4::<f64>::zeros((b, cin, h, wd));
    let mut dw_mat = Array2::<f64>::zeros((cout, cin * kh * kw));
    let mut db = if want_db {
        Some(Array1::<f64>::zeros(cout))
    } else {
        None
    };
    for bi in 0..b {
        let col = im2col(&x.index_axis(Axis(0), bi), kh, kw, geom);
        let g_b = g.index_axis(Axis(0), bi);
        let g_mat = g_b
            .to_shape((cout, ho * wo))
            .expect("grad reshape")
            .to_owned();
        dw_mat = dw_mat + g_mat.dot(&col.t());
        let dcol = w_mat.t().dot(&g_mat);
        col2im(&dcol, &mut dx.index_axis_mut(Axis(0), bi), kh, kw, geom);
        if let Some(db) = db.as_mut() {
            for co in 0..cout {
                *db.get_mut(co).unwrap() += g_mat.row(co).sum();
            }
        }
    }
    let dw = dw_mat
        .into_shape_with_order((cout, cin, kh, kw))
        .expect("dw reshape");
    (dx, dw, db)
}

/// Depthwise 3x3/5x5 conv with replicate padding and same-size output:
/// x (B,C,H,W), w (C,k,k).
pub fn dwconv2d(x: &ArrayView4<f64>, w: &ndarray::ArrayView3<f64>) -> Array4<f64> {
    let (b, c, h, wd) = x.dim();
    let (cw, kh, kw) = w.dim();
    assert_eq!(c, cw, "depthwise channel mismatch");
    let (py, px) = (kh / 2, kw / 2);
    let mut out = Array4::<f64>::zeros((b, c, h, wd));
    for bi in 0..b {
        for ci in 0..c {
            for oy in 0..h {
                for ox in 0..wd {
                    let mut acc = 0.0;
                    for dy in 0..kh {
                        let iy = (oy + dy) as isize - py as isize;
                        let iy = iy.clamp(0, h as isize - 1) as usize;
                        for dx in 0..kw {
                            let ix = (ox + dx) as isize - px as isize;
                            let ix = ix.clamp(0, wd as isize - 1) as usize;
                            acc += w[[ci, dy, dx]] * x[[bi, ci, iy, ix]];
                        }
                    }
                    out[[bi, ci, oy, ox]] = acc;
                }
            }
        }
    }
    out
}

pub fn dwconv2d_vjp(
    x: &ArrayView4<f64>,
    w: &ndarray::ArrayView3<f64>,
    g: &ArrayView4<f64>,
) -> (Array4<f64>, ndarray::Array3<f64>) {
    let (b, c, h, wd) = x.dim();
    let (_, kh, kw) = w.dim();
    let (py, px) = (kh / 2, kw / 2);
    let mut dx = Array4::<f64>::zeros((b, c, h, wd));
    let mut dw = ndarray::Array3::<f64>::zeros(w.dim());
    for bi in 0..b {
        for ci in 0..c {
            for oy in 0..h {
                for ox in 0..wd {
                    let go = g[[bi, ci, oy, ox]];
                    for dy in 0..kh {
                        let iy = ((oy + dy) as isize - py as isize).clamp(0, h as isize - 1)
                            as usize;
                        for dx_ in 0..kw {
                            let ix = ((ox + dx_) as isize - px as isize)
                                .clamp(0, wd as isize - 1)
                                as usize;
                            dx[[bi, ci, iy, ix]] += go * w[[ci, dy, dx_]];
                            dw[[ci, dy, dx_]] += go * x[[bi, ci, iy, ix]];
                        }
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Pixel shuffle: (B, C·r², H, W) -> (B, C, H·r, W·r), channel index
/// c·r² + dy·r + dx carries the (dy,dx) sub-pixel offset.
pub fn pixel_shuffle(x: &ArrayView4<f64>, r: usize) -> Array4<f64> {
    let (b, c_in, h, w) = x.dim();
    assert_eq!(c_in % (r * r), 0, "channels not divisible by r^2");
    let c = c_in / (r * r);
    let mut out = Array4::<f64>::zeros((b, c, h * r, w * r));
    for bi in 0..b {
        for co in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let ci = co * r * r + dy * r + dx;
                    for y in 0..h {
                        for x_ in 0..w {
                            out[[bi, co, y * r + dy, x_ * r + dx]] = x[[bi, ci, y, x_]];
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn pixel_shuffle_vjp(g: &ArrayView4<f64>, r: usize) -> Array4<f64> {
    let (b, c, hr, wr) = g.dim();
    let (h, w) = (hr / r, wr / r);
    let mut dx = Array4::<f64>::zeros((b, c * r * r, h, w));
    for bi in 0..b {
        for co in 0..c {
            for dy in 0..r {
                for dx_ in 0..r {
                    let ci = co * r * r + dy * r + dx_;
                    for y in 0..h {
                        for x_ in 0..w {
                            dx[[bi, ci, y, x_]] = g[[bi, co, y * r + dy, x_ * r + dx_]];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Batched separable bicubic resize on (B,C,H,W).
pub fn bicubic_batch(x: &ArrayView4<f64>, out_h: usize, out_w: usize) -> Array4<f64> {
    let (b, c, h, w) = x.dim();
    let ty = axis_taps(h, out_h);
    let tx = axis_taps(w, out_w);
    let mut out = Array4::<f64>::zeros((b, c, out_h, out_w));
    for bi in 0..b {
        for ci in 0..c {
            let plane = x.slice(ndarray::s![bi, ci, .., ..]);
            let res = crate::regrid::resize_plane_f64(&plane, &ty, &tx);
            out.slice_mut(ndarray::s![bi, ci, .., ..]).assign(&res);
        }
    }
    out
}

/// Transpose of [`bicubic_batch`]: scatter the output gradient back through
/// the vertical then the horizontal pass.
pub fn bicubic_batch_vjp(
    g: &ArrayView4<f64>,
    in_h: usize,
    in_w: usize,
) -> Array4<f64> {
    let (b, c, out_h, out_w) = g.dim();
    let ty = axis_taps(in_h, out_h);
    let tx = axis_taps(in_w, out_w);
    let mut dx = Array4::<f64>::zeros((b, c, in_h, in_w));
    for bi in 0..b {
        for ci in 0..c {
            // Vertical transpose: (out_h, out_w) -> (in_h, out_w).
            let mut mid = Array2::<f64>::zeros((in_h, out_w));
            for oy in 0..out_h {
                let taps = &ty.idx[oy];
                let w = &ty.w[oy];
                for ox in 0..out_w {
                    let gv = g[[bi, ci, oy, ox]];
                    for t in 0..4 {
                        mid[[taps[t], ox]] += w[t] * gv;
                    }
                }
            }
            // Horizontal transpose: (in_h, out_w) -> (in_h, in_w).
            for iy in 0..in_h {
                for ox in 0..out_w {
                    let taps = &tx.idx[ox];
                    let w = &tx.w[ox];
                    let gv = mid[[iy, ox]];
                    for t in 0..4 {
                        dx[[bi, ci, iy, taps[t]]] += w[t] * gv;
                    }
                }
            }
        }
    }
    dx
}

pub use crate::regrid::Scale;

/// Effective retained modes for a grid: corner blocks stay disjoint.
#[inline]
pub fn clip_modes(modes: usize, n: usize) -> usize {
    modes.min(n / 2)
}

/// Spectrum index for weight slot (q, r, c). Blocks 0..4 cover the sign
/// combinations (+y,+x), (-y,+x), (+y,-x), (-y,-x); negative-frequency slots
/// count outward from zero frequency (slot r is frequency -(r+1)), so
/// clipping the mode count always drops the highest frequencies.
#[inline]
fn block_index(q: usize, r: usize, c: usize, h: usize, w: usize) -> (usize, usize) {
    let row = if q & 1 == 0 { r } else { h - 1 - r };
    let col = if q & 2 == 0 { c } else { w - 1 - c };
    (row, col)
}

/// Weight slot (block, row, col) holding a signed integer frequency pair.
#[inline]
pub fn mode_slot(fy: isize, fx: isize) -> (usize, usize, usize) {
    let q = usize::from(fy < 0) | (usize::from(fx < 0) << 1);
    let r = if fy >= 0 { fy as usize } else { (-fy - 1) as usize };
    let c = if fx >= 0 { fx as usize } else { (-fx - 1) as usize };
    (q, r, c)
}

/// Spectral convolution forward.
///
/// x: (B,Cin,H,W); w: (4,Cout,Cin,my,mx,2) with the trailing axis holding
/// (re, im). Retains the four corner blocks of the full spectrum (clipped to
/// the representable band), channel-mixes them with the complex weights,
/// zeroes everything else and returns the real part of the inverse transform.
pub fn spectral_conv(x: &ArrayView4<f64>, w: &ndarray::ArrayViewD<f64>) -> Array4<f64> {
    let (b, cin, h, wd) = x.dim();
    let wdim = w.shape();
    let (cout, cin_w, my, mx) = (wdim[1], wdim[2], wdim[3], wdim[4]);
    assert_eq!(cin, cin_w, "spectral conv channel mismatch");
    let mye = clip_modes(my, h);
    let mxe = clip_modes(mx, wd);
    let mut out = Array4::<f64>::zeros((b, cout, h, wd));
    for bi in 0..b {
        let xhat: Vec<Array2<Complex64>> = (0..cin)
            .map(|ci| {
                let plane = x
                    .slice(ndarray::s![bi, ci, .., ..])
                    .mapv(|v| Complex64::new(v, 0.0));
                fft2(&plane)
            })
            .collect();
        for co in 0..cout {
            let mut yhat = Array2::<Complex64>::zeros((h, wd));
            for q in 0..4 {
                for r in 0..mye {
                    for cc in 0..mxe {
                        let (row, col) = block_index(q, r, cc, h, wd);
                        let mut acc = Complex64::new(0.0, 0.0);
                        for ci in 0..cin {
                            let wre = w[[q, co, ci, r, cc, 0]];
                            let wim = w[[q, co, ci, r, cc, 1]];
                            acc += Complex64::new(wre, wim) * xhat[ci][[row, col]];
                        }
                        yhat[[row, col]] = acc;
                    }
                }
            }
            let y = ifft2(&yhat);
            let mut dst = out.slice_mut(ndarray::s![bi, co, .., ..]);
            for (o, v) in dst.iter_mut().zip(y.iter()) {
                *o = v.re;
            }
        }
    }
    out
}

/// Spectral convolution VJP: gradients for the input and the weight blocks.
pub fn spectral_conv_vjp(
    x: &ArrayView4<f64>,
    w: &ndarray::ArrayViewD<f64>,
    g: &ArrayView4<f64>,
) -> (Array4<f64>, ndarray::ArrayD<f64>) {
    let (b, cin, h, wd) = x.dim();
    let wdim = w.shape();
    let (cout, my, mx) = (wdim[1], wdim[3], wdim[4]);
    let mye = clip_modes(my, h);
    let mxe = clip_modes(mx, wd);
    let n = (h * wd) as f64;
    let mut dx = Array4::<f64>::zeros((b, cin, h, wd));
    let mut dw = ndarray::ArrayD::<f64>::zeros(w.shape());
    for bi in 0..b {
        let xhat: Vec<Array2<Complex64>> = (0..cin)
            .map(|ci| {
                let plane = x
                    .slice(ndarray::s![bi, ci, .., ..])
                    .mapv(|v| Complex64::new(v, 0.0));
                fft2(&plane)
            })
            .collect();
        // gyhat = (1/N) * fft2(g) per output channel.
        let gyhat: Vec<Array2<Complex64>> = (0..cout)
            .map(|co| {
                let plane = g
                    .slice(ndarray::s![bi, co, .., ..])
                    .mapv(|v| Complex64::new(v, 0.0));
                let mut f = fft2(&plane);
                f.mapv_inplace(|v| v / n);
                f
            })
            .collect();
        for ci in 0..cin {
            let mut gxhat = Array2::<Complex64>::zeros((h, wd));
            for q in 0..4 {
                for r in 0..mye {
                    for cc in 0..mxe {
                        let (row, col) = block_index(q, r, cc, h, wd);
                        let xk = xhat[ci][[row, col]];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for co in 0..cout {
                            let wk = Complex64::new(
                                w[[q, co, ci, r, cc, 0]],
                                w[[q, co, ci, r, cc, 1]],
                            );
                            let gy = gyhat[co][[row, col]];
                            acc += wk.conj() * gy;
                            let gw = xk.conj() * gy;
                            dw[[q, co, ci, r, cc, 0]] += gw.re;
                            dw[[q, co, ci, r, cc, 1]] += gw.im;
                        }
                        gxhat[[row, col]] = acc;
                    }
                }
            }
            // dx = Re(N * ifft2(gxhat)).
            let gx = ifft2(&gxhat);
            let mut dst = dx.slice_mut(ndarray::s![bi, ci, .., ..]);
            for (o, v) in dst.iter_mut().zip(gx.iter()) {
                *o = v.re * n;
            }
        }
    }
    (dx, dw)
}

/// Fourier resampling: crop or zero-pad the spectrum to (out_h, out_w),
/// scaled so constants are preserved. Used by the U-shaped operator stack
/// for grid halving/doubling.
pub fn spectral_resize(x: &ArrayView4<f64>, out_h: usize, out_w: usize) -> Array4<f64> {
    let (b, c, h, w) = x.dim();
    let alpha = (out_h * out_w) as f64 / (h * w) as f64;
    let mut out = Array4::<f64>::zeros((b, c, out_h, out_w));
    for bi in 0..b {
        for ci in 0..c {
            let plane = x
                .slice(ndarray::s![bi, ci, .., ..])
                .mapv(|v| Complex64::new(v, 0.0));
            let xf = fft2(&plane);
            let mut yf = Array2::<Complex64>::zeros((out_h, out_w));
            copy_spectrum(&xf, &mut yf, alpha);
            let y = ifft2(&yf);
            let mut dst = out.slice_mut(ndarray::s![bi, ci, .., ..]);
            for (o, v) in dst.iter_mut().zip(y.iter()) {
                *o = v.re;
            }
        }
    }
    out
}

pub fn spectral_resize_vjp(
    g: &ArrayView4<f64>,
    in_h: usize,
    in_w: usize,
) -> Array4<f64> {
    let (b, c, out_h, out_w) = g.dim();
    let alpha = (out_h * out_w) as f64 / (in_h * in_w) as f64;
    let n_out = (out_h * out_w) as f64;
    let n_in = (in_h * in_w) as f64;
    let mut dx = Array4::<f64>::zeros((b, c, in_h, in_w));
    for bi in 0..b {
        for ci in 0..c {
            let plane = g
                .slice(ndarray::s![bi, ci, .., ..])
                .mapv(|v| Complex64::new(v, 0.0));
            let mut gf = fft2(&plane);
            gf.mapv_inplace(|v| v / n_out);
            // Transpose of the copy: scatter shared frequencies back.
            let mut gxf = Array2::<Complex64>::zeros((in_h, in_w));
            copy_spectrum_transpose(&gf, &mut gxf, alpha);
            let gx = ifft2(&gxf);
            let mut dst = dx.slice_mut(ndarray::s![bi, ci, .., ..]);
            for (o, v) in dst.iter_mut().zip(gx.iter()) {
                *o = v.re * n_in;
            }
        }
    }
    dx
}

/// Shared frequency ranges between two grid sizes along one axis: number of
/// non-negative rows and negative rows kept.
fn shared_rows(n_from: usize, n_to: usize) -> (usize, usize) {
    let n = n_from.min(n_to);
    ((n + 1) / 2, n / 2)
}

fn copy_spectrum(src: &Array2<Complex64>, dst: &mut Array2<Complex64>, alpha: f64) {
    let (hs, ws) = src.dim();
    let (hd, wd) = dst.dim();
    let (ty, by) = shared_rows(hs, hd);
    let (tx, bx) = shared_rows(ws, wd);
    for r in 0..ty + by {
        let (sr, dr) = if r < ty {
            (r, r)
        } else {
            let off = r - ty;
            (hs - by + off, hd - by + off)
        };
        for c in 0..tx + bx {
            let (sc, dc) = if c < tx {
                (c, c)
            } else {
                let off = c - tx;
                (ws - bx + off, wd - bx + off)
            };
            dst[[dr, dc]] = src[[sr, sc]] * alpha;
        }
    }
}

fn copy_spectrum_transpose(src: &Array2<Complex64>, dst: &mut Array2<Complex64>, alpha: f64) {
    // The copy is a partial permutation times alpha; its transpose walks the
    // same index pairs in the opposite direction.
    let (hs, ws) = src.dim(); // = output grid of the forward
    let (hd, wd) = dst.dim(); // = input grid of the forward
    let (ty, by) = shared_rows(hd, hs);
    let (tx, bx) = shared_rows(wd, ws);
    for r in 0..ty + by {
        let (dr, sr) = if r < ty {
            (r, r)
        } else {
            let off = r - ty;
            (hd - by + off, hs - by + off)
        };
        for c in 0..tx + bx {
            let (dc, sc) = if c < tx {
                (c, c)
            } else {
                let off = c - tx;
                (wd - bx + off, ws - bx + off)
            };
            dst[[dr, dc]] = src[[sr, sc]] * alpha;
        }
    }
}

/// Batched matmul (N,a,b)·(N,b,c) -> (N,a,c).
pub fn batch_matmul(a: &ndarray::ArrayView3<f64>, b: &ndarray::ArrayView3<f64>) -> ndarray::Array3<f64> {
    let (n, ar, ac) = a.dim();
    let (nb, br, bc) = b.dim();
    assert_eq!(n, nb, "batch mismatch");
    assert_eq!(ac, br, "inner dim mismatch: {ac} vs {br}");
    let mut out = ndarray::Array3::<f64>::zeros((n, ar, bc));
    for i in 0..n {
        let prod = a.index_axis(Axis(0), i).dot(&b.index_axis(Axis(0), i));
        out.index_axis_mut(Axis(0), i).assign(&prod);
    }
    out
}

/// Accumulate `src` into `dst` elementwise.
pub fn acc(dst: &mut ndarray::ArrayD<f64>, src: &ndarray::ArrayD<f64>) {
    debug_assert_eq!(dst.shape(), src.shape(), "gradient shape mismatch");
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

/// Roll the last two axes cyclically by (dy, dx).
pub fn roll2d(x: &ArrayView4<f64>, dy: isize, dx: isize) -> Array4<f64> {
    let (b, c, h, w) = x.dim();
    let mut out = Array4::<f64>::zeros((b, c, h, w));
    let dy = dy.rem_euclid(h as isize) as usize;
    let dx = dx.rem_euclid(w as isize) as usize;
    for bi in 0..b {
        for ci in 0..c {
            for y in 0..h {
                for x_ in 0..w {
                    out[[bi, ci, (y + dy) % h, (x_ + dx) % w]] = x[[bi, ci, y, x_]];
                }
            }
        }
    }
    out
}

/// Pad the last two axes. `pads` = (top, bottom, left, right).
pub fn pad2d(
    x: &ArrayView4<f64>,
    pads: (usize, usize, usize, usize),
    reflect: bool,
) -> Array4<f64> {
    let (b, c, h, w) = x.dim();
    let (pt, pb, pl, pr) = pads;
    let mut out = Array4::<f64>::zeros((b, c, h + pt + pb, w + pl + pr));
    for bi in 0..b {
        for ci in 0..c {
            for y in 0..h + pt + pb {
                let sy = map_pad_index(y as isize - pt as isize, h, reflect);
                for x_ in 0..w + pl + pr {
                    let sx = map_pad_index(x_ as isize - pl as isize, w, reflect);
                    out[[bi, ci, y, x_]] = x[[bi, ci, sy, sx]];
                }
            }
        }
    }
    out
}

pub fn pad2d_vjp(
    g: &ArrayView4<f64>,
    in_h: usize,
    in_w: usize,
    pads: (usize, usize, usize, usize),
    reflect: bool,
) -> Array4<f64> {
    let (b, c, _, _) = g.dim();
    let (pt, _pb, pl, _pr) = pads;
    let (gh, gw) = (g.dim().2, g.dim().3);
    let mut dx = Array4::<f64>::zeros((b, c, in_h, in_w));
    for bi in 0..b {
        for ci in 0..c {
            for y in 0..gh {
                let sy = map_pad_index(y as isize - pt as isize, in_h, reflect);
                for x_ in 0..gw {
                    let sx = map_pad_index(x_ as isize - pl as isize, in_w, reflect);
                    dx[[bi, ci, sy, sx]] += g[[bi, ci, y, x_]];
                }
            }
        }
    }
    dx
}

/// Reflect (without repeating the edge) or replicate an out-of-range index.
fn map_pad_index(i: isize, n: usize, reflect: bool) -> usize {
    if i >= 0 && (i as usize) < n {
        return i as usize;
    }
    if !reflect {
        return i.clamp(0, n as isize - 1) as usize;
    }
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

pub fn apply_view4<'a>(x: &'a ndarray::ArrayD<f64>) -> ArrayView4<'a, f64> {
    x.view().into_dimensionality().expect("expected 4-d tensor")
}

pub fn apply_view4_mut<'a>(x: &'a mut ndarray::ArrayD<f64>) -> ArrayViewMut4<'a, f64> {
    x.view_mut()
        .into_dimensionality()
        .expect("expected 4-d tensor")
}
