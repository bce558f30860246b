//! Independent reference implementations used by the verification suite.
//!
//! Everything here is deliberately brute force and shares no code with the
//! production paths it checks: the DFT is a direct row-column summation (no
//! FFT algorithm), interpolation is a per-pixel kernel sum (no separable
//! passes), and circular convolution is a direct spatial double loop. The
//! working precision honours [`crate::precision::oracle_precision`].

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::precision::{oracle_precision, Precision};
use crate::regrid::keys_kernel;

fn prec() -> Precision {
    oracle_precision().unwrap_or(Precision::F64)
}

/// Direct (non-FFT) 2-D DFT, unnormalized forward convention.
pub fn naive_dft2(x: &ArrayView2<f64>) -> Array2<Complex64> {
    let p = prec();
    let (h, w) = x.dim();
    // Row transform.
    let mut rows = Array2::<Complex64>::zeros((h, w));
    for i in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..w {
                let ang = -2.0 * std::f64::consts::PI * (kx * j) as f64 / w as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * x[[i, j]];
            }
            rows[[i, kx]] = Complex64::new(p.quantize(acc.re), p.quantize(acc.im));
        }
    }
    // Column transform.
    let mut out = Array2::<Complex64>::zeros((h, w));
    for kx in 0..w {
        for ky in 0..h {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..h {
                let ang = -2.0 * std::f64::consts::PI * (ky * i) as f64 / h as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * rows[[i, kx]];
            }
            out[[ky, kx]] = Complex64::new(p.quantize(acc.re), p.quantize(acc.im));
        }
    }
    out
}

/// Direct inverse 2-D DFT with 1/(H·W) normalization.
pub fn naive_idft2(x: &Array2<Complex64>) -> Array2<Complex64> {
    let p = prec();
    let (h, w) = x.dim();
    let norm = 1.0 / (h * w) as f64;
    let mut rows = Array2::<Complex64>::zeros((h, w));
    for ky in 0..h {
        for j in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for kx in 0..w {
                let ang = 2.0 * std::f64::consts::PI * (kx * j) as f64 / w as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * x[[ky, kx]];
            }
            rows[[ky, j]] = acc;
        }
    }
    let mut out = Array2::<Complex64>::zeros((h, w));
    for j in 0..w {
        for i in 0..h {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in 0..h {
                let ang = 2.0 * std::f64::consts::PI * (ky * i) as f64 / h as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * rows[[ky, j]];
            }
            acc *= norm;
            out[[i, j]] = Complex64::new(p.quantize(acc.re), p.quantize(acc.im));
        }
    }
    out
}

/// Kinetic-energy spectrum from the direct DFT, with its own binning loop.
///
/// Returns normalized bin energies for k = 1..=floor(min(H,W)/2); k=1 is one
/// full wave across the domain's shorter side. `None` when both components
/// are constant.
pub fn energy_spectrum_direct(
    u: &ArrayView2<f64>,
    v: &ArrayView2<f64>,
) -> Option<Vec<f64>> {
    let (h, w) = u.dim();
    assert_eq!((h, w), v.dim(), "component shapes must match");
    let mu = u.sum() / (h * w) as f64;
    let mv = v.sum() / (h * w) as f64;
    let uc = u.mapv(|x| x - mu);
    let vc = v.mapv(|x| x - mv);
    let uf = naive_dft2(&uc.view());
    let vf = naive_dft2(&vc.view());
    let k_max = h.min(w) / 2;
    if k_max == 0 {
        return None;
    }
    let mut bins = vec![0.0f64; k_max + 1];
    let norm = ((h * w) as f64).powi(2);
    // Relative wavenumber: one full wave across the shorter side is k=1.
    let shorter = h.min(w) as f64;
    for ky in 0..h {
        for kx in 0..w {
            if ky == 0 && kx == 0 {
                continue;
            }
            let fy = signed_freq(ky, h) * shorter / h as f64;
            let fx = signed_freq(kx, w) * shorter / w as f64;
            let kr = (fy * fy + fx * fx).sqrt();
            let bin = (kr.round() as usize).clamp(1, k_max);
            let e = 0.5 * (uf[[ky, kx]].norm_sqr() + vf[[ky, kx]].norm_sqr()) / norm;
            bins[bin] += e;
        }
    }
    let total: f64 = bins.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(bins[1..].iter().map(|e| e / total).collect())
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Least-squares slope of log E(k) against log k over `k_lo..=k_hi`
/// (1-based bins). Bins with non-positive energy are skipped.
pub fn loglog_slope(bins: &[f64], k_lo: usize, k_hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (k_lo..=k_hi)
        .filter(|&k| k >= 1 && k <= bins.len() && bins[k - 1] > 0.0)
        .map(|k| ((k as f64).ln(), bins[k - 1].ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Direct per-pixel bicubic evaluation: for every output pixel, the full 4x4
/// Keys kernel sum with half-pixel centers and clamped (edge replicated)
/// indices. No separable passes.
pub fn bicubic_kernel_sum(x: &ArrayView2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let p = prec();
    let (h, w) = x.dim();
    let sy = out_h as f64 / h as f64;
    let sx = out_w as f64 / w as f64;
    let mut out = Array2::<f64>::zeros((out_h, out_w));
    for oy in 0..out_h {
        let src_y = (oy as f64 + 0.5) / sy - 0.5;
        let by = src_y.floor() as isize;
        for ox in 0..out_w {
            let src_x = (ox as f64 + 0.5) / sx - 0.5;
            let bx = src_x.floor() as isize;
            let mut acc = 0.0;
            for dy in -1isize..=2 {
                let wy = keys_kernel(src_y - (by + dy) as f64);
                let iy = (by + dy).clamp(0, h as isize - 1) as usize;
                for dx in -1isize..=2 {
                    let wx = keys_kernel(src_x - (bx + dx) as f64);
                    let ix = (bx + dx).clamp(0, w as isize - 1) as usize;
                    acc += wy * wx * x[[iy, ix]];
                }
            }
            out[[oy, ox]] = p.quantize(acc);
        }
    }
    out
}

/// Brute-force circular convolution of a real field with a complex kernel,
/// real part of the result. `kernel[dy][dx]` multiplies `x[y-dy, x-dx]`
/// (indices mod the grid size).
pub fn circular_convolution_real(
    x: &ArrayView2<f64>,
    kernel: &Array2<Complex64>,
) -> Array2<f64> {
    let p = prec();
    let (h, w) = x.dim();
    assert_eq!((h, w), kernel.dim(), "kernel must match the grid");
    let mut out = Array2::<f64>::zeros((h, w));
    for oy in 0..h {
        for ox in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for dy in 0..h {
                for dx in 0..w {
                    let iy = (oy + h - dy) % h;
                    let ix = (ox + w - dx) % w;
                    acc += kernel[[dy, dx]] * x[[iy, ix]];
                }
            }
            out[[oy, ox]] = p.quantize(acc.re);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn naive_dft_single_mode() {
        let n = 8;
        let x = Array2::from_shape_fn((n, n), |(i, j)| {
            (2.0 * std::f64::consts::PI * (2 * i + 3 * j) as f64 / n as f64).cos()
        });
        let xf = naive_dft2(&x.view());
        // A unit cosine at mode (2,3) puts N^2/2 at (2,3) and (N-2,N-3).
        let expect = (n * n) as f64 / 2.0;
        assert!((xf[[2, 3]].re - expect).abs() < 1e-6);
        assert!((xf[[n - 2, n - 3]].re - expect).abs() < 1e-6);
        let stray: f64 = xf
            .indexed_iter()
            .filter(|((i, j), _)| !((*i == 2 && *j == 3) || (*i == n - 2 && *j == n - 3)))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        assert!(stray < 1e-8, "off-mode leakage {stray}");
    }

    #[test]
    fn naive_roundtrip() {
        let x = Array2::from_shape_fn((6, 7), |(i, j)| (i as f64 * 1.3 - j as f64 * 0.7).sin());
        let back = naive_idft2(&naive_dft2(&x.view()));
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b.re).abs() < 1e-9 && b.im.abs() < 1e-9);
        }
    }

    #[test]
    fn slope_of_exact_powerlaw() {
        let bins: Vec<f64> = (1..=20).map(|k| (k as f64).powf(-3.0)).collect();
        let s = loglog_slope(&bins, 2, 18);
        assert!((s + 3.0).abs() < 1e-12, "slope {s}");
    }
}
