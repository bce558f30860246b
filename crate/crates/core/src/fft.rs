//! 2-D FFT helpers over rustfft.
//!
//! Conventions used throughout the crate: the forward transform is
//! unnormalized, the inverse carries the 1/(H·W) factor. With that pairing a
//! spectral multiplication is exactly a circular convolution with the kernel
//! `ifft2(weights)`.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward 2-D DFT (unnormalized), row transform then column transform.
pub fn fft2(x: &Array2<Complex64>) -> Array2<Complex64> {
    transform2(x, rustfft::FftDirection::Forward, 1.0)
}

/// Inverse 2-D DFT carrying the 1/(H·W) normalization.
pub fn ifft2(x: &Array2<Complex64>) -> Array2<Complex64> {
    let n = (x.nrows() * x.ncols()) as f64;
    transform2(x, rustfft::FftDirection::Inverse, 1.0 / n)
}

/// Forward 2-D DFT of a real field.
pub fn fft2_real(x: &ndarray::ArrayView2<f64>) -> Array2<Complex64> {
    let c = x.mapv(|v| Complex64::new(v, 0.0));
    fft2(&c)
}

fn transform2(
    x: &Array2<Complex64>,
    dir: rustfft::FftDirection,
    scale: f64,
) -> Array2<Complex64> {
    let (h, w) = x.dim();
    let mut planner = FftPlanner::new();
    let fft_w = planner.plan_fft(w, dir);
    let fft_h = planner.plan_fft(h, dir);

    let mut out = x.clone();
    // Rows.
    let mut row_buf = vec![Complex64::default(); w];
    for mut row in out.rows_mut() {
        row_buf.copy_from_slice(row.as_slice().expect("contiguous row"));
        fft_w.process(&mut row_buf);
        row.as_slice_mut().unwrap().copy_from_slice(&row_buf);
    }
    // Columns.
    let mut col_buf = vec![Complex64::default(); h];
    for j in 0..w {
        for i in 0..h {
            col_buf[i] = out[[i, j]];
        }
        fft_h.process(&mut col_buf);
        for i in 0..h {
            out[[i, j]] = col_buf[i] * scale;
        }
    }
    out
}
