//! Radially binned kinetic-energy spectra.
//!
//! Modal energy ½(|û|²+|v̂|²) is binned by rounded isotropic relative
//! wavenumber; k=1 is one full wave across the domain's shorter side, so
//! non-square grids scale each axis by shorter/axis length. Bins run
//! 1..=floor(min(H,W)/2); modes rounding outside that range are clamped into
//! the nearest bin so total binned energy obeys Parseval exactly.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::fft::fft2_real;
use crate::grid::GridField;
use crate::{Error, Result};

/// Normalized kinetic energy per integer relative wavenumber bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCurve {
    /// Bin centers 1..=K.
    pub k: Vec<usize>,
    /// Normalized energy per bin, sums to 1 for non-constant fields.
    pub energy: Vec<f64>,
    /// Pre-normalization energy per bin; sums to ½·mean(u²+v²) after mean
    /// removal (Parseval).
    pub raw_energy: Vec<f64>,
    /// Set when the input was constant: all bins zero, normalization skipped.
    pub degenerate: bool,
}

impl SpectrumCurve {
    pub fn total_raw(&self) -> f64 {
        self.raw_energy.iter().sum()
    }
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Kinetic-energy spectrum of a velocity component pair.
pub fn energy_spectrum(u: &ArrayView2<f64>, v: &ArrayView2<f64>) -> Result<SpectrumCurve> {
    let (h, w) = u.dim();
    if v.dim() != (h, w) {
        return Err(Error::shape(format!(
            "u is {h}x{w} but v is {}x{}",
            v.dim().0,
            v.dim().1
        )));
    }
    if h < 4 || w < 4 {
        return Err(Error::validation("spectrum needs at least a 4x4 grid"));
    }
    if !u.iter().chain(v.iter()).all(|x| x.is_finite()) {
        return Err(Error::validation("non-finite values in spectrum input"));
    }
    let n = (h * w) as f64;
    let mu = u.sum() / n;
    let mv = v.sum() / n;
    let uc = u.mapv(|x| x - mu);
    let vc = v.mapv(|x| x - mv);
    let uf = fft2_real(&uc.view());
    let vf = fft2_real(&vc.view());
    let k_max = h.min(w) / 2;
    let shorter = h.min(w) as f64;
    let mut raw = vec![0.0f64; k_max];
    let norm = n * n;
    for ky in 0..h {
        for kx in 0..w {
            if ky == 0 && kx == 0 {
                continue;
            }
            let fy = signed_freq(ky, h) * shorter / h as f64;
            let fx = signed_freq(kx, w) * shorter / w as f64;
            let kr = (fy * fy + fx * fx).sqrt();
            let bin = (kr.round() as usize).clamp(1, k_max);
            raw[bin - 1] += 0.5 * (uf[[ky, kx]].norm_sqr() + vf[[ky, kx]].norm_sqr()) / norm;
        }
    }
    let total: f64 = raw.iter().sum();
    let degenerate = total <= 0.0;
    let energy = if degenerate {
        vec![0.0; k_max]
    } else {
        raw.iter().map(|e| e / total).collect()
    };
    Ok(SpectrumCurve {
        k: (1..=k_max).collect(),
        energy,
        raw_energy: raw,
        degenerate,
    })
}

/// Spectrum of a snapshot: channels 0 and 1 are treated as the (u, v)
/// velocity pair; single-channel fields use v = 0.
pub fn field_spectrum(field: &GridField) -> Result<SpectrumCurve> {
    let u = field.channel_f64(0);
    if field.n_channels() >= 2 {
        let v = field.channel_f64(1);
        energy_spectrum(&u.view(), &v.view())
    } else {
        let zeros = ndarray::Array2::zeros(u.dim());
        energy_spectrum(&u.view(), &zeros.view())
    }
}

/// Mean spectrum over snapshots (bin-wise mean of normalized curves).
pub fn mean_spectrum(curves: &[SpectrumCurve]) -> Result<SpectrumCurve> {
    let live: Vec<&SpectrumCurve> = curves.iter().filter(|c| !c.degenerate).collect();
    let first = live
        .first()
        .ok_or_else(|| Error::validation("no non-degenerate spectra to average"))?;
    let k = first.k.clone();
    let mut energy = vec![0.0; k.len()];
    let mut raw = vec![0.0; k.len()];
    for c in &live {
        if c.k.len() != k.len() {
            return Err(Error::shape("spectra have different bin counts"));
        }
        for (i, (e, r)) in c.energy.iter().zip(c.raw_energy.iter()).enumerate() {
            energy[i] += e;
            raw[i] += r;
        }
    }
    let m = live.len() as f64;
    energy.iter_mut().for_each(|e| *e /= m);
    raw.iter_mut().for_each(|r| *r /= m);
    Ok(SpectrumCurve {
        k,
        energy,
        raw_energy: raw,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn constant_field_is_degenerate() {
        let u = Array2::from_elem((16, 16), 4.2);
        let v = Array2::from_elem((16, 16), -1.0);
        let c = energy_spectrum(&u.view(), &v.view()).unwrap();
        assert!(c.degenerate);
        assert!(c.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_sine_concentrates_in_bin_5() {
        let n = 64;
        let u = Array2::from_shape_fn((n, n), |(_, x)| {
            (2.0 * std::f64::consts::PI * 5.0 * x as f64 / n as f64).sin()
        });
        let v = Array2::zeros((n, n));
        let c = energy_spectrum(&u.view(), &v.view()).unwrap();
        assert!(
            c.energy[4] >= 0.99,
            "bin 5 has {} of the energy",
            c.energy[4]
        );
    }

    #[test]
    fn normalization_sums_to_one() {
        let u = Array2::from_shape_fn((24, 24), |(y, x)| ((y * 3 + x) as f64 * 0.37).sin());
        let v = Array2::from_shape_fn((24, 24), |(y, x)| ((y + 2 * x) as f64 * 0.11).cos());
        let c = energy_spectrum(&u.view(), &v.view()).unwrap();
        let total: f64 = c.energy.iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "sum {total}");
    }

    #[test]
    fn parseval_identity() {
        let u = Array2::from_shape_fn((20, 28), |(y, x)| ((y * 5 + x) as f64 * 0.21).sin());
        let v = Array2::from_shape_fn((20, 28), |(y, x)| ((2 * y + x) as f64 * 0.13).cos());
        let c = energy_spectrum(&u.view(), &v.view()).unwrap();
        let n = (20 * 28) as f64;
        let mu = u.sum() / n;
        let mv = v.sum() / n;
        let expect = 0.5
            * (u.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>()
                + v.iter().map(|x| (x - mv) * (x - mv)).sum::<f64>())
            / n;
        let total = c.total_raw();
        assert!(
            (total - expect).abs() < 1e-5 * expect.abs().max(1e-12),
            "Parseval: binned {total} vs direct {expect}"
        );
    }

    #[test]
    fn non_square_relative_wavenumber() {
        // One full wave across the short side of a 16x32 grid lands in k=1
        // whether it runs along y or along x (where it needs index 2).
        let (h, w) = (16, 32);
        let u_y = Array2::from_shape_fn((h, w), |(y, _)| {
            (2.0 * std::f64::consts::PI * y as f64 / h as f64).sin()
        });
        let u_x = Array2::from_shape_fn((h, w), |(_, x)| {
            (2.0 * std::f64::consts::PI * 2.0 * x as f64 / w as f64).sin()
        });
        let z = Array2::zeros((h, w));
        let cy = energy_spectrum(&u_y.view(), &z.view()).unwrap();
        let cx = energy_spectrum(&u_x.view(), &z.view()).unwrap();
        assert!(cy.energy[0] > 0.99, "y wave: {}", cy.energy[0]);
        assert!(cx.energy[0] > 0.99, "x wave: {}", cx.energy[0]);
    }
}
