//! Minimal PNG renderer for the kinetic-energy spectrum plots: a log-log
//! main panel over all wavenumber bins and a zoomed panel over the top
//! quartile, with a small bitmap font for ticks and the legend.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::evaluation::spectrum::SpectrumCurve;
use crate::{Error, Result};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const FG: Rgb<u8> = Rgb([30, 30, 30]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

const PALETTE: [Rgb<u8>; 8] = [
    Rgb([0, 0, 0]),
    Rgb([214, 69, 65]),
    Rgb([31, 119, 180]),
    Rgb([44, 160, 44]),
    Rgb([255, 127, 14]),
    Rgb([148, 103, 189]),
    Rgb([140, 86, 75]),
    Rgb([23, 190, 207]),
];

struct Panel {
    x0: u32,
    y0: u32,
    w: u32,
    h: u32,
    log_kx: (f64, f64),
    log_e: (f64, f64),
}

impl Panel {
    fn map(&self, log_k: f64, log_e: f64) -> (i64, i64) {
        let fx = (log_k - self.log_kx.0) / (self.log_kx.1 - self.log_kx.0).max(1e-12);
        let fy = (log_e - self.log_e.0) / (self.log_e.1 - self.log_e.0).max(1e-12);
        (
            self.x0 as i64 + (fx * self.w as f64).round() as i64,
            (self.y0 + self.h) as i64 - (fy * self.h as f64).round() as i64,
        )
    }

    fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 as i64
            && x <= (self.x0 + self.w) as i64
            && y >= self.y0 as i64
            && y <= (self.y0 + self.h) as i64
    }
}

/// Render the spectra as `spectra.png`: log-log main panel plus a zoom on
/// the top-quartile wavenumbers.
pub fn render_spectra(spectra: &[(String, SpectrumCurve)], path: impl AsRef<Path>) -> Result<()> {
    if spectra.is_empty() {
        return Err(Error::validation("no spectra to plot"));
    }
    let (width, height) = (960u32, 480u32);
    let mut img = RgbImage::from_pixel(width, height, BG);

    let k_max = spectra.iter().map(|(_, c)| c.k.len()).max().unwrap_or(1);
    let (e_lo, e_hi) = energy_range(spectra);
    let main = Panel {
        x0: 60,
        y0: 30,
        w: 560,
        h: 400,
        log_kx: (0.0, (k_max as f64).log10().max(0.301)),
        log_e: (e_lo, e_hi),
    };
    // Zoom: top quartile of bins.
    let zoom_from = ((3 * k_max) / 4).max(1);
    let (ze_lo, ze_hi) = energy_range_in(spectra, zoom_from, k_max);
    let zoom = Panel {
        x0: 700,
        y0: 80,
        w: 220,
        h: 300,
        log_kx: ((zoom_from as f64).log10(), (k_max as f64).log10()),
        log_e: (ze_lo, ze_hi),
    };

    for panel in [&main, &zoom] {
        draw_frame(&mut img, panel);
        draw_decade_grid(&mut img, panel);
    }

    for (i, (_, curve)) in spectra.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        draw_curve(&mut img, &main, curve, color);
        draw_curve(&mut img, &zoom, curve, color);
    }

    // Legend.
    let mut ly = 38;
    for (i, (label, _)) in spectra.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for dx in 0..18 {
            for dy in 0..3 {
                put(&mut img, 640 + dx, ly + dy, color);
            }
        }
        draw_text(&mut img, 640 + 22, ly - 2, &label.to_lowercase(), FG);
        ly += 14;
    }
    draw_text(&mut img, main.x0 as i64 + 200, 455, "relative wavenumber", FG);
    draw_text(&mut img, 6, 20, "normalized kinetic energy", FG);
    draw_text(&mut img, zoom.x0 as i64, 60, "zoom: high-k", FG);

    img.save(path.as_ref())
        .map_err(|e| Error::validation(format!("png encode failed: {e}")))?;
    Ok(())
}

fn energy_range(spectra: &[(String, SpectrumCurve)]) -> (f64, f64) {
    energy_range_in(spectra, 1, usize::MAX)
}

fn energy_range_in(spectra: &[(String, SpectrumCurve)], k_lo: usize, k_hi: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, c) in spectra {
        for (k, e) in c.k.iter().zip(c.energy.iter()) {
            if *k >= k_lo && *k <= k_hi && *e > 0.0 {
                lo = lo.min(e.log10());
                hi = hi.max(e.log10());
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (-12.0, 0.0)
    } else {
        (lo.floor() - 0.2, hi.ceil() + 0.2)
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_frame(img: &mut RgbImage, p: &Panel) {
    for x in p.x0..=p.x0 + p.w {
        put(img, x as i64, p.y0 as i64, FG);
        put(img, x as i64, (p.y0 + p.h) as i64, FG);
    }
    for y in p.y0..=p.y0 + p.h {
        put(img, p.x0 as i64, y as i64, FG);
        put(img, (p.x0 + p.w) as i64, y as i64, FG);
    }
}

fn draw_decade_grid(img: &mut RgbImage, p: &Panel) {
    // Horizontal decade lines with exponent labels.
    let lo = p.log_e.0.ceil() as i64;
    let hi = p.log_e.1.floor() as i64;
    for d in lo..=hi {
        let (_, y) = p.map(p.log_kx.0, d as f64);
        for x in p.x0 + 1..p.x0 + p.w {
            put(img, x as i64, y, GRID);
        }
        draw_text(img, p.x0 as i64 - 34, y - 3, &format!("1e{d}"), FG);
    }
    // Vertical decade lines for k.
    let klo = p.log_kx.0.ceil() as i64;
    let khi = p.log_kx.1.floor() as i64;
    for d in klo..=khi {
        let (x, _) = p.map(d as f64, p.log_e.0);
        for y in p.y0 + 1..p.y0 + p.h {
            put(img, x, y as i64, GRID);
        }
        draw_text(
            img,
            x - 8,
            (p.y0 + p.h) as i64 + 4,
            &format!("{}", 10f64.powi(d as i32) as i64),
            FG,
        );
    }
}

fn draw_curve(img: &mut RgbImage, p: &Panel, curve: &SpectrumCurve, color: Rgb<u8>) {
    let mut prev: Option<(i64, i64)> = None;
    for (k, e) in curve.k.iter().zip(curve.energy.iter()) {
        if *e <= 0.0 {
            prev = None;
            continue;
        }
        let lk = (*k as f64).log10();
        if lk < p.log_kx.0 - 1e-9 || lk > p.log_kx.1 + 1e-9 {
            continue;
        }
        let pt = p.map(lk, e.log10());
        if let Some(prev_pt) = prev {
            draw_line(img, p, prev_pt, pt, color);
        }
        prev = Some(pt);
    }
}

fn draw_line(img: &mut RgbImage, p: &Panel, a: (i64, i64), b: (i64, i64), color: Rgb<u8>) {
    let (mut x0, mut y0) = a;
    let (x1, y1) = b;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if p.contains(x0, y0) {
            put(img, x0, y0, color);
            put(img, x0, y0 + 1, color);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: Rgb<u8>) {
    let mut cx = x;
    for ch in text.chars() {
        let glyph = glyph(ch);
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..5 {
                if bits & (0b10000 >> col) != 0 {
                    put(img, cx + col as i64, y + row as i64, color);
                }
            }
        }
        cx += 6;
    }
}

/// 5x7 glyphs; rows top to bottom, 5 bits each.
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        ' ' => [0; 7],
        'a' => [0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F],
        'b' => [0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x1E],
        'c' => [0x00, 0x00, 0x0E, 0x11, 0x10, 0x11, 0x0E],
        'd' => [0x01, 0x01, 0x0F, 0x11, 0x11, 0x11, 0x0F],
        'e' => [0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E],
        'f' => [0x06, 0x08, 0x1C, 0x08, 0x08, 0x08, 0x08],
        'g' => [0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E],
        'h' => [0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x11],
        'i' => [0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E],
        'j' => [0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C],
        'k' => [0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12],
        'l' => [0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'm' => [0x00, 0x00, 0x1A, 0x15, 0x15, 0x15, 0x15],
        'n' => [0x00, 0x00, 0x1E, 0x11, 0x11, 0x11, 0x11],
        'o' => [0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E],
        'p' => [0x00, 0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10],
        'q' => [0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x01],
        'r' => [0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10],
        's' => [0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E],
        't' => [0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06],
        'u' => [0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D],
        'v' => [0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'w' => [0x00, 0x00, 0x15, 0x15, 0x15, 0x15, 0x0A],
        'x' => [0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11],
        'y' => [0x00, 0x11, 0x11, 0x0F, 0x01, 0x11, 0x0E],
        'z' => [0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F],
        _ => [0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F],
    }
}
