//! Fidelity metrics and noise-statistics estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Minimum number of unclipped pixels for [`estimate_noise_stats`].
pub const MIN_VALID_PIXELS: usize = 1000;
/// Clean-intensity gate for residual statistics; moments near 0 and 1 are
/// biased by clipping.
pub const VALID_RANGE: (f32, f32) = (0.05, 0.95);

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Peak signal-to-noise ratio in dB for peak 1. Identical images give
/// `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.require_same_dims(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Separable 'valid' filtering with the SSIM window.
fn filter_valid(data: &[f64], h: usize, w: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * data[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| win[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f32], b: &[f32], h: usize, w: usize) -> f64 {
    let win = gaussian_window();
    let a: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
    let b: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mu_a = filter_valid(&a, h, w, &win);
    let mu_b = filter_valid(&b, h, w, &win);
    let e_aa = filter_valid(&prod(&a, &a), h, w, &win);
    let e_bb = filter_valid(&prod(&b, &b), h, w, &win);
    let e_ab = filter_valid(&prod(&a, &b), h, w, &win);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = e_aa[i] - ma * ma;
            let vb = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    total / mu_a.len() as f64
}

/// Single-scale SSIM (11x11 Gaussian window, sigma 1.5, K = (0.01, 0.03),
/// dynamic range 1), averaged over the valid region and over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.require_same_dims(b)?;
    let (h, w, c) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let sum: f64 = (0..c).map(|ch| ssim_plane(a.plane(ch), b.plane(ch), h, w)).sum();
    Ok(sum / c as f64)
}

/// Moments of the residual `noisy - clean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    /// Lag-1 correlation of the residual along `[x, y]`, averaged over
    /// channels.
    pub lag1_autocorr: [f64; 2],
    pub sample_count: usize,
}

/// Residual statistics over pixels whose clean value lies in
/// [`VALID_RANGE`] in every channel.
pub fn estimate_noise_stats(noisy: &Image, clean: &Image) -> Result<NoiseStats> {
    noisy.require_same_dims(clean)?;
    clean.require_channels(3)?;
    let (h, w, _) = clean.dims();
    let n = h * w;
    let valid: Vec<bool> = (0..n)
        .map(|i| (0..3).all(|c| (VALID_RANGE.0..=VALID_RANGE.1).contains(&clean.plane(c)[i])))
        .collect();
    let count = valid.iter().filter(|v| **v).count();
    if count < MIN_VALID_PIXELS {
        return Err(Error::TooFewSamples {
            found: count,
            required: MIN_VALID_PIXELS,
        });
    }
    let res: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            noisy
                .plane(c)
                .iter()
                .zip(clean.plane(c))
                .map(|(&a, &b)| f64::from(a) - f64::from(b))
                .collect()
        })
        .collect();

    let mut mean = [0.0; 3];
    for (c, m) in mean.iter_mut().enumerate() {
        *m = (0..n).filter(|&i| valid[i]).map(|i| res[c][i]).sum::<f64>() / count as f64;
    }
    let mut covariance = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            let s: f64 = (0..n)
                .filter(|&i| valid[i])
                .map(|i| (res[a][i] - mean[a]) * (res[b][i] - mean[b]))
                .sum();
            covariance[a][b] = s / (count - 1) as f64;
            covariance[b][a] = covariance[a][b];
        }
    }

    let lag = |dy: usize, dx: usize| -> f64 {
        let mut acc = 0.0;
        for (c, r) in res.iter().enumerate() {
            let mut pairs = Vec::new();
            for y in 0..h - dy {
                for x in 0..w - dx {
                    let (i, j) = (y * w + x, (y + dy) * w + x + dx);
                    if valid[i] && valid[j] {
                        pairs.push((r[i] - mean[c], r[j] - mean[c]));
                    }
                }
            }
            acc += pearson(&pairs);
        }
        acc / 3.0
    };
    Ok(NoiseStats {
        mean,
        covariance,
        lag1_autocorr: [lag(0, 1), lag(1, 0)],
        sample_count: count,
    })
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Lag-1 spatial autocorrelation of a whole image along `[x, y]`, averaged
/// over channels.
pub fn lag1_autocorrelation(img: &Image) -> [f64; 2] {
    let (h, w, c) = img.dims();
    let mut out = [0.0; 2];
    for ch in 0..c {
        let p = img.plane(ch);
        let horiz: Vec<(f64, f64)> = (0..h)
            .flat_map(|y| (0..w.saturating_sub(1)).map(move |x| (y, x)))
            .map(|(y, x)| (f64::from(p[y * w + x]), f64::from(p[y * w + x + 1])))
            .collect();
        let vert: Vec<(f64, f64)> = (0..h.saturating_sub(1))
            .flat_map(|y| (0..w).map(move |x| (y, x)))
            .map(|(y, x)| (f64::from(p[y * w + x]), f64::from(p[(y + 1) * w + x])))
            .collect();
        out[0] += pearson(&horiz);
        out[1] += pearson(&vert);
    }
    [out[0] / c as f64, out[1] / c as f64]
}

/// Least-squares slope of variance against mean.
pub fn variance_vs_mean_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all means are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Mean absolute gradient across 8-aligned block boundaries divided by the
/// mean absolute gradient elsewhere. `1.0` means no block structure; a flat
/// image is defined as `1.0`.
pub fn blockiness(img: &Image) -> Result<f64> {
    let (h, w, c) = img.dims();
    if h < 16 || w < 16 {
        return Err(Error::InvalidParameter(format!(
            "blockiness needs at least 16x16 pixels, got {h}x{w}"
        )));
    }
    let (mut edge_sum, mut edge_n, mut inner_sum, mut inner_n) = (0.0, 0usize, 0.0, 0usize);
    let mut add = |boundary: bool, d: f64| {
        if boundary {
            edge_sum += d;
            edge_n += 1;
        } else {
            inner_sum += d;
            inner_n += 1;
        }
    };
    for ch in 0..c {
        let p = img.plane(ch);
        for y in 0..h {
            for x in 0..w - 1 {
                let d = (f64::from(p[y * w + x + 1]) - f64::from(p[y * w + x])).abs();
                add((x + 1) % 8 == 0, d);
            }
        }
        for y in 0..h - 1 {
            for x in 0..w {
                let d = (f64::from(p[(y + 1) * w + x]) - f64::from(p[y * w + x])).abs();
                add((y + 1) % 8 == 0, d);
            }
        }
    }
    let edge = edge_sum / edge_n as f64;
    let inner = inner_sum / inner_n as f64;
    if edge == 0.0 && inner == 0.0 {
        return Ok(1.0);
    }
    Ok(edge / inner)
}
