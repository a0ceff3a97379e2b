//! JPEG compression-noise simulator.
//!
//! The lossy part of baseline JPEG is reproduced in floating point: YCbCr
//! conversion, optional 4:2:0 chroma subsampling, 8x8 DCT, quality-scaled
//! quantization and the inverse path. Entropy coding is lossless and is
//! skipped.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp01, Image};
use crate::rng::RngStream;

/// Baseline luminance quantization table (row-major, natural order).
pub const STD_LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Baseline chrominance quantization table.
pub const STD_CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JpegSpec {
    pub quality: u8,
    /// 4:2:0 chroma subsampling.
    pub subsample_chroma: bool,
}

impl JpegSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=100).contains(&self.quality) {
            return Err(Error::InvalidParameter(format!(
                "JPEG quality {} outside [1, 100]",
                self.quality
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JpegSampler {
    pub quality_range: (u8, u8),
    pub subsample_chroma: bool,
}

impl Default for JpegSampler {
    fn default() -> Self {
        Self {
            quality_range: (20, 95),
            subsample_chroma: true,
        }
    }
}

impl JpegSampler {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.quality_range;
        if lo == 0 || lo > hi || hi > 100 {
            return Err(Error::InvalidParameter(format!(
                "invalid JPEG quality range {:?}",
                self.quality_range
            )));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut RngStream) -> JpegSpec {
        let (lo, hi) = self.quality_range;
        JpegSpec {
            quality: rng.int_inclusive(u64::from(lo), u64::from(hi)) as u8,
            subsample_chroma: self.subsample_chroma,
        }
    }
}

/// Uniform quality in `[20, 95]`, 4:2:0.
pub fn sample_jpeg_spec(rng: &mut RngStream) -> JpegSpec {
    JpegSampler::default().sample(rng)
}

/// libjpeg quality scaling: `5000/q` below 50, `200 - 2q` otherwise; each
/// entry becomes `clamp((t * scale + 50) / 100, 1, 255)`.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> [u16; 64] {
    let q = u32::from(quality.clamp(1, 100));
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &t) in out.iter_mut().zip(base) {
        *o = ((u32::from(t) * scale + 50) / 100).clamp(1, 255) as u16;
    }
    out
}

fn dct_matrix() -> &'static [[f64; 8]; 8] {
    static MATRIX: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let cu = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = cu * (((2 * x + 1) * u) as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        m
    })
}

/// Orthonormal 2D DCT-II of a row-major 8x8 block.
pub fn dct8x8(block: &[f64; 64]) -> [f64; 64] {
    let c = dct_matrix();
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x block[y][x] c[u][x]
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| block[y * 8 + x] * c[u][x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| tmp[y * 8 + u] * c[v][y]).sum();
        }
    }
    out
}

/// Inverse of [`dct8x8`].
pub fn idct8x8(coeffs: &[f64; 64]) -> [f64; 64] {
    let c = dct_matrix();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| coeffs[v * 8 + u] * c[u][x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| tmp[v * 8 + x] * c[v][y]).sum();
        }
    }
    out
}

/// A single plane on the 0..255 scale.
struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    #[inline]
    fn at_clamped(&self, y: isize, x: isize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.data[y * self.width + x]
    }
}

/// Quantization round trip of one plane; padding replicates edges.
fn quantize_plane(plane: &Plane, table: &[u16; 64]) -> Plane {
    let (h, w) = (plane.height, plane.width);
    let (bh, bw) = (h.div_ceil(8), w.div_ceil(8));
    let mut out = vec![0.0; h * w];
    let mut block = [0.0; 64];
    for by in 0..bh {
        for bx in 0..bw {
            for y in 0..8 {
                for x in 0..8 {
                    let (py, px) = ((by * 8 + y) as isize, (bx * 8 + x) as isize);
                    block[y * 8 + x] = plane.at_clamped(py, px) - 128.0;
                }
            }
            let mut coeffs = dct8x8(&block);
            for (c, &q) in coeffs.iter_mut().zip(table) {
                let q = f64::from(q);
                *c = (*c / q).round() * q;
            }
            let rec = idct8x8(&coeffs);
            for y in 0..8 {
                let py = by * 8 + y;
                if py >= h {
                    break;
                }
                for x in 0..8 {
                    let px = bx * 8 + x;
                    if px >= w {
                        break;
                    }
                    out[py * w + px] = rec[y * 8 + x] + 128.0;
                }
            }
        }
    }
    Plane {
        height: h,
        width: w,
        data: out,
    }
}

/// 2x2 box average; odd trailing rows/columns are edge-replicated.
fn downsample_2x2(plane: &Plane) -> Plane {
    let (h, w) = (plane.height.div_ceil(2), plane.width.div_ceil(2));
    let mut data = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = (2 * y as isize, 2 * x as isize);
            data[y * w + x] = 0.25
                * (plane.at_clamped(sy, sx)
                    + plane.at_clamped(sy, sx + 1)
                    + plane.at_clamped(sy + 1, sx)
                    + plane.at_clamped(sy + 1, sx + 1));
        }
    }
    Plane {
        height: h,
        width: w,
        data,
    }
}

/// Center-aligned bilinear 2x upsampling, cropped to `(height, width)`.
fn upsample_2x(plane: &Plane, height: usize, width: usize) -> Plane {
    let taps = |dst: usize| -> (isize, isize, f64) {
        let src = (dst as f64 + 0.5) / 2.0 - 0.5;
        let lo = src.floor();
        (lo as isize, lo as isize + 1, src - lo)
    };
    let mut data = vec![0.0; height * width];
    for y in 0..height {
        let (y0, y1, fy) = taps(y);
        for x in 0..width {
            let (x0, x1, fx) = taps(x);
            let top = (1.0 - fx) * plane.at_clamped(y0, x0) + fx * plane.at_clamped(y0, x1);
            let bottom = (1.0 - fx) * plane.at_clamped(y1, x0) + fx * plane.at_clamped(y1, x1);
            data[y * width + x] = (1.0 - fy) * top + fy * bottom;
        }
    }
    Plane {
        height,
        width,
        data,
    }
}

/// Lossy JPEG round trip. Output dims equal input dims. Single-channel
/// images go through the luma path only.
pub fn jpeg_roundtrip(img: &Image, spec: &JpegSpec) -> Result<Image> {
    spec.validate()?;
    let (h, w, channels) = img.dims();
    let n = h * w;
    let luma_q = scaled_table(&STD_LUMA_TABLE, spec.quality);
    let chroma_q = scaled_table(&STD_CHROMA_TABLE, spec.quality);

    if channels == 1 {
        let plane = Plane {
            height: h,
            width: w,
            data: img.data().iter().map(|&v| f64::from(v) * 255.0).collect(),
        };
        let rec = quantize_plane(&plane, &luma_q);
        let data = rec.data.iter().map(|&v| clamp01((v / 255.0) as f32)).collect();
        return Image::from_planar(h, w, 1, data);
    }

    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let mut yp = Vec::with_capacity(n);
    let mut cb = Vec::with_capacity(n);
    let mut cr = Vec::with_capacity(n);
    for i in 0..n {
        let (rv, gv, bv) = (
            f64::from(r[i]) * 255.0,
            f64::from(g[i]) * 255.0,
            f64::from(b[i]) * 255.0,
        );
        yp.push(0.299 * rv + 0.587 * gv + 0.114 * bv);
        cb.push(-0.168_736 * rv - 0.331_264 * gv + 0.5 * bv + 128.0);
        cr.push(0.5 * rv - 0.418_688 * gv - 0.081_312 * bv + 128.0);
    }
    let plane = |data| Plane {
        height: h,
        width: w,
        data,
    };
    let y_rec = quantize_plane(&plane(yp), &luma_q);
    let chroma = |data: Vec<f64>| {
        let full = plane(data);
        if spec.subsample_chroma {
            let small = quantize_plane(&downsample_2x2(&full), &chroma_q);
            upsample_2x(&small, h, w)
        } else {
            quantize_plane(&full, &chroma_q)
        }
    };
    let cb_rec = chroma(cb);
    let cr_rec = chroma(cr);

    let mut out = vec![0.0f32; 3 * n];
    for i in 0..n {
        let yv = y_rec.data[i];
        let cbv = cb_rec.data[i] - 128.0;
        let crv = cr_rec.data[i] - 128.0;
        let rgb = [
            yv + 1.402 * crv,
            yv - 0.344_136 * cbv - 0.714_136 * crv,
            yv + 1.772 * cbv,
        ];
        for (c, v) in rgb.iter().enumerate() {
            out[c * n + i] = clamp01((v / 255.0) as f32);
        }
    }
    Image::from_planar(h, w, 3, out)
}
