//! Separable bilinear and bicubic resampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::RngStream;

const KEYS_A: f64 = -0.5;
/// Broad sanity bound on scales accepted from configs and manifests.
pub const MAX_SCALE: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeKernel {
    Bilinear,
    Bicubic,
}

impl ResizeKernel {
    fn radius(self) -> f64 {
        match self {
            ResizeKernel::Bilinear => 1.0,
            ResizeKernel::Bicubic => 2.0,
        }
    }

    fn eval(self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            ResizeKernel::Bilinear => (1.0 - x).max(0.0),
            ResizeKernel::Bicubic => {
                if x <= 1.0 {
                    ((KEYS_A + 2.0) * x - (KEYS_A + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    ((KEYS_A * x - 5.0 * KEYS_A) * x + 8.0 * KEYS_A) * x - 4.0 * KEYS_A
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResizeSpec {
    pub kernel: ResizeKernel,
    pub scale: f64,
    pub out_height: usize,
    pub out_width: usize,
}

/// `round(len * scale)`, at least 1.
pub fn scaled_len(len: usize, scale: f64) -> usize {
    ((len as f64 * scale).round() as usize).max(1)
}

impl ResizeSpec {
    pub fn new(kernel: ResizeKernel, scale: f64, in_dims: (usize, usize)) -> Result<Self> {
        let spec = ResizeSpec {
            kernel,
            scale,
            out_height: scaled_len(in_dims.0, scale),
            out_width: scaled_len(in_dims.1, scale),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0 && self.scale <= MAX_SCALE) {
            return Err(Error::InvalidParameter(format!(
                "resize scale {} outside (0, {MAX_SCALE}]",
                self.scale
            )));
        }
        if self.out_height == 0 || self.out_width == 0 {
            return Err(Error::InvalidParameter("resize output must be non-empty".into()));
        }
        Ok(())
    }

    /// Whether this spec was derived from an input of `in_dims`.
    pub fn matches_input(&self, in_dims: (usize, usize)) -> bool {
        self.out_height == scaled_len(in_dims.0, self.scale)
            && self.out_width == scaled_len(in_dims.1, self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResizeSampler {
    /// Relative weights of bilinear and bicubic.
    pub kernel_weights: [f64; 2],
    pub scale_range: (f64, f64),
}

impl Default for ResizeSampler {
    fn default() -> Self {
        ResizeSampler {
            kernel_weights: [0.5, 0.5],
            scale_range: (0.5, 2.0),
        }
    }
}

impl ResizeSampler {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        let weights_ok = self.kernel_weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            && self.kernel_weights.iter().sum::<f64>() > 0.0;
        if !weights_ok || !(lo > 0.0 && lo <= hi && hi <= MAX_SCALE) {
            return Err(Error::InvalidParameter(format!("invalid resize sampler {self:?}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut RngStream, in_dims: (usize, usize)) -> ResizeSpec {
        let kernel = match rng.categorical(&self.kernel_weights) {
            0 => ResizeKernel::Bilinear,
            _ => ResizeKernel::Bicubic,
        };
        let scale = rng.uniform_range(self.scale_range.0, self.scale_range.1);
        ResizeSpec {
            kernel,
            scale,
            out_height: scaled_len(in_dims.0, scale),
            out_width: scaled_len(in_dims.1, scale),
        }
    }
}

pub fn sample_resize_spec(rng: &mut RngStream, in_dims: (usize, usize)) -> ResizeSpec {
    ResizeSampler::default().sample(rng, in_dims)
}

/// Normalized taps `(source index, weight)` for each output position along
/// one axis. Source coordinate is `(dst + 0.5) / scale - 0.5`; downscaling
/// stretches the kernel by `1 / scale`; out-of-range taps clamp to the edge.
pub fn axis_weights(in_len: usize, out_len: usize, scale: f64, kernel: ResizeKernel) -> Vec<Vec<(usize, f64)>> {
    let stretch = scale.min(1.0);
    let support = kernel.radius() / stretch;
    (0..out_len)
        .map(|d| {
            let center = (d as f64 + 0.5) / scale - 0.5;
            let first = (center - support).floor() as isize;
            let last = (center + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((last - first + 1) as usize);
            for s in first..=last {
                let w = kernel.eval((s as f64 - center) * stretch);
                if w == 0.0 {
                    continue;
                }
                let idx = s.clamp(0, in_len as isize - 1) as usize;
                match taps.iter_mut().find(|t| t.0 == idx) {
                    Some(t) => t.1 += w,
                    None => taps.push((idx, w)),
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in taps.iter_mut() {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Resamples to the spec's output size; output is clipped to `[0, 1]`.
pub fn resize(img: &Image, spec: &ResizeSpec) -> Result<Image> {
    spec.validate()?;
    let (h, w, c) = img.dims();
    let (oh, ow) = (spec.out_height, spec.out_width);
    let wx = axis_weights(w, ow, spec.scale, spec.kernel);
    let wy = axis_weights(h, oh, spec.scale, spec.kernel);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut rows = vec![0.0f64; h * ow];
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            for (x, taps) in wx.iter().enumerate() {
                rows[y * ow + x] = taps.iter().map(|&(i, wt)| wt * f64::from(src[i])).sum();
            }
        }
        for taps in &wy {
            for x in 0..ow {
                let v: f64 = taps.iter().map(|&(i, wt)| wt * rows[i * ow + x]).sum();
                out.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Image::from_planar(oh, ow, c, out)
}

/// Applies one spec to both branches.
pub fn resize_pair(noisy: &Image, clean: &Image, spec: &ResizeSpec) -> Result<(Image, Image)> {
    noisy.require_same_dims(clean)?;
    Ok((resize(noisy, spec)?, resize(clean, spec)?))
}
