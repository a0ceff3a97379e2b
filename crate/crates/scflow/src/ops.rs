//! Layers with explicit weights: convolutions, linear maps, layer norm.

use noisepair::RngStream;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Visits every parameter tensor with a dotted name.
pub trait Params {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32]));

    fn num_parameters(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.len());
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// `c = a * b` for row-major `a: m x k`, `b: k x n`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    gemm_strided(m, k, n, a, (k as isize, 1), b, (n as isize, 1), c);
}

/// `c = a * b` with explicit (row, column) strides for `a` and `b`; `c` is
/// row-major `m x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_strides: (isize, isize),
    b: &[f32],
    b_strides: (isize, isize),
    c: &mut [f32],
) {
    let extent = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(a.len() as isize >= extent(m, k, a_strides));
    assert!(b.len() as isize >= extent(k, n, b_strides));
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Truncated normal at two standard deviations.
pub(crate) fn trunc_normal(rng: &mut RngStream, len: usize, std: f64) -> Vec<f32> {
    (0..len)
        .map(|_| loop {
            let z = rng.normal();
            if z.abs() <= 2.0 {
                break (z * std) as f32;
            }
        })
        .collect()
}

pub(crate) fn uniform(rng: &mut RngStream, len: usize, bound: f64) -> Vec<f32> {
    (0..len).map(|_| rng.uniform_range(-bound, bound) as f32).collect()
}

/// 2-D convolution with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// `(cout, cin, kernel, kernel)`.
    pub weight: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

impl Conv2d {
    pub fn new(
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut RngStream,
    ) -> Self {
        let bound = 1.0 / ((cin * kernel * kernel) as f64).sqrt();
        Conv2d {
            cin,
            cout,
            kernel,
            stride,
            padding,
            weight: uniform(rng, cout * cin * kernel * kernel, bound),
            bias: bias.then(|| uniform(rng, cout, bound)),
        }
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let span = |n: usize| (n + 2 * self.padding - self.kernel) / self.stride + 1;
        (span(h), span(w))
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.c() != self.cin {
            return Err(Error::Shape(format!(
                "conv expects {} channels, got {}",
                self.cin,
                x.c()
            )));
        }
        let (h, w) = (x.h(), x.w());
        if h + 2 * self.padding < self.kernel || w + 2 * self.padding < self.kernel {
            return Err(Error::Shape(format!("{h}x{w} input smaller than {}x{} kernel", self.kernel, self.kernel)));
        }
        let (oh, ow) = self.output_size(h, w);
        let kk = self.cin * self.kernel * self.kernel;
        let mut out = Tensor4::zeros(x.n(), self.cout, oh, ow);
        let direct = self.kernel == 1 && self.stride == 1 && self.padding == 0;
        let mut col = if direct { Vec::new() } else { vec![0.0f32; kk * oh * ow] };
        for b in 0..x.n() {
            let src = x.item(b);
            if !direct {
                self.im2col(src, h, w, oh, ow, &mut col);
            }
            let cols: &[f32] = if direct { src } else { &col };
            let dst = out.item_mut(b);
            gemm(self.cout, kk, oh * ow, &self.weight, cols, dst);
            if let Some(bias) = &self.bias {
                for (co, plane) in dst.chunks_mut(oh * ow).enumerate() {
                    for v in plane {
                        *v += bias[co];
                    }
                }
            }
        }
        Ok(out)
    }

    fn im2col(&self, src: &[f32], h: usize, w: usize, oh: usize, ow: usize, col: &mut [f32]) {
        let k = self.kernel;
        let pad = self.padding as isize;
        for ci in 0..self.cin {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((ci * k + ky) * k + kx) * oh * ow;
                    for oy in 0..oh {
                        let sy = (oy * self.stride + ky) as isize - pad;
                        for ox in 0..ow {
                            let sx = (ox * self.stride + kx) as isize - pad;
                            col[row + oy * ow + ox] = if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                src[(ci * h + sy as usize) * w + sx as usize]
                            } else {
                                0.0
                            };
                        }
                    }
                }
            }
        }
    }
}

impl Params for Conv2d {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        f(&join(prefix, "weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(&join(prefix, "bias"), b);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        f(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&join(prefix, "bias"), b);
        }
    }
}

/// 2x2 transposed convolution with stride 2, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2x2 {
    pub cin: usize,
    pub cout: usize,
    /// `(cin, cout, 2, 2)`.
    pub weight: Vec<f32>,
}

impl ConvTranspose2x2 {
    pub fn new(cin: usize, cout: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / ((cin * 4) as f64).sqrt();
        ConvTranspose2x2 {
            cin,
            cout,
            weight: uniform(rng, cin * cout * 4, bound),
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.c() != self.cin {
            return Err(Error::Shape(format!(
                "transposed conv expects {} channels, got {}",
                self.cin,
                x.c()
            )));
        }
        let (h, w) = (x.h(), x.w());
        let rows = self.cout * 4;
        let mut out = Tensor4::zeros(x.n(), self.cout, 2 * h, 2 * w);
        let mut y = vec![0.0f32; rows * h * w];
        for b in 0..x.n() {
            // Row r = co*4 + dy*2 + dx of the (rows x cin) operand is
            // weight[ci, co, dy, dx], i.e. weight viewed column-major.
            gemm_strided(rows, self.cin, h * w, &self.weight, (1, rows as isize), x.item(b), ((h * w) as isize, 1), &mut y);
            for co in 0..self.cout {
                for dy in 0..2 {
                    for dx in 0..2 {
                        let r = &y[(co * 4 + dy * 2 + dx) * h * w..][..h * w];
                        for yy in 0..h {
                            for xx in 0..w {
                                out.set(b, co, 2 * yy + dy, 2 * xx + dx, r[yy * w + xx]);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

impl Params for ConvTranspose2x2 {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        f(&join(prefix, "weight"), &self.weight);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        f(&join(prefix, "weight"), &mut self.weight);
    }
}

/// `y = x W^T + b` on row-major token matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub din: usize,
    pub dout: usize,
    /// `(dout, din)`.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn new(din: usize, dout: usize, rng: &mut RngStream) -> Self {
        Linear {
            din,
            dout,
            weight: trunc_normal(rng, din * dout, 0.02),
            bias: vec![0.0; dout],
        }
    }

    pub fn forward(&self, tokens: &[f32], count: usize) -> Vec<f32> {
        assert_eq!(tokens.len(), count * self.din);
        let mut out = vec![0.0f32; count * self.dout];
        gemm_strided(count, self.din, self.dout, tokens, (self.din as isize, 1), &self.weight, (1, self.din as isize), &mut out);
        for row in out.chunks_mut(self.dout) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        out
    }
}

impl Params for Linear {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalization over the channel dimension of each token.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
        }
    }

    pub fn forward(&self, tokens: &[f32]) -> Vec<f32> {
        let dim = self.gamma.len();
        let mut out = vec![0.0f32; tokens.len()];
        for (src, dst) in tokens.chunks(dim).zip(out.chunks_mut(dim)) {
            let mean = src.iter().map(|&v| f64::from(v)).sum::<f64>() / dim as f64;
            let var = src.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / dim as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for i in 0..dim {
                dst[i] = ((f64::from(src[i]) - mean) * inv) as f32 * self.gamma[i] + self.beta[i];
            }
        }
        out
    }
}

impl Params for LayerNorm {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        f(&join(prefix, "gamma"), &self.gamma);
        f(&join(prefix, "beta"), &self.beta);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        f(&join(prefix, "gamma"), &mut self.gamma);
        f(&join(prefix, "beta"), &mut self.beta);
    }
}

/// Exact (erf-based) GELU.
pub fn gelu(x: f32) -> f32 {
    let x = f64::from(x);
    (0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))) as f32
}

/// Batch item `b` as a `(h*w, c)` token matrix.
pub fn to_tokens(x: &Tensor4, b: usize) -> Vec<f32> {
    let (c, hw) = (x.c(), x.h() * x.w());
    let src = x.item(b);
    let mut out = vec![0.0f32; hw * c];
    for ch in 0..c {
        for p in 0..hw {
            out[p * c + ch] = src[ch * hw + p];
        }
    }
    out
}

/// Writes a `(h*w, c)` token matrix into batch item `b`.
pub fn from_tokens(tokens: &[f32], x: &mut Tensor4, b: usize) {
    let (c, hw) = (x.c(), x.h() * x.w());
    let dst = x.item_mut(b);
    for ch in 0..c {
        for p in 0..hw {
            dst[ch * hw + p] = tokens[p * c + ch];
        }
    }
}
