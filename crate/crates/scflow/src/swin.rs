//! Swin transformer block with (shifted) window self-attention.

use noisepair::RngStream;

use crate::error::{Error, Result};
use crate::ops::{from_tokens, gelu, join, to_tokens, trunc_normal, LayerNorm, Linear, Params};
use crate::tensor::Tensor4;

/// Multi-head self-attention inside non-overlapping windows, with a learned
/// relative-position bias.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAttention {
    pub dim: usize,
    pub heads: usize,
    pub window: usize,
    pub qkv: Linear,
    /// `(heads, 2*window - 1, 2*window - 1)`.
    pub relative_position: Vec<f32>,
    pub proj: Linear,
}

impl WindowAttention {
    pub fn new(dim: usize, head_dim: usize, window: usize, rng: &mut RngStream) -> Self {
        let heads = dim / head_dim;
        let span = 2 * window - 1;
        WindowAttention {
            dim,
            heads,
            window,
            qkv: Linear::new(dim, 3 * dim, rng),
            relative_position: trunc_normal(rng, heads * span * span, 0.02),
            proj: Linear::new(dim, dim, rng),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Bias between window positions `i` and `j` (row-major in the window).
    pub fn bias(&self, head: usize, i: usize, j: usize) -> f32 {
        let w = self.window;
        let span = 2 * w - 1;
        let dy = i / w + w - 1 - j / w;
        let dx = i % w + w - 1 - j % w;
        self.relative_position[(head * span + dy) * span + dx]
    }
}

impl Params for WindowAttention {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        self.qkv.visit(&join(prefix, "qkv"), f);
        f(&join(prefix, "relative_position"), &self.relative_position);
        self.proj.visit(&join(prefix, "proj"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        self.qkv.visit_mut(&join(prefix, "qkv"), f);
        f(&join(prefix, "relative_position"), &mut self.relative_position);
        self.proj.visit_mut(&join(prefix, "proj"), f);
    }
}

/// LN -> (S)W-MSA -> residual -> LN -> MLP(GELU) -> residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SwinBlock {
    pub dim: usize,
    pub shifted: bool,
    pub norm1: LayerNorm,
    pub attn: WindowAttention,
    pub norm2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

/// Attention probabilities of one window and head, `window^2 x window^2`.
pub type AttentionMap = Vec<f32>;

impl SwinBlock {
    pub fn new(dim: usize, head_dim: usize, window: usize, mlp_ratio: f64, shifted: bool, rng: &mut RngStream) -> Self {
        let hidden = (dim as f64 * mlp_ratio).round() as usize;
        SwinBlock {
            dim,
            shifted,
            norm1: LayerNorm::new(dim),
            attn: WindowAttention::new(dim, head_dim, window, rng),
            norm2: LayerNorm::new(dim),
            fc1: Linear::new(dim, hidden, rng),
            fc2: Linear::new(hidden, dim, rng),
        }
    }

    pub fn window(&self) -> usize {
        self.attn.window
    }

    pub fn shift(&self) -> usize {
        if self.shifted {
            self.window() / 2
        } else {
            0
        }
    }

    pub fn check_input(&self, x: &Tensor4) -> Result<()> {
        let w = self.window();
        if x.c() != self.dim {
            return Err(Error::Shape(format!("swin block expects {} channels, got {}", self.dim, x.c())));
        }
        if !x.h().is_multiple_of(w) || !x.w().is_multiple_of(w) {
            return Err(Error::IncompatibleSpatial {
                height: x.h(),
                width: x.w(),
                window: w,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        self.run(x, None)
    }

    /// Forward pass that also returns every attention matrix.
    pub fn forward_with_attention(&self, x: &Tensor4) -> Result<(Tensor4, Vec<AttentionMap>)> {
        let mut maps = Vec::new();
        let out = self.run(x, Some(&mut maps))?;
        Ok((out, maps))
    }

    fn run(&self, x: &Tensor4, mut maps: Option<&mut Vec<AttentionMap>>) -> Result<Tensor4> {
        self.check_input(x)?;
        let (h, w, c) = (x.h(), x.w(), self.dim);
        let hw = h * w;
        let mut out = Tensor4::zeros(x.n(), c, h, w);
        for b in 0..x.n() {
            let tokens = to_tokens(x, b);
            let attn = self.attention(&self.norm1.forward(&tokens), h, w, maps.as_deref_mut());
            let x1: Vec<f32> = tokens.iter().zip(&attn).map(|(a, b)| a + b).collect();
            let mut hidden = self.fc1.forward(&self.norm2.forward(&x1), hw);
            for v in hidden.iter_mut() {
                *v = gelu(*v);
            }
            let mlp = self.fc2.forward(&hidden, hw);
            let x2: Vec<f32> = x1.iter().zip(&mlp).map(|(a, b)| a + b).collect();
            from_tokens(&x2, &mut out, b);
        }
        Ok(out)
    }

    /// Region label of a position in the shifted frame; tokens from
    /// different regions were not adjacent before the cyclic shift.
    fn region(&self, pos: usize, len: usize) -> usize {
        let (w, s) = (self.window(), self.shift());
        if s == 0 || pos < len - w {
            0
        } else if pos < len - s {
            1
        } else {
            2
        }
    }

    /// W-MSA / SW-MSA on normalized tokens `(h*w, dim)`.
    fn attention(&self, tokens: &[f32], h: usize, w: usize, mut maps: Option<&mut Vec<AttentionMap>>) -> Vec<f32> {
        let (c, win, s) = (self.dim, self.window(), self.shift());
        let a = &self.attn;
        let hd = a.head_dim();
        let scale = (hd as f64).powf(-0.5) as f32;
        let n = win * win;
        let qkv = a.qkv.forward(tokens, h * w);
        let mut mixed = vec![0.0f32; h * w * c];
        // Window positions in the shifted frame map back to source token
        // (y + s, x + s); the result is written to the same source token,
        // which undoes the shift.
        let mut src = vec![0usize; n];
        let mut label = vec![0usize; n];
        let mut scores = vec![0.0f32; n * n];
        for wy in 0..h / win {
            for wx in 0..w / win {
                for i in 0..n {
                    let (ry, rx) = (wy * win + i / win, wx * win + i % win);
                    src[i] = ((ry + s) % h) * w + (rx + s) % w;
                    label[i] = 3 * self.region(ry, h) + self.region(rx, w);
                }
                for head in 0..a.heads {
                    let (q_off, k_off, v_off) = (head * hd, c + head * hd, 2 * c + head * hd);
                    for i in 0..n {
                        let q = &qkv[src[i] * 3 * c + q_off..][..hd];
                        let row = &mut scores[i * n..(i + 1) * n];
                        for j in 0..n {
                            row[j] = if label[i] != label[j] {
                                f32::NEG_INFINITY
                            } else {
                                let k = &qkv[src[j] * 3 * c + k_off..][..hd];
                                q.iter().zip(k).map(|(x, y)| x * y).sum::<f32>() * scale + a.bias(head, i, j)
                            };
                        }
                        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
                        let mut total = 0.0f32;
                        for v in row.iter_mut() {
                            *v = (*v - max).exp();
                            total += *v;
                        }
                        for v in row.iter_mut() {
                            *v /= total;
                        }
                        let dst = &mut mixed[src[i] * c + q_off..][..hd];
                        for j in 0..n {
                            let p = row[j];
                            if p == 0.0 {
                                continue;
                            }
                            let v = &qkv[src[j] * 3 * c + v_off..][..hd];
                            for (d, vv) in dst.iter_mut().zip(v) {
                                *d += p * vv;
                            }
                        }
                    }
                    if let Some(m) = maps.as_deref_mut() {
                        m.push(scores.clone());
                    }
                }
            }
        }
        a.proj.forward(&mixed, h * w)
    }
}

impl Params for SwinBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        self.norm1.visit(&join(prefix, "norm1"), f);
        self.attn.visit(&join(prefix, "attn"), f);
        self.norm2.visit(&join(prefix, "norm2"), f);
        self.fc1.visit(&join(prefix, "fc1"), f);
        self.fc2.visit(&join(prefix, "fc2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        self.norm1.visit_mut(&join(prefix, "norm1"), f);
        self.attn.visit_mut(&join(prefix, "attn"), f);
        self.norm2.visit_mut(&join(prefix, "norm2"), f);
        self.fc1.visit_mut(&join(prefix, "fc1"), f);
        self.fc2.visit_mut(&join(prefix, "fc2"), f);
    }
}

/// Splits batch item `b` into row-major windows of `window x window`
/// tokens, each `(window^2, c)`.
pub fn window_partition(x: &Tensor4, b: usize, window: usize) -> Vec<Vec<f32>> {
    let tokens = to_tokens(x, b);
    let (h, w, c) = (x.h(), x.w(), x.c());
    let mut out = Vec::new();
    for wy in 0..h / window {
        for wx in 0..w / window {
            let mut win = Vec::with_capacity(window * window * c);
            for i in 0..window * window {
                let p = (wy * window + i / window) * w + wx * window + i % window;
                win.extend_from_slice(&tokens[p * c..(p + 1) * c]);
            }
            out.push(win);
        }
    }
    out
}

/// Inverse of [`window_partition`].
pub fn window_reverse(windows: &[Vec<f32>], x: &mut Tensor4, b: usize, window: usize) {
    let (h, w, c) = (x.h(), x.w(), x.c());
    let mut tokens = vec![0.0f32; h * w * c];
    let per_row = w / window;
    for (k, win) in windows.iter().enumerate() {
        let (wy, wx) = (k / per_row, k % per_row);
        for i in 0..window * window {
            let p = (wy * window + i / window) * w + wx * window + i % window;
            tokens[p * c..(p + 1) * c].copy_from_slice(&win[i * c..(i + 1) * c]);
        }
    }
    from_tokens(&tokens, x, b);
}
