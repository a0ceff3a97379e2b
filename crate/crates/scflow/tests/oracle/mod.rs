//! Direct-loop reference implementation of the Swin-Conv block, written
//! against the weight tensors only. Attention is evaluated pixel by pixel
//! from rolled coordinates, without window partitioning.

#![allow(dead_code)]

use noisepair::RngStream;
use scflow::ops::{Conv2d, LAYER_NORM_EPS};
use scflow::{Activation, Params, RConv, ScBlock, SwinBlock, Tensor4};

/// `[n][c][y][x]` in f64.
pub type Field = Vec<Vec<Vec<Vec<f64>>>>;

pub fn to_field(t: &Tensor4) -> Field {
    let (n, c, h, w) = t.shape();
    (0..n)
        .map(|b| {
            (0..c)
                .map(|ch| (0..h).map(|y| (0..w).map(|x| f64::from(t.get(b, ch, y, x))).collect()).collect())
                .collect()
        })
        .collect()
}

pub fn to_tensor(f: &Field) -> Tensor4 {
    let (n, c, h, w) = (f.len(), f[0].len(), f[0][0].len(), f[0][0][0].len());
    Tensor4::from_fn(n, c, h, w, |b, ch, y, x| f[b][ch][y][x] as f32)
}

pub fn conv(x: &Field, conv: &Conv2d) -> Field {
    let (h, w) = (x[0][0].len(), x[0][0][0].len());
    let k = conv.kernel;
    let (oh, ow) = conv.output_size(h, w);
    x.iter()
        .map(|item| {
            (0..conv.cout)
                .map(|co| {
                    (0..oh)
                        .map(|oy| {
                            (0..ow)
                                .map(|ox| {
                                    let mut acc = conv.bias.as_ref().map_or(0.0, |b| f64::from(b[co]));
                                    for ci in 0..conv.cin {
                                        for ky in 0..k {
                                            for kx in 0..k {
                                                let sy = (oy * conv.stride + ky) as isize - conv.padding as isize;
                                                let sx = (ox * conv.stride + kx) as isize - conv.padding as isize;
                                                if sy < 0 || sx < 0 || sy as usize >= h || sx as usize >= w {
                                                    continue;
                                                }
                                                let wgt = conv.weight[((co * conv.cin + ci) * k + ky) * k + kx];
                                                acc += f64::from(wgt) * item[ci][sy as usize][sx as usize];
                                            }
                                        }
                                    }
                                    acc
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn add(a: &Field, b: &Field) -> Field {
    a.iter()
        .zip(b)
        .map(|(ia, ib)| {
            ia.iter()
                .zip(ib)
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect())
                .collect()
        })
        .collect()
}

fn pixel(x: &Field, b: usize, y: usize, xx: usize) -> Vec<f64> {
    x[b].iter().map(|plane| plane[y][xx]).collect()
}

fn layer_norm(v: &[f64], gamma: &[f32], beta: &[f32]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    v.iter()
        .enumerate()
        .map(|(i, a)| (a - mean) / (var + LAYER_NORM_EPS).sqrt() * f64::from(gamma[i]) + f64::from(beta[i]))
        .collect()
}

fn linear(v: &[f64], weight: &[f32], bias: &[f32]) -> Vec<f64> {
    let din = v.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| f64::from(*b) + (0..din).map(|i| f64::from(weight[o * din + i]) * v[i]).sum::<f64>())
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Region of a rolled coordinate: 0 for the interior, 1 and 2 for the two
/// strips that wrapped around.
fn region(r: usize, len: usize, window: usize, shift: usize) -> usize {
    if shift == 0 || r < len - window {
        0
    } else if r < len - shift {
        1
    } else {
        2
    }
}

pub fn swin(x: &Field, block: &SwinBlock) -> Field {
    let (n, c, h, w) = (x.len(), x[0].len(), x[0][0].len(), x[0][0][0].len());
    let win = block.attn.window;
    let shift = if block.shifted { win / 2 } else { 0 };
    let heads = block.attn.heads;
    let hd = c / heads;
    let mut out = x.clone();
    for b in 0..n {
        let normed: Vec<Vec<Vec<f64>>> = (0..h)
            .map(|y| (0..w).map(|xx| layer_norm(&pixel(x, b, y, xx), &block.norm1.gamma, &block.norm1.beta)).collect())
            .collect();
        let qkv: Vec<Vec<Vec<f64>>> = normed
            .iter()
            .map(|row| row.iter().map(|v| linear(v, &block.attn.qkv.weight, &block.attn.qkv.bias)).collect())
            .collect();
        let rolled = |y: usize, xx: usize| ((y + h - shift) % h, (xx + w - shift) % w);
        for y in 0..h {
            for xx in 0..w {
                let (ry, rx) = rolled(y, xx);
                let key = (ry / win, rx / win, region(ry, h, win, shift), region(rx, w, win, shift));
                let mut mixed = vec![0.0; c];
                for head in 0..heads {
                    let mut logits = Vec::new();
                    for qy in 0..h {
                        for qx in 0..w {
                            let (sy, sx) = rolled(qy, qx);
                            if (sy / win, sx / win, region(sy, h, win, shift), region(sx, w, win, shift)) != key {
                                continue;
                            }
                            let q = &qkv[y][xx][head * hd..(head + 1) * hd];
                            let k = &qkv[qy][qx][c + head * hd..c + (head + 1) * hd];
                            let dot: f64 = q.iter().zip(k).map(|(a, b)| a * b).sum();
                            let span = 2 * win - 1;
                            let dy = (ry % win) + win - 1 - (sy % win);
                            let dx = (rx % win) + win - 1 - (sx % win);
                            let bias = f64::from(block.attn.relative_position[(head * span + dy) * span + dx]);
                            logits.push((dot / (hd as f64).sqrt() + bias, (qy, qx)));
                        }
                    }
                    let max = logits.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = logits.iter().map(|l| (l.0 - max).exp()).sum();
                    for (logit, (qy, qx)) in &logits {
                        let p = (logit - max).exp() / total;
                        for d in 0..hd {
                            mixed[head * hd + d] += p * qkv[*qy][*qx][2 * c + head * hd + d];
                        }
                    }
                }
                let attn = linear(&mixed, &block.attn.proj.weight, &block.attn.proj.bias);
                let x1: Vec<f64> = pixel(x, b, y, xx).iter().zip(&attn).map(|(a, b)| a + b).collect();
                let hidden: Vec<f64> = linear(&layer_norm(&x1, &block.norm2.gamma, &block.norm2.beta), &block.fc1.weight, &block.fc1.bias)
                    .into_iter()
                    .map(gelu)
                    .collect();
                let mlp = linear(&hidden, &block.fc2.weight, &block.fc2.bias);
                for ch in 0..c {
                    out[b][ch][y][xx] = x1[ch] + mlp[ch];
                }
            }
        }
    }
    out
}

pub fn rconv(x: &Field, block: &RConv) -> Field {
    let mut y = conv(x, &block.conv1);
    if block.activation == Activation::Relu {
        for v in y.iter_mut().flatten().flatten().flatten() {
            *v = v.max(0.0);
        }
    }
    add(&conv(&y, &block.conv2), x)
}

/// Conv1x1 -> split -> (SwinT, RConv) -> concat -> Conv1x1 -> + X.
pub fn sc_block(x: &Field, block: &ScBlock) -> Field {
    let y = conv(x, &block.conv_in);
    let half = block.channels / 2;
    let x1: Field = y.iter().map(|item| item[..half].to_vec()).collect();
    let x2: Field = y.iter().map(|item| item[half..].to_vec()).collect();
    let y1 = swin(&x1, &block.swin);
    let y2 = rconv(&x2, &block.rconv);
    let z: Field = y1.iter().zip(&y2).map(|(a, b)| a.iter().chain(b).cloned().collect()).collect();
    add(&conv(&z, &block.conv_out), x)
}

/// Replaces every parameter (including norms and biases) with a seeded
/// random value so that no term of the composition is trivially zero or one.
pub fn randomize(block: &mut ScBlock, seed: u64) {
    let mut rng = RngStream::new(seed).fork("oracle-weights", 0);
    block.visit_mut("", &mut |name, p| {
        let (center, spread) = if name.ends_with("gamma") { (1.0, 0.2) } else { (0.0, 0.15) };
        for v in p.iter_mut() {
            *v = (center + rng.uniform_range(-spread, spread)) as f32;
        }
    });
}

pub fn random_input(seed: u64, n: usize, c: usize, h: usize, w: usize) -> Tensor4 {
    let mut rng = RngStream::new(seed).fork("oracle-input", 0);
    Tensor4::from_fn(n, c, h, w, |_, _, _, _| rng.normal() as f32)
}

/// Largest deviation between the block and the step-by-step reference for
/// one seed.
pub fn composition_error(seed: u64) -> f32 {
    let shifted = seed % 2 == 1;
    let mut block = ScBlock::new(64, 16, 4, 4.0, shifted, &mut RngStream::new(seed));
    randomize(&mut block, seed);
    let x = random_input(seed, 1, 64, 8, 12);
    let fast = block.forward(&x).unwrap();
    let slow = to_tensor(&sc_block(&to_field(&x), &block));
    fast.max_abs_diff(&slow)
}
