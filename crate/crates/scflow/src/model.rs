//! Four-scale Swin-Conv UNet.

use noisepair::{Image, RngStream};

use crate::block::ScBlock;
use crate::error::{Error, Result};
use crate::ops::{join, Conv2d, ConvTranspose2x2, Params};
use crate::tensor::Tensor4;

#[derive(Debug, Clone, PartialEq)]
pub struct ScunetConfig {
    pub in_channels: usize,
    pub scale_channels: [usize; 4],
    pub blocks_per_scale: usize,
    pub window_size: usize,
    /// Channels per attention head in the transformer half of a block.
    pub head_dim: usize,
    pub mlp_ratio: f64,
    pub weight_seed: u64,
}

impl Default for ScunetConfig {
    fn default() -> Self {
        ScunetConfig {
            in_channels: 3,
            scale_channels: [64, 128, 256, 512],
            blocks_per_scale: 4,
            window_size: 8,
            head_dim: 32,
            mlp_ratio: 4.0,
            weight_seed: 0,
        }
    }
}

impl ScunetConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.in_channels > 0
            && self.blocks_per_scale > 0
            && self.window_size > 0
            && self.head_dim > 0
            && self.mlp_ratio.is_finite()
            && self.mlp_ratio > 0.0
            && self
                .scale_channels
                .iter()
                .all(|&c| c % 2 == 0 && c > 0 && (c / 2) % self.head_dim == 0);
        if !ok {
            return Err(Error::Config(format!("{self:?}")));
        }
        Ok(())
    }

    /// Attention heads of the transformer half at each scale.
    pub fn heads_per_scale(&self) -> [usize; 4] {
        self.scale_channels.map(|c| c / 2 / self.head_dim)
    }

    /// Spatial multiple the input is padded to.
    pub fn pad_multiple(&self) -> usize {
        8 * self.window_size
    }
}

fn blocks(channels: usize, cfg: &ScunetConfig, rng: &mut RngStream) -> Vec<ScBlock> {
    (0..cfg.blocks_per_scale)
        .map(|i| ScBlock::new(channels, cfg.head_dim, cfg.window_size, cfg.mlp_ratio, i % 2 == 1, rng))
        .collect()
}

fn run_blocks(blocks: &[ScBlock], mut x: Tensor4) -> Result<Tensor4> {
    for b in blocks {
        x = b.forward(&x)?;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownStage {
    pub blocks: Vec<ScBlock>,
    /// 2x2 stride-2 convolution to the next scale.
    pub down: Conv2d,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpStage {
    /// 2x2 stride-2 transposed convolution from the coarser scale.
    pub up: ConvTranspose2x2,
    pub blocks: Vec<ScBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scunet {
    pub config: ScunetConfig,
    pub head: Conv2d,
    pub down: Vec<DownStage>,
    pub body: Vec<ScBlock>,
    /// Finest scale first.
    pub up: Vec<UpStage>,
    pub tail: Conv2d,
}

impl Scunet {
    pub fn new(config: ScunetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = RngStream::new(config.weight_seed);
        let ch = config.scale_channels;
        let head = Conv2d::new(config.in_channels, ch[0], 3, 1, 1, false, &mut rng);
        let down = (0..3)
            .map(|s| DownStage {
                blocks: blocks(ch[s], &config, &mut rng),
                down: Conv2d::new(ch[s], ch[s + 1], 2, 2, 0, false, &mut rng),
            })
            .collect();
        let body = blocks(ch[3], &config, &mut rng);
        let mut up: Vec<UpStage> = (0..3)
            .rev()
            .map(|s| UpStage {
                up: ConvTranspose2x2::new(ch[s + 1], ch[s], &mut rng),
                blocks: blocks(ch[s], &config, &mut rng),
            })
            .collect();
        up.reverse();
        let tail = Conv2d::new(ch[0], config.in_channels, 3, 1, 1, true, &mut rng);
        Ok(Scunet {
            config,
            head,
            down,
            body,
            up,
            tail,
        })
    }

    /// Forward pass on a tensor whose sides are multiples of
    /// [`ScunetConfig::pad_multiple`].
    pub fn forward_tensor(&self, x: &Tensor4) -> Result<Tensor4> {
        let m = self.config.pad_multiple();
        if !x.h().is_multiple_of(m) || !x.w().is_multiple_of(m) {
            return Err(Error::IncompatibleSpatial {
                height: x.h(),
                width: x.w(),
                window: m,
            });
        }
        let mut x = self.head.forward(x)?;
        let mut skips = Vec::with_capacity(3);
        for stage in &self.down {
            let y = run_blocks(&stage.blocks, x)?;
            x = stage.down.forward(&y)?;
            skips.push(y);
        }
        x = run_blocks(&self.body, x)?;
        for (stage, skip) in self.up.iter().zip(skips).rev() {
            let up = stage.up.forward(&x)?;
            if up.shape() != skip.shape() {
                return Err(Error::Shape(format!(
                    "skip {:?} does not match upsampled {:?}",
                    skip.shape(),
                    up.shape()
                )));
            }
            x = run_blocks(&stage.blocks, up.add(&skip)?)?;
        }
        self.tail.forward(&x)
    }

    /// Reflect-pads the image to the working multiple, runs the network and
    /// crops back to the input size.
    pub fn forward(&self, img: &Image) -> Result<Image> {
        let (h, w, c) = img.dims();
        if c != self.config.in_channels {
            return Err(Error::Shape(format!(
                "network expects {} channels, got {c}",
                self.config.in_channels
            )));
        }
        let m = self.config.pad_multiple();
        let x = Tensor4::from_vec(1, c, h, w, img.data().to_vec())?;
        let padded = x.pad_reflect((m - h % m) % m, (m - w % m) % m);
        let out = self.forward_tensor(&padded)?.crop(h, w);
        Ok(Image::from_planar(h, w, c, out.data().to_vec())?)
    }
}

impl Params for Scunet {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        self.head.visit(&join(prefix, "head"), f);
        for (s, stage) in self.down.iter().enumerate() {
            for (i, b) in stage.blocks.iter().enumerate() {
                b.visit(&join(prefix, &format!("down{s}.block{i}")), f);
            }
            stage.down.visit(&join(prefix, &format!("down{s}.conv")), f);
        }
        for (i, b) in self.body.iter().enumerate() {
            b.visit(&join(prefix, &format!("body.block{i}")), f);
        }
        for (s, stage) in self.up.iter().enumerate() {
            stage.up.visit(&join(prefix, &format!("up{s}.tconv")), f);
            for (i, b) in stage.blocks.iter().enumerate() {
                b.visit(&join(prefix, &format!("up{s}.block{i}")), f);
            }
        }
        self.tail.visit(&join(prefix, "tail"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        self.head.visit_mut(&join(prefix, "head"), f);
        for (s, stage) in self.down.iter_mut().enumerate() {
            for (i, b) in stage.blocks.iter_mut().enumerate() {
                b.visit_mut(&join(prefix, &format!("down{s}.block{i}")), f);
            }
            stage.down.visit_mut(&join(prefix, &format!("down{s}.conv")), f);
        }
        for (i, b) in self.body.iter_mut().enumerate() {
            b.visit_mut(&join(prefix, &format!("body.block{i}")), f);
        }
        for (s, stage) in self.up.iter_mut().enumerate() {
            stage.up.visit_mut(&join(prefix, &format!("up{s}.tconv")), f);
            for (i, b) in stage.blocks.iter_mut().enumerate() {
                b.visit_mut(&join(prefix, &format!("up{s}.block{i}")), f);
            }
        }
        self.tail.visit_mut(&join(prefix, "tail"), f);
    }
}

fn sc_block_params(c: usize, cfg: &ScunetConfig) -> usize {
    let h = c / 2;
    let hidden = (h as f64 * cfg.mlp_ratio).round() as usize;
    let span = 2 * cfg.window_size - 1;
    let heads = h / cfg.head_dim;
    let fuse = 2 * (c * c + c);
    let swin = 4 * h + (3 * h * h + 3 * h) + heads * span * span + (h * h + h) + (h * hidden + hidden) + (hidden * h + h);
    let rconv = 2 * 9 * h * h;
    fuse + swin + rconv
}

/// Number of scalar weights and biases, computed from the structure alone.
pub fn parameter_count(cfg: &ScunetConfig) -> usize {
    let ch = cfg.scale_channels;
    let k = cfg.in_channels;
    let head = k * ch[0] * 9;
    let tail = ch[0] * k * 9 + k;
    let resample: usize = (0..3).map(|s| 2 * ch[s] * ch[s + 1] * 4).sum();
    let scales: usize = (0..3).map(|s| 2 * cfg.blocks_per_scale * sc_block_params(ch[s], cfg)).sum();
    let body = cfg.blocks_per_scale * sc_block_params(ch[3], cfg);
    head + tail + resample + scales + body
}

pub fn scunet_forward(img: &Image, cfg: &ScunetConfig) -> Result<Image> {
    Scunet::new(cfg.clone())?.forward(img)
}
