//! Residual conv block and the Swin-Conv block.

use noisepair::RngStream;

use crate::error::{Error, Result};
use crate::ops::{join, Conv2d, Params};
use crate::swin::SwinBlock;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    /// Test hook that makes the block linear.
    Identity,
}

/// `conv3x3 -> activation -> conv3x3`, plus the input.
#[derive(Debug, Clone, PartialEq)]
pub struct RConv {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub activation: Activation,
}

impl RConv {
    pub fn new(dim: usize, rng: &mut RngStream) -> Self {
        RConv {
            conv1: Conv2d::new(dim, dim, 3, 1, 1, false, rng),
            conv2: Conv2d::new(dim, dim, 3, 1, 1, false, rng),
            activation: Activation::Relu,
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        let mut y = self.conv1.forward(x)?;
        if self.activation == Activation::Relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        self.conv2.forward(&y)?.add(x)
    }
}

impl Params for RConv {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        self.conv1.visit(&join(prefix, "conv1"), f);
        self.conv2.visit(&join(prefix, "conv2"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        self.conv1.visit_mut(&join(prefix, "conv1"), f);
        self.conv2.visit_mut(&join(prefix, "conv2"), f);
    }
}

/// `conv1x1 -> split -> (SwinT, RConv) -> concat -> conv1x1 -> + input`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScBlock {
    pub channels: usize,
    pub conv_in: Conv2d,
    pub swin: SwinBlock,
    pub rconv: RConv,
    pub conv_out: Conv2d,
}

impl ScBlock {
    pub fn new(
        channels: usize,
        head_dim: usize,
        window: usize,
        mlp_ratio: f64,
        shifted: bool,
        rng: &mut RngStream,
    ) -> Self {
        let half = channels / 2;
        let conv_in = Conv2d::new(channels, channels, 1, 1, 0, true, rng);
        let swin = SwinBlock::new(half, head_dim, window, mlp_ratio, shifted, rng);
        let rconv = RConv::new(half, rng);
        let conv_out = Conv2d::new(channels, channels, 1, 1, 0, true, rng);
        ScBlock {
            channels,
            conv_in,
            swin,
            rconv,
            conv_out,
        }
    }

    pub fn forward(&self, x: &Tensor4) -> Result<Tensor4> {
        if x.c() % 2 == 1 {
            return Err(Error::OddChannels(x.c()));
        }
        if x.c() != self.channels {
            return Err(Error::Shape(format!("SC block expects {} channels, got {}", self.channels, x.c())));
        }
        let y = self.conv_in.forward(x)?;
        let (x1, x2) = y.split_channels(self.channels / 2);
        let y1 = self.swin.forward(&x1)?;
        let y2 = self.rconv.forward(&x2)?;
        let z = self.conv_out.forward(&Tensor4::concat_channels(&y1, &y2)?)?;
        z.add(x)
    }
}

impl Params for ScBlock {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f32])) {
        self.conv_in.visit(&join(prefix, "conv_in"), f);
        self.swin.visit(&join(prefix, "swin"), f);
        self.rconv.visit(&join(prefix, "rconv"), f);
        self.conv_out.visit(&join(prefix, "conv_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f32])) {
        self.conv_in.visit_mut(&join(prefix, "conv_in"), f);
        self.swin.visit_mut(&join(prefix, "swin"), f);
        self.rconv.visit_mut(&join(prefix, "rconv"), f);
        self.conv_out.visit_mut(&join(prefix, "conv_out"), f);
    }
}

pub fn sc_block_forward(x: &Tensor4, block: &ScBlock) -> Result<Tensor4> {
    block.forward(x)
}

pub fn swint_forward(x: &Tensor4, block: &SwinBlock) -> Result<Tensor4> {
    block.forward(x)
}

pub fn rconv_forward(x: &Tensor4, block: &RConv) -> Result<Tensor4> {
    block.forward(x)
}
