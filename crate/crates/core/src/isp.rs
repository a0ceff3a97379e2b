//! Camera pipeline simulation: reverse ISP to a Bayer raw, read/shot noise,
//! and the forward ISP back to sRGB.

use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{reflect_index, Image};
use crate::rng::RngStream;

pub type Mat3 = [[f64; 3]; 3];

/// Linear sRGB to XYZ, Bradford-adapted to D50.
pub const SRGB_TO_XYZ_D50: Mat3 = [
    [0.4360747, 0.3850649, 0.1430804],
    [0.2225045, 0.7168786, 0.0606169],
    [0.0139322, 0.0971045, 0.7141733],
];

/// XYZ (D50) to linear sRGB.
pub const XYZ_D50_TO_SRGB: Mat3 = [
    [3.1338561, -1.6168667, -0.4906146],
    [-0.9787684, 1.9161415, 0.0334540],
    [0.0719453, -0.2289914, 1.4052427],
];

const HIGHLIGHT_KNEE: f64 = 0.9;
const MAX_CCM_CONDITION: f64 = 1e4;
const MIN_TABLE_LEN: usize = 256;

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn to_matrix(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn srgb_decode(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn srgb_encode(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Monotone brightness curve on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ToneCurve {
    Smoothstep,
    /// `table[i]` is the curve at `i / (len - 1)`; linear in between.
    Tabulated { table: Vec<f64> },
}

impl ToneCurve {
    pub fn tabulated(table: Vec<f64>) -> Result<Self> {
        let curve = ToneCurve::Tabulated { table };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let ToneCurve::Tabulated { table } = self else {
            return Ok(());
        };
        if table.len() < MIN_TABLE_LEN {
            return Err(Error::InvalidToneCurve(format!(
                "need at least {MIN_TABLE_LEN} samples, got {}",
                table.len()
            )));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidToneCurve("non-finite sample".into()));
        }
        if table[0] != 0.0 || table[table.len() - 1] != 1.0 {
            return Err(Error::InvalidToneCurve("curve must start at 0 and end at 1".into()));
        }
        if let Some(i) = table.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidToneCurve(format!(
                "not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(())
    }

    /// Parses the text format: first line is the sample count, then one
    /// sample per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let count: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidToneCurve("empty file".into()))?
            .parse()
            .map_err(|e| Error::InvalidToneCurve(format!("bad sample count: {e}")))?;
        let table = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::InvalidToneCurve(format!("bad sample `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if table.len() != count {
            return Err(Error::InvalidToneCurve(format!(
                "header says {count} samples, found {}",
                table.len()
            )));
        }
        Self::tabulated(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn forward(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        match self {
            ToneCurve::Smoothstep => 3.0 * v * v - 2.0 * v * v * v,
            ToneCurve::Tabulated { table } => {
                let pos = v * (table.len() - 1) as f64;
                let i = (pos.floor() as usize).min(table.len() - 2);
                let t = pos - i as f64;
                table[i] + t * (table[i + 1] - table[i])
            }
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            ToneCurve::Smoothstep => 0.5 - ((1.0 - 2.0 * u).asin() / 3.0).sin(),
            ToneCurve::Tabulated { table } => {
                // First index whose sample exceeds u, so table[i-1] <= u < table[i].
                let i = table.partition_point(|&s| s <= u).clamp(1, table.len() - 1);
                let (lo, hi) = (table[i - 1], table[i]);
                let t = ((u - lo) / (hi - lo)).clamp(0.0, 1.0);
                (i - 1) as f64 / (table.len() - 1) as f64 + t / (table.len() - 1) as f64
            }
        }
    }
}

fn map_image(img: &Image, f: impl Fn(f64) -> f64) -> Image {
    let data = img.data().iter().map(|&v| f(f64::from(v)) as f32).collect();
    Image::from_planar(img.height(), img.width(), img.channels(), data)
        .expect("dims are unchanged")
}

pub fn tone_forward(img: &Image, curve: &ToneCurve) -> Image {
    map_image(img, |v| curve.forward(v))
}

pub fn tone_inverse(img: &Image, curve: &ToneCurve) -> Image {
    map_image(img, |v| curve.inverse(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    #[default]
    Srgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayerPattern {
    #[default]
    Rggb,
}

/// Color and tone characteristics of a simulated camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub name: String,
    /// Camera RGB to XYZ (D50).
    pub ccm: Mat3,
    pub wb_red_range: (f64, f64),
    pub wb_blue_range: (f64, f64),
    pub tone_curve: ToneCurve,
    #[serde(default)]
    pub gamma: Gamma,
}

impl CameraModel {
    pub fn new(
        name: impl Into<String>,
        ccm: Mat3,
        wb_red_range: (f64, f64),
        wb_blue_range: (f64, f64),
        tone_curve: ToneCurve,
    ) -> Result<Self> {
        let cam = CameraModel {
            name: name.into(),
            ccm,
            wb_red_range,
            wb_blue_range,
            tone_curve,
            gamma: Gamma::Srgb,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidCamera("empty name".into()));
        }
        if self.ccm.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera(format!("{}: non-finite ccm", self.name)));
        }
        let sv = to_matrix(&self.ccm).singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min <= 0.0 || max / min >= MAX_CCM_CONDITION {
            return Err(Error::InvalidCamera(format!(
                "{}: ccm is singular or ill-conditioned",
                self.name
            )));
        }
        for (label, (lo, hi)) in [("red", self.wb_red_range), ("blue", self.wb_blue_range)] {
            if !(1.0 <= lo && lo <= hi && hi <= 4.0) {
                return Err(Error::InvalidCamera(format!(
                    "{}: {label} white-balance range [{lo}, {hi}] outside [1, 4]",
                    self.name
                )));
            }
        }
        self.tone_curve.validate()
    }

    fn ccm_inverse(&self) -> Mat3 {
        let inv = to_matrix(&self.ccm)
            .try_inverse()
            .expect("validated ccm is invertible");
        [0, 1, 2].map(|i| [0, 1, 2].map(|j| inv[(i, j)]))
    }

    /// Camera whose raw RGB is linear sRGB.
    pub fn identity() -> Self {
        Self::new("identity", SRGB_TO_XYZ_D50, (1.9, 2.4), (1.5, 1.9), ToneCurve::Smoothstep)
            .expect("built-in camera is valid")
    }

    pub fn warm() -> Self {
        let cam_to_srgb = [[1.62, -0.48, -0.14], [-0.18, 1.42, -0.24], [0.02, -0.46, 1.44]];
        Self::new(
            "warm",
            mat_mul(&SRGB_TO_XYZ_D50, &cam_to_srgb),
            (1.9, 2.4),
            (1.5, 1.9),
            ToneCurve::Smoothstep,
        )
        .expect("built-in camera is valid")
    }

    pub fn cool() -> Self {
        let cam_to_srgb = [[1.78, -0.66, -0.12], [-0.22, 1.56, -0.34], [-0.04, -0.38, 1.42]];
        Self::new(
            "cool",
            mat_mul(&SRGB_TO_XYZ_D50, &cam_to_srgb),
            (1.9, 2.4),
            (1.5, 1.9),
            ToneCurve::Smoothstep,
        )
        .expect("built-in camera is valid")
    }

    pub fn builtin() -> Vec<CameraModel> {
        vec![Self::identity(), Self::warm(), Self::cool()]
    }
}

/// Single-plane Bayer mosaic in the linear domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
    pattern: BayerPattern,
}

impl RawImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || height % 2 == 1 || width % 2 == 1 {
            return Err(Error::OddDimensions { height, width });
        }
        if data.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "raw data length {} != {height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite raw sample".into()));
        }
        Ok(RawImage {
            height,
            width,
            data,
            pattern: BayerPattern::Rggb,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }
}

/// Channel sampled at `(y, x)` for RGGB.
fn bayer_channel(y: usize, x: usize) -> usize {
    match (y % 2, x % 2) {
        (0, 0) => 0,
        (1, 1) => 2,
        _ => 1,
    }
}

/// Every parameter sampled by the reverse ISP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IspContext {
    pub camera: String,
    pub wb_red: f64,
    pub wb_blue: f64,
    pub exposure_gain: f64,
}

impl IspContext {
    pub fn validate_for(&self, cam: &CameraModel) -> Result<()> {
        if self.camera != cam.name {
            return Err(Error::ContextMismatch {
                expected: self.camera.clone(),
                actual: cam.name.clone(),
            });
        }
        for (label, v) in [
            ("wb_red", self.wb_red),
            ("wb_blue", self.wb_blue),
            ("exposure_gain", self.exposure_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{label} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn gains(&self) -> [f64; 3] {
        [self.wb_red, 1.0, self.wb_blue]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNoiseParams {
    pub lambda_shot: f64,
    pub lambda_read: f64,
}

impl SensorNoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_shot.is_finite() && self.lambda_shot > 0.0)
            || !(self.lambda_read.is_finite() && self.lambda_read > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "sensor noise parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Parameter ranges for the sensor stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSampler {
    pub log10_shot_range: (f64, f64),
    pub read_slope: f64,
    pub read_intercept: f64,
    pub read_log_std: f64,
    /// Exposure gain is `2^u` with `u` uniform in this range.
    pub exposure_log2_range: (f64, f64),
}

impl Default for SensorSampler {
    fn default() -> Self {
        SensorSampler {
            log10_shot_range: (-4.0, -1.9),
            read_slope: 2.18,
            read_intercept: 1.20,
            read_log_std: 0.26,
            exposure_log2_range: (-0.3, 0.3),
        }
    }
}

impl SensorSampler {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.log10_shot_range;
        let (elo, ehi) = self.exposure_log2_range;
        let ok = lo.is_finite()
            && hi.is_finite()
            && lo <= hi
            && elo.is_finite()
            && ehi.is_finite()
            && elo <= ehi
            && self.read_slope.is_finite()
            && self.read_intercept.is_finite()
            && self.read_log_std.is_finite()
            && self.read_log_std >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid sensor sampler {self:?}")));
        }
        Ok(())
    }

    pub fn sample_noise(&self, rng: &mut RngStream) -> SensorNoiseParams {
        let (lo, hi) = self.log10_shot_range;
        let lambda_shot = 10f64.powf(rng.uniform_range(lo, hi));
        let log_read =
            self.read_slope * lambda_shot.ln() + self.read_intercept + self.read_log_std * rng.normal();
        SensorNoiseParams {
            lambda_shot,
            lambda_read: log_read.exp(),
        }
    }

    pub fn sample_context(&self, cam: &CameraModel, rng: &mut RngStream) -> IspContext {
        let (rlo, rhi) = cam.wb_red_range;
        let (blo, bhi) = cam.wb_blue_range;
        let (elo, ehi) = self.exposure_log2_range;
        IspContext {
            camera: cam.name.clone(),
            wb_red: rng.uniform_range(rlo, rhi),
            wb_blue: rng.uniform_range(blo, bhi),
            exposure_gain: 2f64.powf(rng.uniform_range(elo, ehi)),
        }
    }
}

/// Stages of the reverse pipeline, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReverseStage {
    GammaDecode,
    ToneInverse,
    LinearRgbToXyz,
    XyzToCamera,
    InverseExposure,
    InverseWhiteBalance,
    Mosaic,
}

/// Stages of the forward pipeline, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardStage {
    Demosaic,
    WhiteBalance,
    ExposureGain,
    CameraToXyz,
    XyzToLinearRgb,
    ToneMap,
    GammaEncode,
}

pub const REVERSE_STAGES: [ReverseStage; 7] = [
    ReverseStage::GammaDecode,
    ReverseStage::ToneInverse,
    ReverseStage::LinearRgbToXyz,
    ReverseStage::XyzToCamera,
    ReverseStage::InverseExposure,
    ReverseStage::InverseWhiteBalance,
    ReverseStage::Mosaic,
];

pub const FORWARD_STAGES: [ForwardStage; 7] = [
    ForwardStage::Demosaic,
    ForwardStage::WhiteBalance,
    ForwardStage::ExposureGain,
    ForwardStage::CameraToXyz,
    ForwardStage::XyzToLinearRgb,
    ForwardStage::ToneMap,
    ForwardStage::GammaEncode,
];

fn map_pixels(px: &mut [[f64; 3]], f: impl Fn([f64; 3]) -> [f64; 3]) {
    for p in px.iter_mut() {
        *p = f(*p);
    }
}

/// Reverse ISP with a sampled context (default sampler ranges).
pub fn reverse_isp(img: &Image, cam: &CameraModel, rng: &mut RngStream) -> Result<(RawImage, IspContext)> {
    let ctx = SensorSampler::default().sample_context(cam, rng);
    let raw = reverse_isp_with_context(img, cam, &ctx)?;
    Ok((raw, ctx))
}

pub fn reverse_isp_with_context(img: &Image, cam: &CameraModel, ctx: &IspContext) -> Result<RawImage> {
    reverse_isp_traced(img, cam, ctx, &mut Vec::new())
}

/// Reverse ISP that records each executed stage.
pub fn reverse_isp_traced(
    img: &Image,
    cam: &CameraModel,
    ctx: &IspContext,
    trace: &mut Vec<ReverseStage>,
) -> Result<RawImage> {
    img.require_channels(3)?;
    ctx.validate_for(cam)?;
    let (h, w, _) = img.dims();
    if h % 2 == 1 || w % 2 == 1 {
        return Err(Error::OddDimensions { height: h, width: w });
    }
    let mut px: Vec<[f64; 3]> = (0..h * w)
        .map(|i| [0, 1, 2].map(|c| f64::from(img.plane(c)[i])))
        .collect();
    let ccm_inv = cam.ccm_inverse();
    let inv_gains = ctx.gains().map(|g| 1.0 / g);
    let mut mosaic = Vec::new();
    for stage in REVERSE_STAGES {
        trace.push(stage);
        match stage {
            ReverseStage::GammaDecode => map_pixels(&mut px, |p| p.map(srgb_decode)),
            ReverseStage::ToneInverse => map_pixels(&mut px, |p| p.map(|v| cam.tone_curve.inverse(v))),
            ReverseStage::LinearRgbToXyz => map_pixels(&mut px, |p| mat_vec(&SRGB_TO_XYZ_D50, p)),
            ReverseStage::XyzToCamera => map_pixels(&mut px, |p| mat_vec(&ccm_inv, p)),
            ReverseStage::InverseExposure => {
                map_pixels(&mut px, |p| p.map(|v| v / ctx.exposure_gain))
            }
            ReverseStage::InverseWhiteBalance => map_pixels(&mut px, |p| {
                // Fade the gain out above the knee so bright pixels are not
                // pushed past 1 by the later forward gain.
                let gray = (p[0] + p[1] + p[2]) / 3.0;
                let mask = ((gray - HIGHLIGHT_KNEE).max(0.0) / (1.0 - HIGHLIGHT_KNEE)).powi(2);
                [0, 1, 2].map(|c| {
                    let safe = (mask + (1.0 - mask) * inv_gains[c]).max(inv_gains[c]);
                    (p[c] * safe).clamp(0.0, 1.0)
                })
            }),
            ReverseStage::Mosaic => {
                mosaic = (0..h * w)
                    .map(|i| px[i][bayer_channel(i / w, i % w)] as f32)
                    .collect();
            }
        }
    }
    RawImage::new(h, w, mosaic)
}

/// `out = clip01(v + e)`, `e ~ N(0, lambda_read + lambda_shot * v)`.
pub fn add_sensor_noise(raw: &RawImage, params: &SensorNoiseParams, rng: &mut RngStream) -> Result<RawImage> {
    params.validate()?;
    let data = raw
        .data
        .iter()
        .map(|&v| {
            let v = f64::from(v);
            let var = (params.lambda_read + params.lambda_shot * v).max(0.0);
            (v + var.sqrt() * rng.normal()).clamp(0.0, 1.0) as f32
        })
        .collect();
    RawImage::new(raw.height, raw.width, data)
}

/// Bilinear demosaic with reflect-101 borders. Even dims keep the Bayer
/// phase of reflected samples consistent, so every missing value is the
/// plain average of its same-color neighbours.
fn demosaic(raw: &RawImage) -> Vec<[f64; 3]> {
    let (h, w) = (raw.height, raw.width);
    let at = |y: isize, x: isize| {
        let (yy, xx) = (reflect_index(y, h), reflect_index(x, w));
        f64::from(raw.data[yy * w + xx])
    };
    let mut out = vec![[0.0; 3]; h * w];
    for y in 0..h {
        for x in 0..w {
            let (yi, xi) = (y as isize, x as isize);
            let here = at(yi, xi);
            let cross = (at(yi - 1, xi) + at(yi + 1, xi) + at(yi, xi - 1) + at(yi, xi + 1)) / 4.0;
            let diag = (at(yi - 1, xi - 1) + at(yi - 1, xi + 1) + at(yi + 1, xi - 1) + at(yi + 1, xi + 1))
                / 4.0;
            let horiz = (at(yi, xi - 1) + at(yi, xi + 1)) / 2.0;
            let vert = (at(yi - 1, xi) + at(yi + 1, xi)) / 2.0;
            out[y * w + x] = match (y % 2, x % 2) {
                (0, 0) => [here, cross, diag],
                (1, 1) => [diag, cross, here],
                (0, _) => [horiz, here, vert],
                _ => [vert, here, horiz],
            };
        }
    }
    out
}

pub fn forward_isp(raw: &RawImage, ctx: &IspContext, cam: &CameraModel) -> Result<Image> {
    forward_isp_traced(raw, ctx, cam, &mut Vec::new())
}

/// Forward ISP that records each executed stage.
pub fn forward_isp_traced(
    raw: &RawImage,
    ctx: &IspContext,
    cam: &CameraModel,
    trace: &mut Vec<ForwardStage>,
) -> Result<Image> {
    ctx.validate_for(cam)?;
    let (h, w) = (raw.height, raw.width);
    let gains = ctx.gains();
    let mut px = Vec::new();
    for stage in FORWARD_STAGES {
        trace.push(stage);
        match stage {
            ForwardStage::Demosaic => px = demosaic(raw),
            ForwardStage::WhiteBalance => map_pixels(&mut px, |p| [0, 1, 2].map(|c| p[c] * gains[c])),
            ForwardStage::ExposureGain => map_pixels(&mut px, |p| p.map(|v| v * ctx.exposure_gain)),
            ForwardStage::CameraToXyz => map_pixels(&mut px, |p| mat_vec(&cam.ccm, p)),
            ForwardStage::XyzToLinearRgb => map_pixels(&mut px, |p| mat_vec(&XYZ_D50_TO_SRGB, p)),
            ForwardStage::ToneMap => map_pixels(&mut px, |p| p.map(|v| cam.tone_curve.forward(v))),
            ForwardStage::GammaEncode => map_pixels(&mut px, |p| p.map(srgb_encode)),
        }
    }
    let mut data = vec![0.0f32; 3 * h * w];
    for (i, p) in px.iter().enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = p[c].clamp(0.0, 1.0) as f32;
        }
    }
    Image::from_planar(h, w, 3, data)
}

/// Reverse-forward tone mapping used on the clean branch: decode, invert
/// the tone curve, reapply it, encode.
pub fn tone_remap(img: &Image, cam: &CameraModel) -> Image {
    map_image(img, |v| {
        let linear = cam.tone_curve.inverse(srgb_decode(v));
        srgb_encode(cam.tone_curve.forward(linear)).clamp(0.0, 1.0)
    })
}

/// Sensor stage with fully specified parameters. Noise values are drawn
/// from `rng`.
pub fn sensor_noise_stage_with(
    noisy: &Image,
    clean: &Image,
    cam: &CameraModel,
    ctx: &IspContext,
    params: &SensorNoiseParams,
    rng: &mut RngStream,
) -> Result<(Image, Image)> {
    noisy.require_same_dims(clean)?;
    let raw = reverse_isp_with_context(noisy, cam, ctx)?;
    let raw = add_sensor_noise(&raw, params, rng)?;
    let noisy_out = forward_isp(&raw, ctx, cam)?;
    Ok((noisy_out, tone_remap(clean, cam)))
}

/// Sensor stage sampling its context and noise level from default ranges.
pub fn sensor_noise_stage(
    noisy: &Image,
    clean: &Image,
    cam: &CameraModel,
    rng: &mut RngStream,
) -> Result<(Image, Image)> {
    let sampler = SensorSampler::default();
    let ctx = sampler.sample_context(cam, rng);
    let params = sampler.sample_noise(rng);
    sensor_noise_stage_with(noisy, clean, cam, &ctx, &params, rng)
}
