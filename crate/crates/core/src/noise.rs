//! Additive and multiplicative noise generators: generalized 3D Gaussian,
//! signal-dependent Poisson, and speckle.
//!
//! Every generator clips its result into `[0, 1]`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp01, rgb_to_gray, Image};
use crate::rng::RngStream;

/// Cross-channel structure of a Gaussian noise field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMode {
    /// Independent noise per channel, covariance `sigma^2 I`.
    ColorWhite,
    /// One draw per pixel shared by all channels, covariance `sigma^2 11^T`.
    Gray,
    /// Arbitrary PSD covariance with trace `3 sigma^2`.
    GeneralCorrelated,
}

/// Zero-mean Gaussian noise with a 3x3 cross-channel covariance. `sigma` is
/// the per-channel RMS level on the `[0, 1]` intensity scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mode: GaussianMode,
    pub sigma: f64,
    pub covariance: [[f64; 3]; 3],
}

impl GaussianSpec {
    pub fn color_white(sigma: f64) -> Self {
        let s2 = sigma * sigma;
        Self {
            mode: GaussianMode::ColorWhite,
            sigma,
            covariance: [[s2, 0.0, 0.0], [0.0, s2, 0.0], [0.0, 0.0, s2]],
        }
    }

    pub fn gray(sigma: f64) -> Self {
        let s2 = sigma * sigma;
        Self {
            mode: GaussianMode::Gray,
            sigma,
            covariance: [[s2; 3]; 3],
        }
    }

    /// `sigma^2 * Q diag(weights) Q^T`; `weights` must be non-negative and
    /// sum to 3, `rotation` orthogonal.
    pub fn correlated(sigma: f64, weights: [f64; 3], rotation: &Matrix3<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 3.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "covariance weights {weights:?} must be non-negative and sum to 3"
            )));
        }
        let diag = Matrix3::from_diagonal(&Vector3::from(weights));
        let cov = rotation * diag * rotation.transpose() * (sigma * sigma);
        // Symmetrize so round-off never breaks the symmetry check.
        let cov = (cov + cov.transpose()) * 0.5;
        let spec = Self {
            mode: GaussianMode::GeneralCorrelated,
            sigma,
            covariance: matrix_to_array(&cov),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn covariance_matrix(&self) -> Matrix3<f64> {
        array_to_matrix(&self.covariance)
    }

    /// Checks the structural invariants of the spec.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return bad(format!("sigma {} must be finite and non-negative", self.sigma));
        }
        let cov = self.covariance_matrix();
        if cov.iter().any(|v| !v.is_finite()) {
            return bad("covariance has non-finite entries".into());
        }
        let s2 = self.sigma * self.sigma;
        let tol = 1e-10 * s2.max(f64::MIN_POSITIVE);
        if (cov.trace() / 3.0 - s2).abs() > tol {
            return bad(format!(
                "covariance trace/3 = {} does not match sigma^2 = {s2}",
                cov.trace() / 3.0
            ));
        }
        if (cov - cov.transpose()).abs().max() > tol {
            return bad("covariance is not symmetric".into());
        }
        let expected = match self.mode {
            GaussianMode::ColorWhite => Some(Matrix3::identity() * s2),
            GaussianMode::Gray => Some(Matrix3::repeat(s2)),
            GaussianMode::GeneralCorrelated => None,
        };
        if let Some(expected) = expected {
            if (cov - expected).abs().max() > tol {
                return bad(format!("covariance does not match {:?} structure", self.mode));
            }
        }
        let min_eig = SymmetricEigen::new(cov).eigenvalues.min();
        if min_eig < -1e-12 {
            return bad(format!("covariance is not PSD (eigenvalue {min_eig})"));
        }
        Ok(())
    }

    fn factor(&self) -> NoiseFactor {
        match self.mode {
            GaussianMode::ColorWhite => NoiseFactor::White(self.sigma),
            GaussianMode::Gray => NoiseFactor::Gray(self.sigma),
            GaussianMode::GeneralCorrelated => {
                let eig = SymmetricEigen::new(self.covariance_matrix());
                let scales = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                let l = eig.eigenvectors * Matrix3::from_diagonal(&scales);
                NoiseFactor::Full(l)
            }
        }
    }
}

enum NoiseFactor {
    White(f64),
    Gray(f64),
    Full(Matrix3<f64>),
}

fn matrix_to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = m[(r, c)];
        }
    }
    out
}

fn array_to_matrix(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| a[r][c])
}

/// Haar-distributed rotation: QR of a Gaussian matrix with the sign of `R`'s
/// diagonal folded into `Q`, then one column flipped if needed for `det = +1`.
pub fn random_rotation(rng: &mut RngStream) -> Matrix3<f64> {
    let g = Matrix3::from_fn(|_, _| rng.normal());
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for i in 0..3 {
        if r[(i, i)] < 0.0 {
            q.set_column(i, &(-q.column(i)));
        }
    }
    if q.determinant() < 0.0 {
        q.set_column(2, &(-q.column(2)));
    }
    q
}

/// Uniform point on the simplex `{w >= 0, sum w = 3}`.
pub fn random_simplex_weights(rng: &mut RngStream) -> [f64; 3] {
    // Normalized exponentials are Dirichlet(1, 1, 1).
    let e: Vec<f64> = (0..3).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let total: f64 = e.iter().sum();
    let mut w = [3.0 * e[0] / total, 3.0 * e[1] / total, 0.0];
    w[2] = 3.0 - w[0] - w[1];
    w
}

fn sample_level(rng: &mut RngStream, range: (u32, u32)) -> f64 {
    rng.int_inclusive(u64::from(range.0), u64::from(range.1)) as f64 / 255.0
}

fn check_level_range(range: (u32, u32)) -> Result<()> {
    if range.0 > range.1 {
        return Err(Error::InvalidParameter(format!("empty level range {range:?}")));
    }
    Ok(())
}

/// Sampling distribution for [`GaussianSpec`]. Levels are integers in units
/// of `1/255`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianSampler {
    /// Probabilities of `[ColorWhite, Gray, GeneralCorrelated]`.
    pub mode_probs: [f64; 3],
    pub level_range: (u32, u32),
}

impl Default for GaussianSampler {
    fn default() -> Self {
        Self {
            mode_probs: [0.4, 0.4, 0.2],
            level_range: (2, 50),
        }
    }
}

impl GaussianSampler {
    pub fn validate(&self) -> Result<()> {
        check_probs(&self.mode_probs)?;
        check_level_range(self.level_range)
    }

    pub fn sample(&self, rng: &mut RngStream) -> GaussianSpec {
        let mode = match rng.categorical(&self.mode_probs) {
            0 => GaussianMode::ColorWhite,
            1 => GaussianMode::Gray,
            _ => GaussianMode::GeneralCorrelated,
        };
        let sigma = sample_level(rng, self.level_range);
        spec_for_mode(mode, sigma, rng)
    }
}

fn spec_for_mode(mode: GaussianMode, sigma: f64, rng: &mut RngStream) -> GaussianSpec {
    match mode {
        GaussianMode::ColorWhite => GaussianSpec::color_white(sigma),
        GaussianMode::Gray => GaussianSpec::gray(sigma),
        GaussianMode::GeneralCorrelated => {
            let weights = random_simplex_weights(rng);
            let rotation = random_rotation(rng);
            GaussianSpec::correlated(sigma, weights, &rotation)
                .expect("simplex weights and a rotation always give a valid covariance")
        }
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || probs.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParameter(format!("invalid probabilities {probs:?}")));
    }
    Ok(())
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{what} probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Draws a Gaussian spec with the default mode mix `(0.4, 0.4, 0.2)` and a
/// level from `{2/255, ..., 50/255}`.
pub fn sample_gaussian_spec(rng: &mut RngStream) -> GaussianSpec {
    GaussianSampler::default().sample(rng)
}

/// Sampling distribution for speckle fields, which reuse [`GaussianSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeckleSampler {
    pub gray_prob: f64,
    /// Relative weights of `[ColorWhite, GeneralCorrelated]` when not gray.
    pub color_mode_weights: [f64; 2],
    pub level_range: (u32, u32),
}

impl Default for SpeckleSampler {
    fn default() -> Self {
        Self {
            gray_prob: 0.5,
            color_mode_weights: [0.4, 0.2],
            level_range: (2, 50),
        }
    }
}

impl SpeckleSampler {
    pub fn validate(&self) -> Result<()> {
        check_probability(self.gray_prob, "speckle gray")?;
        check_probs(&self.color_mode_weights)?;
        check_level_range(self.level_range)
    }

    pub fn sample(&self, rng: &mut RngStream) -> GaussianSpec {
        let mode = if rng.bernoulli(self.gray_prob) {
            GaussianMode::Gray
        } else if rng.categorical(&self.color_mode_weights) == 0 {
            GaussianMode::ColorWhite
        } else {
            GaussianMode::GeneralCorrelated
        };
        let sigma = sample_level(rng, self.level_range);
        spec_for_mode(mode, sigma, rng)
    }
}

/// Poisson noise `P(10^alpha x) / 10^alpha - x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    pub alpha: f64,
    /// Generate the noise from the luma of the signal and add it to every
    /// channel.
    pub gray: bool,
}

impl PoissonSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha > 8.0 {
            return Err(Error::InvalidParameter(format!("poisson alpha {} out of range", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonSampler {
    pub alpha_range: (f64, f64),
    pub gray_prob: f64,
}

impl Default for PoissonSampler {
    fn default() -> Self {
        Self {
            alpha_range: (2.0, 4.0),
            gray_prob: 0.5,
        }
    }
}

impl PoissonSampler {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.alpha_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi && hi <= 8.0) {
            return Err(Error::InvalidParameter(format!("invalid alpha range {:?}", self.alpha_range)));
        }
        check_probability(self.gray_prob, "poisson gray")
    }

    pub fn sample(&self, rng: &mut RngStream) -> PoissonSpec {
        let alpha = rng.uniform_range(self.alpha_range.0, self.alpha_range.1);
        let gray = rng.bernoulli(self.gray_prob);
        PoissonSpec { alpha, gray }
    }
}

pub fn sample_poisson_spec(rng: &mut RngStream) -> PoissonSpec {
    PoissonSampler::default().sample(rng)
}

/// Draws a correlated Gaussian field, one 3-vector per pixel in raster
/// order. Returned planar, `[c * n + i]`.
fn gaussian_field(spec: &GaussianSpec, n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut out = vec![0.0; 3 * n];
    match spec.factor() {
        NoiseFactor::White(s) => {
            for i in 0..n {
                for c in 0..3 {
                    out[c * n + i] = s * rng.normal();
                }
            }
        }
        NoiseFactor::Gray(s) => {
            for i in 0..n {
                let v = s * rng.normal();
                for c in 0..3 {
                    out[c * n + i] = v;
                }
            }
        }
        NoiseFactor::Full(l) => {
            for i in 0..n {
                let z = Vector3::new(rng.normal(), rng.normal(), rng.normal());
                let v = l * z;
                for c in 0..3 {
                    out[c * n + i] = v[c];
                }
            }
        }
    }
    out
}

/// `clip01(img + n)` with `n ~ N(0, covariance)` i.i.d. per pixel.
pub fn add_gaussian(img: &Image, spec: &GaussianSpec, rng: &mut RngStream) -> Result<Image> {
    img.require_channels(3)?;
    spec.validate()?;
    let field = gaussian_field(spec, img.pixel_count(), rng);
    let mut out = img.clone();
    for (v, n) in out.data_mut().iter_mut().zip(&field) {
        *v = clamp01((f64::from(*v) + n) as f32);
    }
    Ok(out)
}

/// `clip01(target + signal * g)` with `g` a Gaussian field drawn per `spec`.
pub fn add_speckle(
    signal: &Image,
    target: &Image,
    spec: &GaussianSpec,
    rng: &mut RngStream,
) -> Result<Image> {
    signal.require_same_dims(target)?;
    target.require_channels(3)?;
    spec.validate()?;
    let field = gaussian_field(spec, target.pixel_count(), rng);
    let mut out = target.clone();
    for ((v, s), g) in out.data_mut().iter_mut().zip(signal.data()).zip(&field) {
        *v = clamp01((f64::from(*v) + f64::from(*s) * g) as f32);
    }
    Ok(out)
}

/// `clip01(target + n)` with `n = P(10^alpha x) / 10^alpha - x` computed
/// from `signal`.
pub fn add_poisson(
    signal: &Image,
    target: &Image,
    spec: &PoissonSpec,
    rng: &mut RngStream,
) -> Result<Image> {
    signal.require_same_dims(target)?;
    spec.validate()?;
    let scale = 10f64.powf(spec.alpha);
    let noise_of = |x: f32, rng: &mut RngStream| -> f64 {
        let x = f64::from(clamp01(x));
        sample_poisson(scale * x, rng) as f64 / scale - x
    };
    let mut out = target.clone();
    let n = target.pixel_count();
    let channels = target.channels();
    if spec.gray && channels == 3 {
        let gray = rgb_to_gray(signal)?;
        for i in 0..n {
            let noise = noise_of(gray.data()[i], rng);
            for c in 0..channels {
                let v = &mut out.data_mut()[c * n + i];
                *v = clamp01((f64::from(*v) + noise) as f32);
            }
        }
    } else {
        for i in 0..n {
            for c in 0..channels {
                let noise = noise_of(signal.data()[c * n + i], rng);
                let v = &mut out.data_mut()[c * n + i];
                *v = clamp01((f64::from(*v) + noise) as f32);
            }
        }
    }
    Ok(out)
}

/// Exact Poisson variate: sequential inversion below rate 30, Hörmann's
/// PTRS transformed rejection above.
pub fn sample_poisson(rate: f64, rng: &mut RngStream) -> u64 {
    if rate <= 0.0 || !rate.is_finite() {
        return 0;
    }
    if rate < 30.0 {
        poisson_inversion(rate, rng)
    } else {
        poisson_ptrs(rate, rng)
    }
}

fn poisson_inversion(rate: f64, rng: &mut RngStream) -> u64 {
    let mut p = (-rate).exp();
    let mut cdf = p;
    let u = rng.uniform();
    let mut k = 0u64;
    // The tail beyond 10 * (rate + 10) has negligible mass for rate < 30.
    while u > cdf && k < 1000 {
        k += 1;
        p *= rate / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs(rate: f64, rng: &mut RngStream) -> u64 {
    let slam = rate.sqrt();
    let loglam = rate.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + rate + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -rate + k * loglam - libm::lgamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}
