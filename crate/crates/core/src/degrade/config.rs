use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isp::{CameraModel, SensorSampler, ToneCurve};
use crate::jpeg::JpegSampler;
use crate::noise::{GaussianSampler, PoissonSampler, SpeckleSampler};
use crate::resize::ResizeSampler;

use super::plan::StageKind;

/// Per-round inclusion probability of each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageProbabilities {
    pub gaussian: f64,
    pub jpeg: f64,
    pub poisson: f64,
    pub speckle: f64,
    pub sensor: f64,
    pub resize: f64,
}

impl Default for StageProbabilities {
    fn default() -> Self {
        StageProbabilities {
            gaussian: 1.0,
            jpeg: 1.0,
            poisson: 0.5,
            speckle: 0.5,
            sensor: 0.5,
            resize: 0.5,
        }
    }
}

impl StageProbabilities {
    pub fn get(&self, kind: StageKind) -> f64 {
        match kind {
            StageKind::Gaussian => self.gaussian,
            StageKind::Jpeg => self.jpeg,
            StageKind::Poisson => self.poisson,
            StageKind::Speckle => self.speckle,
            StageKind::Sensor => self.sensor,
            StageKind::Resize => self.resize,
            StageKind::Crop => 1.0,
        }
    }
}

/// How the HQ patch is cut from a larger input image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HqCrop {
    #[default]
    Random,
    Center,
}

/// Every tunable of plan sampling and dataset preparation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    pub probabilities: StageProbabilities,
    /// Number of times the candidate stage set is drawn before shuffling.
    pub rounds: u32,
    pub gaussian: GaussianSampler,
    pub speckle: SpeckleSampler,
    pub poisson: PoissonSampler,
    pub jpeg: JpegSampler,
    pub sensor: SensorSampler,
    pub resize: ResizeSampler,
    pub cameras: Vec<CameraModel>,
    /// Camera name to tone-curve file; relative paths resolve against the
    /// config file's directory.
    pub tone_curve_files: BTreeMap<String, PathBuf>,
    pub hq_size: usize,
    pub patch_size: usize,
    pub hq_crop: HqCrop,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        DegradeConfig {
            probabilities: StageProbabilities::default(),
            rounds: 2,
            gaussian: GaussianSampler::default(),
            speckle: SpeckleSampler::default(),
            poisson: PoissonSampler::default(),
            jpeg: JpegSampler::default(),
            sensor: SensorSampler::default(),
            resize: ResizeSampler::default(),
            cameras: CameraModel::builtin(),
            tone_curve_files: BTreeMap::new(),
            hq_size: 544,
            patch_size: 128,
            hq_crop: HqCrop::Random,
        }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.probabilities;
        for (name, v) in [
            ("gaussian", p.gaussian),
            ("jpeg", p.jpeg),
            ("poisson", p.poisson),
            ("speckle", p.speckle),
            ("sensor", p.sensor),
            ("resize", p.resize),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} probability {v} outside [0, 1]"
                )));
            }
        }
        if self.rounds == 0 {
            return Err(Error::InvalidParameter("rounds must be at least 1".into()));
        }
        self.gaussian.validate()?;
        self.speckle.validate()?;
        self.poisson.validate()?;
        self.jpeg.validate()?;
        self.sensor.validate()?;
        self.resize.validate()?;
        if self.cameras.is_empty() && p.sensor > 0.0 {
            return Err(Error::InvalidParameter("sensor stage enabled but no cameras configured".into()));
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            cam.validate()?;
            if self.cameras[..i].iter().any(|c| c.name == cam.name) {
                return Err(Error::InvalidCamera(format!("duplicate camera name `{}`", cam.name)));
            }
        }
        if let Some(name) = self
            .tone_curve_files
            .keys()
            .find(|n| !self.cameras.iter().any(|c| &c.name == *n))
        {
            return Err(Error::InvalidCamera(format!("tone curve file for unknown camera `{name}`")));
        }
        if self.patch_size == 0 || self.hq_size < self.patch_size {
            return Err(Error::InvalidParameter(format!(
                "need 0 < patch_size <= hq_size, got {} and {}",
                self.patch_size, self.hq_size
            )));
        }
        Ok(())
    }

    /// Reads a JSON config; missing fields take their defaults and tone
    /// curve files are loaded into the camera models.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: DegradeConfig =
            serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.resolve_tone_curves(path.parent().unwrap_or(Path::new(".")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads every entry of `tone_curve_files` into its camera and clears
    /// the map.
    pub fn resolve_tone_curves(&mut self, base: &Path) -> Result<()> {
        for (name, file) in std::mem::take(&mut self.tone_curve_files) {
            let cam = self
                .cameras
                .iter_mut()
                .find(|c| c.name == name)
                .ok_or_else(|| Error::InvalidCamera(format!("tone curve file for unknown camera `{name}`")))?;
            cam.tone_curve = ToneCurve::load(base.join(file))?;
        }
        Ok(())
    }
}
