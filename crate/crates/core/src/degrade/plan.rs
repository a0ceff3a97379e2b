use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isp::{CameraModel, IspContext, SensorNoiseParams};
use crate::jpeg::JpegSpec;
use crate::noise::{GaussianSpec, PoissonSpec};
use crate::resize::ResizeSpec;
use crate::rng::{PathSegment, RngStream};

use super::config::DegradeConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Gaussian,
    Poisson,
    Speckle,
    Jpeg,
    Sensor,
    Resize,
    Crop,
}

impl StageKind {
    /// Candidate stages of one round, in inclusion-draw order.
    pub const CANDIDATES: [StageKind; 6] = [
        StageKind::Gaussian,
        StageKind::Jpeg,
        StageKind::Poisson,
        StageKind::Speckle,
        StageKind::Sensor,
        StageKind::Resize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Gaussian => "gaussian",
            StageKind::Poisson => "poisson",
            StageKind::Speckle => "speckle",
            StageKind::Jpeg => "jpeg",
            StageKind::Sensor => "sensor",
            StageKind::Resize => "resize",
            StageKind::Crop => "crop",
        }
    }
}

/// Everything the sensor stage needs, including the camera itself so a
/// manifest replays without the generating config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub camera: CameraModel,
    pub context: IspContext,
    pub noise: SensorNoiseParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropSpec {
    pub y: usize,
    pub x: usize,
    pub height: usize,
    pub width: usize,
}

impl CropSpec {
    pub fn fits(&self, dims: (usize, usize)) -> bool {
        self.height > 0 && self.width > 0 && self.y + self.height <= dims.0 && self.x + self.width <= dims.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum StageParams {
    Gaussian(GaussianSpec),
    Poisson(PoissonSpec),
    Speckle(GaussianSpec),
    Jpeg(JpegSpec),
    Sensor(SensorSpec),
    Resize(ResizeSpec),
    Crop(CropSpec),
}

impl StageParams {
    pub fn kind(&self) -> StageKind {
        match self {
            StageParams::Gaussian(_) => StageKind::Gaussian,
            StageParams::Poisson(_) => StageKind::Poisson,
            StageParams::Speckle(_) => StageKind::Speckle,
            StageParams::Jpeg(_) => StageKind::Jpeg,
            StageParams::Sensor(_) => StageKind::Sensor,
            StageParams::Resize(_) => StageKind::Resize,
            StageParams::Crop(_) => StageKind::Crop,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            StageParams::Gaussian(s) | StageParams::Speckle(s) => s.validate(),
            StageParams::Poisson(s) => s.validate(),
            StageParams::Jpeg(s) => s.validate(),
            StageParams::Sensor(s) => {
                s.camera.validate()?;
                s.context.validate_for(&s.camera)?;
                s.noise.validate()
            }
            StageParams::Resize(s) => s.validate(),
            StageParams::Crop(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    /// Degradation round (1-based); 0 for the final crop, which follows all
    /// rounds.
    pub round: u32,
    pub stage: StageParams,
    /// Stream the stage's execution-time noise is drawn from; for
    /// deterministic stages, the stream its parameters were sampled from.
    pub rng_path: Vec<PathSegment>,
}

impl StageRecord {
    pub fn kind(&self) -> StageKind {
        self.stage.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceInfo {
    pub id: String,
    pub height: usize,
    pub width: usize,
    /// Window of the original file the HQ image was cut from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hq_crop: Option<CropSpec>,
}

/// A fully sampled degradation sequence; executing it draws no new
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationPlan {
    pub schema_version: u32,
    pub master_seed: u64,
    /// Path of the stream the plan was sampled from.
    pub rng_path: Vec<PathSegment>,
    pub source: SourceInfo,
    pub rounds: u32,
    pub stages: Vec<StageRecord>,
}

impl DegradationPlan {
    pub fn crop(&self) -> Option<&CropSpec> {
        match self.stages.last().map(|s| &s.stage) {
            Some(StageParams::Crop(c)) => Some(c),
            _ => None,
        }
    }

    pub fn count(&self, kind: StageKind) -> usize {
        self.stages.iter().filter(|s| s.kind() == kind).count()
    }

    pub fn kinds(&self) -> Vec<StageKind> {
        self.stages.iter().map(StageRecord::kind).collect()
    }

    /// Checks structure, parameter ranges and geometry.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.rounds == 0 {
            return Err(Error::PlanInvariant("rounds must be at least 1".into()));
        }
        if self.count(StageKind::Crop) != 1 || self.crop().is_none() {
            return Err(Error::PlanInvariant("plan must end with exactly one crop stage".into()));
        }
        for kind in StageKind::CANDIDATES {
            let n = self.count(kind);
            if n > self.rounds as usize {
                return Err(Error::PlanInvariant(format!(
                    "{n} {} stages exceed {} rounds",
                    kind.name(),
                    self.rounds
                )));
            }
        }
        let mut dims = (self.source.height, self.source.width);
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::PlanInvariant("empty source geometry".into()));
        }
        for (i, rec) in self.stages.iter().enumerate() {
            let expected_round = rec.kind() == StageKind::Crop;
            if expected_round != (rec.round == 0) || rec.round > self.rounds {
                return Err(Error::PlanInvariant(format!(
                    "stage {i} ({}) has invalid round {}",
                    rec.kind().name(),
                    rec.round
                )));
            }
            rec.stage
                .validate()
                .map_err(|e| Error::PlanInvariant(format!("stage {i} ({}): {e}", rec.kind().name())))?;
            match &rec.stage {
                StageParams::Resize(spec) => {
                    if !spec.matches_input(dims) {
                        return Err(Error::PlanInvariant(format!(
                            "stage {i}: resize output {}x{} inconsistent with input {}x{}",
                            spec.out_height, spec.out_width, dims.0, dims.1
                        )));
                    }
                    dims = (spec.out_height, spec.out_width);
                }
                StageParams::Crop(c) if !c.fits(dims) => {
                    return Err(Error::PlanInvariant(format!(
                        "crop {c:?} does not fit {}x{}",
                        dims.0, dims.1
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plans always serialize")
    }

    /// Parses and validates a manifest.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema("missing schema_version".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: SCHEMA_VERSION,
            });
        }
        let plan: DegradationPlan =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Samples a plan for a source image of `source_dims`.
///
/// For each round every candidate stage is included with its configured
/// probability; the included stages are shuffled jointly across rounds,
/// their parameters sampled in execution order (so resize geometry is
/// known), and a crop placed uniformly in the final geometry.
pub fn sample_plan(
    rng: &RngStream,
    source_id: &str,
    source_dims: (usize, usize),
    cfg: &DegradeConfig,
) -> Result<DegradationPlan> {
    cfg.validate()?;
    let mut inclusion = rng.fork("inclusion", 0);
    let mut slots = Vec::new();
    for round in 1..=cfg.rounds {
        for kind in StageKind::CANDIDATES {
            if inclusion.bernoulli(cfg.probabilities.get(kind)) {
                slots.push((kind, round));
            }
        }
    }
    rng.fork("shuffle", 0).shuffle(&mut slots);

    let mut dims = source_dims;
    let mut stages = Vec::with_capacity(slots.len() + 1);
    for (i, (kind, round)) in slots.into_iter().enumerate() {
        let stage_rng = rng.fork("stage", i as u64);
        let mut p = stage_rng.fork("params", 0);
        let noise_path = stage_rng.fork("noise", 0).path().to_vec();
        let (stage, rng_path) = match kind {
            StageKind::Gaussian => (StageParams::Gaussian(cfg.gaussian.sample(&mut p)), noise_path),
            StageKind::Jpeg => (StageParams::Jpeg(cfg.jpeg.sample(&mut p)), p.path().to_vec()),
            StageKind::Poisson => (StageParams::Poisson(cfg.poisson.sample(&mut p)), noise_path),
            StageKind::Speckle => (StageParams::Speckle(cfg.speckle.sample(&mut p)), noise_path),
            StageKind::Sensor => {
                let idx = p.int_inclusive(0, cfg.cameras.len() as u64 - 1) as usize;
                let camera = cfg.cameras[idx].clone();
                let context = cfg.sensor.sample_context(&camera, &mut p);
                let noise = cfg.sensor.sample_noise(&mut p);
                (
                    StageParams::Sensor(SensorSpec {
                        camera,
                        context,
                        noise,
                    }),
                    noise_path,
                )
            }
            StageKind::Resize => {
                let spec = cfg.resize.sample(&mut p, dims);
                dims = (spec.out_height, spec.out_width);
                (StageParams::Resize(spec), p.path().to_vec())
            }
            StageKind::Crop => unreachable!("crop is not a candidate stage"),
        };
        stages.push(StageRecord {
            round,
            stage,
            rng_path,
        });
    }

    let patch = cfg.patch_size;
    if dims.0 < patch || dims.1 < patch {
        return Err(Error::ImageTooSmall {
            height: dims.0,
            width: dims.1,
            min: patch,
        });
    }
    let mut crop_rng = rng.fork("crop", 0);
    let crop = CropSpec {
        y: crop_rng.int_inclusive(0, (dims.0 - patch) as u64) as usize,
        x: crop_rng.int_inclusive(0, (dims.1 - patch) as u64) as usize,
        height: patch,
        width: patch,
    };
    stages.push(StageRecord {
        round: 0,
        stage: StageParams::Crop(crop),
        rng_path: crop_rng.path().to_vec(),
    });

    Ok(DegradationPlan {
        schema_version: SCHEMA_VERSION,
        master_seed: rng.master_seed(),
        rng_path: rng.path().to_vec(),
        source: SourceInfo {
            id: source_id.to_string(),
            height: source_dims.0,
            width: source_dims.1,
            hq_crop: None,
        },
        rounds: cfg.rounds,
        stages,
    })
}
