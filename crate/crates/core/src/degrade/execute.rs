use crate::error::{Error, Result};
use crate::image::{clip01, Image};
use crate::isp::sensor_noise_stage_with;
use crate::jpeg::jpeg_roundtrip;
use crate::noise::{add_gaussian, add_poisson, add_speckle};
use crate::resize::resize_pair;
use crate::rng::RngStream;

use super::plan::{DegradationPlan, StageKind, StageParams, StageRecord};

/// A degraded patch, its clean twin, and the plan that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub noisy: Image,
    pub clean: Image,
    pub plan: DegradationPlan,
}

/// What one executed stage did to the two branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: StageKind,
    pub wrote_noisy: bool,
    pub wrote_clean: bool,
    pub noisy_dims: (usize, usize),
    pub clean_dims: (usize, usize),
}

pub fn execute_plan(hq: &Image, plan: &DegradationPlan) -> Result<PairSample> {
    execute_plan_traced(hq, plan, &mut Vec::new())
}

/// Runs the plan, appending one [`TraceEvent`] per stage.
pub fn execute_plan_traced(hq: &Image, plan: &DegradationPlan, trace: &mut Vec<TraceEvent>) -> Result<PairSample> {
    plan.validate()?;
    hq.require_channels(3)?;
    if (hq.height(), hq.width()) != (plan.source.height, plan.source.width) {
        return Err(Error::PlanMismatch(format!(
            "plan expects a {}x{} source, image is {}x{}",
            plan.source.height,
            plan.source.width,
            hq.height(),
            hq.width()
        )));
    }
    let mut noisy = hq.clone();
    let mut clean = hq.clone();
    for rec in &plan.stages {
        let (new_noisy, new_clean) = run_stage(rec, &noisy, &clean, plan.master_seed)?;
        let (wrote_noisy, wrote_clean) = (new_noisy.is_some(), new_clean.is_some());
        if let Some(n) = new_noisy {
            noisy = clip01(&n);
        }
        if let Some(c) = new_clean {
            clean = clip01(&c);
        }
        assert_eq!(noisy.dims(), clean.dims(), "branches diverged at {:?}", rec.kind());
        trace.push(TraceEvent {
            kind: rec.kind(),
            wrote_noisy,
            wrote_clean,
            noisy_dims: (noisy.height(), noisy.width()),
            clean_dims: (clean.height(), clean.width()),
        });
    }
    Ok(PairSample {
        noisy,
        clean,
        plan: plan.clone(),
    })
}

type StageOutput = (Option<Image>, Option<Image>);

fn run_stage(rec: &StageRecord, noisy: &Image, clean: &Image, master_seed: u64) -> Result<StageOutput> {
    let mut rng = RngStream::from_path(master_seed, rec.rng_path.clone());
    Ok(match &rec.stage {
        StageParams::Gaussian(spec) => (Some(add_gaussian(noisy, spec, &mut rng)?), None),
        StageParams::Jpeg(spec) => (Some(jpeg_roundtrip(noisy, spec)?), None),
        StageParams::Poisson(spec) => (Some(add_poisson(clean, noisy, spec, &mut rng)?), None),
        StageParams::Speckle(spec) => (Some(add_speckle(clean, noisy, spec, &mut rng)?), None),
        StageParams::Sensor(s) => {
            let (h, w, _) = noisy.dims();
            let (pad_y, pad_x) = (h % 2, w % 2);
            let n = noisy.pad_reflect(pad_y, pad_x)?;
            let c = clean.pad_reflect(pad_y, pad_x)?;
            let (n, c) = sensor_noise_stage_with(&n, &c, &s.camera, &s.context, &s.noise, &mut rng)?;
            (Some(n.crop(0, 0, h, w)?), Some(c.crop(0, 0, h, w)?))
        }
        StageParams::Resize(spec) => {
            let (n, c) = resize_pair(noisy, clean, spec)?;
            (Some(n), Some(c))
        }
        StageParams::Crop(c) => (
            Some(noisy.crop(c.y, c.x, c.height, c.width)?),
            Some(clean.crop(c.y, c.x, c.height, c.width)?),
        ),
    })
}

/// Parses a manifest and re-executes it on `hq`.
pub fn replay(hq: &Image, manifest: &[u8]) -> Result<PairSample> {
    let plan = DegradationPlan::from_json(manifest)?;
    execute_plan(hq, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::config::DegradeConfig;
    use crate::degrade::plan::{sample_plan, CropSpec, SourceInfo, SCHEMA_VERSION};
    use crate::resize::{ResizeKernel, ResizeSpec};

    fn hq(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 3, |c, y, x| {
            let v = ((x * 7 + y * 3 + c * 11) % 97) as f32 / 96.0;
            0.1 + 0.8 * v
        })
        .unwrap()
    }

    fn bare_plan(h: usize, w: usize, stages: Vec<StageRecord>) -> DegradationPlan {
        DegradationPlan {
            schema_version: SCHEMA_VERSION,
            master_seed: 0,
            rng_path: Vec::new(),
            source: SourceInfo {
                id: "test".into(),
                height: h,
                width: w,
                hq_crop: None,
            },
            rounds: 2,
            stages,
        }
    }

    fn crop_record(y: usize, x: usize, size: usize) -> StageRecord {
        StageRecord {
            round: 0,
            stage: StageParams::Crop(CropSpec {
                y,
                x,
                height: size,
                width: size,
            }),
            rng_path: Vec::new(),
        }
    }

    #[test]
    fn crop_only_plan_gives_identical_branches() {
        let img = hq(300, 280);
        let mut cfg = DegradeConfig::default();
        cfg.probabilities = serde_json::from_str(
            r#"{"gaussian":0,"jpeg":0,"poisson":0,"speckle":0,"sensor":0,"resize":0}"#,
        )
        .unwrap();
        let plan = sample_plan(&RngStream::new(4), "x", (300, 280), &cfg).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let out = execute_plan(&img, &plan).unwrap();
        let c = plan.crop().unwrap();
        assert_eq!(out.noisy, img.crop(c.y, c.x, 128, 128).unwrap());
        assert_eq!(out.noisy, out.clean);
    }

    #[test]
    fn unit_resize_then_crop_is_plain_crop() {
        let img = hq(200, 200);
        let resize = StageRecord {
            round: 1,
            stage: StageParams::Resize(ResizeSpec::new(ResizeKernel::Bicubic, 1.0, (200, 200)).unwrap()),
            rng_path: Vec::new(),
        };
        let plan = bare_plan(200, 200, vec![resize, crop_record(10, 20, 128)]);
        let out = execute_plan(&img, &plan).unwrap();
        assert_eq!(out.noisy, img.crop(10, 20, 128, 128).unwrap());
        assert_eq!(out.clean, out.noisy);
    }

    #[test]
    fn clean_branch_only_touched_by_geometry_and_tone() {
        let img = hq(544, 544);
        let mut cfg = DegradeConfig::default();
        cfg.probabilities.sensor = 1.0;
        cfg.probabilities.resize = 1.0;
        cfg.probabilities.poisson = 1.0;
        cfg.probabilities.speckle = 1.0;
        for seed in 0..3 {
            let plan = sample_plan(&RngStream::new(seed), "x", (544, 544), &cfg).unwrap();
            let mut trace = Vec::new();
            let out = execute_plan_traced(&img, &plan, &mut trace).unwrap();
            assert_eq!(trace.len(), plan.stages.len());
            for ev in &trace {
                assert_eq!(ev.noisy_dims, ev.clean_dims);
                assert!(ev.wrote_noisy);
                let geometric = matches!(ev.kind, StageKind::Resize | StageKind::Sensor | StageKind::Crop);
                assert_eq!(ev.wrote_clean, geometric, "{:?}", ev.kind);
            }
            assert_eq!(out.noisy.dims(), (128, 128, 3));
            assert_eq!(execute_plan(&img, &plan).unwrap(), out);
        }
    }

    #[test]
    fn sensor_stage_handles_odd_geometry() {
        let img = hq(545, 543);
        let mut cfg = DegradeConfig::default();
        cfg.probabilities.sensor = 1.0;
        cfg.probabilities.resize = 0.0;
        let plan = sample_plan(&RngStream::new(1), "odd", (545, 543), &cfg).unwrap();
        let out = execute_plan(&img, &plan).unwrap();
        assert_eq!(out.clean.dims(), (128, 128, 3));
    }

    #[test]
    fn replay_matches_and_mismatches_fail() {
        let img = hq(544, 544);
        let plan = sample_plan(&RngStream::new(8), "x", (544, 544), &DegradeConfig::default()).unwrap();
        let first = execute_plan(&img, &plan).unwrap();
        let again = replay(&img, plan.to_json().as_bytes()).unwrap();
        assert_eq!(first, again);
        assert!(matches!(execute_plan(&hq(500, 544), &plan), Err(Error::PlanMismatch(_))));
    }
}
