use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{load_png, save_png, Image};
use crate::rng::RngStream;

use super::config::{DegradeConfig, HqCrop};
use super::execute::execute_plan;
use super::plan::{sample_plan, CropSpec, DegradationPlan, StageKind};

#[derive(Debug, Clone)]
pub struct DatasetRequest {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    pub pairs_per_image: u64,
    pub config: DegradeConfig,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub master_seed: u64,
    pub images_found: usize,
    pub images_used: usize,
    pub skipped: Vec<String>,
    pub pairs_written: u64,
    pub stage_counts: BTreeMap<String, u64>,
    /// Average number of occurrences of each stage per plan.
    pub stage_means: BTreeMap<String, f64>,
}

/// Sorted `*.png` files directly inside `dir`.
pub fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let read_err = |source| Error::Read {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(read_err)? {
        let path = entry.map_err(read_err)?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn as_rgb(img: Image) -> Result<Image> {
    if img.channels() == 1 {
        img.gray_to_rgb()
    } else {
        Ok(img)
    }
}

/// Cuts the HQ square from an input image. `None` if the image is too small.
pub fn hq_window(
    dims: (usize, usize),
    cfg: &DegradeConfig,
    rng: &mut RngStream,
) -> Option<CropSpec> {
    let size = cfg.hq_size;
    if dims.0 < size || dims.1 < size {
        return None;
    }
    let (y, x) = match cfg.hq_crop {
        HqCrop::Center => ((dims.0 - size) / 2, (dims.1 - size) / 2),
        HqCrop::Random => (
            rng.int_inclusive(0, (dims.0 - size) as u64) as usize,
            rng.int_inclusive(0, (dims.1 - size) as u64) as usize,
        ),
    };
    Some(CropSpec {
        y,
        x,
        height: size,
        width: size,
    })
}

/// Recovers the HQ image a plan was generated from, given either that HQ
/// image itself or the original file it was cut from.
pub fn prepare_source(img: Image, plan: &DegradationPlan) -> Result<Image> {
    let img = as_rgb(img)?;
    let dims = (img.height(), img.width());
    if dims == (plan.source.height, plan.source.width) {
        return Ok(img);
    }
    match plan.source.hq_crop {
        Some(c) if c.fits(dims) => img.crop(c.y, c.x, c.height, c.width),
        _ => Err(Error::PlanMismatch(format!(
            "image is {}x{}, plan source is {}x{}",
            dims.0, dims.1, plan.source.height, plan.source.width
        ))),
    }
}

fn pair_name(prefix: &str, index: u64, ext: &str) -> String {
    format!("{prefix}_{index:04}.{ext}")
}

struct ImageJob {
    index: u64,
    name: String,
    hq: Image,
    window: CropSpec,
}

fn run_pair(job: &ImageJob, pair: u64, req: &DatasetRequest) -> Result<DegradationPlan> {
    let rng = RngStream::new(req.master_seed)
        .fork("image", job.index)
        .fork("pair", pair);
    let mut plan = sample_plan(&rng, &job.name, (job.hq.height(), job.hq.width()), &req.config)?;
    plan.source.hq_crop = Some(job.window);
    let sample = execute_plan(&job.hq, &plan)?;
    let out = &req.output_dir;
    let n = job.index * req.pairs_per_image + pair;
    save_png(&sample.noisy, out.join(pair_name("noisy", n, "png")))?;
    save_png(&sample.clean, out.join(pair_name("clean", n, "png")))?;
    let manifest_path = out.join(pair_name("manifest", n, "json"));
    std::fs::write(&manifest_path, plan.to_json()).map_err(|source| Error::Write {
        path: manifest_path,
        source,
    })?;
    Ok(plan)
}

/// Generates `pairs_per_image` pairs for every usable PNG in the input
/// directory. The pair `(i, k)` of input file `i` (in sorted order) is
/// written as index `i * pairs_per_image + k` and depends only on the seed,
/// the config and the input, never on the worker count.
pub fn generate_dataset(req: &DatasetRequest) -> Result<DatasetSummary> {
    req.config.validate()?;
    let files = list_pngs(&req.input_dir)?;
    std::fs::create_dir_all(&req.output_dir).map_err(|source| Error::Write {
        path: req.output_dir.clone(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(req.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;

    let root = RngStream::new(req.master_seed);
    let prepared: Vec<Result<Option<ImageJob>>> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let img = as_rgb(load_png(path)?)?;
                let mut rng = root.fork("hq", i as u64);
                let Some(window) = hq_window((img.height(), img.width()), &req.config, &mut rng) else {
                    return Ok(None);
                };
                let hq = img.crop(window.y, window.x, window.height, window.width)?;
                Ok(Some(ImageJob {
                    index: i as u64,
                    name,
                    hq,
                    window,
                }))
            })
            .collect()
    });

    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for (path, job) in files.iter().zip(prepared) {
        match job? {
            Some(job) => jobs.push(job),
            None => {
                warn!(
                    "skipping {}: smaller than {}x{}",
                    path.display(),
                    req.config.hq_size,
                    req.config.hq_size
                );
                skipped.push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
            }
        }
    }

    let tasks: Vec<(&ImageJob, u64)> = jobs
        .iter()
        .flat_map(|j| (0..req.pairs_per_image).map(move |k| (j, k)))
        .collect();
    let plans: Vec<DegradationPlan> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(job, k)| run_pair(job, k, req))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut stage_counts: BTreeMap<String, u64> = BTreeMap::new();
    for plan in &plans {
        for kind in plan.kinds() {
            *stage_counts.entry(kind.name().to_string()).or_default() += 1;
        }
    }
    for kind in StageKind::CANDIDATES {
        stage_counts.entry(kind.name().to_string()).or_default();
    }
    let stage_means = stage_counts
        .iter()
        .map(|(k, &v)| (k.clone(), if plans.is_empty() { 0.0 } else { v as f64 / plans.len() as f64 }))
        .collect();
    let summary = DatasetSummary {
        master_seed: req.master_seed,
        images_found: files.len(),
        images_used: jobs.len(),
        skipped,
        pairs_written: plans.len() as u64,
        stage_counts,
        stage_means,
    };
    let summary_path = req.output_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary always serializes");
    std::fs::write(&summary_path, json).map_err(|source| Error::Write {
        path: summary_path,
        source,
    })?;
    info!(
        "wrote {} pairs from {} of {} images",
        summary.pairs_written, summary.images_used, summary.images_found
    );
    Ok(summary)
}
