//! Experiment driver shared by the CLI subcommands.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backprojection::reconstruct;
use crate::capture::{capture, capture_sweep_plan, PsfModel};
use crate::config::{ExperimentConfig, SceneSource};
use crate::error::{Error, Result};
use crate::focus::{focus_filter, FilterParams};
use crate::io::{load_stack, save_depth_map_png, save_image_png, save_light_field, save_stack, BitDepth};
use crate::metrics::psnr;
use crate::render::{extract_epi, refocus};
use crate::scene::exact_light_field;
use crate::types::{AngularSampling, FocalStack, LightField4D, ObjectScene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Conventional,
    Filtered,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Conventional, Method::Filtered];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Conventional => "conventional",
            Method::Filtered => "filtered",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Method::Conventional),
            "filtered" => Ok(Method::Filtered),
            _ => Err(Error::Config(format!("unknown method {s:?}, expected conventional or filtered"))),
        }
    }
}

/// Back-projects `stack`, optionally after focus filtering.
pub fn reconstruct_with(
    method: Method,
    stack: &FocalStack,
    filter: &FilterParams,
    angular: &AngularSampling,
) -> Result<LightField4D> {
    match method {
        Method::Conventional => reconstruct(stack, angular),
        Method::Filtered => {
            let (sparse, _) = focus_filter(stack, filter)?;
            reconstruct(&sparse, angular)
        }
    }
}

pub fn synthetic_scene(cfg: &ExperimentConfig) -> Result<ObjectScene> {
    match &cfg.scene {
        SceneSource::Synthetic(s) => s.three_plane(),
        SceneSource::StackDir { .. } => Err(Error::Config(
            "this command needs a synthetic scene; scene.stack_dir provides no ground truth".into(),
        )),
    }
}

pub fn psf_for(cfg: &ExperimentConfig, scene: &ObjectScene, na: f64) -> Result<PsfModel> {
    let pitch = cfg.psf.pixel_pitch_mm.unwrap_or(scene.pixel_pitch());
    PsfModel::new(na, pitch)?.with_sigma_coefficient(cfg.psf.sigma_coefficient)
}

/// `m` captures of `scene` evenly spread over the configured depth range.
pub fn simulate_stack(cfg: &ExperimentConfig, scene: &ObjectScene, na: f64, m: usize) -> Result<FocalStack> {
    let depths = capture_sweep_plan(cfg.sweep.depth_range_mm, m)?;
    capture(scene, &psf_for(cfg, scene, na)?, &depths)
}

/// The stack a single-run command works on: the loaded directory, or a
/// simulated capture with `m` images (default: the first sweep entry) at `psf.na`.
pub fn input_stack(cfg: &ExperimentConfig, m: Option<usize>) -> Result<FocalStack> {
    match &cfg.scene {
        SceneSource::StackDir { path, .. } => load_stack(path, &cfg.load_options()),
        SceneSource::Synthetic(_) => {
            let scene = synthetic_scene(cfg)?;
            simulate_stack(cfg, &scene, cfg.psf.na, m.unwrap_or(cfg.sweep.m_values[0]))
        }
    }
}

/// Writes `scene/` (the clear slices), `stack_M{m}/` for every sweep entry and
/// `exact.lf4d`, all at `psf.na`. Returns the written paths.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let scene = synthetic_scene(cfg)?;
    let dir = &cfg.outputs.dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let slices = FocalStack::new(scene.slices().to_vec(), scene.depths_mm().to_vec())?;
    save_stack(&slices, &dir.join("scene"))?;
    written.push(dir.join("scene"));
    for &m in &cfg.sweep.m_values {
        let out = dir.join(format!("stack_M{m}"));
        save_stack(&simulate_stack(cfg, &scene, cfg.psf.na, m)?, &out)?;
        written.push(out);
    }
    let exact = exact_light_field(&scene, &cfg.angular_for(cfg.psf.na)?)?;
    let path = dir.join("exact.lf4d");
    save_light_field(&exact, &path)?;
    written.push(path);
    Ok(written)
}

/// PSNR of both reconstructions for one `(M, NA)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "NA")]
    pub na: f64,
    pub conventional_db: f64,
    pub filtered_db: f64,
}

impl CellResult {
    pub fn psnr_db(&self, method: Method) -> f64 {
        match method {
            Method::Conventional => self.conventional_db,
            Method::Filtered => self.filtered_db,
        }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    method: &'a str,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "NA")]
    na: f64,
    psnr_db: f64,
}

fn cell_dir(root: &Path, m: usize, na: f64) -> PathBuf {
    root.join("cells").join(format!("NA{na}_M{m}"))
}

fn depth_label(z: f64) -> String {
    format!("{z}").replace('-', "m")
}

fn run_cell(cfg: &ExperimentConfig, scene: &ObjectScene, m: usize, na: f64) -> Result<CellResult> {
    let angular = cfg.angular_for(na)?;
    let exact = exact_light_field(scene, &angular)?;
    let stack = simulate_stack(cfg, scene, na, m)?;
    let conventional = reconstruct(&stack, &angular)?;
    let (sparse, map) = focus_filter(&stack, &cfg.filter)?;
    let filtered = reconstruct(&sparse, &angular)?;
    let result = CellResult {
        m,
        na,
        conventional_db: psnr(&conventional, &exact)?,
        filtered_db: psnr(&filtered, &exact)?,
    };

    let dir = cell_dir(&cfg.outputs.dir, m, na);
    fs::create_dir_all(&dir)?;
    let lfs = [("exact", &exact), ("conventional", &conventional), ("filtered", &filtered)];
    if let Some(epi) = &cfg.outputs.epi {
        for (name, lf) in lfs {
            save_image_png(&extract_epi(lf, epi.y_frac, epi.eta)?, &dir.join(format!("epi_{name}.png")), BitDepth::Sixteen)?;
        }
    }
    for &z in &cfg.outputs.refocus_depths_mm {
        for (name, lf) in lfs {
            let path = dir.join(format!("refocus_{name}_z{}.png", depth_label(z)));
            save_image_png(&refocus(lf, z)?, &path, BitDepth::Sixteen)?;
        }
    }
    if cfg.outputs.depth_map {
        save_depth_map_png(&map, &dir.join("depth_map.png"))?;
    }
    // written last so its presence marks a completed cell
    let mut out = BufWriter::new(File::create(dir.join("result.json"))?);
    serde_json::to_writer_pretty(&mut out, &result)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(result)
}

/// Runs every `(NA, M)` cell, concurrently up to `cfg.workers`, and writes
/// `psnr.csv` with rows ordered by method, then NA, then M.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let scene = synthetic_scene(cfg)?;
    fs::create_dir_all(&cfg.outputs.dir)?;
    let cells: Vec<(usize, f64)> = cfg
        .sweep
        .na_values
        .iter()
        .flat_map(|&na| cfg.sweep.m_values.iter().map(move |&m| (m, na)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, na)| run_cell(cfg, &scene, m, na))
            .collect::<Result<Vec<_>>>()
    })?;

    if cfg.outputs.psnr_csv {
        let mut writer = csv::Writer::from_path(cfg.outputs.dir.join("psnr.csv"))?;
        for method in Method::ALL {
            for r in &results {
                writer.serialize(CsvRow {
                    method: method.as_str(),
                    m: r.m,
                    na: r.na,
                    psnr_db: r.psnr_db(method),
                })?;
            }
        }
        writer.flush()?;
    }
    Ok(results)
}

/// Depth index map of the configured input stack, written as a 16-bit PNG.
/// Returns the fraction of pixels with a nonzero focus response.
pub fn run_depthmap(cfg: &ExperimentConfig, m: Option<usize>, out: &Path) -> Result<f64> {
    let stack = input_stack(cfg, m)?;
    let (_, map) = focus_filter(&stack, &cfg.filter)?;
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    save_depth_map_png(&map, out)?;
    Ok(map.covered_fraction())
}

/// Reconstructs the configured input stack with `method` and writes an LF4D file.
pub fn run_reconstruct(cfg: &ExperimentConfig, method: Method, m: Option<usize>, out: &Path) -> Result<LightField4D> {
    let stack = input_stack(cfg, m)?;
    let lf = reconstruct_with(method, &stack, &cfg.filter, &cfg.angular_for(cfg.psf.na)?)?;
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    save_light_field(&lf, out)?;
    Ok(lf)
}
