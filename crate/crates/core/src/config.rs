//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "scene": { "synthetic": { "size_px": 64, "extent_mm": 128.0, "spacing_mm": 20.0 } },
//!   "psf": { "na": 0.4 },
//!   "sweep": { "m_values": [3, 5, 9, 17], "na_values": [0.2, 0.4, 0.6, 0.8] },
//!   "angular": { "n_xi": 9, "n_eta": 9 },
//!   "filter": { "sigma_smooth": 0.5, "stencil": "four-neighbor" },
//!   "outputs": { "dir": "out", "epi": { "y_frac": 0.5, "eta": 0.0 } }
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focus::FilterParams;
use crate::io::LoadOptions;
use crate::scene::SyntheticScene;
use crate::types::{AngularSampling, Validate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Synthetic(SyntheticScene),
    StackDir {
        path: PathBuf,
        #[serde(default)]
        crop: Option<[usize; 2]>,
        #[serde(default)]
        downsample: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfConfig {
    /// NA used by `simulate`, `reconstruct` and `depthmap`; `sweep` uses `sweep.na_values`.
    pub na: f64,
    /// Defaults to the scene pixel pitch.
    #[serde(default)]
    pub pixel_pitch_mm: Option<f64>,
    #[serde(default = "one")]
    pub sigma_coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub m_values: Vec<usize>,
    pub na_values: Vec<f64>,
    pub depth_range_mm: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m_values: vec![3, 5, 9, 17],
            na_values: vec![0.2, 0.4, 0.6, 0.8],
            depth_range_mm: [-20.0, 20.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngularConfig {
    pub n_xi: usize,
    pub n_eta: usize,
    /// Fixed `ξ_max = η_max`; when absent the angular range follows the NA.
    pub xi_max: Option<f64>,
}

impl Default for AngularConfig {
    fn default() -> Self {
        Self {
            n_xi: 9,
            n_eta: 9,
            xi_max: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpiOutput {
    pub y_frac: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub epi: Option<EpiOutput>,
    pub refocus_depths_mm: Vec<f64>,
    pub psnr_csv: bool,
    pub depth_map: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            epi: Some(EpiOutput { y_frac: 0.5, eta: 0.0 }),
            refocus_depths_mm: Vec::new(),
            psnr_csv: true,
            depth_map: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scene: SceneSource,
    pub psf: PsfConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub angular: AngularConfig,
    #[serde(default)]
    pub filter: FilterParams,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Upper bound on concurrently running sweep cells; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_na(name: &str, na: f64) -> Result<()> {
    if !(na > 0.0 && na < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {na}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let SceneSource::StackDir { path, .. } = &mut self.scene {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if self.outputs.dir.is_relative() {
            self.outputs.dir = base.join(&self.outputs.dir);
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        match &self.scene {
            SceneSource::StackDir { crop, downsample, .. } => LoadOptions {
                crop: *crop,
                downsample: *downsample,
            },
            SceneSource::Synthetic(_) => LoadOptions::default(),
        }
    }

    /// Angular sampling used for a camera with numerical aperture `na`.
    pub fn angular_for(&self, na: f64) -> Result<AngularSampling> {
        let max = self.angular.xi_max.unwrap_or(na);
        AngularSampling::new(max, self.angular.n_xi, max, self.angular.n_eta)
    }
}

impl Validate for ExperimentConfig {
    fn validate(&self) -> Result<()> {
        match &self.scene {
            SceneSource::Synthetic(s) => {
                if s.size_px == 0 {
                    return Err(invalid("scene.synthetic.size_px must be positive"));
                }
                for (name, v) in [
                    ("extent_mm", s.extent_mm),
                    ("spacing_mm", s.spacing_mm),
                    ("texture_cell_mm", s.texture_cell_mm),
                ] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(invalid(format!("scene.synthetic.{name} must be positive, got {v}")));
                    }
                }
                if let Some(p) = self.psf.pixel_pitch_mm {
                    if (p - s.pixel_pitch()).abs() > 1e-12 * s.pixel_pitch() {
                        return Err(invalid(format!(
                            "psf.pixel_pitch_mm {p} differs from the scene pitch {}",
                            s.pixel_pitch()
                        )));
                    }
                }
            }
            SceneSource::StackDir { path, crop, .. } => {
                if !path.is_dir() {
                    return Err(invalid(format!("scene.stack_dir.path {} does not exist", path.display())));
                }
                if let Some([w, h]) = crop {
                    if *w == 0 || *h == 0 {
                        return Err(invalid("scene.stack_dir.crop must be positive"));
                    }
                }
            }
        }
        check_na("psf.na", self.psf.na)?;
        if let Some(p) = self.psf.pixel_pitch_mm {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid(format!("psf.pixel_pitch_mm must be positive, got {p}")));
            }
        }
        let k = self.psf.sigma_coefficient;
        if !(k.is_finite() && k >= 0.0) {
            return Err(invalid(format!("psf.sigma_coefficient must be >= 0, got {k}")));
        }

        let sweep = &self.sweep;
        if sweep.m_values.is_empty() || sweep.na_values.is_empty() {
            return Err(invalid("sweep.m_values and sweep.na_values must be non-empty"));
        }
        for (i, &m) in sweep.m_values.iter().enumerate() {
            if m == 0 {
                return Err(invalid("sweep.m_values entries must be >= 1"));
            }
            if sweep.m_values[..i].contains(&m) {
                return Err(invalid(format!("sweep.m_values lists {m} twice")));
            }
        }
        for (i, &na) in sweep.na_values.iter().enumerate() {
            check_na("sweep.na_values entries", na)?;
            if sweep.na_values[..i].contains(&na) {
                return Err(invalid(format!("sweep.na_values lists {na} twice")));
            }
        }
        let [lo, hi] = sweep.depth_range_mm;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(invalid(format!("sweep.depth_range_mm must satisfy lo < hi, got [{lo}, {hi}]")));
        }

        let ang = &self.angular;
        if ang.n_xi == 0 || ang.n_eta == 0 {
            return Err(invalid("angular.n_xi and angular.n_eta must be >= 1"));
        }
        if let Some(x) = ang.xi_max {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(format!("angular.xi_max must be positive, got {x}")));
            }
        }
        self.filter
            .validate()
            .map_err(|e| invalid(format!("filter: {e}")))?;

        if let Some(epi) = &self.outputs.epi {
            if !(0.0..=1.0).contains(&epi.y_frac) {
                return Err(invalid(format!("outputs.epi.y_frac must lie in [0, 1], got {}", epi.y_frac)));
            }
            if !epi.eta.is_finite() {
                return Err(invalid("outputs.epi.eta must be finite"));
            }
        }
        if let Some(z) = self.outputs.refocus_depths_mm.iter().find(|z| !z.is_finite()) {
            return Err(invalid(format!("outputs.refocus_depths_mm contains {z}")));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "scene": { "synthetic": { "size_px": 32, "extent_mm": 64.0, "spacing_mm": 20.0 } },
                                "psf": { "na": 0.4 } }"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_json(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.sweep.m_values, vec![3, 5, 9, 17]);
        assert_eq!(cfg.angular.n_xi, 9);
        assert_eq!(cfg.psf.sigma_coefficient, 1.0);
        assert_eq!(cfg.outputs.dir, PathBuf::from("/tmp/out"));
        assert_eq!(cfg.filter, FilterParams::default());
        let ang = cfg.angular_for(0.6).unwrap();
        assert_eq!((ang.xi_max, ang.eta_max), (0.6, 0.6));
    }

    fn rejects(patch: &str, needle: &str) {
        let mut value: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let extra: serde_json::Value = serde_json::from_str(patch).unwrap();
        for (k, v) in extra.as_object().unwrap() {
            value[k] = v.clone();
        }
        let err = ExperimentConfig::from_json(&value.to_string(), Path::new("/tmp")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)), "{msg}");
        assert!(msg.contains(needle), "{msg} lacks {needle}");
    }

    #[test]
    fn violations_name_the_field() {
        rejects(r#"{"psf": {"na": 1.5}}"#, "psf.na");
        rejects(r#"{"sweep": {"m_values": [3, 3]}}"#, "sweep.m_values");
        rejects(r#"{"sweep": {"na_values": [0.0]}}"#, "sweep.na_values");
        rejects(r#"{"sweep": {"depth_range_mm": [5.0, -5.0]}}"#, "depth_range_mm");
        rejects(r#"{"angular": {"n_xi": 0}}"#, "angular.n_xi");
        rejects(r#"{"filter": {"sigma_smooth": -1.0}}"#, "sigma_smooth");
        rejects(r#"{"scene": {"stack_dir": {"path": "/no/such/dir"}}}"#, "stack_dir.path");
        rejects(r#"{"psf": {"na": 0.4, "pixel_pitch_mm": 3.0}}"#, "pixel_pitch_mm");
        rejects(r#"{"workers": 0}"#, "workers");
    }

    #[test]
    fn stencil_accepts_short_names() {
        let text = MINIMAL.replace(r#""psf""#, r#""filter": {"stencil": "8"}, "psf""#);
        let cfg = ExperimentConfig::from_json(&text, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.filter.stencil, crate::convolve::LaplacianStencil::EightNeighbor);
        assert_eq!(cfg.filter.sigma_smooth, 2.0);
    }
}
