//! Synthetic multi-plane scenes and their exact light fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::shear_sum;
use crate::types::{AngularSampling, Image2D, LightField4D, ObjectScene, Validate};

/// Stacks three equally sized planes at depths `-spacing, 0, +spacing` mm.
pub fn make_three_plane_scene(images: [Image2D; 3], spacing_mm: f64) -> Result<ObjectScene> {
    if !(spacing_mm.is_finite() && spacing_mm > 0.0) {
        return Err(Error::NonMonotoneDepths(format!(
            "plane spacing must be positive, got {spacing_mm} mm"
        )));
    }
    ObjectScene::new(images.into(), vec![-spacing_mm, 0.0, spacing_mm])
}

/// Ground-truth light field on the plane `z = 0`:
/// `L(x, y, ξ, η) = Σ_n O(x + z_n ξ, y + z_n η, z_n)`.
///
/// Slices add transparently; there is no occlusion and no `1/N` normalisation.
pub fn exact_light_field(scene: &ObjectScene, angular: &AngularSampling) -> Result<LightField4D> {
    scene.validate()?;
    angular.validate()?;
    Ok(shear_sum(scene.slices(), scene.depths_mm(), angular, 1.0))
}

/// Geometry of a procedurally generated scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    /// Pixels along each side of the square slices.
    pub size_px: usize,
    /// Lateral extent of each slice in mm.
    pub extent_mm: f64,
    /// Distance between adjacent planes in mm.
    pub spacing_mm: f64,
    /// Edge length of one texture cell in mm.
    #[serde(default = "default_cell_mm")]
    pub texture_cell_mm: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_cell_mm() -> f64 {
    2.0
}

impl Default for SyntheticScene {
    fn default() -> Self {
        Self {
            size_px: 256,
            extent_mm: 128.0,
            spacing_mm: 20.0,
            texture_cell_mm: default_cell_mm(),
            seed: 0,
        }
    }
}

// Each plane fills one vertical third of the frame, so every pixel belongs to
// exactly one plane. Bounds are fractions of the extent, origin at the centre.
const THREE_PLANE_BANDS: [(f64, f64); 3] = [(-0.5, -1.0 / 6.0), (-1.0 / 6.0, 1.0 / 6.0), (1.0 / 6.0, 0.5)];

impl SyntheticScene {
    pub fn pixel_pitch(&self) -> f64 {
        self.extent_mm / self.size_px as f64
    }

    fn check(&self) -> Result<()> {
        if self.size_px == 0 {
            return Err(Error::InvalidRange("scene size must be positive".into()));
        }
        for (name, v) in [
            ("extent_mm", self.extent_mm),
            ("spacing_mm", self.spacing_mm),
            ("texture_cell_mm", self.texture_cell_mm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidRange(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Fills the band `[lo, hi)` with a blocky random texture in `[0.25, 1]`; black elsewhere.
    fn textured_band(&self, (lo, hi): (f64, f64), rng: &mut ChaCha8Rng) -> Result<Image2D> {
        let cells = (self.extent_mm / self.texture_cell_mm).ceil() as usize + 1;
        let table: Vec<f64> = (0..cells * cells)
            .map(|_| 0.25 + 0.75 * rng.random::<f64>())
            .collect();
        let n = self.size_px as f64;
        Image2D::from_fn(self.size_px, self.size_px, self.pixel_pitch(), |c, r| {
            let u = (c as f64 + 0.5) / n - 0.5;
            let v = (r as f64 + 0.5) / n - 0.5;
            if u < lo || u >= hi {
                return 0.0;
            }
            let ci = (((u + 0.5) * self.extent_mm) / self.texture_cell_mm) as usize;
            let cj = (((v + 0.5) * self.extent_mm) / self.texture_cell_mm) as usize;
            table[cj.min(cells - 1) * cells + ci.min(cells - 1)]
        })
    }

    /// Three textured planes at depths `-spacing, 0, +spacing`, occupying the
    /// left, middle and right thirds of the frame.
    pub fn three_plane(&self) -> Result<ObjectScene> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let [a, b, c] = THREE_PLANE_BANDS;
        let slices = [
            self.textured_band(a, &mut rng)?,
            self.textured_band(b, &mut rng)?,
            self.textured_band(c, &mut rng)?,
        ];
        make_three_plane_scene(slices, self.spacing_mm)
    }
}

/// Single plane at `depth_mm` holding one vertical bright bar centred at `bar_x_mm`.
pub fn bar_scene(
    size_px: usize,
    extent_mm: f64,
    depth_mm: f64,
    bar_x_mm: f64,
    bar_width_mm: f64,
) -> Result<ObjectScene> {
    let pitch = extent_mm / size_px as f64;
    let grid = Image2D::zeros(size_px, 1, pitch);
    let slice = Image2D::from_fn(size_px, size_px, pitch, |c, _| {
        if (grid.x_mm(c as f64) - bar_x_mm).abs() <= bar_width_mm / 2.0 {
            1.0
        } else {
            0.0
        }
    })?;
    ObjectScene::new(vec![slice], vec![depth_mm])
}
