//! Simulated focal-plane sweeping: every slice is blurred by the defocus PSF
//! for its distance from the focal plane and the results are summed.

use serde::{Deserialize, Serialize};

use crate::convolve::{gaussian_kernel_1d, separable_convolve, Border};
use crate::error::{Error, Result};
use crate::types::{FocalStack, Image2D, ObjectScene, Validate};

/// Below this width a defocus kernel collapses to the identity.
pub const MIN_SIGMA_PX: f64 = 0.25;

/// Gaussian defocus PSF whose width grows linearly with distance from focus:
/// `σ_px(Δz) = sigma_coefficient * na * |Δz| / pixel_pitch`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfModel {
    pub na: f64,
    /// mm per pixel
    pub pixel_pitch: f64,
    #[serde(default = "one")]
    pub sigma_coefficient: f64,
}

fn one() -> f64 {
    1.0
}

impl PsfModel {
    pub fn new(na: f64, pixel_pitch: f64) -> Result<Self> {
        let psf = Self {
            na,
            pixel_pitch,
            sigma_coefficient: 1.0,
        };
        psf.validate()?;
        Ok(psf)
    }

    pub fn with_sigma_coefficient(mut self, coefficient: f64) -> Result<Self> {
        self.sigma_coefficient = coefficient;
        self.validate()?;
        Ok(self)
    }

    /// Gaussian σ in pixels for a slice `dz_mm` away from the focal plane.
    pub fn sigma_px(&self, dz_mm: f64) -> f64 {
        self.sigma_coefficient * self.na * dz_mm.abs() / self.pixel_pitch
    }

    /// 1D factor of the separable kernel; `[1.0]` when the blur is negligible.
    pub fn kernel_1d(&self, dz_mm: f64) -> Vec<f64> {
        let sigma = self.sigma_px(dz_mm);
        if sigma < MIN_SIGMA_PX {
            vec![1.0]
        } else {
            gaussian_kernel_1d(sigma)
        }
    }
}

impl Validate for PsfModel {
    fn validate(&self) -> Result<()> {
        if !(self.na > 0.0 && self.na < 1.0) {
            return Err(Error::InvalidNa(self.na));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::InvalidRange(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        if !(self.sigma_coefficient.is_finite() && self.sigma_coefficient >= 0.0) {
            return Err(Error::InvalidRange(format!(
                "sigma coefficient must be nonnegative, got {}",
                self.sigma_coefficient
            )));
        }
        Ok(())
    }
}

/// The 2D defocus kernel `h(x, y, dz)` as an image (outer product of the 1D factor).
pub fn psf_kernel(psf: &PsfModel, dz_mm: f64) -> Image2D {
    let taps = psf.kernel_1d(dz_mm);
    let n = taps.len();
    let data = (0..n * n).map(|k| taps[k / n] * taps[k % n]).collect();
    Image2D::from_raw(n, n, psf.pixel_pitch, data)
}

/// Renders one slice as seen with the focal plane `dz_mm` away; zero-padded borders.
pub fn defocus(slice: &Image2D, psf: &PsfModel, dz_mm: f64) -> Image2D {
    let taps = psf.kernel_1d(dz_mm);
    Image2D::from_raw(
        slice.width(),
        slice.height(),
        slice.pixel_pitch(),
        separable_convolve(slice, &taps, Border::Zero),
    )
}

fn check_focal_depths(focal_depths_mm: &[f64]) -> Result<()> {
    if focal_depths_mm.is_empty() {
        return Err(Error::DimensionMismatch("no focal depths given".into()));
    }
    for (i, pair) in focal_depths_mm.windows(2).enumerate() {
        if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NonMonotoneDepths(format!(
                "focal depth {} ({} mm) is not greater than focal depth {} ({} mm)",
                i + 1,
                pair[1],
                i,
                pair[0]
            )));
        }
    }
    Ok(())
}

/// Simulates the focal sweep: `I(z_m) = Σ_n O(z_n) ⊗ h(z_m - z_n)`, summed in ascending `n`.
///
/// A slice lying on the focal plane passes through unblurred.
pub fn capture(scene: &ObjectScene, psf: &PsfModel, focal_depths_mm: &[f64]) -> Result<FocalStack> {
    scene.validate()?;
    psf.validate()?;
    check_focal_depths(focal_depths_mm)?;
    if psf.pixel_pitch != scene.pixel_pitch() {
        return Err(Error::DimensionMismatch(format!(
            "PSF pixel pitch {} mm differs from scene pitch {} mm",
            psf.pixel_pitch,
            scene.pixel_pitch()
        )));
    }
    let (w, h, pitch) = (scene.width(), scene.height(), scene.pixel_pitch());
    let images = focal_depths_mm
        .iter()
        .map(|&zm| {
            let mut acc = vec![0.0; w * h];
            for (slice, &zn) in scene.slices().iter().zip(scene.depths_mm()) {
                let blurred = defocus(slice, psf, zm - zn);
                acc.iter_mut().zip(blurred.data()).for_each(|(a, b)| *a += b);
            }
            Image2D::from_raw(w, h, pitch, acc)
        })
        .collect();
    FocalStack::new(images, focal_depths_mm.to_vec())
}

/// The blur-free capture: image `m` is exactly the slice lying on focal plane `z_m`.
///
/// This is the in-focus term of the capture model in isolation (the limit of
/// a PSF that carries no out-of-focus light). Every focal depth must coincide
/// with a slice depth within `1e-9` mm.
pub fn clear_stack(scene: &ObjectScene, focal_depths_mm: &[f64]) -> Result<FocalStack> {
    scene.validate()?;
    check_focal_depths(focal_depths_mm)?;
    let images = focal_depths_mm
        .iter()
        .map(|&z| {
            scene
                .slice_at(z, 1e-9)
                .map(|n| scene.slices()[n].clone())
                .ok_or(Error::DepthMismatch(z))
        })
        .collect::<Result<Vec<_>>>()?;
    FocalStack::new(images, focal_depths_mm.to_vec())
}

/// `n_images` focal depths spaced uniformly over `[zlo, zhi]`, endpoints included.
/// A single image sits at the midpoint.
pub fn capture_sweep_plan(depth_range_mm: [f64; 2], n_images: usize) -> Result<Vec<f64>> {
    let [lo, hi] = depth_range_mm;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange(format!(
            "sweep range [{lo}, {hi}] mm must satisfy lo < hi"
        )));
    }
    if n_images == 0 {
        return Err(Error::InvalidRange("sweep needs at least one image".into()));
    }
    if n_images == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    let last = (n_images - 1) as f64;
    Ok((0..n_images)
        .map(|i| {
            if i == n_images - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / last
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolve::{laplacian, LaplacianStencil};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pattern(w: usize, h: usize, seed: u64) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image2D::new(w, h, 1.0, (0..w * h).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    /// Direct 2D convolution with zero padding, one output pixel at a time.
    fn brute_force_convolve(src: &Image2D, kernel: &Image2D) -> Vec<f64> {
        let (w, h) = (src.width() as i64, src.height() as i64);
        let r = (kernel.width() / 2) as i64;
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for ky in -r..=r {
                    for kx in -r..=r {
                        let (sx, sy) = (x - kx, y - ky);
                        if sx >= 0 && sy >= 0 && sx < w && sy < h {
                            acc += kernel.get((kx + r) as usize, (ky + r) as usize)
                                * src.get(sx as usize, sy as usize);
                        }
                    }
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn in_focus_kernel_is_delta() {
        let psf = PsfModel::new(0.4, 3.1e-3).unwrap();
        let k = psf_kernel(&psf, 0.0);
        assert_eq!((k.width(), k.height()), (1, 1));
        assert_eq!(k.data(), &[1.0]);
    }

    #[test]
    fn camera_sigma_matches_hand_value() {
        // 0.4 * 0.1 / 0.0031 = 12.903...
        let psf = PsfModel::new(0.4, 3.1e-3).unwrap();
        assert!((psf.sigma_px(0.1) - 12.903225806451612).abs() < 1e-9);
        assert_eq!(psf.sigma_px(-0.1), psf.sigma_px(0.1));
        let k = psf_kernel(&psf, 0.1);
        assert_eq!(k.width(), 2 * 39 + 1);
    }

    #[test]
    fn kernels_are_normalised_symmetric_nonnegative() {
        let psf = PsfModel::new(0.3, 0.5).unwrap();
        for &dz in &[0.0, 0.3, 1.0, 4.0, 17.5, -9.0] {
            let k = psf_kernel(&psf, dz);
            assert!((k.sum() - 1.0).abs() < 1e-12, "dz {dz}");
            let (w, h) = (k.width(), k.height());
            for y in 0..h {
                for x in 0..w {
                    assert!(k.get(x, y) >= 0.0);
                    assert_eq!(k.get(x, y), k.get(w - 1 - x, h - 1 - y));
                }
            }
        }
    }

    #[test]
    fn invalid_na_rejected() {
        assert!(matches!(PsfModel::new(0.0, 1.0), Err(Error::InvalidNa(_))));
        assert!(matches!(PsfModel::new(1.0, 1.0), Err(Error::InvalidNa(_))));
    }

    #[test]
    fn single_slice_in_focus_capture_is_exact() {
        let slice = pattern(9, 7, 3);
        let scene = ObjectScene::new(vec![slice.clone()], vec![5.0]).unwrap();
        let psf = PsfModel::new(0.5, 1.0).unwrap();
        let stack = capture(&scene, &psf, &[5.0]).unwrap();
        assert_eq!(stack.images()[0], slice);
    }

    #[test]
    fn focal_slice_is_clear_term_plus_blurred_others() {
        let scene = ObjectScene::new(
            vec![pattern(12, 12, 1), pattern(12, 12, 2), pattern(12, 12, 3)],
            vec![-2.0, 0.0, 2.0],
        )
        .unwrap();
        let psf = PsfModel::new(0.6, 1.0).unwrap();
        let stack = capture(&scene, &psf, &[-2.0, 0.0, 2.0]).unwrap();
        for m in 0..3 {
            let mut expected = scene.slices()[m].data().to_vec();
            for n in (0..3).filter(|&n| n != m) {
                let blurred = defocus(&scene.slices()[n], &psf, scene.depths_mm()[m] - scene.depths_mm()[n]);
                expected.iter_mut().zip(blurred.data()).for_each(|(e, b)| *e += b);
            }
            for (a, b) in stack.images()[m].data().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force_convolution() {
        let scene = ObjectScene::new(vec![pattern(8, 8, 7), pattern(8, 8, 8)], vec![-1.0, 1.5]).unwrap();
        let psf = PsfModel::new(0.45, 1.0).unwrap();
        let stack = capture(&scene, &psf, &[0.25]).unwrap();
        let mut oracle = vec![0.0; 64];
        for (slice, &z) in scene.slices().iter().zip(scene.depths_mm()) {
            let part = brute_force_convolve(slice, &psf_kernel(&psf, 0.25 - z));
            oracle.iter_mut().zip(&part).for_each(|(o, p)| *o += p);
        }
        let err = stack.images()[0]
            .data()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max abs error {err}");
    }

    #[test]
    fn energy_conserved_for_padded_scene() {
        let mut slices = Vec::new();
        for seed in 0..3 {
            let inner = pattern(10, 10, seed);
            slices.push(
                Image2D::from_fn(60, 60, 1.0, |c, r| {
                    if (25..35).contains(&c) && (25..35).contains(&r) {
                        inner.get(c - 25, r - 25)
                    } else {
                        0.0
                    }
                })
                .unwrap(),
            );
        }
        let scene = ObjectScene::new(slices, vec![-4.0, 0.0, 4.0]).unwrap();
        let total: f64 = scene.slices().iter().map(Image2D::sum).sum();
        let psf = PsfModel::new(0.5, 1.0).unwrap();
        let stack = capture(&scene, &psf, &[-4.0, -1.0, 0.0, 2.5, 4.0]).unwrap();
        for image in stack.images() {
            assert!((image.sum() - total).abs() / total < 1e-6);
        }
    }

    #[test]
    fn blur_increases_with_defocus_distance() {
        let slice = Image2D::from_fn(48, 48, 1.0, |c, r| if (c / 4 + r / 4) % 2 == 0 { 0.9 } else { 0.1 }).unwrap();
        let scene = ObjectScene::new(vec![slice], vec![0.0]).unwrap();
        let psf = PsfModel::new(0.5, 1.0).unwrap();
        let sharpness = |dz: f64| {
            let stack = capture(&scene, &psf, &[dz]).unwrap();
            let im = &stack.images()[0];
            let lap = laplacian(im.data(), 48, 48, LaplacianStencil::FourNeighbor);
            let mean = lap.iter().sum::<f64>() / lap.len() as f64;
            lap.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / lap.len() as f64
        };
        let values: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|&d| sharpness(d)).collect();
        assert!(values.windows(2).all(|p| p[1] < p[0]), "{values:?}");
    }

    #[test]
    fn capture_is_symmetric_about_focus() {
        let scene = ObjectScene::new(vec![pattern(16, 16, 5)], vec![0.0]).unwrap();
        let psf = PsfModel::new(0.4, 1.0).unwrap();
        let stack = capture(&scene, &psf, &[-3.0, 3.0]).unwrap();
        assert_eq!(stack.images()[0], stack.images()[1]);
    }

    #[test]
    fn non_monotone_focal_depths_rejected() {
        let scene = ObjectScene::new(vec![pattern(4, 4, 5)], vec![0.0]).unwrap();
        let psf = PsfModel::new(0.4, 1.0).unwrap();
        assert!(matches!(capture(&scene, &psf, &[1.0, 1.0]), Err(Error::NonMonotoneDepths(_))));
    }

    #[test]
    fn clear_stack_picks_slices() {
        let scene = ObjectScene::new(vec![pattern(4, 4, 1), pattern(4, 4, 2)], vec![-1.0, 1.0]).unwrap();
        let clear = clear_stack(&scene, &[-1.0, 1.0]).unwrap();
        assert_eq!(clear.images(), scene.slices());
        assert!(matches!(clear_stack(&scene, &[0.0]), Err(Error::DepthMismatch(_))));
    }

    #[test]
    fn sweep_plans() {
        assert_eq!(capture_sweep_plan([-20.0, 20.0], 3).unwrap(), vec![-20.0, 0.0, 20.0]);
        assert_eq!(
            capture_sweep_plan([-20.0, 20.0], 5).unwrap(),
            vec![-20.0, -10.0, 0.0, 10.0, 20.0]
        );
        let p17 = capture_sweep_plan([-20.0, 20.0], 17).unwrap();
        assert_eq!(p17.len(), 17);
        assert!(p17.windows(2).all(|w| w[1] - w[0] == 2.5));
        assert_eq!(capture_sweep_plan([-20.0, 10.0], 1).unwrap(), vec![-5.0]);
        assert!(matches!(capture_sweep_plan([1.0, 1.0], 3), Err(Error::InvalidRange(_))));
        assert!(matches!(capture_sweep_plan([0.0, 1.0], 0), Err(Error::InvalidRange(_))));
    }
}
