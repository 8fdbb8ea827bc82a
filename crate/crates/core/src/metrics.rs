//! Reconstruction quality metrics.
//!
//! Back-projection sums `M` images without normalisation, so raw
//! reconstructions scale with the stack size. [`psnr`] therefore fits a
//! least-squares gain to the test signal before measuring the error; a
//! reconstruction that differs from the reference only by a positive scale
//! scores `+∞`.

use crate::backprojection::reconstruct;
use crate::capture::clear_stack;
use crate::error::{Error, Result};
use crate::types::{AngularSampling, FocalStack, LightField4D, ObjectScene, Samples, Validate};

/// Least-squares gain `α = <test, ref> / <test, test>`; 1 for an all-zero test signal.
pub fn gain_alignment(test: &[f64], reference: &[f64]) -> f64 {
    let tt: f64 = test.iter().map(|v| v * v).sum();
    if tt == 0.0 {
        return 1.0;
    }
    let tr: f64 = test.iter().zip(reference).map(|(t, r)| t * r).sum();
    tr / tt
}

/// Mean squared error of `alpha * test` against `reference`.
fn aligned_mse(test: &[f64], reference: &[f64], alpha: f64) -> f64 {
    let sum: f64 = test
        .iter()
        .zip(reference)
        .map(|(t, r)| (alpha * t - r).powi(2))
        .sum();
    sum / test.len() as f64
}

/// Gain-aligned PSNR in dB with `MAX = max(reference)`; `+∞` when the aligned error is zero.
pub fn psnr<T: Samples + ?Sized>(test: &T, reference: &T) -> Result<f64> {
    if test.shape() != reference.shape() {
        return Err(Error::DimensionMismatch(format!(
            "PSNR operands have shapes {:?} and {:?}",
            test.shape(),
            reference.shape()
        )));
    }
    Ok(psnr_slices(test.samples(), reference.samples()))
}

pub(crate) fn psnr_slices(test: &[f64], reference: &[f64]) -> f64 {
    let alpha = gain_alignment(test, reference);
    let mse = aligned_mse(test, reference, alpha);
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    10.0 * (peak * peak / mse).log10()
}

/// The two terms of a back-projected light field: the in-focus signal and the
/// accumulated defocus noise.
#[derive(Clone, Debug)]
pub struct NoiseSplit {
    /// Back-projection of the clear (in-focus) slices alone.
    pub signal: LightField4D,
    /// Back-projection of the residuals `I(z_m) - O(z_m)`.
    pub noise: LightField4D,
}

impl NoiseSplit {
    /// Raw squared norm of the noise term.
    pub fn noise_energy(&self) -> f64 {
        self.noise.energy()
    }

    /// Noise energy left after the best gain correction of the total, relative
    /// to the signal energy: `min_α ||α (s + n) - s||² / ||s||²`.
    ///
    /// This is the quantity gain-aligned PSNR penalises; a noise term that is a
    /// positive multiple of the signal contributes nothing.
    pub fn unexplained_noise_energy(&self) -> f64 {
        let s = self.signal.data();
        let total: Vec<f64> = s.iter().zip(self.noise.data()).map(|(a, b)| a + b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        if ss == 0.0 {
            return 0.0;
        }
        let alpha = gain_alignment(&total, s);
        aligned_mse(&total, s, alpha) * s.len() as f64 / ss
    }

    /// Elementwise `signal + noise`.
    pub fn total(&self) -> LightField4D {
        self.signal
            .zip_with(&self.noise, |a, b| a + b)
            .expect("split terms share one shape")
    }
}

/// Splits `reconstruct(stack)` into the back-projected in-focus slices and the
/// back-projected defocus residuals. Every focal depth must coincide with a
/// scene slice depth.
pub fn noise_split(stack: &FocalStack, scene: &ObjectScene, angular: &AngularSampling) -> Result<NoiseSplit> {
    stack.validate()?;
    let clear = clear_stack(scene, stack.focal_depths_mm())?;
    let residual = stack.zip_with(&clear, |captured, in_focus| captured - in_focus)?;
    Ok(NoiseSplit {
        signal: reconstruct(&clear, angular)?,
        noise: reconstruct(&residual, angular)?,
    })
}
