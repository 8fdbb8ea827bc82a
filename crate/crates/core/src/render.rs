//! Digital refocusing and epipolar-plane images.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::accumulate_shifted;
use crate::types::{Image2D, LightField4D, Validate};

/// Image focused on the plane `z_mm`:
/// `I_z(x, y) = 1/(n_ξ n_η) Σ_{ξ,η} L(x - z ξ, y - z η, ξ, η)`.
///
/// For the exact light field of a single slice at depth `z`, refocusing at `z`
/// returns the slice (away from the borders).
pub fn refocus(lf: &LightField4D, z_mm: f64) -> Result<Image2D> {
    lf.validate()?;
    if !z_mm.is_finite() {
        return Err(Error::InvalidRange(format!("refocus depth {z_mm} is not finite")));
    }
    let ang = lf.angular();
    let (w, h, pitch) = (lf.width(), lf.height(), lf.pixel_pitch());
    let n_views = ang.n_views();
    let gain = 1.0 / n_views as f64;
    // fixed grouping keeps the summation order independent of scheduling
    let group = n_views.div_ceil(32).max(1);
    let views: Vec<usize> = (0..n_views).collect();
    let partials: Vec<Vec<f64>> = views
        .par_chunks(group)
        .map(|chunk| {
            let mut acc = vec![0.0; w * h];
            for &v in chunk {
                let (i, j) = (v % ang.n_xi, v / ang.n_xi);
                let view = lf.view_image(i, j);
                accumulate_shifted(&mut acc, &view, -z_mm * ang.xi(i) / pitch, -z_mm * ang.eta(j) / pitch, gain);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; w * h];
    for partial in partials {
        out.iter_mut().zip(partial).for_each(|(o, p)| *o += p);
    }
    Image2D::new(w, h, pitch, out)
}

/// Row index selected by a fractional height, `round(y_frac * (height - 1))`.
pub fn epi_row(height: usize, y_frac: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&y_frac) {
        return Err(Error::InvalidRange(format!("y_frac must lie in [0, 1], got {y_frac}")));
    }
    Ok((y_frac * (height - 1) as f64).round() as usize)
}

/// The `(x, ξ)` slice at the row nearest `y_frac * y_max` and the sampled slope `eta`.
///
/// Output row `i` is the angular sample `ξ_i`, column `x` the lateral position.
pub fn extract_epi(lf: &LightField4D, y_frac: f64, eta: f64) -> Result<Image2D> {
    let row = epi_row(lf.height(), y_frac)?;
    let j = lf.angular().eta_index(eta).ok_or(Error::EtaNotSampled(eta))?;
    let w = lf.width();
    let mut data = Vec::with_capacity(w * lf.angular().n_xi);
    for i in 0..lf.angular().n_xi {
        let view = lf.view(i, j);
        data.extend_from_slice(&view[row * w..(row + 1) * w]);
    }
    Image2D::new(w, lf.angular().n_xi, lf.pixel_pitch(), data)
}

/// A straight line fitted through the bright ridge of an EPI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpiLine {
    /// `dξ/dx` in 1/mm; a point at depth `z` traces `-1/z`.
    pub slope: f64,
    /// Lateral position (mm) of the ridge at `ξ = 0`.
    pub x_at_zero_mm: f64,
    pub rows_used: usize,
}

/// Fits `x = x0 + b ξ` through the per-row centroid of pixels at or above
/// `threshold * row_max` and returns `dξ/dx = 1/b`.
///
/// `xis[i]` is the slope of EPI row `i`. Rows with no signal are skipped; at
/// least two rows are required.
pub fn fit_epi_line(epi: &Image2D, xis: &[f64], threshold: f64) -> Option<EpiLine> {
    if xis.len() != epi.height() {
        return None;
    }
    let w = epi.width();
    let mut points = Vec::new();
    for (i, &xi) in xis.iter().enumerate() {
        let row = &epi.data()[i * w..(i + 1) * w];
        let peak = row.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            continue;
        }
        let cut = threshold * peak;
        let (mut sw, mut sx) = (0.0, 0.0);
        for (c, &v) in row.iter().enumerate() {
            if v >= cut {
                sw += v;
                sx += v * epi.x_mm(c as f64);
            }
        }
        points.push((xi, sx / sw));
    }
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_xi = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_x = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_xi).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_xi) * (p.1 - mean_x)).sum();
    if sxx == 0.0 || sxy == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some(EpiLine {
        slope: 1.0 / b,
        x_at_zero_mm: mean_x - b * mean_xi,
        rows_used: points.len(),
    })
}
