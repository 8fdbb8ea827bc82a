//! Separable Gaussian filtering and small-stencil convolution.

use rayon::prelude::*;

use crate::types::Image2D;

/// How samples outside the image are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Border {
    /// Outside samples are zero (light leaving the frame is lost).
    Zero,
    /// Outside samples repeat the nearest edge pixel.
    Replicate,
}

/// Sampled Gaussian truncated at `ceil(3σ)` and renormalised to unit sum.
///
/// Returns `[1.0]` for `sigma <= 0`.
pub fn gaussian_kernel_1d(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

#[inline]
fn fetch(line: &[f64], idx: i64, border: Border) -> f64 {
    let n = line.len() as i64;
    if (0..n).contains(&idx) {
        line[idx as usize]
    } else {
        match border {
            Border::Zero => 0.0,
            Border::Replicate => line[idx.clamp(0, n - 1) as usize],
        }
    }
}

fn convolve_line(src: &[f64], dst: &mut [f64], taps: &[f64], border: Border) {
    let radius = (taps.len() / 2) as i64;
    for (i, out) in dst.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &t) in taps.iter().enumerate() {
            acc += t * fetch(src, i as i64 + k as i64 - radius, border);
        }
        *out = acc;
    }
}

/// Convolves rows then columns with the same symmetric 1D kernel.
pub fn separable_convolve(image: &Image2D, taps: &[f64], border: Border) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    if taps.len() == 1 && taps[0] == 1.0 {
        return image.data().to_vec();
    }
    let src = image.data();
    let mut rows = vec![0.0; w * h];
    rows.par_chunks_mut(w).enumerate().for_each(|(r, dst)| {
        convolve_line(&src[r * w..(r + 1) * w], dst, taps, border);
    });
    // column pass on the transpose so each column is contiguous
    let mut columns = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            columns[c * h + r] = rows[r * w + c];
        }
    }
    let mut filtered = vec![0.0; w * h];
    filtered.par_chunks_mut(h).enumerate().for_each(|(c, dst)| {
        convolve_line(&columns[c * h..(c + 1) * h], dst, taps, border);
    });
    let mut out = vec![0.0; w * h];
    for c in 0..w {
        for r in 0..h {
            out[r * w + c] = filtered[c * h + r];
        }
    }
    out
}

/// 3×3 discrete Laplacian stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianStencil {
    /// `[0 1 0; 1 -4 1; 0 1 0]`
    #[serde(alias = "4")]
    FourNeighbor,
    /// `[1 1 1; 1 -8 1; 1 1 1]`
    #[serde(alias = "8")]
    EightNeighbor,
}

impl LaplacianStencil {
    pub fn weights(self) -> [[f64; 3]; 3] {
        match self {
            LaplacianStencil::FourNeighbor => [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]],
            LaplacianStencil::EightNeighbor => [[1.0, 1.0, 1.0], [1.0, -8.0, 1.0], [1.0, 1.0, 1.0]],
        }
    }
}

/// Applies a Laplacian stencil with replicated-edge padding. The result may be negative.
pub fn laplacian(data: &[f64], width: usize, height: usize, stencil: LaplacianStencil) -> Vec<f64> {
    let weights = stencil.weights();
    let at = |c: i64, r: i64| {
        let c = c.clamp(0, width as i64 - 1) as usize;
        let r = r.clamp(0, height as i64 - 1) as usize;
        data[r * width + c]
    };
    let mut out = vec![0.0; width * height];
    for r in 0..height as i64 {
        for c in 0..width as i64 {
            let mut acc = 0.0;
            for (dr, row) in weights.iter().enumerate() {
                for (dc, &wgt) in row.iter().enumerate() {
                    if wgt != 0.0 {
                        acc += wgt * at(c + dc as i64 - 1, r + dr as i64 - 1);
                    }
                }
            }
            out[r as usize * width + c as usize] = acc;
        }
    }
    out
}
