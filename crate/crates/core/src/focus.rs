//! Focus-based suppression of defocus noise.
//!
//! Each captured image is smoothed with a Gaussian and passed through a
//! discrete Laplacian; the per-pixel slice with the largest response magnitude
//! is taken as that pixel's in-focus capture. The stack is then rebuilt so that
//! every pixel survives only in its in-focus slice, and the sparse stack is
//! back-projected as usual.

use serde::{Deserialize, Serialize};

use crate::backprojection::reconstruct;
use crate::convolve::{gaussian_kernel_1d, laplacian, separable_convolve, Border, LaplacianStencil};
use crate::error::{Error, Result};
use crate::types::{AngularSampling, FocalStack, Image2D, LightField4D, Validate};

/// Pixels whose strongest response does not exceed this are marked uncovered.
pub const COVERAGE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    /// σ of the pre-smoothing Gaussian in pixels; 0 disables smoothing.
    pub sigma_smooth: f64,
    #[serde(alias = "laplacian_stencil")]
    pub stencil: LaplacianStencil,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            sigma_smooth: 2.0,
            stencil: LaplacianStencil::FourNeighbor,
        }
    }
}

impl Validate for FilterParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma_smooth.is_finite() && self.sigma_smooth >= 0.0) {
            return Err(Error::InvalidRange(format!(
                "sigma_smooth must be >= 0, got {}",
                self.sigma_smooth
            )));
        }
        Ok(())
    }
}

/// Per-pixel index of the sharpest slice, plus a mask of pixels where any slice responded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthIndexMap {
    width: usize,
    height: usize,
    indices: Vec<usize>,
    coverage: Vec<bool>,
}

impl DepthIndexMap {
    pub fn new(width: usize, height: usize, indices: Vec<usize>, coverage: Vec<bool>) -> Result<Self> {
        if indices.len() != width * height || coverage.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} depth map holds {} indices and {} coverage flags",
                indices.len(),
                coverage.len()
            )));
        }
        Ok(Self {
            width,
            height,
            indices,
            coverage,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn get(&self, col: usize, row: usize) -> usize {
        self.indices[row * self.width + col]
    }

    /// `false` where every slice had a (near) zero response and the index came from the tie rule.
    pub fn coverage(&self) -> &[bool] {
        &self.coverage
    }

    pub fn covered_fraction(&self) -> f64 {
        self.coverage.iter().filter(|&&c| c).count() as f64 / self.coverage.len() as f64
    }
}

/// `|∇²(I ⊗ G)|` for every image of the stack, with replicated-edge padding.
pub fn edge_response(stack: &FocalStack, params: &FilterParams) -> Result<Vec<Image2D>> {
    stack.validate()?;
    params.validate()?;
    let taps = gaussian_kernel_1d(params.sigma_smooth);
    Ok(stack
        .images()
        .iter()
        .map(|image| {
            let smooth = separable_convolve(image, &taps, Border::Replicate);
            let lap = laplacian(&smooth, image.width(), image.height(), params.stencil);
            Image2D::from_raw(
                image.width(),
                image.height(),
                image.pixel_pitch(),
                lap.into_iter().map(f64::abs).collect(),
            )
        })
        .collect())
}

/// Per-pixel argmax over slices; ties go to the smaller slice index.
pub fn depth_index_map(responses: &[Image2D]) -> Result<DepthIndexMap> {
    let first = responses
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no responses given".into()))?;
    if responses.iter().any(|r| !r.same_geometry(first)) {
        return Err(Error::DimensionMismatch("responses differ in size".into()));
    }
    let n = first.width() * first.height();
    let mut indices = vec![0; n];
    let mut coverage = vec![false; n];
    for k in 0..n {
        let mut best = 0;
        let mut best_value = responses[0].data()[k];
        for (m, response) in responses.iter().enumerate().skip(1) {
            if response.data()[k] > best_value {
                best = m;
                best_value = response.data()[k];
            }
        }
        indices[k] = best;
        coverage[k] = best_value > COVERAGE_EPS;
    }
    DepthIndexMap::new(first.width(), first.height(), indices, coverage)
}

/// Keeps each pixel only in the slice named by `map`; every other slice gets 0 there.
pub fn filter_stack(stack: &FocalStack, map: &DepthIndexMap) -> Result<FocalStack> {
    stack.validate()?;
    if map.width != stack.width() || map.height != stack.height() {
        return Err(Error::DimensionMismatch(format!(
            "depth map is {}x{}, stack is {}x{}",
            map.width,
            map.height,
            stack.width(),
            stack.height()
        )));
    }
    if let Some(&bad) = map.indices.iter().find(|&&i| i >= stack.len()) {
        return Err(Error::DimensionMismatch(format!(
            "depth map index {bad} exceeds stack size {}",
            stack.len()
        )));
    }
    let images = stack
        .images()
        .iter()
        .enumerate()
        .map(|(m, image)| {
            let data = image
                .data()
                .iter()
                .zip(&map.indices)
                .map(|(&v, &idx)| if idx == m { v } else { 0.0 })
                .collect();
            Image2D::from_raw(image.width(), image.height(), image.pixel_pitch(), data)
        })
        .collect();
    FocalStack::new(images, stack.focal_depths_mm().to_vec())
}

/// Runs focus detection and returns the sparse stack together with the depth map.
pub fn focus_filter(stack: &FocalStack, params: &FilterParams) -> Result<(FocalStack, DepthIndexMap)> {
    let responses = edge_response(stack, params)?;
    let map = depth_index_map(&responses)?;
    let filtered = filter_stack(stack, &map)?;
    Ok((filtered, map))
}

/// Focus filtering followed by ordinary back-projection.
pub fn filtered_reconstruct(
    stack: &FocalStack,
    params: &FilterParams,
    angular: &AngularSampling,
) -> Result<LightField4D> {
    let (filtered, _) = focus_filter(stack, params)?;
    reconstruct(&filtered, angular)
}
