//! Domain types shared by every stage of the pipeline.
//!
//! Sampling conventions:
//! * intensities are `f64`, nominally in `[0, 1]`, never negative;
//! * lateral coordinates have their origin at the image centre, so column `c`
//!   of a `w`-wide image sits at `x = (c - (w - 1) / 2) * pixel_pitch` mm;
//! * angular coordinates `ξ, η` are dimensionless slopes (tan θ), so a ray at
//!   slope `ξ` crossing depth `z` is displaced laterally by `z * ξ` mm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Checks the invariants of a value object and reports the first violation.
pub trait Validate {
    fn validate(&self) -> Result<()>;
}

/// Flat read access to the samples of an image or light field.
pub trait Samples {
    fn samples(&self) -> &[f64];
    fn shape(&self) -> Vec<usize>;
}

fn check_samples(data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeIntensity { index, value });
        }
    }
    Ok(())
}

fn check_increasing(depths: &[f64], what: &str) -> Result<()> {
    if let Some((i, d)) = depths.iter().enumerate().find(|(_, d)| !d.is_finite()) {
        return Err(Error::NonMonotoneDepths(format!("{what} depth {i} is {d}")));
    }
    for (i, pair) in depths.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            return Err(Error::NonMonotoneDepths(format!(
                "{what} depth {} ({} mm) is not greater than depth {} ({} mm)",
                i + 1,
                pair[1],
                i,
                pair[0]
            )));
        }
    }
    Ok(())
}

/// A single-channel intensity image with a physical pixel pitch (mm/pixel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image2D {
    width: usize,
    height: usize,
    pixel_pitch: f64,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, pixel_pitch: f64, data: Vec<f64>) -> Result<Self> {
        let image = Self::from_raw(width, height, pixel_pitch, data);
        image.validate()?;
        Ok(image)
    }

    /// Builds an image without checking sample values; geometry must already be consistent.
    pub(crate) fn from_raw(width: usize, height: usize, pixel_pitch: f64, data: Vec<f64>) -> Self {
        Self {
            width,
            height,
            pixel_pitch,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize, pixel_pitch: f64) -> Self {
        Self::from_raw(width, height, pixel_pitch, vec![0.0; width * height])
    }

    /// Samples `f(col, row)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_pitch: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self::new(width, height, pixel_pitch, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// True when both images share width, height and pixel pitch.
    pub fn same_geometry(&self, other: &Image2D) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixel_pitch == other.pixel_pitch
    }

    /// Lateral position (mm) of a column centre.
    pub fn x_mm(&self, col: f64) -> f64 {
        (col - (self.width as f64 - 1.0) / 2.0) * self.pixel_pitch
    }

    /// Lateral position (mm) of a row centre.
    pub fn y_mm(&self, row: f64) -> f64 {
        (row - (self.height as f64 - 1.0) / 2.0) * self.pixel_pitch
    }

    /// Fractional column index of a lateral position.
    pub fn col_of(&self, x_mm: f64) -> f64 {
        x_mm / self.pixel_pitch + (self.width as f64 - 1.0) / 2.0
    }

    /// Fractional row index of a lateral position.
    pub fn row_of(&self, y_mm: f64) -> f64 {
        y_mm / self.pixel_pitch + (self.height as f64 - 1.0) / 2.0
    }

    /// Returns `self * gain`; `gain` must be nonnegative.
    pub fn scaled(&self, gain: f64) -> Self {
        assert!(gain >= 0.0, "intensity gain must be nonnegative");
        Self::from_raw(
            self.width,
            self.height,
            self.pixel_pitch,
            self.data.iter().map(|v| v * gain).collect(),
        )
    }

    /// Pixelwise `f(a, b)` of two images with identical geometry.
    pub fn zip_with(&self, other: &Image2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_geometry(other) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} @ {} vs {}x{} @ {}",
                self.width, self.height, self.pixel_pitch, other.width, other.height, other.pixel_pitch
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Image2D::new(self.width, self.height, self.pixel_pitch, data)
    }
}

impl Validate for Image2D {
    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image must be non-empty, got {}x{}",
                self.width, self.height
            )));
        }
        if self.data.len() != self.width * self.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image holds {} samples",
                self.width,
                self.height,
                self.data.len()
            )));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::InvalidRange(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        check_samples(&self.data)
    }
}

impl Samples for Image2D {
    fn samples(&self) -> &[f64] {
        &self.data
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.height, self.width]
    }
}

fn check_uniform(images: &[Image2D], what: &str) -> Result<()> {
    let first = &images[0];
    for (i, image) in images.iter().enumerate() {
        image.validate()?;
        if !image.same_geometry(first) {
            return Err(Error::DimensionMismatch(format!(
                "{what} {i} is {}x{} @ {} mm, expected {}x{} @ {} mm",
                image.width,
                image.height,
                image.pixel_pitch,
                first.width,
                first.height,
                first.pixel_pitch
            )));
        }
    }
    Ok(())
}

/// A 3D object approximated as transparent planar slices `O(x, y, z_n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectScene {
    slices: Vec<Image2D>,
    depths_mm: Vec<f64>,
}

impl ObjectScene {
    pub fn new(slices: Vec<Image2D>, depths_mm: Vec<f64>) -> Result<Self> {
        let scene = Self { slices, depths_mm };
        scene.validate()?;
        Ok(scene)
    }

    pub fn slices(&self) -> &[Image2D] {
        &self.slices
    }

    pub fn depths_mm(&self) -> &[f64] {
        &self.depths_mm
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.slices[0].width()
    }

    pub fn height(&self) -> usize {
        self.slices[0].height()
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.slices[0].pixel_pitch()
    }

    /// Index of the slice sitting at `depth_mm`, within `tol` mm.
    pub fn slice_at(&self, depth_mm: f64, tol: f64) -> Option<usize> {
        self.depths_mm
            .iter()
            .position(|&d| (d - depth_mm).abs() <= tol)
    }
}

impl Validate for ObjectScene {
    fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(Error::DimensionMismatch("scene has no slices".into()));
        }
        if self.slices.len() != self.depths_mm.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} slices but {} depths",
                self.slices.len(),
                self.depths_mm.len()
            )));
        }
        check_increasing(&self.depths_mm, "slice")?;
        check_uniform(&self.slices, "slice")
    }
}

/// Images captured while sweeping the focal plane, `I(x, y, z_m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalStack {
    images: Vec<Image2D>,
    focal_depths_mm: Vec<f64>,
}

impl FocalStack {
    pub fn new(images: Vec<Image2D>, focal_depths_mm: Vec<f64>) -> Result<Self> {
        let stack = Self {
            images,
            focal_depths_mm,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn images(&self) -> &[Image2D] {
        &self.images
    }

    pub fn into_images(self) -> Vec<Image2D> {
        self.images
    }

    pub fn focal_depths_mm(&self) -> &[f64] {
        &self.focal_depths_mm
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.images[0].pixel_pitch()
    }

    /// Returns `self * gain` image by image.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            images: self.images.iter().map(|im| im.scaled(gain)).collect(),
            focal_depths_mm: self.focal_depths_mm.clone(),
        }
    }

    /// Pixelwise `f(a, b)` of two stacks with identical geometry and focal depths.
    pub fn zip_with(&self, other: &FocalStack, f: impl Fn(f64, f64) -> f64 + Copy) -> Result<Self> {
        if self.focal_depths_mm != other.focal_depths_mm {
            return Err(Error::DimensionMismatch(
                "stacks have different focal depths".into(),
            ));
        }
        let images = self
            .images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| a.zip_with(b, f))
            .collect::<Result<Vec<_>>>()?;
        FocalStack::new(images, self.focal_depths_mm.clone())
    }
}

impl Validate for FocalStack {
    fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::DimensionMismatch("focal stack has no images".into()));
        }
        if self.images.len() != self.focal_depths_mm.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} focal depths",
                self.images.len(),
                self.focal_depths_mm.len()
            )));
        }
        check_increasing(&self.focal_depths_mm, "focal")?;
        check_uniform(&self.images, "image")
    }
}

/// Uniform angular sampling of the slopes `ξ ∈ [-xi_max, xi_max]`, `η ∈ [-eta_max, eta_max]`.
///
/// A single sample along an axis is the central ray (slope 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularSampling {
    pub xi_max: f64,
    pub n_xi: usize,
    pub eta_max: f64,
    pub n_eta: usize,
}

fn uniform_sample(max: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    // exact zero at the centre of odd sample counts
    let twice = 2 * i as i64 - (n as i64 - 1);
    if twice == 0 {
        return 0.0;
    }
    max * twice as f64 / (n - 1) as f64
}

impl AngularSampling {
    pub fn new(xi_max: f64, n_xi: usize, eta_max: f64, n_eta: usize) -> Result<Self> {
        let ang = Self {
            xi_max,
            n_xi,
            eta_max,
            n_eta,
        };
        ang.validate()?;
        Ok(ang)
    }

    /// Same slope range and sample count along both axes.
    pub fn square(max: f64, n: usize) -> Result<Self> {
        Self::new(max, n, max, n)
    }

    pub fn xi(&self, i: usize) -> f64 {
        uniform_sample(self.xi_max, self.n_xi, i)
    }

    pub fn eta(&self, j: usize) -> f64 {
        uniform_sample(self.eta_max, self.n_eta, j)
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.n_xi).map(|i| self.xi(i)).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        (0..self.n_eta).map(|j| self.eta(j)).collect()
    }

    pub fn n_views(&self) -> usize {
        self.n_xi * self.n_eta
    }

    /// Index of the η sample equal to `eta` up to a relative tolerance.
    pub fn eta_index(&self, eta: f64) -> Option<usize> {
        let tol = 1e-9 * self.eta_max.max(1.0);
        (0..self.n_eta).find(|&j| (self.eta(j) - eta).abs() <= tol)
    }

    /// Index of the ξ sample equal to `xi` up to a relative tolerance.
    pub fn xi_index(&self, xi: f64) -> Option<usize> {
        let tol = 1e-9 * self.xi_max.max(1.0);
        (0..self.n_xi).find(|&i| (self.xi(i) - xi).abs() <= tol)
    }
}

impl Validate for AngularSampling {
    fn validate(&self) -> Result<()> {
        if self.n_xi == 0 || self.n_eta == 0 {
            return Err(Error::InvalidRange(format!(
                "angular sample counts must be positive, got {}x{}",
                self.n_xi, self.n_eta
            )));
        }
        for (name, v) in [("xi_max", self.xi_max), ("eta_max", self.eta_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidRange(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Dense light field `L(x, y, ξ, η)` parameterised on the plane `z = principal_plane_z`.
///
/// Samples are stored view by view: `data[((iη * n_xi + iξ) * height + y) * width + x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightField4D {
    width: usize,
    height: usize,
    pixel_pitch: f64,
    angular: AngularSampling,
    principal_plane_z: f64,
    data: Vec<f64>,
}

impl LightField4D {
    pub fn new(
        width: usize,
        height: usize,
        pixel_pitch: f64,
        angular: AngularSampling,
        data: Vec<f64>,
    ) -> Result<Self> {
        let lf = Self::from_raw(width, height, pixel_pitch, angular, data);
        lf.validate()?;
        Ok(lf)
    }

    pub(crate) fn from_raw(
        width: usize,
        height: usize,
        pixel_pitch: f64,
        angular: AngularSampling,
        data: Vec<f64>,
    ) -> Self {
        Self {
            width,
            height,
            pixel_pitch,
            angular,
            principal_plane_z: 0.0,
            data,
        }
    }

    pub(crate) fn with_principal_plane(mut self, z: f64) -> Self {
        self.principal_plane_z = z;
        self
    }

    /// Assembles a light field from per-view images listed in storage order.
    pub(crate) fn from_views(
        width: usize,
        height: usize,
        pixel_pitch: f64,
        angular: AngularSampling,
        views: Vec<Vec<f64>>,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * angular.n_views());
        for view in views {
            data.extend_from_slice(&view);
        }
        Self::from_raw(width, height, pixel_pitch, angular, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn angular(&self) -> &AngularSampling {
        &self.angular
    }

    pub fn principal_plane_z(&self) -> f64 {
        self.principal_plane_z
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, i_xi: usize, i_eta: usize) -> usize {
        ((i_eta * self.angular.n_xi + i_xi) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, i_xi: usize, i_eta: usize) -> f64 {
        self.data[self.index(x, y, i_xi, i_eta)]
    }

    /// The `width * height` samples of one angular view.
    pub fn view(&self, i_xi: usize, i_eta: usize) -> &[f64] {
        let start = self.index(0, 0, i_xi, i_eta);
        &self.data[start..start + self.width * self.height]
    }

    pub fn view_image(&self, i_xi: usize, i_eta: usize) -> Image2D {
        Image2D::from_raw(
            self.width,
            self.height,
            self.pixel_pitch,
            self.view(i_xi, i_eta).to_vec(),
        )
    }

    pub fn same_shape(&self, other: &LightField4D) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.angular.n_xi == other.angular.n_xi
            && self.angular.n_eta == other.angular.n_eta
    }

    /// Elementwise `f(a, b)` of two light fields with the same shape.
    pub fn zip_with(&self, other: &LightField4D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(
                "light fields have different dimensions".into(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

impl Validate for LightField4D {
    fn validate(&self) -> Result<()> {
        self.angular.validate()?;
        let expected = self.width * self.height * self.angular.n_views();
        if self.width == 0 || self.height == 0 || self.data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{}x{}x{}x{} light field holds {} samples",
                self.width,
                self.height,
                self.angular.n_xi,
                self.angular.n_eta,
                self.data.len()
            )));
        }
        if !(self.pixel_pitch.is_finite() && self.pixel_pitch > 0.0) {
            return Err(Error::InvalidRange(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        check_samples(&self.data)
    }
}

impl Samples for LightField4D {
    fn samples(&self) -> &[f64] {
        &self.data
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.angular.n_eta, self.angular.n_xi, self.height, self.width]
    }
}
