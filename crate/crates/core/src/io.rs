//! Focal stack ingestion, light field files and image export.
//!
//! A stack directory holds one grayscale PNG or PGM per capture plus a
//! `stack.json` sidecar:
//!
//! ```json
//! { "depths_mm": [-50.0, 0.0, 50.0], "pixel_pitch_mm": 0.0031 }
//! ```
//!
//! `files` lists the images in the same order as `depths_mm`; without it every
//! `.png`/`.pgm` in the directory is taken in name order. `scale` (default 1)
//! maps full-scale pixel values to intensities.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focus::DepthIndexMap;
use crate::types::{AngularSampling, FocalStack, Image2D, LightField4D, Validate};

pub const STACK_METADATA: &str = "stack.json";

const LF4D_MAGIC: &[u8; 4] = b"LF4D";
const LF4D_VERSION: u16 = 1;
/// Magic, version, four u32 dimensions and four f64 parameters.
pub const LF4D_HEADER_BYTES: u64 = 4 + 2 + 4 * 4 + 4 * 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackMetadata {
    pub depths_mm: Vec<f64>,
    pub pixel_pitch_mm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<Vec<String>>,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

/// Post-load geometry adjustments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Centre crop to `[width, height]` pixels, applied before resizing.
    #[serde(default)]
    pub crop: Option<[usize; 2]>,
    /// Integer box-filter downsampling factor; 0 and 1 leave the size unchanged.
    #[serde(default)]
    pub downsample: usize,
}

struct RawImage {
    width: usize,
    height: usize,
    full_scale: f64,
    values: Vec<u16>,
}

fn read_gray(path: &Path) -> Result<RawImage> {
    let img = image::ImageReader::open(path)?.with_guessed_format()?.decode()?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(RawImage {
            width,
            height,
            full_scale: u8::MAX as f64,
            values: buf.into_raw().into_iter().map(u16::from).collect(),
        }),
        DynamicImage::ImageLuma16(buf) => Ok(RawImage {
            width,
            height,
            full_scale: u16::MAX as f64,
            values: buf.into_raw(),
        }),
        _ => Err(Error::UnsupportedBitDepth(path.to_path_buf())),
    }
}

fn is_stack_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm")
    )
}

fn center_crop(image: Image2D, width: usize, height: usize) -> Result<Image2D> {
    if width == 0 || height == 0 || width > image.width() || height > image.height() {
        return Err(Error::InvalidRange(format!(
            "crop {width}x{height} does not fit inside {}x{}",
            image.width(),
            image.height()
        )));
    }
    let x0 = (image.width() - width) / 2;
    let y0 = (image.height() - height) / 2;
    Image2D::from_fn(width, height, image.pixel_pitch(), |c, r| image.get(x0 + c, y0 + r))
}

fn box_downsample(image: Image2D, factor: usize) -> Result<Image2D> {
    if factor <= 1 {
        return Ok(image);
    }
    let (w, h) = (image.width() / factor, image.height() / factor);
    if w == 0 || h == 0 {
        return Err(Error::InvalidRange(format!(
            "downsample factor {factor} exceeds image size {}x{}",
            image.width(),
            image.height()
        )));
    }
    let norm = 1.0 / (factor * factor) as f64;
    Image2D::from_fn(w, h, image.pixel_pitch() * factor as f64, |c, r| {
        let mut acc = 0.0;
        for dy in 0..factor {
            for dx in 0..factor {
                acc += image.get(c * factor + dx, r * factor + dy);
            }
        }
        acc * norm
    })
}

/// Reads a stack directory. Images are normalised to `value / full_scale * scale`
/// and ordered by increasing focal depth.
pub fn load_stack(dir: &Path, options: &LoadOptions) -> Result<FocalStack> {
    let meta_path = dir.join(STACK_METADATA);
    if !meta_path.is_file() {
        return Err(Error::MissingMetadata(format!("{} not found", meta_path.display())));
    }
    let meta: StackMetadata = serde_json::from_reader(BufReader::new(File::open(&meta_path)?))?;
    let files: Vec<PathBuf> = match &meta.files {
        Some(names) => names.iter().map(|n| dir.join(n)).collect(),
        None => {
            let mut found: Vec<PathBuf> = fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_stack_image(p))
                .collect();
            found.sort();
            found
        }
    };
    if files.is_empty() {
        return Err(Error::MissingMetadata(format!("no images in {}", dir.display())));
    }
    if files.len() != meta.depths_mm.len() {
        return Err(Error::MissingMetadata(format!(
            "{} images but {} focal depths in {}",
            files.len(),
            meta.depths_mm.len(),
            meta_path.display()
        )));
    }
    if !(meta.pixel_pitch_mm.is_finite() && meta.pixel_pitch_mm > 0.0) {
        return Err(Error::InvalidRange(format!("pixel_pitch_mm must be positive, got {}", meta.pixel_pitch_mm)));
    }
    if !(meta.scale.is_finite() && meta.scale > 0.0) {
        return Err(Error::InvalidRange(format!("scale must be positive, got {}", meta.scale)));
    }

    let mut entries = Vec::with_capacity(files.len());
    let mut dims: Option<(usize, usize, &Path)> = None;
    for (path, &depth) in files.iter().zip(&meta.depths_mm) {
        let raw = read_gray(path)?;
        match dims {
            None => dims = Some((raw.width, raw.height, path)),
            Some((w, h, first)) if (w, h) != (raw.width, raw.height) => {
                return Err(Error::MixedDimensions(format!(
                    "{} is {}x{} but {} is {w}x{h}",
                    path.display(),
                    raw.width,
                    raw.height,
                    first.display()
                )));
            }
            _ => {}
        }
        let data = raw.values.iter().map(|&q| q as f64 / raw.full_scale * meta.scale).collect();
        let mut image = Image2D::new(raw.width, raw.height, meta.pixel_pitch_mm, data)?;
        if let Some([w, h]) = options.crop {
            image = center_crop(image, w, h)?;
        }
        image = box_downsample(image, options.downsample)?;
        entries.push((depth, image));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (depths, images): (Vec<f64>, Vec<Image2D>) = entries.into_iter().unzip();
    FocalStack::new(images, depths)
}

/// Writes every capture as a 16-bit PGM plus `stack.json`. Values are stored
/// relative to `scale = max(1, stack maximum)`, so data already on the
/// `q / 65535 * scale` grid reloads bit-exactly.
pub fn save_stack(stack: &FocalStack, dir: &Path) -> Result<()> {
    stack.validate()?;
    fs::create_dir_all(dir)?;
    let peak = stack.images().iter().map(Image2D::max_value).fold(1.0, f64::max);
    let mut names = Vec::with_capacity(stack.len());
    for (m, image) in stack.images().iter().enumerate() {
        let name = format!("capture_{m:03}.pgm");
        let values: Vec<u16> = image
            .data()
            .iter()
            .map(|&v| (v / peak * u16::MAX as f64).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(image.width() as u32, image.height() as u32, values).expect("buffer sized to image");
        buf.save(dir.join(&name))?;
        names.push(name);
    }
    let meta = StackMetadata {
        depths_mm: stack.focal_depths_mm().to_vec(),
        pixel_pitch_mm: stack.pixel_pitch(),
        files: Some(names),
        scale: peak,
    };
    let mut out = BufWriter::new(File::create(dir.join(STACK_METADATA))?);
    serde_json::to_writer_pretty(&mut out, &meta)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Size in bytes of the LF4D file for a light field of the given shape.
pub fn light_field_file_size(width: usize, height: usize, n_xi: usize, n_eta: usize) -> u64 {
    LF4D_HEADER_BYTES + 4 * (width * height * n_xi * n_eta) as u64
}

/// Writes the LF4D container: magic, version, `width height n_xi n_eta` as u32,
/// `pixel_pitch xi_max eta_max principal_plane_z` as f64, then f32 samples
/// with `x` fastest and `η` slowest, all little-endian.
pub fn save_light_field(lf: &LightField4D, path: &Path) -> Result<()> {
    let ang = lf.angular();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(LF4D_MAGIC)?;
    out.write_all(&LF4D_VERSION.to_le_bytes())?;
    for dim in [lf.width(), lf.height(), ang.n_xi, ang.n_eta] {
        let dim = u32::try_from(dim).map_err(|_| Error::InvalidRange(format!("dimension {dim} exceeds u32")))?;
        out.write_all(&dim.to_le_bytes())?;
    }
    for v in [lf.pixel_pitch(), ang.xi_max, ang.eta_max, lf.principal_plane_z()] {
        out.write_all(&v.to_le_bytes())?;
    }
    for &v in lf.data() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_light_field(path: &Path) -> Result<LightField4D> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let found = bytes.len() as u64;
    if found < 6 {
        return Err(Error::TruncatedFile { expected: LF4D_HEADER_BYTES, found });
    }
    if &bytes[..4] != LF4D_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != LF4D_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    if found < LF4D_HEADER_BYTES {
        return Err(Error::TruncatedFile { expected: LF4D_HEADER_BYTES, found });
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    let (width, height, n_xi, n_eta) = (u32_at(6), u32_at(10), u32_at(14), u32_at(18));
    let (pitch, xi_max, eta_max, plane_z) = (f64_at(22), f64_at(30), f64_at(38), f64_at(46));
    let expected = light_field_file_size(width, height, n_xi, n_eta);
    if found < expected {
        return Err(Error::TruncatedFile { expected, found });
    }
    let data = bytes[LF4D_HEADER_BYTES as usize..expected as usize]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let angular = AngularSampling::new(xi_max, n_xi, eta_max, n_eta)?;
    Ok(LightField4D::new(width, height, pitch, angular, data)?.with_principal_plane(plane_z))
}

/// Display bit depth for [`save_image_png`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Writes `image` as grayscale PNG scaled so its maximum maps to full white.
/// Negative values clip to black; an all-zero image stays black.
pub fn save_image_png(image: &Image2D, path: &Path, depth: BitDepth) -> Result<()> {
    let peak = image.max_value();
    let norm = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let (w, h) = (image.width() as u32, image.height() as u32);
    let unit = image.data().iter().map(|&v| (v * norm).clamp(0.0, 1.0));
    match depth {
        BitDepth::Eight => {
            let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                ImageBuffer::from_raw(w, h, unit.map(|v| (v * 255.0).round() as u8).collect()).expect("sized");
            buf.save_with_format(path, image::ImageFormat::Png)?;
        }
        BitDepth::Sixteen => {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(w, h, unit.map(|v| (v * 65535.0).round() as u16).collect()).expect("sized");
            buf.save_with_format(path, image::ImageFormat::Png)?;
        }
    }
    Ok(())
}

/// Writes the raw slice indices of `map` as a 16-bit grayscale PNG.
pub fn save_depth_map_png(map: &DepthIndexMap, path: &Path) -> Result<()> {
    let values = map
        .indices()
        .iter()
        .map(|&k| u16::try_from(k).map_err(|_| Error::InvalidRange(format!("slice index {k} exceeds 16 bits"))))
        .collect::<Result<Vec<u16>>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width() as u32, map.height() as u32, values).expect("sized");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Reads a 16-bit depth map PNG back into raw indices.
pub fn load_depth_map_png(path: &Path) -> Result<(usize, usize, Vec<usize>)> {
    let raw = read_gray(path)?;
    Ok((raw.width, raw.height, raw.values.into_iter().map(usize::from).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fifty_four_bytes() {
        assert_eq!(LF4D_HEADER_BYTES, 54);
        assert_eq!(light_field_file_size(256, 256, 50, 50), 54 + 4 * 256 * 256 * 2500);
        assert_eq!(light_field_file_size(256, 256, 50, 50), 655_360_054);
    }

    #[test]
    fn crop_takes_centre() {
        let img = Image2D::from_fn(6, 4, 1.0, |c, r| (r * 6 + c) as f64).unwrap();
        let out = center_crop(img, 2, 2).unwrap();
        assert_eq!(out.data(), &[8.0, 9.0, 14.0, 15.0]);
    }

    #[test]
    fn crop_larger_than_image_rejected() {
        let img = Image2D::zeros(4, 4, 1.0);
        assert!(matches!(center_crop(img, 5, 2), Err(Error::InvalidRange(_))));
    }

    #[test]
    fn box_downsample_averages_blocks() {
        let img = Image2D::from_fn(4, 2, 0.5, |c, r| (r * 4 + c) as f64).unwrap();
        let out = box_downsample(img, 2).unwrap();
        assert_eq!((out.width(), out.height(), out.pixel_pitch()), (2, 1, 1.0));
        assert_eq!(out.data(), &[(0.0 + 1.0 + 4.0 + 5.0) / 4.0, (2.0 + 3.0 + 6.0 + 7.0) / 4.0]);
    }
}
