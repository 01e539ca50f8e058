use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};

use super::DetectError;

pub const DEFAULT_INPUT_SIZE: u32 = 352;
pub const PAD_GRAY: Rgb<u8> = Rgb([114, 114, 114]);

/// Placement of the resized source inside the square detector input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterboxGeometry {
    pub target: u32,
    /// Uniform scale applied to the longest side.
    pub scale: f64,
    /// Effective per-axis scales after rounding to whole pixels.
    pub scale_x: f64,
    pub scale_y: f64,
    pub resized_width: u32,
    pub resized_height: u32,
    pub pad_left: u32,
    pub pad_top: u32,
}

impl LetterboxGeometry {
    pub fn compute(width: u32, height: u32, target: u32) -> Result<Self, DetectError> {
        if width == 0 || height == 0 || target == 0 {
            return Err(DetectError::EmptyImage { width, height });
        }
        let scale = f64::from(target) / f64::from(width.max(height));
        let resized_width = ((f64::from(width) * scale).round() as u32).clamp(1, target);
        let resized_height = ((f64::from(height) * scale).round() as u32).clamp(1, target);
        Ok(Self {
            target,
            scale,
            scale_x: f64::from(resized_width) / f64::from(width),
            scale_y: f64::from(resized_height) / f64::from(height),
            resized_width,
            resized_height,
            pad_left: (target - resized_width) / 2,
            pad_top: (target - resized_height) / 2,
        })
    }

    pub fn pad_right(&self) -> u32 {
        self.target - self.resized_width - self.pad_left
    }

    pub fn pad_bottom(&self) -> u32 {
        self.target - self.resized_height - self.pad_top
    }

    /// Source pixel coordinates to detector input coordinates.
    pub fn to_input(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x * self.scale_x + f64::from(self.pad_left),
            y * self.scale_y + f64::from(self.pad_top),
        )
    }

    /// Detector input coordinates (e.g. a box corner) back to the source image.
    pub fn to_source(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - f64::from(self.pad_left)) / self.scale_x,
            (y - f64::from(self.pad_top)) / self.scale_y,
        )
    }
}

/// Aspect-preserving resize of the longest side to `target`, centred on a
/// neutral gray square canvas.
pub fn letterbox(image: &RgbImage, target: u32) -> Result<(RgbImage, LetterboxGeometry), DetectError> {
    let geometry = LetterboxGeometry::compute(image.width(), image.height(), target)?;
    let mut canvas = RgbImage::from_pixel(target, target, PAD_GRAY);
    if (geometry.resized_width, geometry.resized_height) == image.dimensions() {
        imageops::replace(&mut canvas, image, geometry.pad_left.into(), geometry.pad_top.into());
    } else {
        let resized = imageops::resize(image, geometry.resized_width, geometry.resized_height, FilterType::Triangle);
        imageops::replace(&mut canvas, &resized, geometry.pad_left.into(), geometry.pad_top.into());
    }
    Ok((canvas, geometry))
}
