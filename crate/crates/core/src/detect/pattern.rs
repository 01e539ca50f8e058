//! Machine-readable count header embedded in synthetic camera frames.
//!
//! The header is three rows of 22 solid black/white blocks across the top of
//! the image. Row 0 is an alternating sync pattern; rows 1-2 hold the five
//! class counts as bytes (MSB first, class ordinal order) followed by a 4-bit
//! check nibble. Blocks are large and saturated so the code survives JPEG
//! compression.

use image::{GrayImage, Luma, Rgb, RgbImage};
use thiserror::Error;

use crate::model::{ClassCounts, VehicleClass};

pub const BLOCKS_PER_ROW: u32 = 22;
pub const HEADER_ROWS: u32 = 3;
const MIN_BLOCK: u32 = 8;
const DATA_BITS: usize = 40;
const BACKGROUND: Rgb<u8> = Rgb([96, 100, 104]);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("count {count} for {class} exceeds the encodable range 0..=255")]
    CountOutOfRange { class: VehicleClass, count: u32 },
    #[error("image {width}x{height} is too small for the count header")]
    ImageTooSmall { width: u32, height: u32 },
}

fn block_size(width: u32, height: u32) -> Result<u32, PatternError> {
    let block = width / BLOCKS_PER_ROW;
    if block < MIN_BLOCK || height < block * HEADER_ROWS {
        return Err(PatternError::ImageTooSmall { width, height });
    }
    Ok(block)
}

fn check_nibble(bytes: &[u8; 5]) -> u8 {
    let x = bytes.iter().fold(0x5Au8, |acc, b| acc ^ b.rotate_left(1));
    (x >> 4) ^ (x & 0x0F)
}

fn header_bits(counts: &ClassCounts) -> Result<Vec<bool>, PatternError> {
    let mut bytes = [0u8; 5];
    for (class, count) in counts.iter() {
        bytes[class.ordinal()] =
            u8::try_from(count).map_err(|_| PatternError::CountOutOfRange { class, count })?;
    }
    let mut bits: Vec<bool> = (0..BLOCKS_PER_ROW).map(|i| i % 2 == 0).collect();
    for byte in bytes {
        bits.extend((0..8).rev().map(|i| byte >> i & 1 == 1));
    }
    let check = check_nibble(&bytes);
    bits.extend((0..4).rev().map(|i| check >> i & 1 == 1));
    debug_assert_eq!(bits.len(), (BLOCKS_PER_ROW * HEADER_ROWS) as usize);
    Ok(bits)
}

/// Renders a `width`×`height` test frame carrying `counts` in its header.
pub fn render_pattern(counts: &ClassCounts, width: u32, height: u32) -> Result<RgbImage, PatternError> {
    let block = block_size(width, height)?;
    let bits = header_bits(counts)?;
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);
    for (i, &bit) in bits.iter().enumerate() {
        let (bx, by) = (i as u32 % BLOCKS_PER_ROW, i as u32 / BLOCKS_PER_ROW);
        let color = if bit { Rgb([255, 255, 255]) } else { Rgb([0, 0, 0]) };
        for y in by * block..(by + 1) * block {
            for x in bx * block..(bx + 1) * block {
                img.put_pixel(x, y, color);
            }
        }
    }
    // A few darker lane stripes below the header so frames are not flat.
    for y in (block * HEADER_ROWS + 8..height).step_by(24) {
        for x in 0..width {
            img.put_pixel(x, y, Rgb([60, 60, 60]));
        }
    }
    Ok(img)
}

fn sample_bit(gray: &GrayImage, bx: u32, by: u32, block: u32) -> bool {
    // Average the central half of the block, away from JPEG ringing at edges.
    let inset = block / 4;
    let (x0, y0) = (bx * block + inset, by * block + inset);
    let (mut sum, mut n) = (0u32, 0u32);
    for y in y0..y0 + block - 2 * inset {
        for x in x0..x0 + block - 2 * inset {
            let Luma([v]) = *gray.get_pixel(x, y);
            sum += u32::from(v);
            n += 1;
        }
    }
    sum / n > 127
}

/// Reads the count header. `None` when the image carries no valid header.
pub fn decode_pattern(gray: &GrayImage) -> Option<ClassCounts> {
    let block = block_size(gray.width(), gray.height()).ok()?;
    let bits: Vec<bool> = (0..BLOCKS_PER_ROW * HEADER_ROWS)
        .map(|i| sample_bit(gray, i % BLOCKS_PER_ROW, i / BLOCKS_PER_ROW, block))
        .collect();
    let (sync, payload) = bits.split_at(BLOCKS_PER_ROW as usize);
    if sync.iter().enumerate().any(|(i, &b)| b != (i % 2 == 0)) {
        return None;
    }
    let mut bytes = [0u8; 5];
    for (k, byte) in bytes.iter_mut().enumerate() {
        *byte = payload[k * 8..k * 8 + 8].iter().fold(0, |acc, &b| acc << 1 | u8::from(b));
    }
    let check = payload[DATA_BITS..].iter().fold(0u8, |acc, &b| acc << 1 | u8::from(b));
    if check != check_nibble(&bytes) {
        return None;
    }
    Some(ClassCounts::from_array(bytes.map(u32::from)))
}

/// Encodes the pattern frame as JPEG.
pub fn encode_pattern_jpeg(counts: &ClassCounts, width: u32, height: u32, quality: u8) -> Result<Vec<u8>, PatternError> {
    let img = render_pattern(counts, width, height)?;
    let mut out = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality)
        .encode_image(&img)
        .expect("in-memory JPEG encoding cannot fail");
    Ok(out)
}
