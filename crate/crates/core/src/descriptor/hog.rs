//! Whole-image histogram of oriented gradients.
//!
//! The frame is resized (bilinear) to a fixed resolution, gradients are taken
//! with the centred `[-1, 0, 1]` kernel under replicate borders, and each
//! pixel votes its gradient magnitude into one unsigned orientation bin of its
//! cell. Overlapping blocks of cells are L2-normalised and concatenated in
//! row-major block order.

use std::time::Instant;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Descriptor, DescriptorSet};
use crate::dataset::ImageSet;
use crate::error::{Error, Result};

pub const TECHNIQUE_NAME: &str = "HOG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogParams {
    pub resize_width: u32,
    pub resize_height: u32,
    /// Cell side in pixels.
    pub cell_size: u32,
    /// Block side in cells.
    pub block_size: u32,
    /// Block stride in cells.
    pub block_stride: u32,
    /// Unsigned orientation bins over [0, 180) degrees.
    pub bins: u32,
    pub epsilon: f32,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            resize_width: 512,
            resize_height: 512,
            cell_size: 16,
            block_size: 2,
            block_stride: 1,
            bins: 9,
            epsilon: 1e-5,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("hog params: {msg}")));
        if self.cell_size == 0 || self.block_size == 0 || self.block_stride == 0 || self.bins == 0 {
            return bad("cell_size, block_size, block_stride and bins must be >= 1".into());
        }
        if !self.resize_width.is_multiple_of(self.cell_size) || !self.resize_height.is_multiple_of(self.cell_size) {
            return bad(format!(
                "resize {}x{} not divisible by cell size {}",
                self.resize_width, self.resize_height, self.cell_size
            ));
        }
        let (cx, cy) = self.cells();
        if self.block_size > cx || self.block_size > cy {
            return bad(format!("block of {} cells exceeds {cx}x{cy} cell grid", self.block_size));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Cell grid as (columns, rows).
    pub fn cells(&self) -> (u32, u32) {
        (self.resize_width / self.cell_size, self.resize_height / self.cell_size)
    }

    /// Block grid as (columns, rows).
    pub fn blocks(&self) -> (u32, u32) {
        let (cx, cy) = self.cells();
        (
            (cx - self.block_size) / self.block_stride + 1,
            (cy - self.block_size) / self.block_stride + 1,
        )
    }

    pub fn num_blocks(&self) -> usize {
        let (bx, by) = self.blocks();
        bx as usize * by as usize
    }

    pub fn descriptor_len(&self) -> usize {
        self.num_blocks() * (self.block_size * self.block_size * self.bins) as usize
    }
}

/// Bilinear resample with pixel-centre alignment and clamped borders.
pub fn resize_bilinear(image: &GrayImage, width: u32, height: u32) -> Vec<f32> {
    let (sw, sh) = image.dimensions();
    let src = image.as_raw();
    let scale_x = sw as f32 / width as f32;
    let scale_y = sh as f32 / height as f32;

    let axis = |dst: u32, scale: f32, len: u32| -> (usize, usize, f32) {
        let s = ((dst as f32 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f32);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(len as usize - 1);
        (i0, i1, s - i0 as f32)
    };
    let cols: Vec<_> = (0..width).map(|x| axis(x, scale_x, sw)).collect();

    let mut out = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, scale_y, sh);
        let row0 = &src[y0 * sw as usize..(y0 + 1) * sw as usize];
        let row1 = &src[y1 * sw as usize..(y1 + 1) * sw as usize];
        for &(x0, x1, fx) in &cols {
            let top = f32::from(row0[x0]) * (1.0 - fx) + f32::from(row0[x1]) * fx;
            let bottom = f32::from(row1[x0]) * (1.0 - fx) + f32::from(row1[x1]) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Orientation bin of an unsigned gradient direction.
pub fn orientation_bin(gx: f32, gy: f32, bins: u32) -> usize {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if angle >= 180.0 {
        angle -= 180.0;
    }
    let width = 180.0 / bins as f32;
    ((angle / width) as usize).min(bins as usize - 1)
}

/// Per-cell orientation histograms, laid out `[cell_row][cell_col][bin]`.
pub fn cell_histograms(pixels: &[f32], params: &HogParams) -> Vec<f32> {
    let w = params.resize_width as usize;
    let h = params.resize_height as usize;
    let cs = params.cell_size as usize;
    let bins = params.bins as usize;
    let (cx, cy) = params.cells();
    let mut hist = vec![0.0f32; cx as usize * cy as usize * bins];

    let at = |x: usize, y: usize| pixels[y * w + x];
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            let gx = at(right, y) - at(left, y);
            let gy = at(x, down) - at(x, up);
            let magnitude = (gx * gx + gy * gy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let bin = orientation_bin(gx, gy, params.bins);
            let cell = (y / cs) * cx as usize + x / cs;
            hist[cell * bins + bin] += magnitude;
        }
    }
    hist
}

/// Encodes one grayscale frame.
pub fn encode_hog(image: &GrayImage, params: &HogParams) -> Result<Descriptor> {
    params.validate()?;
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::InvalidArgument("cannot encode an image with 0 pixels".into()));
    }
    let pixels = resize_bilinear(image, params.resize_width, params.resize_height);
    let hist = cell_histograms(&pixels, params);

    let bins = params.bins as usize;
    let (cells_x, _) = params.cells();
    let (blocks_x, blocks_y) = params.blocks();
    let eps_sq = params.epsilon * params.epsilon;
    let mut values = Vec::with_capacity(params.descriptor_len());
    let mut block = Vec::with_capacity((params.block_size * params.block_size) as usize * bins);
    for by in 0..blocks_y {
        for bx in 0..blocks_x {
            block.clear();
            for dy in 0..params.block_size {
                for dx in 0..params.block_size {
                    let row = by * params.block_stride + dy;
                    let col = bx * params.block_stride + dx;
                    let cell = (row * cells_x + col) as usize;
                    block.extend_from_slice(&hist[cell * bins..(cell + 1) * bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f32>() + eps_sq).sqrt();
            values.extend(block.iter().map(|v| v / norm));
        }
    }
    Descriptor::new(values)
}

/// Encodes every frame of a traverse. The reported encoding time is the mean
/// per-frame wall-clock time, measured inside each worker.
pub fn encode_set(images: &ImageSet, params: &HogParams) -> Result<DescriptorSet> {
    params.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("cannot encode an empty image set".into()));
    }
    let encoded = images
        .frames()
        .par_iter()
        .map(|frame| {
            let start = Instant::now();
            let d = encode_hog(frame, params)?;
            Ok((d, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = encoded.iter().map(|(_, t)| t).sum();
    let per_frame = total / encoded.len() as f64;
    let descriptors = encoded.into_iter().map(|(d, _)| d).collect();
    DescriptorSet::new(TECHNIQUE_NAME, descriptors, per_frame)
}
