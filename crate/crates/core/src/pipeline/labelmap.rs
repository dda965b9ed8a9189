//! Per-pixel category labelings stored as 8-bit indexed PNG.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved label for pixels excluded from evaluation.
pub const VOID: u8 = 255;

/// A per-pixel category labeling. Index 0 is background, [`VOID`] marks
/// pixels outside the evaluation, and every other index refers to the
/// dataset's category table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        Ok(LabelMap { width, height, labels })
    }

    /// An all-background labeling.
    pub fn background(width: usize, height: usize) -> Self {
        LabelMap { width, height, labels: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Label at `(x, y)`; panics out of bounds.
    pub fn get(&self, x: usize, y: usize) -> u8 {
        assert!(x < self.width && y < self.height, "label access out of bounds");
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        assert!(x < self.width && y < self.height, "label access out of bounds");
        self.labels[y * self.width + x] = label;
    }

    /// Row-major label data.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Largest non-void label present, if any non-void pixel exists.
    pub fn max_label(&self) -> Option<u8> {
        self.labels.iter().copied().filter(|&l| l != VOID).max()
    }

    /// Reads an 8-bit indexed or 8-bit grayscale PNG as raw label indices.
    /// Palette entries are deliberately ignored: the pixel bytes themselves
    /// are the labels, which is how VOC-style annotations are stored.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let err = |reason: String| Error::Png { path: path.to_path_buf(), reason };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        // No transformations: indexed data must arrive as raw indices, not
        // expanded palette colors.
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
        let info = reader.info();
        if !matches!(
            info.color_type,
            png::ColorType::Indexed | png::ColorType::Grayscale
        ) {
            return Err(err(format!(
                "label map must be indexed or grayscale, got {:?}",
                info.color_type
            )));
        }
        if info.bit_depth != png::BitDepth::Eight {
            return Err(err(format!(
                "label map must be 8-bit, got {:?}",
                info.bit_depth
            )));
        }
        let (width, height) = (info.width as usize, info.height as usize);
        let mut buf = vec![0u8; reader.output_buffer_size()];
        let frame = reader
            .next_frame(&mut buf)
            .map_err(|e| err(e.to_string()))?;
        buf.truncate(frame.buffer_size());
        LabelMap::new(width, height, buf)
    }

    /// Writes an 8-bit indexed PNG carrying the VOC color palette, so the
    /// file is viewable directly and round-trips the raw indices.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |reason: String| Error::Png { path: path.to_path_buf(), reason };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Indexed);
        encoder.set_depth(png::BitDepth::Eight);
        let palette: Vec<u8> = voc_palette().iter().flat_map(|c| c.iter().copied()).collect();
        encoder.set_palette(palette);
        let mut writer = encoder.write_header().map_err(|e| err(e.to_string()))?;
        writer
            .write_image_data(&self.labels)
            .map_err(|e| err(e.to_string()))
    }

    /// Writes a plain RGB PNG with each label replaced by its VOC palette
    /// color, for viewers that ignore palettes.
    pub fn save_color_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |reason: String| Error::Png { path: path.to_path_buf(), reason };
        let palette = voc_palette();
        let mut rgb = Vec::with_capacity(self.labels.len() * 3);
        for &l in &self.labels {
            rgb.extend_from_slice(&palette[l as usize]);
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder =
            png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| err(e.to_string()))?;
        writer.write_image_data(&rgb).map_err(|e| err(e.to_string()))
    }
}

/// The 256-entry VOC color table. Entry `i` spreads the bits of `i` across
/// the three channels, three bits per round, most significant first; entry
/// 255 comes out as the familiar void color (224, 224, 192).
pub fn voc_palette() -> [[u8; 3]; 256] {
    let mut palette = [[0u8; 3]; 256];
    for (i, rgb) in palette.iter_mut().enumerate() {
        let mut id = i;
        for j in 0..8 {
            rgb[0] |= ((id & 1) as u8) << (7 - j);
            rgb[1] |= (((id >> 1) & 1) as u8) << (7 - j);
            rgb[2] |= (((id >> 2) & 1) as u8) << (7 - j);
            id >>= 3;
        }
    }
    palette
}
