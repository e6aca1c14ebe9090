//! Raster representation of a moment: nearest-player control regions for
//! the passer (black), the passer's teammates (blue) and the opponents
//! (red), the target hull blended in green, attack pointing up the image.

use crate::detect::P3Moment;
use crate::geometry::{round_half_up, voronoi_owner_grid, PixelMapping, Point};
use serde::{Deserialize, Serialize};
use std::io::Cursor;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub team_possession: Rgb,
    pub team_opposition: Rgb,
    pub passer: Rgb,
    pub hull: Rgb,
    pub background: Rgb,
    pub hull_alpha: f64,
    pub clip_to_visible_area: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 224,
            height: 224,
            team_possession: [0, 0, 255],
            team_opposition: [255, 0, 0],
            passer: [0, 0, 0],
            hull: [0, 255, 0],
            background: [255, 255, 255],
            hull_alpha: 0.5,
            clip_to_visible_area: true,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("canvas {0}x{1} is smaller than 16x16")]
    CanvasTooSmall(usize, usize),
    #[error("hull alpha {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("png: {0}")]
    Png(String),
    #[error("expected an 8-bit RGB image")]
    UnsupportedPng,
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width < 16 || self.height < 16 {
            return Err(RenderError::CanvasTooSmall(self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.hull_alpha) {
            return Err(RenderError::BadAlpha(self.hull_alpha));
        }
        Ok(())
    }

    pub fn mapping(&self) -> PixelMapping {
        PixelMapping::new(self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: color.repeat(width * height),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Rgb {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, row: usize, col: usize, c: Rgb) {
        let i = (row * self.width + col) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Box-filter resample to `width × height`, output channels in [0, 1],
    /// laid out channel-major (C × H × W).
    pub fn to_tensor(&self, width: usize, height: usize) -> Vec<f64> {
        let mut out = vec![0.0; 3 * width * height];
        if width == self.width && height == self.height {
            for (i, px) in self.pixels.chunks_exact(3).enumerate() {
                for c in 0..3 {
                    out[c * width * height + i] = px[c] as f64 / 255.0;
                }
            }
            return out;
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        let row_spans: Vec<_> = (0..height).map(|r| spans(r, sy, self.height)).collect();
        let col_spans: Vec<_> = (0..width).map(|c| spans(c, sx, self.width)).collect();
        let norm = 1.0 / (sx * sy * 255.0);
        for (r, rs) in row_spans.iter().enumerate() {
            for (c, cs) in col_spans.iter().enumerate() {
                let mut acc = [0.0f64; 3];
                for &(sr, wr) in rs {
                    for &(sc, wc) in cs {
                        let px = self.get(sr, sc);
                        for k in 0..3 {
                            acc[k] += wr * wc * px[k] as f64;
                        }
                    }
                }
                for (k, a) in acc.iter().enumerate() {
                    out[k * width * height + r * width + c] = a * norm;
                }
            }
        }
        out
    }
}

/// Source pixels covered by destination cell `i` at scale `s`, with the
/// covered fraction of each.
fn spans(i: usize, s: f64, len: usize) -> Vec<(usize, f64)> {
    let lo = i as f64 * s;
    let hi = lo + s;
    let mut out = Vec::new();
    let mut k = lo.floor() as usize;
    while (k as f64) < hi && k < len {
        let w = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
        if w > 0.0 {
            out.push((k, w));
        }
        k += 1;
    }
    out
}

fn blend(c: Rgb, over: Rgb, alpha: f64) -> Rgb {
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = round_half_up((1.0 - alpha) * c[k] as f64 + alpha * over[k] as f64) as u8;
    }
    out
}

/// Control-region seeds for a moment and the color of each. Frames without
/// an actor flag get the pass origin appended as the passer.
pub fn seeds_and_colors(moment: &P3Moment, cfg: &RenderConfig) -> (Vec<Point>, Vec<Rgb>) {
    let mut seeds = Vec::with_capacity(moment.all_players.len() + 1);
    let mut colors = Vec::with_capacity(moment.all_players.len() + 1);
    for p in &moment.all_players {
        seeds.push(p.location);
        colors.push(if p.actor {
            cfg.passer
        } else if p.teammate {
            cfg.team_possession
        } else {
            cfg.team_opposition
        });
    }
    if moment.passer_index().is_none() {
        seeds.push(moment.origin);
        colors.push(cfg.passer);
    }
    (seeds, colors)
}

pub fn render_moment(moment: &P3Moment, cfg: &RenderConfig) -> RasterImage {
    let mapping = cfg.mapping();
    let (seeds, colors) = seeds_and_colors(moment, cfg);
    let clip = if cfg.clip_to_visible_area {
        moment.visible_area.as_ref()
    } else {
        None
    };
    let grid = voronoi_owner_grid(&seeds, &mapping, clip);
    let mut img = RasterImage::filled(cfg.width, cfg.height, cfg.background);
    for row in 0..cfg.height {
        for col in 0..cfg.width {
            let mut c = match grid.get(row, col) {
                Some(owner) => colors[owner as usize],
                None => cfg.background,
            };
            if moment.hull.contains(mapping.pixel_center(row, col)) {
                c = blend(c, cfg.hull, cfg.hull_alpha);
            }
            img.set(row, col, c);
        }
    }
    img
}

/// 8-bit RGB PNG with a fixed filter and compression level.
pub fn encode_png(image: &RasterImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Balanced);
        enc.set_filter(png::Filter::Paeth);
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer
            .write_image_data(&image.pixels)
            .expect("pixel buffer matches the header");
    }
    out
}

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, RenderError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| RenderError::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RenderError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RenderError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(RenderError::UnsupportedPng);
    }
    buf.truncate(info.buffer_size());
    Ok(RasterImage {
        width: info.width as usize,
        height: info.height as usize,
        pixels: buf,
    })
}

/// Line of `images/index.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageIndexEntry {
    pub moment_id: String,
    pub match_id: String,
    pub label: crate::detect::Label,
    pub file: String,
    pub sha256: String,
}
