//! RGBA rasters, PNG serialization and the cursor sprite.

use std::io::Cursor;
use std::sync::Arc;

use thiserror::Error;

use crate::env::CursorState;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BadLength { got: usize, expected: usize },
}

pub type Rgba = [u8; 4];

/// Row-major 8-bit RGBA image. Clones share the pixel buffer until one is written.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Arc<Vec<u8>>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Raster {
    /// Transparent black raster.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: Arc::new(vec![0; width as usize * height as usize * 4]),
        }
    }

    pub fn filled(width: u32, height: u32, color: Rgba) -> Self {
        Self {
            width,
            height,
            pixels: Arc::new(color.repeat(width as usize * height as usize)),
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(RasterError::BadLength {
                got: pixels.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            pixels: Arc::new(pixels),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn pixels_mut(&mut self) -> &mut [u8] {
        Arc::make_mut(&mut self.pixels).as_mut_slice()
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn get(&self, x: u32, y: u32) -> Option<Rgba> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let o = self.offset(x, y);
        Some([
            self.pixels[o],
            self.pixels[o + 1],
            self.pixels[o + 2],
            self.pixels[o + 3],
        ])
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgba) {
        if x < self.width && y < self.height {
            let o = self.offset(x, y);
            self.pixels_mut()[o..o + 4].copy_from_slice(&color);
        }
    }

    /// Source-over blend of `color` onto pixel (x, y); out-of-range is a no-op.
    pub fn blend(&mut self, x: i64, y: i64, color: Rgba) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let o = self.offset(x as u32, y as u32);
        let dst = &mut self.pixels_mut()[o..o + 4];
        let sa = color[3] as u32;
        if sa == 255 {
            dst.copy_from_slice(&color);
            return;
        }
        if sa == 0 {
            return;
        }
        let da = dst[3] as u32;
        let out_a = sa * 255 + da * (255 - sa);
        if out_a == 0 {
            dst.copy_from_slice(&[0, 0, 0, 0]);
            return;
        }
        for c in 0..3 {
            let v = (color[c] as u32 * sa * 255 + dst[c] as u32 * da * (255 - sa) + out_a / 2) / out_a;
            dst[c] = v.min(255) as u8;
        }
        dst[3] = ((out_a + 127) / 255).min(255) as u8;
    }

    /// Fill a rectangle clipped to the raster.
    pub fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgba) {
        let x0 = x.max(0);
        let y0 = y.max(0);
        let x1 = (x + w).min(self.width as i64);
        let y1 = (y + h).min(self.height as i64);
        for py in y0..y1 {
            for px in x0..x1 {
                self.set(px as u32, py as u32, color);
            }
        }
    }

    /// Nearest-neighbour resample.
    pub fn resize_nearest(&self, width: u32, height: u32) -> Raster {
        let mut out = Raster::new(width, height);
        for y in 0..height {
            let sy = (y as u64 * self.height as u64 / height as u64) as u32;
            for x in 0..width {
                let sx = (x as u64 * self.width as u64 / width as u64) as u32;
                if let Some(c) = self.get(sx, sy) {
                    out.set(x, y, c);
                }
            }
        }
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width, self.height);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Fastest);
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.pixels)?;
        }
        Ok(buf)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info()?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| RasterError::Unsupported("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        let (w, h) = (info.width, info.height);
        let pixels = match info.color_type {
            png::ColorType::Rgba => buf,
            png::ColorType::Rgb => buf
                .chunks_exact(3)
                .flat_map(|p| [p[0], p[1], p[2], 255])
                .collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g, 255]).collect(),
            png::ColorType::GrayscaleAlpha => buf
                .chunks_exact(2)
                .flat_map(|p| [p[0], p[0], p[0], p[1]])
                .collect(),
            other => return Err(RasterError::Unsupported(format!("{other:?}"))),
        };
        Raster::from_pixels(w, h, pixels)
    }
}

pub const SPRITE_WIDTH: u32 = 16;
pub const SPRITE_HEIGHT: u32 = 24;
/// Arrow tip offset inside the sprite.
pub const SPRITE_HOTSPOT: (u32, u32) = (0, 0);

// B = black fill, W = white outline, . = transparent.
const ARROW: [&str; SPRITE_HEIGHT as usize] = [
    "W...............",
    "WW..............",
    "WBW.............",
    "WBBW............",
    "WBBBW...........",
    "WBBBBW..........",
    "WBBBBBW.........",
    "WBBBBBBW........",
    "WBBBBBBBW.......",
    "WBBBBBBBBW......",
    "WBBBBBBBBBW.....",
    "WBBBBBBBBBBW....",
    "WBBBBBBBBBBBW...",
    "WBBBBBBWWWWWW...",
    "WBBBWBBW........",
    "WBBWWBBBW.......",
    "WBW..WBBW.......",
    "WW...WBBBW......",
    "W.....WBBW......",
    "......WBBBW.....",
    ".......WBBW.....",
    ".......WWWW.....",
    "................",
    "................",
];

pub const SPRITE_BLACK: Rgba = [0, 0, 0, 255];
pub const SPRITE_WHITE: Rgba = [255, 255, 255, 255];

/// The bundled cursor sprite: black up-left arrow with a 1-px white outline.
pub fn cursor_sprite() -> Raster {
    let mut sprite = Raster::new(SPRITE_WIDTH, SPRITE_HEIGHT);
    for (y, row) in ARROW.iter().enumerate() {
        for (x, ch) in row.bytes().enumerate() {
            let color = match ch {
                b'B' => SPRITE_BLACK,
                b'W' => SPRITE_WHITE,
                _ => continue,
            };
            sprite.set(x as u32, y as u32, color);
        }
    }
    sprite
}

fn sprite() -> &'static Raster {
    static SPRITE: std::sync::OnceLock<Raster> = std::sync::OnceLock::new();
    SPRITE.get_or_init(cursor_sprite)
}

/// Screen rectangle (x, y, w, h) covered by the sprite for a cursor position.
pub fn sprite_rect(cursor: &CursorState) -> (i64, i64, i64, i64) {
    let ox = cursor.x.floor() as i64 - SPRITE_HOTSPOT.0 as i64;
    let oy = cursor.y.floor() as i64 - SPRITE_HOTSPOT.1 as i64;
    (ox, oy, SPRITE_WIDTH as i64, SPRITE_HEIGHT as i64)
}

/// Returns a copy of `screenshot` with the cursor sprite blended so that its
/// hotspot sits on the cursor pixel. Sprite pixels outside the raster are clipped.
pub fn composite_cursor(screenshot: &Raster, cursor: &CursorState) -> Raster {
    let mut out = screenshot.clone();
    let sprite = sprite();
    let (ox, oy, _, _) = sprite_rect(cursor);
    for sy in 0..sprite.height() {
        for sx in 0..sprite.width() {
            let c = sprite.get(sx, sy).unwrap_or([0; 4]);
            if c[3] == 0 {
                continue;
            }
            out.blend(ox + sx as i64, oy + sy as i64, c);
        }
    }
    out
}
