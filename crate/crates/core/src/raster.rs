//! RGB8 raster buffer, scanline fills and binary PPM (P6) I/O.
//!
//! Pixel `(i, j)` samples the continuous image point `(i, j)`; there is no
//! anti-aliasing so output is bit-exact across platforms.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::geometry::Vec2;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&fill);
        }
        Self { width, height, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: i64, y: i64, color: Rgb) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    fn span(&mut self, y: i64, x0: i64, x1: i64, color: Rgb) {
        if y < 0 || y >= self.height as i64 {
            return;
        }
        let x0 = x0.max(0);
        let x1 = x1.min(self.width as i64 - 1);
        if x0 > x1 {
            return;
        }
        let row = y as usize * self.width as usize;
        for px in self.pixels[(row + x0 as usize) * 3..(row + x1 as usize + 1) * 3].chunks_exact_mut(3) {
            px.copy_from_slice(&color);
        }
    }

    /// Even-odd scanline fill.
    pub fn fill_polygon(&mut self, polygon: &[Vec2], color: Rgb) {
        if polygon.len() < 3 {
            return;
        }
        let (lo, hi) = polygon.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.y), hi.max(p.y))
        });
        let y0 = (lo.ceil() as i64).max(0);
        let y1 = (hi.floor() as i64).min(self.height as i64 - 1);
        let mut xs = Vec::new();
        for y in y0..=y1 {
            let yf = y as f64;
            xs.clear();
            for i in 0..polygon.len() {
                let a = polygon[i];
                let b = polygon[(i + 1) % polygon.len()];
                if (a.y <= yf && yf < b.y) || (b.y <= yf && yf < a.y) {
                    xs.push(a.x + (yf - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                self.span(y, pair[0].ceil() as i64, pair[1].floor() as i64, color);
            }
        }
    }

    pub fn fill_disc(&mut self, center: Vec2, radius: f64, color: Rgb) {
        let y0 = (center.y - radius).ceil() as i64;
        let y1 = (center.y + radius).floor() as i64;
        for y in y0..=y1 {
            let dy = y as f64 - center.y;
            let half = (radius * radius - dy * dy).max(0.0).sqrt();
            self.span(
                y,
                (center.x - half).ceil() as i64,
                (center.x + half).floor() as i64,
                color,
            );
        }
    }

    pub fn draw_outline(&mut self, polygon: &[Vec2], color: Rgb) {
        for (x, y) in outline_pixels(polygon, self.width, self.height) {
            self.put(x as i64, y as i64, color);
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_ppm(&self, mut w: impl Write) -> io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn read_ppm(mut r: impl Read) -> Result<Image, PpmError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_ppm(&bytes)
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Image, PpmError> {
        let mut fields = Vec::with_capacity(4);
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(PpmError::Header("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| PpmError::Header("non-ascii header"))?);
        }
        if fields[0] != "P6" {
            return Err(PpmError::Header("not a binary P6 pixmap"));
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| PpmError::Header("bad number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(PpmError::Header("only maxval 255 is supported"));
        }
        // exactly one whitespace byte separates the header from the raster
        let data = &bytes[(i + 1).min(bytes.len())..];
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(PpmError::Size {
                expected,
                actual: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            pixels: data.to_vec(),
        })
    }
}

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad PPM header: {0}")]
    Header(&'static str),
    #[error("PPM raster has {actual} bytes, expected {expected}")]
    Size { expected: usize, actual: usize },
}

/// Pixels touched by a closed 2 px outline of `polygon`, clipped to the image
/// and listed without duplicates in first-visit order.
pub fn outline_pixels(polygon: &[Vec2], width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let n = polygon.len();
    if n < 2 {
        return out;
    }
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        line(a, b, |x, y| {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (px, py) = (x + dx, y + dy);
                if px >= 0 && py >= 0 && px < width as i64 && py < height as i64 {
                    let p = (px as u32, py as u32);
                    if seen.insert(p) {
                        out.push(p);
                    }
                }
            }
        });
    }
    out
}

/// Bresenham between rounded endpoints.
fn line(a: Vec2, b: Vec2, mut plot: impl FnMut(i64, i64)) {
    let clamp = |v: f64| v.round().clamp(-1e7, 1e7) as i64;
    let (mut x0, mut y0) = (clamp(a.x), clamp(a.y));
    let (x1, y1) = (clamp(b.x), clamp(b.y));
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(x0, y0);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}
