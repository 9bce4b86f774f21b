use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};

/// Binary silhouette, `true` = leaf. Pixel `(x, y)` is column `x`, row `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

const NEIGHBORS_8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl Mask {
    /// Builds a mask from row-major pixels. Requires at least one foreground
    /// pixel; connectivity is checked separately by [`Mask::validate_single_component`].
    pub fn new(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("mask dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Input(format!(
                "mask {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if !pixels.iter().any(|&p| p) {
            return Err(Error::Input("mask has no foreground pixels".into()));
        }
        Ok(Mask { width, height, pixels })
    }

    /// Parses rows of `0`/`1` (or `.`/`#`) characters; handy in tests.
    pub fn from_ascii(art: &str) -> Result<Self> {
        let rows: Vec<&str> = art.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut pixels = Vec::new();
        for r in &rows {
            if r.len() != width {
                return Err(Error::Input("ragged ascii mask".into()));
            }
            pixels.extend(r.chars().map(|c| c == '1' || c == '#'));
        }
        Mask::new(width, rows.len(), pixels)
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Mask::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    /// Out-of-image coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Copies the mask into a larger canvas shifted by `(dx, dy)`.
    pub fn translated(&self, dx: usize, dy: usize) -> Mask {
        let (w, h) = (self.width + dx, self.height + dy);
        let mut pixels = vec![false; w * h];
        for (x, y) in self.foreground() {
            pixels[(y + dy) * w + x + dx] = true;
        }
        Mask { width: w, height: h, pixels }
    }

    /// Number of 8-connected foreground components.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.pixels.len()];
        let mut count = 0;
        for start in 0..self.pixels.len() {
            if !self.pixels[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if self.get_signed(nx, ny) {
                        let j = ny as usize * self.width + nx as usize;
                        if !seen[j] {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        count
    }

    pub fn validate_single_component(&self) -> Result<()> {
        match self.component_count() {
            1 => Ok(()),
            n => Err(Error::Input(format!(
                "mask must contain one 8-connected component, found {n}"
            ))),
        }
    }

    pub fn read(path: &Path) -> Result<Mask> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        parse_pnm(&bytes)
    }
}

/// Decodes a PBM (`P1`/`P4`) or PGM (`P2`/`P5`) image.
///
/// PBM ink (`1`) is foreground. PGM pixels at or above half of the maximum
/// value (128 for 8-bit files) are foreground.
pub fn parse_pnm(bytes: &[u8]) -> Result<Mask> {
    let mut cur = PnmCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let width = cur.number()?;
    let height = cur.number()?;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Input("image dimensions overflow".into()))?;
    let pixels = match magic.as_str() {
        "P1" => (0..n)
            .map(|_| cur.bit())
            .collect::<Result<Vec<bool>>>()?,
        "P4" => {
            cur.single_whitespace();
            let row_bytes = width.div_ceil(8);
            let data = cur.rest();
            if data.len() < row_bytes * height {
                return Err(Error::Input("truncated P4 bitmap".into()));
            }
            (0..n)
                .map(|i| {
                    let (x, y) = (i % width, i / width);
                    data[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0
                })
                .collect()
        }
        "P2" | "P5" => {
            let maxval = cur.number()?;
            if maxval == 0 || maxval > 65535 {
                return Err(Error::Input(format!("bad PGM maxval {maxval}")));
            }
            let threshold = maxval.div_ceil(2);
            if magic == "P2" {
                (0..n)
                    .map(|_| cur.number().map(|v| v >= threshold))
                    .collect::<Result<Vec<bool>>>()?
            } else {
                cur.single_whitespace();
                let data = cur.rest();
                let wide = maxval > 255;
                let need = if wide { 2 * n } else { n };
                if data.len() < need {
                    return Err(Error::Input("truncated P5 graymap".into()));
                }
                (0..n)
                    .map(|i| {
                        let v = if wide {
                            u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as usize
                        } else {
                            data[i] as usize
                        };
                        v >= threshold
                    })
                    .collect()
            }
        }
        other => return Err(Error::Input(format!("unsupported image magic {other:?}"))),
    };
    Mask::new(width, height, pixels)
}

struct PnmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PnmCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Input("truncated image header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse().map_err(|_| Error::Input(format!("bad number {t:?} in image")))
    }

    fn bit(&mut self) -> Result<bool> {
        self.skip_space_and_comments();
        match self.bytes.get(self.pos) {
            Some(b'0') => {
                self.pos += 1;
                Ok(false)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(true)
            }
            _ => Err(Error::Input("bad or truncated P1 pixel data".into())),
        }
    }

    fn single_whitespace(&mut self) {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn rest(&self) -> &[u8] {
        &self.bytes[self.pos..]
    }
}
