//! Centroid contour distance curves: silhouette → ordered boundary → polar
//! samples → fixed-length, scale- and rotation-normalized series.

mod mask;

pub use mask::{parse_pnm, Mask};

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_SERIES_LEN: usize = 128;

/// Boundary pixel `(x, y)`; may also carry sub-pixel contour coordinates.
pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub rho: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarContour {
    pub points: Vec<PolarPoint>,
    /// Boundary points that coincided with the centroid.
    pub degenerate: usize,
}

/// A fixed-length curve plus the id of the shape it came from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Series {
    pub id: String,
    pub values: Vec<f64>,
}

/// Raw image moments `(m00, m10, m01)` taken relative to `origin`.
fn moments(mask: &Mask, origin: (usize, usize)) -> (f64, f64, f64) {
    let (mut m00, mut m10, mut m01) = (0.0, 0.0, 0.0);
    for (x, y) in mask.foreground() {
        m00 += 1.0;
        m10 += (x - origin.0) as f64;
        m01 += (y - origin.1) as f64;
    }
    (m00, m10, m01)
}

fn bbox_origin(mask: &Mask) -> (usize, usize) {
    mask.foreground()
        .fold((usize::MAX, usize::MAX), |(mx, my), (x, y)| (mx.min(x), my.min(y)))
}

/// Moment centroid relative to the foreground's bounding-box corner.
///
/// Working in box-relative coordinates makes everything downstream exactly
/// invariant to integer translation of the mask.
fn local_centroid(mask: &Mask) -> ((usize, usize), (f64, f64)) {
    let origin = bbox_origin(mask);
    let (m00, m10, m01) = moments(mask, origin);
    (origin, (m10 / m00, m01 / m00))
}

/// `(m10/m00, m01/m00)` over foreground pixels.
pub fn centroid(mask: &Mask) -> (f64, f64) {
    let (origin, (cx, cy)) = local_centroid(mask);
    (origin.0 as f64 + cx, origin.1 as f64 + cy)
}

// Clockwise in image coordinates (y grows downward), starting west.
const MOORE: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn dir_index(d: (i64, i64)) -> usize {
    MOORE.iter().position(|&m| m == d).expect("unit neighbor offset")
}

/// Ordered closed boundary by Moore-neighbor tracing with Jacob's stopping
/// criterion. The first point is the top-most, left-most foreground pixel;
/// the walk runs counterclockwise in the `(x, y)` frame (the polar angle
/// `atan2(y − y0, x − x0)` increases along it) and the start is not repeated.
pub fn trace_boundary(mask: &Mask) -> Result<Vec<(usize, usize)>> {
    mask.validate_single_component()?;
    let start = mask.foreground().next().expect("mask is non-empty");
    let start = (start.0 as i64, start.1 as i64);
    // the raster scan guarantees the west neighbor is background
    let start_back = (start.0 - 1, start.1);
    let mut boundary = vec![(start.0 as usize, start.1 as usize)];
    let (mut p, mut back) = (start, start_back);
    loop {
        let d0 = dir_index((back.0 - p.0, back.1 - p.1));
        let mut prev = back;
        let mut next = None;
        for k in 1..=8 {
            let d = MOORE[(d0 + k) % 8];
            let c = (p.0 + d.0, p.1 + d.1);
            if mask.get_signed(c.0, c.1) {
                next = Some(c);
                break;
            }
            prev = c;
        }
        let Some(c) = next else {
            // isolated pixel
            return Ok(boundary);
        };
        back = prev;
        p = c;
        if p == start && back == start_back {
            return Ok(boundary);
        }
        boundary.push((p.0 as usize, p.1 as usize));
    }
}

/// Polar coordinates about `center`, with the quadrant-aware angle
/// `atan2(y − y0, x − x0)` in `[−π, π)`. A point on the centroid maps to
/// `(0, 0)` and is counted in `degenerate`.
pub fn to_polar(boundary: &[Point], center: (f64, f64)) -> Result<PolarContour> {
    if boundary.is_empty() {
        return Err(Error::Input("empty boundary".into()));
    }
    let mut degenerate = 0;
    let points = boundary
        .iter()
        .map(|&(x, y)| {
            let (dx, dy) = (x - center.0, y - center.1);
            if dx == 0.0 && dy == 0.0 {
                degenerate += 1;
                return PolarPoint { rho: 0.0, theta: 0.0 };
            }
            let mut theta = dy.atan2(dx);
            if theta >= PI {
                theta -= 2.0 * PI;
            }
            PolarPoint {
                rho: dx.hypot(dy),
                theta,
            }
        })
        .collect();
    Ok(PolarContour { points, degenerate })
}

/// Samples `ρ(θ)` on the grid `θ_k = −π + 2πk/n`.
///
/// Each point lands in the bin of its nearest grid angle; a bin keeps the
/// largest ρ it receives, so multi-valued (non-star-shaped) contours report
/// their outermost extent. Empty bins are filled by linear interpolation
/// between the nearest occupied bins on either side, wrapping around.
pub fn resample(contour: &PolarContour, n: usize, id: impl Into<String>) -> Result<Series> {
    if n < 8 {
        return Err(Error::Parameter(format!("series length must be >= 8, got {n}")));
    }
    let step = 2.0 * PI / n as f64;
    let mut bins: Vec<Option<f64>> = vec![None; n];
    for p in &contour.points {
        let k = (((p.theta + PI) / step).round() as i64).rem_euclid(n as i64) as usize;
        let slot = &mut bins[k];
        *slot = Some(slot.map_or(p.rho, |r: f64| r.max(p.rho)));
    }
    let filled: Vec<usize> = (0..n).filter(|&k| bins[k].is_some()).collect();
    if 2 * filled.len() < n {
        return Err(Error::Input(format!(
            "degenerate shape: contour covers {} of {n} angle bins",
            filled.len()
        )));
    }
    let mut values = vec![0.0; n];
    for (i, &k) in filled.iter().enumerate() {
        let next = filled[(i + 1) % filled.len()];
        let (a, b) = (bins[k].unwrap(), bins[next].unwrap());
        let gap = (next + n - k) % n;
        let gap = if gap == 0 { n } else { gap };
        values[k] = a;
        for j in 1..gap {
            let t = j as f64 / gap as f64;
            values[(k + j) % n] = a + (b - a) * t;
        }
    }
    Ok(Series { id: id.into(), values })
}

/// Divides by the maximum and rotates the maximum to index 0 (the smallest
/// index wins ties).
pub fn normalize(series: &Series) -> Result<Series> {
    let (argmax, max) = series
        .values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Input(format!("series {:?} has no positive maximum", series.id)));
    }
    let n = series.values.len();
    let values = (0..n).map(|i| series.values[(argmax + i) % n] / max).collect();
    Ok(Series {
        id: series.id.clone(),
        values,
    })
}

/// Full silhouette pipeline: boundary, polar transform about the moment
/// centroid, resampling, normalization.
pub fn extract_from_mask(mask: &Mask, n: usize, id: impl Into<String>) -> Result<Series> {
    let boundary = trace_boundary(mask)?;
    let (origin, center) = local_centroid(mask);
    let pts: Vec<Point> = boundary
        .iter()
        .map(|&(x, y)| ((x - origin.0) as f64, (y - origin.1) as f64))
        .collect();
    let polar = to_polar(&pts, center)?;
    normalize(&resample(&polar, n, id)?)
}

/// Area centroid of a closed polygon (Green's theorem moments), falling back
/// to the vertex mean when the enclosed area vanishes.
pub fn polygon_centroid(points: &[Point]) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::Input("empty contour".into()));
    }
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..points.len() {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % points.len()];
        let cross = x0 * y1 - x1 * y0;
        a += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if a.abs() < 1e-12 {
        let n = points.len() as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0, s.1 + p.1));
        return Ok((sx / n, sy / n));
    }
    Ok((cx / (3.0 * a), cy / (3.0 * a)))
}

pub fn extract_from_contour(points: &[Point], n: usize, id: impl Into<String>) -> Result<Series> {
    let center = polygon_centroid(points)?;
    let polar = to_polar(points, center)?;
    normalize(&resample(&polar, n, id)?)
}

/// Reads a contour file of `x,y` lines; blank lines, `#` comments and a
/// non-numeric header line are skipped.
pub fn read_contour_csv(path: &Path) -> Result<Vec<Point>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_contour_csv(&text)
}

pub fn parse_contour_csv(text: &str) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t', ' ']).filter(|s| !s.is_empty()).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                column: None,
                msg: format!("expected `x,y`, got {line:?}"),
            });
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            _ if points.is_empty() && i == 0 => continue,
            (x, _) => {
                return Err(Error::Parse {
                    line: i + 1,
                    column: Some(if x.is_err() { 1 } else { 2 }),
                    msg: format!("non-numeric coordinate in {line:?}"),
                })
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Input("contour file has no points".into()));
    }
    Ok(points)
}
