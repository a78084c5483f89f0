//! Service-distance distributions by numerical integration.
//!
//! All curves integrate over a midpoint tensor grid in `(r, phi)` with the
//! polar area element `r dr dphi`. Highway curves restrict the radial range
//! per angular column to the part of the ray that lies on the road strip and
//! average the two lane headings (east and west).
//!
//! Interference enters through the interference-free distance along a
//! trajectory. Activity of the other beams only matters through which
//! sectors cover each point, so the integrand is piecewise constant between
//! sector-boundary crossings; [`PathProfile`] records those pieces once and
//! evaluates any activity vector exactly. A plain midpoint quadrature of the
//! same integral is kept alongside as an independent route.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    advance, departure, departure_cdf_point, reframe, BeamSector, GeometryError, PolarPoint,
};

/// Maximum number of beams in a layout (coverage sets are 64-bit masks).
pub const MAX_BEAMS: usize = 64;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("grid must be non-empty, non-negative and strictly increasing")]
    InvalidGrid,
    #[error("beam {0} does not cover any part of the highway")]
    NoHighwayIntersection(usize),
    #[error("beam index {index} out of range for a layout of {len} beams")]
    BeamIndex { index: usize, len: usize },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid highway: {0}")]
    InvalidHighway(String),
    #[error("at least one sample is required")]
    NoSamples,
}

/// A deployment: beams plus the probability that each is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    beams: Vec<BeamSector>,
    activity: Vec<f64>,
}

impl Layout {
    pub fn new(beams: Vec<BeamSector>, activity: Vec<f64>) -> Result<Self, AnalyticError> {
        if beams.len() != activity.len() {
            return Err(AnalyticError::InvalidLayout(format!(
                "{} beams but {} activity probabilities",
                beams.len(),
                activity.len()
            )));
        }
        if beams.len() > MAX_BEAMS {
            return Err(AnalyticError::InvalidLayout(format!(
                "at most {MAX_BEAMS} beams are supported, got {}",
                beams.len()
            )));
        }
        if let Some(p) = activity.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(AnalyticError::InvalidLayout(format!(
                "activity probability {p} outside [0, 1]"
            )));
        }
        Ok(Self { beams, activity })
    }

    /// Every beam active with the same probability `p`.
    pub fn uniform(beams: Vec<BeamSector>, p: f64) -> Result<Self, AnalyticError> {
        let n = beams.len();
        Self::new(beams, vec![p; n])
    }

    pub fn with_uniform_activity(&self, p: f64) -> Result<Self, AnalyticError> {
        Self::uniform(self.beams.clone(), p)
    }

    pub fn beams(&self) -> &[BeamSector] {
        &self.beams
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, k: usize) -> Result<&BeamSector, AnalyticError> {
        self.beams.get(k).ok_or(AnalyticError::BeamIndex {
            index: k,
            len: self.beams.len(),
        })
    }

    /// Beams whose footprints can touch beam `k` at all.
    fn neighbours(&self, k: usize) -> Vec<usize> {
        let b = &self.beams[k];
        self.beams
            .iter()
            .enumerate()
            .filter(|(i, o)| {
                *i != k
                    && (o.origin_x - b.origin_x).hypot(o.origin_y - b.origin_y)
                        <= o.radius + b.radius
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// A travel lane: lateral offset from the southern road edge and the
/// direction of travel (0 = east, pi = west).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub offset: f64,
    pub heading: f64,
}

/// A straight east-west road occupying `0 <= y <= width` for `0 <= x <= length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighwayGeometry {
    pub length: f64,
    pub width: f64,
    pub lanes: Vec<Lane>,
}

impl HighwayGeometry {
    pub fn new(length: f64, width: f64, lanes: Vec<Lane>) -> Result<Self, AnalyticError> {
        if !(length > 0.0) || !(width > 0.0) {
            return Err(AnalyticError::InvalidHighway(format!(
                "length and width must be positive (got {length} x {width})"
            )));
        }
        if lanes.iter().any(|l| !(0.0..=width).contains(&l.offset)) {
            return Err(AnalyticError::InvalidHighway(
                "lane centre outside the road".into(),
            ));
        }
        let east = lanes.iter().any(|l| l.heading.cos() > 0.5);
        let west = lanes.iter().any(|l| l.heading.cos() < -0.5);
        if !east || !west {
            return Err(AnalyticError::InvalidHighway(
                "both travel directions need at least one lane".into(),
            ));
        }
        Ok(Self {
            length,
            width,
            lanes,
        })
    }

    /// `lanes_per_direction` evenly spaced lanes each way; eastbound traffic
    /// keeps to the southern half.
    pub fn symmetric(length: f64, width: f64, lanes_per_direction: usize) -> Result<Self, AnalyticError> {
        let n = 2 * lanes_per_direction;
        let lanes = (0..n)
            .map(|i| Lane {
                offset: width * (2 * i + 1) as f64 / (2 * n) as f64,
                heading: if i < lanes_per_direction { 0.0 } else { PI },
            })
            .collect();
        Self::new(length, width, lanes)
    }

    /// Distance from a beam origin to the nearer road edge (zero on the road).
    pub fn edge_offset(&self, beam: &BeamSector) -> f64 {
        if beam.origin_y < 0.0 {
            -beam.origin_y
        } else if beam.origin_y > self.width {
            beam.origin_y - self.width
        } else {
            0.0
        }
    }

    pub fn on_road(&self, y: f64) -> bool {
        (0.0..=self.width).contains(&y)
    }

    /// Radial interval `[near, far]` of the ray at offset `phi` that lies on
    /// the road, clipped to the beam radius.
    pub fn radial_bounds(&self, beam: &BeamSector, phi: f64) -> Option<(f64, f64)> {
        let s = (beam.pointing + phi).sin();
        let (lo, hi) = if s.abs() < 1e-12 {
            if self.on_road(beam.origin_y) {
                (0.0, beam.radius)
            } else {
                return None;
            }
        } else {
            let a = -beam.origin_y / s;
            let b = (self.width - beam.origin_y) / s;
            (a.min(b).max(0.0), a.max(b).min(beam.radius))
        };
        (hi > lo).then_some((lo, hi))
    }

    pub fn covers(&self, beam: &BeamSector) -> bool {
        (0..64).any(|j| {
            let phi = -beam.half_width() + beam.beamwidth * (j as f64 + 0.5) / 64.0;
            self.radial_bounds(beam, phi).is_some()
        })
    }
}

/// Empirical or numerical CDF sampled on a grid of distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl CdfCurve {
    /// CDF of a weighted sample of distances.
    pub fn from_weighted(grid: &[f64], mut samples: Vec<(f64, f64)>) -> Result<Self, AnalyticError> {
        check_grid(grid)?;
        if samples.is_empty() {
            return Err(AnalyticError::NoSamples);
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = samples.iter().map(|s| s.1).sum();
        let mut cumulative = Vec::with_capacity(samples.len());
        let mut acc = 0.0;
        for s in &samples {
            acc += s.1;
            cumulative.push(acc);
        }
        let values = grid
            .iter()
            .map(|&l| {
                let n = samples.partition_point(|s| s.0 <= l);
                if n == 0 {
                    0.0
                } else if n == samples.len() {
                    1.0
                } else {
                    (cumulative[n - 1] / total).clamp(0.0, 1.0)
                }
            })
            .collect();
        Ok(Self {
            grid: grid.to_vec(),
            values,
        })
    }

    pub fn from_samples(grid: &[f64], samples: &[f64]) -> Result<Self, AnalyticError> {
        Self::from_weighted(grid, samples.iter().map(|&d| (d, 1.0)).collect())
    }

    /// Largest pointwise gap to another curve on the same grid.
    pub fn sup_distance(&self, other: &CdfCurve) -> f64 {
        assert_eq!(self.grid.len(), other.grid.len(), "curves on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Step-function value at an arbitrary distance (last grid point at or below `l`).
    pub fn value_at(&self, l: f64) -> f64 {
        let n = self.grid.partition_point(|&g| g <= l);
        if n == 0 {
            0.0
        } else {
            self.values[n - 1]
        }
    }
}

/// `points` evenly spaced distances from 0 to `max` inclusive.
pub fn uniform_grid(max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| max * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

fn check_grid(grid: &[f64]) -> Result<(), AnalyticError> {
    if grid.is_empty()
        || grid[0] < 0.0
        || grid.iter().any(|g| !g.is_finite())
        || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(AnalyticError::InvalidGrid);
    }
    Ok(())
}

/// Resolution of the numerical integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrature {
    pub radial_cells: usize,
    pub angular_cells: usize,
    /// Steps along a trajectory for [`interference_free_distance_quadrature`].
    pub trajectory_steps: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            radial_cells: 400,
            angular_cells: 400,
            trajectory_steps: 2000,
        }
    }
}

impl Quadrature {
    pub fn square(cells: usize) -> Self {
        Self {
            radial_cells: cells,
            angular_cells: cells,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    point: PolarPoint,
    weight: f64,
}

fn sector_cells(beam: &BeamSector, quad: &Quadrature) -> Vec<Cell> {
    let dphi = beam.beamwidth / quad.angular_cells as f64;
    let dr = beam.radius / quad.radial_cells as f64;
    let mut cells = Vec::with_capacity(quad.radial_cells * quad.angular_cells);
    for j in 0..quad.angular_cells {
        let phi = -beam.half_width() + (j as f64 + 0.5) * dphi;
        for i in 0..quad.radial_cells {
            let r = (i as f64 + 0.5) * dr;
            cells.push(Cell {
                point: PolarPoint::new(r, phi),
                weight: r * dr * dphi,
            });
        }
    }
    cells
}

fn highway_cells(beam: &BeamSector, hw: &HighwayGeometry, quad: &Quadrature) -> Vec<Cell> {
    let dphi = beam.beamwidth / quad.angular_cells as f64;
    let mut cells = Vec::with_capacity(quad.radial_cells * quad.angular_cells);
    for j in 0..quad.angular_cells {
        let phi = -beam.half_width() + (j as f64 + 0.5) * dphi;
        let Some((near, far)) = hw.radial_bounds(beam, phi) else {
            continue;
        };
        let dr = (far - near) / quad.radial_cells as f64;
        for i in 0..quad.radial_cells {
            let r = near + (i as f64 + 0.5) * dr;
            cells.push(Cell {
                point: PolarPoint::new(r, phi),
                weight: r * dr * dphi,
            });
        }
    }
    cells
}

/// Lane headings of the highway analysis.
const LANE_HEADINGS: [f64; 2] = [0.0, PI];

/// How headings are drawn when integrating over start points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingModel {
    /// East or west with equal probability.
    Lanes,
    /// Uniform on the circle.
    Uniform,
}

/// Maps `f` over `items` in fixed-size chunks on the rayon pool and
/// concatenates the results in input order.
fn par_flat_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> Vec<U> + Sync) -> Vec<U> {
    items
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().flat_map(&f).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Weighted average over cells of a per-cell vector of probabilities.
fn integrate_probabilities(
    cells: &[Cell],
    grid: &[f64],
    j: impl Fn(PolarPoint, f64) -> Result<f64, GeometryError> + Sync,
) -> Result<Vec<f64>, AnalyticError> {
    let partials = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; grid.len()];
            let mut weight = 0.0;
            for c in chunk {
                weight += c.weight;
                for (a, &l) in acc.iter_mut().zip(grid) {
                    *a += c.weight * j(c.point, l)?;
                }
            }
            Ok((acc, weight))
        })
        .collect::<Result<Vec<_>, GeometryError>>()?;
    let mut total = vec![0.0; grid.len()];
    let mut weight = 0.0;
    for (acc, w) in partials {
        weight += w;
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    Ok(total.into_iter().map(|t| (t / weight).clamp(0.0, 1.0)).collect())
}

/// Travelling-distance CDF for a start point uniform over the whole sector and
/// a uniformly random heading.
pub fn service_cdf(beam: &BeamSector, grid: &[f64], quad: &Quadrature) -> Result<CdfCurve, AnalyticError> {
    check_grid(grid)?;
    let cells = sector_cells(beam, quad);
    let values = integrate_probabilities(&cells, grid, |p, l| departure_cdf_point(beam, p, l))?;
    Ok(CdfCurve {
        grid: grid.to_vec(),
        values,
    })
}

/// Travelling-distance CDF for start points on the highway strip.
pub fn highway_service_cdf(
    beam: &BeamSector,
    hw: &HighwayGeometry,
    grid: &[f64],
    quad: &Quadrature,
) -> Result<CdfCurve, AnalyticError> {
    highway_cdf(beam, hw, grid, quad, HeadingModel::Lanes)
}

pub fn highway_cdf(
    beam: &BeamSector,
    hw: &HighwayGeometry,
    grid: &[f64],
    quad: &Quadrature,
    headings: HeadingModel,
) -> Result<CdfCurve, AnalyticError> {
    check_grid(grid)?;
    let cells = highway_cells(beam, hw, quad);
    if cells.is_empty() {
        return Err(AnalyticError::NoHighwayIntersection(beam.id));
    }
    match headings {
        HeadingModel::Uniform => {
            let values = integrate_probabilities(&cells, grid, |p, l| departure_cdf_point(beam, p, l))?;
            Ok(CdfCurve {
                grid: grid.to_vec(),
                values,
            })
        }
        HeadingModel::Lanes => {
            let samples = cells
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut out = Vec::with_capacity(2 * chunk.len());
                    for c in chunk {
                        for h in LANE_HEADINGS {
                            let d = departure(beam, c.point, h)?;
                            out.push((d.distance, 0.5 * c.weight));
                        }
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>, GeometryError>>()?
                .into_iter()
                .flatten()
                .collect();
            CdfCurve::from_weighted(grid, samples)
        }
    }
}

/// Probability that a point (relative to `interferer`) is not interfered by it.
pub fn no_interference_prob(point_in_interferer: PolarPoint, interferer: &BeamSector, p: f64) -> f64 {
    if interferer.contains(point_in_interferer) {
        1.0 - p
    } else {
        1.0
    }
}

fn survival(covering: u64, activity: &[f64]) -> f64 {
    let mut bits = covering;
    let mut s = 1.0;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        s *= 1.0 - activity[i];
        bits &= bits - 1;
    }
    s
}

/// Area of beam `k` covered by at least one other beam.
pub fn interfered_area(layout: &Layout, k: usize, quad: &Quadrature) -> Result<f64, AnalyticError> {
    let beam = *layout.beam(k)?;
    let others = layout.neighbours(k);
    let cells = sector_cells(&beam, quad);
    let free: f64 = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|c| {
                    let clear: f64 = others
                        .iter()
                        .map(|&i| {
                            let o = &layout.beams[i];
                            no_interference_prob(reframe(&beam, c.point, o), o, 1.0)
                        })
                        .product();
                    c.weight * clear
                })
                .sum::<f64>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok((beam.sector_area() - free).clamp(0.0, beam.sector_area()))
}

/// A piece of a trajectory covered by a fixed set of other beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSegment {
    pub length: f64,
    /// Bit `i` set when beam `i` covers the segment.
    pub covering: u64,
}

/// A trajectory from a start point to its departure from the serving beam,
/// split wherever it crosses another beam's boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PathProfile {
    pub length: f64,
    pub segments: Vec<PathSegment>,
}

impl PathProfile {
    /// Expected distance travelled without interference for the given
    /// per-beam activity probabilities.
    pub fn clean_distance(&self, activity: &[f64]) -> f64 {
        self.segments
            .iter()
            .map(|s| s.length * survival(s.covering, activity))
            .sum()
    }
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

fn profile_with(
    layout: &Layout,
    k: usize,
    others: &[usize],
    p: PolarPoint,
    heading: f64,
) -> Result<PathProfile, AnalyticError> {
    let beam = &layout.beams[k];
    let length = departure(beam, p, heading)?.distance;
    let (sx, sy) = beam.to_cartesian(p);
    let (ux, uy) = (heading.cos(), heading.sin());
    let mut cuts = vec![0.0, length];
    for &i in others {
        let o = &layout.beams[i];
        let (ox, oy) = (o.origin_x - sx, o.origin_y - sy);
        for side in [o.half_width(), -o.half_width()] {
            let (ex, ey) = ((o.pointing + side).cos(), (o.pointing + side).sin());
            let denom = cross(ux, uy, ex, ey);
            if denom.abs() > 1e-12 {
                cuts.push(cross(ox, oy, ex, ey) / denom);
            }
        }
        let b = -(ux * ox + uy * oy);
        let c = ox * ox + oy * oy - o.radius * o.radius;
        let disc = b * b - c;
        if disc > 0.0 {
            let s = disc.sqrt();
            cuts.push(-b - s);
            cuts.push(-b + s);
        }
    }
    cuts.retain(|t| (0.0..=length).contains(t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut segments: Vec<PathSegment> = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let t = 0.5 * (w[0] + w[1]);
        let (x, y) = (sx + t * ux, sy + t * uy);
        let covering = others
            .iter()
            .filter(|&&i| layout.beams[i].contains_xy(x, y))
            .fold(0u64, |m, &i| m | (1 << i));
        match segments.last_mut() {
            Some(last) if last.covering == covering => last.length += len,
            _ => segments.push(PathSegment { length: len, covering }),
        }
    }
    Ok(PathProfile { length, segments })
}

/// Coverage profile of the trajectory from `p` (relative to beam `k`) along `heading`.
pub fn path_profile(
    layout: &Layout,
    k: usize,
    p: PolarPoint,
    heading: f64,
) -> Result<PathProfile, AnalyticError> {
    layout.beam(k)?;
    profile_with(layout, k, &layout.neighbours(k), p, heading)
}

/// Expected interference-free distance before leaving beam `k`, computed
/// exactly from the boundary crossings of the trajectory.
pub fn interference_free_distance(
    layout: &Layout,
    k: usize,
    p: PolarPoint,
    heading: f64,
) -> Result<f64, AnalyticError> {
    Ok(path_profile(layout, k, p, heading)?.clean_distance(&layout.activity))
}

/// The same integral by midpoint quadrature along the trajectory.
pub fn interference_free_distance_quadrature(
    layout: &Layout,
    k: usize,
    p: PolarPoint,
    heading: f64,
    steps: usize,
) -> Result<f64, AnalyticError> {
    let beam = layout.beam(k)?;
    let length = departure(beam, p, heading)?.distance;
    if steps == 0 || length == 0.0 {
        return Ok(0.0);
    }
    let h = length / steps as f64;
    let mut total = 0.0;
    for s in 0..steps {
        let q = advance(p, heading, (s as f64 + 0.5) * h, beam);
        let clear: f64 = layout
            .beams
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(i, o)| no_interference_prob(reframe(beam, q, o), o, layout.activity[i]))
            .product();
        total += clear * h;
    }
    Ok(total)
}

/// Weighted path profiles for every highway start cell of beam `k` and both
/// lane headings.
fn highway_profiles(
    layout: &Layout,
    hw: &HighwayGeometry,
    k: usize,
    quad: &Quadrature,
) -> Result<Vec<(PathProfile, f64)>, AnalyticError> {
    let beam = layout.beam(k)?;
    let cells = highway_cells(beam, hw, quad);
    if cells.is_empty() {
        return Err(AnalyticError::NoHighwayIntersection(k));
    }
    let others = layout.neighbours(k);
    let out = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut v = Vec::with_capacity(2 * chunk.len());
            for c in chunk {
                for h in LANE_HEADINGS {
                    v.push((profile_with(layout, k, &others, c.point, h)?, 0.5 * c.weight));
                }
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, AnalyticError>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn curves_from_profiles(
    profiles: &[(PathProfile, f64)],
    activities: &[Vec<f64>],
    grid: &[f64],
) -> Result<Vec<CdfCurve>, AnalyticError> {
    activities
        .iter()
        .map(|act| {
            let samples = par_flat_map(profiles, |(prof, w)| vec![(prof.clean_distance(act), *w)]);
            CdfCurve::from_weighted(grid, samples)
        })
        .collect()
}

/// Interference-aware service-distance CDF of beam `k` on the highway, using
/// the layout's activity probabilities.
pub fn interference_cdf(
    layout: &Layout,
    hw: &HighwayGeometry,
    k: usize,
    grid: &[f64],
    quad: &Quadrature,
) -> Result<CdfCurve, AnalyticError> {
    check_grid(grid)?;
    let profiles = highway_profiles(layout, hw, k, quad)?;
    Ok(curves_from_profiles(&profiles, std::slice::from_ref(&layout.activity), grid)?.remove(0))
}

/// One interference CDF of beam `k` per uniform activity level in `ps`,
/// sharing the trajectory profiles.
pub fn interference_cdf_family(
    layout: &Layout,
    hw: &HighwayGeometry,
    k: usize,
    ps: &[f64],
    grid: &[f64],
    quad: &Quadrature,
) -> Result<Vec<CdfCurve>, AnalyticError> {
    check_grid(grid)?;
    let profiles = highway_profiles(layout, hw, k, quad)?;
    let activities: Vec<Vec<f64>> = ps.iter().map(|&p| vec![p; layout.len()]).collect();
    curves_from_profiles(&profiles, &activities, grid)
}

/// Like [`interference_cdf_family`], but pooled over every beam that covers
/// the road, each start cell weighted by its area. This is the distribution
/// seen when a connection starts at a uniformly random point of the covered
/// road in a uniformly random beam-area unit.
pub fn layout_interference_cdf_family(
    layout: &Layout,
    hw: &HighwayGeometry,
    ps: &[f64],
    grid: &[f64],
    quad: &Quadrature,
) -> Result<Vec<CdfCurve>, AnalyticError> {
    check_grid(grid)?;
    let mut profiles = Vec::new();
    for k in 0..layout.len() {
        if hw.covers(&layout.beams[k]) {
            profiles.extend(highway_profiles(layout, hw, k, quad)?);
        }
    }
    if profiles.is_empty() {
        return Err(AnalyticError::InvalidLayout("no beam covers the highway".into()));
    }
    let activities: Vec<Vec<f64>> = ps.iter().map(|&p| vec![p; layout.len()]).collect();
    curves_from_profiles(&profiles, &activities, grid)
}

/// Monte-Carlo estimate of [`interference_cdf`]: start points uniform over
/// the part of beam `k` on the road, headings east or west with equal odds.
pub fn monte_carlo_cdf(
    layout: &Layout,
    hw: &HighwayGeometry,
    k: usize,
    grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<CdfCurve, AnalyticError> {
    check_grid(grid)?;
    if samples == 0 {
        return Err(AnalyticError::NoSamples);
    }
    let beam = *layout.beam(k)?;
    if !hw.covers(&beam) {
        return Err(AnalyticError::NoHighwayIntersection(k));
    }
    let others = layout.neighbours(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::with_capacity(samples);
    while starts.len() < samples {
        let r = beam.radius * rng.gen::<f64>().sqrt();
        let phi = -beam.half_width() + beam.beamwidth * rng.gen::<f64>();
        let heading = if rng.gen::<bool>() { 0.0 } else { PI };
        let p = PolarPoint::new(r, phi);
        let (_, y) = beam.to_cartesian(p);
        if hw.on_road(y) {
            starts.push((p, heading));
        }
    }
    let distances = starts
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(p, h)| {
                    Ok(profile_with(layout, k, &others, p, h)?.clean_distance(&layout.activity))
                })
                .collect::<Result<Vec<_>, AnalyticError>>()
        })
        .collect::<Result<Vec<_>, _>>()?
        .concat();
    CdfCurve::from_samples(grid, &distances)
}
