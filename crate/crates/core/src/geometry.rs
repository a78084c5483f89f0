//! Ideal sector geometry for directional beams.
//!
//! Every beam is a pie slice: an origin, a pointing angle measured
//! counter-clockwise from east, a radius and a beamwidth. Locations are
//! carried as [`PolarPoint`]s relative to a beam (`r` from the origin,
//! `phi` from the pointing direction) and converted to the map frame only
//! when two beams need to be compared.
//!
//! The departure machinery answers "where and after how far does a vehicle
//! moving in a straight line leave the sector?". Edge departures are solved
//! in a frame where the edge lies on the x-axis with the vehicle above it;
//! arc departures take the positive root of the ray/circle equation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length/angle tolerance for boundary tests.
pub const TOLERANCE: f64 = 1e-9;

const DOWN: f64 = 3.0 * FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("beam radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("beamwidth must lie in (0, pi], got {0}")]
    InvalidBeamwidth(f64),
    #[error("circle radius must be positive, got {0}")]
    InvalidCircle(f64),
    #[error("point (r={r}, phi={phi}) lies outside beam {beam}")]
    OutsideBeam { beam: usize, r: f64, phi: f64 },
    #[error("identical circles intersect in infinitely many points")]
    IdenticalCircles,
    #[error("travel distance must be non-negative, got {0}")]
    NegativeDistance(f64),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_positive(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A location relative to a beam: distance from the radiating origin and
/// angular offset from the pointing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub const fn new(r: f64, phi: f64) -> Self {
        Self { r, phi }
    }

    /// Reflects the point across the beam axis.
    pub fn mirrored(self) -> Self {
        Self::new(self.r, -self.phi)
    }
}

/// One beam footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSector {
    pub id: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    /// Pointing angle in radians, counter-clockwise from east.
    pub pointing: f64,
    pub radius: f64,
    pub beamwidth: f64,
}

impl BeamSector {
    pub fn new(
        id: usize,
        origin_x: f64,
        origin_y: f64,
        pointing: f64,
        radius: f64,
        beamwidth: f64,
    ) -> Result<Self, GeometryError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidRadius(radius));
        }
        if !(beamwidth > 0.0 && beamwidth <= PI) {
            return Err(GeometryError::InvalidBeamwidth(beamwidth));
        }
        Ok(Self {
            id,
            origin_x,
            origin_y,
            pointing,
            radius,
            beamwidth,
        })
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.beamwidth
    }

    /// Footprint area, `R^2 * Omega / 2`.
    pub fn sector_area(&self) -> f64 {
        0.5 * self.radius * self.radius * self.beamwidth
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }

    /// Map-frame position of a point expressed relative to this beam.
    pub fn to_cartesian(&self, p: PolarPoint) -> (f64, f64) {
        let a = self.pointing + p.phi;
        (
            self.origin_x + p.r * a.cos(),
            self.origin_y + p.r * a.sin(),
        )
    }

    /// Expresses a map-frame position relative to this beam. Points within
    /// [`TOLERANCE`] of the origin map to `(0, 0)`.
    pub fn polar_of(&self, x: f64, y: f64) -> PolarPoint {
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        let r = dx.hypot(dy);
        if r <= TOLERANCE {
            return PolarPoint::new(0.0, 0.0);
        }
        PolarPoint::new(r, wrap_angle(dy.atan2(dx) - self.pointing))
    }

    /// Closed-set membership test for a point relative to this beam.
    pub fn contains(&self, p: PolarPoint) -> bool {
        p.r >= 0.0
            && p.r <= self.radius + TOLERANCE
            && wrap_angle(p.phi).abs() <= self.half_width() + TOLERANCE
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.contains(self.polar_of(x, y))
    }

    /// Map-frame corners where the arc meets the left (`+Omega/2`) and right
    /// (`-Omega/2`) edges.
    pub fn corners(&self) -> [(f64, f64); 2] {
        let h = self.half_width();
        [
            self.to_cartesian(PolarPoint::new(self.radius, h)),
            self.to_cartesian(PolarPoint::new(self.radius, -h)),
        ]
    }

    /// The same footprint rotated by 180 degrees about its origin.
    pub fn rotated_half_turn(&self) -> Self {
        Self {
            pointing: wrap_angle(self.pointing + PI),
            ..*self
        }
    }

    fn ensure_inside(&self, p: PolarPoint) -> Result<(), GeometryError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GeometryError::OutsideBeam {
                beam: self.id,
                r: p.r,
                phi: p.phi,
            })
        }
    }
}

/// Re-expresses a point given relative to `source` relative to `target`.
pub fn reframe(source: &BeamSector, p: PolarPoint, target: &BeamSector) -> PolarPoint {
    let (x, y) = source.to_cartesian(p);
    target.polar_of(x, y)
}

/// Position after travelling `dist` metres along map heading `heading`.
pub fn advance(p: PolarPoint, heading: f64, dist: f64, beam: &BeamSector) -> PolarPoint {
    if dist == 0.0 {
        return p;
    }
    let gamma = heading - (beam.pointing + p.phi);
    let r = (p.r * p.r + dist * dist + 2.0 * p.r * dist * gamma.cos())
        .max(0.0)
        .sqrt();
    let phi = p.phi + (dist * gamma.sin()).atan2(p.r + dist * gamma.cos());
    PolarPoint::new(r, wrap_angle(phi))
}

/// Side of the sector through which a straight trajectory leaves it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DepartureCase {
    LeftEdge,
    RightEdge,
    Arc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Departure {
    pub case: DepartureCase,
    pub exit_point: PolarPoint,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    Left,
    Right,
}

/// Start point and heading in a frame where one edge runs from the origin
/// along +x and the start point sits above it.
#[derive(Debug, Clone, Copy)]
struct EdgeFrame {
    x: f64,
    y: f64,
    /// Transformed heading in `[0, 2pi)`.
    heading: f64,
    /// Angle between straight-down and the direction towards the beam origin.
    to_origin: f64,
    /// Angle between straight-down and the direction towards the edge's far corner.
    to_corner: f64,
}

impl EdgeFrame {
    fn new(beam: &BeamSector, p: PolarPoint, heading: f64, edge: Edge) -> Self {
        let h = beam.half_width();
        let (offset, transformed) = match edge {
            // reflection + rotation
            Edge::Left => (h - p.phi, h + beam.pointing - heading),
            // rotation only
            Edge::Right => (h + p.phi, h - beam.pointing + heading),
        };
        let x = p.r * offset.cos();
        let y = (p.r * offset.sin()).max(0.0);
        let (to_origin, to_corner) = if y <= TOLERANCE {
            (FRAC_PI_2, FRAC_PI_2)
        } else {
            (x.atan2(y), (beam.radius - x).atan2(y))
        };
        Self {
            x,
            y,
            heading: wrap_positive(transformed),
            to_origin,
            to_corner,
        }
    }

    fn width(&self) -> f64 {
        (self.to_origin + self.to_corner).max(0.0)
    }

    fn hits_edge(&self) -> bool {
        self.heading >= DOWN - self.to_origin - TOLERANCE
            && self.heading <= DOWN + self.to_corner + TOLERANCE
    }

    /// Exit radius along the edge and distance travelled.
    fn exit(&self) -> (f64, f64) {
        if self.y <= TOLERANCE {
            return (self.x, 0.0);
        }
        let exit_r = self.x - self.y * (DOWN - self.heading).tan();
        (exit_r, self.y.hypot(self.x - exit_r))
    }

    /// Measure of edge-bound headings whose travel distance is at most `l`.
    fn width_within(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        let reach = if l > self.y {
            (self.y / l).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        (reach.min(self.to_origin) + reach.min(self.to_corner)).max(0.0)
    }
}

/// Arc-bound headings described by their deviation from the radial
/// (outward) direction through the start point.
#[derive(Debug, Clone, Copy)]
struct ArcFrame {
    /// Start point in the beam-aligned frame (beam pointing along +x).
    x: f64,
    y: f64,
    r: f64,
    phi: f64,
    radius: f64,
    /// Counter-clockwise deviation from radial to the left corner.
    to_left: f64,
    /// Clockwise deviation from radial to the right corner.
    to_right: f64,
}

impl ArcFrame {
    fn new(beam: &BeamSector, p: PolarPoint) -> Self {
        let h = beam.half_width();
        let (x, y) = (p.r * p.phi.cos(), p.r * p.phi.sin());
        let (cx, cy) = (beam.radius * h.cos(), beam.radius * h.sin());
        let dir_left = (cy - y).atan2(cx - x);
        let dir_right = (-cy - y).atan2(cx - x);
        Self {
            x,
            y,
            r: p.r,
            phi: p.phi,
            radius: beam.radius,
            to_left: wrap_positive(dir_left - p.phi).min(PI),
            to_right: wrap_positive(p.phi - dir_right).min(PI),
        }
    }

    fn width(&self) -> f64 {
        self.to_left + self.to_right
    }

    /// Largest deviation from radial for which the arc is reached within `l`.
    /// The bounding headings point at the intersections of the beam circle
    /// and the circle of radius `l` around the start point.
    fn reach(&self, l: f64) -> f64 {
        if l <= 0.0 {
            return 0.0;
        }
        if self.r <= TOLERANCE {
            return if l >= self.radius { PI } else { 0.0 };
        }
        let beam_circle = Circle {
            center_x: 0.0,
            center_y: 0.0,
            radius: self.radius,
        };
        let travel = Circle {
            center_x: self.x,
            center_y: self.y,
            radius: l,
        };
        match circle_intersections(&beam_circle, &travel) {
            Ok(points) if !points.is_empty() => {
                let (px, py) = points[0];
                wrap_angle((py - self.y).atan2(px - self.x) - self.phi).abs()
            }
            _ => {
                if l < self.radius - self.r {
                    0.0
                } else {
                    PI
                }
            }
        }
    }

    fn width_within(&self, l: f64) -> f64 {
        let reach = self.reach(l);
        reach.min(self.to_left) + reach.min(self.to_right)
    }
}

/// Where and after how far a vehicle at `p` heading `heading` leaves the beam.
pub fn departure(
    beam: &BeamSector,
    p: PolarPoint,
    heading: f64,
) -> Result<Departure, GeometryError> {
    beam.ensure_inside(p)?;
    let h = beam.half_width();
    for (edge, case, phi) in [
        (Edge::Left, DepartureCase::LeftEdge, h),
        (Edge::Right, DepartureCase::RightEdge, -h),
    ] {
        let frame = EdgeFrame::new(beam, p, heading, edge);
        if frame.hits_edge() {
            let (exit_r, distance) = frame.exit();
            return Ok(Departure {
                case,
                exit_point: PolarPoint::new(exit_r.clamp(0.0, beam.radius), phi),
                distance,
            });
        }
    }
    let gamma = heading - (beam.pointing + p.phi);
    let along = p.r * gamma.cos();
    let disc = along * along - (p.r * p.r - beam.radius * beam.radius);
    let distance = (-along + disc.max(0.0).sqrt()).max(0.0);
    let exit = advance(p, heading, distance, beam);
    Ok(Departure {
        case: DepartureCase::Arc,
        exit_point: PolarPoint::new(beam.radius, exit.phi),
        distance,
    })
}

/// Widths of the heading intervals that lead out through each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingWidths {
    pub left: f64,
    pub right: f64,
    pub arc: f64,
}

impl HeadingWidths {
    pub fn total(&self) -> f64 {
        self.left + self.right + self.arc
    }
}

pub fn heading_widths(beam: &BeamSector, p: PolarPoint) -> Result<HeadingWidths, GeometryError> {
    beam.ensure_inside(p)?;
    Ok(HeadingWidths {
        left: EdgeFrame::new(beam, p, 0.0, Edge::Left).width(),
        right: EdgeFrame::new(beam, p, 0.0, Edge::Right).width(),
        arc: ArcFrame::new(beam, p).width(),
    })
}

/// Probability that a vehicle at `p` with a uniformly random heading leaves
/// the beam within `l` metres.
pub fn departure_cdf_point(beam: &BeamSector, p: PolarPoint, l: f64) -> Result<f64, GeometryError> {
    beam.ensure_inside(p)?;
    if l < 0.0 {
        return Err(GeometryError::NegativeDistance(l));
    }
    let left = EdgeFrame::new(beam, p, 0.0, Edge::Left).width_within(l);
    let right = EdgeFrame::new(beam, p, 0.0, Edge::Right).width_within(l);
    let arc = ArcFrame::new(beam, p).width_within(l);
    Ok(((left + right + arc) / TAU).clamp(0.0, 1.0))
}

/// Indicator that a vehicle at `p` moving along `heading` leaves within `l`.
pub fn departure_cdf_directed(
    beam: &BeamSector,
    p: PolarPoint,
    l: f64,
    heading: f64,
) -> Result<f64, GeometryError> {
    let d = departure(beam, p, heading)?;
    Ok(if d.distance <= l { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

impl Circle {
    pub fn new(center_x: f64, center_y: f64, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidCircle(radius));
        }
        Ok(Self {
            center_x,
            center_y,
            radius,
        })
    }
}

/// Intersection points of two circles: none, or two (a tangency yields the
/// touching point twice).
pub fn circle_intersections(a: &Circle, b: &Circle) -> Result<Vec<(f64, f64)>, GeometryError> {
    let dx = b.center_x - a.center_x;
    let dy = b.center_y - a.center_y;
    let d = dx.hypot(dy);
    let scale = a.radius.max(b.radius);
    if d <= TOLERANCE * scale {
        if (a.radius - b.radius).abs() <= TOLERANCE * scale {
            return Err(GeometryError::IdenticalCircles);
        }
        return Ok(Vec::new());
    }
    if d > a.radius + b.radius + TOLERANCE * scale || d < (a.radius - b.radius).abs() - TOLERANCE * scale {
        return Ok(Vec::new());
    }
    let along = (a.radius * a.radius - b.radius * b.radius + d * d) / (2.0 * d);
    let h = (a.radius * a.radius - along * along).max(0.0).sqrt();
    let (ux, uy) = (dx / d, dy / d);
    let (mx, my) = (a.center_x + along * ux, a.center_y + along * uy);
    Ok(vec![(mx + h * uy, my - h * ux), (mx - h * uy, my + h * ux)])
}
