//! Constant-population highway traffic.
//!
//! Vehicles keep their lane and speed for a whole transit. When one crosses
//! the far edge it is replaced by a fresh vehicle entering from the same
//! edge it originally came from, so the head-count never changes.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{HighwayGeometry, Lane};

pub const KMH_TO_MPS: f64 = 1000.0 / 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error("vehicle count must be even to split equally between directions, got {0}")]
    OddCount(usize),
    #[error("speed bounds must satisfy 0 < min <= max, got [{0}, {1}] m/s")]
    InvalidSpeedBounds(f64, f64),
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("segment length must be positive, got {0}")]
    InvalidLength(f64),
}

/// Direction of travel along the segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    East,
    West,
}

impl Direction {
    pub fn heading(self) -> f64 {
        match self {
            Direction::East => 0.0,
            Direction::West => PI,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::East => 1.0,
            Direction::West => -1.0,
        }
    }

    fn of_lane(lane: &Lane) -> Self {
        if lane.heading.cos() >= 0.0 {
            Direction::East
        } else {
            Direction::West
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub lane_index: usize,
    /// Metres per second.
    pub speed: f64,
    pub direction: Direction,
    pub spawn_time: f64,
    /// Position at `spawn_time`; the trajectory is `x0 + sign * speed * (t - spawn_time)`.
    pub x0: f64,
    /// False for the initial population, which starts mid-segment.
    pub entered_at_edge: bool,
}

impl Vehicle {
    pub fn heading(&self) -> f64 {
        self.direction.heading()
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Position on the exact linear trajectory at time `t`.
    pub fn x_at(&self, t: f64) -> f64 {
        self.x0 + self.direction.sign() * self.speed * (t - self.spawn_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub vehicle_count: usize,
    pub segment_length: f64,
    pub lanes: Vec<Lane>,
    pub speed_min: f64,
    pub speed_max: f64,
}

impl TrafficConfig {
    /// Default speed range of 80 to 110 km/h.
    pub fn new(vehicle_count: usize, highway: &HighwayGeometry) -> Result<Self, MobilityError> {
        Self::with_speeds_kmh(vehicle_count, highway, 80.0, 110.0)
    }

    pub fn with_speeds_kmh(
        vehicle_count: usize,
        highway: &HighwayGeometry,
        min_kmh: f64,
        max_kmh: f64,
    ) -> Result<Self, MobilityError> {
        let cfg = Self {
            vehicle_count,
            segment_length: highway.length,
            lanes: highway.lanes.clone(),
            speed_min: min_kmh * KMH_TO_MPS,
            speed_max: max_kmh * KMH_TO_MPS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MobilityError> {
        if !self.vehicle_count.is_multiple_of(2) {
            return Err(MobilityError::OddCount(self.vehicle_count));
        }
        if !(self.speed_min > 0.0 && self.speed_min <= self.speed_max) {
            return Err(MobilityError::InvalidSpeedBounds(self.speed_min, self.speed_max));
        }
        if !(self.segment_length > 0.0) {
            return Err(MobilityError::InvalidLength(self.segment_length));
        }
        Ok(())
    }

    fn lanes_for(&self, dir: Direction) -> Vec<usize> {
        self.lanes
            .iter()
            .enumerate()
            .filter(|(_, l)| Direction::of_lane(l) == dir)
            .map(|(i, _)| i)
            .collect()
    }

    fn entry_x(&self, dir: Direction) -> f64 {
        match dir {
            Direction::East => 0.0,
            Direction::West => self.segment_length,
        }
    }

    fn sample_speed(&self, rng: &mut impl Rng) -> f64 {
        if self.speed_max > self.speed_min {
            rng.gen_range(self.speed_min..=self.speed_max)
        } else {
            self.speed_min
        }
    }

    fn fresh(&self, id: u64, dir: Direction, x: f64, t: f64, at_edge: bool, rng: &mut impl Rng) -> Vehicle {
        let lanes = self.lanes_for(dir);
        let lane_index = lanes[rng.gen_range(0..lanes.len())];
        let speed = self.sample_speed(rng);
        Vehicle {
            id,
            x,
            y: self.lanes[lane_index].offset,
            lane_index,
            speed,
            direction: dir,
            spawn_time: t,
            x0: x,
            entered_at_edge: at_edge,
        }
    }
}

/// Draws the initial population: first half eastbound, second half
/// westbound, positions uniform along the segment.
pub fn spawn_population(cfg: &TrafficConfig, rng: &mut impl Rng) -> Result<Vec<Vehicle>, MobilityError> {
    cfg.validate()?;
    let half = cfg.vehicle_count / 2;
    let mut out = Vec::with_capacity(cfg.vehicle_count);
    for i in 0..cfg.vehicle_count {
        let dir = if i < half { Direction::East } else { Direction::West };
        let x = rng.gen_range(0.0..cfg.segment_length);
        out.push(cfg.fresh(i as u64, dir, x, 0.0, false, rng));
    }
    Ok(out)
}

/// Moves every vehicle `dt` seconds along its lane. No wrapping.
pub fn step(vehicles: &mut [Vehicle], dt: f64) -> Result<(), MobilityError> {
    if !(dt > 0.0) {
        return Err(MobilityError::InvalidStep(dt));
    }
    for v in vehicles {
        v.x += v.direction.sign() * v.speed * dt;
    }
    Ok(())
}

pub fn has_exited(v: &Vehicle, cfg: &TrafficConfig) -> bool {
    match v.direction {
        Direction::East => v.x >= cfg.segment_length,
        Direction::West => v.x <= 0.0,
    }
}

/// Replaces a vehicle that crossed its far edge at time `now`.
///
/// The replacement enters at the same edge the old vehicle came from. The
/// part of the step spent beyond the edge is carried over at the new speed,
/// so the new trajectory starts exactly at the crossing instant.
pub fn wrap(v: &Vehicle, cfg: &TrafficConfig, id: u64, now: f64, rng: &mut impl Rng) -> Vehicle {
    let exit_x = cfg.segment_length - cfg.entry_x(v.direction);
    let overshoot = (v.x - exit_x).abs();
    let late = overshoot / v.speed;
    let entry = cfg.entry_x(v.direction);
    let mut n = cfg.fresh(id, v.direction, entry, now - late, true, rng);
    n.x = entry + v.direction.sign() * n.speed * late;
    n
}

/// Old and new identity of a wrapped vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Respawn {
    pub slot: usize,
    pub old_id: u64,
    pub new_id: u64,
}

/// A vehicle population together with its own random stream.
#[derive(Debug, Clone)]
pub struct Traffic {
    cfg: TrafficConfig,
    vehicles: Vec<Vehicle>,
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Traffic {
    pub fn new(cfg: TrafficConfig, seed: u64) -> Result<Self, MobilityError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vehicles = spawn_population(&cfg, &mut rng)?;
        let next_id = vehicles.len() as u64;
        Ok(Self {
            cfg,
            vehicles,
            rng,
            next_id,
        })
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.cfg
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    /// Advances to time `now` (the end of the step) and respawns every
    /// vehicle that left the segment.
    pub fn advance(&mut self, dt: f64, now: f64) -> Result<Vec<Respawn>, MobilityError> {
        step(&mut self.vehicles, dt)?;
        let mut out = Vec::new();
        for slot in 0..self.vehicles.len() {
            if has_exited(&self.vehicles[slot], &self.cfg) {
                let old = self.vehicles[slot];
                let n = wrap(&old, &self.cfg, self.next_id, now, &mut self.rng);
                self.next_id += 1;
                self.vehicles[slot] = n;
                out.push(Respawn {
                    slot,
                    old_id: old.id,
                    new_id: n.id,
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn highway() -> HighwayGeometry {
        HighwayGeometry::symmetric(500.0, 20.0, 2).unwrap()
    }

    #[test]
    fn splits_equally() {
        let cfg = TrafficConfig::new(6, &highway()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vs = spawn_population(&cfg, &mut rng).unwrap();
        let east = vs.iter().filter(|v| v.direction == Direction::East).count();
        assert_eq!(east, 3);
        assert_eq!(vs.len() - east, 3);
        for v in &vs {
            let lane = &cfg.lanes[v.lane_index];
            assert_eq!(Direction::of_lane(lane), v.direction);
            assert_eq!(v.y, lane.offset);
            assert!((0.0..=500.0).contains(&v.x));
        }
    }

    #[test]
    fn rejects_odd_count() {
        assert_eq!(
            TrafficConfig::new(7, &highway()),
            Err(MobilityError::OddCount(7))
        );
    }

    #[test]
    fn seeded_population_is_reproducible() {
        let cfg = TrafficConfig::new(20, &highway()).unwrap();
        let a = Traffic::new(cfg.clone(), 9).unwrap();
        let b = Traffic::new(cfg, 9).unwrap();
        assert_eq!(a.vehicles(), b.vehicles());
    }

    #[test]
    fn speeds_stay_in_bounds() {
        let cfg = TrafficConfig::new(10_000, &highway()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vs = spawn_population(&cfg, &mut rng).unwrap();
        for v in vs {
            assert!(v.speed >= 22.222 && v.speed <= 30.556, "{}", v.speed);
        }
    }

    #[test]
    fn step_moves_by_speed() {
        let cfg = TrafficConfig::new(2, &highway()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut vs = spawn_population(&cfg, &mut rng).unwrap();
        for v in vs.iter_mut() {
            v.speed = 25.0;
            v.x = 250.0;
        }
        step(&mut vs, 0.1).unwrap();
        assert!((vs[0].x - 252.5).abs() < 1e-12);
        assert!((vs[1].x - 247.5).abs() < 1e-12);
        assert!(step(&mut vs, 0.0).is_err());
    }

    #[test]
    fn counts_wraps_at_constant_speed() {
        let hw = highway();
        let mut cfg = TrafficConfig::new(2, &hw).unwrap();
        cfg.speed_min = 30.56;
        cfg.speed_max = 30.56;
        let mut t = Traffic::new(cfg, 4).unwrap();
        for v in t.vehicles.iter_mut() {
            v.x = t.cfg.entry_x(v.direction);
            v.x0 = v.x;
        }
        let mut wraps = 0;
        for k in 1..=20_000 {
            wraps += t
                .advance(0.1, k as f64 * 0.1)
                .unwrap()
                .iter()
                .filter(|r| r.slot == 0)
                .count();
        }
        assert_eq!(wraps, (61_120.0f64 / 500.0).floor() as usize);
    }

    #[test]
    fn wrap_keeps_direction_and_population() {
        let cfg = TrafficConfig::new(4, &highway()).unwrap();
        let mut t = Traffic::new(cfg, 5).unwrap();
        let before = t.vehicles().len();
        let mut seen = 0;
        for k in 1..=1000 {
            let now = k as f64 * 0.1;
            let snapshot: Vec<Vehicle> = t.vehicles().to_vec();
            for r in t.advance(0.1, now).unwrap() {
                seen += 1;
                let n = t.vehicles()[r.slot];
                assert_eq!(n.direction, snapshot[r.slot].direction);
                assert!(n.entered_at_edge);
                assert_ne!(r.old_id, r.new_id);
                let edge = t.cfg.entry_x(n.direction);
                assert!((n.x - edge).abs() <= n.speed * 0.1 + 1e-9);
                assert!((n.x_at(now) - n.x).abs() < 1e-9);
            }
            assert_eq!(t.vehicles().len(), before);
        }
        assert!(seen > 0);
    }

    #[test]
    fn respawn_speed_is_independent() {
        let cfg = TrafficConfig::new(2, &highway()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut v = spawn_population(&cfg, &mut rng).unwrap()[0];
        let mut pairs = Vec::new();
        for i in 0..10_000u64 {
            v.x = cfg.segment_length + 0.5;
            let n = wrap(&v, &cfg, 100 + i, 0.0, &mut rng);
            pairs.push((v.speed, n.speed));
            v = n;
        }
        let n = pairs.len() as f64;
        let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (a, b) in &pairs {
            sab += (a - ma) * (b - mb);
            saa += (a - ma) * (a - ma);
            sbb += (b - mb) * (b - mb);
        }
        let corr = sab / (saa * sbb).sqrt();
        assert!(corr.abs() < 0.05, "{corr}");
    }
}
