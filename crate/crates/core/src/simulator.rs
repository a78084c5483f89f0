//! Fixed-step highway simulation.
//!
//! Every tick runs move, close, decide, measure in that order. Decisions see
//! the positions after the move; measurement covers the interval that starts
//! at the tick and labels each vehicle as served cleanly, interfered, or in
//! outage. The loop is single-threaded and owns all state, so a
//! configuration and seed fully determine the report.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    compute_reward, derive_masks, select_best_snr, select_random, AgentError, Candidate, CentralNode,
    ContextVector, Decision, MacolAgent, Mask, Phase,
};
use crate::analytic::{AnalyticError, HighwayGeometry, Layout};
use crate::channel::{
    practical_beam_radius, shannon_goodput_bps, sinr_db, ChannelError, ChannelParams, InterferenceMode,
    GEOMETRIC_RATE,
};
use crate::geometry::{wrap_angle, BeamSector, GeometryError, TOLERANCE};
use crate::mobility::{MobilityError, Traffic, TrafficConfig, Vehicle};

pub const SEGMENT_LENGTH_M: f64 = 500.0;
pub const ROAD_WIDTH_M: f64 = 20.0;
pub const LANES_PER_DIRECTION: usize = 2;
/// Distance from a base station to the near road edge.
pub const EDGE_OFFSET_M: f64 = 5.0;
pub const BEAM_RADIUS_M: f64 = 80.0;
pub const BEAMWIDTH_RAD: f64 = FRAC_PI_3;
/// Base-station spacing along the road; sides alternate south/north.
pub const SITE_SPACING_M: f64 = 62.5;
pub const SITE_COUNT: usize = 6;
/// The north-pointing beam of the south-side station nearest the centre.
pub const MONITORED_BEAM: usize = 7;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub fn reference_beams() -> Vec<BeamSector> {
    alternating_beams(SITE_SPACING_M)
}

/// Three road-facing beams per station for [`SITE_COUNT`] stations `spacing`
/// metres apart. Stations alternate sides starting on the south and are
/// centred on the segment.
pub fn alternating_beams(spacing: f64) -> Vec<BeamSector> {
    let first = 0.5 * (SEGMENT_LENGTH_M - spacing * (SITE_COUNT - 1) as f64);
    let mut out = Vec::with_capacity(3 * SITE_COUNT);
    for s in 0..SITE_COUNT {
        let x = first + spacing * s as f64;
        let (y, sign) = if s % 2 == 0 {
            (-EDGE_OFFSET_M, 1.0)
        } else {
            (ROAD_WIDTH_M + EDGE_OFFSET_M, -1.0)
        };
        for pointing in [FRAC_PI_6, FRAC_PI_2, 5.0 * FRAC_PI_6] {
            let id = out.len();
            out.push(BeamSector {
                id,
                origin_x: x,
                origin_y: y,
                pointing: sign * pointing,
                radius: BEAM_RADIUS_M,
                beamwidth: BEAMWIDTH_RAD,
            });
        }
    }
    out
}

pub fn reference_highway() -> HighwayGeometry {
    HighwayGeometry::symmetric(SEGMENT_LENGTH_M, ROAD_WIDTH_M, LANES_PER_DIRECTION)
        .expect("reference highway is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Macol,
    BestSnr,
    Random,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Macol, Policy::BestSnr, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Macol => "macol",
            Policy::BestSnr => "best_snr",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macol" => Ok(Policy::Macol),
            "best_snr" | "best-snr" | "bestsnr" => Ok(Policy::BestSnr),
            "random" => Ok(Policy::Random),
            _ => Err(format!("unknown policy '{s}' (expected macol, best_snr or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub beams: Vec<BeamSector>,
    pub highway: HighwayGeometry,
    pub channel: ChannelParams,
    pub policy: Policy,
    pub mode: InterferenceMode,
    pub vehicle_count: usize,
    pub sim_duration_s: f64,
    pub exploration_s: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
    pub band_count: usize,
    /// Start of the steady-state measurement window.
    pub warmup_s: f64,
    /// Length of the time-series windows.
    pub window_s: f64,
    /// Beam whose per-tick SINR is traced in practical mode.
    pub monitored_beam: usize,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            beams: reference_beams(),
            highway: reference_highway(),
            channel: ChannelParams::default(),
            policy: Policy::Macol,
            mode: InterferenceMode::Geometric,
            vehicle_count: 20,
            sim_duration_s: 2000.0,
            exploration_s: 600.0,
            epsilon: 0.05,
            dt: 0.1,
            seed: 1,
            band_count: 1,
            warmup_s: 60.0,
            window_s: 20.0,
            monitored_beam: MONITORED_BEAM,
            speed_min_kmh: 80.0,
            speed_max_kmh: 110.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.beams.is_empty() {
            return bad("at least one beam is required".into());
        }
        for (i, b) in self.beams.iter().enumerate() {
            if b.id != i {
                return bad(format!("beam at position {i} has id {}", b.id));
            }
            BeamSector::new(b.id, b.origin_x, b.origin_y, b.pointing, b.radius, b.beamwidth)?;
        }
        Layout::uniform(self.beams.clone(), 0.0)?;
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.sim_duration_s >= self.dt) {
            return bad(format!("sim_duration_s must be at least dt, got {}", self.sim_duration_s));
        }
        if !(self.exploration_s >= 0.0) {
            return bad(format!("exploration_s must be non-negative, got {}", self.exploration_s));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if self.band_count == 0 {
            return bad("band_count must be at least 1".into());
        }
        if !(self.warmup_s >= 0.0) {
            return bad(format!("warmup_s must be non-negative, got {}", self.warmup_s));
        }
        if !(self.window_s >= self.dt) {
            return bad(format!("window_s must be at least dt, got {}", self.window_s));
        }
        if self.monitored_beam >= self.beams.len() {
            return bad(format!("monitored_beam {} out of range", self.monitored_beam));
        }
        TrafficConfig::with_speeds_kmh(self.vehicle_count, &self.highway, self.speed_min_kmh, self.speed_max_kmh)?;
        Ok(())
    }

    /// Beams as used for coverage: in practical mode the radius is where the
    /// SNR meets the decoding threshold.
    pub fn effective_beams(&self) -> Result<Vec<BeamSector>, SimError> {
        match self.mode {
            InterferenceMode::Geometric => Ok(self.beams.clone()),
            InterferenceMode::Practical => {
                let r = practical_beam_radius(&self.channel)?;
                Ok(self.beams.iter().map(|b| BeamSector { radius: r, ..*b }).collect())
            }
        }
    }

    pub fn tick_count(&self) -> u64 {
        (self.sim_duration_s / self.dt).round() as u64
    }

    /// Start of the post-exploration steady state.
    pub fn steady_start(&self) -> f64 {
        self.warmup_s.max(self.exploration_s)
    }
}

/// Outcome of one measured tick of a live connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub interfered: bool,
    pub decodable: bool,
    /// Only in practical mode.
    pub sinr_db: Option<f64>,
}

fn in_wedge(beam: &BeamSector, x: f64, y: f64) -> bool {
    let dx = x - beam.origin_x;
    let dy = y - beam.origin_y;
    dx.hypot(dy) <= TOLERANCE || wrap_angle(dy.atan2(dx) - beam.pointing).abs() <= beam.half_width() + TOLERANCE
}

/// Classifies the tick of a connection of `serving` to a vehicle at
/// `(x, y)`, given the active beams of the connection's band.
///
/// Geometric mode: interfered when another active sector contains the
/// vehicle. Practical mode: every other active beam whose angular wedge
/// contains the vehicle adds interference; the tick counts as interfered
/// when the SINR misses the threshold while at least one such beam exists.
pub fn classify_tick(
    beams: &[BeamSector],
    serving: usize,
    active: &ContextVector,
    x: f64,
    y: f64,
    mode: InterferenceMode,
    channel: &ChannelParams,
) -> Result<TickOutcome, SimError> {
    let others = beams
        .iter()
        .enumerate()
        .filter(move |(k, _)| *k != serving && active.get(*k));
    match mode {
        InterferenceMode::Geometric => {
            let interfered = others.into_iter().any(|(_, b)| b.contains_xy(x, y));
            Ok(TickOutcome {
                interfered,
                decodable: !interfered,
                sinr_db: None,
            })
        }
        InterferenceMode::Practical => {
            let b = &beams[serving];
            let d = (x - b.origin_x).hypot(y - b.origin_y);
            let interferers: Vec<f64> = others
                .filter(|(_, o)| in_wedge(o, x, y))
                .map(|(_, o)| (x - o.origin_x).hypot(y - o.origin_y))
                .collect();
            let sinr = sinr_db(channel, d, &interferers)?;
            let decodable = sinr >= channel.snr_threshold_db;
            Ok(TickOutcome {
                interfered: !decodable && !interferers.is_empty(),
                decodable,
                sinr_db: Some(sinr),
            })
        }
    }
}

/// Least-loaded band for a beam with mask `mask`: among the `eligible`
/// bands, the one on which the fewest potential interferers are active.
/// Ties go to the lowest index.
pub fn assign_band(mask: &Mask, band_status: &[ContextVector], eligible: &[bool]) -> Option<usize> {
    band_status
        .iter()
        .enumerate()
        .filter(|(n, _)| eligible.get(*n).copied().unwrap_or(false))
        .min_by_key(|(n, s)| (s.masked(mask).count_ones(), *n))
        .map(|(n, _)| n)
}

/// Tick counts by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TickTally {
    pub service: u64,
    pub interference: u64,
    pub outage: u64,
}

impl TickTally {
    pub fn total(&self) -> u64 {
        self.service + self.interference + self.outage
    }

    /// `(service, interference, outage)` fractions; zeros when empty.
    pub fn fractions(&self) -> (f64, f64, f64) {
        let t = self.total();
        if t == 0 {
            return (0.0, 0.0, 0.0);
        }
        let t = t as f64;
        (
            self.service as f64 / t,
            self.interference as f64 / t,
            self.outage as f64 / t,
        )
    }

    pub fn interference_fraction(&self) -> f64 {
        self.fractions().1
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Service => self.service += 1,
            Label::Interference => self.interference += 1,
            Label::Outage => self.outage += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    Service,
    Interference,
    Outage,
}

/// One vehicle's complete pass over the segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitRecord {
    pub vehicle_id: u64,
    pub start_time: f64,
    pub end_time: f64,
    pub ticks: TickTally,
}

/// `(service, interference, outage)` fractions of a transit.
pub fn transit_decomposition(t: &TransitRecord) -> (f64, f64, f64) {
    t.ticks.fractions()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    /// The vehicle left the serving sector.
    Departed,
    /// The vehicle left the segment and was replaced.
    Respawned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub beam: usize,
    pub band: usize,
    pub vehicle_id: u64,
    pub start_time: f64,
    pub duration: f64,
    /// Distance travelled during clean ticks.
    pub clean_distance: f64,
    pub travelled: f64,
    pub interfered_time: f64,
    pub bits: f64,
    pub reward: f64,
    /// Masked context at connection start (MACOL only).
    pub context: Option<u64>,
    pub phase: Phase,
    /// Opened by the epsilon branch.
    pub explored: bool,
    /// Mean per-tick SINR (practical mode only).
    pub mean_sinr_db: Option<f64>,
    pub reason: CloseReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start_time: f64,
    pub ticks: TickTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSample {
    pub time: f64,
    pub band: usize,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamStats {
    pub beam: usize,
    pub connections: u64,
    pub backoffs: u64,
    pub explores: u64,
    pub connected_ticks: u64,
    pub loss_ticks: u64,
    /// Largest number of distinct contexts seen by any of the beam's agents.
    pub contexts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Signaling {
    pub pushes: u64,
    pub pulls: u64,
}

/// Connected ticks and the undecodable ones among them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossTally {
    pub connected: u64,
    pub lost: u64,
}

impl LossTally {
    pub fn rate(&self) -> f64 {
        if self.connected == 0 {
            0.0
        } else {
            self.lost as f64 / self.connected as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: SimConfig,
    /// Coverage radius actually simulated.
    pub beam_radius_m: Vec<f64>,
    pub ticks: u64,
    pub transits: Vec<TransitRecord>,
    /// Vehicle ticks in `[warmup, exploration end)`.
    pub exploration: TickTally,
    /// Vehicle ticks from `max(warmup, exploration end)` on.
    pub exploitation: TickTally,
    pub windows: Vec<WindowRecord>,
    pub connections: Vec<ConnectionRecord>,
    pub beams: Vec<BeamStats>,
    pub sinr_trace: Vec<SinrSample>,
    pub signaling: Signaling,
    /// Connected ticks in the same two periods as the tick tallies.
    pub exploration_loss: LossTally,
    pub exploitation_loss: LossTally,
}

impl MetricsReport {
    /// Steady-state fraction of connected ticks whose transmission was lost.
    pub fn loss_rate(&self) -> f64 {
        self.exploitation_loss.rate()
    }

    /// Interference-free distances of connections started at or after `from`.
    pub fn service_distances_from(&self, from: f64) -> Vec<f64> {
        self.connections
            .iter()
            .filter(|c| c.start_time >= from - 1e-9)
            .map(|c| c.clean_distance)
            .collect()
    }

    /// Steady-state service-distance samples.
    pub fn service_distances(&self) -> Vec<f64> {
        self.service_distances_from(self.config.steady_start())
    }

    pub fn mean_service_distance(&self) -> f64 {
        let d = self.service_distances();
        if d.is_empty() {
            0.0
        } else {
            d.iter().sum::<f64>() / d.len() as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
struct Live {
    beam: usize,
    band: usize,
    slot: usize,
    vehicle_id: u64,
    start_tick: u64,
    ticks: u64,
    clean_distance: f64,
    travelled: f64,
    interfered_ticks: u64,
    bits: f64,
    context: Option<ContextVector>,
    phase: Phase,
    explored: bool,
    sinr_sum: f64,
}

#[derive(Debug, Clone)]
struct TransitAcc {
    vehicle_id: u64,
    start_time: f64,
    complete: bool,
    ticks: TickTally,
}

impl TransitAcc {
    fn of(v: &Vehicle) -> Self {
        Self {
            vehicle_id: v.id,
            start_time: v.spawn_time,
            complete: v.entered_at_edge,
            ticks: TickTally::default(),
        }
    }
}

struct Sim {
    cfg: SimConfig,
    beams: Vec<BeamSector>,
    masks: Vec<Mask>,
    traffic: Traffic,
    rng: ChaCha8Rng,
    agents: Vec<Vec<MacolAgent>>,
    nodes: Vec<CentralNode>,
    slots: Vec<Vec<Option<Live>>>,
    busy: Vec<bool>,
    transits: Vec<TransitAcc>,
    report: MetricsReport,
}

impl Sim {
    fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let beams = cfg.effective_beams()?;
        let layout = Layout::uniform(beams.clone(), 0.0)?;
        let masks = derive_masks(&layout, &cfg.highway)?;
        let tcfg = TrafficConfig::with_speeds_kmh(cfg.vehicle_count, &cfg.highway, cfg.speed_min_kmh, cfg.speed_max_kmh)?;
        let traffic = Traffic::new(tcfg, cfg.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let n = beams.len();
        let agents = (0..n)
            .map(|i| {
                (0..cfg.band_count)
                    .map(|_| MacolAgent::new(i, masks[i], cfg.epsilon, cfg.exploration_s))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let nodes = (0..cfg.band_count)
            .map(|_| CentralNode::new(n))
            .collect::<Result<Vec<_>, _>>()?;
        let transits = traffic.vehicles().iter().map(TransitAcc::of).collect();
        let busy = vec![false; traffic.vehicles().len()];
        let report = MetricsReport {
            config: cfg.clone(),
            beam_radius_m: beams.iter().map(|b| b.radius).collect(),
            ticks: cfg.tick_count(),
            transits: Vec::new(),
            exploration: TickTally::default(),
            exploitation: TickTally::default(),
            windows: Vec::new(),
            connections: Vec::new(),
            beams: (0..n)
                .map(|beam| BeamStats {
                    beam,
                    ..BeamStats::default()
                })
                .collect(),
            sinr_trace: Vec::new(),
            signaling: Signaling::default(),
            exploration_loss: LossTally::default(),
            exploitation_loss: LossTally::default(),
        };
        Ok(Self {
            slots: vec![vec![None; cfg.band_count]; n],
            cfg,
            beams,
            masks,
            traffic,
            rng,
            agents,
            nodes,
            busy,
            transits,
            report,
        })
    }

    fn time(&self, tick: u64) -> f64 {
        tick as f64 * self.cfg.dt
    }

    fn run(mut self) -> Result<MetricsReport, SimError> {
        for tick in 1..=self.cfg.tick_count() {
            let now = self.time(tick);
            let respawns = self.traffic.advance(self.cfg.dt, now)?;
            for r in &respawns {
                self.busy[r.slot] = false;
                let finished = std::mem::replace(
                    &mut self.transits[r.slot],
                    TransitAcc::of(&self.traffic.vehicles()[r.slot]),
                );
                if finished.complete {
                    self.report.transits.push(TransitRecord {
                        vehicle_id: finished.vehicle_id,
                        start_time: finished.start_time,
                        end_time: self.traffic.vehicles()[r.slot].spawn_time,
                        ticks: finished.ticks,
                    });
                }
            }
            self.close(tick)?;
            self.decide(tick)?;
            self.measure(tick)?;
        }
        if self.cfg.policy == Policy::Macol {
            self.report.signaling = Signaling {
                pushes: self.nodes.iter().map(|n| n.pushes).sum(),
                pulls: self.nodes.iter().map(|n| n.pulls).sum(),
            };
        }
        for (b, stats) in self.report.beams.iter_mut().enumerate() {
            stats.contexts = self.agents[b].iter().map(|a| a.contexts.len()).max().unwrap_or(0);
        }
        Ok(self.report)
    }

    fn close(&mut self, tick: u64) -> Result<(), SimError> {
        for b in 0..self.beams.len() {
            for n in 0..self.cfg.band_count {
                let Some(live) = &self.slots[b][n] else { continue };
                let v = &self.traffic.vehicles()[live.slot];
                let reason = if v.id != live.vehicle_id {
                    CloseReason::Respawned
                } else if !self.beams[b].contains_xy(v.x, v.y) {
                    CloseReason::Departed
                } else {
                    continue;
                };
                let live = self.slots[b][n].take().expect("slot checked above");
                self.finish(live, tick, reason)?;
            }
        }
        Ok(())
    }

    fn finish(&mut self, live: Live, tick: u64, reason: CloseReason) -> Result<(), SimError> {
        let dt = self.cfg.dt;
        let duration = (tick - live.start_tick) as f64 * dt;
        let reward = compute_reward(live.bits, duration)?;
        if let Some(ctx) = live.context {
            self.agents[live.beam][live.band].update_reward(ctx, reward, duration)?;
        }
        self.nodes[live.band].push_status(live.beam, false);
        if self.traffic.vehicles()[live.slot].id == live.vehicle_id {
            self.busy[live.slot] = false;
        }
        let mean_sinr_db = (self.cfg.mode == InterferenceMode::Practical && live.ticks > 0)
            .then(|| live.sinr_sum / live.ticks as f64);
        self.report.connections.push(ConnectionRecord {
            beam: live.beam,
            band: live.band,
            vehicle_id: live.vehicle_id,
            start_time: self.time(live.start_tick),
            duration,
            clean_distance: live.clean_distance,
            travelled: live.travelled,
            interfered_time: live.interfered_ticks as f64 * dt,
            bits: live.bits,
            reward,
            context: live.context.map(|c| c.bits()),
            phase: live.phase,
            explored: live.explored,
            mean_sinr_db,
            reason,
        });
        Ok(())
    }

    fn decide(&mut self, tick: u64) -> Result<(), SimError> {
        let now = self.time(tick);
        let bands = self.cfg.band_count;
        for b in 0..self.beams.len() {
            let beam = self.beams[b];
            let mut candidates: Vec<(usize, Candidate)> = self
                .traffic
                .vehicles()
                .iter()
                .enumerate()
                .filter(|(s, v)| !self.busy[*s] && beam.contains_xy(v.x, v.y))
                .map(|(s, v)| {
                    (
                        s,
                        Candidate {
                            vehicle_id: v.id,
                            distance: (v.x - beam.origin_x).hypot(v.y - beam.origin_y),
                        },
                    )
                })
                .collect();
            loop {
                if candidates.is_empty() {
                    break;
                }
                let eligible: Vec<bool> = (0..bands)
                    .map(|n| {
                        self.slots[b][n].is_none()
                            && !(self.cfg.policy == Policy::Macol && self.agents[b][n].in_backoff(now))
                    })
                    .collect();
                let status: Vec<ContextVector> = self.nodes.iter().map(|n| n.status).collect();
                let Some(band) = assign_band(&self.masks[b], &status, &eligible) else {
                    break;
                };
                let (decision, context) = match self.cfg.policy {
                    Policy::Macol => {
                        let ctx = self.nodes[band].observe_context(&self.masks[b]);
                        (self.agents[b][band].decide(&ctx, now, &mut self.rng), Some(ctx))
                    }
                    _ => (Decision::Serve, None),
                };
                match decision {
                    Decision::Backoff(_) => {
                        self.report.beams[b].backoffs += 1;
                        continue;
                    }
                    Decision::Explore => self.report.beams[b].explores += 1,
                    Decision::Serve => {}
                }
                let list: Vec<Candidate> = candidates.iter().map(|(_, c)| *c).collect();
                let chosen = match self.cfg.policy {
                    Policy::BestSnr => select_best_snr(&list)?,
                    _ => select_random(&list, &mut self.rng)?,
                };
                let idx = candidates
                    .iter()
                    .position(|(_, c)| c.vehicle_id == chosen)
                    .expect("chosen vehicle is a candidate");
                let (slot, _) = candidates.remove(idx);
                self.busy[slot] = true;
                self.nodes[band].push_status(b, true);
                self.report.beams[b].connections += 1;
                self.slots[b][band] = Some(Live {
                    beam: b,
                    band,
                    slot,
                    vehicle_id: chosen,
                    start_tick: tick,
                    ticks: 0,
                    clean_distance: 0.0,
                    travelled: 0.0,
                    interfered_ticks: 0,
                    bits: 0.0,
                    context,
                    phase: self.agents[b][band].phase(now),
                    explored: decision == Decision::Explore,
                    sinr_sum: 0.0,
                });
            }
        }
        Ok(())
    }

    fn measure(&mut self, tick: u64) -> Result<(), SimError> {
        let now = self.time(tick);
        let dt = self.cfg.dt;
        let steady = now >= self.cfg.warmup_s;
        let status: Vec<ContextVector> = self.nodes.iter().map(|n| n.status).collect();
        let mut labels = vec![Label::Outage; self.traffic.vehicles().len()];
        for b in 0..self.beams.len() {
            for n in 0..self.cfg.band_count {
                let Some(live) = self.slots[b][n].as_mut() else { continue };
                let v = self.traffic.vehicles()[live.slot];
                let out = classify_tick(&self.beams, b, &status[n], v.x, v.y, self.cfg.mode, &self.cfg.channel)?;
                let step = v.speed * dt;
                live.ticks += 1;
                live.travelled += step;
                if out.interfered {
                    live.interfered_ticks += 1;
                } else {
                    live.clean_distance += step;
                }
                live.bits += dt
                    * match self.cfg.mode {
                        InterferenceMode::Geometric => {
                            if out.interfered {
                                0.0
                            } else {
                                GEOMETRIC_RATE
                            }
                        }
                        InterferenceMode::Practical => {
                            shannon_goodput_bps(&self.cfg.channel, out.sinr_db.unwrap_or(f64::NEG_INFINITY))
                        }
                    };
                if let Some(s) = out.sinr_db {
                    live.sinr_sum += s;
                    if b == self.cfg.monitored_beam {
                        self.report.sinr_trace.push(SinrSample {
                            time: now,
                            band: n,
                            sinr_db: s,
                        });
                    }
                }
                labels[live.slot] = if out.interfered {
                    Label::Interference
                } else {
                    Label::Service
                };
                if steady {
                    let tally = if now < self.cfg.exploration_s {
                        &mut self.report.exploration_loss
                    } else {
                        &mut self.report.exploitation_loss
                    };
                    tally.connected += 1;
                    self.report.beams[b].connected_ticks += 1;
                    if !out.decodable {
                        tally.lost += 1;
                        self.report.beams[b].loss_ticks += 1;
                    }
                }
            }
        }
        // Integer bucketing: every full window holds the same number of ticks.
        let per_window = ((self.cfg.window_s / self.cfg.dt).round() as u64).max(1);
        let window = ((tick - 1) / per_window) as usize;
        while self.report.windows.len() <= window {
            let start = self.report.windows.len() as f64 * self.cfg.window_s;
            self.report.windows.push(WindowRecord {
                start_time: start,
                ticks: TickTally::default(),
            });
        }
        for (slot, &label) in labels.iter().enumerate() {
            self.transits[slot].ticks.add(label);
            self.report.windows[window].ticks.add(label);
            if steady {
                if now < self.cfg.exploration_s {
                    self.report.exploration.add(label);
                } else {
                    self.report.exploitation.add(label);
                }
            }
        }
        Ok(())
    }
}

/// Runs one simulation.
pub fn run(config: &SimConfig) -> Result<MetricsReport, SimError> {
    Sim::new(config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn status(bits: u64, n: usize) -> ContextVector {
        ContextVector::from_bits(bits, n).unwrap()
    }

    #[test]
    fn reference_layout_shape() {
        let beams = reference_beams();
        assert_eq!(beams.len(), 18);
        let hw = reference_highway();
        assert!(beams.iter().all(|b| hw.covers(b)));
        let xs: Vec<f64> = beams.iter().step_by(3).map(|b| b.origin_x).collect();
        assert_eq!(xs, vec![93.75, 156.25, 218.75, 281.25, 343.75, 406.25]);
        let m = &beams[MONITORED_BEAM];
        assert!(m.origin_y < 0.0 && (m.pointing - FRAC_PI_2).abs() < 1e-12);
        assert!(beams.iter().all(|b| b.origin_x - b.radius > 0.0 && b.origin_x + b.radius < SEGMENT_LENGTH_M));
    }

    #[test]
    fn reference_masks_have_at_most_five_neighbours() {
        let layout = Layout::uniform(reference_beams(), 0.0).unwrap();
        let masks = derive_masks(&layout, &reference_highway()).unwrap();
        let counts: Vec<u32> = masks.iter().map(|m| m.count_ones()).collect();
        assert_eq!(*counts.iter().max().unwrap(), 5);
        assert!(counts.iter().all(|&c| c >= 1));
        for (i, m) in masks.iter().enumerate() {
            assert!(!m.get(i));
            for k in 0..masks.len() {
                assert_eq!(m.get(k), masks[k].get(i));
            }
        }
    }

    #[test]
    fn classify_examples() {
        let beams = reference_beams();
        let p = ChannelParams::default();
        let (x, y) = (218.75, 10.0);
        let none = classify_tick(&beams, 7, &status(1 << 7, 18), x, y, InterferenceMode::Geometric, &p).unwrap();
        assert!(!none.interfered);
        let cover: Vec<usize> = (0..18).filter(|&k| k != 7 && beams[k].contains_xy(x, y)).collect();
        assert!(!cover.is_empty());
        let act = status((1 << 7) | (1 << cover[0]), 18);
        let hit = classify_tick(&beams, 7, &act, x, y, InterferenceMode::Geometric, &p).unwrap();
        assert!(hit.interfered && !hit.decodable);
        let pr = classify_tick(&beams, 7, &status(1 << 7, 18), x, y, InterferenceMode::Practical, &p).unwrap();
        assert!(pr.decodable && !pr.interfered);
        assert!((pr.sinr_db.unwrap() - crate::channel::snr_db(&p, 15.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn band_assignment() {
        let mask = Mask::from_bits(0b0110, 4).unwrap();
        let one = [status(0b0010, 4)];
        assert_eq!(assign_band(&mask, &one, &[true]), Some(0));
        let two = [status(0b0010, 4), status(0, 4)];
        assert_eq!(assign_band(&mask, &two, &[true, true]), Some(1));
        let even = [status(0, 4), status(0b1000, 4)];
        assert_eq!(assign_band(&mask, &even, &[true, true]), Some(0));
        assert_eq!(assign_band(&mask, &two, &[false, false]), None);
    }

    #[test]
    fn tally_fractions() {
        let t = TransitRecord {
            vehicle_id: 0,
            start_time: 0.0,
            end_time: 1.0,
            ticks: TickTally {
                service: 0,
                interference: 0,
                outage: 10,
            },
        };
        assert_eq!(transit_decomposition(&t), (0.0, 0.0, 1.0));
        assert_eq!(TickTally::default().fractions(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("greedy".parse::<Policy>().is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c = SimConfig::default();
        c.band_count = 0;
        assert!(matches!(c.validate(), Err(SimError::Config(_))));
        let mut c = SimConfig::default();
        c.vehicle_count = 7;
        assert!(matches!(c.validate(), Err(SimError::Mobility(_))));
        let mut c = SimConfig::default();
        c.epsilon = 2.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn short_run_is_consistent() {
        let cfg = SimConfig {
            vehicle_count: 10,
            sim_duration_s: 120.0,
            exploration_s: 60.0,
            warmup_s: 10.0,
            ..SimConfig::default()
        };
        let r = run(&cfg).unwrap();
        assert_eq!(r.ticks, 1200);
        assert!(!r.connections.is_empty());
        let slots = r.exploration.total() + r.exploitation.total();
        assert_eq!(slots, 10 * (1200 - 99));
        for t in &r.transits {
            let expected = ((t.end_time - t.start_time) / cfg.dt).round() as i64;
            assert!((t.ticks.total() as i64 - expected).abs() <= 1);
        }
        for c in &r.connections {
            assert!(c.clean_distance <= 2.0 * BEAM_RADIUS_M);
            assert!(c.interfered_time <= c.duration + 1e-9);
        }
        assert_eq!(run(&cfg).unwrap().to_json(), r.to_json());
    }
}
