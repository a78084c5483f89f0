//! TOML experiment configuration.
//!
//! Every key is optional. Absent keys take the reference values, unknown
//! keys are rejected, and range errors name the offending key.

use std::f64::consts::FRAC_PI_3;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use macol_core::channel::{ChannelParams, InterferenceMode};
use macol_core::simulator::{
    alternating_beams, reference_highway, Policy, SimConfig, BEAM_RADIUS_M, MONITORED_BEAM,
    SITE_SPACING_M,
};
use macol_core::BeamSector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VEHICLE_RANGE: (usize, usize) = (6, 40);
pub const EXPLORATION_CHOICES: [f64; 5] = [120.0, 180.0, 240.0, 300.0, 600.0];
pub const BAND_RANGE: (usize, usize) = (1, 5);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("`{key}`: {message}")]
    Range { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn range(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Curve settings of the `analytic` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticSettings {
    /// Activity probabilities, one CSV each.
    pub p_levels: Vec<f64>,
    /// Points of the distance grid on `[0, 2R]`, shared with the empirical CDFs.
    pub grid_points: usize,
    /// Cells per axis of the polar quadrature.
    pub quadrature_cells: usize,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        Self {
            p_levels: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            grid_points: 100,
            quadrature_cells: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policy: Policy,
    pub mode: InterferenceMode,
    pub vehicle_count: usize,
    pub sim_duration_s: f64,
    pub exploration_s: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
    pub band_count: usize,
    pub warmup_s: f64,
    pub window_s: f64,
    pub monitored_beam: usize,
    pub speed_min_kmh: f64,
    pub speed_max_kmh: f64,
    pub site_spacing_m: f64,
    pub beam_radius_m: f64,
    pub beamwidth_deg: f64,
    pub channel: ChannelParams,
    pub analytic: AnalyticSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            policy: sim.policy,
            mode: sim.mode,
            vehicle_count: sim.vehicle_count,
            sim_duration_s: sim.sim_duration_s,
            exploration_s: sim.exploration_s,
            epsilon: sim.epsilon,
            dt: sim.dt,
            seed: sim.seed,
            band_count: sim.band_count,
            warmup_s: sim.warmup_s,
            window_s: sim.window_s,
            monitored_beam: MONITORED_BEAM,
            speed_min_kmh: sim.speed_min_kmh,
            speed_max_kmh: sim.speed_max_kmh,
            site_spacing_m: SITE_SPACING_M,
            beam_radius_m: BEAM_RADIUS_M,
            beamwidth_deg: 60.0,
            channel: sim.channel,
            analytic: AnalyticSettings::default(),
        }
    }
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    VehicleCount,
    BandCount,
    ExplorationS,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::VehicleCount => "vehicle_count",
            SweepAxis::BandCount => "band_count",
            SweepAxis::ExplorationS => "exploration_s",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vehicle_count" => Ok(SweepAxis::VehicleCount),
            "band_count" => Ok(SweepAxis::BandCount),
            "exploration_s" => Ok(SweepAxis::ExplorationS),
            _ => Err(ConfigError::Invalid(format!(
                "unknown sweep axis '{s}' (expected vehicle_count, band_count or exploration_s)"
            ))),
        }
    }
}

/// `axis=v1,v2,...` as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (axis, list) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("sweep '{s}' is not of the form axis=v1,v2,...")))?;
        let axis: SweepAxis = axis.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| range(axis.name(), format!("'{v}' is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err(range(axis.name(), "no sweep values"));
        }
        Ok(Sweep { axis, values })
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = VEHICLE_RANGE;
        if !(lo..=hi).contains(&self.vehicle_count) {
            return Err(range("vehicle_count", format!("{} is outside {lo}..={hi}", self.vehicle_count)));
        }
        if !self.vehicle_count.is_multiple_of(2) {
            return Err(range("vehicle_count", format!("{} is odd; directions need equal shares", self.vehicle_count)));
        }
        if !EXPLORATION_CHOICES.contains(&self.exploration_s) {
            return Err(range(
                "exploration_s",
                format!("{} is not one of 120, 180, 240, 300, 600", self.exploration_s),
            ));
        }
        let (lo, hi) = BAND_RANGE;
        if !(lo..=hi).contains(&self.band_count) {
            return Err(range("band_count", format!("{} is outside {lo}..={hi}", self.band_count)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(range("epsilon", format!("{} is outside [0, 1]", self.epsilon)));
        }
        let positive = [
            ("sim_duration_s", self.sim_duration_s),
            ("dt", self.dt),
            ("window_s", self.window_s),
            ("speed_min_kmh", self.speed_min_kmh),
            ("site_spacing_m", self.site_spacing_m),
            ("beam_radius_m", self.beam_radius_m),
            ("beamwidth_deg", self.beamwidth_deg),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(range(key, format!("{v} must be positive")));
            }
        }
        if !(self.warmup_s >= 0.0) {
            return Err(range("warmup_s", format!("{} must be non-negative", self.warmup_s)));
        }
        if !(self.speed_max_kmh >= self.speed_min_kmh) {
            return Err(range("speed_max_kmh", format!("{} is below speed_min_kmh", self.speed_max_kmh)));
        }
        if self.beamwidth_deg >= 360.0 {
            return Err(range("beamwidth_deg", format!("{} must be below 360", self.beamwidth_deg)));
        }
        if self.monitored_beam >= self.beams().len() {
            return Err(range("monitored_beam", format!("{} exceeds the beam count", self.monitored_beam)));
        }
        let a = &self.analytic;
        if let Some(p) = a.p_levels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(range("analytic.p_levels", format!("{p} is outside [0, 1]")));
        }
        if a.p_levels.is_empty() {
            return Err(range("analytic.p_levels", "at least one level is required"));
        }
        if a.grid_points < 2 {
            return Err(range("analytic.grid_points", "at least 2 points are required"));
        }
        if a.quadrature_cells == 0 {
            return Err(range("analytic.quadrature_cells", "must be positive"));
        }
        self.sim_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn beams(&self) -> Vec<BeamSector> {
        let radius = self.beam_radius_m;
        // Scaled from the 60° constant so the default reproduces it bit for bit.
        let beamwidth = self.beamwidth_deg / 60.0 * FRAC_PI_3;
        alternating_beams(self.site_spacing_m)
            .into_iter()
            .map(|b| BeamSector { radius, beamwidth, ..b })
            .collect()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            beams: self.beams(),
            highway: reference_highway(),
            channel: self.channel,
            policy: self.policy,
            mode: self.mode,
            vehicle_count: self.vehicle_count,
            sim_duration_s: self.sim_duration_s,
            exploration_s: self.exploration_s,
            epsilon: self.epsilon,
            dt: self.dt,
            seed: self.seed,
            band_count: self.band_count,
            warmup_s: self.warmup_s,
            window_s: self.window_s,
            monitored_beam: self.monitored_beam,
            speed_min_kmh: self.speed_min_kmh,
            speed_max_kmh: self.speed_max_kmh,
        }
    }

    /// Copy with one sweep axis set to `value`, revalidated.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self, ConfigError> {
        let mut out = self.clone();
        let count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(range(axis.name(), format!("{v} is not a whole number")))
            }
        };
        match axis {
            SweepAxis::VehicleCount => out.vehicle_count = count(value)?,
            SweepAxis::BandCount => out.band_count = count(value)?,
            SweepAxis::ExplorationS => out.exploration_s = value,
        }
        out.validate()?;
        Ok(out)
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml_str(&text)
}
