//! Link budget for the practical (SINR-based) interference model.
//!
//! Dual-slope close-in pathloss at 28 GHz, thermal noise floor, SNR/SINR and
//! the goodput used as the bandit reward. All powers are in dB/dBm at the
//! API boundary; sums of interferers happen in the linear domain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("SNR threshold {threshold_db} dB is not reachable (SNR at {reference_m} m is {snr_db:.2} dB)")]
    ThresholdUnreachable {
        threshold_db: f64,
        reference_m: f64,
        snr_db: f64,
    },
}

/// Interference framework used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceMode {
    /// Binary: a served vehicle inside another active sector is interfered.
    #[default]
    Geometric,
    /// SINR against a decodability threshold.
    Practical,
}

/// Transmission parameters. Defaults are the 28 GHz / 50 MHz small-cell setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub beamforming_gain_db: f64,
    pub noise_figure_db: f64,
    pub snr_threshold_db: f64,
    pub alpha_near: f64,
    pub alpha_far: f64,
    pub breakpoint_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 28.0,
            bandwidth_hz: 50e6,
            tx_power_dbm: 20.0,
            beamforming_gain_db: 9.0,
            noise_figure_db: 7.0,
            snr_threshold_db: -5.0,
            alpha_near: 2.1,
            alpha_far: 3.4,
            breakpoint_m: 54.0,
        }
    }
}

/// Reference distance of the close-in model; the practical radius search
/// never looks below it.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

/// Nominal rate of an interference-free tick in geometric mode (one unit per second).
pub const GEOMETRIC_RATE: f64 = 1.0;

fn check_distance(d: f64) -> Result<(), ChannelError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::NonPositiveDistance(d))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `PL(d) = 32.4 + 20 log10(f_GHz) + 10 alpha log10(d)`, with the near-slope
/// exponent below the breakpoint. Discontinuous at the breakpoint.
pub fn pathloss_db(params: &ChannelParams, d: f64) -> Result<f64, ChannelError> {
    check_distance(d)?;
    let alpha = if d < params.breakpoint_m {
        params.alpha_near
    } else {
        params.alpha_far
    };
    Ok(32.4 + 20.0 * params.carrier_ghz.log10() + 10.0 * alpha * d.log10())
}

/// Thermal noise floor over the configured bandwidth.
pub fn noise_power_dbm(params: &ChannelParams) -> Result<f64, ChannelError> {
    if !(params.bandwidth_hz > 0.0) {
        return Err(ChannelError::NonPositiveBandwidth(params.bandwidth_hz));
    }
    Ok(-174.0 + 10.0 * params.bandwidth_hz.log10() + params.noise_figure_db)
}

/// Received power at distance `d` (transmit power plus beamforming gain).
pub fn received_power_dbm(params: &ChannelParams, d: f64) -> Result<f64, ChannelError> {
    Ok(params.tx_power_dbm + params.beamforming_gain_db - pathloss_db(params, d)?)
}

pub fn snr_db(params: &ChannelParams, d: f64) -> Result<f64, ChannelError> {
    Ok(received_power_dbm(params, d)? - noise_power_dbm(params)?)
}

/// Largest distance at which the SNR still meets the threshold.
///
/// Searched on the far slope when the breakpoint itself is within range,
/// otherwise on the near slope. Bisection stops at 1e-6 m.
pub fn practical_beam_radius(params: &ChannelParams) -> Result<f64, ChannelError> {
    let threshold = params.snr_threshold_db;
    let at_reference = snr_db(params, REFERENCE_DISTANCE_M)?;
    if at_reference < threshold {
        return Err(ChannelError::ThresholdUnreachable {
            threshold_db: threshold,
            reference_m: REFERENCE_DISTANCE_M,
            snr_db: at_reference,
        });
    }
    let (mut lo, mut hi) = if params.breakpoint_m > REFERENCE_DISTANCE_M
        && snr_db(params, params.breakpoint_m)? >= threshold
    {
        let mut hi = 2.0 * params.breakpoint_m;
        while snr_db(params, hi)? >= threshold {
            hi *= 2.0;
        }
        (params.breakpoint_m, hi)
    } else {
        let mut hi = REFERENCE_DISTANCE_M * 2.0;
        while hi < params.breakpoint_m && snr_db(params, hi)? >= threshold {
            hi *= 2.0;
        }
        (REFERENCE_DISTANCE_M, hi.min(params.breakpoint_m))
    };
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if snr_db(params, mid)? >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// SINR of a link at `serving_d` with co-channel interferers at
/// `interferer_ds`. The caller decides which interferers cover the receiver.
pub fn sinr_db(params: &ChannelParams, serving_d: f64, interferer_ds: &[f64]) -> Result<f64, ChannelError> {
    if interferer_ds.is_empty() {
        return snr_db(params, serving_d);
    }
    let signal = db_to_linear(received_power_dbm(params, serving_d)?);
    let noise = db_to_linear(noise_power_dbm(params)?);
    let mut interference = 0.0;
    for &d in interferer_ds {
        interference += db_to_linear(received_power_dbm(params, d)?);
    }
    Ok(linear_to_db(signal / (noise + interference)))
}

/// One evaluated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub snr_db: f64,
    pub sinr_db: f64,
    pub decodable: bool,
    pub goodput_bps: f64,
}

impl LinkSample {
    pub fn evaluate(
        params: &ChannelParams,
        serving_d: f64,
        interferer_ds: &[f64],
    ) -> Result<Self, ChannelError> {
        let snr = snr_db(params, serving_d)?;
        let sinr = if interferer_ds.is_empty() {
            snr
        } else {
            sinr_db(params, serving_d, interferer_ds)?.min(snr)
        };
        let decodable = sinr >= params.snr_threshold_db;
        Ok(Self {
            snr_db: snr,
            sinr_db: sinr,
            decodable,
            goodput_bps: goodput_bps(params, InterferenceMode::Practical, sinr, !interferer_ds.is_empty()),
        })
    }
}

/// Shannon rate over the configured bandwidth when decodable, zero otherwise.
pub fn shannon_goodput_bps(params: &ChannelParams, sinr_db: f64) -> f64 {
    if sinr_db < params.snr_threshold_db {
        0.0
    } else {
        params.bandwidth_hz * (1.0 + db_to_linear(sinr_db)).log2()
    }
}

/// Instantaneous goodput.
///
/// Geometric mode ignores the SINR: [`GEOMETRIC_RATE`] when clean, zero when
/// `interfered`. Practical mode ignores `interfered` and applies the
/// decodability threshold to the SINR.
pub fn goodput_bps(params: &ChannelParams, mode: InterferenceMode, sinr_db: f64, interfered: bool) -> f64 {
    match mode {
        InterferenceMode::Geometric => {
            if interfered {
                0.0
            } else {
                GEOMETRIC_RATE
            }
        }
        InterferenceMode::Practical => shannon_goodput_bps(params, sinr_db),
    }
}
