//! Per-beam context-learning agents and the baseline vehicle selectors.
//!
//! Each agent sees the global activity vector through its own mask (the
//! beams that can interfere with it), keeps a running mean reward per
//! masked context, and after an explore-first phase serves only under
//! contexts whose mean beats the mean of all context means. Otherwise it
//! backs off for as long as a connection under that context usually lasts.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{HighwayGeometry, Layout, MAX_BEAMS};

/// Fallback backoff when nothing has been observed yet.
pub const DEFAULT_BACKOFF_S: f64 = 1.0;

/// Sampling pitch (metres) of the road grid used to detect overlap.
const MASK_PITCH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("no context has been observed yet")]
    NoContexts,
    #[error("connection duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),
    #[error("no candidate vehicles")]
    NoCandidates,
    #[error("epsilon must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("bit vectors hold at most {MAX_BEAMS} beams, got {0}")]
    TooManyBeams(usize),
    #[error("beam index {index} out of range for {len} beams")]
    BeamIndex { index: usize, len: usize },
}

/// One bit per beam, bit `i` set when beam `i` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContextVector {
    bits: u64,
    len: u8,
}

/// One bit per beam, bit `k` set when beam `k` can interfere with the owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mask {
    bits: u64,
    len: u8,
}

fn low_bits(len: usize) -> u64 {
    if len == 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

fn check_len(len: usize) -> Result<u8, AgentError> {
    if len > MAX_BEAMS {
        Err(AgentError::TooManyBeams(len))
    } else {
        Ok(len as u8)
    }
}

fn fmt_bits(bits: u64, len: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for i in 0..len {
        f.write_str(if bits >> i & 1 == 1 { "1" } else { "0" })?;
    }
    Ok(())
}

macro_rules! bitvector {
    ($t:ident) => {
        impl $t {
            pub fn zeros(len: usize) -> Result<Self, AgentError> {
                Ok(Self {
                    bits: 0,
                    len: check_len(len)?,
                })
            }

            /// Bits above `len` are discarded.
            pub fn from_bits(bits: u64, len: usize) -> Result<Self, AgentError> {
                Ok(Self {
                    bits: bits & low_bits(len),
                    len: check_len(len)?,
                })
            }

            pub fn from_slice(flags: &[bool]) -> Result<Self, AgentError> {
                let mut v = Self::zeros(flags.len())?;
                for (i, &f) in flags.iter().enumerate() {
                    v.set(i, f);
                }
                Ok(v)
            }

            pub fn bits(&self) -> u64 {
                self.bits
            }

            pub fn len(&self) -> usize {
                self.len as usize
            }

            pub fn is_empty(&self) -> bool {
                self.len == 0
            }

            pub fn get(&self, i: usize) -> bool {
                i < self.len() && self.bits >> i & 1 == 1
            }

            /// Indices past the length are ignored.
            pub fn set(&mut self, i: usize, on: bool) {
                if i >= self.len() {
                    return;
                }
                if on {
                    self.bits |= 1 << i;
                } else {
                    self.bits &= !(1 << i);
                }
            }

            pub fn count_ones(&self) -> u32 {
                self.bits.count_ones()
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt_bits(self.bits, self.len, f)
            }
        }
    };
}

bitvector!(ContextVector);
bitvector!(Mask);

impl ContextVector {
    /// Hadamard product with a mask.
    pub fn masked(&self, mask: &Mask) -> ContextVector {
        ContextVector {
            bits: self.bits & mask.bits,
            len: self.len,
        }
    }
}

/// Coverage masks for every beam of a layout, restricted to the road.
///
/// Beams `i` and `k` are neighbours when some point of a
/// [`MASK_PITCH`]-spaced grid over the road strip lies in both sectors.
pub fn derive_masks(layout: &Layout, highway: &HighwayGeometry) -> Result<Vec<Mask>, AgentError> {
    let n = layout.len();
    check_len(n)?;
    let nx = (highway.length / MASK_PITCH).round() as usize;
    let ny = (highway.width / MASK_PITCH).round() as usize;
    let mut overlap = vec![0u64; n];
    for ix in 0..=nx {
        let x = highway.length * ix as f64 / nx.max(1) as f64;
        for iy in 0..=ny {
            let y = highway.width * iy as f64 / ny.max(1) as f64;
            let mut cover = 0u64;
            for (k, b) in layout.beams().iter().enumerate() {
                if b.contains_xy(x, y) {
                    cover |= 1 << k;
                }
            }
            if cover.count_ones() > 1 {
                for (k, o) in overlap.iter_mut().enumerate() {
                    if cover >> k & 1 == 1 {
                        *o |= cover;
                    }
                }
            }
        }
    }
    overlap
        .into_iter()
        .enumerate()
        .map(|(k, bits)| Mask::from_bits(bits & !(1u64 << k), n))
        .collect()
}

pub fn derive_mask(layout: &Layout, i: usize, highway: &HighwayGeometry) -> Result<Mask, AgentError> {
    if i >= layout.len() {
        return Err(AgentError::BeamIndex {
            index: i,
            len: layout.len(),
        });
    }
    Ok(derive_masks(layout, highway)?[i])
}

/// Running statistics of one context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContextStats {
    pub mean_reward: f64,
    pub trials: u64,
    pub mean_duration: f64,
}

impl ContextStats {
    pub fn record(&mut self, reward: f64, duration: f64) {
        self.trials += 1;
        let k = self.trials as f64;
        self.mean_reward += (reward - self.mean_reward) / k;
        self.mean_duration += (duration - self.mean_duration) / k;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Exploration,
    Exploitation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Serve,
    /// Stay idle for this many seconds.
    Backoff(f64),
    /// Serve, chosen by the epsilon branch of exploitation.
    Explore,
}

impl Decision {
    pub fn serves(&self) -> bool {
        !matches!(self, Decision::Backoff(_))
    }
}

/// The bandit agent attached to one beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacolAgent {
    pub beam_id: usize,
    pub mask: Mask,
    pub contexts: BTreeMap<ContextVector, ContextStats>,
    pub epsilon: f64,
    pub exploration_end: f64,
    pub backoff_until: Option<f64>,
    overall: ContextStats,
}

impl MacolAgent {
    pub fn new(beam_id: usize, mask: Mask, epsilon: f64, exploration_end: f64) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(AgentError::InvalidEpsilon(epsilon));
        }
        Ok(Self {
            beam_id,
            mask,
            contexts: BTreeMap::new(),
            epsilon,
            exploration_end,
            backoff_until: None,
            overall: ContextStats::default(),
        })
    }

    pub fn phase(&self, now: f64) -> Phase {
        if now < self.exploration_end {
            Phase::Exploration
        } else {
            Phase::Exploitation
        }
    }

    pub fn in_backoff(&self, now: f64) -> bool {
        self.backoff_until.is_some_and(|t| now < t)
    }

    pub fn stats(&self, context: &ContextVector) -> ContextStats {
        self.contexts.get(context).copied().unwrap_or_default()
    }

    /// Folds one finished connection into the statistics of `context`.
    pub fn update_reward(&mut self, context: ContextVector, reward: f64, duration: f64) -> Result<(), AgentError> {
        if !reward.is_finite() {
            return Err(AgentError::NonFiniteReward(reward));
        }
        if !(duration > 0.0) {
            return Err(AgentError::NonPositiveDuration(duration));
        }
        self.contexts.entry(context).or_default().record(reward, duration);
        self.overall.record(reward, duration);
        Ok(())
    }

    /// Unweighted mean of the per-context mean rewards.
    pub fn classification_threshold(&self) -> Result<f64, AgentError> {
        if self.contexts.is_empty() {
            return Err(AgentError::NoContexts);
        }
        let sum: f64 = self.contexts.values().map(|s| s.mean_reward).sum();
        Ok(sum / self.contexts.len() as f64)
    }

    fn backoff_duration(&self, context: &ContextVector) -> f64 {
        match self.contexts.get(context) {
            Some(s) if s.mean_duration > 0.0 => s.mean_duration,
            _ if self.overall.trials > 0 => self.overall.mean_duration,
            _ => DEFAULT_BACKOFF_S,
        }
    }

    /// Chooses what to do for `context` at time `now`. A backoff decision
    /// also arms [`MacolAgent::in_backoff`] until it expires.
    ///
    /// An agent that reaches exploitation without a single observation
    /// keeps exploring, since it has no threshold to classify against.
    pub fn decide(&mut self, context: &ContextVector, now: f64, rng: &mut impl Rng) -> Decision {
        if self.phase(now) == Phase::Exploration {
            return Decision::Serve;
        }
        if rng.gen::<f64>() < self.epsilon {
            return Decision::Explore;
        }
        let Ok(threshold) = self.classification_threshold() else {
            return Decision::Explore;
        };
        if self.stats(context).mean_reward > threshold {
            Decision::Serve
        } else {
            let d = self.backoff_duration(context);
            self.backoff_until = Some(now + d);
            Decision::Backoff(d)
        }
    }
}

/// Goodput of a finished connection.
pub fn compute_reward(bits: f64, duration: f64) -> Result<f64, AgentError> {
    if !(duration > 0.0) {
        return Err(AgentError::NonPositiveDuration(duration));
    }
    Ok(bits / duration)
}

/// Passive registry of beam activity. Counts the messages exchanged with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralNode {
    pub status: ContextVector,
    pub pushes: u64,
    pub pulls: u64,
}

impl CentralNode {
    pub fn new(beams: usize) -> Result<Self, AgentError> {
        Ok(Self {
            status: ContextVector::zeros(beams)?,
            pushes: 0,
            pulls: 0,
        })
    }

    /// Records a status change of beam `i`; repeating the current status is
    /// not a message.
    pub fn push_status(&mut self, i: usize, active: bool) {
        if self.status.get(i) != active {
            self.status.set(i, active);
            self.pushes += 1;
        }
    }

    /// The live status as seen through `mask`.
    pub fn observe_context(&mut self, mask: &Mask) -> ContextVector {
        self.pulls += 1;
        self.status.masked(mask)
    }
}

/// A vehicle a beam could serve, with its distance to the beam origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub vehicle_id: u64,
    pub distance: f64,
}

pub fn select_random(candidates: &[Candidate], rng: &mut impl Rng) -> Result<u64, AgentError> {
    if candidates.is_empty() {
        return Err(AgentError::NoCandidates);
    }
    Ok(candidates[rng.gen_range(0..candidates.len())].vehicle_id)
}

/// Strongest uplink. Pathloss is monotone in distance, so this is the
/// nearest vehicle; ties go to the lowest id.
pub fn select_best_snr(candidates: &[Candidate]) -> Result<u64, AgentError> {
    candidates
        .iter()
        .min_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.vehicle_id.cmp(&b.vehicle_id))
        })
        .map(|c| c.vehicle_id)
        .ok_or(AgentError::NoCandidates)
}
