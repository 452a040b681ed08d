//! Dwell-time activation with a Schmitt trigger.
//!
//! Every button carries an activation `a ∈ [0, 1]`. Each frame it rises by
//! `Δt / T` while the gaze is inside the button's zone and falls by the same
//! amount otherwise, saturating at both ends. The status flips to active when
//! `a > a_on` and back to inactive when `a < a_off`; between the two
//! thresholds it holds.
//!
//! Activation is tracked as integer milliseconds of charge in `[0, T]`, so
//! `a = charge / T` is always the correctly rounded ratio and threshold
//! crossings land on the same frame as exact arithmetic would give. With
//! `T = 1000 ms`, `a_on = 0.8` and 20 ms frames the trigger fires on frame 41
//! (`a = 0.82`), not on frame 40.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::registry::{ButtonKind, Registry};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InputError {
    #[error("clock went backwards: frame at {t_now} ms after {last_t} ms")]
    NonMonotonic { t_now: u64, last_t: u64 },
    #[error("invalid activation profile: {0}")]
    InvalidProfile(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    /// Accumulation period `T` in milliseconds.
    pub period_ms: u64,
    pub a_on: f64,
    pub a_off: f64,
}

impl ActivationProfile {
    /// Discrete actions (gripper): 1000 ms window, `a_on = a_off = 0.8`.
    pub const DISCRETE: ActivationProfile = ActivationProfile {
        period_ms: 1000,
        a_on: 0.8,
        a_off: 0.8,
    };

    /// Continuous actions (movement): 300 ms ramp, `a_on = 0.4`, `a_off = 0.2`.
    pub const CONTINUOUS: ActivationProfile = ActivationProfile {
        period_ms: 300,
        a_on: 0.4,
        a_off: 0.2,
    };

    pub fn new(period_ms: u64, a_on: f64, a_off: f64) -> Result<Self, InputError> {
        let p = Self {
            period_ms,
            a_on,
            a_off,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), InputError> {
        if self.period_ms == 0 {
            return Err(InputError::InvalidProfile("period must be positive"));
        }
        if !(self.a_on > 0.0 && self.a_on <= 1.0) {
            return Err(InputError::InvalidProfile("a_on must be in (0, 1]"));
        }
        if !(self.a_off >= 0.0 && self.a_off <= self.a_on) {
            return Err(InputError::InvalidProfile("a_off must be in [0, a_on]"));
        }
        Ok(())
    }
}

/// Profiles assigned by button kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub discrete: ActivationProfile,
    pub continuous: ActivationProfile,
}

impl Default for ProfileSet {
    fn default() -> Self {
        Self {
            discrete: ActivationProfile::DISCRETE,
            continuous: ActivationProfile::CONTINUOUS,
        }
    }
}

impl ProfileSet {
    pub fn for_kind(&self, kind: ButtonKind) -> ActivationProfile {
        match kind {
            ButtonKind::Discrete => self.discrete,
            ButtonKind::Continuous => self.continuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Inactive,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Activated,
    Deactivated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEvent {
    pub button_id: String,
    pub edge: Edge,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButtonState {
    pub button_id: String,
    pub profile: ActivationProfile,
    charge_ms: u64,
    pub status: Status,
    pub last_t: u64,
}

impl ButtonState {
    pub fn new(button_id: impl Into<String>, profile: ActivationProfile, t0: u64) -> Self {
        Self {
            button_id: button_id.into(),
            profile,
            charge_ms: 0,
            status: Status::Inactive,
            last_t: t0,
        }
    }

    pub fn activation(&self) -> f64 {
        self.charge_ms as f64 / self.profile.period_ms as f64
    }

    /// Accumulated fixation time, `a · T`.
    pub fn charge_ms(&self) -> u64 {
        self.charge_ms
    }

    /// Advances to `t_now`; returns the edge if the status changed. A time
    /// earlier than the last one is treated as no elapsed time.
    pub fn advance(&mut self, hit: bool, t_now: u64) -> Option<Edge> {
        let dt = t_now.saturating_sub(self.last_t);
        self.last_t = t_now;
        self.charge_ms = if hit {
            (self.charge_ms + dt).min(self.profile.period_ms)
        } else {
            self.charge_ms.saturating_sub(dt)
        };
        let a = self.activation();
        match self.status {
            Status::Inactive if a > self.profile.a_on => {
                self.status = Status::Active;
                Some(Edge::Activated)
            }
            Status::Active if a < self.profile.a_off => {
                self.status = Status::Inactive;
                Some(Edge::Deactivated)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub button_id: String,
    pub a: f64,
    pub status: Status,
}

/// Owns the per-button accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPipeline {
    states: BTreeMap<String, ButtonState>,
    last_t: u64,
}

impl InputPipeline {
    pub fn new(states: impl IntoIterator<Item = ButtonState>, t0: u64) -> Self {
        Self {
            states: states.into_iter().map(|s| (s.button_id.clone(), s)).collect(),
            last_t: t0,
        }
    }

    pub fn from_registry(registry: &Registry, profiles: &ProfileSet, t0: u64) -> Self {
        Self::new(
            registry
                .buttons()
                .map(|b| ButtonState::new(b.button_id.clone(), profiles.for_kind(b.kind), t0)),
            t0,
        )
    }

    pub fn last_t(&self) -> u64 {
        self.last_t
    }

    pub fn state(&self, button_id: &str) -> Option<&ButtonState> {
        self.states.get(button_id)
    }

    /// One frame of accumulation. Buttons absent from `hits` (including
    /// those whose zone is not visible) count as missed. Events come out in
    /// `button_id` order.
    pub fn step(&mut self, hits: &BTreeSet<String>, t_now: u64) -> Result<Vec<InputEvent>, InputError> {
        if t_now < self.last_t {
            return Err(InputError::NonMonotonic {
                t_now,
                last_t: self.last_t,
            });
        }
        self.last_t = t_now;
        let mut events = Vec::new();
        for (id, state) in self.states.iter_mut() {
            if let Some(edge) = state.advance(hits.contains(id), t_now) {
                events.push(InputEvent {
                    button_id: id.clone(),
                    edge,
                    t: t_now,
                });
            }
        }
        Ok(events)
    }

    /// Sorted by `button_id`.
    pub fn snapshot(&self) -> Vec<Activation> {
        self.states
            .values()
            .map(|s| Activation {
                button_id: s.button_id.clone(),
                a: s.activation(),
                status: s.status,
            })
            .collect()
    }

    /// Drops all activations to zero without emitting events.
    pub fn reset(&mut self, t: u64) {
        self.last_t = t;
        for s in self.states.values_mut() {
            s.charge_ms = 0;
            s.status = Status::Inactive;
            s.last_t = t;
        }
    }
}

pub fn activation_snapshot(pipeline: &InputPipeline) -> Vec<Activation> {
    pipeline.snapshot()
}
