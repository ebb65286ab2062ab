//! Per-node Rabi-frequency schedules built from tanh ramps.
//!
//! A [`Schedule`] is an ordered list of [`RampSegment`]s. Segment `k` owns
//! the window between the midpoints of its neighbours' centers, the first
//! segment extends back to `t = 0` and the last one forward to the end of
//! the protocol. A turn-on followed by a turn-off of equal amplitude and
//! rate therefore joins exactly at the midpoint.

mod optimize;
mod plan;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingSnapshot, SystemParams};
use crate::target::StateSpec;

pub use optimize::{
    optimize, FreeField, FreeParam, Minimum, NelderMead, Objective, OptimizeOptions, OptimizeResult,
};
pub use plan::{
    fourier_protocol, split_protocol, transfer_protocol, Move, MovePlan, Planned, RampOptions,
};

/// Join tolerance relative to the schedule's peak amplitude.
pub const JOIN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampKind {
    TurnOn,
    TurnOff,
    Hold,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSegment {
    pub kind: RampKind,
    /// Ramp rate r in units of g.
    pub rate: f64,
    /// Ramp center t0 in units of 1/g.
    pub center: f64,
    /// Peak magnitude in units of g.
    pub amplitude: f64,
    /// Drive phase in radians, added to the schedule phase.
    #[serde(default)]
    pub phase: f64,
}

impl RampSegment {
    pub fn turn_on(rate: f64, center: f64, amplitude: f64) -> Self {
        Self { kind: RampKind::TurnOn, rate, center, amplitude, phase: 0.0 }
    }

    pub fn turn_off(rate: f64, center: f64, amplitude: f64) -> Self {
        Self { kind: RampKind::TurnOff, rate, center, amplitude, phase: 0.0 }
    }

    pub fn hold(center: f64, amplitude: f64) -> Self {
        Self { kind: RampKind::Hold, rate: 0.0, center, amplitude, phase: 0.0 }
    }

    pub fn off(center: f64) -> Self {
        Self { kind: RampKind::Off, rate: 0.0, center, amplitude: 0.0, phase: 0.0 }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// |Omega| of this segment at time `t`.
    pub fn magnitude(&self, t: f64) -> f64 {
        match self.kind {
            RampKind::TurnOn => self.amplitude * 0.5 * (1.0 + (self.rate * (t - self.center)).tanh()),
            RampKind::TurnOff => self.amplitude * 0.5 * (1.0 - (self.rate * (t - self.center)).tanh()),
            RampKind::Hold => self.amplitude,
            RampKind::Off => 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = self.center.is_finite()
            && self.phase.is_finite()
            && self.amplitude.is_finite()
            && self.amplitude >= 0.0
            && match self.kind {
                RampKind::TurnOn | RampKind::TurnOff => self.rate.is_finite() && self.rate > 0.0,
                RampKind::Hold | RampKind::Off => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProtocol(format!("malformed segment {self:?}")))
        }
    }
}

/// Drive of one node.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    #[serde(default)]
    pub segments: Vec<RampSegment>,
    /// Node phase in radians, common to all segments.
    #[serde(default)]
    pub phase: f64,
}

impl Schedule {
    pub fn new(segments: Vec<RampSegment>) -> Self {
        Self { segments, phase: 0.0 }
    }

    /// Index of the segment owning time `t`.
    fn owner(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let k = self
            .segments
            .windows(2)
            .position(|pair| t < 0.5 * (pair[0].center + pair[1].center))
            .unwrap_or(self.segments.len() - 1);
        Some(k)
    }

    /// Complex Rabi frequency at `t`, without range checks.
    pub fn value(&self, t: f64) -> Complex64 {
        match self.owner(t) {
            None => Complex64::new(0.0, 0.0),
            Some(k) => {
                let seg = &self.segments[k];
                Complex64::from_polar(seg.magnitude(t), self.phase + seg.phase)
            }
        }
    }

    pub fn peak(&self) -> f64 {
        self.segments.iter().map(|s| s.amplitude).fold(0.0, f64::max)
    }

    /// Jump `|Omega(t+) - Omega(t-)|` at each window boundary.
    pub fn join_defects(&self) -> Vec<(f64, f64)> {
        self.segments
            .windows(2)
            .map(|pair| {
                let t = 0.5 * (pair[0].center + pair[1].center);
                let left = Complex64::from_polar(pair[0].magnitude(t), pair[0].phase);
                let right = Complex64::from_polar(pair[1].magnitude(t), pair[1].phase);
                (t, (left - right).norm())
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for seg in &self.segments {
            seg.check()?;
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidProtocol("non-finite schedule phase".into()));
        }
        if self.segments.windows(2).any(|p| p[1].center < p[0].center) {
            return Err(Error::InvalidProtocol("segment centers out of order".into()));
        }
        let tol = JOIN_TOL * self.peak();
        if let Some((t, d)) = self.join_defects().into_iter().find(|&(_, d)| d > tol) {
            return Err(Error::InvalidProtocol(format!(
                "discontinuity {d:.3e} at t = {t:.3} exceeds {tol:.3e}"
            )));
        }
        Ok(())
    }
}

/// A full control protocol: one schedule per node over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    pub schedules: Vec<Schedule>,
    pub duration: f64,
    pub initial: StateSpec,
    pub target: StateSpec,
}

impl Protocol {
    /// All lasers off for `duration`.
    pub fn idle(n_nodes: usize, duration: f64, initial: StateSpec, target: StateSpec) -> Self {
        Self { schedules: vec![Schedule::default(); n_nodes], duration, initial, target }
    }

    pub fn n_nodes(&self) -> usize {
        self.schedules.len()
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        if self.schedules.len() != n_nodes {
            return Err(Error::InvalidProtocol(format!(
                "{} schedules for {n_nodes} nodes",
                self.schedules.len()
            )));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidProtocol(format!("bad duration {}", self.duration)));
        }
        for (node, s) in self.schedules.iter().enumerate() {
            s.validate().map_err(|e| Error::InvalidProtocol(format!("node {node}: {e}")))?;
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-9 * self.duration.max(1.0);
        if t < -slack || t > self.duration + slack || t.is_nan() {
            Err(Error::TimeOutOfRange { t, duration: self.duration })
        } else {
            Ok(())
        }
    }

    /// Rabi frequency of `node` at `t`.
    pub fn evaluate(&self, node: usize, t: f64) -> Result<Complex64> {
        self.check_time(t)?;
        let s = self.schedules.get(node).ok_or_else(|| Error::LabelOutOfRange {
            label: format!("node {node}"),
            size: self.schedules.len(),
        })?;
        Ok(s.value(t))
    }

    pub fn rabi_at(&self, t: f64) -> Result<Vec<Complex64>> {
        self.check_time(t)?;
        Ok(self.schedules.iter().map(|s| s.value(t)).collect())
    }

    pub fn rabi_into(&self, t: f64, out: &mut [Complex64]) {
        for (o, s) in out.iter_mut().zip(&self.schedules) {
            *o = s.value(t);
        }
    }

    pub fn snapshot(&self, params: &SystemParams, t: f64) -> Result<CouplingSnapshot> {
        Ok(CouplingSnapshot::from_rabi(&self.rabi_at(t)?, params))
    }

    /// Largest drive magnitude in any schedule.
    pub fn peak(&self) -> f64 {
        self.schedules.iter().map(Schedule::peak).fold(0.0, f64::max)
    }

    /// Stretch time by `factor`: centers and duration scale up, rates down.
    pub fn time_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.duration *= factor;
        for seg in out.schedules.iter_mut().flat_map(|s| s.segments.iter_mut()) {
            seg.center *= factor;
            seg.rate /= factor;
        }
        out
    }

    /// Add `phase` to every node.
    pub fn phase_shifted(&self, phase: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.schedules {
            s.phase = (s.phase + phase).rem_euclid(2.0 * PI);
        }
        out
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("protocol serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Convenience: [`Protocol::evaluate`] on a bare schedule with range check.
pub fn evaluate(schedule: &Schedule, duration: f64, t: f64) -> Result<Complex64> {
    if t < 0.0 || t > duration || t.is_nan() {
        return Err(Error::TimeOutOfRange { t, duration });
    }
    Ok(schedule.value(t))
}
