//! Pulse waveforms, PRI/CPI timing and the three-case segmentation of a PRI.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One radar's pulse within a PRI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Transmit power in watts.
    pub power: f64,
    /// Pulse duration in seconds.
    pub duration: f64,
    /// Chirp bandwidth in hertz.
    pub bandwidth: f64,
    /// Pulse start within the PRI, in seconds.
    pub start_offset: f64,
}

impl PulseSpec {
    pub fn end(&self) -> f64 {
        self.start_offset + self.duration
    }

    fn validate(&self, who: &'static str, pri: f64) -> Result<()> {
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(invalid(who, format!("power must be positive, got {}", self.power)));
        }
        if !(self.duration > 0.0) {
            return Err(invalid(who, format!("duration must be positive, got {}", self.duration)));
        }
        if self.duration >= pri {
            return Err(invalid(
                who,
                format!("duration {} must be shorter than the PRI {}", self.duration, pri),
            ));
        }
        if !(self.bandwidth >= 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid(who, "bandwidth must be nonnegative"));
        }
        if !(0.0..pri).contains(&self.start_offset) {
            return Err(invalid(
                who,
                format!("start offset {} must lie in [0, PRI)", self.start_offset),
            ));
        }
        if self.end() > pri * (1.0 + 1e-12) {
            return Err(invalid(
                who,
                format!("pulse ends at {} which is past the PRI {}", self.end(), pri),
            ));
        }
        Ok(())
    }
}

/// Linear-FM pulse `√P · exp(jπ B t² / duration)` on `[start, start + duration)`.
///
/// `t` is measured from the PRI start; the chirp phase is referenced to the
/// pulse onset.
pub fn pulse_sample(spec: &PulseSpec, t: f64) -> Complex64 {
    if t < spec.start_offset || t >= spec.end() {
        return Complex64::new(0.0, 0.0);
    }
    let tau = t - spec.start_offset;
    let phase = std::f64::consts::PI * spec.bandwidth * tau * tau / spec.duration;
    Complex64::from_polar(spec.power.sqrt(), phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingPlan {
    /// Common PRI `T` in seconds.
    pub pri: f64,
    /// Pulses per CPI (`K_L`).
    pub pulses_per_cpi: usize,
    pub lrs: PulseSpec,
    pub urs: PulseSpec,
}

impl TimingPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.pri > 0.0 && self.pri.is_finite()) {
            return Err(invalid("pri", format!("must be positive, got {}", self.pri)));
        }
        if self.pulses_per_cpi == 0 {
            return Err(invalid("pulses_per_cpi", "must be at least 1"));
        }
        self.lrs.validate("lrs pulse", self.pri)?;
        self.urs.validate("urs pulse", self.pri)?;
        Ok(())
    }

    /// CPI length `K_L · T`.
    pub fn cpi(&self) -> f64 {
        self.pulses_per_cpi as f64 * self.pri
    }
}

/// Half-open interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (end > start).then_some(Interval { start, end })
    }

    fn minus(&self, other: &Interval) -> Vec<Interval> {
        let Some(cut) = self.intersect(other) else {
            return vec![*self];
        };
        [
            Interval::new(self.start, cut.start),
            Interval::new(cut.end, self.end),
        ]
        .into_iter()
        .filter(|iv| iv.end > iv.start)
        .collect()
    }
}

/// Partition of one PRI's active time into LRS-only, URS-only and overlapped parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSegments {
    pub case1: Vec<Interval>,
    pub case2: Vec<Interval>,
    pub case3: Vec<Interval>,
    /// Overlap duration `t_o`.
    pub t_overlap: f64,
}

impl CaseSegments {
    pub fn case1_time(&self) -> f64 {
        self.case1.iter().map(Interval::length).sum()
    }

    pub fn case2_time(&self) -> f64 {
        self.case2.iter().map(Interval::length).sum()
    }
}

pub fn segment_pri(plan: &TimingPlan) -> Result<CaseSegments> {
    plan.validate()?;
    let l = Interval::new(plan.lrs.start_offset, plan.lrs.end());
    let u = Interval::new(plan.urs.start_offset, plan.urs.end());
    let case3: Vec<Interval> = l.intersect(&u).into_iter().collect();
    let t_overlap = case3.iter().map(Interval::length).sum();
    Ok(CaseSegments {
        case1: l.minus(&u),
        case2: u.minus(&l),
        case3,
        t_overlap,
    })
}
