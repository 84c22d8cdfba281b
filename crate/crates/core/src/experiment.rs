//! Scenario configuration, parameter sweeps and tabular output.
//!
//! A configuration is a TOML file with the sections `[lrs]`, `[urs]`,
//! `[irs]`, `[waveform]`, `[security]`, `[solver]` and `[error]`. Every key
//! is optional; missing keys keep their defaults. Angles are in degrees,
//! times in microseconds, everything else in SI units.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioGeometry;
use crate::error::{Error, Result};
use crate::geometry::{AnglePair, ArraySpec, CVector};
use crate::optimizer::{closed_form_lrs_only, closed_form_urs_null, closed_form_urs_null_single_axis, Axis, PddParams};
use crate::power::{Beamformers, LinkModel, PowerReport, Scenario};
use crate::protocol::{
    no_irs_baseline_power, random_phase_baseline, run_cpi_with_beams, surface_rcs, CpiResult, EstimationError,
    ModeKind, ProtocolMode, ProtocolSettings,
};
use crate::waveform::{PulseSpec, TimingPlan};

const US: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    /// Radar-to-target distance in meters.
    pub distance: f64,
    pub count_y: usize,
    pub count_z: usize,
    pub spacing: f64,
    /// Transmit power in watts.
    pub power: f64,
    pub pulse_duration_us: f64,
    pub pulse_offset_us: f64,
    pub bandwidth: f64,
    /// Receiver noise power in watts, used for SNR reporting only.
    pub noise_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsConfig {
    pub count_x: usize,
    pub count_y: usize,
    pub spacing: f64,
    pub sensors_x: usize,
    pub sensors_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub wavelength: f64,
    pub pri_us: f64,
    pub pulses_per_cpi: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    /// URS power cap in watts.
    pub gamma: f64,
    /// Smallest URS transmit power the surface designs against.
    pub p_u_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub rho0: f64,
    pub c: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub max_sca: usize,
    /// Cold starts per PDD solve. One by default: every protocol solve
    /// already compares cold, warm and cross-case candidates.
    pub starts: usize,
    pub estimation_pris: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorConfig {
    pub angle_offset_deg: f64,
    pub angle_sigma_deg: f64,
    pub power_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mode: ModeKind,
    /// Record wall time per row; off by default so output is reproducible.
    pub timing: bool,
    /// Draws averaged by the random-phase baseline.
    pub random_draws: usize,
    pub lrs: RadarConfig,
    pub urs: RadarConfig,
    pub irs: IrsConfig,
    pub waveform: WaveformConfig,
    pub security: SecurityConfig,
    pub solver: SolverConfig,
    pub error: ErrorConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let radar = |elevation_deg: f64, distance: f64, duration: f64, offset: f64| RadarConfig {
            elevation_deg,
            azimuth_deg: 0.0,
            distance,
            count_y: 1,
            count_z: 64,
            spacing: 0.1,
            power: 0.03,
            pulse_duration_us: duration,
            pulse_offset_us: offset,
            bandwidth: 100e6,
            noise_power: 1e-14,
        };
        let pdd = PddParams::default();
        Self {
            seed: 1,
            mode: ModeKind::ShortTerm,
            timing: false,
            random_draws: 1000,
            lrs: radar(60.0, 30.0, 25.0, 0.0),
            urs: radar(152.0, 20.0, 30.0, 15.0),
            irs: IrsConfig {
                count_x: 64,
                count_y: 1,
                spacing: 0.02,
                sensors_x: 8,
                sensors_y: 8,
            },
            waveform: WaveformConfig {
                wavelength: 0.2,
                pri_us: 100.0,
                pulses_per_cpi: 16,
            },
            security: SecurityConfig {
                gamma: 1e-8,
                p_u_min: 0.03,
            },
            solver: SolverConfig {
                rho0: pdd.rho0,
                c: pdd.c,
                inner_tol: pdd.inner_tol,
                outer_tol: pdd.outer_tol,
                max_outer: pdd.max_outer,
                max_inner: pdd.max_inner,
                max_sca: pdd.max_sca,
                starts: 1,
                estimation_pris: 1,
            },
            error: ErrorConfig {
                angle_offset_deg: 0.0,
                angle_sigma_deg: 0.0,
                power_rel_error: 0.0,
            },
        }
    }
}

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Re-labels a library error as belonging to a config section.
fn at(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter { name, reason } => config_error(format!("{section}.{name}"), reason),
        Error::Config { .. } => e,
        other => config_error(section, other.to_string()),
    }
}

/// Overlays `user` onto `base`, table by table, reporting keys `base` lacks.
fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str) -> Result<()> {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (None, _) => return Err(config_error(path, "unknown field")),
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path)?,
            (Some(toml::Value::Table(_)), _) => return Err(config_error(path, "expected a section")),
            (Some(slot), v) => {
                if let toml::Value::Integer(i) = v {
                    if slot.is_float() {
                        *slot = toml::Value::Float(i as f64);
                        continue;
                    }
                }
                if std::mem::discriminant(slot) != std::mem::discriminant(&v) {
                    return Err(config_error(
                        path,
                        format!("expected {}, got {}", slot.type_str(), v.type_str()),
                    ));
                }
                *slot = v;
            }
        }
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be positive, got {v}")))
    }
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be nonnegative, got {v}")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(config_error(field, "must be at least 1"))
    }
}

impl RadarConfig {
    fn check(&self, section: &str) -> Result<()> {
        let f = |k: &str| format!("{section}.{k}");
        if !(0.0..=180.0).contains(&self.elevation_deg) {
            return Err(config_error(
                f("elevation_deg"),
                format!("must lie in [0, 180], got {}", self.elevation_deg),
            ));
        }
        if !self.azimuth_deg.is_finite() {
            return Err(config_error(f("azimuth_deg"), "must be finite"));
        }
        positive(&f("distance"), self.distance)?;
        at_least_one(&f("count_y"), self.count_y)?;
        at_least_one(&f("count_z"), self.count_z)?;
        positive(&f("spacing"), self.spacing)?;
        positive(&f("power"), self.power)?;
        positive(&f("pulse_duration_us"), self.pulse_duration_us)?;
        nonnegative(&f("pulse_offset_us"), self.pulse_offset_us)?;
        nonnegative(&f("bandwidth"), self.bandwidth)?;
        nonnegative(&f("noise_power"), self.noise_power)
    }

    fn angles(&self) -> Result<AnglePair> {
        AnglePair::new(self.elevation_deg.to_radians(), self.azimuth_deg.to_radians())
    }

    fn pulse(&self) -> PulseSpec {
        PulseSpec {
            power: self.power,
            duration: self.pulse_duration_us * US,
            bandwidth: self.bandwidth,
            start_offset: self.pulse_offset_us * US,
        }
    }
}

impl ScenarioConfig {
    /// Parses a TOML document over the defaults and validates the result.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| config_error("<document>", e.message()))?;
        let mut base = toml::Table::try_from(ScenarioConfig::default())
            .map_err(|e| config_error("<defaults>", e.to_string()))?;
        merge(&mut base, user, "")?;
        let config: ScenarioConfig = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| config_error("<document>", e.message()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.lrs.check("lrs")?;
        self.urs.check("urs")?;
        at_least_one("irs.count_x", self.irs.count_x)?;
        at_least_one("irs.count_y", self.irs.count_y)?;
        positive("irs.spacing", self.irs.spacing)?;
        at_least_one("irs.sensors_x", self.irs.sensors_x)?;
        at_least_one("irs.sensors_y", self.irs.sensors_y)?;
        positive("waveform.wavelength", self.waveform.wavelength)?;
        positive("waveform.pri_us", self.waveform.pri_us)?;
        if self.waveform.pulses_per_cpi < 2 {
            return Err(config_error("waveform.pulses_per_cpi", "must be at least 2"));
        }
        positive("security.gamma", self.security.gamma)?;
        positive("security.p_u_min", self.security.p_u_min)?;
        if self.security.p_u_min > self.urs.power {
            return Err(config_error(
                "security.p_u_min",
                format!(
                    "must not exceed the URS power {} so the cap holds for the true URS",
                    self.urs.power
                ),
            ));
        }
        at_least_one("random_draws", self.random_draws)?;
        if self.solver.estimation_pris >= self.waveform.pulses_per_cpi {
            return Err(config_error(
                "solver.estimation_pris",
                "must be smaller than waveform.pulses_per_cpi",
            ));
        }
        self.pdd().validate().map_err(at("solver"))?;
        self.estimation_error().validate().map_err(at("error"))?;
        self.plan()?.validate().map_err(at("waveform"))?;
        self.scenario()?.validate().map_err(at("scenario"))?;
        Ok(())
    }

    pub fn pdd(&self) -> PddParams {
        let s = &self.solver;
        PddParams {
            rho0: s.rho0,
            c: s.c,
            inner_tol: s.inner_tol,
            outer_tol: s.outer_tol,
            max_outer: s.max_outer,
            max_inner: s.max_inner,
            max_sca: s.max_sca,
            starts: s.starts,
        }
    }

    pub fn geometry(&self) -> Result<ScenarioGeometry> {
        let wl = self.waveform.wavelength;
        Ok(ScenarioGeometry {
            angles_l: self.lrs.angles().map_err(at("lrs"))?,
            angles_u: self.urs.angles().map_err(at("urs"))?,
            dist_li: self.lrs.distance,
            dist_ui: self.urs.distance,
            lrs_spec: ArraySpec::new(self.lrs.count_y, self.lrs.count_z, self.lrs.spacing, wl).map_err(at("lrs"))?,
            urs_spec: ArraySpec::new(self.urs.count_y, self.urs.count_z, self.urs.spacing, wl).map_err(at("urs"))?,
            irs_spec: ArraySpec::new(self.irs.count_x, self.irs.count_y, self.irs.spacing, wl).map_err(at("irs"))?,
            sensor_count: self.irs.sensors_x + self.irs.sensors_y - 1,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            geometry: self.geometry()?,
            p_l: self.lrs.power,
            p_u: self.urs.power,
        })
    }

    pub fn plan(&self) -> Result<TimingPlan> {
        Ok(TimingPlan {
            pri: self.waveform.pri_us * US,
            pulses_per_cpi: self.waveform.pulses_per_cpi,
            lrs: self.lrs.pulse(),
            urs: self.urs.pulse(),
        })
    }

    pub fn settings(&self) -> ProtocolSettings {
        ProtocolSettings {
            gamma: self.security.gamma,
            p_u_min: self.security.p_u_min,
            pdd: self.pdd(),
            estimation_pris: self.solver.estimation_pris,
        }
    }

    pub fn estimation_error(&self) -> EstimationError {
        EstimationError {
            angle_offset: self.error.angle_offset_deg.to_radians(),
            angle_sigma: self.error.angle_sigma_deg.to_radians(),
            power_rel_error: self.error.power_rel_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    BeamScanLrs,
    BeamScanUrs,
    GammaSweep,
    LrsDistance,
    UrsDistance,
    AoaDifference,
    OverlapRatio,
    AngleError,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::BeamScanLrs,
        ExperimentId::BeamScanUrs,
        ExperimentId::GammaSweep,
        ExperimentId::LrsDistance,
        ExperimentId::UrsDistance,
        ExperimentId::AoaDifference,
        ExperimentId::OverlapRatio,
        ExperimentId::AngleError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::BeamScanLrs => "beam_scan_lrs",
            ExperimentId::BeamScanUrs => "beam_scan_urs",
            ExperimentId::GammaSweep => "gamma_sweep",
            ExperimentId::LrsDistance => "lrs_distance",
            ExperimentId::UrsDistance => "urs_distance",
            ExperimentId::AoaDifference => "aoa_difference",
            ExperimentId::OverlapRatio => "overlap_ratio",
            ExperimentId::AngleError => "angle_error",
        }
    }

    /// Name of the swept quantity and its unit.
    pub fn parameter(self) -> &'static str {
        match self {
            ExperimentId::BeamScanLrs | ExperimentId::BeamScanUrs => "beam_index",
            ExperimentId::GammaSweep => "gamma_w",
            ExperimentId::LrsDistance => "lrs_distance_m",
            ExperimentId::UrsDistance => "urs_distance_m",
            ExperimentId::AoaDifference => "aoa_difference_rad",
            ExperimentId::OverlapRatio => "overlap_ratio",
            ExperimentId::AngleError => "angle_offset_deg",
        }
    }

    /// Grid used when none is given.
    pub fn default_grid(self, config: &ScenarioConfig) -> Vec<f64> {
        let lin = |start: f64, step: f64, count: usize| (0..count).map(|k| start + step * k as f64).collect();
        match self {
            ExperimentId::BeamScanLrs => (0..config.lrs.count_y * config.lrs.count_z).map(|m| m as f64).collect(),
            ExperimentId::BeamScanUrs => (0..config.urs.count_y * config.urs.count_z).map(|m| m as f64).collect(),
            ExperimentId::GammaSweep => (0..9).map(|k| 1e-10 * 10f64.powf(k as f64 / 2.0)).collect(),
            ExperimentId::LrsDistance => lin(10.0, 10.0, 10),
            ExperimentId::UrsDistance => lin(5.0, 5.0, 10),
            ExperimentId::AoaDifference => lin(0.0, 0.05, 21),
            ExperimentId::OverlapRatio => lin(0.0, 0.1, 11),
            ExperimentId::AngleError => lin(0.0, 0.25, 9),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| config_error("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: ExperimentId,
    pub parameter: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(experiment: ExperimentId, values: Vec<f64>) -> Self {
        Self {
            experiment,
            parameter: experiment.parameter().to_string(),
            values,
        }
    }

    pub fn preset(experiment: ExperimentId, config: &ScenarioConfig) -> Self {
        Self::new(experiment, experiment.default_grid(config))
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameter != self.experiment.parameter() {
            return Err(config_error(
                "sweep.parameter",
                format!(
                    "{} sweeps `{}`, not `{}`",
                    self.experiment,
                    self.experiment.parameter(),
                    self.parameter
                ),
            ));
        }
        if self.values.is_empty() {
            return Err(config_error("sweep.values", "grid is empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(config_error("sweep.values", "grid values must be finite"));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(config_error("sweep.values", "grid must be strictly monotone"));
        }
        Ok(())
    }
}

/// Figure aliases `fig5` … `fig12` with the configuration tweaks they need.
pub fn figure_preset(figure: &str, base: &ScenarioConfig) -> Result<(ScenarioConfig, SweepSpec)> {
    let id = match figure {
        "fig5" => ExperimentId::BeamScanLrs,
        "fig6" => ExperimentId::BeamScanUrs,
        "fig7" => ExperimentId::GammaSweep,
        "fig8" => ExperimentId::LrsDistance,
        "fig9" => ExperimentId::UrsDistance,
        "fig10" => ExperimentId::AoaDifference,
        "fig11" => ExperimentId::OverlapRatio,
        "fig12" => ExperimentId::AngleError,
        other => other.parse()?,
    };
    let mut config = base.clone();
    if id == ExperimentId::OverlapRatio {
        config.lrs.pulse_duration_us = 30.0;
        config.urs.pulse_duration_us = 30.0;
    }
    config.validate()?;
    let sweep = SweepSpec::preset(id, &config);
    Ok((config, sweep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ProposedShortTerm,
    ProposedLongTerm,
    /// Closed-form reflection of the single-radar special cases.
    ClosedForm,
    /// Proposed design with the URS absent.
    LrsOnly,
    RandomPhase,
    NoIrs,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ProposedShortTerm => "proposed_short_term",
            Scheme::ProposedLongTerm => "proposed_long_term",
            Scheme::ClosedForm => "closed_form",
            Scheme::LrsOnly => "lrs_only",
            Scheme::RandomPhase => "random_phase",
            Scheme::NoIrs => "no_irs",
        }
    }

    fn is_proposed(self) -> bool {
        matches!(self, Scheme::ProposedShortTerm | Scheme::ProposedLongTerm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One output row. Beam scans report received power in watts; the protocol
/// experiments report IRS-reflected LRS energy over a CPI in joules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub swept_value: f64,
    pub scheme: Scheme,
    pub lrs_power_or_energy: f64,
    /// Peak URS power in watts.
    pub urs_power: f64,
    pub feasible: bool,
    pub iterations: usize,
    /// Seconds spent on the grid point; zero unless timing is enabled.
    pub wall_time: f64,
}

pub const COLUMNS: [&str; 7] = [
    "swept_value",
    "scheme",
    "lrs_power_or_energy",
    "urs_power",
    "feasible",
    "iterations",
    "wall_time",
];

/// True when the sweep produced proposed-scheme rows and none was feasible.
pub fn infeasible_only(rows: &[ResultRow]) -> bool {
    let mut proposed = rows.iter().filter(|r| r.scheme.is_proposed()).peekable();
    proposed.peek().is_some() && proposed.all(|r| !r.feasible)
}

/// DFT codeword `m` of a linear radar array, unit norm.
///
/// Codeword directions have direction cosine `(λ/d)(m/M − 1/2)`, so for
/// half-wavelength spacing they tile `[-1, 1)` uniformly.
pub fn dft_beam(spec: &ArraySpec, index: usize) -> Result<CVector> {
    let m = spec.len();
    if spec.count_a != 1 && spec.count_b != 1 {
        return Err(config_error("beam_index", "beam scans need a linear radar array"));
    }
    if index >= m {
        return Err(config_error(
            "beam_index",
            format!("codeword {index} out of range for {m} antennas"),
        ));
    }
    let step = 2.0 * PI * (index as f64 / m as f64 - 0.5);
    let norm = (m as f64).sqrt();
    Ok(CVector::from_iterator(
        m,
        (0..m).map(|k| Complex64::from_polar(1.0 / norm, step * k as f64)),
    ))
}

fn beam_index(value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 {
        return Err(config_error("beam_index", format!("must be a nonnegative integer, got {value}")));
    }
    Ok(value as usize)
}

fn rng_for(seed: u64, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64);
    rng
}

/// Configuration for one grid point of a protocol experiment.
fn apply(config: &ScenarioConfig, id: ExperimentId, value: f64) -> Result<ScenarioConfig> {
    let mut c = config.clone();
    match id {
        ExperimentId::GammaSweep => c.security.gamma = value,
        ExperimentId::LrsDistance => c.lrs.distance = value,
        ExperimentId::UrsDistance => c.urs.distance = value,
        ExperimentId::AoaDifference => c.urs.elevation_deg = c.lrs.elevation_deg - value.to_degrees(),
        ExperimentId::OverlapRatio => {
            if !(0.0..=1.0).contains(&value) {
                return Err(config_error("overlap_ratio", format!("must lie in [0, 1], got {value}")));
            }
            let shorter = c.lrs.pulse_duration_us.min(c.urs.pulse_duration_us);
            c.urs.pulse_offset_us = c.lrs.pulse_offset_us + c.lrs.pulse_duration_us - value * shorter;
        }
        ExperimentId::AngleError => c.error.angle_offset_deg = value,
        ExperimentId::BeamScanLrs | ExperimentId::BeamScanUrs => {}
    }
    c.validate()?;
    Ok(c)
}

/// Per-case URS and LRS powers of a report: (case-1, case-2, case-3).
fn case_powers(r: &PowerReport) -> [(f64, f64); 3] {
    [(r.q_ll, r.q_lu), (r.q_ul, r.q_uu), (r.q_ol, r.q_ou)]
}

fn protocol_point(
    config: &ScenarioConfig,
    value: f64,
    id: ExperimentId,
    point: usize,
    warm: [Option<&ProtocolMode>; 2],
) -> Result<(Vec<ResultRow>, [CpiResult; 2])> {
    let start = Instant::now();
    let c = apply(config, id, value)?;
    let scenario = c.scenario()?;
    let plan = c.plan()?;
    let settings = c.settings();
    let err = c.estimation_error();
    let beams = Beamformers::matched(&scenario.geometry);
    let mut rng = rng_for(c.seed, point);

    let short = run_cpi_with_beams(&scenario, &beams, &plan, ModeKind::ShortTerm, &settings, &err, warm[0], &mut rng)?;
    let long = run_cpi_with_beams(&scenario, &beams, &plan, ModeKind::LongTerm, &settings, &err, warm[1], &mut rng)?;

    let segments = &short.segments;
    let durations = [segments.case1_time(), segments.case2_time(), segments.t_overlap];
    let reflecting = (plan.pulses_per_cpi - settings.estimation_pris) as f64;
    let random = random_phase_baseline(&scenario, &beams, &mut rng, c.random_draws)?;
    let (mut random_energy, mut random_peak) = (0.0, 0.0f64);
    for (t, (lrs, urs)) in durations.iter().zip(case_powers(&random)) {
        if *t > 0.0 {
            random_energy += lrs * t;
            random_peak = random_peak.max(urs);
        }
    }
    let (echo_l, echo_u) = no_irs_baseline_power(&scenario, surface_rcs(&scenario.geometry.irs_spec))?;

    let mut rows = vec![
        row(value, Scheme::ProposedShortTerm, short.lrs_energy, short.urs_peak_power, short.feasible, short.outer_iterations),
        row(value, Scheme::ProposedLongTerm, long.lrs_energy, long.urs_peak_power, long.feasible, long.outer_iterations),
    ];
    if id == ExperimentId::LrsDistance {
        // URS absent: the closed form is optimal and no cap applies.
        let mut alone = scenario.clone();
        alone.p_u = 0.0;
        let model = LinkModel::new(&alone, &beams)?;
        let theta = closed_form_lrs_only(&model.composites.u).coefficients();
        let power = model.report(&theta).q_ll;
        rows.push(row(value, Scheme::LrsOnly, power * plan.lrs.duration * reflecting, 0.0, true, 0));
    }
    rows.push(row(
        value,
        Scheme::RandomPhase,
        random_energy * reflecting,
        random_peak,
        random_peak <= settings.gamma,
        0,
    ));
    rows.push(row(
        value,
        Scheme::NoIrs,
        echo_l * plan.lrs.duration * plan.pulses_per_cpi as f64,
        echo_u,
        echo_u <= settings.gamma,
        0,
    ));
    if c.timing {
        let elapsed = start.elapsed().as_secs_f64();
        for r in &mut rows {
            r.wall_time = elapsed;
        }
    }
    Ok((rows, [short, long]))
}

fn row(swept_value: f64, scheme: Scheme, lrs: f64, urs: f64, feasible: bool, iterations: usize) -> ResultRow {
    ResultRow {
        swept_value,
        scheme,
        lrs_power_or_energy: lrs,
        urs_power: urs,
        feasible,
        iterations,
        wall_time: 0.0,
    }
}

/// Echo power of the no-IRS baseline for arbitrary transmit/receive gains.
fn no_irs_echo(power: f64, gain: f64, wavelength: f64, rcs: f64, distance: f64) -> f64 {
    power * gain * gain * wavelength * wavelength * rcs / ((4.0 * PI).powi(3) * distance.powi(4))
}

fn scan_point(config: &ScenarioConfig, id: ExperimentId, value: f64, point: usize) -> Result<Vec<ResultRow>> {
    let start = Instant::now();
    let m = beam_index(value)?;
    let scenario = config.scenario()?;
    let geom = &scenario.geometry;
    let matched = Beamformers::matched(geom);
    let lambda = geom.wavelength();
    let rcs = surface_rcs(&geom.irs_spec);
    let mut rng = rng_for(config.seed, point);
    let mut rows = Vec::new();
    match id {
        ExperimentId::BeamScanLrs => {
            let w = dft_beam(&geom.lrs_spec, m)?;
            let gain = geom.lrs_steering().dotc(&w).norm_sqr();
            let beams = Beamformers::new(w, matched.w_u.clone())?;
            let mut alone = scenario.clone();
            alone.p_u = 0.0;
            let model = LinkModel::new(&alone, &beams)?;
            let theta = closed_form_lrs_only(&model.composites.u).coefficients();
            rows.push(row(value, Scheme::ClosedForm, model.report(&theta).q_ll, 0.0, true, 0));
            let random = random_phase_baseline(&alone, &beams, &mut rng, config.random_draws)?;
            rows.push(row(value, Scheme::RandomPhase, random.q_ll, 0.0, true, 0));
            let echo = no_irs_echo(scenario.p_l, gain, lambda, rcs, geom.dist_li);
            rows.push(row(value, Scheme::NoIrs, echo, 0.0, true, 0));
        }
        _ => {
            let w = dft_beam(&geom.urs_spec, m)?;
            let gain = geom.urs_steering().dotc(&w).norm_sqr();
            let beams = Beamformers::new(matched.w_l.clone(), w)?;
            let model = LinkModel::new(&scenario, &beams)?;
            let irs = &geom.irs_spec;
            let theta = if irs.count_a >= 2 && irs.count_b >= 2 {
                closed_form_urs_null(irs, &geom.angles_u, (1, 1))?
            } else if irs.count_a >= 2 {
                closed_form_urs_null_single_axis(irs, &geom.angles_u, Axis::X, 1)?
            } else {
                closed_form_urs_null_single_axis(irs, &geom.angles_u, Axis::Y, 1)?
            };
            let gamma = config.security.gamma;
            let q_uu = model.report(&theta.coefficients()).q_uu;
            rows.push(row(value, Scheme::ClosedForm, 0.0, q_uu, q_uu <= gamma, 0));
            let random = random_phase_baseline(&scenario, &beams, &mut rng, config.random_draws)?;
            rows.push(row(value, Scheme::RandomPhase, 0.0, random.q_uu, random.q_uu <= gamma, 0));
            let echo = no_irs_echo(scenario.p_u, gain, lambda, rcs, geom.dist_ui);
            rows.push(row(value, Scheme::NoIrs, 0.0, echo, echo <= gamma, 0));
        }
    }
    if config.timing {
        let elapsed = start.elapsed().as_secs_f64();
        for r in &mut rows {
            r.wall_time = elapsed;
        }
    }
    Ok(rows)
}

/// Runs a sweep. Grid points are solved in parallel, except for the γ sweep,
/// which walks the grid in increasing γ and warm-starts each point from the
/// previous one so the LRS energy cannot drop as the cap loosens. Rows come
/// back in grid order, one per scheme per point.
pub fn run_experiment(config: &ScenarioConfig, sweep: &SweepSpec) -> Result<Vec<ResultRow>> {
    config.validate()?;
    sweep.validate()?;
    let id = sweep.experiment;
    let values = &sweep.values;
    let blocks: Vec<Vec<ResultRow>> = match id {
        ExperimentId::BeamScanLrs | ExperimentId::BeamScanUrs => values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| scan_point(config, id, v, i))
            .collect::<Result<_>>()?,
        ExperimentId::GammaSweep => {
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let mut blocks = vec![Vec::new(); values.len()];
            let mut previous: Option<[CpiResult; 2]> = None;
            for i in order {
                let warm = match &previous {
                    Some([s, l]) => [Some(&s.mode), Some(&l.mode)],
                    None => [None, None],
                };
                let (rows, results) = protocol_point(config, values[i], id, i, warm)?;
                blocks[i] = rows;
                previous = Some(results);
            }
            blocks
        }
        _ => values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| protocol_point(config, v, id, i, [None, None]).map(|(rows, _)| rows))
            .collect::<Result<_>>()?,
    };
    Ok(blocks.into_iter().flatten().collect())
}

/// Summary of a single CPI for the `optimize` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub cpi: CpiResult,
    /// Mean reflected LRS power over the LRS pulse, in watts.
    pub lrs_mean_power: f64,
    pub lrs_snr_db: Option<f64>,
    pub urs_snr_db: Option<f64>,
    pub no_irs_lrs_power: f64,
    pub no_irs_urs_power: f64,
}

pub fn optimize(config: &ScenarioConfig) -> Result<OptimizeReport> {
    config.validate()?;
    let scenario = config.scenario()?;
    let plan = config.plan()?;
    let beams = Beamformers::matched(&scenario.geometry);
    let mut rng = rng_for(config.seed, 0);
    let cpi = run_cpi_with_beams(
        &scenario,
        &beams,
        &plan,
        config.mode,
        &config.settings(),
        &config.estimation_error(),
        None,
        &mut rng,
    )?;
    let lrs_mean_power = cpi.lrs_energy_per_pri / plan.lrs.duration;
    let snr = |p: f64, noise: f64| (noise > 0.0 && p > 0.0).then(|| 10.0 * (p / noise).log10());
    let (echo_l, echo_u) = no_irs_baseline_power(&scenario, surface_rcs(&scenario.geometry.irs_spec))?;
    Ok(OptimizeReport {
        lrs_snr_db: snr(lrs_mean_power, config.lrs.noise_power),
        urs_snr_db: snr(cpi.urs_peak_power, config.urs.noise_power),
        lrs_mean_power,
        no_irs_lrs_power: echo_l,
        no_irs_urs_power: echo_u,
        cpi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(config_error("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn rounded(r: &ResultRow) -> ResultRow {
    ResultRow {
        swept_value: round12(r.swept_value),
        lrs_power_or_energy: round12(r.lrs_power_or_energy),
        urs_power: round12(r.urs_power),
        wall_time: round12(r.wall_time),
        ..r.clone()
    }
}

fn num(x: f64) -> String {
    let r = round12(x);
    if r == 0.0 || (1e-4..1e6).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            num(r.swept_value),
            r.scheme.to_string(),
            num(r.lrs_power_or_energy),
            num(r.urs_power),
            r.feasible.to_string(),
            r.iterations.to_string(),
            num(r.wall_time),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json_string(rows: &[ResultRow]) -> Result<String> {
    let rows: Vec<ResultRow> = rows.iter().map(rounded).collect();
    serde_json::to_string_pretty(&rows).map_err(|e| Error::Io {
        path: "<json>".into(),
        message: e.to_string(),
    })
}

/// Writes `rows` to `path`. Nothing is created when `rows` is empty.
pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(config_error("results", "nothing to write"));
    }
    let text = match format {
        Format::Csv => to_csv_string(rows)?,
        Format::Json => to_json_string(rows)?,
    };
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "IRSENSE_WORKERS";

/// Sizes the global worker pool from [`WORKERS_ENV`] if it is set. Returns
/// the requested count.
pub fn init_workers_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| config_error(WORKERS_ENV, format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error(WORKERS_ENV, e.to_string()))?;
    Ok(Some(n))
}
