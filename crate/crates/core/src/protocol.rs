//! The two-step CPI protocol: a silent estimation PRI followed by reflection
//! with either per-case (short-term) or fixed (long-term) phase shifts.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{AnglePair, ArraySpec, CVector, Composites};
use crate::optimizer::{build_problem, pdd_solve, PddParams, ProblemCase, ProblemData, ProblemInputs};
use crate::power::{irs_received_powers, Beamformers, LinkModel, PowerReport, ReflectionVector, Scenario};
use crate::waveform::{segment_pri, CaseSegments, TimingPlan};

/// Relative feasibility slack used when choosing between candidate solutions.
const PICK_TOL: f64 = 1e-9;
/// Restarts from the current point stop once they gain less than this, relatively.
const RESTART_TOL: f64 = 1e-12;
const MAX_RESTARTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    ShortTerm,
    LongTerm,
}

/// Reflection actually applied during Step II.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    ShortTerm {
        theta1: ReflectionVector,
        theta2: ReflectionVector,
        theta3: ReflectionVector,
    },
    LongTerm {
        theta0: ReflectionVector,
    },
}

impl ProtocolMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            ProtocolMode::ShortTerm { .. } => ModeKind::ShortTerm,
            ProtocolMode::LongTerm { .. } => ModeKind::LongTerm,
        }
    }

    /// Reflection in force during case 1, 2 or 3.
    pub fn for_case(&self, case: usize) -> &ReflectionVector {
        match self {
            ProtocolMode::ShortTerm { theta1, theta2, theta3 } => match case {
                1 => theta1,
                2 => theta2,
                _ => theta3,
            },
            ProtocolMode::LongTerm { theta0 } => theta0,
        }
    }
}

/// How Step I misjudges the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationError {
    /// Fixed offset in radians added to every estimated angle.
    pub angle_offset: f64,
    /// Standard deviation in radians of an extra Gaussian error drawn per CPI.
    pub angle_sigma: f64,
    /// Relative error applied to the estimated `Q_LS` and `Q_US`.
    pub power_rel_error: f64,
}

impl EstimationError {
    pub fn validate(&self) -> Result<()> {
        if !self.angle_offset.is_finite() {
            return Err(invalid("angle_offset", "must be finite"));
        }
        if !(self.angle_sigma >= 0.0 && self.angle_sigma.is_finite()) {
            return Err(invalid("angle_sigma", format!("must be nonnegative, got {}", self.angle_sigma)));
        }
        if !(self.power_rel_error.abs() < 1.0) {
            return Err(invalid(
                "power_rel_error",
                format!("magnitude must be below 1, got {}", self.power_rel_error),
            ));
        }
        Ok(())
    }

    fn perturb<R: Rng + ?Sized>(&self, a: &AnglePair, rng: &mut R) -> AnglePair {
        let (mut de, mut da) = (self.angle_offset, self.angle_offset);
        if self.angle_sigma > 0.0 {
            let normal = Normal::new(0.0, self.angle_sigma).expect("sigma validated");
            de += normal.sample(rng);
            da += normal.sample(rng);
        }
        a.perturbed(de, da)
    }
}

/// Solver-side settings shared by every CPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    /// URS power cap in watts.
    pub gamma: f64,
    /// Lower bound on the URS transmit power assumed by the surface.
    pub p_u_min: f64,
    pub pdd: PddParams,
    /// PRIs spent on Step I.
    pub estimation_pris: usize,
}

impl ProtocolSettings {
    pub fn new(gamma: f64, p_u_min: f64) -> Self {
        Self {
            gamma,
            p_u_min,
            pdd: PddParams::default(),
            estimation_pris: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.p_u_min > 0.0 && self.p_u_min.is_finite()) {
            return Err(invalid("p_u_min", format!("must be positive, got {}", self.p_u_min)));
        }
        self.pdd.validate()
    }
}

/// True-model powers during each case; `None` where the case has no duration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CasePowers {
    pub case1: Option<PowerReport>,
    pub case2: Option<PowerReport>,
    pub case3: Option<PowerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpiResult {
    /// IRS-reflected energy at the LRS over the CPI, in joules.
    pub lrs_energy: f64,
    pub lrs_energy_per_pri: f64,
    /// Largest URS power over the reflecting cases, in watts.
    pub urs_peak_power: f64,
    pub cases: CasePowers,
    /// Powers during Step I, when every element is off.
    pub estimation_powers: PowerReport,
    pub mode: ProtocolMode,
    /// False when some case had no reflection meeting the cap and was left off.
    pub feasible: bool,
    pub segments: CaseSegments,
    pub estimated_angles: (AnglePair, AnglePair),
    pub outer_iterations: usize,
    pub sca_iterations: usize,
}

/// One CPI with beams matched to the true target directions.
pub fn run_cpi<R: Rng + ?Sized>(
    scenario: &Scenario,
    plan: &TimingPlan,
    mode: ModeKind,
    settings: &ProtocolSettings,
    err: &EstimationError,
    rng: &mut R,
) -> Result<CpiResult> {
    scenario.validate()?;
    let beams = Beamformers::matched(&scenario.geometry);
    run_cpi_with_beams(scenario, &beams, plan, mode, settings, err, None, rng)
}

/// One CPI. Transmit powers come from `scenario`; `plan` supplies timing.
///
/// `warm` offers reflections from an earlier CPI as extra starting points;
/// each is kept only if it beats the fresh solves.
#[allow(clippy::too_many_arguments)]
pub fn run_cpi_with_beams<R: Rng + ?Sized>(
    scenario: &Scenario,
    beams: &Beamformers,
    plan: &TimingPlan,
    mode: ModeKind,
    settings: &ProtocolSettings,
    err: &EstimationError,
    warm: Option<&ProtocolMode>,
    rng: &mut R,
) -> Result<CpiResult> {
    settings.validate()?;
    err.validate()?;
    let segments = segment_pri(plan)?;
    if settings.estimation_pris >= plan.pulses_per_cpi {
        return Err(invalid(
            "estimation_pris",
            format!(
                "{} leaves no reflecting PRI in a CPI of {}",
                settings.estimation_pris, plan.pulses_per_cpi
            ),
        ));
    }
    let truth = LinkModel::new(scenario, beams)?;
    let n = scenario.geometry.irs_spec.len();

    // Step I: every element off while the sensors estimate.
    let estimation_powers = truth.report(&ReflectionVector::off(n).coefficients());

    let geom = &scenario.geometry;
    let est_l = err.perturb(&geom.angles_l, rng);
    let est_u = err.perturb(&geom.angles_u, rng);
    let (q_ls, q_us) = irs_received_powers(scenario, beams)?;
    let scale = 1.0 + err.power_rel_error;
    let inputs = ProblemInputs {
        q_ls: q_ls * scale,
        q_us: q_us * scale,
        t_l: plan.lrs.duration,
        t_u: plan.urs.duration,
        gamma: settings.gamma,
        p_u_min: settings.p_u_min,
    };
    let estimated = Composites::new(&est_l, &est_u, &geom.irs_spec);

    let mut solver = Solver {
        inputs,
        composites: &estimated,
        params: &settings.pdd,
        feasible: true,
        outer: 0,
        sca: 0,
    };
    let previous = |case: usize| -> Vec<CVector> {
        warm.map(|w| w.for_case(case))
            .filter(|t| t.len() == n && !t.is_off())
            .map(ReflectionVector::coefficients)
            .into_iter()
            .collect()
    };
    // Long-term reflection is a single vector, so any case of `warm` serves.
    let mut pool = previous(3);
    if segments.t_overlap > 0.0 {
        // The overlapped case has the same cap as P4, so its optimum is a
        // feasible P4 candidate. Both modes take it so that their θ0 agree.
        let feasible = solver.feasible;
        pool.extend(solver.solve(ProblemCase::P3, &previous(3))?.map(|t| t.coefficients()));
        solver.feasible = feasible;
    }
    let mut theta0 = solver.solve(ProblemCase::P4, &pool)?;
    // Re-solving the overlapped case from θ0 can climb past it; the result
    // is offered back to P4 and reused as the short-term θ3.
    let mut theta3 = None;
    if segments.t_overlap > 0.0 {
        let mut warms = previous(3);
        warms.extend(theta0.as_ref().map(ReflectionVector::coefficients));
        let feasible = solver.feasible;
        let refined = solver.solve(ProblemCase::P3, &warms)?;
        solver.feasible = feasible;
        let offered: Vec<CVector> = theta0.iter().chain(&refined).map(ReflectionVector::coefficients).collect();
        theta0 = solver.choose(ProblemCase::P4, offered)?;
        theta3 = refined;
    }
    let applied = match mode {
        ModeKind::LongTerm => ProtocolMode::LongTerm {
            theta0: theta0.unwrap_or_else(|| ReflectionVector::off(n)),
        },
        ModeKind::ShortTerm => {
            let mut pick = |case: ProblemCase, index: usize, active: bool| -> Result<ReflectionVector> {
                if !active {
                    return Ok(ReflectionVector::off(n));
                }
                let mut warms = previous(index);
                warms.extend(theta0.as_ref().map(ReflectionVector::coefficients));
                Ok(solver.solve(case, &warms)?.unwrap_or_else(|| ReflectionVector::off(n)))
            };
            let theta1 = pick(ProblemCase::P1, 1, segments.case1_time() > 0.0)?;
            let theta2 = pick(ProblemCase::P2, 2, segments.case2_time() > 0.0 && inputs.q_us > 0.0)?;
            let theta3 = theta3.unwrap_or_else(|| ReflectionVector::off(n));
            ProtocolMode::ShortTerm { theta1, theta2, theta3 }
        }
    };

    let durations = [segments.case1_time(), segments.case2_time(), segments.t_overlap];
    let mut cases = CasePowers::default();
    let mut per_pri = 0.0;
    let mut peak: f64 = 0.0;
    for (i, &t) in durations.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        let report = truth.report(&applied.for_case(i + 1).coefficients());
        let (lrs, urs) = match i {
            0 => (report.q_ll, report.q_lu),
            1 => (report.q_ul, report.q_uu),
            _ => (report.q_ol, report.q_ou),
        };
        per_pri += lrs * t;
        peak = peak.max(urs);
        match i {
            0 => cases.case1 = Some(report),
            1 => cases.case2 = Some(report),
            _ => cases.case3 = Some(report),
        }
    }
    let reflecting = (plan.pulses_per_cpi - settings.estimation_pris) as f64;

    Ok(CpiResult {
        lrs_energy: per_pri * reflecting,
        lrs_energy_per_pri: per_pri,
        urs_peak_power: peak,
        cases,
        estimation_powers,
        mode: applied,
        feasible: solver.feasible,
        segments,
        estimated_angles: (est_l, est_u),
        outer_iterations: solver.outer,
        sca_iterations: solver.sca,
    })
}

struct Solver<'a> {
    inputs: ProblemInputs,
    composites: &'a Composites,
    params: &'a PddParams,
    feasible: bool,
    outer: usize,
    sca: usize,
}

impl Solver<'_> {
    /// Best of a cold PDD solve, the `warms` themselves and PDD solves from
    /// each of them, every solve refined by restarting from its own output.
    /// `None` when no feasible reflection exists.
    fn solve(&mut self, case: ProblemCase, warms: &[CVector]) -> Result<Option<ReflectionVector>> {
        let problem = build_problem(case, &self.inputs, self.composites)?;
        let mut candidates: Vec<CVector> = warms.to_vec();
        let inits: Vec<Option<&CVector>> = std::iter::once(None).chain(warms.iter().map(Some)).collect();
        for init in inits {
            if let Some(t) = self.refine(&problem, init)? {
                candidates.push(t);
            }
        }
        let best = pick_best(&problem, candidates);
        if best.is_none() {
            self.feasible = false;
        }
        Ok(best.map(|t| ReflectionVector::from_coefficients(&t).canonicalized()))
    }

    /// Best feasible reflection among `candidates`, without solving.
    fn choose(&mut self, case: ProblemCase, candidates: Vec<CVector>) -> Result<Option<ReflectionVector>> {
        let problem = build_problem(case, &self.inputs, self.composites)?;
        let best = pick_best(&problem, candidates);
        if best.is_none() {
            self.feasible = false;
        }
        Ok(best.map(|t| ReflectionVector::from_coefficients(&t).canonicalized()))
    }

    fn refine(&mut self, problem: &ProblemData, init: Option<&CVector>) -> Result<Option<CVector>> {
        let mut current = match self.run(problem, init)? {
            Some(t) => t,
            None => return Ok(None),
        };
        for _ in 0..MAX_RESTARTS {
            let Some(next) = self.run(problem, Some(&current))? else {
                break;
            };
            let gain = problem.objective(&next) - problem.objective(&current);
            let improved = gain > RESTART_TOL * problem.objective(&current) && problem.is_feasible(&next, PICK_TOL);
            if !improved {
                break;
            }
            current = next;
        }
        Ok(Some(current))
    }

    fn run(&mut self, problem: &ProblemData, init: Option<&CVector>) -> Result<Option<CVector>> {
        match pdd_solve(problem, self.params, init) {
            Ok(sol) => {
                self.outer += sol.outer_iterations;
                self.sca += sol.sca_iterations;
                Ok(Some(sol.coefficients()))
            }
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn pick_best(problem: &ProblemData, candidates: Vec<CVector>) -> Option<CVector> {
    candidates
        .into_iter()
        .filter(|t| problem.is_feasible(t, PICK_TOL))
        .map(|t| (problem.objective(&t), t))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, t)| t)
}

/// Target RCS `4πA²/λ²` of a flat plate of area `A = 1.2·N·d²`, the
/// footprint of the surface plus a margin.
pub fn surface_rcs(irs: &ArraySpec) -> f64 {
    let area = 1.2 * irs.len() as f64 * irs.spacing * irs.spacing;
    4.0 * PI * area * area / (irs.wavelength * irs.wavelength)
}

/// Monostatic radar-equation echo power `P G² λ² κ / ((4π)³ d⁴)` with array
/// gain `G` equal to the antenna count, for the LRS and the URS.
pub fn no_irs_baseline_power(scenario: &Scenario, rcs: f64) -> Result<(f64, f64)> {
    let g = &scenario.geometry;
    if !(rcs >= 0.0 && rcs.is_finite()) {
        return Err(invalid("rcs", format!("must be nonnegative, got {rcs}")));
    }
    if !(scenario.p_l >= 0.0 && scenario.p_u >= 0.0) {
        return Err(invalid("transmit power", "must be nonnegative"));
    }
    let lambda = g.wavelength();
    let echo = |p: f64, gain: f64, d: f64| -> Result<f64> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid("distance", format!("must be positive, got {d}")));
        }
        Ok(p * gain * gain * lambda * lambda * rcs / ((4.0 * PI).powi(3) * d.powi(4)))
    };
    Ok((
        echo(scenario.p_l, g.lrs_spec.len() as f64, g.dist_li)?,
        echo(scenario.p_u, g.urs_spec.len() as f64, g.dist_ui)?,
    ))
}

/// Uniformly random phases on every element.
pub fn random_reflection<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ReflectionVector {
    ReflectionVector::from_phases((0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect())
}

/// Link powers averaged over `draws` independent random-phase reflections.
pub fn random_phase_baseline<R: Rng + ?Sized>(
    scenario: &Scenario,
    beams: &Beamformers,
    rng: &mut R,
    draws: usize,
) -> Result<PowerReport> {
    if draws == 0 {
        return Err(invalid("draws", "must be at least 1"));
    }
    let model = LinkModel::new(scenario, beams)?;
    let n = scenario.geometry.irs_spec.len();
    let mut acc = PowerReport::default();
    for _ in 0..draws {
        let r = model.report(&random_reflection(n, rng).coefficients());
        acc.q_ll += r.q_ll;
        acc.q_lu += r.q_lu;
        acc.q_ul += r.q_ul;
        acc.q_uu += r.q_uu;
        acc.q_ol += r.q_ol;
        acc.q_ou += r.q_ou;
    }
    let k = draws as f64;
    Ok(PowerReport {
        q_ls: model.q_ls,
        q_us: model.q_us,
        q_ll: acc.q_ll / k,
        q_lu: acc.q_lu / k,
        q_ul: acc.q_ul / k,
        q_uu: acc.q_uu / k,
        q_ol: acc.q_ol / k,
        q_ou: acc.q_ou / k,
    })
}
