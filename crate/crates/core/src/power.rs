//! Received powers at the surface and at both radars.
//!
//! The closed forms in [`LinkModel`] are the production path. The `oracle_*`
//! functions rebuild the same quantities from the full channel matrices and
//! exist to cross-check them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{build_channels, ChannelSet, CMatrix, LinkGain, ScenarioGeometry};
use crate::error::{invalid, Error, Result};
use crate::geometry::{CVector, CompositeKind, Composites};

/// Per-element on/off amplitude and phase of the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionVector {
    /// `β_n`; `true` reflects, `false` absorbs.
    pub amplitudes: Vec<bool>,
    /// `ω_n` in radians.
    pub phases: Vec<f64>,
}

impl ReflectionVector {
    pub fn new(amplitudes: Vec<bool>, phases: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                what: "reflection phases",
                expected: amplitudes.len(),
                got: phases.len(),
            });
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid("phases", "must be finite"));
        }
        Ok(Self { amplitudes, phases })
    }

    /// All elements on with the given phases.
    pub fn from_phases(phases: Vec<f64>) -> Self {
        Self {
            amplitudes: vec![true; phases.len()],
            phases,
        }
    }

    /// All elements off.
    pub fn off(len: usize) -> Self {
        Self {
            amplitudes: vec![false; len],
            phases: vec![0.0; len],
        }
    }

    /// Phases taken from the entry angles of `z`; zero entries are switched off.
    pub fn from_coefficients(z: &CVector) -> Self {
        Self {
            amplitudes: z.iter().map(|c| c.norm() > 0.5).collect(),
            phases: z.iter().map(|c| if c.norm() > 0.0 { c.arg() } else { 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn is_off(&self) -> bool {
        self.amplitudes.iter().all(|&b| !b)
    }

    /// `θ_n = β_n e^{jω_n}`.
    pub fn coefficients(&self) -> CVector {
        CVector::from_iterator(
            self.len(),
            self.amplitudes.iter().zip(&self.phases).map(|(&on, &w)| {
                if on {
                    Complex64::from_polar(1.0, w)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        )
    }

    /// Removes the global phase so the first active element has phase 0 and
    /// every phase lies in `(-π, π]`.
    pub fn canonicalized(&self) -> Self {
        let reference = self
            .amplitudes
            .iter()
            .position(|&on| on)
            .map_or(0.0, |i| self.phases[i]);
        let phases = self
            .phases
            .iter()
            .zip(&self.amplitudes)
            .map(|(&w, &on)| if on { principal(w - reference) } else { 0.0 })
            .collect();
        Self {
            amplitudes: self.amplitudes.clone(),
            phases,
        }
    }
}

fn principal(angle: f64) -> f64 {
    let a = Complex64::from_polar(1.0, angle).arg();
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Unit-norm transmit/receive beamformers of the two radars.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w_l: CVector,
    pub w_u: CVector,
}

impl Beamformers {
    pub fn new(w_l: CVector, w_u: CVector) -> Result<Self> {
        for (name, w) in [("w_l", &w_l), ("w_u", &w_u)] {
            if (w.norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(name, format!("must be unit norm, got {}", w.norm())));
            }
        }
        Ok(Self { w_l, w_u })
    }

    /// Beams matched to the true target direction of each radar.
    pub fn matched(geom: &ScenarioGeometry) -> Self {
        let b = geom.lrs_steering();
        let c = geom.urs_steering();
        let nb = b.norm();
        let nc = c.norm();
        Self {
            w_l: b.unscale(nb),
            w_u: c.unscale(nc),
        }
    }
}

/// Geometry plus transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: ScenarioGeometry,
    /// LRS transmit power `P_L` in watts.
    pub p_l: f64,
    /// URS transmit power `P_U` in watts; zero models an absent URS.
    pub p_u: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.p_l > 0.0 && self.p_l.is_finite()) {
            return Err(invalid("p_l", format!("must be positive, got {}", self.p_l)));
        }
        if !(self.p_u >= 0.0 && self.p_u.is_finite()) {
            return Err(invalid("p_u", format!("must be nonnegative, got {}", self.p_u)));
        }
        Ok(())
    }
}

/// Radar-to-surface links, named source then destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    /// LRS → surface → LRS.
    LL,
    /// LRS → surface → URS.
    LU,
    /// URS → surface → LRS.
    UL,
    /// URS → surface → URS.
    UU,
}

impl Link {
    pub const ALL: [Link; 4] = [Link::LL, Link::LU, Link::UL, Link::UU];

    pub fn composite(self) -> CompositeKind {
        match self {
            Link::LL => CompositeKind::U,
            Link::LU => CompositeKind::V,
            Link::UL => CompositeKind::R,
            Link::UU => CompositeKind::G,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    L,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerReport {
    pub q_ls: f64,
    pub q_us: f64,
    pub q_ll: f64,
    pub q_lu: f64,
    pub q_ul: f64,
    pub q_uu: f64,
    pub q_ol: f64,
    pub q_ou: f64,
}

/// `(Q_LS, Q_US)`: powers impinging on the surface during a pulse.
pub fn irs_received_powers(scenario: &Scenario, beams: &Beamformers) -> Result<(f64, f64)> {
    scenario.validate()?;
    let geom = &scenario.geometry;
    let b = geom.lrs_steering();
    let c = geom.urs_steering();
    check_len("w_l", b.len(), beams.w_l.len())?;
    check_len("w_u", c.len(), beams.w_u.len())?;
    let (al, au) = geom.path_gains()?;
    let q_ls = al * al * b.dotc(&beams.w_l).norm_sqr() * scenario.p_l;
    let q_us = au * au * c.dotc(&beams.w_u).norm_sqr() * scenario.p_u;
    Ok((q_ls, q_us))
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Everything the closed-form powers need: composites, surface powers and
/// transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub composites: Composites,
    pub q_ls: f64,
    pub q_us: f64,
    pub p_l: f64,
    pub p_u: f64,
}

impl LinkModel {
    pub fn new(scenario: &Scenario, beams: &Beamformers) -> Result<Self> {
        let (q_ls, q_us) = irs_received_powers(scenario, beams)?;
        let g = &scenario.geometry;
        Ok(Self {
            composites: Composites::new(&g.angles_l, &g.angles_u, &g.irs_spec),
            q_ls,
            q_us,
            p_l: scenario.p_l,
            p_u: scenario.p_u,
        })
    }

    /// Power scale multiplying `|xᴴθ|²` for each link.
    pub fn link_scale(&self, link: Link) -> f64 {
        match link {
            Link::LL => ratio(self.q_ls * self.q_ls, self.p_l),
            Link::LU => ratio(self.q_ls * self.q_us, self.p_u),
            Link::UL => ratio(self.q_ls * self.q_us, self.p_l),
            Link::UU => ratio(self.q_us * self.q_us, self.p_u),
        }
    }

    pub fn link_power(&self, link: Link, theta: &CVector) -> f64 {
        let scale = self.link_scale(link);
        if scale == 0.0 {
            return 0.0;
        }
        scale * self.composites.get(link.composite()).gain(theta)
    }

    /// Expected power during the overlapped case; cross terms average out.
    pub fn overlap_power(&self, side: Side, theta: &CVector) -> f64 {
        match side {
            Side::L => self.link_power(Link::LL, theta) + self.link_power(Link::UL, theta),
            Side::U => self.link_power(Link::LU, theta) + self.link_power(Link::UU, theta),
        }
    }

    pub fn report(&self, theta: &CVector) -> PowerReport {
        PowerReport {
            q_ls: self.q_ls,
            q_us: self.q_us,
            q_ll: self.link_power(Link::LL, theta),
            q_lu: self.link_power(Link::LU, theta),
            q_ul: self.link_power(Link::UL, theta),
            q_uu: self.link_power(Link::UU, theta),
            q_ol: self.overlap_power(Side::L, theta),
            q_ou: self.overlap_power(Side::U, theta),
        }
    }
}

pub fn link_power(
    link: Link,
    theta: &ReflectionVector,
    scenario: &Scenario,
    beams: &Beamformers,
) -> Result<f64> {
    let model = LinkModel::new(scenario, beams)?;
    check_len("theta", scenario.geometry.irs_spec.len(), theta.len())?;
    Ok(model.link_power(link, &theta.coefficients()))
}

pub fn overlap_power(
    side: Side,
    theta: &ReflectionVector,
    scenario: &Scenario,
    beams: &Beamformers,
) -> Result<f64> {
    let model = LinkModel::new(scenario, beams)?;
    check_len("theta", scenario.geometry.irs_spec.len(), theta.len())?;
    Ok(model.overlap_power(side, &theta.coefficients()))
}

fn cascade(
    channels: &ChannelSet,
    link: Link,
    theta: &CVector,
    beams: &Beamformers,
) -> Complex64 {
    let (h_out, h_in, w_rx, w_tx): (&CMatrix, &CMatrix, &CVector, &CVector) = match link {
        Link::LL => (&channels.h_li, &channels.h_il, &beams.w_l, &beams.w_l),
        Link::LU => (&channels.h_ui, &channels.h_il, &beams.w_u, &beams.w_l),
        Link::UL => (&channels.h_li, &channels.h_iu, &beams.w_l, &beams.w_u),
        Link::UU => (&channels.h_ui, &channels.h_iu, &beams.w_u, &beams.w_u),
    };
    let incident = h_in * w_tx;
    let reflected = incident.component_mul(theta);
    (w_rx.transpose() * (h_out * reflected))[(0, 0)]
}

fn channels_for(scenario: &Scenario, nu: (f64, f64)) -> Result<ChannelSet> {
    let (al, au) = scenario.geometry.path_gains()?;
    build_channels(
        &scenario.geometry,
        (LinkGain::new(al, nu.0)?, LinkGain::new(au, nu.1)?),
    )
}

/// `|w_rxᵀ H_out diag(θ) H_in w_tx|² · P_src` from the full matrices.
pub fn oracle_link_power(
    link: Link,
    theta: &CVector,
    scenario: &Scenario,
    beams: &Beamformers,
    nu: (f64, f64),
) -> Result<f64> {
    scenario.validate()?;
    check_len("theta", scenario.geometry.irs_spec.len(), theta.len())?;
    let channels = channels_for(scenario, nu)?;
    let p_src = match link {
        Link::LL | Link::LU => scenario.p_l,
        Link::UL | Link::UU => scenario.p_u,
    };
    Ok(cascade(&channels, link, theta, beams).norm_sqr() * p_src)
}

/// `(Q_LS, Q_US)` from `|ᾱ bᴴ w x|²` and `|ᾱ w_Uᵀ c(π−φ_U, π+η_U) s|²`
/// built from the channel matrices' steering factors.
pub fn oracle_irs_received_powers(scenario: &Scenario, beams: &Beamformers) -> Result<(f64, f64)> {
    scenario.validate()?;
    let channels = channels_for(scenario, (0.0, 0.0))?;
    let n = scenario.geometry.irs_spec.len() as f64;
    // Rows of H_IL w_L have modulus ᾱ_l |bᴴ w_L|; average over the N rows.
    let q_ls = (&channels.h_il * &beams.w_l).norm_squared() / n * scenario.p_l;
    // Columns of w_Uᵀ H_UI have modulus ᾱ_u |w_Uᵀ c_r|.
    let q_us = (beams.w_u.transpose() * &channels.h_ui).norm_squared() / n * scenario.p_u;
    Ok((q_ls, q_us))
}

/// The two unit-phase amplitudes of the overlapped received signal.
///
/// With reference phases `(ν_l, ν_u)` the instantaneous overlapped signal at
/// the LRS is `e^{j2ν_l} f₁ + e^{j(ν_l+ν_u)} f₂`; at the URS it is
/// `e^{j(ν_l+ν_u)} f₁ + e^{j2ν_u} f₂`. Both amplitudes are evaluated from the
/// matrices at `ν = 0` and include the `√P` of their source pulse.
pub fn overlap_amplitudes(
    side: Side,
    theta: &CVector,
    scenario: &Scenario,
    beams: &Beamformers,
) -> Result<(Complex64, Complex64)> {
    scenario.validate()?;
    check_len("theta", scenario.geometry.irs_spec.len(), theta.len())?;
    let channels = channels_for(scenario, (0.0, 0.0))?;
    let (from_l, from_u) = match side {
        Side::L => (Link::LL, Link::UL),
        Side::U => (Link::LU, Link::UU),
    };
    Ok((
        cascade(&channels, from_l, theta, beams) * scenario.p_l.sqrt(),
        cascade(&channels, from_u, theta, beams) * scenario.p_u.sqrt(),
    ))
}

/// Instantaneous overlapped power for one draw of the reference phases,
/// computed directly from the channel matrices.
pub fn instantaneous_overlap_power(
    side: Side,
    theta: &CVector,
    scenario: &Scenario,
    beams: &Beamformers,
    nu: (f64, f64),
) -> Result<f64> {
    scenario.validate()?;
    let channels = channels_for(scenario, nu)?;
    let (from_l, from_u) = match side {
        Side::L => (Link::LL, Link::UL),
        Side::U => (Link::LU, Link::UU),
    };
    let y = cascade(&channels, from_l, theta, beams) * scenario.p_l.sqrt()
        + cascade(&channels, from_u, theta, beams) * scenario.p_u.sqrt();
    Ok(y.norm_sqr())
}
