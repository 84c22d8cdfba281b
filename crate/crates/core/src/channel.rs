//! Line-of-sight channels between the radars and the target-mounted surface.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    steering_irs, steering_radar, AnglePair, ArraySpec, CVector, IrsSense, RadarRole, RadarSense,
};

pub type CMatrix = DMatrix<Complex64>;

/// Complex path gain `α = e^{jν} ᾱ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGain {
    pub amplitude: f64,
    pub reference_phase: f64,
}

impl LinkGain {
    pub fn new(amplitude: f64, reference_phase: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(invalid("amplitude", format!("must be >= 0, got {amplitude}")));
        }
        if !(0.0..2.0 * PI).contains(&reference_phase) {
            return Err(invalid(
                "reference_phase",
                format!("must lie in [0, 2π), got {reference_phase}"),
            ));
        }
        Ok(Self {
            amplitude,
            reference_phase,
        })
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.reference_phase)
    }
}

/// Positions, arrays and distances of the LRS, the URS and the surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub angles_l: AnglePair,
    pub angles_u: AnglePair,
    /// LRS–target distance in meters.
    pub dist_li: f64,
    /// URS–target distance in meters.
    pub dist_ui: f64,
    pub lrs_spec: ArraySpec,
    pub urs_spec: ArraySpec,
    pub irs_spec: ArraySpec,
    /// Number of receive-only sensors on the surface. Carried for
    /// completeness; estimation is abstracted so it does not enter any formula.
    pub sensor_count: usize,
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.dist_li > 0.0 && self.dist_li.is_finite()) {
            return Err(invalid("dist_li", format!("must be positive, got {}", self.dist_li)));
        }
        if !(self.dist_ui > 0.0 && self.dist_ui.is_finite()) {
            return Err(invalid("dist_ui", format!("must be positive, got {}", self.dist_ui)));
        }
        if self.sensor_count == 0 {
            return Err(invalid("sensor_count", "must be at least 1"));
        }
        let wl = self.irs_spec.wavelength;
        for (name, spec) in [("lrs_spec", &self.lrs_spec), ("urs_spec", &self.urs_spec)] {
            if (spec.wavelength - wl).abs() > 1e-12 * wl {
                return Err(invalid(name, "all arrays must share one wavelength"));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.irs_spec.wavelength
    }

    /// Free-space amplitudes `(ᾱ_l, ᾱ_u)` of the two radar–surface links.
    pub fn path_gains(&self) -> Result<(f64, f64)> {
        Ok((
            path_gain(self.dist_li, self.wavelength())?,
            path_gain(self.dist_ui, self.wavelength())?,
        ))
    }

    /// LRS transmit steering vector `b(φ_L, η_L)`.
    pub fn lrs_steering(&self) -> CVector {
        steering_radar(&self.lrs_spec, &self.angles_l, RadarRole::Lrs, RadarSense::Transmit)
            .into_inner()
    }

    /// URS transmit steering vector `c(φ_U, η_U)`.
    pub fn urs_steering(&self) -> CVector {
        steering_radar(&self.urs_spec, &self.angles_u, RadarRole::Urs, RadarSense::Transmit)
            .into_inner()
    }
}

/// One-way free-space amplitude `λ / (4π d)`.
///
/// This is the repository's convention for `ᾱ`; it reproduces the usual
/// Friis loss for a single traversal.
pub fn path_gain(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(invalid("distance", format!("must be positive, got {distance}")));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(invalid("wavelength", format!("must be positive, got {wavelength}")));
    }
    Ok(wavelength / (4.0 * PI * distance))
}

/// Draws the independent reference phases `(ν_l, ν_u)`, each uniform on `[0, 2π)`.
pub fn sample_reference_phases<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let nu_l = rng.random_range(0.0..2.0 * PI);
    let nu_u = rng.random_range(0.0..2.0 * PI);
    (nu_l, nu_u)
}

/// The four LoS channel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Surface → LRS, `M × N`.
    pub h_li: CMatrix,
    /// LRS → surface, `N × M`.
    pub h_il: CMatrix,
    /// Surface → URS, `D × N`.
    pub h_ui: CMatrix,
    /// URS → surface, `N × D`.
    pub h_iu: CMatrix,
}

/// Builds `H_LI, H_IL, H_UI, H_IU` as scaled outer products of steering vectors.
pub fn build_channels(geom: &ScenarioGeometry, gains: (LinkGain, LinkGain)) -> Result<ChannelSet> {
    geom.validate()?;
    let (gl, gu) = gains;
    let irs = &geom.irs_spec;

    let b_tx = steering_radar(&geom.lrs_spec, &geom.angles_l, RadarRole::Lrs, RadarSense::Transmit);
    let b_rx = steering_radar(&geom.lrs_spec, &geom.angles_l, RadarRole::Lrs, RadarSense::Receive);
    let c_tx = steering_radar(&geom.urs_spec, &geom.angles_u, RadarRole::Urs, RadarSense::Transmit);
    let c_rx = steering_radar(&geom.urs_spec, &geom.angles_u, RadarRole::Urs, RadarSense::Receive);
    let al_in = steering_irs(irs, &geom.angles_l, IrsSense::Incident);
    let al_out = steering_irs(irs, &geom.angles_l, IrsSense::Reflected);
    let au_in = steering_irs(irs, &geom.angles_u, IrsSense::Incident);
    let au_out = steering_irs(irs, &geom.angles_u, IrsSense::Reflected);

    let outer = |alpha: Complex64, left: &CVector, right: &CVector| -> CMatrix {
        left * right.adjoint() * alpha
    };

    let set = ChannelSet {
        h_li: outer(gl.complex(), b_rx.entries(), al_out.entries()),
        h_il: outer(gl.complex(), al_in.entries(), b_tx.entries()),
        h_ui: outer(gu.complex(), c_rx.entries(), au_out.entries()),
        h_iu: outer(gu.complex(), au_in.entries(), c_tx.entries()),
    };
    set.check_shapes(geom)?;
    Ok(set)
}

impl ChannelSet {
    fn check_shapes(&self, geom: &ScenarioGeometry) -> Result<()> {
        let m = geom.lrs_spec.len();
        let d = geom.urs_spec.len();
        let n = geom.irs_spec.len();
        let checks = [
            ("h_li rows", self.h_li.nrows(), m),
            ("h_li cols", self.h_li.ncols(), n),
            ("h_il rows", self.h_il.nrows(), n),
            ("h_il cols", self.h_il.ncols(), m),
            ("h_ui rows", self.h_ui.nrows(), d),
            ("h_ui cols", self.h_ui.ncols(), n),
            ("h_iu rows", self.h_iu.nrows(), n),
            ("h_iu cols", self.h_iu.ncols(), d),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}
