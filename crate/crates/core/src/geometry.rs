//! Array geometry: 1D/2D steering vectors for the radars and the reflecting
//! surface, and the four composite reflection-domain vectors.
//!
//! All 2D vectors are Kronecker products `d(count_a, ·) ⊗ d(count_b, ·)` in
//! x-major order: the first factor varies slowest, so element `(ia, ib)` sits
//! at flat index `ia * count_b + ib`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type CVector = DVector<Complex64>;

/// Uniform planar array: `count_a × count_b` elements with a common spacing.
///
/// For the reflecting surface `count_a = N_x`, `count_b = N_y`; for a radar
/// `count_a = count_y`, `count_b = count_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub count_a: usize,
    pub count_b: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
}

impl ArraySpec {
    pub fn new(count_a: usize, count_b: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if count_a == 0 {
            return Err(invalid("count_a", "must be at least 1"));
        }
        if count_b == 0 {
            return Err(invalid("count_b", "must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(invalid(
                "wavelength",
                format!("must be positive, got {wavelength}"),
            ));
        }
        Ok(Self {
            count_a,
            count_b,
            spacing,
            wavelength,
        })
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.count_a * self.count_b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `2π d / λ`, the phase advance per element per unit steering angle.
    pub fn phase_scale(&self) -> f64 {
        2.0 * PI * self.spacing / self.wavelength
    }
}

/// Elevation/azimuth pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub elevation: f64,
    pub azimuth: f64,
}

impl AnglePair {
    /// Validates the elevation and wraps the azimuth into `[-π, π]`.
    pub fn new(elevation: f64, azimuth: f64) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        if !elevation.is_finite() || !(-SLACK..=PI + SLACK).contains(&elevation) {
            return Err(invalid(
                "elevation",
                format!("must lie in [0, π], got {elevation}"),
            ));
        }
        if !azimuth.is_finite() {
            return Err(invalid("azimuth", "must be finite"));
        }
        Ok(Self {
            elevation: elevation.clamp(0.0, PI),
            azimuth: wrap_angle(azimuth),
        })
    }

    /// The pair `(π − φ, π + η)` used for the departing/receiving direction.
    pub fn mirrored(&self) -> Self {
        Self {
            elevation: PI - self.elevation,
            azimuth: wrap_angle(PI + self.azimuth),
        }
    }

    /// Offsets both angles; the elevation is clamped to `[0, π]`.
    pub fn perturbed(&self, d_elevation: f64, d_azimuth: f64) -> Self {
        Self {
            elevation: (self.elevation + d_elevation).clamp(0.0, PI),
            azimuth: wrap_angle(self.azimuth + d_azimuth),
        }
    }

    /// Direction cosines seen by the surface: `(sin φ cos η, sin φ sin η)`.
    pub fn surface_cosines(&self) -> (f64, f64) {
        let s = self.elevation.sin();
        (s * self.azimuth.cos(), s * self.azimuth.sin())
    }

    /// Direction cosines seen by a radar in the y-z plane: `(sin φ sin η, cos φ)`.
    pub fn radar_cosines(&self) -> (f64, f64) {
        (
            self.elevation.sin() * self.azimuth.sin(),
            self.elevation.cos(),
        )
    }
}

/// Wraps an angle into `[-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-PI..=PI).contains(&angle) {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI && angle > 0.0 {
        PI
    } else {
        wrapped
    }
}

/// A unit-modulus steering vector whose first entry is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(CVector);

impl SteeringVector {
    pub fn entries(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn kron(&self, other: &SteeringVector) -> Self {
        Self(kron(&self.0, &other.0))
    }
}

/// Whether a surface steering vector describes the arriving or departing wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrsSense {
    Incident,
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadarRole {
    Lrs,
    Urs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadarSense {
    Transmit,
    Receive,
}

/// 1D steering vector: entry `k` is `exp(j 2π (d/λ) k ζ)`.
pub fn steering_1d(count: usize, spacing: f64, wavelength: f64, zeta: f64) -> SteeringVector {
    let scale = 2.0 * PI * spacing / wavelength;
    SteeringVector(CVector::from_iterator(
        count,
        (0..count).map(|k| Complex64::from_polar(1.0, scale * k as f64 * zeta)),
    ))
}

/// Kronecker product `a ⊗ b` of two column vectors.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

fn planar(spec: &ArraySpec, zeta_a: f64, zeta_b: f64) -> SteeringVector {
    steering_1d(spec.count_a, spec.spacing, spec.wavelength, zeta_a).kron(&steering_1d(
        spec.count_b,
        spec.spacing,
        spec.wavelength,
        zeta_b,
    ))
}

/// Surface steering vector `d(N_x, ζ_x) ⊗ d(N_y, ζ_y)`.
///
/// The reflected sense evaluates the incident formula at `(π − φ, π + η)`,
/// which flips the sign of both direction cosines.
pub fn steering_irs(spec: &ArraySpec, angles: &AnglePair, sense: IrsSense) -> SteeringVector {
    let effective = match sense {
        IrsSense::Incident => *angles,
        IrsSense::Reflected => angles.mirrored(),
    };
    let (zx, zy) = effective.surface_cosines();
    planar(spec, zx, zy)
}

/// Radar steering vector `d(count_y, sin φ sin η) ⊗ d(count_z, cos φ)`.
///
/// LRS (`b`) and URS (`c`) share the same form; receive evaluates at
/// `(π − φ, π + η)`.
pub fn steering_radar(
    spec: &ArraySpec,
    angles: &AnglePair,
    _role: RadarRole,
    sense: RadarSense,
) -> SteeringVector {
    let effective = match sense {
        RadarSense::Transmit => *angles,
        RadarSense::Receive => angles.mirrored(),
    };
    let (za, zb) = effective.radar_cosines();
    planar(spec, za, zb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompositeKind {
    /// LRS → surface → LRS.
    U,
    /// LRS → surface → URS.
    V,
    /// URS → surface → LRS.
    R,
    /// URS → surface → URS.
    G,
}

impl CompositeKind {
    pub const ALL: [CompositeKind; 4] = [Self::U, Self::V, Self::R, Self::G];
}

/// Reflection-domain channel for one source → surface → destination link.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeVector {
    pub kind: CompositeKind,
    pub entries: CVector,
}

impl CompositeVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|xᴴθ|²` for a reflection coefficient vector `θ`.
    pub fn gain(&self, theta: &CVector) -> f64 {
        self.entries.dotc(theta).norm_sqr()
    }
}

/// Composite vector from its elementwise definition: the departing-direction
/// steering vector toward the destination times the conjugate arriving-direction
/// steering vector from the source.
pub fn composite_vector(
    kind: CompositeKind,
    angles_l: &AnglePair,
    angles_u: &AnglePair,
    irs: &ArraySpec,
) -> CompositeVector {
    let (dest, src) = endpoints(kind, angles_l, angles_u);
    let departing = steering_irs(irs, dest, IrsSense::Reflected);
    let arriving = steering_irs(irs, src, IrsSense::Incident);
    CompositeVector {
        kind,
        entries: departing.0.zip_map(&arriving.0, |a, b| a * b.conj()),
    }
}

/// Composite vector from its Kronecker closed form
/// `d(N_x, Δζ_x) ⊗ d(N_y, Δζ_y)` with `Δζ = −ζ_dest − ζ_src`.
pub fn composite_closed_form(
    kind: CompositeKind,
    angles_l: &AnglePair,
    angles_u: &AnglePair,
    irs: &ArraySpec,
) -> CompositeVector {
    let (dx, dy) = composite_steering_angles(kind, angles_l, angles_u);
    CompositeVector {
        kind,
        entries: planar(irs, dx, dy).0,
    }
}

/// `(Δζ_x, Δζ_y)` of a composite vector.
pub fn composite_steering_angles(
    kind: CompositeKind,
    angles_l: &AnglePair,
    angles_u: &AnglePair,
) -> (f64, f64) {
    let (dest, src) = endpoints(kind, angles_l, angles_u);
    let (dest_x, dest_y) = dest.surface_cosines();
    let (src_x, src_y) = src.surface_cosines();
    (-dest_x - src_x, -dest_y - src_y)
}

fn endpoints<'a>(
    kind: CompositeKind,
    angles_l: &'a AnglePair,
    angles_u: &'a AnglePair,
) -> (&'a AnglePair, &'a AnglePair) {
    match kind {
        CompositeKind::U => (angles_l, angles_l),
        CompositeKind::V => (angles_u, angles_l),
        CompositeKind::R => (angles_l, angles_u),
        CompositeKind::G => (angles_u, angles_u),
    }
}

/// All four composite vectors for a pair of radar directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Composites {
    pub u: CompositeVector,
    pub v: CompositeVector,
    pub r: CompositeVector,
    pub g: CompositeVector,
}

impl Composites {
    pub fn new(angles_l: &AnglePair, angles_u: &AnglePair, irs: &ArraySpec) -> Self {
        let make = |kind| composite_vector(kind, angles_l, angles_u, irs);
        Self {
            u: make(CompositeKind::U),
            v: make(CompositeKind::V),
            r: make(CompositeKind::R),
            g: make(CompositeKind::G),
        }
    }

    pub fn get(&self, kind: CompositeKind) -> &CompositeVector {
        match kind {
            CompositeKind::U => &self.u,
            CompositeKind::V => &self.v,
            CompositeKind::R => &self.r,
            CompositeKind::G => &self.g,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const WL: f64 = 0.2;

    fn close(a: &CVector, b: &CVector, tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn single_element_is_one() {
        let d = steering_1d(1, WL / 2.0, WL, 0.77);
        assert_eq!(d.entries()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn broadside_is_all_ones() {
        let d = steering_1d(4, WL / 2.0, WL, 0.0);
        assert!(d.entries().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn quarter_turn_phase() {
        let d = steering_1d(2, WL / 10.0, WL, 2.5);
        assert_eq!(d.entries()[0], Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(d.entries()[1].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.entries()[1].im, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn irs_normal_incidence_is_all_ones() {
        let spec = ArraySpec::new(4, 3, WL / 10.0, WL).unwrap();
        let a = steering_irs(&spec, &AnglePair::new(0.0, 1.3).unwrap(), IrsSense::Incident);
        assert_eq!(a.len(), 12);
        assert!(a.entries().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn irs_two_by_two_hand_evaluation() {
        let spec = ArraySpec::new(2, 2, WL / 10.0, WL).unwrap();
        let a = steering_irs(
            &spec,
            &AnglePair::new(PI / 2.0, 0.0).unwrap(),
            IrsSense::Incident,
        );
        let e = Complex64::from_polar(1.0, 0.2 * PI);
        let one = Complex64::new(1.0, 0.0);
        let expected = CVector::from_vec(vec![one, one, e, e]);
        assert!(close(a.entries(), &expected, 1e-15));
    }

    #[test]
    fn radar_broadside_is_all_ones() {
        let spec = ArraySpec::new(3, 2, WL / 2.0, WL).unwrap();
        let b = steering_radar(
            &spec,
            &AnglePair::new(PI / 2.0, 0.0).unwrap(),
            RadarRole::Lrs,
            RadarSense::Transmit,
        );
        assert!(b.entries().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn radar_hand_evaluation() {
        let spec = ArraySpec::new(2, 1, WL / 2.0, WL).unwrap();
        let b = steering_radar(
            &spec,
            &AnglePair::new(PI / 2.0, PI / 6.0).unwrap(),
            RadarRole::Urs,
            RadarSense::Transmit,
        );
        let expected = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        assert!(close(b.entries(), &expected, 1e-15));
    }

    #[test]
    fn composite_u_at_normal_incidence_is_all_ones() {
        let spec = ArraySpec::new(4, 4, WL / 10.0, WL).unwrap();
        let l = AnglePair::new(0.0, 0.4).unwrap();
        let u_ang = AnglePair::new(0.9, -1.0).unwrap();
        let u = composite_vector(CompositeKind::U, &l, &u_ang, &spec);
        assert!(u.entries.iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn composite_v_equals_u_at_coincident_angles() {
        // With the arriving factor conjugated, V collapses to U when both
        // radars share a direction.
        let spec = ArraySpec::new(5, 3, WL / 10.0, WL).unwrap();
        let a = AnglePair::new(0.7, 0.3).unwrap();
        let u = composite_vector(CompositeKind::U, &a, &a, &spec);
        let v = composite_vector(CompositeKind::V, &a, &a, &spec);
        assert!(close(&u.entries, &v.entries, 1e-13));
        let v_closed = composite_closed_form(CompositeKind::V, &a, &a, &spec);
        assert!(close(&v.entries, &v_closed.entries, 1e-12));
    }

    #[test]
    fn r_and_v_coincide() {
        let spec = ArraySpec::new(6, 2, WL / 10.0, WL).unwrap();
        let l = AnglePair::new(0.4, 0.2).unwrap();
        let u = AnglePair::new(1.1, -0.6).unwrap();
        let v = composite_vector(CompositeKind::V, &l, &u, &spec);
        let r = composite_vector(CompositeKind::R, &l, &u, &spec);
        assert!(close(&v.entries, &r.entries, 1e-12));
    }

    #[test]
    fn azimuth_wraps() {
        let a = AnglePair::new(1.0, 3.0 * PI / 2.0).unwrap();
        assert_abs_diff_eq!(a.azimuth, -PI / 2.0, epsilon = 1e-12);
        assert!(AnglePair::new(-0.1, 0.0).is_err());
        assert!(AnglePair::new(PI + 0.1, 0.0).is_err());
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), -PI);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ArraySpec::new(0, 1, 0.1, 0.2).is_err());
        assert!(ArraySpec::new(1, 0, 0.1, 0.2).is_err());
        assert!(ArraySpec::new(1, 1, 0.0, 0.2).is_err());
        assert!(ArraySpec::new(1, 1, 0.1, -0.2).is_err());
    }

    fn angles() -> impl Strategy<Value = AnglePair> {
        (0.0..PI, -PI..PI).prop_map(|(e, a)| AnglePair::new(e, a).unwrap())
    }

    fn surface() -> impl Strategy<Value = ArraySpec> {
        (1usize..7, 1usize..7, 0.05f64..0.6)
            .prop_map(|(a, b, frac)| ArraySpec::new(a, b, frac * WL, WL).unwrap())
    }

    proptest! {
        #[test]
        fn entries_have_unit_modulus(spec in surface(), l in angles(), u in angles()) {
            for sense in [IrsSense::Incident, IrsSense::Reflected] {
                let a = steering_irs(&spec, &l, sense);
                prop_assert_eq!(a.entries()[0], Complex64::new(1.0, 0.0));
                for z in a.entries().iter() {
                    prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
                }
            }
            for kind in CompositeKind::ALL {
                let c = composite_vector(kind, &l, &u, &spec);
                for z in c.entries.iter() {
                    prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn reflected_is_conjugate_of_incident(spec in surface(), a in angles()) {
            let inc = steering_irs(&spec, &a, IrsSense::Incident);
            let refl = steering_irs(&spec, &a, IrsSense::Reflected);
            prop_assert!(close(refl.entries(), inc.conj().entries(), 1e-12));
        }

        #[test]
        fn receive_is_conjugate_of_transmit(spec in surface(), a in angles()) {
            let tx = steering_radar(&spec, &a, RadarRole::Lrs, RadarSense::Transmit);
            let rx = steering_radar(&spec, &a, RadarRole::Lrs, RadarSense::Receive);
            prop_assert!(close(rx.entries(), tx.conj().entries(), 1e-12));
        }

        #[test]
        fn hadamard_matches_kronecker(spec in surface(), l in angles(), u in angles()) {
            for kind in CompositeKind::ALL {
                let had = composite_vector(kind, &l, &u, &spec);
                let kr = composite_closed_form(kind, &l, &u, &spec);
                prop_assert!(close(&had.entries, &kr.entries, 1e-10), "{:?}", kind);
            }
        }

        #[test]
        fn steering_is_periodic(count in 1usize..12, frac in 0.05f64..0.6, zeta in -2.0f64..2.0) {
            let d = frac * WL;
            let a = steering_1d(count, d, WL, zeta);
            let b = steering_1d(count, d, WL, zeta + WL / d);
            prop_assert!(close(a.entries(), b.entries(), 1e-9));
        }
    }
}
