use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    composite_steering_angles, steering_1d, AnglePair, ArraySpec, CompositeKind, CompositeVector,
};
use crate::power::ReflectionVector;

/// Reflection that coherently aligns the LRS echo: `θ = u`.
pub fn closed_form_lrs_only(u: &CompositeVector) -> ReflectionVector {
    ReflectionVector::from_phases(u.entries.iter().map(|z| z.arg()).collect())
}

/// Steering angle `ς = Δζ_g + λ i / (count · d)` of one null factor.
fn null_angle(irs: &ArraySpec, count: usize, delta: f64, index: usize) -> f64 {
    delta + irs.wavelength / (count as f64 * irs.spacing) * index as f64
}

/// URS-null reflection `d(N_x, ς_x) ⊗ d(N_y, ς_y)`; `index` is 1-based with
/// `i_x ∈ 1..N_x`, `i_y ∈ 1..N_y`.
///
/// Both factors place a grating null on the URS round trip, so the surface
/// must have at least two elements along each axis.
pub fn closed_form_urs_null(
    irs: &ArraySpec,
    angles_u: &AnglePair,
    index: (usize, usize),
) -> Result<ReflectionVector> {
    let (nx, ny) = (irs.count_a, irs.count_b);
    if nx < 2 || ny < 2 {
        return Err(Error::NoNullAvailable {
            count_x: nx,
            count_y: ny,
        });
    }
    let (ix, iy) = index;
    if !(1..nx).contains(&ix) || !(1..ny).contains(&iy) {
        return Err(Error::IndexOutOfRange {
            index_x: ix,
            index_y: iy,
            count_x: nx,
            count_y: ny,
        });
    }
    let (dx, dy) = composite_steering_angles(CompositeKind::G, angles_u, angles_u);
    let theta = steering_1d(nx, irs.spacing, irs.wavelength, null_angle(irs, nx, dx, ix)).kron(
        &steering_1d(ny, irs.spacing, irs.wavelength, null_angle(irs, ny, dy, iy)),
    );
    Ok(ReflectionVector::from_coefficients(theta.entries()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// URS-null reflection that nulls along one axis only and keeps the other
/// factor matched to the URS round trip. Works for linear surfaces.
pub fn closed_form_urs_null_single_axis(
    irs: &ArraySpec,
    angles_u: &AnglePair,
    axis: Axis,
    index: usize,
) -> Result<ReflectionVector> {
    let (nx, ny) = (irs.count_a, irs.count_b);
    let count = match axis {
        Axis::X => nx,
        Axis::Y => ny,
    };
    if count < 2 {
        return Err(Error::NoNullAvailable {
            count_x: nx,
            count_y: ny,
        });
    }
    if !(1..count).contains(&index) {
        let (index_x, index_y) = match axis {
            Axis::X => (index, 0),
            Axis::Y => (0, index),
        };
        return Err(Error::IndexOutOfRange {
            index_x,
            index_y,
            count_x: nx,
            count_y: ny,
        });
    }
    let (dx, dy) = composite_steering_angles(CompositeKind::G, angles_u, angles_u);
    let (sx, sy) = match axis {
        Axis::X => (null_angle(irs, nx, dx, index), dy),
        Axis::Y => (dx, null_angle(irs, ny, dy, index)),
    };
    let theta = steering_1d(nx, irs.spacing, irs.wavelength, sx)
        .kron(&steering_1d(ny, irs.spacing, irs.wavelength, sy));
    Ok(ReflectionVector::from_coefficients(theta.entries()))
}
