use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CVector, Composites};

/// The four reflection design problems sharing one quadratic structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemCase {
    /// LRS-only segment: maximize the LRS echo, cap LRS → URS leakage.
    P1,
    /// URS-only segment: maximize the URS → LRS bistatic echo, cap URS → URS.
    P2,
    /// Overlapped segment.
    P3,
    /// One fixed reflection for the whole PRI, weighted by pulse durations.
    P4,
}

/// `max Σ|qᵢᴴθ|²  s.t.  Σ|hᵢᴴθ|² ≤ γ, |θ_n| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub q1: CVector,
    pub q2: CVector,
    pub h1: CVector,
    pub h2: CVector,
    /// Cap on the URS power, in watts.
    pub gamma: f64,
    /// Smallest URS transmit power assumed by the cap.
    pub p_u_min: f64,
}

impl ProblemData {
    pub fn new(q1: CVector, q2: CVector, h1: CVector, h2: CVector, gamma: f64, p_u_min: f64) -> Result<Self> {
        let p = Self {
            q1,
            q2,
            h1,
            h2,
            gamma,
            p_u_min,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q1.len();
        for (what, v) in [("q2", &self.q2), ("h1", &self.h1), ("h2", &self.h2)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if n == 0 {
            return Err(invalid("q1", "problem must have at least one element"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if self.q1.norm() == 0.0 && self.q2.norm() == 0.0 {
            return Err(Error::Degenerate("objective vectors are both zero".into()));
        }
        let finite = |v: &CVector| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if ![&self.q1, &self.q2, &self.h1, &self.h2].into_iter().all(finite) {
            return Err(invalid("q/h", "entries must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.q1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q1.is_empty()
    }

    /// `Σ|qᵢᴴθ|²`.
    pub fn objective(&self, theta: &CVector) -> f64 {
        self.q1.dotc(theta).norm_sqr() + self.q2.dotc(theta).norm_sqr()
    }

    /// `Σ|hᵢᴴθ|²`.
    pub fn constraint(&self, theta: &CVector) -> f64 {
        self.h1.dotc(theta).norm_sqr() + self.h2.dotc(theta).norm_sqr()
    }

    pub fn is_feasible(&self, theta: &CVector, rel_tol: f64) -> bool {
        self.constraint(theta) <= self.gamma * (1.0 + rel_tol)
    }

    pub fn has_constraint(&self) -> bool {
        self.h1.norm() > 0.0 || self.h2.norm() > 0.0
    }

    pub(crate) fn objective_vectors(&self) -> Vec<&CVector> {
        [&self.q1, &self.q2].into_iter().filter(|v| v.norm() > 0.0).collect()
    }

    pub(crate) fn constraint_vectors(&self) -> Vec<&CVector> {
        [&self.h1, &self.h2].into_iter().filter(|v| v.norm() > 0.0).collect()
    }

    /// Copy with `Σ‖qᵢ‖² = 1` and `Σ‖hᵢ‖² = 1` (when any `h` is nonzero),
    /// plus the factor that maps the scaled objective back to watts.
    pub(crate) fn normalized(&self) -> (ProblemData, f64) {
        let sq = self.q1.norm_squared() + self.q2.norm_squared();
        let sh = self.h1.norm_squared() + self.h2.norm_squared();
        let fq = Complex64::new(1.0 / sq.sqrt(), 0.0);
        let (fh, gamma) = if sh > 0.0 {
            (Complex64::new(1.0 / sh.sqrt(), 0.0), self.gamma / sh)
        } else {
            (Complex64::new(1.0, 0.0), self.gamma)
        };
        (
            ProblemData {
                q1: &self.q1 * fq,
                q2: &self.q2 * fq,
                h1: &self.h1 * fh,
                h2: &self.h2 * fh,
                gamma,
                p_u_min: self.p_u_min,
            },
            sq,
        )
    }
}

/// Surface powers and pulse durations that parameterize [`build_problem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemInputs {
    pub q_ls: f64,
    pub q_us: f64,
    /// LRS pulse duration `t_L` in seconds.
    pub t_l: f64,
    /// URS pulse duration `t_U` in seconds.
    pub t_u: f64,
    pub gamma: f64,
    pub p_u_min: f64,
}

pub fn build_problem(case: ProblemCase, inputs: &ProblemInputs, composites: &Composites) -> Result<ProblemData> {
    let ProblemInputs {
        q_ls,
        q_us,
        t_l,
        t_u,
        gamma,
        p_u_min,
    } = *inputs;
    if !(q_ls > 0.0 && q_ls.is_finite()) {
        return Err(invalid("q_ls", format!("must be positive, got {q_ls}")));
    }
    if !(q_us >= 0.0 && q_us.is_finite()) {
        return Err(invalid("q_us", format!("must be nonnegative, got {q_us}")));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma", format!("must be positive, got {gamma}")));
    }
    if !(p_u_min > 0.0 && p_u_min.is_finite()) {
        return Err(invalid("p_u_min", format!("must be positive, got {p_u_min}")));
    }
    if case == ProblemCase::P4 && !(t_l > 0.0 && t_u > 0.0) {
        return Err(invalid("t_l/t_u", "pulse durations must be positive"));
    }
    if case == ProblemCase::P2 && q_us == 0.0 {
        return Err(Error::Degenerate(
            "URS-only segment has no incident URS power, so its objective is identically zero".into(),
        ));
    }

    let n = composites.u.len();
    let zero = CVector::zeros(n);
    let scaled = |s: f64, v: &CVector| v * Complex64::new(s, 0.0);
    let u = &composites.u.entries;
    let v = &composites.v.entries;
    let r = &composites.r.entries;
    let g = &composites.g.entries;

    let q_lr = (q_ls * q_us).sqrt();
    let h_v = (q_ls * q_us / p_u_min).sqrt();
    let h_g = q_us / p_u_min.sqrt();

    let (q1, q2, h1, h2) = match case {
        ProblemCase::P1 => (scaled(q_ls, u), zero.clone(), scaled(h_v, v), zero),
        ProblemCase::P2 => (scaled(q_lr, r), zero.clone(), scaled(h_g, g), zero),
        ProblemCase::P3 => (scaled(q_ls, u), scaled(q_lr, r), scaled(h_g, g), scaled(h_v, v)),
        ProblemCase::P4 => (
            scaled(q_ls * t_l.sqrt(), u),
            scaled(q_lr * t_u.sqrt(), r),
            scaled(h_g, g),
            scaled(h_v, v),
        ),
    };
    ProblemData::new(q1, q2, h1, h2, gamma, p_u_min)
}
