//! Convex proximal step used by the θ-update:
//!
//! `min ½‖θ − a‖²  s.t.  Σ|hᵢᴴθ|² ≤ γ,  |θ_n| ≤ 1`.
//!
//! The quadratic cap is handled by a scalar multiplier `κ ≥ 0` found by a
//! safeguarded root search on `κ ↦ Σ|hᵢᴴθ(κ)|² − γ`. For fixed `κ` the
//! penalized problem `min ½‖θ − a‖² + κ‖Bθ‖²` over the unit disks is solved
//! through its low-dimensional dual (one complex variable per row of `B`)
//! with a semismooth Newton method; the primal point is a radial clip.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::geometry::CVector;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxSolution {
    pub theta: CVector,
    /// Multiplier of the quadratic cap in units of the `½‖θ − a‖²` objective.
    pub kappa: f64,
    pub constraint: f64,
    /// Max of stationarity, primal violation and complementarity residuals.
    pub kkt_residual: f64,
}

pub(crate) fn clip(z: Complex64) -> Complex64 {
    let m = z.norm();
    if m > 1.0 {
        z / m
    } else {
        z
    }
}

/// `‖v‖∞` by element modulus.
pub(crate) fn max_abs(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn clip_all(v: &CVector) -> CVector {
    v.map(clip)
}

fn constraint_of(rows: &[&CVector], theta: &CVector) -> f64 {
    rows.iter().map(|h| h.dotc(theta).norm_sqr()).sum()
}

/// `Bᴴy = Σᵢ yᵢ hᵢ`.
fn adjoint_apply(rows: &[&CVector], y: &[Complex64], n: usize) -> CVector {
    let mut out = CVector::zeros(n);
    for (h, &yi) in rows.iter().zip(y) {
        out.axpy(yi, h, Complex64::new(1.0, 0.0));
    }
    out
}

fn forward_apply(rows: &[&CVector], theta: &CVector) -> Vec<Complex64> {
    rows.iter().map(|h| h.dotc(theta)).collect()
}

struct Penalized<'a> {
    a: &'a CVector,
    rows: &'a [&'a CVector],
    kappa: f64,
}

impl Penalized<'_> {
    fn pre_clip(&self, y: &[Complex64]) -> CVector {
        let s = adjoint_apply(self.rows, y, self.a.len());
        self.a - s * Complex64::new(2.0 * self.kappa, 0.0)
    }

    /// Dual objective, residual `F(y) = y − Bθ(y)` and the primal point.
    fn evaluate(&self, y: &[Complex64]) -> (f64, Vec<Complex64>, CVector, CVector) {
        let x = self.pre_clip(y);
        let theta = clip_all(&x);
        let b_theta = forward_apply(self.rows, &theta);
        let mut dual = 0.5 * (&theta - self.a).norm_squared();
        for (yi, bi) in y.iter().zip(&b_theta) {
            dual += 2.0 * self.kappa * (yi.conj() * bi).re - self.kappa * yi.norm_sqr();
        }
        let f: Vec<Complex64> = y.iter().zip(&b_theta).map(|(yi, bi)| yi - bi).collect();
        (dual, f, theta, x)
    }

    /// Real `2r × 2r` generalized Jacobian `I + 2κ B ∂clip(x) Bᴴ`.
    fn jacobian(&self, x: &CVector) -> DMatrix<f64> {
        let r = self.rows.len();
        let mut jac = DMatrix::<f64>::identity(2 * r, 2 * r);
        for col in 0..2 * r {
            let mut delta = vec![Complex64::new(0.0, 0.0); r];
            delta[col / 2] = if col % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            let t = adjoint_apply(self.rows, &delta, x.len());
            let dp = CVector::from_iterator(
                x.len(),
                x.iter().zip(t.iter()).map(|(&xn, &tn)| {
                    let m = xn.norm();
                    if m > 1.0 {
                        let unit = xn / m;
                        (tn - unit * (unit.conj() * tn).re) / m
                    } else {
                        tn
                    }
                }),
            );
            let image = forward_apply(self.rows, &dp);
            for (i, z) in image.iter().enumerate() {
                jac[(2 * i, col)] += 2.0 * self.kappa * z.re;
                jac[(2 * i + 1, col)] += 2.0 * self.kappa * z.im;
            }
        }
        jac
    }

    /// Solves the fixed-`κ` problem starting from the dual guess `y`.
    fn solve(&self, y: &mut Vec<Complex64>) -> CVector {
        if self.kappa == 0.0 {
            let theta = clip_all(self.a);
            *y = forward_apply(self.rows, &theta);
            return theta;
        }
        let (mut dual, mut f, mut theta, mut x) = self.evaluate(y);
        let mut best_norm = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..100 {
            let f_norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let y_norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if f_norm <= 1e-13 * (1.0 + y_norm) {
                break;
            }
            if f_norm < 0.5 * best_norm {
                best_norm = f_norm;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 3 && f_norm <= 1e-10 * (1.0 + y_norm) {
                    break;
                }
            }
            let jac = self.jacobian(&x);
            let rhs = DVector::from_iterator(2 * f.len(), f.iter().flat_map(|z| [-z.re, -z.im]));
            let step = match jac.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match jac.lu().solve(&rhs) {
                    Some(s) => s,
                    None => rhs.clone(),
                },
            };
            let d: Vec<Complex64> = (0..f.len())
                .map(|i| Complex64::new(step[2 * i], step[2 * i + 1]))
                .collect();
            // ∇G = −2κF, so the directional slope is −2κ⟨F, d⟩.
            let slope = -2.0 * self.kappa * f.iter().zip(&d).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<Complex64> = y.iter().zip(&d).map(|(yi, di)| yi + di * t).collect();
                let (g, ft, th, xt) = self.evaluate(&trial);
                if g >= dual + 1e-4 * t * slope || t < 1e-10 {
                    *y = trial;
                    dual = g;
                    f = ft;
                    theta = th;
                    x = xt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        theta
    }
}

fn kkt_residual(a: &CVector, rows: &[&CVector], gamma: f64, theta: &CVector, kappa: f64, c: f64) -> f64 {
    let y = forward_apply(rows, theta);
    let x = a - adjoint_apply(rows, &y, a.len()) * Complex64::new(2.0 * kappa, 0.0);
    let stationarity = max_abs(&(theta - clip_all(&x)));
    let violation = (c - gamma).max(0.0) / gamma;
    let slack = if kappa > 0.0 { (gamma - c).abs() / gamma } else { 0.0 };
    stationarity.max(violation).max(slack)
}

/// Projection of `a` onto `{θ : Σ|hᵢᴴθ|² ≤ γ, |θ_n| ≤ 1}`.
///
/// `rows` holds the nonzero constraint vectors `hᵢ`; with no rows this is a
/// per-element radial clip.
pub fn solve_constrained_prox(a: &CVector, rows: &[&CVector], gamma: f64) -> ProxSolution {
    solve_constrained_prox_from(a, rows, gamma, 0.0)
}

/// As [`solve_constrained_prox`], starting the multiplier search at
/// `kappa_hint` (ignored when not positive).
pub fn solve_constrained_prox_from(a: &CVector, rows: &[&CVector], gamma: f64, kappa_hint: f64) -> ProxSolution {
    let clipped = clip_all(a);
    let c0 = constraint_of(rows, &clipped);
    if rows.is_empty() || c0 <= gamma {
        return ProxSolution {
            kkt_residual: kkt_residual(a, rows, gamma, &clipped, 0.0, c0),
            theta: clipped,
            kappa: 0.0,
            constraint: c0,
        };
    }

    let mut y = forward_apply(rows, &clipped);
    let eval = |kappa: f64, y: &mut Vec<Complex64>| {
        let theta = Penalized { a, rows, kappa }.solve(y);
        let c = constraint_of(rows, &theta);
        (theta, c)
    };

    // Bracket in κ: c(κ_lo) > γ ≥ c(κ_hi).
    let hinted = kappa_hint > 0.0 && kappa_hint.is_finite();
    let growth: f64 = if hinted { 1.5 } else { 4.0 };
    let mut k_hi = if hinted { kappa_hint } else { 1.0 };
    let (mut th_hi, mut c_hi) = eval(k_hi, &mut y);
    let mut k_lo = k_hi;
    let c_lo;
    if c_hi > gamma {
        let mut last = c_hi;
        for _ in 0..400 {
            k_hi *= growth;
            (th_hi, c_hi) = eval(k_hi, &mut y);
            if c_hi <= gamma {
                break;
            }
            k_lo = k_hi;
            last = c_hi;
        }
        c_lo = last;
    } else {
        let mut y_lo = y.clone();
        c_lo = loop {
            k_lo /= growth;
            if k_lo < 1e-18 {
                k_lo = 0.0;
                break c0;
            }
            let (th, c) = eval(k_lo, &mut y_lo);
            if c > gamma {
                break c;
            }
            k_hi = k_lo;
            th_hi = th;
            c_hi = c;
            y = y_lo.clone();
        };
    }

    // Illinois regula falsi on s = ln κ (bisection in κ when κ_lo = 0).
    let (mut f_lo, mut f_hi) = (c_lo - gamma, c_hi - gamma);
    let mut side = 0i8;
    for _ in 0..200 {
        if c_hi >= gamma * (1.0 - 1e-9) || k_hi - k_lo <= 1e-12 * k_hi {
            break;
        }
        let k_mid = if k_lo == 0.0 {
            0.5 * k_hi
        } else {
            let (s_lo, s_hi) = (k_lo.ln(), k_hi.ln());
            let mut s = (s_lo * f_hi - s_hi * f_lo) / (f_hi - f_lo);
            if !(s > s_lo && s < s_hi) {
                s = 0.5 * (s_lo + s_hi);
            }
            s.exp()
        };
        let (th, c) = eval(k_mid, &mut y);
        if c <= gamma {
            k_hi = k_mid;
            th_hi = th;
            c_hi = c;
            f_hi = c - gamma;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            k_lo = k_mid;
            f_lo = c - gamma;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    let c = constraint_of(rows, &th_hi);
    ProxSolution {
        kkt_residual: kkt_residual(a, rows, gamma, &th_hi, k_hi, c),
        theta: th_hi,
        kappa: k_hi,
        constraint: c,
    }
}

/// Fixed-multiplier variant: `min ½‖θ − a‖² + κ Σ|hᵢᴴθ|²` over the unit disks.
pub fn solve_penalized_prox(a: &CVector, rows: &[&CVector], kappa: f64) -> CVector {
    if rows.is_empty() {
        return clip_all(a);
    }
    let mut y = forward_apply(rows, &clip_all(a));
    Penalized { a, rows, kappa }.solve(&mut y)
}
