use num_complex::Complex64;

use super::problem::ProblemData;
use crate::error::{invalid, Error, Result};
use crate::geometry::CVector;

/// Largest grid the exhaustive search will enumerate.
pub const ORACLE_BUDGET: f64 = 16_777_216.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best feasible grid point, `None` when no grid point meets the cap.
    pub theta: Option<CVector>,
    pub objective: f64,
    pub candidates: u64,
    /// Smallest constraint value seen on the grid.
    pub min_constraint: f64,
}

/// Exhaustive search over `θ_n ∈ {e^{j2πk/levels}}`.
///
/// The first element is held at phase 0 because both objective and cap are
/// invariant to a global phase; `candidates` still reports the full grid size.
pub fn brute_force_oracle(problem: &ProblemData, phase_levels: usize) -> Result<OracleResult> {
    problem.validate()?;
    if phase_levels == 0 {
        return Err(invalid("phase_levels", "must be at least 1"));
    }
    let n = problem.len();
    let total = (phase_levels as f64).powi(n as i32);
    if total > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded {
            candidates: total,
            budget: ORACLE_BUDGET,
        });
    }
    let grid: Vec<Complex64> = (0..phase_levels)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / phase_levels as f64))
        .collect();
    let vectors = [&problem.q1, &problem.q2, &problem.h1, &problem.h2];
    // Per-element contributions conj(x_n)·e^{jψ_k} for each of the four vectors.
    let table: Vec<Vec<[Complex64; 4]>> = (0..n)
        .map(|i| {
            grid.iter()
                .map(|&z| [0, 1, 2, 3].map(|v| vectors[v][i].conj() * z))
                .collect()
        })
        .collect();

    let mut digits = vec![0usize; n];
    let mut best: Option<Vec<usize>> = None;
    let mut best_obj = f64::NEG_INFINITY;
    let mut min_c = f64::INFINITY;
    let reduced = if n > 1 { phase_levels.pow(n as u32 - 1) } else { 1 };
    for _ in 0..reduced {
        let mut sums = [Complex64::new(0.0, 0.0); 4];
        for (i, &d) in digits.iter().enumerate() {
            for (s, t) in sums.iter_mut().zip(&table[i][d]) {
                *s += t;
            }
        }
        let obj = sums[0].norm_sqr() + sums[1].norm_sqr();
        let c = sums[2].norm_sqr() + sums[3].norm_sqr();
        min_c = min_c.min(c);
        if c <= problem.gamma && obj > best_obj {
            best_obj = obj;
            best = Some(digits.clone());
        }
        for d in digits.iter_mut().skip(1).rev() {
            *d += 1;
            if *d < phase_levels {
                break;
            }
            *d = 0;
        }
    }
    Ok(OracleResult {
        theta: best.map(|ds| CVector::from_iterator(n, ds.iter().map(|&d| grid[d]))),
        objective: if best_obj.is_finite() { best_obj } else { 0.0 },
        candidates: total as u64,
        min_constraint: min_c,
    })
}
