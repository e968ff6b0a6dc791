//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Solves `max cᵀx  s.t.  Ax ≤ b, 0 ≤ x ≤ u` with `b ≥ 0`, so the all-slack
//! basis is feasible and no phase one is needed. Upper bounds are handled
//! implicitly: a nonbasic variable sits at either bound and may flip between
//! them without a basis change. Meant for small problems (tie repair,
//! oracles in tests); the tableau is kept explicitly.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// A bounded-variable LP in inequality form.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedLp {
    pub objective: Vec<f64>,
    /// Constraint matrix, one row per constraint.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Upper bounds; `f64::INFINITY` for none.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Nonnegative multipliers of the `Ax ≤ b` rows.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Lower,
    Upper,
    Basic,
}

/// Solves `lp` to optimality.
pub fn solve_bounded_lp(lp: &BoundedLp) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m || lp.upper.len() != n || lp.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Internal("inconsistent LP dimensions".into()));
    }
    if lp.rhs.iter().any(|&b| b < 0.0 || !b.is_finite()) {
        return Err(Error::Domain("LP right-hand side must be finite and nonnegative".into()));
    }
    if lp.upper.iter().any(|&u| u < 0.0) {
        return Err(Error::Domain("LP upper bounds must be nonnegative".into()));
    }

    let width = n + m;
    let scale = lp
        .objective
        .iter()
        .fold(1.0f64, |acc, c| acc.max(c.abs()));
    let rc_tol = 1e-11 * scale;

    // Tableau B⁻¹[A I], basic values, reduced costs.
    let mut tab = vec![0.0; m * width];
    for (i, row) in lp.rows.iter().enumerate() {
        tab[i * width..i * width + n].copy_from_slice(row);
        tab[i * width + n + i] = 1.0;
    }
    let mut beta = lp.rhs.clone();
    let mut reduced: Vec<f64> = lp.objective.iter().copied().chain((0..m).map(|_| 0.0)).collect();
    let mut basis: Vec<usize> = (n..width).collect();
    let mut status = vec![Status::Lower; width];
    for s in status.iter_mut().skip(n) {
        *s = Status::Basic;
    }
    let upper = |j: usize| if j < n { lp.upper[j] } else { f64::INFINITY };

    let mut pivots = 0;
    loop {
        let entering = (0..width).find(|&j| match status[j] {
            Status::Lower => reduced[j] > rc_tol && upper(j) > 0.0,
            Status::Upper => reduced[j] < -rc_tol,
            Status::Basic => false,
        });
        let Some(j) = entering else { break };
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::NonConvergence {
                iterations: pivots,
                residual: reduced[j].abs(),
            });
        }
        let dir = if status[j] == Status::Lower { 1.0 } else { -1.0 };

        // Ratio test, ties broken by smallest variable index.
        let mut best: Option<(f64, usize, usize, Status)> = None;
        for r in 0..m {
            let rate = -dir * tab[r * width + j];
            let var = basis[r];
            let (limit, to) = if rate < -PIVOT_TOL {
                (beta[r].max(0.0) / -rate, Status::Lower)
            } else if rate > PIVOT_TOL && upper(var).is_finite() {
                ((upper(var) - beta[r]).max(0.0) / rate, Status::Upper)
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((b, _, bvar, _)) => {
                    limit < b - 1e-14 * b.max(1.0) || (limit <= b + 1e-14 * b.max(1.0) && var < bvar)
                }
            };
            if better {
                best = Some((limit, r, var, to));
            }
        }
        let flip = upper(j);
        match best {
            Some((t, r, _, to)) if t < flip => {
                for (i, b) in beta.iter_mut().enumerate() {
                    *b -= dir * t * tab[i * width + j];
                }
                let entering_value = if dir > 0.0 { t } else { upper(j) - t };
                let leaving = basis[r];
                status[leaving] = to;
                status[j] = Status::Basic;
                basis[r] = j;
                beta[r] = entering_value;
                let piv = tab[r * width + j];
                for k in 0..width {
                    tab[r * width + k] /= piv;
                }
                for i in 0..m {
                    if i == r {
                        continue;
                    }
                    let f = tab[i * width + j];
                    if f != 0.0 {
                        for k in 0..width {
                            tab[i * width + k] -= f * tab[r * width + k];
                        }
                    }
                }
                let f = reduced[j];
                for k in 0..width {
                    reduced[k] -= f * tab[r * width + k];
                }
            }
            _ => {
                if !flip.is_finite() {
                    return Err(Error::Domain("LP is unbounded".into()));
                }
                for (i, b) in beta.iter_mut().enumerate() {
                    *b -= dir * flip * tab[i * width + j];
                }
                status[j] = if dir > 0.0 { Status::Upper } else { Status::Lower };
            }
        }
    }

    let mut x = vec![0.0; n];
    for (j, xj) in x.iter_mut().enumerate() {
        if status[j] == Status::Upper {
            *xj = lp.upper[j];
        }
    }
    for (r, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = beta[r].clamp(0.0, lp.upper[var]);
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    let duals = (0..m).map(|i| (-reduced[n + i]).max(0.0)).collect();
    Ok(LpSolution {
        x,
        value,
        duals,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack(rewards: &[f64], cap: f64) -> BoundedLp {
        BoundedLp {
            objective: rewards.to_vec(),
            rows: vec![vec![1.0; rewards.len()]],
            rhs: vec![cap],
            upper: vec![1.0; rewards.len()],
        }
    }

    #[test]
    fn fractional_knapsack() {
        let sol = solve_bounded_lp(&knapsack(&[0.9, 0.2, 0.7], 2.0)).unwrap();
        assert!((sol.value - 1.6).abs() < 1e-12);
        assert_eq!(sol.x, vec![1.0, 0.0, 1.0]);
        assert!(sol.duals[0] >= 0.2 - 1e-12 && sol.duals[0] <= 0.7 + 1e-12);

        let sol = solve_bounded_lp(&knapsack(&[0.9, 0.2, 0.7], 1.5)).unwrap();
        assert!((sol.value - 1.25).abs() < 1e-12);
        assert!((sol.x[2] - 0.5).abs() < 1e-12);
        assert!((sol.duals[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rejected() {
        let mut lp = knapsack(&[1.0], 1.0);
        lp.rhs[0] = -1.0;
        assert!(solve_bounded_lp(&lp).is_err());
    }

    #[test]
    fn unbounded_detected() {
        let lp = BoundedLp {
            objective: vec![1.0, 1.0],
            rows: vec![vec![1.0, -1.0]],
            rhs: vec![1.0],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        assert!(matches!(solve_bounded_lp(&lp), Err(Error::Domain(_))));
    }

    /// Certificate check: primal feasibility, dual feasibility and equal objectives.
    fn certify(lp: &BoundedLp, sol: &LpSolution) {
        let n = lp.objective.len();
        for (row, b) in lp.rows.iter().zip(&lp.rhs) {
            let lhs: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
            assert!(lhs <= b + 1e-9);
        }
        // Dual of max{cx : Ax ≤ b, 0 ≤ x ≤ u} is min{by + u·(c − Aᵀy)⁺ : y ≥ 0}.
        let mut dual = lp.rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum::<f64>();
        for j in 0..n {
            let rc = lp.objective[j]
                - lp.rows.iter().zip(&sol.duals).map(|(r, y)| r[j] * y).sum::<f64>();
            dual += lp.upper[j] * rc.max(0.0);
        }
        assert!((dual - sol.value).abs() <= 1e-9 * sol.value.abs().max(1.0));
    }

    #[test]
    fn random_lps_satisfy_duality_certificate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let m = rng.gen_range(1..4);
            let n = rng.gen_range(1..10);
            let lp = BoundedLp {
                objective: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
                rows: (0..m)
                    .map(|_| (0..n).map(|_| f64::from(rng.gen_range(0u8..3))).collect())
                    .collect(),
                rhs: (0..m).map(|_| f64::from(rng.gen_range(0u8..6))).collect(),
                upper: vec![1.0; n],
            };
            let sol = solve_bounded_lp(&lp).unwrap();
            certify(&lp, &sol);
        }
    }
}
