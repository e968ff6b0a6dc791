//! Bounded-variable simplex for packing LPs whose columns come in groups.
//!
//! The hindsight relaxation `max Σ r_τ x_τ  s.t.  Σ a_τ x_τ ≤ c, x ∈ [0,1]`
//! has one column per period but only as many distinct columns as query
//! types. Items sharing a column are interchangeable up to reward, so at
//! every basis the items held at their upper bound form a reward-sorted
//! prefix of their group, and at most one item per group is basic (two
//! basic copies of a column would make the basis singular). Pricing therefore
//! looks only at the head and tail of each group's prefix, and runs of bound
//! flips are taken in one step, which keeps an iteration at `O(m³ + m·n)`
//! regardless of the number of periods.

use super::linalg::{invert, mat_t_vec, mat_vec};
use crate::error::{Error, Result};

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 50;
const PIVOT_TOL: f64 = 1e-12;

/// Items sharing one consumption column, rewards sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemGroup {
    pub column: Vec<f64>,
    pub rewards: Vec<f64>,
}

/// Optimal basis of a grouped packing LP.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSolution {
    /// Number of leading items of each group at value one.
    pub full: Vec<usize>,
    /// Value of the item right after the prefix (zero when nonbasic).
    pub partial: Vec<f64>,
    /// Optimal resource prices.
    pub duals: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasicVar {
    Slack(usize),
    Item(usize),
}

impl BasicVar {
    fn index(self, m: usize) -> usize {
        match self {
            BasicVar::Slack(i) => i,
            BasicVar::Item(g) => m + g,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Entering {
    Slack(usize),
    /// Group, direction (+1 extends the prefix, −1 shrinks it), favourable run length.
    Group(usize, f64, usize),
}

/// Solves the grouped packing LP with capacities `capacity ≥ 0`.
pub fn solve_grouped_lp(groups: &[ItemGroup], capacity: &[f64]) -> Result<GroupedSolution> {
    let m = capacity.len();
    let n = groups.len();
    if groups.iter().any(|g| g.column.len() != m) {
        return Err(Error::Internal("group column length differs from resource count".into()));
    }
    if capacity.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Domain("capacities must be finite and nonnegative".into()));
    }
    let r_max = groups
        .iter()
        .flat_map(|g| g.rewards.first())
        .fold(1.0f64, |a, &r| a.max(r.abs()));
    let rc_tol = 1e-11 * r_max;

    let mut full = vec![0usize; n];
    // Columns that consume nothing are accepted outright.
    for (g, grp) in groups.iter().enumerate() {
        if grp.column.iter().all(|&a| a == 0.0) {
            full[g] = grp.rewards.iter().take_while(|&&r| r > 0.0).count();
        }
    }
    let active: Vec<bool> = groups
        .iter()
        .map(|g| g.column.iter().any(|&a| a != 0.0))
        .collect();

    let mut basis: Vec<BasicVar> = (0..m).map(BasicVar::Slack).collect();
    let mut group_row: Vec<Option<usize>> = vec![None; n];
    let mut slack_row: Vec<Option<usize>> = (0..m).map(Some).collect();

    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut pi = vec![0.0; m];
    let mut dirty = false;
    let mut degenerate = 0usize;
    let mut iterations = 0usize;
    let max_iterations = 20 * groups.iter().map(|g| g.rewards.len()).sum::<usize>() + 10_000;

    loop {
        iterations += 1;
        if iterations > max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: f64::NAN,
            });
        }
        if dirty {
            let mut bmat = vec![0.0; m * m];
            for (col, var) in basis.iter().enumerate() {
                match *var {
                    BasicVar::Slack(i) => bmat[i * m + col] = 1.0,
                    BasicVar::Item(g) => {
                        for i in 0..m {
                            bmat[i * m + col] = groups[g].column[i];
                        }
                    }
                }
            }
            binv = invert(&bmat, m)
                .ok_or_else(|| Error::Internal("singular basis in grouped simplex".into()))?;
            let cb: Vec<f64> = basis
                .iter()
                .map(|v| match *v {
                    BasicVar::Slack(_) => 0.0,
                    BasicVar::Item(g) => groups[g].rewards[full[g]],
                })
                .collect();
            pi = mat_t_vec(&binv, &cb, m);
            dirty = false;
        }
        let mut rhs = capacity.to_vec();
        for (g, grp) in groups.iter().enumerate() {
            if full[g] > 0 {
                for i in 0..m {
                    rhs[i] -= full[g] as f64 * grp.column[i];
                }
            }
        }
        let xb = mat_vec(&binv, &rhs, m);

        // Pricing.
        let bland = degenerate >= DEGENERATE_STREAK;
        let mut choice: Option<(Entering, f64, usize)> = None;
        let mut consider = |cand: Entering, score: f64, index: usize| {
            let better = match choice {
                None => true,
                Some((_, s, idx)) => {
                    if bland {
                        index < idx
                    } else {
                        score > s
                    }
                }
            };
            if better {
                choice = Some((cand, score, index));
            }
        };
        for i in 0..m {
            if slack_row[i].is_none() && pi[i] < -rc_tol {
                consider(Entering::Slack(i), -pi[i], i);
            }
        }
        for g in 0..n {
            if !active[g] || group_row[g].is_some() {
                continue;
            }
            let grp = &groups[g];
            let price: f64 = grp.column.iter().zip(&pi).map(|(a, p)| a * p).sum();
            let k = full[g];
            if k < grp.rewards.len() && grp.rewards[k] - price > rc_tol {
                let run = grp.rewards[k..]
                    .iter()
                    .take_while(|&&r| r - price > rc_tol)
                    .count();
                consider(Entering::Group(g, 1.0, run), grp.rewards[k] - price, m + g);
            } else if k > 0 && grp.rewards[k - 1] - price < -rc_tol {
                let run = grp.rewards[..k]
                    .iter()
                    .rev()
                    .take_while(|&&r| r - price < -rc_tol)
                    .count();
                consider(Entering::Group(g, -1.0, run), price - grp.rewards[k - 1], m + g);
            }
        }
        let Some((entering, _, _)) = choice else { break };

        let (column, dir, cap): (Vec<f64>, f64, f64) = match entering {
            Entering::Slack(i) => {
                let mut e = vec![0.0; m];
                e[i] = 1.0;
                (e, 1.0, f64::INFINITY)
            }
            Entering::Group(g, dir, run) => (groups[g].column.clone(), dir, run as f64),
        };
        let d = mat_vec(&binv, &column, m);

        // Ratio test per unit of entering movement.
        let mut best: Option<(f64, usize, bool)> = None;
        for r in 0..m {
            let rate = -dir * d[r];
            let (limit, to_upper) = if rate < -PIVOT_TOL {
                (xb[r].max(0.0) / -rate, false)
            } else if rate > PIVOT_TOL && matches!(basis[r], BasicVar::Item(_)) {
                ((1.0 - xb[r]).max(0.0) / rate, true)
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((b, br, _)) => {
                    let slack = 1e-13 * b.max(1.0);
                    limit < b - slack
                        || (limit <= b + slack && basis[r].index(m) < basis[br].index(m))
                }
            };
            if better {
                best = Some((limit, r, to_upper));
            }
        }

        match best {
            Some((t, r, to_upper)) if t < cap => {
                degenerate = if t <= 0.0 { degenerate + 1 } else { 0 };
                let new_var = match entering {
                    Entering::Slack(i) => {
                        slack_row[i] = Some(r);
                        BasicVar::Slack(i)
                    }
                    Entering::Group(g, dir, _) => {
                        let flips = (t.floor() as usize).min(cap as usize - 1);
                        if dir > 0.0 {
                            full[g] += flips;
                        } else {
                            full[g] -= flips + 1;
                        }
                        group_row[g] = Some(r);
                        BasicVar::Item(g)
                    }
                };
                match basis[r] {
                    BasicVar::Slack(i) => slack_row[i] = None,
                    BasicVar::Item(h) => {
                        group_row[h] = None;
                        if to_upper {
                            full[h] += 1;
                        }
                    }
                }
                basis[r] = new_var;
                dirty = true;
            }
            _ => {
                let Entering::Group(g, dir, run) = entering else {
                    return Err(Error::Domain("grouped LP is unbounded".into()));
                };
                degenerate = 0;
                if dir > 0.0 {
                    full[g] += run;
                } else {
                    full[g] -= run;
                }
            }
        }
    }

    // Final primal from the optimal basis.
    let mut rhs = capacity.to_vec();
    for (g, grp) in groups.iter().enumerate() {
        for i in 0..m {
            rhs[i] -= full[g] as f64 * grp.column[i];
        }
    }
    let xb = mat_vec(&binv, &rhs, m);
    let mut partial = vec![0.0; n];
    for (r, var) in basis.iter().enumerate() {
        if let BasicVar::Item(g) = *var {
            partial[g] = xb[r].clamp(0.0, 1.0);
        }
    }
    let value = groups
        .iter()
        .enumerate()
        .map(|(g, grp)| {
            let head: f64 = grp.rewards[..full[g]].iter().sum();
            let frac = if partial[g] > 0.0 {
                partial[g] * grp.rewards[full[g]]
            } else {
                0.0
            };
            head + frac
        })
        .sum();
    let duals = pi.iter().map(|&p| p.max(0.0)).collect();
    Ok(GroupedSolution {
        full,
        partial,
        duals,
        value,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::simplex::{solve_bounded_lp, BoundedLp};
    use rand::{Rng, SeedableRng};

    fn single(rewards: &[f64]) -> Vec<ItemGroup> {
        let mut r = rewards.to_vec();
        r.sort_by(|a, b| b.total_cmp(a));
        vec![ItemGroup {
            column: vec![1.0],
            rewards: r,
        }]
    }

    #[test]
    fn top_k_selection() {
        let sol = solve_grouped_lp(&single(&[0.9, 0.2, 0.7]), &[2.0]).unwrap();
        assert_eq!(sol.full, vec![2]);
        assert!((sol.value - 1.6).abs() < 1e-15);
        assert!(sol.duals[0] >= 0.2 && sol.duals[0] <= 0.7);

        let sol = solve_grouped_lp(&single(&[0.9, 0.2, 0.7]), &[1.5]).unwrap();
        assert_eq!(sol.full, vec![1]);
        assert!((sol.partial[0] - 0.5).abs() < 1e-15);
        assert!((sol.value - 1.25).abs() < 1e-15);
        assert!((sol.duals[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn slack_capacity_prices_zero() {
        let sol = solve_grouped_lp(&single(&[0.9, 0.2, 0.7]), &[10.0]).unwrap();
        assert_eq!(sol.full, vec![3]);
        assert_eq!(sol.duals, vec![0.0]);
    }

    #[test]
    fn zero_capacity() {
        let sol = solve_grouped_lp(&single(&[0.9, 0.2]), &[0.0]).unwrap();
        assert_eq!(sol.value, 0.0);
        assert!(sol.duals[0] >= 0.9 - 1e-12);
    }

    /// Expands the groups to one column per item and solves with the dense simplex.
    fn dense_value(groups: &[ItemGroup], cap: &[f64]) -> f64 {
        let mut objective = Vec::new();
        let mut cols = Vec::new();
        for g in groups {
            for &r in &g.rewards {
                objective.push(r);
                cols.push(g.column.clone());
            }
        }
        let rows = (0..cap.len())
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        let n = objective.len();
        solve_bounded_lp(&BoundedLp {
            objective,
            rows,
            rhs: cap.to_vec(),
            upper: vec![1.0; n],
        })
        .unwrap()
        .value
    }

    #[test]
    fn agrees_with_dense_simplex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..400 {
            let m = rng.gen_range(1..4);
            let n = rng.gen_range(1..5);
            let groups: Vec<ItemGroup> = (0..n)
                .map(|_| {
                    let column = (0..m).map(|_| f64::from(rng.gen_range(0u8..3))).collect();
                    let len = rng.gen_range(0..8);
                    let mut rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..1.0)).collect();
                    rewards.sort_by(|a, b| b.total_cmp(a));
                    ItemGroup { column, rewards }
                })
                .collect();
            let cap: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..6.0)).collect();
            let sol = solve_grouped_lp(&groups, &cap).unwrap();
            let oracle = dense_value(&groups, &cap);
            assert!((sol.value - oracle).abs() <= 1e-9, "{} vs {}", sol.value, oracle);
        }
    }

    #[test]
    fn many_items_with_ties_terminate() {
        // Integer rewards create many exact ties and degenerate vertices.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cols = [vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let groups: Vec<ItemGroup> = cols
            .iter()
            .map(|c| {
                let mut rewards: Vec<f64> =
                    (0..3000).map(|_| f64::from(rng.gen_range(0u8..4))).collect();
                rewards.sort_by(|a, b| b.total_cmp(a));
                ItemGroup {
                    column: c.clone(),
                    rewards,
                }
            })
            .collect();
        let sol = solve_grouped_lp(&groups, &[1000.0, 1000.0, 1000.0]).unwrap();
        assert!(sol.value > 0.0);
    }
}
