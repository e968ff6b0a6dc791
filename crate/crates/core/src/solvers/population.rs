//! Minimization of the population dual
//!
//! `L(μ) = κᵀμ + Σ_j w_j·E[(r_j − a_jᵀμ)⁺]` over the box `[0, γ]`,
//!
//! where `κ` is capacity per unit of total weight and `w_j` are mixing
//! weights. For continuous reward laws `L` is C¹ with gradient
//! `κ − Σ_j w_j a_j P(r_j > a_jᵀμ)` and generalized Hessian
//! `Σ_j w_j f_j(a_jᵀμ) a_j a_jᵀ`; point masses add kinks.
//!
//! One resource is solved by Newton steps on the monotone right derivative,
//! safeguarded by bisection and snapping onto kinks. Several resources use a
//! projected Newton method on the free coordinates, falling back to projected
//! gradient steps with a Barzilai-Borwein length whenever the reduced Hessian
//! is singular. Point masses are first smoothed into narrow uniforms whose
//! width shrinks towards zero across warm-started stages.

use super::linalg::cholesky_solve;
use crate::error::{Error, Result};
use crate::model::{DualDomain, QueryType, RewardLaw};

/// Iteration cap for each stage of the point-mass smoothing homotopy.
const SMOOTHED_STAGE_ITERATIONS: usize = 2_000;

/// Tuning knobs for the dual minimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    pub max_iterations: usize,
    /// Required projected-gradient residual at exit.
    pub residual_tol: f64,
    /// Residual at which iteration stops early.
    pub target_residual: f64,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            max_iterations: 100_000,
            residual_tol: 1e-7,
            target_residual: 1e-14,
        }
    }
}

/// A minimizer of a dual function and its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMinimum {
    pub mu: Vec<f64>,
    pub value: f64,
    /// Distance from zero to the projected (sub)differential at `mu`.
    pub residual: f64,
    pub iterations: usize,
}

/// The population dual of a weighted family of query types.
#[derive(Debug, Clone, Copy)]
pub struct PopulationDual<'a> {
    pub types: &'a [QueryType],
    pub weights: &'a [f64],
    pub kappa: &'a [f64],
    pub domain: &'a DualDomain,
}

impl PopulationDual<'_> {
    fn active(&self) -> impl Iterator<Item = (&QueryType, f64)> + '_ {
        self.types
            .iter()
            .zip(self.weights.iter().copied())
            .filter(|(_, w)| *w > 0.0)
    }

    pub fn value(&self, mu: &[f64]) -> f64 {
        self.value_smoothed(mu, 0.0)
    }

    /// Gradient using `P(r > θ)`; the right derivative along each type price.
    pub fn gradient(&self, mu: &[f64]) -> Vec<f64> {
        self.gradient_smoothed(mu, 0.0)
    }

    // With `h > 0` every point mass at `v` is replaced by a uniform law on
    // `[v − h, v + h]`, which makes the dual C¹ within `h·Σw_j` of the original.

    fn value_smoothed(&self, mu: &[f64], h: f64) -> f64 {
        let linear: f64 = self.kappa.iter().zip(mu).map(|(k, m)| k * m).sum();
        linear + self.active().map(|(ty, w)| w * excess(ty, ty.price(mu), h)).sum::<f64>()
    }

    fn gradient_smoothed(&self, mu: &[f64], h: f64) -> Vec<f64> {
        let mut g = self.kappa.to_vec();
        for (ty, w) in self.active() {
            let t = tail(ty, ty.price(mu), h);
            if t > 0.0 {
                for (gi, a) in g.iter_mut().zip(&ty.consumption) {
                    *gi -= w * a * t;
                }
            }
        }
        g
    }

    fn hessian(&self, mu: &[f64], h: f64) -> Vec<f64> {
        let m = mu.len();
        let mut hess = vec![0.0; m * m];
        for (ty, w) in self.active() {
            let f = density(ty, ty.price(mu), h);
            if f > 0.0 {
                for i in 0..m {
                    let ai = ty.consumption[i];
                    if ai == 0.0 {
                        continue;
                    }
                    for k in 0..m {
                        hess[i * m + k] += w * f * ai * ty.consumption[k];
                    }
                }
            }
        }
        hess
    }

    /// `max_i |μ_i − Π(μ_i − g_i)|`.
    pub fn projected_residual(&self, mu: &[f64], grad: &[f64]) -> f64 {
        mu.iter()
            .zip(grad)
            .zip(&self.domain.upper)
            .map(|((m, g), u)| (m - (m - g).clamp(0.0, *u)).abs())
            .fold(0.0, f64::max)
    }

    /// Minimizes the dual, starting from `warm` when given.
    pub fn minimize(&self, warm: Option<&[f64]>, opts: &DualOptions) -> Result<DualMinimum> {
        let m = self.kappa.len();
        if m == 1 {
            return Ok(self.minimize_scalar());
        }
        let has_atoms = self.active().any(|(ty, _)| ty.reward.is_point_mass());
        if !has_atoms {
            return self.minimize_box(warm, opts, m, 0.0);
        }
        // Shrink the smoothing width geometrically, warm-starting each stage.
        let scale = self
            .active()
            .map(|(ty, _)| ty.reward.support().1)
            .fold(0.0, f64::max)
            .max(1.0);
        // Narrower widths lose the smoothed gradient to rounding in `a_jᵀμ`;
        // the last one stays inside the tie tolerance of primal recovery.
        let last = 1e-7 * scale;
        let mut h = 0.05 * scale;
        let mut mu = warm.map(<[f64]>::to_vec);
        let mut iterations = 0;
        loop {
            let final_stage = h <= last;
            let stage_opts = DualOptions {
                max_iterations: opts.max_iterations.min(SMOOTHED_STAGE_ITERATIONS),
                residual_tol: if final_stage { opts.residual_tol } else { f64::INFINITY },
                ..*opts
            };
            let stage = self.minimize_box(mu.as_deref(), &stage_opts, m, h)?;
            iterations += stage.iterations;
            if final_stage {
                return Ok(DualMinimum {
                    value: self.value(&stage.mu),
                    iterations,
                    ..stage
                });
            }
            mu = Some(stage.mu);
            h *= 0.1;
        }
    }

    fn minimize_scalar(&self) -> DualMinimum {
        let upper = self.domain.upper[0];
        let kappa = self.kappa[0];
        // Right derivative and second derivative along the single coordinate.
        let right = |mu: f64| {
            let (mut g, mut h) = (kappa, 0.0);
            for (ty, w) in self.active() {
                let a = ty.consumption[0];
                if a != 0.0 {
                    g -= w * a * ty.reward.prob_above(a * mu);
                    h += w * a * a * ty.reward.density(a * mu);
                }
            }
            (g, h)
        };
        let left = |mu: f64| {
            let mut g = kappa;
            for (ty, w) in self.active() {
                g -= w * ty.consumption[0] * ty.reward.prob_at_least(ty.consumption[0] * mu);
            }
            g
        };
        let scale = kappa.abs()
            + self
                .active()
                .map(|(ty, w)| w * ty.consumption[0].abs())
                .sum::<f64>();
        let root_tol = 1e-15 * scale;
        let mut iterations = 0;
        let mu = if right(0.0).0 >= 0.0 || upper <= 0.0 {
            0.0
        } else if right(upper).0 < 0.0 {
            upper
        } else {
            // Newton steps safeguarded by the bracket right(lo) < 0 ≤ right(hi).
            let (mut lo, mut hi) = (0.0f64, upper);
            let mut x = 0.5 * (lo + hi);
            let mut root = None;
            while hi - lo > 1e-15 * hi.max(1.0) && iterations < 200 {
                iterations += 1;
                let (g, h) = right(x);
                if g.abs() <= root_tol {
                    root = Some(x);
                    break;
                }
                if g > 0.0 {
                    hi = x;
                } else {
                    lo = x;
                }
                let newton = if h > 0.0 { x - g / h } else { f64::NAN };
                x = if newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
            }
            root.unwrap_or_else(|| {
                // Land exactly on a kink if one lies in the final bracket.
                self.active()
                    .filter(|(ty, _)| ty.reward.is_point_mass() && ty.consumption[0] > 0.0)
                    .map(|(ty, _)| ty.reward.support().0 / ty.consumption[0])
                    .find(|&k| k >= lo && k <= hi)
                    .unwrap_or(hi)
            })
        };
        let g_right = right(mu).0;
        let g_left = left(mu);
        let residual = if mu <= 0.0 {
            (-g_right).max(0.0)
        } else if mu >= upper {
            g_left.max(0.0)
        } else {
            g_left.max(0.0) + (-g_right).max(0.0)
        };
        DualMinimum {
            value: self.value(&[mu]),
            mu: vec![mu],
            residual,
            iterations,
        }
    }

    fn minimize_box(&self, warm: Option<&[f64]>, opts: &DualOptions, m: usize, h: f64) -> Result<DualMinimum> {
        let mut mu = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            _ => vec![0.0; m],
        };
        self.domain.project(&mut mu);
        let mut value = self.value_smoothed(&mu, h);
        let mut grad = self.gradient_smoothed(&mu, h);
        let mut residual = self.projected_residual(&mu, &grad);
        let mut bb_step = 1.0;
        let mut iterations = 0;
        let mut stalled = 0;

        while residual > opts.target_residual && iterations < opts.max_iterations {
            iterations += 1;
            let newton = self.newton_direction(&mu, &grad, m, h);
            let mut accepted = false;
            let mut prev_mu = mu.clone();
            let prev_grad = grad.clone();
            for (attempt, direction) in [newton, Some(grad.iter().map(|g| -g * bb_step).collect())]
                .into_iter()
                .enumerate()
            {
                let Some(direction) = direction else { continue };
                let mut step = 1.0;
                for _ in 0..60 {
                    let mut trial: Vec<f64> =
                        mu.iter().zip(&direction).map(|(m, d)| m + step * d).collect();
                    self.domain.project(&mut trial);
                    let moved: f64 = trial
                        .iter()
                        .zip(&mu)
                        .zip(&grad)
                        .map(|((t, m), g)| g * (t - m))
                        .sum();
                    let trial_value = self.value_smoothed(&trial, h);
                    let noise = 1e-15 * value.abs().max(1.0);
                    let armijo = trial_value <= value + 1e-4 * moved;
                    let flat = (trial_value - value).abs() <= noise;
                    let trial_grad = self.gradient_smoothed(&trial, h);
                    let trial_res = self.projected_residual(&trial, &trial_grad);
                    if armijo && trial != mu || (flat && trial_res < residual) {
                        prev_mu = std::mem::replace(&mut mu, trial);
                        value = trial_value;
                        grad = trial_grad;
                        residual = trial_res;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if accepted {
                    if attempt == 1 {
                        // Barzilai-Borwein length for the next gradient step.
                        let s: Vec<f64> = mu.iter().zip(&prev_mu).map(|(a, b)| a - b).collect();
                        let y: Vec<f64> = grad.iter().zip(&prev_grad).map(|(a, b)| a - b).collect();
                        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                        let ss: f64 = s.iter().map(|a| a * a).sum();
                        bb_step = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e6) } else { bb_step * 2.0 };
                    }
                    break;
                }
            }
            if !accepted {
                stalled += 1;
                bb_step *= 0.1;
                if stalled > 1 {
                    break;
                }
            } else {
                stalled = 0;
            }
        }
        if residual > opts.residual_tol {
            return Err(Error::NonConvergence {
                iterations,
                residual,
            });
        }
        Ok(DualMinimum {
            mu,
            value,
            residual,
            iterations,
        })
    }

    /// Newton step on coordinates not held at a bound, regularized when the
    /// reduced Hessian is singular; `None` if it vanishes.
    fn newton_direction(&self, mu: &[f64], grad: &[f64], m: usize, h: f64) -> Option<Vec<f64>> {
        let eps = 1e-12;
        let free: Vec<usize> = (0..m)
            .filter(|&i| {
                let at_lower = mu[i] <= eps && grad[i] > 0.0;
                let at_upper = mu[i] >= self.domain.upper[i] - eps && grad[i] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        if free.is_empty() {
            return None;
        }
        let hess = self.hessian(mu, h);
        let k = free.len();
        let mut hf = vec![0.0; k * k];
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                hf[a * k + b] = hess[i * m + j];
            }
        }
        let rhs: Vec<f64> = free.iter().map(|&i| -grad[i]).collect();
        let step = match cholesky_solve(&hf, &rhs, k, 1e-10) {
            Some(step) => step,
            None => {
                // Levenberg-Marquardt shift for flat directions.
                let max_diag = (0..k).fold(0.0f64, |acc, a| acc.max(hf[a * k + a]));
                if max_diag <= 0.0 {
                    return None;
                }
                for a in 0..k {
                    hf[a * k + a] += 1e-8 * max_diag;
                }
                cholesky_solve(&hf, &rhs, k, 1e-14)?
            }
        };
        let mut dir = vec![0.0; m];
        for (a, &i) in free.iter().enumerate() {
            dir[i] = step[a];
        }
        Some(dir)
    }
}

fn excess(ty: &QueryType, theta: f64, h: f64) -> f64 {
    if h > 0.0 && ty.reward.is_point_mass() {
        let v = ty.reward.support().0;
        let d = (v + h - theta).clamp(0.0, 2.0 * h);
        // E[(U − θ)⁺] for U uniform on [v − h, v + h].
        return d * d / (4.0 * h) + (v - h - theta).max(0.0);
    }
    ty.reward.expected_excess(theta)
}

fn tail(ty: &QueryType, theta: f64, h: f64) -> f64 {
    if h > 0.0 && ty.reward.is_point_mass() {
        let v = ty.reward.support().0;
        return ((v + h - theta) / (2.0 * h)).clamp(0.0, 1.0);
    }
    ty.reward.prob_above(theta)
}

fn density(ty: &QueryType, theta: f64, h: f64) -> f64 {
    if h > 0.0 && ty.reward.is_point_mass() {
        let v = ty.reward.support().0;
        return if (theta - v).abs() < h { 0.5 / h } else { 0.0 };
    }
    ty.reward.density(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceSpec, RewardDistribution};

    #[test]
    fn scalar_uniform_half() {
        let spec = InstanceSpec::single_resource_uniform(0.5, 10).unwrap();
        let dom = DualDomain::for_spec(&spec);
        let dual = PopulationDual {
            types: &spec.types,
            weights: &[1.0],
            kappa: &[0.5],
            domain: &dom,
        };
        let min = dual.minimize(None, &DualOptions::default()).unwrap();
        assert!((min.mu[0] - 0.5).abs() < 1e-14);
        assert!((min.value - 0.375).abs() < 1e-14);
        assert!(min.residual < 1e-12);
    }

    #[test]
    fn scalar_slack_gives_zero_price() {
        let spec = InstanceSpec::single_resource_uniform(2.0, 10).unwrap();
        let dom = DualDomain::for_spec(&spec);
        let dual = PopulationDual {
            types: &spec.types,
            weights: &[1.0],
            kappa: &[2.0],
            domain: &dom,
        };
        let min = dual.minimize(None, &DualOptions::default()).unwrap();
        assert_eq!(min.mu, vec![0.0]);
        assert_eq!(min.residual, 0.0);
    }

    #[test]
    fn scalar_point_mass_kink() {
        let types = vec![
            QueryType::new(vec![1.0], 0.5, RewardDistribution::point_mass(0.8).unwrap()),
            QueryType::new(vec![1.0], 0.5, RewardDistribution::point_mass(0.3).unwrap()),
        ];
        let dom = DualDomain::for_types(&types, 1);
        let dual = PopulationDual {
            types: &types,
            weights: &[0.5, 0.5],
            kappa: &[0.25],
            domain: &dom,
        };
        let min = dual.minimize(None, &DualOptions::default()).unwrap();
        assert_eq!(min.mu, vec![0.8]);
        assert_eq!(min.residual, 0.0);
    }

    #[test]
    fn triangle_instance_dual() {
        let eps = 0.1;
        let spec = InstanceSpec::degenerate_triangle(eps, 1).unwrap();
        let dom = DualDomain::for_spec(&spec);
        let w: Vec<f64> = spec.types.iter().map(|t| t.probability).collect();
        let dual = PopulationDual {
            types: &spec.types,
            weights: &w,
            kappa: &spec.capacity_ratio,
            domain: &dom,
        };
        for warm in [None, Some(vec![1.0, 1.0, 1.0]), Some(vec![0.0, 0.9, 0.0])] {
            let min = dual.minimize(warm.as_deref(), &DualOptions::default()).unwrap();
            let expected = [0.45, 0.0, 0.45];
            for (a, b) in min.mu.iter().zip(expected) {
                assert!((a - b).abs() < 1e-10, "{:?}", min.mu);
            }
        }
    }
}
