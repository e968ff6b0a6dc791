//! Reward laws supported on a bounded interval.
//!
//! Every law exposes its CDF, its quantile function and the *top mean*
//! `top_mean(q) = ∫_{1-q}^{1} F⁻¹(p) dp`, i.e. the expected reward collected
//! when a query is accepted exactly when its reward lies in the top `q`
//! fraction of the distribution. The three built-in kinds have closed forms;
//! other laws can implement [`RewardLaw`] and inherit numeric quantile
//! inversion and quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used by the numeric fallbacks.
const BISECTION_TOL: f64 = 1e-12;
const QUADRATURE_TOL: f64 = 1e-10;

/// Interface shared by every reward distribution on `[lower, upper]`.
pub trait RewardLaw {
    /// Support `[l, u]`.
    fn support(&self) -> (f64, f64);

    /// Cumulative distribution function `P(r ≤ x)`.
    fn cdf(&self, x: f64) -> f64;

    /// Lower bound α on the density over the support.
    fn density_floor(&self) -> f64;

    /// Upper bound β on the density over the support (`+∞` when unbounded).
    fn density_ceiling(&self) -> f64;

    /// Inverse CDF. The default inverts [`RewardLaw::cdf`] by bisection.
    fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p, "quantile level")?;
        let (lo, hi) = self.support();
        if p <= 0.0 {
            return Ok(lo);
        }
        if p >= 1.0 {
            return Ok(hi);
        }
        let (mut a, mut b) = (lo, hi);
        let tol = BISECTION_TOL * hi.abs().max(1.0);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if self.cdf(mid) < p {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `∫_{1-q}^{1} F⁻¹(p) dp`. The default uses adaptive Simpson quadrature.
    fn top_mean(&self, q: f64) -> Result<f64> {
        check_probability(q, "top fraction")?;
        if q == 0.0 {
            return Ok(0.0);
        }
        let f = |p: f64| self.quantile(p.clamp(0.0, 1.0)).unwrap_or(f64::NAN);
        Ok(adaptive_simpson(&f, 1.0 - q, 1.0, QUADRATURE_TOL))
    }

    /// Probability that the reward strictly exceeds `theta`.
    fn prob_above(&self, theta: f64) -> f64 {
        1.0 - self.cdf(theta)
    }

    /// Probability that the reward is at least `theta`.
    fn prob_at_least(&self, theta: f64) -> f64 {
        self.prob_above(theta)
    }

    /// `E[(r − θ)⁺]`.
    fn expected_excess(&self, theta: f64) -> f64 {
        let (lo, hi) = self.support();
        if theta >= hi {
            return 0.0;
        }
        if theta <= lo {
            return self.top_mean(1.0).unwrap_or(f64::NAN) - theta;
        }
        let q = self.prob_above(theta);
        self.top_mean(q).unwrap_or(f64::NAN) - theta * q
    }

    /// Density at `x`, zero outside the support. Used only for second-order
    /// information, so laws without a density may return zero.
    fn density(&self, _x: f64) -> f64 {
        0.0
    }
}

pub(crate) fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} {p} outside [0, 1]")))
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// The reward laws understood by configuration files and solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardDistribution {
    /// Uniform on `[lower, upper]`.
    Uniform { lower: f64, upper: f64 },
    /// Density linear on `[lower, upper]`, equal to `density_lower` at the
    /// left end and to `2/(upper − lower) − density_lower` at the right end.
    TruncatedLinear {
        lower: f64,
        upper: f64,
        density_lower: f64,
    },
    /// Degenerate law at `value`.
    PointMass { value: f64 },
}

impl RewardDistribution {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let d = RewardDistribution::Uniform { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn truncated_linear(lower: f64, upper: f64, density_lower: f64) -> Result<Self> {
        let d = RewardDistribution::TruncatedLinear {
            lower,
            upper,
            density_lower,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        let d = RewardDistribution::PointMass { value };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config("reward support must be finite".into()));
        }
        if lo < 0.0 {
            return Err(Error::Config(format!("reward lower bound {lo} is negative")));
        }
        match *self {
            RewardDistribution::PointMass { .. } => Ok(()),
            RewardDistribution::Uniform { lower, upper } => {
                if upper > lower {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "uniform reward needs upper > lower, got [{lower}, {upper}]"
                    )))
                }
            }
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => {
                if upper <= lower {
                    return Err(Error::Config(format!(
                        "truncated-linear reward needs upper > lower, got [{lower}, {upper}]"
                    )));
                }
                let max_density = 2.0 / (upper - lower);
                if !(0.0..=max_density).contains(&density_lower) {
                    return Err(Error::Config(format!(
                        "truncated-linear density at lower end must lie in [0, {max_density}], got {density_lower}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, RewardDistribution::PointMass { .. })
    }

    pub fn mean(&self) -> f64 {
        self.top_mean(1.0).unwrap_or(f64::NAN)
    }

    /// Draws a reward by inverse CDF from a uniform variate in `[0, 1]`.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        self.quantile(u.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
    }

    /// Linear density parameters `(width, f(lower), slope/2)` so that
    /// `F(lower + x) = f0·x + k·x²`.
    fn linear_params(lower: f64, upper: f64, density_lower: f64) -> (f64, f64, f64) {
        let w = upper - lower;
        let f1 = 2.0 / w - density_lower;
        (w, density_lower, (f1 - density_lower) / (2.0 * w))
    }
}

impl RewardLaw for RewardDistribution {
    fn support(&self) -> (f64, f64) {
        match *self {
            RewardDistribution::Uniform { lower, upper }
            | RewardDistribution::TruncatedLinear { lower, upper, .. } => (lower, upper),
            RewardDistribution::PointMass { value } => (value, value),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            RewardDistribution::Uniform { lower, upper } => {
                ((x - lower) / (upper - lower)).clamp(0.0, 1.0)
            }
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => {
                let (w, f0, k) = Self::linear_params(lower, upper, density_lower);
                let y = (x - lower).clamp(0.0, w);
                (f0 * y + k * y * y).clamp(0.0, 1.0)
            }
            RewardDistribution::PointMass { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn density_floor(&self) -> f64 {
        match *self {
            RewardDistribution::Uniform { lower, upper } => 1.0 / (upper - lower),
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => density_lower.min(2.0 / (upper - lower) - density_lower),
            RewardDistribution::PointMass { .. } => f64::INFINITY,
        }
    }

    fn density_ceiling(&self) -> f64 {
        match *self {
            RewardDistribution::Uniform { lower, upper } => 1.0 / (upper - lower),
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => density_lower.max(2.0 / (upper - lower) - density_lower),
            RewardDistribution::PointMass { .. } => f64::INFINITY,
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p, "quantile level")?;
        Ok(match *self {
            RewardDistribution::Uniform { lower, upper } => lower + p * (upper - lower),
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => {
                let (w, f0, k) = Self::linear_params(lower, upper, density_lower);
                if p == 0.0 {
                    lower
                } else {
                    // Root of k·x² + f0·x − p in the cancellation-free form.
                    let disc = (f0 * f0 + 4.0 * k * p).max(0.0);
                    let x = 2.0 * p / (f0 + disc.sqrt());
                    lower + x.clamp(0.0, w)
                }
            }
            RewardDistribution::PointMass { value } => value,
        })
    }

    fn top_mean(&self, q: f64) -> Result<f64> {
        check_probability(q, "top fraction")?;
        Ok(match *self {
            RewardDistribution::Uniform { lower, upper } => {
                let w = upper - lower;
                q * (upper - 0.5 * w * q)
            }
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => {
                let (w, f0, k) = Self::linear_params(lower, upper, density_lower);
                let x0 = self.quantile(1.0 - q)? - lower;
                let dx = w - x0;
                lower * q
                    + 0.5 * f0 * dx * (w + x0)
                    + (2.0 / 3.0) * k * dx * (w * w + w * x0 + x0 * x0)
            }
            RewardDistribution::PointMass { value } => q * value,
        })
    }

    fn prob_above(&self, theta: f64) -> f64 {
        1.0 - self.cdf(theta)
    }

    fn prob_at_least(&self, theta: f64) -> f64 {
        match *self {
            RewardDistribution::PointMass { value } => {
                if value >= theta {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.prob_above(theta),
        }
    }

    fn expected_excess(&self, theta: f64) -> f64 {
        match *self {
            RewardDistribution::Uniform { lower, upper } => {
                if theta <= lower {
                    0.5 * (lower + upper) - theta
                } else if theta >= upper {
                    0.0
                } else {
                    let e = upper - theta;
                    e * e / (2.0 * (upper - lower))
                }
            }
            RewardDistribution::PointMass { value } => (value - theta).max(0.0),
            RewardDistribution::TruncatedLinear { lower, upper, .. } => {
                if theta >= upper {
                    0.0
                } else if theta <= lower {
                    self.mean() - theta
                } else {
                    let q = self.prob_above(theta);
                    self.top_mean(q).unwrap_or(f64::NAN) - theta * q
                }
            }
        }
    }

    fn density(&self, x: f64) -> f64 {
        match *self {
            RewardDistribution::Uniform { lower, upper } => {
                if x > lower && x < upper {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            RewardDistribution::TruncatedLinear {
                lower,
                upper,
                density_lower,
            } => {
                if x > lower && x < upper {
                    let (_, f0, k) = Self::linear_params(lower, upper, density_lower);
                    f0 + 2.0 * k * (x - lower)
                } else {
                    0.0
                }
            }
            RewardDistribution::PointMass { .. } => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quantile_examples() {
        let u01 = RewardDistribution::uniform(0.0, 1.0).unwrap();
        assert!(close(u01.quantile(0.3).unwrap(), 0.3, 1e-15));
        let u = RewardDistribution::uniform(0.2, 0.6).unwrap();
        assert!(close(u.quantile(0.5).unwrap(), 0.4, 1e-15));
        // f(r) = 2r on (0, 1): F(r) = r², so F⁻¹(0.25) = 0.5.
        let tl = RewardDistribution::truncated_linear(0.0, 1.0, 0.0).unwrap();
        assert!(close(tl.quantile(0.25).unwrap(), 0.5, 1e-15));
        let pm = RewardDistribution::point_mass(0.7).unwrap();
        assert_eq!(pm.quantile(0.123).unwrap(), 0.7);
    }

    #[test]
    fn top_mean_examples() {
        let u01 = RewardDistribution::uniform(0.0, 1.0).unwrap();
        assert!(close(u01.top_mean(1.0).unwrap(), 0.5, 1e-15));
        assert!(close(u01.top_mean(0.5).unwrap(), 0.375, 1e-15));
        let pm = RewardDistribution::point_mass(0.7).unwrap();
        assert!(close(pm.top_mean(0.4).unwrap(), 0.28, 1e-15));
    }

    #[test]
    fn out_of_range_levels_are_domain_errors() {
        let u01 = RewardDistribution::uniform(0.0, 1.0).unwrap();
        assert!(matches!(u01.quantile(-0.1), Err(Error::Domain(_))));
        assert!(matches!(u01.quantile(1.5), Err(Error::Domain(_))));
        assert!(matches!(u01.top_mean(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(RewardDistribution::uniform(1.0, 1.0).is_err());
        assert!(RewardDistribution::uniform(-1.0, 1.0).is_err());
        assert!(RewardDistribution::truncated_linear(0.0, 1.0, 2.5).is_err());
        assert!(RewardDistribution::point_mass(f64::INFINITY).is_err());
    }

    #[test]
    fn closed_forms_match_numeric_fallbacks() {
        struct Numeric<'a>(&'a RewardDistribution);
        impl RewardLaw for Numeric<'_> {
            fn support(&self) -> (f64, f64) {
                self.0.support()
            }
            fn cdf(&self, x: f64) -> f64 {
                self.0.cdf(x)
            }
            fn density_floor(&self) -> f64 {
                self.0.density_floor()
            }
            fn density_ceiling(&self) -> f64 {
                self.0.density_ceiling()
            }
        }
        let laws = [
            RewardDistribution::uniform(0.3, 1.7).unwrap(),
            RewardDistribution::truncated_linear(0.5, 2.0, 0.2).unwrap(),
            RewardDistribution::truncated_linear(0.0, 1.0, 1.6).unwrap(),
        ];
        for law in &laws {
            let numeric = Numeric(law);
            for i in 0..=20 {
                let q = i as f64 / 20.0;
                assert!(close(law.quantile(q).unwrap(), numeric.quantile(q).unwrap(), 1e-10));
                assert!(close(law.top_mean(q).unwrap(), numeric.top_mean(q).unwrap(), 1e-9));
            }
            for i in 0..=30 {
                let theta = -0.2 + i as f64 * 0.08;
                assert!(close(
                    law.expected_excess(theta),
                    numeric.expected_excess(theta),
                    1e-9
                ));
            }
        }
    }

    #[test]
    fn user_defined_law_uses_numeric_inversion() {
        // Density 3r² on (0, 1).
        struct Cubic;
        impl RewardLaw for Cubic {
            fn support(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
            fn cdf(&self, x: f64) -> f64 {
                x.clamp(0.0, 1.0).powi(3)
            }
            fn density_floor(&self) -> f64 {
                0.0
            }
            fn density_ceiling(&self) -> f64 {
                3.0
            }
        }
        let q = Cubic.quantile(0.125).unwrap();
        assert!(close(q, 0.5, 1e-11));
        // ∫_0^1 p^{1/3} dp = 3/4.
        assert!(close(Cubic.top_mean(1.0).unwrap(), 0.75, 1e-9));
        // E[(r − 0.5)⁺] = ∫_{0.5}^{1} (1 − r³) dr = 0.5 − (1 − 1/16)/4.
        assert!(close(Cubic.expected_excess(0.5), 0.5 - 0.234375, 1e-9));
    }

    fn arb_continuous() -> impl Strategy<Value = RewardDistribution> {
        prop_oneof![
            (0.0f64..2.0, 0.05f64..3.0)
                .prop_map(|(l, w)| RewardDistribution::uniform(l, l + w).unwrap()),
            (0.0f64..2.0, 0.05f64..3.0, 0.0f64..1.0).prop_map(|(l, w, frac)| {
                RewardDistribution::truncated_linear(l, l + w, frac * 2.0 / w).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(law in arb_continuous(), p in 0.0f64..=1.0) {
            let r = law.quantile(p).unwrap();
            prop_assert!((law.cdf(r) - p).abs() <= 1e-10);
        }

        #[test]
        fn cdf_inverts_quantile(law in arb_continuous(), t in 0.001f64..0.999) {
            let (l, u) = law.support();
            let r = l + t * (u - l);
            prop_assert!((law.quantile(law.cdf(r)).unwrap() - r).abs() <= 1e-12 * u.max(1.0));
        }

        #[test]
        fn density_within_declared_bounds(law in arb_continuous(), t in 0.001f64..0.999) {
            let (l, u) = law.support();
            let f = law.density(l + t * (u - l));
            prop_assert!(f >= law.density_floor() - 1e-12);
            prop_assert!(f <= law.density_ceiling() + 1e-12);
        }

        #[test]
        fn top_mean_concave_nondecreasing(law in arb_continuous()) {
            let grid: Vec<f64> = (0..=200)
                .map(|i| law.top_mean(i as f64 / 200.0).unwrap())
                .collect();
            for w in grid.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            for w in grid.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-10);
            }
        }
    }
}
