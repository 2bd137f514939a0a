//! Standalone verifiers for the closed-form minimum computations: the
//! trace-extension value of isotropic states with its concavity
//! counterexample, and the two constrained-minimum lemmas behind the rank-2
//! logarithmic roof.

use rand::Rng;

use crate::error::{Error, Result};
use crate::optimize::restart_rng;
use crate::scalar::{r, Real};

/// Closed-form `min over product states of D_T^2` for an isotropic state:
/// `(1/4) [sqrt((2-p)^2 - (4/d)(1-p)) + (d^2-2) p / d^2]^2`.
pub fn gt_isotropic_closed<T: Real>(d: usize, p: T) -> Result<T> {
    if d < 2 {
        return Err(Error::InvalidParameter("need d >= 2".into()));
    }
    if p < T::zero() || p > T::one() {
        return Err(Error::InvalidParameter("p must lie in [0, 1]".into()));
    }
    let df = r::<T>(d as f64);
    let d2 = df * df;
    let radicand = (r::<T>(2.0) - p).powi(2) - r::<T>(4.0) / df * (T::one() - p);
    let root = radicand.max(T::zero()).sqrt();
    let tail = (d2 - r(2.0)) * p / d2;
    Ok((root + tail).powi(2) / r(4.0))
}

/// Concavity counterexample: compares the isotropic value against the
/// mixture of its endpoint values. `violated` means concavity fails at
/// `(d, p)`, i.e. the closed form sits strictly below the endpoint mixture.
pub fn gt_concavity_counterexample<T: Real>(d: usize, p: T) -> Result<(T, T, bool)> {
    let lhs = gt_isotropic_closed(d, p)?;
    let df = r::<T>(d as f64);
    let d2 = df * df;
    let rhs = p * (T::one() - T::one() / d2).powi(2) + (T::one() - p) * (T::one() - T::one() / df);
    Ok((lhs, rhs, lhs < rhs - r(1e-9)))
}

/// Result of the constrained log-sum minimum with its sampler verification.
#[derive(Debug, Clone, Copy)]
pub struct LogMinResult<T: Real> {
    /// `(X + Y) log2(n (1 + Y/X))`.
    pub value: T,
    /// Best objective over the random feasible samples.
    pub sampler_min: T,
    /// No sample fell below `value - 1e-9`.
    pub verified: bool,
}

/// Minimum of `sum (x_i + y_i) log2(n (1 + y_i/x_i))` subject to
/// `sum x_i = X > 0`, `sum y_i = Y >= 0`, checked against `10^4` random
/// feasible points.
pub fn constrained_log_min<T: Real>(
    k: usize,
    n_const: T,
    x_total: T,
    y_total: T,
    seed: u64,
) -> Result<LogMinResult<T>> {
    if k < 1 {
        return Err(Error::InvalidParameter("need k >= 1".into()));
    }
    if n_const <= T::zero() || x_total <= T::zero() || y_total < T::zero() {
        return Err(Error::InvalidParameter(
            "need n > 0, X > 0, Y >= 0".into(),
        ));
    }
    let value = (x_total + y_total) * (n_const * (T::one() + y_total / x_total)).log2();

    let objective = |xs: &[T], ys: &[T]| -> T {
        xs.iter().zip(ys).fold(T::zero(), |acc, (&x, &y)| {
            acc + (x + y) * (n_const * (T::one() + y / x)).log2()
        })
    };
    // uniform simplex draws via normalized exponentials
    let mut rng = restart_rng(seed, 0xA11CE);
    let mut sampler_min = T::infinity();
    for _ in 0..10_000 {
        let mut xs = Vec::with_capacity(k);
        let mut ys = Vec::with_capacity(k);
        let mut sx = T::zero();
        let mut sy = T::zero();
        for _ in 0..k {
            let ex = -r::<T>(rng.random::<f64>().max(1e-300).ln());
            let ey = -r::<T>(rng.random::<f64>().max(1e-300).ln());
            xs.push(ex);
            ys.push(ey);
            sx += ex;
            sy += ey;
        }
        for x in xs.iter_mut() {
            *x = *x / sx * x_total;
        }
        for y in ys.iter_mut() {
            *y = if y_total > T::zero() {
                *y / sy * y_total
            } else {
                T::zero()
            };
        }
        let obj = objective(&xs, &ys);
        if obj < sampler_min {
            sampler_min = obj;
        }
    }
    Ok(LogMinResult {
        value,
        sampler_min,
        verified: sampler_min >= value - r(1e-9),
    })
}

/// Parameters of the rank-2 boundary function `f(h, s)`.
#[derive(Debug, Clone, Copy)]
pub struct FhsSpec<T: Real> {
    pub m: usize,
    pub n: usize,
    pub q: T,
}

impl<T: Real> FhsSpec<T> {
    pub fn new(m: usize, n: usize, q: T) -> Result<Self> {
        if m < 1 || n < m {
            return Err(Error::InvalidParameter("need 1 <= m <= n".into()));
        }
        if q <= T::zero() || q >= T::one() {
            return Err(Error::InvalidParameter("q must lie in (0, 1)".into()));
        }
        Ok(Self { m, n, q })
    }
}

/// Which part of the domain attains the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FhsCase {
    /// `(0, 0)`: the unmixed corner, for `m/n >= 1/e`.
    Origin,
    /// `((1-q)/q, 0)`: the h boundary, for `m/n < 1/e` and `q >= e m/n`.
    HBoundary,
    /// `(n/(e m) - 1, 0)`: the interior stationary point of `f(., 0)`.
    HInterior,
}

#[derive(Debug, Clone, Copy)]
pub struct FhsMinimum<T: Real> {
    pub value: T,
    pub argmin: (T, T),
    pub case: FhsCase,
}

/// The function itself:
/// `f(h,s) = X(h,s)(1+h) log2(m(1+h)) + Y~(h,s)(1+s) log2(n(1+s))`
/// with `X = (q - s(1-q))/(1-hs)` and `Y~ = ((1-q) - hq)/(1-hs)`.
pub fn fhs_value<T: Real>(spec: &FhsSpec<T>, h: T, s: T) -> T {
    let q = spec.q;
    let m = r::<T>(spec.m as f64);
    let n = r::<T>(spec.n as f64);
    let denom = T::one() - h * s;
    let x = (q - s * (T::one() - q)) / denom;
    let yt = ((T::one() - q) - h * q) / denom;
    x * (T::one() + h) * (m * (T::one() + h)).log2()
        + yt * (T::one() + s) * (n * (T::one() + s)).log2()
}

/// Closed-form minimum of `f` over its domain, by case selection.
pub fn fhs_minimum<T: Real>(spec: &FhsSpec<T>) -> FhsMinimum<T> {
    fhs_closed(spec.m, spec.n, spec.q)
}

pub(crate) fn fhs_closed<T: Real>(m: usize, n: usize, q: T) -> FhsMinimum<T> {
    let e = std::f64::consts::E;
    let mf = m as f64;
    let nf = n as f64;
    let mt = r::<T>(mf);
    let nt = r::<T>(nf);
    if mf / nf >= 1.0 / e {
        FhsMinimum {
            value: q * mt.log2() + (T::one() - q) * nt.log2(),
            argmin: (T::zero(), T::zero()),
            case: FhsCase::Origin,
        }
    } else if q >= r(e * mf / nf) {
        FhsMinimum {
            value: (mt / q).log2(),
            argmin: ((T::one() - q) / q, T::zero()),
            case: FhsCase::HBoundary,
        }
    } else {
        let loge = r::<T>(std::f64::consts::LOG2_E);
        FhsMinimum {
            value: nt.log2() - q * nt * loge / (mt * r(e)),
            argmin: (nt / (r::<T>(e) * mt) - T::one(), T::zero()),
            case: FhsCase::HInterior,
        }
    }
}

/// Grid-search oracle over the domain, clamped one step inside the excluded
/// corner where `1 - hs` vanishes. Returns `(min value, argmin)`.
pub fn fhs_grid_min<T: Real>(spec: &FhsSpec<T>, steps: usize) -> (T, (T, T)) {
    let q = spec.q;
    let h_max = (T::one() - q) / q;
    let s_max = q / (T::one() - q);
    let mut best = T::infinity();
    let mut arg = (T::zero(), T::zero());
    for i in 0..=steps {
        let h = h_max * r::<T>(i as f64) / r::<T>(steps as f64);
        for j in 0..=steps {
            let s = s_max * r::<T>(j as f64) / r::<T>(steps as f64);
            if T::one() - h * s < r(1e-9) {
                continue;
            }
            let v = fhs_value(spec, h, s);
            if v < best {
                best = v;
                arg = (h, s);
            }
        }
    }
    (best, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gt_isotropic_endpoints() {
        // p = 0: the pure maximally entangled value 1 - 1/d
        for d in 2..=4 {
            let v = gt_isotropic_closed::<f64>(d, 0.0).unwrap();
            assert_relative_eq!(v, 1.0 - 1.0 / d as f64, epsilon = 1e-12);
            let v = gt_isotropic_closed::<f64>(d, 1.0).unwrap();
            assert_relative_eq!(v, (1.0 - 1.0 / (d * d) as f64).powi(2), epsilon = 1e-12);
        }
        // frozen evaluation at d = 2, p = 1/2
        let v = gt_isotropic_closed::<f64>(2, 0.5).unwrap();
        assert_relative_eq!(v, 0.25 * (1.25f64.sqrt() + 0.25).powi(2), epsilon = 1e-14);
        assert_relative_eq!(v, 0.467879248593737, epsilon = 1e-12);
    }

    #[test]
    fn concavity_violation_in_the_open_interval() {
        assert!(gt_concavity_counterexample::<f64>(2, 0.5).unwrap().2);
        assert!(gt_concavity_counterexample::<f64>(3, 0.1).unwrap().2);
        // endpoint p -> 0 approaches equality, no violation at tiny p
        let (lhs, rhs, violated) = gt_concavity_counterexample::<f64>(3, 1e-12).unwrap();
        assert!(!violated);
        assert_relative_eq!(lhs, rhs, epsilon = 1e-9);
    }

    #[test]
    fn log_min_examples() {
        // k = 1 is the formula itself
        let res = constrained_log_min::<f64>(1, 2.0, 1.0, 0.5, 3).unwrap();
        assert_relative_eq!(res.value, 1.5 * (2.0 * 1.5f64).log2(), epsilon = 1e-12);
        assert!(res.verified);
        // k = 3, n = 1, X = Y = 1 gives 2 log2 2 = 2
        let res = constrained_log_min::<f64>(3, 1.0, 1.0, 1.0, 4).unwrap();
        assert_relative_eq!(res.value, 2.0, epsilon = 1e-12);
        assert!(res.verified);
        assert!(res.sampler_min >= res.value - 1e-9);
        // Y = 0 collapses to X log2 n
        let res = constrained_log_min::<f64>(4, 3.0, 2.0, 0.0, 5).unwrap();
        assert_relative_eq!(res.value, 2.0 * 3f64.log2(), epsilon = 1e-12);
        assert!(res.verified);
    }

    #[test]
    fn fhs_cases_and_values() {
        let spec = FhsSpec::<f64>::new(2, 2, 0.5).unwrap();
        let min = fhs_minimum(&spec);
        assert_eq!(min.case, FhsCase::Origin);
        assert_relative_eq!(min.value, 1.0, epsilon = 1e-12);
        assert_eq!(min.argmin, (0.0, 0.0));

        let spec = FhsSpec::<f64>::new(1, 3, 0.95).unwrap();
        let min = fhs_minimum(&spec);
        assert_eq!(min.case, FhsCase::HBoundary);
        assert_relative_eq!(min.value, (1.0f64 / 0.95).log2(), epsilon = 1e-12);

        let spec = FhsSpec::<f64>::new(1, 3, 0.5).unwrap();
        let min = fhs_minimum(&spec);
        assert_eq!(min.case, FhsCase::HInterior);
        let expect = 3f64.log2() - 0.5 * 3.0 * std::f64::consts::LOG2_E / std::f64::consts::E;
        assert_relative_eq!(min.value, expect, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_below_grid_everywhere() {
        for (m, n, q) in [(2usize, 2usize, 0.5f64), (1, 3, 0.95), (1, 3, 0.5), (2, 7, 0.3)] {
            let spec = FhsSpec::new(m, n, q).unwrap();
            let min = fhs_minimum(&spec);
            let (grid, _) = fhs_grid_min(&spec, 300);
            assert!(
                min.value <= grid + 1e-12,
                "closed form above grid for ({m},{n},{q})"
            );
            assert!((min.value - grid).abs() < 2e-3, "grid far from closed form");
        }
    }

    #[test]
    fn case_boundaries_are_continuous() {
        // m/n = 1/e boundary, approached with real-valued block ratio via
        // values near the threshold
        for n in [3usize, 4, 6] {
            let q_star = std::f64::consts::E / n as f64;
            if q_star < 1.0 {
                let below = fhs_closed::<f64>(1, n, q_star - 1e-10);
                let above = fhs_closed::<f64>(1, n, q_star + 1e-10);
                assert!((below.value - above.value).abs() < 1e-9);
            }
        }
    }
}
