//! Closed-form law of the SI diffusion: deterministic logistic solution,
//! threshold times, the logit transform to the Wiener coordinate, and the
//! transition density, distribution function, median and moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{GaussHermite, MAX_HERMITE_ORDER};
use crate::rates::{RateFunction, RatePair};
use crate::scalar::{normal_cdf, normal_pdf, Scalar};

pub const DEFAULT_HERMITE_ORDER: usize = 64;
const HERMITE_REL_TOL: f64 = 1e-9;
const THRESHOLD_TIME_TOL: f64 = 1e-10;

fn check_open<T: Scalar>(what: &'static str, v: T, k: T) -> Result<()> {
    if v > T::zero() && v < k {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v.as_f64(),
            lo: 0.0,
            hi: k.as_f64(),
        })
    }
}

/// Logit coordinate relative to `x0`: `ln[x(K − x0) / (x0(K − x))]`.
///
/// Both `x` and `x0` must lie strictly inside `(0, K)`. Values that round to
/// `K` (for example `(1 − 1e−16)·K` in `f64`) are rejected with a domain error
/// rather than mapped to infinity.
pub fn x_to_y<T: Scalar>(x: T, x0: T, k: T) -> Result<T> {
    check_open("x", x, k)?;
    check_open("x0", x0, k)?;
    Ok((x / x0).ln() + ((k - x0) / (k - x)).ln())
}

/// Inverse of [`x_to_y`]: `K·x0 / (x0 + (K − x0)·e^{−y})`.
pub fn y_to_x<T: Scalar>(y: T, x0: T, k: T) -> Result<T> {
    check_open("x0", x0, k)?;
    Ok(logistic(y, x0, k))
}

#[inline]
pub(crate) fn logistic<T: Scalar>(y: T, x0: T, k: T) -> T {
    if y >= T::zero() {
        k * x0 / (x0 + (k - x0) * (-y).exp())
    } else {
        // Same value; avoids overflow of e^{−y} for very negative y.
        let e = y.exp();
        k * x0 * e / (x0 * e + (k - x0))
    }
}

/// Logistic solution `I(t)` of `dI/dt = (λ(t)/K)(K − I)I`.
pub fn deterministic_solution<T: Scalar>(
    k: T,
    i0: T,
    lambda: &RateFunction<T>,
    t0: T,
    t: T,
) -> Result<T> {
    check_open("I0", i0, k)?;
    let acc = lambda.integrate(t0, t)?;
    Ok(logistic(acc, i0, k))
}

/// Time at which the deterministic solution first reaches `m`.
///
/// Constant λ uses the closed form; otherwise bisection on `Λ(t|t0)` over
/// `[t0, t_max]`, which requires the root to be bracketed there.
pub fn threshold_time<T: Scalar>(
    k: T,
    i0: T,
    lambda: &RateFunction<T>,
    t0: T,
    m: T,
    t_max: T,
) -> Result<T> {
    check_open("I0", i0, k)?;
    if m >= k {
        return Err(Error::Unreachable {
            m: m.as_f64(),
            reason: "the carrying capacity is not reached in finite time".into(),
        });
    }
    if m <= i0 {
        return Err(Error::Unreachable {
            m: m.as_f64(),
            reason: format!("threshold not above the initial size {i0}"),
        });
    }
    let target = x_to_y(m, i0, k)?;

    if let Some(rate) = lambda.as_constant() {
        if rate <= T::zero() {
            return Err(Error::Unreachable {
                m: m.as_f64(),
                reason: "non-positive constant rate".into(),
            });
        }
        return Ok(t0 + target / rate);
    }

    let gap = |t: T| -> Result<T> { Ok(lambda.integrate(t0, t)? - target) };
    let mut lo = t0;
    let mut hi = t_max;
    if gap(hi)? < T::zero() {
        return Err(Error::Unreachable {
            m: m.as_f64(),
            reason: format!("root not bracketed in [{t0}, {t_max}]"),
        });
    }
    let tol = T::lit(THRESHOLD_TIME_TOL);
    while hi - lo > tol {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid)? >= T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Drift integrated by the Euler–Maruyama scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    /// The drift of [`infinitesimal_moments`], consistent with the exact law.
    #[default]
    Exact,
    /// `(K − x)x/K · (λ + σ²/2)`. Drops the state dependence of the Itô
    /// correction, so the logit drift becomes `λ + σ²x/K` instead of `λ`.
    /// Kept only to measure what that shortcut does to the estimators.
    Simplified,
}

/// `(A1, A2)` with the drift chosen by `form`.
pub fn moments_with_form<T: Scalar>(x: T, t: T, rates: &RatePair<T>, form: DriftForm) -> Result<(T, T)> {
    let (a1, a2) = infinitesimal_moments(x, t, rates)?;
    match form {
        DriftForm::Exact => Ok((a1, a2)),
        DriftForm::Simplified => {
            let k = rates.k();
            let lambda = rates.lambda.eval(t)?;
            let sigma2 = rates.sigma2.eval(t)?;
            Ok(((k - x) * x / k * (lambda + sigma2 / T::lit(2.0)), a2))
        }
    }
}

/// Infinitesimal drift and variance `(A1, A2)` at state `x`, time `t`.
///
/// `A2 = σ²(K − x)²x²/K²` and `A1 = (λ/K)(K − x)x + ¼·∂A2/∂x`, which expands to
/// `(K − x)x/K · [λ + σ²(K − 2x)/(2K)]`.
pub fn infinitesimal_moments<T: Scalar>(x: T, t: T, rates: &RatePair<T>) -> Result<(T, T)> {
    let k = rates.k();
    if x < T::zero() || x > k {
        return Err(Error::Domain {
            what: "x",
            value: x.as_f64(),
            lo: 0.0,
            hi: k.as_f64(),
        });
    }
    let lambda = rates.lambda.eval(t)?;
    let sigma2 = rates.sigma2.eval(t)?;
    let logistic_factor = (k - x) * x / k;
    let two = T::lit(2.0);
    let drift = logistic_factor * (lambda + sigma2 * (k - two * x) / (two * k));
    let variance = sigma2 * logistic_factor * logistic_factor;
    Ok((drift, variance))
}

/// Marginal law of `X(t)` given `X(t0) = x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal<T> {
    /// `t = t0`, or no accumulated noise: all mass at one point.
    PointMass(T),
    /// `Y(t)` is normal with these moments.
    LogitNormal { mean: T, variance: T },
}

/// Transition law of the process started at `(t0, x0)`.
#[derive(Debug, Clone)]
pub struct TransitionLaw<T> {
    rates: RatePair<T>,
    x0: T,
    t0: T,
}

impl<T: Scalar> TransitionLaw<T> {
    pub fn new(rates: RatePair<T>, x0: T, t0: T) -> Result<Self> {
        check_open("x0", x0, rates.k())?;
        Ok(TransitionLaw { rates, x0, t0 })
    }

    pub fn rates(&self) -> &RatePair<T> {
        &self.rates
    }

    pub fn x0(&self) -> T {
        self.x0
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn k(&self) -> T {
        self.rates.k()
    }

    /// `(Λ(t|t0), V(t|t0))`.
    pub fn accumulated(&self, t: T) -> Result<(T, T)> {
        Ok((
            self.rates.lambda.integrate(self.t0, t)?,
            self.rates.sigma2.integrate(self.t0, t)?,
        ))
    }

    pub fn marginal(&self, t: T) -> Result<Marginal<T>> {
        let (mean, variance) = self.accumulated(t)?;
        if t == self.t0 || variance <= T::zero() {
            Ok(Marginal::PointMass(logistic(mean, self.x0, self.k())))
        } else {
            Ok(Marginal::LogitNormal { mean, variance })
        }
    }

    fn gaussian(&self, t: T) -> Result<(T, T)> {
        match self.marginal(t)? {
            Marginal::LogitNormal { mean, variance } => Ok((mean, variance)),
            Marginal::PointMass(p) => Err(Error::DegenerateTime {
                t: t.as_f64(),
                point_mass: p.as_f64(),
            }),
        }
    }

    /// Transition density `f_X(x, t | x0, t0)`.
    pub fn pdf(&self, x: T, t: T) -> Result<T> {
        let (mean, variance) = self.gaussian(t)?;
        let k = self.k();
        let y = x_to_y(x, self.x0, k)?;
        let sd = variance.sqrt();
        Ok(k / (x * (k - x)) * normal_pdf((y - mean) / sd) / sd)
    }

    /// Transition distribution function `F_X(x, t | x0, t0)`; defined on `[0, K]`.
    pub fn cdf(&self, x: T, t: T) -> Result<T> {
        let (mean, variance) = self.gaussian(t)?;
        let k = self.k();
        if x == T::zero() {
            return Ok(T::zero());
        }
        if x == k {
            return Ok(T::one());
        }
        let y = x_to_y(x, self.x0, k)?;
        Ok(normal_cdf((y - mean) / variance.sqrt()))
    }

    /// Conditional median; independent of `σ²`.
    pub fn median(&self, t: T) -> Result<T> {
        let acc = self.rates.lambda.integrate(self.t0, t)?;
        Ok(logistic(acc, self.x0, self.k()))
    }

    /// `E[X^m(t) | X(t0) = x0]` by Gauss–Hermite quadrature, doubling the
    /// order from 64 until the relative change drops below 1e−9 (or the
    /// largest supported order is reached).
    pub fn moment(&self, m: u32, t: T) -> Result<T> {
        let mut order = DEFAULT_HERMITE_ORDER;
        let mut prev = self.moment_with_order(m, t, order)?;
        while order < MAX_HERMITE_ORDER {
            order *= 2;
            let next = self.moment_with_order(m, t, order)?;
            let rel = ((next - prev) / next).abs();
            prev = next;
            if rel < T::lit(HERMITE_REL_TOL) {
                break;
            }
        }
        Ok(prev)
    }

    /// Fixed-order Gauss–Hermite evaluation of the `m`-th moment.
    pub fn moment_with_order(&self, m: u32, t: T, order: usize) -> Result<T> {
        if m < 1 {
            return Err(Error::InvalidParameter("moment order must be >= 1".into()));
        }
        let (mean, variance) = self.gaussian(t)?;
        let k = self.k();
        let rule = GaussHermite::<T>::new(order);
        let integrand = moment_integrand(m, self.x0, k, mean, variance);
        let sum = rule.integrate(integrand);
        Ok(k.powi(m as i32) * sum / T::PI().sqrt())
    }
}

/// `[1 + ((K − x0)/x0)·exp(−z√(2V) − Λ)]^{−m}` evaluated in log space.
pub fn moment_integrand<T: Scalar>(m: u32, x0: T, k: T, mean: T, variance: T) -> impl Fn(T) -> T {
    let log_ratio = ((k - x0) / x0).ln();
    let scale = (T::lit(2.0) * variance).sqrt();
    let mf = T::from_u32(m).expect("small integer");
    move |z: T| {
        let s = log_ratio - z * scale - mean;
        (-mf * softplus(s)).exp()
    }
}

#[inline]
fn softplus<T: Scalar>(s: T) -> T {
    if s > T::lit(30.0) {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    const K: f64 = 200.0;
    const X0: f64 = 20.0;

    fn law(lambda: RateFunction<f64>, sigma2: RateFunction<f64>) -> TransitionLaw<f64> {
        TransitionLaw::new(RatePair::new(lambda, sigma2, K).unwrap(), X0, 0.0).unwrap()
    }

    fn homogeneous() -> TransitionLaw<f64> {
        law(RateFunction::<f64>::constant(0.4), RateFunction::<f64>::constant(0.1))
    }

    fn rk4_logistic(k: f64, i0: f64, lambda: impl Fn(f64) -> f64, t_end: f64, h: f64) -> f64 {
        let f = |t: f64, i: f64| lambda(t) / k * (k - i) * i;
        let steps = (t_end / h).round() as usize;
        let mut i = i0;
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = f(t, i);
            let k2 = f(t + h / 2.0, i + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, i + h / 2.0 * k2);
            let k4 = f(t + h, i + h * k3);
            i += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        i
    }

    #[test]
    fn deterministic_solution_examples() {
        let l = RateFunction::<f64>::constant(0.4);
        assert_eq!(deterministic_solution(K, X0, &l, 3.0, 3.0).unwrap(), X0);
        let rk = rk4_logistic(K, X0, |_| 0.4, 10.0, 1e-4);
        let v = deterministic_solution(K, X0, &l, 0.0, 10.0).unwrap();
        assert!((v - rk).abs() < 1e-6, "{v} vs {rk}");
        assert!((deterministic_solution(K, X0, &l, 0.0, 100.0).unwrap() - K).abs() < 1e-6);
        assert!(deterministic_solution(K, 0.0, &l, 0.0, 1.0).is_err());
        assert!(deterministic_solution(K, K, &l, 0.0, 1.0).is_err());

        let s = RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0);
        let rk = rk4_logistic(K, X0, |t| 0.4 + t.sin(), 10.0, 1e-4);
        assert!((deterministic_solution(K, X0, &s, 0.0, 10.0).unwrap() - rk).abs() < 1e-6);
    }

    #[test]
    fn threshold_time_examples() {
        let l = RateFunction::<f64>::constant(0.4);
        let t = threshold_time(K, X0, &l, 0.0, 100.0, 1e3).unwrap();
        let expected = (100.0 * (K - X0) / (X0 * (K - 100.0))).ln() / 0.4;
        assert!((t - expected).abs() < 1e-12);
        assert!((deterministic_solution(K, X0, &l, 0.0, t).unwrap() - 100.0).abs() < 1e-8);

        let near = threshold_time(K, X0, &l, 2.0, X0 * (1.0 + 1e-12), 1e3).unwrap();
        assert!((near - 2.0).abs() < 1e-9);

        assert!(matches!(
            threshold_time(K, X0, &l, 0.0, K, 1e3),
            Err(Error::Unreachable { .. })
        ));
        assert!(threshold_time(K, X0, &l, 0.0, X0, 1e3).is_err());
        assert!(threshold_time(K, X0, &l, 0.0, 10.0, 1e3).is_err());
    }

    #[test]
    fn threshold_time_general_rate() {
        let e = RateFunction::<f64>::exp_saturating(0.1, 0.3, 0.5);
        let t = threshold_time(K, X0, &e, 0.0, 150.0, 500.0).unwrap();
        assert!((deterministic_solution(K, X0, &e, 0.0, t).unwrap() - 150.0).abs() < 1e-8);
        assert!(threshold_time(K, X0, &e, 0.0, 150.0, 1.0).is_err());
    }

    #[test]
    fn transform_examples() {
        assert_eq!(x_to_y(X0, X0, K).unwrap(), 0.0);
        let x = 137.2;
        let back = y_to_x(x_to_y(x, X0, K).unwrap(), X0, K).unwrap();
        assert!((back - x).abs() < 1e-12);
        assert!(x_to_y(0.0, X0, K).is_err());
        assert!(x_to_y(K, X0, K).is_err());
        // (1 − 1e−15)K is still representable below K: finite, large y.
        let y = x_to_y((1.0 - 1e-15) * K, X0, K).unwrap();
        assert!(y.is_finite() && y > 30.0);
        assert!(x_to_y((1.0 - 1e-17) * K, X0, K).is_err());
        assert_eq!(y_to_x(f64::INFINITY, X0, K).unwrap(), K);
        assert_eq!(y_to_x(f64::NEG_INFINITY, X0, K).unwrap(), 0.0);
    }

    #[test]
    fn round_trip_across_range() {
        for i in 0..=10_000 {
            let frac = 1e-6 + (1.0 - 2e-6) * i as f64 / 10_000.0;
            let x = frac * K;
            let back = y_to_x(x_to_y(x, X0, K).unwrap(), X0, K).unwrap();
            assert!((back - x).abs() < 1e-12 * K, "x={x}");
        }
    }

    #[test]
    fn infinitesimal_moment_examples() {
        let rates = RatePair::new(RateFunction::<f64>::constant(0.4), RateFunction::<f64>::constant(0.1), K).unwrap();
        assert_eq!(infinitesimal_moments(0.0, 1.0, &rates).unwrap(), (0.0, 0.0));
        assert_eq!(infinitesimal_moments(K, 1.0, &rates).unwrap(), (0.0, 0.0));
        let (a1, a2) = infinitesimal_moments(100.0, 1.0, &rates).unwrap();
        // At x = K/2 the Itô correction ¼∂A2/∂x vanishes.
        assert!((a1 - 20.0).abs() < 1e-12);
        assert!((a2 - 250.0).abs() < 1e-12);
        let (a1, _) = infinitesimal_moments(50.0, 1.0, &rates).unwrap();
        // 150·50/200 · (0.4 + 0.1·100/400)
        assert!((a1 - 37.5 * 0.425).abs() < 1e-12);

        let noiseless = RatePair::noiseless(RateFunction::<f64>::constant(0.4), K).unwrap();
        let (a1, a2) = infinitesimal_moments(70.0, 1.0, &noiseless).unwrap();
        assert!((a1 - 0.4 / K * (K - 70.0) * 70.0).abs() < 1e-12);
        assert_eq!(a2, 0.0);
    }

    #[test]
    fn drift_identity_by_finite_difference() {
        let rates = RatePair::new(
            RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0),
            RateFunction::<f64>::exp_saturating(0.1, 0.01, 2.0),
            K,
        )
        .unwrap();
        let mut state = 12345u64;
        let mut unif = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let x = 1.0 + (K - 2.0) * unif();
            let t = 50.0 * unif();
            let h = 1e-5;
            let (a1, _) = infinitesimal_moments(x, t, &rates).unwrap();
            let a2p = infinitesimal_moments(x + h, t, &rates).unwrap().1;
            let a2m = infinitesimal_moments(x - h, t, &rates).unwrap().1;
            let d_a2 = (a2p - a2m) / (2.0 * h);
            let lam = rates.lambda.eval(t).unwrap();
            let residual = a1 - lam / K * (K - x) * x - 0.25 * d_a2;
            assert!(residual.abs() < 1e-6, "residual {residual} at x={x}");
        }
    }

    /// Direct transcription of the density, coded independently of `pdf`.
    fn pdf_direct(x: f64, x0: f64, k: f64, big_lambda: f64, v: f64) -> f64 {
        let arg = (x * (k - x0) / (x0 * (k - x))).ln() - big_lambda;
        k / (x * (k - x)) / (2.0 * std::f64::consts::PI * v).sqrt() * (-arg * arg / (2.0 * v)).exp()
    }

    #[test]
    fn pdf_matches_direct_formula_and_normalizes() {
        let l = homogeneous();
        for &t in &[0.5, 2.0, 5.0, 20.0] {
            let (lam, v) = l.accumulated(t).unwrap();
            for i in 1..200 {
                let x = K * i as f64 / 200.0;
                let a = l.pdf(x, t).unwrap();
                let b = pdf_direct(x, X0, K, lam, v);
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "x={x} t={t}");
                assert!(a >= 0.0);
            }
            // ∫ f_X dx over (0, K) in y-coordinates: dx = x(K − x)/K dy.
            let sd = v.sqrt();
            let total = adaptive_simpson(
                |y| {
                    let x = logistic(y, X0, K);
                    if x <= 0.0 || x >= K {
                        return 0.0;
                    }
                    l.pdf(x, t).unwrap() * x * (K - x) / K
                },
                lam - 12.0 * sd,
                lam + 12.0 * sd,
                1e-12,
                50,
            );
            assert!((total - 1.0).abs() < 1e-8, "t={t} total={total}");
        }
    }

    #[test]
    fn cdf_properties() {
        let l = law(RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0), RateFunction::<f64>::constant(0.1));
        for &t in &[0.3, 1.0, 4.0, 9.0] {
            let med = l.median(t).unwrap();
            assert!((l.cdf(med, t).unwrap() - 0.5).abs() < 1e-12);
            let mut prev = 0.0;
            for i in 1..10_000 {
                let c = l.cdf(K * i as f64 / 10_000.0, t).unwrap();
                assert!(c >= prev);
                prev = c;
            }
            assert_eq!(l.cdf(K, t).unwrap(), 1.0);
            assert_eq!(l.cdf(0.0, t).unwrap(), 0.0);
            assert!(l.cdf(K * (1.0 - 1e-12), t).unwrap() > 0.999_999);
        }
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let l = homogeneous();
        let t = 5.0;
        let (lam, v) = l.accumulated(t).unwrap();
        for i in 1..=20 {
            let x = K * i as f64 / 21.0;
            let y_hi = x_to_y(x, X0, K).unwrap();
            let mass = adaptive_simpson(
                |y| {
                    let xx = logistic(y, X0, K);
                    if xx <= 0.0 {
                        return 0.0;
                    }
                    l.pdf(xx, t).unwrap() * xx * (K - xx) / K
                },
                lam - 14.0 * v.sqrt(),
                y_hi,
                1e-12,
                50,
            );
            assert!((mass - l.cdf(x, t).unwrap()).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_time() {
        let l = homogeneous();
        assert!(matches!(
            l.pdf(30.0, 0.0),
            Err(Error::DegenerateTime { point_mass, .. }) if point_mass == X0
        ));
        assert!(matches!(l.cdf(30.0, 0.0), Err(Error::DegenerateTime { .. })));
        assert!(matches!(l.pdf(30.0, -1.0), Err(Error::ReversedInterval { .. })));
        assert_eq!(l.marginal(0.0).unwrap(), Marginal::PointMass(X0));
        assert!(l.moment(1, 0.0).is_err());
        assert!(l.moment(0, 1.0).is_err());
    }

    #[test]
    fn median_examples() {
        let l = law(RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0), RateFunction::<f64>::constant(0.1));
        let other = law(RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0), RateFunction::<f64>::constant(0.7));
        assert_eq!(l.median(0.0).unwrap(), X0);
        for i in 0..200 {
            let t = i as f64 * 0.25;
            let d = deterministic_solution(K, X0, &l.rates().lambda, 0.0, t).unwrap();
            assert_eq!(l.median(t).unwrap(), d);
            assert_eq!(l.median(t).unwrap(), other.median(t).unwrap());
        }
    }

    fn trapezoid_moment(l: &TransitionLaw<f64>, m: u32, t: f64, panels: usize) -> f64 {
        let (lam, v) = l.accumulated(t).unwrap();
        let c = (K - X0) / X0;
        let g = |z: f64| (1.0 + c * (-z * (2.0 * v).sqrt() - lam).exp()).powi(-(m as i32)) * (-z * z).exp();
        let (a, b) = (-10.0, 10.0);
        let h = (b - a) / panels as f64;
        let mut s = 0.5 * (g(a) + g(b));
        for i in 1..panels {
            s += g(a + i as f64 * h);
        }
        K.powi(m as i32) * s * h / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn moment_matches_brute_force() {
        let l = homogeneous();
        for m in [1u32, 2] {
            let gh = l.moment(m, 5.0).unwrap();
            let brute = trapezoid_moment(&l, m, 5.0, 1_000_000);
            assert!(((gh - brute) / brute).abs() < 1e-8, "m={m}: {gh} vs {brute}");
        }
    }

    #[test]
    fn moment_vanishing_noise_limit() {
        let l = law(RateFunction::<f64>::constant(0.4), RateFunction::<f64>::constant(1e-12));
        for &t in &[1.0, 5.0, 12.0] {
            let d = deterministic_solution(K, X0, &RateFunction::<f64>::constant(0.4), 0.0, t).unwrap();
            for m in [1u32, 2, 3] {
                let mom = l.moment(m, t).unwrap();
                assert!(((mom - d.powi(m as i32)) / mom).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn moment_ordering() {
        for (lam, s2) in [(0.4, 0.1), (0.4, 0.05), (1.0, 0.1), (0.2, 0.5)] {
            let l = law(RateFunction::<f64>::constant(lam), RateFunction::<f64>::constant(s2));
            // Keep Λ moderate so X(t) is not numerically indistinguishable from K.
            for &t in &[0.5, 3.0, 10.0, 30.0].map(|t: f64| t.min(12.0 / lam)) {
                let m1 = l.moment(1, t).unwrap();
                let m2 = l.moment(2, t).unwrap();
                assert!(m1 < m2.sqrt() && m2.sqrt() < K, "{lam} {s2} {t}");
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let rates = RatePair::<f32>::new(RateFunction::constant(0.4), RateFunction::constant(0.1), 200.0).unwrap();
        let l = TransitionLaw::new(rates, 20.0, 0.0).unwrap();
        let med = l.median(5.0).unwrap();
        assert!((l.cdf(med, 5.0).unwrap() - 0.5).abs() < 1e-5);
        let m1 = l.moment(1, 5.0).unwrap();
        assert!(m1 > 0.0 && m1 < 200.0);
    }
}
