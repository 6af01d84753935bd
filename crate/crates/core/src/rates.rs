//! Time-varying rate functions `λ(t)` and `σ²(t)` and their integrals
//! `Λ(t|t0)` and `V(t|t0)`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Scalar;
use crate::simulate::TimeGrid;
use crate::spline::SplineCurve;

pub const QUADRATURE_TOL: f64 = 1e-10;
pub const QUADRATURE_MAX_DEPTH: u32 = 40;

/// A bounded, deterministic rate on the observation window.
///
/// Serialized as `{"kind": ..., "params": {...}}`, the descriptor format the
/// CLI configs use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub enum RateFunction<T> {
    /// `c`
    Constant { c: T },
    /// `a + b·sin(ωt + φ)`
    Sinusoid { a: T, b: T, omega: T, phi: T },
    /// `a + b·(1 − e^{−ct})²`
    ExpSaturating { a: T, b: T, c: T },
    /// Natural cubic spline through `(time, value)` knots.
    Tabulated(TabulatedRate<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedRate<T> {
    points: Vec<(T, T)>,
    spline: SplineCurve<T>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedParams<T> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar + Serialize> Serialize for TabulatedRate<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TabulatedParams {
            knots: self.points.clone(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for TabulatedRate<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = TabulatedParams::<T>::deserialize(d)?;
        TabulatedRate::new(p.knots).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> TabulatedRate<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        let (t, v): (Vec<T>, Vec<T>) = points.iter().copied().unzip();
        let spline = SplineCurve::natural(&t, &v)?;
        Ok(TabulatedRate { points, spline })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn span(&self) -> (T, T) {
        (self.spline.start(), self.spline.end())
    }
}

impl<T: Scalar> RateFunction<T> {
    pub fn constant(c: T) -> Self {
        RateFunction::Constant { c }
    }

    pub fn sinusoid(a: T, b: T, omega: T, phi: T) -> Self {
        RateFunction::Sinusoid { a, b, omega, phi }
    }

    pub fn exp_saturating(a: T, b: T, c: T) -> Self {
        RateFunction::ExpSaturating { a, b, c }
    }

    pub fn tabulated(points: Vec<(T, T)>) -> Result<Self> {
        Ok(RateFunction::Tabulated(TabulatedRate::new(points)?))
    }

    /// The constant value, if the rate does not depend on time.
    pub fn as_constant(&self) -> Option<T> {
        match *self {
            RateFunction::Constant { c } => Some(c),
            RateFunction::Sinusoid { a, b, .. } if b == T::zero() => Some(a),
            RateFunction::ExpSaturating { a, b, c } if b == T::zero() || c == T::zero() => Some(a),
            _ => None,
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        match self {
            RateFunction::Tabulated(tab) => {
                let (lo, hi) = tab.span();
                if t < lo || t > hi {
                    return Err(Error::OutsideSupport {
                        t: t.as_f64(),
                        lo: lo.as_f64(),
                        hi: hi.as_f64(),
                    });
                }
                Ok(tab.spline.eval(t))
            }
            _ => Ok(self.eval_analytic(t)),
        }
    }

    fn eval_analytic(&self, t: T) -> T {
        match *self {
            RateFunction::Constant { c } => c,
            RateFunction::Sinusoid { a, b, omega, phi } => a + b * (omega * t + phi).sin(),
            RateFunction::ExpSaturating { a, b, c } => {
                let s = -(-c * t).exp_m1();
                a + b * s * s
            }
            RateFunction::Tabulated(ref tab) => tab.spline.eval(t),
        }
    }

    /// `∫_{t0}^{t} f(θ) dθ`; closed form for analytic kinds, adaptive Simpson
    /// for tabulated rates.
    pub fn integrate(&self, t0: T, t: T) -> Result<T> {
        if t < t0 {
            return Err(Error::ReversedInterval {
                t0: t0.as_f64(),
                t: t.as_f64(),
            });
        }
        if t == t0 {
            return Ok(T::zero());
        }
        let two = T::lit(2.0);
        match *self {
            RateFunction::Constant { c } => Ok(c * (t - t0)),
            RateFunction::Sinusoid { a, b, omega, phi } => {
                if omega == T::zero() {
                    return Ok((a + b * phi.sin()) * (t - t0));
                }
                // cos(A) − cos(B) = −2 sin((A+B)/2) sin((A−B)/2)
                let mid = omega * (t + t0) / two + phi;
                let half = omega * (t - t0) / two;
                let cos_diff = -two * mid.sin() * half.sin();
                Ok(a * (t - t0) - b / omega * cos_diff)
            }
            RateFunction::ExpSaturating { a, b, c } => {
                if c == T::zero() {
                    return Ok(a * (t - t0));
                }
                // a + b(1 − 2e^{−cθ} + e^{−2cθ})
                let dt = t - t0;
                let e1 = (-c * t0).exp() * (-c * dt).exp_m1();
                let e2 = (-two * c * t0).exp() * (-two * c * dt).exp_m1();
                Ok((a + b) * dt + two * b / c * e1 - b / (two * c) * e2)
            }
            RateFunction::Tabulated(ref tab) => {
                let (lo, hi) = tab.span();
                if t0 < lo || t > hi {
                    return Err(Error::OutsideSupport {
                        t: if t0 < lo { t0.as_f64() } else { t.as_f64() },
                        lo: lo.as_f64(),
                        hi: hi.as_f64(),
                    });
                }
                self.integrate_numeric(t0, t)
            }
        }
    }

    /// Adaptive Simpson quadrature of the rate, independent of the closed forms.
    pub fn integrate_numeric(&self, t0: T, t: T) -> Result<T> {
        if t < t0 {
            return Err(Error::ReversedInterval {
                t0: t0.as_f64(),
                t: t.as_f64(),
            });
        }
        Ok(adaptive_simpson(
            |x| self.eval_analytic(x),
            t0,
            t,
            T::lit(QUADRATURE_TOL),
            QUADRATURE_MAX_DEPTH,
        ))
    }

    /// Per-step integrals over consecutive grid times (length `n − 1`).
    pub fn increment_table(&self, grid: &TimeGrid<T>) -> Result<Vec<T>> {
        let times = grid.times();
        times
            .windows(2)
            .map(|w| self.integrate(w[0], w[1]))
            .collect()
    }

    /// Dense-sampling check of finiteness, the magnitude bound and (optionally)
    /// strict positivity on `[t0, t_end]`.
    pub fn check_on_window(
        &self,
        t0: T,
        t_end: T,
        samples: usize,
        bound: T,
        must_be_positive: bool,
    ) -> Result<()> {
        let samples = samples.max(2);
        let step = (t_end - t0) / T::from_usize_lossy(samples - 1);
        for i in 0..samples {
            let t = if i + 1 == samples {
                t_end
            } else {
                t0 + step * T::from_usize_lossy(i)
            };
            let v = self.eval(t)?;
            if !v.is_finite() || v.abs() > bound {
                return Err(Error::InvalidParameter(format!(
                    "rate {} at t = {} exceeds bound {}",
                    v, t, bound
                )));
            }
            if must_be_positive && v <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "rate must be positive on the window; got {} at t = {}",
                    v, t
                )));
            }
        }
        Ok(())
    }

    /// Short human-readable tag used in report tables.
    pub fn label(&self) -> String {
        match self {
            RateFunction::Constant { c } => format!("{c}"),
            RateFunction::Sinusoid { a, b, omega, phi } => {
                format!("sinusoid({a};{b};{omega};{phi})")
            }
            RateFunction::ExpSaturating { a, b, c } => format!("exp_saturating({a};{b};{c})"),
            RateFunction::Tabulated(t) => format!("tabulated({} knots)", t.points.len()),
        }
    }
}

pub const DEFAULT_RATE_BOUND: f64 = 1e3;

/// Transmission and noise intensities together with the carrying capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePair<T> {
    pub lambda: RateFunction<T>,
    pub sigma2: RateFunction<T>,
    k: T,
    bound: T,
    noiseless: bool,
}

impl<T: Scalar> RatePair<T> {
    pub fn new(lambda: RateFunction<T>, sigma2: RateFunction<T>, k: T) -> Result<Self> {
        if !(k > T::zero() && k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "carrying capacity must be positive, got {k}"
            )));
        }
        if let Some(c) = sigma2.as_constant() {
            if c <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "sigma2 must be positive, got constant {c}"
                )));
            }
        }
        Ok(RatePair {
            lambda,
            sigma2,
            k,
            bound: T::lit(DEFAULT_RATE_BOUND),
            noiseless: false,
        })
    }

    /// Zero-noise pair (`σ² ≡ 0`) for testing the deterministic limit.
    pub fn noiseless(lambda: RateFunction<T>, k: T) -> Result<Self> {
        let mut pair = RatePair::new(lambda, RateFunction::constant(T::one()), k)?;
        pair.sigma2 = RateFunction::constant(T::zero());
        pair.noiseless = true;
        Ok(pair)
    }

    pub fn with_bound(mut self, bound: T) -> Self {
        self.bound = bound;
        self
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn is_noiseless(&self) -> bool {
        self.noiseless
    }

    pub fn is_homogeneous(&self) -> bool {
        self.lambda.as_constant().is_some() && self.sigma2.as_constant().is_some()
    }

    /// Validates both rates on `[t0, t_end]` using `samples` dense points.
    pub fn check_window(&self, t0: T, t_end: T, samples: usize) -> Result<()> {
        self.lambda
            .check_on_window(t0, t_end, samples, self.bound, false)?;
        self.sigma2
            .check_on_window(t0, t_end, samples, self.bound, !self.noiseless)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let n = if panels.is_multiple_of(2) { panels } else { panels + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(RateFunction::<f64>::constant(0.4).eval(7.0).unwrap(), 0.4);
        let s = RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0);
        assert!((s.eval(0.0).unwrap() - 0.4).abs() < 1e-15);
        let e = RateFunction::<f64>::exp_saturating(0.1, 0.01, 2.0);
        assert!((e.eval(1e3).unwrap() - 0.11).abs() < 1e-15);
        assert!((e.eval(0.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn integrate_examples() {
        assert!((RateFunction::<f64>::constant(0.4f64).integrate(0.0, 50.0).unwrap() - 20.0).abs() < 1e-12);
        let s = RateFunction::<f64>::sinusoid(0.4f64, 1.0, 1.0, 0.0);
        assert!((s.integrate(0.0, 2.0 * PI).unwrap() - 0.8 * PI).abs() < 1e-12);
        assert_eq!(s.integrate(3.0, 3.0).unwrap(), 0.0);
        assert!(matches!(
            s.integrate(3.0, 2.0),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn exp_saturating_closed_form_vs_composite_simpson() {
        let e = RateFunction::<f64>::exp_saturating(0.1, 0.01, 2.0);
        let closed = e.integrate(0.0, 5.0).unwrap();
        let oracle = composite_simpson(|t| 0.1 + 0.01 * (1.0 - (-2.0 * t).exp()).powi(2), 0.0, 5.0, 1_000_000);
        assert!((closed - oracle).abs() < 1e-9, "{closed} vs {oracle}");
    }

    #[test]
    fn increment_table_examples() {
        let g = TimeGrid::<f64>::new(0.0, 0.01, 3).unwrap();
        let inc = RateFunction::<f64>::constant(0.4).increment_table(&g).unwrap();
        assert_eq!(inc.len(), 2);
        assert!(inc.iter().all(|v| (v - 0.004).abs() < 1e-15));

        let g = TimeGrid::<f64>::new(0.0, 0.01, 5001).unwrap();
        for f in [
            RateFunction::<f64>::constant(0.4),
            RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0),
            RateFunction::<f64>::exp_saturating(0.1, 0.01, 2.0),
        ] {
            let total: f64 = f.increment_table(&g).unwrap().iter().sum();
            let whole = f.integrate(0.0, 50.0).unwrap();
            assert!((total - whole).abs() < 1e-9);
        }
        let s = RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0);
        let total: f64 = s.increment_table(&g).unwrap().iter().sum();
        let direct = s.integrate_numeric(0.0, 50.0).unwrap();
        assert!((total - direct).abs() < 1e-9);
    }

    #[test]
    fn tabulated_rate() {
        let pts: Vec<(f64, f64)> = (0..=20).map(|i| (i as f64, 0.2 + 0.01 * i as f64)).collect();
        let r = RateFunction::<f64>::tabulated(pts).unwrap();
        assert!((r.eval(4.5).unwrap() - 0.245).abs() < 1e-12);
        assert!(matches!(r.eval(21.0), Err(Error::OutsideSupport { .. })));
        // ∫_0^10 (0.2 + 0.01 t) dt = 2 + 0.5
        assert!((r.integrate(0.0, 10.0).unwrap() - 2.5).abs() < 1e-10);
        assert!(r.integrate(0.0, 30.0).is_err());
        assert!(RateFunction::<f64>::tabulated(vec![(1.0, 0.1), (0.5, 0.2)]).is_err());
    }

    #[test]
    fn json_descriptor_round_trip() {
        let js = r#"{"kind":"sinusoid","params":{"a":0.4,"b":1.0,"omega":1.0,"phi":0.0}}"#;
        let r: RateFunction<f64> = serde_json::from_str(js).unwrap();
        assert_eq!(r, RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0));
        let js = r#"{"kind":"tabulated","params":{"knots":[[0,0.1],[1,0.2],[2,0.4]]}}"#;
        let r: RateFunction<f64> = serde_json::from_str(js).unwrap();
        let back: RateFunction<f64> = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(r, back);
        let bad = r#"{"kind":"tabulated","params":{"knots":[[1,0.1],[0,0.2]]}}"#;
        assert!(serde_json::from_str::<RateFunction<f64>>(bad).is_err());
        let js = r#"{"kind":"constant","params":{"c":0.4}}"#;
        assert_eq!(serde_json::from_str::<RateFunction<f64>>(js).unwrap(), RateFunction::<f64>::constant(0.4));
    }

    #[test]
    fn pair_validation() {
        let l = RateFunction::<f64>::sinusoid(0.4, 1.0, 1.0, 0.0);
        assert!(RatePair::new(l.clone(), RateFunction::<f64>::constant(0.1), 0.0).is_err());
        assert!(RatePair::new(l.clone(), RateFunction::<f64>::constant(-0.1), 200.0).is_err());
        // Negative λ is tolerated; σ² must stay positive.
        let p = RatePair::new(l.clone(), RateFunction::<f64>::constant(0.1), 200.0).unwrap();
        p.check_window(0.0, 50.0, 50_010).unwrap();
        let p = RatePair::new(l, RateFunction::<f64>::sinusoid(0.0, 0.1, 1.0, 0.0), 200.0).unwrap();
        assert!(p.check_window(0.0, 50.0, 1000).is_err());
        let p = RatePair::new(RateFunction::<f64>::constant(5e3), RateFunction::<f64>::constant(0.1), 200.0).unwrap();
        assert!(p.check_window(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn f32_instantiation() {
        let s = RateFunction::<f32>::sinusoid(0.4, 1.0, 1.0, 0.0);
        let v = s.integrate(0.0, std::f32::consts::PI * 2.0).unwrap();
        assert!((v - 0.8 * std::f32::consts::PI).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn analytic() -> impl Strategy<Value = RateFunction<f64>> {
            prop_oneof![
                (-2.0..2.0f64).prop_map(RateFunction::constant),
                (-1.0..1.0f64, 0.0..2.0f64, 0.1..3.0f64, -3.0..3.0f64)
                    .prop_map(|(a, b, w, p)| RateFunction::<f64>::sinusoid(a, b, w, p)),
                (0.0..1.0f64, 0.0..0.5f64, 0.1..4.0f64)
                    .prop_map(|(a, b, c)| RateFunction::<f64>::exp_saturating(a, b, c)),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn additivity(f in analytic(), t0 in 0.0..20.0f64, a in 0.0..15.0f64, b in 0.0..15.0f64) {
                let s = t0 + a;
                let t = s + b;
                let lhs = f.integrate(t0, s).unwrap() + f.integrate(s, t).unwrap();
                prop_assert!((lhs - f.integrate(t0, t).unwrap()).abs() < 1e-9);
            }

            #[test]
            fn closed_form_matches_quadrature(f in analytic(), t0 in 0.0..20.0f64, len in 0.0..30.0f64) {
                let t = t0 + len;
                let cf = f.integrate(t0, t).unwrap();
                let q = f.integrate_numeric(t0, t).unwrap();
                prop_assert!((cf - q).abs() < 1e-9, "{cf} vs {q}");
            }
        }
    }

    #[test]
    fn monotone_for_nonnegative_rate() {
        let f = RateFunction::<f64>::exp_saturating(0.1, 0.01, 2.0);
        let mut prev = 0.0;
        for j in 0..=5000 {
            let v = f.integrate(0.0, j as f64 * 0.01).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}
