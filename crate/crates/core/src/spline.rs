//! Natural cubic interpolating splines with analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cubic on `[knots[i], knots[i+1]]`: `a + b·s + c·s² + d·s³` with `s = t − knots[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicPiece<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

/// Interpolating cubic spline with zero second derivative at both ends.
///
/// Outside the knot span the curve continues as the straight line that the
/// natural end condition implies, so value and slope stay continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve<T> {
    knots: Vec<T>,
    pieces: Vec<CubicPiece<T>>,
    last_value: T,
    last_slope: T,
}

impl<T: Scalar> SplineCurve<T> {
    /// Fits the natural spline through `(knots[i], values[i])`. Needs at least
    /// two strictly increasing finite knots.
    pub fn natural(knots: &[T], values: &[T]) -> Result<Self> {
        let n = knots.len();
        if n != values.len() {
            return Err(Error::InvalidParameter(format!(
                "spline: {} knots but {} values",
                n,
                values.len()
            )));
        }
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "spline needs at least 2 knots, got {n}"
            )));
        }
        if knots.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("spline: non-finite input".into()));
        }
        if let Some(i) = knots.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "spline knots not strictly increasing at index {}",
                i + 1
            )));
        }

        let h: Vec<T> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slopes: Vec<T> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // Second derivatives at the knots; ends pinned to zero.
        let mut m = vec![T::zero(); n];
        if n > 2 {
            let two = T::lit(2.0);
            let six = T::lit(6.0);
            let interior = n - 2;
            let mut diag = Vec::with_capacity(interior);
            let mut rhs = Vec::with_capacity(interior);
            for i in 1..n - 1 {
                diag.push(two * (h[i - 1] + h[i]));
                rhs.push(six * (slopes[i] - slopes[i - 1]));
            }
            // Thomas algorithm; sub-diagonal entry for row k is h[k], super-diagonal h[k+1].
            for k in 1..interior {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * h[k];
                let prev = rhs[k - 1];
                rhs[k] -= w * prev;
            }
            m[interior] = rhs[interior - 1] / diag[interior - 1];
            for k in (0..interior - 1).rev() {
                m[k + 1] = (rhs[k] - h[k + 1] * m[k + 2]) / diag[k];
            }
        }

        let six = T::lit(6.0);
        let two = T::lit(2.0);
        let pieces: Vec<CubicPiece<T>> = (0..n - 1)
            .map(|i| CubicPiece {
                a: values[i],
                b: slopes[i] - h[i] * (two * m[i] + m[i + 1]) / six,
                c: m[i] / two,
                d: (m[i + 1] - m[i]) / (six * h[i]),
            })
            .collect();
        let last = pieces[n - 2];
        let hl = h[n - 2];
        let last_slope = last.b + hl * (two * last.c + T::lit(3.0) * last.d * hl);

        Ok(SplineCurve {
            knots: knots.to_vec(),
            pieces,
            last_value: values[n - 1],
            last_slope,
        })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn pieces(&self) -> &[CubicPiece<T>] {
        &self.pieces
    }

    pub fn start(&self) -> T {
        self.knots[0]
    }

    pub fn end(&self) -> T {
        self.knots[self.knots.len() - 1]
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.start() && t <= self.end()
    }

    fn locate(&self, t: T) -> usize {
        let idx = self.knots.partition_point(|&k| k <= t);
        idx.saturating_sub(1).min(self.pieces.len() - 1)
    }

    pub fn eval(&self, t: T) -> T {
        if t < self.start() {
            let p = self.pieces[0];
            return p.a + p.b * (t - self.start());
        }
        if t > self.end() {
            return self.last_value + self.last_slope * (t - self.end());
        }
        let i = self.locate(t);
        let p = self.pieces[i];
        let s = t - self.knots[i];
        p.a + s * (p.b + s * (p.c + s * p.d))
    }

    pub fn derivative(&self, t: T) -> T {
        if t < self.start() {
            return self.pieces[0].b;
        }
        if t > self.end() {
            return self.last_slope;
        }
        let i = self.locate(t);
        let p = self.pieces[i];
        let s = t - self.knots[i];
        p.b + s * (T::lit(2.0) * p.c + T::lit(3.0) * p.d * s)
    }

    pub fn second_derivative(&self, t: T) -> T {
        if !self.contains(t) {
            return T::zero();
        }
        let i = self.locate(t);
        let p = self.pieces[i];
        let s = t - self.knots[i];
        T::lit(2.0) * p.c + T::lit(6.0) * p.d * s
    }
}
