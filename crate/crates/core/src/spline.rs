//! Clamped cubic splines on non-uniform knots, with exact antiderivative.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SplineError {
    #[error("a spline needs at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot and value arrays differ in length ({knots} vs {values})")]
    LengthMismatch { knots: usize, values: usize },
    #[error("knots must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite spline data at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline<T> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    /// Clamped spline with end slopes estimated by second-order one-sided differences.
    pub fn clamped_estimated(x: Vec<T>, y: Vec<T>) -> Result<Self, SplineError> {
        validate(&x, &y)?;
        let n = x.len();
        let (s0, s1) = if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            (s, s)
        } else {
            (
                one_sided_slope(x[0], x[1], x[2], y[0], y[1], y[2]),
                one_sided_slope(x[n - 1], x[n - 2], x[n - 3], y[n - 1], y[n - 2], y[n - 3]),
            )
        };
        Self::clamped(x, y, s0, s1)
    }

    /// Clamped spline with prescribed end slopes.
    pub fn clamped(x: Vec<T>, y: Vec<T>, start_slope: T, end_slope: T) -> Result<Self, SplineError> {
        validate(&x, &y)?;
        let n = x.len();
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut sup = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        diag[0] = two * h[0];
        sup[0] = h[0];
        rhs[0] = six * ((y[1] - y[0]) / h[0] - start_slope);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = two * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = six * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = two * h[n - 2];
        rhs[n - 1] = six * (end_slope - (y[n - 1] - y[n - 2]) / h[n - 2]);
        let m = solve_tridiagonal(&sub, &diag, &sup, rhs);
        let mut spline = CubicSpline {
            x,
            y,
            m,
            cumulative: Vec::new(),
        };
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = T::zero();
        cumulative.push(acc);
        for i in 0..n - 1 {
            acc = acc + spline.segment_integral(i, spline.x[i + 1]);
            cumulative.push(acc);
        }
        spline.cumulative = cumulative;
        Ok(spline)
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    fn segment(&self, x: T) -> usize {
        let n = self.x.len();
        let k = self.x.partition_point(|&knot| knot <= x);
        k.saturating_sub(1).min(n - 2)
    }

    fn coefficients(&self, i: usize) -> (T, T, T, T, T) {
        let h = self.x[i + 1] - self.x[i];
        let six = T::lit(6.0);
        let c0 = self.y[i] / h - self.m[i] * h / six;
        let c1 = self.y[i + 1] / h - self.m[i + 1] * h / six;
        (h, self.m[i], self.m[i + 1], c0, c1)
    }

    pub fn eval(&self, x: T) -> T {
        let i = self.segment(x);
        let (h, m0, m1, c0, c1) = self.coefficients(i);
        let a = self.x[i + 1] - x;
        let b = x - self.x[i];
        let six = T::lit(6.0);
        m0 * a * a * a / (six * h) + m1 * b * b * b / (six * h) + c0 * a + c1 * b
    }

    pub fn derivative(&self, x: T) -> T {
        let i = self.segment(x);
        let (h, m0, m1, c0, c1) = self.coefficients(i);
        let a = self.x[i + 1] - x;
        let b = x - self.x[i];
        let two = T::lit(2.0);
        -m0 * a * a / (two * h) + m1 * b * b / (two * h) - c0 + c1
    }

    fn segment_integral(&self, i: usize, x: T) -> T {
        let (h, m0, m1, c0, c1) = self.coefficients(i);
        let a = self.x[i + 1] - x;
        let b = x - self.x[i];
        let two = T::lit(2.0);
        let q = T::lit(24.0);
        m0 * (h * h * h * h - a * a * a * a) / (q * h)
            + m1 * b * b * b * b / (q * h)
            + c0 * (h * h - a * a) / two
            + c1 * b * b / two
    }

    /// ∫ from the first knot to `x`.
    pub fn integral(&self, x: T) -> T {
        let i = self.segment(x);
        self.cumulative[i] + self.segment_integral(i, x)
    }
}

fn validate<T: Real>(x: &[T], y: &[T]) -> Result<(), SplineError> {
    if x.len() != y.len() {
        return Err(SplineError::LengthMismatch {
            knots: x.len(),
            values: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(SplineError::TooFewKnots(x.len()));
    }
    for (i, (a, b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() || !b.is_finite() {
            return Err(SplineError::NonFinite(i));
        }
    }
    for i in 1..x.len() {
        if x[i] <= x[i - 1] {
            return Err(SplineError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Derivative at `x0` of the parabola through three points.
fn one_sided_slope<T: Real>(x0: T, x1: T, x2: T, y0: T, y1: T, y2: T) -> T {
    let d1 = x1 - x0;
    let d2 = x2 - x0;
    let w1 = d2 / (d1 * (d2 - d1));
    let w2 = -d1 / (d2 * (d2 - d1));
    -(w1 + w2) * y0 + w1 * y1 + w2 * y2
}

pub(crate) fn solve_tridiagonal<T: Real>(sub: &[T], diag: &[T], sup: &[T], mut rhs: Vec<T>) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut beta = diag[0];
    c[0] = sup[0] / beta;
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / beta;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - c[i] * rhs[i + 1];
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reproduces_cubic_exactly() {
        let f = |x: f64| x * x * x - 2.0 * x + 0.5;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let xs: Vec<f64> = vec![0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let ys = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::clamped(xs, ys, df(0.0), df(1.0)).unwrap();
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert_abs_diff_eq!(s.eval(x), f(x), epsilon = 1e-13);
            assert_abs_diff_eq!(s.derivative(x), df(x), epsilon = 1e-12);
            let exact = x.powi(4) / 4.0 - x * x + 0.5 * x;
            assert_abs_diff_eq!(s.integral(x), exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn estimated_slopes_for_quadratic() {
        let xs: Vec<f64> = vec![0.0, 0.25, 0.5, 1.0];
        let ys = xs.iter().map(|&x| 1.0 + x * x).collect();
        let s = CubicSpline::clamped_estimated(xs, ys).unwrap();
        assert_abs_diff_eq!(s.derivative(0.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.derivative(1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_knots() {
        assert_eq!(
            CubicSpline::clamped_estimated(vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 2.0]).unwrap_err(),
            SplineError::NotIncreasing(2)
        );
        assert_eq!(
            CubicSpline::clamped_estimated(vec![0.0, 1.0], vec![0.0, f64::NAN]).unwrap_err(),
            SplineError::NonFinite(1)
        );
    }
}
