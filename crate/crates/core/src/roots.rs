//! Bracketed scalar root finding: bisection safeguarding an Illinois-type secant step.

use crate::scalar::Real;
use thiserror::Error;

const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}]: f(a) = {fa:e}, f(b) = {fb:e}")]
    NotBracketed { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function value is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("root finding stalled after {iterations} iterations")]
    Stalled { iterations: usize },
}

fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Finds a root of `f` in `[a, b]` given `f(a)·f(b) ≤ 0`, stopping once the bracket
/// is narrower than `x_tol` or `|f| ≤ f_tol`.
pub fn find_root<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    x_tol: T,
    f_tol: T,
) -> Result<T, RootError> {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut fa = f(a);
    let mut fb = f(b);
    for (x, fx) in [(a, fa), (b, fb)] {
        if !fx.is_finite() {
            return Err(RootError::NonFinite { x: as_f64(x) });
        }
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed {
            a: as_f64(a),
            b: as_f64(b),
            fa: as_f64(fa),
            fb: as_f64(fb),
        });
    }
    let half = T::lit(0.5);
    // which endpoint was retained on the previous step: -1 left, 1 right
    let mut retained = 0i8;
    let mut width_before = b - a;
    for iteration in 0..MAX_ITERATIONS {
        let width = b - a;
        if width <= x_tol {
            return Ok(if fa.abs() <= fb.abs() { a } else { b });
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let bisect = iteration % 3 == 2 && width > half * width_before;
        let x = if bisect || !(secant > a && secant < b) {
            half * (a + b)
        } else {
            secant
        };
        if iteration % 3 == 2 {
            width_before = width;
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(RootError::NonFinite { x: as_f64(x) });
        }
        if fx.abs() <= f_tol || fx == T::zero() {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if retained == 1 {
                fb = fb * half;
            }
            retained = 1;
        } else {
            b = x;
            fb = fx;
            if retained == -1 {
                fa = fa * half;
            }
            retained = -1;
        }
    }
    Err(RootError::Stalled {
        iterations: MAX_ITERATIONS,
    })
}
