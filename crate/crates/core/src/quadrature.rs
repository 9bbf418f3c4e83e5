//! Adaptive Gauss–Kronrod quadrature.
//!
//! The stream-solution integrands `(s² − 2Ω)^{-1/2}` and `(s² − 2Ω)^{-3/2}` are
//! smooth for `s > s0` but develop an endpoint or interior singularity as
//! `s → s0`. [`integrate_toward`] removes a square-root singularity at a known
//! point by the substitution `p = p* ± u²`.

use crate::scalar::Real;
use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {intervals} intervals")]
    NotConverged {
        value: f64,
        error: f64,
        intervals: usize,
    },
    #[error("integrand produced a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

struct Interval<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: FnMut(T) -> T>(
    f: &mut F,
    a: T,
    b: T,
) -> Result<Interval<T>, QuadratureError> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let radius = half * (b - a);
    let mut check = |x: T| -> Result<T, QuadratureError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadratureError::NonFinite {
                x: x.to_f64().unwrap_or(f64::NAN),
            })
        }
    };
    let fc = check(center)?;
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for k in 0..7 {
        let dx = radius * T::lit(XGK[k]);
        let pair = check(center - dx)? + check(center + dx)?;
        kron = kron + pair * T::lit(WGK[k]);
        if k % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[k / 2]);
        }
    }
    Ok(Interval {
        a,
        b,
        value: kron * radius,
        error: ((kron - gauss) * radius).abs(),
    })
}

/// Globally adaptive G7/K15 quadrature of `f` over `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Estimate<T>, QuadratureError> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
            intervals: 0,
        });
    }
    let mut intervals = vec![kronrod(&mut f, a, b)?];
    loop {
        let (value, error) = intervals
            .iter()
            .fold((T::zero(), T::zero()), |(v, e), iv| (v + iv.value, e + iv.error));
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                intervals: intervals.len(),
            });
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(QuadratureError::NotConverged {
                value: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
                intervals: intervals.len(),
            });
        }
        // split the interval with the largest error; ties resolve to the lowest index
        let mut worst = 0;
        for (k, iv) in intervals.iter().enumerate() {
            if iv.error > intervals[worst].error {
                worst = k;
            }
        }
        let iv = intervals.swap_remove(worst);
        let mid = T::lit(0.5) * (iv.a + iv.b);
        if !(mid > iv.a && mid < iv.b) {
            // interval cannot be split further in this precision
            return Err(QuadratureError::NotConverged {
                value: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
                intervals: intervals.len() + 1,
            });
        }
        intervals.push(kronrod(&mut f, iv.a, mid)?);
        intervals.push(kronrod(&mut f, mid, iv.b)?);
    }
}

/// Integrates `f` over `[a, b]` with the substitution `p = p* ∓ u²` on each side of
/// `singular_at ∈ [a, b]`, which turns an inverse-square-root singularity at `p*`
/// into a bounded integrand.
pub fn integrate_toward<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    singular_at: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Estimate<T>, QuadratureError> {
    let two = T::lit(2.0);
    let star = singular_at.max(a).min(b);
    let mut total = Estimate {
        value: T::zero(),
        error: T::zero(),
        intervals: 0,
    };
    let half_tol = abs_tol / two;
    if star > a {
        let umax = (star - a).sqrt();
        let left = integrate(|u: T| two * u * f(star - u * u), T::zero(), umax, half_tol, rel_tol)?;
        total.value = total.value + left.value;
        total.error = total.error + left.error;
        total.intervals += left.intervals;
    }
    if star < b {
        let umax = (b - star).sqrt();
        let right = integrate(|u: T| two * u * f(star + u * u), T::zero(), umax, half_tol, rel_tol)?;
        total.value = total.value + right.value;
        total.error = total.error + right.error;
        total.intervals += right.intervals;
    }
    Ok(total)
}
