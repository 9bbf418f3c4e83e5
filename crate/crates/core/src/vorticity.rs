//! Vorticity functions ω(p) on [0, 1] and their primitives Ω(p) = ∫₀^p ω.

use crate::roots::find_root;
use crate::scalar::Real;
use crate::spline::{CubicSpline, SplineError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hölder exponent declared for every supported model. All of them are at least C².
pub const DECLARED_HOLDER_GAMMA: f64 = 0.5;

/// Samples used to infer sign information and locate the maximum of Ω.
const SIGN_SAMPLES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VorticitySpec {
    Zero,
    /// ω(p) = b.
    Constant { value: f64 },
    /// ω(p) = a·p.
    Linear { slope: f64 },
    /// Samples (p_k, ω_k) spanning [0, 1], interpolated by a clamped cubic spline.
    Tabulated { p: Vec<f64>, omega: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaClass {
    Zero,
    Nonnegative,
    General,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VorticityError {
    #[error("vorticity parameter is not finite")]
    NonFiniteParameter,
    #[error("vorticity table sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("vorticity table must span p = 0 to p = 1, got [{first}, {last}]")]
    TableSpan { first: f64, last: f64 },
    #[error("vorticity table: {0}")]
    Spline(#[from] SplineError),
}

#[derive(Debug, Clone)]
enum Kind<T> {
    Zero,
    Constant(T),
    Linear(T),
    Tabulated(CubicSpline<T>),
}

#[derive(Debug, Clone)]
pub struct VorticityModel<T> {
    spec: VorticitySpec,
    kind: Kind<T>,
    class: OmegaClass,
    holder_gamma: T,
    peak_at: T,
    min_omega: T,
}

impl<T: Real> VorticityModel<T> {
    pub fn new(spec: VorticitySpec) -> Result<Self, VorticityError> {
        let kind = match &spec {
            VorticitySpec::Zero => Kind::Zero,
            VorticitySpec::Constant { value } => {
                finite(*value)?;
                Kind::Constant(T::lit(*value))
            }
            VorticitySpec::Linear { slope } => {
                finite(*slope)?;
                Kind::Linear(T::lit(*slope))
            }
            VorticitySpec::Tabulated { p, omega } => {
                for (index, (a, b)) in p.iter().zip(omega).enumerate() {
                    if !a.is_finite() || !b.is_finite() {
                        return Err(VorticityError::NonFiniteSample { index });
                    }
                }
                if let (Some(&first), Some(&last)) = (p.first(), p.last()) {
                    if first.abs() > 1e-12 || (last - 1.0).abs() > 1e-12 {
                        return Err(VorticityError::TableSpan { first, last });
                    }
                }
                let mut knots: Vec<T> = p.iter().map(|&x| T::lit(x)).collect();
                if let Some(k) = knots.first_mut() {
                    *k = T::zero();
                }
                if let Some(k) = knots.last_mut() {
                    *k = T::one();
                }
                let values = omega.iter().map(|&x| T::lit(x)).collect();
                Kind::Tabulated(CubicSpline::clamped_estimated(knots, values)?)
            }
        };
        let mut model = VorticityModel {
            spec,
            kind,
            class: OmegaClass::General,
            holder_gamma: T::lit(DECLARED_HOLDER_GAMMA),
            peak_at: T::zero(),
            min_omega: T::zero(),
        };
        model.classify();
        Ok(model)
    }

    fn classify(&mut self) {
        let n = SIGN_SAMPLES;
        let grid = |k: usize| T::lit(k as f64 / n as f64);
        let samples: Vec<T> = (0..=n).map(|k| self.omega(grid(k))).collect();
        let min_omega = samples.iter().copied().fold(T::infinity(), T::min);
        let all_zero = samples.iter().all(|w| *w == T::zero());
        self.min_omega = min_omega;
        self.class = if all_zero {
            OmegaClass::Zero
        } else if min_omega >= T::zero() {
            OmegaClass::Nonnegative
        } else {
            OmegaClass::General
        };
        self.peak_at = match self.kind {
            Kind::Zero => T::zero(),
            Kind::Constant(b) | Kind::Linear(b) => {
                if b > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Kind::Tabulated(_) => self.locate_peak(&samples),
        };
    }

    /// Argmax of Ω over [0, 1], refined to a zero of ω when it is interior.
    fn locate_peak(&self, omega_samples: &[T]) -> T {
        let n = omega_samples.len() - 1;
        let grid = |k: usize| T::lit(k as f64 / n as f64);
        let mut best = 0;
        let mut best_value = T::zero();
        for k in 1..=n {
            let v = self.primitive(grid(k));
            if v > best_value {
                best = k;
                best_value = v;
            }
        }
        if best == 0 || best == n {
            return grid(best);
        }
        // ω changes sign from + to − somewhere in the neighbouring cells
        let (a, b) = (grid(best - 1), grid(best + 1));
        find_root(|p| self.omega(p), a, b, T::tol(1e-15), T::zero()).unwrap_or(grid(best))
    }

    pub fn spec(&self) -> &VorticitySpec {
        &self.spec
    }

    pub fn class(&self) -> OmegaClass {
        self.class
    }

    pub fn holder_gamma(&self) -> T {
        self.holder_gamma
    }

    pub fn omega(&self, p: T) -> T {
        match &self.kind {
            Kind::Zero => T::zero(),
            Kind::Constant(b) => *b,
            Kind::Linear(a) => *a * p,
            Kind::Tabulated(s) => s.eval(p),
        }
    }

    /// Ω(p) = ∫₀^p ω.
    pub fn primitive(&self, p: T) -> T {
        match &self.kind {
            Kind::Zero => T::zero(),
            Kind::Constant(b) => *b * p,
            Kind::Linear(a) => *a * p * p * T::lit(0.5),
            Kind::Tabulated(s) => s.integral(p),
        }
    }

    /// Smallest sampled value of ω.
    pub fn min_omega(&self) -> T {
        self.min_omega
    }

    /// Location p* of max Ω on [0, 1].
    pub fn peak_at(&self) -> T {
        self.peak_at
    }

    /// s0² = max(0, max 2Ω).
    pub fn s0_squared(&self) -> T {
        (T::lit(2.0) * self.primitive(self.peak_at)).max(T::zero())
    }

    /// True when s² − 2Ω touches zero at p* to second order, so that the
    /// stream depth diverges as s → s0.
    pub fn peak_is_tangent(&self) -> bool {
        let w = self.omega(self.peak_at).abs();
        let scale = self.min_omega.abs().max(T::one());
        w <= T::tol(1e-12) * scale
    }
}

fn finite(x: f64) -> Result<(), VorticityError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(VorticityError::NonFiniteParameter)
    }
}
