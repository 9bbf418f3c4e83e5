//! Laminar stream solutions H(p; s) and the critical constants of a flow regime.

use crate::quadrature::{integrate_toward, QuadratureError};
use crate::roots::{find_root, RootError};
use crate::scalar::Real;
use crate::vorticity::VorticityModel;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::Arc;
use thiserror::Error;

/// Depths beyond this are reported as infinite.
pub const DEPTH_OVERFLOW: f64 = 1e6;

const ABS_TOL: f64 = 1e-13;
const REL_TOL: f64 = 1e-14;
const ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StreamError {
    #[error("s = {s} is not above the stagnation speed s0 = {s0}")]
    BelowStagnation { s: f64, s0: f64 },
    #[error("r = {r} ≤ R_c = {rc}: no non-laminar solutions (subcritical regime)")]
    Subcritical { r: f64, rc: f64 },
    #[error("r = {r} rejected: it must stay below d0 = {d0} and R0 = {r0}")]
    Rejected { r: f64, d0: f64, r0: f64 },
    #[error("depth {depth} is outside the range (0, d0 = {d0}) of laminar depths")]
    DepthOutOfRange { depth: f64, d0: f64 },
    #[error("could not bracket {what}")]
    Bracket { what: &'static str },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Root(#[from] RootError),
}

fn f64_of<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// ∫₀^b (s² − 2Ω)^{-k/2} for k = 1 or 3, with s² passed directly.
fn moment<T: Real>(model: &VorticityModel<T>, s2: T, b: T, power: T) -> Result<T, QuadratureError> {
    let two = T::lit(2.0);
    let f = |p: T| (s2 - two * model.primitive(p)).powf(-power);
    let est = integrate_toward(f, T::zero(), b, model.peak_at(), T::tol(ABS_TOL), T::tol(REL_TOL))?;
    Ok(est.value)
}

/// d(s) = H(1; s).
pub fn depth<T: Real>(model: &VorticityModel<T>, s: T) -> Result<T, StreamError> {
    check_speed(model, s)?;
    Ok(moment(model, s * s, T::one(), T::lit(0.5))?)
}

/// R(s) = s²/2 − Ω(1) + d(s).
pub fn bernoulli<T: Real>(model: &VorticityModel<T>, s: T) -> Result<T, StreamError> {
    let d = depth(model, s)?;
    Ok(s * s * T::lit(0.5) - model.primitive(T::one()) + d)
}

/// ∫₀¹ (s² − 2Ω)^{-3/2}; equals one exactly at s = s_c.
pub fn criticality<T: Real>(model: &VorticityModel<T>, s: T) -> Result<T, StreamError> {
    check_speed(model, s)?;
    Ok(moment(model, s * s, T::one(), T::lit(1.5))?)
}

fn check_speed<T: Real>(model: &VorticityModel<T>, s: T) -> Result<(), StreamError> {
    let s0sq = model.s0_squared();
    if !(s > T::zero() && s * s > s0sq) {
        return Err(StreamError::BelowStagnation {
            s: f64_of(s),
            s0: f64_of(s0sq.sqrt()),
        });
    }
    Ok(())
}

/// A laminar flow with flat surface and bottom slip `s`.
#[derive(Debug, Clone)]
pub struct StreamSolution<T> {
    pub s: T,
    pub depth: T,
    pub bernoulli: T,
    model: Arc<VorticityModel<T>>,
}

impl<T: Real> StreamSolution<T> {
    pub fn model(&self) -> &Arc<VorticityModel<T>> {
        &self.model
    }

    /// H_p(p; s) = (s² − 2Ω(p))^{-1/2}.
    pub fn height_p(&self, p: T) -> T {
        (self.s * self.s - T::lit(2.0) * self.model.primitive(p)).powf(T::lit(-0.5))
    }

    /// H(p; s).
    pub fn height(&self, p: T) -> Result<T, StreamError> {
        Ok(moment(&self.model, self.s * self.s, p, T::lit(0.5))?)
    }

    /// H at increasing levels, integrating cell by cell.
    pub fn heights(&self, levels: &[T]) -> Result<Vec<T>, StreamError> {
        let s2 = self.s * self.s;
        let two = T::lit(2.0);
        let mut out = Vec::with_capacity(levels.len());
        let mut acc = T::zero();
        let mut prev = T::zero();
        for &p in levels {
            let f = |x: T| (s2 - two * self.model.primitive(x)).powf(T::lit(-0.5));
            let est = integrate_toward(f, prev, p, self.model.peak_at(), T::tol(ABS_TOL), T::tol(REL_TOL))?;
            acc = acc + est.value;
            out.push(acc);
            prev = p;
        }
        Ok(out)
    }
}

impl<T: Real> Serialize for StreamSolution<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record {
            s: f64,
            depth: f64,
            bernoulli: f64,
        }
        Record {
            s: f64_of(self.s),
            depth: f64_of(self.depth),
            bernoulli: f64_of(self.bernoulli),
        }
        .serialize(ser)
    }
}

pub fn stream_solution<T: Real>(
    model: Arc<VorticityModel<T>>,
    s: T,
) -> Result<StreamSolution<T>, StreamError> {
    let depth = depth(&model, s)?;
    let bernoulli = s * s * T::lit(0.5) - model.primitive(T::one()) + depth;
    Ok(StreamSolution {
        s,
        depth,
        bernoulli,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalParameters<T> {
    pub s0: T,
    pub sc: T,
    pub rc: T,
    pub r0: T,
    pub d0: T,
}

/// Finds `s` slightly above s0 with `pred(s)` true by halving toward s0.
fn approach_s0<T: Real, P: FnMut(T) -> Result<bool, StreamError>>(
    s0: T,
    from: T,
    mut pred: P,
    what: &'static str,
) -> Result<T, StreamError> {
    let mut gap = from - s0;
    for _ in 0..200 {
        gap = gap * T::lit(0.5);
        let s = s0 + gap;
        if s <= s0 || s <= T::zero() {
            break;
        }
        match pred(s) {
            Ok(true) => return Ok(s),
            Ok(false) => {}
            // integrand too sharp to resolve this close to s0: treat as diverging
            Err(StreamError::Quadrature(_)) => return Ok(s),
            Err(e) => return Err(e),
        }
    }
    Err(StreamError::Bracket { what })
}

pub fn critical_parameters<T: Real>(model: &VorticityModel<T>) -> Result<CriticalParameters<T>, StreamError> {
    let s0 = model.s0_squared().sqrt();
    let one = T::one();
    // g(s) = ∫(s² − 2Ω)^{-3/2} − 1 decreases from +∞ to −1
    let mut hi = (s0 * s0 + one).sqrt() + one;
    while criticality(model, hi)? >= one {
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            return Err(StreamError::Bracket { what: "s_c from above" });
        }
    }
    let lo = approach_s0(s0, hi, |s| Ok(criticality(model, s)? > one), "s_c from below")?;
    let mut failure = None;
    let sc = find_root(
        |s| match criticality(model, s) {
            Ok(v) => v - one,
            Err(e) => {
                failure.get_or_insert(e);
                T::nan()
            }
        },
        lo,
        hi,
        T::tol(ROOT_TOL),
        T::zero(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let sc = sc?;
    let rc = bernoulli(model, sc)?;
    let d0 = limiting_depth(model, s0);
    let r0 = if d0.is_finite() {
        s0 * s0 * T::lit(0.5) - model.primitive(one) + d0
    } else {
        T::infinity()
    };
    Ok(CriticalParameters { s0, sc, rc, r0, d0 })
}

/// d0 = lim d(s) as s → s0, or +∞ when it diverges.
fn limiting_depth<T: Real>(model: &VorticityModel<T>, s0: T) -> T {
    if model.peak_is_tangent() {
        return T::infinity();
    }
    let overflow = T::lit(DEPTH_OVERFLOW);
    let probe = s0 * (T::one() + T::lit(1e-8));
    let probe_depth = moment(model, probe * probe, T::one(), T::lit(0.5));
    match probe_depth {
        Ok(v) if v.is_finite() && v <= overflow => {}
        _ => return T::infinity(),
    }
    match moment(model, model.s0_squared(), T::one(), T::lit(0.5)) {
        Ok(v) if v.is_finite() && v <= overflow => v,
        _ => T::infinity(),
    }
}

/// All critical constants of the problem for a fixed Bernoulli constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRegime<T> {
    pub r: T,
    pub s0: T,
    pub sc: T,
    pub rc: T,
    pub r0: T,
    pub d0: T,
    pub s_minus: T,
    pub s_plus: T,
    pub d_plus: T,
    pub d_minus: T,
}

pub fn conjugate_streams<T: Real>(model: &VorticityModel<T>, r: T) -> Result<FlowRegime<T>, StreamError> {
    let crit = critical_parameters(model)?;
    let CriticalParameters { s0, sc, rc, r0, d0 } = crit;
    if !(r > rc) {
        return Err(StreamError::Subcritical {
            r: f64_of(r),
            rc: f64_of(rc),
        });
    }
    if !(r < d0 && r < r0) {
        return Err(StreamError::Rejected {
            r: f64_of(r),
            d0: f64_of(d0),
            r0: f64_of(r0),
        });
    }
    let excess = |s: T| bernoulli(model, s).map(|v| v - r);

    let lo = approach_s0(s0, sc, |s| Ok(excess(s)? > T::zero()), "s_minus")?;
    let s_minus = solve(&excess, lo, sc)?;

    let mut hi = (T::lit(2.0) * (r + model.primitive(T::one())).max(T::zero())).sqrt().max(sc * T::lit(2.0));
    while excess(hi)? <= T::zero() {
        hi = hi * T::lit(2.0);
    }
    let s_plus = solve(&excess, sc, hi)?;
    Ok(FlowRegime {
        r,
        s0,
        sc,
        rc,
        r0,
        d0,
        s_minus,
        s_plus,
        d_plus: depth(model, s_minus)?,
        d_minus: depth(model, s_plus)?,
    })
}

fn solve<T: Real, F: Fn(T) -> Result<T, StreamError>>(f: &F, a: T, b: T) -> Result<T, StreamError> {
    let mut failure = None;
    let root = find_root(
        |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::nan()
            }
        },
        a,
        b,
        T::tol(ROOT_TOL),
        T::zero(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(root?)
}

/// The slip ŝ of the laminar stream with depth `target`, i.e. d(ŝ) = target.
pub fn speed_for_depth<T: Real>(model: &VorticityModel<T>, target: T, d0: T) -> Result<T, StreamError> {
    let s0 = model.s0_squared().sqrt();
    if !(target > T::zero() && target < d0) {
        return Err(StreamError::DepthOutOfRange {
            depth: f64_of(target),
            d0: f64_of(d0),
        });
    }
    let excess = |s: T| depth(model, s).map(|v| v - target);
    // s² − 2Ω ≥ s² − s0², hence d(s) ≤ (s² − s0²)^{-1/2}
    let hi = (s0 * s0 + T::one() / (target * target)).sqrt() * T::lit(1.0 + 1e-9);
    if excess(hi)? > T::zero() {
        return Err(StreamError::Bracket { what: "speed for depth" });
    }
    let lo = approach_s0(s0, hi, |s| Ok(excess(s)? > T::zero()), "speed for depth")?;
    solve(&excess, lo, hi)
}

#[derive(Serialize, Deserialize)]
struct RegimeRecord {
    r: InfF64,
    s0: InfF64,
    sc: InfF64,
    #[serde(rename = "Rc")]
    rc: InfF64,
    #[serde(rename = "R0")]
    r0: InfF64,
    d0: InfF64,
    s_minus: InfF64,
    s_plus: InfF64,
    d_plus: InfF64,
    d_minus: InfF64,
}

/// f64 that serializes infinities as the strings "inf" and "-inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfF64(pub f64);

impl Serialize for InfF64 {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            ser.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            ser.serialize_str("-inf")
        } else {
            ser.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for InfF64 {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Ok(InfF64(x)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(InfF64(f64::INFINITY)),
                "-inf" => Ok(InfF64(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

impl<T: Real> Serialize for FlowRegime<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let c = |x: T| InfF64(f64_of(x));
        RegimeRecord {
            r: c(self.r),
            s0: c(self.s0),
            sc: c(self.sc),
            rc: c(self.rc),
            r0: c(self.r0),
            d0: c(self.d0),
            s_minus: c(self.s_minus),
            s_plus: c(self.s_plus),
            d_plus: c(self.d_plus),
            d_minus: c(self.d_minus),
        }
        .serialize(ser)
    }
}

impl<'de, T: Real> Deserialize<'de> for FlowRegime<T> {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let r = RegimeRecord::deserialize(de)?;
        let c = |x: InfF64| T::lit(x.0);
        Ok(FlowRegime {
            r: c(r.r),
            s0: c(r.s0),
            sc: c(r.sc),
            rc: c(r.rc),
            r0: c(r.r0),
            d0: c(r.d0),
            s_minus: c(r.s_minus),
            s_plus: c(r.s_plus),
            d_plus: c(r.d_plus),
            d_minus: c(r.d_minus),
        })
    }
}
