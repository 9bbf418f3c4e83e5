//! Dispersion relation: the Sturm–Liouville problem
//! −(φ'/H_p³)' + λ²φ/H_p = 0, φ(0) = 0, φ'(1) = H_p³(1)φ(1),
//! solved by shooting in λ.

use crate::roots::{find_root, RootError};
use crate::scalar::Real;
use crate::streamflow::StreamSolution;
use serde::{Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_STEPS: usize = 2048;
const SCAN_POINTS: usize = 64;
const LAMBDA_LO: f64 = 1e-6;
const LAMBDA_HI: f64 = 100.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DispersionError {
    #[error("no bifurcation point: boundary residual keeps one sign on ({lo}, {hi}) for s = {s}")]
    NoBifurcation { s: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Trajectory of y1 = φ and y2 = φ'/H_p³ on a uniform grid.
struct Shot<T> {
    y1: Vec<T>,
    y2: Vec<T>,
}

/// Integrates y1' = H_p³ y2, y2' = λ² y1 / H_p from y1(0) = 0, φ'(0) = 1 by RK4.
fn shoot<T: Real>(stream: &StreamSolution<T>, lambda: T, steps: usize, keep: bool) -> Shot<T> {
    let h = T::one() / T::lit(steps as f64);
    let half = T::lit(0.5);
    let l2 = lambda * lambda;
    let rhs = |p: T, y1: T, y2: T| {
        let hp = stream.height_p(p);
        (hp * hp * hp * y2, l2 * y1 / hp)
    };
    let hp0 = stream.height_p(T::zero());
    let mut y1 = T::zero();
    let mut y2 = T::one() / (hp0 * hp0 * hp0);
    let cap = if keep { steps + 1 } else { 1 };
    let mut shot = Shot {
        y1: Vec::with_capacity(cap),
        y2: Vec::with_capacity(cap),
    };
    shot.y1.push(y1);
    shot.y2.push(y2);
    for k in 0..steps {
        let p = T::lit(k as f64) * h;
        let (a1, a2) = rhs(p, y1, y2);
        let (b1, b2) = rhs(p + half * h, y1 + half * h * a1, y2 + half * h * a2);
        let (c1, c2) = rhs(p + half * h, y1 + half * h * b1, y2 + half * h * b2);
        let (d1, d2) = rhs(p + h, y1 + h * c1, y2 + h * c2);
        let sixth = h / T::lit(6.0);
        y1 = y1 + sixth * (a1 + T::lit(2.0) * (b1 + c1) + d1);
        y2 = y2 + sixth * (a2 + T::lit(2.0) * (b2 + c2) + d2);
        if keep {
            shot.y1.push(y1);
            shot.y2.push(y2);
        } else {
            shot.y1[0] = y1;
            shot.y2[0] = y2;
        }
    }
    shot
}

/// Boundary residual (φ'(1) − H_p³(1)φ(1)) / H_p³(1) for trial λ.
pub fn boundary_residual<T: Real>(stream: &StreamSolution<T>, lambda: T, steps: usize) -> T {
    let shot = shoot(stream, lambda, steps, false);
    shot.y2[0] - shot.y1[0]
}

#[derive(Debug, Clone)]
pub struct BifurcationSeed<T> {
    pub lambda0: T,
    pub p_grid: Vec<T>,
    pub phi0: Vec<T>,
    /// φ₀' on `p_grid`, used for Hermite interpolation.
    pub dphi0: Vec<T>,
    pub stream: StreamSolution<T>,
}

impl<T: Real> BifurcationSeed<T> {
    /// φ₀(p) by cubic Hermite interpolation between shooting nodes.
    pub fn phi_at(&self, p: T) -> T {
        let n = self.p_grid.len() - 1;
        let h = T::one() / T::lit(n as f64);
        let x = (p / h).max(T::zero());
        let k = x.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = x - T::lit(k as f64);
        let (t2, t3) = (t * t, t * t * t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.phi0[k] + h10 * h * self.dphi0[k] + h01 * self.phi0[k + 1] + h11 * h * self.dphi0[k + 1]
    }
}

impl<T: Real> Serialize for BifurcationSeed<T> {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Record {
            lambda0: f64,
            phi0: Vec<f64>,
            p_grid: Vec<f64>,
        }
        let f = |v: &[T]| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
        Record {
            lambda0: self.lambda0.to_f64().unwrap_or(f64::NAN),
            phi0: f(&self.phi0),
            p_grid: f(&self.p_grid),
        }
        .serialize(ser)
    }
}

/// Geometric grid of trial λ values on the search bracket.
fn scan_grid<T: Real>() -> Vec<T> {
    let ratio = (LAMBDA_HI / LAMBDA_LO).ln() / (SCAN_POINTS - 1) as f64;
    (0..SCAN_POINTS)
        .map(|k| T::lit(LAMBDA_LO * (ratio * k as f64).exp()))
        .collect()
}

/// Sign changes of the boundary residual over the pre-scan grid.
pub fn residual_sign_changes<T: Real>(stream: &StreamSolution<T>, steps: usize) -> usize {
    let values: Vec<T> = scan_grid::<T>()
        .into_iter()
        .map(|l| boundary_residual(stream, l, steps))
        .take_while(|v| v.is_finite())
        .collect();
    values
        .windows(2)
        .filter(|w| (w[0] < T::zero()) != (w[1] < T::zero()))
        .count()
}

pub fn dispersion_eigenvalue<T: Real>(stream: &StreamSolution<T>) -> Result<BifurcationSeed<T>, DispersionError> {
    dispersion_eigenvalue_with_steps(stream, DEFAULT_STEPS)
}

pub fn dispersion_eigenvalue_with_steps<T: Real>(
    stream: &StreamSolution<T>,
    steps: usize,
) -> Result<BifurcationSeed<T>, DispersionError> {
    let grid = scan_grid::<T>();
    let mut bracket = None;
    let mut prev = (grid[0], boundary_residual(stream, grid[0], steps));
    for &l in &grid[1..] {
        let v = boundary_residual(stream, l, steps);
        if !v.is_finite() {
            break;
        }
        if (prev.1 < T::zero()) != (v < T::zero()) {
            bracket = Some((prev.0, l));
            break;
        }
        prev = (l, v);
    }
    let (lo, hi) = bracket.ok_or(DispersionError::NoBifurcation {
        s: stream.s.to_f64().unwrap_or(f64::NAN),
        lo: LAMBDA_LO,
        hi: LAMBDA_HI,
    })?;
    let lambda0 = find_root(
        |l| boundary_residual(stream, l, steps),
        lo,
        hi,
        T::tol(1e-15),
        T::zero(),
    )?;
    let shot = shoot(stream, lambda0, steps, true);
    let scale = T::one() / shot.y1[steps];
    let h = T::one() / T::lit(steps as f64);
    let p_grid: Vec<T> = (0..=steps).map(|k| T::lit(k as f64) * h).collect();
    let phi0 = shot.y1.iter().map(|&v| v * scale).collect();
    let dphi0 = shot
        .y2
        .iter()
        .zip(&p_grid)
        .map(|(&v, &p)| {
            let hp = stream.height_p(p);
            v * hp * hp * hp * scale
        })
        .collect();
    Ok(BifurcationSeed {
        lambda0,
        p_grid,
        phi0,
        dphi0,
        stream: stream.clone(),
    })
}

/// w(q, p) = φ₀(p) cos q on the given grid, indexed `[i][j]` for q_i, p_j.
pub fn kernel_mode<T: Real>(seed: &BifurcationSeed<T>, q_grid: &[T], p_grid: &[T]) -> Vec<Vec<T>> {
    let phi: Vec<T> = p_grid.iter().map(|&p| seed.phi_at(p)).collect();
    q_grid
        .iter()
        .map(|&q| phi.iter().map(|&f| f * q.cos()).collect())
        .collect()
}
