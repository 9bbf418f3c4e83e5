//! Discretized height function h(q, p) on the half period q ∈ [0, π] and the
//! fixed-period system it solves, with λ as an extra unknown.

mod dual;
mod io;
mod newton;
mod system;

pub use io::{field_csv, field_sidecar, read_field, write_field, FieldIoError, FieldSidecar, LoadedField};
pub use newton::{newton_solve, newton_solve_system, NewtonOptions, NewtonReport};
pub use system::{Constraint, HeightSystem, ResidualVector};

use crate::grid::{Grid, PSpacing};
use crate::spline::CubicSpline;
use crate::streamflow::{StreamError, StreamSolution};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HeightFieldError {
    #[error("stagnation breach: h_p = {hp:e} ≤ 0 at column {i}, level {j}")]
    StagnationBreach { i: usize, j: usize, hp: f64 },
    #[error("approach to interior stagnation: damping exhausted at Newton iteration {iteration}")]
    InteriorStagnation { iteration: usize },
    #[error("Newton did not converge after {iterations} iterations (residual {residual_norm:e})")]
    NotConverged { iterations: usize, residual_norm: f64 },
    #[error("Jacobian factorization failed")]
    Singular,
    #[error("non-finite value in the height field")]
    NonFinite,
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("bottom condition h = 0 violated at column {0}")]
    Bottom(usize),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// Heights on columns i = 0..=Nq/2 (q = i·Δq) and levels j = 0..=Np, with λ and r.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    grid: Grid,
    h: Vec<f64>,
    pub lambda: f64,
    pub r: f64,
}

impl HeightField {
    /// `h` is column-major over the half period: `h[i * (np + 1) + j]`.
    pub fn new(grid: Grid, h: Vec<f64>, lambda: f64, r: f64) -> Result<Self, HeightFieldError> {
        let stride = grid.np + 1;
        let expected = (grid.half() + 1) * stride;
        if h.len() != expected {
            return Err(HeightFieldError::Dimension { expected, got: h.len() });
        }
        if h.iter().any(|v| !v.is_finite()) || !lambda.is_finite() {
            return Err(HeightFieldError::NonFinite);
        }
        for i in 0..=grid.half() {
            if h[i * stride] != 0.0 {
                return Err(HeightFieldError::Bottom(i));
            }
        }
        Ok(HeightField { grid, h, lambda, r })
    }

    /// The laminar field h = H(p; s), which solves the system for every λ.
    pub fn from_stream(grid: Grid, stream: &StreamSolution<f64>, lambda: f64, r: f64) -> Result<Self, HeightFieldError> {
        let column = stream.heights(grid.p())?;
        let mut h = Vec::with_capacity((grid.half() + 1) * (grid.np + 1));
        for _ in 0..=grid.half() {
            h.extend_from_slice(&column);
        }
        h[0] = 0.0;
        for i in 0..=grid.half() {
            h[i * (grid.np + 1)] = 0.0;
        }
        HeightField::new(grid, h, lambda, r)
    }

    /// Unpacks an unknown vector produced by [`HeightField::to_unknowns`].
    pub fn from_unknowns(grid: Grid, x: &[f64], r: f64) -> Result<Self, HeightFieldError> {
        if x.len() != grid.unknowns() {
            return Err(HeightFieldError::Dimension {
                expected: grid.unknowns(),
                got: x.len(),
            });
        }
        let np = grid.np;
        let mut h = vec![0.0; (grid.half() + 1) * (np + 1)];
        for i in 0..=grid.half() {
            for j in 1..=np {
                h[i * (np + 1) + j] = x[grid.index(i, j)];
            }
        }
        let lambda = x[grid.lambda_index()];
        HeightField::new(grid, h, lambda, r)
    }

    pub fn to_unknowns(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut x = vec![0.0; g.unknowns()];
        for i in 0..=g.half() {
            for j in 1..=g.np {
                x[g.index(i, j)] = self.at(i, j);
            }
        }
        x[g.lambda_index()] = self.lambda;
        x
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.h[i * (self.grid.np + 1) + j]
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let s = self.grid.np + 1;
        &self.h[i * s..(i + 1) * s]
    }

    /// Surface elevation η at column i.
    pub fn surface(&self, i: usize) -> f64 {
        self.at(i, self.grid.np)
    }

    /// Crest-to-trough height h(0, 1) − h(π, 1).
    pub fn amplitude(&self) -> f64 {
        self.surface(0) - self.surface(self.grid.half())
    }

    pub fn max_eta(&self) -> f64 {
        (0..=self.grid.half()).map(|i| self.surface(i)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_eta(&self) -> f64 {
        (0..=self.grid.half()).map(|i| self.surface(i)).fold(f64::INFINITY, f64::min)
    }

    /// Wavelength Λ = 2π/λ.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda
    }

    /// Full-period heights, `[i][j]` for i = 0..Nq, mirrored by evenness.
    pub fn full_period(&self) -> Vec<Vec<f64>> {
        let nq = self.grid.nq;
        let half = self.grid.half();
        (0..nq)
            .map(|i| {
                let src = if i <= half { i } else { nq - i };
                self.column(src).to_vec()
            })
            .collect()
    }

    /// Adds `scale · w(q_i, p_j)` to every node above the bottom.
    pub fn perturbed(&self, scale: f64, w: impl Fn(f64, f64) -> f64) -> Result<Self, HeightFieldError> {
        let g = &self.grid;
        let mut h = self.h.clone();
        for i in 0..=g.half() {
            for j in 1..=g.np {
                h[i * (g.np + 1) + j] += scale * w(g.q(i), g.p()[j]);
            }
        }
        HeightField::new(g.clone(), h, self.lambda, self.r)
    }

    /// Re-samples every column onto a grid with different p-spacing.
    pub fn regrid(&self, spacing: PSpacing) -> Result<Self, HeightFieldError> {
        if spacing == self.grid.spacing {
            return Ok(self.clone());
        }
        let target = self.grid.with_spacing(spacing);
        let mut h = Vec::with_capacity(self.h.len());
        for i in 0..=self.grid.half() {
            let spline = CubicSpline::clamped_estimated(self.grid.p().to_vec(), self.column(i).to_vec())
                .map_err(|_| HeightFieldError::NonFinite)?;
            for (j, &p) in target.p().iter().enumerate() {
                h.push(if j == 0 { 0.0 } else { spline.eval(p) });
            }
        }
        HeightField::new(target, h, self.lambda, self.r)
    }
}
