//! Computational grid on the strip q ∈ [0, 2π), p ∈ [0, 1].

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const MIN_NQ: usize = 16;
pub const MIN_NP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PSpacing {
    Uniform,
    /// p_j = sin(π/2 · j/Np): levels crowd toward the surface.
    Clustered,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("Nq = {0} must be even and at least {MIN_NQ}")]
    BadNq(usize),
    #[error("Np = {0} must be at least {MIN_NP}")]
    BadNp(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nq: usize,
    pub np: usize,
    pub spacing: PSpacing,
    p: Vec<f64>,
}

impl Grid {
    pub fn new(nq: usize, np: usize, spacing: PSpacing) -> Result<Self, GridError> {
        if nq < MIN_NQ || nq % 2 != 0 {
            return Err(GridError::BadNq(nq));
        }
        if np < MIN_NP {
            return Err(GridError::BadNp(np));
        }
        let p = (0..=np)
            .map(|j| {
                let xi = j as f64 / np as f64;
                match spacing {
                    PSpacing::Uniform => xi,
                    PSpacing::Clustered => (FRAC_PI_2 * xi).sin(),
                }
            })
            .collect::<Vec<_>>();
        let mut grid = Grid { nq, np, spacing, p };
        grid.p[0] = 0.0;
        grid.p[np] = 1.0;
        Ok(grid)
    }

    pub fn with_spacing(&self, spacing: PSpacing) -> Self {
        Grid::new(self.nq, self.np, spacing).expect("sizes already validated")
    }

    /// Index of the trough column; columns 0..=half() cover q ∈ [0, π].
    pub fn half(&self) -> usize {
        self.nq / 2
    }

    pub fn dq(&self) -> f64 {
        2.0 * PI / self.nq as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        i as f64 * self.dq()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Unknown heights: half-period columns times levels above the bottom, plus λ.
    pub fn unknowns(&self) -> usize {
        (self.half() + 1) * self.np + 1
    }

    /// Index of h(q_i, p_j) in the unknown vector, for j ≥ 1.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.np && i <= self.half());
        i * self.np + (j - 1)
    }

    /// Index of λ in the unknown vector.
    #[inline]
    pub fn lambda_index(&self) -> usize {
        self.unknowns() - 1
    }

    /// Weights (w_lo, w_mid, w_hi) and first level of the three-point p-derivative at level j.
    pub fn hp_weights(&self, j: usize) -> (usize, [f64; 3]) {
        let p = &self.p;
        let n = self.np;
        if j == 0 {
            let a = p[1] - p[0];
            let b = p[2] - p[1];
            (
                0,
                [-(2.0 * a + b) / (a * (a + b)), (a + b) / (a * b), -a / (b * (a + b))],
            )
        } else if j == n {
            let a = p[n] - p[n - 1];
            let b = p[n - 1] - p[n - 2];
            (
                n - 2,
                [a / (b * (a + b)), -(a + b) / (a * b), (2.0 * a + b) / (a * (a + b))],
            )
        } else {
            let h1 = p[j] - p[j - 1];
            let h2 = p[j + 1] - p[j];
            (
                j - 1,
                [-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))],
            )
        }
    }
}
