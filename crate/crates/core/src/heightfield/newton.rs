//! Damped Newton iteration with a sparse LU of the bordered Jacobian.

use super::system::{Constraint, HeightSystem};
use super::{HeightField, HeightFieldError};
use crate::vorticity::VorticityModel;
use faer::linalg::solvers::Solve;
use faer::sparse::SparseColMat;
use faer::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Step halvings allowed per iteration while restoring h_p > 0.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iterations: 50,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    /// Linear solves performed.
    pub iterations: usize,
    pub residual_norm: f64,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn direct_solve(
    system: &HeightSystem,
    x: &[f64],
    constraint: &Constraint,
    rhs: &Mat<f64>,
) -> Result<Vec<f64>, HeightFieldError> {
    let jac = system.jacobian(x, constraint)?;
    let lu = jac.sp_lu().map_err(|_| HeightFieldError::Singular)?;
    let dx = lu.solve(rhs);
    Ok((0..rhs.nrows()).map(|i| dx[(i, 0)]).collect())
}

/// Newton step. An arclength row is dense, so that system is solved as a rank-one
/// update of the sparse amplitude-pinned Jacobian and checked against the full matrix.
fn solve_step(
    system: &HeightSystem,
    x: &[f64],
    constraint: &Constraint,
    res: &[f64],
) -> Result<Vec<f64>, HeightFieldError> {
    let n = res.len();
    let rhs = Mat::<f64>::from_fn(n, 1, |i, _| -res[i]);
    let Constraint::Arclength { direction, .. } = constraint else {
        return direct_solve(system, x, constraint, &rhs);
    };
    let pin = Constraint::Amplitude(0.0);
    let trip = system.triplets(x, &pin)?;
    let bordered = SparseColMat::try_new_from_triplets(n, n, &trip)
        .ok()
        .and_then(|m| m.sp_lu().ok())
        .and_then(|lu| {
            let last = n - 1;
            let mut u = direction.clone();
            for t in trip.iter().filter(|t| t.row == last) {
                u[t.col] -= t.val;
            }
            let z = lu.solve(&rhs);
            let y = lu.solve(Mat::<f64>::from_fn(n, 1, |i, _| if i == last { 1.0 } else { 0.0 }));
            let uz: f64 = (0..n).map(|i| u[i] * z[(i, 0)]).sum();
            let uy: f64 = (0..n).map(|i| u[i] * y[(i, 0)]).sum();
            let denom = 1.0 + uy;
            let dx: Vec<f64> = (0..n).map(|i| z[(i, 0)] - y[(i, 0)] * uz / denom).collect();
            let mut jdx = vec![0.0; n];
            for t in trip.iter().filter(|t| t.row != last) {
                jdx[t.row] += t.val * dx[t.col];
            }
            jdx[last] = direction.iter().zip(&dx).map(|(a, b)| a * b).sum();
            let scale = max_norm(res).max(f64::MIN_POSITIVE);
            let err = (0..n).fold(0.0f64, |m, i| m.max((jdx[i] - rhs[(i, 0)]).abs()));
            (err.is_finite() && err <= BORDERED_TOL * scale).then_some(dx)
        });
    match bordered {
        Some(dx) => Ok(dx),
        None => {
            log::debug!("bordered solve rejected, factoring the full arclength system");
            direct_solve(system, x, constraint, &rhs)
        }
    }
}

/// Relative linear residual accepted from the bordered solve.
const BORDERED_TOL: f64 = 1e-8;

pub fn newton_solve_system(
    system: &HeightSystem,
    mut x: Vec<f64>,
    constraint: &Constraint,
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, NewtonReport), HeightFieldError> {
    faer::set_global_parallelism(faer::Par::Seq);
    let n = x.len();
    let mut res = system.residual_flat(&x, constraint)?;
    let mut norm = max_norm(&res);
    let mut iterations = 0;
    loop {
        if !norm.is_finite() {
            return Err(HeightFieldError::NonFinite);
        }
        if norm < opts.tol {
            return Ok((
                x,
                NewtonReport {
                    iterations,
                    residual_norm: norm,
                },
            ));
        }
        if iterations >= opts.max_iterations {
            return Err(HeightFieldError::NotConverged {
                iterations,
                residual_norm: norm,
            });
        }
        iterations += 1;
        let dx = solve_step(system, &x, constraint, &res)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = (0..n).map(|i| x[i] + alpha * dx[i]).collect();
            match system.residual_flat(&trial, constraint) {
                Ok(r) if r.iter().all(|v| v.is_finite()) => {
                    accepted = Some((trial, r));
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        let (trial, r) = accepted.ok_or(HeightFieldError::InteriorStagnation { iteration: iterations })?;
        if alpha < 1.0 {
            log::debug!("newton iteration {iterations}: step damped to {alpha}");
        }
        x = trial;
        res = r;
        norm = max_norm(&res);
        log::debug!("newton iteration {iterations}: residual {norm:e}");
    }
}

/// Solves the system with the crest-to-trough height pinned to `pin`, λ free.
pub fn newton_solve(
    initial: &HeightField,
    model: &VorticityModel<f64>,
    pin: f64,
    opts: &NewtonOptions,
) -> Result<(HeightField, NewtonReport), HeightFieldError> {
    let system = HeightSystem::new(initial.grid(), model, initial.r);
    let (x, report) = newton_solve_system(&system, initial.to_unknowns(), &Constraint::Amplitude(pin), opts)?;
    Ok((HeightField::from_unknowns(initial.grid().clone(), &x, initial.r)?, report))
}
