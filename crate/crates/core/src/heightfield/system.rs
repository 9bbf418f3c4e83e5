//! Residual and Jacobian of the discretized fixed-period system.
//!
//! Interior rows use the flux-balance form
//! A(j+½) − A(j−½) + w_j (B(i+½) − B(i−½)) / Δq with
//! A = (1 + λ²h_q²)/(2h_p²) + Ω and B = −λ² h_q / h_p,
//! surface rows the Bernoulli condition (1 + λ²h_q²)/(2h_p²) + h − r.
//! Columns beyond 0 and π are mirror ghosts, so evenness holds exactly.

use super::dual::{Arith, Dual};
use super::{HeightField, HeightFieldError};
use crate::grid::Grid;
use crate::vorticity::VorticityModel;
use faer::sparse::{SparseColMat, Triplet};

const SLOTS: usize = 10;
const LAMBDA_SLOT: usize = 9;

/// Closes the system by fixing one more scalar function of the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// h(0, 1) − h(π, 1) = a.
    Amplitude(f64),
    /// direction · (x − base) = ds.
    Arclength {
        base: Vec<f64>,
        direction: Vec<f64>,
        ds: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    /// `[i * (np − 1) + (j − 1)]` for j = 1..np−1.
    pub interior: Vec<f64>,
    pub surface: Vec<f64>,
    pub constraint: f64,
}

impl ResidualVector {
    pub fn max_norm(&self) -> f64 {
        self.interior
            .iter()
            .chain(&self.surface)
            .chain(std::iter::once(&self.constraint))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_surface(&self) -> f64 {
        self.surface.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Grid geometry and vorticity data needed to evaluate the system.
#[derive(Debug, Clone)]
pub struct HeightSystem {
    grid: Grid,
    r: f64,
    dq: f64,
    /// Ω at the p-faces j + ½.
    omega_face: Vec<f64>,
    /// Δp_j = p_{j+1} − p_j.
    dp: Vec<f64>,
    /// (p_{j+1} − p_{j−1}) / 2.
    weight: Vec<f64>,
    hp: Vec<(usize, [f64; 3])>,
}

impl HeightSystem {
    pub fn new(grid: &Grid, model: &VorticityModel<f64>, r: f64) -> Self {
        let p = grid.p();
        let n = grid.np;
        let omega_face = (0..n).map(|j| model.primitive(0.5 * (p[j] + p[j + 1]))).collect();
        let dp = (0..n).map(|j| p[j + 1] - p[j]).collect();
        let weight = (0..=n)
            .map(|j| if j == 0 || j == n { 0.0 } else { 0.5 * (p[j + 1] - p[j - 1]) })
            .collect();
        let hp = (0..=n).map(|j| grid.hp_weights(j)).collect();
        HeightSystem {
            grid: grid.clone(),
            r,
            dq: grid.dq(),
            omega_face,
            dp,
            weight,
            hp,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Mirror a possibly ghost column index into 0..=half.
    #[inline]
    fn column(&self, i: isize) -> usize {
        let m = self.grid.half() as isize;
        let c = if i < 0 {
            -i
        } else if i > m {
            2 * m - i
        } else {
            i
        };
        c as usize
    }

    #[inline]
    fn value(&self, x: &[f64], i: usize, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            x[self.grid.index(i, j)]
        }
    }

    /// First level of the stencil for row (i, j).
    #[inline]
    fn base_level(&self, j: usize) -> usize {
        if j == self.grid.np {
            j - 2
        } else {
            j - 1
        }
    }

    /// Stencil unknown indices (None for the fixed bottom) for row (i, j).
    fn stencil_indices(&self, i: usize, j: usize) -> [[Option<usize>; 3]; 3] {
        let base = self.base_level(j);
        let mut out = [[None; 3]; 3];
        for (a, row) in out.iter_mut().enumerate() {
            let c = self.column(i as isize + a as isize - 1);
            for (b, slot) in row.iter_mut().enumerate() {
                let l = base + b;
                if l > 0 {
                    *slot = Some(self.grid.index(c, l));
                }
            }
        }
        out
    }

    fn interior<S: Arith>(&self, j: usize, v: &[[S; 3]; 3], lam: S) -> S {
        let half = S::cst(0.5);
        let one = S::cst(1.0);
        let two_dq = S::cst(2.0 * self.dq);
        let l2 = lam * lam;
        // centred q-differences in the middle column at levels j−1, j, j+1
        let hq = |b: usize| (v[2][b] - v[0][b]) / two_dq;
        let (hq0, hq1, hq2) = (hq(0), hq(1), hq(2));
        let hpf_up = (v[1][2] - v[1][1]) / S::cst(self.dp[j]);
        let hpf_lo = (v[1][1] - v[1][0]) / S::cst(self.dp[j - 1]);
        let hqf_up = half * (hq1 + hq2);
        let hqf_lo = half * (hq0 + hq1);
        let a_up = (one + l2 * hqf_up * hqf_up) / (S::cst(2.0) * hpf_up * hpf_up) + S::cst(self.omega_face[j]);
        let a_lo = (one + l2 * hqf_lo * hqf_lo) / (S::cst(2.0) * hpf_lo * hpf_lo) + S::cst(self.omega_face[j - 1]);
        let w = self.hp[j].1;
        let hp = |a: usize| S::cst(w[0]) * v[a][0] + S::cst(w[1]) * v[a][1] + S::cst(w[2]) * v[a][2];
        let (hp0, hp1, hp2) = (hp(0), hp(1), hp(2));
        let dq = S::cst(self.dq);
        let b_right = -l2 * (v[2][1] - v[1][1]) / dq / (half * (hp1 + hp2));
        let b_left = -l2 * (v[1][1] - v[0][1]) / dq / (half * (hp0 + hp1));
        a_up - a_lo + S::cst(self.weight[j]) * (b_right - b_left) / dq
    }

    fn surface<S: Arith>(&self, v: &[[S; 3]; 3], lam: S) -> S {
        let n = self.grid.np;
        let w = self.hp[n].1;
        let hq = (v[2][2] - v[0][2]) / S::cst(2.0 * self.dq);
        let hp = S::cst(w[0]) * v[1][0] + S::cst(w[1]) * v[1][1] + S::cst(w[2]) * v[1][2];
        (S::cst(1.0) + lam * lam * hq * hq) / (S::cst(2.0) * hp * hp) + v[1][2] - S::cst(self.r)
    }

    fn constraint_value(&self, x: &[f64], c: &Constraint) -> f64 {
        let g = &self.grid;
        match c {
            Constraint::Amplitude(a) => x[g.index(0, g.np)] - x[g.index(g.half(), g.np)] - a,
            Constraint::Arclength { base, direction, ds } => {
                direction.iter().zip(x.iter().zip(base)).map(|(t, (xi, bi))| t * (xi - bi)).sum::<f64>() - ds
            }
        }
    }

    /// Requires positive h_p at every p-face and at every node where it is differenced.
    pub fn check_admissible(&self, x: &[f64]) -> Result<(), HeightFieldError> {
        let g = &self.grid;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HeightFieldError::NonFinite);
        }
        for i in 0..=g.half() {
            for j in 0..g.np {
                let hp = (self.value(x, i, j + 1) - self.value(x, i, j)) / self.dp[j];
                if !(hp > 0.0) {
                    return Err(HeightFieldError::StagnationBreach { i, j, hp });
                }
            }
            for j in 1..=g.np {
                let (base, w) = self.hp[j];
                let hp: f64 = (0..3).map(|k| w[k] * self.value(x, i, base + k)).sum();
                if !(hp > 0.0) {
                    return Err(HeightFieldError::StagnationBreach { i, j, hp });
                }
            }
        }
        Ok(())
    }

    fn gather_f64(&self, x: &[f64], i: usize, j: usize) -> [[f64; 3]; 3] {
        let idx = self.stencil_indices(i, j);
        let mut v = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                v[a][b] = idx[a][b].map_or(0.0, |k| x[k]);
            }
        }
        v
    }

    /// Residual in unknown order (row k corresponds to unknown k), constraint last.
    pub fn residual_flat(&self, x: &[f64], c: &Constraint) -> Result<Vec<f64>, HeightFieldError> {
        self.check_admissible(x)?;
        let g = &self.grid;
        let lam = x[g.lambda_index()];
        let mut out = vec![0.0; g.unknowns()];
        for i in 0..=g.half() {
            for j in 1..=g.np {
                let v = self.gather_f64(x, i, j);
                out[g.index(i, j)] = if j == g.np {
                    self.surface(&v, lam)
                } else {
                    self.interior(j, &v, lam)
                };
            }
        }
        out[g.lambda_index()] = self.constraint_value(x, c);
        Ok(out)
    }

    pub fn residual(&self, field: &HeightField, c: &Constraint) -> Result<ResidualVector, HeightFieldError> {
        let g = &self.grid;
        let flat = self.residual_flat(&field.to_unknowns(), c)?;
        let mut interior = Vec::with_capacity((g.half() + 1) * (g.np - 1));
        let mut surface = Vec::with_capacity(g.half() + 1);
        for i in 0..=g.half() {
            for j in 1..g.np {
                interior.push(flat[g.index(i, j)]);
            }
            surface.push(flat[g.index(i, g.np)]);
        }
        Ok(ResidualVector {
            interior,
            surface,
            constraint: flat[g.lambda_index()],
        })
    }

    /// Exact derivatives of row (i, j) with respect to its stencil and λ.
    fn row_gradient(&self, x: &[f64], i: usize, j: usize) -> (f64, Vec<(usize, f64)>) {
        let g = &self.grid;
        let idx = self.stencil_indices(i, j);
        let mut v = [[Dual::<SLOTS>::cst(0.0); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                if let Some(k) = idx[a][b] {
                    v[a][b] = Dual::var(x[k], 3 * a + b);
                }
            }
        }
        let lam = Dual::var(x[g.lambda_index()], LAMBDA_SLOT);
        let r = if j == g.np {
            self.surface(&v, lam)
        } else {
            self.interior(j, &v, lam)
        };
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(SLOTS);
        for a in 0..3 {
            for b in 0..3 {
                if let Some(k) = idx[a][b] {
                    entries.push((k, r.d[3 * a + b]));
                }
            }
        }
        entries.push((g.lambda_index(), r.d[LAMBDA_SLOT]));
        // mirror ghosts map two slots onto one unknown
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (k, d) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += d,
                _ => merged.push((k, d)),
            }
        }
        (r.v, merged)
    }

    pub fn triplets(&self, x: &[f64], c: &Constraint) -> Result<Vec<Triplet<usize, usize, f64>>, HeightFieldError> {
        self.check_admissible(x)?;
        let g = &self.grid;
        let mut trip = Vec::with_capacity(g.unknowns() * SLOTS);
        for i in 0..=g.half() {
            for j in 1..=g.np {
                let row = g.index(i, j);
                let (_, entries) = self.row_gradient(x, i, j);
                trip.extend(entries.into_iter().map(|(k, d)| Triplet::new(row, k, d)));
            }
        }
        let last = g.lambda_index();
        match c {
            Constraint::Amplitude(_) => {
                trip.push(Triplet::new(last, g.index(0, g.np), 1.0));
                trip.push(Triplet::new(last, g.index(g.half(), g.np), -1.0));
            }
            Constraint::Arclength { direction, .. } => {
                trip.extend(direction.iter().enumerate().map(|(k, &t)| Triplet::new(last, k, t)));
            }
        }
        Ok(trip)
    }

    pub fn jacobian(&self, x: &[f64], c: &Constraint) -> Result<SparseColMat<usize, f64>, HeightFieldError> {
        let n = self.grid.unknowns();
        let trip = self.triplets(x, c)?;
        SparseColMat::try_new_from_triplets(n, n, &trip).map_err(|_| HeightFieldError::Singular)
    }

    /// J·v over the physical rows: the constraint row is reported as zero.
    pub fn jacobian_vector_product(&self, x: &[f64], dir: &[f64]) -> Result<Vec<f64>, HeightFieldError> {
        self.check_admissible(x)?;
        let g = &self.grid;
        let mut out = vec![0.0; g.unknowns()];
        for i in 0..=g.half() {
            for j in 1..=g.np {
                let (_, entries) = self.row_gradient(x, i, j);
                out[g.index(i, j)] = entries.iter().map(|(k, d)| d * dir[*k]).sum();
            }
        }
        Ok(out)
    }
}
