//! Grid dumps: CSV "q,p,h" over the full period plus a JSON sidecar.

use super::{HeightField, HeightFieldError};
use crate::fsutil::write_atomic;
use crate::grid::{Grid, GridError, PSpacing};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Field(#[from] HeightFieldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    #[serde(rename = "Nq")]
    pub nq: usize,
    #[serde(rename = "Np")]
    pub np: usize,
    pub lambda: f64,
    pub r: f64,
    pub amplitude: f64,
    pub residual_norm: f64,
    pub p_spacing: PSpacing,
}

#[derive(Debug, Clone)]
pub struct LoadedField {
    pub field: HeightField,
    pub sidecar: FieldSidecar,
    /// max |h(q, p) − h(2π − q, p)| over the stored full period.
    pub evenness_defect: f64,
}

pub fn field_csv(field: &HeightField) -> String {
    let g = field.grid();
    let full = field.full_period();
    let mut out = String::with_capacity(g.nq * (g.np + 1) * 72);
    out.push_str("q,p,h\n");
    for (i, col) in full.iter().enumerate() {
        let q = g.q(i);
        for (j, h) in col.iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", q, g.p()[j], h);
        }
    }
    out
}

pub fn field_sidecar(field: &HeightField, residual_norm: f64) -> FieldSidecar {
    let g = field.grid();
    FieldSidecar {
        nq: g.nq,
        np: g.np,
        lambda: field.lambda,
        r: field.r,
        amplitude: field.amplitude(),
        residual_norm,
        p_spacing: g.spacing,
    }
}

pub fn write_field(field: &HeightField, residual_norm: f64, csv: &Path, json: &Path) -> Result<(), FieldIoError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| FieldIoError::Io { path, source }
    };
    write_atomic(csv, field_csv(field).as_bytes()).map_err(io(csv))?;
    let text = serde_json::to_string_pretty(&field_sidecar(field, residual_norm)).expect("sidecar serializes");
    write_atomic(json, text.as_bytes()).map_err(io(json))?;
    Ok(())
}

pub fn read_field(csv: &Path, json: &Path) -> Result<LoadedField, FieldIoError> {
    let read = |path: &Path| {
        std::fs::read_to_string(path).map_err(|source| FieldIoError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let json_text = read(json)?;
    let sidecar: FieldSidecar = serde_json::from_str(&json_text).map_err(|source| FieldIoError::Json {
        path: json.display().to_string(),
        source,
    })?;
    let grid = Grid::new(sidecar.nq, sidecar.np, sidecar.p_spacing)?;
    let text = read(csv)?;
    let path = csv.display().to_string();
    let parse_err = |line: usize, msg: String| FieldIoError::Parse {
        path: path.clone(),
        line,
        msg,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "q,p,h" => {}
        _ => return Err(parse_err(1, "expected header \"q,p,h\"".into())),
    }
    let stride = grid.np + 1;
    let expected = grid.nq * stride;
    let mut full = Vec::with_capacity(expected);
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        if full.len() == expected {
            return Err(parse_err(lineno, format!("more than {expected} data rows")));
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(lineno, format!("expected 3 columns, got {}", cols.len())));
        }
        let mut vals = [0.0; 3];
        for (v, c) in vals.iter_mut().zip(&cols) {
            *v = c
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("{c:?}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {c:?}")));
            }
        }
        let (i, j) = (full.len() / stride, full.len() % stride);
        if (vals[0] - grid.q(i)).abs() > 1e-12 || (vals[1] - grid.p()[j]).abs() > 1e-12 {
            return Err(parse_err(
                lineno,
                format!("point ({}, {}) does not match grid node ({i}, {j})", vals[0], vals[1]),
            ));
        }
        full.push(vals[2]);
    }
    if full.len() != expected {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {expected} data rows, got {}", full.len()),
        ));
    }
    let mut evenness_defect = 0.0f64;
    for i in 1..grid.nq {
        for j in 0..stride {
            let d = (full[i * stride + j] - full[(grid.nq - i) * stride + j]).abs();
            evenness_defect = evenness_defect.max(d);
        }
    }
    let half: Vec<f64> = full[..(grid.half() + 1) * stride].to_vec();
    let field = HeightField::new(grid, half, sidecar.lambda, sidecar.r)?;
    Ok(LoadedField {
        field,
        sidecar,
        evenness_defect,
    })
}
