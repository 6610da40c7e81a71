//! Flat storage for collections of small vectors plus the handful of vector
//! kernels the solvers need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A list of `len` vectors of dimension `dim`, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("a multiple of dimension {dim}"),
                found: format!("{} coordinates", data.len()),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("vector of dimension {dim}"),
                    found: format!("row {idx} has dimension {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn set(&mut self, i: usize, v: &[f64]) {
        self.get_mut(i).copy_from_slice(v);
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Serialize for Points {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() {
            return Ok(Points::zeros(0, 0));
        }
        Points::from_rows(dim, &rows).map_err(serde::de::Error::custom)
    }
}

/// Euclidean norm, rescaled when the squares would overflow or underflow.
pub fn norm(v: &[f64]) -> f64 {
    let sq = norm_sq(v);
    if sq.is_finite() && sq > 1e-290 {
        return sq.sqrt();
    }
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|a| (a / scale) * (a / scale)).sum::<f64>().sqrt()
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `out = a - b`
pub fn sub_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
    }
}

/// `out = a - b - c`
pub fn sub3_into(a: &[f64], b: &[f64], c: &[f64], out: &mut [f64]) {
    for (((o, x), y), z) in out.iter_mut().zip(a).zip(b).zip(c) {
        *o = x - y - z;
    }
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nesterov extrapolation `cur + beta * (cur - prev)`, written into `out`.
pub fn extrapolate_into(cur: &[f64], prev: &[f64], beta: f64, out: &mut [f64]) {
    for ((o, c), p) in out.iter_mut().zip(cur).zip(prev) {
        *o = c + beta * (c - p);
    }
}

/// Extrapolation coefficient `(t - 2) / (t + 1)` for iteration `t >= 1`.
pub fn momentum(t: usize) -> f64 {
    (t as f64 - 2.0) / (t as f64 + 1.0)
}
