use nalgebra::DMatrix;

use super::grid::{Boundary, Grid, DEFAULT_GRID_CAP};
use super::NumericsError;
use crate::model::Schrodinger;

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        CsrMatrix {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.to_sorted_triplets();
        let mut t: Vec<_> = d.iter().map(|&(r, c, v)| (c, r, v)).collect();
        t.sort_by_key(|&(r, c, _)| (r, c));
        d == t
    }

    fn to_sorted_triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }
}

/// Finite-dimensional operator, sparse or dense.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorMatrix {
    Sparse(CsrMatrix),
    Dense(DMatrix<f64>),
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Sparse(m) => m.dim(),
            OperatorMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn is_square(&self) -> bool {
        match self {
            OperatorMatrix::Sparse(_) => true,
            OperatorMatrix::Dense(m) => m.is_square(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            OperatorMatrix::Sparse(m) => m.is_symmetric(),
            OperatorMatrix::Dense(m) => m.is_square() && m == &m.transpose(),
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match self {
            OperatorMatrix::Sparse(m) => m.matvec(x, y),
            OperatorMatrix::Dense(m) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            OperatorMatrix::Sparse(m) => m.to_dense(),
            OperatorMatrix::Dense(m) => m.clone(),
        }
    }

    /// Infinity norm, an upper bound for the spectral norm.
    pub fn norm_estimate(&self) -> f64 {
        match self {
            OperatorMatrix::Sparse(m) => (0..m.dim())
                .map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            OperatorMatrix::Dense(m) => m
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// Lower bound on the spectrum of a symmetric matrix (Gershgorin).
    pub fn gershgorin_lower(&self) -> f64 {
        match self {
            OperatorMatrix::Sparse(m) => (0..m.dim())
                .map(|i| {
                    let (mut diag, mut off) = (0.0, 0.0);
                    for (j, v) in m.row(i) {
                        if i == j {
                            diag += v;
                        } else {
                            off += v.abs();
                        }
                    }
                    diag - off
                })
                .fold(f64::INFINITY, f64::min),
            OperatorMatrix::Dense(m) => (0..m.nrows())
                .map(|i| {
                    let off: f64 = (0..m.ncols())
                        .filter(|&j| j != i)
                        .map(|j| m[(i, j)].abs())
                        .sum();
                    m[(i, i)] - off
                })
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Second-order finite differences for `−Δ + V` on `grid`: diagonal
/// `2q/h² + V(x_i)`, `−1/h²` between axis neighbours. Dirichlet grids drop
/// neighbours outside the box; periodic grids wrap.
pub fn discretize_hamiltonian<S: Schrodinger + ?Sized>(
    op: &S,
    grid: &Grid,
) -> Result<OperatorMatrix, NumericsError> {
    discretize_hamiltonian_capped(op, grid, DEFAULT_GRID_CAP)
}

pub fn discretize_hamiltonian_capped<S: Schrodinger + ?Sized>(
    op: &S,
    grid: &Grid,
    cap: usize,
) -> Result<OperatorMatrix, NumericsError> {
    if op.dim() != grid.dim {
        return Err(NumericsError::DimensionMismatch {
            expected: op.dim(),
            found: grid.dim,
        });
    }
    grid.check_cap(cap)?;
    let q = grid.dim;
    let n = grid.nodes_per_axis();
    let h2 = grid.spacing().powi(2);
    let axis = grid.axis();
    let total = grid.len();
    let mut triplets = Vec::with_capacity(total * (2 * q + 1));
    let mut x = vec![0.0; q];
    for k in 0..total {
        let multi = grid.multi_index(k);
        for (xi, &i) in x.iter_mut().zip(&multi) {
            *xi = axis[i];
        }
        triplets.push((k, k, 2.0 * q as f64 / h2 + op.potential(&x)));
        for a in 0..q {
            let mut neighbour = multi.clone();
            for step in [-1i64, 1] {
                let i = multi[a] as i64 + step;
                let j = match grid.boundary {
                    Boundary::Dirichlet if i < 0 || i >= n as i64 => continue,
                    Boundary::Dirichlet => i as usize,
                    Boundary::Periodic => i.rem_euclid(n as i64) as usize,
                };
                neighbour[a] = j;
                triplets.push((k, grid.flat_index(&neighbour), -1.0 / h2));
            }
        }
    }
    Ok(OperatorMatrix::Sparse(CsrMatrix::from_triplets(total, triplets)))
}
