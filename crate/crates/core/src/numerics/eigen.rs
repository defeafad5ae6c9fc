//! Lowest eigenvalues of symmetric operators and smallest singular values.
//!
//! Small problems go to a dense symmetric eigensolver. Large sparse ones use
//! a block Krylov method with full reorthogonalization on the shifted inverse
//! `(A − σ)⁻¹`, where `σ` lies below the Gershgorin bound so `A − σ` is
//! positive definite and can be factored as a band Cholesky. Ritz pairs are
//! extracted with a Rayleigh–Ritz step on `A` itself and every reported pair
//! is checked against its true residual.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::matrix::{CsrMatrix, OperatorMatrix};
use super::NumericsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    /// Largest dimension handled by the dense solver.
    pub dense_max: usize,
    /// Relative residual bound: `‖Av − λv‖ ≤ tolerance·‖A‖`.
    pub tolerance: f64,
    /// Cap on operator applications in the iterative solver.
    pub max_iterations: usize,
    /// Cap on the Krylov basis size.
    pub max_krylov: usize,
    /// Cap on stored band entries for the shift-invert factorization.
    pub band_memory_cap: usize,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig {
            dense_max: 3000,
            tolerance: 1e-8,
            max_iterations: 10_000,
            max_krylov: 600,
            band_memory_cap: 40_000_000,
            block_size: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub norm_estimate: f64,
    pub method: String,
    pub extrapolated: bool,
}

pub fn lowest_eigenvalues(a: &OperatorMatrix, k: usize) -> Result<SpectrumResult, NumericsError> {
    lowest_eigenvalues_with(a, k, SolverChoice::Auto, &EigenConfig::default())
}

pub fn lowest_eigenvalues_with(
    a: &OperatorMatrix,
    k: usize,
    choice: SolverChoice,
    cfg: &EigenConfig,
) -> Result<SpectrumResult, NumericsError> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(NumericsError::InvalidRequest(format!(
            "requested {k} eigenvalues of a {n}×{n} matrix"
        )));
    }
    if !a.is_symmetric() {
        return Err(NumericsError::NotSymmetric);
    }
    let dense = match choice {
        SolverChoice::Dense => true,
        SolverChoice::Iterative => false,
        SolverChoice::Auto => n <= cfg.dense_max,
    };
    if dense {
        dense_lowest(a, k, cfg)
    } else {
        match a {
            OperatorMatrix::Sparse(m) => krylov_lowest(a, m, k, cfg),
            OperatorMatrix::Dense(d) => {
                // The iterative path only needs matvecs; route dense input
                // through the sparse representation.
                let trip = (0..d.nrows())
                    .flat_map(|i| (0..d.ncols()).map(move |j| (i, j)))
                    .filter(|&(i, j)| d[(i, j)] != 0.0)
                    .map(|(i, j)| (i, j, d[(i, j)]))
                    .collect();
                let m = CsrMatrix::from_triplets(d.nrows(), trip);
                krylov_lowest(a, &m, k, cfg)
            }
        }
    }
}

fn residual(a: &OperatorMatrix, lambda: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    a.matvec(v, &mut av);
    av.iter()
        .zip(v)
        .map(|(x, y)| (x - lambda * y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn dense_lowest(a: &OperatorMatrix, k: usize, cfg: &EigenConfig) -> Result<SpectrumResult, NumericsError> {
    let m = a.to_dense();
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0).ok_or(NumericsError::NonConvergence {
        method: "dense symmetric eigensolver".into(),
        detail: format!("no convergence for n = {n}"),
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let norm = a.norm_estimate();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut residual_norms = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let lambda = eig.eigenvalues[i];
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let r = residual(a, lambda, &v);
        if r > cfg.tolerance * norm.max(1.0) {
            return Err(NumericsError::NonConvergence {
                method: "dense symmetric eigensolver".into(),
                detail: format!("residual {r:.3e} for eigenvalue {lambda}"),
            });
        }
        eigenvalues.push(lambda);
        residual_norms.push(r);
    }
    Ok(SpectrumResult {
        eigenvalues,
        residual_norms,
        norm_estimate: norm,
        method: "dense".into(),
        extrapolated: false,
    })
}

/// Cholesky factor of a symmetric positive definite band matrix, stored by
/// rows: entry `(i, j)` with `i − b ≤ j ≤ i` lives at `i·(b+1) + j + b − i`.
struct BandCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(m: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = m.dim();
        let b = m.bandwidth();
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in m.row(i) {
                if j <= i {
                    l[i * w + j + b - i] += v;
                }
            }
            l[i * w + b] -= shift;
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let k0 = lo.max(j.saturating_sub(b));
                let mut s = l[i * w + j + b - i];
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                for k in k0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * w + b] = s.sqrt();
                } else {
                    l[i * w + j + b - i] = s / l[j * w + b];
                }
            }
        }
        Some(BandCholesky { n, b, l })
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        out.copy_from_slice(rhs);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = out[i];
            for k in lo..i {
                s -= self.l[i * w + k + b - i] * out[k];
            }
            out[i] = s / self.l[i * w + b];
        }
        for i in (0..n).rev() {
            let s = out[i] / self.l[i * w + b];
            out[i] = s;
            let lo = i.saturating_sub(b);
            for k in lo..i {
                out[k] -= self.l[i * w + k + b - i] * s;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthogonalizes `v` against `basis` (two passes) and returns its
/// remaining norm.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
    dot(v, v).sqrt()
}

fn krylov_lowest(
    a: &OperatorMatrix,
    m: &CsrMatrix,
    k: usize,
    cfg: &EigenConfig,
) -> Result<SpectrumResult, NumericsError> {
    let n = m.dim();
    let norm = a.norm_estimate();
    let tol = cfg.tolerance * norm.max(1.0);
    let lower = a.gershgorin_lower();
    let sigma = lower - 0.05 * (norm.max(1.0)).min(lower.abs().max(1.0));
    let band_ok = n.saturating_mul(m.bandwidth() + 1) <= cfg.band_memory_cap;
    let factor = if band_ok { BandCholesky::factor(m, sigma) } else { None };
    let method = if factor.is_some() {
        format!("block krylov, shift-invert at {sigma:.4}")
    } else {
        "block krylov".to_string()
    };
    let apply = |v: &[f64], out: &mut [f64]| match &factor {
        Some(f) => f.solve(v, out),
        None => a.matvec(v, out),
    };

    let p = cfg.block_size.max(1).min(n);
    let max_basis = cfg.max_krylov.min(n).max(k + p).min(n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut a_basis: Vec<Vec<f64>> = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::new();
    for _ in 0..p {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = orthogonalize(&mut v, &basis);
        if nv > 1e-12 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v.clone());
            block.push(v);
        }
    }
    let mut applications = 0usize;
    let mut best_residual = f64::INFINITY;
    loop {
        // Extend the products A·q for the new basis vectors.
        for q in &basis[a_basis.len()..] {
            let mut aq = vec![0.0; n];
            a.matvec(q, &mut aq);
            a_basis.push(aq);
        }
        let dim = basis.len();
        if dim >= k {
            let t = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (dot(&basis[i], &a_basis[j]) + dot(&basis[j], &a_basis[i])));
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            let mut values = Vec::with_capacity(k);
            let mut residuals = Vec::with_capacity(k);
            for &c in order.iter().take(k) {
                let theta = eig.eigenvalues[c];
                let s = eig.eigenvectors.column(c);
                let mut r = vec![0.0; n];
                for (j, sj) in s.iter().enumerate() {
                    for (x, (aq, q)) in r.iter_mut().zip(a_basis[j].iter().zip(&basis[j])) {
                        *x += sj * (aq - theta * q);
                    }
                }
                values.push(theta);
                residuals.push(dot(&r, &r).sqrt());
            }
            let worst = residuals.iter().cloned().fold(0.0, f64::max);
            best_residual = best_residual.min(worst);
            if worst <= tol {
                return Ok(SpectrumResult {
                    eigenvalues: values,
                    residual_norms: residuals,
                    norm_estimate: norm,
                    method,
                    extrapolated: false,
                });
            }
        }
        if dim >= max_basis || applications >= cfg.max_iterations || block.is_empty() {
            return Err(NumericsError::NonConvergence {
                method,
                detail: format!(
                    "basis size {dim}, {applications} applications, best residual {best_residual:.3e} > {tol:.3e}"
                ),
            });
        }
        let mut next = Vec::with_capacity(block.len());
        for v in &block {
            if basis.len() >= max_basis {
                break;
            }
            let mut w = vec![0.0; n];
            apply(v, &mut w);
            applications += 1;
            let before = dot(&w, &w).sqrt();
            let nw = orthogonalize(&mut w, &basis);
            if nw <= 1e-10 * before || nw == 0.0 {
                continue;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            basis.push(w.clone());
            next.push(w);
        }
        block = next;
    }
}

/// Smallest singular value, from the smallest eigenvalue of `AᴴA`.
pub fn min_singular_value_dense<T>(a: &DMatrix<T>) -> Result<f64, NumericsError>
where
    T: ComplexField<RealField = f64>,
{
    let gram = a.adjoint() * a;
    let n = gram.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0).ok_or(NumericsError::NonConvergence {
        method: "Gram eigensolver".into(),
        detail: format!("no convergence for n = {n}"),
    })?;
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(lo.max(0.0).sqrt())
}

/// Largest singular value, from the largest eigenvalue of `AᴴA`.
pub fn max_singular_value_dense<T>(a: &DMatrix<T>) -> Result<f64, NumericsError>
where
    T: ComplexField<RealField = f64>,
{
    let gram = a.adjoint() * a;
    if gram.nrows() == 0 {
        return Ok(0.0);
    }
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 0).ok_or(NumericsError::NonConvergence {
        method: "Gram eigensolver".into(),
        detail: "no convergence".into(),
    })?;
    let hi = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    Ok(hi.max(0.0).sqrt())
}

pub fn min_singular_value(a: &OperatorMatrix) -> Result<f64, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::InvalidRequest("matrix is not square".into()));
    }
    min_singular_value_dense(&a.to_dense())
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T>(a: &DMatrix<T>) -> Result<Vec<f64>, NumericsError>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0).ok_or(NumericsError::NonConvergence {
        method: "Hermitian eigensolver".into(),
        detail: format!("no convergence for n = {n}"),
    })?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}
