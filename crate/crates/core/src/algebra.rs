//! Order-zero elements `λ + Σ m_{f_i} a_i(D)`, their principal symbols, their
//! limit operators, and finite-dimensional representations on periodic
//! grids. The Fredholm check combines ellipticity of the symbol with
//! invertibility evidence for every `τ_α(E)`.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{enumerate_strata, DirectionQ, SemiLattice};
use crate::model::{AsymptoticFunction, ModelError, PotentialTerm};
use crate::numerics::threshold::{sphere_samples, stratum_directions};
use crate::numerics::{
    hermitian_eigenvalues, max_singular_value_dense, min_singular_value_dense, Boundary, Grid,
    NumericsError, OperatorMatrix,
};

type C64 = Complex<f64>;

/// Dense representations are limited to this many grid nodes.
pub const DENSE_NODE_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("representation is not Hermitian (defect {defect:e})")]
    NotHermitian { defect: f64 },
}

/// `coeff · Π_k v_{Y_k}(π_{Y_k} x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub factors: Vec<PotentialTerm>,
}

impl Monomial {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.coeff * self.factors.iter().map(|f| f.evaluate(x)).product::<f64>()
    }
}

/// Finite sums of finite products of pulled-back asymptotic functions.
#[derive(Clone, Debug, PartialEq)]
pub struct ESFunction {
    dim: usize,
    monomials: Vec<Monomial>,
}

impl ESFunction {
    pub fn new(dim: usize, monomials: Vec<Monomial>) -> Result<Self, AlgebraError> {
        for f in monomials.iter().flat_map(|m| &m.factors) {
            if f.ambient_dim() != dim {
                return Err(AlgebraError::DimensionMismatch {
                    expected: dim,
                    found: f.ambient_dim(),
                });
            }
        }
        if let Some(m) = monomials.iter().find(|m| !m.coeff.is_finite()) {
            return Err(AlgebraError::InvalidElement(format!("coefficient {}", m.coeff)));
        }
        Ok(ESFunction { dim, monomials })
    }

    pub fn zero(dim: usize) -> Self {
        ESFunction {
            dim,
            monomials: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ESFunction {
            dim,
            monomials: vec![Monomial {
                coeff: c,
                factors: Vec::new(),
            }],
        }
    }

    pub fn from_term(term: PotentialTerm) -> Self {
        ESFunction {
            dim: term.ambient_dim(),
            monomials: vec![Monomial {
                coeff: 1.0,
                factors: vec![term],
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.monomials.iter().map(|m| m.evaluate(x)).sum()
    }

    pub fn sum(&self, other: &ESFunction) -> ESFunction {
        let mut monomials = self.monomials.clone();
        monomials.extend(other.monomials.iter().cloned());
        ESFunction {
            dim: self.dim,
            monomials,
        }
    }

    pub fn product(&self, other: &ESFunction) -> ESFunction {
        let monomials = self
            .monomials
            .iter()
            .flat_map(|a| {
                other.monomials.iter().map(move |b| Monomial {
                    coeff: a.coeff * b.coeff,
                    factors: a.factors.iter().chain(&b.factors).cloned().collect(),
                })
            })
            .collect();
        ESFunction {
            dim: self.dim,
            monomials,
        }
    }

    /// `τ_α f`: factors with `α ⊂ Y` are kept, the others are replaced by
    /// their value at infinity along `α`. Monomials that become zero are
    /// dropped.
    pub fn tau(&self, alpha: &DirectionQ) -> Result<ESFunction, AlgebraError> {
        let mut monomials = Vec::new();
        for m in &self.monomials {
            let mut coeff = m.coeff;
            let mut kept = Vec::new();
            for f in &m.factors {
                if f.subspace().contains_direction(alpha).map_err(ModelError::from)? {
                    kept.push(f.clone());
                } else {
                    coeff *= f.limit_value(alpha)?;
                }
            }
            if coeff != 0.0 {
                monomials.push(Monomial {
                    coeff,
                    factors: kept,
                });
            }
        }
        Ok(ESFunction {
            dim: self.dim,
            monomials,
        })
    }

    /// `lim_{r→∞} f(rα)`.
    pub fn limit_along(&self, alpha: &DirectionQ) -> Result<f64, AlgebraError> {
        Ok(self.tau(alpha)?.evaluate(&vec![0.0; self.dim]))
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.iter().all(|m| m.coeff == 0.0)
    }

    /// Structural test for vanishing at infinity: every monomial carries a
    /// `C₀` factor on the full quotient `X/{0}`.
    pub fn is_c0(&self) -> bool {
        self.monomials.iter().all(|m| {
            m.coeff == 0.0
                || m
                    .factors
                    .iter()
                    .any(|f| f.subspace().is_zero() && f.function().is_c0())
        })
    }
}

/// Fourier multiplier symbol `a(ξ)` on the dual space, from the same
/// parametric families as potentials.
pub type MultiplierSymbol = AsymptoticFunction;

/// One product `m_f ∘ a(D)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraTerm {
    pub f: ESFunction,
    pub a: MultiplierSymbol,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    dim: usize,
    lambda: f64,
    terms: Vec<AlgebraTerm>,
}

impl AlgebraElement {
    pub fn new(dim: usize, lambda: f64, terms: Vec<AlgebraTerm>) -> Result<Self, AlgebraError> {
        if !lambda.is_finite() {
            return Err(AlgebraError::InvalidElement(format!("lambda {lambda}")));
        }
        for t in &terms {
            if t.f.dim() != dim {
                return Err(AlgebraError::DimensionMismatch {
                    expected: dim,
                    found: t.f.dim(),
                });
            }
            t.a.validate(dim)?;
        }
        Ok(AlgebraElement { dim, lambda, terms })
    }

    pub fn scalar(dim: usize, lambda: f64) -> Self {
        AlgebraElement {
            dim,
            lambda,
            terms: Vec::new(),
        }
    }

    /// `m_f`.
    pub fn multiplication(f: ESFunction) -> Self {
        AlgebraElement {
            dim: f.dim(),
            lambda: 0.0,
            terms: vec![AlgebraTerm {
                f,
                a: AsymptoticFunction::constant(1.0),
            }],
        }
    }

    /// `a(D)`.
    pub fn multiplier(dim: usize, a: MultiplierSymbol) -> Result<Self, AlgebraError> {
        AlgebraElement::new(
            dim,
            0.0,
            vec![AlgebraTerm {
                f: ESFunction::constant(dim, 1.0),
                a,
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn terms(&self) -> &[AlgebraTerm] {
        &self.terms
    }

    pub fn plus(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            dim: self.dim,
            lambda: self.lambda + other.lambda,
            terms: self.terms.iter().chain(&other.terms).cloned().collect(),
        }
    }

    /// Product modulo lower order: `m_f a(D) · m_g b(D) ↦ m_{fg} (ab)(D)`.
    /// This realizes the product of symbols, not the operator product.
    pub fn symbolic_product(&self, other: &AlgebraElement) -> AlgebraElement {
        let mut terms = Vec::new();
        let scaled = |t: &AlgebraTerm, c: f64| AlgebraTerm {
            f: t.f.product(&ESFunction::constant(self.dim, c)),
            a: t.a.clone(),
        };
        if other.lambda != 0.0 {
            terms.extend(self.terms.iter().map(|t| scaled(t, other.lambda)));
        }
        if self.lambda != 0.0 {
            terms.extend(other.terms.iter().map(|t| scaled(t, self.lambda)));
        }
        for s in &self.terms {
            for t in &other.terms {
                terms.push(AlgebraTerm {
                    f: s.f.product(&t.f),
                    a: AsymptoticFunction::Product {
                        factors: vec![s.a.clone(), t.a.clone()],
                    },
                });
            }
        }
        AlgebraElement {
            dim: self.dim,
            lambda: self.lambda * other.lambda,
            terms,
        }
    }

    /// Whether `E` lies in the crossed-product ideal: no scalar part and
    /// every multiplier vanishes at infinity.
    pub fn in_crossed_product(&self) -> bool {
        self.lambda == 0.0 && self.terms.iter().all(|t| t.a.is_c0() || t.f.is_zero())
    }

    pub fn symbol(&self) -> SymbolValue {
        SymbolValue {
            lambda: self.lambda,
            terms: self.terms.clone(),
        }
    }

    /// `τ_α(E)`: multipliers are translation invariant, so only the
    /// functions change.
    pub fn tau(&self, alpha: &DirectionQ) -> Result<AlgebraElement, AlgebraError> {
        let mut terms = Vec::new();
        for t in &self.terms {
            let f = t.f.tau(alpha)?;
            if !f.monomials().is_empty() {
                terms.push(AlgebraTerm { f, a: t.a.clone() });
            }
        }
        Ok(AlgebraElement {
            dim: self.dim,
            lambda: self.lambda,
            terms,
        })
    }
}

pub fn tau_element(e: &AlgebraElement, alpha: &DirectionQ) -> Result<AlgebraElement, AlgebraError> {
    e.tau(alpha)
}

/// A point of the compactified space: finite, or the limit `x + rα`,
/// `r → ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SymbolPoint {
    Finite { x: Vec<f64> },
    AtInfinity { direction: DirectionQ, x: Vec<f64> },
}

/// Principal symbol `σ_0(E)(ξ̂, x) = λ + Σ f_i(x)·a_{i,∞}(ξ̂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolValue {
    lambda: f64,
    terms: Vec<AlgebraTerm>,
}

impl SymbolValue {
    pub fn eval(&self, xi_hat: &[f64], x: &[f64]) -> f64 {
        self.lambda
            + self
                .terms
                .iter()
                .map(|t| t.f.evaluate(x) * t.a.radial_limit(xi_hat))
                .sum::<f64>()
    }

    pub fn eval_at(&self, xi_hat: &[f64], p: &SymbolPoint) -> Result<f64, AlgebraError> {
        match p {
            SymbolPoint::Finite { x } => Ok(self.eval(xi_hat, x)),
            SymbolPoint::AtInfinity { direction, x } => {
                let mut v = self.lambda;
                for t in &self.terms {
                    v += t.f.tau(direction)?.evaluate(x) * t.a.radial_limit(xi_hat);
                }
                Ok(v)
            }
        }
    }

    /// Structural zero test.
    pub fn is_identically_zero(&self) -> bool {
        self.lambda == 0.0 && self.terms.iter().all(|t| t.a.is_c0() || t.f.is_zero())
    }
}

pub fn symbol(e: &AlgebraElement) -> SymbolValue {
    e.symbol()
}

/// Signed discrete frequencies `2πk/(2L)` of a periodic axis, FFT order.
pub fn frequencies(grid: &Grid) -> Vec<f64> {
    let n = grid.points_per_axis as i64;
    let scale = 2.0 * std::f64::consts::PI / (2.0 * grid.half_width);
    (0..n)
        .map(|k| {
            let s = if k < n / 2 { k } else { k - n };
            s as f64 * scale
        })
        .collect()
}

fn check_dense(grid: &Grid, dim: usize) -> Result<(), AlgebraError> {
    if grid.dim != dim {
        return Err(AlgebraError::DimensionMismatch {
            expected: dim,
            found: grid.dim,
        });
    }
    if dim > 2 {
        return Err(AlgebraError::InvalidElement(format!(
            "grid representations need dimension ≤ 2, got {dim}"
        )));
    }
    grid.check_cap(DENSE_NODE_CAP)?;
    Ok(())
}

/// `F⁻¹ diag(a(ξ_k)) F` on a periodic grid, as a dense circulant.
pub fn fourier_multiplier_matrix(
    grid: &Grid,
    a: impl Fn(&[f64]) -> C64,
) -> Result<DMatrix<C64>, AlgebraError> {
    if grid.boundary != Boundary::Periodic {
        return Err(AlgebraError::InvalidElement("multipliers need a periodic grid".into()));
    }
    check_dense(grid, grid.dim)?;
    let n = grid.nodes_per_axis();
    let q = grid.dim;
    let total = grid.len();
    let freq = frequencies(grid);
    let mut c: Vec<C64> = (0..total)
        .map(|k| {
            let xi: Vec<f64> = grid.multi_index(k).into_iter().map(|i| freq[i]).collect();
            a(&xi)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_inverse(n);
    // Axis-by-axis inverse transform; axis 0 is contiguous.
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..q {
        let stride = n.pow(axis as u32);
        for start in (0..total).filter(|k| (k / stride) % n == 0) {
            for (i, v) in line.iter_mut().enumerate() {
                *v = c[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                c[start + i * stride] = *v;
            }
        }
    }
    let norm = 1.0 / total as f64;
    let idx: Vec<Vec<usize>> = (0..total).map(|k| grid.multi_index(k)).collect();
    Ok(DMatrix::from_fn(total, total, |j, k| {
        let diff: Vec<usize> = idx[j].iter().zip(&idx[k]).map(|(a, b)| (a + n - b) % n).collect();
        c[grid.flat_index(&diff)] * norm
    }))
}

/// `λI + Σ diag(f_i) · a_i(D)` on a periodic grid.
pub fn apply_element(e: &AlgebraElement, grid: &Grid) -> Result<DMatrix<C64>, AlgebraError> {
    check_dense(grid, e.dim())?;
    if grid.boundary != Boundary::Periodic {
        return Err(AlgebraError::InvalidElement("elements need a periodic grid".into()));
    }
    let total = grid.len();
    let points = grid.points();
    let mut m = DMatrix::<C64>::identity(total, total) * C64::new(e.lambda(), 0.0);
    for t in e.terms() {
        let f: Vec<f64> = points.iter().map(|x| t.f.evaluate(x)).collect();
        if f.iter().all(|v| *v == 0.0) {
            continue;
        }
        let a = fourier_multiplier_matrix(grid, |xi| C64::new(t.a.evaluate(xi), 0.0))?;
        for (j, fj) in f.iter().enumerate() {
            for k in 0..total {
                m[(j, k)] += a[(j, k)] * *fj;
            }
        }
    }
    Ok(m)
}

/// Smooth bump `exp(−1/(1 − t²))`, `t = |y − center|/radius`, with unit
/// integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    normalization: f64,
}

fn bump_profile(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, AlgebraError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(AlgebraError::InvalidElement(format!("bump radius {radius}")));
        }
        let q = center.len();
        if q == 0 || q > 2 {
            return Err(AlgebraError::InvalidElement(format!("bump dimension {q}")));
        }
        // Composite Simpson in the radial variable.
        let m = 20_000;
        let w = |t: f64| if q == 1 { 2.0 } else { 2.0 * std::f64::consts::PI * t };
        let step = 1.0 / m as f64;
        let integral: f64 = (0..=m)
            .map(|i| {
                let t = i as f64 * step;
                let c = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * w(t) * bump_profile(t)
            })
            .sum::<f64>()
            * step
            / 3.0;
        Ok(Bump {
            center,
            radius,
            normalization: 1.0 / (integral * radius.powi(q as i32)),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
        self.normalization * bump_profile(r2.sqrt() / self.radius)
    }
}

/// `K_ij = f(x_i)·φ(x_j − x_i)·h^q` on the nodes of `grid`.
pub fn kernel_matrix_with(
    f: impl Fn(&[f64]) -> f64,
    phi: &Bump,
    grid: &Grid,
) -> Result<OperatorMatrix, AlgebraError> {
    check_dense(grid, phi.dim())?;
    let points = grid.points();
    let w = grid.spacing().powi(grid.dim as i32);
    let fx: Vec<f64> = points.iter().map(|x| f(x)).collect();
    let mut diff = vec![0.0; grid.dim];
    let k = DMatrix::from_fn(points.len(), points.len(), |i, j| {
        if fx[i] == 0.0 {
            return 0.0;
        }
        for (d, (a, b)) in diff.iter_mut().zip(points[j].iter().zip(&points[i])) {
            *d = a - b;
        }
        fx[i] * phi.value(&diff) * w
    });
    Ok(OperatorMatrix::Dense(k))
}

pub fn kernel_matrix(f: &ESFunction, phi: &Bump, grid: &Grid) -> Result<OperatorMatrix, AlgebraError> {
    if f.dim() != grid.dim {
        return Err(AlgebraError::DimensionMismatch {
            expected: f.dim(),
            found: grid.dim,
        });
    }
    kernel_matrix_with(|x| f.evaluate(x), phi, grid)
}

fn restrict_outside<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, points: &[Vec<f64>], radius: f64) -> DMatrix<T> {
    let keep: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, x)| x.iter().map(|v| v * v).sum::<f64>().sqrt() >= radius)
        .map(|(i, _)| i)
        .collect();
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
}

/// Spectral norm of `[m_f, c_φ]` compressed to `|x| ≥ R`, for each `R`.
pub fn commutator_probe(
    f: impl Fn(&[f64]) -> f64,
    phi: &Bump,
    grid: &Grid,
    radii: &[f64],
) -> Result<Vec<f64>, AlgebraError> {
    let k = kernel_matrix_with(|_| 1.0, phi, grid)?.to_dense();
    let points = grid.points();
    let fx: Vec<f64> = points.iter().map(|x| f(x)).collect();
    let c = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| (fx[i] - fx[j]) * k[(i, j)]);
    radii
        .iter()
        .map(|&r| Ok(max_singular_value_dense(&restrict_outside(&c, &points, r))?))
        .collect()
}

/// Smallest over `grids` of `‖P_R (A(E1)A(E2) − A(E1·E2)) P_R‖`, where the
/// product `E1·E2` is taken at symbol level.
pub fn symbol_multiplicativity_defect(
    e1: &AlgebraElement,
    e2: &AlgebraElement,
    grids: &[Grid],
    radius: f64,
) -> Result<f64, AlgebraError> {
    let prod = e1.symbolic_product(e2);
    let mut best = f64::INFINITY;
    for g in grids {
        let d = apply_element(e1, g)? * apply_element(e2, g)? - apply_element(&prod, g)?;
        let r = restrict_outside(&d, &g.points(), radius);
        best = best.min(max_singular_value_dense(&r)?);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmConfig {
    pub ellipticity_floor: f64,
    pub invertibility_floor: f64,
    pub sphere_directions: usize,
    pub window_points: usize,
    pub window_half_width: f64,
    /// Half width of the periodic box used for `τ_α(E)`.
    pub half_width: f64,
    /// Points per axis of the refinement schedule.
    pub grid_points: Vec<usize>,
    pub directions_per_stratum: usize,
    /// Relative slack allowed when checking that minimal singular values
    /// do not decrease under refinement.
    pub refinement_rel_tol: f64,
}

impl Default for FredholmConfig {
    fn default() -> Self {
        FredholmConfig {
            ellipticity_floor: 1e-3,
            invertibility_floor: 1e-2,
            sphere_directions: 64,
            window_points: 128,
            window_half_width: 16.0,
            half_width: 16.0,
            grid_points: vec![128, 256, 512],
            directions_per_stratum: 8,
            refinement_rel_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceFredholm,
    EvidenceNotFredholm,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::EvidenceFredholm => "evidence-Fredholm",
            Verdict::EvidenceNotFredholm => "evidence-not-Fredholm",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Witness {
    Ellipticity {
        xi_hat: Vec<f64>,
        point: SymbolPoint,
        value: f64,
    },
    LimitOperator {
        direction: DirectionQ,
        grid_points: usize,
        min_singular_value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub stratum: usize,
    pub direction: DirectionQ,
    /// `(points per axis, σ_min)` along the refinement schedule.
    pub min_singular_values: Vec<(usize, f64)>,
    pub bounded_below: bool,
    pub nondecreasing: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    pub ellipticity_min: f64,
    pub ellipticity_argmin: Option<(Vec<f64>, SymbolPoint)>,
    pub limit_checks: Vec<LimitCheck>,
    pub config: FredholmConfig,
    pub note: String,
}

fn window_points(dim: usize, count: usize, w: f64) -> Vec<Vec<f64>> {
    match dim {
        0 => vec![Vec::new()],
        1 => (0..count)
            .map(|i| vec![-w + 2.0 * w * i as f64 / (count.max(2) - 1) as f64])
            .collect(),
        _ => {
            let halton = |mut i: u64, b: u64| {
                let (mut f, mut r) = (1.0, 0.0);
                while i > 0 {
                    f /= b as f64;
                    r += f * (i % b) as f64;
                    i /= b;
                }
                r
            };
            let primes = [2u64, 3, 5];
            let mut pts = vec![vec![0.0; dim]];
            pts.extend((1..count as u64).map(|i| {
                (0..dim)
                    .map(|d| -w + 2.0 * w * halton(i, primes[d]))
                    .collect::<Vec<f64>>()
            }));
            pts
        }
    }
}

fn sample_directions(s: &SemiLattice, per_stratum: usize) -> Vec<(usize, DirectionQ)> {
    enumerate_strata(s)
        .iter()
        .enumerate()
        .flat_map(|(i, st)| {
            stratum_directions(st, per_stratum.max(2))
                .into_iter()
                .map(move |d| (i, d))
        })
        .collect()
}

/// Minimum of `|σ_0(E)|` over sphere directions times finite window points
/// and points at infinity along every sampled direction.
fn ellipticity_scan(
    e: &AlgebraElement,
    dirs: &[(usize, DirectionQ)],
    cfg: &FredholmConfig,
) -> Result<(f64, Option<(Vec<f64>, SymbolPoint)>), AlgebraError> {
    let sigma = e.symbol();
    let xis = sphere_samples(e.dim(), cfg.sphere_directions);
    let window = window_points(e.dim(), cfg.window_points, cfg.window_half_width);
    let mut points: Vec<SymbolPoint> = window
        .iter()
        .map(|x| SymbolPoint::Finite { x: x.clone() })
        .collect();
    for (_, alpha) in dirs {
        let tau = e.tau(alpha)?;
        // Once every function is constant, one point represents the limit.
        let constant = tau.terms().iter().all(|t| t.f.monomials().iter().all(|m| m.factors.is_empty()));
        let xs: &[Vec<f64>] = if constant { &window[..1] } else { &window };
        points.extend(xs.iter().map(|x| SymbolPoint::AtInfinity {
            direction: alpha.clone(),
            x: x.clone(),
        }));
    }
    let mut best = (f64::INFINITY, None);
    for xi in &xis {
        for p in &points {
            let v = sigma.eval_at(xi, p)?.abs();
            if v < best.0 {
                best = (v, Some((xi.clone(), p.clone())));
            }
        }
    }
    Ok(best)
}

fn limit_check(
    e: &AlgebraElement,
    stratum: usize,
    alpha: &DirectionQ,
    cfg: &FredholmConfig,
) -> LimitCheck {
    let run = || -> Result<Vec<(usize, f64)>, AlgebraError> {
        let tau = e.tau(alpha)?;
        cfg.grid_points
            .iter()
            .map(|&n| {
                let g = Grid::periodic(e.dim(), cfg.half_width, n)?;
                Ok((n, min_singular_value_dense(&apply_element(&tau, &g)?)?))
            })
            .collect()
    };
    match run() {
        Ok(values) => {
            let bounded_below = values.iter().all(|(_, s)| *s >= cfg.invertibility_floor);
            let nondecreasing = values
                .windows(2)
                .all(|w| w[1].1 >= w[0].1 * (1.0 - cfg.refinement_rel_tol));
            LimitCheck {
                stratum,
                direction: alpha.clone(),
                min_singular_values: values,
                bounded_below,
                nondecreasing,
                error: None,
            }
        }
        Err(err) => LimitCheck {
            stratum,
            direction: alpha.clone(),
            min_singular_values: Vec::new(),
            bounded_below: false,
            nondecreasing: false,
            error: Some(err.to_string()),
        },
    }
}

pub const FREDHOLM_NOTE: &str =
    "verdicts are numerical evidence from sampled symbols and finite grids, not proofs";

/// Ellipticity of `σ_0(E)` plus invertibility evidence for `τ_α(E)` over
/// sampled directions of every stratum of `s`.
pub fn fredholm_check(
    e: &AlgebraElement,
    s: &SemiLattice,
    cfg: &FredholmConfig,
) -> Result<FredholmReport, AlgebraError> {
    if s.ambient_dim() != e.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: e.dim(),
            found: s.ambient_dim(),
        });
    }
    if e.dim() > 2 {
        return Err(AlgebraError::InvalidElement("Fredholm check needs dimension ≤ 2".into()));
    }
    let dirs = sample_directions(s, cfg.directions_per_stratum);
    let (ellipticity_min, ellipticity_argmin) = ellipticity_scan(e, &dirs, cfg)?;
    let limit_checks: Vec<LimitCheck> = dirs
        .par_iter()
        .map(|(i, alpha)| limit_check(e, *i, alpha, cfg))
        .collect();

    let failing = limit_checks.iter().find(|c| {
        c.error.is_none()
            && c.min_singular_values
                .last()
                .is_some_and(|(_, s)| *s < cfg.invertibility_floor)
    });
    let (verdict, witness) = if ellipticity_min < cfg.ellipticity_floor {
        let (xi_hat, point) = ellipticity_argmin.clone().expect("a sample attains the minimum");
        (
            Verdict::EvidenceNotFredholm,
            Some(Witness::Ellipticity {
                xi_hat,
                point,
                value: ellipticity_min,
            }),
        )
    } else if let Some(c) = failing {
        let &(n, sv) = c.min_singular_values.last().expect("nonempty");
        (
            Verdict::EvidenceNotFredholm,
            Some(Witness::LimitOperator {
                direction: c.direction.clone(),
                grid_points: n,
                min_singular_value: sv,
            }),
        )
    } else if limit_checks
        .iter()
        .all(|c| c.error.is_none() && c.bounded_below && c.nondecreasing)
    {
        (Verdict::EvidenceFredholm, None)
    } else {
        (Verdict::Inconclusive, None)
    };
    Ok(FredholmReport {
        verdict,
        witness,
        ellipticity_min,
        ellipticity_argmin,
        limit_checks,
        config: cfg.clone(),
        note: FREDHOLM_NOTE.to_string(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub stratum: usize,
    pub direction: DirectionQ,
    /// Eigenvalues of the representation of `τ_α(E)`, merged to the
    /// resolution tolerance.
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssentialSpectrumReport {
    pub samples: Vec<SpectrumSample>,
    /// Union over samples, merged to the resolution tolerance.
    pub points: Vec<f64>,
    pub grid_points: usize,
    pub half_width: f64,
    /// Spacing of the discrete frequencies, the resolution in `ξ`.
    pub frequency_spacing: f64,
    pub merge_tol: f64,
}

fn merge_sorted(values: &mut Vec<f64>, tol: f64) {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|b, a| (*b - *a).abs() <= tol * a.abs().max(1.0));
}

/// Union over sampled directions of the spectra of `τ_α(E)` at the finest
/// grid of `cfg`. `E` must be represented by Hermitian matrices.
pub fn essential_spectrum_points(
    e: &AlgebraElement,
    s: &SemiLattice,
    cfg: &FredholmConfig,
) -> Result<EssentialSpectrumReport, AlgebraError> {
    const MERGE_TOL: f64 = 1e-9;
    if s.ambient_dim() != e.dim() {
        return Err(AlgebraError::DimensionMismatch {
            expected: e.dim(),
            found: s.ambient_dim(),
        });
    }
    let n = cfg.grid_points.iter().copied().max().unwrap_or(128);
    let grid = Grid::periodic(e.dim(), cfg.half_width, n)?;
    let dirs = sample_directions(s, cfg.directions_per_stratum);
    let samples = dirs
        .par_iter()
        .map(|(i, alpha)| {
            let m = apply_element(&e.tau(alpha)?, &grid)?;
            let defect = (&m - m.adjoint()).camax();
            if defect > 1e-12 * (1.0 + m.camax()) {
                return Err(AlgebraError::NotHermitian { defect });
            }
            let mut eigenvalues = hermitian_eigenvalues(&m)?;
            merge_sorted(&mut eigenvalues, MERGE_TOL);
            Ok(SpectrumSample {
                stratum: *i,
                direction: alpha.clone(),
                eigenvalues,
            })
        })
        .collect::<Result<Vec<_>, AlgebraError>>()?;
    let mut points: Vec<f64> = samples.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    merge_sorted(&mut points, MERGE_TOL);
    Ok(EssentialSpectrumReport {
        samples,
        points,
        grid_points: n,
        half_width: cfg.half_width,
        frequency_spacing: std::f64::consts::PI / cfg.half_width,
        merge_tol: MERGE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SubspaceQ;
    use crate::model::{AngularProfile, Hamiltonian};
    use crate::numerics::discretize_hamiltonian;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(dim: usize, depth: f64) -> ESFunction {
        ESFunction::from_term(
            PotentialTerm::new(
                SubspaceQ::zero(dim),
                AsymptoticFunction::GaussianWell { depth, width: 1.0 },
            )
            .unwrap(),
        )
    }

    fn sign_profile(plus: f64, minus: f64) -> ESFunction {
        ESFunction::from_term(
            PotentialTerm::new(
                SubspaceQ::zero(1),
                AsymptoticFunction::AngularHomogeneous {
                    profile: AngularProfile::Sign { plus, minus },
                },
            )
            .unwrap(),
        )
    }

    fn line() -> SemiLattice {
        SemiLattice::from_elements(vec![SubspaceQ::zero(1)], 1).unwrap()
    }

    #[test]
    fn es_function_sum_and_product_evaluate_factorwise() {
        let x = SubspaceQ::from_integer_rows(&[vec![1, 0]], 2).unwrap();
        let f = ESFunction::from_term(
            PotentialTerm::new(x, AsymptoticFunction::poschl_teller(1.5)).unwrap(),
        );
        let g = gaussian(2, 0.7).sum(&ESFunction::constant(2, 0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let (a, b) = (f.evaluate(&p), g.evaluate(&p));
            assert_abs_diff_eq!(f.sum(&g).evaluate(&p), a + b, epsilon = 1e-12);
            assert_abs_diff_eq!(f.product(&g).evaluate(&p), a * b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_element_is_identity_matrix() {
        let g = Grid::periodic(1, 4.0, 16).unwrap();
        let m = apply_element(&AlgebraElement::scalar(1, 1.0), &g).unwrap();
        assert_eq!(m, DMatrix::identity(16, 16));
    }

    #[test]
    fn laplacian_symbol_matches_periodic_stencil() {
        for g in [Grid::periodic(1, 3.0, 24).unwrap(), Grid::periodic(2, 2.0, 10).unwrap()] {
            let h = g.spacing();
            let a = fourier_multiplier_matrix(&g, |xi| {
                C64::new(xi.iter().map(|x| (2.0 - 2.0 * (x * h).cos()) / (h * h)).sum(), 0.0)
            })
            .unwrap();
            let fd = discretize_hamiltonian(&Hamiltonian::free(g.dim), &g).unwrap().to_dense();
            let err = (0..a.nrows())
                .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| (a[(i, j)] - C64::new(fd[(i, j)], 0.0)).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "err {err}");
        }
    }

    #[test]
    fn tau_collapses_c0_functions() {
        let e = AlgebraElement::new(
            1,
            1.5,
            vec![AlgebraTerm {
                f: gaussian(1, 2.0),
                a: AsymptoticFunction::RegularizedCoulomb { charge: 1.0 },
            }],
        )
        .unwrap();
        let alpha = DirectionQ::from_i64(&[-1]).unwrap();
        let t = e.tau(&alpha).unwrap();
        assert_eq!(t, AlgebraElement::scalar(1, 1.5));
        assert_eq!(t.tau(&alpha).unwrap(), t);
    }

    #[test]
    fn tau_keeps_functions_constant_along_direction() {
        let x = SubspaceQ::from_integer_rows(&[vec![1, 0]], 2).unwrap();
        let f = ESFunction::from_term(PotentialTerm::new(x, AsymptoticFunction::poschl_teller(2.0)).unwrap());
        let e = AlgebraElement::multiplication(f);
        let alpha = DirectionQ::from_i64(&[3, 0]).unwrap();
        assert_eq!(e.tau(&alpha).unwrap(), e);
    }

    #[test]
    fn symbol_of_generators() {
        let e = AlgebraElement::scalar(1, 2.5);
        assert_eq!(e.symbol().eval(&[1.0], &[0.3]), 2.5);
        let a = AsymptoticFunction::AngularHomogeneous {
            profile: AngularProfile::Sign { plus: 3.0, minus: -1.0 },
        };
        let e = AlgebraElement::multiplier(1, a).unwrap().plus(&AlgebraElement::scalar(1, 0.5));
        assert_eq!(e.symbol().eval(&[1.0], &[7.0]), 3.5);
        assert_eq!(e.symbol().eval(&[-1.0], &[7.0]), -0.5);
        let c0 = AlgebraElement::new(
            1,
            0.0,
            vec![AlgebraTerm {
                f: sign_profile(1.0, 2.0),
                a: AsymptoticFunction::GaussianWell { depth: 1.0, width: 1.0 },
            }],
        )
        .unwrap();
        assert!(c0.symbol().is_identically_zero());
        assert!(c0.in_crossed_product());
    }

    #[test]
    fn symbol_is_multiplicative_on_generators() {
        let a = AsymptoticFunction::AngularHomogeneous {
            profile: AngularProfile::Affine { offset: 1.0, coefficients: vec![0.5, -0.25] },
        };
        let b = AsymptoticFunction::Sum {
            terms: vec![
                AsymptoticFunction::constant(2.0),
                AsymptoticFunction::RegularizedCoulomb { charge: 1.0 },
            ],
        };
        let e1 = AlgebraElement::new(2, 0.5, vec![AlgebraTerm { f: gaussian(2, 1.0), a }]).unwrap();
        let e2 = AlgebraElement::new(2, -1.0, vec![AlgebraTerm { f: gaussian(2, 3.0), a: b }]).unwrap();
        let p = e1.symbolic_product(&e2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let xi = [t.cos(), t.sin()];
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let lhs = p.symbol().eval(&xi, &x);
            let rhs = e1.symbol().eval(&xi, &x) * e2.symbol().eval(&xi, &x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_defect_is_zero() {
        let g = Grid::periodic(1, 4.0, 32).unwrap();
        let d = symbol_multiplicativity_defect(
            &AlgebraElement::scalar(1, 2.0),
            &AlgebraElement::scalar(1, -3.0),
            &[g],
            0.0,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn kernel_matrix_trivial_cases() {
        let g = Grid::dirichlet(1, 4.0, 0.1).unwrap();
        let narrow = Bump::new(vec![0.0], 0.15).unwrap();
        let k = kernel_matrix(&ESFunction::constant(1, 1.0), &narrow, &g).unwrap().to_dense();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                if i.abs_diff(j) > 1 {
                    assert_eq!(k[(i, j)], 0.0);
                }
            }
        }
        let diag_mass: f64 = (5..k.nrows() - 5).map(|i| k.row(i).sum()).sum::<f64>() / (k.nrows() - 10) as f64;
        assert_abs_diff_eq!(diag_mass, 1.0, epsilon = 0.05);
        let z = kernel_matrix(&ESFunction::zero(1), &narrow, &g).unwrap().to_dense();
        assert!(z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn c0_kernel_has_decaying_singular_values() {
        let g = Grid::dirichlet(1, 10.0, 0.1).unwrap();
        let k = kernel_matrix(&gaussian(1, 1.0), &Bump::new(vec![0.0], 1.0).unwrap(), &g)
            .unwrap()
            .to_dense();
        let sv = k.singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        // Support volume of f over h is about 2·5/0.1 nodes; far beyond it
        // the values have collapsed.
        assert!(s[100] < 1e-6 * s[0], "{} vs {}", s[100], s[0]);
    }

    #[test]
    fn kernel_and_multiplier_pictures_agree_away_from_boundary() {
        let g_per = Grid::periodic(1, 8.0, 256).unwrap();
        let bump = Bump::new(vec![0.0], 1.0).unwrap();
        let m = 4000;
        let transform = |xi: f64| {
            let step = 1.0 / m as f64;
            (0..=m)
                .map(|i| {
                    let t = i as f64 * step;
                    let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * 2.0 * bump.value(&[t]) * (xi * t).cos()
                })
                .sum::<f64>()
                * step
                / 3.0
        };
        let a = fourier_multiplier_matrix(&g_per, |xi| C64::new(transform(xi[0]), 0.0)).unwrap();
        let k = kernel_matrix_with(|_| 1.0, &bump, &g_per).unwrap().to_dense();
        let pts = g_per.points();
        let mut err: f64 = 0.0;
        for i in 0..pts.len() {
            if pts[i][0].abs() > 6.0 {
                continue;
            }
            for j in 0..pts.len() {
                err = err.max((a[(i, j)].re - k[(i, j)]).abs());
            }
        }
        assert!(err < 1e-3 * k.amax(), "err {err}");
    }

    #[test]
    fn commutator_with_radial_limit_function_decays() {
        let g = Grid::dirichlet(1, 16.0, 0.125).unwrap();
        let bump = Bump::new(vec![0.0], 1.0).unwrap();
        let f = AsymptoticFunction::AngularHomogeneous {
            profile: AngularProfile::Affine { offset: 0.0, coefficients: vec![std::f64::consts::FRAC_PI_2] },
        };
        let n = commutator_probe(|x| f.evaluate(x), &bump, &g, &[0.0, 8.0]).unwrap();
        assert!(n[1] < 0.1 * n[0], "{n:?}");
        let s = commutator_probe(|x| x[0].sin(), &bump, &g, &[0.0, 8.0]).unwrap();
        assert!(s[1] > 0.5 * s[0], "{s:?}");
    }

    #[test]
    fn fredholm_verdicts() {
        let cfg = FredholmConfig {
            grid_points: vec![32, 64],
            ..FredholmConfig::default()
        };
        let id = AlgebraElement::scalar(1, 1.0);
        let r = fredholm_check(&id, &line(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::EvidenceFredholm);
        assert_eq!(r.ellipticity_min, 1.0);

        let degenerate = AlgebraElement::new(
            1,
            1.0,
            vec![AlgebraTerm {
                f: sign_profile(1.0, 0.5),
                a: AsymptoticFunction::AngularHomogeneous {
                    profile: AngularProfile::Affine { offset: -1.0, coefficients: vec![0.0] },
                },
            }],
        )
        .unwrap();
        let r = fredholm_check(&degenerate, &line(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::EvidenceNotFredholm);
        assert!(r.ellipticity_min < 1e-3);
        assert!(matches!(r.witness, Some(Witness::Ellipticity { .. })));
    }

    #[test]
    fn essential_points_of_sign_multiplication() {
        let e = AlgebraElement::multiplication(sign_profile(2.0, 5.0));
        let cfg = FredholmConfig {
            grid_points: vec![32],
            ..FredholmConfig::default()
        };
        let r = essential_spectrum_points(&e, &line(), &cfg).unwrap();
        assert_eq!(r.points, vec![2.0, 5.0]);
        let s = essential_spectrum_points(&AlgebraElement::scalar(1, -0.5), &line(), &cfg).unwrap();
        assert_eq!(s.points, vec![-0.5]);
    }

    #[test]
    fn frequencies_are_signed() {
        let g = Grid::periodic(1, std::f64::consts::PI, 4).unwrap();
        assert_eq!(frequencies(&g), vec![0.0, 1.0, -2.0, -1.0]);
    }
}
