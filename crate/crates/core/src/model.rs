//! Potentials with radial limits, Hamiltonians `−Δ + Σ v_Y`, and their
//! limit operators along directions at infinity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{generate_semilattice, DirectionQ, LatticeError, SemiLattice, SubspaceQ};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("direction {direction} lies inside {subspace}; the term is retained, not collapsed")]
    DirectionInsideY { direction: String, subspace: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Angular profile `g` on the unit sphere of the quotient space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularProfile {
    /// One-dimensional sphere `{+1, −1}`.
    Sign { plus: f64, minus: f64 },
    /// `g(ω) = offset + Σ coefficients[i]·ω_i`.
    Affine { offset: f64, coefficients: Vec<f64> },
}

impl AngularProfile {
    pub fn value(&self, omega: &[f64]) -> f64 {
        match self {
            AngularProfile::Sign { plus, minus } => {
                if omega.first().copied().unwrap_or(0.0) >= 0.0 {
                    *plus
                } else {
                    *minus
                }
            }
            AngularProfile::Affine {
                offset,
                coefficients,
            } => offset + coefficients.iter().zip(omega).map(|(c, w)| c * w).sum::<f64>(),
        }
    }
}

/// Bounded continuous functions on `R^q` with uniform radial limits, drawn
/// from a closed set of parametric families. Each family knows its limit
/// on the sphere at infinity exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum AsymptoticFunction {
    /// `−depth·exp(−|z|²/width²)`.
    GaussianWell { depth: f64, width: f64 },
    /// `−strength / cosh²(z)`, one-dimensional.
    PoschlTeller { strength: f64 },
    /// `charge / √(1 + |z|²)`.
    RegularizedCoulomb { charge: f64 },
    /// `ρ(|z|)·g(z/|z|)` with `ρ(r) = r²/(1 + r²)`.
    AngularHomogeneous { profile: AngularProfile },
    Constant { value: f64 },
    Sum { terms: Vec<AsymptoticFunction> },
    Product { factors: Vec<AsymptoticFunction> },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Radial blend used by the homogeneous family.
pub fn blend(r: f64) -> f64 {
    let r2 = r * r;
    r2 / (1.0 + r2)
}

impl AsymptoticFunction {
    pub fn constant(value: f64) -> Self {
        AsymptoticFunction::Constant { value }
    }

    pub fn poschl_teller(strength: f64) -> Self {
        AsymptoticFunction::PoschlTeller { strength }
    }

    /// Checks parameters against the quotient dimension `q`.
    pub fn validate(&self, q: usize) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidPotential(msg));
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(ModelError::InvalidPotential(format!("{name} must be finite")))
            }
        };
        match self {
            AsymptoticFunction::GaussianWell { depth, width } => {
                finite("depth", *depth)?;
                finite("width", *width)?;
                if *width <= 0.0 {
                    return bad("gaussian_well width must be positive".into());
                }
            }
            AsymptoticFunction::PoschlTeller { strength } => {
                finite("strength", *strength)?;
                if q > 1 {
                    return bad(format!("poschl_teller needs quotient dimension ≤ 1, got {q}"));
                }
            }
            AsymptoticFunction::RegularizedCoulomb { charge } => finite("charge", *charge)?,
            AsymptoticFunction::AngularHomogeneous { profile } => match profile {
                AngularProfile::Sign { plus, minus } => {
                    finite("plus", *plus)?;
                    finite("minus", *minus)?;
                    if q != 1 {
                        return bad(format!("sign profile needs quotient dimension 1, got {q}"));
                    }
                }
                AngularProfile::Affine {
                    offset,
                    coefficients,
                } => {
                    finite("offset", *offset)?;
                    for c in coefficients {
                        finite("coefficient", *c)?;
                    }
                    if coefficients.len() != q {
                        return bad(format!(
                            "affine profile has {} coefficients for quotient dimension {q}",
                            coefficients.len()
                        ));
                    }
                }
            },
            AsymptoticFunction::Constant { value } => finite("value", *value)?,
            AsymptoticFunction::Sum { terms } => {
                for t in terms {
                    t.validate(q)?;
                }
            }
            AsymptoticFunction::Product { factors } => {
                for f in factors {
                    f.validate(q)?;
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, z: &[f64]) -> f64 {
        match self {
            AsymptoticFunction::GaussianWell { depth, width } => {
                let r2: f64 = z.iter().map(|x| x * x).sum();
                -depth * (-r2 / (width * width)).exp()
            }
            AsymptoticFunction::PoschlTeller { strength } => {
                let c = z.first().copied().unwrap_or(0.0).cosh();
                -strength / (c * c)
            }
            AsymptoticFunction::RegularizedCoulomb { charge } => {
                let r2: f64 = z.iter().map(|x| x * x).sum();
                charge / (1.0 + r2).sqrt()
            }
            AsymptoticFunction::AngularHomogeneous { profile } => {
                let r = norm(z);
                if r == 0.0 {
                    return 0.0;
                }
                let omega: Vec<f64> = z.iter().map(|x| x / r).collect();
                blend(r) * profile.value(&omega)
            }
            AsymptoticFunction::Constant { value } => *value,
            AsymptoticFunction::Sum { terms } => terms.iter().map(|t| t.evaluate(z)).sum(),
            AsymptoticFunction::Product { factors } => {
                factors.iter().map(|f| f.evaluate(z)).product()
            }
        }
    }

    /// Limit of `v(rω)` as `r → ∞` for a unit vector `ω`.
    pub fn radial_limit(&self, omega: &[f64]) -> f64 {
        match self {
            AsymptoticFunction::GaussianWell { .. }
            | AsymptoticFunction::PoschlTeller { .. }
            | AsymptoticFunction::RegularizedCoulomb { .. } => 0.0,
            AsymptoticFunction::AngularHomogeneous { profile } => profile.value(omega),
            AsymptoticFunction::Constant { value } => *value,
            AsymptoticFunction::Sum { terms } => terms.iter().map(|t| t.radial_limit(omega)).sum(),
            AsymptoticFunction::Product { factors } => {
                factors.iter().map(|f| f.radial_limit(omega)).product()
            }
        }
    }

    /// Whether the function vanishes at infinity, decided structurally.
    pub fn is_c0(&self) -> bool {
        match self {
            AsymptoticFunction::GaussianWell { .. }
            | AsymptoticFunction::PoschlTeller { .. }
            | AsymptoticFunction::RegularizedCoulomb { .. } => true,
            AsymptoticFunction::AngularHomogeneous { profile } => match profile {
                AngularProfile::Sign { plus, minus } => *plus == 0.0 && *minus == 0.0,
                AngularProfile::Affine {
                    offset,
                    coefficients,
                } => *offset == 0.0 && coefficients.iter().all(|c| *c == 0.0),
            },
            AsymptoticFunction::Constant { value } => *value == 0.0,
            AsymptoticFunction::Sum { terms } => terms.iter().all(Self::is_c0),
            AsymptoticFunction::Product { factors } => factors.iter().any(Self::is_c0),
        }
    }
}

/// Gram–Schmidt (two passes) on the given rows; rows that collapse are
/// dropped.
pub fn orthonormalize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for _ in 0..2 {
            for q in &out {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= dot * y;
                }
            }
        }
        let n = norm(&v);
        if n > 1e-12 * norm(row).max(1.0) {
            out.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Orthonormal frame of `Y^⊥`, identifying `X/Y` with `Y^⊥`.
pub fn quotient_frame(y: &SubspaceQ) -> Vec<Vec<f64>> {
    orthonormalize(&y.annihilator().basis_f64())
}

/// Orthonormal frame of `Y` itself.
pub fn subspace_frame(y: &SubspaceQ) -> Vec<Vec<f64>> {
    orthonormalize(&y.basis_f64())
}

fn apply_frame(frame: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    frame
        .iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// An interaction `v_Y ∘ π_Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTerm {
    subspace: SubspaceQ,
    function: AsymptoticFunction,
    frame: Vec<Vec<f64>>,
}

impl PotentialTerm {
    pub fn new(subspace: SubspaceQ, function: AsymptoticFunction) -> Result<Self, ModelError> {
        let q = subspace.ambient_dim() - subspace.dim();
        function.validate(q)?;
        let frame = quotient_frame(&subspace);
        debug_assert_eq!(frame.len(), q);
        Ok(PotentialTerm {
            subspace,
            function,
            frame,
        })
    }

    pub fn subspace(&self) -> &SubspaceQ {
        &self.subspace
    }

    pub fn function(&self) -> &AsymptoticFunction {
        &self.function
    }

    /// Rows form an orthonormal basis of `Y^⊥`.
    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspace.ambient_dim()
    }

    pub fn quotient_dim(&self) -> usize {
        self.frame.len()
    }

    /// Coordinates of `π_Y(x)` in the quotient frame.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        apply_frame(&self.frame, x)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.function.evaluate(&self.project(x))
    }

    /// Value of the term at infinity along `alpha`, for `alpha ⊄ Y`.
    pub fn limit_value(&self, alpha: &DirectionQ) -> Result<f64, ModelError> {
        if alpha.ambient_dim() != self.ambient_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.ambient_dim(),
                found: alpha.ambient_dim(),
            });
        }
        if self.subspace.contains_direction(alpha)? {
            return Err(ModelError::DirectionInsideY {
                direction: alpha.to_string(),
                subspace: self.subspace.to_string(),
            });
        }
        let p = self.project(&alpha.unit());
        let n = norm(&p);
        let omega: Vec<f64> = p.iter().map(|x| x / n).collect();
        Ok(self.function.radial_limit(&omega))
    }
}

/// Anything of the form `−Δ + V` on `R^dim`.
pub trait Schrodinger {
    fn dim(&self) -> usize;
    fn potential(&self, x: &[f64]) -> f64;
}

/// `H = −Δ + Σ v_Y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    dim: usize,
    terms: Vec<PotentialTerm>,
}

impl Hamiltonian {
    pub fn new(dim: usize, terms: Vec<PotentialTerm>) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(LatticeError::ZeroAmbientDimension.into());
        }
        if let Some(t) = terms.iter().find(|t| t.ambient_dim() != dim) {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                found: t.ambient_dim(),
            });
        }
        Ok(Hamiltonian { dim, terms })
    }

    pub fn free(dim: usize) -> Self {
        Hamiltonian {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    /// `{Y of each term} ∪ {0}`, deduplicated.
    pub fn family(&self) -> Vec<SubspaceQ> {
        let mut out = vec![SubspaceQ::zero(self.dim)];
        for t in &self.terms {
            if !out.contains(&t.subspace) {
                out.push(t.subspace.clone());
            }
        }
        out
    }

    /// Intersection closure of [`Hamiltonian::family`].
    pub fn semilattice(&self) -> Result<SemiLattice, ModelError> {
        Ok(generate_semilattice(&self.family(), self.dim)?)
    }
}

impl Schrodinger for Hamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.evaluate(x)).sum()
    }
}

/// `τ_α(H) = −Δ + Σ_{Y ⊇ α} v_Y + c_α`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitHamiltonian {
    pub direction: DirectionQ,
    pub retained: Vec<PotentialTerm>,
    pub shift: f64,
    /// Intersection of the retained subspaces; the retained potential is
    /// invariant under translations by it.
    pub invariant_subspace: SubspaceQ,
}

impl LimitHamiltonian {
    /// Folds the shift into a constant full-space term.
    pub fn to_hamiltonian(&self) -> Hamiltonian {
        let d = self.direction.ambient_dim();
        let mut terms = self.retained.clone();
        if self.shift != 0.0 {
            terms.push(
                PotentialTerm::new(SubspaceQ::full(d), AsymptoticFunction::constant(self.shift))
                    .expect("constant is valid in every dimension"),
            );
        }
        Hamiltonian { dim: d, terms }
    }
}

impl Schrodinger for LimitHamiltonian {
    fn dim(&self) -> usize {
        self.direction.ambient_dim()
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.shift + self.retained.iter().map(|t| t.evaluate(x)).sum::<f64>()
    }
}

/// Limit operator along `alpha`: terms with `α ⊂ Y` are kept, the others
/// collapse to their value at infinity. Full-space terms are constants and
/// always go into the shift.
pub fn tau_limit(h: &Hamiltonian, alpha: &DirectionQ) -> Result<LimitHamiltonian, ModelError> {
    if alpha.ambient_dim() != h.dim {
        return Err(ModelError::DimensionMismatch {
            expected: h.dim,
            found: alpha.ambient_dim(),
        });
    }
    let mut retained = Vec::new();
    let mut shift = 0.0;
    let mut z = SubspaceQ::full(h.dim);
    for t in &h.terms {
        if t.subspace.is_full() {
            shift += t.function.evaluate(&[]);
        } else if t.subspace.contains_direction(alpha)? {
            z = z.intersect(&t.subspace)?;
            retained.push(t.clone());
        } else {
            shift += t.limit_value(alpha)?;
        }
    }
    Ok(LimitHamiltonian {
        direction: alpha.clone(),
        retained,
        shift,
        invariant_subspace: z,
    })
}

/// Retained term written in orthonormal coordinates of `Z^⊥`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTerm {
    pub function: AsymptoticFunction,
    /// `q × m` matrix with orthonormal rows taking reduced coordinates to
    /// quotient coordinates.
    pub map: Vec<Vec<f64>>,
}

/// Separated form of a limit Hamiltonian: `τ_α(H) ≅ (−Δ_Z) ⊗ 1 + 1 ⊗ H_red
/// + shift` on `L²(Z) ⊗ L²(Z^⊥)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedHamiltonian {
    pub dim: usize,
    /// Orthonormal frame of `Z^⊥` in the original coordinates (`dim × d`).
    pub frame: Vec<Vec<f64>>,
    pub terms: Vec<ReducedTerm>,
    pub shift: f64,
}

impl Schrodinger for ReducedHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Potential of `H_red` alone; the shift is kept separate.
    fn potential(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.function.evaluate(&apply_frame(&t.map, x)))
            .sum()
    }
}

pub fn reduce(l: &LimitHamiltonian) -> ReducedHamiltonian {
    let frame = quotient_frame(&l.invariant_subspace);
    let terms = l
        .retained
        .iter()
        .map(|t| {
            // (F_Y · Bᵀ), with F_Y the quotient frame of Y and B the frame of Z^⊥.
            let map = t
                .frame
                .iter()
                .map(|fy| {
                    frame
                        .iter()
                        .map(|b| fy.iter().zip(b).map(|(p, q)| p * q).sum())
                        .collect()
                })
                .collect();
            ReducedTerm {
                function: t.function.clone(),
                map,
            }
        })
        .collect();
    ReducedHamiltonian {
        dim: frame.len(),
        frame,
        terms,
        shift: l.shift,
    }
}

/// Sup over a sample grid of `[−w, w]^d` of
/// `|V(x + r·â) − V_α(x)|`, where `V_α` is the potential of `τ_α(H)`.
pub fn translation_conjugation_probe(
    h: &Hamiltonian,
    alpha: &DirectionQ,
    r: f64,
    half_width: f64,
    samples_per_axis: usize,
) -> Result<f64, ModelError> {
    let limit = tau_limit(h, alpha)?;
    let a = alpha.unit();
    let d = h.dim;
    let s = samples_per_axis.max(2);
    let axis: Vec<f64> = (0..s)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (s - 1) as f64)
        .collect();
    let total = s.pow(d as u32);
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for k in 0..d {
            x[k] = axis[rem % s];
            rem /= s;
        }
        for k in 0..d {
            shifted[k] = x[k] + r * a[k];
        }
        let diff = (h.potential(&shifted) - limit.potential(&x)).abs();
        worst = worst.max(diff);
    }
    Ok(worst)
}
