//! Exact subspace combinatorics over the rationals.
//!
//! Subspaces of `R^d` are stored in reduced row-echelon form so that two
//! subspaces are equal exactly when their canonical bases are identical.
//! Everything here is exact; floating point only appears in the
//! `to_f64` style accessors used by the numerical layers.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the number of elements produced by
/// [`generate_semilattice`].
pub const DEFAULT_CLOSURE_BOUND: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("ambient dimension must be positive")]
    ZeroAmbientDimension,
    #[error("intersection closure exceeded {bound} elements")]
    ClosureTooLarge { bound: usize },
    #[error("index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("repeated index {0} in projection index list")]
    RepeatedIndex(usize),
    #[error("direction vector must be nonzero")]
    ZeroDirection,
}

/// Reduces `rows` in place to reduced row-echelon form and returns the pivot
/// columns. Zero rows are removed.
fn rref(rows: &mut Vec<Vec<BigRational>>, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows.len() {
            if i == r || rows[i][c].is_zero() {
                continue;
            }
            let factor = rows[i][c].clone();
            for k in c..cols {
                let delta = &factor * &rows[r][k];
                rows[i][k] -= delta;
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

/// Scales a rational vector to the primitive integer vector with the same
/// direction (positive multiple).
pub fn primitive_integer_vector(v: &[BigRational]) -> Vec<BigInt> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &g).collect()
}

fn rat(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(i))
}

/// A linear subspace of `R^d` with an exact canonical basis.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubspaceQ {
    ambient_dim: usize,
    basis: Vec<Vec<BigRational>>,
    pivots: Vec<usize>,
}

impl Ord for SubspaceQ {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.ambient_dim, self.basis.len(), &self.basis).cmp(&(
            other.ambient_dim,
            other.basis.len(),
            &other.basis,
        ))
    }
}

impl PartialOrd for SubspaceQ {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Returns the span of `vectors` in canonical form.
pub fn canonicalize(vectors: &[Vec<BigRational>], d: usize) -> Result<SubspaceQ, LatticeError> {
    if d == 0 {
        return Err(LatticeError::ZeroAmbientDimension);
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(LatticeError::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    let mut rows = vectors.to_vec();
    let pivots = rref(&mut rows, d);
    Ok(SubspaceQ {
        ambient_dim: d,
        basis: rows,
        pivots,
    })
}

impl SubspaceQ {
    pub fn zero(d: usize) -> Self {
        assert!(d > 0, "ambient dimension must be positive");
        SubspaceQ {
            ambient_dim: d,
            basis: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn full(d: usize) -> Self {
        assert!(d > 0, "ambient dimension must be positive");
        let basis = (0..d)
            .map(|i| (0..d).map(|j| rat((i == j) as i64)).collect())
            .collect();
        SubspaceQ {
            ambient_dim: d,
            basis,
            pivots: (0..d).collect(),
        }
    }

    /// Span of integer row vectors.
    pub fn from_integer_rows(rows: &[Vec<i64>], d: usize) -> Result<Self, LatticeError> {
        let rows: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| rat(x)).collect())
            .collect();
        canonicalize(&rows, d)
    }

    pub fn from_bigint_rows(rows: &[Vec<BigInt>], d: usize) -> Result<Self, LatticeError> {
        let rows: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
            .collect();
        canonicalize(&rows, d)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<BigRational>] {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.ambient_dim
    }

    /// Canonical basis rows scaled to primitive integer vectors. This is the
    /// serialized form; feeding it back to [`SubspaceQ::from_bigint_rows`]
    /// reproduces `self` exactly.
    pub fn integer_rows(&self) -> Vec<Vec<BigInt>> {
        self.basis.iter().map(|r| primitive_integer_vector(r)).collect()
    }

    pub fn basis_f64(&self) -> Vec<Vec<f64>> {
        self.basis
            .iter()
            .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    fn check_dim(&self, d: usize) -> Result<(), LatticeError> {
        if self.ambient_dim != d {
            return Err(LatticeError::DimensionMismatch {
                expected: self.ambient_dim,
                found: d,
            });
        }
        Ok(())
    }

    /// Orthogonal complement `{c : c·y = 0 for all y in self}`, computed
    /// exactly from the free columns of the echelon form.
    pub fn annihilator(&self) -> SubspaceQ {
        let d = self.ambient_dim;
        let free: Vec<usize> = (0..d).filter(|c| !self.pivots.contains(c)).collect();
        let rows: Vec<Vec<BigRational>> = free
            .iter()
            .map(|&f| {
                let mut v = vec![BigRational::zero(); d];
                v[f] = BigRational::one();
                for (row, &p) in self.basis.iter().zip(&self.pivots) {
                    v[p] = -row[f].clone();
                }
                v
            })
            .collect();
        canonicalize(&rows, d).expect("annihilator rows have ambient length")
    }

    /// Exact kernel of the linear map whose matrix rows are `constraints`.
    pub fn kernel_of(constraints: &[Vec<BigRational>], d: usize) -> Result<SubspaceQ, LatticeError> {
        Ok(canonicalize(constraints, d)?.annihilator())
    }

    pub fn intersect(&self, other: &SubspaceQ) -> Result<SubspaceQ, LatticeError> {
        self.check_dim(other.ambient_dim)?;
        if self.is_full() {
            return Ok(other.clone());
        }
        if other.is_full() || self == other {
            return Ok(self.clone());
        }
        let mut constraints = self.annihilator().basis;
        constraints.extend(other.annihilator().basis);
        SubspaceQ::kernel_of(&constraints, self.ambient_dim)
    }

    /// Sum of two subspaces.
    pub fn join(&self, other: &SubspaceQ) -> Result<SubspaceQ, LatticeError> {
        self.check_dim(other.ambient_dim)?;
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        canonicalize(&rows, self.ambient_dim)
    }

    /// Exact membership of a rational vector.
    pub fn contains_vector(&self, v: &[BigRational]) -> Result<bool, LatticeError> {
        self.check_dim(v.len())?;
        // Reduce against the echelon basis; v is in the span iff the residual vanishes.
        let mut r = v.to_vec();
        for (row, &p) in self.basis.iter().zip(&self.pivots) {
            if r[p].is_zero() {
                continue;
            }
            let f = r[p].clone();
            for (x, b) in r.iter_mut().zip(row) {
                *x -= &f * b;
            }
        }
        Ok(r.iter().all(Zero::is_zero))
    }

    pub fn contains_direction(&self, alpha: &DirectionQ) -> Result<bool, LatticeError> {
        self.contains_vector(&alpha.to_rational())
    }

    /// `self ⊇ other`.
    pub fn contains_subspace(&self, other: &SubspaceQ) -> Result<bool, LatticeError> {
        self.check_dim(other.ambient_dim)?;
        if other.dim() > self.dim() {
            return Ok(false);
        }
        for row in &other.basis {
            if !self.contains_vector(row)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Image under the block permutation of `R^{n·block}` that moves block
    /// `i` to block `perm[i]`.
    pub fn permute_blocks(&self, perm: &[usize], block: usize) -> SubspaceQ {
        let n = perm.len();
        assert_eq!(n * block, self.ambient_dim, "permutation does not tile the ambient space");
        let rows: Vec<Vec<BigRational>> = self
            .basis
            .iter()
            .map(|row| {
                let mut out = vec![BigRational::zero(); self.ambient_dim];
                for (i, &target) in perm.iter().enumerate() {
                    for k in 0..block {
                        out[target * block + k] = row[i * block + k].clone();
                    }
                }
                out
            })
            .collect();
        canonicalize(&rows, self.ambient_dim).expect("same ambient dimension")
    }
}

impl fmt::Debug for SubspaceQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubspaceQ(d={}, {})", self.ambient_dim, self)
    }
}

impl fmt::Display for SubspaceQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "{{0}}");
        }
        let rows = self
            .integer_rows()
            .iter()
            .map(|r| format!("({})", r.iter().join(",")))
            .join(", ");
        write!(f, "span{{{rows}}}")
    }
}

/// A half-line `{r·a : r > 0}` with `a` a primitive integer vector. The sign
/// of the input is kept, so `a` and `-a` are different directions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectionQ {
    vector: Vec<BigInt>,
}

impl DirectionQ {
    pub fn new(vector: Vec<BigInt>) -> Result<Self, LatticeError> {
        if vector.is_empty() {
            return Err(LatticeError::ZeroAmbientDimension);
        }
        let g = vector.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
        if g.is_zero() {
            return Err(LatticeError::ZeroDirection);
        }
        Ok(DirectionQ {
            vector: vector.into_iter().map(|x| x / &g).collect(),
        })
    }

    pub fn from_i64(v: &[i64]) -> Result<Self, LatticeError> {
        DirectionQ::new(v.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn from_rational(v: &[BigRational]) -> Result<Self, LatticeError> {
        DirectionQ::new(primitive_integer_vector(v))
    }

    pub fn ambient_dim(&self) -> usize {
        self.vector.len()
    }

    pub fn vector(&self) -> &[BigInt] {
        &self.vector
    }

    pub fn to_rational(&self) -> Vec<BigRational> {
        self.vector
            .iter()
            .map(|x| BigRational::from_integer(x.clone()))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.vector
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Unit vector in floating point.
    pub fn unit(&self) -> Vec<f64> {
        let v = self.to_f64();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    pub fn negated(&self) -> DirectionQ {
        DirectionQ {
            vector: self.vector.iter().map(|x| -x).collect(),
        }
    }
}

impl fmt::Debug for DirectionQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DirectionQ({self})")
    }
}

impl fmt::Display for DirectionQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.vector.iter().join(","))
    }
}

impl Serialize for DirectionQ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::problem::serialize_int_row(&self.vector, s)
    }
}

impl<'de> Deserialize<'de> for DirectionQ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = crate::problem::deserialize_int_row(d)?;
        DirectionQ::new(v).map_err(serde::de::Error::custom)
    }
}

/// A finite family of subspaces containing `{0}` and closed under
/// intersection. Elements are kept sorted by (dimension, basis).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SemiLattice {
    ambient_dim: usize,
    elements: Vec<SubspaceQ>,
}

impl SemiLattice {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn elements(&self) -> &[SubspaceQ] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, y: &SubspaceQ) -> bool {
        self.elements.binary_search(y).is_ok()
    }

    /// Builds a semilattice from an explicit element list without closing it.
    /// Used for tests and for checking externally supplied families; the
    /// invariants are verified and violations reported.
    pub fn from_elements(elements: Vec<SubspaceQ>, d: usize) -> Result<Self, LatticeError> {
        for e in &elements {
            e.check_dim(d)?;
        }
        let set: BTreeSet<SubspaceQ> = elements.into_iter().collect();
        Ok(SemiLattice {
            ambient_dim: d,
            elements: set.into_iter().collect(),
        })
    }

    /// Whether the element list is closed under pairwise intersection and
    /// contains the zero subspace.
    pub fn is_closed(&self) -> bool {
        if !self.contains(&SubspaceQ::zero(self.ambient_dim)) {
            return false;
        }
        self.elements.iter().tuple_combinations().all(|(a, b)| {
            a.intersect(b).map(|c| self.contains(&c)).unwrap_or(false)
        })
    }

    /// The subspaces of the family that contain `alpha`, i.e. the filter
    /// `{Y : α ⊂ Y}`.
    pub fn filter_of(&self, alpha: &DirectionQ) -> Result<Vec<SubspaceQ>, LatticeError> {
        let mut out = Vec::new();
        for y in &self.elements {
            if y.contains_direction(alpha)? {
                out.push(y.clone());
            }
        }
        Ok(out)
    }
}

pub fn generate_semilattice(generators: &[SubspaceQ], d: usize) -> Result<SemiLattice, LatticeError> {
    generate_semilattice_bounded(generators, d, DEFAULT_CLOSURE_BOUND)
}

/// Smallest intersection-closed family containing `generators` and `{0}`.
pub fn generate_semilattice_bounded(
    generators: &[SubspaceQ],
    d: usize,
    bound: usize,
) -> Result<SemiLattice, LatticeError> {
    if d == 0 {
        return Err(LatticeError::ZeroAmbientDimension);
    }
    let mut set: BTreeSet<SubspaceQ> = BTreeSet::new();
    let mut pending: Vec<SubspaceQ> = Vec::new();
    for g in std::iter::once(SubspaceQ::zero(d)).chain(generators.iter().cloned()) {
        g.check_dim(d)?;
        if set.insert(g.clone()) {
            pending.push(g);
        }
    }
    // Each newly found element is intersected with everything known so far;
    // the pairwise products of older elements were handled when they arrived.
    let mut known: Vec<SubspaceQ> = Vec::new();
    while let Some(next) = pending.pop() {
        for other in &known {
            let c = next.intersect(other)?;
            if !set.contains(&c) {
                if set.len() >= bound {
                    return Err(LatticeError::ClosureTooLarge { bound });
                }
                set.insert(c.clone());
                pending.push(c);
            }
        }
        known.push(next);
    }
    if set.len() > bound {
        return Err(LatticeError::ClosureTooLarge { bound });
    }
    Ok(SemiLattice {
        ambient_dim: d,
        elements: set.into_iter().collect(),
    })
}

/// Generators of the many-body family in `(R^d)^n`: the `n` subspaces
/// `{x_i = 0}` followed by the `n(n-1)/2` subspaces `{x_i = x_j}`, `i < j`.
pub fn msc_generators(n: usize, d: usize) -> Vec<SubspaceQ> {
    assert!(n >= 1 && d >= 1, "n and d must be positive");
    let dim = n * d;
    let unit = |idx: usize| -> Vec<BigRational> {
        (0..dim).map(|c| rat((c == idx) as i64)).collect()
    };
    let mut out = Vec::with_capacity(n + n * (n - 1) / 2);
    for i in 0..n {
        let rows: Vec<_> = (0..n)
            .filter(|&b| b != i)
            .flat_map(|b| (0..d).map(move |k| b * d + k))
            .map(unit)
            .collect();
        out.push(canonicalize(&rows, dim).expect("consistent dimension"));
    }
    for (i, j) in (0..n).tuple_combinations() {
        let mut rows: Vec<Vec<BigRational>> = (0..n)
            .filter(|&b| b != i && b != j)
            .flat_map(|b| (0..d).map(move |k| b * d + k))
            .map(unit)
            .collect();
        for k in 0..d {
            let mut v = unit(i * d + k);
            v[j * d + k] = BigRational::one();
            rows.push(v);
        }
        out.push(canonicalize(&rows, dim).expect("consistent dimension"));
    }
    out
}

/// Outcome of a combinatorial check; failures carry a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Check<W> {
    Pass,
    Fail(W),
}

impl<W> Check<W> {
    pub fn is_pass(&self) -> bool {
        matches!(self, Check::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymmetryWitness {
    /// Block `i` is sent to block `permutation[i]`.
    pub permutation: Vec<usize>,
    pub subspace: SubspaceQ,
    pub image: SubspaceQ,
}

/// Checks that every block permutation of `(R^d)^n` maps the family into
/// itself.
pub fn check_symmetric_action(s: &SemiLattice, n: usize, d: usize) -> Check<SymmetryWitness> {
    if s.ambient_dim != n * d {
        // A family living elsewhere cannot be invariant; report the identity
        // permutation on the first element as the witness.
        let y = s.elements.first().cloned().unwrap_or_else(|| SubspaceQ::zero(s.ambient_dim));
        return Check::Fail(SymmetryWitness {
            permutation: (0..n).collect(),
            image: y.clone(),
            subspace: y,
        });
    }
    for perm in (0..n).permutations(n) {
        for y in &s.elements {
            let image = y.permute_blocks(&perm, d);
            if !s.contains(&image) {
                return Check::Fail(SymmetryWitness {
                    permutation: perm,
                    subspace: y.clone(),
                    image,
                });
            }
        }
    }
    Check::Pass
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ProjectionWitness {
    /// The preimage of `source` under the coordinate projection is missing.
    PreimageMissing { source: SubspaceQ, preimage: SubspaceQ },
    /// The kernel of `x ↦ x_i − x_j` is missing.
    DifferenceKernelMissing { i: usize, j: usize, kernel: SubspaceQ },
}

/// Preimage of `y ⊂ (R^d)^k` under `(x_1..x_n) ↦ (x_{i_1}..x_{i_k})`.
pub fn projection_preimage(
    y: &SubspaceQ,
    indices: &[usize],
    n: usize,
    d: usize,
) -> Result<SubspaceQ, LatticeError> {
    let k = indices.len();
    y.check_dim(k * d)?;
    validate_indices(indices, n)?;
    let constraints: Vec<Vec<BigRational>> = y
        .annihilator()
        .basis
        .iter()
        .map(|c| {
            let mut lifted = vec![BigRational::zero(); n * d];
            for (slot, &i) in indices.iter().enumerate() {
                for t in 0..d {
                    lifted[i * d + t] = c[slot * d + t].clone();
                }
            }
            lifted
        })
        .collect();
    SubspaceQ::kernel_of(&constraints, n * d)
}

/// Kernel of the difference map `x ↦ x_i − x_j` on `(R^d)^n`.
pub fn difference_kernel(i: usize, j: usize, n: usize, d: usize) -> Result<SubspaceQ, LatticeError> {
    validate_indices(&[i, j], n)?;
    let constraints: Vec<Vec<BigRational>> = (0..d)
        .map(|t| {
            let mut c = vec![BigRational::zero(); n * d];
            c[i * d + t] = rat(1);
            c[j * d + t] = rat(-1);
            c
        })
        .collect();
    SubspaceQ::kernel_of(&constraints, n * d)
}

fn validate_indices(indices: &[usize], n: usize) -> Result<(), LatticeError> {
    let mut seen = BTreeSet::new();
    for &i in indices {
        if i >= n {
            return Err(LatticeError::IndexOutOfRange { index: i, n });
        }
        if !seen.insert(i) {
            return Err(LatticeError::RepeatedIndex(i));
        }
    }
    Ok(())
}

/// Checks that preimages of `sk` under the projection onto the blocks
/// `indices` (0-based) lie in `sn`, and that every difference kernel
/// `{x_i = x_j}` lies in `sn`.
pub fn check_projection_and_difference(
    sn: &SemiLattice,
    sk: &SemiLattice,
    indices: &[usize],
    n: usize,
    k: usize,
    d: usize,
) -> Result<Check<ProjectionWitness>, LatticeError> {
    if indices.len() != k {
        return Err(LatticeError::DimensionMismatch {
            expected: k,
            found: indices.len(),
        });
    }
    validate_indices(indices, n)?;
    sn.elements.first().map(|e| e.check_dim(n * d)).transpose()?;
    for y in &sk.elements {
        let preimage = projection_preimage(y, indices, n, d)?;
        if !sn.contains(&preimage) {
            return Ok(Check::Fail(ProjectionWitness::PreimageMissing {
                source: y.clone(),
                preimage,
            }));
        }
    }
    for (i, j) in (0..n).tuple_combinations() {
        let kernel = difference_kernel(i, j, n, d)?;
        if !sn.contains(&kernel) {
            return Ok(Check::Fail(ProjectionWitness::DifferenceKernelMissing { i, j, kernel }));
        }
    }
    Ok(Check::Pass)
}

/// A class of directions at infinity sharing the same filter
/// `{Y ∈ S : α ⊂ Y}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stratum {
    /// Nonzero element of the family, or the whole space for the generic
    /// stratum.
    pub base: SubspaceQ,
    pub filter: Vec<SubspaceQ>,
    /// Members of the family not containing `base`; directions of the
    /// stratum avoid all of them.
    pub excluded: Vec<SubspaceQ>,
    pub representative: DirectionQ,
    pub generic: bool,
}

impl Stratum {
    /// Whether `alpha` belongs to this stratum.
    pub fn contains_direction(&self, alpha: &DirectionQ) -> Result<bool, LatticeError> {
        if !self.base.contains_direction(alpha)? {
            return Ok(false);
        }
        for y in &self.excluded {
            if y.contains_direction(alpha)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// One stratum per nonzero element of `s`, plus the generic stratum (base
/// `X`, empty filter) when `X ∉ s`.
pub fn enumerate_strata(s: &SemiLattice) -> Vec<Stratum> {
    let d = s.ambient_dim;
    let full = SubspaceQ::full(d);
    let mut bases: Vec<(SubspaceQ, bool)> = s
        .elements
        .iter()
        .filter(|z| !z.is_zero())
        .map(|z| (z.clone(), false))
        .collect();
    if !s.contains(&full) {
        bases.push((full, true));
    }
    bases
        .into_iter()
        .map(|(base, generic)| {
            let (filter, excluded): (Vec<_>, Vec<_>) = s
                .elements
                .iter()
                .cloned()
                .partition(|y| y.contains_subspace(&base).expect("same ambient dimension"));
            let representative = find_direction_avoiding(&base, &excluded)
                .expect("a finite union of proper subspaces cannot cover a nonzero subspace");
            Stratum {
                base,
                filter,
                excluded,
                representative,
                generic,
            }
        })
        .collect()
}

/// Integer coefficient tuples of height exactly `h` in a fixed order:
/// coordinates run through 0, 1, -1, 2, -2, ... lexicographically.
fn tuples_of_height(k: usize, h: i64) -> impl Iterator<Item = Vec<i64>> {
    let values: Vec<i64> = std::iter::once(0)
        .chain((1..=h).flat_map(|m| [m, -m]))
        .collect();
    (0..k)
        .map(|_| values.clone())
        .multi_cartesian_product()
        .filter(move |t| t.iter().map(|x| x.abs()).max() == Some(h))
}

/// First direction in `z` (coefficients of the canonical basis enumerated
/// by increasing height) that lies in none of `excluded`.
pub fn find_direction_avoiding(z: &SubspaceQ, excluded: &[SubspaceQ]) -> Option<DirectionQ> {
    if z.is_zero() {
        return None;
    }
    let k = z.dim();
    // Each excluded subspace meets z in a proper subspace, so some vector
    // of height at most (number excluded + 1) avoids all of them.
    let max_height = excluded.len() as i64 + 2;
    for h in 1..=max_height {
        for coeffs in tuples_of_height(k, h) {
            let mut v = vec![BigRational::zero(); z.ambient_dim];
            for (c, row) in coeffs.iter().zip(&z.basis) {
                if *c == 0 {
                    continue;
                }
                let c = rat(*c);
                for (x, b) in v.iter_mut().zip(row) {
                    *x += &c * b;
                }
            }
            let hit = excluded
                .iter()
                .any(|y| y.contains_vector(&v).expect("same ambient dimension"));
            if !hit {
                return DirectionQ::from_rational(&v).ok();
            }
        }
    }
    None
}

impl Serialize for SubspaceQ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SubspaceQ", 2)?;
        st.serialize_field("ambient_dim", &self.ambient_dim)?;
        let rows: Vec<crate::problem::IntRow> = self
            .integer_rows()
            .into_iter()
            .map(crate::problem::IntRow)
            .collect();
        st.serialize_field("rows", &rows)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SubspaceQ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            ambient_dim: usize,
            rows: Vec<crate::problem::IntRow>,
        }
        let raw = Raw::deserialize(d)?;
        let rows: Vec<Vec<BigInt>> = raw.rows.into_iter().map(|r| r.0).collect();
        SubspaceQ::from_bigint_rows(&rows, raw.ambient_dim).map_err(serde::de::Error::custom)
    }
}

/// Absolute value of the largest numerator/denominator in the basis; a
/// rough size measure used in diagnostics.
pub fn height(s: &SubspaceQ) -> BigInt {
    s.basis
        .iter()
        .flatten()
        .flat_map(|x| [x.numer().abs(), x.denom().abs()])
        .max()
        .unwrap_or_else(BigInt::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(rows: &[&[i64]], d: usize) -> SubspaceQ {
        SubspaceQ::from_integer_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), d)
            .unwrap()
    }

    fn r(n: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(den))
    }

    /// Fraction-free (Bareiss) elimination rank, independent of `rref`.
    fn bareiss_rank(rows: &[Vec<BigRational>]) -> usize {
        if rows.is_empty() {
            return 0;
        }
        // Clear denominators row by row so the elimination runs over Z.
        let mut m: Vec<Vec<BigInt>> = rows.iter().map(|r| primitive_or_zero(r)).collect();
        let cols = m[0].len();
        let mut rank = 0;
        let mut prev = BigInt::one();
        for c in 0..cols {
            let Some(p) = (rank..m.len()).find(|&i| !m[i][c].is_zero()) else {
                continue;
            };
            m.swap(rank, p);
            for i in rank + 1..m.len() {
                for j in c + 1..cols {
                    let v = &m[rank][c] * &m[i][j] - &m[i][c] * &m[rank][j];
                    m[i][j] = v / &prev;
                }
                m[i][c] = BigInt::zero();
            }
            prev = m[rank][c].clone();
            rank += 1;
            if rank == m.len() {
                break;
            }
        }
        rank
    }

    fn primitive_or_zero(r: &[BigRational]) -> Vec<BigInt> {
        let lcm = r.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        r.iter().map(|x| (x * &lcm).to_integer()).collect()
    }

    #[test]
    fn canonicalize_identity() {
        let s = q(&[&[1, 0], &[0, 1]], 2);
        assert_eq!(s.dim(), 2);
        assert!(s.is_full());
        assert_eq!(s, SubspaceQ::full(2));
    }

    #[test]
    fn canonicalize_collinear_rows() {
        let s = q(&[&[1, 1], &[2, 2]], 2);
        assert_eq!(s.dim(), 1);
        assert_eq!(s.integer_rows(), vec![vec![BigInt::from(1), BigInt::from(1)]]);
    }

    #[test]
    fn canonicalize_rank_matches_bareiss_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let count = rng.random_range(1..=5);
            let rows: Vec<Vec<BigRational>> = (0..count)
                .map(|_| {
                    (0..4)
                        .map(|_| r(rng.random_range(-3..=3), rng.random_range(1..=4)))
                        .collect()
                })
                .collect();
            // Force some dependencies.
            let mut rows = rows;
            if count >= 3 {
                let combo: Vec<BigRational> =
                    rows[0].iter().zip(&rows[1]).map(|(a, b)| a * r(2, 3) - b).collect();
                rows[2] = combo;
            }
            let s = canonicalize(&rows, 4).unwrap();
            assert_eq!(s.dim(), bareiss_rank(&rows));
        }
    }

    #[test]
    fn canonicalize_rejects_wrong_length() {
        let err = canonicalize(&[vec![r(1, 1)]], 2).unwrap_err();
        assert_eq!(err, LatticeError::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn axes_intersect_in_zero() {
        let x = q(&[&[1, 0]], 2);
        let y = q(&[&[0, 1]], 2);
        assert!(x.intersect(&y).unwrap().is_zero());
    }

    #[test]
    fn intersect_with_full_space_is_identity() {
        let a = q(&[&[1, 2, 3]], 3);
        assert_eq!(a.intersect(&SubspaceQ::full(3)).unwrap(), a);
        assert_eq!(SubspaceQ::full(3).intersect(&a).unwrap(), a);
    }

    /// Zassenhaus: row-reduce [[A, A], [B, 0]]; rows with zero left half give
    /// a basis of A ∩ B in their right half.
    fn zassenhaus(a: &SubspaceQ, b: &SubspaceQ) -> SubspaceQ {
        let d = a.ambient_dim();
        let mut rows: Vec<Vec<BigRational>> = Vec::new();
        for row in a.basis() {
            rows.push(row.iter().chain(row.iter()).cloned().collect());
        }
        for row in b.basis() {
            rows.push(
                row.iter()
                    .cloned()
                    .chain(std::iter::repeat_n(BigRational::zero(), d))
                    .collect(),
            );
        }
        let big = canonicalize(&rows, 2 * d).unwrap();
        let inter: Vec<Vec<BigRational>> = big
            .basis()
            .iter()
            .filter(|row| row[..d].iter().all(Zero::is_zero))
            .map(|row| row[d..].to_vec())
            .collect();
        canonicalize(&inter, d).unwrap()
    }

    #[test]
    fn intersect_hyperplanes_matches_stacked_constraint_oracle() {
        // {x1 = 0} ∩ {x1 = x2} in R^3.
        let a = q(&[&[0, 1, 0], &[0, 0, 1]], 3);
        let b = q(&[&[1, 1, 0], &[0, 0, 1]], 3);
        let c = a.intersect(&b).unwrap();
        assert_eq!(c, q(&[&[0, 0, 1]], 3));
        assert_eq!(c, zassenhaus(&a, &b));
    }

    #[test]
    fn contains_direction_examples() {
        let alpha = DirectionQ::from_i64(&[3, -1]).unwrap();
        assert!(!SubspaceQ::zero(2).contains_direction(&alpha).unwrap());
        assert!(SubspaceQ::full(2).contains_direction(&alpha).unwrap());
        let diag = q(&[&[1, 1]], 2);
        assert!(diag.contains_direction(&DirectionQ::from_i64(&[2, 2]).unwrap()).unwrap());
        assert!(!diag.contains_direction(&DirectionQ::from_i64(&[1, -1]).unwrap()).unwrap());
    }

    #[test]
    fn contains_direction_dimension_mismatch() {
        let alpha = DirectionQ::from_i64(&[1, 0, 0]).unwrap();
        assert!(SubspaceQ::full(2).contains_direction(&alpha).is_err());
    }

    #[test]
    fn direction_canonical_form_keeps_sign() {
        let a = DirectionQ::from_i64(&[-4, 6]).unwrap();
        assert_eq!(a.vector(), &[BigInt::from(-2), BigInt::from(3)]);
        let b = DirectionQ::from_i64(&[4, -6]).unwrap();
        assert_ne!(a, b);
        assert_eq!(DirectionQ::new(a.vector().to_vec()).unwrap(), a);
        assert_eq!(DirectionQ::from_i64(&[0, 0]).unwrap_err(), LatticeError::ZeroDirection);
    }

    #[test]
    fn empty_generators_give_zero_only() {
        let s = generate_semilattice(&[], 3).unwrap();
        assert_eq!(s.elements(), &[SubspaceQ::zero(3)]);
    }

    #[test]
    fn msc_generator_counts() {
        let g = msc_generators(1, 1);
        assert_eq!(g, vec![SubspaceQ::zero(1)]);
        let g = msc_generators(2, 1);
        assert_eq!(g.len(), 3);
        assert!(g.iter().all(|y| y.dim() == 1 && y.ambient_dim() == 2));
        let g = msc_generators(3, 2);
        assert_eq!(g.len(), 6);
        assert!(g.iter().all(|y| y.dim() == 4 && y.ambient_dim() == 6));
    }

    #[test]
    fn one_body_family_is_trivial() {
        let s = generate_semilattice(&msc_generators(1, 3), 3).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.elements()[0].is_zero());
    }

    /// Exhaustive fixpoint: intersect every pair until nothing changes.
    fn brute_closure(gens: &[SubspaceQ], d: usize) -> BTreeSet<SubspaceQ> {
        let mut set: BTreeSet<SubspaceQ> = gens.iter().cloned().collect();
        set.insert(SubspaceQ::zero(d));
        loop {
            let items: Vec<_> = set.iter().cloned().collect();
            let before = set.len();
            for a in &items {
                for b in &items {
                    set.insert(a.intersect(b).unwrap());
                }
            }
            if set.len() == before {
                return set;
            }
        }
    }

    #[test]
    fn two_body_closure_has_four_elements() {
        let gens = msc_generators(2, 1);
        let s = generate_semilattice(&gens, 2).unwrap();
        assert_eq!(s.len(), 4);
        let oracle: Vec<_> = brute_closure(&gens, 2).into_iter().collect();
        assert_eq!(s.elements(), oracle.as_slice());
        assert!(s.is_closed());
    }

    #[test]
    fn closure_bound_is_enforced() {
        let gens = msc_generators(3, 1);
        let err = generate_semilattice_bounded(&gens, 3, 3).unwrap_err();
        assert_eq!(err, LatticeError::ClosureTooLarge { bound: 3 });
    }

    #[test]
    fn symmetric_action_examples() {
        let s2 = generate_semilattice(&msc_generators(2, 1), 2).unwrap();
        assert!(check_symmetric_action(&s2, 2, 1).is_pass());
        // Swap fixes {x1 = x2} and exchanges {x1 = 0}, {x2 = 0}.
        let s1 = q(&[&[0, 1]], 2);
        let s2_ = q(&[&[1, 0]], 2);
        let s12 = q(&[&[1, 1]], 2);
        assert_eq!(s12.permute_blocks(&[1, 0], 1), s12);
        assert_eq!(s1.permute_blocks(&[1, 0], 1), s2_);

        let partial = SemiLattice::from_elements(vec![SubspaceQ::zero(2), s1.clone()], 2).unwrap();
        match check_symmetric_action(&partial, 2, 1) {
            Check::Fail(w) => {
                assert_eq!(w.permutation, vec![1, 0]);
                assert_eq!(w.subspace, s1);
            }
            Check::Pass => panic!("missing {{x2 = 0}} must be detected"),
        }
        let s3 = generate_semilattice(&msc_generators(3, 1), 3).unwrap();
        assert!(check_symmetric_action(&s3, 3, 1).is_pass());
    }

    #[test]
    fn symmetric_action_small_cases() {
        for n in 1..=4 {
            for d in 1..=2 {
                let s = generate_semilattice(&msc_generators(n, d), n * d).unwrap();
                assert!(check_symmetric_action(&s, n, d).is_pass(), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn projection_preimage_of_zero_is_coordinate_hyperplane() {
        let s2 = generate_semilattice(&msc_generators(2, 1), 2).unwrap();
        let s1 = generate_semilattice(&msc_generators(1, 1), 1).unwrap();
        let pre = projection_preimage(&SubspaceQ::zero(1), &[0], 2, 1).unwrap();
        assert_eq!(pre, msc_generators(2, 1)[0]);
        assert!(check_projection_and_difference(&s2, &s1, &[0], 2, 1, 1).unwrap().is_pass());
        assert_eq!(difference_kernel(0, 1, 2, 1).unwrap(), q(&[&[1, 1]], 2));
    }

    #[test]
    fn projection_check_reports_missing_difference_kernel() {
        let gens = msc_generators(2, 1);
        let partial = generate_semilattice(&gens[..2], 2).unwrap();
        let s1 = generate_semilattice(&msc_generators(1, 1), 1).unwrap();
        match check_projection_and_difference(&partial, &s1, &[1], 2, 1, 1).unwrap() {
            Check::Fail(ProjectionWitness::DifferenceKernelMissing { i, j, .. }) => {
                assert_eq!((i, j), (0, 1))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn projection_check_rejects_bad_indices() {
        let s2 = generate_semilattice(&msc_generators(2, 1), 2).unwrap();
        let s1 = generate_semilattice(&msc_generators(1, 1), 1).unwrap();
        assert_eq!(
            check_projection_and_difference(&s2, &s1, &[2], 2, 1, 1).unwrap_err(),
            LatticeError::IndexOutOfRange { index: 2, n: 2 }
        );
    }

    #[test]
    fn strata_of_trivial_family() {
        let s = generate_semilattice(&[], 2).unwrap();
        let strata = enumerate_strata(&s);
        assert_eq!(strata.len(), 1);
        assert!(strata[0].generic);
        assert!(strata[0].base.is_full());
        assert!(strata[0].filter.is_empty());
    }

    /// Distinct filters seen over many random rational directions.
    fn sampled_filters(s: &SemiLattice, samples: usize, seed: u64) -> BTreeSet<Vec<SubspaceQ>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = s.ambient_dim();
        let mut out = BTreeSet::new();
        for _ in 0..samples {
            // Mix generic vectors with vectors drawn from lattice elements so
            // lower-dimensional strata get hit.
            let pick = rng.random_range(0..=s.len());
            let v: Vec<BigRational> = if pick < s.len() && !s.elements()[pick].is_zero() {
                let z = &s.elements()[pick];
                let mut v = vec![BigRational::zero(); d];
                for row in z.basis() {
                    let c = rat(rng.random_range(-9..=9));
                    for (x, b) in v.iter_mut().zip(row) {
                        *x += &c * b;
                    }
                }
                v
            } else {
                (0..d).map(|_| rat(rng.random_range(-9..=9))).collect()
            };
            if let Ok(alpha) = DirectionQ::from_rational(&v) {
                out.insert(s.filter_of(&alpha).unwrap());
            }
        }
        out
    }

    #[test]
    fn axis_family_has_three_strata() {
        let x = q(&[&[1, 0]], 2);
        let y = q(&[&[0, 1]], 2);
        let s = generate_semilattice(&[x.clone(), y.clone()], 2).unwrap();
        let strata = enumerate_strata(&s);
        assert_eq!(strata.len(), 3);
        let filters: BTreeSet<_> = strata.iter().map(|st| st.filter.clone()).collect();
        assert_eq!(filters, sampled_filters(&s, 10_000, 1));
        assert!(strata.iter().any(|st| st.base == x && st.filter == vec![x.clone()]));
        assert!(strata.iter().any(|st| st.base == y && st.filter == vec![y.clone()]));
        assert!(strata.iter().any(|st| st.generic && st.filter.is_empty()));
    }

    #[test]
    fn two_body_strata_with_full_space() {
        let mut gens = msc_generators(2, 1);
        gens.push(SubspaceQ::full(2));
        let s = generate_semilattice(&gens, 2).unwrap();
        let strata = enumerate_strata(&s);
        assert_eq!(strata.len(), 4);
        assert!(strata.iter().all(|st| !st.generic));
        let filters: BTreeSet<_> = strata.iter().map(|st| st.filter.clone()).collect();
        assert_eq!(filters, sampled_filters(&s, 10_000, 2));
    }

    #[test]
    fn representatives_realize_their_filters() {
        let s = generate_semilattice(&msc_generators(3, 1), 3).unwrap();
        for st in enumerate_strata(&s) {
            for y in s.elements() {
                let inside = y.contains_direction(&st.representative).unwrap();
                assert_eq!(inside, st.filter.contains(y), "stratum {:?}, Y = {y}", st.base);
            }
        }
    }

    #[test]
    fn random_directions_fall_in_exactly_one_stratum() {
        use rand::{Rng, SeedableRng};
        let s = generate_semilattice(&msc_generators(2, 2), 4).unwrap();
        let strata = enumerate_strata(&s);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v: Vec<i64> = (0..4).map(|_| rng.random_range(-2..=2)).collect();
            let Ok(alpha) = DirectionQ::from_i64(&v) else { continue };
            let filter = s.filter_of(&alpha).unwrap();
            let hits = strata.iter().filter(|st| st.filter == filter).count();
            assert_eq!(hits, 1);
            let members = strata
                .iter()
                .filter(|st| st.contains_direction(&alpha).unwrap())
                .count();
            assert_eq!(members, 1);
        }
    }

    fn arb_subspace(d: usize) -> impl Strategy<Value = SubspaceQ> {
        prop::collection::vec(prop::collection::vec(-3i64..=3, d), 0..=d)
            .prop_map(move |rows| SubspaceQ::from_integer_rows(&rows, d).unwrap())
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(s in arb_subspace(4)) {
            let again = canonicalize(s.basis(), 4).unwrap();
            prop_assert_eq!(&again, &s);
            let from_ints = SubspaceQ::from_bigint_rows(&s.integer_rows(), 4).unwrap();
            prop_assert_eq!(from_ints, s);
        }

        #[test]
        fn intersection_laws(a in arb_subspace(4), b in arb_subspace(4), c in arb_subspace(4)) {
            let ab = a.intersect(&b).unwrap();
            prop_assert_eq!(&ab, &b.intersect(&a).unwrap());
            prop_assert_eq!(a.intersect(&a).unwrap(), a.clone());
            prop_assert!(ab.dim() <= a.dim().min(b.dim()));
            prop_assert_eq!(ab.intersect(&c).unwrap(), a.intersect(&b.intersect(&c).unwrap()).unwrap());
            prop_assert_eq!(&ab, &zassenhaus(&a, &b));
            prop_assert!(a.contains_subspace(&ab).unwrap());
        }

        #[test]
        fn closure_is_a_fixpoint(gens in prop::collection::vec(arb_subspace(3), 0..4)) {
            let s = generate_semilattice(&gens, 3).unwrap();
            prop_assert!(s.is_closed());
            let again = generate_semilattice(s.elements(), 3).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
