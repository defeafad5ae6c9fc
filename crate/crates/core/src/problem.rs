//! Problem-file schema and the integer-matrix encoding shared by the
//! serialized forms of subspaces and directions.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One matrix entry: JSON integers when they fit in `i64`, decimal strings
/// otherwise, so large values survive the round trip exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum IntEntry {
    Small(i64),
    Big(String),
}

impl IntEntry {
    fn from_bigint(x: &BigInt) -> Self {
        match x.to_i64() {
            Some(v) => IntEntry::Small(v),
            None => IntEntry::Big(x.to_string()),
        }
    }

    fn to_bigint(&self) -> Result<BigInt, String> {
        match self {
            IntEntry::Small(v) => Ok(BigInt::from(*v)),
            IntEntry::Big(s) => s
                .trim()
                .parse::<BigInt>()
                .map_err(|e| format!("invalid integer {s:?}: {e}")),
        }
    }
}

/// An integer row vector with exact serialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntRow(pub Vec<BigInt>);

impl Serialize for IntRow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_int_row(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for IntRow {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        deserialize_int_row(d).map(IntRow)
    }
}

pub(crate) fn serialize_int_row<S: Serializer>(row: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
    let entries: Vec<IntEntry> = row.iter().map(IntEntry::from_bigint).collect();
    entries.serialize(s)
}

pub(crate) fn deserialize_int_row<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
    let entries = Vec::<IntEntry>::deserialize(d)?;
    entries
        .iter()
        .map(|e| e.to_bigint().map_err(serde::de::Error::custom))
        .collect()
}

use std::collections::BTreeMap;

use crate::algebra::{AlgebraElement, AlgebraError, AlgebraTerm, ESFunction, FredholmConfig, Monomial};
use crate::lattice::{DirectionQ, SubspaceQ};
use crate::model::{AsymptoticFunction, Hamiltonian, ModelError, PotentialTerm};
use crate::numerics::{StabilityConfig, ThresholdConfig};

/// Version tag accepted in problem files.
pub const PROBLEM_VERSION: &str = "hvz/1";

/// A subspace given by integer spanning rows; `[]` is `{0}`.
pub type SubspaceRows = Vec<IntRow>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub subspace: SubspaceRows,
    pub potential: AsymptoticFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub coeff: f64,
    #[serde(default)]
    pub factors: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub monomials: Vec<MonomialSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementTermSpec {
    pub f: FunctionSpec,
    pub a: AsymptoticFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub name: String,
    pub lambda: f64,
    #[serde(default)]
    pub terms: Vec<ElementTermSpec>,
}

/// Test function for the commutator probe: a built-in family evaluated on
/// `R¹`, or the `sin` control, which has no radial limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeFunction {
    Asymptotic(AsymptoticFunction),
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeExpectation {
    /// Norm outside the largest radius below `0.1×` the unrestricted norm.
    Decay,
    /// Norm stays above `0.5×` the unrestricted norm at every radius.
    Plateau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Threshold from limit operators, compared with box stability when the
    /// dimension allows it.
    Hvz {
        #[serde(default)]
        expect_sigma_ess: Option<f64>,
        #[serde(default = "default_hvz_tol")]
        tolerance: f64,
    },
    Fredholm {
        element: String,
        #[serde(default)]
        expect: Option<crate::algebra::Verdict>,
    },
    /// Checks on the family generated by `{x_i = 0}`, `{x_i = x_j}`.
    LatticeCheck {
        n: usize,
        d: usize,
        #[serde(default)]
        expect_size: Option<usize>,
    },
    Strata {
        #[serde(default)]
        expect_count: Option<usize>,
    },
    Tau { direction: IntRow },
    CommutatorProbe {
        function: ProbeFunction,
        #[serde(default = "default_probe_half_width")]
        half_width: f64,
        #[serde(default = "default_probe_points")]
        points: Vec<usize>,
        #[serde(default = "default_probe_radii")]
        radii: Vec<f64>,
        #[serde(default = "default_bump_radius")]
        bump_radius: f64,
        expect: ProbeExpectation,
    },
    Spectrum {
        spacing: f64,
        half_width: f64,
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default)]
        expect_lowest: Option<f64>,
        #[serde(default = "default_spectrum_tol")]
        tolerance: f64,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Hvz { .. } => "hvz",
            TaskSpec::Fredholm { .. } => "fredholm",
            TaskSpec::LatticeCheck { .. } => "lattice-check",
            TaskSpec::Strata { .. } => "strata",
            TaskSpec::Tau { .. } => "tau",
            TaskSpec::CommutatorProbe { .. } => "commutator-probe",
            TaskSpec::Spectrum { .. } => "spectrum",
        }
    }
}

fn default_hvz_tol() -> f64 {
    0.05
}
fn default_probe_half_width() -> f64 {
    32.0
}
fn default_probe_points() -> Vec<usize> {
    vec![256, 512, 1024]
}
fn default_probe_radii() -> Vec<f64> {
    vec![0.0, 4.0, 8.0, 16.0, 24.0]
}
fn default_bump_radius() -> f64 {
    1.0
}
fn default_count() -> usize {
    6
}
fn default_spectrum_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub threshold: ThresholdConfig,
    pub stability: StabilityConfig,
    pub fredholm: FredholmConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: String,
    pub dimension: usize,
    /// Extra family members beyond the subspaces of the potential terms.
    #[serde(default)]
    pub subspaces: Vec<SubspaceRows>,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    #[serde(default)]
    pub elements: Vec<ElementSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub config: ConfigOverrides,
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported version {found:?}, expected {PROBLEM_VERSION:?}")]
    Version { found: String },
    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: ModelError,
    },
    #[error("{context}: {source}")]
    Algebra {
        context: String,
        #[source]
        source: AlgebraError,
    },
    #[error("duplicate element name {0:?}")]
    DuplicateElement(String),
}

impl ProblemFile {
    /// Parses and checks the version tag; serde errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self, ProblemError> {
        let p: ProblemFile = serde_json::from_str(text)?;
        if p.version != PROBLEM_VERSION {
            return Err(ProblemError::Version { found: p.version });
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files serialize")
    }

    pub fn subspace(&self, rows: &SubspaceRows, context: &str) -> Result<SubspaceQ, ProblemError> {
        let rows: Vec<Vec<num_bigint::BigInt>> = rows.iter().map(|r| r.0.clone()).collect();
        SubspaceQ::from_bigint_rows(&rows, self.dimension).map_err(|e| ProblemError::Model {
            context: context.to_string(),
            source: e.into(),
        })
    }

    fn term(&self, spec: &TermSpec, context: &str) -> Result<PotentialTerm, ProblemError> {
        let y = self.subspace(&spec.subspace, context)?;
        PotentialTerm::new(y, spec.potential.clone()).map_err(|source| ProblemError::Model {
            context: context.to_string(),
            source,
        })
    }

    pub fn hamiltonian(&self) -> Result<Hamiltonian, ProblemError> {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| self.term(t, &format!("terms[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Hamiltonian::new(self.dimension, terms).map_err(|source| ProblemError::Model {
            context: "terms".into(),
            source,
        })
    }

    /// `{0}`, the subspaces of the potential terms, then the extra members.
    pub fn family(&self) -> Result<Vec<SubspaceQ>, ProblemError> {
        let mut out = self.hamiltonian()?.family();
        for (i, rows) in self.subspaces.iter().enumerate() {
            let y = self.subspace(rows, &format!("subspaces[{i}]"))?;
            if !out.contains(&y) {
                out.push(y);
            }
        }
        Ok(out)
    }

    pub fn elements(&self) -> Result<BTreeMap<String, AlgebraElement>, ProblemError> {
        let mut out = BTreeMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            let ctx = format!("elements[{i}]");
            let mut terms = Vec::new();
            for (j, t) in e.terms.iter().enumerate() {
                let mut monomials = Vec::new();
                for (k, m) in t.f.monomials.iter().enumerate() {
                    let factors = m
                        .factors
                        .iter()
                        .enumerate()
                        .map(|(l, f)| self.term(f, &format!("{ctx}.terms[{j}].f.monomials[{k}].factors[{l}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    monomials.push(Monomial {
                        coeff: m.coeff,
                        factors,
                    });
                }
                let f = ESFunction::new(self.dimension, monomials).map_err(|source| ProblemError::Algebra {
                    context: format!("{ctx}.terms[{j}].f"),
                    source,
                })?;
                terms.push(AlgebraTerm { f, a: t.a.clone() });
            }
            let el = AlgebraElement::new(self.dimension, e.lambda, terms).map_err(|source| {
                ProblemError::Algebra {
                    context: ctx.clone(),
                    source,
                }
            })?;
            if out.insert(e.name.clone(), el).is_some() {
                return Err(ProblemError::DuplicateElement(e.name.clone()));
            }
        }
        Ok(out)
    }
}

/// Parses a direction from comma-separated integers such as `1,0,-2`.
pub fn parse_direction(text: &str) -> Result<DirectionQ, String> {
    let v: Vec<i64> = text
        .split(',')
        .map(|s| s.trim().parse::<i64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    DirectionQ::from_i64(&v).map_err(|e| e.to_string())
}
