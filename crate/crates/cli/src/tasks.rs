//! Execution of problem-file tasks. Every task yields a status, a one-line
//! summary, a CSV table and a JSON detail record.

use std::fmt;

use hvz_core::algebra::{commutator_probe, fredholm_check, Bump, Verdict};
use hvz_core::lattice::{
    check_projection_and_difference, check_symmetric_action, enumerate_strata,
    generate_semilattice, msc_generators, Check, SemiLattice,
};
use hvz_core::model::{tau_limit, Schrodinger};
use hvz_core::numerics::{
    classify_eigenvalue_stability, discretize_hamiltonian_capped, lowest_eigenvalues_with,
    threshold_estimate, Boundary, Grid, SolverChoice,
};
use hvz_core::problem::{ProbeExpectation, ProbeFunction, ProblemFile, TaskSpec};
use hvz_core::report;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Inconclusive => "inconclusive",
            Status::Fail => "fail",
            Status::Error => "error",
        })
    }
}

pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub csv: String,
    pub detail: Value,
}

impl Outcome {
    pub fn error(msg: impl fmt::Display) -> Self {
        Outcome {
            status: Status::Error,
            summary: msg.to_string(),
            csv: String::new(),
            detail: json!({ "error": msg.to_string() }),
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn semilattice(p: &ProblemFile) -> Result<SemiLattice, String> {
    let family = p.family().map_err(|e| e.to_string())?;
    generate_semilattice(&family, p.dimension).map_err(|e| e.to_string())
}

pub fn execute(p: &ProblemFile, task: &TaskSpec) -> Outcome {
    match run_task(p, task) {
        Ok(o) => o,
        Err(e) => Outcome::error(e),
    }
}

fn run_task(p: &ProblemFile, task: &TaskSpec) -> Result<Outcome, String> {
    let e = |x: &dyn fmt::Display| x.to_string();
    match task {
        TaskSpec::Hvz {
            expect_sigma_ess,
            tolerance,
        } => {
            let h = p.hamiltonian().map_err(|x| e(&x))?;
            let s = semilattice(p)?;
            let thr = threshold_estimate(&h, &s, &p.config.threshold).map_err(|x| e(&x))?;
            let stab = if h.dim() <= 2 {
                Some(classify_eigenvalue_stability(&h, &p.config.stability).map_err(|x| e(&x))?)
            } else {
                None
            };
            let mut status = Status::Pass;
            let mut notes = vec![format!("sigma_ess = {}", thr.sigma_ess)];
            if let Some(x) = expect_sigma_ess {
                if (thr.sigma_ess - x).abs() > *tolerance {
                    status = Status::Fail;
                    notes.push(format!("expected {x} ± {tolerance}"));
                }
            }
            match stab.as_ref().map(|r| r.onset) {
                Some(Some(onset)) => {
                    notes.push(format!("box onset = {onset}"));
                    if (onset - thr.sigma_ess).abs() > *tolerance {
                        status = Status::Fail;
                        notes.push("limit-operator and box onsets disagree".into());
                    }
                }
                Some(None) => {
                    status = status.max(Status::Inconclusive);
                    notes.push("no unstable level resolved in the box".into());
                }
                None => notes.push("box comparison skipped for dimension > 2".into()),
            }
            if thr.failed_samples > 0 {
                status = status.max(Status::Inconclusive);
                notes.push(format!("{} direction samples failed", thr.failed_samples));
            }
            let mut csv = report::threshold_csv(&thr);
            if let Some(r) = &stab {
                csv.push('\n');
                csv.push_str(&report::stability_csv(r));
            }
            Ok(Outcome {
                status,
                summary: notes.join("; "),
                csv,
                detail: json!({ "threshold": to_value(&thr), "stability": stab.as_ref().map(to_value) }),
            })
        }
        TaskSpec::Fredholm { element, expect } => {
            let elements = p.elements().map_err(|x| e(&x))?;
            let el = elements
                .get(element)
                .ok_or_else(|| format!("no element named {element:?}"))?;
            let s = semilattice(p)?;
            let r = fredholm_check(el, &s, &p.config.fredholm).map_err(|x| e(&x))?;
            let status = match (r.verdict, expect) {
                (Verdict::Inconclusive, _) => Status::Inconclusive,
                (v, Some(x)) if v == *x => Status::Pass,
                (_, Some(_)) => Status::Fail,
                (Verdict::EvidenceFredholm, None) => Status::Pass,
                (Verdict::EvidenceNotFredholm, None) => Status::Fail,
            };
            Ok(Outcome {
                status,
                summary: format!(
                    "{element}: {} (min |σ_0| = {}; {})",
                    r.verdict, r.ellipticity_min, r.note
                ),
                csv: report::fredholm_csv(&r),
                detail: to_value(&r),
            })
        }
        TaskSpec::LatticeCheck { n, d, expect_size } => lattice_check(*n, *d, *expect_size),
        TaskSpec::Strata { expect_count } => {
            let s = semilattice(p)?;
            let strata = enumerate_strata(&s);
            let status = match expect_count {
                Some(c) if *c != strata.len() => Status::Fail,
                _ => Status::Pass,
            };
            Ok(Outcome {
                status,
                summary: format!("{} strata", strata.len()),
                csv: report::strata_csv(&strata),
                detail: to_value(&strata),
            })
        }
        TaskSpec::Tau { direction } => {
            let h = p.hamiltonian().map_err(|x| e(&x))?;
            let alpha = hvz_core::lattice::DirectionQ::new(direction.0.clone()).map_err(|x| e(&x))?;
            let l = tau_limit(&h, &alpha).map_err(|x| e(&x))?;
            let retained: Vec<String> = l.retained.iter().map(|t| t.subspace().to_string()).collect();
            Ok(Outcome {
                status: Status::Pass,
                summary: format!(
                    "direction {alpha}: retained [{}], shift {}, Z = {}",
                    retained.join(", "),
                    l.shift,
                    l.invariant_subspace
                ),
                csv: report::tau_csv(&l),
                detail: json!({
                    "direction": to_value(&l.direction),
                    "retained": l.retained.iter().map(|t| json!({
                        "subspace": to_value(t.subspace()),
                        "potential": to_value(t.function()),
                    })).collect::<Vec<_>>(),
                    "shift": l.shift,
                    "invariant_subspace": to_value(&l.invariant_subspace),
                }),
            })
        }
        TaskSpec::CommutatorProbe {
            function,
            half_width,
            points,
            radii,
            bump_radius,
            expect,
        } => {
            let f: Box<dyn Fn(&[f64]) -> f64 + Sync> = match function {
                ProbeFunction::Asymptotic(a) => {
                    a.validate(1).map_err(|x| e(&x))?;
                    let a = a.clone();
                    Box::new(move |x: &[f64]| a.evaluate(x))
                }
                ProbeFunction::Sin => Box::new(|x: &[f64]| x[0].sin()),
            };
            let bump = Bump::new(vec![0.0], *bump_radius).map_err(|x| e(&x))?;
            let mut radii = radii.clone();
            if !radii.contains(&0.0) {
                radii.insert(0, 0.0);
            }
            let mut rows = Vec::new();
            let mut ok = true;
            for &n in points {
                let g = Grid::new(1, *half_width, n, Boundary::Dirichlet).map_err(|x| e(&x))?;
                let norms = commutator_probe(&f, &bump, &g, &radii).map_err(|x| e(&x))?;
                let base = norms[radii.iter().position(|r| *r == 0.0).expect("radius 0 present")];
                let ratios: Vec<f64> = radii
                    .iter()
                    .zip(&norms)
                    .filter(|(r, _)| **r > 0.0)
                    .map(|(_, v)| v / base)
                    .collect();
                ok &= match expect {
                    ProbeExpectation::Decay => ratios.iter().any(|q| *q < 0.1),
                    ProbeExpectation::Plateau => ratios.iter().all(|q| *q > 0.5),
                };
                rows.extend(radii.iter().zip(&norms).map(|(r, v)| (n, *r, *v)));
            }
            Ok(Outcome {
                status: if ok { Status::Pass } else { Status::Fail },
                summary: format!("commutator norms {expect:?} as expected: {ok}"),
                csv: report::commutator_csv(&rows),
                detail: json!({ "rows": rows }),
            })
        }
        TaskSpec::Spectrum {
            spacing,
            half_width,
            count,
            expect_lowest,
            tolerance,
        } => {
            let h = p.hamiltonian().map_err(|x| e(&x))?;
            let g = Grid::dirichlet(h.dim(), *half_width, *spacing).map_err(|x| e(&x))?;
            let a = discretize_hamiltonian_capped(&h, &g, p.config.threshold.grid_cap).map_err(|x| e(&x))?;
            let k = (*count).min(a.dim());
            let r = lowest_eigenvalues_with(&a, k, SolverChoice::Auto, &p.config.threshold.eigen)
                .map_err(|x| e(&x))?;
            let lowest = r.eigenvalues.first().copied().unwrap_or(f64::NAN);
            let status = match expect_lowest {
                Some(x) if (lowest - x).abs() > *tolerance => Status::Fail,
                _ => Status::Pass,
            };
            Ok(Outcome {
                status,
                summary: format!("lowest eigenvalue {lowest} ({} computed, {})", r.eigenvalues.len(), r.method),
                csv: report::spectrum_csv(&r),
                detail: to_value(&r),
            })
        }
    }
}

/// All injective index tuples of length `k` from `0..n`.
fn index_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for t in index_tuples(n, k - 1) {
        for i in (0..n).filter(|i| !t.contains(i)) {
            let mut u = t.clone();
            u.push(i);
            out.push(u);
        }
    }
    out
}

pub fn lattice_check(n: usize, d: usize, expect_size: Option<usize>) -> Result<Outcome, String> {
    if n == 0 || d == 0 {
        return Err("n and d must be positive".into());
    }
    let sn = generate_semilattice(&msc_generators(n, d), n * d).map_err(|x| x.to_string())?;
    let mut status = Status::Pass;
    let mut notes = vec![format!("{} elements", sn.len())];
    if let Some(x) = expect_size {
        if sn.len() != x {
            status = Status::Fail;
            notes.push(format!("expected {x}"));
        }
    }
    let symmetric = check_symmetric_action(&sn, n, d);
    notes.push(format!("symmetric action: {}", if symmetric.is_pass() { "pass" } else { "fail" }));
    if let Check::Fail(w) = &symmetric {
        status = Status::Fail;
        notes.push(format!("{:?} maps {} to {}", w.permutation, w.subspace, w.image));
    }
    let mut projection_ok = true;
    for k in 1..n {
        let sk = generate_semilattice(&msc_generators(k, d), k * d).map_err(|x| x.to_string())?;
        for idx in index_tuples(n, k) {
            let c = check_projection_and_difference(&sn, &sk, &idx, n, k, d).map_err(|x| x.to_string())?;
            if let Check::Fail(w) = c {
                projection_ok = false;
                notes.push(format!("projection {idx:?}: {w:?}"));
            }
        }
    }
    notes.push(format!("projections and differences: {}", if projection_ok { "pass" } else { "fail" }));
    if !projection_ok {
        status = Status::Fail;
    }
    Ok(Outcome {
        status,
        summary: notes.join("; "),
        csv: report::semilattice_csv(&sn),
        detail: json!({
            "n": n,
            "d": d,
            "semilattice": to_value(&sn),
            "symmetric_action": symmetric.is_pass(),
            "projection_and_difference": projection_ok,
        }),
    })
}
