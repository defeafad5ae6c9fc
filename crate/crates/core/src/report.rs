//! CSV renderings of the computed reports. Output depends only on the
//! report contents, so identical inputs give byte-identical files.

use crate::algebra::{EssentialSpectrumReport, FredholmReport, SymbolPoint, Witness};
use crate::lattice::{SemiLattice, Stratum};
use crate::model::LimitHamiltonian;
use crate::numerics::{SpectrumResult, StabilityReport, ThresholdReport};

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn row<I, S>(w: &mut csv::Writer<Vec<u8>>, fields: I)
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).expect("in-memory write");
}

/// One row per sampled direction; one column per `(L, h)` of the schedule.
pub fn threshold_csv(r: &ThresholdReport) -> String {
    let mut grids: Vec<(f64, f64)> = Vec::new();
    for g in r.strata.iter().flat_map(|s| &s.samples).flat_map(|s| &s.grid_values) {
        if !grids.contains(&(g.half_width, g.spacing)) {
            grids.push((g.half_width, g.spacing));
        }
    }
    let mut w = writer();
    let mut header: Vec<String> = [
        "stratum",
        "generic",
        "base",
        "direction",
        "shift",
        "reduced_dim",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(grids.iter().map(|(l, h)| format!("lambda_L{l}_h{h}")));
    header.extend(["lambda_min", "extrapolated", "onset", "error"].map(String::from));
    row(&mut w, &header);
    for st in &r.strata {
        for s in &st.samples {
            let mut rec = vec![
                st.index.to_string(),
                st.generic.to_string(),
                st.base.to_string(),
                s.direction.to_string(),
                s.shift.to_string(),
                s.reduced_dim.to_string(),
            ];
            for key in &grids {
                rec.push(opt(s
                    .grid_values
                    .iter()
                    .find(|g| (g.half_width, g.spacing) == *key)
                    .map(|g| g.lambda_min)));
            }
            rec.push(s.lambda_min.to_string());
            rec.push(s.extrapolated.to_string());
            rec.push(s.onset.to_string());
            rec.push(s.error.clone().unwrap_or_default());
            row(&mut w, &rec);
        }
    }
    finish(w)
}

/// Computed eigenvalues of both boxes with their classification.
pub fn stability_csv(r: &StabilityReport) -> String {
    let mut w = writer();
    row(&mut w, ["half_width", "index", "eigenvalue", "class"]);
    for (b, values) in r.eigenvalues.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            let class = if b == 0 {
                ""
            } else if r.stable.contains(v) {
                "stable"
            } else if r.unstable.contains(v) {
                "unstable"
            } else {
                ""
            };
            row(
                &mut w,
                [r.half_widths[b].to_string(), i.to_string(), v.to_string(), class.to_string()],
            );
        }
    }
    finish(w)
}

pub fn spectrum_csv(r: &SpectrumResult) -> String {
    let mut w = writer();
    row(&mut w, ["index", "eigenvalue", "residual"]);
    for (i, (v, res)) in r.eigenvalues.iter().zip(&r.residual_norms).enumerate() {
        row(&mut w, [i.to_string(), v.to_string(), res.to_string()]);
    }
    finish(w)
}

pub fn semilattice_csv(s: &SemiLattice) -> String {
    let mut w = writer();
    row(&mut w, ["index", "dim", "subspace"]);
    for (i, y) in s.elements().iter().enumerate() {
        row(&mut w, [i.to_string(), y.dim().to_string(), y.to_string()]);
    }
    finish(w)
}

pub fn strata_csv(strata: &[Stratum]) -> String {
    let mut w = writer();
    row(&mut w, ["index", "generic", "base", "filter_size", "representative"]);
    for (i, s) in strata.iter().enumerate() {
        row(
            &mut w,
            [
                i.to_string(),
                s.generic.to_string(),
                s.base.to_string(),
                s.filter.len().to_string(),
                s.representative.to_string(),
            ],
        );
    }
    finish(w)
}

/// Retained terms of `τ_α(H)`, then the shift and the invariant subspace.
pub fn tau_csv(l: &LimitHamiltonian) -> String {
    let mut w = writer();
    row(&mut w, ["item", "subspace", "value"]);
    for t in &l.retained {
        let f = serde_json::to_string(t.function()).expect("functions serialize");
        row(&mut w, ["retained".to_string(), t.subspace().to_string(), f]);
    }
    row(&mut w, ["shift".to_string(), String::new(), l.shift.to_string()]);
    row(
        &mut w,
        ["invariant_subspace".to_string(), l.invariant_subspace.to_string(), String::new()],
    );
    finish(w)
}

fn point_label(p: &SymbolPoint) -> String {
    match p {
        SymbolPoint::Finite { x } => format!("x={x:?}"),
        SymbolPoint::AtInfinity { direction, x } => format!("x={x:?}+inf*{direction}"),
    }
}

/// Ellipticity minimum, then `σ_min` of every `τ_α(E)` along the schedule.
pub fn fredholm_csv(r: &FredholmReport) -> String {
    let mut w = writer();
    row(&mut w, ["check", "stratum", "direction", "grid_points", "value", "detail"]);
    let at = r
        .ellipticity_argmin
        .as_ref()
        .map(|(xi, p)| format!("xi={xi:?} {}", point_label(p)))
        .unwrap_or_default();
    row(
        &mut w,
        [
            "ellipticity".to_string(),
            String::new(),
            String::new(),
            String::new(),
            r.ellipticity_min.to_string(),
            at,
        ],
    );
    for c in &r.limit_checks {
        if let Some(e) = &c.error {
            row(
                &mut w,
                [
                    "limit".to_string(),
                    c.stratum.to_string(),
                    c.direction.to_string(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ],
            );
        }
        for (n, s) in &c.min_singular_values {
            row(
                &mut w,
                [
                    "limit".to_string(),
                    c.stratum.to_string(),
                    c.direction.to_string(),
                    n.to_string(),
                    s.to_string(),
                    String::new(),
                ],
            );
        }
    }
    let witness = match &r.witness {
        Some(Witness::Ellipticity { value, .. }) => format!("ellipticity {value}"),
        Some(Witness::LimitOperator {
            direction,
            grid_points,
            min_singular_value,
        }) => format!("limit {direction} n={grid_points} {min_singular_value}"),
        None => String::new(),
    };
    row(
        &mut w,
        [
            "verdict".to_string(),
            String::new(),
            String::new(),
            String::new(),
            r.verdict.to_string(),
            witness,
        ],
    );
    finish(w)
}

pub fn essential_points_csv(r: &EssentialSpectrumReport) -> String {
    let mut w = writer();
    row(&mut w, ["stratum", "direction", "eigenvalue"]);
    for s in &r.samples {
        for v in &s.eigenvalues {
            row(&mut w, [s.stratum.to_string(), s.direction.to_string(), v.to_string()]);
        }
    }
    finish(w)
}

/// Restricted commutator norms, one row per grid and radius.
pub fn commutator_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut w = writer();
    row(&mut w, ["points", "radius", "norm", "ratio"]);
    let mut base = f64::NAN;
    for &(n, r, v) in rows {
        if r == 0.0 {
            base = v;
        }
        row(&mut w, [n.to_string(), r.to_string(), v.to_string(), (v / base).to_string()]);
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_strata, generate_semilattice, msc_generators};

    #[test]
    fn lattice_and_strata_tables() {
        let s = generate_semilattice(&msc_generators(2, 1), 2).unwrap();
        let csv = semilattice_csv(&s);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("index,dim,subspace\n0,0,{0}\n"));
        let strata = enumerate_strata(&s);
        assert_eq!(strata_csv(&strata).lines().count(), 1 + strata.len());
    }

    #[test]
    fn commutator_ratios() {
        let csv = commutator_csv(&[(8, 0.0, 2.0), (8, 1.0, 0.5)]);
        assert_eq!(csv, "points,radius,norm,ratio\n8,0,2,1\n8,1,0.5,0.25\n");
    }
}
