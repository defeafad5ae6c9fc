//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use hvz_core::algebra::{commutator_probe, fredholm_check, Bump, Verdict, Witness};
use hvz_core::lattice::{
    check_projection_and_difference, check_symmetric_action, generate_semilattice, msc_generators,
    DirectionQ, SemiLattice, SubspaceQ,
};
use hvz_core::model::{
    tau_limit, translation_conjugation_probe, AngularProfile, AsymptoticFunction, Hamiltonian,
    PotentialTerm,
};
use hvz_core::numerics::{
    classify_eigenvalue_stability, discretize_hamiltonian, lowest_eigenvalues, threshold_estimate, Boundary,
    Grid, StabilityConfig, ThresholdConfig,
};
use hvz_core::problem::ProblemFile;
use hvz_core::report;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_261_017;

struct Outcome {
    pass: bool,
    detail: String,
    csv: String,
}

fn outcome(pass: bool, detail: String, csv: String) -> Outcome {
    Outcome { pass, detail, csv }
}

// Brute-force closure: every nonempty set of generators, intersected by
// stacking their constraint rows. Row spaces are compared in reduced
// echelon form over small rationals.

type Q = Ratio<i64>;

fn rref(mut rows: Vec<Vec<Q>>) -> Vec<Vec<Q>> {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Q::from_integer(1) / rows[r][c];
        for v in rows[r].iter_mut() {
            *v *= inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c];
                let pivot = rows[r].clone();
                for (v, pv) in rows[i].iter_mut().zip(pivot) {
                    *v -= f * pv;
                }
            }
        }
        r += 1;
    }
    rows.truncate(r);
    rows
}

fn msc_constraints(n: usize, d: usize) -> Vec<Vec<Vec<Q>>> {
    let e = |i: usize| -> Vec<Q> { (0..n * d).map(|c| Q::from_integer((c == i) as i64)).collect() };
    let mut out = Vec::new();
    for i in 0..n {
        out.push((0..d).map(|k| e(i * d + k)).collect());
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(
                (0..d)
                    .map(|k| {
                        let mut v = e(i * d + k);
                        v[j * d + k] = Q::from_integer(-1);
                        v
                    })
                    .collect(),
            );
        }
    }
    out
}

fn oracle_closure(n: usize, d: usize) -> BTreeSet<Vec<Vec<Q>>> {
    let gens = msc_constraints(n, d);
    (1u32..1 << gens.len())
        .map(|mask| {
            let rows: Vec<Vec<Q>> = gens
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .flat_map(|(_, g)| g.clone())
                .collect();
            rref(rows)
        })
        .collect()
}

fn constraint_form(y: &SubspaceQ) -> Vec<Vec<Q>> {
    y.annihilator()
        .basis()
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| Q::new(x.numer().to_i64().unwrap(), x.denom().to_i64().unwrap()))
                .collect()
        })
        .collect()
}

fn injective_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                (0..n)
                    .filter(|i| !t.contains(i))
                    .map(|i| {
                        let mut u = t.clone();
                        u.push(i);
                        u
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut csv = String::new();
    for (n, d) in [(2, 1), (3, 1), (2, 2)] {
        let s = generate_semilattice(&msc_generators(n, d), n * d).unwrap();
        let got: BTreeSet<_> = s.elements().iter().map(constraint_form).collect();
        let matches = got == oracle_closure(n, d) && got.len() == s.len();
        let symmetric = check_symmetric_action(&s, n, d).is_pass();
        let mut projections = true;
        for k in 1..n {
            let sk = generate_semilattice(&msc_generators(k, d), k * d).unwrap();
            for idx in injective_tuples(n, k) {
                projections &= check_projection_and_difference(&s, &sk, &idx, n, k, d)
                    .unwrap()
                    .is_pass();
            }
        }
        pass &= matches && symmetric && projections;
        if (n, d) == (2, 1) {
            pass &= s.len() == 4;
        }
        notes.push(format!(
            "({n},{d}): {} elements, oracle {matches}, symmetric {symmetric}, projections {projections}",
            s.len()
        ));
        csv.push_str(&report::semilattice_csv(&s));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    notes.push(format!("{:.2} s", elapsed.as_secs_f64()));
    outcome(pass, notes.join("; "), csv)
}

fn sub(rows: &[&[i64]], d: usize) -> SubspaceQ {
    SubspaceQ::from_integer_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), d).unwrap()
}

fn two_axis_pt() -> Hamiltonian {
    Hamiltonian::new(
        2,
        vec![
            PotentialTerm::new(sub(&[&[1, 0]], 2), AsymptoticFunction::poschl_teller(2.0)).unwrap(),
            PotentialTerm::new(sub(&[&[0, 1]], 2), AsymptoticFunction::poschl_teller(2.0)).unwrap(),
        ],
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let h = two_axis_pt();
    let s = h.semilattice().unwrap();
    let thr = threshold_estimate(&h, &s, &ThresholdConfig::default()).unwrap();
    let axis_strata: Vec<usize> = thr
        .strata
        .iter()
        .filter(|st| st.base.dim() == 1)
        .map(|st| st.index)
        .collect();
    let generic = thr.strata.iter().find(|st| st.generic).and_then(|st| st.onset());
    let stab = classify_eigenvalue_stability(&h, &StabilityConfig::default()).unwrap();
    let below: Vec<f64> = stab.stable.iter().copied().filter(|&v| v < -1.0).collect();
    let elapsed = start.elapsed();
    let pass = (thr.sigma_ess + 1.0).abs() <= 0.05
        && axis_strata.len() == 2
        && thr.attained_by == axis_strata
        && generic.is_some_and(|g| g.abs() <= 0.05)
        && stab.onset.is_some_and(|o| (o + 1.0).abs() <= 0.05)
        && !below.is_empty()
        && elapsed < Duration::from_secs(300);
    let mut csv = report::threshold_csv(&thr);
    csv.push_str(&report::stability_csv(&stab));
    outcome(
        pass,
        format!(
            "sigma_ess {}, attained by {:?}, generic onset {:?}, box onset {:?}, stable below -1 {:?}; {:.1} s",
            thr.sigma_ess,
            thr.attained_by,
            generic,
            stab.onset,
            below,
            elapsed.as_secs_f64()
        ),
        csv,
    )
}

fn pt_lowest(h: f64, l: f64) -> f64 {
    let op = Hamiltonian::new(
        1,
        vec![PotentialTerm::new(SubspaceQ::zero(1), AsymptoticFunction::poschl_teller(2.0)).unwrap()],
    )
    .unwrap();
    let g = Grid::dirichlet(1, l, h).unwrap();
    let a = discretize_hamiltonian(&op, &g).unwrap();
    lowest_eigenvalues(&a, 1).unwrap().eigenvalues[0]
}

fn criterion_3() -> Outcome {
    // The s = 1 Pöschl–Teller well has ground state energy exactly −1.
    let exact = -1.0;
    let fine = pt_lowest(0.02, 12.0);
    let e1 = (pt_lowest(0.1, 12.0) - exact).abs();
    let e2 = (pt_lowest(0.05, 12.0) - exact).abs();
    let ratio = e1 / e2;
    let pass = (fine - exact).abs() <= 1e-3 && (3.4..=4.6).contains(&ratio);
    let csv = format!("spacing,error\n0.1,{e1}\n0.05,{e2}\n0.02,{}\n", (fine - exact).abs());
    outcome(pass, format!("lambda(h=0.02) = {fine}, ratio {ratio}"), csv)
}

fn criterion_4() -> Outcome {
    let h = Hamiltonian::new(
        1,
        vec![PotentialTerm::new(
            SubspaceQ::zero(1),
            AsymptoticFunction::AngularHomogeneous {
                profile: AngularProfile::Sign { plus: 2.0, minus: 5.0 },
            },
        )
        .unwrap()],
    )
    .unwrap();
    let s = h.semilattice().unwrap();
    let thr = threshold_estimate(&h, &s, &ThresholdConfig::default()).unwrap();
    let mut onsets: Vec<f64> = thr.strata.iter().flat_map(|st| &st.samples).map(|x| x.onset).collect();
    onsets.sort_by(f64::total_cmp);
    onsets.dedup();
    let stab = classify_eigenvalue_stability(&h, &StabilityConfig::default()).unwrap();
    let pass = onsets == [2.0, 5.0]
        && thr.sigma_ess == 2.0
        && stab.onset.is_some_and(|o| (o - 2.0).abs() <= 0.05);
    let mut csv = report::threshold_csv(&thr);
    csv.push_str(&report::stability_csv(&stab));
    outcome(
        pass,
        format!("onsets {onsets:?}, sigma_ess {}, box onset {:?}", thr.sigma_ess, stab.onset),
        csv,
    )
}

fn random_subspace(rng: &mut ChaCha8Rng, d: usize) -> SubspaceQ {
    loop {
        let k = rng.random_range(0..d);
        let rows: Vec<Vec<i64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1..=1)).collect())
            .collect();
        if let Ok(y) = SubspaceQ::from_integer_rows(&rows, d) {
            if !y.is_full() {
                return y;
            }
        }
    }
}

const C0_FAMILIES: [&str; 3] = ["gaussian_well", "poschl_teller", "regularized_coulomb"];

fn random_c0(rng: &mut ChaCha8Rng, q: usize) -> (usize, AsymptoticFunction) {
    let choice = if q == 1 { rng.random_range(0..3) } else { [0, 2][rng.random_range(0..2)] };
    let f = match choice {
        0 => AsymptoticFunction::GaussianWell {
            depth: rng.random_range(-2.0..2.0),
            width: rng.random_range(0.5..2.0),
        },
        1 => AsymptoticFunction::poschl_teller(rng.random_range(0.5..3.0)),
        _ => AsymptoticFunction::RegularizedCoulomb {
            charge: rng.random_range(-1.0..1.0),
        },
    };
    (choice, f)
}

fn random_angular(rng: &mut ChaCha8Rng, q: usize) -> AsymptoticFunction {
    let profile = if q == 1 && rng.random_bool(0.5) {
        AngularProfile::Sign {
            plus: rng.random_range(-3.0..3.0),
            minus: rng.random_range(-3.0..3.0),
        }
    } else {
        AngularProfile::Affine {
            offset: rng.random_range(-2.0..2.0),
            coefficients: (0..q).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    };
    AsymptoticFunction::AngularHomogeneous { profile }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut idempotent = 0;
    let mut probes_ok = 0;
    let mut families = [0usize; 3];
    let mut worst_far: f64 = 0.0;
    let mut csv = String::from("case,dim,direction,r10,r100,r1000\n");
    let cases = 100;
    for case in 0..cases {
        let d = rng.random_range(1..=3);
        let alpha = loop {
            let v: Vec<i64> = (0..d).map(|_| rng.random_range(-2..=2)).collect();
            if v.iter().any(|&x| x != 0) {
                break DirectionQ::from_i64(&v).unwrap();
            }
        };
        let mut mixed = Vec::new();
        let mut c0 = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let y = random_subspace(&mut rng, d);
            let q = d - y.dim();
            let (fam, f) = random_c0(&mut rng, q);
            families[fam] += 1;
            c0.push(PotentialTerm::new(y.clone(), f.clone()).unwrap());
            let g = if rng.random_bool(0.5) { random_angular(&mut rng, q) } else { f };
            mixed.push(PotentialTerm::new(y, g).unwrap());
        }
        let h = Hamiltonian::new(d, mixed).unwrap();
        let l1 = tau_limit(&h, &alpha).unwrap();
        let l2 = tau_limit(&l1.to_hamiltonian(), &alpha).unwrap();
        let structural = h.terms().iter().all(|t| {
            t.subspace().contains_direction(&alpha).unwrap() == l1.retained.contains(t)
        });
        if structural
            && l2.retained == l1.retained
            && l2.shift == l1.shift
            && l2.invariant_subspace == l1.invariant_subspace
        {
            idempotent += 1;
        }

        let hc = Hamiltonian::new(d, c0).unwrap();
        let samples = [0, 101, 41, 15][d];
        let p: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&r| translation_conjugation_probe(&hc, &alpha, r, 5.0, samples).unwrap())
            .collect();
        worst_far = worst_far.max(p[2]);
        // Retained terms cancel only up to the rounding of x + r·â.
        let slack = 1e-12;
        if p[1] <= p[0] + slack && p[2] <= p[1] + slack && p[2] < 1e-2 {
            probes_ok += 1;
        }
        csv.push_str(&format!("{case},{d},\"{alpha}\",{},{},{}\n", p[0], p[1], p[2]));
    }
    let pass = idempotent == cases && probes_ok == cases && families.iter().all(|&c| c > 0);
    let seen: Vec<String> = C0_FAMILIES.iter().zip(families).map(|(n, c)| format!("{n} {c}")).collect();
    outcome(
        pass,
        format!(
            "idempotent {idempotent}/{cases}, probes decreasing {probes_ok}/{cases}, largest at r=1000 {worst_far:.2e}, terms [{}]",
            seen.join(", ")
        ),
        csv,
    )
}

fn criterion_6() -> Outcome {
    let arctan = AsymptoticFunction::AngularHomogeneous {
        profile: AngularProfile::Affine {
            offset: 0.0,
            coefficients: vec![std::f64::consts::FRAC_PI_2],
        },
    };
    let bump = Bump::new(vec![0.0], 1.0).unwrap();
    let radii = [0.0, 4.0, 8.0, 16.0, 24.0];
    let mut decay = true;
    let mut plateau = true;
    let mut best_decay = f64::INFINITY;
    let mut worst_plateau = f64::INFINITY;
    let mut rows = Vec::new();
    for n in [256, 512, 1024] {
        let g = Grid::new(1, 32.0, n, Boundary::Dirichlet).unwrap();
        let a = commutator_probe(|x| arctan.evaluate(x), &bump, &g, &radii).unwrap();
        let s = commutator_probe(|x| x[0].sin(), &bump, &g, &radii).unwrap();
        let smallest = a[1..].iter().map(|v| v / a[0]).fold(f64::INFINITY, f64::min);
        let lowest = s[1..].iter().map(|v| v / s[0]).fold(f64::INFINITY, f64::min);
        decay &= smallest < 0.1;
        plateau &= lowest > 0.5;
        best_decay = best_decay.min(smallest);
        worst_plateau = worst_plateau.min(lowest);
        rows.extend(radii.iter().zip(&a).map(|(r, v)| (n, *r, *v)));
        rows.extend(radii.iter().zip(&s).map(|(r, v)| (n, *r, *v)));
    }
    outcome(
        decay && plateau,
        format!("arctan smallest ratio {best_decay:.3e}, sin smallest ratio {worst_plateau:.3}"),
        report::commutator_csv(&rows),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let p = ProblemFile::from_json(include_str!("../../../problems/fredholm1d.json")).unwrap();
    let elements = p.elements().unwrap();
    let s = SemiLattice::from_elements(p.family().unwrap(), p.dimension).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    let mut csv = String::new();
    for (name, expected) in [
        ("identity", Verdict::EvidenceFredholm),
        ("compact-perturbation", Verdict::EvidenceFredholm),
        ("degenerate-symbol", Verdict::EvidenceNotFredholm),
    ] {
        let r = fredholm_check(&elements[name], &s, &p.config.fredholm).unwrap();
        let schedule_ok = r.limit_checks.iter().all(|c| {
            c.min_singular_values.iter().map(|(n, _)| *n).collect::<Vec<_>>() == [128, 256, 512]
        });
        let behaved = match expected {
            Verdict::EvidenceFredholm => {
                r.ellipticity_min >= 1e-3
                    && r.limit_checks.iter().all(|c| c.error.is_none() && c.bounded_below && c.nondecreasing)
            }
            _ => r.ellipticity_min < 1e-3 && matches!(r.witness, Some(Witness::Ellipticity { .. })),
        };
        pass &= r.verdict == expected && schedule_ok && behaved;
        notes.push(format!("{name}: {} (min |sigma_0| {:.3e})", r.verdict, r.ellipticity_min));
        csv.push_str(&report::fredholm_csv(&r));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(120);
    notes.push(format!("{:.1} s", elapsed.as_secs_f64()));
    outcome(pass, notes.join("; "), csv)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("lattice combinatorics", criterion_1),
        ("two-axis threshold", criterion_2),
        ("Pöschl–Teller oracle", criterion_3),
        ("direction-dependent limits", criterion_4),
        ("limit operator structure", criterion_5),
        ("commutator compactness", criterion_6),
        ("Fredholm verdicts", criterion_7),
    ];
    let mut all = true;
    let mut identical = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let first = f();
        let second = f();
        identical.push(first.csv == second.csv);
        all &= first.pass;
        println!(
            "{} criterion {} ({name}): {}",
            if first.pass { "PASS" } else { "FAIL" },
            i + 1,
            first.detail
        );
    }
    let deterministic = identical.iter().all(|&b| b);
    all &= deterministic;
    println!(
        "{} criterion 8 (determinism): byte-identical CSV per criterion {identical:?}",
        if deterministic { "PASS" } else { "FAIL" }
    );
    if !all {
        std::process::exit(1);
    }
}
