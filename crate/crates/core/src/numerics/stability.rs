//! Direct-side view of the essential spectrum: compare Dirichlet spectra of
//! the full operator in two boxes. Discrete eigenvalues barely move; box
//! quantizations of continuous spectrum drift and their spacing shrinks
//! like `L⁻²`.

use serde::{Deserialize, Serialize};

use super::eigen::{lowest_eigenvalues_with, EigenConfig, SolverChoice};
use super::grid::{Grid, DEFAULT_GRID_CAP};
use super::matrix::discretize_hamiltonian_capped;
use super::NumericsError;
use crate::model::Schrodinger;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub half_width: f64,
    /// The second box has half width `growth · half_width`.
    pub growth: f64,
    pub spacing: f64,
    /// Eigenvalues computed per box.
    pub count: usize,
    pub stability_tol: f64,
    /// A stable level's neighbour gap must keep at least this fraction when
    /// the box grows; continuum levels lose about `1 − growth⁻²` of it.
    pub gap_ratio_min: f64,
    /// Eigenvalues closer than this (relative) count as one level.
    pub cluster_tol: f64,
    pub grid_cap: usize,
    pub eigen: EigenConfig,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            half_width: 8.0,
            growth: 1.5,
            spacing: 0.1,
            count: 12,
            stability_tol: 1e-3,
            gap_ratio_min: 0.85,
            cluster_tol: 1e-6,
            grid_cap: DEFAULT_GRID_CAP,
            eigen: EigenConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub half_widths: [f64; 2],
    pub spacing: f64,
    pub eigenvalues: [Vec<f64>; 2],
    /// Levels of the larger box matched to a level of the smaller box that
    /// moved less than the tolerance.
    pub stable: Vec<f64>,
    /// Remaining levels of the larger box (the topmost computed level is
    /// left out, its upper gap is unknown).
    pub unstable: Vec<f64>,
    /// Lowest unstable level, if any was resolved.
    pub onset: Option<f64>,
}

fn levels(values: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in values {
        match out.last() {
            Some(&last) if (v - last).abs() <= tol * last.abs().max(1.0) => {}
            _ => out.push(v),
        }
    }
    out
}

fn gap(levels: &[f64], i: usize) -> Option<f64> {
    let below = i.checked_sub(1).map(|j| levels[i] - levels[j]);
    let above = levels.get(i + 1).map(|&u| u - levels[i]);
    match (below, above) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (None, Some(b)) => Some(b),
        _ => None,
    }
}

pub fn classify_eigenvalue_stability<S: Schrodinger + ?Sized>(
    op: &S,
    cfg: &StabilityConfig,
) -> Result<StabilityReport, NumericsError> {
    if op.dim() > 2 {
        return Err(NumericsError::InvalidRequest(format!(
            "stability classification needs dimension ≤ 2, got {}",
            op.dim()
        )));
    }
    let widths = [cfg.half_width, cfg.half_width * cfg.growth];
    let mut spectra: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (slot, &l) in spectra.iter_mut().zip(&widths) {
        let grid = Grid::dirichlet(op.dim(), l, cfg.spacing)?;
        let a = discretize_hamiltonian_capped(op, &grid, cfg.grid_cap)?;
        let k = cfg.count.min(a.dim());
        *slot = lowest_eigenvalues_with(&a, k, SolverChoice::Auto, &cfg.eigen)?.eigenvalues;
    }
    let small = levels(&spectra[0], cfg.cluster_tol);
    let large = levels(&spectra[1], cfg.cluster_tol);

    let resolved_small = small.len().saturating_sub(1);
    let resolved_large = large.len().saturating_sub(1);
    let mut stable_idx = Vec::new();
    for i in 0..resolved_small {
        let Some(j) = (0..resolved_large).min_by(|&a, &b| {
            (large[a] - small[i]).abs().total_cmp(&(large[b] - small[i]).abs())
        }) else {
            continue;
        };
        let moved = (large[j] - small[i]).abs();
        let (Some(gs), Some(gl)) = (gap(&small, i), gap(&large, j)) else {
            continue;
        };
        if moved < cfg.stability_tol && gl >= cfg.gap_ratio_min * gs && !stable_idx.contains(&j) {
            stable_idx.push(j);
        }
    }
    stable_idx.sort_unstable();
    let stable: Vec<f64> = stable_idx.iter().map(|&j| large[j]).collect();
    let unstable: Vec<f64> = (0..resolved_large)
        .filter(|j| !stable_idx.contains(j))
        .map(|j| large[j])
        .collect();
    let onset = unstable.first().copied();
    Ok(StabilityReport {
        half_widths: widths,
        spacing: cfg.spacing,
        eigenvalues: spectra,
        stable,
        unstable,
        onset,
    })
}
