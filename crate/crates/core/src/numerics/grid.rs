use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Default cap on the number of grid points.
pub const DEFAULT_GRID_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Uniform tensor grid on `[−L, L]^q`.
///
/// `points_per_axis` is the number of cells `n`, so the spacing is `2L/n`.
/// A Dirichlet grid carries the `n − 1` interior nodes of each axis; a
/// periodic grid carries `n` nodes starting at `−L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(
        dim: usize,
        half_width: f64,
        points_per_axis: usize,
        boundary: Boundary,
    ) -> Result<Self, NumericsError> {
        if dim > 3 {
            return Err(NumericsError::InvalidGrid(format!("dimension {dim} exceeds 3")));
        }
        if points_per_axis < 2 {
            return Err(NumericsError::InvalidGrid("need at least 2 points per axis".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(NumericsError::InvalidGrid(format!("half width {half_width}")));
        }
        Ok(Grid {
            dim,
            half_width,
            points_per_axis,
            boundary,
        })
    }

    /// Dirichlet grid whose spacing is `spacing` (rounded so it divides `2L`).
    pub fn dirichlet(dim: usize, half_width: f64, spacing: f64) -> Result<Self, NumericsError> {
        let n = (2.0 * half_width / spacing).round() as usize;
        Grid::new(dim, half_width, n, Boundary::Dirichlet)
    }

    pub fn periodic(dim: usize, half_width: f64, points: usize) -> Result<Self, NumericsError> {
        Grid::new(dim, half_width, points, Boundary::Periodic)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn nodes_per_axis(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => self.points_per_axis - 1,
            Boundary::Periodic => self.points_per_axis,
        }
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        let start = match self.boundary {
            Boundary::Dirichlet => 1,
            Boundary::Periodic => 0,
        };
        (0..self.nodes_per_axis())
            .map(|i| -self.half_width + (i + start) as f64 * h)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_cap(&self, cap: usize) -> Result<(), NumericsError> {
        let per = self.nodes_per_axis() as f64;
        let total = per.powi(self.dim as i32);
        if total > cap as f64 {
            return Err(NumericsError::GridCapExceeded {
                points: total as usize,
                cap,
            });
        }
        Ok(())
    }

    /// Multi-index of a flat node index; axis 0 varies fastest.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.nodes_per_axis();
        (0..self.dim)
            .map(|_| {
                let i = idx % n;
                idx /= n;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let n = self.nodes_per_axis();
        multi.iter().rev().fold(0, |acc, &i| acc * n + i)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let axis = self.axis();
        (0..self.len())
            .map(|k| self.multi_index(k).into_iter().map(|i| axis[i]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_nodes_are_interior() {
        let g = Grid::dirichlet(1, 1.0, 0.5).unwrap();
        assert_eq!(g.points_per_axis, 4);
        assert_eq!(g.axis(), vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn periodic_nodes_start_at_left_edge() {
        let g = Grid::periodic(1, 2.0, 4).unwrap();
        assert_eq!(g.axis(), vec![-2.0, -1.0, 0.0, 1.0]);
        assert_eq!(g.spacing(), 1.0);
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = Grid::periodic(3, 1.0, 5).unwrap();
        for k in [0, 7, 33, 124] {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
        }
    }

    #[test]
    fn zero_dimensional_grid_has_one_point() {
        let g = Grid::dirichlet(0, 1.0, 0.1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.points(), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn cap_and_validation() {
        let g = Grid::dirichlet(3, 10.0, 0.1).unwrap();
        assert!(matches!(g.check_cap(DEFAULT_GRID_CAP), Err(NumericsError::GridCapExceeded { .. })));
        assert!(Grid::new(1, 1.0, 1, Boundary::Periodic).is_err());
        assert!(Grid::new(4, 1.0, 8, Boundary::Periodic).is_err());
    }
}
