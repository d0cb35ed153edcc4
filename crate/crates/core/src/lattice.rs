//! Periodic d-dimensional grid geometry.
//!
//! Cells are stored row-major with the last axis fastest. Along every axis the
//! storage index `j` maps to the signed coordinate `k = j` for `j < n/2` and
//! `k = j - n` otherwise, so index 0 is the origin and the set of cell centres
//! is `h * {-n/2, ..., n/2 - 1}^d`. This is the natural ordering for the
//! discrete Fourier transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of cells a lattice may hold unless a budget is given.
pub const DEFAULT_CELL_BUDGET: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    side: usize,
    spacing: f64,
}

impl Lattice {
    pub fn new(dim: usize, side: usize, spacing: f64) -> Result<Self> {
        Self::with_budget(dim, side, spacing, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(dim: usize, side: usize, spacing: f64, budget: u128) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidLattice(format!(
                "dimension {dim} is below 3"
            )));
        }
        if side < 8 || !side.is_power_of_two() {
            return Err(Error::InvalidLattice(format!(
                "side {side} must be a power of two >= 8"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "spacing {spacing} must be positive"
            )));
        }
        let cells = (side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if cells > budget {
            return Err(Error::MemoryBudget { cells, budget });
        }
        Ok(Self { dim, side, spacing })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// L = n h.
    pub fn period(&self) -> f64 {
        self.side as f64 * self.spacing
    }

    pub fn cell_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// h^d, the quadrature weight of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.period().powi(self.dim as i32)
    }

    /// Signed coordinate of storage index `j` along one axis.
    #[inline]
    pub fn signed(&self, j: usize) -> i64 {
        let n = self.side as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Storage index of a (possibly out of range) signed coordinate.
    #[inline]
    pub fn wrap(&self, k: i64) -> usize {
        k.rem_euclid(self.side as i64) as usize
    }

    /// Signed lattice coordinates of a flat cell index.
    pub fn coords(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.dim];
        for axis in (0..self.dim).rev() {
            out[axis] = self.signed(idx % self.side);
            idx /= self.side;
        }
        out
    }

    /// Flat index of signed coordinates, wrapping around the torus.
    pub fn index_of(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.dim);
        coords
            .iter()
            .fold(0, |acc, &k| acc * self.side + self.wrap(k))
    }

    /// Physical position `h k` of a cell centre.
    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .into_iter()
            .map(|k| k as f64 * self.spacing)
            .collect()
    }

    /// Squared wrap-around distance of a cell from the origin.
    pub fn torus_norm_sq(&self, idx: usize) -> f64 {
        let h = self.spacing;
        self.coords(idx)
            .into_iter()
            .map(|k| (k as f64 * h).powi(2))
            .sum()
    }

    /// Squared wrap-around distance of every cell from the origin.
    pub fn torus_norm_sq_table(&self) -> Vec<f64> {
        let n = self.side;
        let h = self.spacing;
        let axis: Vec<f64> = (0..n).map(|j| (self.signed(j) as f64 * h).powi(2)).collect();
        let mut out = vec![0.0; self.cell_count()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let mut rest = idx;
            let mut acc = 0.0;
            for _ in 0..self.dim {
                acc += axis[rest % n];
                rest /= n;
            }
            *slot = acc;
        }
        out
    }

    /// Index of the cell reached from `idx` by the signed offset `shift`.
    pub fn shifted(&self, idx: usize, shift: &[i64]) -> usize {
        let mut c = self.coords(idx);
        for (a, s) in c.iter_mut().zip(shift) {
            *a += s;
        }
        self.index_of(&c)
    }

    /// Permutation table mapping each cell to its translate by `shift`.
    pub fn shift_table(&self, shift: &[i64]) -> Vec<usize> {
        (0..self.cell_count()).map(|i| self.shifted(i, shift)).collect()
    }

    /// Cell reached by reflecting `idx` through the origin.
    pub fn reflected(&self, idx: usize) -> usize {
        let c: Vec<i64> = self.coords(idx).into_iter().map(|k| -k).collect();
        self.index_of(&c)
    }

    pub fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.cell_count() {
            return Err(Error::ShapeMismatch {
                expected: self.cell_count(),
                got: field.len(),
            });
        }
        Ok(())
    }

    /// Index of the cell `k` steps from the origin along `axis`.
    pub fn axis_cell(&self, axis: usize, k: i64) -> usize {
        let mut c = vec![0; self.dim];
        c[axis] = k;
        self.index_of(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_the_default_lattice() {
        let lat = Lattice::new(3, 32, 0.25).unwrap();
        assert_eq!(lat.period(), 8.0);
        assert_eq!(lat.cell_count(), 32768);
    }

    #[test]
    fn minimal_lattice_is_accepted() {
        let lat = Lattice::new(3, 8, 1.0).unwrap();
        assert_eq!(lat.period(), 8.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            Lattice::new(2, 32, 0.25),
            Err(Error::InvalidLattice(_))
        ));
        assert!(Lattice::new(3, 24, 0.25).is_err());
        assert!(Lattice::new(3, 4, 0.25).is_err());
        assert!(Lattice::new(3, 32, 0.0).is_err());
        assert!(matches!(
            Lattice::with_budget(3, 64, 0.25, 1000),
            Err(Error::MemoryBudget { .. })
        ));
    }

    #[test]
    fn coordinates_round_trip_and_wrap() {
        let lat = Lattice::new(3, 8, 0.5).unwrap();
        for idx in 0..lat.cell_count() {
            let c = lat.coords(idx);
            assert!(c.iter().all(|&k| (-4..4).contains(&k)));
            assert_eq!(lat.index_of(&c), idx);
        }
        assert_eq!(lat.index_of(&[8, -8, 16]), 0);
        assert_eq!(lat.torus_norm_sq(lat.index_of(&[-1, 0, 3])), 0.25 * 10.0);
        let table = lat.torus_norm_sq_table();
        assert_eq!(table[lat.index_of(&[2, -3, 1])], 0.25 * 14.0);
        assert_eq!(lat.reflected(lat.index_of(&[1, 2, 3])), lat.index_of(&[-1, -2, -3]));
    }
}
