//! On-disk format for externally sampled unitary grids: a JSON object with
//! the matrix dimension, grid dims, periodicity flags, and a row-major list
//! of n x n matrices of [re, im] pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use w3inv::{CMatrix, GridLayout, InvariantError, UnitaryGrid};

#[derive(Debug, Serialize, Deserialize)]
pub struct UnitaryGridFile {
    pub n: usize,
    pub dims: [usize; 3],
    pub periodic: [bool; 3],
    /// One entry per grid point (row-major), each an n x n matrix given as
    /// rows of [re, im] pairs.
    pub samples: Vec<Vec<Vec<[f64; 2]>>>,
}

impl UnitaryGridFile {
    pub fn from_grid(grid: &UnitaryGrid) -> Self {
        let n = grid.matrix_dim();
        let layout = grid.layout();
        let samples = (0..layout.len())
            .map(|idx| {
                let u = grid.sample_at(idx);
                (0..n)
                    .map(|r| (0..n).map(|c| [u[(r, c)].re, u[(r, c)].im]).collect())
                    .collect()
            })
            .collect();
        Self {
            n,
            dims: layout.dims,
            periodic: layout.periodic,
            samples,
        }
    }

    pub fn into_grid(self) -> Result<UnitaryGrid, InvariantError> {
        let layout = GridLayout::new(self.dims, self.periodic);
        if self.samples.len() != layout.len() {
            return Err(InvariantError::InvalidInput(format!(
                "grid file holds {} samples, dims {:?} need {}",
                self.samples.len(),
                self.dims,
                layout.len()
            )));
        }
        let mut matrices = Vec::with_capacity(self.samples.len());
        for (idx, rows) in self.samples.iter().enumerate() {
            if rows.len() != self.n || rows.iter().any(|r| r.len() != self.n) {
                return Err(InvariantError::InvalidInput(format!(
                    "sample {idx} is not an {0} x {0} matrix",
                    self.n
                )));
            }
            let m = CMatrix::from_fn(self.n, self.n, |r, c| {
                Complex64::new(rows[r][c][0], rows[r][c][1])
            });
            matrices.push(m);
        }
        UnitaryGrid::new(layout, self.n, matrices)
    }
}
