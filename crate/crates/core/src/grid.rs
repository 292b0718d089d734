//! Sampled unitary maps on an equidistant grid over [0,1]^3 with selected
//! periodic directions, plus the index arithmetic for the faces and cubes
//! built on that grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::InvariantError;

pub type CMatrix = DMatrix<Complex64>;

/// Grid dimensions and per-axis periodicity. All index arithmetic lives here;
/// indices on periodic axes wrap modulo N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub dims: [usize; 3],
    pub periodic: [bool; 3],
}

impl GridLayout {
    pub fn new(dims: [usize; 3], periodic: [bool; 3]) -> Self {
        assert!(dims.iter().all(|&n| n >= 1), "grid dims must be positive");
        Self { dims, periodic }
    }

    pub fn torus(dims: [usize; 3]) -> Self {
        Self::new(dims, [true; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    /// Row-major point index.
    pub fn index(&self, p: [usize; 3]) -> usize {
        debug_assert!(p[0] < self.dims[0] && p[1] < self.dims[1] && p[2] < self.dims[2]);
        (p[0] * self.dims[1] + p[1]) * self.dims[2] + p[2]
    }

    pub fn point(&self, idx: usize) -> [usize; 3] {
        let i3 = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], i3]
    }

    /// Neighbor of `p` shifted by `by` steps along `axis`, wrapping on
    /// periodic axes; `None` when the shift leaves a bounded axis.
    pub fn shift(&self, p: [usize; 3], axis: usize, by: i64) -> Option<[usize; 3]> {
        let n = self.dims[axis] as i64;
        let raw = p[axis] as i64 + by;
        let mut out = p;
        if self.periodic[axis] {
            out[axis] = raw.rem_euclid(n) as usize;
            Some(out)
        } else if (0..n).contains(&raw) {
            out[axis] = raw as usize;
            Some(out)
        } else {
            None
        }
    }

    /// Whether the edge from `p` to `p + delta_axis` exists.
    pub fn has_edge(&self, p: [usize; 3], axis: usize) -> bool {
        self.periodic[axis] || p[axis] + 1 < self.dims[axis]
    }

    /// Whether the face F_{p,axis} (spanning the two other axes) exists.
    pub fn has_face(&self, p: [usize; 3], axis: usize) -> bool {
        let a1 = (axis + 1) % 3;
        let a2 = (axis + 2) % 3;
        self.has_edge(p, a1) && self.has_edge(p, a2)
    }

    /// Vertices of the face F_{p,axis} in traversal order: p, p+d1, p+d1+d2,
    /// p+d2, where (d1, d2) are the cyclic successors of `axis`.
    pub fn face_vertices(&self, p: [usize; 3], axis: usize) -> [[usize; 3]; 4] {
        debug_assert!(self.has_face(p, axis));
        let a1 = (axis + 1) % 3;
        let a2 = (axis + 2) % 3;
        let q2 = self.shift(p, a1, 1).expect("face edge");
        let q3 = self.shift(q2, a2, 1).expect("face edge");
        let q4 = self.shift(p, a2, 1).expect("face edge");
        [p, q2, q3, q4]
    }

    /// Whether the cube with base point `p` exists.
    pub fn has_cube(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.has_edge(p, a))
    }

    pub fn points(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// A map sampled on the grid: one dense n x n complex matrix per point.
#[derive(Debug, Clone)]
pub struct UnitaryGrid {
    layout: GridLayout,
    n: usize,
    samples: Vec<CMatrix>,
}

impl UnitaryGrid {
    pub fn new(
        layout: GridLayout,
        n: usize,
        samples: Vec<CMatrix>,
    ) -> Result<Self, InvariantError> {
        if samples.len() != layout.len() {
            return Err(InvariantError::InvalidInput(format!(
                "expected {} samples for dims {:?}, got {}",
                layout.len(),
                layout.dims,
                samples.len()
            )));
        }
        if let Some(m) = samples.iter().find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(InvariantError::InvalidInput(format!(
                "sample of shape {}x{} does not match matrix dimension {}",
                m.nrows(),
                m.ncols(),
                n
            )));
        }
        Ok(Self { layout, n, samples })
    }

    /// Sample a map given in continuum coordinates, cell-centered:
    /// mu_a = (i_a + 1/2) / N_a. Cell-centered sampling keeps the example
    /// maps' degeneracy points off the grid vertices.
    pub fn sample_map<F>(dims: [usize; 3], periodic: [bool; 3], n: usize, f: F) -> Self
    where
        F: Fn([f64; 3]) -> CMatrix + Sync,
    {
        let layout = GridLayout::new(dims, periodic);
        let samples: Vec<CMatrix> = (0..layout.len())
            .into_par_iter()
            .map(|idx| {
                let m = f(Self::mu(dims, layout.point(idx)));
                debug_assert!(m.nrows() == n && m.ncols() == n);
                m
            })
            .collect();
        Self { layout, n, samples }
    }

    /// Cell-centered continuum coordinates of a grid point.
    pub fn mu(dims: [usize; 3], p: [usize; 3]) -> [f64; 3] {
        [
            (p[0] as f64 + 0.5) / dims[0] as f64,
            (p[1] as f64 + 0.5) / dims[1] as f64,
            (p[2] as f64 + 0.5) / dims[2] as f64,
        ]
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn matrix_dim(&self) -> usize {
        self.n
    }

    pub fn sample(&self, p: [usize; 3]) -> &CMatrix {
        &self.samples[self.layout.index(p)]
    }

    pub fn sample_at(&self, idx: usize) -> &CMatrix {
        &self.samples[idx]
    }

    pub fn samples(&self) -> &[CMatrix] {
        &self.samples
    }

    /// Largest entry of |U^dag U - 1| over the whole grid, with the offending
    /// point. Used both for input validation and in tests.
    pub fn max_unitarity_deviation(&self) -> (f64, [usize; 3]) {
        let mut worst = (0.0_f64, [0usize; 3]);
        for (idx, u) in self.samples.iter().enumerate() {
            let g = u.adjoint() * u;
            let mut dev: f64 = 0.0;
            for r in 0..self.n {
                for c in 0..self.n {
                    let target = if r == c {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    dev = dev.max((g[(r, c)] - target).norm());
                }
            }
            if dev > worst.0 {
                worst = (dev, self.layout.point(idx));
            }
        }
        worst
    }

    pub fn validate_unitarity(&self, tolerance: f64) -> Result<(), InvariantError> {
        let (dev, point) = self.max_unitarity_deviation();
        if dev > tolerance {
            Err(InvariantError::NotUnitary {
                point,
                deviation: dev,
                tolerance,
            })
        } else {
            Ok(())
        }
    }
}
