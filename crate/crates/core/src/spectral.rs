//! Eigen-data of a sampled unitary map: unimodular eigenvalues, orthonormal
//! eigenvectors, and the per-edge permutations that identify "the same band"
//! on adjacent grid points.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::InvariantError;
use crate::grid::{CMatrix, GridLayout, UnitaryGrid};
use crate::phase::arc_distance;
use crate::Tolerances;

/// Eigenvalues of (U + U^dag)/2 closer than this are treated as one cluster
/// and re-diagonalized against (U - U^dag)/2i to split conjugate pairs.
const CLUSTER_TOL: f64 = 1e-7;

/// Gram-matrix deviation above which the eigenbasis counts as defective.
const GRAM_TOL: f64 = 1e-6;

/// Band permutation along one grid edge, mapping band indices at the base
/// point to band indices at the shifted point.
pub type BandPerm = Vec<u8>;

pub(crate) fn invert_perm(perm: &[u8]) -> BandPerm {
    let mut inv = vec![0u8; perm.len()];
    for (from, &to) in perm.iter().enumerate() {
        inv[to as usize] = from as u8;
    }
    inv
}

/// Per-point eigen-data of a sampled unitary map, and (after matching) the
/// edge permutations. Band indices are local: they are only consistent along
/// matched edges, never globally across the grid.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    layout: GridLayout,
    n: usize,
    /// `[point * n + band]`, unimodular.
    eigenvalues: Vec<Complex64>,
    /// One matrix per point; column `b` is the eigenvector of band `b`.
    eigenvectors: Vec<CMatrix>,
    /// Per axis: `[point * n + band]` -> band index at `p + delta_axis`.
    /// Slots without an edge stay zero and are never read.
    edge_perms: Option<[Vec<u8>; 3]>,
    /// Whether the eigenvalue-distance fallback produced the permutations.
    matched_by_arc_fallback: bool,
}

impl SpectralGrid {
    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn bands(&self) -> usize {
        self.n
    }

    pub fn eigenvalue(&self, idx: usize, band: usize) -> Complex64 {
        self.eigenvalues[idx * self.n + band]
    }

    pub fn eigenvalue_at(&self, p: [usize; 3], band: usize) -> Complex64 {
        self.eigenvalue(self.layout.index(p), band)
    }

    pub fn eigenvectors_at(&self, idx: usize) -> &CMatrix {
        &self.eigenvectors[idx]
    }

    pub fn is_matched(&self) -> bool {
        self.edge_perms.is_some()
    }

    /// True when the holonomy-consistent matching came from the
    /// eigenvalue-distance fallback rather than the primary overlap pass.
    pub fn matched_by_arc_fallback(&self) -> bool {
        self.matched_by_arc_fallback
    }

    /// Band permutation along the edge `p -> p + delta_axis`.
    pub fn edge_perm(&self, p: [usize; 3], axis: usize) -> &[u8] {
        debug_assert!(self.layout.has_edge(p, axis));
        let idx = self.layout.index(p);
        let perms = self
            .edge_perms
            .as_ref()
            .expect("band matching has not run on this spectral grid");
        &perms[axis][idx * self.n..(idx + 1) * self.n]
    }

    /// Transport a band index across the edge `p -> p + delta_axis`.
    pub fn transport(&self, p: [usize; 3], axis: usize, band: usize) -> usize {
        self.edge_perm(p, axis)[band] as usize
    }

    /// Multiply eigenvectors by per-(point, band) phases. The algorithm's
    /// outputs are gauge-invariant; tests use this to verify exactly that.
    pub fn apply_gauge<F>(&mut self, mut phase: F)
    where
        F: FnMut(usize, usize) -> f64,
    {
        for idx in 0..self.layout.len() {
            for band in 0..self.n {
                let g = Complex64::from_polar(1.0, phase(idx, band));
                for r in 0..self.n {
                    self.eigenvectors[idx][(r, band)] *= g;
                }
            }
        }
    }

    /// Normalized overlap <s_b1(p), s_b2(q)> / |.| with its magnitude.
    pub(crate) fn unit_overlap(
        &self,
        p_idx: usize,
        b1: usize,
        q_idx: usize,
        b2: usize,
    ) -> (Complex64, f64) {
        let vp = self.eigenvectors[p_idx].column(b1);
        let vq = self.eigenvectors[q_idx].column(b2);
        let ov = vp.dotc(&vq);
        let mag = ov.norm();
        (ov / mag, mag)
    }

    fn overlap_magnitude(&self, p_idx: usize, b1: usize, q_idx: usize, b2: usize) -> f64 {
        let vp = self.eigenvectors[p_idx].column(b1);
        let vq = self.eigenvectors[q_idx].column(b2);
        vp.dotc(&vq).norm()
    }
}

/// Eigendecomposition of a single unitary matrix via two commuting Hermitian
/// problems: (U + U^dag)/2 fixes cos(phi) and clusters of equal cosine are
/// split against (U - U^dag)/2i, which separates conjugate pairs. Returns
/// unimodular eigenvalues and orthonormal eigenvectors (as columns), sorted
/// by principal argument.
pub(crate) fn eig_unitary(u: &CMatrix) -> Result<(Vec<Complex64>, CMatrix), String> {
    let n = u.nrows();
    let half = Complex64::new(0.5, 0.0);
    let re = (u + u.adjoint()) * half;
    let im = (u - u.adjoint()) * Complex64::new(0.0, -0.5);

    let se = re.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let mut basis = CMatrix::zeros(n, n);
    let mut cos_vals = vec![0.0; n];
    for (col, &src) in order.iter().enumerate() {
        basis.set_column(col, &se.eigenvectors.column(src));
        cos_vals[col] = se.eigenvalues[src];
    }

    // Split clusters of equal cosine against the imaginary part.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cos_vals[end] - cos_vals[end - 1] < CLUSTER_TOL {
            end += 1;
        }
        if end - start > 1 {
            let sub = basis.columns(start, end - start).into_owned();
            let proj = sub.adjoint() * (&im * &sub);
            let proj = (proj.clone() + proj.adjoint()) * half;
            let sse = proj.symmetric_eigen();
            let k = end - start;
            let mut sub_order: Vec<usize> = (0..k).collect();
            sub_order.sort_by(|&a, &b| sse.eigenvalues[a].total_cmp(&sse.eigenvalues[b]));
            let mut rot = CMatrix::zeros(k, k);
            for (col, &src) in sub_order.iter().enumerate() {
                rot.set_column(col, &sse.eigenvectors.column(src));
            }
            let refined = sub * rot;
            for col in 0..k {
                basis.set_column(start + col, &refined.column(col));
            }
        }
        start = end;
    }

    // Rayleigh quotients give the eigenvalues; project them onto the circle
    // so downstream phase arithmetic is exact on S^1.
    let mut vals = vec![Complex64::new(0.0, 0.0); n];
    for b in 0..n {
        let v = basis.column(b);
        let d = v.dotc(&(u * v));
        let mag = d.norm();
        // NaN-safe: a collapsed or non-finite quotient means failure.
        if mag.partial_cmp(&0.5) != Some(std::cmp::Ordering::Greater) {
            return Err(format!(
                "Rayleigh quotient of band {b} has modulus {mag:.3e}; diagonalization did not converge"
            ));
        }
        vals[b] = d / mag;
    }

    // Final per-point band order: ascending principal argument.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].arg().total_cmp(&vals[b].arg()));
    let sorted_vals: Vec<Complex64> = order.iter().map(|&b| vals[b]).collect();
    let mut sorted_basis = CMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        sorted_basis.set_column(col, &basis.column(src));
    }
    Ok((sorted_vals, sorted_basis))
}

fn gram_deviation(basis: &CMatrix) -> f64 {
    let g = basis.adjoint() * basis;
    let n = basis.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            dev = dev.max((g[(r, c)] - target).norm());
        }
    }
    dev
}

fn eigen_residual(u: &CMatrix, vals: &[Complex64], basis: &CMatrix) -> f64 {
    let n = u.nrows();
    let mut worst: f64 = 0.0;
    for b in 0..n {
        let v = basis.column(b);
        let r = u * v - v * vals[b];
        worst = worst.max(r.norm());
    }
    worst
}

/// Diagonalize every sample of the grid. Eigenvector phases are arbitrary;
/// everything downstream is gauge-invariant.
pub fn diagonalize_grid(
    grid: &UnitaryGrid,
    tol: &Tolerances,
) -> Result<SpectralGrid, InvariantError> {
    grid.validate_unitarity(tol.unitarity)?;
    let layout = grid.layout();
    let n = grid.matrix_dim();
    let results: Vec<Result<(Vec<Complex64>, CMatrix), InvariantError>> = (0..layout.len())
        .into_par_iter()
        .map(|idx| {
            let u = grid.sample_at(idx);
            let point = layout.point(idx);
            let (vals, basis) =
                eig_unitary(u).map_err(|detail| InvariantError::Diagonalization { point, detail })?;
            let gram = gram_deviation(&basis);
            if gram > GRAM_TOL {
                return Err(InvariantError::Diagonalization {
                    point,
                    detail: format!(
                        "eigenvector Gram matrix deviates from identity by {gram:.3e}"
                    ),
                });
            }
            let res = eigen_residual(u, &vals, &basis);
            if res > tol.eigen_residual {
                return Err(InvariantError::Diagonalization {
                    point,
                    detail: format!(
                        "eigen-residual {res:.3e} exceeds tolerance {:.1e}",
                        tol.eigen_residual
                    ),
                });
            }
            Ok((vals, basis))
        })
        .collect();

    let mut eigenvalues = Vec::with_capacity(layout.len() * n);
    let mut eigenvectors = Vec::with_capacity(layout.len());
    for r in results {
        let (vals, basis) = r?;
        eigenvalues.extend_from_slice(&vals);
        eigenvectors.push(basis);
    }
    Ok(SpectralGrid {
        layout,
        n,
        eigenvalues,
        eigenvectors,
        edge_perms: None,
        matched_by_arc_fallback: false,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum MatchStrategy {
    /// Pair the largest remaining overlap; ties by smaller eigenvalue arc,
    /// then lower index. Reliable when eigenvalues cluster.
    OverlapFirst,
    /// Pair the smallest remaining eigenvalue arc; ties by larger overlap,
    /// then lower index. Stays consistent across extended degeneracy shells
    /// where the overlap ordering misleads.
    ArcFirst,
}

fn greedy_match(
    overlaps: &[f64],
    args_p: &[f64],
    args_q: &[f64],
    n: usize,
    strategy: MatchStrategy,
) -> (BandPerm, f64) {
    let mut perm = vec![0u8; n];
    let mut used_p = vec![false; n];
    let mut used_q = vec![false; n];
    let mut min_overlap = f64::INFINITY;
    for _ in 0..n {
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for b1 in 0..n {
            if used_p[b1] {
                continue;
            }
            for b2 in 0..n {
                if used_q[b2] {
                    continue;
                }
                let o = overlaps[b1 * n + b2];
                let arc = arc_distance(args_p[b1], args_q[b2]);
                let better = match &best {
                    None => true,
                    Some((bo, barc, _, _)) => match strategy {
                        MatchStrategy::OverlapFirst => o > *bo || (o == *bo && arc < *barc),
                        MatchStrategy::ArcFirst => arc < *barc || (arc == *barc && o > *bo),
                    },
                };
                if better {
                    best = Some((o, arc, b1, b2));
                }
            }
        }
        let (o, _, b1, b2) = best.expect("n pairs to assign");
        perm[b1] = b2 as u8;
        used_p[b1] = true;
        used_q[b2] = true;
        min_overlap = min_overlap.min(o);
    }
    (perm, min_overlap)
}

fn match_all_edges(
    spec: &SpectralGrid,
    floor: f64,
    strategy: MatchStrategy,
) -> Result<[Vec<u8>; 3], InvariantError> {
    let layout = spec.layout;
    let n = spec.n;
    let mut perms: [Vec<u8>; 3] = [
        vec![0u8; layout.len() * n],
        vec![0u8; layout.len() * n],
        vec![0u8; layout.len() * n],
    ];
    let mut overlaps = vec![0.0; n * n];
    let mut args_p = vec![0.0; n];
    let mut args_q = vec![0.0; n];
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_edge(p, axis) {
                continue;
            }
            let q = layout.shift(p, axis, 1).expect("edge endpoint");
            let q_idx = layout.index(q);
            for b1 in 0..n {
                args_p[b1] = spec.eigenvalue(idx, b1).arg();
                args_q[b1] = spec.eigenvalue(q_idx, b1).arg();
                for b2 in 0..n {
                    overlaps[b1 * n + b2] = spec.overlap_magnitude(idx, b1, q_idx, b2);
                }
            }
            let (perm, min_overlap) = greedy_match(&overlaps, &args_p, &args_q, n, strategy);
            if min_overlap <= floor {
                return Err(InvariantError::GridTooCoarse(format!(
                    "matched overlap {min_overlap:.4} on edge {p:?} -> {q:?} (axis {}) is at or \
                     below the matching floor {floor:.4}; refine the discretization",
                    axis + 1
                )));
            }
            perms[axis][idx * n..(idx + 1) * n].copy_from_slice(&perm);
        }
    }
    Ok(perms)
}

/// Identity of the composed permutations around every face the engine uses.
fn verify_face_holonomy(spec: &SpectralGrid) -> Result<(), InvariantError> {
    let layout = spec.layout;
    let n = spec.n;
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_face(p, axis) {
                continue;
            }
            let [q1, q2, _, q4] = layout.face_vertices(p, axis);
            let a1 = (axis + 1) % 3;
            let a2 = (axis + 2) % 3;
            let p12 = spec.edge_perm(q1, a1);
            let p23 = spec.edge_perm(q2, a2);
            let p43 = spec.edge_perm(q4, a1);
            let p14 = spec.edge_perm(q1, a2);
            let inv43 = invert_perm(p43);
            let inv14 = invert_perm(p14);
            for b in 0..n {
                let b2 = p12[b] as usize;
                let b3 = p23[b2] as usize;
                let b4 = inv43[b3] as usize;
                if inv14[b4] as usize != b {
                    return Err(InvariantError::GridTooCoarse(format!(
                        "non-identity band holonomy around face at {q1:?} (axis {}); refine \
                         the discretization",
                        axis + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Overlap floor of the eigenvalue-distance fallback. Small matched overlaps
/// are the expected signature on edges next to degeneracy points, where the
/// fallback is the only consistent assignment; this bound only guards the
/// face products against outright noise.
const ARC_FALLBACK_FLOOR: f64 = 1e-3;

/// Match bands along every grid edge and verify that the permutation
/// holonomy around each face is the identity.
///
/// Overlap-first matching is primary. If its holonomies are inconsistent,
/// the eigenvalue-distance matching is tried before reporting failure:
/// degeneracy points and shells leave the per-edge overlap ordering locally
/// ambiguous, where eigenvalue proximity is uniform and consistent, while
/// the invariant sums are identical under any holonomy-consistent matching.
pub fn match_bands(
    mut spec: SpectralGrid,
    tol: &Tolerances,
) -> Result<SpectralGrid, InvariantError> {
    assert!(
        spec.n <= u8::MAX as usize,
        "band count exceeds u8 permutations"
    );
    spec.edge_perms = Some(match_all_edges(
        &spec,
        tol.match_floor,
        MatchStrategy::OverlapFirst,
    )?);
    let primary_failure = match verify_face_holonomy(&spec) {
        Ok(()) => {
            spec.matched_by_arc_fallback = false;
            return Ok(spec);
        }
        Err(e) => e,
    };
    let fallback_floor = tol.match_floor.min(ARC_FALLBACK_FLOOR);
    if let Ok(perms) = match_all_edges(&spec, fallback_floor, MatchStrategy::ArcFirst) {
        spec.edge_perms = Some(perms);
        if verify_face_holonomy(&spec).is_ok() {
            spec.matched_by_arc_fallback = true;
            return Ok(spec);
        }
    }
    Err(primary_failure)
}
