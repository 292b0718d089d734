//! The lattice algorithm: plaquette curvature per face, integer charges per
//! cube, the phase ledger with its branch integers, and the invariant sums
//! for W3, the axis windings W1 and the slice Chern numbers. Also hosts the
//! slow central-difference baseline used for convergence comparisons.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::InvariantError;
use crate::grid::{CMatrix, GridLayout, UnitaryGrid};
use crate::phase::{arc_distance, branch_phase, ledger_integer, nearest_integer};
use crate::spectral::{invert_perm, SpectralGrid};
use crate::Tolerances;

/// Overlap magnitudes below this are treated as vanishing.
const OVERLAP_EPS: f64 = 1e-12;

/// Boundary tolerance for the ledger's strict inequality |dphi + 2 pi m| < pi.
pub(crate) const PHASE_BOUNDARY_TOL: f64 = 1e-9;

/// Plaquette curvature per face and band, F in (-1/2, 1/2]. Values are
/// stored per axis at `[point * n + band]`, with the band index local to the
/// face's base point; slots without a face stay zero.
#[derive(Debug, Clone)]
pub struct FaceField {
    layout: GridLayout,
    n: usize,
    values: [Vec<f64>; 3],
}

impl FaceField {
    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn value(&self, axis: usize, idx: usize, band: usize) -> f64 {
        self.values[axis][idx * self.n + band]
    }

    pub fn value_at(&self, axis: usize, p: [usize; 3], band: usize) -> f64 {
        self.value(axis, self.layout.index(p), band)
    }
}

/// Integer charge per cube and band (band index local to the cube's base
/// point). Nonzero only for cubes enclosing a degeneracy point.
#[derive(Debug, Clone)]
pub struct CubeField {
    layout: GridLayout,
    n: usize,
    charges: Vec<i32>,
    /// Largest deviation from an exact integer seen before rounding.
    pub max_residual: f64,
}

impl CubeField {
    pub fn charge(&self, idx: usize, band: usize) -> i32 {
        self.charges[idx * self.n + band]
    }

    pub fn charge_at(&self, p: [usize; 3], band: usize) -> i32 {
        self.charge(self.layout.index(p), band)
    }

    /// Base points of cubes with at least one nonzero band charge.
    pub fn charged_cubes(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for idx in 0..self.layout.len() {
            let p = self.layout.point(idx);
            if !self.layout.has_cube(p) {
                continue;
            }
            if (0..self.n).any(|b| self.charge(idx, b) != 0) {
                out.push(p);
            }
        }
        out
    }
}

/// A +-c pair of charged bands inside one cube, with the branch integer M
/// attached to the lower band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargePair {
    pub band: usize,
    pub partner: usize,
    pub charge: i32,
    pub big_m: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargedCube {
    pub cube: [usize; 3],
    pub pairs: Vec<ChargePair>,
}

/// Eigenvalue phases on a fixed branch plus the integer fields of the
/// algorithm: m per edge and band, and M per charged cube.
#[derive(Debug, Clone)]
pub struct PhaseLedger {
    layout: GridLayout,
    n: usize,
    pub branch_cut: f64,
    /// `[point * n + band]`.
    phi: Vec<f64>,
    /// Per axis `[point * n + band]`: the integer on the edge from
    /// `p - delta_axis` to `p`, indexed by the band at `p`.
    m: [Vec<i64>; 3],
    pub charged: Vec<ChargedCube>,
}

impl PhaseLedger {
    pub fn phi(&self, idx: usize, band: usize) -> f64 {
        self.phi[idx * self.n + band]
    }

    pub fn m(&self, axis: usize, idx: usize, band: usize) -> i64 {
        self.m[axis][idx * self.n + band]
    }

    pub fn m_at(&self, axis: usize, p: [usize; 3], band: usize) -> i64 {
        self.m(axis, self.layout.index(p), band)
    }

    /// Number of nonzero edge integers per axis, a useful diagnostic: the
    /// nonzero set forms the sheet where eigenvalues cross the branch cut.
    pub fn nonzero_m(&self) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in 0..3 {
            out[axis] = self.m[axis].iter().filter(|&&v| v != 0).count();
        }
        out
    }
}

/// F for every face: the principal log of the product of unit-normalized
/// eigenvector overlaps around the face, with band indices transported by
/// the edge permutations.
pub fn face_curvature(
    spec: &SpectralGrid,
    _tol: &Tolerances,
) -> Result<FaceField, InvariantError> {
    let layout = spec.layout();
    let n = spec.bands();
    let mut values: [Vec<f64>; 3] = [
        vec![0.0; layout.len() * n],
        vec![0.0; layout.len() * n],
        vec![0.0; layout.len() * n],
    ];
    for axis in 0..3 {
        let a1 = (axis + 1) % 3;
        let a2 = (axis + 2) % 3;
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_face(p, axis) {
                continue;
            }
            let [q1, q2, q3, q4] = layout.face_vertices(p, axis);
            let (i1, i2, i3, i4) = (
                layout.index(q1),
                layout.index(q2),
                layout.index(q3),
                layout.index(q4),
            );
            let p12 = spec.edge_perm(q1, a1);
            let p23 = spec.edge_perm(q2, a2);
            let p43 = spec.edge_perm(q4, a1);
            let inv43 = invert_perm(p43);
            for b in 0..n {
                let b2 = p12[b] as usize;
                let b3 = p23[b2] as usize;
                let b4 = inv43[b3] as usize;
                let (u12, m12) = spec.unit_overlap(i1, b, i2, b2);
                let (u23, m23) = spec.unit_overlap(i2, b2, i3, b3);
                let (u34, m34) = spec.unit_overlap(i3, b3, i4, b4);
                let (u41, m41) = spec.unit_overlap(i4, b4, i1, b);
                let min_mag = m12.min(m23).min(m34).min(m41);
                if min_mag < OVERLAP_EPS {
                    return Err(InvariantError::GridTooCoarse(format!(
                        "vanishing eigenvector overlap ({min_mag:.1e}) on face at {q1:?} \
                         (axis {}); refine the discretization",
                        axis + 1
                    )));
                }
                let prod = u12 * u23 * u34 * u41;
                values[axis][idx * n + b] = prod.arg() / TAU;
            }
        }
    }
    Ok(FaceField { layout, n, values })
}

/// Cube charges: the flux difference of opposite faces, summed over the
/// three directions, with band indices transported from the cube base.
pub fn cube_charges(
    faces: &FaceField,
    spec: &SpectralGrid,
    tol: &Tolerances,
) -> Result<CubeField, InvariantError> {
    let layout = faces.layout;
    let n = faces.n;
    let mut charges = vec![0i32; layout.len() * n];
    let mut max_residual: f64 = 0.0;
    for idx in 0..layout.len() {
        let p = layout.point(idx);
        if !layout.has_cube(p) {
            continue;
        }
        let mut total = 0i64;
        for b in 0..n {
            let mut sum = 0.0;
            for axis in 0..3 {
                let q = layout.shift(p, axis, 1).expect("cube edge");
                let tb = spec.transport(p, axis, b);
                sum += faces.value_at(axis, q, tb) - faces.value(axis, idx, b);
            }
            let (k, r) = nearest_integer(sum);
            if r.abs() > tol.integer_residual {
                return Err(InvariantError::Inconsistency(format!(
                    "cube charge at {p:?} band {b} is {sum:.6}, not an integer within \
                     {:.1e}; band transport is broken",
                    tol.integer_residual
                )));
            }
            max_residual = max_residual.max(r.abs());
            charges[idx * n + b] = k as i32;
            total += k;
        }
        if total != 0 {
            return Err(InvariantError::Inconsistency(format!(
                "cube charges at {p:?} sum to {total}, expected 0"
            )));
        }
    }
    Ok(CubeField {
        layout,
        n,
        charges,
        max_residual,
    })
}

/// Options for the ledger construction. `identity_base_axis3` treats the
/// missing slice below i3 = 0 as the identity map (all phases zero), which
/// is the convention for propagator grids that start at U = 1.
#[derive(Debug, Clone, Copy)]
pub struct LedgerOptions {
    pub branch_cut: f64,
    pub identity_base_axis3: bool,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        Self {
            branch_cut: PI,
            identity_base_axis3: false,
        }
    }
}

/// Build the phase ledger: phases on the chosen branch, the edge integers m
/// with |dphi + 2 pi m| < pi, and the cube integers M for every charged
/// +-pair.
pub fn build_ledger(
    spec: &SpectralGrid,
    cubes: &CubeField,
    options: LedgerOptions,
    _tol: &Tolerances,
) -> Result<PhaseLedger, InvariantError> {
    let layout = spec.layout();
    let n = spec.bands();
    let mut phi = vec![0.0; layout.len() * n];
    for idx in 0..layout.len() {
        for b in 0..n {
            phi[idx * n + b] = branch_phase(spec.eigenvalue(idx, b), options.branch_cut);
        }
    }

    let mut m: [Vec<i64>; 3] = [
        vec![0i64; layout.len() * n],
        vec![0i64; layout.len() * n],
        vec![0i64; layout.len() * n],
    ];
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            // The integer m lives on the edge from p - delta to p and is
            // indexed by the band at p.
            match layout.shift(p, axis, -1) {
                Some(q) => {
                    let q_idx = layout.index(q);
                    let inv = invert_perm(spec.edge_perm(q, axis));
                    for b in 0..n {
                        let qb = inv[b] as usize;
                        let dphi = phi[idx * n + b] - phi[q_idx * n + qb];
                        let (mm, _) = ledger_integer(dphi, PHASE_BOUNDARY_TOL).ok_or_else(|| {
                            InvariantError::GridTooCoarse(format!(
                                "phase step on edge {q:?} -> {p:?} (axis {}) lands on the \
                                 branch boundary pi; refine the discretization",
                                axis + 1
                            ))
                        })?;
                        m[axis][idx * n + b] = mm;
                    }
                }
                None if axis == 2 && options.identity_base_axis3 && p[2] == 0 => {
                    // Edge from the implicit identity slice: reference phase 0.
                    for b in 0..n {
                        let (mm, _) = ledger_integer(phi[idx * n + b], PHASE_BOUNDARY_TOL)
                            .ok_or_else(|| {
                                InvariantError::GridTooCoarse(format!(
                                    "phase step from the identity slice to {p:?} lands on \
                                     the branch boundary pi; refine the discretization"
                                ))
                            })?;
                        m[axis][idx * n + b] = mm;
                    }
                }
                None => {}
            }
        }
    }

    // M integers: per charged cube, pair +c with -c in ascending band order
    // and attach M to the lower band of each pair, from the phases at the
    // cube's base point.
    let mut charged = Vec::new();
    for idx in 0..layout.len() {
        let p = layout.point(idx);
        if !layout.has_cube(p) {
            continue;
        }
        let mut open: Vec<(usize, i32)> = (0..n)
            .filter_map(|b| {
                let c = cubes.charge(idx, b);
                (c != 0).then_some((b, c))
            })
            .collect();
        if open.is_empty() {
            continue;
        }
        let mut pairs = Vec::new();
        while let Some((band, c)) = open.first().copied() {
            open.remove(0);
            let partner_pos = open.iter().position(|&(_, c2)| c2 == -c).ok_or_else(|| {
                InvariantError::Inconsistency(format!(
                    "charges in cube at {p:?} cannot be decomposed into +-pairs"
                ))
            })?;
            let (partner, _) = open.remove(partner_pos);
            let dphi = phi[idx * n + band] - phi[idx * n + partner];
            let (big_m, _) = ledger_integer(dphi, PHASE_BOUNDARY_TOL).ok_or_else(|| {
                InvariantError::GridTooCoarse(format!(
                    "charged bands {band} and {partner} in cube at {p:?} differ by \
                     exactly pi on the circle; refine the discretization"
                ))
            })?;
            pairs.push(ChargePair {
                band,
                partner,
                charge: c,
                big_m,
            });
        }
        charged.push(ChargedCube { cube: p, pairs });
    }

    Ok(PhaseLedger {
        layout,
        n,
        branch_cut: options.branch_cut,
        phi,
        m,
        charged,
    })
}

/// The core sum of the algorithm: C*M over charged cubes plus F*m over every
/// existing face paired with the edge integer at the same point, axis and
/// band. Callers add topology-specific corrections and integer checks.
pub(crate) fn invariant_sum(
    faces: &FaceField,
    cubes: &CubeField,
    ledger: &PhaseLedger,
) -> f64 {
    let layout = faces.layout;
    let n = faces.n;
    let mut sum = 0.0;
    for cc in &ledger.charged {
        let idx = layout.index(cc.cube);
        for pair in &cc.pairs {
            sum += f64::from(cubes.charge(idx, pair.band)) * pair.big_m as f64;
        }
    }
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_face(p, axis) {
                continue;
            }
            for b in 0..n {
                let mm = ledger.m(axis, idx, b);
                if mm != 0 {
                    sum += faces.value(axis, idx, b) * mm as f64;
                }
            }
        }
    }
    sum
}

/// W3 on a fully periodic grid: the invariant sum, checked and rounded to an
/// integer. Returns the integer and the pre-rounding residual.
pub fn w3_hat(
    faces: &FaceField,
    cubes: &CubeField,
    ledger: &PhaseLedger,
    tol: &Tolerances,
) -> Result<(i64, f64), InvariantError> {
    let layout = faces.layout;
    if let Some(axis) = (0..3).find(|&a| !layout.periodic[a]) {
        return Err(InvariantError::NotPeriodic { axis });
    }
    let sum = invariant_sum(faces, cubes, ledger);
    let (w3, residual) = nearest_integer(sum);
    if residual.abs() > tol.integer_residual {
        return Err(InvariantError::GridTooCoarse(format!(
            "W3 sum {sum:.8} deviates from an integer by {residual:.2e} \
             (tolerance {:.1e}); the discretization is not admissible",
            tol.integer_residual
        )));
    }
    Ok((w3, residual))
}

/// W1 along a periodic axis: the sum of edge integers over one grid line,
/// verified to be independent of the choice of line.
pub fn w1_hat(ledger: &PhaseLedger, axis: usize) -> Result<i64, InvariantError> {
    let layout = ledger.layout;
    if !layout.periodic[axis] {
        return Err(InvariantError::NotPeriodic { axis });
    }
    let n = ledger.n;
    let a1 = (axis + 1) % 3;
    let a2 = (axis + 2) % 3;
    let mut value: Option<i64> = None;
    for j1 in 0..layout.dims[a1] {
        for j2 in 0..layout.dims[a2] {
            let mut line = 0i64;
            for i in 0..layout.dims[axis] {
                let mut p = [0usize; 3];
                p[axis] = i;
                p[a1] = j1;
                p[a2] = j2;
                let idx = layout.index(p);
                for b in 0..n {
                    line += ledger.m(axis, idx, b);
                }
            }
            match value {
                None => value = Some(line),
                Some(v) if v != line => {
                    return Err(InvariantError::GridTooCoarse(format!(
                        "winding along axis {} depends on the line: {v} vs {line} at \
                         transverse point ({j1}, {j2}); the discretization is not admissible",
                        axis + 1
                    )));
                }
                Some(_) => {}
            }
        }
    }
    Ok(value.expect("at least one line"))
}

/// Per-band and total Chern numbers on the slice `i_axis = slice`,
/// perpendicular to `axis`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChernSlice {
    pub axis: usize,
    pub slice: usize,
    /// Per-band integers under a slice-consistent band labeling; `None` when
    /// the permutation holonomy over the slice is nontrivial.
    pub per_band: Option<Vec<i64>>,
    pub total: i64,
    pub warning: Option<String>,
}

/// Chern numbers of the slice: the face sum of F over the slice, per band
/// where a consistent labeling exists (trivial holonomy over the whole
/// slice), and in total always.
pub fn chern_hat(
    faces: &FaceField,
    spec: &SpectralGrid,
    axis: usize,
    slice: usize,
    tol: &Tolerances,
) -> Result<ChernSlice, InvariantError> {
    let layout = faces.layout;
    let a1 = (axis + 1) % 3;
    let a2 = (axis + 2) % 3;
    for a in [a1, a2] {
        if !layout.periodic[a] {
            return Err(InvariantError::NotPeriodic { axis: a });
        }
    }
    let n = faces.n;
    let (n1, n2) = (layout.dims[a1], layout.dims[a2]);
    let at = |j1: usize, j2: usize| {
        let mut p = [0usize; 3];
        p[axis] = slice;
        p[a1] = j1;
        p[a2] = j2;
        p
    };

    // Propagate band labels over the slice from its origin and check that
    // every edge agrees (trivial holonomy, including the two torus cycles).
    let mut labels: Vec<Option<Vec<u8>>> = vec![None; n1 * n2];
    let id: Vec<u8> = (0..n as u8).collect();
    labels[0] = Some(id);
    let mut consistent = true;
    let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
    while let Some((j1, j2)) = queue.pop_front() {
        let here = labels[j1 * n2 + j2].clone().expect("visited");
        for (da, step) in [(a1, (1usize, 0usize)), (a2, (0, 1))] {
            let k1 = (j1 + step.0) % n1;
            let k2 = (j2 + step.1) % n2;
            let perm = spec.edge_perm(at(j1, j2), da);
            let mut next = vec![0u8; n];
            for b in 0..n {
                next[perm[b] as usize] = here[b];
            }
            match &labels[k1 * n2 + k2] {
                None => {
                    labels[k1 * n2 + k2] = Some(next);
                    queue.push_back((k1, k2));
                }
                Some(existing) => {
                    if *existing != next {
                        consistent = false;
                    }
                }
            }
        }
    }

    let mut per_band = vec![0.0; n];
    let mut total = 0.0;
    for j1 in 0..n1 {
        for j2 in 0..n2 {
            let p = at(j1, j2);
            let idx = layout.index(p);
            let lab = labels[j1 * n2 + j2].as_ref().expect("slice is connected");
            for b in 0..n {
                let f = faces.value(axis, idx, b);
                total += f;
                per_band[lab[b] as usize] += f;
            }
        }
    }
    let (total_int, tres) = nearest_integer(total);
    if tres.abs() > tol.integer_residual {
        return Err(InvariantError::GridTooCoarse(format!(
            "total Chern flux {total:.8} through slice {slice} of axis {} is not an \
             integer within {:.1e}",
            axis + 1,
            tol.integer_residual
        )));
    }
    if !consistent {
        return Ok(ChernSlice {
            axis,
            slice,
            per_band: None,
            total: total_int,
            warning: Some(
                "band labeling over the slice has nontrivial holonomy; per-band \
                 Chern numbers are withheld"
                    .to_string(),
            ),
        });
    }
    let mut ints = Vec::with_capacity(n);
    for (b, v) in per_band.iter().enumerate() {
        let (k, r) = nearest_integer(*v);
        if r.abs() > tol.integer_residual {
            return Err(InvariantError::GridTooCoarse(format!(
                "Chern number of band {b} on slice {slice} of axis {} is {v:.8}, not an \
                 integer within {:.1e}",
                axis + 1,
                tol.integer_residual
            )));
        }
        ints.push(k);
    }
    debug_assert_eq!(ints.iter().sum::<i64>(), total_int);
    Ok(ChernSlice {
        axis,
        slice,
        per_band: Some(ints),
        total: total_int,
        warning: None,
    })
}

/// Convergence diagnostics: the largest eigenvalue arc step between matched
/// bands on adjacent points, and the practical pi/2 admissibility flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_dphi: f64,
    pub admissible: bool,
    pub nonzero_m: [usize; 3],
    pub max_cube_residual: f64,
    pub w3_residual: f64,
}

/// Largest arc angle between matched eigenvalues on adjacent points. The run
/// counts as admissible when it stays below pi/2; the hard requirement
/// (< pi) is enforced by the ledger errors.
pub fn max_matched_arc(spec: &SpectralGrid) -> f64 {
    let layout = spec.layout();
    let n = spec.bands();
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_edge(p, axis) {
                continue;
            }
            let q = layout.shift(p, axis, 1).expect("edge endpoint");
            let q_idx = layout.index(q);
            let perm = spec.edge_perm(p, axis);
            for b in 0..n {
                let a = spec.eigenvalue(idx, b).arg();
                let bq = spec.eigenvalue(q_idx, perm[b] as usize).arg();
                worst = worst.max(arc_distance(a, bq));
            }
        }
    }
    worst
}

pub fn is_admissible(max_dphi: f64) -> bool {
    max_dphi < FRAC_PI_2
}

/// Pre-matching coarseness estimate: the largest, over all edges, of the
/// smallest arc any band must move to reach some band on the far point.
/// A lower bound on the true matched step; available even when the band
/// matching itself fails, for refinement advice.
pub fn arc_step_estimate(spec: &SpectralGrid) -> f64 {
    let layout = spec.layout();
    let n = spec.bands();
    let mut worst: f64 = 0.0;
    for axis in 0..3 {
        for idx in 0..layout.len() {
            let p = layout.point(idx);
            if !layout.has_edge(p, axis) {
                continue;
            }
            let q_idx = layout.index(layout.shift(p, axis, 1).expect("edge endpoint"));
            for b in 0..n {
                let a = spec.eigenvalue(idx, b).arg();
                let step = (0..n)
                    .map(|b2| arc_distance(a, spec.eigenvalue(q_idx, b2).arg()))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(step);
            }
        }
    }
    worst
}

/// Full report of a periodic-grid evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct W3Report {
    pub w3: i64,
    pub w1: [i64; 3],
    /// Chern numbers per axis, evaluated at the top slice of each axis.
    pub chern: Vec<ChernSlice>,
    pub charged_cubes: Vec<ChargedCubeRecord>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChargedCubeRecord {
    pub cube: [usize; 3],
    pub band: usize,
    pub partner: usize,
    pub charge: i32,
    pub big_m: i64,
}

pub(crate) fn charged_cube_records(ledger: &PhaseLedger) -> Vec<ChargedCubeRecord> {
    ledger
        .charged
        .iter()
        .flat_map(|cc| {
            cc.pairs.iter().map(|pair| ChargedCubeRecord {
                cube: cc.cube,
                band: pair.band,
                partner: pair.partner,
                charge: pair.charge,
                big_m: pair.big_m,
            })
        })
        .collect()
}

/// Run the whole pipeline on a fully periodic grid.
pub fn evaluate_w3(
    grid: &UnitaryGrid,
    branch_cut: f64,
    tol: &Tolerances,
) -> Result<W3Report, InvariantError> {
    let spec = crate::spectral::match_bands(crate::spectral::diagonalize_grid(grid, tol)?, tol)?;
    let faces = face_curvature(&spec, tol)?;
    let cubes = cube_charges(&faces, &spec, tol)?;
    let ledger = build_ledger(
        &spec,
        &cubes,
        LedgerOptions {
            branch_cut,
            identity_base_axis3: false,
        },
        tol,
    )?;
    let (w3, w3_residual) = w3_hat(&faces, &cubes, &ledger, tol)?;
    let w1 = [
        w1_hat(&ledger, 0)?,
        w1_hat(&ledger, 1)?,
        w1_hat(&ledger, 2)?,
    ];
    let mut chern = Vec::with_capacity(3);
    for axis in 0..3 {
        chern.push(chern_hat(
            &faces,
            &spec,
            axis,
            grid.layout().dims[axis] - 1,
            tol,
        )?);
    }
    let max_dphi = max_matched_arc(&spec);
    Ok(W3Report {
        w3,
        w1,
        chern,
        charged_cubes: charged_cube_records(&ledger),
        diagnostics: Diagnostics {
            max_dphi,
            admissible: is_admissible(max_dphi),
            nonzero_m: ledger.nonzero_m(),
            max_cube_residual: cubes.max_residual,
            w3_residual,
        },
    })
}

/// Direct evaluation of the defining integral with central-difference
/// derivatives and the plain Riemann sum over the periodic grid. Slow to
/// converge; exists as the comparison baseline.
pub fn w3_direct_central_difference(grid: &UnitaryGrid) -> Result<f64, InvariantError> {
    let layout = grid.layout();
    if let Some(axis) = (0..3).find(|&a| !layout.periodic[a]) {
        return Err(InvariantError::NotPeriodic { axis });
    }
    let vol_element: f64 = (0..3).map(|a| 1.0 / layout.dims[a] as f64).product();
    let mut total = Complex64::new(0.0, 0.0);
    for idx in 0..layout.len() {
        let p = layout.point(idx);
        let u_inv = grid.sample_at(idx).adjoint();
        let mut a: [CMatrix; 3] = [
            CMatrix::zeros(0, 0),
            CMatrix::zeros(0, 0),
            CMatrix::zeros(0, 0),
        ];
        for (axis, slot) in a.iter_mut().enumerate() {
            let fwd = grid.sample(layout.shift(p, axis, 1).expect("periodic"));
            let bwd = grid.sample(layout.shift(p, axis, -1).expect("periodic"));
            let h = 1.0 / layout.dims[axis] as f64;
            *slot = &u_inv * ((fwd - bwd) * Complex64::new(0.5 / h, 0.0));
        }
        let t123 = (&a[0] * &a[1] * &a[2]).trace();
        let t132 = (&a[0] * &a[2] * &a[1]).trace();
        total += (t123 - t132) * Complex64::new(3.0, 0.0);
    }
    total *= Complex64::new(vol_element / (24.0 * PI * PI), 0.0);
    if total.im.abs() > 1e-8 {
        return Err(InvariantError::Inconsistency(format!(
            "central-difference sum has imaginary part {:.3e}",
            total.im
        )));
    }
    Ok(total.re)
}
