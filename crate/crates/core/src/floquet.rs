//! Propagators of driven Bloch Hamiltonians and the per-gap invariant of the
//! periodized map: the return-map half is never sampled; an analytic
//! integer correction at the final time slice replaces it. Also hosts the
//! slice-by-slice tracking of per-gap values and the static specialization.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::engine::{
    self, build_ledger, charged_cube_records, cube_charges, face_curvature, invariant_sum,
    is_admissible, max_matched_arc, ChargedCubeRecord, CubeField, FaceField, LedgerOptions,
    PhaseLedger,
};
use crate::error::InvariantError;
use crate::grid::{CMatrix, GridLayout, UnitaryGrid};
use crate::phase::{arc_distance, ledger_integer, nearest_integer, wrap_principal, xi_phase};
use crate::spectral::{diagonalize_grid, match_bands, SpectralGrid};
use crate::Tolerances;

/// Hermiticity tolerance for sampled Bloch Hamiltonians.
const HERMITICITY_TOL: f64 = 1e-12;

/// Default integration step: substeps are chosen so that ||H||_F * dt stays
/// below this. Calibrated so that doubling the substeps moves the final
/// eigenphases by less than 1e-4 for the reference drive.
const STEP_NORM_BUDGET: f64 = 0.005;

/// A time-dependent Bloch Hamiltonian H(mu1, mu2, t) on the reduced zone
/// coordinates, t in [0, period]. H must be Hermitian and periodic in mu1,
/// mu2 with period 1.
pub trait DrivenBloch: Sync {
    fn bands(&self) -> usize;
    fn period(&self) -> f64;
    fn hamiltonian(&self, mu1: f64, mu2: f64, t: f64) -> CMatrix;
}

/// Propagator samples U(mu1, mu2, mu3) with mu3 = t/T: periodic in the two
/// momentum directions, bounded in time, with the implicit identity at
/// mu3 = 0. Slice i3 (0-based) holds the propagator at t = T (i3+1) / N3.
#[derive(Debug, Clone)]
pub struct PropagatorGrid {
    pub grid: UnitaryGrid,
    pub substeps: usize,
}

impl PropagatorGrid {
    /// The sub-grid of the first `slices` time slices; tracking semantics
    /// ("the grid grown up to slice s") in a reusable form.
    pub fn prefix(&self, slices: usize) -> PropagatorGrid {
        let layout = self.grid.layout();
        assert!(slices >= 1 && slices <= layout.dims[2]);
        let dims = [layout.dims[0], layout.dims[1], slices];
        let sub = GridLayout::new(dims, layout.periodic);
        let mut samples = Vec::with_capacity(sub.len());
        for idx in 0..sub.len() {
            let p = sub.point(idx);
            samples.push(self.grid.sample(p).clone());
        }
        PropagatorGrid {
            grid: UnitaryGrid::new(sub, self.grid.matrix_dim(), samples)
                .expect("prefix shapes are consistent"),
            substeps: self.substeps,
        }
    }
}

fn hermitize_checked(
    h: CMatrix,
    mu1: f64,
    mu2: f64,
    t: f64,
) -> Result<CMatrix, InvariantError> {
    let n = h.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            dev = dev.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    if dev > HERMITICITY_TOL {
        return Err(InvariantError::InvalidInput(format!(
            "Hamiltonian at (mu1, mu2, t) = ({mu1:.4}, {mu2:.4}, {t:.4}) deviates from \
             Hermiticity by {dev:.3e}"
        )));
    }
    Ok((h.clone() + h.adjoint()) * Complex64::new(0.5, 0.0))
}

/// exp(-i dt H) for Hermitian H, through the eigendecomposition; exactly
/// unitary up to roundoff.
pub(crate) fn exp_neg_i_h(h: &CMatrix, dt: f64) -> CMatrix {
    let n = h.nrows();
    let se = h.clone().symmetric_eigen();
    let mut scaled = se.eigenvectors.clone();
    for k in 0..n {
        let ph = Complex64::from_polar(1.0, -dt * se.eigenvalues[k]);
        for r in 0..n {
            scaled[(r, k)] *= ph;
        }
    }
    scaled * se.eigenvectors.adjoint()
}

fn frobenius(h: &CMatrix) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Substep count such that ||H||_F * dt < STEP_NORM_BUDGET per substep,
/// estimated from a coarse probe of the drive.
pub fn default_substeps(model: &dyn DrivenBloch, n3: usize) -> usize {
    let mut hmax: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..9 {
                let h = model.hamiltonian(
                    (i as f64 + 0.5) / 5.0,
                    (j as f64 + 0.5) / 5.0,
                    model.period() * k as f64 / 8.0,
                );
                hmax = hmax.max(frobenius(&h));
            }
        }
    }
    let dt_slice = model.period() / n3 as f64;
    ((hmax * dt_slice / STEP_NORM_BUDGET).ceil() as usize).max(1)
}

/// Advance the propagator by the exponential-midpoint rule and store the
/// slices at t = T i3 / N3. Momentum coordinates are sampled cell-centered.
pub fn propagate(
    model: &dyn DrivenBloch,
    dims: [usize; 3],
    substeps: usize,
) -> Result<PropagatorGrid, InvariantError> {
    if dims[2] < 2 {
        return Err(InvariantError::InvalidInput(
            "propagation needs at least two time slices".into(),
        ));
    }
    if substeps < 1 {
        return Err(InvariantError::InvalidInput(
            "substeps must be at least one".into(),
        ));
    }
    let n = model.bands();
    let layout = GridLayout::new(dims, [true, true, false]);
    let period = model.period();
    let dt = period / (dims[2] * substeps) as f64;

    let columns: Vec<Result<Vec<CMatrix>, InvariantError>> = (0..dims[0] * dims[1])
        .into_par_iter()
        .map(|col| {
            let i1 = col / dims[1];
            let i2 = col % dims[1];
            let mu1 = (i1 as f64 + 0.5) / dims[0] as f64;
            let mu2 = (i2 as f64 + 0.5) / dims[1] as f64;
            let mut u = CMatrix::identity(n, n);
            let mut slices = Vec::with_capacity(dims[2]);
            for s in 0..dims[2] {
                for k in 0..substeps {
                    let t_mid = ((s * substeps + k) as f64 + 0.5) * dt;
                    let h = hermitize_checked(model.hamiltonian(mu1, mu2, t_mid), mu1, mu2, t_mid)?;
                    u = exp_neg_i_h(&h, dt) * u;
                }
                slices.push(u.clone());
            }
            Ok(slices)
        })
        .collect();

    let mut samples = vec![CMatrix::zeros(0, 0); layout.len()];
    for (col, column) in columns.into_iter().enumerate() {
        let column = column?;
        let i1 = col / dims[1];
        let i2 = col % dims[1];
        for (s, u) in column.into_iter().enumerate() {
            samples[layout.index([i1, i2, s])] = u;
        }
    }
    Ok(PropagatorGrid {
        grid: UnitaryGrid::new(layout, n, samples)?,
        substeps,
    })
}

/// Result of one per-gap evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiReport {
    pub xi_angle: f64,
    pub n: i64,
    pub residual: f64,
}

/// All xi-independent work of the per-gap invariant: the spectral pipeline
/// on the bounded-time grid, the ledger with the identity base slice, and
/// the partial sum that the K correction completes.
pub struct FloquetRun {
    spec: SpectralGrid,
    faces: FaceField,
    cubes: CubeField,
    ledger: PhaseLedger,
    base_sum: f64,
    tol: Tolerances,
    pub max_dphi: f64,
}

impl FloquetRun {
    pub fn new(
        prop: &PropagatorGrid,
        branch_cut: f64,
        tol: &Tolerances,
    ) -> Result<Self, InvariantError> {
        let layout = prop.grid.layout();
        if layout.periodic != [true, true, false] {
            return Err(InvariantError::InvalidInput(
                "per-gap evaluation expects a grid periodic in the momentum axes and \
                 bounded in time"
                    .into(),
            ));
        }
        let spec = match_bands(diagonalize_grid(&prop.grid, tol)?, tol)?;
        let faces = face_curvature(&spec, tol)?;
        let cubes = cube_charges(&faces, &spec, tol)?;
        let ledger = build_ledger(
            &spec,
            &cubes,
            LedgerOptions {
                branch_cut,
                identity_base_axis3: true,
            },
            tol,
        )?;
        let base_sum = invariant_sum(&faces, &cubes, &ledger);
        // The step from the implicit identity slice counts toward the
        // admissibility diagnostic as well.
        let mut max_dphi = max_matched_arc(&spec);
        for i1 in 0..layout.dims[0] {
            for i2 in 0..layout.dims[1] {
                let idx = layout.index([i1, i2, 0]);
                for b in 0..spec.bands() {
                    max_dphi = max_dphi.max(spec.eigenvalue(idx, b).arg().abs());
                }
            }
        }
        Ok(Self {
            spec,
            faces,
            cubes,
            ledger,
            base_sum,
            tol: *tol,
            max_dphi,
        })
    }

    pub fn bands(&self) -> usize {
        self.spec.bands()
    }

    pub fn layout(&self) -> GridLayout {
        self.spec.layout()
    }

    pub fn top_slice(&self) -> usize {
        self.layout().dims[2] - 1
    }

    pub fn admissible(&self) -> bool {
        is_admissible(self.max_dphi)
    }

    pub fn charged_cubes(&self) -> Vec<ChargedCubeRecord> {
        charged_cube_records(&self.ledger)
    }

    pub fn max_cube_residual(&self) -> f64 {
        self.cubes.max_residual
    }

    pub fn spectral(&self) -> &SpectralGrid {
        &self.spec
    }

    pub fn ledger(&self) -> &PhaseLedger {
        &self.ledger
    }

    /// Smallest arc distance from `xi_angle` to any eigenvalue of the slice.
    pub fn min_distance_at_slice(&self, slice: usize, xi_angle: f64) -> f64 {
        let layout = self.layout();
        let mut best = f64::INFINITY;
        for i1 in 0..layout.dims[0] {
            for i2 in 0..layout.dims[1] {
                let idx = layout.index([i1, i2, slice]);
                for b in 0..self.bands() {
                    best = best.min(arc_distance(self.spec.eigenvalue(idx, b).arg(), xi_angle));
                }
            }
        }
        best
    }

    fn check_gap(&self, slice: usize, xi_angle: f64) -> Result<(), InvariantError> {
        let d = self.min_distance_at_slice(slice, xi_angle);
        if d <= self.tol.gap_margin {
            return Err(InvariantError::GapViolation(format!(
                "xi at angle {xi_angle:.6} rad lies within {d:.3e} of an eigenvalue of the \
                 final-time map (margin {:.1e})",
                self.tol.gap_margin
            )));
        }
        Ok(())
    }

    /// The per-gap invariant: the bounded-grid sum plus the integer
    /// correction K * F at the final slice, rounded to an integer.
    pub fn w3_xi(&self, xi_angle: f64) -> Result<XiReport, InvariantError> {
        let layout = self.layout();
        let top = self.top_slice();
        self.check_gap(top, xi_angle)?;
        let mut correction = 0.0;
        for i1 in 0..layout.dims[0] {
            for i2 in 0..layout.dims[1] {
                let p = [i1, i2, top];
                let idx = layout.index(p);
                for b in 0..self.bands() {
                    let d = self.spec.eigenvalue(idx, b);
                    let target = xi_phase(d, xi_angle) - self.ledger.phi(idx, b);
                    let (k, _) = ledger_integer(target, engine::PHASE_BOUNDARY_TOL)
                        .ok_or_else(|| {
                            InvariantError::GridTooCoarse(format!(
                                "K selection at ({i1}, {i2}) band {b} lands on the branch \
                                 boundary pi; refine the discretization"
                            ))
                        })?;
                    // |target + 2 pi K| < pi determines K; the sum adds K * F.
                    if k != 0 {
                        correction += k as f64 * self.faces.value(2, idx, b);
                    }
                }
            }
        }
        let total = self.base_sum + correction;
        let (n, residual) = nearest_integer(total);
        if residual.abs() > self.tol.integer_residual {
            return Err(InvariantError::GridTooCoarse(format!(
                "per-gap invariant {total:.8} deviates from an integer by {residual:.2e} \
                 (tolerance {:.1e}); the discretization is not admissible",
                self.tol.integer_residual
            )));
        }
        Ok(XiReport {
            xi_angle,
            n,
            residual,
        })
    }

    /// Eigenvalue angles of one time slice, merged over the momentum grid.
    pub fn slice_angles(&self, slice: usize) -> Vec<f64> {
        let layout = self.layout();
        let mut angles = Vec::with_capacity(layout.dims[0] * layout.dims[1] * self.bands());
        for i1 in 0..layout.dims[0] {
            for i2 in 0..layout.dims[1] {
                let idx = layout.index([i1, i2, slice]);
                for b in 0..self.bands() {
                    angles.push(self.spec.eigenvalue(idx, b).arg());
                }
            }
        }
        angles
    }

    /// Midpoints of the `count` widest empty arcs of the slice's eigenvalue
    /// multiset; the gap auto-detection.
    pub fn detect_gaps(&self, slice: usize, count: usize) -> Result<Vec<f64>, InvariantError> {
        let mut angles = self.slice_angles(slice);
        angles.sort_by(f64::total_cmp);
        if angles.is_empty() || count == 0 {
            return Err(InvariantError::InvalidInput("no data for gap detection".into()));
        }
        let m = angles.len();
        let mut arcs: Vec<(f64, f64)> = Vec::with_capacity(m); // (width, midpoint)
        for i in 0..m {
            let a = angles[i];
            let b = if i + 1 < m {
                angles[i + 1]
            } else {
                angles[0] + 2.0 * PI
            };
            let width = b - a;
            arcs.push((width, wrap_principal(a + width / 2.0)));
        }
        arcs.sort_by(|x, y| y.0.total_cmp(&x.0));
        if arcs.len() < count || arcs[count - 1].0 <= 2.0 * self.tol.gap_margin {
            return Err(InvariantError::GapViolation(format!(
                "could not detect {count} open gaps at slice {slice}"
            )));
        }
        Ok(arcs.into_iter().take(count).map(|(_, mid)| mid).collect())
    }

    /// Total Chern flux through one time slice per circle arc, for arcs
    /// bounded by the strictly ascending `gap_angles`. Entry j covers the
    /// counterclockwise arc from gap j to gap j+1 (cyclic).
    pub fn arc_cherns(
        &self,
        slice: usize,
        gap_angles: &[f64],
    ) -> Result<Vec<i64>, InvariantError> {
        let k = gap_angles.len();
        if k == 0 {
            return Err(InvariantError::InvalidInput("no gap angles given".into()));
        }
        if !gap_angles.windows(2).all(|w| w[0] < w[1]) {
            return Err(InvariantError::InvalidInput(
                "gap angles must be strictly ascending and distinct".into(),
            ));
        }
        for &g in gap_angles {
            let d = self.min_distance_at_slice(slice, g);
            if d <= self.tol.gap_margin {
                return Err(InvariantError::GapViolation(format!(
                    "gap angle {g:.6} rad lies within {d:.3e} of an eigenvalue of slice {slice}"
                )));
            }
        }
        let layout = self.layout();
        let mut sums = vec![0.0; k];
        for i1 in 0..layout.dims[0] {
            for i2 in 0..layout.dims[1] {
                let idx = layout.index([i1, i2, slice]);
                for b in 0..self.bands() {
                    let th = self.spec.eigenvalue(idx, b).arg();
                    // Last gap angle <= th, wrapping below the first gap.
                    let j = match gap_angles.iter().rposition(|&g| g <= th) {
                        Some(j) => j,
                        None => k - 1,
                    };
                    sums[j] += self.faces.value(2, idx, b);
                }
            }
        }
        let mut out = Vec::with_capacity(k);
        for (j, v) in sums.iter().enumerate() {
            let (c, r) = nearest_integer(*v);
            if r.abs() > self.tol.integer_residual {
                return Err(InvariantError::GridTooCoarse(format!(
                    "arc Chern flux {v:.8} after gap {j} of slice {slice} is not an integer \
                     within {:.1e}",
                    self.tol.integer_residual
                )));
            }
            out.push(c);
        }
        if out.iter().sum::<i64>() != 0 {
            return Err(InvariantError::Inconsistency(format!(
                "arc Chern numbers of slice {slice} sum to {}, expected 0",
                out.iter().sum::<i64>()
            )));
        }
        Ok(out)
    }
}

/// One-shot per-gap invariant of a propagator grid.
pub fn w3_xi(
    prop: &PropagatorGrid,
    xi_angle: f64,
    branch_cut: f64,
    tol: &Tolerances,
) -> Result<XiReport, InvariantError> {
    FloquetRun::new(prop, branch_cut, tol)?.w3_xi(xi_angle)
}

/// Verify the shift relation between per-gap values and the Chern numbers of
/// the bands the gap crosses: for gaps sorted ascending, with `arc_cherns[j]`
/// covering the counterclockwise arc from gap j to gap j+1,
/// n[j+1] = n[j] - arc_cherns[j] cyclically. The cyclic closure is the
/// full-loop identity (arc Cherns sum to zero).
pub fn gap_relation_check(reports: &[XiReport], arc_cherns: &[i64]) -> bool {
    let k = reports.len();
    if k != arc_cherns.len() || k == 0 {
        return false;
    }
    debug_assert!(reports.windows(2).all(|w| w[0].xi_angle < w[1].xi_angle));
    (0..k).all(|j| reports[(j + 1) % k].n == reports[j].n - arc_cherns[j])
}

/// Per-gap evaluation of a whole run, with the band Chern numbers and the
/// shift-relation check. Gap angles keep the caller's order; band j is the
/// clockwise arc from gap j-1 to gap j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetReport {
    pub gaps: Vec<XiReport>,
    pub band_cherns: Vec<i64>,
    pub gap_relation_ok: bool,
    pub charged_cubes: Vec<ChargedCubeRecord>,
    pub max_dphi: f64,
    pub admissible: bool,
}

/// Evaluate the per-gap invariant for every listed gap plus the band Chern
/// numbers of the final slice, and verify the shift relation
/// n_j = n_{j-1} + C_j between adjacent gaps (cyclically).
pub fn evaluate_gaps(run: &FloquetRun, gap_angles: &[f64]) -> Result<FloquetReport, InvariantError> {
    let k = gap_angles.len();
    if k == 0 {
        return Err(InvariantError::InvalidInput("no gap angles given".into()));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| gap_angles[a].total_cmp(&gap_angles[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| gap_angles[i]).collect();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(InvariantError::InvalidInput(
            "gap angles must be distinct".into(),
        ));
    }
    let arcs = run.arc_cherns(run.top_slice(), &sorted)?;
    // Position of each caller gap in the sorted cycle.
    let mut pos = vec![0usize; k];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        pos[orig] = sorted_pos;
    }
    // Band j: bands crossed clockwise from gap j-1 to gap j, i.e. the sorted
    // arcs counterclockwise from gap j up to gap j-1.
    let mut band_cherns = Vec::with_capacity(k);
    for j in 0..k {
        let from = pos[j];
        let to = pos[(j + k - 1) % k];
        let mut c = 0i64;
        let mut a = from;
        while a != to {
            c += arcs[a];
            a = (a + 1) % k;
        }
        if from == to {
            // Single gap: the "band" is the whole circle, total Chern zero.
            c = arcs.iter().sum();
        }
        band_cherns.push(c);
    }
    let mut gaps = Vec::with_capacity(k);
    for &g in gap_angles {
        gaps.push(run.w3_xi(g)?);
    }
    let gap_relation_ok =
        (0..k).all(|j| gaps[j].n == gaps[(j + k - 1) % k].n + band_cherns[j]);
    Ok(FloquetReport {
        gaps,
        band_cherns,
        gap_relation_ok,
        charged_cubes: run.charged_cubes(),
        max_dphi: run.max_dphi,
        admissible: run.admissible(),
    })
}

/// State of one tracked gap at one time slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackedGap {
    pub xi: f64,
    pub n: i64,
}

/// A charged cube encountered while extending the grid by one slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeEvent {
    pub cube: [usize; 3],
    /// Tracked gap (by index) whose value the cube changes.
    pub gap: usize,
    /// Signed change applied to that gap's value.
    pub charge: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSlice {
    /// 1-based time slice index; mu3 = slice / N3.
    pub slice: usize,
    pub mu3: f64,
    /// Clockwise gap order; the wrap-anchor gap comes last.
    pub gaps: Vec<TrackedGap>,
    /// Running Chern numbers; entry j belongs to the band between gap j-1
    /// and gap j (clockwise), i.e. the band counterclockwise of gap j.
    pub band_cherns: Vec<i64>,
    pub events: Vec<CubeEvent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapTrack {
    pub slices: Vec<TrackSlice>,
}

impl GapTrack {
    pub fn final_slice(&self) -> &TrackSlice {
        self.slices.last().expect("track has at least one slice")
    }
}

/// Band Chern numbers per clockwise-ordered gap list: entry j is the Chern
/// number of the band counterclockwise of gap j (between gap j-1 and gap j).
fn cw_band_cherns(
    run: &FloquetRun,
    slice: usize,
    gaps_cw: &[f64],
) -> Result<Vec<i64>, InvariantError> {
    let k = gaps_cw.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| gaps_cw[a].total_cmp(&gaps_cw[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| gaps_cw[i]).collect();
    let arcs = run.arc_cherns(slice, &sorted)?;
    // Band j (cw) is the ccw arc starting at gap j.
    let mut out = vec![0i64; k];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        out[orig] = arcs[sorted_pos];
    }
    Ok(out)
}

/// Re-center every gap to the midpoint of its empty arc. When two tracked
/// gaps share one empty arc their midpoints coincide; the previous distinct
/// positions are kept in that case, which is equally valid because the value
/// does not depend on the position within the gap.
fn recenter_all(
    angles_sorted: &[f64],
    xi: &mut [f64],
    margin: f64,
) -> Result<(), InvariantError> {
    let mut candidates = Vec::with_capacity(xi.len());
    for (j, &x) in xi.iter().enumerate() {
        candidates.push(recenter_gap(angles_sorted, x, margin, j)?);
    }
    let mut sorted = candidates.clone();
    sorted.sort_by(f64::total_cmp);
    let collision = sorted.windows(2).any(|w| (w[1] - w[0]).abs() <= 2.0 * margin);
    if !collision {
        xi.copy_from_slice(&candidates);
    }
    Ok(())
}

/// Re-center a gap to the midpoint of the empty arc around it; errors when
/// the arc has collapsed onto the gap position.
fn recenter_gap(
    angles_sorted: &[f64],
    xi: f64,
    margin: f64,
    gap_index: usize,
) -> Result<f64, InvariantError> {
    // Nearest eigenvalue angles counterclockwise and clockwise of xi.
    let m = angles_sorted.len();
    let up = angles_sorted.partition_point(|&a| a <= xi);
    let ccw = if up < m {
        angles_sorted[up]
    } else {
        angles_sorted[0] + 2.0 * PI
    };
    let cw = if up > 0 {
        angles_sorted[up - 1]
    } else {
        angles_sorted[m - 1] - 2.0 * PI
    };
    let width = ccw - cw;
    if width / 2.0 <= margin {
        return Err(InvariantError::TrackingAmbiguous(format!(
            "gap {} has closed at a stored slice (width {width:.3e})",
            gap_index + 1
        )));
    }
    Ok(wrap_principal(cw + width / 2.0))
}

/// Track per-gap values across the time slices of a propagation. Gaps are
/// ordered clockwise with the wrap anchor (the widest initial gap) last;
/// initial values are the partial Chern sums of the first slice, anchored at
/// zero on the wrap gap.
pub fn track_gaps(
    model: &dyn DrivenBloch,
    dims: [usize; 3],
    substeps: usize,
    initial_gaps: Option<&[f64]>,
    branch_cut: f64,
    tol: &Tolerances,
) -> Result<GapTrack, InvariantError> {
    let prop = propagate(model, dims, substeps)?;
    let run = FloquetRun::new(&prop, branch_cut, tol)?;
    track_run(&run, initial_gaps)
}

fn track_run(
    run: &FloquetRun,
    initial_gaps: Option<&[f64]>,
) -> Result<GapTrack, InvariantError> {
    let nb = run.bands();
    let n3 = run.layout().dims[2];
    let margin = run.tol.gap_margin;

    let detected;
    let raw_gaps: &[f64] = match initial_gaps {
        Some(g) => {
            if g.len() != nb {
                return Err(InvariantError::InvalidInput(format!(
                    "expected {nb} gap positions (one per band), got {}",
                    g.len()
                )));
            }
            g
        }
        None => {
            detected = run.detect_gaps(0, nb)?;
            &detected
        }
    };

    // Clockwise order, anchored at the widest gap of the first slice.
    let mut angles0 = run.slice_angles(0);
    angles0.sort_by(f64::total_cmp);
    let width_of = |xi: f64| -> f64 {
        let m = angles0.len();
        let up = angles0.partition_point(|&a| a <= xi);
        let ccw = if up < m { angles0[up] } else { angles0[0] + 2.0 * PI };
        let cw = if up > 0 { angles0[up - 1] } else { angles0[m - 1] - 2.0 * PI };
        ccw - cw
    };
    let anchor = (0..nb)
        .max_by(|&a, &b| width_of(raw_gaps[a]).total_cmp(&width_of(raw_gaps[b])))
        .expect("at least one gap");
    let mut order: Vec<usize> = (0..nb).filter(|&j| j != anchor).collect();
    // Clockwise distance from the anchor.
    order.sort_by(|&a, &b| {
        let da = (raw_gaps[anchor] - raw_gaps[a]).rem_euclid(2.0 * PI);
        let db = (raw_gaps[anchor] - raw_gaps[b]).rem_euclid(2.0 * PI);
        da.total_cmp(&db)
    });
    order.push(anchor);
    let mut xi: Vec<f64> = order.iter().map(|&j| raw_gaps[j]).collect();
    recenter_all(&angles0, &mut xi, margin)?;

    let mut cherns = cw_band_cherns(run, 0, &xi)?;
    let mut values: Vec<i64> = Vec::with_capacity(nb);
    let mut acc = 0i64;
    for &c in &cherns {
        acc += c;
        values.push(acc);
    }
    if values[nb - 1] != 0 {
        return Err(InvariantError::Inconsistency(
            "band Chern numbers of the first slice do not sum to zero".into(),
        ));
    }

    let mut slices = Vec::with_capacity(n3);
    slices.push(TrackSlice {
        slice: 1,
        mu3: 1.0 / n3 as f64,
        gaps: xi.iter().zip(&values).map(|(&x, &n)| TrackedGap { xi: x, n }).collect(),
        band_cherns: cherns.clone(),
        events: Vec::new(),
    });

    let layout = run.layout();
    for s in 1..n3 {
        let mut events = Vec::new();
        // Cubes between slices s-1 and s.
        for cc in &run.ledger.charged {
            if cc.cube[2] != s - 1 {
                continue;
            }
            let base_idx = layout.index(cc.cube);
            for pair in &cc.pairs {
                let da = run.spec.eigenvalue(base_idx, pair.band);
                let db = run.spec.eigenvalue(base_idx, pair.partner);
                let touch = (da + db).arg();
                let gap = (0..nb)
                    .min_by(|&a, &b| {
                        arc_distance(xi[a], touch).total_cmp(&arc_distance(xi[b], touch))
                    })
                    .expect("gaps present");
                // Which member of the pair sits counterclockwise of the gap:
                // average the signed offsets over the cube's eight vertices,
                // transporting band indices from the base point.
                let (sa, sb) = cube_side_means(run, cc.cube, pair.band, pair.partner, xi[gap]);
                if sa * sb >= 0.0 {
                    return Err(InvariantError::TrackingAmbiguous(format!(
                        "cannot orient the charged pair in cube at {:?} against gap {}",
                        cc.cube,
                        gap + 1
                    )));
                }
                // The counterclockwise member is "band nu" next to gap nu;
                // its charge is the change of the gap value.
                let delta = if sa > 0.0 {
                    i64::from(pair.charge)
                } else {
                    i64::from(-pair.charge)
                };
                values[gap] += delta;
                cherns[gap] += delta;
                cherns[(gap + 1) % nb] -= delta;
                events.push(CubeEvent {
                    cube: cc.cube,
                    gap,
                    charge: delta,
                });
            }
        }
        let mut angles = run.slice_angles(s);
        angles.sort_by(f64::total_cmp);
        recenter_all(&angles, &mut xi, margin)?;
        slices.push(TrackSlice {
            slice: s + 1,
            mu3: (s + 1) as f64 / n3 as f64,
            gaps: xi.iter().zip(&values).map(|(&x, &n)| TrackedGap { xi: x, n }).collect(),
            band_cherns: cherns.clone(),
            events,
        });
    }
    Ok(GapTrack { slices })
}

/// Mean signed arc offset of the two bands of a charged pair from a gap
/// position, averaged over the cube's eight vertices.
fn cube_side_means(
    run: &FloquetRun,
    base: [usize; 3],
    band: usize,
    partner: usize,
    gap_angle: f64,
) -> (f64, f64) {
    let layout = run.layout();
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for corner in 0..8usize {
        let mut p = base;
        let mut ba = band;
        let mut bb = partner;
        for axis in 0..3 {
            if corner >> axis & 1 == 1 {
                ba = run.spec.transport(p, axis, ba);
                bb = run.spec.transport(p, axis, bb);
                p = layout.shift(p, axis, 1).expect("cube vertex");
            }
        }
        let idx = layout.index(p);
        sum_a += wrap_principal(run.spec.eigenvalue(idx, ba).arg() - gap_angle);
        sum_b += wrap_principal(run.spec.eigenvalue(idx, bb).arg() - gap_angle);
    }
    (sum_a / 8.0, sum_b / 8.0)
}

/// Report of the static specialization: band Chern numbers (ascending
/// energy) and the per-gap values as partial Chern sums, cross-checked
/// against the direct per-gap evaluation at a short evolution time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticReport {
    pub band_cherns: Vec<i64>,
    /// Entry j is the value in the gap above band j; the last entry is the
    /// wrap gap and is zero.
    pub gap_values: Vec<i64>,
    pub gap_angles: Vec<f64>,
}

/// Bulk-edge correspondence for a time-independent Hamiltonian: Chern
/// numbers of H's bands and per-gap values as their partial sums, obtained
/// by running the general algorithm over a short exact evolution.
pub fn static_specialize(
    model: &dyn DrivenBloch,
    dims: [usize; 2],
    tol: &Tolerances,
) -> Result<StaticReport, InvariantError> {
    let nb = model.bands();
    let layout = GridLayout::new([dims[0], dims[1], 2], [true, true, false]);
    let mut hmax: f64 = 0.0;
    let mut hams = Vec::with_capacity(dims[0] * dims[1]);
    for i1 in 0..dims[0] {
        for i2 in 0..dims[1] {
            let mu1 = (i1 as f64 + 0.5) / dims[0] as f64;
            let mu2 = (i2 as f64 + 0.5) / dims[1] as f64;
            let h = hermitize_checked(model.hamiltonian(mu1, mu2, 0.0), mu1, mu2, 0.0)?;
            hmax = hmax.max(frobenius(&h));
            hams.push(h);
        }
    }
    if hmax == 0.0 {
        return Err(InvariantError::GapViolation(
            "the static Hamiltonian vanishes; its bands are everywhere degenerate".into(),
        ));
    }
    // Short evolution: all eigenphases stay within +-1 radian, so bands
    // cannot wrap and gaps between them mirror the energy gaps.
    let t_eff = 1.0 / hmax;
    let mut samples = vec![CMatrix::zeros(0, 0); layout.len()];
    for i1 in 0..dims[0] {
        for i2 in 0..dims[1] {
            let h = &hams[i1 * dims[1] + i2];
            samples[layout.index([i1, i2, 0])] = exp_neg_i_h(h, t_eff / 2.0);
            samples[layout.index([i1, i2, 1])] = exp_neg_i_h(h, t_eff);
        }
    }
    let prop = PropagatorGrid {
        grid: UnitaryGrid::new(layout, nb, samples)?,
        substeps: 1,
    };
    let run = match FloquetRun::new(&prop, PI, tol) {
        Ok(run) => run,
        // A static band structure that cannot be matched or charge-balanced
        // on any grid has touching bands: report the gap failure it is.
        Err(InvariantError::GridTooCoarse(detail)) | Err(InvariantError::Inconsistency(detail)) => {
            return Err(InvariantError::GapViolation(format!(
                "static bands are not separable ({detail})"
            )));
        }
        Err(e) => return Err(e),
    };
    let gaps = match run.detect_gaps(1, nb) {
        Ok(g) => g,
        Err(InvariantError::GapViolation(detail)) => {
            return Err(InvariantError::GapViolation(format!(
                "static spectrum is gapless: {detail}"
            )))
        }
        Err(e) => return Err(e),
    };
    if !run.charged_cubes().is_empty() {
        return Err(InvariantError::Inconsistency(
            "static evolution produced charged cubes".into(),
        ));
    }
    // Order the gaps clockwise from the wrap anchor; with phases in
    // (-1, 1) radians the anchor is the arc through -1 and the clockwise
    // order matches ascending energy.
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a])); // descending angle
    let anchor_pos = order
        .iter()
        .position(|&j| gaps[j] > 1.5 || gaps[j] < -1.5)
        .unwrap_or(nb - 1);
    order.rotate_left((anchor_pos + 1) % nb);
    let gaps_cw: Vec<f64> = order.iter().map(|&j| gaps[j]).collect();

    let band_cherns = cw_band_cherns(&run, 1, &gaps_cw)?;
    let mut gap_values = Vec::with_capacity(nb);
    let mut acc = 0i64;
    for &c in &band_cherns {
        acc += c;
        gap_values.push(acc);
    }
    for (j, &g) in gaps_cw.iter().enumerate() {
        let direct = run.w3_xi(g)?;
        if direct.n != gap_values[j] {
            return Err(InvariantError::Inconsistency(format!(
                "static partial Chern sum {} disagrees with the direct per-gap value {} \
                 in gap {}",
                gap_values[j],
                direct.n,
                j + 1
            )));
        }
    }
    Ok(StaticReport {
        band_cherns,
        gap_values,
        gap_angles: gaps_cw,
    })
}
