//! Built-in example maps and drives: the two SU(2) winding families, the
//! irradiated honeycomb model with its strip spectrum, a static two-band
//! Chern insulator and the zero drive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::InvariantError;
use crate::floquet::{exp_neg_i_h, DrivenBloch};
use crate::grid::{CMatrix, UnitaryGrid};
use crate::phase::wrap_principal;
use crate::spectral::eig_unitary;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn wrap01(x: f64) -> f64 {
    x - x.floor()
}

/// exp(i a.sigma / 2) in closed form: cos(|a|/2) 1 + i sin(|a|/2) (a_hat.sigma).
pub fn su2_exp(a: [f64; 3]) -> CMatrix {
    let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let cs = (r / 2.0).cos();
    // sin(r/2)/r, smooth through r = 0.
    let sc = if r < 1e-30 { 0.5 } else { (r / 2.0).sin() / r };
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c(cs, sc * a[2]),
            c(sc * a[1], sc * a[0]),
            c(-sc * a[1], sc * a[0]),
            c(cs, -sc * a[2]),
        ],
    )
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Su2SheetParams {
    pub winding: u32,
}

/// Square-to-sphere stretch: the center of the unit square goes to the north
/// pole, the boundary to the south pole, radially in the sup norm.
fn square_to_sphere(mu1: f64, mu2: f64) -> [f64; 3] {
    let u = 2.0 * mu1 - 1.0;
    let v = 2.0 * mu2 - 1.0;
    let r = u.abs().max(v.abs());
    if r == 0.0 {
        return [0.0, 0.0, 1.0];
    }
    if r >= 1.0 {
        return [0.0, 0.0, -1.0];
    }
    let theta = PI * r;
    let az = v.atan2(u);
    [theta.sin() * az.cos(), theta.sin() * az.sin(), theta.cos()]
}

/// First example map: a(mu) = 4 pi w mu3 f(mu1, mu2). Eigenphases are
/// exactly +-2 pi w mu3 and the invariant is 2w.
pub fn su2_sheet_map(params: &Su2SheetParams, mu: [f64; 3]) -> CMatrix {
    let f = square_to_sphere(wrap01(mu[0]), wrap01(mu[1]));
    let s = 4.0 * PI * params.winding as f64 * wrap01(mu[2]);
    su2_exp([s * f[0], s * f[1], s * f[2]])
}

pub fn su2_sheet_grid(params: &Su2SheetParams, dims: [usize; 3]) -> UnitaryGrid {
    UnitaryGrid::sample_map(dims, [true; 3], 2, |mu| su2_sheet_map(params, mu))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Su2BallParams {
    pub winding: u32,
}

/// Cube-to-ball stretch: x |x|_inf / |x|_2 with x = 2 mu - 1.
fn cube_to_ball(mu: [f64; 3]) -> [f64; 3] {
    let x = [
        2.0 * wrap01(mu[0]) - 1.0,
        2.0 * wrap01(mu[1]) - 1.0,
        2.0 * wrap01(mu[2]) - 1.0,
    ];
    let inf = x[0].abs().max(x[1].abs()).max(x[2].abs());
    if inf == 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let eu = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let s = inf / eu;
    [x[0] * s, x[1] * s, x[2] * s]
}

/// Second example map: a(mu) = 2 pi w g(mu), degenerate at the cube center;
/// the invariant is w.
pub fn su2_ball_map(params: &Su2BallParams, mu: [f64; 3]) -> CMatrix {
    let g = cube_to_ball(mu);
    let s = TAU * params.winding as f64;
    su2_exp([s * g[0], s * g[1], s * g[2]])
}

pub fn su2_ball_grid(params: &Su2BallParams, dims: [usize; 3]) -> UnitaryGrid {
    UnitaryGrid::sample_map(dims, [true; 3], 2, |mu| su2_ball_map(params, mu))
}

/// Nearest-neighbor bond vectors of the honeycomb lattice, unit bond length.
pub const HONEYCOMB_DELTAS: [[f64; 2]; 3] = [
    [0.0, 1.0],
    [0.866_025_403_784_438_6, -0.5],
    [-0.866_025_403_784_438_6, -0.5],
];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrapheneParams {
    /// Drive amplitude, dimensionless Peierls units.
    pub a0: f64,
    /// Drive frequency in units of the hopping.
    pub omega: f64,
}

fn peierls(a0: f64, omega: f64, t: f64) -> [f64; 2] {
    [a0 * (omega * t).sin(), a0 * (omega * t).cos()]
}

/// Bloch Hamiltonian of irradiated graphene over the rhombic reduced zone.
/// Hopping phases are referenced to the delta_1 bond so the matrix is
/// exactly periodic in mu1, mu2; the Peierls phases use the true bond
/// vectors.
pub fn graphene_bloch_h(params: &GrapheneParams, mu1: f64, mu2: f64, t: f64) -> CMatrix {
    let a = peierls(params.a0, params.omega, t);
    let mut f = Complex64::new(0.0, 0.0);
    let exps = [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, -TAU * mu2),
        Complex64::from_polar(1.0, -TAU * mu1),
    ];
    for (delta, bloch) in HONEYCOMB_DELTAS.iter().zip(exps) {
        let phase = a[0] * delta[0] + a[1] * delta[1];
        f += Complex64::from_polar(1.0, phase) * bloch;
    }
    CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), f, f.conj(), c(0.0, 0.0)])
}

#[derive(Debug, Clone, Copy)]
pub struct GrapheneModel {
    pub params: GrapheneParams,
}

impl GrapheneModel {
    pub fn new(a0: f64, omega: f64) -> Self {
        Self {
            params: GrapheneParams { a0, omega },
        }
    }
}

impl DrivenBloch for GrapheneModel {
    fn bands(&self) -> usize {
        2
    }

    fn period(&self) -> f64 {
        TAU / self.params.omega
    }

    fn hamiltonian(&self, mu1: f64, mu2: f64, t: f64) -> CMatrix {
        graphene_bloch_h(&self.params, mu1, mu2, t)
    }
}

/// The zero drive: U stays the identity.
#[derive(Debug, Clone, Copy)]
pub struct ZeroModel {
    pub bands: usize,
}

impl DrivenBloch for ZeroModel {
    fn bands(&self) -> usize {
        self.bands
    }

    fn period(&self) -> f64 {
        1.0
    }

    fn hamiltonian(&self, _mu1: f64, _mu2: f64, _t: f64) -> CMatrix {
        CMatrix::zeros(self.bands, self.bands)
    }
}

/// Static two-band Chern insulator,
/// H = sin(2 pi mu1) sx + sin(2 pi mu2) sy + (mass + cos + cos) sz.
/// With the default mass the lower band carries Chern number +1.
#[derive(Debug, Clone, Copy)]
pub struct StaticChernModel {
    pub mass: f64,
    pub period: f64,
}

impl Default for StaticChernModel {
    fn default() -> Self {
        Self {
            mass: 1.0,
            period: 0.75,
        }
    }
}

impl DrivenBloch for StaticChernModel {
    fn bands(&self) -> usize {
        2
    }

    fn period(&self) -> f64 {
        self.period
    }

    fn hamiltonian(&self, mu1: f64, mu2: f64, _t: f64) -> CMatrix {
        let dx = (TAU * mu1).sin();
        let dy = (TAU * mu2).sin();
        let dz = self.mass + (TAU * mu1).cos() + (TAU * mu2).cos();
        CMatrix::from_row_slice(2, 2, &[c(dz, 0.0), c(dx, -dy), c(dx, dy), c(-dz, 0.0)])
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StripParams {
    pub a0: f64,
    pub omega: f64,
    /// Unit cells across the strip; the matrix dimension is twice this.
    pub width: usize,
    /// Momentum samples along the strip.
    pub k_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StripRow {
    /// Bloch phase per x-period, in [0, 2 pi).
    pub kx: f64,
    /// Quasienergy phases eps T in (-pi, pi], ascending.
    pub quasienergies_t: Vec<f64>,
    /// Weight difference bottom-edge minus top-edge per state, in [-1, 1];
    /// distinguishes which edge a chiral mode lives on.
    pub edge_weights: Vec<f64>,
    /// Total weight on the outermost cells per state, in [0, 1]; near 1 for
    /// edge modes (including hybridized pairs), near 0 for bulk states.
    pub edge_localization: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StripSpectrum {
    pub width: usize,
    pub rows: Vec<StripRow>,
}

/// Strip Hamiltonian with zigzag edges along x: cells m = 0..width-1 hold
/// sites (A_m, B_m) at basis indices (2m, 2m+1). The A_m -> B_m bond is
/// delta_1; A_m reaches B_{m-1} through delta_3 in the same x-cell and
/// through delta_2 one cell over.
fn strip_hamiltonian(params: &StripParams, theta: f64, t: f64) -> CMatrix {
    let w = params.width;
    let a = peierls(params.a0, params.omega, t);
    let phase = |j: usize| {
        let d = HONEYCOMB_DELTAS[j];
        Complex64::from_polar(1.0, a[0] * d[0] + a[1] * d[1])
    };
    let bloch = Complex64::from_polar(1.0, theta);
    let mut m = CMatrix::zeros(2 * w, 2 * w);
    for cell in 0..w {
        // Hop from A_cell into B_cell.
        m[(2 * cell + 1, 2 * cell)] += phase(0);
        if cell >= 1 {
            // Hops from A_cell down into B_{cell-1}.
            m[(2 * (cell - 1) + 1, 2 * cell)] += phase(2);
            m[(2 * (cell - 1) + 1, 2 * cell)] += phase(1) * bloch;
        }
    }
    let adj = m.adjoint();
    m + adj
}

/// Quasienergy spectrum of the finite strip: propagate one period per
/// momentum, diagonalize U(k, T) and return eps T = -arg d in (-pi, pi].
pub fn strip_quasienergy_spectrum(
    params: &StripParams,
    substeps: Option<usize>,
) -> Result<StripSpectrum, InvariantError> {
    if params.width < 2 {
        return Err(InvariantError::InvalidInput(
            "strip width must be at least two cells".into(),
        ));
    }
    if params.k_samples < 2 {
        return Err(InvariantError::InvalidInput(
            "strip needs at least two momentum samples".into(),
        ));
    }
    struct StripDrive<'a>(&'a StripParams);
    impl DrivenBloch for StripDrive<'_> {
        fn bands(&self) -> usize {
            2 * self.0.width
        }
        fn period(&self) -> f64 {
            TAU / self.0.omega
        }
        fn hamiltonian(&self, mu1: f64, _mu2: f64, t: f64) -> CMatrix {
            strip_hamiltonian(self.0, TAU * mu1, t)
        }
    }
    let drive = StripDrive(params);
    // Plot-grade integration budget; the bulk invariants carry the
    // quantitative checks.
    let steps = substeps.unwrap_or_else(|| {
        let mut hmax: f64 = 0.0;
        for k in 0..17 {
            let h = strip_hamiltonian(params, TAU * k as f64 / 16.0, drive.period() * k as f64 / 16.0);
            hmax = hmax.max(h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        }
        ((hmax * drive.period() / 0.1).ceil() as usize).max(64)
    });
    let period = drive.period();
    let dt = period / steps as f64;

    use rayon::prelude::*;
    let rows: Vec<Result<StripRow, InvariantError>> = (0..params.k_samples)
        .into_par_iter()
        .map(|jk| {
            let theta = TAU * jk as f64 / params.k_samples as f64;
            let mut u = CMatrix::identity(2 * params.width, 2 * params.width);
            for k in 0..steps {
                let t_mid = (k as f64 + 0.5) * dt;
                let h = strip_hamiltonian(params, theta, t_mid);
                u = exp_neg_i_h(&h, dt) * u;
            }
            let (vals, basis) = eig_unitary(&u).map_err(|detail| {
                InvariantError::Diagonalization {
                    point: [jk, 0, 0],
                    detail,
                }
            })?;
            let dim = 2 * params.width;
            let edge_cells = 4.min(dim / 2);
            let mut states: Vec<(f64, f64, f64)> = (0..dim)
                .map(|b| {
                    let v = basis.column(b);
                    let bottom: f64 = (0..edge_cells).map(|i| v[i].norm_sqr()).sum();
                    let top: f64 = (dim - edge_cells..dim).map(|i| v[i].norm_sqr()).sum();
                    (wrap_principal(-vals[b].arg()), bottom - top, bottom + top)
                })
                .collect();
            states.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(StripRow {
                kx: theta,
                quasienergies_t: states.iter().map(|s| s.0).collect(),
                edge_weights: states.iter().map(|s| s.1).collect(),
                edge_localization: states.iter().map(|s| s.2).collect(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(StripSpectrum {
        width: params.width,
        rows,
    })
}
