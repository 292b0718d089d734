//! Command line front end: model selection, grid and integration
//! configuration, invariant reports, convergence sweeps, and plot-data
//! emission.
//!
//! Exit status: 0 = admissible converged run, 2 = admissibility failure,
//! 3 = gap violation or ambiguous tracking, 4 = I/O or format error.

mod gridfile;
mod report;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use gridfile::UnitaryGridFile;
use w3inv::engine::{self, evaluate_w3, w3_direct_central_difference, W3Report};
use w3inv::floquet::{
    default_substeps, evaluate_gaps, propagate, track_gaps, DrivenBloch, FloquetReport,
    FloquetRun, GapTrack,
};
use w3inv::models::{
    strip_quasienergy_spectrum, su2_ball_grid, su2_sheet_grid, GrapheneModel, StaticChernModel,
    StripParams, Su2BallParams, Su2SheetParams, ZeroModel,
};
use w3inv::spectral::diagonalize_grid;
use w3inv::{InvariantError, Tolerances, UnitaryGrid};

const EXIT_INADMISSIBLE: u8 = 2;
const EXIT_GAP: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "w3inv",
    about = "Topological invariants of sampled unitary maps on the 3-torus \
             and per-gap edge-state counts of Floquet-Bloch propagators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate W3, the axis windings and slice Chern numbers of a periodic map.
    W3(W3Args),
    /// Per-gap invariants of a driven Bloch model over one period.
    Floquet(FloquetArgs),
    /// Track per-gap values slice by slice across the evolution.
    Track(TrackArgs),
    /// Sweep the grid size and compare against the central-difference baseline.
    Convergence(ConvergenceArgs),
    /// Quasienergy spectrum of a finite strip with zigzag edges.
    Strip(StripArgs),
}

#[derive(Args, Clone, Serialize)]
struct ToleranceArgs {
    /// Maximum accepted deviation from unitarity on input samples.
    #[arg(long, default_value_t = 1e-10)]
    eps_unitary: f64,
    /// Maximum accepted eigen-residual after diagonalization.
    #[arg(long, default_value_t = 1e-9)]
    eps_residual: f64,
    /// Integer-residual tolerance for the invariant sums.
    #[arg(long, default_value_t = 1e-6)]
    eps_int: f64,
    /// Matching floor for band overlaps.
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    tau_match: f64,
    /// Minimum arc distance between a gap position and any eigenvalue.
    #[arg(long, default_value_t = 1e-6)]
    gap_margin: f64,
}

impl ToleranceArgs {
    fn to_tolerances(&self) -> Tolerances {
        Tolerances {
            unitarity: self.eps_unitary,
            eigen_residual: self.eps_residual,
            integer_residual: self.eps_int,
            match_floor: self.tau_match,
            gap_margin: self.gap_margin,
        }
    }
}

#[derive(Args)]
struct W3Args {
    /// Built-in map: su2-sheet or su2-ball.
    #[arg(long, conflicts_with = "input")]
    model: Option<String>,
    /// Winding parameter of the built-in maps.
    #[arg(long, default_value_t = 1)]
    w: u32,
    /// Grid size: N or N1xN2xN3.
    #[arg(long, default_value = "6")]
    grid: String,
    /// Read the sampled grid from a JSON file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Branch cut angle of the eigenvalue logarithm, radians ("pi" allowed).
    #[arg(long, default_value = "pi")]
    branch_cut: String,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write charged-cube coordinates as CSV.
    #[arg(long)]
    cubes_csv: Option<PathBuf>,
    /// Also write the sampled grid itself as a JSON grid file.
    #[arg(long)]
    dump_grid: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct FloquetArgs {
    /// Driven model: graphene, zero, or static-chern.
    #[arg(long, default_value = "graphene")]
    model: String,
    #[command(flatten)]
    drive: DriveArgs,
    /// Grid size: N or N1xN2xN3 (momentum x momentum x time slices).
    #[arg(long, default_value = "6")]
    grid: String,
    /// Integration substeps per time slice (default: automatic).
    #[arg(long)]
    substeps: Option<usize>,
    /// Gap positions on the unit circle, comma-separated angles ("pi" allowed).
    #[arg(long, required = true, value_delimiter = ',')]
    gaps: Vec<String>,
    /// Branch cut angle of the eigenvalue logarithm.
    #[arg(long, default_value = "pi")]
    branch_cut: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct TrackArgs {
    /// Driven model: graphene, zero, or static-chern.
    #[arg(long, default_value = "graphene")]
    model: String,
    #[command(flatten)]
    drive: DriveArgs,
    #[arg(long, default_value = "6")]
    grid: String,
    #[arg(long)]
    substeps: Option<usize>,
    /// Initial gap positions (default: auto-detected at the first slice).
    #[arg(long, value_delimiter = ',')]
    gaps: Option<Vec<String>>,
    #[arg(long, default_value = "pi")]
    branch_cut: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Built-in map: su2-sheet or su2-ball.
    #[arg(long, default_value = "su2-sheet")]
    model: String,
    #[arg(long, default_value_t = 2)]
    w: u32,
    /// Grid sizes to sweep, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "6,8,10,12,14,16,18,20")]
    grids: Vec<usize>,
    #[arg(long, default_value = "pi")]
    branch_cut: String,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct StripArgs {
    /// Drive amplitude.
    #[arg(long, default_value_t = 0.7)]
    a0: f64,
    /// Drive frequency.
    #[arg(long, default_value_t = 3.5)]
    omega: f64,
    /// Unit cells across the strip.
    #[arg(long, default_value_t = 20)]
    width: usize,
    /// Momentum samples along the strip.
    #[arg(long, default_value_t = 64)]
    k_samples: usize,
    /// Integration substeps over the whole period (default: automatic).
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct DriveArgs {
    /// Drive amplitude (graphene).
    #[arg(long, default_value_t = 0.7)]
    a0: f64,
    /// Drive frequency (graphene).
    #[arg(long, default_value_t = 3.5)]
    omega: f64,
    /// Band count (zero model).
    #[arg(long, default_value_t = 2)]
    bands: usize,
    /// Mass term (static-chern model).
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Evolution period (zero and static-chern models).
    #[arg(long, default_value_t = 0.75)]
    period: f64,
}

fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "pi" | "+pi" => return Ok(PI),
        "-pi" => return Ok(-PI),
        _ => {}
    }
    if let Some(head) = t.strip_suffix("pi") {
        let factor: f64 = head.parse().with_context(|| format!("bad angle '{s}'"))?;
        return Ok(factor * PI);
    }
    t.parse().with_context(|| format!("bad angle '{s}'"))
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = s.split('x').collect();
    let dims: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad grid spec '{s}'"))?;
    let dims = match dims.as_slice() {
        [n] => [*n, *n, *n],
        [a, b, c] => [*a, *b, *c],
        _ => return Err(anyhow!("grid spec must be N or N1xN2xN3, got '{s}'")),
    };
    if dims.iter().any(|&n| n < 2) {
        return Err(anyhow!("grid dims must be at least 2 per axis"));
    }
    Ok(dims)
}

fn build_drive(model: &str, drive: &DriveArgs) -> Result<Box<dyn DrivenBloch>> {
    match model {
        "graphene" => Ok(Box::new(GrapheneModel::new(drive.a0, drive.omega))),
        "zero" => Ok(Box::new(ZeroModel { bands: drive.bands })),
        "static-chern" => Ok(Box::new(StaticChernModel {
            mass: drive.mass,
            period: drive.period,
        })),
        other => Err(anyhow!(
            "unknown driven model '{other}' (expected graphene, zero, or static-chern)"
        )),
    }
}

fn exit_code_for(err: &InvariantError) -> u8 {
    match err {
        InvariantError::GridTooCoarse(_) => EXIT_INADMISSIBLE,
        InvariantError::GapViolation(_) | InvariantError::TrackingAmbiguous(_) => EXIT_GAP,
        InvariantError::InvalidInput(_)
        | InvariantError::NotUnitary { .. }
        | InvariantError::NotPeriodic { .. } => EXIT_IO,
        _ => 1,
    }
}

#[derive(Serialize)]
struct ConfigEcho<T: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    details: T,
    tolerances: Tolerances,
}

#[derive(Serialize)]
struct W3Payload {
    invariants: W3Report,
    config_echo: ConfigEcho<W3Echo>,
}

#[derive(Serialize)]
struct W3Echo {
    source: String,
    dims: [usize; 3],
    branch_cut: f64,
}

fn coarseness_advice(grid: &UnitaryGrid, tol: &Tolerances) -> Option<f64> {
    let spec = diagonalize_grid(grid, tol).ok()?;
    Some(engine::arc_step_estimate(&spec))
}

fn cmd_w3(args: &W3Args) -> Result<u8> {
    let tol = args.tolerances.to_tolerances();
    let branch_cut = parse_angle(&args.branch_cut)?;
    let (grid, source) = match (&args.input, &args.model) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let file: UnitaryGridFile =
                serde_json::from_str(&text).context("parsing grid file")?;
            (file.into_grid()?, format!("file:{}", path.display()))
        }
        (None, Some(model)) => match model.as_str() {
            "su2-sheet" => (
                su2_sheet_grid(&Su2SheetParams { winding: args.w }, parse_dims(&args.grid)?),
                format!("su2-sheet w={}", args.w),
            ),
            "su2-ball" => (
                su2_ball_grid(&Su2BallParams { winding: args.w }, parse_dims(&args.grid)?),
                format!("su2-ball w={}", args.w),
            ),
            other => {
                return Err(anyhow!(
                    "unknown map model '{other}' (expected su2-sheet or su2-ball)"
                ))
            }
        },
        (None, None) => return Err(anyhow!("either --model or --input is required")),
    };
    let dims = grid.layout().dims;
    if let Some(path) = &args.dump_grid {
        let file = UnitaryGridFile::from_grid(&grid);
        report::emit(Some(path), &serde_json::to_string(&file)?)?;
    }
    let invariants = match evaluate_w3(&grid, branch_cut, &tol) {
        Ok(r) => r,
        Err(e @ InvariantError::GridTooCoarse(_)) => {
            eprintln!("error: {e}");
            if let Some(step) = coarseness_advice(&grid, &tol) {
                eprintln!(
                    "advice: eigenvalue arc steps between adjacent points reach at least \
                     {step:.3} rad (admissible runs stay below pi/2 ~ 1.571); refine the grid"
                );
            }
            return Ok(EXIT_INADMISSIBLE);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(exit_code_for(&e));
        }
    };
    let admissible = invariants.diagnostics.admissible;
    let max_dphi = invariants.diagnostics.max_dphi;
    if let Some(csv) = &args.cubes_csv {
        let mut text = String::from("i1,i2,i3,band,partner,charge,big_m\n");
        for c in &invariants.charged_cubes {
            text += &format!(
                "{},{},{},{},{},{},{}\n",
                c.cube[0], c.cube[1], c.cube[2], c.band, c.partner, c.charge, c.big_m
            );
        }
        report::emit(Some(csv), text.trim_end())?;
    }
    let payload = W3Payload {
        invariants,
        config_echo: ConfigEcho {
            command: "w3",
            details: W3Echo {
                source,
                dims,
                branch_cut,
            },
            tolerances: tol,
        },
    };
    report::emit_json(args.out.as_deref(), payload)?;
    if admissible {
        Ok(0)
    } else {
        eprintln!(
            "warning: run is not admissible (max eigenvalue arc step {max_dphi:.3} rad is \
             not below pi/2); refine the grid"
        );
        Ok(EXIT_INADMISSIBLE)
    }
}

#[derive(Serialize)]
struct FloquetPayload {
    gaps: FloquetReport,
    config_echo: ConfigEcho<DriveEcho>,
}

#[derive(Serialize)]
struct DriveEcho {
    model: String,
    #[serde(flatten)]
    drive: DriveArgs,
    dims: [usize; 3],
    substeps: usize,
    branch_cut: f64,
    gap_angles: Vec<f64>,
}

fn cmd_floquet(args: &FloquetArgs) -> Result<u8> {
    let tol = args.tolerances.to_tolerances();
    let branch_cut = parse_angle(&args.branch_cut)?;
    let dims = parse_dims(&args.grid)?;
    let gap_angles: Vec<f64> = args
        .gaps
        .iter()
        .map(|s| parse_angle(s))
        .collect::<Result<_>>()?;
    let model = build_drive(&args.model, &args.drive)?;
    let substeps = args
        .substeps
        .unwrap_or_else(|| default_substeps(model.as_ref(), dims[2]));
    let run = FloquetRun::new(&propagate(model.as_ref(), dims, substeps)?, branch_cut, &tol)?;
    let gaps = evaluate_gaps(&run, &gap_angles)?;
    let admissible = gaps.admissible;
    let payload = FloquetPayload {
        gaps,
        config_echo: ConfigEcho {
            command: "floquet",
            details: DriveEcho {
                model: args.model.clone(),
                drive: args.drive.clone(),
                dims,
                substeps,
                branch_cut,
                gap_angles,
            },
            tolerances: tol,
        },
    };
    report::emit_json(args.out.as_deref(), payload)?;
    Ok(if admissible { 0 } else { EXIT_INADMISSIBLE })
}

#[derive(Serialize)]
struct TrackPayload {
    track: GapTrack,
    config_echo: ConfigEcho<DriveEcho>,
}

fn cmd_track(args: &TrackArgs) -> Result<u8> {
    let tol = args.tolerances.to_tolerances();
    let branch_cut = parse_angle(&args.branch_cut)?;
    let dims = parse_dims(&args.grid)?;
    let gap_angles: Option<Vec<f64>> = match &args.gaps {
        None => None,
        Some(list) => Some(list.iter().map(|s| parse_angle(s)).collect::<Result<_>>()?),
    };
    let model = build_drive(&args.model, &args.drive)?;
    let substeps = args
        .substeps
        .unwrap_or_else(|| default_substeps(model.as_ref(), dims[2]));
    let track = track_gaps(
        model.as_ref(),
        dims,
        substeps,
        gap_angles.as_deref(),
        branch_cut,
        &tol,
    )?;
    let payload = TrackPayload {
        track,
        config_echo: ConfigEcho {
            command: "track",
            details: DriveEcho {
                model: args.model.clone(),
                drive: args.drive.clone(),
                dims,
                substeps,
                branch_cut,
                gap_angles: gap_angles.unwrap_or_default(),
            },
            tolerances: tol,
        },
    };
    report::emit_json(args.out.as_deref(), payload)?;
    Ok(0)
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<u8> {
    let tol = args.tolerances.to_tolerances();
    let branch_cut = parse_angle(&args.branch_cut)?;
    let mut csv = String::from("n,w3_hat,w3_residual,max_dphi,admissible,baseline,note\n");
    for &n in &args.grids {
        let grid = match args.model.as_str() {
            "su2-sheet" => su2_sheet_grid(&Su2SheetParams { winding: args.w }, [n; 3]),
            "su2-ball" => su2_ball_grid(&Su2BallParams { winding: args.w }, [n; 3]),
            other => return Err(anyhow!("unknown map model '{other}'")),
        };
        let baseline = w3_direct_central_difference(&grid)?;
        match evaluate_w3(&grid, branch_cut, &tol) {
            Ok(r) => {
                csv += &format!(
                    "{n},{},{:.3e},{:.6},{},{:.8},\n",
                    r.w3,
                    r.diagnostics.w3_residual,
                    r.diagnostics.max_dphi,
                    r.diagnostics.admissible,
                    baseline
                );
            }
            Err(e) => {
                csv += &format!("{n},,,,false,{baseline:.8},\"{e}\"\n");
            }
        }
    }
    report::emit(args.out.as_deref(), csv.trim_end())?;
    Ok(0)
}

fn cmd_strip(args: &StripArgs) -> Result<u8> {
    let params = StripParams {
        a0: args.a0,
        omega: args.omega,
        width: args.width,
        k_samples: args.k_samples,
    };
    let spectrum = strip_quasienergy_spectrum(&params, args.substeps)?;
    let mut csv = String::from("kx,band,quasienergy_t,edge_weight,edge_localization\n");
    for row in &spectrum.rows {
        for (b, &e) in row.quasienergies_t.iter().enumerate() {
            csv += &format!(
                "{:.8},{b},{e:.8},{:.6},{:.6}\n",
                row.kx, row.edge_weights[b], row.edge_localization[b]
            );
        }
    }
    report::emit(args.out.as_deref(), csv.trim_end())?;
    Ok(0)
}

fn main() -> ExitCode {
    // Usage errors map onto the format-error status; help and version keep
    // their conventional zero exit.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_IO);
        }
    };
    let outcome = match &cli.command {
        Command::W3(args) => cmd_w3(args),
        Command::Floquet(args) => cmd_floquet(args),
        Command::Track(args) => cmd_track(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Strip(args) => cmd_strip(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<InvariantError>() {
                Some(inv) => exit_code_for(inv),
                None => EXIT_IO,
            };
            ExitCode::from(code)
        }
    }
}
