//! Command-line front end: single-point criterion, grid scans with contour
//! extraction, output spectra, Monte Carlo validation and steady states.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optoepr_core::criterion::{epr_lhs, paradox_boundary, scan, AxisSpec, EprResult};
use optoepr_core::model::{
    steady_state, to_dimensionless, DimensionlessParams, PhysicalParams, SteadyState,
};
use optoepr_core::sde_oracle::{epr_product_estimate, SimConfig};
use optoepr_core::spectra::{
    build_state_space, inferred_variance_at, output_spectral_matrix, NoisePsd, StateSpace,
};

pub use config::{Config, ParamBlock, SimOverrides};
pub use error::{CliError, CliResult};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "OPTOEPR_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "optoepr",
    version,
    about = "EPR correlations from radiation pressure in a two-mode cavity"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the EPR criterion at one parameter point.
    Criterion {
        #[command(flatten)]
        point: PointArgs,
        /// Print a CSV header and row instead of key=value lines.
        #[arg(long)]
        csv: bool,
    },
    /// Tabulate the criterion on a (p_cal, t_cal) grid.
    Scan(ScanArgs),
    /// Output spectral matrix over a frequency range.
    Spectrum(SpectrumArgs),
    /// Monte Carlo check of both inference variances.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        /// Also write the report to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the radiation-pressure steady state.
    SteadyState {
        /// Physical config file.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Config file (key = value).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reduced power p_cal.
    #[arg(long = "p")]
    pub p: Option<f64>,
    /// Reduced temperature t_cal.
    #[arg(long = "t")]
    pub t: Option<f64>,
    /// Effective detuning in units of gamma_c.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Config file; only its delta is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub p_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p_max: f64,
    #[arg(long, default_value_t = 200)]
    pub p_points: usize,
    #[arg(long, default_value_t = 0.0)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub t_points: usize,
    /// Grid CSV destination.
    #[arg(long)]
    pub output: PathBuf,
    /// Write the lhs = 1 contour points to this CSV.
    #[arg(long)]
    pub contour: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Lowest sideband frequency (rad/s); default -5 gamma_c.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_min: Option<f64>,
    /// Highest sideband frequency (rad/s); default 5 gamma_c.
    #[arg(long, allow_negative_numbers = true)]
    pub omega_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub omega_points: usize,
    /// Homodyne phase (rad), common to both modes.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi: f64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Reads `OPTOEPR_THREADS` and sizes the global pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got '{raw}'"
        ))
    })?;
    // A pool may already exist when embedded in tests.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn run(cli: Cli, out: &mut impl Write) -> CliResult<()> {
    let text = match cli.command {
        Command::Criterion { point, csv } => cmd_criterion(&point, csv)?,
        Command::Scan(args) => cmd_scan(&args)?,
        Command::Spectrum(args) => cmd_spectrum(&args)?,
        Command::Simulate { point, output } => {
            let (report, failure) = cmd_simulate(&point)?;
            if let Some(path) = &output {
                write_file(path, &report)?;
            }
            emit(out, &report)?;
            return failure.map_or(Ok(()), Err);
        }
        Command::SteadyState { config } => cmd_steady_state(&config)?,
    };
    emit(out, &text)
}

fn emit(out: &mut impl Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

/// Shortest round-trip form, in exponent notation for very small or large
/// magnitudes; `nan` for NaN.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v != 0.0 && v.is_finite() && !(1e-4..1e9).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load(path: Option<&Path>) -> CliResult<Config> {
    path.map_or(Ok(Config::default()), Config::load)
}

/// A parameter point resolved to a linearized model.
struct ResolvedPoint {
    physical: PhysicalParams,
    steady: SteadyState,
    reduced: Option<DimensionlessParams>,
}

/// Steady state of a physical config: the `--delta` knob when given,
/// otherwise the self-consistent root if it is unique.
fn physical_steady_state(p: &PhysicalParams, delta: Option<f64>) -> CliResult<SteadyState> {
    if let Some(d) = delta {
        return Ok(SteadyState::at_detuning(p, d)?);
    }
    let mut roots = steady_state(p)?;
    if roots.len() != 1 {
        return Err(CliError::Config(format!(
            "{} steady states; choose one with --delta",
            roots.len()
        )));
    }
    Ok(roots.remove(0))
}

fn resolve_point(point: &PointArgs, cfg: &Config) -> CliResult<ResolvedPoint> {
    match &cfg.params {
        Some(ParamBlock::Physical(p)) => {
            if point.p.is_some() || point.t.is_some() {
                return Err(CliError::Config(
                    "--p/--t cannot be combined with a physical config".into(),
                ));
            }
            let steady = physical_steady_state(p, point.delta)?;
            let reduced = to_dimensionless(p, steady.delta).ok();
            Ok(ResolvedPoint {
                physical: *p,
                steady,
                reduced,
            })
        }
        block => {
            let dp = config::dimensionless_from(block.as_ref(), point.p, point.t, point.delta)?;
            // A reduced triple has many laboratory realizations; the damped
            // reference one is dynamically stable over the usual range.
            let physical = PhysicalParams::realize(&dp, &PhysicalParams::damped_reference())?;
            let steady = SteadyState::at_detuning(&physical, dp.delta)?;
            Ok(ResolvedPoint {
                physical,
                steady,
                reduced: Some(dp),
            })
        }
    }
}

fn model_for(point: &ResolvedPoint) -> CliResult<(StateSpace, NoisePsd)> {
    Ok((
        build_state_space(&point.physical, &point.steady)?,
        NoisePsd::from_params(&point.physical),
    ))
}

const CRITERION_COLUMNS: &str =
    "p_cal,t_cal,delta,eps0,eps_half_pi,var_x,var_y,lhs,paradox,gain_x,gain_y";

pub fn cmd_criterion(point: &PointArgs, csv: bool) -> CliResult<String> {
    let cfg = load(point.config.as_deref())?;
    let dp = match &cfg.params {
        Some(ParamBlock::Physical(p)) => {
            if point.p.is_some() || point.t.is_some() {
                return Err(CliError::Config(
                    "--p/--t cannot be combined with a physical config".into(),
                ));
            }
            let steady = physical_steady_state(p, point.delta)?;
            to_dimensionless(p, steady.delta)?
        }
        block => config::dimensionless_from(block.as_ref(), point.p, point.t, point.delta)?,
    };
    let r = epr_lhs(&dp)?;
    Ok(format_criterion(&dp, &r, csv))
}

fn format_criterion(dp: &DimensionlessParams, r: &EprResult, csv: bool) -> String {
    let values = [
        num(dp.p_cal),
        num(dp.t_cal),
        num(dp.delta),
        num(r.eps0),
        num(r.eps_half_pi),
        num(r.var_x),
        num(r.var_y),
        num(r.lhs),
        r.paradox.to_string(),
        num(r.gains.g_x),
        num(r.gains.g_y),
    ];
    if csv {
        format!("{CRITERION_COLUMNS}\n{}\n", values.join(","))
    } else {
        CRITERION_COLUMNS
            .split(',')
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

pub fn cmd_scan(args: &ScanArgs) -> CliResult<String> {
    let cfg = load(args.config.as_deref())?;
    let cfg_delta = match &cfg.params {
        Some(ParamBlock::Dimensionless { delta, .. }) => *delta,
        _ => None,
    };
    let delta = args
        .delta
        .or(cfg_delta)
        .ok_or_else(|| CliError::Config("delta not given (config key or --delta)".into()))?;
    let grid = scan(
        AxisSpec::new(args.p_min, args.p_max, args.p_points),
        AxisSpec::new(args.t_min, args.t_max, args.t_points),
        delta,
    )?;

    let mut csv = String::from("p_cal,t_cal,lhs,paradox\n");
    for (ti, t) in grid.t_axis.iter().enumerate() {
        for (pi, p) in grid.p_axis.iter().enumerate() {
            let v = grid.get(ti, pi);
            let (p, t) = (num(*p), num(*t));
            if v.is_nan() {
                writeln!(csv, "{p},{t},nan,nan").unwrap();
            } else {
                writeln!(csv, "{p},{t},{},{}", num(v), v < 1.0).unwrap();
            }
        }
    }
    write_file(&args.output, &csv)?;

    let mut summary = format!(
        "wrote {} cells to {}\n",
        grid.lhs_values.len(),
        args.output.display()
    );
    if let Some(path) = &args.contour {
        let points = paradox_boundary(&grid);
        let mut text = String::from("p_cal,t_cal\n");
        for (p, t) in &points {
            writeln!(text, "{},{}", num(*p), num(*t)).unwrap();
        }
        write_file(path, &text)?;
        writeln!(
            summary,
            "wrote {} contour points to {}",
            points.len(),
            path.display()
        )
        .unwrap();
    }
    Ok(summary)
}

fn linspace(min: f64, max: f64, n: usize) -> CliResult<Vec<f64>> {
    match n {
        0 => Err(CliError::Config("need at least one frequency".into())),
        1 if min == max => Ok(vec![min]),
        1 => Err(CliError::Config(
            "a single frequency needs omega-min == omega-max".into(),
        )),
        _ if !(min < max) => Err(CliError::Config(format!(
            "frequency range [{min}, {max}] must be increasing"
        ))),
        _ => Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> CliResult<String> {
    let cfg = load(args.point.config.as_deref())?;
    let point = resolve_point(&args.point, &cfg)?;
    let (model, noise) = model_for(&point)?;
    let gc = point.physical.gamma_c;
    let omegas = linspace(
        args.omega_min.unwrap_or(-5.0 * gc),
        args.omega_max.unwrap_or(5.0 * gc),
        args.omega_points,
    )?;
    let mut csv = String::from("omega,s11,s12,s22,inferred_variance,gain\n");
    for w in omegas {
        let s = output_spectral_matrix(&model, &noise, w, args.phi)?;
        let (var, gain) = inferred_variance_at(&model, &noise, w, args.phi)?;
        let row = [w, s.s11(), s.s12(), s.s22(), var, gain].map(num);
        writeln!(csv, "{}", row.join(",")).unwrap();
    }
    match &args.output {
        Some(path) => {
            write_file(path, &csv)?;
            Ok(format!("wrote spectrum to {}\n", path.display()))
        }
        None => Ok(csv),
    }
}

/// Report text and, when some |z| reaches 3, the validation failure.
pub fn cmd_simulate(point: &PointArgs) -> CliResult<(String, Option<CliError>)> {
    let cfg = load(point.config.as_deref())?;
    let resolved = resolve_point(point, &cfg)?;
    let (model, noise) = model_for(&resolved)?;
    let sim: SimConfig = cfg.sim.apply(SimConfig::default_for(&model));
    sim.validate(&model)?;

    let (var_x, _) = inferred_variance_at(&model, &noise, 0.0, 0.0)?;
    let (var_y, _) = inferred_variance_at(&model, &noise, 0.0, FRAC_PI_2)?;
    let e = epr_product_estimate(&model, &noise, &sim)?;
    let zx = e.amplitude.z_score(var_x);
    let zy = e.phase.z_score(var_y);

    let mut lines: Vec<(String, String)> = Vec::new();
    if let Some(dp) = resolved.reduced {
        lines.push(("p_cal".into(), num(dp.p_cal)));
        lines.push(("t_cal".into(), num(dp.t_cal)));
        lines.push(("delta".into(), num(dp.delta)));
    }
    lines.push(("dt_s".into(), num(sim.dt)));
    lines.push(("tau_s".into(), num(sim.tau)));
    lines.push(("burn_in_s".into(), num(sim.burn_in)));
    lines.push(("segments".into(), sim.n_segments.to_string()));
    lines.push(("trajectories".into(), sim.n_trajectories.to_string()));
    lines.push(("seed".into(), sim.seed.to_string()));
    for (name, analytic, est, z) in [("x", var_x, e.amplitude, zx), ("y", var_y, e.phase, zy)] {
        lines.push((format!("var_{name}_analytic"), num(analytic)));
        lines.push((format!("var_{name}_estimate"), num(est.mean)));
        lines.push((format!("var_{name}_std_err"), num(est.std_err)));
        lines.push((format!("var_{name}_z"), num(z)));
    }
    lines.push(("product_analytic".into(), num(var_x * var_y)));
    lines.push(("product_estimate".into(), num(e.product)));
    lines.push(("product_std_err".into(), num(e.product_err)));
    lines.push(("paradox_sigma".into(), num(e.sigmas_below_one())));
    let mut r: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let failure = (zx.abs() >= 3.0 || zy.abs() >= 3.0).then(|| {
        CliError::Validation(format!(
            "Monte Carlo disagrees with the spectra (z = {zx:.2}, {zy:.2})"
        ))
    });
    writeln!(
        r,
        "status={}",
        if failure.is_some() { "fail" } else { "ok" }
    )
    .unwrap();
    Ok((r, failure))
}

pub fn cmd_steady_state(path: &Path) -> CliResult<String> {
    let cfg = Config::load(path)?;
    let Some(ParamBlock::Physical(p)) = cfg.params else {
        return Err(CliError::Config(
            "steady-state needs a physical config".into(),
        ));
    };
    let mut text = String::from("delta,x_m,photon_number,stable,residual\n");
    for s in steady_state(&p)? {
        writeln!(
            text,
            "{},{},{},{},{}",
            num(s.delta),
            num(s.x),
            num(s.photon_number()),
            s.stable,
            num(s.residual)
        )
        .unwrap();
    }
    Ok(text)
}
