//! The `rabi` command line: simulate, spectrum, compare, fit, thermal.
//!
//! Exit codes: 0 success, 1 invalid input, 2 tolerance failure in `compare`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ModelConfig;
use crate::dynamics::{
    ground_state_probability, linspace, rabi_curve, reference_initial_state, thermal_initial_state,
    GeometryMode, DEFAULT_POINTS, DEFAULT_TMAX,
};
use crate::error::{Error, Result};
use crate::experiment::{fit_parameters, load_dataset, synthetic_dataset, FitConfig, FitParam};
use crate::linalg::max_abs_diff;
use crate::liouvillian::{CMatrix, Generator};
use crate::model::{thermal_weights, DressedLadder, HBAR, K_B};
use crate::oracle::{expm_trajectory, rk4_integrate, IntegratorConfig};
use crate::par::Execution;
use crate::spectral::{population_eigenpairs, SpectralSolution};

#[derive(Debug, Parser)]
#[command(
    name = "rabi",
    version,
    about = "Vacuum Rabi oscillation in a thermal, lossy cavity"
)]
struct Cli {
    /// Model configuration (key = value); reference parameters when omitted
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Seed for synthetic data
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground-state probability curve as CSV (t_s,t_eff_s,p_g)
    Simulate(SimulateArgs),
    /// Eigenvalues and population eigenvectors of the generator
    Spectrum(SpectrumArgs),
    /// Spectral solution against RK4 and matrix-exponential propagation
    Compare(CompareArgs),
    /// Fit decay parameters to measured or synthetic data
    Fit(FitArgs),
    /// Thermal photon weights and Boltzmann factors
    Thermal(ThermalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Initial {
    /// 0.95 |e,0⟩ + 0.05 |e,1⟩
    Reference,
    /// excited atom with the thermal field of the configured nbar
    Thermal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Effective,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    doublets: usize,
    /// End of the true-time grid, s
    #[arg(long, default_value_t = DEFAULT_TMAX)]
    tmax: f64,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Mode::Raw)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Initial::Reference)]
    initial: Initial,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 2)]
    doublets: usize,
    /// Also write the vectorised generator as row,col,re,im
    #[arg(long, value_name = "PATH")]
    dump_generator: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 2)]
    doublets: usize,
    #[arg(long, default_value_t = DEFAULT_TMAX)]
    tmax: f64,
    #[arg(long, default_value_t = 601)]
    points: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Initial::Reference)]
    initial: Initial,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with header t_eff_s,p_g[,sigma]
    #[arg(long, value_name = "PATH", required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Fit noisy data generated from the configuration instead
    #[arg(long, conflicts_with = "data")]
    synthetic: bool,
    /// Noise standard deviation of synthetic data
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// Effective-time span of synthetic data, s
    #[arg(long, default_value_t = 10e-3)]
    tmax: f64,
    #[arg(long, default_value_t = 4096)]
    points: usize,
    /// Save the synthetic data set
    #[arg(long, value_name = "PATH")]
    save_data: Option<PathBuf>,
    /// Comma-separated subset of gamma_cavity,gamma_long,epsilon,geometry_ratio
    #[arg(long, value_delimiter = ',', default_value = "gamma_cavity")]
    free: Vec<String>,
    #[arg(long, default_value_t = 2)]
    doublets: usize,
    #[arg(long, default_value_t = 17)]
    grid_points: usize,
    #[arg(long, default_value_t = 50)]
    max_cycles: usize,
}

#[derive(Debug, Args)]
struct ThermalArgs {
    /// Highest photon number listed
    #[arg(long, default_value_t = 2)]
    max_photons: usize,
}

/// `%.12e` as in C: twelve digits after the point, signed two-digit exponent.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Parse `argv` (program name first) and run, printing to the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = match &cli.config {
        Some(path) => ModelConfig::load(path)?,
        None => ModelConfig::default(),
    };
    let mut text = String::new();
    let code = match &cli.command {
        Command::Simulate(a) => simulate(&cfg, a, &mut text)?,
        Command::Spectrum(a) => spectrum(&cfg, a, &mut text)?,
        Command::Compare(a) => compare(&cfg, a, &mut text, err)?,
        Command::Fit(a) => fit(&cfg, a, cli.seed, &mut text, err)?,
        Command::Thermal(a) => thermal(&cfg, a, &mut text)?,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| Error::io(path, e))?,
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(code)
}

fn initial_state(cfg: &ModelConfig, ladder: &DressedLadder, initial: Initial) -> Result<CMatrix> {
    match initial {
        Initial::Reference => {
            if ladder.max_doublet() < 2 {
                return Err(Error::param(
                    "initial",
                    "the reference state needs at least two doublets",
                ));
            }
            reference_initial_state(ladder)
        }
        Initial::Thermal => thermal_initial_state(ladder, cfg.nbar, cfg.renormalize_thermal),
    }
}

fn time_grid(tmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(tmax > 0.0 && tmax.is_finite()) {
        return Err(Error::param(
            "tmax",
            format!("must be positive, got {tmax}"),
        ));
    }
    if points < 2 {
        return Err(Error::param(
            "points",
            format!("need at least 2, got {points}"),
        ));
    }
    Ok(linspace(0.0, tmax, points))
}

fn simulate(cfg: &ModelConfig, a: &SimulateArgs, text: &mut String) -> Result<i32> {
    let ladder = DressedLadder::new(&cfg.params, a.doublets)?;
    let rates = cfg.rates(a.doublets)?;
    let rho0 = initial_state(cfg, &ladder, a.initial)?;
    let grid = time_grid(a.tmax, a.points)?;
    let mode = match a.mode {
        Mode::Raw => GeometryMode::Raw,
        Mode::Effective => GeometryMode::Effective,
    };
    let curve = rabi_curve(&cfg.params, &rates, &rho0, &grid, mode)?;
    text.push_str("t_s,t_eff_s,p_g\n");
    for ((t, te), p) in curve.t.iter().zip(&curve.t_eff).zip(&curve.p_g) {
        text.push_str(&format!("{},{},{}\n", sci(*t), sci(*te), sci(*p)));
    }
    Ok(0)
}

fn spectrum(cfg: &ModelConfig, a: &SpectrumArgs, text: &mut String) -> Result<i32> {
    let ladder = DressedLadder::new(&cfg.params, a.doublets)?;
    let generator = Generator::new(&ladder, &cfg.rates(a.doublets)?)?;
    let pairs = population_eigenpairs(&generator)?;
    let labels: Vec<String> = ladder.levels().iter().map(|l| l.label()).collect();
    text.push_str("mode_id,type,re_lambda,im_lambda,level_a,level_b");
    for l in &labels {
        text.push_str(&format!(",re_{l},im_{l}"));
    }
    text.push('\n');
    let blank = ",".repeat(2 * labels.len());
    let mut id = 0;
    for p in &pairs {
        text.push_str(&format!(
            "{id},population,{},{},,",
            sci(p.eigenvalue.re),
            sci(p.eigenvalue.im)
        ));
        for c in p.components.iter() {
            text.push_str(&format!(",{},{}", sci(c.re), sci(c.im)));
        }
        text.push('\n');
        id += 1;
    }
    for m in crate::spectral::offdiagonal_eigenpairs(&generator) {
        text.push_str(&format!(
            "{id},coherence,{},{},{},{}{blank}\n",
            sci(m.eigenvalue.re),
            sci(m.eigenvalue.im),
            labels[m.row],
            labels[m.col]
        ));
        id += 1;
    }
    if let Some(path) = &a.dump_generator {
        dump_matrix(&generator.superoperator(), path)?;
    }
    Ok(0)
}

fn dump_matrix(m: &CMatrix, path: &Path) -> Result<()> {
    let mut text = String::from("row,col,re,im\n");
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                text.push_str(&format!("{r},{c},{},{}\n", sci(z.re), sci(z.im)));
            }
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn compare(
    cfg: &ModelConfig,
    a: &CompareArgs,
    text: &mut String,
    err: &mut dyn Write,
) -> Result<i32> {
    let ladder = DressedLadder::new(&cfg.params, a.doublets)?;
    let generator = Generator::new(&ladder, &cfg.rates(a.doublets)?)?;
    let rho0 = initial_state(cfg, &ladder, a.initial)?;
    let grid = time_grid(a.tmax, a.points)?;

    let solution = SpectralSolution::new(&generator, &rho0)?;
    let spectral: Vec<CMatrix> = grid.iter().map(|&t| solution.density_at(t, 1.0)).collect();
    let rk4 = rk4_integrate(
        &generator,
        &rho0,
        &grid,
        &IntegratorConfig::for_generator(&generator),
    )?;
    let expm = expm_trajectory(&generator, &rho0, &grid, Execution::default())?;

    let deviation = |x: &[CMatrix], y: &[CMatrix]| {
        x.iter()
            .zip(y)
            .fold((0.0f64, 0.0f64), |(drho, dpg), (p, q)| {
                let pg = (ground_state_probability(p, &ladder)
                    - ground_state_probability(q, &ladder))
                .abs();
                (drho.max(max_abs_diff(p, q)), dpg.max(pg))
            })
    };
    text.push_str("pair,max_abs_rho,max_abs_p_g\n");
    let mut worst: f64 = 0.0;
    for (name, x, y) in [
        ("spectral-rk4", &spectral, &rk4),
        ("spectral-expm", &spectral, &expm),
        ("rk4-expm", &rk4, &expm),
    ] {
        let (drho, dpg) = deviation(x, y);
        worst = worst.max(drho);
        text.push_str(&format!("{name},{},{}\n", sci(drho), sci(dpg)));
    }
    if worst > a.tolerance {
        let _ = writeln!(
            err,
            "deviation {} exceeds tolerance {}",
            sci(worst),
            sci(a.tolerance)
        );
        return Ok(2);
    }
    Ok(0)
}

fn fit(
    cfg: &ModelConfig,
    a: &FitArgs,
    seed: u64,
    text: &mut String,
    err: &mut dyn Write,
) -> Result<i32> {
    let free = a
        .free
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse())
        .collect::<Result<Vec<FitParam>>>()?;
    let data = match &a.data {
        Some(path) => load_dataset(path, cfg.params.geometry_ratio)?,
        None => {
            let t_eff = time_grid(a.tmax, a.points)?;
            let ds = synthetic_dataset(cfg, a.doublets, &t_eff, a.noise, seed)?;
            if let Some(path) = &a.save_data {
                ds.write(path)?;
            }
            ds
        }
    };
    let mut fc = FitConfig::new(cfg.clone(), &free);
    fc.n_doublets = a.doublets;
    fc.grid_points = a.grid_points;
    fc.max_cycles = a.max_cycles;
    let result = fit_parameters(&data, &fc)?;
    if !result.converged {
        let _ = writeln!(
            err,
            "warning: refinement stopped after {} cycles without converging",
            a.max_cycles
        );
    }
    text.push_str("parameter,value,unit\n");
    for (p, v) in &result.values {
        text.push_str(&format!("{},{},{}\n", p.name(), sci(*v), p.unit()));
    }
    text.push_str(&format!("chi2,{},1\n", sci(result.chi2)));
    text.push_str(&format!("dof,{},1\n", result.dof));
    text.push_str(&format!("q_energy,{},1\n", sci(result.q.energy)));
    text.push_str(&format!("q_field,{},1\n", sci(result.q.field)));
    text.push_str(&format!("converged,{},1\n", result.converged));
    Ok(0)
}

fn thermal(cfg: &ModelConfig, a: &ThermalArgs, text: &mut String) -> Result<i32> {
    let occ = thermal_weights(cfg.nbar, a.max_photons, cfg.renormalize_thermal)?;
    text.push_str("quantity,value\n");
    text.push_str(&format!("nbar,{}\n", sci(occ.nbar)));
    for (n, p) in occ.weights.iter().enumerate() {
        text.push_str(&format!("p{n},{}\n", sci(*p)));
    }
    text.push_str(&format!("deficit,{}\n", sci(occ.deficit)));
    let p = &cfg.params;
    let (w0, g) = (p.omega0, p.g);
    let kt = K_B * p.temperature;
    text.push_str(&format!(
        "hbar(omega0+g)/kT,{}\n",
        sci(HBAR * (w0 + g) / kt)
    ));
    text.push_str(&format!(
        "gamma_a/gamma1,{}\n",
        sci(p.boltzmann_factor(w0 + g))
    ));
    text.push_str(&format!(
        "gamma_b/gamma2,{}\n",
        sci(p.boltzmann_factor(w0 - g))
    ));
    text.push_str(&format!(
        "gamma_c/gamma3,{}\n",
        sci(p.boltzmann_factor(2.0 * g))
    ));
    text.push_str(&format!(
        "gamma_e/gamma5,{}\n",
        sci(p.boltzmann_factor(2.0 * 2f64.sqrt() * g))
    ));
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_scientific() {
        assert_eq!(sci(1.234567890123e-5), "1.234567890123e-05");
        assert_eq!(sci(0.0), "0.000000000000e+00");
        assert_eq!(sci(-2.5e123), "-2.500000000000e+123");
        assert_eq!(sci(1.0), "1.000000000000e+00");
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run_with(["rabi", "frobnicate"], &mut o, &mut e), 1);
        assert!(String::from_utf8(e).unwrap().contains("Usage"));
    }
}
