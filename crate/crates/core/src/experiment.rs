//! Measured ground-state probabilities, model residuals and parameter fits.
//!
//! Data are given against the effective time `t_eff = r·t`; the model is
//! evaluated at the true time `t = t_eff/r` in effective mode, so coherence
//! phases follow `t_eff` while decays run in `t`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::dynamics::{rabi_curve_with, thermal_initial_state, GeometryMode, RabiCurve};
use crate::error::{Error, Result};
use crate::model::DressedLadder;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataRow {
    pub t_eff: f64,
    pub p_g: f64,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    rows: Vec<DataRow>,
    /// `t_eff / geometry_ratio` per row.
    t: Vec<f64>,
    geometry_ratio: f64,
    source: Option<PathBuf>,
}

impl DataSet {
    /// Rows are sorted by `t_eff`; repeated times are rejected.
    pub fn new(mut rows: Vec<DataRow>, geometry_ratio: f64) -> Result<Self> {
        if !(geometry_ratio > 0.0 && geometry_ratio.is_finite()) {
            return Err(Error::param(
                "geometry_ratio",
                format!("must be positive, got {geometry_ratio}"),
            ));
        }
        if rows.is_empty() {
            return Err(Error::NoData("dataset".into()));
        }
        for r in &rows {
            check_row(r).map_err(|reason| Error::param("dataset", reason))?;
        }
        rows.sort_by(|a, b| a.t_eff.total_cmp(&b.t_eff));
        if let Some(w) = rows.windows(2).find(|w| w[0].t_eff == w[1].t_eff) {
            return Err(Error::param(
                "dataset",
                format!("repeated time t_eff = {:e}", w[0].t_eff),
            ));
        }
        let t = rows.iter().map(|r| r.t_eff / geometry_ratio).collect();
        Ok(Self {
            rows,
            t,
            geometry_ratio,
            source: None,
        })
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// True times.
    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn geometry_ratio(&self) -> f64 {
        self.geometry_ratio
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// Same rows with the true-time column recomputed for another ratio.
    pub fn rescaled(&self, geometry_ratio: f64) -> Result<Self> {
        let mut out = Self::new(self.rows.clone(), geometry_ratio)?;
        out.source = self.source.clone();
        Ok(out)
    }

    pub fn has_sigma(&self) -> bool {
        self.rows.iter().any(|r| r.sigma.is_some())
    }

    /// CSV with header `t_eff_s,p_g[,sigma]`. Values are written in shortest
    /// round-trip form so that loading gives back identical numbers.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let sigma = self.has_sigma();
        let mut text = String::from(if sigma {
            "t_eff_s,p_g,sigma\n"
        } else {
            "t_eff_s,p_g\n"
        });
        for r in &self.rows {
            text += &format!("{:e},{:e}", r.t_eff, r.p_g);
            if sigma {
                text += &format!(",{:e}", r.sigma.unwrap_or(1.0));
            }
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn check_row(r: &DataRow) -> std::result::Result<(), String> {
    if !(r.t_eff >= 0.0 && r.t_eff.is_finite()) {
        return Err(format!(
            "t_eff must be finite and nonnegative, got {}",
            r.t_eff
        ));
    }
    if !(0.0..=1.0).contains(&r.p_g) {
        return Err(format!("p_g = {} lies outside [0, 1]", r.p_g));
    }
    if let Some(s) = r.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(format!("sigma must be positive, got {s}"));
        }
    }
    Ok(())
}

/// Read `t_eff_s,p_g[,sigma]` rows. Blank lines and `#` comments are skipped.
pub fn load_dataset(path: impl AsRef<Path>, geometry_ratio: f64) -> Result<DataSet> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: name.clone(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| Error::NoData(name.clone()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_sigma = match columns.as_slice() {
        ["t_eff_s", "p_g"] => false,
        ["t_eff_s", "p_g", "sigma"] => true,
        _ => {
            return Err(parse_err(
                header_line,
                format!("expected header `t_eff_s,p_g[,sigma]`, got `{header}`"),
            ))
        }
    };
    let mut rows = Vec::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| parse_err(line, format!("`{}` is not a number", fields[k])))
        };
        let row = DataRow {
            t_eff: num(0)?,
            p_g: num(1)?,
            sigma: if with_sigma { Some(num(2)?) } else { None },
        };
        check_row(&row).map_err(|reason| parse_err(line, reason))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoData(name));
    }
    let mut ds = DataSet::new(rows, geometry_ratio)?;
    ds.source = Some(path.to_path_buf());
    Ok(ds)
}

/// `Σ ((p_model − p_data)/σ)²`, the model linearly interpolated in true time.
pub fn chi2(dataset: &DataSet, curve: &RabiCurve) -> Result<f64> {
    let mut sum = 0.0;
    for (row, &t) in dataset.rows.iter().zip(&dataset.t) {
        let r = (curve.interpolate(t)? - row.p_g) / row.sigma.unwrap_or(1.0);
        sum += r * r;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FitParam {
    /// `γ₁ = γ₂ = γ₄ = γ₆ = γ₇ = γ₈`
    GammaCavity,
    /// `γ₃ = γ₅`, with `γ_c`, `γ_e` from detailed balance
    GammaLong,
    /// `γ_a = εγ₁`, `γ_b = εγ₂`
    Epsilon,
    GeometryRatio,
}

impl FitParam {
    pub fn name(self) -> &'static str {
        match self {
            FitParam::GammaCavity => "gamma_cavity",
            FitParam::GammaLong => "gamma_long",
            FitParam::Epsilon => "epsilon",
            FitParam::GeometryRatio => "geometry_ratio",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            FitParam::GammaCavity | FitParam::GammaLong => "rad/s",
            FitParam::Epsilon | FitParam::GeometryRatio => "1",
        }
    }

    pub fn get(self, cfg: &ModelConfig) -> f64 {
        match self {
            FitParam::GammaCavity => cfg.gamma_cavity(),
            FitParam::GammaLong => cfg.gamma_long(),
            FitParam::Epsilon => cfg.epsilon.unwrap_or_else(|| {
                cfg.params
                    .boltzmann_factor(cfg.params.omega0 + cfg.params.g)
            }),
            FitParam::GeometryRatio => cfg.params.geometry_ratio,
        }
    }

    pub fn set(self, cfg: &mut ModelConfig, value: f64) {
        match self {
            FitParam::GammaCavity => cfg.set_gamma_cavity(value),
            FitParam::GammaLong => cfg.set_gamma_long(value),
            FitParam::Epsilon => cfg.epsilon = Some(value),
            FitParam::GeometryRatio => cfg.params.geometry_ratio = value,
        }
    }

    /// One decade either side of the value in `cfg`.
    pub fn default_bounds(self, cfg: &ModelConfig) -> (f64, f64) {
        let v = self.get(cfg);
        match self {
            FitParam::Epsilon => ((v / 10.0).max(1e-6), (v * 10.0).min(1.0)),
            _ => (v / 10.0, v * 10.0),
        }
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma_cavity" | "γ_cavity" => Ok(FitParam::GammaCavity),
            "gamma_long" | "γ_long" => Ok(FitParam::GammaLong),
            "epsilon" | "ε" => Ok(FitParam::Epsilon),
            "geometry_ratio" => Ok(FitParam::GeometryRatio),
            other => Err(Error::param(
                "free",
                format!("unknown fit parameter `{other}` (gamma_cavity, gamma_long, epsilon, geometry_ratio)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Starting point and every fixed parameter.
    pub model: ModelConfig,
    pub n_doublets: usize,
    /// Free parameters with positive bounds.
    pub free: Vec<(FitParam, (f64, f64))>,
    /// Log-spaced scan points per free parameter.
    pub grid_points: usize,
    pub max_cycles: usize,
    /// Relative chi2 change that ends the refinement.
    pub tolerance: f64,
    pub exec: Execution,
}

impl FitConfig {
    pub fn new(model: ModelConfig, free: &[FitParam]) -> Self {
        let mut free: Vec<FitParam> = free.to_vec();
        free.sort();
        free.dedup();
        Self {
            free: free
                .iter()
                .map(|p| (*p, p.default_bounds(&model)))
                .collect(),
            model,
            n_doublets: 2,
            grid_points: 17,
            max_cycles: 50,
            tolerance: 1e-6,
            exec: Execution::default(),
        }
    }

    fn validate(&self, data_points: usize) -> Result<()> {
        if data_points < self.free.len().max(1) {
            return Err(Error::TooFewPoints {
                needed: self.free.len().max(1),
                found: data_points,
            });
        }
        for (p, (lo, hi)) in &self.free {
            if !(*lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::param(
                    "bounds",
                    format!("{p}: need 0 < lo < hi, got [{lo}, {hi}]"),
                ));
            }
        }
        if self.grid_points < 2 && !self.free.is_empty() {
            return Err(Error::param("grid_points", "need at least two scan points"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QFactor {
    /// `ω₀/γ`
    pub energy: f64,
    /// `ω₀/(2γ)`
    pub field: f64,
}

pub fn q_factor(omega0: f64, gamma_cavity: f64) -> Result<QFactor> {
    if !(gamma_cavity > 0.0) {
        return Err(Error::param(
            "gamma_cavity",
            format!("must be positive, got {gamma_cavity}"),
        ));
    }
    Ok(QFactor {
        energy: omega0 / gamma_cavity,
        field: omega0 / (2.0 * gamma_cavity),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub values: Vec<(FitParam, f64)>,
    /// The fitted configuration.
    pub model: ModelConfig,
    pub chi2: f64,
    /// Data points minus free parameters.
    pub dof: usize,
    /// `(t_eff, p_model − p_data)` per row.
    pub residuals: Vec<(f64, f64)>,
    pub q: QFactor,
    pub converged: bool,
    /// Lowest chi2 seen during the grid scan.
    pub best_grid_chi2: f64,
    pub evaluations: usize,
}

/// Model curve for `cfg` on the true-time grid of `dataset` (after rescaling
/// with the configured geometry ratio), starting from the thermal state.
pub fn model_curve(
    cfg: &ModelConfig,
    n_doublets: usize,
    times: &[f64],
    exec: Execution,
) -> Result<RabiCurve> {
    let rates = cfg.rates(n_doublets)?;
    let ladder = DressedLadder::new(&cfg.params, n_doublets)?;
    let rho0 = thermal_initial_state(&ladder, cfg.nbar, cfg.renormalize_thermal)?;
    rabi_curve_with(
        &cfg.params,
        &rates,
        &rho0,
        times,
        GeometryMode::Effective,
        exec,
    )
}

fn evaluate(cfg: &ModelConfig, n: usize, dataset: &DataSet, exec: Execution) -> Result<f64> {
    let data = if cfg.params.geometry_ratio == dataset.geometry_ratio {
        dataset.clone()
    } else {
        dataset.rescaled(cfg.params.geometry_ratio)?
    };
    let curve = model_curve(cfg, n, data.times(), exec)?;
    chi2(&data, &curve)
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Golden-section minimum of `f` on `[a, b]` (log coordinates).
fn golden_section(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimise chi2 over the free parameters: a log-spaced grid scan, then
/// golden-section refinement of one coordinate at a time, cycled until chi2
/// changes by less than `tolerance` (relative) or `max_cycles` is reached.
pub fn fit_parameters(dataset: &DataSet, config: &FitConfig) -> Result<FitResult> {
    config.validate(dataset.len())?;
    let n = config.n_doublets;
    let dims = config.free.len();
    let grids: Vec<Vec<f64>> = config
        .free
        .iter()
        .map(|(_, (lo, hi))| log_grid(*lo, *hi, config.grid_points))
        .collect();
    let with_values = |values: &[f64]| {
        let mut cfg = config.model.clone();
        for ((p, _), v) in config.free.iter().zip(values) {
            p.set(&mut cfg, *v);
        }
        cfg
    };

    // grid scan
    let total = grids.iter().map(Vec::len).product::<usize>();
    let point = |mut idx: usize| -> Vec<f64> {
        grids
            .iter()
            .map(|g| {
                let v = g[idx % g.len()];
                idx /= g.len();
                v
            })
            .collect()
    };
    let scan: Vec<Result<f64>> = par::map_indexed(total, config.exec, |i| {
        evaluate(&with_values(&point(i)), n, dataset, Execution::Sequential)
    });
    let mut best_idx = 0;
    let mut best_grid = f64::INFINITY;
    for (i, r) in scan.into_iter().enumerate() {
        let c = r?;
        if c < best_grid {
            best_grid = c;
            best_idx = i;
        }
    }
    if !best_grid.is_finite() {
        return Err(Error::param(
            "fit",
            "chi2 is not finite anywhere on the scan grid",
        ));
    }
    let mut evaluations = total;
    let mut best = point(best_idx);
    let mut best_chi2 = best_grid;

    // coordinate refinement in log space, bracketed by neighbouring grid points
    let mut converged = dims == 0;
    let mut cycles = 0;
    let mut step: Vec<f64> = grids.iter().map(|g| (g[1] / g[0]).ln()).collect();
    while !converged && cycles < config.max_cycles {
        cycles += 1;
        let start = best_chi2;
        for k in 0..dims {
            let (lo, hi) = config.free[k].1;
            let x = best[k].ln();
            let a = (x - step[k]).max(lo.ln());
            let b = (x + step[k]).min(hi.ln());
            let mut failure = None;
            let (xm, fm) = golden_section(
                |y| {
                    evaluations += 1;
                    let mut trial = best.clone();
                    trial[k] = y.exp();
                    match evaluate(&with_values(&trial), n, dataset, config.exec) {
                        Ok(c) => c,
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::INFINITY
                        }
                    }
                },
                a,
                b,
                1e-9,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if fm < best_chi2 {
                best_chi2 = fm;
                best[k] = xm.exp();
            }
            step[k] = (step[k] * 0.5).max(1e-6);
        }
        converged =
            (start - best_chi2).abs() <= config.tolerance * start.abs().max(f64::MIN_POSITIVE);
    }

    let model = with_values(&best);
    let data = dataset.rescaled(model.params.geometry_ratio)?;
    let curve = model_curve(&model, n, data.times(), config.exec)?;
    let residuals = data
        .rows()
        .iter()
        .zip(&curve.p_g)
        .map(|(r, p)| (r.t_eff, p - r.p_g))
        .collect();
    Ok(FitResult {
        values: config
            .free
            .iter()
            .map(|(p, _)| *p)
            .zip(best.iter().copied())
            .collect(),
        q: q_factor(model.params.omega0, model.gamma_cavity())?,
        chi2: best_chi2,
        dof: dataset.len() - dims,
        residuals,
        model,
        converged,
        best_grid_chi2: best_grid,
        evaluations,
    })
}

/// Model data at the given effective times plus seeded Gaussian noise of
/// standard deviation `noise`, clipped to `[0, 1]`. A positive `noise` is
/// recorded as the sigma column.
pub fn synthetic_dataset(
    cfg: &ModelConfig,
    n_doublets: usize,
    t_eff: &[f64],
    noise: f64,
    seed: u64,
) -> Result<DataSet> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::param(
            "noise",
            format!("must be nonnegative, got {noise}"),
        ));
    }
    let ratio = cfg.params.geometry_ratio;
    let times: Vec<f64> = t_eff.iter().map(|t| t / ratio).collect();
    let curve = model_curve(cfg, n_doublets, &times, Execution::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::param("noise", e.to_string()))?;
    let rows = t_eff
        .iter()
        .zip(&curve.p_g)
        .map(|(&t, &p)| DataRow {
            t_eff: t,
            p_g: (p + normal.sample(&mut rng)).clamp(0.0, 1.0),
            sigma: (noise > 0.0).then_some(noise),
        })
        .collect();
    DataSet::new(rows, ratio)
}
