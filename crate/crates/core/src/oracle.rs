//! Independent numerical references for the spectral solution: a fixed-step
//! RK4 integrator on the Lindblad equation and the matrix exponential of the
//! vectorised generator.
//!
//! Both run in the frame rotating at `ω₀` per excitation, where the fastest
//! remaining frequency is the doublet splitting, and convert back on output.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::liouvillian::{unvectorize, vectorize, CMatrix, Generator};
use crate::model::DressedLadder;
use crate::par::{self, Execution};
use crate::spectral::validate_density;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Expm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// RK4 step, s.
    pub dt: f64,
    pub method: Method,
}

/// `(1/20)·min(2π/ω_max, 1/γ_max)` with `ω_max = 2√N·g` the largest
/// rotating-frame frequency and `γ_max` the largest total out-rate.
pub fn stability_bound(generator: &Generator) -> f64 {
    let ladder = generator.ladder();
    let omega_max = 2.0 * (ladder.max_doublet() as f64).sqrt() * ladder.g();
    let rate_max = generator.rate_table().max_out_rate();
    let mut bound = 2.0 * std::f64::consts::PI / omega_max;
    if rate_max > 0.0 {
        bound = bound.min(1.0 / rate_max);
    }
    bound / 20.0
}

impl IntegratorConfig {
    /// RK4 with a step of 1/64 of the stability bound, which keeps the global
    /// error near 1e-9 over a few hundred Rabi periods.
    pub fn for_generator(generator: &Generator) -> Self {
        Self {
            dt: stability_bound(generator) / 64.0,
            method: Method::Rk4,
        }
    }

    pub fn validate(&self, generator: &Generator) -> Result<()> {
        let bound = stability_bound(generator);
        if self.method == Method::Rk4 && !(self.dt > 0.0 && self.dt <= bound) {
            return Err(Error::StepTooLarge { dt: self.dt, bound });
        }
        Ok(())
    }
}

/// Multiply `ρ_ab` by `exp(−iω₀(n_a − n_b)t)`: rotating frame to lab frame.
fn to_lab_frame(ladder: &DressedLadder, rho: &mut CMatrix, t: f64) {
    let dim = ladder.dim();
    for a in 0..dim {
        for b in 0..dim {
            let dn = ladder.level(a).doublet as f64 - ladder.level(b).doublet as f64;
            if dn != 0.0 {
                rho[(a, b)] *= Complex64::from_polar(1.0, -ladder.omega0() * dn * t);
            }
        }
    }
}

fn rk4_step(generator: &Generator, rho: &CMatrix, h: f64) -> CMatrix {
    let half = Complex64::new(0.5 * h, 0.0);
    let full = Complex64::new(h, 0.0);
    let k1 = generator.apply(rho);
    let k2 = generator.apply(&(rho + &k1 * half));
    let k3 = generator.apply(&(rho + &k2 * half));
    let k4 = generator.apply(&(rho + &k3 * full));
    rho + (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0)
}

/// `ρ(t)` on `grid` by classical RK4. Each grid interval is split into equal
/// substeps no longer than `config.dt`.
pub fn rk4_integrate(
    generator: &Generator,
    rho0: &CMatrix,
    grid: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<CMatrix>> {
    config.validate(generator)?;
    crate::dynamics::validate_grid(grid)?;
    validate_density(rho0, generator.dim())?;
    let rot = generator.rotating_frame();
    let mut rho = rho0.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let span = t - now;
        if span > 0.0 {
            let steps = (span / config.dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rho = rk4_step(&rot, &rho, h);
            }
        }
        now = t;
        let mut lab = rho.clone();
        to_lab_frame(generator.ladder(), &mut lab, t);
        out.push(lab);
    }
    Ok(out)
}

/// `vec(ρ(t)) = exp(S t)·vec(ρ₀)` for a superoperator `S`.
pub fn expm_propagate(superop: &CMatrix, rho0: &CMatrix, t: f64) -> CMatrix {
    let dim = rho0.nrows();
    let propagator = (superop * Complex64::new(t, 0.0)).exp();
    unvectorize(&(propagator * vectorize(rho0)), dim)
}

/// `ρ(t)` on `grid` from the matrix exponential of the rotating-frame
/// superoperator, one exponential per time point.
pub fn expm_trajectory(
    generator: &Generator,
    rho0: &CMatrix,
    grid: &[f64],
    exec: Execution,
) -> Result<Vec<CMatrix>> {
    crate::dynamics::validate_grid(grid)?;
    validate_density(rho0, generator.dim())?;
    let superop = generator.rotating_frame().superoperator();
    Ok(par::map_slice(grid, exec, |&t| {
        let mut rho = expm_propagate(&superop, rho0, t);
        to_lab_frame(generator.ladder(), &mut rho, t);
        rho
    }))
}

/// Same trajectory as [`expm_trajectory`], stepping from one grid point to
/// the next; the step propagator is reused while the spacing stays the same.
pub fn expm_steps(generator: &Generator, rho0: &CMatrix, grid: &[f64]) -> Result<Vec<CMatrix>> {
    crate::dynamics::validate_grid(grid)?;
    validate_density(rho0, generator.dim())?;
    let dim = generator.dim();
    let superop = generator.rotating_frame().superoperator();
    let mut state = vectorize(rho0);
    let mut now = 0.0;
    let mut cached: Option<(f64, CMatrix)> = None;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let dt = t - now;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((h, _)) if (dt - h).abs() <= 1e-12 * h);
            if !reuse {
                cached = Some((dt, (&superop * Complex64::new(dt, 0.0)).exp()));
            }
            state = &cached.as_ref().expect("propagator cached").1 * state;
        }
        now = t;
        let mut rho = unvectorize(&state, dim);
        to_lab_frame(generator.ladder(), &mut rho, t);
        out.push(rho);
    }
    Ok(out)
}

pub fn integrate(
    generator: &Generator,
    rho0: &CMatrix,
    grid: &[f64],
    config: &IntegratorConfig,
) -> Result<Vec<CMatrix>> {
    match config.method {
        Method::Rk4 => rk4_integrate(generator, rho0, grid, config),
        Method::Expm => expm_trajectory(generator, rho0, grid, Execution::default()),
    }
}

/// All eigenvalues of a dense complex matrix.
pub fn numeric_spectrum(m: &CMatrix) -> Result<Vec<Complex64>> {
    linalg::eigenvalues(m)
}

/// Largest mismatch between two eigenvalue multisets after greedy nearest
/// pairing, relative to `max(|λ|, floor)`. `None` on a length mismatch.
pub fn multiset_deviation(expected: &[Complex64], found: &[Complex64], floor: f64) -> Option<f64> {
    if expected.len() != found.len() {
        return None;
    }
    let mut used = vec![false; found.len()];
    let mut order: Vec<usize> = (0..expected.len()).collect();
    // pair the largest values first so that small ones are not stolen
    order.sort_by(|&a, &b| expected[b].norm().total_cmp(&expected[a].norm()));
    let mut worst: f64 = 0.0;
    for i in order {
        let (j, dist) = found
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, f)| (j, (f - expected[i]).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        used[j] = true;
        worst = worst.max(dist / expected[i].norm().max(floor));
    }
    Some(worst)
}

/// `‖GV − VΛ‖_∞` over the population eigenpairs of a solution, relative to `‖G‖`.
pub fn population_residual(
    generator: &Generator,
    pairs: &[crate::spectral::DiagonalEigenpair],
) -> f64 {
    let g = linalg::complexify(generator.population_block());
    let scale = generator.population_block().amax().max(f64::MIN_POSITIVE);
    pairs
        .iter()
        .map(|p| (&g * &p.components - &p.components * p.eigenvalue).camax() / p.components.camax())
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{linspace, reference_initial_state};
    use crate::model::{detailed_balance_rates, BaseRates, DecayRates, PhysicalParams};

    fn reference_setup() -> Generator {
        let p = PhysicalParams::default();
        let ladder = DressedLadder::new(&p, 2).unwrap();
        let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 2)).unwrap();
        Generator::new(&ladder, &rates).unwrap()
    }

    #[test]
    fn step_above_bound_rejected() {
        let gen = reference_setup();
        let cfg = IntegratorConfig {
            dt: 2.0 * stability_bound(&gen),
            method: Method::Rk4,
        };
        let rho = reference_initial_state(gen.ladder()).unwrap();
        assert!(matches!(
            rk4_integrate(&gen, &rho, &[0.0, 1e-6], &cfg),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn rk4_and_expm_agree_on_short_run() {
        let gen = reference_setup();
        let rho = reference_initial_state(gen.ladder()).unwrap();
        let grid = linspace(0.0, 40e-6, 9);
        let a = rk4_integrate(&gen, &rho, &grid, &IntegratorConfig::for_generator(&gen)).unwrap();
        let b = expm_trajectory(&gen, &rho, &grid, Execution::Sequential).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(linalg::max_abs_diff(x, y) < 1e-9);
        }
        let c = expm_steps(&gen, &rho, &grid).unwrap();
        for (x, y) in c.iter().zip(&b) {
            assert!(linalg::max_abs_diff(x, y) < 1e-12);
        }
    }

    #[test]
    fn closed_cavity_expm_is_unitary_rotation() {
        let p = PhysicalParams::default();
        let ladder = DressedLadder::new(&p, 1).unwrap();
        let gen = Generator::new(&ladder, &DecayRates::zero(1)).unwrap();
        let rho = crate::dynamics::excited_mixture(&ladder, &[1.0]).unwrap();
        let t = 3.7e-6;
        let out = expm_trajectory(&gen, &rho, &[t], Execution::Sequential).unwrap();
        let pg = crate::dynamics::ground_state_probability(&out[0], &ladder);
        assert!((pg - (p.g * t).sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn multiset_matching() {
        let a = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let b = [Complex64::new(0.0, 1e-13), Complex64::new(1.0 + 1e-12, 0.0)];
        let d = multiset_deviation(&a, &b, 1.0).unwrap();
        assert!(d < 2e-12);
        assert!(multiset_deviation(&a, &b[..1], 1.0).is_none());
    }
}
