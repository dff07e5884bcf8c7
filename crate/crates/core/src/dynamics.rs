//! Time evolution, the atomic ground-state probability and the effective-time
//! treatment of the Gaussian mode profile.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouvillian::{CMatrix, Generator};
use crate::model::{thermal_weights, DecayRates, DressedLadder, PhysicalParams};
use crate::oracle;
use crate::par::{self, Execution};
use crate::spectral::SpectralSolution;

/// Span of the reference time grid, 600 μs.
pub const DEFAULT_TMAX: f64 = 600e-6;
pub const DEFAULT_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    Ground,
    Excited,
}

/// Bare state `|atom, n⟩` in the dressed basis.
pub fn bare_state(
    ladder: &DressedLadder,
    atom: Atom,
    photons: usize,
) -> Result<DVector<Complex64>> {
    let doublet = match atom {
        Atom::Ground => photons,
        Atom::Excited => photons + 1,
    };
    if doublet > ladder.max_doublet() {
        return Err(Error::param(
            "photons",
            format!("|{atom:?},{photons}⟩ lies above the truncated ladder"),
        ));
    }
    let mut v = DVector::zeros(ladder.dim());
    if doublet == 0 {
        v[0] = Complex64::new(1.0, 0.0);
        return Ok(v);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    v[DressedLadder::plus(doublet)] = Complex64::new(h, 0.0);
    v[DressedLadder::minus(doublet)] = Complex64::new(
        match atom {
            Atom::Ground => h,
            Atom::Excited => -h,
        },
        0.0,
    );
    Ok(v)
}

pub fn projector(v: &DVector<Complex64>) -> CMatrix {
    v * v.adjoint()
}

/// `Σ_n w_n |e,n⟩⟨e,n|`.
pub fn excited_mixture(ladder: &DressedLadder, weights: &[f64]) -> Result<CMatrix> {
    let dim = ladder.dim();
    let mut rho = CMatrix::zeros(dim, dim);
    for (n, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            rho += projector(&bare_state(ladder, Atom::Excited, n)?) * Complex64::new(w, 0.0);
        }
    }
    Ok(rho)
}

/// `0.95|e,0⟩⟨e,0| + 0.05|e,1⟩⟨e,1|`, the two-doublet approximation of the
/// thermal start.
pub fn reference_initial_state(ladder: &DressedLadder) -> Result<CMatrix> {
    excited_mixture(ladder, &[0.95, 0.05])
}

/// Excited atom with a thermal field truncated to the ladder: photon numbers
/// `0..N`. The truncation tail either renormalizes all weights or is added to
/// the highest photon number kept.
pub fn thermal_initial_state(
    ladder: &DressedLadder,
    nbar: f64,
    renormalize: bool,
) -> Result<CMatrix> {
    let occ = thermal_weights(nbar, ladder.max_doublet() - 1, renormalize)?;
    let mut weights = occ.weights;
    if !renormalize {
        *weights.last_mut().expect("at least one weight") += occ.deficit;
    }
    excited_mixture(ladder, &weights)
}

/// `ρ(t)` from the spectral expansion.
pub fn propagate_spectral(solution: &SpectralSolution, t: f64) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    Ok(solution.density_at(t, 1.0))
}

/// `p_g = Σ_n ⟨g,n|ρ|g,n⟩` with `|g,n⟩ = (|Ω_{n+}⟩ + |Ω_{n−}⟩)/√2`.
pub fn ground_state_probability(rho: &CMatrix, ladder: &DressedLadder) -> f64 {
    let mut p = rho[(0, 0)].re;
    for n in 1..=ladder.max_doublet() {
        let (a, b) = (DressedLadder::plus(n), DressedLadder::minus(n));
        p += 0.5 * (rho[(a, a)].re + rho[(b, b)].re) + rho[(a, b)].re;
    }
    p
}

/// `Σ_n p_n sin²(√(n+1)·g·t)`: excited atom in a closed cavity.
pub fn closed_cavity_reference(weights: &[f64], g: f64, t: f64) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(n, p)| p * ((n as f64 + 1.0).sqrt() * g * t).sin().powi(2))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeometryMode {
    /// Constant coupling.
    #[default]
    Raw,
    /// Coherence frequencies scaled by the geometry ratio, decays in true time.
    Effective,
}

impl std::str::FromStr for GeometryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(GeometryMode::Raw),
            "effective" => Ok(GeometryMode::Effective),
            other => Err(Error::param(
                "mode",
                format!("expected raw|effective, got `{other}`"),
            )),
        }
    }
}

pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (end - start) / (points - 1) as f64;
            (0..points).map(|i| start + step * i as f64).collect()
        }
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    let ok = !grid.is_empty()
        && grid.iter().all(|t| t.is_finite() && *t >= 0.0)
        && grid.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(Error::BadGrid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiCurve {
    /// True time, s.
    pub t: Vec<f64>,
    /// `geometry_ratio · t`, s.
    pub t_eff: Vec<f64>,
    pub p_g: Vec<f64>,
    pub mode: GeometryMode,
    pub geometry_ratio: f64,
    pub n_doublets: usize,
    pub params: PhysicalParams,
}

impl RabiCurve {
    /// Linear interpolation of `p_g` at true time `t`.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let (start, end) = (self.t[0], *self.t.last().unwrap());
        let slack = 1e-12 * end.abs().max(1e-300);
        if t < start - slack || t > end + slack {
            return Err(Error::Extrapolation { t, start, end });
        }
        let k = self.t.partition_point(|&x| x <= t);
        if k == 0 {
            return Ok(self.p_g[0]);
        }
        if k == self.t.len() {
            return Ok(*self.p_g.last().unwrap());
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let s = (t - t0) / (t1 - t0);
        Ok(self.p_g[k - 1] + s * (self.p_g[k] - self.p_g[k - 1]))
    }
}

/// `p_g` on `grid` (true time). Uses the spectral expansion; a defective
/// population block falls back to exponential propagation, where the
/// effective mode is realised by scaling the Hamiltonian.
pub fn rabi_curve(
    params: &PhysicalParams,
    rates: &DecayRates,
    rho0: &CMatrix,
    grid: &[f64],
    mode: GeometryMode,
) -> Result<RabiCurve> {
    rabi_curve_with(params, rates, rho0, grid, mode, Execution::default())
}

pub fn rabi_curve_with(
    params: &PhysicalParams,
    rates: &DecayRates,
    rho0: &CMatrix,
    grid: &[f64],
    mode: GeometryMode,
    exec: Execution,
) -> Result<RabiCurve> {
    params.validate()?;
    validate_grid(grid)?;
    let ladder = DressedLadder::new(params, rates.n_doublets())?;
    let generator = Generator::new(&ladder, rates)?;
    let ratio = params.geometry_ratio;
    let scale = match mode {
        GeometryMode::Raw => 1.0,
        GeometryMode::Effective => ratio,
    };
    let p_g = match SpectralSolution::new(&generator, rho0) {
        Ok(solution) => par::map_slice(grid, exec, |&t| solution.ground_probability_at(t, scale)),
        Err(Error::Defective { .. }) => {
            let scaled = generator.with_ladder(ladder.scaled(scale))?;
            let states = oracle::expm_steps(&scaled, rho0, grid)?;
            states
                .iter()
                .map(|rho| ground_state_probability(rho, &ladder))
                .collect()
        }
        Err(e) => return Err(e),
    };
    Ok(RabiCurve {
        t: grid.to_vec(),
        t_eff: grid.iter().map(|t| ratio * t).collect(),
        p_g,
        mode,
        geometry_ratio: ratio,
        n_doublets: rates.n_doublets(),
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ladder(n: usize) -> DressedLadder {
        DressedLadder::new(&PhysicalParams::default(), n).unwrap()
    }

    #[test]
    fn bare_states_map_onto_doublets() {
        let l = ladder(2);
        let e0 = bare_state(&l, Atom::Excited, 0).unwrap();
        let g1 = bare_state(&l, Atom::Ground, 1).unwrap();
        assert!(e0.dotc(&g1).norm() < 1e-15);
        assert!(bare_state(&l, Atom::Excited, 2).is_err());
        assert_eq!(bare_state(&l, Atom::Ground, 0).unwrap()[0].re, 1.0);
    }

    #[test]
    fn reference_state_projection() {
        let l = ladder(2);
        let rho = reference_initial_state(&l).unwrap();
        assert!((rho[(1, 2)].re + 0.475).abs() < 1e-15);
        assert!((rho[(3, 4)].re + 0.025).abs() < 1e-15);
        assert!((rho[(1, 1)].re - 0.475).abs() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert_eq!(ground_state_probability(&rho, &l), 0.0);
    }

    #[test]
    fn ground_projector_has_unit_probability() {
        let l = ladder(2);
        let rho = projector(&bare_state(&l, Atom::Ground, 0).unwrap());
        assert_eq!(ground_state_probability(&rho, &l), 1.0);
        let rho = projector(&bare_state(&l, Atom::Ground, 2).unwrap());
        assert!((ground_state_probability(&rho, &l) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_state_tail_handling() {
        let l = ladder(2);
        let lumped = thermal_initial_state(&l, 0.05, false).unwrap();
        assert!((lumped.trace().re - 1.0).abs() < 1e-15);
        // |e,0⟩ keeps p₀ exactly
        assert!((lumped[(1, 2)].re + 0.5 * (1.0 / 1.05)).abs() < 1e-15);
        let renorm = thermal_initial_state(&l, 0.05, true).unwrap();
        assert!((renorm.trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_cavity_reference_values() {
        let g = 2.0;
        assert!((closed_cavity_reference(&[1.0], g, PI / (2.0 * g)) - 1.0).abs() < 1e-15);
        assert_eq!(closed_cavity_reference(&[0.95, 0.05], g, 0.0), 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[0.0, 0.0]).is_err());
        assert!(validate_grid(&[-1.0, 0.0]).is_err());
        assert!(validate_grid(&linspace(0.0, 1.0, 3)).is_ok());
    }

    #[test]
    fn negative_time_rejected() {
        let l = ladder(1);
        let rates = DecayRates::zero(1);
        let gen = Generator::new(&l, &rates).unwrap();
        let rho = reference_initial_state(&ladder(2)).unwrap();
        let rho1 = excited_mixture(&l, &[1.0]).unwrap();
        assert_eq!(rho.nrows(), 5);
        let sol = SpectralSolution::new(&gen, &rho1).unwrap();
        assert!(propagate_spectral(&sol, -1.0).is_err());
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let curve = RabiCurve {
            t: vec![0.0, 1.0, 2.0],
            t_eff: vec![0.0, 1.0, 2.0],
            p_g: vec![0.0, 1.0, 0.0],
            mode: GeometryMode::Raw,
            geometry_ratio: 1.0,
            n_doublets: 1,
            params: PhysicalParams::default(),
        };
        assert_eq!(curve.interpolate(0.5).unwrap(), 0.5);
        assert_eq!(curve.interpolate(2.0).unwrap(), 0.0);
        assert!(matches!(
            curve.interpolate(2.5),
            Err(Error::Extrapolation { .. })
        ));
    }

    #[test]
    fn bad_geometry_ratio_rejected() {
        let p = PhysicalParams {
            geometry_ratio: 0.0,
            ..Default::default()
        };
        let l = ladder(1);
        let rho = excited_mixture(&l, &[1.0]).unwrap();
        let err = rabi_curve(
            &p,
            &DecayRates::zero(1),
            &rho,
            &[0.0, 1e-6],
            GeometryMode::Effective,
        );
        assert!(err.is_err());
    }
}
