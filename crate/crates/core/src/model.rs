//! Physical constants, the dressed-state ladder, thermal occupation of the
//! cavity mode and detailed-balance construction of the decay rates.
//!
//! Every rate and frequency is an angular quantity in rad/s.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Circular-Rydberg transition of the Brune et al. setup, 51.099 GHz.
pub const DEFAULT_OMEGA0: f64 = 2.0 * PI * 51.099e9;
/// Coupling giving a 47 kHz vacuum Rabi frequency, 2g/2π.
pub const DEFAULT_G: f64 = 47.0 * PI * 1e3;
pub const DEFAULT_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_NBAR: f64 = 0.05;
/// Cavity-field rate used for every inter-level decay in the reference fit.
pub const REFERENCE_GAMMA_CAVITY: f64 = 17.73;
/// Intra-doublet ("long-wave") rates of the reference fit, in units of g.
pub const REFERENCE_GAMMA_LONG_OVER_G: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Atomic transition and cavity frequency (exact resonance).
    pub omega0: f64,
    /// Atom-field coupling.
    pub g: f64,
    /// Cavity temperature in kelvin.
    pub temperature: f64,
    /// `√π·w/d`, the factor relating effective to true interaction time.
    pub geometry_ratio: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            omega0: DEFAULT_OMEGA0,
            g: DEFAULT_G,
            temperature: DEFAULT_TEMPERATURE,
            geometry_ratio: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn new(omega0: f64, g: f64, temperature: f64, geometry_ratio: f64) -> Result<Self> {
        let params = Self {
            omega0,
            g,
            temperature,
            geometry_ratio,
        };
        params.validate()?;
        Ok(params)
    }

    /// Geometry ratio from the Gaussian mode waist `w` and the cavity length `d`.
    pub fn geometry_from_mode(w: f64, d: f64) -> Result<f64> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param("w_m", format!("must be positive, got {w}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::param("d_m", format!("must be positive, got {d}")));
        }
        Ok(PI.sqrt() * w / d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::param(
                "omega0",
                format!("must be positive, got {}", self.omega0),
            ));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::param(
                "g",
                format!("must be positive, got {}", self.g),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::param(
                "temperature",
                format!("must be nonnegative, got {}", self.temperature),
            ));
        }
        if !(self.geometry_ratio > 0.0 && self.geometry_ratio.is_finite()) {
            return Err(Error::param(
                "geometry_ratio",
                format!("must be positive, got {}", self.geometry_ratio),
            ));
        }
        Ok(())
    }

    /// `exp(−ħΔ/kT)` for an energy gap `ħ·gap`. Zero temperature freezes every
    /// upward process.
    pub fn boltzmann_factor(&self, gap: f64) -> f64 {
        if self.temperature == 0.0 {
            return if gap > 0.0 { 0.0 } else { 1.0 };
        }
        (-HBAR * gap / (K_B * self.temperature)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Ground,
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Ground => 0.0,
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedLevel {
    /// Excitation number; 0 only for the ground state.
    pub doublet: usize,
    pub branch: Branch,
    pub frequency: f64,
}

impl DressedLevel {
    pub fn label(&self) -> String {
        match self.branch {
            Branch::Ground => "0".to_string(),
            Branch::Plus => format!("{}+", self.doublet),
            Branch::Minus => format!("{}-", self.doublet),
        }
    }
}

/// Ground state plus `N` dressed doublets of the resonant Jaynes-Cummings
/// Hamiltonian.
///
/// Level indices: `0` is `|g,0⟩`, doublet `n` occupies `2n−1` (plus branch)
/// and `2n` (minus branch).
#[derive(Debug, Clone, PartialEq)]
pub struct DressedLadder {
    omega0: f64,
    g: f64,
    levels: Vec<DressedLevel>,
}

impl DressedLadder {
    pub fn new(params: &PhysicalParams, max_doublet: usize) -> Result<Self> {
        params.validate()?;
        Self::from_frequencies(params.omega0, params.g, max_doublet)
    }

    fn from_frequencies(omega0: f64, g: f64, max_doublet: usize) -> Result<Self> {
        if max_doublet == 0 {
            return Err(Error::NoDoublets);
        }
        let mut levels = Vec::with_capacity(2 * max_doublet + 1);
        levels.push(DressedLevel {
            doublet: 0,
            branch: Branch::Ground,
            frequency: -0.5 * omega0,
        });
        for n in 1..=max_doublet {
            let center = (n as f64 - 0.5) * omega0;
            let half_split = (n as f64).sqrt() * g;
            levels.push(DressedLevel {
                doublet: n,
                branch: Branch::Plus,
                frequency: center + half_split,
            });
            levels.push(DressedLevel {
                doublet: n,
                branch: Branch::Minus,
                frequency: center - half_split,
            });
        }
        Ok(Self { omega0, g, levels })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn max_doublet(&self) -> usize {
        (self.levels.len() - 1) / 2
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[DressedLevel] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &DressedLevel {
        &self.levels[index]
    }

    pub fn ground() -> usize {
        0
    }

    pub fn plus(n: usize) -> usize {
        debug_assert!(n >= 1);
        2 * n - 1
    }

    pub fn minus(n: usize) -> usize {
        debug_assert!(n >= 1);
        2 * n
    }

    /// `Ω_a − Ω_b`, assembled from the excitation and splitting parts so that
    /// intra-doublet differences do not lose digits against the large `ω₀`.
    pub fn transition_frequency(&self, a: usize, b: usize) -> f64 {
        let (la, lb) = (&self.levels[a], &self.levels[b]);
        let excitation = (la.doublet as f64 - lb.doublet as f64) * self.omega0;
        let split = la.branch.sign() * (la.doublet as f64).sqrt()
            - lb.branch.sign() * (lb.doublet as f64).sqrt();
        excitation + split * self.g
    }

    /// Doublet splitting `Ω_{n+} − Ω_{n−}`.
    pub fn splitting(&self, n: usize) -> f64 {
        self.transition_frequency(Self::plus(n), Self::minus(n))
    }

    /// The same ladder seen from the frame rotating at `ω₀` per excitation.
    /// Level populations and intra-doublet coherences are unchanged; a
    /// coherence between doublets `n_a`, `n_b` picks up `exp(iω₀(n_a−n_b)t)`.
    pub fn rotating_frame(&self) -> Self {
        let mut ladder = Self::from_frequencies(1.0, self.g, self.max_doublet())
            .expect("ladder has at least one doublet");
        ladder.omega0 = 0.0;
        for level in &mut ladder.levels {
            level.frequency = level.branch.sign() * (level.doublet as f64).sqrt() * self.g;
        }
        ladder
    }

    /// Ladder with every Bohr frequency multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut ladder = self.clone();
        ladder.omega0 *= factor;
        ladder.g *= factor;
        for level in &mut ladder.levels {
            level.frequency *= factor;
        }
        ladder
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalOccupation {
    pub nbar: f64,
    /// `p_n` for `n = 0..=N`.
    pub weights: Vec<f64>,
    /// `1 − Σ p_n` of the untruncated distribution.
    pub deficit: f64,
    pub renormalized: bool,
}

/// Bose-Einstein photon-number weights `p_n = n̄ⁿ/(1+n̄)ⁿ⁺¹`, `n = 0..=max_photons`.
pub fn thermal_weights(
    nbar: f64,
    max_photons: usize,
    renormalize: bool,
) -> Result<ThermalOccupation> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::param(
            "nbar",
            format!("must be nonnegative, got {nbar}"),
        ));
    }
    let ratio = nbar / (1.0 + nbar);
    let mut weights = Vec::with_capacity(max_photons + 1);
    let mut p = 1.0 / (1.0 + nbar);
    for _ in 0..=max_photons {
        weights.push(p);
        p *= ratio;
    }
    let total: f64 = weights.iter().sum();
    let deficit = (1.0 - total).max(0.0);
    if renormalize {
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(ThermalOccupation {
        nbar,
        weights,
        deficit,
        renormalized: renormalize,
    })
}

/// Mean photon number of a mode at frequency `omega` in equilibrium at `temperature`.
pub fn bose_einstein(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 0.0;
    }
    1.0 / ((HBAR * omega / (K_B * temperature)).exp() - 1.0)
}

/// Rates of the lowest doublet and its coupling to the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FirstDoubletRates {
    /// γ₁: `Ω₊ → Ω₀`
    pub gamma1: f64,
    /// γ₂: `Ω₋ → Ω₀`
    pub gamma2: f64,
    /// γ₃: `Ω₊ → Ω₋`
    pub gamma3: f64,
    /// γ_a: `Ω₀ → Ω₊`
    pub gamma_a: f64,
    /// γ_b: `Ω₀ → Ω₋`
    pub gamma_b: f64,
    /// γ_c: `Ω₋ → Ω₊`
    pub gamma_c: f64,
}

/// Rates out of doublet `n ≥ 2`, written with the second-doublet names.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpperDoubletRates {
    /// γ₄: `Ω_{n+} → Ω_{(n−1)+}`
    pub gamma4: f64,
    /// γ₅: `Ω_{n+} → Ω_{n−}`
    pub gamma5: f64,
    /// γ₆: `Ω_{n+} → Ω_{(n−1)−}`
    pub gamma6: f64,
    /// γ₇: `Ω_{n−} → Ω_{(n−1)+}`
    pub gamma7: f64,
    /// γ₈: `Ω_{n−} → Ω_{(n−1)−}`
    pub gamma8: f64,
    /// γ_e: `Ω_{n−} → Ω_{n+}`
    pub gamma_e: f64,
}

/// Full set of decay coefficients for a ladder of `1 + upper.len()` doublets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecayRates {
    pub first: FirstDoubletRates,
    /// `upper[k]` belongs to doublet `k + 2`.
    pub upper: Vec<UpperDoubletRates>,
}

impl DecayRates {
    pub fn n_doublets(&self) -> usize {
        1 + self.upper.len()
    }

    pub fn all(&self) -> impl Iterator<Item = f64> + '_ {
        let f = &self.first;
        [
            f.gamma1, f.gamma2, f.gamma3, f.gamma_a, f.gamma_b, f.gamma_c,
        ]
        .into_iter()
        .chain(
            self.upper
                .iter()
                .flat_map(|u| [u.gamma4, u.gamma5, u.gamma6, u.gamma7, u.gamma8, u.gamma_e]),
        )
    }

    /// Closed cavity: every rate zero.
    pub fn zero(n_doublets: usize) -> Self {
        Self {
            first: FirstDoubletRates::default(),
            upper: vec![UpperDoubletRates::default(); n_doublets.saturating_sub(1)],
        }
    }

    /// Truncate or extend to `n_doublets`, repeating the last upper doublet's
    /// rates for any added doublet.
    pub fn resized(&self, n_doublets: usize) -> Self {
        let mut out = self.clone();
        let wanted = n_doublets.saturating_sub(1);
        let template = self.upper.last().copied().unwrap_or_default();
        out.upper.resize(wanted, template);
        out
    }
}

/// Downward base rates from which upward partners follow by detailed balance.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// `(γ₄, γ₅, γ₆, γ₇, γ₈)` per doublet `n ≥ 2`.
    pub upper: Vec<[f64; 5]>,
}

impl BaseRates {
    /// Reference fit: γ₁=γ₂=γ₄=γ₆=γ₇=γ₈=17.73, γ₃=γ₅=0.07g.
    pub fn reference(g: f64, n_doublets: usize) -> Self {
        let cavity = REFERENCE_GAMMA_CAVITY;
        let long = REFERENCE_GAMMA_LONG_OVER_G * g;
        Self {
            gamma1: cavity,
            gamma2: cavity,
            gamma3: long,
            upper: vec![[cavity, long, cavity, cavity, cavity]; n_doublets.saturating_sub(1)],
        }
    }
}

/// Upward rates from Boltzmann factors of the dressed-level gaps:
/// `γ_a = e^{−ħ(ω₀+g)/kT}γ₁`, `γ_b = e^{−ħ(ω₀−g)/kT}γ₂`, `γ_c = e^{−2ħg/kT}γ₃`
/// and, for doublet `n ≥ 2`, `γ_e = e^{−2√n ħg/kT}γ₅`.
pub fn detailed_balance_rates(params: &PhysicalParams, base: &BaseRates) -> Result<DecayRates> {
    params.validate()?;
    let check = |name: &str, rate: f64| -> Result<()> {
        if rate >= 0.0 && rate.is_finite() {
            Ok(())
        } else {
            Err(Error::NegativeRate {
                label: name.to_string(),
                rate,
            })
        }
    };
    check("gamma1", base.gamma1)?;
    check("gamma2", base.gamma2)?;
    check("gamma3", base.gamma3)?;
    for row in &base.upper {
        for (rate, name) in row
            .iter()
            .zip(["gamma4", "gamma5", "gamma6", "gamma7", "gamma8"])
        {
            check(name, *rate)?;
        }
    }

    let (w0, g) = (params.omega0, params.g);
    let first = FirstDoubletRates {
        gamma1: base.gamma1,
        gamma2: base.gamma2,
        gamma3: base.gamma3,
        gamma_a: params.boltzmann_factor(w0 + g) * base.gamma1,
        gamma_b: params.boltzmann_factor(w0 - g) * base.gamma2,
        gamma_c: params.boltzmann_factor(2.0 * g) * base.gamma3,
    };
    let upper = base
        .upper
        .iter()
        .enumerate()
        .map(|(k, &[gamma4, gamma5, gamma6, gamma7, gamma8])| {
            let n = (k + 2) as f64;
            UpperDoubletRates {
                gamma4,
                gamma5,
                gamma6,
                gamma7,
                gamma8,
                gamma_e: params.boltzmann_factor(2.0 * n.sqrt() * g) * gamma5,
            }
        })
        .collect();
    Ok(DecayRates { first, upper })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_doublets_rejected() {
        assert!(matches!(
            DressedLadder::new(&PhysicalParams::default(), 0),
            Err(Error::NoDoublets)
        ));
    }

    #[test]
    fn ladder_layout() {
        let p = PhysicalParams::default();
        let ladder = DressedLadder::new(&p, 3).unwrap();
        assert_eq!(ladder.dim(), 7);
        assert_eq!(ladder.level(0).frequency, -0.5 * p.omega0);
        for n in 1..=3 {
            let plus = ladder.level(DressedLadder::plus(n));
            let minus = ladder.level(DressedLadder::minus(n));
            assert_eq!(plus.doublet, n);
            assert!(minus.frequency < plus.frequency);
            let expected = 2.0 * (n as f64).sqrt() * p.g;
            assert!((ladder.splitting(n) - expected).abs() <= 1e-12 * expected);
        }
        assert_eq!(ladder.splitting(1), 2.0 * p.g);
        let top = ladder.transition_frequency(DressedLadder::plus(1), 0);
        assert_eq!(top, p.omega0 + p.g);
    }

    #[test]
    fn rotating_frame_keeps_intra_doublet_structure() {
        let ladder = DressedLadder::new(&PhysicalParams::default(), 2).unwrap();
        let rot = ladder.rotating_frame();
        for a in 0..5 {
            for b in 0..5 {
                if ladder.level(a).doublet == ladder.level(b).doublet {
                    assert_eq!(
                        ladder.transition_frequency(a, b),
                        rot.transition_frequency(a, b)
                    );
                }
            }
        }
        assert_eq!(rot.transition_frequency(1, 0), ladder.g());
    }

    #[test]
    fn thermal_weights_zero_temperature() {
        let occ = thermal_weights(0.0, 2, false).unwrap();
        assert_eq!(occ.weights, vec![1.0, 0.0, 0.0]);
        assert_eq!(occ.deficit, 0.0);
    }

    #[test]
    fn thermal_weights_reject_negative() {
        assert!(thermal_weights(-0.1, 2, false).is_err());
    }

    #[test]
    fn thermal_deficit_and_renormalization() {
        let occ = thermal_weights(0.05, 1, false).unwrap();
        let expected = 0.05f64.powi(2) / 1.05f64.powi(2);
        assert!((occ.deficit - expected).abs() < 1e-15);
        let renorm = thermal_weights(0.05, 1, true).unwrap();
        assert!((renorm.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let long = thermal_weights(0.05, 60, false).unwrap();
        assert!(long.deficit < 1e-15);
    }

    #[test]
    fn boltzmann_limits() {
        let mut p = PhysicalParams {
            temperature: 0.0,
            ..Default::default()
        };
        assert_eq!(p.boltzmann_factor(p.omega0), 0.0);
        p.temperature = 1e12;
        assert!((p.boltzmann_factor(p.omega0 + p.g) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detailed_balance_rejects_negative_rate() {
        let mut base = BaseRates::reference(DEFAULT_G, 2);
        base.upper[0][3] = -1.0;
        assert!(matches!(
            detailed_balance_rates(&PhysicalParams::default(), &base),
            Err(Error::NegativeRate { .. })
        ));
    }

    #[test]
    fn resize_repeats_last_doublet() {
        let p = PhysicalParams::default();
        let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 2)).unwrap();
        let three = rates.resized(3);
        assert_eq!(three.n_doublets(), 3);
        assert_eq!(three.upper[1], rates.upper[0]);
        assert_eq!(three.resized(1).upper.len(), 0);
    }
}
