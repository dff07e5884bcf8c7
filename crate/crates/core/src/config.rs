//! Plain-text `key = value` model configuration.
//!
//! ```text
//! # reference parameter set
//! omega0_rad_s = 3.2106e11
//! g_rad_s = 147654.8547
//! temperature_K = 0.8
//! nbar = 0.05
//! geometry_ratio = 1
//! gamma1 = 17.73
//! ```
//!
//! Missing keys take the reference values. `epsilon`, when present, replaces
//! the detailed-balance factors of `γ_a` and `γ_b` (`γ_a = εγ₁`, `γ_b = εγ₂`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    detailed_balance_rates, BaseRates, DecayRates, PhysicalParams, DEFAULT_NBAR,
    REFERENCE_GAMMA_CAVITY, REFERENCE_GAMMA_LONG_OVER_G,
};

const KEYS: &[&str] = &[
    "omega0_rad_s",
    "g_rad_s",
    "temperature_K",
    "nbar",
    "geometry_ratio",
    "w_m",
    "d_m",
    "gamma1",
    "gamma2",
    "gamma3",
    "gamma4",
    "gamma5",
    "gamma6",
    "gamma7",
    "gamma8",
    "renormalize_thermal",
    "epsilon",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub params: PhysicalParams,
    pub nbar: f64,
    pub renormalize_thermal: bool,
    /// `γ₁…γ₈`; `None` means the reference value.
    pub gammas: [Option<f64>; 8],
    pub epsilon: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            params: PhysicalParams::default(),
            nbar: DEFAULT_NBAR,
            renormalize_thermal: false,
            gammas: [None; 8],
            epsilon: None,
        }
    }
}

/// Which `γ_k` (1-based) are tied together in the cavity and long-wave groups.
const CAVITY_GROUP: [usize; 6] = [1, 2, 4, 6, 7, 8];
const LONG_GROUP: [usize; 2] = [3, 5];

impl ModelConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse config text; `source` names the input in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut geometry = None;
        let (mut w, mut d) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |reason: String| Error::Parse {
                path: source.to_string(),
                line: line_no,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let key = *KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if seen.contains(&key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key);
            if key == "renormalize_thermal" {
                cfg.renormalize_thermal = value
                    .parse()
                    .map_err(|_| err(format!("expected true or false, got `{value}`")))?;
                continue;
            }
            let x: f64 = value
                .parse()
                .map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))?;
            if !x.is_finite() {
                return Err(err(format!("`{key}` must be finite")));
            }
            match key {
                "omega0_rad_s" => cfg.params.omega0 = x,
                "g_rad_s" => cfg.params.g = x,
                "temperature_K" => cfg.params.temperature = x,
                "nbar" => cfg.nbar = x,
                "geometry_ratio" => geometry = Some(x),
                "w_m" => w = Some(x),
                "d_m" => d = Some(x),
                "epsilon" => cfg.epsilon = Some(x),
                gamma => {
                    let k: usize = gamma["gamma".len()..].parse().expect("listed key");
                    cfg.gammas[k - 1] = Some(x);
                }
            }
        }
        let last = text.lines().count().max(1);
        let err = |reason: &str| Error::Parse {
            path: source.to_string(),
            line: last,
            reason: reason.to_string(),
        };
        cfg.params.geometry_ratio = match (geometry, w, d) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(err("give either geometry_ratio or w_m and d_m, not both"))
            }
            (Some(r), None, None) => r,
            (None, Some(w), Some(d)) => PhysicalParams::geometry_from_mode(w, d)?,
            (None, None, None) => 1.0,
            _ => return Err(err("w_m and d_m must be given together")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.nbar >= 0.0) {
            return Err(Error::param(
                "nbar",
                format!("must be nonnegative, got {}", self.nbar),
            ));
        }
        for k in 1..=8 {
            let rate = self.gamma(k);
            if !(rate >= 0.0) {
                return Err(Error::NegativeRate {
                    label: format!("gamma{k}"),
                    rate,
                });
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0) {
                return Err(Error::param(
                    "epsilon",
                    format!("must be nonnegative, got {eps}"),
                ));
            }
        }
        Ok(())
    }

    /// `γ_k`, 1-based.
    pub fn gamma(&self, k: usize) -> f64 {
        self.gammas[k - 1].unwrap_or_else(|| {
            if LONG_GROUP.contains(&k) {
                REFERENCE_GAMMA_LONG_OVER_G * self.params.g
            } else {
                REFERENCE_GAMMA_CAVITY
            }
        })
    }

    pub fn gamma_cavity(&self) -> f64 {
        self.gamma(1)
    }

    pub fn gamma_long(&self) -> f64 {
        self.gamma(3)
    }

    /// Sets `γ₁ = γ₂ = γ₄ = γ₆ = γ₇ = γ₈`.
    pub fn set_gamma_cavity(&mut self, rate: f64) {
        for k in CAVITY_GROUP {
            self.gammas[k - 1] = Some(rate);
        }
    }

    /// Sets `γ₃ = γ₅`; `γ_c` and `γ_e` follow by detailed balance.
    pub fn set_gamma_long(&mut self, rate: f64) {
        for k in LONG_GROUP {
            self.gammas[k - 1] = Some(rate);
        }
    }

    /// Decay coefficients for `n_doublets`, every upper doublet sharing
    /// `γ₄…γ₈`.
    pub fn rates(&self, n_doublets: usize) -> Result<DecayRates> {
        let base = BaseRates {
            gamma1: self.gamma(1),
            gamma2: self.gamma(2),
            gamma3: self.gamma(3),
            upper: vec![
                [
                    self.gamma(4),
                    self.gamma(5),
                    self.gamma(6),
                    self.gamma(7),
                    self.gamma(8)
                ];
                n_doublets.saturating_sub(1)
            ],
        };
        let mut rates = detailed_balance_rates(&self.params, &base)?;
        if let Some(eps) = self.epsilon {
            rates.first.gamma_a = eps * rates.first.gamma1;
            rates.first.gamma_b = eps * rates.first.gamma2;
        }
        Ok(rates)
    }

    /// Every key with its resolved value, in a form [`ModelConfig::parse`] reads back.
    pub fn render(&self) -> String {
        let p = &self.params;
        let mut out = format!(
            "omega0_rad_s = {:e}\ng_rad_s = {:e}\ntemperature_K = {:e}\nnbar = {:e}\ngeometry_ratio = {:e}\n",
            p.omega0, p.g, p.temperature, self.nbar, p.geometry_ratio
        );
        for k in 1..=8 {
            out += &format!("gamma{k} = {:e}\n", self.gamma(k));
        }
        out += &format!("renormalize_thermal = {}\n", self.renormalize_thermal);
        if let Some(eps) = self.epsilon {
            out += &format!("epsilon = {eps:e}\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_reference_set() {
        let cfg = ModelConfig::parse("", "empty").unwrap();
        assert_eq!(cfg, ModelConfig::default());
        let rates = cfg.rates(2).unwrap();
        assert_eq!(rates.first.gamma1, 17.73);
        assert_eq!(rates.upper[0].gamma5, 0.07 * cfg.params.g);
        assert!((rates.first.gamma_a / 17.73 - 0.0466327).abs() < 2e-6);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let e = ModelConfig::parse("gamma9 = 1", "c").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = ModelConfig::parse("nbar = 0.1\n\nnbar = 0.2", "c").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(ModelConfig::parse("nbar = x", "c").is_err());
        assert!(ModelConfig::parse("nbar", "c").is_err());
    }

    #[test]
    fn mode_geometry() {
        let cfg = ModelConfig::parse("w_m = 6e-3\nd_m = 2.7e-2 # cavity", "c").unwrap();
        let expected = std::f64::consts::PI.sqrt() * 6e-3 / 2.7e-2;
        assert!((cfg.params.geometry_ratio - expected).abs() < 1e-15);
        assert!(ModelConfig::parse("w_m = 6e-3", "c").is_err());
        assert!(ModelConfig::parse("w_m = 6e-3\nd_m = 1\ngeometry_ratio = 1", "c").is_err());
        assert!(ModelConfig::parse("geometry_ratio = -1", "c").is_err());
    }

    #[test]
    fn epsilon_override_and_ties() {
        let mut cfg = ModelConfig::parse("epsilon = 0.5\nrenormalize_thermal = true", "c").unwrap();
        assert!(cfg.renormalize_thermal);
        cfg.set_gamma_cavity(3.0);
        let r = cfg.rates(2).unwrap();
        assert_eq!(r.first.gamma_a, 1.5);
        assert_eq!(r.first.gamma_b, 1.5);
        assert_eq!(r.upper[0].gamma8, 3.0);
        assert_eq!(r.upper[0].gamma5, cfg.gamma_long());
    }

    #[test]
    fn render_round_trip() {
        let mut cfg = ModelConfig::default();
        cfg.set_gamma_long(123.456);
        cfg.epsilon = Some(0.04);
        cfg.params.geometry_ratio = 0.37;
        let back = ModelConfig::parse(&cfg.render(), "r").unwrap();
        assert_eq!(back.rates(2).unwrap(), cfg.rates(2).unwrap());
        assert_eq!(back.params, cfg.params);
    }
}
