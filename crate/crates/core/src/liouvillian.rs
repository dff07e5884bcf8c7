//! The dissipative generator in the dressed basis.
//!
//! Each jump channel `a → b` with rate γ contributes
//! `γ{½ LρL† − ¼[L†L, ρ]₊}` with `L = |b⟩⟨a|`, so a population moves at γ/2.
//! In this basis the generator never mixes distinct coherences: the diagonal
//! entries evolve under the rate matrix `G` and every `ρ_ab` decays alone with
//! `Λ_ab = −i(Ω_a − Ω_b) − (out(a) + out(b))/4`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DecayRates, DressedLadder};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelLabel {
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
    Gamma5,
    Gamma6,
    Gamma7,
    Gamma8,
    GammaA,
    GammaB,
    GammaC,
    GammaE,
    /// Pattern extension for doublets above the second.
    Generated,
}

impl ChannelLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelLabel::Gamma1 => "gamma1",
            ChannelLabel::Gamma2 => "gamma2",
            ChannelLabel::Gamma3 => "gamma3",
            ChannelLabel::Gamma4 => "gamma4",
            ChannelLabel::Gamma5 => "gamma5",
            ChannelLabel::Gamma6 => "gamma6",
            ChannelLabel::Gamma7 => "gamma7",
            ChannelLabel::Gamma8 => "gamma8",
            ChannelLabel::GammaA => "gamma_a",
            ChannelLabel::GammaB => "gamma_b",
            ChannelLabel::GammaC => "gamma_c",
            ChannelLabel::GammaE => "gamma_e",
            ChannelLabel::Generated => "generated",
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = match s {
            "gamma1" | "γ1" | "γ₁" => ChannelLabel::Gamma1,
            "gamma2" | "γ2" | "γ₂" => ChannelLabel::Gamma2,
            "gamma3" | "γ3" | "γ₃" => ChannelLabel::Gamma3,
            "gamma4" | "γ4" | "γ₄" => ChannelLabel::Gamma4,
            "gamma5" | "γ5" | "γ₅" => ChannelLabel::Gamma5,
            "gamma6" | "γ6" | "γ₆" => ChannelLabel::Gamma6,
            "gamma7" | "γ7" | "γ₇" => ChannelLabel::Gamma7,
            "gamma8" | "γ8" | "γ₈" => ChannelLabel::Gamma8,
            "gamma_a" | "γa" | "γ_a" => ChannelLabel::GammaA,
            "gamma_b" | "γb" | "γ_b" => ChannelLabel::GammaB,
            "gamma_c" | "γc" | "γ_c" => ChannelLabel::GammaC,
            "gamma_e" | "γe" | "γ_e" => ChannelLabel::GammaE,
            "generated" => ChannelLabel::Generated,
            other => return Err(Error::UnknownChannel(other.to_string())),
        };
        Ok(label)
    }
}

/// Incoherent jump between two dressed levels (indices into the ladder).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpChannel {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    pub label: ChannelLabel,
}

/// The channel list of one ladder together with per-level total out-rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    dim: usize,
    channels: Vec<JumpChannel>,
    out: Vec<f64>,
}

impl RateTable {
    pub fn new(dim: usize, channels: Vec<JumpChannel>) -> Result<Self> {
        let mut out = vec![0.0; dim];
        for ch in &channels {
            if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                return Err(Error::NegativeRate {
                    label: ch.label.to_string(),
                    rate: ch.rate,
                });
            }
            if ch.from == ch.to {
                return Err(Error::SameLevel(ch.from));
            }
            if ch.from >= dim || ch.to >= dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: ch.from.max(ch.to) + 1,
                });
            }
            out[ch.from] += ch.rate;
        }
        Ok(Self { dim, channels, out })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    /// Σ_to rate(level → to)
    pub fn out_rate(&self, level: usize) -> f64 {
        self.out[level]
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.from == from && c.to == to)
            .map(|c| c.rate)
            .sum()
    }

    pub fn max_out_rate(&self) -> f64 {
        self.out.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive_rate(&self) -> Option<f64> {
        self.channels
            .iter()
            .map(|c| c.rate)
            .filter(|&r| r > 0.0)
            .min_by(f64::total_cmp)
    }
}

/// Jump channels of the level scheme: six for one doublet, twelve for two.
/// Higher doublets repeat the second-doublet pattern, decaying into the
/// doublet below, with thermal upward partners only inside each doublet.
pub fn build_jump_channels(ladder: &DressedLadder, rates: &DecayRates) -> Result<RateTable> {
    let n_doublets = ladder.max_doublet();
    if rates.n_doublets() != n_doublets {
        return Err(Error::Dimension {
            expected: n_doublets,
            found: rates.n_doublets(),
        });
    }
    use ChannelLabel::*;
    let ch = |from, to, rate, label| JumpChannel {
        from,
        to,
        rate,
        label,
    };
    let (g0, p1, m1) = (
        DressedLadder::ground(),
        DressedLadder::plus(1),
        DressedLadder::minus(1),
    );
    let f = &rates.first;
    let mut channels = vec![
        ch(p1, g0, f.gamma1, Gamma1),
        ch(m1, g0, f.gamma2, Gamma2),
        ch(p1, m1, f.gamma3, Gamma3),
        ch(g0, p1, f.gamma_a, GammaA),
        ch(g0, m1, f.gamma_b, GammaB),
        ch(m1, p1, f.gamma_c, GammaC),
    ];
    for (k, u) in rates.upper.iter().enumerate() {
        let n = k + 2;
        let (p, m) = (DressedLadder::plus(n), DressedLadder::minus(n));
        let (lp, lm) = (DressedLadder::plus(n - 1), DressedLadder::minus(n - 1));
        let named = n == 2;
        let pick = |label| if named { label } else { Generated };
        channels.extend([
            ch(p, lp, u.gamma4, pick(Gamma4)),
            ch(p, m, u.gamma5, pick(Gamma5)),
            ch(m, p, u.gamma_e, pick(GammaE)),
            ch(p, lm, u.gamma6, pick(Gamma6)),
            ch(m, lp, u.gamma7, pick(Gamma7)),
            ch(m, lm, u.gamma8, pick(Gamma8)),
        ]);
    }
    RateTable::new(ladder.dim(), channels)
}

/// Rate matrix of the dressed-basis populations: `G[to][from] += γ/2`,
/// `G[from][from] −= γ/2` per channel.
pub fn assemble_population_generator(dim: usize, channels: &[JumpChannel]) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(dim, dim);
    for ch in channels {
        let half = 0.5 * ch.rate;
        g[(ch.to, ch.from)] += half;
        g[(ch.from, ch.from)] -= half;
    }
    g
}

/// `Λ_ab = −i(Ω_a − Ω_b) − (out(a) + out(b))/4`
pub fn coherence_decay_rate(
    ladder: &DressedLadder,
    table: &RateTable,
    a: usize,
    b: usize,
) -> Result<Complex64> {
    if a == b {
        return Err(Error::SameLevel(a));
    }
    let decay = 0.25 * (table.out_rate(a) + table.out_rate(b));
    Ok(Complex64::new(-decay, -ladder.transition_frequency(a, b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    ladder: DressedLadder,
    table: RateTable,
    population: DMatrix<f64>,
    coherence: CMatrix,
}

impl Generator {
    pub fn new(ladder: &DressedLadder, rates: &DecayRates) -> Result<Self> {
        let table = build_jump_channels(ladder, rates)?;
        Self::from_table(ladder.clone(), table)
    }

    pub fn from_table(ladder: DressedLadder, table: RateTable) -> Result<Self> {
        if table.dim() != ladder.dim() {
            return Err(Error::Dimension {
                expected: ladder.dim(),
                found: table.dim(),
            });
        }
        let dim = ladder.dim();
        let population = assemble_population_generator(dim, table.channels());
        let mut coherence = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    coherence[(a, b)] = coherence_decay_rate(&ladder, &table, a, b)?;
                }
            }
        }
        Ok(Self {
            ladder,
            table,
            population,
            coherence,
        })
    }

    pub fn dim(&self) -> usize {
        self.ladder.dim()
    }

    pub fn ladder(&self) -> &DressedLadder {
        &self.ladder
    }

    pub fn rate_table(&self) -> &RateTable {
        &self.table
    }

    /// The population block `G`.
    pub fn population_block(&self) -> &DMatrix<f64> {
        &self.population
    }

    /// `Λ_ab` for `a ≠ b`; the diagonal is unused and zero.
    pub fn coherence_rates(&self) -> &CMatrix {
        &self.coherence
    }

    /// Same dissipator with the Hamiltonian replaced by `ladder`.
    pub fn with_ladder(&self, ladder: DressedLadder) -> Result<Self> {
        Self::from_table(ladder, self.table.clone())
    }

    /// Generator in the frame rotating at `ω₀` per excitation.
    pub fn rotating_frame(&self) -> Self {
        self.with_ladder(self.ladder.rotating_frame())
            .expect("rotating frame keeps the dimension")
    }

    /// `Lρ = −i[Ω,ρ] + Σ γ{½ LρL† − ¼[L†L, ρ]₊}` evaluated directly on a
    /// density matrix, independently of `G` and the coherence table.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let dim = self.dim();
        assert_eq!(rho.shape(), (dim, dim));
        let mut out = CMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    let w = self.ladder.transition_frequency(a, b);
                    out[(a, b)] = Complex64::new(0.0, -w) * rho[(a, b)];
                }
            }
        }
        for ch in self.table.channels() {
            if ch.rate == 0.0 {
                continue;
            }
            // L ρ L† = ρ_ff |t⟩⟨t|
            out[(ch.to, ch.to)] += 0.5 * ch.rate * rho[(ch.from, ch.from)];
            // [L†L, ρ]₊ with L†L = |f⟩⟨f|: row f plus column f of ρ
            let q = 0.25 * ch.rate;
            for k in 0..dim {
                out[(ch.from, k)] -= q * rho[(ch.from, k)];
                out[(k, ch.from)] -= q * rho[(k, ch.from)];
            }
        }
        out
    }

    /// Vectorised generator acting on `vec(ρ)` with `ρ_ab ↦ a·D + b`.
    pub fn superoperator(&self) -> CMatrix {
        let dim = self.dim();
        let n = dim * dim;
        let mut sup = CMatrix::zeros(n, n);
        let mut basis = CMatrix::zeros(dim, dim);
        for c in 0..dim {
            for d in 0..dim {
                basis[(c, d)] = Complex64::new(1.0, 0.0);
                let image = self.apply(&basis);
                basis[(c, d)] = Complex64::new(0.0, 0.0);
                for a in 0..dim {
                    for b in 0..dim {
                        sup[(a * dim + b, c * dim + d)] = image[(a, b)];
                    }
                }
            }
        }
        sup
    }
}

pub fn vectorize(rho: &CMatrix) -> nalgebra::DVector<Complex64> {
    let dim = rho.nrows();
    nalgebra::DVector::from_fn(dim * dim, |i, _| rho[(i / dim, i % dim)])
}

pub fn unvectorize(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |a, b| v[a * dim + b])
}
