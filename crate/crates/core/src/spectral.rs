//! Spectral decomposition of the generator.
//!
//! The `D²` eigenmodes split into `D(D−1)` coherence modes `|a⟩⟨b|`, whose
//! eigenvalues come straight from [`coherence_decay_rate`], and `D`
//! population modes from the rate matrix `G`. For one or two doublets the
//! population eigenvalues have closed forms:
//!
//! * `Λ = 0` (stationary state),
//! * `Λ_A± = −¼(ω+δ ± √(κ/γ₆))` from the ground/first-doublet block,
//! * `Λ_B± = −¼(ζ+ξ ± √θ)` from the second-doublet block,
//!
//! with `ω = γ₁+γ₂+γ₃`, `δ = γ_a+γ_b+γ_c`, `ζ = γ₄+γ₅+γ₆`,
//! `ξ = γ₇+γ₈+γ_e`, `θ = (ζ−ξ)² + 4γ₅γ_e` and
//! `κ = γ₆[(ω+δ)² − 4(γ₂(γ₃+γ_a) + (γ_a+γ_b)(γ₃+γ_c) + γ₁(γ₂+γ_b+γ_c))]`.
//! Note that θ belongs with the second-doublet sum ζ+ξ and κ with ω+δ.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::liouvillian::{
    build_jump_channels, coherence_decay_rate, CMatrix, ChannelLabel, Generator, RateTable,
};
use crate::model::{DecayRates, DressedLadder};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSymbols {
    pub omega: f64,
    pub zeta: f64,
    pub xi: f64,
    pub delta: f64,
    pub theta: f64,
    /// Closed-form symbol, including the overall γ₆ factor.
    pub kappa: f64,
    pub gamma6: f64,
    /// `κ/γ₆` evaluated without the division.
    pub lower_discriminant: f64,
    /// Product of the two nonzero lower-block eigenvalues.
    pub lower_product: f64,
    /// Product of the two second-doublet eigenvalues, `(ζξ − γ₅γ_e)/4`.
    pub upper_product: f64,
}

impl ClosedFormSymbols {
    pub fn new(rates: &DecayRates) -> Result<Self> {
        let n = rates.n_doublets();
        if n > 2 {
            return Err(Error::param(
                "doublets",
                format!("closed forms exist for at most two doublets, got {n}"),
            ));
        }
        let f = &rates.first;
        let u = rates.upper.first().copied().unwrap_or_default();
        let omega = f.gamma1 + f.gamma2 + f.gamma3;
        let delta = f.gamma_a + f.gamma_b + f.gamma_c;
        let zeta = u.gamma4 + u.gamma5 + u.gamma6;
        let xi = u.gamma7 + u.gamma8 + u.gamma_e;
        let theta = (zeta - xi).powi(2) + 4.0 * u.gamma5 * u.gamma_e;
        let minors = f.gamma2 * (f.gamma3 + f.gamma_a)
            + (f.gamma_a + f.gamma_b) * (f.gamma3 + f.gamma_c)
            + f.gamma1 * (f.gamma2 + f.gamma_b + f.gamma_c);
        let lower_discriminant = (delta + omega).powi(2) - 4.0 * minors;
        Ok(Self {
            omega,
            zeta,
            xi,
            delta,
            theta,
            kappa: u.gamma6 * lower_discriminant,
            gamma6: u.gamma6,
            lower_discriminant,
            lower_product: 0.25 * minors,
            upper_product: 0.25 * (zeta * xi - u.gamma5 * u.gamma_e),
        })
    }

    /// `Δ = κ/γ₆`; undefined when γ₆ vanishes.
    pub fn kappa_over_gamma6(&self) -> Option<f64> {
        (self.gamma6 > 0.0).then(|| self.kappa / self.gamma6)
    }
}

/// Roots `−¼(sum ± √disc)` of `λ² + (sum/2)λ + product`. The larger root uses
/// the closed form; the smaller follows from the product to avoid
/// cancellation.
fn quadratic_pair(sum: f64, discriminant: f64, product: f64) -> (Complex64, Complex64) {
    let root = Complex64::new(discriminant, 0.0).sqrt();
    let large = -0.25 * (Complex64::new(sum, 0.0) + root);
    let small = if large.norm() > 0.0 {
        Complex64::new(product, 0.0) / large
    } else {
        -0.25 * (Complex64::new(sum, 0.0) - root)
    };
    (large, small)
}

/// Population-block eigenvalues in the order `0, Λ_A+, Λ_A−[, Λ_B+, Λ_B−]`.
pub fn closed_form_population_eigenvalues(rates: &DecayRates) -> Result<Vec<Complex64>> {
    let s = ClosedFormSymbols::new(rates)?;
    let (a_plus, a_minus) = if rates.n_doublets() == 1 {
        quadratic_pair(s.omega + s.delta, s.lower_discriminant, s.lower_product)
    } else if let Some(disc) = s.kappa_over_gamma6() {
        quadratic_pair(s.omega + s.delta, disc, s.lower_product)
    } else {
        lower_block_numeric(rates)?
    };
    let mut out = vec![ZERO, a_plus, a_minus];
    if rates.n_doublets() == 2 {
        let (b_plus, b_minus) = quadratic_pair(s.zeta + s.xi, s.theta, s.upper_product);
        out.extend([b_plus, b_minus]);
    }
    Ok(out)
}

/// Nonzero eigenvalues of the ground/first-doublet block by a dense solve.
fn lower_block_numeric(rates: &DecayRates) -> Result<(Complex64, Complex64)> {
    let lower = DecayRates {
        first: rates.first,
        upper: Vec::new(),
    };
    let ladder = DressedLadder::new(&Default::default(), 1)?;
    let table = build_jump_channels(&ladder, &lower)?;
    let g = crate::liouvillian::assemble_population_generator(3, table.channels());
    let mut ev = linalg::eigenvalues(&linalg::complexify(&g))?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok((ev[0], ev[1]))
}

/// All `D²` eigenvalues for one or two doublets: population block first, then
/// coherences `|a⟩⟨b|` in row-major order of `(a, b)`.
pub fn closed_form_eigenvalues(
    ladder: &DressedLadder,
    rates: &DecayRates,
) -> Result<Vec<Complex64>> {
    let mut out = closed_form_population_eigenvalues(rates)?;
    let table = build_jump_channels(ladder, rates)?;
    out.extend(
        coherence_modes(ladder, &table)?
            .into_iter()
            .map(|m| m.eigenvalue),
    );
    Ok(out)
}

/// Unnormalised stationary populations `(x, y, z, v, w)` on `2+, 2−, 1+, 1−, 0`:
/// the upper doublet empties and
/// `z = γ₂γ_a + γ_cγ_a + γ_bγ_c`, `v = γ₃γ_a + γ₁γ_b + γ₃γ_b`,
/// `w = γ₁γ₂ + γ₂γ₃ + γ₁γ_c`.
pub fn closed_form_stationary(rates: &DecayRates) -> [f64; 5] {
    let f = &rates.first;
    [
        0.0,
        0.0,
        f.gamma2 * f.gamma_a + f.gamma_c * f.gamma_a + f.gamma_b * f.gamma_c,
        f.gamma3 * f.gamma_a + f.gamma1 * f.gamma_b + f.gamma3 * f.gamma_b,
        f.gamma1 * f.gamma2 + f.gamma2 * f.gamma3 + f.gamma1 * f.gamma_c,
    ]
}

/// Rebuild the named decay coefficients of a one- or two-doublet table.
pub fn rates_from_table(table: &RateTable) -> Result<DecayRates> {
    use ChannelLabel::*;
    let n = (table.dim() - 1) / 2;
    let mut rates = DecayRates::zero(n);
    for ch in table.channels() {
        let slot = match ch.label {
            Gamma1 => &mut rates.first.gamma1,
            Gamma2 => &mut rates.first.gamma2,
            Gamma3 => &mut rates.first.gamma3,
            GammaA => &mut rates.first.gamma_a,
            GammaB => &mut rates.first.gamma_b,
            GammaC => &mut rates.first.gamma_c,
            Gamma4 | Gamma5 | Gamma6 | Gamma7 | Gamma8 | GammaE if n >= 2 => {
                let u = &mut rates.upper[0];
                match ch.label {
                    Gamma4 => &mut u.gamma4,
                    Gamma5 => &mut u.gamma5,
                    Gamma6 => &mut u.gamma6,
                    Gamma7 => &mut u.gamma7,
                    Gamma8 => &mut u.gamma8,
                    _ => &mut u.gamma_e,
                }
            }
            other => return Err(Error::UnknownChannel(other.to_string())),
        };
        *slot += ch.rate;
    }
    Ok(rates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceMode {
    pub row: usize,
    pub col: usize,
    pub eigenvalue: Complex64,
}

fn coherence_modes(ladder: &DressedLadder, table: &RateTable) -> Result<Vec<CoherenceMode>> {
    let dim = ladder.dim();
    let mut modes = Vec::with_capacity(dim * (dim - 1));
    for row in 0..dim {
        for col in 0..dim {
            if row != col {
                modes.push(CoherenceMode {
                    row,
                    col,
                    eigenvalue: coherence_decay_rate(ladder, table, row, col)?,
                });
            }
        }
    }
    Ok(modes)
}

/// Every ordered level pair with its coherence eigenvalue.
pub fn offdiagonal_eigenpairs(generator: &Generator) -> Vec<CoherenceMode> {
    coherence_modes(generator.ladder(), generator.rate_table())
        .expect("generator table matches its ladder")
}

/// Eigenpair of `G`; components are weights on the level projectors in
/// ladder order (`0, 1+, 1−, 2+, 2−, …`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEigenpair {
    pub eigenvalue: Complex64,
    pub components: DVector<Complex64>,
}

impl DiagonalEigenpair {
    /// `(x, y, z, v, w)`: weights on `2+, 2−, 1+, 1−, 0` for a two-doublet ladder.
    pub fn xyzvw_components(&self) -> Option<[Complex64; 5]> {
        (self.components.len() == 5).then(|| {
            let c = &self.components;
            [c[3], c[4], c[1], c[2], c[0]]
        })
    }
}

fn matrix_scale(g: &DMatrix<f64>) -> f64 {
    g.amax()
}

/// Eigenpairs of `G` by dense numerical solve.
pub fn diagonal_block_eigensolve(g: &DMatrix<f64>) -> Result<Vec<DiagonalEigenpair>> {
    let eigenvalues = linalg::eigenvalues(&linalg::complexify(g))?;
    eigenpairs_for(g, &eigenvalues)
}

/// Eigenvectors of `G` for known eigenvalues, as null vectors of `G − ΛI`.
///
/// Eigenvalues closer than `1e−8·‖G‖` are treated as one cluster whose null
/// space must have full dimension; otherwise `G` is reported defective.
/// Vectors are scaled to unit largest component, the stationary ones to unit
/// population sum. Output is sorted by decreasing real part.
pub fn eigenpairs_for(
    g: &DMatrix<f64>,
    eigenvalues: &[Complex64],
) -> Result<Vec<DiagonalEigenpair>> {
    let dim = g.nrows();
    if eigenvalues.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: eigenvalues.len(),
        });
    }
    let scale = matrix_scale(g);
    let cluster_tol = 1e-8 * scale;
    let null_tol = 1e-7 * scale;
    let cg = linalg::complexify(g);

    let mut remaining: Vec<Complex64> = eigenvalues.to_vec();
    remaining.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    let mut out = Vec::with_capacity(dim);
    while let Some(&seed) = remaining.first() {
        let (cluster, rest): (Vec<_>, Vec<_>) = remaining
            .iter()
            .partition(|&&l| (l - seed).norm() <= cluster_tol);
        remaining = rest;
        let mean = cluster.iter().sum::<Complex64>() / cluster.len() as f64;
        let shifted = &cg - CMatrix::identity(dim, dim) * mean;
        let vectors = linalg::null_space(&shifted, cluster.len(), null_tol).ok_or_else(|| {
            Error::Defective {
                eigenvalue: format!("{mean}"),
            }
        })?;
        let stationary = mean.norm() <= cluster_tol;
        for (lambda, v) in cluster.into_iter().zip(vectors) {
            out.push(DiagonalEigenpair {
                eigenvalue: if stationary && lambda.norm() <= cluster_tol {
                    ZERO
                } else {
                    lambda
                },
                components: normalize(v, stationary),
            });
        }
    }
    Ok(out)
}

fn normalize(v: DVector<Complex64>, stationary: bool) -> DVector<Complex64> {
    let sum: Complex64 = v.iter().sum();
    if stationary && sum.norm() > 1e-8 * v.camax() {
        return v / sum;
    }
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(ZERO);
    if pivot.norm() == 0.0 {
        v
    } else {
        v / pivot
    }
}

/// Population eigenpairs of a generator: closed-form eigenvalues for one or
/// two doublets, a dense solve of `G` beyond.
pub fn population_eigenpairs(generator: &Generator) -> Result<Vec<DiagonalEigenpair>> {
    let g = generator.population_block();
    let eigenvalues = if generator.ladder().max_doublet() <= 2 {
        let rates = rates_from_table(generator.rate_table())?;
        closed_form_population_eigenvalues(&rates)?
    } else {
        linalg::eigenvalues(&linalg::complexify(g))?
    };
    eigenpairs_for(g, &eigenvalues)
}

/// Coefficients of `ρ(0)` in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// One per population eigenpair.
    pub population: Vec<Complex64>,
    /// One per coherence mode; simply `ρ(0)_ab`.
    pub coherence: Vec<Complex64>,
    /// `‖V·c − p(0)‖_∞` of the population solve.
    pub residual: f64,
    /// True when `V` was singular and a least-squares solve was used.
    pub least_squares: bool,
    /// Diagonal of `ρ(0)`.
    pub initial_populations: Vec<Complex64>,
}

pub fn validate_density(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.shape() != (dim, dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: rho.nrows(),
        });
    }
    let herm = linalg::max_abs_diff(rho, &rho.adjoint());
    if herm > 1e-10 {
        return Err(Error::InvalidDensity(format!(
            "not Hermitian (deviation {herm:e})"
        )));
    }
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidDensity(format!("trace {trace} is not 1")));
    }
    Ok(())
}

fn eigenvector_matrix(pairs: &[DiagonalEigenpair]) -> CMatrix {
    let dim = pairs.len();
    CMatrix::from_fn(dim, dim, |r, c| pairs[c].components[r])
}

pub fn expansion_coefficients(
    pairs: &[DiagonalEigenpair],
    coherences: &[CoherenceMode],
    rho0: &CMatrix,
) -> Result<Expansion> {
    let dim = pairs.len();
    validate_density(rho0, dim)?;
    let v = eigenvector_matrix(pairs);
    let p0 = DVector::from_fn(dim, |i, _| rho0[(i, i)]);
    let tol = 1e-10 * p0.camax().max(1.0);

    let residual_of = |c: &DVector<Complex64>| (&v * c - &p0).camax();
    let mut least_squares = false;
    let mut coeffs = v.clone().lu().solve(&p0);
    if coeffs.as_ref().is_none_or(|c| !(residual_of(c) <= tol)) {
        least_squares = true;
        coeffs = v
            .clone()
            .svd(true, true)
            .solve(&p0, 1e-12 * v.camax().max(f64::MIN_POSITIVE))
            .ok();
    }
    let coeffs = coeffs.ok_or_else(|| Error::Defective {
        eigenvalue: "singular eigenvector matrix".into(),
    })?;
    Ok(Expansion {
        residual: residual_of(&coeffs),
        population: coeffs.iter().copied().collect(),
        coherence: coherences.iter().map(|m| rho0[(m.row, m.col)]).collect(),
        least_squares,
        initial_populations: p0.iter().copied().collect(),
    })
}

/// Cramer's rule written with Levi-Civita sums:
/// `χ = Σ ε_{σ} Π_r V[r][σ(r)]` and the signed cofactor
/// `A_{rn} = Σ_{σ(r)=n} ε_{σ} Π_{s≠r} V[s][σ(s)]`, giving
/// `c_n = Σ_r rhs_r A_{rn} / χ`. `None` when `χ = 0`.
pub fn cofactor_coefficients(
    columns: &CMatrix,
    rhs: &DVector<Complex64>,
) -> Option<Vec<Complex64>> {
    let dim = columns.nrows();
    let perms = linalg::signed_permutations(dim);
    let mut chi = ZERO;
    let mut cofactor = CMatrix::zeros(dim, dim);
    for (sigma, sign) in &perms {
        let full: Complex64 = (0..dim).map(|r| columns[(r, sigma[r])]).product();
        chi += *sign * full;
        for r in 0..dim {
            let partial: Complex64 = (0..dim)
                .filter(|&s| s != r)
                .map(|s| columns[(s, sigma[s])])
                .product();
            cofactor[(r, sigma[r])] += *sign * partial;
        }
    }
    if chi.norm() == 0.0 {
        return None;
    }
    Some(
        (0..dim)
            .map(|n| {
                (0..dim)
                    .map(|r| rhs[r] * cofactor[(r, n)])
                    .sum::<Complex64>()
                    / chi
            })
            .collect(),
    )
}

/// Coefficients `B_n = (1/χ)[0.2375(A_{3n}+A_{4n}) + 0.0125(A_{1n}+A_{2n})]`
/// for the 0.95/0.05 initial mixture, rows ordered `(x, y, z, v, w)`. With
/// `ρ(t) = 2Σ B_n e^{Λ_n t}ρ_n + …` each `B_n` is half the population
/// coefficient.
pub fn mixture_coefficients(pairs: &[DiagonalEigenpair]) -> Option<Vec<Complex64>> {
    if pairs.len() != 5 {
        return None;
    }
    let rows: Vec<[Complex64; 5]> = pairs
        .iter()
        .map(|p| p.xyzvw_components().unwrap())
        .collect();
    let columns = CMatrix::from_fn(5, 5, |r, c| rows[c][r]);
    let rhs = DVector::from_vec(
        [0.0125, 0.0125, 0.2375, 0.2375, 0.0]
            .map(|x| Complex64::new(x, 0.0))
            .to_vec(),
    );
    cofactor_coefficients(&columns, &rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CofactorCheck {
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CofactorCheck {
    pub fn agrees(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    ladder: DressedLadder,
    population: Vec<DiagonalEigenpair>,
    coherences: Vec<CoherenceMode>,
    expansion: Expansion,
}

/// Which kind of eigenmode a flat index refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    Population(usize),
    Coherence { row: usize, col: usize },
}

impl SpectralSolution {
    /// Closed-form population eigenvalues for one or two doublets, a dense
    /// solve of `G` beyond.
    pub fn new(generator: &Generator, rho0: &CMatrix) -> Result<Self> {
        Self::from_parts(generator, population_eigenpairs(generator)?, rho0)
    }

    /// Fully numerical population block, for any ladder size.
    pub fn numeric(generator: &Generator, rho0: &CMatrix) -> Result<Self> {
        let population = diagonal_block_eigensolve(generator.population_block())?;
        Self::from_parts(generator, population, rho0)
    }

    fn from_parts(
        generator: &Generator,
        population: Vec<DiagonalEigenpair>,
        rho0: &CMatrix,
    ) -> Result<Self> {
        let coherences = offdiagonal_eigenpairs(generator);
        let expansion = expansion_coefficients(&population, &coherences, rho0)?;
        Ok(Self {
            ladder: generator.ladder().clone(),
            population,
            coherences,
            expansion,
        })
    }

    pub fn ladder(&self) -> &DressedLadder {
        &self.ladder
    }

    pub fn population_modes(&self) -> &[DiagonalEigenpair] {
        &self.population
    }

    pub fn coherence_modes(&self) -> &[CoherenceMode] {
        &self.coherences
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }

    pub fn len(&self) -> usize {
        self.population.len() + self.coherences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self, j: usize) -> ModeKind {
        let np = self.population.len();
        if j < np {
            ModeKind::Population(j)
        } else {
            let m = &self.coherences[j - np];
            ModeKind::Coherence {
                row: m.row,
                col: m.col,
            }
        }
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.population
            .iter()
            .map(|p| p.eigenvalue)
            .chain(self.coherences.iter().map(|m| m.eigenvalue))
            .collect()
    }

    pub fn coefficients(&self) -> Vec<Complex64> {
        self.expansion
            .population
            .iter()
            .chain(self.expansion.coherence.iter())
            .copied()
            .collect()
    }

    /// Eigenmatrix `ρ_j`.
    pub fn eigenmatrix(&self, j: usize) -> CMatrix {
        let dim = self.ladder.dim();
        let mut m = CMatrix::zeros(dim, dim);
        match self.kind(j) {
            ModeKind::Population(k) => {
                for i in 0..dim {
                    m[(i, i)] = self.population[k].components[i];
                }
            }
            ModeKind::Coherence { row, col } => m[(row, col)] = Complex64::new(1.0, 0.0),
        }
        m
    }

    /// `Σ_j c_j ρ_j`, which should equal `ρ(0)`.
    pub fn reconstruct(&self) -> CMatrix {
        let coeffs = self.coefficients();
        (0..self.len()).fold(
            CMatrix::zeros(self.ladder.dim(), self.ladder.dim()),
            |acc, j| acc + self.eigenmatrix(j) * coeffs[j],
        )
    }

    fn populations_at(&self, t: f64) -> Vec<f64> {
        let dim = self.ladder.dim();
        let mut p = vec![ZERO; dim];
        for (pair, c) in self.population.iter().zip(&self.expansion.population) {
            if *c == ZERO {
                continue;
            }
            let weight = c * (pair.eigenvalue * t).exp();
            for (pi, vi) in p.iter_mut().zip(pair.components.iter()) {
                *pi += weight * vi;
            }
        }
        p.into_iter().map(|z| z.re).collect()
    }

    fn coherence_at(&self, k: usize, t: f64, frequency_scale: f64) -> Complex64 {
        let c = self.expansion.coherence[k];
        if c == ZERO {
            return ZERO;
        }
        let l = self.coherences[k].eigenvalue;
        c * Complex64::new(l.re * t, frequency_scale * l.im * t).exp()
    }

    /// `ρ(t) = Σ c_j e^{Λ_j t} ρ_j`, with every coherence frequency `Im Λ_j`
    /// multiplied by `frequency_scale` (1 for true dynamics).
    pub fn density_at(&self, t: f64, frequency_scale: f64) -> CMatrix {
        let dim = self.ladder.dim();
        let mut rho = CMatrix::zeros(dim, dim);
        for (i, p) in self.populations_at(t).into_iter().enumerate() {
            rho[(i, i)] = Complex64::new(p, 0.0);
        }
        for (k, m) in self.coherences.iter().enumerate() {
            if m.row < m.col {
                let z = self.coherence_at(k, t, frequency_scale);
                rho[(m.row, m.col)] = z;
                rho[(m.col, m.row)] = z.conj();
            }
        }
        rho
    }

    /// Ground-state probability of the atom without assembling `ρ(t)`.
    pub fn ground_probability_at(&self, t: f64, frequency_scale: f64) -> f64 {
        let pops = self.populations_at(t);
        let mut pg = pops[0] + 0.5 * pops[1..].iter().sum::<f64>();
        for (k, m) in self.coherences.iter().enumerate() {
            let (a, b) = (self.ladder.level(m.row), self.ladder.level(m.col));
            if m.row < m.col && a.doublet == b.doublet {
                pg += self.coherence_at(k, t, frequency_scale).re;
            }
        }
        pg
    }

    /// Compare the linear-solve coefficients with the Levi-Civita cofactor
    /// route. `None` when the eigenvector determinant vanishes.
    pub fn cofactor_check(&self) -> Option<CofactorCheck> {
        let dim = self.population.len();
        let v = eigenvector_matrix(&self.population);
        let p0 = DVector::from_vec(self.expansion.initial_populations.clone());
        let viacof = cofactor_coefficients(&v, &p0)?;
        let max_deviation = viacof
            .iter()
            .zip(&self.expansion.population)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let size = self
            .expansion
            .population
            .iter()
            .map(|c| c.norm())
            .fold(1.0, f64::max);
        Some(CofactorCheck {
            max_deviation,
            tolerance: 1e-9 * size * dim as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{detailed_balance_rates, BaseRates, PhysicalParams};

    fn reference_setup() -> (DressedLadder, DecayRates, Generator) {
        let p = PhysicalParams::default();
        let ladder = DressedLadder::new(&p, 2).unwrap();
        let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 2)).unwrap();
        let gen = Generator::new(&ladder, &rates).unwrap();
        (ladder, rates, gen)
    }

    #[test]
    fn closed_form_list_shape() {
        let (ladder, rates, _) = reference_setup();
        let ev = closed_form_eigenvalues(&ladder, &rates).unwrap();
        assert_eq!(ev.len(), 25);
        assert_eq!(ev[0], ZERO);
        assert!(ev.iter().all(|l| l.re <= 0.0));
    }

    #[test]
    fn theta_pairs_with_second_doublet() {
        let (_, rates, gen) = reference_setup();
        let s = ClosedFormSymbols::new(&rates).unwrap();
        let g = gen.population_block();
        let upper = g.view((3, 3), (2, 2)).into_owned();
        let mut ev = linalg::eigenvalues(&linalg::complexify(&upper)).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        let plus = -0.25 * (s.zeta + s.xi + s.theta.sqrt());
        let minus = -0.25 * (s.zeta + s.xi - s.theta.sqrt());
        assert!((ev[0].re - plus).abs() <= 1e-10 * plus.abs());
        assert!((ev[1].re - minus).abs() <= 1e-10 * minus.abs());
    }

    #[test]
    fn gamma6_zero_falls_back_to_block_solve() {
        let (_, mut rates, _) = reference_setup();
        rates.upper[0].gamma6 = 0.0;
        let s = ClosedFormSymbols::new(&rates).unwrap();
        assert!(s.kappa_over_gamma6().is_none());
        let ev = closed_form_population_eigenvalues(&rates).unwrap();
        let (p, m) = quadratic_pair(s.omega + s.delta, s.lower_discriminant, s.lower_product);
        assert!((ev[1] - p).norm() <= 1e-9 * p.norm());
        assert!((ev[2] - m).norm() <= 1e-9 * m.norm());
    }

    #[test]
    fn too_many_doublets_for_closed_form() {
        let p = PhysicalParams::default();
        let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 3)).unwrap();
        assert!(ClosedFormSymbols::new(&rates).is_err());
    }

    #[test]
    fn coherence_pair_counts() {
        let (_, _, gen) = reference_setup();
        assert_eq!(offdiagonal_eigenpairs(&gen).len(), 20);
        let p = PhysicalParams::default();
        let ladder = DressedLadder::new(&p, 1).unwrap();
        let rates = detailed_balance_rates(&p, &BaseRates::reference(p.g, 1)).unwrap();
        let gen1 = Generator::new(&ladder, &rates).unwrap();
        assert_eq!(offdiagonal_eigenpairs(&gen1).len(), 6);
    }

    #[test]
    fn conjugate_coherence_pairs() {
        let (_, _, gen) = reference_setup();
        let modes = offdiagonal_eigenpairs(&gen);
        let find = |r, c| {
            modes
                .iter()
                .find(|m| m.row == r && m.col == c)
                .unwrap()
                .eigenvalue
        };
        // |Ω_{2+}⟩⟨Ω₀| and |Ω₀⟩⟨Ω_{2+}|
        assert_eq!(find(3, 0), find(0, 3).conj());
    }

    #[test]
    fn lower_block_modes_vanish_on_second_doublet() {
        let (_, _, gen) = reference_setup();
        let pairs = diagonal_block_eigensolve(gen.population_block()).unwrap();
        let s = ClosedFormSymbols::new(&rates_from_table(gen.rate_table()).unwrap()).unwrap();
        let upper = [
            -0.25 * (s.zeta + s.xi + s.theta.sqrt()),
            -0.25 * (s.zeta + s.xi - s.theta.sqrt()),
        ];
        let mut lower_count = 0;
        for p in &pairs {
            let is_upper = upper
                .iter()
                .any(|u| (p.eigenvalue.re - u).abs() < 1e-6 * u.abs());
            if !is_upper {
                lower_count += 1;
                let [x, y, ..] = p.xyzvw_components().unwrap();
                assert!(x.norm() < 1e-12 && y.norm() < 1e-12);
            }
        }
        assert_eq!(lower_count, 3);
    }

    #[test]
    fn zero_generator_has_zero_spectrum() {
        let g = DMatrix::<f64>::zeros(5, 5);
        let pairs = diagonal_block_eigensolve(&g).unwrap();
        assert_eq!(pairs.len(), 5);
        assert!(pairs.iter().all(|p| p.eigenvalue == ZERO));
    }

    #[test]
    fn defective_block_reported() {
        // Jordan block: ζ = ξ, γ_e = 0, γ₅ > 0.
        let g = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]);
        let err = eigenpairs_for(&g, &[Complex64::new(-1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert!(matches!(err, Err(Error::Defective { .. })));
    }

    #[test]
    fn invalid_density_rejected() {
        let (_, _, gen) = reference_setup();
        let rho = CMatrix::identity(5, 5);
        assert!(matches!(
            SpectralSolution::new(&gen, &rho),
            Err(Error::InvalidDensity(_))
        ));
    }
}
