//! Two spin-star environments in a correlated thermal state.
//!
//! Bath `i` holds `n_i` spins coupled to system qubit `i` through
//! `g_ij σ_ij^z σ_iS^z`. The joint bath state is `exp(-β H_E) / Z` with
//!
//! ```text
//!   H_E = B1 S1 + B2 S2 + α S1 S2
//!   S_i = Σ_j σ_ij / 2 + (J_i / B_i) Σ_<mn> σ_im σ_in
//! ```
//!
//! Everything is diagonal in the `σ^z` basis, so every decoherence function
//! is an exact weighted sum of phases over spin configurations:
//! `κ1 = |Σ_c p(c) exp(-2i Θ1 Σ_j g_1j σ_1j)|`, and likewise for the others.
//!
//! Spin configurations are encoded as integers: bit `k` set means spin `k`
//! points down (`σ = -1`); bits `0..n1` are bath 1, `n1..n1+n2` bath 2.

use num_complex::Complex64;
use thiserror::Error;

use crate::analysis::{self, FactorModel, FactorSeries, Grid};
use crate::map::DephasingFactors;

/// Largest `n1 + n2` that exact enumeration accepts.
pub const MAX_SPINS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinStarError {
    #[error("invalid spin-star configuration: {0}")]
    InvalidConfig(String),
    #[error("spin assignment has {got} entries, expected {expected}")]
    WrongLength { got: usize, expected: usize },
}

/// Which pairs `<mn>` the intra-bath coupling sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairRule {
    /// Every unordered pair in the bath.
    #[default]
    CompleteGraph,
    /// Nearest neighbours on a closed ring.
    Ring,
}

impl PairRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            PairRule::CompleteGraph => "complete_graph",
            PairRule::Ring => "ring",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "complete_graph" => Some(PairRule::CompleteGraph),
            "ring" => Some(PairRule::Ring),
            _ => None,
        }
    }

    /// `Σ_<mn> σ_m σ_n` over one bath.
    fn pair_sum(&self, spins: &[i8]) -> f64 {
        let n = spins.len();
        match self {
            PairRule::CompleteGraph => {
                let m: i64 = spins.iter().map(|&s| s as i64).sum();
                ((m * m - n as i64) / 2) as f64
            }
            PairRule::Ring => match n {
                0 | 1 => 0.0,
                2 => (spins[0] * spins[1]) as f64,
                _ => (0..n).map(|j| (spins[j] * spins[(j + 1) % n]) as f64).sum(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarConfig {
    pub n1: usize,
    pub n2: usize,
    pub b1: f64,
    pub b2: f64,
    pub alpha: f64,
    pub j1: f64,
    pub j2: f64,
    pub beta: f64,
    /// Per-spin system-bath couplings of bath 1 (length `n1`).
    pub g1: Vec<f64>,
    /// Per-spin system-bath couplings of bath 2 (length `n2`).
    pub g2: Vec<f64>,
    pub pair_rule: PairRule,
}

impl SpinStarConfig {
    /// Unit couplings `g_ij = 1`, symmetric baths.
    pub fn symmetric(n: usize, b: f64, alpha: f64, j: f64, beta: f64) -> Self {
        Self {
            n1: n,
            n2: n,
            b1: b,
            b2: b,
            alpha,
            j1: j,
            j2: j,
            beta,
            g1: vec![1.0; n],
            g2: vec![1.0; n],
            pair_rule: PairRule::CompleteGraph,
        }
    }

    /// Self-correlated baths of the spin-star figures: `n_i = 5`, `α = 4`,
    /// `β = 0.01`, `B_i = 2`, `J_i = 10`.
    pub fn figure7() -> Self {
        Self::symmetric(5, 2.0, 4.0, 10.0, 0.01)
    }

    /// Same as [`Self::figure7`] without intra-bath coupling.
    pub fn figure8() -> Self {
        Self::symmetric(5, 2.0, 4.0, 0.0, 0.01)
    }

    pub fn total_spins(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn validate(&self) -> Result<(), SpinStarError> {
        let bad = |m: String| Err(SpinStarError::InvalidConfig(m));
        if self.n1 == 0 || self.n2 == 0 {
            return bad("each bath needs at least one spin".into());
        }
        if self.total_spins() > MAX_SPINS {
            return bad(format!("n1 + n2 = {} exceeds {MAX_SPINS}", self.total_spins()));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta = {} must be >= 0", self.beta));
        }
        if self.g1.len() != self.n1 || self.g2.len() != self.n2 {
            return bad("coupling lists must have one entry per bath spin".into());
        }
        for (j, b, name) in [(self.j1, self.b1, "1"), (self.j2, self.b2, "2")] {
            if j != 0.0 && b == 0.0 {
                return bad(format!("J{name} != 0 needs B{name} != 0 (the coupling enters as J/B)"));
            }
        }
        let all = [self.b1, self.b2, self.alpha, self.j1, self.j2];
        if all.iter().chain(&self.g1).chain(&self.g2).any(|x| !x.is_finite()) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    fn bath_spin(&self, spins: &[i8], b: f64, j: f64) -> f64 {
        let linear: f64 = spins.iter().map(|&s| 0.5 * s as f64).sum();
        if j == 0.0 {
            linear
        } else {
            linear + j / b * self.pair_rule.pair_sum(spins)
        }
    }

    fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        let s1 = self.bath_spin(&spins[..self.n1], self.b1, self.j1);
        let s2 = self.bath_spin(&spins[self.n1..], self.b2, self.j2);
        self.b1 * s1 + self.b2 * s2 + self.alpha * s1 * s2
    }

    fn uniform_couplings(&self) -> Option<(f64, f64)> {
        let uniform = |g: &[f64]| g.iter().all(|&x| x == g[0]).then(|| g[0]);
        Some((uniform(&self.g1)?, uniform(&self.g2)?))
    }
}

/// `H_E` for one spin assignment (entries `±1`, bath 1 first).
pub fn bath_energy(cfg: &SpinStarConfig, assignment: &[i8]) -> Result<f64, SpinStarError> {
    if assignment.len() != cfg.total_spins() {
        return Err(SpinStarError::WrongLength {
            got: assignment.len(),
            expected: cfg.total_spins(),
        });
    }
    if assignment.iter().any(|&s| s != 1 && s != -1) {
        return Err(SpinStarError::InvalidConfig("spins must be +1 or -1".into()));
    }
    Ok(cfg.energy_unchecked(assignment))
}

pub fn decode(index: usize, n: usize, out: &mut [i8]) {
    for (k, s) in out.iter_mut().enumerate().take(n) {
        *s = if index >> k & 1 == 1 { -1 } else { 1 };
    }
}

/// Normalized Boltzmann weights `exp(-β E) / Z`, shifted by the minimum
/// energy before exponentiation.
fn boltzmann(energies: &[f64], degeneracies: Option<&[f64]>, beta: f64) -> Vec<f64> {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    if let Some(deg) = degeneracies {
        w.iter_mut().zip(deg).for_each(|(x, d)| *x *= d);
    }
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// Thermal weights of all `2^(n1+n2)` assignments, indexed by the bit
/// encoding described in the module docs.
pub fn thermal_weights(cfg: &SpinStarConfig) -> Result<Vec<f64>, SpinStarError> {
    cfg.validate()?;
    let n = cfg.total_spins();
    let mut spins = vec![0i8; n];
    let energies: Vec<f64> = (0..1usize << n)
        .map(|idx| {
            decode(idx, n, &mut spins);
            cfg.energy_unchecked(&spins)
        })
        .collect();
    Ok(boltzmann(&energies, None, cfg.beta))
}

/// Thermal state reduced to what the decoherence functions need: a list of
/// `(weight, Σ_j g_1j σ_1j, Σ_j g_2j σ_2j)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    entries: Vec<(f64, f64, f64)>,
    pub symmetric_fast_path: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl ThermalState {
    /// Uses the magnetization fast path when couplings are uniform within
    /// each bath and the pair rule is permutation symmetric.
    pub fn new(cfg: &SpinStarConfig) -> Result<Self, SpinStarError> {
        cfg.validate()?;
        match (cfg.uniform_couplings(), cfg.pair_rule) {
            (Some((g1, g2)), PairRule::CompleteGraph) => Ok(Self::symmetric(cfg, g1, g2)),
            _ => Self::enumerate(cfg),
        }
    }

    /// Full `2^(n1+n2)` enumeration.
    pub fn enumerate(cfg: &SpinStarConfig) -> Result<Self, SpinStarError> {
        let weights = thermal_weights(cfg)?;
        let n = cfg.total_spins();
        let mut spins = vec![0i8; n];
        let entries = weights
            .into_iter()
            .enumerate()
            .map(|(idx, w)| {
                decode(idx, n, &mut spins);
                let m1: f64 = cfg.g1.iter().zip(&spins[..cfg.n1]).map(|(g, &s)| g * s as f64).sum();
                let m2: f64 = cfg.g2.iter().zip(&spins[cfg.n1..]).map(|(g, &s)| g * s as f64).sum();
                (w, m1, m2)
            })
            .collect();
        Ok(Self {
            entries,
            symmetric_fast_path: false,
        })
    }

    /// Groups configurations by the number of down spins `k_i` in each bath;
    /// both the energy and the phases depend on nothing else.
    fn symmetric(cfg: &SpinStarConfig, g1: f64, g2: f64) -> Self {
        let representative = |n: usize, k: usize| -> Vec<i8> {
            (0..n).map(|j| if j < k { -1 } else { 1 }).collect()
        };
        let mut energies = Vec::new();
        let mut degeneracies = Vec::new();
        let mut moments = Vec::new();
        for k1 in 0..=cfg.n1 {
            for k2 in 0..=cfg.n2 {
                let mut spins = representative(cfg.n1, k1);
                spins.extend(representative(cfg.n2, k2));
                energies.push(cfg.energy_unchecked(&spins));
                degeneracies.push(binomial(cfg.n1, k1) * binomial(cfg.n2, k2));
                let m1 = (cfg.n1 as f64 - 2.0 * k1 as f64) * g1;
                let m2 = (cfg.n2 as f64 - 2.0 * k2 as f64) * g2;
                moments.push((m1, m2));
            }
        }
        let weights = boltzmann(&energies, Some(&degeneracies), cfg.beta);
        let entries = weights
            .into_iter()
            .zip(moments)
            .map(|(w, (m1, m2))| (w, m1, m2))
            .collect();
        Self {
            entries,
            symmetric_fast_path: true,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.0).sum()
    }
}

/// Accumulated interaction angles `Θ_i = ∫_0^t η_i(t') dt'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaPair {
    pub theta1: f64,
    pub theta2: f64,
}

pub fn eval_spinstar_factors(state: &ThermalState, th: ThetaPair) -> DephasingFactors {
    let mut sums = [Complex64::new(0.0, 0.0); 4];
    for &(w, m1, m2) in &state.entries {
        let p1 = -2.0 * th.theta1 * m1;
        let p2 = -2.0 * th.theta2 * m2;
        for (acc, phase) in sums.iter_mut().zip([p1, p2, p1 - p2, p1 + p2]) {
            *acc += Complex64::from_polar(w, phase);
        }
    }
    DephasingFactors::real(sums[0].norm(), sums[1].norm(), sums[2].norm(), sums[3].norm())
}

/// Scan with `Θ1(t) = rate * t` and `Θ2` held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarScan {
    pub state: ThermalState,
    pub theta1_rate: f64,
    pub theta2: f64,
}

impl FactorModel for SpinStarScan {
    type Error = SpinStarError;
    fn factors_at(&self, t: f64) -> Result<DephasingFactors, SpinStarError> {
        Ok(eval_spinstar_factors(
            &self.state,
            ThetaPair {
                theta1: self.theta1_rate * t,
                theta2: self.theta2,
            },
        ))
    }
}

pub fn run_figure_scan(
    cfg: &SpinStarConfig,
    theta1_rate: f64,
    theta2: f64,
    grid: Grid,
) -> Result<FactorSeries, SpinStarError> {
    let scan = SpinStarScan {
        state: ThermalState::new(cfg)?,
        theta1_rate,
        theta2,
    };
    analysis::sample(&scan, grid).map_err(|e| e.source)
}
