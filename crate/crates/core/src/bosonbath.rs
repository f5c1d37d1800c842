//! Ohmic boson baths that pick up classical correlations from a decohering
//! Bell pair before the system qubits couple to them.
//!
//! With spectral density `A w exp(-w/Ω)` the decoherence functions are
//!
//! ```text
//!   |κ1|  = |exp(-Γ1) cos Ξ1|
//!   |Λ12| = |exp(-Γ1 - Γ2) cos(Ξ1 + Ξ2)|
//!   Γ_i   = ∫ A_i e^{-w/Ω_i} coth(2w/β) (1 - cos(w t_i)) dw
//!   Ξ_i   = ∫ A_i e^{-w/Ω_i} ξ_i(w) dw
//!   ξ_i   = 2 sin(w (t_i - t'_i)) - 2 sin(w t_i) + 2 sin(w t'_i)
//! ```
//!
//! where `t_i` and `t'_i` are the accumulated system and ancilla interaction
//! times.

use thiserror::Error;

use crate::analysis::FactorModel;
use crate::map::DephasingFactors;
use crate::quad::{self, QuadError, QuadratureSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BosonError {
    #[error("invalid bath configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid interaction clock: {0}")]
    InvalidClock(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicBathConfig {
    pub a1: f64,
    pub a2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub beta: f64,
}

impl OhmicBathConfig {
    pub fn new(a1: f64, a2: f64, omega1: f64, omega2: f64, beta: f64) -> Result<Self, BosonError> {
        let cfg = Self {
            a1,
            a2,
            omega1,
            omega2,
            beta,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BosonError> {
        if !(self.a1 >= 0.0 && self.a2 >= 0.0) {
            return Err(BosonError::InvalidConfig("coupling constants must be >= 0".into()));
        }
        if !(self.omega1 > 0.0 && self.omega2 > 0.0) {
            return Err(BosonError::InvalidConfig("cutoff frequencies must be > 0".into()));
        }
        if !(self.beta > 0.0) {
            return Err(BosonError::InvalidConfig("beta must be > 0".into()));
        }
        Ok(())
    }

    fn bath(&self, i: Env) -> (f64, f64) {
        match i {
            Env::One => (self.a1, self.omega1),
            Env::Two => (self.a2, self.omega2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Env {
    One,
    Two,
}

/// Accumulated interaction time `offset + ∫_0^t χ(s) ds`, where `χ` is the
/// indicator of a set of disjoint switch-on windows. The offset carries
/// interaction time accrued before the observed window.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockFn {
    pub offset: f64,
    pub windows: Vec<(f64, f64)>,
}

impl ClockFn {
    pub fn new(offset: f64, windows: Vec<(f64, f64)>) -> Result<Self, BosonError> {
        if !(offset >= 0.0) {
            return Err(BosonError::InvalidClock(format!("offset {offset} < 0")));
        }
        for &(s, f) in &windows {
            if !(s >= 0.0 && f >= s) {
                return Err(BosonError::InvalidClock(format!("bad window [{s}, {f}]")));
            }
        }
        if windows.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(BosonError::InvalidClock("windows must be ordered and disjoint".into()));
        }
        Ok(Self { offset, windows })
    }

    /// Never switched on.
    pub fn off() -> Self {
        Self {
            offset: 0.0,
            windows: Vec::new(),
        }
    }

    /// Switched on from `t = 0` onwards.
    pub fn always_on() -> Self {
        Self {
            offset: 0.0,
            windows: vec![(0.0, f64::INFINITY)],
        }
    }

    /// Frozen at a value accrued before `t = 0`.
    pub fn frozen(value: f64) -> Self {
        Self {
            offset: value,
            windows: Vec::new(),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.offset
            + self
                .windows
                .iter()
                .map(|&(s, f)| (t.min(f) - s).max(0.0))
                .sum::<f64>()
    }
}

/// System and ancilla clocks of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionClock {
    pub t_sys: ClockFn,
    pub t_anc: ClockFn,
}

impl InteractionClock {
    pub fn new(t_sys: ClockFn, t_anc: ClockFn) -> Self {
        Self { t_sys, t_anc }
    }

    pub fn fresh() -> Self {
        Self::new(ClockFn::off(), ClockFn::off())
    }
}

/// Environment-2 quantities frozen at fixed values (Γ2 and Ξ2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenEnv2 {
    pub gamma2_const: f64,
    pub xi2_phase_const: f64,
}

/// Below this value of `2w/β` the `coth` factor is replaced by its Laurent series.
const SERIES_CUTOFF: f64 = 1e-4;
/// Integration runs to `TAIL * Ω`, where `e^{-w/Ω}` is below 1e-26.
const TAIL: f64 = 60.0;

/// `coth(2w/β) (1 - cos(w τ))`, continuous at `w = 0`.
fn decoherence_kernel(w: f64, tau: f64, beta: f64) -> f64 {
    let half = 0.5 * w * tau;
    let one_minus_cos = 2.0 * half.sin().powi(2);
    let x = 2.0 * w / beta;
    if x < SERIES_CUTOFF {
        // coth x = 1/x + x/3 - x^3/45 + ..., and (1 - cos)/x = β w τ^2 sinc^2(h) / 4
        let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
        let leading = 0.25 * beta * w * tau * tau * sinc * sinc;
        leading + one_minus_cos * (x / 3.0 - x.powi(3) / 45.0)
    } else {
        one_minus_cos / x.tanh()
    }
}

fn settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        ..QuadratureSettings::default()
    }
}

fn ohmic_integral(
    amplitude: f64,
    omega: f64,
    max_freq: f64,
    kernel: impl Fn(f64) -> f64,
) -> Result<f64, BosonError> {
    if amplitude == 0.0 {
        return Ok(0.0);
    }
    let width = quad::period_aware_width(max_freq, 0.5 * omega);
    let est = quad::adaptive_integrate(
        |w| (-w / omega).exp() * kernel(w),
        0.0,
        TAIL * omega,
        width,
        &settings(),
    )?;
    Ok(amplitude * est.value)
}

/// `Γ_i(t)`.
pub fn gamma(
    cfg: &OhmicBathConfig,
    clock: &InteractionClock,
    i: Env,
    t: f64,
) -> Result<f64, BosonError> {
    let (a, omega) = cfg.bath(i);
    let tau = clock.t_sys.at(t);
    if tau == 0.0 {
        return Ok(0.0);
    }
    ohmic_integral(a, omega, tau, |w| decoherence_kernel(w, tau, cfg.beta))
}

/// `Ξ_i(t)`.
pub fn xi_phase(
    cfg: &OhmicBathConfig,
    clock: &InteractionClock,
    i: Env,
    t: f64,
) -> Result<f64, BosonError> {
    let (a, omega) = cfg.bath(i);
    let ts = clock.t_sys.at(t);
    let ta = clock.t_anc.at(t);
    if ts == 0.0 || ta == 0.0 {
        return Ok(0.0);
    }
    let max_freq = ts.max(ta).max((ts - ta).abs());
    ohmic_integral(a, omega, max_freq, |w| {
        2.0 * (w * (ts - ta)).sin() - 2.0 * (w * ts).sin() + 2.0 * (w * ta).sin()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BosonScenario {
    pub cfg: OhmicBathConfig,
    pub clock1: InteractionClock,
    pub clock2: InteractionClock,
    pub frozen: Option<FrozenEnv2>,
}

impl BosonScenario {
    /// Parameters of the boson-bath figure: `A1 = 1`, `β = 0.2`,
    /// `Ω1 = 1` (unstated, fixed here), `t1(t) = t`, `t'1 = t'2 = 1`, with
    /// `Γ2 = 0.5` and `Ξ2 = π/2` frozen.
    pub fn figure6() -> Self {
        Self {
            cfg: OhmicBathConfig {
                a1: 1.0,
                a2: 1.0,
                omega1: 1.0,
                omega2: 1.0,
                beta: 0.2,
            },
            clock1: InteractionClock::new(ClockFn::always_on(), ClockFn::frozen(1.0)),
            clock2: InteractionClock::new(ClockFn::off(), ClockFn::frozen(1.0)),
            frozen: Some(FrozenEnv2 {
                gamma2_const: 0.5,
                xi2_phase_const: std::f64::consts::FRAC_PI_2,
            }),
        }
    }

    /// `(|κ1|, |Λ12|)` at time `t`.
    pub fn eval_boson_factors(&self, t: f64) -> Result<(f64, f64), BosonError> {
        let g1 = gamma(&self.cfg, &self.clock1, Env::One, t)?;
        let x1 = xi_phase(&self.cfg, &self.clock1, Env::One, t)?;
        let (g2, x2) = match self.frozen {
            Some(fz) => (fz.gamma2_const, fz.xi2_phase_const),
            None => (
                gamma(&self.cfg, &self.clock2, Env::Two, t)?,
                xi_phase(&self.cfg, &self.clock2, Env::Two, t)?,
            ),
        };
        let kappa1 = ((-g1).exp() * x1.cos()).abs();
        let lambda12 = ((-g1 - g2).exp() * (x1 + x2).cos()).abs();
        Ok((kappa1, lambda12))
    }
}

impl FactorModel for BosonScenario {
    type Error = BosonError;

    /// `κ2` and `κ12` are not defined for this model and come back as NaN.
    fn factors_at(&self, t: f64) -> Result<DephasingFactors, BosonError> {
        let (k1, l12) = self.eval_boson_factors(t)?;
        Ok(DephasingFactors::real(k1, f64::NAN, f64::NAN, l12))
    }

    fn defined_factors(&self) -> [bool; 4] {
        [true, false, false, true]
    }
}
