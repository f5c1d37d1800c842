//! Frequency-continuum environments with classically correlated initial
//! states.
//!
//! Each decoherence function is a half-line Gaussian cosine transform
//!
//! ```text
//!   |2 Z ∫_0^∞ exp(-(w - w0)^2) cos((p t + q) w + (r t + s)) dw|
//! ```
//!
//! so a scenario is fully described by the envelope center `w0` and one
//! affine [`KernelPhase`] per factor. Coupling schedules are handled by
//! [`derive_kernels`], which tracks the accumulated phase
//! `Θ_i(t) = 2 ∫_0^t g_i(s) ds` of each environment.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::FactorModel;
use crate::map::DephasingFactors;
use crate::quad::{self, GaussCosIntegrand, QuadError, QuadratureSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid coupling schedule: {0}")]
    InvalidSchedule(String),
    #[error("factor {factor} is {value} at t = 0, expected 1")]
    NotUnitAtOrigin { factor: &'static str, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Total phase `(p t + q) w + (r t + s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelPhase {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl KernelPhase {
    pub const fn new(p: f64, q: f64, r: f64, s: f64) -> Self {
        Self { p, q, r, s }
    }

    pub fn slope_at(&self, t: f64) -> f64 {
        self.p * t + self.q
    }

    pub fn offset_at(&self, t: f64) -> f64 {
        self.r * t + self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMode {
    /// Modulus of the printed cosine transform.
    #[default]
    CosineTransform,
    /// Cosine and sine transforms combined in quadrature.
    ComplexModulus,
}

impl TransformMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransformMode::CosineTransform => "cosine_transform",
            TransformMode::ComplexModulus => "complex_modulus",
        }
    }
}

impl fmt::Display for TransformMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine_transform" => Ok(TransformMode::CosineTransform),
            "complex_modulus" => Ok(TransformMode::ComplexModulus),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Eq5,
    Eq7,
    Eq9,
    Eq10,
    Eq11,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Eq5, Preset::Eq7, Preset::Eq9, Preset::Eq10, Preset::Eq11];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Eq5 => "eq5",
            Preset::Eq7 => "eq7",
            Preset::Eq9 => "eq9",
            Preset::Eq10 => "eq10",
            Preset::Eq11 => "eq11",
        }
    }

    /// Presets written in the shifted clock `t' = t - 1` (after the coupling switch).
    pub fn is_shifted(&self) -> bool {
        matches!(self, Preset::Eq10 | Preset::Eq11)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| KernelError::UnknownPreset(s.to_string()))
    }
}

/// Indexes the four factors in `k1, k2, k12, l12` order.
pub const FACTOR_NAMES: [&str; 4] = ["kappa1", "kappa2", "kappa12", "lambda12"];

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyScenario {
    pub w0: f64,
    /// Phase kernels for `k1, k2, k12, l12`.
    pub kernels: [KernelPhase; 4],
    /// Factors pinned to a constant value instead of being integrated.
    pub constant_overrides: [Option<f64>; 4],
    pub mode: TransformMode,
    /// Offset of the kernels' clock from the interaction onset: the control
    /// presets are written in `t' = t - time_shift` and evaluated in `t'`.
    pub time_shift: f64,
    pub settings: QuadratureSettings,
    z: f64,
}

impl FrequencyScenario {
    pub fn new(
        w0: f64,
        kernels: [KernelPhase; 4],
        constant_overrides: [Option<f64>; 4],
        mode: TransformMode,
        time_shift: f64,
    ) -> Result<Self, KernelError> {
        let z = quad::normalization(w0)?;
        let sc = Self {
            w0,
            kernels,
            constant_overrides,
            mode,
            time_shift,
            settings: QuadratureSettings::default(),
            z,
        };
        if time_shift == 0.0 {
            let f = sc.eval_factors(0.0)?;
            for (k, value) in f.moduli().into_iter().enumerate() {
                if (value - 1.0).abs() > 1e-9 {
                    return Err(KernelError::NotUnitAtOrigin {
                        factor: FACTOR_NAMES[k],
                        value,
                    });
                }
            }
        }
        Ok(sc)
    }

    pub fn with_mode(mut self, mode: TransformMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn normalization(&self) -> f64 {
        self.z
    }

    pub fn eval_factor(&self, index: usize, t: f64) -> Result<f64, KernelError> {
        if let Some(v) = self.constant_overrides[index] {
            return Ok(v);
        }
        let k = &self.kernels[index];
        half_line_transform(self.w0, self.z, k.slope_at(t), k.offset_at(t), self.mode, &self.settings)
    }

    pub fn eval_factors(&self, t: f64) -> Result<DephasingFactors, KernelError> {
        Ok(DephasingFactors::real(
            self.eval_factor(0, t)?,
            self.eval_factor(1, t)?,
            self.eval_factor(2, t)?,
            self.eval_factor(3, t)?,
        ))
    }
}

/// `|2 Z ∫_0^∞ exp(-(w - w0)^2) e^{i(slope w + offset)} dw|`, either the
/// real part only or the full complex modulus.
fn half_line_transform(
    w0: f64,
    z: f64,
    slope: f64,
    offset: f64,
    mode: TransformMode,
    qs: &QuadratureSettings,
) -> Result<f64, KernelError> {
    let re = quad::integrate_gauss_cos(&GaussCosIntegrand::new(w0, slope, offset), qs)?;
    let value = match mode {
        TransformMode::CosineTransform => re.abs(),
        TransformMode::ComplexModulus => {
            let im =
                quad::integrate_gauss_cos(&GaussCosIntegrand::new(w0, slope, offset - FRAC_PI_2), qs)?;
            re.hypot(im)
        }
    };
    Ok(2.0 * z * value)
}

impl FactorModel for FrequencyScenario {
    type Error = KernelError;
    fn factors_at(&self, t: f64) -> Result<DephasingFactors, KernelError> {
        self.eval_factors(t)
    }
}

/// Literal transcription of the printed decoherence functions. `g` is used by
/// the constant-coupling presets; the control presets carry their couplings
/// in the kernel coefficients and are expressed in the shifted clock `t'`.
pub fn scenario_preset(preset: Preset, g: f64) -> Result<FrequencyScenario, KernelError> {
    let k = KernelPhase::new;
    let (w0, kernels, overrides) = match preset {
        Preset::Eq5 => (
            1.0,
            [k(2.0 * g, 0.0, 0.0, 0.0), k(2.0 * g, 0.0, 0.0, 0.0), k(0.0, 0.0, 0.0, 0.0), k(4.0 * g, 0.0, 0.0, 0.0)],
            [None, None, Some(1.0), None],
        ),
        Preset::Eq7 => (
            0.0,
            [k(2.0 * g, 0.0, 0.0, 0.0), k(2.0 * g, 0.0, 2.0 * g, 0.0), k(0.0, 0.0, 2.0 * g, 0.0), k(4.0 * g, 0.0, 2.0 * g, 0.0)],
            [None; 4],
        ),
        Preset::Eq9 => (
            0.0,
            [k(2.0 * g, 0.0, 0.0, 0.0), k(2.0 * g, 0.0, 0.0, 0.0), k(0.0, 0.0, 0.0, 0.0), k(4.0 * g, 0.0, 0.0, 0.0)],
            [None, None, Some(1.0), None],
        ),
        Preset::Eq10 => (
            0.0,
            [k(1.0, 3.0, 0.0, 0.0), k(2.0, 2.0, 0.0, 0.0), k(-1.0, 1.0, 0.0, 0.0), k(3.0, 5.0, 0.0, 0.0)],
            [None; 4],
        ),
        Preset::Eq11 => (
            0.0,
            [k(1.0, 2.0, 0.0, 0.0), k(2.0, 1.0, 0.0, 0.0), k(-1.0, 1.0, 0.0, 0.0), k(5.0, 3.0, 0.0, 0.0)],
            [None; 4],
        ),
    };
    let shift = if preset.is_shifted() { 1.0 } else { 0.0 };
    FrequencyScenario::new(w0, kernels, overrides, TransformMode::CosineTransform, shift)
}

/// Piecewise-constant coupling `g(t)`: `breakpoints[k] = (t_k, g_k)` holds on
/// `[t_k, t_{k+1})`; the coupling is zero before the first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSchedule {
    breakpoints: Vec<(f64, f64)>,
}

impl CouplingSchedule {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, KernelError> {
        if breakpoints.is_empty() {
            return Err(KernelError::InvalidSchedule("no breakpoints".into()));
        }
        if breakpoints.iter().any(|&(t, g)| !t.is_finite() || !g.is_finite()) {
            return Err(KernelError::InvalidSchedule("non-finite entry".into()));
        }
        if breakpoints[0].0 < 0.0 {
            return Err(KernelError::InvalidSchedule("negative start time".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(KernelError::InvalidSchedule("times must be strictly increasing".into()));
        }
        Ok(Self { breakpoints })
    }

    pub fn constant(g: f64) -> Self {
        Self {
            breakpoints: vec![(0.0, g)],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|&(t, g)| (t, g * factor)).collect(),
        }
    }

    pub fn coupling_at(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .rev()
            .find(|&&(tk, _)| t >= tk)
            .map_or(0.0, |&(_, g)| g)
    }

    /// `∫_0^t g(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &(start, g)) in self.breakpoints.iter().enumerate() {
            if t <= start {
                break;
            }
            let end = self.breakpoints.get(k + 1).map_or(f64::INFINITY, |b| b.0);
            acc += g * (t.min(end) - start);
        }
        acc
    }

    /// Accumulated phase `Θ(t) = 2 ∫_0^t g(s) ds`.
    pub fn phase(&self, t: f64) -> f64 {
        2.0 * self.integral(t)
    }
}

/// Scenario built from environment offsets `c_i` and coupling schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledScenario {
    pub c1: f64,
    pub c2: f64,
    pub sch1: CouplingSchedule,
    pub sch2: CouplingSchedule,
    pub w0: f64,
    pub mode: TransformMode,
    pub settings: QuadratureSettings,
    z: f64,
}

pub fn derive_kernels(
    c1: f64,
    c2: f64,
    sch1: CouplingSchedule,
    sch2: CouplingSchedule,
    w0: f64,
) -> Result<ScheduledScenario, KernelError> {
    Ok(ScheduledScenario {
        c1,
        c2,
        sch1,
        sch2,
        w0,
        mode: TransformMode::CosineTransform,
        settings: QuadratureSettings::default(),
        z: quad::normalization(w0)?,
    })
}

impl ScheduledScenario {
    pub fn with_mode(mut self, mode: TransformMode) -> Self {
        self.mode = mode;
        self
    }

    /// Instantaneous kernels: phase `φ_i = (w + c_i) Θ_i(t)`, with
    /// `k1 <- φ1`, `k2 <- φ2`, `k12 <- φ1 - φ2`, `l12 <- φ1 + φ2`.
    pub fn kernels_at(&self, t: f64) -> [(f64, f64); 4] {
        let th1 = self.sch1.phase(t);
        let th2 = self.sch2.phase(t);
        [
            (th1, self.c1 * th1),
            (th2, self.c2 * th2),
            (th1 - th2, self.c1 * th1 - self.c2 * th2),
            (th1 + th2, self.c1 * th1 + self.c2 * th2),
        ]
    }

    pub fn eval_factors(&self, t: f64) -> Result<DephasingFactors, KernelError> {
        let mut out = [0.0; 4];
        for (slot, (slope, offset)) in out.iter_mut().zip(self.kernels_at(t)) {
            *slot = half_line_transform(self.w0, self.z, slope, offset, self.mode, &self.settings)?;
        }
        Ok(DephasingFactors::real(out[0], out[1], out[2], out[3]))
    }
}

impl FactorModel for ScheduledScenario {
    type Error = KernelError;
    fn factors_at(&self, t: f64) -> Result<DephasingFactors, KernelError> {
        self.eval_factors(t)
    }
}
