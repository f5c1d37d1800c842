//! Information-backflow analysis on uniformly sampled decoherence traces.
//!
//! For a pair of single-qubit states dephased by `γ(t)` the trace distance is
//! `D = sqrt(|b1 - b2|^2 |γ|^2 + (a1 - a2)^2)`, so `dD/dt > 0` exactly when
//! `d|γ|/dt > 0` (as long as `b1 != b2`). The backflow measure therefore
//! reduces to the total rise of `|γ|`, attained by an antipodal equatorial
//! pair; [`blp_measure_grid`] checks that claim by brute force.

use rayon::prelude::*;
use thiserror::Error;

use crate::map::{DephasingFactors, QubitState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("index {index} has no neighbours on a grid of {len} points")]
    BoundaryIndex { index: usize, len: usize },
    #[error("reports were computed on different grids")]
    MismatchedGrids,
    #[error("state grid needs at least 5 points per axis, got {0}")]
    GridTooCoarse(usize),
}

/// Uniform time grid `t0, t0 + dt, ..., t0 + (len - 1) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl Grid {
    /// Grid covering `[t0, t_max]`; the last point is the largest
    /// `t0 + k dt` not exceeding `t_max` (up to round-off).
    pub fn new(t0: f64, dt: f64, t_max: f64) -> Result<Self, AnalysisError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(AnalysisError::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if !(t_max > t0) {
            return Err(AnalysisError::InvalidGrid(format!(
                "t_max = {t_max} must exceed t0 = {t0}"
            )));
        }
        let steps = ((t_max - t0) / dt + 1e-9).floor() as usize;
        let grid = Self {
            t0,
            dt,
            len: steps + 1,
        };
        if grid.len < 3 {
            return Err(AnalysisError::InvalidGrid(format!("only {} points", grid.len)));
        }
        Ok(grid)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.time(i))
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.len - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if !(dt > 0.0) {
            return Err(AnalysisError::InvalidGrid(format!("dt = {dt} must be positive")));
        }
        if values.len() < 3 {
            return Err(AnalysisError::InvalidGrid(format!(
                "need at least 3 samples, got {}",
                values.len()
            )));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t0: grid.t0,
            dt: grid.dt,
            values: grid.times().map(f).collect(),
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            t0: self.t0,
            dt: self.dt,
            len: self.values.len(),
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Anything that yields the four decoherence functions at a time point.
pub trait FactorModel: Sync {
    type Error: Send;
    fn factors_at(&self, t: f64) -> Result<DephasingFactors, Self::Error>;

    /// Which of `k1, k2, k12, l12` the model actually defines.
    fn defined_factors(&self) -> [bool; 4] {
        [true; 4]
    }
}

/// Moduli of the four factors sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    pub grid: Grid,
    /// `k1, k2, k12, l12` moduli.
    pub traces: [Vec<f64>; 4],
}

impl FactorSeries {
    pub fn series(&self, index: usize) -> TimeSeries {
        TimeSeries {
            t0: self.grid.t0,
            dt: self.grid.dt,
            values: self.traces[index].clone(),
        }
    }

    pub fn kappa1(&self) -> TimeSeries {
        self.series(0)
    }

    pub fn kappa2(&self) -> TimeSeries {
        self.series(1)
    }

    pub fn kappa12(&self) -> TimeSeries {
        self.series(2)
    }

    pub fn lambda12(&self) -> TimeSeries {
        self.series(3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleError<E> {
    pub t: f64,
    pub source: E,
}

/// Evaluates `model` on every grid point (in parallel). Results are ordered
/// by time; on failure the earliest failing time is reported.
pub fn sample<M: FactorModel>(model: &M, grid: Grid) -> Result<FactorSeries, SampleError<M::Error>> {
    let evaluated: Vec<_> = (0..grid.len)
        .into_par_iter()
        .map(|i| model.factors_at(grid.time(i)).map(|f| f.moduli()))
        .collect();
    let mut traces: [Vec<f64>; 4] = Default::default();
    for tr in traces.iter_mut() {
        tr.reserve(grid.len);
    }
    for (i, r) in evaluated.into_iter().enumerate() {
        match r {
            Ok(m) => {
                for k in 0..4 {
                    traces[k].push(m[k]);
                }
            }
            Err(source) => {
                return Err(SampleError {
                    t: grid.time(i),
                    source,
                })
            }
        }
    }
    Ok(FactorSeries { grid, traces })
}

/// Trace distance of two single-qubit states after dephasing with `|γ| = gamma_mod`.
pub fn trace_distance(s1: &QubitState, s2: &QubitState, gamma_mod: f64) -> f64 {
    let db = (s1.b - s2.b).norm();
    let dpop = s1.a - s2.a + s2.d() - s1.d();
    (db * db * gamma_mod * gamma_mod + dpop * dpop / 4.0).sqrt()
}

/// Central-difference `dD/dt` at an interior grid index.
pub fn sigma_rate(
    series: &TimeSeries,
    s1: &QubitState,
    s2: &QubitState,
    index: usize,
) -> Result<f64, AnalysisError> {
    let len = series.len();
    if index == 0 || index + 1 >= len {
        return Err(AnalysisError::BoundaryIndex { index, len });
    }
    let (g_up, g_down) = (series.values[index + 1], series.values[index - 1]);
    let up = trace_distance(s1, s2, g_up);
    let down = trace_distance(s1, s2, g_down);
    if up + down == 0.0 {
        return Ok(0.0);
    }
    // D_up - D_down in rationalized form keeps the sign of the |γ| increment
    let db2 = (s1.b - s2.b).norm_sqr();
    let diff = db2 * (g_up - g_down) * (g_up + g_down) / (up + down);
    Ok(diff / (2.0 * series.dt))
}

/// Maximal runs `[start, end]` of strictly increasing samples.
fn increasing_runs(values: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for i in 0..values.len().saturating_sub(1) {
        let grows = values[i + 1] - values[i] > threshold;
        match (grows, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len() - 1));
    }
    runs
}

/// Backflow measure for a dephasing channel with decoherence trace `|γ|`:
/// the total rise of `|γ|` over its increasing runs.
pub fn blp_measure_dephasing(series: &TimeSeries) -> f64 {
    increasing_runs(&series.values, 0.0)
        .into_iter()
        .map(|(s, e)| series.values[e] - series.values[s])
        .fold(0.0, |acc, g| acc + g)
}

fn pair_gain(values: &[f64], dpop: f64, db: f64) -> f64 {
    let d = |g: f64| (dpop * dpop + db * db * g * g).sqrt();
    values
        .windows(2)
        .map(|w| d(w[1]) - d(w[0]))
        .filter(|&x| x > 0.0)
        .fold(0.0, |acc, g| acc + g)
}

/// Brute-force maximization of the backflow integral over a grid of state
/// pairs: populations on `m` points of `[0, 1]`, coherences on an `m x m`
/// Cartesian grid of `[-1/2, 1/2]^2` restricted to each state's disc.
///
/// The gain of a pair depends only on `|a1 - a2|` and `|b1 - b2|` and each
/// positive increment grows with `|b1 - b2|`, so for every population pair
/// only the largest coherence separation on the grid needs to be scored.
pub fn blp_measure_grid(series: &TimeSeries, m: usize) -> Result<f64, AnalysisError> {
    if m < 5 {
        return Err(AnalysisError::GridTooCoarse(m));
    }
    let axis: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let coh_axis: Vec<f64> = axis.iter().map(|x| x - 0.5).collect();
    let discs: Vec<Vec<(f64, f64)>> = axis
        .iter()
        .map(|&a| {
            let r2 = a * (1.0 - a);
            let mut pts = Vec::new();
            for &x in &coh_axis {
                for &y in &coh_axis {
                    if x * x + y * y <= r2 + 1e-15 {
                        pts.push((x, y));
                    }
                }
            }
            pts
        })
        .collect();

    let best = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in i..m {
                let mut db2: f64 = 0.0;
                for &(x1, y1) in &discs[i] {
                    for &(x2, y2) in &discs[j] {
                        db2 = db2.max((x1 - x2).powi(2) + (y1 - y2).powi(2));
                    }
                }
                best = best.max(pair_gain(&series.values, axis[i] - axis[j], db2.sqrt()));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthInterval {
    pub start: f64,
    pub end: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackflowReport {
    pub grid: Grid,
    /// First time of growth, refined below the grid spacing.
    pub onset: Option<f64>,
    pub intervals: Vec<GrowthInterval>,
    pub total_gain: f64,
}

impl BackflowReport {
    pub fn has_growth(&self) -> bool {
        !self.intervals.is_empty()
    }

    /// Whether any growth interval starts strictly before `t`.
    pub fn grows_before(&self, t: f64) -> bool {
        self.intervals.iter().any(|iv| iv.start < t)
    }
}

pub const DEFAULT_EPS: f64 = 1e-9;

/// Vertex of the parabola through samples `i - 1, i, i + 1`, as an offset in
/// grid steps clamped to `[-1, 1]`.
fn parabolic_offset(values: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= values.len() {
        return 0.0;
    }
    let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
    let curvature = l - 2.0 * c + r;
    if curvature <= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / curvature).clamp(-1.0, 1.0)
}

/// Growth detection with threshold `eps * max(series)` on forward differences.
pub fn detect_backflow(series: &TimeSeries, eps: f64) -> BackflowReport {
    let scale = series.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = eps * scale;
    let runs = increasing_runs(&series.values, threshold);
    let intervals: Vec<GrowthInterval> = runs
        .iter()
        .map(|&(s, e)| GrowthInterval {
            start: series.time(s),
            end: series.time(e),
            gain: series.values[e] - series.values[s],
        })
        .collect();
    let onset = runs
        .first()
        .map(|&(s, _)| series.time(s) + parabolic_offset(&series.values, s) * series.dt);
    let total_gain = intervals.iter().map(|iv| iv.gain).fold(0.0, |acc, g| acc + g);
    BackflowReport {
        grid: series.grid(),
        onset,
        intervals,
        total_gain,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnsetOrdering {
    GlobalEarlier,
    GlobalSimultaneous,
    GlobalLater,
    GlobalNever,
}

impl OnsetOrdering {
    pub fn as_str(&self) -> &'static str {
        match self {
            OnsetOrdering::GlobalEarlier => "global-earlier",
            OnsetOrdering::GlobalSimultaneous => "global-simultaneous",
            OnsetOrdering::GlobalLater => "global-later",
            OnsetOrdering::GlobalNever => "global-never",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsetComparison {
    pub ordering: OnsetOrdering,
    pub global_onset: Option<f64>,
    /// Earlier of the two local onsets.
    pub local_onset: Option<f64>,
    pub local_never: bool,
}

/// Orders the global backflow onset against the earliest local one. Onsets
/// within half a grid step count as simultaneous.
pub fn compare_onsets(
    local1: &BackflowReport,
    local2: &BackflowReport,
    global12: &BackflowReport,
) -> Result<OnsetComparison, AnalysisError> {
    if local1.grid != global12.grid || local2.grid != global12.grid {
        return Err(AnalysisError::MismatchedGrids);
    }
    let local_onset = match (local1.onset, local2.onset) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    let ordering = match (global12.onset, local_onset) {
        (None, _) => OnsetOrdering::GlobalNever,
        (Some(_), None) => OnsetOrdering::GlobalEarlier,
        (Some(g), Some(l)) => {
            let tol = 0.5 * global12.grid.dt;
            if (g - l).abs() <= tol {
                OnsetOrdering::GlobalSimultaneous
            } else if g < l {
                OnsetOrdering::GlobalEarlier
            } else {
                OnsetOrdering::GlobalLater
            }
        }
    };
    Ok(OnsetComparison {
        ordering,
        global_onset: global12.onset,
        local_onset,
        local_never: local_onset.is_none(),
    })
}

/// Index of the first interior sample lower than its left neighbour and not
/// higher than its right one.
pub fn first_local_minimum(series: &TimeSeries) -> Option<usize> {
    let v = &series.values;
    (1..v.len().saturating_sub(1)).find(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub fn golden_section_min<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64, E> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First local minimum of a continuous trace: located on the grid, then
/// refined by golden section within the neighbouring grid cells.
pub fn refine_first_minimum<E>(
    series: &TimeSeries,
    f: impl FnMut(f64) -> Result<f64, E>,
    tol: f64,
) -> Result<Option<f64>, E> {
    match first_local_minimum(series) {
        None => Ok(None),
        Some(i) => golden_section_min(f, series.time(i - 1), series.time(i + 1), tol).map(Some),
    }
}
