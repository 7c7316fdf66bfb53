//! Growth laws, saturation values and times, scaling regressions and
//! curve distances.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::curve::EntropyCurve;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("window [{lo}, {hi}] holds {found} usable samples, need at least {need}")]
    Window { lo: f64, hi: f64, found: usize, need: usize },
    #[error("cannot estimate: {0}")]
    Estimation(String),
    #[error("regression needs at least 3 points with a spread in x, got {0}")]
    Data(usize),
    #[error("curves do not both cover [{lo}, {hi}]")]
    Alignment { lo: f64, hi: f64 },
    #[error("invalid analysis setting: {0}")]
    Config(String),
}

/// Functional form of the average growth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GrowthModel {
    /// `S = a + b ln t`
    Logarithmic,
    /// `S = a + b t`
    Linear,
}

impl GrowthModel {
    pub fn name(self) -> &'static str {
        match self {
            GrowthModel::Logarithmic => "log",
            GrowthModel::Linear => "linear",
        }
    }

    fn transform(self, t: f64) -> f64 {
        match self {
            GrowthModel::Logarithmic => t.ln(),
            GrowthModel::Linear => t,
        }
    }
}

impl fmt::Display for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GrowthModel {
    type Err = AnalysisError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log" | "logarithmic" => Ok(GrowthModel::Logarithmic),
            "linear" => Ok(GrowthModel::Linear),
            other => Err(AnalysisError::Config(format!("unknown growth model {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFit {
    pub model: GrowthModel,
    pub window: (f64, f64),
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl GrowthFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.a + self.b * self.model.transform(t)
    }
}

/// Ordinary least squares `y = a + b x`, returning `(a, b, r^2)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - a - b * x;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Some((a, b, r2))
}

/// Least-squares fit of `model` on the samples with `t` in `window`.
pub fn fit_growth(curve: &EntropyCurve, model: GrowthModel, window: (f64, f64)) -> Result<GrowthFit, AnalysisError> {
    let (lo, hi) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &s) in curve.times().iter().zip(curve.values()) {
        if t < lo || t > hi || (model == GrowthModel::Logarithmic && t <= 0.0) {
            continue;
        }
        xs.push(model.transform(t));
        ys.push(s);
    }
    let window_err = |found| AnalysisError::Window { lo, hi, found, need: 5 };
    if xs.len() < 5 {
        return Err(window_err(xs.len()));
    }
    let (a, b, r_squared) = least_squares(&xs, &ys).ok_or_else(|| window_err(xs.len()))?;
    Ok(GrowthFit {
        model,
        window,
        a,
        b,
        r_squared,
        samples: xs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationValue {
    pub s_bar: f64,
    pub std_error: f64,
    pub tail_window: (f64, f64),
}

/// Mean and standard error of the trailing `tail_fraction` of the samples.
pub fn saturation_value(curve: &EntropyCurve, tail_fraction: f64) -> Result<SaturationValue, AnalysisError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(AnalysisError::Config(format!("tail fraction {tail_fraction} outside (0, 0.5]")));
    }
    let n = curve.len();
    let k = ((n as f64 * tail_fraction).round() as usize).clamp(1, n.max(1));
    if n == 0 {
        return Err(AnalysisError::Window { lo: 0.0, hi: 0.0, found: 0, need: 1 });
    }
    let tail = &curve.values()[n - k..];
    let mean = tail.iter().sum::<f64>() / k as f64;
    let std_error = if k > 1 {
        let var = tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    } else {
        0.0
    };
    Ok(SaturationValue {
        s_bar: mean,
        std_error,
        tail_window: (curve.times()[n - k], curve.times()[n - 1]),
    })
}

/// Time at which `growth` reaches `s_bar`; must fall inside `curve`'s span.
pub fn saturation_time(curve: &EntropyCurve, growth: &GrowthFit, s_bar: f64) -> Result<f64, AnalysisError> {
    let t = invert_growth(growth, s_bar)?;
    let (t0, t1) = curve
        .span()
        .ok_or_else(|| AnalysisError::Estimation("empty curve".into()))?;
    if t < t0 || t > t1 {
        return Err(AnalysisError::Estimation(format!(
            "saturation time {t:.4} lies outside the curve span [{t0}, {t1}]"
        )));
    }
    Ok(t)
}

fn invert_growth(growth: &GrowthFit, s_bar: f64) -> Result<f64, AnalysisError> {
    if !(growth.b > 0.0) {
        return Err(AnalysisError::Estimation(format!("growth slope {} is not positive", growth.b)));
    }
    let x = (s_bar - growth.a) / growth.b;
    let t = match growth.model {
        GrowthModel::Logarithmic => x.exp(),
        GrowthModel::Linear if s_bar > growth.a => x,
        GrowthModel::Linear => {
            return Err(AnalysisError::Estimation(format!(
                "saturation value {s_bar} is below the growth intercept {}",
                growth.a
            )))
        }
    };
    if t.is_finite() {
        Ok(t)
    } else {
        Err(AnalysisError::Estimation(format!("saturation time overflows for s_bar = {s_bar}")))
    }
}

/// Transformation applied to the scaling parameter before regressing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingLaw {
    /// `f(x) = ln(1/x)`
    LogInverse,
    /// `f(x) = 1/sqrt(x)`
    InverseSqrt,
}

impl ScalingLaw {
    pub fn name(self) -> &'static str {
        match self {
            ScalingLaw::LogInverse => "ln(1/x)",
            ScalingLaw::InverseSqrt => "1/sqrt(x)",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            ScalingLaw::LogInverse => -x.ln(),
            ScalingLaw::InverseSqrt => 1.0 / x.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub law: ScalingLaw,
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least squares `y = a + b f(x)`.
pub fn scaling_regression(xs: &[f64], ys: &[f64], law: ScalingLaw) -> Result<ScalingFit, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(AnalysisError::Data(xs.len().min(ys.len())));
    }
    if xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) || ys.iter().any(|y| !y.is_finite()) {
        return Err(AnalysisError::Config("scaling data must be finite with positive parameters".into()));
    }
    // sort so the sums do not depend on input order
    let mut pairs: Vec<(f64, f64)> = xs.iter().map(|&x| law.apply(x)).zip(ys.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let (fx, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (a, b, r_squared) = least_squares(&fx, &y).ok_or(AnalysisError::Data(xs.len()))?;
    Ok(ScalingFit {
        law,
        a,
        b,
        r_squared,
        points: xs.len(),
    })
}

/// `max |a(t) - b(t)|` over `a`'s grid times inside `window`, with `b`
/// interpolated linearly.
pub fn curve_distance(a: &EntropyCurve, b: &EntropyCurve, window: (f64, f64)) -> Result<f64, AnalysisError> {
    let (lo, hi) = window;
    let covers = |c: &EntropyCurve| c.span().is_some_and(|(t0, t1)| t0 <= lo && t1 >= hi);
    if !(lo <= hi) || !covers(a) || !covers(b) {
        return Err(AnalysisError::Alignment { lo, hi });
    }
    let mut worst = 0.0f64;
    for (&t, &sa) in a.times().iter().zip(a.values()) {
        if t < lo || t > hi {
            continue;
        }
        let sb = b.interpolate(t).ok_or(AnalysisError::Alignment { lo, hi })?;
        worst = worst.max((sa - sb).abs());
    }
    Ok(worst)
}

/// Centered moving average over `2 * half_width + 1` samples, shrinking
/// the window at the ends.
pub fn moving_average(curve: &EntropyCurve, half_width: usize) -> EntropyCurve {
    let v = curve.values();
    let n = v.len();
    let smoothed = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(n);
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    EntropyCurve::new(curve.times().to_vec(), smoothed, curve.tag, curve.particle)
        .expect("smoothing preserves validity")
}

/// Settings for the pre-saturation growth fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSettings {
    pub model: GrowthModel,
    /// Fit window starts here.
    pub window_start: f64,
    /// Fit window ends at `window_factor * t_d`.
    pub window_factor: f64,
    pub tail_fraction: f64,
    /// Moving-average half width applied before fitting; 0 disables it.
    pub smoothing: usize,
}

impl FitSettings {
    pub fn regular() -> Self {
        Self {
            model: GrowthModel::Logarithmic,
            window_start: 2.0,
            window_factor: 0.5,
            tail_fraction: 0.2,
            smoothing: 0,
        }
    }

    pub fn chaotic() -> Self {
        Self {
            model: GrowthModel::Linear,
            window_start: 1.0,
            window_factor: 0.7,
            tail_fraction: 0.2,
            smoothing: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.window_start.is_finite() && self.window_start >= 0.0) {
            return Err(AnalysisError::Config(format!("window start {}", self.window_start)));
        }
        if !(self.window_factor > 0.0 && self.window_factor <= 1.0) {
            return Err(AnalysisError::Config(format!("window factor {} outside (0, 1]", self.window_factor)));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 0.5) {
            return Err(AnalysisError::Config(format!("tail fraction {} outside (0, 0.5]", self.tail_fraction)));
        }
        Ok(())
    }

    fn prepare(&self, curve: &EntropyCurve) -> EntropyCurve {
        if self.smoothing > 0 {
            moving_average(curve, self.smoothing)
        } else {
            curve.clone()
        }
    }
}

/// Growth fit on the window `[start, factor * t_d]`, where `t_d` is the
/// time the fit itself reaches the curve's saturation value. The window is
/// iterated to a fixed point starting from the full span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreSaturationFit {
    pub fit: GrowthFit,
    pub saturation: SaturationValue,
    pub t_d: f64,
    pub iterations: usize,
}

const MAX_WINDOW_ITERATIONS: usize = 100;

pub fn fit_pre_saturation(curve: &EntropyCurve, settings: &FitSettings) -> Result<PreSaturationFit, AnalysisError> {
    settings.validate()?;
    let prepared = settings.prepare(curve);
    let saturation = saturation_value(curve, settings.tail_fraction)?;
    let (_, t_end) = curve
        .span()
        .ok_or_else(|| AnalysisError::Estimation("empty curve".into()))?;
    let mut hi = t_end;
    let mut seen: Vec<usize> = Vec::new();
    for iterations in 1..=MAX_WINDOW_ITERATIONS {
        let fit = fit_growth(&prepared, settings.model, (settings.window_start, hi))?;
        let t_d = saturation_time(curve, &fit, saturation.s_bar)?;
        let next = (settings.window_factor * t_d).min(t_end);
        // the fit only changes when the set of samples in the window does
        let count = window_count(curve, settings.window_start, next);
        if count == window_count(curve, settings.window_start, hi) || seen.contains(&count) {
            let fit = fit_growth(&prepared, settings.model, (settings.window_start, next))?;
            let t_d = saturation_time(curve, &fit, saturation.s_bar)?;
            return Ok(PreSaturationFit {
                fit,
                saturation,
                t_d,
                iterations,
            });
        }
        seen.push(count);
        hi = next;
    }
    Err(AnalysisError::Estimation("fit window did not settle".into()))
}

fn window_count(curve: &EntropyCurve, lo: f64, hi: f64) -> usize {
    curve.times().iter().filter(|&&t| t >= lo && t <= hi).count()
}

/// One curve of a sweep, keyed by its scale parameter (`delta` or `hbar`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub parameter: f64,
    pub saturation: SaturationValue,
    pub t_d: f64,
    /// Own growth fit on `[start, factor * t_d]`; `None` when that window
    /// holds too few samples.
    pub growth: Option<GrowthFit>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAnalysis {
    pub settings: FitSettings,
    /// Pre-saturation fit of the limit curve (smallest parameter).
    pub limit: PreSaturationFit,
    pub limit_parameter: f64,
    /// Rows in ascending parameter order.
    pub rows: Vec<SweepRow>,
    pub s_bar_scaling: Option<ScalingFit>,
    pub t_d_log_scaling: Option<ScalingFit>,
    pub t_d_sqrt_scaling: Option<ScalingFit>,
}

impl SweepAnalysis {
    pub fn row(&self, parameter: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }
}

/// Saturation values and times across a sweep. Every `t_d` is read off the
/// limit curve's growth law at that curve's own saturation value.
pub fn analyze_sweep(curves: &[(f64, EntropyCurve)], settings: &FitSettings) -> Result<SweepAnalysis, AnalysisError> {
    settings.validate()?;
    let mut order: Vec<&(f64, EntropyCurve)> = curves.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (limit_parameter, limit_curve) = order
        .first()
        .map(|(p, c)| (*p, c))
        .ok_or(AnalysisError::Data(0))?;
    let limit = fit_pre_saturation(limit_curve, settings)?;
    let mut rows = Vec::with_capacity(order.len());
    for (parameter, curve) in order {
        let saturation = saturation_value(curve, settings.tail_fraction)?;
        let t_d = invert_growth(&limit.fit, saturation.s_bar)?;
        let hi = settings.window_factor * t_d;
        let growth = fit_growth(&settings.prepare(curve), settings.model, (settings.window_start, hi)).ok();
        rows.push(SweepRow {
            parameter: *parameter,
            saturation,
            t_d,
            growth,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.parameter).collect();
    let s: Vec<f64> = rows.iter().map(|r| r.saturation.s_bar).collect();
    let td: Vec<f64> = rows.iter().map(|r| r.t_d).collect();
    Ok(SweepAnalysis {
        settings: *settings,
        limit,
        limit_parameter,
        s_bar_scaling: scaling_regression(&xs, &s, ScalingLaw::LogInverse).ok(),
        t_d_log_scaling: scaling_regression(&xs, &td, ScalingLaw::LogInverse).ok(),
        t_d_sqrt_scaling: scaling_regression(&xs, &td, ScalingLaw::InverseSqrt).ok(),
        rows,
    })
}
