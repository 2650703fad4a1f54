use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::ObservableSeries;

/// Minimum number of records in a fit window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Fits with a lower coefficient of determination are marked non-diffusive.
pub const MIN_R_SQ: f64 = 0.95;
/// Fits whose log-log exponent is further than this from 1 are marked
/// non-diffusive.
pub const EXPONENT_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionMethod {
    Fit,
    GreenKubo,
    CollapseIntegral,
    UniversalLaw,
    LimitStrong,
    LimitBallistic,
    LimitLocalized,
    FibonacciAnalytic,
}

impl DiffusionMethod {
    pub fn name(self) -> &'static str {
        match self {
            DiffusionMethod::Fit => "fit",
            DiffusionMethod::GreenKubo => "green_kubo",
            DiffusionMethod::CollapseIntegral => "collapse_integral",
            DiffusionMethod::UniversalLaw => "universal_law",
            DiffusionMethod::LimitStrong => "limit_strong",
            DiffusionMethod::LimitBallistic => "limit_ballistic",
            DiffusionMethod::LimitLocalized => "limit_localized",
            DiffusionMethod::FibonacciAnalytic => "fibonacci_analytic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionResult {
    pub d: f64,
    pub method: DiffusionMethod,
    pub window: Option<(f64, f64)>,
    pub stderr: f64,
    pub r_sq: Option<f64>,
    /// Log-log exponent of σ² over the fit window.
    pub exponent: Option<f64>,
    /// False when the fit quality or exponent rules out linear growth.
    pub diffusive: bool,
}

impl DiffusionResult {
    pub fn exact(d: f64, method: DiffusionMethod) -> Self {
        DiffusionResult {
            d,
            method,
            window: None,
            stderr: 0.0,
            r_sq: None,
            exponent: None,
            diffusive: true,
        }
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_sq: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::invalid("fit", "need at least three paired samples"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("fit", "abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = (syy - slope * sxy).max(0.0);
    let r_sq = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (rss / (nf - 2.0) / sxx).sqrt(),
        r_sq,
    })
}

/// `σ² ≈ A·t^α` from a log-log fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub prefactor: f64,
    pub exponent_stderr: f64,
    pub r_sq: f64,
}

impl PowerLaw {
    pub fn eval(&self, t: f64) -> f64 {
        self.prefactor * t.powf(self.exponent)
    }
}

pub fn power_law_fit(t: &[f64], y: &[f64]) -> Result<PowerLaw> {
    if t.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("fit", "power-law fit needs strictly positive data"));
    }
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok(PowerLaw {
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        exponent_stderr: f.slope_stderr,
        r_sq: f.r_sq,
    })
}

fn window_indices(series: &ObservableSeries, window: (f64, f64)) -> Result<Vec<usize>> {
    let (start, end) = window;
    let fail = |reason: String| Error::FitWindow { start, end, reason };
    if !(start < end) {
        return Err(fail("empty window".into()));
    }
    let idx: Vec<usize> = (0..series.len())
        .filter(|&i| series.times[i] >= start && series.times[i] <= end)
        .collect();
    if idx.len() < MIN_FIT_SAMPLES {
        return Err(fail(format!("{} samples, need {MIN_FIT_SAMPLES}", idx.len())));
    }
    if idx.iter().any(|&i| series.boundary_flag[i]) {
        return Err(fail("window reaches boundary-flagged records".into()));
    }
    Ok(idx)
}

/// `[2τ_W, t_edge]`, with `t_edge` the last record before the first
/// boundary flag. Without `τ_W` the window starts at the first record.
pub fn default_window(series: &ObservableSeries, tau_w: Option<f64>) -> Result<(f64, f64)> {
    let usable = series.unflagged_len();
    if usable == 0 {
        return Err(Error::FitWindow {
            start: 0.0,
            end: 0.0,
            reason: "every record is boundary-flagged".into(),
        });
    }
    let start = tau_w.map_or(series.times[0], |t| 2.0 * t);
    Ok((start, series.times[usable - 1]))
}

/// `D = slope/2` of σ²(t) over `window`, with the slope's standard error
/// halved likewise.
pub fn fit_diffusion(series: &ObservableSeries, window: (f64, f64)) -> Result<DiffusionResult> {
    let idx = window_indices(series, window)?;
    let t: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| series.variance[i]).collect();
    let fit = linear_fit(&t, &y)?;
    let exponent = power_law_fit(&t, &y).ok().map(|p| p.exponent);
    let diffusive =
        fit.r_sq >= MIN_R_SQ && exponent.map_or(true, |a| (a - 1.0).abs() <= EXPONENT_TOLERANCE);
    Ok(DiffusionResult {
        d: (fit.slope / 2.0).max(0.0),
        method: DiffusionMethod::Fit,
        window: Some(window),
        stderr: fit.slope_stderr / 2.0,
        r_sq: Some(fit.r_sq),
        exponent,
        diffusive,
    })
}

/// Log-log fit of σ²(t) over `window`.
pub fn fit_power_law(series: &ObservableSeries, window: (f64, f64)) -> Result<PowerLaw> {
    let (start, end) = window;
    if !(start < end) {
        return Err(Error::FitWindow {
            start,
            end,
            reason: "empty window".into(),
        });
    }
    let idx: Vec<usize> = (0..series.len())
        .filter(|&i| series.times[i] >= start && series.times[i] <= end)
        .collect();
    if idx.len() < 3 {
        return Err(Error::FitWindow {
            start,
            end,
            reason: format!("{} samples", idx.len()),
        });
    }
    let t: Vec<f64> = idx.iter().map(|&i| series.times[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| series.variance[i]).collect();
    power_law_fit(&t, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic(times: Vec<f64>, f: impl Fn(f64) -> f64) -> ObservableSeries {
        let r = times.len();
        ObservableSeries {
            variance: times.iter().map(|&t| f(t)).collect(),
            variance_stderr: vec![0.0; r],
            return_probability: vec![0.0; r],
            purity: None,
            boundary_weight: vec![0.0; r],
            boundary_flag: vec![false; r],
            populations: None,
            samples: 1,
            times,
        }
    }

    #[test]
    fn exact_line() {
        let s = synthetic((0..100).map(|k| k as f64 * 0.5).collect(), |t| 2.0 * 0.5 * t);
        let r = fit_diffusion(&s, (1.0, 49.0)).unwrap();
        assert!((r.d - 0.5).abs() < 1e-14);
        assert!((r.r_sq.unwrap() - 1.0).abs() < 1e-14);
        assert!(r.diffusive);
    }

    #[test]
    fn subdiffusive_growth_is_marked() {
        let s = synthetic((1..=200).map(|k| k as f64).collect(), |t| t.powf(0.8));
        let r = fit_diffusion(&s, (10.0, 200.0)).unwrap();
        assert!(r.r_sq.unwrap() > MIN_R_SQ);
        assert!(!r.diffusive);
    }

    #[test]
    fn ballistic_exponent() {
        let s = synthetic((1..=50).map(|k| k as f64 * 0.1).collect(), |t| 2.0 * t * t);
        let p = fit_power_law(&s, (0.1, 5.0)).unwrap();
        assert!((p.exponent - 2.0).abs() < 1e-12);
        assert!((p.prefactor - 2.0).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let mut s = synthetic((0..30).map(|k| k as f64).collect(), |t| t);
        assert!(matches!(fit_diffusion(&s, (5.0, 10.0)), Err(Error::FitWindow { .. })));
        assert!(fit_diffusion(&s, (3.0, 3.0)).is_err());
        s.boundary_flag[25] = true;
        assert!(fit_diffusion(&s, (0.0, 29.0)).is_err());
        assert_eq!(default_window(&s, Some(1.0)).unwrap(), (2.0, 24.0));
    }
}
