use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use super::{DiffusionMethod, DiffusionResult};
use crate::error::{ensure_positive, Error, Result};
use crate::lattice::{hhaa_phase, localization_length, ModelKind, ModelSpec, Phase};
use crate::observables::fmt_f64;

/// `D/D₀ = (2/x)(1 − e^{−x}) − e^{−x}` with `x = τ_W/τ_φ`.
pub fn universal_law(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    2.0 / x * (-(-x).exp_m1()) - (-x).exp()
}

/// Composition of two Poisson processes, `D/D₀ = 1/(1 + x)`, which the
/// universal law improves on at first order.
pub fn naive_law(x: f64) -> f64 {
    1.0 / (1.0 + x)
}

/// Variance of a clean chain under dephasing,
/// `2τ_φ v₀² (τ_φ(e^{−t/τ_φ} − 1) + t)`.
pub fn ballistic_dephased_variance(t: f64, tau_phi: f64, v0_sq: f64) -> f64 {
    2.0 * tau_phi * v0_sq * (tau_phi * (-t / tau_phi).exp_m1() + t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Quantum Zeno limit, `D = 2a²J²/(ħγ_φ)`.
    Strong,
    /// Extended phase at weak dephasing, `D = a²(2J − W)²/(2ħγ_φ)`.
    Ballistic,
    /// Localized phase at weak dephasing, `D = ξ²γ_φ/ħ`.
    Localized,
}

pub fn limit_d(regime: Regime, spec: &ModelSpec, gamma_phi: f64) -> Result<DiffusionResult> {
    ensure_positive("gamma_phi", gamma_phi)?;
    let hbar = spec.units.hbar;
    let a = spec.units.lattice_constant;
    let j = spec.hopping;
    let w = spec.potential;
    if !spec.kind.is_nearest_neighbour() {
        return Err(Error::NotDefinedInPhase {
            quantity: "closed-form limit",
            phase: "long-range hopping",
        });
    }
    let (d, method) = match regime {
        Regime::Strong => (2.0 * a * a * j * j / (hbar * gamma_phi), DiffusionMethod::LimitStrong),
        Regime::Ballistic => {
            if spec.kind != ModelKind::Hhaa || hhaa_phase(spec) != Phase::Extended {
                return Err(Error::NotDefinedInPhase {
                    quantity: "ballistic limit",
                    phase: "not the extended HHAA phase",
                });
            }
            (
                a * a * (2.0 * j - w).powi(2) / (2.0 * hbar * gamma_phi),
                DiffusionMethod::LimitBallistic,
            )
        }
        Regime::Localized => {
            let xi = localization_length(spec)?;
            (xi * xi * gamma_phi / hbar, DiffusionMethod::LimitLocalized)
        }
    };
    Ok(DiffusionResult::exact(d, method))
}

/// `Γ(s, x)`, the unregularized upper incomplete gamma function.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        gamma(s)
    } else {
        gamma_ur(s, x) * gamma(s)
    }
}

/// Generalized exponential integral `E_{−α}(x) = x^{−α−1} Γ(α + 1, x)`.
pub fn generalized_exp_integral(alpha: f64, x: f64) -> f64 {
    x.powf(-alpha - 1.0) * upper_incomplete_gamma(alpha + 1.0, x)
}

/// Poisson-averaged diffusion coefficient for coherent spreading that is
/// ballistic, `v₀²t²`, up to `τ_W` and `v₀²τ_W^{2−α} t^α` afterwards.
pub fn fibonacci_analytic_d(v0_sq: f64, tau_w: f64, tau_phi: f64, alpha: f64) -> Result<DiffusionResult> {
    ensure_positive("v0_sq", v0_sq)?;
    ensure_positive("tau_w", tau_w)?;
    ensure_positive("tau_phi", tau_phi)?;
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 2), got {alpha}")));
    }
    let x = tau_w / tau_phi;
    let tp = tau_phi;
    let ballistic = 2.0 * tp.powi(3) - tp * (-x).exp() * (tau_w * tau_w + 2.0 * tp * tau_w + 2.0 * tp * tp);
    let anomalous = tau_w.powi(3) * generalized_exp_integral(alpha, x);
    let d = v0_sq / (2.0 * tp * tp) * (ballistic + anomalous);
    if !d.is_finite() {
        return Err(Error::Quadrature(format!("non-finite result at x = {x}, alpha = {alpha}")));
    }
    Ok(DiffusionResult::exact(d, DiffusionMethod::FibonacciAnalytic))
}

/// One point of the collapse plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalPoint {
    pub model: String,
    /// `W`, `α` or `μ` depending on the model.
    pub param: f64,
    pub gamma_phi: f64,
    pub tau_w: f64,
    pub x: f64,
    pub d: f64,
    pub d0: f64,
    pub d_ratio: f64,
    pub method: String,
}

pub const UNIVERSAL_CSV_HEADER: [&str; 9] =
    ["model", "param", "gamma_phi", "tau_w", "x", "d", "d0", "d_ratio", "method"];

impl UniversalPoint {
    /// A point with `x = τ_W γ_φ/ħ`.
    pub fn new(model: &str, param: f64, gamma_phi: f64, tau_w: f64, hbar: f64, d0: f64, d: &DiffusionResult) -> Self {
        UniversalPoint {
            model: model.to_string(),
            param,
            gamma_phi,
            tau_w,
            x: tau_w * gamma_phi / hbar,
            d: d.d,
            d0,
            d_ratio: d.d / d0,
            method: d.method.name().to_string(),
        }
    }

    /// The reference curve at the same `x`.
    pub fn reference(&self) -> UniversalPoint {
        UniversalPoint {
            d: self.d0 * universal_law(self.x),
            d_ratio: universal_law(self.x),
            method: DiffusionMethod::UniversalLaw.name().into(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(rows: &[UniversalPoint], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(UNIVERSAL_CSV_HEADER)?;
        for p in rows {
            w.write_record([
                p.model.clone(),
                fmt_f64(p.param),
                fmt_f64(p.gamma_phi),
                fmt_f64(p.tau_w),
                fmt_f64(p.x),
                fmt_f64(p.d),
                fmt_f64(p.d0),
                fmt_f64(p.d_ratio),
                p.method.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<UniversalPoint>> {
        let mut r = csv::Reader::from_reader(input);
        let mut out = Vec::new();
        for row in r.records() {
            let row = row?;
            let num = |i: usize| -> Result<f64> {
                row.get(i)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::invalid("csv", format!("column {i}: {e}")))
            };
            out.push(UniversalPoint {
                model: row.get(0).unwrap_or("").to_string(),
                param: num(1)?,
                gamma_phi: num(2)?,
                tau_w: num(3)?,
                x: num(4)?,
                d: num(5)?,
                d0: num(6)?,
                d_ratio: num(7)?,
                method: row.get(8).unwrap_or("").to_string(),
            });
        }
        Ok(out)
    }
}
