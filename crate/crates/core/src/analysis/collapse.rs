//! Diffusion coefficient from coherent spreading interrupted at random
//! measurement times: `D = ∫ p(t) σ₀²(t) dt / (2τ̄)` with `τ̄ = ∫ t p(t) dt`.

use serde::{Deserialize, Serialize};

use super::fit::power_law_fit;
use super::laws::upper_incomplete_gamma;
use super::quad::integrate_breaks;
use super::{DiffusionMethod, DiffusionResult};
use crate::error::{ensure_positive, Error, Result};

/// Largest share of the integral allowed to come from the extrapolated tail.
pub const MAX_TAIL_FRACTION: f64 = 0.05;

/// Distribution of the time between measurements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaitingTime {
    /// `p(t) = e^{−t/τ_φ}/τ_φ`.
    Poisson,
    /// Every interval lasts exactly `2τ_φ`.
    Delta,
}

/// Collapse integral over a sampled coherent variance `σ₀²(t_k)`.
///
/// The samples are joined linearly (with `σ₀²(0) = 0` when the series
/// starts later) and the Poisson weight is integrated exactly on each
/// segment. Past the last sample the series continues as the power law
/// fitted to its second half.
pub fn collapse_integral_d(
    times: &[f64],
    sigma0_sq: &[f64],
    tau_phi: f64,
    waiting: WaitingTime,
) -> Result<DiffusionResult> {
    ensure_positive("tau_phi", tau_phi)?;
    if times.len() != sigma0_sq.len() || times.len() < 4 {
        return Err(Error::invalid("sigma0_sq", "need at least four samples matching the time grid"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::invalid("times", "must be increasing from t >= 0"));
    }
    let mut t = Vec::with_capacity(times.len() + 1);
    let mut y = Vec::with_capacity(times.len() + 1);
    if times[0] > 0.0 {
        t.push(0.0);
        y.push(0.0);
    }
    t.extend_from_slice(times);
    y.extend_from_slice(sigma0_sq);
    let horizon = *t.last().unwrap();

    match waiting {
        WaitingTime::Delta => {
            let at = 2.0 * tau_phi;
            if at > horizon {
                return Err(Error::SeriesTooShort {
                    horizon,
                    required: at,
                    tail_fraction: 1.0,
                });
            }
            let k = t.partition_point(|&s| s <= at).clamp(1, t.len() - 1);
            let (ta, tb) = (t[k - 1], t[k]);
            let value = y[k - 1] + (y[k] - y[k - 1]) * (at - ta) / (tb - ta);
            Ok(DiffusionResult::exact(value / (2.0 * at), DiffusionMethod::CollapseIntegral))
        }
        WaitingTime::Poisson => {
            let tau = tau_phi;
            let mut body = 0.0;
            for k in 1..t.len() {
                let (ta, tb) = (t[k - 1], t[k]);
                let ea = (-ta / tau).exp();
                let eb = (-tb / tau).exp();
                let slope = (y[k] - y[k - 1]) / (tb - ta);
                body += y[k - 1] * (ea - eb) + slope * (tau * (ea - eb) - (tb - ta) * eb);
            }
            let half = t.partition_point(|&s| s < horizon / 2.0);
            let law = power_law_fit(&t[half..], &y[half..])?;
            if !(law.exponent > -1.0) {
                return Err(Error::Quadrature(format!(
                    "tail exponent {} does not decay slowly enough to extrapolate",
                    law.exponent
                )));
            }
            let tail_from = |from: f64| {
                law.prefactor * tau.powf(law.exponent) * upper_incomplete_gamma(law.exponent + 1.0, from / tau)
            };
            let tail = tail_from(horizon);
            let total = body + tail;
            let fraction = if total > 0.0 { tail / total } else { 0.0 };
            if fraction > MAX_TAIL_FRACTION {
                let mut required = horizon;
                while tail_from(required) > MAX_TAIL_FRACTION * total && required < 1e6 * horizon {
                    required *= 1.25;
                }
                return Err(Error::SeriesTooShort {
                    horizon,
                    required,
                    tail_fraction: fraction,
                });
            }
            Ok(DiffusionResult::exact(total / (2.0 * tau), DiffusionMethod::CollapseIntegral))
        }
    }
}

/// Collapse integral of a closed-form `σ₀²(t)` by adaptive quadrature.
/// `kinks` lists times where `σ₀²` is not smooth.
pub fn collapse_integral_fn<F: Fn(f64) -> f64>(
    sigma0_sq: F,
    tau_phi: f64,
    waiting: WaitingTime,
    kinks: &[f64],
) -> Result<DiffusionResult> {
    ensure_positive("tau_phi", tau_phi)?;
    let d = match waiting {
        WaitingTime::Delta => sigma0_sq(2.0 * tau_phi) / (4.0 * tau_phi),
        WaitingTime::Poisson => {
            // s = t/τ_φ; e^{−s} is below 1e-30 of its peak past s = 70
            let end = 70.0;
            let mut points = vec![0.0];
            points.extend(kinks.iter().map(|k| k / tau_phi).filter(|&s| s > 0.0 && s < end));
            points.push(end);
            points.sort_by(f64::total_cmp);
            let integral = integrate_breaks(|s| sigma0_sq(tau_phi * s) * (-s).exp(), &points, 1e-13, 0.0)?;
            integral / (2.0 * tau_phi)
        }
    };
    if !d.is_finite() {
        return Err(Error::Quadrature("non-finite collapse integral".into()));
    }
    Ok(DiffusionResult::exact(d, DiffusionMethod::CollapseIntegral))
}
