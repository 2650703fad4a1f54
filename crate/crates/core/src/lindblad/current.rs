//! Steady-state current through a chain between a pump and a drain.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{average_transfer_time, steady_state, DensityMatrix, SteadyStateReport};
use crate::error::{ensure_positive, Result};
use crate::lattice::Hamiltonian;
use crate::observables::fmt_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentMethod {
    MasterEquation,
    Att,
    Heuristic,
}

impl CurrentMethod {
    pub fn name(self) -> &'static str {
        match self {
            CurrentMethod::MasterEquation => "master_equation",
            CurrentMethod::Att => "att",
            CurrentMethod::Heuristic => "heuristic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentResult {
    pub method: CurrentMethod,
    pub n: usize,
    pub w: f64,
    pub gamma_phi: f64,
    pub gamma_p: f64,
    pub gamma_d: f64,
    /// Transfer time; absent for the master-equation route.
    pub tau: Option<f64>,
    pub i_ss: f64,
}

pub const CURRENT_CSV_HEADER: [&str; 8] =
    ["method", "N", "W", "gamma_phi", "gamma_p", "gamma_d", "tau", "i_ss"];

impl CurrentResult {
    /// Stationary current `(γ_d/ħ)ρ_NN` from the full pump/drain steady state.
    pub fn master_equation(
        h: &Hamiltonian,
        w: f64,
        gamma_phi: f64,
        gamma_p: f64,
        gamma_d: f64,
    ) -> Result<(Self, SteadyStateReport)> {
        let (rho, report) = steady_state(h, gamma_phi, gamma_p, gamma_d)?;
        let n = h.n();
        let i_ss = gamma_d / h.units().hbar * rho.get(n, n).re;
        Ok((
            CurrentResult {
                method: CurrentMethod::MasterEquation,
                n,
                w,
                gamma_phi,
                gamma_p,
                gamma_d,
                tau: None,
                i_ss,
            },
            report,
        ))
    }

    /// Current from the mean transfer time of an excitation injected on site 1.
    pub fn att(h: &Hamiltonian, w: f64, gamma_phi: f64, gamma_p: f64, gamma_d: f64) -> Result<Self> {
        let tau = average_transfer_time(h, gamma_phi, gamma_d, &DensityMatrix::pure_site(h.n(), 0))?;
        Ok(CurrentResult {
            method: CurrentMethod::Att,
            n: h.n(),
            w,
            gamma_phi,
            gamma_p,
            gamma_d,
            tau: Some(tau),
            i_ss: current_from_tau(tau, gamma_p, h.units().hbar)?,
        })
    }

    /// Current from the drain-plus-diffusion estimate of the transfer time.
    #[allow(clippy::too_many_arguments)]
    pub fn heuristic(
        n: usize,
        w: f64,
        gamma_phi: f64,
        gamma_p: f64,
        gamma_d: f64,
        diffusion: f64,
        hbar: f64,
        a: f64,
    ) -> Result<Self> {
        let tau = heuristic_transfer_time(n, gamma_d, diffusion, hbar, a)?;
        Ok(CurrentResult {
            method: CurrentMethod::Heuristic,
            n,
            w,
            gamma_phi,
            gamma_p,
            gamma_d,
            tau: Some(tau),
            i_ss: current_from_tau(tau, gamma_p, hbar)?,
        })
    }

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.method.name().to_string(),
            self.n.to_string(),
            fmt_f64(self.w),
            fmt_f64(self.gamma_phi),
            fmt_f64(self.gamma_p),
            fmt_f64(self.gamma_d),
            self.tau.map_or(String::new(), fmt_f64),
            fmt_f64(self.i_ss),
        ]
    }

    pub fn write_csv<W: Write>(rows: &[CurrentResult], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CURRENT_CSV_HEADER)?;
        for r in rows {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `I = γ_p/(γ_p τ + ħ)`.
pub fn current_from_tau(tau: f64, gamma_p: f64, hbar: f64) -> Result<f64> {
    ensure_positive("tau", tau)?;
    ensure_positive("gamma_p", gamma_p)?;
    Ok(gamma_p / (gamma_p * tau + hbar))
}

/// Drain time plus diffusive crossing time, `ħN/γ_d + N(N − 1)a²/(2D)`.
pub fn heuristic_transfer_time(n: usize, gamma_d: f64, diffusion: f64, hbar: f64, a: f64) -> Result<f64> {
    ensure_positive("gamma_d", gamma_d)?;
    ensure_positive("diffusion", diffusion)?;
    let n = n as f64;
    Ok(hbar * n / gamma_d + n * (n - 1.0) * a * a / (2.0 * diffusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, ModelSpec};

    #[test]
    fn current_from_tau_limits() {
        assert!((current_from_tau(1e-12, 2.0, 1.0).unwrap() - 2.0).abs() < 1e-10);
        assert!((current_from_tau(4.0, 1e9, 1.0).unwrap() - 0.25).abs() < 1e-9);
        assert_eq!(current_from_tau(0.5, 2.0, 1.0).unwrap(), 1.0);
        assert!(current_from_tau(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn heuristic_arithmetic() {
        assert_eq!(heuristic_transfer_time(1, 2.0, 0.3, 1.0, 1.0).unwrap(), 0.5);
        let tau = heuristic_transfer_time(100, 1.0, 0.5365, 1.0, 1.0).unwrap();
        assert!((tau - (100.0 + 9900.0 / 1.073)).abs() < 1e-9);
        assert!((tau - 9326.4).abs() < 1.0);
        let big = heuristic_transfer_time(50, 2.0, 1e15, 1.0, 1.0).unwrap();
        assert!((big - 25.0).abs() < 1e-9);
    }

    #[test]
    fn master_equation_agrees_with_transfer_time() {
        for (w, g) in [(0.0, 0.05), (2.0, 0.1), (3.0, 0.5)] {
            let h = build_hamiltonian(&ModelSpec::hhaa(12, w).with_phase(0.9)).unwrap();
            let (me, _) = CurrentResult::master_equation(&h, w, g, 1.0, 1.0).unwrap();
            let att = CurrentResult::att(&h, w, g, 1.0, 1.0).unwrap();
            assert!((me.i_ss - att.i_ss).abs() < 1e-9 * me.i_ss, "W = {w}: {} vs {}", me.i_ss, att.i_ss);
            assert!(me.i_ss > 0.0 && me.i_ss <= 1.0);
        }
    }

    #[test]
    fn weak_drain_starves_current() {
        let h = build_hamiltonian(&ModelSpec::hhaa(6, 1.0)).unwrap();
        let (a, _) = CurrentResult::master_equation(&h, 1.0, 0.2, 1.0, 1e-2).unwrap();
        let (b, _) = CurrentResult::master_equation(&h, 1.0, 0.2, 1.0, 1e-5).unwrap();
        assert!(b.i_ss < a.i_ss && b.i_ss < 2e-5);
    }

    #[test]
    fn csv_layout() {
        let r = CurrentResult::att(&build_hamiltonian(&ModelSpec::hhaa(4, 2.0)).unwrap(), 2.0, 0.1, 1.0, 1.0).unwrap();
        let mut buf = Vec::new();
        CurrentResult::write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,N,W,gamma_phi,gamma_p,gamma_d,tau,i_ss\natt,4,2.0,0.1,1.0,1.0,"));
    }
}
