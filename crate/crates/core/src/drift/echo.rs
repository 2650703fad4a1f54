//! Forward-backward echo: purity of the dephased state from the return
//! probability after reversing the coherent dynamics.

use rayon::prelude::*;
use serde::Serialize;

use super::{CoherentStep, DriftKernel, QdConfig, TrajectoryState, CHUNK, NORM_TOLERANCE};
use crate::error::{ensure_nonnegative, Error, Result};
use crate::lattice::Hamiltonian;
use crate::linalg::{eigensystem, ChebyshevWork};
use crate::observables::{ObservableSeries, Probe, SeriesAccumulator, Snapshot};
use crate::rng::{self, Domain};

#[derive(Clone, Debug, Serialize)]
pub struct EchoResult {
    pub reversal_time: f64,
    /// `M(τ_R) = ⟨P₀₀(2τ_R)⟩`.
    pub echo: f64,
    pub echo_stderr: f64,
    /// Forward then backward leg on `[0, 2τ_R]`.
    #[serde(skip)]
    pub trace: ObservableSeries,
    /// Time of the smallest variance on the backward leg.
    pub variance_min_time: f64,
    pub completed: usize,
    pub failed: usize,
}

/// Evolves `ψ₀ = |site⟩` under `(+H, noise)` for `τ_R`, then under
/// `(−H, fresh noise)` for another `τ_R`. Steps per leg are
/// `round(τ_R/dt)`; records every `record_stride` steps plus the endpoints.
pub fn purity_echo(
    h: &Hamiltonian,
    gamma_phi: f64,
    site: usize,
    reversal_time: f64,
    cfg: &QdConfig,
) -> Result<EchoResult> {
    cfg.validate()?;
    cfg.check_step(h, gamma_phi)?;
    ensure_nonnegative("reversal_time", reversal_time)?;
    let n = h.n();
    if site >= n {
        return Err(Error::invalid("site", "outside the chain"));
    }
    let eig = if h.is_tridiagonal() {
        None
    } else {
        Some(std::sync::Arc::new(eigensystem(h)?))
    };
    let forward = DriftKernel::with_eigensystem(h, gamma_phi, cfg.dt, eig.clone())?;
    let mut backward = forward.clone();
    backward.coherent = CoherentStep::new(h, -cfg.dt, eig)?;

    let leg = (reversal_time / cfg.dt).round() as usize;
    let mut marks: Vec<usize> = (0..=2 * leg).step_by(cfg.record_stride).collect();
    if *marks.last().unwrap() != 2 * leg {
        marks.push(2 * leg);
    }
    if !marks.contains(&leg) {
        marks.push(leg);
        marks.sort_unstable();
    }
    let times: Vec<f64> = marks.iter().map(|&m| m as f64 * cfg.dt).collect();
    let probe = Probe::new(n, site, h.units().lattice_constant, cfg.boundary_guard);
    let count = if gamma_phi == 0.0 { 1 } else { cfg.n_traj as u64 };

    let run = |index: u64| -> Result<Vec<Snapshot>> {
        let mut fwd_rng = rng::stream(cfg.master_seed, Domain::Trajectory, index);
        let mut bwd_rng = rng::stream(cfg.master_seed, Domain::EchoBackward, index);
        let mut state = TrajectoryState::site(n, site);
        let mut work = ChebyshevWork::default();
        let mut out = Vec::with_capacity(marks.len());
        let mut done = 0;
        for &m in &marks {
            while done < m {
                if done < leg {
                    forward.advance(&mut state, &mut fwd_rng, &mut work);
                } else {
                    backward.advance(&mut state, &mut bwd_rng, &mut work);
                }
                done += 1;
            }
            let drift = (state.norm_sqr() - 1.0).abs();
            if drift > NORM_TOLERANCE {
                return Err(Error::NormDrift {
                    index: index as usize,
                    time: m as f64 * cfg.dt,
                    drift,
                });
            }
            out.push(state.snapshot(&probe));
        }
        Ok(out)
    };

    let mut acc = SeriesAccumulator::new(times.clone(), false, None);
    let mut p_sum = 0.0;
    let mut p_sq = 0.0;
    let mut failed = 0;
    let indices: Vec<u64> = (0..count).collect();
    for chunk in indices.chunks(CHUNK) {
        let results: Vec<Result<Vec<Snapshot>>> = chunk.par_iter().map(|&i| run(i)).collect();
        for r in results {
            match r {
                Ok(snaps) => {
                    let p = snaps.last().unwrap().return_probability;
                    p_sum += p;
                    p_sq += p * p;
                    acc.add(&snaps, None);
                }
                Err(_) => failed += 1,
            }
        }
    }
    let completed = acc.count();
    if completed == 0 {
        return Err(Error::AllTrajectoriesFailed(count as usize));
    }
    let mut trace = acc.finish(cfg.guard_threshold);
    let m = p_sum / completed as f64;
    let stderr = if completed > 1 {
        let var = (p_sq / completed as f64 - m * m).max(0.0) * completed as f64 / (completed - 1) as f64;
        (var / completed as f64).sqrt()
    } else {
        0.0
    };
    let reversal_index = marks.iter().position(|&x| x == leg).unwrap();
    let variance_min_time = (reversal_index..trace.len())
        .min_by(|&i, &j| trace.variance[i].total_cmp(&trace.variance[j]))
        .map_or(2.0 * reversal_time, |i| trace.times[i]);
    trace.purity = Some(trace.return_probability.clone());
    Ok(EchoResult {
        reversal_time: leg as f64 * cfg.dt,
        echo: m,
        echo_stderr: stderr,
        trace,
        variance_min_time,
        completed,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, ModelSpec};

    #[test]
    fn coherent_echo_is_perfect() {
        let h = build_hamiltonian(&ModelSpec::hhaa(80, 2.0).with_phase(0.2)).unwrap();
        let cfg = QdConfig {
            n_traj: 4,
            ..Default::default()
        };
        for tr in [0.0, 1.0, 7.3] {
            let r = purity_echo(&h, 0.0, 40, tr, &cfg).unwrap();
            assert!((r.echo - 1.0).abs() < 1e-10, "τ_R = {tr}: {}", r.echo);
        }
    }

    #[test]
    fn zero_reversal_time_gives_unit_echo_with_noise() {
        let h = build_hamiltonian(&ModelSpec::hhaa(30, 2.0)).unwrap();
        let cfg = QdConfig {
            n_traj: 8,
            ..Default::default()
        };
        let r = purity_echo(&h, 0.5, 15, 0.0, &cfg).unwrap();
        assert_eq!(r.echo, 1.0);
    }
}
