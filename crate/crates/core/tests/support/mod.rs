//! Checks shared by the property tests and the acceptance runner.

#![allow(dead_code)]

pub mod properties;

use qdiffusion::analysis::{fit_diffusion, GreenKubo};
use qdiffusion::drift::{propagate_realizations, QdConfig};
use qdiffusion::lattice::{build_hamiltonian, Hamiltonian, ModelSpec};
use qdiffusion::lindblad::{evolve_density, DensityMatrix, LindbladOptions};
use qdiffusion::ObservableSeries;

pub type Check = Result<(), String>;

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn hhaa_realizations(n: usize, w: f64, count: usize, seed: u64) -> Vec<Hamiltonian> {
    ModelSpec::hhaa(n, w)
        .realizations(count, seed)
        .iter()
        .map(|s| build_hamiltonian(s).unwrap())
        .collect()
}

/// Quantum-drift ensemble from the chain centre: `n_traj` trajectories on
/// each Hamiltonian, records every `interval` up to `t_max`.
pub fn qd_series(
    hamiltonians: &[Hamiltonian],
    gamma_phi: f64,
    n_traj: usize,
    t_max: f64,
    interval: f64,
    seed: u64,
) -> ObservableSeries {
    let n = hamiltonians[0].n();
    let cfg = QdConfig {
        dt: 0.01,
        n_traj,
        t_max,
        master_seed: seed,
        ..Default::default()
    }
    .adapted(&hamiltonians[0], gamma_phi, interval)
    .unwrap();
    propagate_realizations(hamiltonians, gamma_phi, n / 2, &cfg)
        .unwrap()
        .0
}

/// Largest `|σ²_QD − σ²_ME| / σ²_ME` over `0 < t ≤ t_max` from the centre
/// of `h`.
pub fn qd_me_deviation(h: &Hamiltonian, gamma_phi: f64, n_traj: usize, t_max: f64, seed: u64) -> f64 {
    let interval = 0.5;
    let qd = qd_series(std::slice::from_ref(h), gamma_phi, n_traj, t_max, interval, seed);
    let n = h.n();
    let me = evolve_density(
        h,
        gamma_phi,
        &DensityMatrix::pure_site(n, n / 2),
        &qd.times,
        &LindbladOptions {
            max_sites: n.max(200),
            ..Default::default()
        },
    )
    .unwrap();
    qd.variance
        .iter()
        .zip(&me.variance)
        .skip(1)
        .map(|(q, m)| (q - m).abs() / m)
        .fold(0.0, f64::max)
}

/// Fitted D over `[start, last unflagged record]`.
pub fn fit_from(series: &ObservableSeries, start: f64) -> qdiffusion::Result<f64> {
    let end = series.times[series.unflagged_len().max(1) - 1];
    Ok(fit_diffusion(series, (start, end))?.d)
}

/// Kubo D averaged over realizations.
pub fn kubo_mean(kubo: &[GreenKubo], gamma_phi: f64) -> f64 {
    kubo.iter().map(|k| k.diffusion(gamma_phi).unwrap().d).sum::<f64>() / kubo.len() as f64
}

pub fn kubo_all(hamiltonians: &[Hamiltonian]) -> Vec<GreenKubo> {
    hamiltonians.iter().map(|h| GreenKubo::new(h).unwrap()).collect()
}
