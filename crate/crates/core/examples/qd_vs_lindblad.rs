//! Quantum-drift trajectories against the dephased master equation on a
//! short critical chain.

use qdiffusion::drift::{propagate_ensemble, QdConfig, TrajectoryState};
use qdiffusion::lattice::{build_hamiltonian, ModelSpec};
use qdiffusion::lindblad::{evolve_density, DensityMatrix, LindbladOptions};

fn main() -> qdiffusion::Result<()> {
    let (n, gamma) = (60, 0.2);
    let h = build_hamiltonian(&ModelSpec::hhaa(n, 2.0))?;
    let cfg = QdConfig {
        n_traj: 1000,
        t_max: 20.0,
        master_seed: 11,
        ..Default::default()
    }
    .adapted(&h, gamma, 2.0)?;
    let (qd, report) = propagate_ensemble(&h, gamma, &TrajectoryState::site(n, n / 2), &cfg)?;
    let me = evolve_density(&h, gamma, &DensityMatrix::pure_site(n, n / 2), &qd.times, &LindbladOptions::default())?;

    println!("{} trajectories, norm drift ≤ {:.1e}", report.completed, report.max_norm_drift);
    println!("{:>6} {:>10} {:>10} {:>8}", "t", "σ² (QD)", "σ² (ME)", "±");
    for k in 1..qd.len() {
        println!(
            "{:>6.1} {:>10.4} {:>10.4} {:>8.4}",
            qd.times[k], qd.variance[k], me.variance[k], qd.variance_stderr[k]
        );
    }
    Ok(())
}
