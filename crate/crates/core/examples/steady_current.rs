//! Steady-state current through a pumped and drained chain: the full
//! master-equation solution, the transfer-time route, and the diffusive
//! estimate from a Kubo D.

use qdiffusion::analysis::GreenKubo;
use qdiffusion::lattice::{build_hamiltonian, ModelSpec};
use qdiffusion::lindblad::CurrentResult;

fn main() -> qdiffusion::Result<()> {
    let (n, gp, gd) = (60, 1.0, 1.0);
    for w in [1.0, 2.0, 3.0] {
        let h = build_hamiltonian(&ModelSpec::hhaa(n, w))?;
        let kubo = GreenKubo::new(&build_hamiltonian(&ModelSpec::hhaa(1000, w))?)?;
        println!("W = {w}");
        for gamma in [0.03, 0.1, 0.3, 1.0] {
            let (me, report) = CurrentResult::master_equation(&h, w, gamma, gp, gd)?;
            let att = CurrentResult::att(&h, w, gamma, gp, gd)?;
            let heur = CurrentResult::heuristic(n, w, gamma, gp, gd, kubo.diffusion(gamma)?.d, 1.0, 1.0)?;
            println!(
                "  γ={gamma:<5} I = {:.4e} (residual {:.0e}), transfer time {:.4e}, diffusive {:.4e}",
                me.i_ss, report.residual, att.i_ss, heur.i_ss
            );
        }
    }
    Ok(())
}
