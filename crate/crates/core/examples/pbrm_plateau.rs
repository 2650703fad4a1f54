//! Power-law banded random matrices at μ = 1: D barely moves over a wide
//! range of dephasing rates.

use qdiffusion::analysis::GreenKubo;
use qdiffusion::lattice::{build_hamiltonian, ModelSpec};

fn main() -> qdiffusion::Result<()> {
    let n = 500;
    let kubo = ModelSpec::pbrm(n, 1.0, 0.01, 0)
        .realizations(6, 4)
        .iter()
        .map(|s| build_hamiltonian(s).and_then(|h| GreenKubo::new(&h)))
        .collect::<qdiffusion::Result<Vec<_>>>()?;
    for k in 0..=16 {
        let gamma = 10f64.powf(-4.0 + 0.25 * k as f64);
        let d = kubo.iter().map(|g| g.diffusion(gamma).unwrap().d).sum::<f64>() / kubo.len() as f64;
        println!("γ = {gamma:.2e}  D = {d:.5}");
    }
    Ok(())
}
