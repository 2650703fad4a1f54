//! Kubo diffusion coefficient against dephasing across the transition.
//! The curves for different W fan out on either side of W = 2.

use qdiffusion::analysis::GreenKubo;
use qdiffusion::lattice::{build_hamiltonian, ModelSpec};

fn main() -> qdiffusion::Result<()> {
    let rates = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];
    print!("{:>5}", "W");
    for g in rates {
        print!(" {g:>8}");
    }
    println!();
    for w in [1.5, 1.8, 2.0, 2.2, 2.5] {
        let kubo = ModelSpec::hhaa(400, w)
            .realizations(8, 2)
            .iter()
            .map(|s| build_hamiltonian(s).and_then(|h| GreenKubo::new(&h)))
            .collect::<qdiffusion::Result<Vec<_>>>()?;
        print!("{w:>5}");
        for g in rates {
            let d: f64 = kubo.iter().map(|k| k.diffusion(g).unwrap().d).sum::<f64>() / kubo.len() as f64;
            print!(" {d:>8.4}");
        }
        println!();
    }
    Ok(())
}
