//! Coherent spreading of a single site on the three sides of the
//! metal-insulator transition: ballistic, diffusive and frozen.

use qdiffusion::analysis::{fit_diffusion, fit_power_law};
use qdiffusion::drift::coherent_series;
use qdiffusion::lattice::{build_hamiltonian, coherent_predictions, ModelSpec};
use qdiffusion::observables::{DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD};

fn main() -> qdiffusion::Result<()> {
    let n = 2000;
    let times: Vec<f64> = (0..=300).map(|k| k as f64 * 0.5).collect();
    for w in [1.0, 2.0, 3.0] {
        let base = ModelSpec::hhaa(n, w);
        let hs = base
            .realizations(16, 1)
            .iter()
            .map(build_hamiltonian)
            .collect::<qdiffusion::Result<Vec<_>>>()?;
        let series = coherent_series(&hs, n / 2, &times, DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD)?;
        let end = series.times[series.unflagged_len() - 1];
        let law = fit_power_law(&series, (5.0, end))?;
        print!("W={w}: σ² ~ t^{:.2}", law.exponent);
        if w == 2.0 {
            let d = fit_diffusion(&series, (5.0, end))?.d;
            print!(", D = {d:.4} (closed form {:.4})", coherent_predictions(&base)?.d0()?);
        }
        println!();
    }
    Ok(())
}
