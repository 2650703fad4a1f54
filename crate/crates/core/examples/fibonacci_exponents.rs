//! Anomalous coherent spreading on the Fibonacci chain and the matching
//! power of the dephasing rate in D.

use qdiffusion::analysis::{fibonacci_analytic_d, fit_power_law, GreenKubo};
use qdiffusion::drift::coherent_series;
use qdiffusion::lattice::{build_hamiltonian, coherent_predictions, ModelSpec};
use qdiffusion::observables::{DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD};

fn main() -> qdiffusion::Result<()> {
    let n = 10_000;
    let times: Vec<f64> = (0..200).map(|k| 10f64.powf(3.4 * k as f64 / 199.0)).collect();
    for w in [1.0, 3.15, 5.0] {
        let spec = ModelSpec::fibonacci(n, w);
        let h = build_hamiltonian(&spec)?;
        let series = coherent_series(
            std::slice::from_ref(&h),
            n / 2,
            &times,
            DEFAULT_BOUNDARY_GUARD,
            DEFAULT_GUARD_THRESHOLD,
        )?;
        let end = series.times[series.unflagged_len() - 1];
        let alpha = fit_power_law(&series, (10.0, end))?.exponent;

        let p = coherent_predictions(&spec)?;
        let kubo = GreenKubo::new(&build_hamiltonian(&ModelSpec::fibonacci(1500, w))?)?;
        println!("W={w}: α = {alpha:.3}");
        for gamma in [0.01, 0.03, 0.1] {
            let closed = fibonacci_analytic_d(p.v0_sq()?, p.tau_w()?, 1.0 / gamma, alpha)?.d;
            println!("  γ={gamma}: Kubo D = {:.4}, closed form {closed:.4}", kubo.diffusion(gamma)?.d);
        }
    }
    Ok(())
}
