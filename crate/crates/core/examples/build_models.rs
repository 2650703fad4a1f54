//! Builds one chain of each model and prints its closed-form coherent
//! predictions next to the measured energy spread.
//!
//! ```text
//! cargo run --example build_models
//! ```

use qdiffusion::lattice::{build_hamiltonian, coherent_predictions, hhaa_phase, ModelSpec};

fn main() -> qdiffusion::Result<()> {
    for w in [1.0, 2.0, 3.0] {
        let spec = ModelSpec::hhaa(2000, w).with_phase(0.3);
        let h = build_hamiltonian(&spec)?;
        let p = coherent_predictions(&spec)?;
        println!(
            "HHAA W={w} ({}): ΔE = {:.4}, τ_W = {:?}, D₀ = {:?}, ξ = {:?}",
            hhaa_phase(&spec).name(),
            h.energy_spread(),
            p.tau_w,
            p.d0,
            p.xi
        );
    }

    let fib = build_hamiltonian(&ModelSpec::fibonacci(13, 1.0))?;
    let word: String = fib.diagonal().iter().map(|&e| if e == 0.0 { 'A' } else { 'B' }).collect();
    println!("Fibonacci word for N=13: {word}");

    let spec = ModelSpec::pbrm(400, 1.0, 0.3, 7);
    let h = build_hamiltonian(&spec)?;
    println!(
        "PBRM μ=1 b=0.3: v₀² at the centre = {:.4}, ‖H‖ ≤ {:.2}",
        h.initial_velocity_sq(200),
        h.norm_bound()
    );

    let mut csv = Vec::new();
    build_hamiltonian(&ModelSpec::hhaa(4, 2.0))?.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
