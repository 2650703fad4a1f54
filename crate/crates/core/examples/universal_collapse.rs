//! D/D₀ at the critical point from three independent routes, against the
//! universal curve.

use qdiffusion::analysis::{collapse_integral_d, fit_diffusion, universal_law, GreenKubo, WaitingTime};
use qdiffusion::drift::{coherent_series, propagate_realizations, QdConfig};
use qdiffusion::lattice::{build_hamiltonian, coherent_predictions, ModelSpec};
use qdiffusion::observables::{DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD};

fn main() -> qdiffusion::Result<()> {
    let n = 1000;
    let base = ModelSpec::hhaa(n, 2.0);
    let p = coherent_predictions(&base)?;
    let (d0, tau_w) = (p.d0()?, p.tau_w()?);
    let hs = base
        .realizations(8, 5)
        .iter()
        .map(build_hamiltonian)
        .collect::<qdiffusion::Result<Vec<_>>>()?;
    let kubo = hs.iter().map(GreenKubo::new).collect::<qdiffusion::Result<Vec<_>>>()?;

    // the collapse integral joins samples linearly, so resolve the
    // ballistic start finely
    let times: Vec<f64> = (0..200)
        .map(|k| 0.01 * k as f64)
        .chain((4..=600).map(|k| 0.5 * k as f64))
        .collect();
    let coherent = coherent_series(&hs, n / 2, &times, DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD)?;
    let keep = coherent.unflagged_len();

    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "x", "law", "Kubo", "collapse", "QD fit");
    for x in [0.05, 0.2, 1.0, 3.0] {
        let gamma = x / tau_w;
        let d_kubo = kubo.iter().map(|k| k.diffusion(gamma).map(|r| r.d)).sum::<qdiffusion::Result<f64>>()?
            / kubo.len() as f64;
        let d_collapse = collapse_integral_d(
            &coherent.times[..keep],
            &coherent.variance[..keep],
            1.0 / gamma,
            WaitingTime::Poisson,
        )?
        .d;
        let start = (2.0 * tau_w).max(5.0 / gamma);
        let cfg = QdConfig {
            n_traj: 8,
            t_max: start + 100.0,
            master_seed: 9,
            ..Default::default()
        }
        .adapted(&hs[0], gamma, 1.0)?;
        let series = propagate_realizations(&hs, gamma, n / 2, &cfg)?.0;
        let d_fit = fit_diffusion(&series, (start, cfg.t_max))?.d;
        println!(
            "{x:>6} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            universal_law(x),
            d_kubo / d0,
            d_collapse / d0,
            d_fit / d0
        );
    }
    Ok(())
}
