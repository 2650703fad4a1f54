//! Invariants of every module as standalone checks. Randomized checks run
//! under a fixed-seed proptest runner so results do not vary between runs.

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use qdiffusion::analysis::{
    collapse_integral_d, collapse_integral_fn, naive_law, universal_law, WaitingTime, UniversalPoint,
};
use qdiffusion::drift::{propagate_ensemble, run_trajectory, DriftKernel, QdConfig, TrajectoryState};
use qdiffusion::experiment::{run, Command, ExperimentConfig, RunManifest, MANIFEST_FILE};
use qdiffusion::lattice::{
    build_hamiltonian, coherent_predictions, pbrm_coupling_variance, scattering_time, Hamiltonian, ModelKind,
    ModelSpec,
};
use qdiffusion::lindblad::{density_at, evolve_density, CurrentResult, DensityMatrix, LindbladOptions, Liouvillian};
use qdiffusion::{ObservableSeries, Units};

use super::*;

pub type Property = (&'static str, fn() -> Check);

/// Every invariant, cheapest first.
pub const ALL: &[Property] = &[
    ("hamiltonian_symmetry", hamiltonian_symmetry),
    ("hhaa_diagonal_bounded", hhaa_diagonal_bounded),
    ("fibonacci_word", fibonacci_word),
    ("pbrm_coupling_statistics", pbrm_coupling_statistics),
    ("critical_d0_consistency", critical_d0_consistency),
    ("empirical_energy_spread", empirical_energy_spread),
    ("trace_conservation", trace_conservation),
    ("infinite_temperature_fixed_point", infinite_temperature_fixed_point),
    ("dephasing_spares_diagonal_states", dephasing_spares_diagonal_states),
    ("transfer_time_matches_master_equation", transfer_time_matches_master_equation),
    ("current_bounds", current_bounds),
    ("trajectory_unitarity", trajectory_unitarity),
    ("ensemble_populations", ensemble_populations),
    ("drift_determinism", drift_determinism),
    ("universal_law_shape", universal_law_shape),
    ("collapse_fixed_point", collapse_fixed_point),
    ("two_poisson_contrast", two_poisson_contrast),
    ("zeno_monotonicity", zeno_monotonicity),
    ("crossing_at_transition", crossing_at_transition),
    ("triple_agreement_at_criticality", triple_agreement_at_criticality),
    ("drift_matches_master_equation", drift_matches_master_equation),
    ("csv_round_trip", csv_round_trip),
    ("reproducible_outputs", reproducible_outputs),
    ("single_valid_manifest", single_valid_manifest),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn report<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Check {
    r.map_err(|e| e.to_string())
}

fn kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Hhaa), Just(ModelKind::Fibonacci), Just(ModelKind::Pbrm)]
}

fn spec_strategy(max_n: usize) -> impl Strategy<Value = ModelSpec> {
    (kind(), 2..max_n, 0.0..5.0f64, 0.0..2.0 * PI, 0.0..2.0f64, 0.01..5.0f64, any::<u64>()).prop_map(
        |(kind, n, w, theta, mu, b, seed)| match kind {
            ModelKind::Hhaa => ModelSpec::hhaa(n, w).with_phase(theta),
            ModelKind::Fibonacci => ModelSpec::fibonacci(n, w),
            ModelKind::Pbrm => ModelSpec::pbrm(n, mu, b, seed),
        },
    )
}

pub fn hamiltonian_symmetry() -> Check {
    report(runner(200).run(&spec_strategy(60), |spec| {
        let h = build_hamiltonian(&spec).unwrap();
        let n = h.n();
        let dense = h.to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(dense[i * n + j], dense[j * n + i]);
            }
        }
        Ok(())
    }))
}

pub fn hhaa_diagonal_bounded() -> Check {
    report(
        runner(300).run(&(2..500usize, 0.0..10.0f64, 0.0..2.0 * PI, 0.0..1.0f64), |(n, w, theta, q)| {
            let spec = ModelSpec::hhaa(n, w).with_phase(theta).with_wavenumber(q);
            let h = build_hamiltonian(&spec).unwrap();
            for e in h.diagonal() {
                prop_assert!(e.abs() <= w, "|{}| > {}", e, w);
            }
            Ok(())
        }),
    )
}

pub fn fibonacci_word() -> Check {
    report(runner(200).run(&(2..3000usize, 0.1..10.0f64), |(n, w)| {
        let d = build_hamiltonian(&ModelSpec::fibonacci(n, w)).unwrap().diagonal();
        for e in &d {
            prop_assert!(*e == 0.0 || *e == w);
        }
        for pair in d.windows(2) {
            prop_assert!(!(pair[0] == w && pair[1] == w), "two consecutive W");
        }
        Ok(())
    }))
}

pub fn pbrm_coupling_statistics() -> Check {
    let samples = 10_000;
    for (mu, b, d) in [(1.0, 1.0, 1usize), (1.0, 0.5, 3), (0.6, 2.0, 2), (1.5, 1.0, 4)] {
        let n = 8;
        let (mut s, mut s2, mut diag, mut diag2) = (0.0, 0.0, 0.0, 0.0);
        for seed in 0..samples {
            let h = build_hamiltonian(&ModelSpec::pbrm(n, mu, b, seed)).unwrap();
            let x = h.get(2, 2 + d);
            s += x;
            s2 += x * x;
            let e = h.get(1, 1);
            diag += e;
            diag2 += e * e;
        }
        let m = samples as f64;
        let var = s2 / m - (s / m).powi(2);
        let expect = pbrm_coupling_variance(d, mu, b);
        ensure(rel(var, expect) < 0.05, || {
            format!("μ={mu}, b={b}, d={d}: sample variance {var} vs {expect}")
        })?;
        let dvar = diag2 / m - (diag / m).powi(2);
        ensure(rel(dvar, 1.0) < 0.05, || format!("diagonal variance {dvar}"))?;
    }
    Ok(())
}

pub fn critical_d0_consistency() -> Check {
    report(
        runner(200).run(&(0.1..10.0f64, 0.1..5.0f64, 0.1..5.0f64), |(j, hbar, a)| {
            let spec = ModelSpec::hhaa(100, 2.0 * j).with_hopping(j).with_units(Units {
                hbar,
                lattice_constant: a,
            });
            let p = coherent_predictions(&spec).unwrap();
            let d0 = p.d0().unwrap();
            let expect = p.v0_sq().unwrap() * p.tau_w().unwrap() / 2.0;
            prop_assert!((d0 - expect).abs() <= 4.0 * f64::EPSILON * expect, "{} vs {}", d0, expect);
            Ok(())
        }),
    )
}

pub fn empirical_energy_spread() -> Check {
    let w = 2.0;
    let specs = ModelSpec::hhaa(100_000, w).realizations(8, 1);
    let measured = specs
        .iter()
        .map(|s| build_hamiltonian(s).unwrap().energy_spread())
        .sum::<f64>()
        / specs.len() as f64;
    let closed = Units::default().hbar / scattering_time(&specs[0]).unwrap();
    ensure(rel(measured, closed) < 0.005, || format!("ΔE measured {measured}, closed form {closed}"))
}

fn small_chain() -> impl Strategy<Value = (Hamiltonian, f64)> {
    (3..12usize, 0.0..4.0f64, 0.0..2.0 * PI, 0.01..3.0f64)
        .prop_map(|(n, w, theta, g)| (build_hamiltonian(&ModelSpec::hhaa(n, w).with_phase(theta)).unwrap(), g))
}

pub fn trace_conservation() -> Check {
    report(runner(24).run(&small_chain(), |(h, g)| {
        let n = h.n();
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
        let s = evolve_density(&h, g, &DensityMatrix::pure_site(n, n / 2), &times, &LindbladOptions::default())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        for pops in s.populations.as_ref().unwrap() {
            let tr: f64 = pops.iter().sum();
            prop_assert!((tr - 1.0).abs() <= 1e-10, "trace {}", tr);
        }
        Ok(())
    }))
}

pub fn infinite_temperature_fixed_point() -> Check {
    report(
        runner(6).run(&(10..=50usize, 0.5..3.0f64, 0.0..2.0 * PI, 0.2..2.0f64), |(n, w, theta, g)| {
            let h = build_hamiltonian(&ModelSpec::hhaa(n, w).with_phase(theta)).unwrap();
            let mixed = DensityMatrix::maximally_mixed(n);
            let opts = LindbladOptions::default();
            let mut rho = DensityMatrix::pure_site(n, n / 3);
            let first = rho.trace_distance(&mixed).unwrap();
            let mut last = first;
            let step = 0.25 * n as f64 * n as f64 / 10.0;
            for _ in 0..30 {
                rho = density_at(&h, g, &rho, step, &opts).unwrap();
                let dist = rho.trace_distance(&mixed).unwrap();
                prop_assert!(dist <= last + 1e-9, "distance grew from {} to {}", last, dist);
                last = dist;
            }
            prop_assert!(last < first, "distance stayed at {}", last);
            Ok(())
        }),
    )
}

pub fn dephasing_spares_diagonal_states() -> Check {
    report(runner(50).run(
        &(small_chain(), proptest::collection::vec(0.0..1.0f64, 12)),
        |((h, g), weights)| {
            let n = h.n();
            let total: f64 = weights[..n].iter().sum::<f64>() + 1e-12;
            let mut rho = vec![num_complex::Complex64::new(0.0, 0.0); n * n];
            for i in 0..n {
                rho[i * n + i] = (weights[i] / total).into();
            }
            let with = Liouvillian::new(&h, g, None).unwrap().apply(&rho);
            let without = Liouvillian::new(&h, 0.0, None).unwrap().apply(&rho);
            for (a, b) in with.iter().zip(&without) {
                prop_assert!((a - b).norm() <= 1e-14);
            }
            Ok(())
        },
    ))
}

pub fn transfer_time_matches_master_equation() -> Check {
    let check = |n: usize, w: f64, theta: f64, g: f64, gp: f64, gd: f64| -> Result<(), String> {
        let h = build_hamiltonian(&ModelSpec::hhaa(n, w).with_phase(theta)).unwrap();
        let (me, _) = CurrentResult::master_equation(&h, w, g, gp, gd).map_err(|e| e.to_string())?;
        let att = CurrentResult::att(&h, w, g, gp, gd).map_err(|e| e.to_string())?;
        ensure(rel(att.i_ss, me.i_ss) < 1e-8, || {
            format!("N={n} W={w} γ={g}: ME {} vs ATT {}", me.i_ss, att.i_ss)
        })
    };
    for w in [1.0, 2.0, 3.0] {
        check(100, w, 0.7, 0.1, 1.0, 1.0)?;
    }
    report(runner(30).run(
        &(2..30usize, 0.0..4.0f64, 0.0..2.0 * PI, 0.01..3.0f64, 0.1..3.0f64, 0.1..3.0f64),
        |(n, w, theta, g, gp, gd)| check(n, w, theta, g, gp, gd).map_err(TestCaseError::fail),
    ))
}

pub fn current_bounds() -> Check {
    report(runner(40).run(
        &(2..25usize, 0.0..4.0f64, 0.0..2.0 * PI, 0.0..3.0f64, 0.05..5.0f64, 0.05..5.0f64),
        |(n, w, theta, g, gp, gd)| {
            let h = build_hamiltonian(&ModelSpec::hhaa(n, w).with_phase(theta)).unwrap();
            let (me, _) = CurrentResult::master_equation(&h, w, g, gp, gd).unwrap();
            prop_assert!(me.i_ss >= 0.0 && me.i_ss <= gp * (1.0 + 1e-12), "I = {} for γ_p = {}", me.i_ss, gp);
            Ok(())
        },
    ))
}

pub fn trajectory_unitarity() -> Check {
    let steps = 1_000_000;
    for spec in [ModelSpec::hhaa(32, 2.0).with_phase(0.4), ModelSpec::pbrm(16, 1.0, 1.0, 9)] {
        let h = build_hamiltonian(&spec).unwrap();
        let g = 0.5;
        let dt = QdConfig::max_stable_dt(&h, g);
        let cfg = QdConfig {
            dt,
            n_traj: 1,
            t_max: steps as f64 * dt,
            record_stride: 10_000,
            master_seed: 3,
            ..Default::default()
        };
        let kernel = DriftKernel::new(&h, g, dt).unwrap();
        let (_, drift) =
            run_trajectory(&kernel, &TrajectoryState::site(h.n(), h.n() / 2), &cfg, 0).map_err(|e| e.to_string())?;
        ensure(drift <= 1e-8, || format!("{:?}: norm drift {drift:e}", spec.kind))?;
    }
    Ok(())
}

pub fn ensemble_populations() -> Check {
    report(runner(16).run(&(spec_strategy(40), 0.0..2.0f64), |(spec, g)| {
        let h = build_hamiltonian(&spec).unwrap();
        let n = h.n();
        let cfg = QdConfig {
            n_traj: 8,
            t_max: 5.0,
            record_populations: true,
            ..Default::default()
        }
        .adapted(&h, g, 0.25)
        .unwrap();
        let (s, _) = propagate_ensemble(&h, g, &TrajectoryState::site(n, n / 2), &cfg).unwrap();
        for pops in s.populations.unwrap() {
            prop_assert!(pops.iter().all(|&p| p >= 0.0));
            let total: f64 = pops.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-8, "total {}", total);
        }
        Ok(())
    }))
}

pub fn drift_determinism() -> Check {
    let h = build_hamiltonian(&ModelSpec::hhaa(60, 2.0).with_phase(1.0)).unwrap();
    let cfg = QdConfig {
        n_traj: 40,
        t_max: 10.0,
        master_seed: 99,
        ..Default::default()
    }
    .adapted(&h, 0.3, 0.5)
    .unwrap();
    let psi0 = TrajectoryState::site(60, 30);
    let kernel = DriftKernel::new(&h, 0.3, cfg.dt).unwrap();
    let a = run_trajectory(&kernel, &psi0, &cfg, 17).unwrap();
    let b = run_trajectory(&kernel, &psi0, &cfg, 17).unwrap();
    ensure(a == b, || "trajectory 17 differs between runs".into())?;
    let first = propagate_ensemble(&h, 0.3, &psi0, &cfg).unwrap().0;
    let second = propagate_ensemble(&h, 0.3, &psi0, &cfg).unwrap().0;
    ensure(first == second, || "ensemble means differ between runs".into())
}

pub fn universal_law_shape() -> Check {
    report(runner(500).run(&(1e-4..50.0f64, 1e-4..50.0f64), |(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(universal_law(hi) < universal_law(lo));
        Ok(())
    }))?;
    let x = 1e-3;
    ensure((universal_law(x) - (1.0 - x * x / 6.0)).abs() < 1e-6, || "series mismatch near 0".into())
}

pub fn collapse_fixed_point() -> Check {
    report(runner(40).run(&(0.01..5.0f64,), |(d0,)| {
        let values: Vec<f64> = (0..=16)
            .map(|k| {
                let tau_phi = 10f64.powf(-1.0 + k as f64 / 4.0);
                collapse_integral_fn(|t| 2.0 * d0 * t, tau_phi, WaitingTime::Poisson, &[]).unwrap().d
            })
            .collect();
        let (lo, hi) = values.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!((hi - lo) / d0 < 1e-8, "spread {}", (hi - lo) / d0);
        let times: Vec<f64> = (1..=2000).map(|k| k as f64 * 0.5).collect();
        let y: Vec<f64> = times.iter().map(|t| 2.0 * d0 * t).collect();
        for tau_phi in [0.1, 1.0, 10.0, 100.0] {
            let d = collapse_integral_d(&times, &y, tau_phi, WaitingTime::Poisson).unwrap().d;
            prop_assert!(rel(d, d0) < 1e-8);
        }
        Ok(())
    }))
}

pub fn two_poisson_contrast() -> Check {
    let deficit = |f: fn(f64) -> f64, x: f64| (1.0 - f(x)) / x;
    let xs = [1e-1, 1e-2, 1e-3, 1e-4];
    let universal: Vec<f64> = xs.iter().map(|&x| deficit(universal_law, x)).collect();
    let naive: Vec<f64> = xs.iter().map(|&x| deficit(naive_law, x)).collect();
    ensure(universal.windows(2).all(|w| w[1] < w[0]) && universal[3] < 1e-3, || {
        format!("universal deficit ratio does not vanish: {universal:?}")
    })?;
    ensure((naive[3] - 1.0).abs() < 1e-3, || format!("naive deficit ratio {naive:?}"))
}

pub fn zeno_monotonicity() -> Check {
    let h = build_hamiltonian(&ModelSpec::hhaa(200, 0.0)).unwrap();
    let mut last = f64::INFINITY;
    for (i, g) in [4.0, 6.0, 10.0, 20.0].into_iter().enumerate() {
        let s = qd_series(std::slice::from_ref(&h), g, 200, 60.0, 0.5, 40 + i as u64);
        let d = fit_from(&s, 5.0).map_err(|e| e.to_string())?;
        let law = 2.0 / g;
        ensure(d < last, || format!("D rose to {d} at γ = {g}"))?;
        ensure(rel(d, law) < 0.1, || format!("γ = {g}: D = {d}, law {law}"))?;
        last = d;
    }
    Ok(())
}

/// `ln D(W)` curves at two rates cross where they agree; bisection on W.
pub fn crossing_at_transition() -> Check {
    let n = 400;
    let rates = [0.01, 0.1, 1.0];
    let curves = |w: f64| -> Vec<f64> {
        let kubo = kubo_all(&hhaa_realizations(n, w, 8, 5));
        rates.iter().map(|&g| kubo_mean(&kubo, g).ln()).collect()
    };
    let (lo, hi) = (1.5, 2.5);
    let f_lo = curves(lo);
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let diff = |c: &[f64]| c[i] - c[j];
        let (mut a, mut b, mut fa) = (lo, hi, diff(&f_lo));
        ensure(fa * diff(&curves(hi)) < 0.0, || {
            format!("γ = {} and {} do not cross on [{lo}, {hi}]", rates[i], rates[j])
        })?;
        while b - a > 0.01 {
            let mid = 0.5 * (a + b);
            let fm = diff(&curves(mid));
            if fm * fa > 0.0 {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        let w = 0.5 * (a + b);
        ensure((w - 2.0).abs() <= 0.1, || {
            format!("γ = {} and {} cross at W = {w}", rates[i], rates[j])
        })?;
    }
    Ok(())
}

pub fn triple_agreement_at_criticality() -> Check {
    let (n, g) = (1000, 0.1);
    let hs = hhaa_realizations(n, 2.0, 16, 21);
    let kubo = kubo_mean(&kubo_all(&hs), g);
    let series = qd_series(&hs, g, 8, 300.0, 1.0, 22);
    let fit = fit_from(&series, 50.0).map_err(|e| e.to_string())?;
    let coherent = qd_series(&hs, 0.0, 1, 400.0, 0.5, 0);
    let keep = coherent.unflagged_len();
    let collapse = collapse_integral_d(
        &coherent.times[..keep],
        &coherent.variance[..keep],
        1.0 / g,
        WaitingTime::Poisson,
    )
    .map_err(|e| e.to_string())?
    .d;
    for (a, b, what) in [(kubo, fit, "kubo/fit"), (kubo, collapse, "kubo/collapse"), (fit, collapse, "fit/collapse")] {
        ensure(rel(a, b) < 0.1, || {
            format!("{what}: {a} vs {b} (kubo {kubo}, fit {fit}, collapse {collapse})")
        })?;
    }
    Ok(())
}

pub fn drift_matches_master_equation() -> Check {
    let h = build_hamiltonian(&ModelSpec::hhaa(100, 2.0)).unwrap();
    for (i, g) in [0.01, 0.1, 1.0].into_iter().enumerate() {
        let dev = qd_me_deviation(&h, g, 2000, 50.0, 70 + i as u64);
        ensure(dev <= 0.05, || format!("γ = {g}: max relative deviation {dev}"))?;
    }
    Ok(())
}

const SMALL_RUN: &str = r#"
master_seed = 4
[model]
kind = "hhaa"
n = 80
potential = [1.0, 2.0]
realizations = 2
[dynamics]
method = "both"
n_traj = 12
t_max = 12.0
record_interval = 0.25
[dephasing]
values = [0.2, 1.0]
[analysis]
window = [3.0, 12.0]
"#;

fn small_run(dir: &std::path::Path, command: Command) -> qdiffusion::Result<RunManifest> {
    let cfg = ExperimentConfig::from_toml_str(SMALL_RUN, &[format!("output.dir={:?}", dir.display().to_string())])?;
    Ok(run(command, &cfg)?.manifest)
}

pub fn csv_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    small_run(dir.path(), Command::Spread).map_err(|e| e.to_string())?;
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("spread.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    for entry in summary.as_array().unwrap() {
        let (param, gamma) = (entry["param"].as_f64().unwrap(), entry["gamma_phi"].as_f64().unwrap());
        let pick: Vec<&csv::StringRecord> = rows
            .iter()
            .filter(|r| r[0].parse::<f64>().unwrap() == param && r[1].parse::<f64>().unwrap() == gamma)
            .collect();
        let num = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
        let r = pick.len();
        let series = ObservableSeries {
            times: pick.iter().map(|x| num(x, 2)).collect(),
            variance: pick.iter().map(|x| num(x, 3)).collect(),
            variance_stderr: pick.iter().map(|x| num(x, 4)).collect(),
            return_probability: pick.iter().map(|x| num(x, 5)).collect(),
            purity: None,
            boundary_weight: vec![0.0; r],
            boundary_flag: pick.iter().map(|x| &x[6] == "1").collect(),
            populations: None,
            samples: entry["samples"].as_u64().unwrap() as usize,
        };
        let refit = qdiffusion::analysis::fit_diffusion(&series, (3.0, 12.0)).map_err(|e| e.to_string())?;
        let stored = entry["fit"]["d"].as_f64().unwrap();
        ensure(refit.d == stored, || format!("refit {} vs stored {stored}", refit.d))?;
    }
    let mut bytes = Vec::new();
    let points = vec![UniversalPoint::new(
        "hhaa",
        2.0,
        0.1,
        0.5,
        1.0,
        0.5,
        &qdiffusion::analysis::DiffusionResult::exact(0.4, qdiffusion::analysis::DiffusionMethod::Fit),
    )];
    UniversalPoint::write_csv(&points, &mut bytes).unwrap();
    ensure(UniversalPoint::read_csv(bytes.as_slice()).unwrap() == points, || "universal.csv round trip".into())
}

pub fn reproducible_outputs() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ma = small_run(a.path(), Command::Spread).map_err(|e| e.to_string())?;
    let mb = small_run(b.path(), Command::Spread).map_err(|e| e.to_string())?;
    let hashes = |m: &RunManifest| m.outputs.iter().map(|o| (o.file.clone(), o.sha256.clone())).collect::<Vec<_>>();
    ensure(hashes(&ma) == hashes(&mb), || "output hashes differ between identical runs".into())
}

pub fn single_valid_manifest() -> Check {
    for command in [Command::Spread, Command::GreenKubo, Command::Current, Command::DumpHamiltonian { realization: 1 }] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        small_run(dir.path(), command).map_err(|e| e.to_string())?;
        let manifests = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name() == MANIFEST_FILE)
            .count();
        ensure(manifests == 1, || format!("{} manifests for {}", manifests, command.name()))?;
        RunManifest::read(dir.path())
            .and_then(|m| m.validate(dir.path()))
            .map_err(|e| format!("{}: {e}", command.name()))?;
    }
    Ok(())
}
