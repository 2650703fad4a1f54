use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{AnalysisMethod, DynamicsMethod, ExperimentConfig};
use super::manifest::{OutputDir, SeedRecord};
use crate::analysis::{
    collapse_integral_d, default_window, fit_diffusion, DiffusionResult, GreenKubo, UniversalPoint,
    GREEN_KUBO_MAX_SITES,
};
use crate::drift::{coherent_series, propagate_realizations, purity_echo};
use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, coherent_predictions, scattering_time, Hamiltonian, ModelKind, ModelSpec};
use crate::lindblad::{
    evolve_realizations, CurrentResult, SteadyStateReport, CURRENT_CSV_HEADER, SOLVE_TOLERANCE,
    TRACE_TOLERANCE,
};
use crate::observables::{fmt_f64, ObservableSeries};
use crate::rng::derive_seed;

/// Column order of `spread.csv`.
pub const SPREAD_CSV_HEADER: [&str; 13] = [
    "param",
    "gamma_phi",
    "t",
    "sigma2",
    "sigma2_stderr",
    "p00",
    "boundary_flag",
    "sigma2_lindblad",
    "deviation",
    "ballistic",
    "diffusive",
    "saturation",
    "tau_phi",
];

pub const PURITY_CSV_HEADER: [&str; 8] = [
    "param",
    "gamma_phi",
    "tau_r",
    "echo",
    "echo_stderr",
    "variance_min_time",
    "completed",
    "failed",
];

pub const ECHO_TRACE_CSV_HEADER: [&str; 6] = ["param", "gamma_phi", "tau_r", "t", "p00", "sigma2"];

pub const PURITY_SERIES_CSV_HEADER: [&str; 4] = ["param", "gamma_phi", "t", "purity"];

pub const GREENKUBO_CSV_HEADER: [&str; 6] = ["model", "param", "gamma_phi", "d", "d_stderr", "realizations"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spread,
    Universal,
    Current,
    Purity,
    GreenKubo,
    /// Writes realization `realization` of the first swept parameter.
    DumpHamiltonian { realization: usize },
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spread => "spread",
            Command::Universal => "universal",
            Command::Current => "current",
            Command::Purity => "purity",
            Command::GreenKubo => "greenkubo",
            Command::DumpHamiltonian { .. } => "dump-hamiltonian",
        }
    }
}

/// Outcome of a run whose outputs were written.
#[derive(Debug)]
pub struct RunReport {
    pub manifest: super::RunManifest,
    /// Points attempted and points that failed.
    pub points: usize,
    pub failed: usize,
}

/// Runs `command` and writes its outputs, a failure log when points failed,
/// and the manifest into `cfg.output.dir`. Fails without writing a manifest
/// when every point failed.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.output.dir, cfg.output.gnuplot)?;
    let mut ctx = Context {
        cfg,
        seeds: SeedRecord {
            master_seed: cfg.master_seed,
            points: BTreeMap::new(),
            realizations: Vec::new(),
        },
        points: 0,
        last_error: None,
    };
    match command {
        Command::Spread => ctx.spread(&mut out)?,
        Command::Universal => ctx.universal(&mut out)?,
        Command::Current => ctx.current(&mut out)?,
        Command::Purity => ctx.purity(&mut out)?,
        Command::GreenKubo => ctx.greenkubo(&mut out)?,
        Command::DumpHamiltonian { realization } => ctx.dump_hamiltonian(&mut out, realization)?,
    }
    let failed = out.failures().len();
    if ctx.points > 0 && failed >= ctx.points {
        return Err(ctx.last_error.unwrap_or(Error::AllTrajectoriesFailed(0)));
    }
    let points = ctx.points;
    let manifest = out.finish(command.name(), rayon::current_num_threads(), cfg, ctx.seeds)?;
    Ok(RunReport {
        manifest,
        points,
        failed,
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    seeds: SeedRecord,
    points: usize,
    last_error: Option<Error>,
}

struct Realized {
    base: ModelSpec,
    hamiltonians: Vec<Hamiltonian>,
}

fn realization_label(spec: &ModelSpec) -> String {
    match spec.kind {
        ModelKind::Hhaa => format!("theta={}", fmt_f64(spec.phase)),
        ModelKind::Fibonacci => "fibonacci".into(),
        ModelKind::Pbrm => format!("seed={}", spec.seed),
    }
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_f64)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Context<'_> {
    fn realize(&mut self, param: f64, n: usize, count: usize) -> Result<Realized> {
        let model = &self.cfg.model;
        let base = model.spec(param, n, self.cfg.units);
        let specs = base.realizations(count, self.cfg.master_seed);
        if self.seeds.realizations.is_empty() {
            self.seeds.realizations = specs.iter().map(realization_label).collect();
        }
        let hamiltonians = specs.iter().map(build_hamiltonian).collect::<Result<Vec<_>>>()?;
        Ok(Realized { base, hamiltonians })
    }

    fn point_seed(&mut self, label: String) -> u64 {
        let index = self.seeds.points.len() as u64;
        *self
            .seeds
            .points
            .entry(label)
            .or_insert_with(|| derive_seed(self.cfg.master_seed, index))
    }

    /// Records a failed point; configuration errors abort the run.
    fn attempt<T>(&mut self, out: &mut OutputDir, label: &str, r: Result<T>) -> Result<Option<T>> {
        self.points += 1;
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e @ Error::Config { .. }) => Err(e),
            Err(e) => {
                out.fail(label, &e);
                self.last_error = Some(e);
                Ok(None)
            }
        }
    }

    fn qd_series(&self, realized: &Realized, gamma_phi: f64, seed: u64) -> Result<ObservableSeries> {
        let n = realized.base.n;
        let qd = self.cfg.dynamics.qd_config(seed);
        Ok(propagate_realizations(&realized.hamiltonians, gamma_phi, self.cfg.origin(n), &qd)?.0)
    }

    fn lindblad_series(&self, realized: &Realized, gamma_phi: f64) -> Result<ObservableSeries> {
        let n = realized.base.n;
        evolve_realizations(
            &realized.hamiltonians,
            gamma_phi,
            self.cfg.origin(n),
            &self.cfg.dynamics.record_times(),
            &self.cfg.dynamics.lindblad_options(),
        )
    }

    /// Fit window: the configured one, or from `max(2τ_W, k τ_φ)` to the
    /// last record before the boundary flag.
    fn fit_window(&self, series: &ObservableSeries, tau_w: Option<f64>, gamma_phi: f64) -> Result<(f64, f64)> {
        if let Some([a, b]) = self.cfg.analysis.window {
            return Ok((a, b));
        }
        let (start, end) = default_window(series, tau_w)?;
        let settle = if gamma_phi > 0.0 {
            self.cfg.analysis.settle_decoherence_times * self.cfg.units.decoherence_time(gamma_phi)
        } else {
            0.0
        };
        Ok((start.max(settle), end))
    }

    fn spread(&mut self, out: &mut OutputDir) -> Result<()> {
        #[derive(Serialize)]
        struct Summary {
            param: f64,
            gamma_phi: f64,
            method: &'static str,
            samples: usize,
            fit: Option<DiffusionResult>,
            fit_error: Option<String>,
            max_deviation: Option<f64>,
        }
        let cfg = self.cfg;
        let method = cfg.dynamics.method;
        let rates = cfg.dephasing.resolve()?;
        let mut rows = Vec::new();
        let mut summaries = Vec::new();
        for param in cfg.model.params() {
            let realized = self.realize(param, cfg.model.n, cfg.model.realizations)?;
            let predictions = coherent_predictions(&realized.base).unwrap_or_default();
            let origin = cfg.origin(cfg.model.n);
            let v0_sq = realized
                .hamiltonians
                .iter()
                .map(|h| h.initial_velocity_sq(origin))
                .sum::<f64>()
                / realized.hamiltonians.len() as f64;
            for &gamma in &rates {
                let label = format!("param={param},gamma_phi={gamma}");
                let seed = self.point_seed(label.clone());
                let result = out.stage(&format!("spread {label}"), || {
                    let qd = match method {
                        DynamicsMethod::Qd | DynamicsMethod::Both => Some(self.qd_series(&realized, gamma, seed)?),
                        DynamicsMethod::Lindblad => None,
                    };
                    let me = match method {
                        DynamicsMethod::Lindblad | DynamicsMethod::Both => Some(self.lindblad_series(&realized, gamma)?),
                        DynamicsMethod::Qd => None,
                    };
                    Ok((qd, me))
                });
                if method != DynamicsMethod::Lindblad {
                    out.tolerance("norm_drift_max", crate::drift::NORM_TOLERANCE);
                }
                if method != DynamicsMethod::Qd {
                    out.tolerance("trace_drift_max", TRACE_TOLERANCE);
                    out.tolerance("rtol", cfg.dynamics.rtol);
                }
                let Some((qd, me)) = self.attempt(out, &label, result)? else {
                    continue;
                };
                let primary = qd.as_ref().or(me.as_ref()).expect("one method ran");
                let tau_phi = (gamma > 0.0).then(|| cfg.units.decoherence_time(gamma));
                let mut max_dev: Option<f64> = None;
                for k in 0..primary.len() {
                    let t = primary.times[k];
                    let (lindblad, deviation) = match (&qd, &me) {
                        (Some(q), Some(m)) => {
                            let ref_v = m.variance[k];
                            let dev = (ref_v > 0.0).then(|| (q.variance[k] - ref_v).abs() / ref_v);
                            if let Some(d) = dev {
                                max_dev = Some(max_dev.map_or(d, |m: f64| m.max(d)));
                            }
                            (Some(ref_v), dev)
                        }
                        _ => (None, None),
                    };
                    rows.push(vec![
                        fmt_f64(param),
                        fmt_f64(gamma),
                        fmt_f64(t),
                        fmt_f64(primary.variance[k]),
                        fmt_f64(primary.variance_stderr[k]),
                        fmt_f64(primary.return_probability[k]),
                        (primary.boundary_flag[k] as u8).to_string(),
                        opt(lindblad),
                        opt(deviation),
                        fmt_f64(v0_sq * t * t),
                        opt(predictions.d0.map(|d0| 2.0 * d0 * t)),
                        opt(predictions.sigma_sat_sq),
                        opt(tau_phi),
                    ]);
                }
                let fit = self
                    .fit_window(primary, predictions.tau_w, gamma)
                    .and_then(|w| fit_diffusion(primary, w));
                summaries.push(Summary {
                    param,
                    gamma_phi: gamma,
                    method: if qd.is_some() { "qd" } else { "lindblad" },
                    samples: primary.samples,
                    fit_error: fit.as_ref().err().map(|e| e.to_string()),
                    fit: fit.ok(),
                    max_deviation: max_dev,
                });
            }
        }
        out.write("spread.csv", &csv_bytes(&SPREAD_CSV_HEADER, &rows)?)?;
        out.write_json("summary.json", &summaries)?;
        out.gnuplot(
            "spread.csv",
            "t [hbar/J]",
            "sigma^2 [a^2]",
            "xy",
            &["'spread.csv' using 3:4 with lines title 'sigma^2'".into()],
        )
    }

    /// Coherent series out to `analysis.coherent_t_max`, truncated at the
    /// first boundary flag. The first record interval is sampled
    /// logarithmically so that the collapse integral sees the ballistic
    /// start at small `τ_φ`.
    fn coherent(&self, realized: &Realized) -> Result<ObservableSeries> {
        let n = realized.base.n;
        let dynamics = &self.cfg.dynamics;
        let step = dynamics.record_interval;
        let mut times = vec![0.0];
        times.extend((0..40).map(|k| step * 1e-3f64.powf(1.0 - k as f64 / 40.0)));
        let records = (self.cfg.analysis.coherent_t_max / step).round() as usize;
        times.extend((1..=records).map(|k| k as f64 * step));
        let mut series = coherent_series(
            &realized.hamiltonians,
            self.cfg.origin(n),
            &times,
            dynamics.boundary_guard,
            dynamics.guard_threshold,
        )?;
        let keep = series.unflagged_len();
        series.times.truncate(keep);
        series.variance.truncate(keep);
        series.variance_stderr.truncate(keep);
        series.return_probability.truncate(keep);
        series.boundary_weight.truncate(keep);
        series.boundary_flag.truncate(keep);
        Ok(series)
    }

    fn universal(&mut self, out: &mut OutputDir) -> Result<()> {
        let cfg = self.cfg;
        let rates = cfg.positive_rates()?;
        let hbar = cfg.units.hbar;
        let methods = &cfg.analysis.methods;
        let mut points = Vec::new();
        for param in cfg.model.params() {
            let realized = self.realize(param, cfg.model.n, cfg.model.realizations)?;
            let origin = cfg.origin(cfg.model.n);
            let needs_coherent =
                cfg.model.kind == ModelKind::Pbrm || methods.contains(&AnalysisMethod::CollapseIntegral);
            let coherent = if needs_coherent {
                let c = out.stage(&format!("coherent param={param}"), || self.coherent(&realized));
                match self.attempt(out, &format!("coherent param={param}"), c)? {
                    Some(c) => Some(c),
                    None => continue,
                }
            } else {
                None
            };
            let v0_sq = realized
                .hamiltonians
                .iter()
                .map(|h| h.initial_velocity_sq(origin))
                .sum::<f64>()
                / realized.hamiltonians.len() as f64;
            let (tau_w, d0) = match cfg.model.kind {
                ModelKind::Pbrm => {
                    // D₀ from the coherent diffusive window, τ_W = 2D₀/v₀²
                    let series = coherent.as_ref().expect("computed above");
                    let first_guess = hbar / cfg.model.hopping;
                    let fit = default_window(series, Some(first_guess)).and_then(|w| fit_diffusion(series, w));
                    let Some(fit) = self.attempt(out, &format!("d0 param={param}"), fit)? else {
                        continue;
                    };
                    (2.0 * fit.d / v0_sq, fit.d)
                }
                _ => {
                    let tau_w = scattering_time(&realized.base)?;
                    (tau_w, v0_sq * tau_w / 2.0)
                }
            };
            let kubo = if methods.contains(&AnalysisMethod::GreenKubo) {
                if cfg.model.n > GREEN_KUBO_MAX_SITES {
                    return Err(Error::Config {
                        path: "analysis.methods".into(),
                        reason: format!("green_kubo needs model.n <= {GREEN_KUBO_MAX_SITES}"),
                    });
                }
                let k = out.stage(&format!("eigensystems param={param}"), || {
                    realized.hamiltonians.iter().map(GreenKubo::new).collect::<Result<Vec<_>>>()
                });
                self.attempt(out, &format!("eigensystems param={param}"), k)?
            } else {
                None
            };
            for &gamma in &rates {
                let tau_phi = cfg.units.decoherence_time(gamma);
                for method in methods {
                    let label = format!("param={param},gamma_phi={gamma},method={method:?}");
                    let d = match method {
                        AnalysisMethod::Fit => {
                            let seed = self.point_seed(format!("param={param},gamma_phi={gamma}"));
                            out.stage(&label, || {
                                let series = match cfg.dynamics.method {
                                    DynamicsMethod::Lindblad => self.lindblad_series(&realized, gamma)?,
                                    _ => self.qd_series(&realized, gamma, seed)?,
                                };
                                let window = self.fit_window(&series, Some(tau_w), gamma)?;
                                fit_diffusion(&series, window)
                            })
                        }
                        AnalysisMethod::GreenKubo => match &kubo {
                            Some(k) => k
                                .iter()
                                .map(|g| g.diffusion(gamma).map(|r| r.d))
                                .collect::<Result<Vec<f64>>>()
                                .map(|ds| {
                                    let (mean, stderr) = mean_and_stderr(&ds);
                                    DiffusionResult {
                                        stderr,
                                        ..DiffusionResult::exact(mean, crate::analysis::DiffusionMethod::GreenKubo)
                                    }
                                }),
                            None => continue,
                        },
                        AnalysisMethod::CollapseIntegral => {
                            let c = coherent.as_ref().expect("computed above");
                            collapse_integral_d(&c.times, &c.variance, tau_phi, cfg.analysis.waiting_time)
                        }
                    };
                    if let Some(d) = self.attempt(out, &label, d)? {
                        points.push(UniversalPoint::new(cfg.model.kind.name(), param, gamma, tau_w, hbar, d0, &d));
                    }
                }
            }
        }
        let mut refs: Vec<UniversalPoint> = Vec::new();
        for p in &points {
            let r = p.reference();
            if !refs.iter().any(|q| q.param == r.param && q.gamma_phi == r.gamma_phi) {
                refs.push(r);
            }
        }
        points.extend(refs);
        let mut bytes = Vec::new();
        UniversalPoint::write_csv(&points, &mut bytes)?;
        out.write("universal.csv", &bytes)?;
        out.gnuplot(
            "universal.csv",
            "x = tau_W/tau_phi",
            "D/D0",
            "x",
            &["'universal.csv' using 5:8 with points title 'D/D0'".into()],
        )
    }

    fn current(&mut self, out: &mut OutputDir) -> Result<()> {
        #[derive(Serialize)]
        struct SteadyStateEntry {
            n: usize,
            param: f64,
            gamma_phi: f64,
            realization: usize,
            report: SteadyStateReport,
        }
        let cfg = self.cfg;
        let rates = cfg.positive_rates()?;
        let gamma_p = cfg.current.gamma_p;
        let gamma_d = cfg.current.gamma_d.unwrap_or(gamma_p);
        let sizes = if cfg.current.sizes.is_empty() {
            vec![cfg.model.n]
        } else {
            cfg.current.sizes.clone()
        };
        let hbar = cfg.units.hbar;
        let a = cfg.units.lattice_constant;
        let mut rows = Vec::new();
        let mut sidecar = Vec::new();
        for param in cfg.model.params() {
            let diff_sites = cfg.current.diffusion_sites.min(GREEN_KUBO_MAX_SITES);
            let kubo_chain = self.realize(param, diff_sites, cfg.model.realizations)?;
            let kubo = out.stage(&format!("eigensystems param={param}"), || {
                kubo_chain.hamiltonians.iter().map(GreenKubo::new).collect::<Result<Vec<_>>>()
            });
            let kubo = self.attempt(out, &format!("eigensystems param={param}"), kubo)?;
            for &n in &sizes {
                let chains = self.realize(param, n, cfg.current.realizations)?;
                let exact = n <= cfg.dynamics.max_sites;
                for &gamma in &rates {
                    let label = format!("N={n},param={param},gamma_phi={gamma}");
                    let mut results: Vec<CurrentResult> = Vec::new();
                    if exact {
                        let r = out.stage(&format!("steady state {label}"), || {
                            let mut me = Vec::new();
                            let mut att = Vec::new();
                            for (i, h) in chains.hamiltonians.iter().enumerate() {
                                let (res, report) = CurrentResult::master_equation(h, param, gamma, gamma_p, gamma_d)?;
                                sidecar.push(SteadyStateEntry {
                                    n,
                                    param,
                                    gamma_phi: gamma,
                                    realization: i,
                                    report,
                                });
                                me.push(res);
                                att.push(CurrentResult::att(h, param, gamma, gamma_p, gamma_d)?);
                            }
                            Ok((me, att))
                        });
                        out.tolerance("solve_residual_rel", SOLVE_TOLERANCE);
                        if let Some((me, att)) = self.attempt(out, &format!("exact {label}"), r)? {
                            results.push(average_current(&me));
                            results.push(average_current(&att));
                        }
                    }
                    if let Some(k) = &kubo {
                        let r = k
                            .iter()
                            .map(|g| g.diffusion(gamma).map(|r| r.d))
                            .collect::<Result<Vec<f64>>>()
                            .and_then(|ds| {
                                let d = ds.iter().sum::<f64>() / ds.len() as f64;
                                CurrentResult::heuristic(n, param, gamma, gamma_p, gamma_d, d, hbar, a)
                            });
                        if let Some(h) = self.attempt(out, &format!("heuristic {label}"), r)? {
                            results.push(h);
                        }
                    }
                    let reference = results.first().map(|r| r.i_ss);
                    for r in &results {
                        let mut row: Vec<String> = r.csv_record().into();
                        row.push(opt(reference.map(|i| r.i_ss / i - 1.0)));
                        rows.push(row);
                    }
                }
            }
        }
        let mut header: Vec<&str> = CURRENT_CSV_HEADER.to_vec();
        header.push("deviation");
        out.write("current.csv", &csv_bytes(&header, &rows)?)?;
        out.write_json("steady_state.json", &sidecar)?;
        out.gnuplot(
            "current.csv",
            "gamma_phi [J]",
            "I_ss [J/hbar]",
            "xy",
            &["'current.csv' using 4:8 with points title 'I_ss'".into()],
        )
    }

    fn purity(&mut self, out: &mut OutputDir) -> Result<()> {
        let cfg = self.cfg;
        let rates = cfg.dephasing.resolve()?;
        let mut rows = Vec::new();
        let mut traces = Vec::new();
        let mut series_rows = Vec::new();
        for param in cfg.model.params() {
            let realized = self.realize(param, cfg.model.n, cfg.model.realizations)?;
            let site = cfg.purity.site.unwrap_or_else(|| cfg.origin(cfg.model.n));
            if site >= cfg.model.n {
                return Err(Error::Config {
                    path: "purity.site".into(),
                    reason: "outside the chain".into(),
                });
            }
            for &gamma in &rates {
                if cfg.dynamics.method != DynamicsMethod::Qd {
                    let label = format!("lindblad param={param},gamma_phi={gamma}");
                    let s = out.stage(&label, || self.lindblad_series(&realized, gamma));
                    if let Some(s) = self.attempt(out, &label, s)? {
                        let purity = s.purity.as_ref().expect("master equation records purity");
                        for (t, p) in s.times.iter().zip(purity) {
                            series_rows.push(vec![fmt_f64(param), fmt_f64(gamma), fmt_f64(*t), fmt_f64(*p)]);
                        }
                    }
                    if cfg.dynamics.method == DynamicsMethod::Lindblad {
                        continue;
                    }
                }
                for &tau_r in &cfg.purity.reversal_times {
                    let label = format!("param={param},gamma_phi={gamma},tau_r={tau_r}");
                    let seed = self.point_seed(label.clone());
                    let r = out.stage(&label, || {
                        let mut results = Vec::new();
                        for (i, h) in realized.hamiltonians.iter().enumerate() {
                            let mut qd = cfg
                                .dynamics
                                .qd_config(derive_seed(seed, i as u64))
                                .adapted(h, gamma, cfg.dynamics.record_interval)?;
                            qd.t_max = 2.0 * tau_r;
                            results.push(purity_echo(h, gamma, site, tau_r, &qd)?);
                        }
                        Ok(results)
                    });
                    let Some(results) = self.attempt(out, &label, r)? else {
                        continue;
                    };
                    let m = results.len() as f64;
                    let echo = results.iter().map(|r| r.echo).sum::<f64>() / m;
                    let stderr = results.iter().map(|r| r.echo_stderr.powi(2)).sum::<f64>().sqrt() / m;
                    let vmin = results.iter().map(|r| r.variance_min_time).sum::<f64>() / m;
                    rows.push(vec![
                        fmt_f64(param),
                        fmt_f64(gamma),
                        fmt_f64(results[0].reversal_time),
                        fmt_f64(echo),
                        fmt_f64(stderr),
                        fmt_f64(vmin),
                        results.iter().map(|r| r.completed).sum::<usize>().to_string(),
                        results.iter().map(|r| r.failed).sum::<usize>().to_string(),
                    ]);
                    let trace = &results[0].trace;
                    for k in 0..trace.len() {
                        traces.push(vec![
                            fmt_f64(param),
                            fmt_f64(gamma),
                            fmt_f64(results[0].reversal_time),
                            fmt_f64(trace.times[k]),
                            fmt_f64(trace.return_probability[k]),
                            fmt_f64(trace.variance[k]),
                        ]);
                    }
                }
            }
        }
        if cfg.dynamics.method != DynamicsMethod::Lindblad {
            out.write("purity.csv", &csv_bytes(&PURITY_CSV_HEADER, &rows)?)?;
            out.write("echo_traces.csv", &csv_bytes(&ECHO_TRACE_CSV_HEADER, &traces)?)?;
            out.gnuplot(
                "purity.csv",
                "tau_R [hbar/J]",
                "M",
                "xy",
                &["'purity.csv' using 3:4 with linespoints title 'M'".into()],
            )?;
        }
        if cfg.dynamics.method != DynamicsMethod::Qd {
            out.write("purity_series.csv", &csv_bytes(&PURITY_SERIES_CSV_HEADER, &series_rows)?)?;
            out.gnuplot(
                "purity_series.csv",
                "t [hbar/J]",
                "Tr rho^2",
                "xy",
                &["'purity_series.csv' using 3:4 with lines title 'purity'".into()],
            )?;
        }
        Ok(())
    }

    fn greenkubo(&mut self, out: &mut OutputDir) -> Result<()> {
        let cfg = self.cfg;
        let rates = cfg.positive_rates()?;
        if cfg.model.n > GREEN_KUBO_MAX_SITES {
            return Err(Error::Config {
                path: "model.n".into(),
                reason: format!("the Kubo sum needs a full eigendecomposition; limit {GREEN_KUBO_MAX_SITES}"),
            });
        }
        let mut rows = Vec::new();
        for param in cfg.model.params() {
            let realized = self.realize(param, cfg.model.n, cfg.model.realizations)?;
            let label = format!("param={param}");
            let k = out.stage(&format!("eigensystems {label}"), || {
                realized.hamiltonians.iter().map(GreenKubo::new).collect::<Result<Vec<_>>>()
            });
            let Some(kubo) = self.attempt(out, &label, k)? else {
                continue;
            };
            for &gamma in &rates {
                let ds = kubo
                    .iter()
                    .map(|g| g.diffusion(gamma).map(|r| r.d))
                    .collect::<Result<Vec<f64>>>()?;
                let (mean, stderr) = mean_and_stderr(&ds);
                rows.push(vec![
                    cfg.model.kind.name().to_string(),
                    fmt_f64(param),
                    fmt_f64(gamma),
                    fmt_f64(mean),
                    fmt_f64(stderr),
                    ds.len().to_string(),
                ]);
            }
        }
        out.write("greenkubo.csv", &csv_bytes(&GREENKUBO_CSV_HEADER, &rows)?)?;
        out.gnuplot(
            "greenkubo.csv",
            "gamma_phi [J]",
            "D [a^2 J/hbar]",
            "xy",
            &["'greenkubo.csv' using 3:4 with linespoints title 'D'".into()],
        )
    }

    fn dump_hamiltonian(&mut self, out: &mut OutputDir, realization: usize) -> Result<()> {
        let cfg = self.cfg;
        let param = cfg.model.params()[0];
        let count = cfg.model.realizations.max(realization + 1);
        let realized = self.realize(param, cfg.model.n, count)?;
        let h = realized
            .hamiltonians
            .get(realization)
            .or(realized.hamiltonians.first())
            .expect("at least one realization");
        let mut bytes = Vec::new();
        h.write_csv(&mut bytes)?;
        out.write("hamiltonian.csv", &bytes)
    }
}

fn average_current(results: &[CurrentResult]) -> CurrentResult {
    let m = results.len() as f64;
    let mut avg = results[0].clone();
    avg.i_ss = results.iter().map(|r| r.i_ss).sum::<f64>() / m;
    avg.tau = avg
        .tau
        .map(|_| results.iter().map(|r| r.tau.unwrap_or(f64::NAN)).sum::<f64>() / m);
    avg
}
