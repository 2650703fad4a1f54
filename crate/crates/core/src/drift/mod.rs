//! Quantum-drift trajectories: pure states kicked by independent Lorentzian
//! site phases after every coherent step. The ensemble average reproduces
//! Haken-Strobl dephasing, where coherences decay at rate γ_φ/ħ.

mod checkpoint;
mod echo;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::lattice::Hamiltonian;
use crate::linalg::{eigensystem, ChebyshevStep, ChebyshevWork, Eigensystem, SpectralStep, Support};
use crate::observables::{
    ObservableSeries, Probe, SeriesAccumulator, Snapshot, DEFAULT_BOUNDARY_GUARD,
    DEFAULT_GUARD_THRESHOLD,
};
use crate::rng::{self, Domain, StreamRng};

pub use checkpoint::SeedCheckpoint;
pub use echo::{purity_echo, EchoResult};

/// Largest allowed `dt · max(‖H‖, γ_φ) / ħ`.
pub const MAX_STEP_PHASE: f64 = 0.05;
/// Per-trajectory norm tolerance.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Trajectories handed to the thread pool at a time; results are folded in
/// index order.
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QdConfig {
    /// Trotter step, in units of ħ/J.
    pub dt: f64,
    pub n_traj: usize,
    pub t_max: f64,
    /// Steps between records.
    pub record_stride: usize,
    pub master_seed: u64,
    /// Fraction of the chain at each end forming the boundary zone.
    pub boundary_guard: f64,
    /// Boundary-zone weight that flags a record.
    pub guard_threshold: f64,
    /// Keep mean site populations for every record.
    pub record_populations: bool,
}

impl Default for QdConfig {
    fn default() -> Self {
        QdConfig {
            dt: 0.01,
            n_traj: 100,
            t_max: 50.0,
            record_stride: 10,
            master_seed: 0,
            boundary_guard: DEFAULT_BOUNDARY_GUARD,
            guard_threshold: DEFAULT_GUARD_THRESHOLD,
            record_populations: false,
        }
    }
}

impl QdConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        ensure_nonnegative("t_max", self.t_max)?;
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj", "need at least one trajectory"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        if !(self.boundary_guard > 0.0 && self.boundary_guard < 0.5) {
            return Err(Error::invalid(
                "boundary_guard",
                format!("must lie in (0, 0.5), got {}", self.boundary_guard),
            ));
        }
        ensure_positive("guard_threshold", self.guard_threshold)
    }

    /// Largest step honouring `dt · max(‖H‖, γ_φ)/ħ ≤ 0.05`.
    pub fn max_stable_dt(h: &Hamiltonian, gamma_phi: f64) -> f64 {
        MAX_STEP_PHASE * h.units().hbar / h.norm_bound().max(gamma_phi).max(1e-300)
    }

    pub fn check_step(&self, h: &Hamiltonian, gamma_phi: f64) -> Result<()> {
        let limit = Self::max_stable_dt(h, gamma_phi);
        if self.dt > limit * (1.0 + 1e-9) {
            return Err(Error::invalid(
                "dt",
                format!("{} exceeds the accuracy bound {limit:.3e} for this Hamiltonian and rate", self.dt),
            ));
        }
        Ok(())
    }

    /// Picks `dt ≤ min(self.dt, bound)` dividing `record_interval` evenly
    /// and sets the stride to match.
    pub fn adapted(mut self, h: &Hamiltonian, gamma_phi: f64, record_interval: f64) -> Result<Self> {
        ensure_positive("record_interval", record_interval)?;
        let cap = self.dt.min(Self::max_stable_dt(h, gamma_phi));
        let steps = (record_interval / cap * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        self.dt = record_interval / steps as f64;
        self.record_stride = steps;
        Ok(self)
    }

    pub fn record_interval(&self) -> f64 {
        self.dt * self.record_stride as f64
    }

    pub fn record_count(&self) -> usize {
        (self.t_max / self.record_interval() + 1e-9).floor() as usize + 1
    }

    pub fn record_times(&self) -> Vec<f64> {
        let dt = self.record_interval();
        (0..self.record_count()).map(|k| k as f64 * dt).collect()
    }
}

/// Lorentzian energy of half-width `γ_φ/2`, `β = (γ_φ/2) tan(π(u − ½))`
/// with `u` uniform on the open interval (0, 1).
pub fn sample_lorentzian<R: Rng + ?Sized>(gamma_phi: f64, rng: &mut R) -> f64 {
    if gamma_phi == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.sample(Open01);
    0.5 * gamma_phi * (PI * (u - 0.5)).tan()
}

/// The coherent factor `exp(−i H dt/ħ)`.
#[derive(Clone, Debug)]
pub enum CoherentStep {
    Chebyshev(ChebyshevStep),
    Spectral(Arc<Eigensystem>, SpectralStep),
}

impl CoherentStep {
    /// Chebyshev for tridiagonal chains, rotate-phase-rotate otherwise.
    /// `eig` is reused for dense matrices when given.
    pub fn new(h: &Hamiltonian, dt: f64, eig: Option<Arc<Eigensystem>>) -> Result<Self> {
        if h.is_tridiagonal() {
            Ok(CoherentStep::Chebyshev(ChebyshevStep::new(h, dt)?))
        } else {
            let eig = match eig {
                Some(e) => e,
                None => Arc::new(eigensystem(h)?),
            };
            let step = SpectralStep::new(&eig, dt, h.units().hbar);
            Ok(CoherentStep::Spectral(eig, step))
        }
    }

    fn apply(&self, state: &mut TrajectoryState, work: &mut ChebyshevWork) {
        match self {
            CoherentStep::Chebyshev(step) => step.apply(&mut state.amplitudes, &mut state.support, work),
            CoherentStep::Spectral(eig, step) => {
                step.apply(eig, &mut state.amplitudes);
                state.support = Support::full(state.amplitudes.len());
            }
        }
    }
}

/// One quantum-drift step operator for fixed `(H, γ_φ, dt)`.
#[derive(Clone, Debug)]
pub struct DriftKernel {
    coherent: CoherentStep,
    gamma_phi: f64,
    dt: f64,
    hbar: f64,
}

impl DriftKernel {
    pub fn new(h: &Hamiltonian, gamma_phi: f64, dt: f64) -> Result<Self> {
        Self::with_eigensystem(h, gamma_phi, dt, None)
    }

    pub fn with_eigensystem(
        h: &Hamiltonian,
        gamma_phi: f64,
        dt: f64,
        eig: Option<Arc<Eigensystem>>,
    ) -> Result<Self> {
        ensure_nonnegative("gamma_phi", gamma_phi)?;
        ensure_positive("dt", dt)?;
        Ok(DriftKernel {
            coherent: CoherentStep::new(h, dt, eig)?,
            gamma_phi,
            dt,
            hbar: h.units().hbar,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kick(&self, state: &mut TrajectoryState, rng: &mut StreamRng) {
        if self.gamma_phi == 0.0 {
            return;
        }
        let scale = self.dt / self.hbar;
        let Support { lo, hi } = state.support;
        for z in &mut state.amplitudes[lo..hi] {
            let beta = sample_lorentzian(self.gamma_phi, rng);
            let (s, c) = (beta * scale).sin_cos();
            *z *= Complex64::new(c, s);
        }
    }

    fn advance(&self, state: &mut TrajectoryState, rng: &mut StreamRng, work: &mut ChebyshevWork) {
        self.coherent.apply(state, work);
        self.kick(state, rng);
        state.time += self.dt;
    }
}

/// A normalized amplitude vector at time `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    support: Support,
}

impl TrajectoryState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid("psi0", format!("not normalized (norm² = {norm})")));
        }
        let support = Support::of(&amplitudes);
        Ok(TrajectoryState {
            amplitudes,
            time: 0.0,
            support,
        })
    }

    pub fn site(n: usize, site: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        TrajectoryState {
            amplitudes,
            time: 0.0,
            support: Support { lo: site, hi: site + 1 },
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        let Support { lo, hi } = self.support;
        self.amplitudes[lo..hi].iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    fn snapshot(&self, probe: &Probe) -> Snapshot {
        let Support { lo, hi } = self.support;
        let n = self.amplitudes.len();
        probe.measure(
            self.amplitudes[lo..hi]
                .iter()
                .enumerate()
                .map(|(k, z)| (lo + k, z.norm_sqr())),
            n,
        )
    }
}

/// Default initial site: the middle of the chain.
pub fn centre_site(n: usize) -> usize {
    n / 2
}

/// Single quantum-drift step with a norm check.
pub fn qd_step(state: &mut TrajectoryState, kernel: &DriftKernel, rng: &mut StreamRng) -> Result<()> {
    let mut work = ChebyshevWork::default();
    kernel.advance(state, rng, &mut work);
    let drift = (state.norm_sqr() - 1.0).abs();
    if drift > NORM_TOLERANCE {
        return Err(Error::NormDrift {
            index: 0,
            time: state.time,
            drift,
        });
    }
    Ok(())
}

/// Per-trajectory output.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub index: u64,
    pub snapshots: Vec<Snapshot>,
    pub populations: Option<Vec<Vec<f64>>>,
}

/// Ensemble bookkeeping returned alongside the averaged series.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub completed: usize,
    pub failed: Vec<(u64, String)>,
    pub max_norm_drift: f64,
}

fn origin_of(psi0: &[Complex64]) -> usize {
    psi0.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map_or(0, |(i, _)| i)
}

/// Runs one trajectory; record `k` is taken after `k · record_stride` steps.
pub fn run_trajectory(
    kernel: &DriftKernel,
    psi0: &TrajectoryState,
    cfg: &QdConfig,
    index: u64,
) -> Result<(TrajectoryRecord, f64)> {
    let n = psi0.amplitudes.len();
    let probe = Probe::new(n, origin_of(&psi0.amplitudes), 1.0, cfg.boundary_guard);
    let records = cfg.record_count();
    let mut rng = rng::stream(cfg.master_seed, Domain::Trajectory, index);
    let mut state = psi0.clone();
    let mut work = ChebyshevWork::default();
    let mut snapshots = Vec::with_capacity(records);
    let mut populations = cfg.record_populations.then(|| Vec::with_capacity(records));
    let mut max_drift = 0.0f64;
    for k in 0..records {
        if k > 0 {
            for _ in 0..cfg.record_stride {
                kernel.advance(&mut state, &mut rng, &mut work);
            }
            state.time = k as f64 * cfg.record_interval();
        }
        let drift = (state.norm_sqr() - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > NORM_TOLERANCE {
            return Err(Error::NormDrift {
                index: index as usize,
                time: state.time,
                drift,
            });
        }
        snapshots.push(state.snapshot(&probe));
        if let Some(p) = &mut populations {
            p.push(state.populations());
        }
    }
    Ok((
        TrajectoryRecord {
            index,
            snapshots,
            populations,
        },
        max_drift,
    ))
}

fn scale_positions(mut record: TrajectoryRecord, a: f64) -> TrajectoryRecord {
    for s in &mut record.snapshots {
        s.first_moment *= a;
        s.second_moment *= a * a;
    }
    record
}

/// Runs trajectories `indices` of the ensemble and folds them in index
/// order into an accumulator.
pub fn propagate_trajectories(
    h: &Hamiltonian,
    gamma_phi: f64,
    psi0: &TrajectoryState,
    cfg: &QdConfig,
    indices: &[u64],
    eig: Option<Arc<Eigensystem>>,
) -> Result<(SeriesAccumulator, EnsembleReport)> {
    cfg.validate()?;
    cfg.check_step(h, gamma_phi)?;
    if psi0.amplitudes.len() != h.n() {
        return Err(Error::invalid("psi0", "length differs from the chain"));
    }
    let kernel = DriftKernel::with_eigensystem(h, gamma_phi, cfg.dt, eig)?;
    let a = h.units().lattice_constant;
    let mut acc = SeriesAccumulator::new(
        cfg.record_times(),
        false,
        cfg.record_populations.then_some(h.n()),
    );
    let mut report = EnsembleReport::default();
    for chunk in indices.chunks(CHUNK) {
        let results: Vec<Result<(TrajectoryRecord, f64)>> = chunk
            .par_iter()
            .map(|&i| run_trajectory(&kernel, psi0, cfg, i))
            .collect();
        for (&i, r) in chunk.iter().zip(results) {
            match r {
                Ok((record, drift)) => {
                    let record = scale_positions(record, a);
                    acc.add(&record.snapshots, record.populations.as_deref());
                    report.completed += 1;
                    report.max_norm_drift = report.max_norm_drift.max(drift);
                }
                Err(e) => report.failed.push((i, e.to_string())),
            }
        }
    }
    if report.completed == 0 {
        return Err(Error::AllTrajectoriesFailed(indices.len()));
    }
    Ok((acc, report))
}

/// Averages `cfg.n_traj` independent trajectories. With γ_φ = 0 every
/// trajectory is identical and a single one is run.
pub fn propagate_ensemble(
    h: &Hamiltonian,
    gamma_phi: f64,
    psi0: &TrajectoryState,
    cfg: &QdConfig,
) -> Result<(ObservableSeries, EnsembleReport)> {
    let count = if gamma_phi == 0.0 { 1 } else { cfg.n_traj as u64 };
    let indices: Vec<u64> = (0..count).collect();
    let (acc, report) = propagate_trajectories(h, gamma_phi, psi0, cfg, &indices, None)?;
    Ok((acc.finish(cfg.guard_threshold), report))
}

/// Ensemble over Hamiltonian realizations: `cfg.n_traj` trajectories on
/// each, with realization `r` drawing its streams from
/// `derive_seed(cfg.master_seed, r)`. The step is adapted per realization
/// to divide `cfg.record_interval()`. Without dephasing the exact coherent
/// path replaces the ensemble.
pub fn propagate_realizations(
    hamiltonians: &[Hamiltonian],
    gamma_phi: f64,
    origin: usize,
    cfg: &QdConfig,
) -> Result<(ObservableSeries, EnsembleReport)> {
    cfg.validate()?;
    let first = hamiltonians
        .first()
        .ok_or_else(|| Error::invalid("hamiltonians", "no realizations"))?;
    let n = first.n();
    if origin >= n {
        return Err(Error::invalid("origin", "outside the chain"));
    }
    let times = cfg.record_times();
    if gamma_phi == 0.0 {
        let series = coherent_series(hamiltonians, origin, &times, cfg.boundary_guard, cfg.guard_threshold)?;
        let report = EnsembleReport {
            completed: hamiltonians.len(),
            ..Default::default()
        };
        return Ok((series, report));
    }
    let psi0 = TrajectoryState::site(n, origin);
    let indices: Vec<u64> = (0..cfg.n_traj as u64).collect();
    let mut total = SeriesAccumulator::new(times, false, cfg.record_populations.then_some(n));
    let mut report = EnsembleReport::default();
    for (r, h) in hamiltonians.iter().enumerate() {
        let mut local = cfg.clone().adapted(h, gamma_phi, cfg.record_interval())?;
        local.master_seed = rng::derive_seed(cfg.master_seed, r as u64);
        match propagate_trajectories(h, gamma_phi, &psi0, &local, &indices, None) {
            Ok((acc, rep)) => {
                total.merge(&acc)?;
                report.completed += rep.completed;
                report.max_norm_drift = report.max_norm_drift.max(rep.max_norm_drift);
                report.failed.extend(rep.failed);
            }
            Err(Error::AllTrajectoriesFailed(k)) => {
                report.failed.push((r as u64, format!("realization {r}: all {k} trajectories failed")));
            }
            Err(e) => return Err(e),
        }
    }
    if report.completed == 0 {
        return Err(Error::AllTrajectoriesFailed(cfg.n_traj * hamiltonians.len()));
    }
    Ok((total.finish(cfg.guard_threshold), report))
}

/// Exact coherent propagation of a single site on an arbitrary increasing
/// time grid, for `γ_φ = 0`.
pub fn coherent_snapshots(
    h: &Hamiltonian,
    origin: usize,
    times: &[f64],
    guard: f64,
    eig: Option<&Eigensystem>,
) -> Result<Vec<Snapshot>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("times", "must be non-negative and increasing"));
    }
    let n = h.n();
    let a = h.units().lattice_constant;
    let probe = Probe::new(n, origin, a, guard);
    let mut out = Vec::with_capacity(times.len());
    if h.is_tridiagonal() {
        let mut state = TrajectoryState::site(n, origin);
        let mut work = ChebyshevWork::default();
        let mut steps: HashMap<u64, ChebyshevStep> = HashMap::new();
        let mut now = 0.0;
        for &t in times {
            let dt = t - now;
            if dt > 0.0 {
                let step = match steps.entry(dt.to_bits()) {
                    std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => e.insert(ChebyshevStep::new(h, dt)?),
                };
                step.apply(&mut state.amplitudes, &mut state.support, &mut work);
                now = t;
            }
            out.push(state.snapshot(&probe));
        }
    } else {
        let owned;
        let eig = match eig {
            Some(e) => e,
            None => {
                owned = eigensystem(h)?;
                &owned
            }
        };
        let hbar = h.units().hbar;
        let overlap: Vec<f64> = (0..n).map(|k| eig.vectors[(origin, k)]).collect();
        for &t in times {
            let coeff: Vec<Complex64> = eig
                .values
                .iter()
                .zip(&overlap)
                .map(|(&e, &c)| Complex64::from_polar(c, -e * t / hbar))
                .collect();
            let pops = (0..n).map(|i| {
                let z: Complex64 = (0..n).map(|k| coeff[k] * eig.vectors[(i, k)]).sum();
                (i, z.norm_sqr())
            });
            out.push(probe.measure(pops, n));
        }
    }
    Ok(out)
}

/// Coherent spreading series averaged over Hamiltonian realizations.
pub fn coherent_series(
    hamiltonians: &[Hamiltonian],
    origin: usize,
    times: &[f64],
    guard: f64,
    guard_threshold: f64,
) -> Result<ObservableSeries> {
    let results: Vec<Result<Vec<Snapshot>>> = hamiltonians
        .par_iter()
        .map(|h| coherent_snapshots(h, origin, times, guard, None))
        .collect();
    let mut acc = SeriesAccumulator::new(times.to_vec(), false, None);
    for r in results {
        acc.add(&r?, None);
    }
    Ok(acc.finish(guard_threshold))
}

/// Infinite-time average `σ²(∞) = Σ_n (n − n₀)² Σ_k |φ_k(n)|² |φ_k(n₀)|²`
/// of a coherent single-site spread, for a non-degenerate spectrum.
pub fn coherent_saturation_variance(eig: &Eigensystem, origin: usize, a: f64) -> f64 {
    let n = eig.n();
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for k in 0..n {
        let w = eig.vectors[(origin, k)].powi(2);
        for i in 0..n {
            let x = (i as f64 - origin as f64) * a;
            let p = w * eig.vectors[(i, k)].powi(2);
            m1 += p * x;
            m2 += p * x * x;
        }
    }
    m2 - m1 * m1
}
