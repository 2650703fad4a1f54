//! Master-equation dynamics with site dephasing, and steady-state transport
//! between a pump on the first site and a drain on the last.

mod current;
mod integrator;
mod liouvillian;

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, Error, Result};
use crate::lattice::{Couplings, Hamiltonian};
use crate::observables::{
    ObservableSeries, Probe, SeriesAccumulator, Snapshot, DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD,
};

pub use current::{
    current_from_tau, heuristic_transfer_time, CurrentMethod, CurrentResult, CURRENT_CSV_HEADER,
};
pub use integrator::Tolerances;
pub use liouvillian::{
    average_transfer_time, steady_state, Liouvillian, Reservoirs, SteadyStateReport, SOLVE_TOLERANCE,
};

/// Default largest chain handled by the master equation.
pub const DEFAULT_MAX_SITES: usize = 200;

/// Hermitian `dim × dim` density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_data(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim || dim == 0 {
            return Err(Error::invalid("rho", format!("expected {dim}x{dim} entries")));
        }
        Ok(DensityMatrix { dim, data })
    }

    /// `|i⟩⟨i|`.
    pub fn pure_site(dim: usize, i: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[i * dim + i] = Complex64::new(1.0, 0.0);
        DensityMatrix { dim, data }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let data = (0..dim * dim)
            .map(|k| psi[k / dim] * psi[k % dim].conj())
            .collect();
        DensityMatrix { dim, data }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `max |ρ_ij − ρ_ji*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim;
        let m = Mat::<Complex64>::from_fn(d, d, |i, j| 0.5 * (self.get(i, j) + self.get(j, i).conj()));
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolve(format!("{e:?}")))?;
        Ok(values.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Trace norm `‖ρ − σ‖₁` of the difference of two density matrices.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let d = self.dim;
        let m = Mat::<Complex64>::from_fn(d, d, |i, j| self.get(i, j) - other.get(i, j));
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolve(format!("{e:?}")))?;
        Ok(values.iter().map(|v| v.abs()).sum())
    }
}

/// Options for [`evolve_density`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LindbladOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_sites: usize,
    pub boundary_guard: f64,
    pub guard_threshold: f64,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions {
            rtol: 1e-8,
            atol: 1e-12,
            max_sites: DEFAULT_MAX_SITES,
            boundary_guard: DEFAULT_BOUNDARY_GUARD,
            guard_threshold: DEFAULT_GUARD_THRESHOLD,
        }
    }
}

/// Tolerated trace drift at output times.
pub const TRACE_TOLERANCE: f64 = 1e-10;

/// `dρ/dt = −(i/ħ)[H, ρ] + (γ_φ/ħ)(diag ρ − ρ)` on an `N`-site chain.
pub(crate) struct DephasedGenerator<'a> {
    h: &'a Hamiltonian,
    dense: Option<Mat<f64>>,
    rate: f64,
    inv_hbar: f64,
}

impl<'a> DephasedGenerator<'a> {
    pub(crate) fn new(h: &'a Hamiltonian, gamma_phi: f64) -> Self {
        let n = h.n();
        let dense = (!h.is_tridiagonal()).then(|| Mat::from_fn(n, n, |i, j| h.get(i, j)));
        let hbar = h.units().hbar;
        DephasedGenerator {
            h,
            dense,
            rate: gamma_phi / hbar,
            inv_hbar: 1.0 / hbar,
        }
    }

    pub(crate) fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.h.n();
        match (self.h.couplings(), &self.dense) {
            (
                Couplings::Tridiagonal {
                    diagonal,
                    offdiagonal,
                },
                _,
            ) => {
                for i in 0..n {
                    let row = &rho[i * n..(i + 1) * n];
                    let out_row = &mut out[i * n..(i + 1) * n];
                    // [H, ρ] row i: (Hρ)_ij − (ρH)_ij
                    for ((o, &r), &d) in out_row.iter_mut().zip(row).zip(diagonal.iter()) {
                        *o = r * (diagonal[i] - d);
                    }
                    if i > 0 {
                        let c = offdiagonal[i - 1];
                        for (o, &u) in out_row.iter_mut().zip(&rho[(i - 1) * n..i * n]) {
                            *o += u * c;
                        }
                    }
                    if i + 1 < n {
                        let c = offdiagonal[i];
                        for (o, &d) in out_row.iter_mut().zip(&rho[(i + 1) * n..(i + 2) * n]) {
                            *o += d * c;
                        }
                    }
                    for j in 1..n {
                        out_row[j] -= row[j - 1] * offdiagonal[j - 1];
                        out_row[j - 1] -= row[j] * offdiagonal[j - 1];
                    }
                    let on_site = out_row[i];
                    for (o, &r) in out_row.iter_mut().zip(row) {
                        // −i/ħ · comm
                        *o = Complex64::new(o.im, -o.re) * self.inv_hbar - r * self.rate;
                    }
                    out_row[i] = Complex64::new(on_site.im, -on_site.re) * self.inv_hbar;
                }
            }
            (_, Some(hm)) => {
                let re = Mat::from_fn(n, n, |i, j| rho[i * n + j].re);
                let im = Mat::from_fn(n, n, |i, j| rho[i * n + j].im);
                let comm_re = hm * &re - &re * hm;
                let comm_im = hm * &im - &im * hm;
                for i in 0..n {
                    for j in 0..n {
                        let mut v = Complex64::new(comm_im[(i, j)], -comm_re[(i, j)]) * self.inv_hbar;
                        if i != j {
                            v -= rho[i * n + j] * self.rate;
                        }
                        out[i * n + j] = v;
                    }
                }
            }
            _ => unreachable!("dense Hamiltonian without a dense copy"),
        }
    }
}

/// Integrates the dephased master equation from `rho0` and records
/// populations, σ² (measured from the most populated initial site) and
/// `Tr ρ²` on `t_grid`.
pub fn evolve_density(
    h: &Hamiltonian,
    gamma_phi: f64,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &LindbladOptions,
) -> Result<ObservableSeries> {
    let n = h.n();
    let (snapshots, populations) = evolve_snapshots(h, gamma_phi, rho0, t_grid, opts)?;
    let mut acc = SeriesAccumulator::new(t_grid.to_vec(), true, Some(n));
    acc.add(&snapshots, Some(&populations));
    Ok(acc.finish(opts.guard_threshold))
}

/// Realization average of [`evolve_density`] from site `origin`, with the
/// variance taken of the mixed population profile.
pub fn evolve_realizations(
    hamiltonians: &[Hamiltonian],
    gamma_phi: f64,
    origin: usize,
    t_grid: &[f64],
    opts: &LindbladOptions,
) -> Result<ObservableSeries> {
    let n = hamiltonians
        .first()
        .ok_or_else(|| Error::invalid("hamiltonians", "no realizations"))?
        .n();
    let rho0 = DensityMatrix::pure_site(n, origin);
    let runs: Vec<Result<Recorded>> = hamiltonians
        .par_iter()
        .map(|h| evolve_snapshots(h, gamma_phi, &rho0, t_grid, opts))
        .collect();
    let mut acc = SeriesAccumulator::new(t_grid.to_vec(), true, Some(n));
    for r in runs {
        let (snapshots, populations) = r?;
        acc.add(&snapshots, Some(&populations));
    }
    Ok(acc.finish(opts.guard_threshold))
}

/// Snapshots and populations at each output time.
type Recorded = (Vec<Snapshot>, Vec<Vec<f64>>);

fn evolve_snapshots(
    h: &Hamiltonian,
    gamma_phi: f64,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &LindbladOptions,
) -> Result<Recorded> {
    let n = h.n();
    if n > opts.max_sites {
        return Err(Error::SizeLimit {
            n,
            limit: opts.max_sites,
        });
    }
    ensure_nonnegative("gamma_phi", gamma_phi)?;
    if rho0.dim() != n {
        return Err(Error::invalid("rho0", "dimension differs from the chain"));
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t_grid", "must be increasing from t >= 0"));
    }
    let origin = rho0
        .populations()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let probe = Probe::new(n, origin, h.units().lattice_constant, opts.boundary_guard);
    let generator = DephasedGenerator::new(h, gamma_phi);
    let mut snapshots = Vec::with_capacity(t_grid.len());
    let mut populations = Vec::with_capacity(t_grid.len());
    let h0 = 0.1 * h.units().hbar / h.norm_bound().max(gamma_phi).max(1e-12);
    integrate_with_checks(
        |y, dy| generator.apply(y, dy),
        rho0.as_slice().to_vec(),
        t_grid,
        h0,
        Tolerances {
            rtol: opts.rtol,
            atol: opts.atol,
        },
        n,
        |rho| {
            let pops: Vec<f64> = (0..n).map(|i| rho[i * n + i].re).collect();
            let mut s = probe.measure(pops.iter().copied().enumerate(), n);
            s.purity = Some(rho.iter().map(|z| z.norm_sqr()).sum());
            snapshots.push(s);
            populations.push(pops);
        },
    )?;
    Ok((snapshots, populations))
}

fn integrate_with_checks<F, O>(
    f: F,
    y0: Vec<Complex64>,
    t_grid: &[f64],
    h0: f64,
    tol: Tolerances,
    n: usize,
    mut observe: O,
) -> Result<Vec<Complex64>>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
    O: FnMut(&[Complex64]),
{
    let start = Complex64::new((0..n).map(|i| y0[i * n + i].re).sum(), 0.0);
    integrator::integrate(f, y0, 0.0, t_grid, h0, tol, |_, t, y| {
        let trace: Complex64 = (0..n).map(|i| y[i * n + i]).sum();
        if (trace - start).norm() > TRACE_TOLERANCE {
            return Err(Error::Integration {
                achieved: t,
                target: *t_grid.last().unwrap(),
                reason: format!("trace drift {:e}", (trace - start).norm()),
            });
        }
        observe(y);
        Ok(())
    })
}

/// Final state of [`evolve_density`]'s dynamics at time `t`.
pub fn density_at(
    h: &Hamiltonian,
    gamma_phi: f64,
    rho0: &DensityMatrix,
    t: f64,
    opts: &LindbladOptions,
) -> Result<DensityMatrix> {
    let n = h.n();
    if n > opts.max_sites {
        return Err(Error::SizeLimit {
            n,
            limit: opts.max_sites,
        });
    }
    let generator = DephasedGenerator::new(h, gamma_phi);
    let h0 = 0.1 * h.units().hbar / h.norm_bound().max(gamma_phi).max(1e-12);
    let data = integrate_with_checks(
        |y, dy| generator.apply(y, dy),
        rho0.as_slice().to_vec(),
        &[t],
        h0,
        Tolerances {
            rtol: opts.rtol,
            atol: opts.atol,
        },
        n,
        |_| {},
    )?;
    DensityMatrix::from_data(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, ModelSpec};
    use crate::linalg::{eigensystem, SpectralStep};

    #[test]
    fn coherent_short_time_ballistic() {
        let h = build_hamiltonian(&ModelSpec::hhaa(41, 0.0)).unwrap();
        let s = evolve_density(&h, 0.0, &DensityMatrix::pure_site(41, 20), &[0.05, 0.1], &Default::default())
            .unwrap();
        // exact propagation as oracle
        let eig = eigensystem(&h).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); 41];
        psi[20] = Complex64::new(1.0, 0.0);
        SpectralStep::new(&eig, 0.1, 1.0).apply(&eig, &mut psi);
        let exact: f64 = psi
            .iter()
            .enumerate()
            .map(|(i, z)| z.norm_sqr() * (i as f64 - 20.0).powi(2))
            .sum();
        assert!((s.variance[1] - exact).abs() < 1e-9);
        assert!((s.variance[1] - 0.02).abs() < 1e-4);
    }

    #[test]
    fn unitary_evolution_keeps_purity() {
        let h = build_hamiltonian(&ModelSpec::hhaa(30, 2.0).with_phase(0.7)).unwrap();
        let times: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let s = evolve_density(&h, 0.0, &DensityMatrix::pure_site(30, 15), &times, &Default::default()).unwrap();
        for p in s.purity.unwrap() {
            assert!((p - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn clean_chain_matches_dephased_ballistic_law() {
        let n = 161;
        let h = build_hamiltonian(&ModelSpec::hhaa(n, 0.0)).unwrap();
        let gamma = 0.5;
        let times: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let s = evolve_density(&h, gamma, &DensityMatrix::pure_site(n, n / 2), &times, &Default::default()).unwrap();
        let tau = 1.0 / gamma;
        for (t, v) in times.iter().zip(&s.variance) {
            let law = 2.0 * tau * 2.0 * (tau * ((-t / tau).exp() - 1.0) + t);
            assert!((v - law).abs() < 1e-6 * law, "t = {t}: {v} vs {law}");
        }
    }

    #[test]
    fn size_limit() {
        let h = build_hamiltonian(&ModelSpec::hhaa(10, 1.0)).unwrap();
        let opts = LindbladOptions {
            max_sites: 5,
            ..Default::default()
        };
        assert!(matches!(
            evolve_density(&h, 0.1, &DensityMatrix::pure_site(10, 5), &[1.0], &opts),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn dense_generator_matches_tridiagonal() {
        let h = build_hamiltonian(&ModelSpec::hhaa(12, 2.0)).unwrap();
        let d = Hamiltonian::dense(12, h.to_dense(), h.units()).unwrap();
        let mut psi: Vec<Complex64> = (0..12).map(|i| Complex64::new(i as f64, 1.0 - i as f64 * 0.3)).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        let rho = DensityMatrix::pure(&psi);
        let mut a = vec![Complex64::new(0.0, 0.0); 144];
        let mut b = a.clone();
        DephasedGenerator::new(&h, 0.3).apply(rho.as_slice(), &mut a);
        DephasedGenerator::new(&d, 0.3).apply(rho.as_slice(), &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-13);
        }
    }
}
