//! Sparse vectorized generator for pump/drain transport and the linear
//! solves built on it.

use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use super::DensityMatrix;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::lattice::Hamiltonian;

/// Couplings to the vacuum level: pump `|0⟩ → |1⟩` and drain `|N⟩ → |0⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Reservoirs {
    pub pump: f64,
    pub drain: f64,
}

/// `dim² × dim²` superoperator acting on `vec(ρ)[i·dim + j] = ρ_ij`.
///
/// With reservoirs the vacuum level is index 0 and site `n` (1-based) is
/// index `n`; without, site `n` is index `n − 1`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    with_vacuum: bool,
    /// Merged `(row, col, value)`, sorted by column then row.
    entries: Vec<(usize, usize, Complex64)>,
}

struct Builder {
    entries: Vec<(usize, usize, Complex64)>,
}

impl Builder {
    fn push(&mut self, row: usize, col: usize, v: Complex64) {
        if v != Complex64::new(0.0, 0.0) {
            self.entries.push((row, col, v));
        }
    }

    fn finish(mut self) -> Vec<(usize, usize, Complex64)> {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<(usize, usize, Complex64)> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|e| e.2 != Complex64::new(0.0, 0.0));
        merged
    }
}

impl Liouvillian {
    /// Coherent part plus site dephasing (rate `γ_φ/ħ`), with optional
    /// pump and drain through a vacuum level.
    pub fn new(h: &Hamiltonian, gamma_phi: f64, reservoirs: Option<Reservoirs>) -> Result<Self> {
        ensure_nonnegative("gamma_phi", gamma_phi)?;
        if let Some(r) = reservoirs {
            ensure_nonnegative("gamma_p", r.pump)?;
            ensure_nonnegative("gamma_d", r.drain)?;
        }
        let n = h.n();
        let off = reservoirs.is_some() as usize;
        let (pump, drain) = reservoirs.map_or((0.0, 0.0), |r| (r.pump, r.drain));
        Ok(Self::assemble(h, gamma_phi, off, pump, drain, reservoirs.is_some(), n))
    }

    /// Generator without the pump and without the drain's refill of the
    /// vacuum: only the loss `−(γ_d/2ħ){|N⟩⟨N|, ρ}` on the `N`-site block.
    pub fn without_refill(h: &Hamiltonian, gamma_phi: f64, gamma_d: f64) -> Result<Self> {
        ensure_nonnegative("gamma_phi", gamma_phi)?;
        ensure_positive("gamma_d", gamma_d)?;
        Ok(Self::assemble(h, gamma_phi, 0, 0.0, gamma_d, false, h.n()))
    }

    fn assemble(
        h: &Hamiltonian,
        gamma_phi: f64,
        off: usize,
        pump: f64,
        drain: f64,
        refill: bool,
        n: usize,
    ) -> Self {
        let hbar = h.units().hbar;
        let dim = n + off;
        let mut b = Builder {
            entries: Vec::with_capacity(dim * dim * 7),
        };
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 0..n {
                let v = h.get(i, j);
                if v != 0.0 {
                    row.push((j, v));
                }
            }
        }
        let minus_i = Complex64::new(0.0, -1.0 / hbar);
        let kappa = gamma_phi / hbar;
        let p = pump / hbar;
        let d = drain / hbar;
        let last = dim - 1;
        let is_site = |i: usize| i >= off;
        for i in 0..dim {
            for j in 0..dim {
                let r = i * dim + j;
                // −(i/ħ)(Hρ − ρH)
                if is_site(i) {
                    for &(k, v) in &rows[i - off] {
                        b.push(r, (k + off) * dim + j, minus_i * v);
                    }
                }
                if is_site(j) {
                    for &(l, v) in &rows[j - off] {
                        b.push(r, i * dim + l + off, -minus_i * v);
                    }
                }
                let mut decay = 0.0;
                if i != j {
                    decay += 0.5 * kappa * (is_site(i) as u8 + is_site(j) as u8) as f64;
                }
                if off == 1 {
                    decay += 0.5 * p * ((i == 0) as u8 + (j == 0) as u8) as f64;
                }
                decay += 0.5 * d * ((i == last) as u8 + (j == last) as u8) as f64;
                b.push(r, r, Complex64::new(-decay, 0.0));
            }
        }
        if off == 1 {
            b.push(dim + 1, 0, Complex64::new(p, 0.0));
            if refill {
                b.push(0, last * dim + last, Complex64::new(d, 0.0));
            }
        }
        Liouvillian {
            dim,
            with_vacuum: off == 1,
            entries: b.finish(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_vacuum(&self) -> bool {
        self.with_vacuum
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `L · vec(ρ)`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `Σ_i L_{(i,i),c}` for every column `c`: the trace of `L[e_c]`.
    pub fn trace_column_sums(&self) -> Vec<Complex64> {
        let mut sums = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for &(r, c, v) in &self.entries {
            if r / self.dim == r % self.dim {
                sums[c] += v;
            }
        }
        sums
    }

    fn factor(
        &self,
        entries: impl Iterator<Item = (usize, usize, Complex64)>,
    ) -> Result<faer::sparse::linalg::solvers::Lu<usize, Complex64>> {
        let size = self.dim * self.dim;
        let triplets: Vec<Triplet<usize, usize, Complex64>> =
            entries.map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::<usize, Complex64>::try_new_from_triplets(size, size, &triplets)
            .map_err(|e| Error::LinearSolve {
                reason: format!("assembly: {e:?}"),
                residual: f64::NAN,
            })?;
        m.sp_lu().map_err(|e| Error::LinearSolve {
            reason: format!("factorization: {e:?}"),
            residual: f64::NAN,
        })
    }
}

fn solve(lu: &faer::sparse::linalg::solvers::Lu<usize, Complex64>, rhs: &[Complex64]) -> Vec<Complex64> {
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative residual accepted for linear solves, `‖Lx − b‖ / ‖L‖_F`.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateReport {
    pub residual: f64,
    pub operator_norm: f64,
    pub trace: f64,
    pub nnz: usize,
    pub solve_seconds: f64,
}

/// Stationary state of pump, chain and drain. The returned matrix has
/// dimension `N + 1` with the vacuum level at index 0.
pub fn steady_state(
    h: &Hamiltonian,
    gamma_phi: f64,
    gamma_p: f64,
    gamma_d: f64,
) -> Result<(DensityMatrix, SteadyStateReport)> {
    ensure_positive("gamma_p", gamma_p)?;
    ensure_positive("gamma_d", gamma_d)?;
    let start = Instant::now();
    let l = Liouvillian::new(
        h,
        gamma_phi,
        Some(Reservoirs {
            pump: gamma_p,
            drain: gamma_d,
        }),
    )?;
    let dim = l.dim;
    // the ρ_00 equation is redundant given trace conservation; replace it
    // by Tr ρ = 1
    let bordered = l
        .entries
        .iter()
        .copied()
        .filter(|e| e.0 != 0)
        .chain((0..dim).map(|i| (0, i * dim + i, Complex64::new(1.0, 0.0))));
    let lu = l.factor(bordered)?;
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim * dim];
    rhs[0] = Complex64::new(1.0, 0.0);
    let x = solve(&lu, &rhs);
    let operator_norm = l.frobenius_norm();
    let residual = norm(&l.apply(&x));
    let rho = DensityMatrix::from_data(dim, x)?;
    let trace = rho.trace().re;
    if !(residual <= SOLVE_TOLERANCE * operator_norm) || (trace - 1.0).abs() > 1e-10 {
        return Err(Error::LinearSolve {
            reason: "stationary state does not satisfy L[rho] = 0".into(),
            residual,
        });
    }
    Ok((
        rho,
        SteadyStateReport {
            residual,
            operator_norm,
            trace,
            nnz: l.nnz(),
            solve_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Mean arrival time at the drain, `τ = (γ_d/ħ)⟨N|L⁻²ρ₀|N⟩`, for an
/// `N × N` initial state on the chain (no vacuum level).
pub fn average_transfer_time(
    h: &Hamiltonian,
    gamma_phi: f64,
    gamma_d: f64,
    rho0: &DensityMatrix,
) -> Result<f64> {
    let l = Liouvillian::without_refill(h, gamma_phi, gamma_d)?;
    let n = l.dim;
    if rho0.dim() != n {
        return Err(Error::invalid("rho0", "dimension differs from the chain"));
    }
    let lu = l.factor(l.entries.iter().copied())?;
    let scale = l.frobenius_norm();
    let b = rho0.as_slice();
    let x = solve(&lu, b);
    check_residual(&l, &x, b, scale)?;
    let y = solve(&lu, &x);
    check_residual(&l, &y, &x, scale)?;
    let last = (n - 1) * n + (n - 1);
    let tau = gamma_d / h.units().hbar * y[last].re;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::LinearSolve {
            reason: format!("non-positive transfer time {tau}"),
            residual: f64::NAN,
        });
    }
    Ok(tau)
}

fn check_residual(l: &Liouvillian, x: &[Complex64], b: &[Complex64], scale: f64) -> Result<()> {
    let lx = l.apply(x);
    let residual = norm(&lx.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    if residual <= SOLVE_TOLERANCE * scale * norm(x).max(1.0) {
        Ok(())
    } else {
        Err(Error::LinearSolve {
            reason: "transfer-time solve".into(),
            residual,
        })
    }
}
