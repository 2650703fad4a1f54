//! Spectral and propagation kernels shared by the dynamics modules.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Couplings, Hamiltonian};

/// Eigenpairs of a real-symmetric matrix; column `k` of `vectors` belongs
/// to `values[k]`, ascending.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl Eigensystem {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

pub fn eigensystem(h: &Hamiltonian) -> Result<Eigensystem> {
    let n = h.n();
    let m = match h.couplings() {
        Couplings::Dense { data, .. } => Mat::from_fn(n, n, |i, j| data[i * n + j]),
        Couplings::Tridiagonal { .. } => Mat::from_fn(n, n, |i, j| h.get(i, j)),
    };
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolve(format!("{e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolve("non-finite eigenvalue".into()));
    }
    Ok(Eigensystem {
        values,
        vectors: evd.U().to_owned(),
    })
}

/// Bessel functions `J_0(z) ..= J_K(z)` for `z ≥ 0`, truncated after the
/// last order whose magnitude exceeds `cutoff`. Miller backward recurrence
/// normalized by `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(z: f64, cutoff: f64) -> Vec<f64> {
    assert!(z >= 0.0 && z.is_finite(), "bessel argument must be finite and >= 0");
    if z == 0.0 {
        return vec![1.0];
    }
    let mut start = (z + 20.0 + 12.0 * z.cbrt()).ceil() as usize + 10;
    start += start % 2;
    let mut values = vec![0.0; start + 2];
    values[start] = 1e-300;
    for k in (1..=start).rev() {
        values[k - 1] = 2.0 * k as f64 / z * values[k] - values[k + 1];
        if values[k - 1].abs() > 1e250 {
            for v in &mut values[k - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = values[0] + 2.0 * values.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut values {
        *v /= norm;
    }
    let last = values
        .iter()
        .rposition(|v| v.abs() > cutoff)
        .unwrap_or(0);
    values.truncate(last + 1);
    values
}

/// Half-open index range holding the non-zero amplitudes of a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    pub lo: usize,
    pub hi: usize,
}

impl Support {
    pub fn full(n: usize) -> Self {
        Support { lo: 0, hi: n }
    }

    pub fn of(psi: &[Complex64]) -> Self {
        let lo = psi.iter().position(|z| z.norm_sqr() != 0.0).unwrap_or(0);
        let hi = psi
            .iter()
            .rposition(|z| z.norm_sqr() != 0.0)
            .map_or(lo, |i| i + 1);
        Support { lo, hi }
    }

    fn grow(self, by: usize, n: usize) -> Self {
        Support {
            lo: self.lo.saturating_sub(by),
            hi: (self.hi + by).min(n),
        }
    }
}

/// Amplitudes with `|ψ|² < TRIM_PROBABILITY` at the edges of the support
/// are set to zero after each propagation step.
pub const TRIM_PROBABILITY: f64 = 1e-30;

/// Chebyshev expansion of `exp(−i H τ/ħ)` for a tridiagonal `H` and a fixed
/// `τ`. Applying it only touches the support of the state plus the
/// expansion order on either side.
#[derive(Clone, Debug)]
pub struct ChebyshevStep {
    diagonal: Vec<f64>,
    offdiagonal: Vec<f64>,
    centre: f64,
    half_width: f64,
    /// `e^{−i c τ/ħ} (2 − δ_k0) (−i)^k J_k(r τ/ħ)`
    coefficients: Vec<Complex64>,
}

impl ChebyshevStep {
    pub fn new(h: &Hamiltonian, tau: f64) -> Result<Self> {
        let Couplings::Tridiagonal {
            diagonal,
            offdiagonal,
        } = h.couplings()
        else {
            return Err(Error::invalid(
                "hamiltonian",
                "Chebyshev stepping needs a tridiagonal Hamiltonian",
            ));
        };
        let (lo, hi) = h.spectral_bounds();
        let centre = 0.5 * (hi + lo);
        // padding keeps the scaled spectrum strictly inside [-1, 1]
        let half_width = (0.5 * (hi - lo)).max(1e-12) * (1.0 + 1e-10) + 1e-12;
        let scaled_time = tau / h.units().hbar;
        let bessel = bessel_j_sequence(half_width * scaled_time.abs(), 1e-17);
        let global = Complex64::from_polar(1.0, -centre * scaled_time);
        let mut unit = Complex64::new(1.0, 0.0);
        let rotation = if scaled_time >= 0.0 {
            Complex64::new(0.0, -1.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let coefficients = bessel
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let c = global * unit * if k == 0 { j } else { 2.0 * j };
                unit *= rotation;
                c
            })
            .collect();
        Ok(ChebyshevStep {
            diagonal: diagonal.clone(),
            offdiagonal: offdiagonal.clone(),
            centre,
            half_width,
            coefficients,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    fn scaled_apply(&self, x: &[Complex64], y: &mut [Complex64], range: Support) {
        let n = self.diagonal.len();
        let inv = 1.0 / self.half_width;
        for i in range.lo..range.hi {
            let mut acc = x[i] * (self.diagonal[i] - self.centre);
            if i > 0 {
                acc += x[i - 1] * self.offdiagonal[i - 1];
            }
            if i + 1 < n {
                acc += x[i + 1] * self.offdiagonal[i];
            }
            y[i] = acc * inv;
        }
    }

    /// Propagates `psi` in place. `support` must cover every non-zero
    /// amplitude and is updated to the trimmed support of the result.
    pub fn apply(&self, psi: &mut [Complex64], support: &mut Support, work: &mut ChebyshevWork) {
        let n = psi.len();
        let order = self.order();
        let outer = support.grow(order + 1, n);
        work.resize(n);
        let ChebyshevWork {
            prev,
            cur,
            next,
            acc,
        } = work;
        let c0 = self.coefficients[0];
        for i in outer.lo..outer.hi {
            prev[i] = psi[i];
            cur[i] = Complex64::new(0.0, 0.0);
            next[i] = Complex64::new(0.0, 0.0);
            acc[i] = psi[i] * c0;
        }
        let mut reach = *support;
        if order >= 1 {
            reach = reach.grow(1, n);
            self.scaled_apply(prev, cur, reach);
            let c1 = self.coefficients[1];
            for i in reach.lo..reach.hi {
                acc[i] += cur[i] * c1;
            }
        }
        for k in 2..=order {
            reach = reach.grow(1, n);
            self.scaled_apply(cur, next, reach);
            let ck = self.coefficients[k];
            for i in reach.lo..reach.hi {
                let t = 2.0 * next[i] - prev[i];
                next[i] = t;
                acc[i] += t * ck;
            }
            std::mem::swap(prev, cur);
            std::mem::swap(cur, next);
        }
        psi[outer.lo..outer.hi].copy_from_slice(&acc[outer.lo..outer.hi]);
        *support = trim(psi, outer);
    }
}

/// Scratch buffers for [`ChebyshevStep::apply`].
#[derive(Clone, Debug, Default)]
pub struct ChebyshevWork {
    prev: Vec<Complex64>,
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
    acc: Vec<Complex64>,
}

impl ChebyshevWork {
    fn resize(&mut self, n: usize) {
        for v in [&mut self.prev, &mut self.cur, &mut self.next, &mut self.acc] {
            if v.len() != n {
                *v = vec![Complex64::new(0.0, 0.0); n];
            }
        }
    }
}

pub(crate) fn trim(psi: &mut [Complex64], mut support: Support) -> Support {
    while support.lo < support.hi && psi[support.lo].norm_sqr() < TRIM_PROBABILITY {
        psi[support.lo] = Complex64::new(0.0, 0.0);
        support.lo += 1;
    }
    while support.hi > support.lo && psi[support.hi - 1].norm_sqr() < TRIM_PROBABILITY {
        psi[support.hi - 1] = Complex64::new(0.0, 0.0);
        support.hi -= 1;
    }
    support
}

/// `ψ ← V diag(e^{−i E τ/ħ}) Vᵀ ψ`.
#[derive(Clone, Debug)]
pub struct SpectralStep {
    phases: Vec<Complex64>,
}

impl SpectralStep {
    pub fn new(eig: &Eigensystem, tau: f64, hbar: f64) -> Self {
        SpectralStep {
            phases: eig
                .values
                .iter()
                .map(|&e| Complex64::from_polar(1.0, -e * tau / hbar))
                .collect(),
        }
    }

    pub fn apply(&self, eig: &Eigensystem, psi: &mut [Complex64]) {
        let n = psi.len();
        let split = Mat::from_fn(n, 2, |i, j| if j == 0 { psi[i].re } else { psi[i].im });
        let modal = eig.vectors.transpose() * &split;
        let rotated = Mat::from_fn(n, 2, |k, j| {
            let z = Complex64::new(modal[(k, 0)], modal[(k, 1)]) * self.phases[k];
            if j == 0 {
                z.re
            } else {
                z.im
            }
        });
        let back = &eig.vectors * &rotated;
        for (i, z) in psi.iter_mut().enumerate() {
            *z = Complex64::new(back[(i, 0)], back[(i, 1)]);
        }
    }
}
