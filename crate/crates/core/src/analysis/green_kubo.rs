use faer::Mat;

use super::{DiffusionMethod, DiffusionResult};
use crate::error::{ensure_positive, Result};
use crate::lattice::Hamiltonian;
use crate::linalg::{eigensystem, Eigensystem};

/// Largest chain accepted for the full eigendecomposition.
pub const MAX_SITES: usize = 4000;

/// Eigenpair data for the dephasing-broadened Kubo sum
/// `D(γ_φ) = (1/ħN) Σ_{μ≠ν} γ_φ |F_μν|² / (γ_φ² + ω_μν²)`, where
/// `F = Vᵀ X V` and `X_nm = (m − n)a H_nm` is the current operator up to
/// a factor `i/ħ`.
#[derive(Clone, Debug)]
pub struct GreenKubo {
    n: usize,
    hbar: f64,
    /// `(ω_μν, |F_μν|²)` for `μ < ν`.
    pairs: Vec<(f64, f64)>,
}

impl GreenKubo {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let eig = eigensystem(h)?;
        Ok(Self::from_eigensystem(h, &eig))
    }

    pub fn from_eigensystem(h: &Hamiltonian, eig: &Eigensystem) -> Self {
        let n = h.n();
        let a = h.units().lattice_constant;
        let x = Mat::from_fn(n, n, |i, j| (j as f64 - i as f64) * a * h.get(i, j));
        let v = &eig.vectors;
        let f = v.transpose() * (&x * v);
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for mu in 0..n {
            for nu in mu + 1..n {
                let flux = f[(mu, nu)];
                pairs.push((eig.values[nu] - eig.values[mu], flux * flux));
            }
        }
        GreenKubo {
            n,
            hbar: h.units().hbar,
            pairs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diffusion(&self, gamma_phi: f64) -> Result<DiffusionResult> {
        ensure_positive("gamma_phi", gamma_phi)?;
        let g2 = gamma_phi * gamma_phi;
        let sum: f64 = self
            .pairs
            .iter()
            .map(|&(w, f2)| f2 / (g2 + w * w))
            .sum();
        // each unordered pair appears twice in the μ ≠ ν sum
        let d = 2.0 * gamma_phi * sum / (self.hbar * self.n as f64);
        Ok(DiffusionResult::exact(d, DiffusionMethod::GreenKubo))
    }
}

/// Kubo diffusion coefficient of `h` at dephasing `γ_φ`.
pub fn green_kubo_d(h: &Hamiltonian, gamma_phi: f64) -> Result<DiffusionResult> {
    ensure_positive("gamma_phi", gamma_phi)?;
    if h.n() > MAX_SITES {
        return Err(crate::Error::SizeLimit {
            n: h.n(),
            limit: MAX_SITES,
        });
    }
    GreenKubo::new(h)?.diffusion(gamma_phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, ModelSpec};

    #[test]
    fn dimer_by_hand() {
        let h = build_hamiltonian(&ModelSpec::hhaa(2, 0.0)).unwrap();
        for g in [0.3, 2.0, 7.0] {
            let d = green_kubo_d(&h, g).unwrap().d;
            let hand = g / (g * g + 4.0);
            assert!((d - hand).abs() < 1e-12, "γ = {g}");
        }
        assert!((green_kubo_d(&h, 2.0).unwrap().d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clean_chain_strong_dephasing_law() {
        let h = build_hamiltonian(&ModelSpec::hhaa(400, 0.0)).unwrap();
        let d = green_kubo_d(&h, 1.0).unwrap().d;
        assert!((d - 2.0).abs() < 0.02, "{d}");
    }

    #[test]
    fn rejects_zero_dephasing() {
        let h = build_hamiltonian(&ModelSpec::hhaa(4, 1.0)).unwrap();
        assert!(green_kubo_d(&h, 0.0).is_err());
    }
}
