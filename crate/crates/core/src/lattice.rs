//! One-dimensional lattice Hamiltonians and their closed-form coherent
//! predictions.
//!
//! Three models are supported:
//!
//! - **HHAA** (Harper-Hofstadter-Aubry-André): nearest-neighbour chain with
//!   incommensurate on-site energies `ε_n = W cos(2π q n + θ)`. Extended for
//!   `W < 2J`, critical at `W = 2J`, localized for `W > 2J`.
//! - **Fibonacci**: nearest-neighbour chain whose on-site energies follow
//!   the Fibonacci word, `ε_n = W(⌊(n+1)q_g²⌋ − ⌊n q_g²⌋)`.
//! - **PBRM** (power-law banded random matrices): dense real-symmetric
//!   Gaussian matrix with `⟨H_ij²⟩ = J²/(2 + 2(|i−j|/b)^{2μ})` and unit
//!   on-site variance.
//!
//! Sites are numbered `n = 1..=N` in formulas and stored at index `n − 1`.
//! Both nearest-neighbour models carry hopping `−J`; the sign does not affect
//! any observable computed here.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_nonnegative, ensure_positive, Error, Result};
use crate::rng::{self, Domain};
use crate::units::Units;

/// The golden-mean wavenumber `q_g = (√5 − 1)/2`.
pub const GOLDEN_Q: f64 = 0.618_033_988_749_894_9;

/// Fibonacci model crossover between super- and sub-diffusive spreading.
pub const FIBONACCI_DIFFUSIVE_W: f64 = 3.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Hhaa,
    Fibonacci,
    Pbrm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hhaa => "hhaa",
            ModelKind::Fibonacci => "fibonacci",
            ModelKind::Pbrm => "pbrm",
        }
    }

    pub fn is_nearest_neighbour(self) -> bool {
        !matches!(self, ModelKind::Pbrm)
    }
}

/// Model parameters. Fields that do not apply to a model are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Number of sites `N`.
    pub n: usize,
    /// Hopping energy `J`.
    pub hopping: f64,
    /// On-site potential strength `W` (HHAA, Fibonacci).
    pub potential: f64,
    /// Modulation wavenumber `q` (HHAA).
    pub wavenumber: f64,
    /// Phase offset `θ ∈ [0, 2π)` (HHAA).
    pub phase: f64,
    /// Power-law exponent `μ` (PBRM).
    pub exponent: f64,
    /// Bandwidth `b` (PBRM).
    pub bandwidth: f64,
    /// Seed of the PBRM realization.
    pub seed: u64,
    pub units: Units,
}

impl ModelSpec {
    fn base(kind: ModelKind, n: usize) -> Self {
        ModelSpec {
            kind,
            n,
            hopping: 1.0,
            potential: 0.0,
            wavenumber: GOLDEN_Q,
            phase: 0.0,
            exponent: 1.0,
            bandwidth: 1.0,
            seed: 0,
            units: Units::default(),
        }
    }

    pub fn hhaa(n: usize, potential: f64) -> Self {
        ModelSpec {
            potential,
            ..Self::base(ModelKind::Hhaa, n)
        }
    }

    pub fn fibonacci(n: usize, potential: f64) -> Self {
        ModelSpec {
            potential,
            ..Self::base(ModelKind::Fibonacci, n)
        }
    }

    pub fn pbrm(n: usize, exponent: f64, bandwidth: f64, seed: u64) -> Self {
        ModelSpec {
            exponent,
            bandwidth,
            seed,
            ..Self::base(ModelKind::Pbrm, n)
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_wavenumber(mut self, q: f64) -> Self {
        self.wavenumber = q;
        self
    }

    pub fn with_hopping(mut self, j: f64) -> Self {
        self.hopping = j;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("n", format!("need at least 2 sites, got {}", self.n)));
        }
        self.units.validate()?;
        ensure_positive("hopping", self.hopping)?;
        match self.kind {
            ModelKind::Hhaa => {
                ensure_nonnegative("potential", self.potential)?;
                ensure_finite("wavenumber", self.wavenumber)?;
                ensure_finite("phase", self.phase)?;
                if !(0.0..2.0 * PI).contains(&self.phase) {
                    return Err(Error::invalid(
                        "phase",
                        format!("must lie in [0, 2π), got {}", self.phase),
                    ));
                }
            }
            ModelKind::Fibonacci => ensure_nonnegative("potential", self.potential)?,
            ModelKind::Pbrm => {
                ensure_nonnegative("exponent", self.exponent)?;
                ensure_positive("bandwidth", self.bandwidth)?;
            }
        }
        Ok(())
    }

    /// `count` realizations for averaging: uniform random phases for HHAA,
    /// independent seeds for PBRM, a single copy for the deterministic
    /// Fibonacci chain.
    pub fn realizations(&self, count: usize, master_seed: u64) -> Vec<ModelSpec> {
        match self.kind {
            ModelKind::Fibonacci => vec![self.clone()],
            ModelKind::Hhaa => (0..count as u64)
                .map(|i| {
                    let theta: f64 = rng::stream(master_seed, Domain::Phase, i).random::<f64>() * 2.0 * PI;
                    self.clone().with_phase(theta % (2.0 * PI))
                })
                .collect(),
            ModelKind::Pbrm => (0..count as u64)
                .map(|i| {
                    let seed: u64 = rng::stream(master_seed, Domain::Disorder, i).random();
                    self.clone().with_seed(seed)
                })
                .collect(),
        }
    }
}

/// Storage of a real-symmetric Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub enum Couplings {
    /// Diagonal `ε_n` and the `N − 1` bond energies `H_{n,n+1}`.
    Tridiagonal {
        diagonal: Vec<f64>,
        offdiagonal: Vec<f64>,
    },
    /// Row-major `N × N`.
    Dense { n: usize, data: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    couplings: Couplings,
    units: Units,
}

impl Hamiltonian {
    pub fn tridiagonal(diagonal: Vec<f64>, offdiagonal: Vec<f64>, units: Units) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::invalid("diagonal", "empty chain"));
        }
        if offdiagonal.len() + 1 != diagonal.len() {
            return Err(Error::invalid(
                "offdiagonal",
                format!("expected {} bonds, got {}", diagonal.len() - 1, offdiagonal.len()),
            ));
        }
        if diagonal.iter().chain(&offdiagonal).any(|x| !x.is_finite()) {
            return Err(Error::invalid("couplings", "non-finite entry"));
        }
        units.validate()?;
        Ok(Hamiltonian {
            couplings: Couplings::Tridiagonal {
                diagonal,
                offdiagonal,
            },
            units,
        })
    }

    /// Dense matrix from row-major data; must be exactly symmetric.
    pub fn dense(n: usize, data: Vec<f64>, units: Units) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::invalid("data", format!("expected {}×{} entries", n, n)));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("couplings", "non-finite entry"));
        }
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::invalid("data", format!("not symmetric at ({i}, {j})")));
                }
            }
        }
        units.validate()?;
        Ok(Hamiltonian {
            couplings: Couplings::Dense { n, data },
            units,
        })
    }

    pub fn n(&self) -> usize {
        match &self.couplings {
            Couplings::Tridiagonal { diagonal, .. } => diagonal.len(),
            Couplings::Dense { n, .. } => *n,
        }
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn is_tridiagonal(&self) -> bool {
        matches!(self.couplings, Couplings::Tridiagonal { .. })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.couplings {
            Couplings::Tridiagonal {
                diagonal,
                offdiagonal,
            } => match i.abs_diff(j) {
                0 => diagonal[i],
                1 => offdiagonal[i.min(j)],
                _ => 0.0,
            },
            Couplings::Dense { n, data } => data[i * n + j],
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.couplings {
            Couplings::Tridiagonal { diagonal, .. } => diagonal.clone(),
            Couplings::Dense { n, data } => (0..*n).map(|i| data[i * n + i]).collect(),
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n();
        match &self.couplings {
            Couplings::Dense { data, .. } => data.clone(),
            Couplings::Tridiagonal {
                diagonal,
                offdiagonal,
            } => {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    data[i * n + i] = diagonal[i];
                }
                for (i, &t) in offdiagonal.iter().enumerate() {
                    data[i * n + i + 1] = t;
                    data[(i + 1) * n + i] = t;
                }
                data
            }
        }
    }

    /// Gershgorin bounds `(lo, hi)` on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let centre = self.get(i, i);
            let radius: f64 = match &self.couplings {
                Couplings::Tridiagonal { offdiagonal, .. } => {
                    let left = if i > 0 { offdiagonal[i - 1].abs() } else { 0.0 };
                    let right = offdiagonal.get(i).map_or(0.0, |t| t.abs());
                    left + right
                }
                Couplings::Dense { data, .. } => (0..n)
                    .filter(|&j| j != i)
                    .map(|j| data[i * n + j].abs())
                    .sum(),
            };
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }

    /// Upper bound on the operator norm ‖H‖.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.spectral_bounds();
        lo.abs().max(hi.abs())
    }

    /// `y = H x` for complex vectors.
    pub fn apply(&self, x: &[num_complex::Complex64], y: &mut [num_complex::Complex64]) {
        match &self.couplings {
            Couplings::Tridiagonal {
                diagonal,
                offdiagonal,
            } => tridiagonal_apply(diagonal, offdiagonal, x, y),
            Couplings::Dense { n, data } => {
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &data[i * n..(i + 1) * n];
                    *yi = row.iter().zip(x).map(|(&h, &v)| v * h).sum();
                }
            }
        }
    }

    /// Short-time ballistic velocity squared `(a²/ħ²) Σ_n H_{n,s}² (n − s)²`
    /// for an excitation starting on site index `site`.
    pub fn initial_velocity_sq(&self, site: usize) -> f64 {
        let a = self.units.lattice_constant;
        let hbar = self.units.hbar;
        let sum: f64 = (0..self.n())
            .map(|m| {
                let d = m as f64 - site as f64;
                self.get(m, site).powi(2) * d * d
            })
            .sum();
        a * a * sum / (hbar * hbar)
    }

    /// Energy spread `ΔE` from neighbouring diagonal entries,
    /// `ΔE² = ⟨(H_{n,n} − H_{n+1,n+1})²⟩ / 2`.
    pub fn energy_spread(&self) -> f64 {
        let d = self.diagonal();
        let sum: f64 = d.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
        (sum / (2.0 * (d.len() - 1) as f64)).sqrt()
    }

    /// Non-zero entries as `(row, col, value)` with 1-based site labels.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        let n = self.n();
        for i in 0..n {
            let cols: Box<dyn Iterator<Item = usize>> = if self.is_tridiagonal() {
                Box::new(i.saturating_sub(1)..(i + 2).min(n))
            } else {
                Box::new(0..n)
            };
            for j in cols {
                let v = self.get(i, j);
                if v != 0.0 {
                    w.write_record(&[(i + 1).to_string(), (j + 1).to_string(), format!("{v:.17e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn tridiagonal_apply(
    diagonal: &[f64],
    offdiagonal: &[f64],
    x: &[num_complex::Complex64],
    y: &mut [num_complex::Complex64],
) {
    let n = diagonal.len();
    if n == 1 {
        y[0] = x[0] * diagonal[0];
        return;
    }
    y[0] = x[0] * diagonal[0] + x[1] * offdiagonal[0];
    for i in 1..n - 1 {
        y[i] = x[i] * diagonal[i] + x[i - 1] * offdiagonal[i - 1] + x[i + 1] * offdiagonal[i];
    }
    y[n - 1] = x[n - 1] * diagonal[n - 1] + x[n - 2] * offdiagonal[n - 2];
}

/// On-site energies of the Fibonacci chain.
pub fn fibonacci_potential(n: usize, w: f64) -> Vec<f64> {
    // q_g² = 1 − q_g keeps the floor arguments one rounding away from exact
    let q2 = 1.0 - GOLDEN_Q;
    (1..=n)
        .map(|site| {
            let s = site as f64;
            let bit = ((s + 1.0) * q2).floor() - (s * q2).floor();
            w * bit
        })
        .collect()
}

pub fn hhaa_potential(n: usize, w: f64, q: f64, theta: f64) -> Vec<f64> {
    (1..=n)
        .map(|site| w * (2.0 * PI * q * site as f64 + theta).cos())
        .collect()
}

/// Variance of the PBRM coupling at distance `d ≥ 1`, in units of J².
pub fn pbrm_coupling_variance(d: usize, exponent: f64, bandwidth: f64) -> f64 {
    1.0 / (2.0 + 2.0 * (d as f64 / bandwidth).powf(2.0 * exponent))
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<Hamiltonian> {
    spec.validate()?;
    let n = spec.n;
    let j = spec.hopping;
    match spec.kind {
        ModelKind::Hhaa => Hamiltonian::tridiagonal(
            hhaa_potential(n, spec.potential, spec.wavenumber, spec.phase),
            vec![-j; n - 1],
            spec.units,
        ),
        ModelKind::Fibonacci => Hamiltonian::tridiagonal(
            fibonacci_potential(n, spec.potential),
            vec![-j; n - 1],
            spec.units,
        ),
        ModelKind::Pbrm => {
            let mut rng = rng::stream(spec.seed, Domain::Disorder, u64::MAX);
            let mut data = vec![0.0; n * n];
            for row in 0..n {
                for col in row..n {
                    let std = if row == col {
                        j
                    } else {
                        j * pbrm_coupling_variance(col - row, spec.exponent, spec.bandwidth).sqrt()
                    };
                    let z: f64 = rng.sample(StandardNormal);
                    data[row * n + col] = std * z;
                    data[col * n + row] = std * z;
                }
            }
            Hamiltonian::dense(n, data, spec.units)
        }
    }
}

/// Mean elastic scattering time `τ_W = ħ/ΔE` from the closed-form ΔE.
///
/// HHAA: `ΔE = W √((1 − cos 2πq)/2)`. Fibonacci: `ΔE = q_g W`.
pub fn scattering_time(spec: &ModelSpec) -> Result<f64> {
    spec.validate()?;
    let delta_e = match spec.kind {
        ModelKind::Hhaa => {
            spec.potential * ((1.0 - (2.0 * PI * spec.wavenumber).cos()) / 2.0).max(0.0).sqrt()
        }
        ModelKind::Fibonacci => GOLDEN_Q * spec.potential,
        ModelKind::Pbrm => {
            return Err(Error::invalid(
                "kind",
                "the PBRM scattering time has no closed form; fit it from the coherent spreading",
            ))
        }
    };
    if delta_e <= 0.0 {
        return Err(Error::InfiniteScatteringTime);
    }
    Ok(spec.units.hbar / delta_e)
}

/// Localization length `ξ` of the HHAA localized phase, `2ξ = a / ln(W/2J)`.
pub fn localization_length(spec: &ModelSpec) -> Result<f64> {
    if spec.kind != ModelKind::Hhaa {
        return Err(Error::NotDefinedInPhase {
            quantity: "localization length",
            phase: "non-HHAA model",
        });
    }
    let ratio = spec.potential / (2.0 * spec.hopping);
    if ratio <= 1.0 {
        return Err(Error::NotDefinedInPhase {
            quantity: "localization length",
            phase: "extended or critical",
        });
    }
    Ok(spec.units.lattice_constant / (2.0 * ratio.ln()))
}

/// HHAA phase of a spec.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Extended,
    Critical,
    Localized,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Extended => "extended",
            Phase::Critical => "critical",
            Phase::Localized => "localized",
        }
    }
}

pub fn hhaa_phase(spec: &ModelSpec) -> Phase {
    let critical = 2.0 * spec.hopping;
    if (spec.potential - critical).abs() <= 1e-9 * critical {
        Phase::Critical
    } else if spec.potential < critical {
        Phase::Extended
    } else {
        Phase::Localized
    }
}

/// Closed-form coherent (γ_φ = 0) predictions. Quantities that do not apply
/// to the model or phase are absent; the accessors report why.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPrediction {
    pub v0_sq: Option<f64>,
    pub u_sq: Option<f64>,
    pub tau_w: Option<f64>,
    pub d0: Option<f64>,
    pub xi: Option<f64>,
    pub sigma_sat_sq: Option<f64>,
    pub t_s: Option<f64>,
    #[serde(skip)]
    phase: Option<&'static str>,
}

macro_rules! prediction_accessor {
    ($name:ident, $label:literal) => {
        pub fn $name(&self) -> Result<f64> {
            self.$name.ok_or(Error::NotDefinedInPhase {
                quantity: $label,
                phase: self.phase.unwrap_or("this model"),
            })
        }
    };
}

impl AnalyticPrediction {
    prediction_accessor!(v0_sq, "v0^2");
    prediction_accessor!(u_sq, "u^2");
    prediction_accessor!(tau_w, "tau_W");
    prediction_accessor!(d0, "D0");
    prediction_accessor!(xi, "xi");
    prediction_accessor!(sigma_sat_sq, "sigma_sat^2");
    prediction_accessor!(t_s, "t_s");
}

/// Initial ballistic velocity squared of the PBRM ensemble,
/// `v₀² = Σ_{n=1}^{N/2} J² n² a² / (ħ² (1 + (n/b)^{2μ}))`.
pub fn pbrm_initial_velocity_sq(spec: &ModelSpec) -> f64 {
    let Units {
        hbar,
        lattice_constant: a,
    } = spec.units;
    let j = spec.hopping;
    let sum: f64 = (1..=spec.n / 2)
        .map(|d| {
            let x = d as f64;
            x * x * 2.0 * pbrm_coupling_variance(d, spec.exponent, spec.bandwidth)
        })
        .sum();
    j * j * a * a * sum / (hbar * hbar)
}

/// PBRM saturation time: the time at which
/// `σ₀²(t) = v₀²τ_W² + √2 v₀² τ_W (t − τ_W)` reaches `N² f a²/12`.
pub fn pbrm_saturation_time(n: usize, v0_sq: f64, tau_w: f64, fraction: f64, a: f64) -> f64 {
    let sat = (n as f64).powi(2) * fraction * a * a / 12.0;
    let s2 = std::f64::consts::SQRT_2;
    sat / (s2 * v0_sq * tau_w) + tau_w * (s2 - 1.0) / s2
}

pub fn coherent_predictions(spec: &ModelSpec) -> Result<AnalyticPrediction> {
    spec.validate()?;
    let Units {
        hbar,
        lattice_constant: a,
    } = spec.units;
    let j = spec.hopping;
    let w = spec.potential;
    let mut out = AnalyticPrediction::default();
    match spec.kind {
        ModelKind::Hhaa | ModelKind::Fibonacci => {
            let v0_sq = 2.0 * a * a * (j / hbar).powi(2);
            out.v0_sq = Some(v0_sq);
            out.tau_w = match scattering_time(spec) {
                Ok(t) => Some(t),
                Err(Error::InfiniteScatteringTime) => None,
                Err(e) => return Err(e),
            };
            if spec.kind == ModelKind::Hhaa {
                let phase = hhaa_phase(spec);
                out.phase = Some(phase.name());
                match phase {
                    Phase::Extended => {
                        out.u_sq = Some(a * a * (2.0 * j - w).powi(2) / (2.0 * hbar * hbar));
                    }
                    Phase::Critical => {
                        let tau_w = out.tau_w.ok_or(Error::InfiniteScatteringTime)?;
                        out.d0 = Some(v0_sq * tau_w / 2.0);
                    }
                    Phase::Localized => {
                        let xi = localization_length(spec)?;
                        out.xi = Some(xi);
                        out.sigma_sat_sq = Some(2.0 * xi * xi);
                    }
                }
            } else {
                out.phase = Some("fibonacci chain");
                out.d0 = out.tau_w.map(|t| v0_sq * t / 2.0);
            }
        }
        ModelKind::Pbrm => {
            out.phase = Some("power-law banded random matrix");
            let v0_sq = pbrm_initial_velocity_sq(spec);
            out.v0_sq = Some(v0_sq);
            // uncorrelated Gaussian diagonal of variance J²: ΔE = J
            let tau_w = hbar / j;
            out.tau_w = Some(tau_w);
            out.t_s = Some(pbrm_saturation_time(spec.n, v0_sq, tau_w, 1.0, a));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_eight_sites() {
        let h = build_hamiltonian(&ModelSpec::fibonacci(8, 1.0)).unwrap();
        assert_eq!(h.diagonal(), vec![0., 1., 0., 0., 1., 0., 1., 0.]);
    }

    #[test]
    fn fibonacci_matches_substitution_word() {
        // 0 -> 01, 1 -> 0
        let n = 200_000;
        let mut word = vec![0u8];
        while word.len() < n {
            word = word
                .iter()
                .flat_map(|&c| if c == 0 { vec![0, 1] } else { vec![0] })
                .collect();
        }
        let eps = fibonacci_potential(n, 1.0);
        for (i, (&e, &c)) in eps.iter().zip(&word).enumerate() {
            assert_eq!(e, c as f64, "site {}", i + 1);
        }
        assert!(eps.windows(2).all(|w| !(w[0] == 1.0 && w[1] == 1.0)));
    }

    #[test]
    fn clean_hhaa_is_uniform_chain() {
        let h = build_hamiltonian(&ModelSpec::hhaa(6, 0.0).with_phase(1.3)).unwrap();
        for i in 0..6 {
            assert_eq!(h.get(i, i), 0.0);
        }
        for i in 0..5 {
            assert_eq!(h.get(i, i + 1), -1.0);
        }
    }

    #[test]
    fn hhaa_three_sites() {
        let h = build_hamiltonian(&ModelSpec::hhaa(3, 2.0)).unwrap();
        let expected = [2.0 * (2.0 * PI * GOLDEN_Q).cos(), 2.0 * (4.0 * PI * GOLDEN_Q).cos(), 2.0 * (6.0 * PI * GOLDEN_Q).cos()];
        let d = h.diagonal();
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((d[0] + 1.4747).abs() < 1e-4);
        assert!((d[1] - 0.17485).abs() < 1e-4);
        assert!((d[2] - 1.21688).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_hamiltonian(&ModelSpec::hhaa(1, 1.0)).is_err());
        assert!(build_hamiltonian(&ModelSpec::hhaa(4, f64::NAN)).is_err());
        assert!(build_hamiltonian(&ModelSpec::hhaa(4, 1.0).with_phase(7.0)).is_err());
        assert!(build_hamiltonian(&ModelSpec::pbrm(4, 1.0, 0.0, 1)).is_err());
        assert!(build_hamiltonian(&ModelSpec::fibonacci(4, -1.0)).is_err());
    }

    #[test]
    fn scattering_times() {
        let t = scattering_time(&ModelSpec::hhaa(10, 2.0)).unwrap();
        assert!((t - 0.5365).abs() < 1e-4, "{t}");
        let t = scattering_time(&ModelSpec::fibonacci(10, 3.15)).unwrap();
        assert!((t - 0.5137).abs() < 1e-4, "{t}");
        let t = scattering_time(&ModelSpec::hhaa(10, 1.0).with_wavenumber(0.5)).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(matches!(
            scattering_time(&ModelSpec::hhaa(10, 0.0)),
            Err(Error::InfiniteScatteringTime)
        ));
    }

    #[test]
    fn phase_predictions() {
        let crit = coherent_predictions(&ModelSpec::hhaa(10, 2.0)).unwrap();
        assert!((crit.d0().unwrap() - 0.5365).abs() < 1e-4);
        assert_eq!(crit.v0_sq().unwrap(), 2.0);
        assert!(matches!(crit.xi(), Err(Error::NotDefinedInPhase { .. })));
        assert!(matches!(crit.u_sq(), Err(Error::NotDefinedInPhase { .. })));

        let loc = coherent_predictions(&ModelSpec::hhaa(10, 3.0)).unwrap();
        let ln15 = 1.5f64.ln();
        assert!((loc.sigma_sat_sq().unwrap() - 2.0 / (2.0 * ln15).powi(2)).abs() < 1e-12);
        assert!((loc.sigma_sat_sq().unwrap() - 3.041).abs() < 1e-3);
        assert!(loc.d0().is_err());

        let ext = coherent_predictions(&ModelSpec::hhaa(10, 1.0)).unwrap();
        assert!((ext.u_sq().unwrap() - 0.5).abs() < 1e-14);

        let fib = coherent_predictions(&ModelSpec::fibonacci(10, 1.0)).unwrap();
        assert_eq!(fib.v0_sq().unwrap(), 2.0);
    }

    #[test]
    fn critical_d0_equals_half_v0sq_tauw() {
        for q in [GOLDEN_Q, GOLDEN_Q / 2.0, GOLDEN_Q / 8.0, 0.3] {
            let p = coherent_predictions(&ModelSpec::hhaa(10, 2.0).with_wavenumber(q)).unwrap();
            let lhs = p.d0().unwrap();
            let rhs = p.v0_sq().unwrap() * p.tau_w().unwrap() / 2.0;
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn hhaa_empirical_energy_spread_matches_closed_form() {
        let spec = ModelSpec::hhaa(100_000, 2.0);
        let closed = spec.units.hbar / scattering_time(&spec).unwrap();
        let mean: f64 = spec
            .realizations(4, 9)
            .iter()
            .map(|s| build_hamiltonian(s).unwrap().energy_spread())
            .sum::<f64>()
            / 4.0;
        assert!(((mean - closed) / closed).abs() < 5e-3, "{mean} vs {closed}");
    }

    #[test]
    fn nearest_neighbour_initial_velocity() {
        let h = build_hamiltonian(&ModelSpec::hhaa(20, 2.0)).unwrap();
        assert!((h.initial_velocity_sq(10) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pbrm_realization_is_reproducible_and_symmetric() {
        let a = build_hamiltonian(&ModelSpec::pbrm(30, 1.0, 0.5, 4)).unwrap();
        let b = build_hamiltonian(&ModelSpec::pbrm(30, 1.0, 0.5, 4)).unwrap();
        let c = build_hamiltonian(&ModelSpec::pbrm(30, 1.0, 0.5, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn pbrm_velocity_sum() {
        // μ = 0 makes every term n²/2 · 2 = n²
        let spec = ModelSpec::pbrm(8, 0.0, 1.0, 0);
        assert!((pbrm_initial_velocity_sq(&spec) - (1. + 4. + 9. + 16.) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_dump_lists_nonzeros() {
        let h = build_hamiltonian(&ModelSpec::fibonacci(4, 1.0)).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        // 1 nonzero diagonal (site 2) + 6 bonds
        assert_eq!(text.lines().count(), 1 + 1 + 6);
        assert!(text.starts_with("row,col,value"));
    }
}
