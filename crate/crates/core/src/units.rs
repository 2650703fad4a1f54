use serde::{Deserialize, Serialize};

/// Unit conventions carried by every model. Energies are measured in units
/// of the hopping `J`; the defaults set ħ = a = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Units {
    pub hbar: f64,
    pub lattice_constant: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            hbar: 1.0,
            lattice_constant: 1.0,
        }
    }
}

impl Units {
    pub fn validate(&self) -> crate::Result<()> {
        crate::error::ensure_positive("hbar", self.hbar)?;
        crate::error::ensure_positive("lattice_constant", self.lattice_constant)
    }

    /// Decoherence time ħ/γ_φ.
    pub fn decoherence_time(&self, gamma_phi: f64) -> f64 {
        self.hbar / gamma_phi
    }
}
