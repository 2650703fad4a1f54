//! Reproducible random streams.
//!
//! Every consumer of randomness (a trajectory, a phase draw, a disorder
//! realization) gets its own ChaCha8 stream addressed by `(master_seed,
//! domain, index)`. ChaCha is counter based, so stream `i` is the same no
//! matter how many other streams exist or which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream domains derived from one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Trajectory,
    Phase,
    Disorder,
    EchoBackward,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Trajectory => 0x7472_616a,
            Domain::Phase => 0x7068_6173,
            Domain::Disorder => 0x6469_736f,
            Domain::EchoBackward => 0x6563_686f,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key(master_seed: u64, domain: Domain) -> [u8; 32] {
    let mut state = master_seed ^ domain.tag().rotate_left(17);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// A child seed of `master_seed` labelled by `label` (e.g. a sweep point).
pub fn derive_seed(master_seed: u64, label: u64) -> u64 {
    let mut state = master_seed ^ label.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state)
}

/// The `index`-th stream of `domain` under `master_seed`.
pub fn stream(master_seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(key(master_seed, domain));
    rng.set_stream(index);
    rng
}
