//! Binary record of which trajectories of an ensemble have run.
//!
//! Layout (little endian): magic `QDSEEDS1`, master seed `u64`, count `u64`,
//! then per trajectory its stream index `u64` and a completion byte.

use std::io::{Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"QDSEEDS1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedCheckpoint {
    pub master_seed: u64,
    pub entries: Vec<(u64, bool)>,
}

impl SeedCheckpoint {
    pub fn new(master_seed: u64, n_traj: usize) -> Self {
        SeedCheckpoint {
            master_seed,
            entries: (0..n_traj as u64).map(|i| (i, false)).collect(),
        }
    }

    pub fn mark_done(&mut self, indices: &[u64]) {
        for e in &mut self.entries {
            if indices.contains(&e.0) {
                e.1 = true;
            }
        }
    }

    pub fn pending(&self) -> Vec<u64> {
        self.entries.iter().filter(|e| !e.1).map(|e| e.0).collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&self.master_seed.to_le_bytes())?;
        out.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for &(index, done) in &self.entries {
            out.write_all(&index.to_le_bytes())?;
            out.write_all(&[done as u8])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::invalid("checkpoint", "bad magic"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let master_seed = u64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let count = u64::from_le_bytes(word);
        let mut entries = Vec::with_capacity(count.min(1 << 24) as usize);
        for _ in 0..count {
            input.read_exact(&mut word)?;
            let mut flag = [0u8; 1];
            input.read_exact(&mut flag)?;
            if flag[0] > 1 {
                return Err(Error::invalid("checkpoint", "corrupt completion flag"));
            }
            entries.push((u64::from_le_bytes(word), flag[0] == 1));
        }
        Ok(SeedCheckpoint {
            master_seed,
            entries,
        })
    }
}
