use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::rns::ResidueVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// With probability `p` a residue is replaced by one of the other
    /// `m - 1` values, chosen uniformly.
    #[default]
    ReplaceUniform,
}

/// Independent per-residue output corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        let n = Self { p, seed, kind: NoiseKind::ReplaceUniform };
        n.validate()?;
        Ok(n)
    }

    pub fn noiseless() -> Self {
        Self { p: 0.0, seed: 0, kind: NoiseKind::ReplaceUniform }
    }

    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.p) {
            Ok(())
        } else {
            Err(Error::InvalidProbability(self.p))
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.p == 0.0
    }

    /// Corrupt one residue lane in place; returns how many residues changed.
    pub fn corrupt_lane<R: Rng>(&self, lane: &mut [u32], modulus: u32, rng: &mut R) -> usize {
        if self.is_noiseless() {
            return 0;
        }
        let mut hits = 0;
        for r in lane.iter_mut() {
            if rng.gen_bool(self.p) {
                let draw = rng.gen_range(0..modulus - 1);
                *r = if draw >= *r { draw + 1 } else { draw };
                hits += 1;
            }
        }
        hits
    }
}

/// Corrupt every lane of `residues`, lane `i` drawing from `stream.child(i)`.
pub fn inject_residue_noise(residues: &ResidueVector, noise: &NoiseModel, stream: Stream) -> ResidueVector {
    let mut out = residues.clone();
    if noise.is_noiseless() {
        return out;
    }
    let moduli: Vec<u32> = out.moduli().moduli().to_vec();
    for (i, lane) in out.lanes_mut().iter_mut().enumerate() {
        noise.corrupt_lane(lane, moduli[i], &mut stream.child(i as u64).rng());
    }
    out
}
