//! Counter-based per-path random number generation.
//!
//! Every path owns an independent stream keyed by hashing
//! `(seed, stream class, hypothesis, path index, resample bump)` with
//! SHA-256 and feeding the digest into a xoshiro256++ state. Keying makes
//! generation order-free: any subset of paths can be produced on any
//! thread in any order with bit-identical results, and distinct
//! hypotheses or stream classes can never collide.

use super::spec::Hypothesis;
use crate::gaussnum::std_normal_quantile;
use sha2::{Digest, Sha256};

/// Separates design-time draws from evaluation draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamClass {
    /// Paths consumed by the design optimization.
    Train,
    /// Fresh paths for Monte Carlo evaluation of a finished design.
    Eval,
}

impl StreamClass {
    fn tag(&self) -> &'static [u8] {
        match self {
            StreamClass::Train => b"train",
            StreamClass::Eval => b"eval",
        }
    }
}

/// Per-path generator (xoshiro256++ core over a hashed key).
#[derive(Debug, Clone)]
pub struct PathRng {
    s: [u64; 4],
}

impl PathRng {
    /// Stream for path `index` of a given hypothesis.
    pub fn for_path(seed: u64, stream: StreamClass, hypothesis: Hypothesis, index: u64) -> Self {
        Self::keyed(seed, stream, hypothesis, index, 0)
    }

    /// Replacement stream used when a path must be regenerated (for
    /// example a degenerate t path); `bump` counts the attempt.
    pub fn keyed(
        seed: u64,
        stream: StreamClass,
        hypothesis: Hypothesis,
        index: u64,
        bump: u32,
    ) -> Self {
        let mut h = Sha256::new();
        h.update(b"seqdesign.path-stream.v1\0");
        h.update(stream.tag());
        h.update([0u8]);
        h.update(hypothesis.tag());
        h.update([0u8]);
        h.update(seed.to_le_bytes());
        h.update(index.to_le_bytes());
        h.update(bump.to_le_bytes());
        Self::from_digest(h)
    }

    /// Stream keyed by an arbitrary label, for randomness outside the
    /// path namespaces (permutation draws, synthetic fixtures). Lives in
    /// its own hash domain, so labeled streams can never collide with
    /// path streams regardless of seed or label.
    pub fn for_label(seed: u64, label: &[u8], index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"seqdesign.labeled-stream.v1\0");
        h.update(label);
        h.update([0u8]);
        h.update(seed.to_le_bytes());
        h.update(index.to_le_bytes());
        Self::from_digest(h)
    }

    fn from_digest(h: Sha256) -> Self {
        let digest = h.finalize();
        let mut s = [0u64; 4];
        for (i, word) in s.iter_mut().enumerate() {
            let mut b = [0u8; 8];
            b.copy_from_slice(&digest[i * 8..(i + 1) * 8]);
            *word = u64::from_le_bytes(b);
        }
        if s == [0, 0, 0, 0] {
            s[0] = 1;
        }
        PathRng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw strictly inside (0, 1).
    pub fn uniform(&mut self) -> f64 {
        // 53 random bits centered in their cell: never exactly 0 or 1.
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw by quantile inversion.
    pub fn standard_normal(&mut self) -> f64 {
        std_normal_quantile(self.uniform()).expect("uniform draw is strictly inside (0,1)")
    }
}
