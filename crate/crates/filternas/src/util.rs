//! Small numeric and seeding helpers shared across modules.

/// Derives a child seed from a master seed, a role tag, and two indices.
///
/// The scheme is FNV-1a over the little-endian master seed, the tag bytes,
/// and the little-endian indices, in that order. It is fixed so that every
/// worker (weight trainer, sampler, grid repeat) obtains a reproducible,
/// well-separated stream regardless of scheduling order.
pub fn derive_seed(master: u64, tag: &str, iteration: u64, index: u64) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    };
    for b in master.to_le_bytes() {
        eat(b);
    }
    for b in tag.as_bytes() {
        eat(*b);
    }
    for b in iteration.to_le_bytes() {
        eat(b);
    }
    for b in index.to_le_bytes() {
        eat(b);
    }
    h
}

/// Compensated (Kahan) accumulator, used where reduction order must not
/// perturb results beyond ~1e-12.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Rounds half-away-from-zero, the rounding rule used for quantization grids
/// and expected configurations. `f64::round` already implements it.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}
