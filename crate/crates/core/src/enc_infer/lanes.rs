//! Plaintext lanes: one context per CRT plaintext modulus over a shared ring.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};

use super::EncError;
use crate::she::modulus::primes_congruent_one;
use crate::she::{Context, RingContext};

/// The `count` largest primes of exactly `bits` bits.
pub fn lane_primes(bits: u32, count: usize) -> Vec<u64> {
    primes_congruent_one(bits, 2, count, &[])
}

/// Signed bits representable modulo the product of `moduli`.
pub fn capacity_bits(moduli: &[u64]) -> u32 {
    let product: BigUint = moduli.iter().map(|&t| BigUint::from(t)).product();
    (product.bits() - 1) as u32
}

#[derive(Debug, Clone)]
pub struct LaneSet {
    ring: Arc<RingContext>,
    lanes: Vec<Context>,
    product: BigUint,
    // Π / t_i and its inverse mod t_i, per lane.
    cofactors: Vec<(BigUint, u64)>,
}

impl LaneSet {
    pub fn new(ring: Arc<RingContext>, moduli: &[u64]) -> Result<Self, EncError> {
        if moduli.is_empty() {
            return Err(EncError::Shape("at least one plaintext lane is required".into()));
        }
        let lanes = moduli
            .iter()
            .map(|&t| Context::with_ring(ring.clone(), t))
            .collect::<Result<Vec<_>, _>>()?;
        let product: BigUint = moduli.iter().map(|&t| BigUint::from(t)).product();
        let mut cofactors = Vec::with_capacity(moduli.len());
        for (ctx, &t) in lanes.iter().zip(moduli) {
            let co = &product / t;
            let r = u64::try_from(&co % t).expect("below t");
            let inv = ctx.plain().inv(r).ok_or_else(|| {
                EncError::Shape(format!("plaintext modulus {t} shares a factor with another lane"))
            })?;
            cofactors.push((co, inv));
        }
        Ok(Self {
            ring,
            lanes,
            product,
            cofactors,
        })
    }

    /// `count` lanes of `bits`-bit primes.
    pub fn with_bits(ring: Arc<RingContext>, bits: u32, count: usize) -> Result<Self, EncError> {
        Self::new(ring, &lane_primes(bits, count))
    }

    /// The fewest `bits`-bit lanes whose capacity covers `required_bits`.
    pub fn covering(ring: Arc<RingContext>, bits: u32, required_bits: u32) -> Result<Self, EncError> {
        let mut count = (required_bits as usize).div_ceil(bits as usize).max(1);
        loop {
            let set = Self::with_bits(ring.clone(), bits, count)?;
            if set.capacity_bits() >= required_bits {
                return Ok(set);
            }
            count += 1;
        }
    }

    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn contexts(&self) -> &[Context] {
        &self.lanes
    }

    pub fn context(&self, lane: usize) -> &Context {
        &self.lanes[lane]
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn moduli(&self) -> Vec<u64> {
        self.lanes.iter().map(Context::plain_modulus).collect()
    }

    pub fn lane_of(&self, plain_modulus: u64) -> Option<usize> {
        self.lanes.iter().position(|c| c.plain_modulus() == plain_modulus)
    }

    /// Signed bits representable: every `|v| < 2^(bits - 1)` is recovered.
    pub fn capacity_bits(&self) -> u32 {
        (self.product.bits() - 1) as u32
    }

    /// Like [`LaneSet::covering`] but refuses more than `max_lanes` lanes.
    pub fn covering_at_most(
        ring: Arc<RingContext>,
        bits: u32,
        required_bits: u32,
        max_lanes: usize,
    ) -> Result<Self, EncError> {
        let set = Self::covering(ring, bits, required_bits)?;
        if set.len() > max_lanes {
            return Err(EncError::Headroom {
                layer: "lane allocation".into(),
                required_bits,
                available_bits: capacity_bits(&lane_primes(bits, max_lanes)),
            });
        }
        Ok(set)
    }

    /// `v mod t` for lane `lane`, as a centered residue.
    pub fn residue(&self, lane: usize, v: &BigInt) -> i64 {
        super::centered_residue(&self.lanes[lane], v)
    }

    /// The centered integer with the given residues, one per lane.
    pub fn reconstruct(&self, residues: &[u64]) -> Result<BigInt, EncError> {
        if residues.len() != self.lanes.len() {
            return Err(EncError::Shape(format!(
                "expected {} residues, got {}",
                self.lanes.len(),
                residues.len()
            )));
        }
        let mut acc = BigUint::default();
        for ((ctx, (co, inv)), &r) in self.lanes.iter().zip(&self.cofactors).zip(residues) {
            let m = ctx.plain();
            acc += co * m.mul(m.reduce(r), *inv);
        }
        acc %= &self.product;
        let half = &self.product >> 1;
        Ok(if acc > half {
            BigInt::from(acc) - BigInt::from(self.product.clone())
        } else {
            BigInt::from(acc)
        })
    }
}
