//! Precomputed ring and plaintext-modulus state.

use std::sync::Arc;

use num_bigint::BigUint;

use super::modulus::{primes_congruent_one, Modulus};
use super::params::EncryptionParams;
use super::rns::{big_mod, ConversionTable, RnsBasis, Scaler};
use super::SheError;

/// Relinearization digit width in bits.
pub const RELIN_BASE_BITS: u32 = 16;
/// Width of the auxiliary primes used during ciphertext multiplication.
const AUX_PRIME_BITS: u32 = 60;
/// Extra bits the auxiliary basis carries beyond `log2(q·n)`.
const AUX_MARGIN_BITS: u64 = 24;

/// Everything that depends on `n` and `q` but not on `t`. Keys live here.
#[derive(Debug)]
pub struct RingContext {
    n: usize,
    q: RnsBasis,
    p: RnsBasis,
    joint: RnsBasis,
    q_to_p: ConversionTable,
    ring_id: [u8; 32],
    relin_count: usize,
}

impl RingContext {
    pub fn new(params: &EncryptionParams) -> Result<Self, SheError> {
        params.validate()?;
        let n = params.poly_degree();
        let primes = params.coeff_primes();
        let q = RnsBasis::new(n, primes)
            .ok_or_else(|| SheError::InvalidParams("coeff_modulus is not NTT friendly".into()))?;
        let q_bits = q.product().bits();
        let need = q_bits + n.trailing_zeros() as u64 + AUX_MARGIN_BITS;
        let aux_count = need.div_ceil(AUX_PRIME_BITS as u64 - 1) as usize;
        let aux = primes_congruent_one(AUX_PRIME_BITS, 2 * n as u64, aux_count, primes);
        let p = RnsBasis::new(n, &aux).expect("auxiliary primes are NTT friendly");
        let joint_primes: Vec<u64> = primes.iter().chain(&aux).copied().collect();
        let joint = RnsBasis::new(n, &joint_primes).expect("joint basis");
        let q_to_p = ConversionTable::new(&q, &p);
        let relin_count = (q_bits as usize).div_ceil(RELIN_BASE_BITS as usize);
        Ok(Self {
            n,
            q,
            p,
            joint,
            q_to_p,
            ring_id: params.ring_id(),
            relin_count,
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &RnsBasis {
        &self.q
    }

    pub fn p(&self) -> &RnsBasis {
        &self.p
    }

    pub fn joint(&self) -> &RnsBasis {
        &self.joint
    }

    pub fn q_to_p(&self) -> &ConversionTable {
        &self.q_to_p
    }

    pub fn ring_id(&self) -> [u8; 32] {
        self.ring_id
    }

    /// Number of base-`2^16` digits, `⌈log_w q⌉`.
    pub fn relin_count(&self) -> usize {
        self.relin_count
    }

    pub fn coeff_modulus(&self) -> &BigUint {
        self.q.product()
    }
}

/// A ring context specialised to one plaintext modulus.
#[derive(Debug, Clone)]
pub struct Context {
    params: EncryptionParams,
    params_id: [u8; 32],
    ring: Arc<RingContext>,
    plain: Modulus,
    // floor(q / t) mod q_i.
    delta: Vec<u64>,
    q_mod_t: u64,
    scaler: Arc<Scaler>,
}

impl Context {
    pub fn new(params: &EncryptionParams) -> Result<Self, SheError> {
        let ring = Arc::new(RingContext::new(params)?);
        Self::with_ring(ring, params.plain_modulus())
    }

    /// Shares `ring` (and therefore keys) with a different plaintext modulus.
    pub fn with_ring(ring: Arc<RingContext>, plain_modulus: u64) -> Result<Self, SheError> {
        let primes: Vec<u64> = ring.q.moduli().iter().map(|m| m.value()).collect();
        let params = EncryptionParams::new(ring.n, primes, plain_modulus);
        params.validate()?;
        let q_mod_t = big_mod(ring.q.product(), plain_modulus);
        let delta_big = ring.q.product() / plain_modulus;
        let delta = ring.q.moduli().iter().map(|m| big_mod(&delta_big, m.value())).collect();
        let scaler = Arc::new(Scaler::new(&ring.q, &ring.p, plain_modulus));
        Ok(Self {
            params_id: params.params_id(),
            params,
            ring,
            plain: Modulus::new(plain_modulus),
            delta,
            q_mod_t,
            scaler,
        })
    }

    pub fn params(&self) -> &EncryptionParams {
        &self.params
    }

    pub fn params_id(&self) -> [u8; 32] {
        self.params_id
    }

    pub fn ring(&self) -> &Arc<RingContext> {
        &self.ring
    }

    pub fn degree(&self) -> usize {
        self.ring.n
    }

    pub fn plain_modulus(&self) -> u64 {
        self.plain.value()
    }

    pub fn plain(&self) -> &Modulus {
        &self.plain
    }

    pub(crate) fn delta(&self) -> &[u64] {
        &self.delta
    }

    pub(crate) fn q_mod_t(&self) -> u64 {
        self.q_mod_t
    }

    pub(crate) fn scaler(&self) -> &Scaler {
        &self.scaler
    }
}
