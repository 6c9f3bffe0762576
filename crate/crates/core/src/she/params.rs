//! Encryption parameters, presets and validation.

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use super::modulus::{is_prime, primes_congruent_one, MAX_MODULUS_BITS};
use super::SheError;

pub const MIN_POLY_DEGREE: usize = 1024;
pub const MAX_POLY_DEGREE: usize = 16384;
/// Bits per prime when a preset coefficient modulus is split into primes.
pub const PRESET_PRIME_BITS: u32 = 55;
/// Bit size of the default plaintext modulus.
pub const DEFAULT_PLAIN_BITS: u32 = 38;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecurityLevel {
    Bits128,
}

impl SecurityLevel {
    pub fn bits(self) -> u16 {
        match self {
            SecurityLevel::Bits128 => 128,
        }
    }

    pub fn from_bits(bits: u16) -> Option<Self> {
        (bits == 128).then_some(SecurityLevel::Bits128)
    }
}

/// Ring degree `n`, coefficient modulus `q` (as a product of primes) and
/// plaintext modulus `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncryptionParams {
    poly_degree: usize,
    coeff_primes: Vec<u64>,
    plain_modulus: u64,
    security: SecurityLevel,
}

/// Total coefficient-modulus bits of the 128-bit presets.
pub fn preset_coeff_bits(poly_degree: usize) -> Option<u32> {
    match poly_degree {
        1024 => Some(27),
        2048 => Some(54),
        4096 => Some(109),
        8192 => Some(218),
        _ => None,
    }
}

/// Splits `total` bits into as few primes as possible, sizes as even as possible,
/// larger sizes first.
fn split_bits(total: u32) -> Vec<u32> {
    let count = total.div_ceil(PRESET_PRIME_BITS);
    let base = total / count;
    let extra = total % count;
    (0..count).map(|i| base + u32::from(i < extra)).collect()
}

/// Primes `≡ 1 mod 2n` whose product has exactly `total` bits.
pub fn coeff_primes_for_bits(poly_degree: usize, total: u32) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::new();
    for bits in split_bits(total) {
        let p = primes_congruent_one(bits, 2 * poly_degree as u64, 1, &primes)[0];
        primes.push(p);
    }
    primes
}

/// The default plaintext modulus for a ring degree: a 38-bit prime `≡ 1 mod 2n`
/// from `n = 4096` up. The two smallest rings cannot hold a 38-bit `t`, so
/// they get 257 and 12289.
pub fn default_plain_modulus(poly_degree: usize) -> u64 {
    match poly_degree {
        ..=1024 => 257,
        2048 => 12289,
        _ => primes_congruent_one(DEFAULT_PLAIN_BITS, 2 * poly_degree as u64, 1, &[])[0],
    }
}

impl EncryptionParams {
    /// Unchecked constructor; validation happens in [`EncryptionParams::validate`].
    pub fn new(poly_degree: usize, coeff_primes: Vec<u64>, plain_modulus: u64) -> Self {
        Self {
            poly_degree,
            coeff_primes,
            plain_modulus,
            security: SecurityLevel::Bits128,
        }
    }

    /// The 128-bit preset for `poly_degree` with the default plaintext modulus.
    pub fn preset(poly_degree: usize) -> Result<Self, SheError> {
        check_degree(poly_degree)?;
        let bits = preset_coeff_bits(poly_degree).ok_or_else(|| {
            SheError::InvalidParams(format!("no 128-bit preset for poly_degree {poly_degree}"))
        })?;
        let params = Self::new(
            poly_degree,
            coeff_primes_for_bits(poly_degree, bits),
            default_plain_modulus(poly_degree),
        );
        params.validate()?;
        Ok(params)
    }

    /// Preset ring with a placeholder plaintext modulus of 2, unvalidated.
    pub fn preset_ring(poly_degree: usize) -> Self {
        let bits = preset_coeff_bits(poly_degree).expect("preset degree");
        Self::new(poly_degree, coeff_primes_for_bits(poly_degree, bits), 2)
    }

    pub fn with_plain_modulus(&self, plain_modulus: u64) -> Self {
        Self {
            plain_modulus,
            ..self.clone()
        }
    }

    pub fn poly_degree(&self) -> usize {
        self.poly_degree
    }

    pub fn coeff_primes(&self) -> &[u64] {
        &self.coeff_primes
    }

    pub fn coeff_modulus(&self) -> BigUint {
        self.coeff_primes.iter().map(|&p| BigUint::from(p)).product()
    }

    pub fn coeff_modulus_bits(&self) -> u64 {
        self.coeff_modulus().bits()
    }

    pub fn plain_modulus(&self) -> u64 {
        self.plain_modulus
    }

    pub fn security_level(&self) -> SecurityLevel {
        self.security
    }

    pub fn validate(&self) -> Result<(), SheError> {
        check_degree(self.poly_degree)?;
        let bad = |msg: String| Err(SheError::InvalidParams(msg));
        if self.coeff_primes.is_empty() {
            return bad("coeff_modulus must have at least one prime".into());
        }
        let step = 2 * self.poly_degree as u64;
        for (i, &p) in self.coeff_primes.iter().enumerate() {
            if p % 2 == 0 {
                return bad("coeff_modulus must be odd".into());
            }
            if p >= 1 << MAX_MODULUS_BITS {
                return bad(format!("coeff_modulus prime {p} exceeds {MAX_MODULUS_BITS} bits"));
            }
            if !is_prime(p) {
                return bad(format!("coeff_modulus factor {p} is not prime"));
            }
            if p % step != 1 {
                return bad(format!("coeff_modulus prime {p} is not 1 mod 2n"));
            }
            if self.coeff_primes[..i].contains(&p) {
                return bad(format!("coeff_modulus prime {p} repeated"));
            }
        }
        if self.coeff_modulus_bits() > 900 {
            return bad("coeff_modulus wider than 900 bits".into());
        }
        if self.plain_modulus < 2 {
            return bad("plain_modulus must be at least 2".into());
        }
        if BigUint::from(self.plain_modulus) >= self.coeff_modulus() {
            return bad("plain_modulus must be smaller than coeff_modulus".into());
        }
        if self.plain_modulus >= 1 << MAX_MODULUS_BITS {
            return bad(format!("plain_modulus exceeds {MAX_MODULUS_BITS} bits"));
        }
        Ok(())
    }

    /// Canonical byte encoding, also the body of the serialized parameter object.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = self.ring_bytes();
        out.extend_from_slice(&self.plain_modulus.to_le_bytes());
        out
    }

    fn ring_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.poly_degree as u32).to_le_bytes());
        out.extend_from_slice(&self.security.bits().to_le_bytes());
        out.push(self.coeff_primes.len() as u8);
        for p in &self.coeff_primes {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// SHA-256 of the canonical encoding; binds ciphertexts and plaintexts.
    pub fn params_id(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_bytes()).into()
    }

    /// SHA-256 of the ring part only; binds keys, which do not depend on `t`.
    pub fn ring_id(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"ring");
        h.update(self.ring_bytes());
        h.finalize().into()
    }
}

fn check_degree(n: usize) -> Result<(), SheError> {
    if !n.is_power_of_two() {
        return Err(SheError::InvalidParams("poly_degree must be a power of two".into()));
    }
    if !(MIN_POLY_DEGREE..=MAX_POLY_DEGREE).contains(&n) {
        return Err(SheError::InvalidParams(format!(
            "poly_degree must be between {MIN_POLY_DEGREE} and {MAX_POLY_DEGREE}"
        )));
    }
    Ok(())
}
