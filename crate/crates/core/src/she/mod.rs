//! A Fan–Vercauteren somewhat-homomorphic encryption engine.
//!
//! Ring arithmetic is done per prime in residue-number-system form with a
//! negacyclic NTT. Ciphertext multiplication extends into an auxiliary basis,
//! forms the tensor product exactly and scales back by `t/q`. Relinearization
//! uses base-`2^16` digits.
//!
//! ```
//! use litd::she::{keygen, Context, EncryptionParams};
//! use rand::SeedableRng;
//!
//! let ctx = Context::new(&EncryptionParams::preset(2048).unwrap()).unwrap();
//! let keys = keygen(&ctx, Some(7));
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
//! let a = ctx.encrypt(&keys.public, &ctx.encode_fixed(1.5, 4).unwrap(), &mut rng).unwrap();
//! let b = ctx.encrypt(&keys.public, &ctx.encode_fixed(-2.0, 4).unwrap(), &mut rng).unwrap();
//! let sum = ctx.add(&a, &b).unwrap();
//! assert_eq!(ctx.decrypt(&keys.secret, &sum).unwrap().decode_fixed(), -0.5);
//! ```

mod context;
mod keys;
pub mod modulus;
pub mod ntt;
mod ops;
mod params;
pub mod rns;
pub mod serial;

use thiserror::Error;

pub use context::{Context, RingContext, RELIN_BASE_BITS};
pub use keys::{keygen, keygen_ring, KeySet, PublicKey, RelinKey, SecretKey};
pub use ops::Encryptor;
pub use params::{
    coeff_primes_for_bits, default_plain_modulus, preset_coeff_bits, EncryptionParams,
    SecurityLevel, DEFAULT_PLAIN_BITS, MAX_POLY_DEGREE, MIN_POLY_DEGREE,
};
pub use rns::RnsPoly;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operands belong to different parameter sets")]
    ParamsMismatch,
    #[error("key belongs to a different ring")]
    KeyMismatch,
    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: i32, right: i32 },
    #[error("noise budget exhausted ({budget} bits)")]
    BudgetExhausted { budget: i64 },
    #[error("value {value} at scale 2^{scale_exp} exceeds plaintext headroom")]
    EncodeOverflow { value: f64, scale_exp: i32 },
    #[error("multiplication by an all-zero plaintext")]
    ZeroPlaintext,
    #[error("unsupported ciphertext size {0}")]
    ComponentCount(usize),
    #[error("malformed object: {0}")]
    Format(String),
}

/// A ring element mod `t` with a base-2 fixed-point exponent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext {
    coeffs: Vec<u64>,
    scale_exp: i32,
    plain_modulus: u64,
}

impl Plaintext {
    /// Builds a plaintext from coefficients already reduced mod `t`.
    pub fn new(coeffs: Vec<u64>, scale_exp: i32, plain_modulus: u64) -> Result<Self, SheError> {
        if let Some(c) = coeffs.iter().find(|&&c| c >= plain_modulus) {
            return Err(SheError::Format(format!("coefficient {c} not below t = {plain_modulus}")));
        }
        Ok(Self {
            coeffs,
            scale_exp,
            plain_modulus,
        })
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn plain_modulus(&self) -> u64 {
        self.plain_modulus
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Only the constant coefficient may be non-zero.
    pub fn is_scalar(&self) -> bool {
        self.coeffs.iter().skip(1).all(|&c| c == 0)
    }

    /// Constant coefficient as a centered residue.
    pub fn constant_centered(&self) -> i64 {
        let c = self.coeffs.first().copied().unwrap_or(0);
        if c > self.plain_modulus / 2 {
            c as i64 - self.plain_modulus as i64
        } else {
            c as i64
        }
    }

    /// Constant coefficient divided by `2^scale_exp`.
    pub fn decode_fixed(&self) -> f64 {
        self.constant_centered() as f64 * 2f64.powi(-self.scale_exp)
    }
}

/// Two or three ring elements mod `q` tagged with a scale and a parameter hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    components: Vec<RnsPoly>,
    scale_exp: i32,
    params_id: [u8; 32],
}

impl Ciphertext {
    pub(crate) fn from_parts(components: Vec<RnsPoly>, scale_exp: i32, params_id: [u8; 32]) -> Self {
        Self {
            components,
            scale_exp,
            params_id,
        }
    }

    pub fn components(&self) -> &[RnsPoly] {
        &self.components
    }

    pub fn size(&self) -> usize {
        self.components.len()
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn params_id(&self) -> [u8; 32] {
        self.params_id
    }

    /// Reinterprets the fixed-point exponent without touching the payload.
    pub fn with_scale_exp(mut self, scale_exp: i32) -> Self {
        self.scale_exp = scale_exp;
        self
    }
}
