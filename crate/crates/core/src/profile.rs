//! Named parameter profiles.

use crate::she::{coeff_primes_for_bits, EncryptionParams, SheError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// `n = 4096`, degree-2 activations; small enough for CI.
    Ci4096,
    /// `n = 8192` with the 38-bit default plaintext modulus.
    Default8192,
    /// `n = 1024` with a 280-bit modulus. Far below any security level; for
    /// tests and demos of the full pipeline at small scale exponents.
    Toy1024,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Ci4096, Profile::Default8192, Profile::Toy1024];
    /// Profiles that target 128-bit security.
    pub const SECURE: [Profile; 2] = [Profile::Ci4096, Profile::Default8192];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Ci4096 => "ci-4096",
            Profile::Default8192 => "default-8192",
            Profile::Toy1024 => "toy-1024",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Reads `LITD_PROFILE`, falling back to `default-8192`.
    pub fn from_env() -> Result<Self, SheError> {
        match std::env::var("LITD_PROFILE") {
            Ok(name) => Self::from_name(&name)
                .ok_or_else(|| SheError::InvalidParams(format!("unknown profile {name:?}"))),
            Err(_) => Ok(Profile::Default8192),
        }
    }

    /// The profile whose ring is the ring of `params`.
    pub fn matching(params: &EncryptionParams) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.params().ring_id() == params.ring_id())
    }

    pub fn poly_degree(self) -> usize {
        match self {
            Profile::Ci4096 => 4096,
            Profile::Default8192 => 8192,
            Profile::Toy1024 => 1024,
        }
    }

    /// Plaintext modulus for general integer circuits. A 38-bit `t` leaves
    /// about 32 bits of fresh budget at `n = 4096`, which no multiply survives,
    /// so the small profile uses 257.
    pub fn plain_modulus(self) -> u64 {
        match self {
            Profile::Ci4096 | Profile::Toy1024 => 257,
            Profile::Default8192 => crate::she::default_plain_modulus(8192),
        }
    }

    pub fn params(self) -> EncryptionParams {
        let n = self.poly_degree();
        let ring = match self {
            Profile::Toy1024 => EncryptionParams::new(n, coeff_primes_for_bits(n, 280), 2),
            _ => EncryptionParams::preset_ring(n),
        };
        ring.with_plain_modulus(self.plain_modulus())
    }

    pub fn is_secure(self) -> bool {
        self != Profile::Toy1024
    }

    /// Bits per CRT plaintext lane in encrypted inference. At `n = 8192` a
    /// 25-bit lane keeps about 15 bits of budget after the last layer.
    pub fn lane_bits(self) -> u32 {
        match self {
            Profile::Ci4096 => 20,
            Profile::Default8192 => 25,
            Profile::Toy1024 => 34,
        }
    }

    pub fn max_lanes(self) -> usize {
        match self {
            Profile::Ci4096 => 17,
            Profile::Default8192 => 14,
            Profile::Toy1024 => 5,
        }
    }

    /// Signed plaintext bits available to encrypted inference with every lane in use.
    pub fn inference_capacity_bits(self) -> u32 {
        crate::enc_infer::capacity_bits(&crate::enc_infer::lane_primes(self.lane_bits(), self.max_lanes()))
    }

    /// Default `(input, weight)` scale exponents. The toy ring only holds the
    /// logits at `(4, 4)`.
    pub fn inference_scales(self) -> (i32, i32) {
        match self {
            Profile::Toy1024 => (4, 4),
            _ => (8, 8),
        }
    }

    /// Activation polynomial degree used for encrypted inference.
    pub fn activation_degree(self) -> usize {
        2
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Profile {
    type Err = SheError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s).ok_or_else(|| SheError::InvalidParams(format!("unknown profile {s:?}")))
    }
}
