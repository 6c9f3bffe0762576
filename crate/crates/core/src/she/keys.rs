//! Key generation and noise sampling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::context::{Context, RingContext, RELIN_BASE_BITS};
use super::rns::{RnsBasis, RnsPoly};

/// Centered-binomial parameter; standard deviation `sqrt(21/2) ≈ 3.24`.
pub const ERROR_ETA: u32 = 21;

/// Ternary secret `s`, kept in coefficient and NTT form.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) ring_id: [u8; 32],
    pub(crate) coeffs: Vec<i8>,
    pub(crate) ntt: RnsPoly,
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SecretKey").finish_non_exhaustive()
    }
}

/// `(p0, p1) = (-(a·s + e), a)`, stored in the NTT domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) ring_id: [u8; 32],
    pub(crate) p0: RnsPoly,
    pub(crate) p1: RnsPoly,
}

/// Pairs `(-a_i·s + e_i + w^i·s^2, a_i)` for `w = 2^16`, NTT domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelinKey {
    pub(crate) ring_id: [u8; 32],
    pub(crate) base_bits: u32,
    pub(crate) pairs: Vec<(RnsPoly, RnsPoly)>,
}

#[derive(Debug, Clone)]
pub struct KeySet {
    pub public: PublicKey,
    pub secret: SecretKey,
    pub relin: RelinKey,
}

impl SecretKey {
    pub fn ring_id(&self) -> [u8; 32] {
        self.ring_id
    }

    pub fn coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    pub(crate) fn from_coeffs(ring: &RingContext, coeffs: Vec<i8>) -> Self {
        let wide: Vec<i64> = coeffs.iter().map(|&c| c as i64).collect();
        let mut ntt = ring.q().from_signed(&wide);
        ring.q().ntt_forward(&mut ntt);
        Self {
            ring_id: ring.ring_id(),
            coeffs,
            ntt,
        }
    }
}

impl PublicKey {
    pub fn ring_id(&self) -> [u8; 32] {
        self.ring_id
    }
}

impl RelinKey {
    pub fn ring_id(&self) -> [u8; 32] {
        self.ring_id
    }

    pub fn base_bits(&self) -> u32 {
        self.base_bits
    }

    pub fn count(&self) -> usize {
        self.pairs.len()
    }
}

pub(crate) fn sample_ternary<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1i64..=1)).collect()
}

pub(crate) fn sample_error<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    let mask = (1u64 << ERROR_ETA) - 1;
    (0..n)
        .map(|_| {
            let bits = rng.next_u64();
            (bits & mask).count_ones() as i64 - ((bits >> ERROR_ETA) & mask).count_ones() as i64
        })
        .collect()
}

pub(crate) fn sample_uniform<R: RngCore>(rng: &mut R, basis: &RnsBasis) -> RnsPoly {
    let mut out = basis.zero();
    for (r, m) in out.residues_mut().zip(basis.moduli()) {
        for x in r.iter_mut() {
            *x = rng.gen_range(0..m.value());
        }
    }
    out
}

/// Generates a key set for `ctx`'s ring. Keys do not depend on `t`.
pub fn keygen(ctx: &Context, seed: Option<u64>) -> KeySet {
    keygen_ring(ctx.ring(), seed)
}

pub fn keygen_ring(ring: &RingContext, seed: Option<u64>) -> KeySet {
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let q = ring.q();
    let n = ring.degree();
    let s: Vec<i8> = sample_ternary(&mut rng, n).into_iter().map(|c| c as i8).collect();
    let secret = SecretKey::from_coeffs(ring, s);

    let signed_ntt = |rng: &mut ChaCha20Rng| {
        let mut e = q.from_signed(&sample_error(rng, n));
        q.ntt_forward(&mut e);
        e
    };

    // a is sampled directly in the NTT domain, which is also uniform.
    let a = sample_uniform(&mut rng, q);
    let e = signed_ntt(&mut rng);
    let mut p0 = q.mul_pointwise(&a, &secret.ntt);
    q.add_assign(&mut p0, &e);
    q.neg_assign(&mut p0);
    let public = PublicKey {
        ring_id: ring.ring_id(),
        p0,
        p1: a,
    };

    let s2 = q.mul_pointwise(&secret.ntt, &secret.ntt);
    let mut pairs = Vec::with_capacity(ring.relin_count());
    for i in 0..ring.relin_count() {
        let a = sample_uniform(&mut rng, q);
        let e = signed_ntt(&mut rng);
        let mut b = q.mul_pointwise(&a, &secret.ntt);
        q.neg_assign(&mut b);
        q.add_assign(&mut b, &e);
        let mut w_s2 = s2.clone();
        for (r, m) in w_s2.residues_mut().zip(q.moduli()) {
            let w = m.pow(2, (RELIN_BASE_BITS as u64) * i as u64);
            let ws = m.shoup(w);
            for x in r.iter_mut() {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
        q.add_assign(&mut b, &w_s2);
        pairs.push((b, a));
    }
    KeySet {
        public,
        secret,
        relin: RelinKey {
            ring_id: ring.ring_id(),
            base_bits: RELIN_BASE_BITS,
            pairs,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::EncryptionParams;
    use super::*;

    #[test]
    fn error_distribution_moments() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let e = sample_error(&mut rng, 200_000);
        let mean = e.iter().sum::<i64>() as f64 / e.len() as f64;
        let var = e.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / e.len() as f64;
        assert!(mean.abs() < 0.05);
        assert!((var.sqrt() - 3.24).abs() < 0.05, "sigma {}", var.sqrt());
        assert!(e.iter().all(|x| x.abs() <= ERROR_ETA as i64));
    }

    #[test]
    fn public_key_hides_small_error() {
        let ctx = Context::new(&EncryptionParams::preset(2048).unwrap()).unwrap();
        let keys = keygen(&ctx, Some(11));
        let q = ctx.ring().q();
        // p0 + p1·s = -e must be small.
        let mut v = q.mul_pointwise(&keys.public.p1, &keys.secret.ntt);
        q.add_assign(&mut v, &keys.public.p0);
        q.ntt_inverse(&mut v);
        for (r, m) in v.residues().zip(q.moduli()) {
            assert!(r.iter().all(|&x| m.center(x).abs() <= ERROR_ETA as i64));
        }
    }

    #[test]
    fn seeded_keygen_is_deterministic() {
        let ctx = Context::new(&EncryptionParams::preset(2048).unwrap()).unwrap();
        let a = keygen(&ctx, Some(5));
        let b = keygen(&ctx, Some(5));
        assert_eq!(a.secret, b.secret);
        assert_eq!(a.public, b.public);
        assert_eq!(a.relin, b.relin);
        assert_ne!(keygen(&ctx, Some(6)).public, a.public);
        assert_eq!(a.relin.count(), 4); // ceil(54 / 16)
    }
}
