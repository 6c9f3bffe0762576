//! Word-sized prime moduli with Barrett and Shoup reduction.

/// A prime modulus `q < 2^61` with precomputed Barrett constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    // floor(2^128 / q), low and high words.
    ratio: [u64; 2],
}

pub const MAX_MODULUS_BITS: u32 = 61;

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value >= 2 && value < (1 << MAX_MODULUS_BITS), "modulus out of range");
        let ratio = u128::MAX / value as u128;
        Self {
            value,
            ratio: [ratio as u64, (ratio >> 64) as u64],
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Barrett reduction of a full 128-bit value.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let (x0, x1) = (x as u64, (x >> 64) as u64);
        let [r0, r1] = self.ratio;
        let carry = ((x0 as u128 * r0 as u128) >> 64) as u64;
        let t = x0 as u128 * r1 as u128;
        let (t1, c1) = (t as u64).overflowing_add(carry);
        let t3 = ((t >> 64) as u64).wrapping_add(c1 as u64);
        let t = x1 as u128 * r0 as u128;
        let (_, c2) = t1.overflowing_add(t as u64);
        let carry = ((t >> 64) as u64).wrapping_add(c2 as u64);
        let quot = x1
            .wrapping_mul(r1)
            .wrapping_add(t3)
            .wrapping_add(carry);
        let r = x0.wrapping_sub(quot.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        if a < self.value {
            a
        } else {
            self.reduce_u128(a as u128)
        }
    }

    /// Reduces a signed value into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, a: i64) -> u64 {
        let r = self.reduce(a.unsigned_abs());
        if a < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// `floor(w · 2^64 / q)` for use with [`Modulus::mul_shoup`].
    pub fn shoup(&self, w: u64) -> u64 {
        debug_assert!(w < self.value);
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a · w mod q` given `w_shoup = shoup(w)`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let r = self.mul_shoup_lazy(a, w, w_shoup);
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    /// Like [`Modulus::mul_shoup`] but leaves the result in `[0, 2q)`.
    #[inline]
    pub fn mul_shoup_lazy(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let quot = ((a as u128 * w_shoup as u128) >> 64) as u64;
        a.wrapping_mul(w).wrapping_sub(quot.wrapping_mul(self.value))
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.value;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse modulo a prime.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = self.reduce(a);
        (a != 0).then(|| self.pow(a, self.value - 2))
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes with exactly `bits` bits that are `≡ 1 mod step`,
/// skipping anything in `exclude`.
pub fn primes_congruent_one(bits: u32, step: u64, count: usize, exclude: &[u64]) -> Vec<u64> {
    assert!((2..=62).contains(&bits));
    let lo = 1u64 << (bits - 1);
    let hi = (1u64 << bits) - 1;
    let mut found = Vec::with_capacity(count);
    // Largest candidate ≤ hi with candidate ≡ 1 (mod step).
    let mut cand = hi - (hi - 1) % step;
    while found.len() < count {
        assert!(cand > lo, "ran out of {bits}-bit primes ≡ 1 mod {step}");
        if is_prime(cand) && !exclude.contains(&cand) {
            found.push(cand);
        }
        cand -= step;
    }
    found
}
