//! Negacyclic number-theoretic transform over `Z_q[X]/(X^n + 1)`.

use super::modulus::Modulus;

/// Precomputed twiddle factors for one prime and one ring degree.
#[derive(Debug, Clone)]
pub struct NttTable {
    n: usize,
    modulus: Modulus,
    // psi^bitrev(k) and its Shoup companion.
    roots: Vec<u64>,
    roots_shoup: Vec<u64>,
    // psi^-bitrev(k) and its Shoup companion.
    inv_roots: Vec<u64>,
    inv_roots_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Smallest-generator primitive `2n`-th root of unity modulo a prime `q ≡ 1 mod 2n`.
pub fn primitive_root_2n(modulus: &Modulus, n: usize) -> Option<u64> {
    let q = modulus.value();
    let order = 2 * n as u64;
    if (q - 1) % order != 0 {
        return None;
    }
    let cofactor = (q - 1) / order;
    (2..q.min(1 << 20)).find_map(|g| {
        let psi = modulus.pow(g, cofactor);
        (modulus.pow(psi, n as u64) == q - 1).then_some(psi)
    })
}

impl NttTable {
    pub fn new(n: usize, modulus: Modulus) -> Option<Self> {
        if !n.is_power_of_two() || n < 2 {
            return None;
        }
        let psi = primitive_root_2n(&modulus, n)?;
        let psi_inv = modulus.inv(psi)?;
        let bits = n.trailing_zeros();
        let mut pow = vec![1u64; n];
        let mut inv_pow = vec![1u64; n];
        for i in 1..n {
            pow[i] = modulus.mul(pow[i - 1], psi);
            inv_pow[i] = modulus.mul(inv_pow[i - 1], psi_inv);
        }
        let roots: Vec<u64> = (0..n).map(|k| pow[bit_reverse(k, bits)]).collect();
        let inv_roots: Vec<u64> = (0..n).map(|k| inv_pow[bit_reverse(k, bits)]).collect();
        let roots_shoup = roots.iter().map(|&w| modulus.shoup(w)).collect();
        let inv_roots_shoup = inv_roots.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(n as u64)?;
        Some(Self {
            n,
            modulus,
            roots,
            roots_shoup,
            inv_roots,
            inv_roots_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// In-place forward transform. Input in natural order with entries in
    /// `[0, q)`, output in bit-reversed order with entries in `[0, q)`.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let mut t = self.n;
        let mut m = 1;
        // Harvey butterflies keep values in [0, 4q).
        while m < self.n {
            t >>= 1;
            for i in 0..m {
                let w = self.roots[m + i];
                let ws = self.roots_shoup[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = self.modulus.mul_shoup_lazy(*y, w, ws);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    /// In-place inverse transform, bit-reversed input to natural-order output.
    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let mut t = 1;
        let mut m = self.n;
        // Gentleman–Sande butterflies keep values in [0, 2q).
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.inv_roots[h + i];
                let ws = self.inv_roots_shoup[h + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = self.modulus.mul_shoup_lazy(u + two_q - v, w, ws);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.modulus.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// Schoolbook negacyclic product, `O(n^2)`.
pub fn negacyclic_mul_naive(a: &[u64], b: &[u64], modulus: &Modulus) -> Vec<u64> {
    let n = a.len();
    assert_eq!(n, b.len());
    let mut out = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            let p = modulus.mul(a[i], b[j]);
            let k = i + j;
            if k < n {
                out[k] = modulus.add(out[k], p);
            } else {
                out[k - n] = modulus.sub(out[k - n], p);
            }
        }
    }
    out
}
