//! Residue-number-system polynomials, base conversion and exact scaling.

use num_bigint::BigUint;

use super::modulus::Modulus;
use super::ntt::NttTable;

/// Enough 64-bit limbs for any supported coefficient modulus plus headroom.
pub const MAX_LIMBS: usize = 16;

/// A polynomial stored as one residue vector per modulus, modulus-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPoly {
    n: usize,
    data: Vec<u64>,
}

impl RnsPoly {
    pub fn zero(n: usize, moduli: usize) -> Self {
        Self {
            n,
            data: vec![0; n * moduli],
        }
    }

    pub fn from_data(n: usize, data: Vec<u64>) -> Self {
        assert_eq!(data.len() % n, 0);
        Self { n, data }
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn moduli(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn residue(&self, i: usize) -> &[u64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn residue_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn residues(&self) -> std::slice::ChunksExact<'_, u64> {
        self.data.chunks_exact(self.n)
    }

    pub fn residues_mut(&mut self) -> std::slice::ChunksExactMut<'_, u64> {
        self.data.chunks_exact_mut(self.n)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }
}

/// A set of NTT-friendly primes with CRT constants.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    n: usize,
    moduli: Vec<Modulus>,
    tables: Vec<NttTable>,
    product: BigUint,
    // (B / b_i)^-1 mod b_i and Shoup companions.
    hat_inv: Vec<u64>,
    hat_inv_shoup: Vec<u64>,
    inv_f64: Vec<f64>,
    // B / b_i and B as little-endian limbs.
    hat_limbs: Vec<[u64; MAX_LIMBS]>,
    product_limbs: [u64; MAX_LIMBS],
    limbs: usize,
}

fn to_limbs(x: &BigUint) -> [u64; MAX_LIMBS] {
    let digits = x.to_u64_digits();
    assert!(digits.len() < MAX_LIMBS, "modulus too wide");
    let mut out = [0u64; MAX_LIMBS];
    out[..digits.len()].copy_from_slice(&digits);
    out
}

impl RnsBasis {
    pub fn new(n: usize, primes: &[u64]) -> Option<Self> {
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let tables = moduli
            .iter()
            .map(|m| NttTable::new(n, *m))
            .collect::<Option<Vec<_>>>()?;
        let product: BigUint = primes.iter().map(|&p| BigUint::from(p)).product();
        let mut hat_inv = Vec::new();
        let mut hat_limbs = Vec::new();
        for m in &moduli {
            let hat = &product / m.value();
            let hat_mod = (&hat % m.value()).to_u64_digits().first().copied().unwrap_or(0);
            hat_inv.push(m.inv(hat_mod)?);
            hat_limbs.push(to_limbs(&hat));
        }
        let hat_inv_shoup = moduli.iter().zip(&hat_inv).map(|(m, &h)| m.shoup(h)).collect();
        let inv_f64 = primes.iter().map(|&p| 1.0 / p as f64).collect();
        let limbs = (product.bits() as usize).div_ceil(64) + 1;
        Some(Self {
            n,
            product_limbs: to_limbs(&product),
            moduli,
            tables,
            product,
            hat_inv,
            hat_inv_shoup,
            inv_f64,
            hat_limbs,
            limbs,
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn tables(&self) -> &[NttTable] {
        &self.tables
    }

    pub fn product(&self) -> &BigUint {
        &self.product
    }

    pub fn zero(&self) -> RnsPoly {
        RnsPoly::zero(self.n, self.len())
    }

    pub fn ntt_forward(&self, p: &mut RnsPoly) {
        for (r, t) in p.residues_mut().zip(&self.tables) {
            t.forward(r);
        }
    }

    pub fn ntt_inverse(&self, p: &mut RnsPoly) {
        for (r, t) in p.residues_mut().zip(&self.tables) {
            t.inverse(r);
        }
    }

    pub fn add_assign(&self, a: &mut RnsPoly, b: &RnsPoly) {
        for ((ra, rb), m) in a.residues_mut().zip(b.residues()).zip(&self.moduli) {
            for (x, y) in ra.iter_mut().zip(rb) {
                *x = m.add(*x, *y);
            }
        }
    }

    pub fn sub_assign(&self, a: &mut RnsPoly, b: &RnsPoly) {
        for ((ra, rb), m) in a.residues_mut().zip(b.residues()).zip(&self.moduli) {
            for (x, y) in ra.iter_mut().zip(rb) {
                *x = m.sub(*x, *y);
            }
        }
    }

    pub fn neg_assign(&self, a: &mut RnsPoly) {
        for (ra, m) in a.residues_mut().zip(&self.moduli) {
            for x in ra.iter_mut() {
                *x = m.neg(*x);
            }
        }
    }

    /// Pointwise product, both operands in the NTT domain.
    pub fn mul_pointwise(&self, a: &RnsPoly, b: &RnsPoly) -> RnsPoly {
        let mut out = a.clone();
        self.mul_pointwise_assign(&mut out, b);
        out
    }

    pub fn mul_pointwise_assign(&self, a: &mut RnsPoly, b: &RnsPoly) {
        for ((ra, rb), m) in a.residues_mut().zip(b.residues()).zip(&self.moduli) {
            for (x, y) in ra.iter_mut().zip(rb) {
                *x = m.mul(*x, *y);
            }
        }
    }

    /// `a += b ⊙ c` in the NTT domain.
    pub fn mul_add_pointwise(&self, a: &mut RnsPoly, b: &RnsPoly, c: &RnsPoly) {
        for (((ra, rb), rc), m) in a
            .residues_mut()
            .zip(b.residues())
            .zip(c.residues())
            .zip(&self.moduli)
        {
            for ((x, y), z) in ra.iter_mut().zip(rb).zip(rc) {
                *x = m.add(*x, m.mul(*y, *z));
            }
        }
    }

    /// Multiplies by a signed scalar.
    pub fn mul_scalar_assign(&self, a: &mut RnsPoly, s: i64) {
        for (ra, m) in a.residues_mut().zip(&self.moduli) {
            let w = m.reduce_i64(s);
            let ws = m.shoup(w);
            for x in ra.iter_mut() {
                *x = m.mul_shoup(*x, w, ws);
            }
        }
    }

    /// Residues of a small signed polynomial.
    pub fn from_signed(&self, coeffs: &[i64]) -> RnsPoly {
        let mut out = self.zero();
        for (r, m) in out.residues_mut().zip(&self.moduli) {
            for (x, &c) in r.iter_mut().zip(coeffs) {
                *x = m.reduce_i64(c);
            }
        }
        out
    }

    /// `y_i = x_i · (B/b_i)^-1 mod b_i` for one coefficient.
    #[inline]
    pub(crate) fn crt_weights(&self, poly: &RnsPoly, coeff: usize, y: &mut [u64]) -> f64 {
        let mut frac = 0.0;
        for (i, m) in self.moduli.iter().enumerate() {
            let yi = m.mul_shoup(poly.data[i * self.n + coeff], self.hat_inv[i], self.hat_inv_shoup[i]);
            y[i] = yi;
            frac += yi as f64 * self.inv_f64[i];
        }
        frac
    }

    /// The coefficient `coeff` as an integer in `[0, B)`, little-endian limbs.
    pub fn compose(&self, poly: &RnsPoly, coeff: usize) -> [u64; MAX_LIMBS] {
        let mut y = [0u64; MAX_LIMBS];
        let frac = self.crt_weights(poly, coeff, &mut y);
        let mut acc = [0u64; MAX_LIMBS];
        for (i, &yi) in y[..self.len()].iter().enumerate() {
            mul_add_limbs(&mut acc, &self.hat_limbs[i], yi, self.limbs);
        }
        // Σ y_i (B/b_i) = x + u·B with u = floor(frac), up to rounding.
        let u = frac.floor() as u64;
        sub_mul_limbs(&mut acc, &self.product_limbs, u, self.limbs);
        if acc[self.limbs - 1] >> 63 == 1 {
            add_limbs(&mut acc, &self.product_limbs, self.limbs);
        }
        while !lt_limbs(&acc, &self.product_limbs, self.limbs) {
            sub_limbs(&mut acc, &self.product_limbs, self.limbs);
        }
        acc
    }

    /// Magnitude of the centered representative of a composed value.
    pub fn centered_abs(&self, x: &[u64; MAX_LIMBS]) -> [u64; MAX_LIMBS] {
        let mut twice = *x;
        shl1_limbs(&mut twice, self.limbs);
        if lt_limbs(&self.product_limbs, &twice, self.limbs) {
            let mut out = self.product_limbs;
            sub_limbs(&mut out, x, self.limbs);
            out
        } else {
            *x
        }
    }

    pub fn limbs(&self) -> usize {
        self.limbs
    }

    pub fn product_limbs(&self) -> &[u64; MAX_LIMBS] {
        &self.product_limbs
    }
}

fn mul_add_limbs(acc: &mut [u64; MAX_LIMBS], a: &[u64; MAX_LIMBS], s: u64, len: usize) {
    let mut carry = 0u128;
    for k in 0..len {
        let v = acc[k] as u128 + a[k] as u128 * s as u128 + carry;
        acc[k] = v as u64;
        carry = v >> 64;
    }
}

fn sub_mul_limbs(acc: &mut [u64; MAX_LIMBS], a: &[u64; MAX_LIMBS], s: u64, len: usize) {
    let mut borrow = 0u128;
    for k in 0..len {
        let sub = a[k] as u128 * s as u128 + borrow;
        let (v, b) = acc[k].overflowing_sub(sub as u64);
        acc[k] = v;
        borrow = (sub >> 64) + b as u128;
    }
}

fn add_limbs(acc: &mut [u64; MAX_LIMBS], a: &[u64; MAX_LIMBS], len: usize) {
    let mut carry = false;
    for k in 0..len {
        let (v, c1) = acc[k].overflowing_add(a[k]);
        let (v, c2) = v.overflowing_add(carry as u64);
        acc[k] = v;
        carry = c1 || c2;
    }
}

fn sub_limbs(acc: &mut [u64; MAX_LIMBS], a: &[u64; MAX_LIMBS], len: usize) {
    let mut borrow = false;
    for k in 0..len {
        let (v, b1) = acc[k].overflowing_sub(a[k]);
        let (v, b2) = v.overflowing_sub(borrow as u64);
        acc[k] = v;
        borrow = b1 || b2;
    }
}

fn lt_limbs(a: &[u64; MAX_LIMBS], b: &[u64; MAX_LIMBS], len: usize) -> bool {
    for k in (0..len).rev() {
        if a[k] != b[k] {
            return a[k] < b[k];
        }
    }
    false
}

fn shl1_limbs(a: &mut [u64; MAX_LIMBS], len: usize) {
    let mut carry = 0;
    for limb in a.iter_mut().take(len) {
        let next = *limb >> 63;
        *limb = (*limb << 1) | carry;
        carry = next;
    }
}

/// `log2` of a non-negative limb integer, `-inf` for zero.
pub fn log2_limbs(a: &[u64; MAX_LIMBS]) -> f64 {
    let Some(top) = a.iter().rposition(|&l| l != 0) else {
        return f64::NEG_INFINITY;
    };
    let hi = a[top] as f64;
    let lo = if top > 0 { a[top - 1] as f64 } else { 0.0 };
    (hi + lo / 2f64.powi(64)).log2() + 64.0 * top as f64
}

/// Bits `[start, start + width)` of a limb integer, `width ≤ 32`.
pub fn extract_bits(a: &[u64; MAX_LIMBS], start: usize, width: usize) -> u64 {
    let limb = start / 64;
    let shift = start % 64;
    let mut v = a[limb] >> shift;
    if shift + width > 64 && limb + 1 < MAX_LIMBS {
        v |= a[limb + 1] << (64 - shift);
    }
    v & ((1u64 << width) - 1)
}

/// Fast base conversion from `from` to `to`, lifting each coefficient to
/// (approximately) its centered representative.
pub fn convert_centered(from: &RnsBasis, to: &RnsBasis, poly: &RnsPoly, table: &ConversionTable) -> RnsPoly {
    let n = from.n;
    let mut out = to.zero();
    let mut y = [0u64; MAX_LIMBS];
    for c in 0..n {
        let frac = from.crt_weights(poly, c, &mut y);
        let v = frac.round() as u64;
        for (j, m) in to.moduli.iter().enumerate() {
            let row = &table.hat_mod[j];
            let mut acc = 0u128;
            for (i, &yi) in y[..from.len()].iter().enumerate() {
                acc += yi as u128 * row[i] as u128;
            }
            acc += (m.value() - table.product_mod[j]) as u128 * v as u128;
            out.data[j * n + c] = m.reduce_u128(acc);
        }
    }
    out
}

/// Constants for converting from one basis to another.
#[derive(Debug, Clone)]
pub struct ConversionTable {
    // (B / b_i) mod c_j, indexed [j][i].
    hat_mod: Vec<Vec<u64>>,
    // B mod c_j.
    product_mod: Vec<u64>,
}

impl ConversionTable {
    pub fn new(from: &RnsBasis, to: &RnsBasis) -> Self {
        let hat_mod = to
            .moduli
            .iter()
            .map(|m| {
                from.moduli
                    .iter()
                    .map(|b| big_mod(&(from.product() / b.value()), m.value()))
                    .collect()
            })
            .collect();
        let product_mod = to.moduli.iter().map(|m| big_mod(from.product(), m.value())).collect();
        Self { hat_mod, product_mod }
    }
}

pub fn big_mod(x: &BigUint, m: u64) -> u64 {
    (x % m).to_u64_digits().first().copied().unwrap_or(0)
}

/// Computes `round(t · x / Q) mod Q` for `x` known exactly in the joint basis `Q ∪ P`.
#[derive(Debug, Clone)]
pub struct Scaler {
    q_len: usize,
    // floor(tP / q_k) mod q_j, indexed [j][k] over k ∈ Q.
    alpha: Vec<Vec<u64>>,
    // tP mod q_k and its Shoup-style quotient helper.
    beta: Vec<u64>,
    beta_shoup: Vec<u64>,
    // (tP / p_k) mod q_j, indexed [j][k] over k ∈ P.
    gamma: Vec<Vec<u64>>,
    // q_j - (tP mod q_j).
    neg_delta: Vec<u64>,
}

impl Scaler {
    pub fn new(q: &RnsBasis, p: &RnsBasis, t: u64) -> Self {
        let tp = p.product() * t;
        let alpha = q
            .moduli
            .iter()
            .map(|mj| q.moduli.iter().map(|mk| big_mod(&(&tp / mk.value()), mj.value())).collect())
            .collect();
        let beta: Vec<u64> = q.moduli.iter().map(|mk| big_mod(&tp, mk.value())).collect();
        let beta_shoup = q.moduli.iter().zip(&beta).map(|(m, &b)| m.shoup(b)).collect();
        let gamma = q
            .moduli
            .iter()
            .map(|mj| p.moduli.iter().map(|pk| big_mod(&(&tp / pk.value()), mj.value())).collect())
            .collect();
        let neg_delta = q.moduli.iter().map(|mj| mj.neg(big_mod(&tp, mj.value()))).collect();
        Self {
            q_len: q.len(),
            alpha,
            beta,
            beta_shoup,
            gamma,
            neg_delta,
        }
    }

    /// `joint` holds residues over `Q ∪ P` (Q first) in coefficient form.
    pub fn scale(&self, joint_basis: &RnsBasis, joint: &RnsPoly, q: &RnsBasis) -> RnsPoly {
        let n = joint_basis.n;
        let ql = self.q_len;
        let mut out = q.zero();
        let mut y = [0u64; MAX_LIMBS];
        let mut quot = [0u64; MAX_LIMBS];
        for c in 0..n {
            let frac_all = joint_basis.crt_weights(joint, c, &mut y);
            let v = frac_all.round() as u64;
            let mut frac = 0.0;
            for k in 0..ql {
                let m = &joint_basis.moduli[k];
                let qv = m.value();
                // floor(y_k β_k / q_k) and the remainder.
                let mut qt = ((y[k] as u128 * self.beta_shoup[k] as u128) >> 64) as u64;
                let mut rem = y[k].wrapping_mul(self.beta[k]).wrapping_sub(qt.wrapping_mul(qv));
                if rem >= qv {
                    rem -= qv;
                    qt += 1;
                }
                quot[k] = qt;
                frac += rem as f64 * joint_basis.inv_f64[k];
            }
            let r = frac.round() as u64;
            for (j, mj) in q.moduli.iter().enumerate() {
                let mut acc = r as u128 + self.neg_delta[j] as u128 * v as u128;
                let arow = &self.alpha[j];
                for k in 0..ql {
                    acc += y[k] as u128 * arow[k] as u128 + quot[k] as u128;
                }
                let grow = &self.gamma[j];
                for (k, g) in grow.iter().enumerate() {
                    acc += y[ql + k] as u128 * *g as u128;
                }
                out.data[j * n + c] = mj.reduce_u128(acc);
            }
        }
        out
    }
}

/// Concatenates residues of two bases into one joint polynomial.
pub fn concat(a: &RnsPoly, b: &RnsPoly) -> RnsPoly {
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    RnsPoly::from_data(a.n, data)
}

/// The first `count` residues of a polynomial.
pub fn truncate(a: RnsPoly, count: usize) -> RnsPoly {
    let n = a.n;
    let mut data = a.data;
    data.truncate(count * n);
    RnsPoly::from_data(n, data)
}
