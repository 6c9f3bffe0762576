//! Encoding, encryption, decryption and homomorphic evaluation.

use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::context::Context;
use super::keys::{sample_error, sample_ternary, PublicKey, RelinKey, SecretKey};
use super::rns::{self, log2_limbs, RnsPoly, MAX_LIMBS};
use super::{Ciphertext, Plaintext, SheError};

impl Context {
    fn check_ct(&self, ct: &Ciphertext) -> Result<(), SheError> {
        if ct.params_id != self.params_id() {
            return Err(SheError::ParamsMismatch);
        }
        if !(2..=3).contains(&ct.size()) {
            return Err(SheError::ComponentCount(ct.size()));
        }
        Ok(())
    }

    fn check_pt(&self, pt: &Plaintext) -> Result<(), SheError> {
        if pt.plain_modulus != self.plain_modulus() || pt.coeffs.len() != self.degree() {
            return Err(SheError::ParamsMismatch);
        }
        Ok(())
    }

    fn check_key(&self, ring_id: [u8; 32]) -> Result<(), SheError> {
        if ring_id != self.ring().ring_id() {
            return Err(SheError::KeyMismatch);
        }
        Ok(())
    }

    /// A plaintext whose constant coefficient is `value mod t`.
    pub fn encode_int(&self, value: i128, scale_exp: i32) -> Result<Plaintext, SheError> {
        let t = self.plain_modulus() as i128;
        if 2 * value.abs() >= t {
            return Err(SheError::EncodeOverflow {
                value: value as f64,
                scale_exp,
            });
        }
        let mut coeffs = vec![0u64; self.degree()];
        coeffs[0] = value.rem_euclid(t) as u64;
        Ok(Plaintext {
            coeffs,
            scale_exp,
            plain_modulus: self.plain_modulus(),
        })
    }

    /// Encodes `round(value · 2^scale_exp)` as a centered residue mod `t`.
    pub fn encode_fixed(&self, value: f64, scale_exp: i32) -> Result<Plaintext, SheError> {
        let scaled = (value * 2f64.powi(scale_exp)).round();
        if !scaled.is_finite() || 2.0 * scaled.abs() >= self.plain_modulus() as f64 {
            return Err(SheError::EncodeOverflow { value, scale_exp });
        }
        self.encode_int(scaled as i128, scale_exp)
    }

    /// A plaintext from arbitrary coefficients, reduced mod `t`.
    pub fn encode_poly(&self, coeffs: &[i64], scale_exp: i32) -> Result<Plaintext, SheError> {
        if coeffs.len() > self.degree() {
            return Err(SheError::Format("too many coefficients".into()));
        }
        let mut out = vec![0u64; self.degree()];
        for (o, &c) in out.iter_mut().zip(coeffs) {
            *o = self.plain().reduce_i64(c);
        }
        Ok(Plaintext {
            coeffs: out,
            scale_exp,
            plain_modulus: self.plain_modulus(),
        })
    }

    /// `Δ·m mod q` for a plaintext.
    /// `round(q·m/t) = floor(q/t)·m + round((q mod t)·m / t)`, which leaves
    /// a message-independent residual of at most 1/2.
    fn scaled_message(&self, pt: &Plaintext) -> RnsPoly {
        let q = self.ring().q();
        let t = self.plain_modulus() as u128;
        let r = self.q_mod_t() as u128;
        let carry: Vec<u64> = pt.coeffs.iter().map(|&c| ((r * c as u128 + t / 2) / t) as u64).collect();
        let mut out = q.zero();
        for ((res, m), &d) in out.residues_mut().zip(q.moduli()).zip(self.delta()) {
            let ds = m.shoup(d);
            for ((x, &c), &k) in res.iter_mut().zip(&pt.coeffs).zip(&carry) {
                *x = m.add(m.mul_shoup(m.reduce(c), d, ds), m.reduce(k));
            }
        }
        out
    }

    pub fn encrypt<R: RngCore>(&self, pk: &PublicKey, pt: &Plaintext, rng: &mut R) -> Result<Ciphertext, SheError> {
        self.check_key(pk.ring_id)?;
        self.check_pt(pt)?;
        let q = self.ring().q();
        let n = self.degree();
        let mut u = q.from_signed(&sample_ternary(rng, n));
        q.ntt_forward(&mut u);
        let mut c0 = q.mul_pointwise(&pk.p0, &u);
        let mut c1 = q.mul_pointwise(&pk.p1, &u);
        q.ntt_inverse(&mut c0);
        q.ntt_inverse(&mut c1);
        q.add_assign(&mut c0, &q.from_signed(&sample_error(rng, n)));
        q.add_assign(&mut c1, &q.from_signed(&sample_error(rng, n)));
        q.add_assign(&mut c0, &self.scaled_message(pt));
        Ok(Ciphertext::from_parts(vec![c0, c1], pt.scale_exp, self.params_id()))
    }

    /// The noiseless ciphertext `(Δ·m, 0)`; decrypts under any secret key.
    pub fn encrypt_trivial(&self, pt: &Plaintext) -> Result<Ciphertext, SheError> {
        self.check_pt(pt)?;
        let c0 = self.scaled_message(pt);
        let c1 = self.ring().q().zero();
        Ok(Ciphertext::from_parts(vec![c0, c1], pt.scale_exp, self.params_id()))
    }

    /// `c0 + c1·s + c2·s^2 mod q`, coefficient form.
    fn phase(&self, sk: &SecretKey, ct: &Ciphertext) -> RnsPoly {
        let q = self.ring().q();
        let mut acc = q.zero();
        let mut s_pow = sk.ntt.clone();
        for (i, c) in ct.components.iter().enumerate().skip(1) {
            let mut t = c.clone();
            q.ntt_forward(&mut t);
            q.mul_pointwise_assign(&mut t, &s_pow);
            q.add_assign(&mut acc, &t);
            if i + 1 < ct.size() {
                s_pow = q.mul_pointwise(&s_pow, &sk.ntt);
            }
        }
        q.ntt_inverse(&mut acc);
        q.add_assign(&mut acc, &ct.components[0]);
        acc
    }

    fn budget_of_phase(&self, phase: &RnsPoly) -> i64 {
        let q = self.ring().q();
        let mut v = phase.clone();
        q.mul_scalar_assign(&mut v, self.plain_modulus() as i64);
        let worst = (0..self.degree())
            .map(|c| log2_limbs(&q.centered_abs(&q.compose(&v, c))))
            .fold(f64::NEG_INFINITY, f64::max);
        let half_q = log2_limbs(q.product_limbs()) - 1.0;
        if worst == f64::NEG_INFINITY {
            return half_q.floor() as i64;
        }
        (half_q - worst).floor() as i64
    }

    /// Remaining noise budget in bits; `≤ 0` means decryption is unreliable.
    pub fn noise_budget(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<i64, SheError> {
        self.check_key(sk.ring_id)?;
        self.check_ct(ct)?;
        Ok(self.budget_of_phase(&self.phase(sk, ct)))
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext, SheError> {
        self.check_key(sk.ring_id)?;
        self.check_ct(ct)?;
        let phase = self.phase(sk, ct);
        let budget = self.budget_of_phase(&phase);
        if budget <= 0 {
            return Err(SheError::BudgetExhausted { budget });
        }
        let q = self.ring().q();
        let t = self.plain_modulus();
        let mut y = [0u64; MAX_LIMBS];
        let mut coeffs = vec![0u64; self.degree()];
        for (c, out) in coeffs.iter_mut().enumerate() {
            q.crt_weights(&phase, c, &mut y);
            // round(t·x/q) = Σ floor(t·y_i/q_i) + round(Σ frac) mod t.
            let mut whole = 0u128;
            let mut frac = 0.0;
            for (i, m) in q.moduli().iter().enumerate() {
                let prod = t as u128 * y[i] as u128;
                whole += prod / m.value() as u128;
                frac += (prod % m.value() as u128) as f64 / m.value() as f64;
            }
            whole += frac.round() as u128;
            *out = (whole % t as u128) as u64;
        }
        Ok(Plaintext {
            coeffs,
            scale_exp: ct.scale_exp,
            plain_modulus: t,
        })
    }

    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), SheError> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        if a.scale_exp != b.scale_exp {
            return Err(SheError::ScaleMismatch {
                left: a.scale_exp,
                right: b.scale_exp,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, SheError> {
        self.check_pair(a, b)?;
        let mut out = a.clone();
        self.add_assign(&mut out, b)?;
        Ok(out)
    }

    pub fn add_assign(&self, a: &mut Ciphertext, b: &Ciphertext) -> Result<(), SheError> {
        self.check_pair(a, b)?;
        let q = self.ring().q();
        while a.components.len() < b.components.len() {
            a.components.push(q.zero());
        }
        for (x, y) in a.components.iter_mut().zip(&b.components) {
            q.add_assign(x, y);
        }
        Ok(())
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, SheError> {
        self.check_pair(a, b)?;
        let q = self.ring().q();
        let mut out = a.clone();
        while out.components.len() < b.components.len() {
            out.components.push(q.zero());
        }
        for (x, y) in out.components.iter_mut().zip(&b.components) {
            q.sub_assign(x, y);
        }
        Ok(out)
    }

    pub fn negate(&self, a: &Ciphertext) -> Result<Ciphertext, SheError> {
        self.check_ct(a)?;
        let q = self.ring().q();
        let mut out = a.clone();
        for x in out.components.iter_mut() {
            q.neg_assign(x);
        }
        Ok(out)
    }

    fn check_plain_scale(&self, a: &Ciphertext, pt: &Plaintext) -> Result<(), SheError> {
        self.check_ct(a)?;
        self.check_pt(pt)?;
        if a.scale_exp != pt.scale_exp {
            return Err(SheError::ScaleMismatch {
                left: a.scale_exp,
                right: pt.scale_exp,
            });
        }
        Ok(())
    }

    pub fn add_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, SheError> {
        self.check_plain_scale(a, pt)?;
        let mut out = a.clone();
        self.ring().q().add_assign(&mut out.components[0], &self.scaled_message(pt));
        Ok(out)
    }

    pub fn sub_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, SheError> {
        self.check_plain_scale(a, pt)?;
        let mut out = a.clone();
        self.ring().q().sub_assign(&mut out.components[0], &self.scaled_message(pt));
        Ok(out)
    }

    /// Multiplies by a plaintext; scales add.
    pub fn multiply_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, SheError> {
        self.check_ct(a)?;
        self.check_pt(pt)?;
        if pt.is_zero() {
            return Err(SheError::ZeroPlaintext);
        }
        let q = self.ring().q();
        let mut out = a.clone();
        out.scale_exp = a.scale_exp + pt.scale_exp;
        if pt.is_scalar() {
            for c in out.components.iter_mut() {
                q.mul_scalar_assign(c, pt.constant_centered());
            }
            return Ok(out);
        }
        let signed: Vec<i64> = pt.coeffs.iter().map(|&c| self.plain().center(c)).collect();
        let mut m = q.from_signed(&signed);
        q.ntt_forward(&mut m);
        for c in out.components.iter_mut() {
            q.ntt_forward(c);
            q.mul_pointwise_assign(c, &m);
            q.ntt_inverse(c);
        }
        Ok(out)
    }

    /// `Σ w_i · ct_i` for integer weights at a common weight scale.
    /// Zero weights are skipped; at least one weight must be non-zero.
    pub fn linear_combination(
        &self,
        terms: &[(&Ciphertext, i64)],
        weight_scale_exp: i32,
    ) -> Result<Ciphertext, SheError> {
        let live: Vec<(&Ciphertext, i64)> = terms
            .iter()
            .map(|&(c, w)| (c, self.plain().center(self.plain().reduce_i64(w))))
            .filter(|&(_, w)| w != 0)
            .collect();
        let Some(&(first, _)) = live.first() else {
            return Err(SheError::ZeroPlaintext);
        };
        for (c, _) in &live {
            self.check_pair(first, c)?;
        }
        let size = live.iter().map(|(c, _)| c.size()).max().unwrap_or(2);
        let q = self.ring().q();
        let n = self.degree();
        let mut comps = Vec::with_capacity(size);
        let mut acc = vec![0u128; n];
        for k in 0..size {
            let mut out = q.zero();
            for (i, m) in q.moduli().iter().enumerate() {
                acc.iter_mut().for_each(|a| *a = 0);
                for (c, w) in &live {
                    let Some(comp) = c.components.get(k) else {
                        continue;
                    };
                    let wr = m.reduce_i64(*w);
                    let ws = m.shoup(wr);
                    for (a, &x) in acc.iter_mut().zip(comp.residue(i)) {
                        *a += m.mul_shoup_lazy(x, wr, ws) as u128;
                    }
                }
                for (o, &a) in out.residue_mut(i).iter_mut().zip(&acc) {
                    *o = m.reduce_u128(a);
                }
            }
            comps.push(out);
        }
        Ok(Ciphertext::from_parts(
            comps,
            first.scale_exp + weight_scale_exp,
            self.params_id(),
        ))
    }

    /// Lifts a `q`-residue polynomial into `q ∪ p` and transforms it.
    fn lift_ntt(&self, c: &RnsPoly) -> RnsPoly {
        let ring = self.ring();
        let ext = rns::convert_centered(ring.q(), ring.p(), c, ring.q_to_p());
        let mut joint = rns::concat(c, &ext);
        ring.joint().ntt_forward(&mut joint);
        joint
    }

    fn scale_down(&self, mut d: RnsPoly) -> RnsPoly {
        let ring = self.ring();
        ring.joint().ntt_inverse(&mut d);
        self.scaler().scale(ring.joint(), &d, ring.q())
    }

    /// Product without relinearization: three components.
    pub fn multiply_no_relin(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, SheError> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        if a.size() != 2 || b.size() != 2 {
            return Err(SheError::ComponentCount(a.size().max(b.size())));
        }
        let joint = self.ring().joint();
        let a0 = self.lift_ntt(&a.components[0]);
        let a1 = self.lift_ntt(&a.components[1]);
        let (d0, d1, d2) = if std::ptr::eq(a, b) || a.components == b.components {
            let d0 = joint.mul_pointwise(&a0, &a0);
            let mut d1 = joint.mul_pointwise(&a0, &a1);
            let d1c = d1.clone();
            joint.add_assign(&mut d1, &d1c);
            let d2 = joint.mul_pointwise(&a1, &a1);
            (d0, d1, d2)
        } else {
            let b0 = self.lift_ntt(&b.components[0]);
            let b1 = self.lift_ntt(&b.components[1]);
            let d0 = joint.mul_pointwise(&a0, &b0);
            let mut d1 = joint.mul_pointwise(&a0, &b1);
            joint.mul_add_pointwise(&mut d1, &a1, &b0);
            let d2 = joint.mul_pointwise(&a1, &b1);
            (d0, d1, d2)
        };
        Ok(Ciphertext::from_parts(
            vec![self.scale_down(d0), self.scale_down(d1), self.scale_down(d2)],
            a.scale_exp + b.scale_exp,
            self.params_id(),
        ))
    }

    pub fn square_no_relin(&self, a: &Ciphertext) -> Result<Ciphertext, SheError> {
        self.multiply_no_relin(a, a)
    }

    /// Product with relinearization back to two components.
    pub fn multiply(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, SheError> {
        self.check_key(rlk.ring_id)?;
        let prod = self.multiply_no_relin(a, b)?;
        self.relinearize(&prod, rlk)
    }

    pub fn square(&self, a: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, SheError> {
        self.multiply(a, a, rlk)
    }

    /// Folds the `s^2` component back into two components.
    pub fn relinearize(&self, a: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, SheError> {
        self.check_ct(a)?;
        self.check_key(rlk.ring_id)?;
        if a.size() == 2 {
            return Ok(a.clone());
        }
        if rlk.pairs.len() != self.ring().relin_count() {
            return Err(SheError::KeyMismatch);
        }
        let q = self.ring().q();
        let n = self.degree();
        let bits = rlk.base_bits as usize;
        let count = rlk.pairs.len();
        let c2 = &a.components[2];
        let mut digits = vec![0u64; count * n];
        for c in 0..n {
            let x = q.compose(c2, c);
            for l in 0..count {
                digits[l * n + c] = rns::extract_bits(&x, l * bits, bits);
            }
        }
        let mut out0 = a.components[0].clone();
        let mut out1 = a.components[1].clone();
        let mut acc0 = vec![0u128; n];
        let mut acc1 = vec![0u128; n];
        let mut buf = vec![0u64; n];
        for (i, (m, table)) in q.moduli().iter().zip(q.tables()).enumerate() {
            acc0.iter_mut().for_each(|a| *a = 0);
            acc1.iter_mut().for_each(|a| *a = 0);
            for (l, (b, ak)) in rlk.pairs.iter().enumerate() {
                buf.copy_from_slice(&digits[l * n..(l + 1) * n]);
                table.forward(&mut buf);
                for (((s0, s1), &d), (&kb, &ka)) in acc0
                    .iter_mut()
                    .zip(acc1.iter_mut())
                    .zip(&buf)
                    .zip(b.residue(i).iter().zip(ak.residue(i)))
                {
                    *s0 += d as u128 * kb as u128;
                    *s1 += d as u128 * ka as u128;
                }
                if l % 15 == 14 {
                    for a in acc0.iter_mut().chain(acc1.iter_mut()) {
                        *a = m.reduce_u128(*a) as u128;
                    }
                }
            }
            for (acc, out) in [(&acc0, &mut out0), (&acc1, &mut out1)] {
                for (o, &a) in buf.iter_mut().zip(acc.iter()) {
                    *o = m.reduce_u128(a);
                }
                table.inverse(&mut buf);
                for (x, &y) in out.residue_mut(i).iter_mut().zip(&buf) {
                    *x = m.add(*x, y);
                }
            }
        }
        Ok(Ciphertext::from_parts(vec![out0, out1], a.scale_exp, self.params_id()))
    }
}

/// Public-key encryption with an internally locked ChaCha20 stream, safe to
/// share across threads.
#[derive(Debug)]
pub struct Encryptor {
    ctx: Context,
    pk: PublicKey,
    rng: Mutex<ChaCha20Rng>,
}

impl Encryptor {
    pub fn new(ctx: Context, pk: PublicKey, seed: Option<u64>) -> Self {
        let rng = match seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Self {
            ctx,
            pk,
            rng: Mutex::new(rng),
        }
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn encrypt(&self, pt: &Plaintext) -> Result<Ciphertext, SheError> {
        // Each call draws its own child stream so the lock is held briefly.
        let mut child = {
            let mut rng = self.rng.lock().unwrap_or_else(|e| e.into_inner());
            let mut seed = [0u8; 32];
            rng.fill_bytes(&mut seed);
            ChaCha20Rng::from_seed(seed)
        };
        self.ctx.encrypt(&self.pk, pt, &mut child)
    }
}
