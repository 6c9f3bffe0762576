//! Tagged binary container for parameters, keys, plaintexts and ciphertexts.
//!
//! Every object starts with a 38-byte header:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `LITD` |
//! | 4 | 1 | format version, currently `1` |
//! | 5 | 1 | type tag (see [`ObjectType`]) |
//! | 6 | 32 | parameter hash |
//!
//! The hash is the params id (SHA-256 of the canonical parameter encoding)
//! for parameters, plaintexts and ciphertexts, and the ring id for keys,
//! since keys do not depend on the plaintext modulus. All integers that
//! follow are little-endian; ring elements are `u64` words, residue-major.
//!
//! Bodies:
//!
//! * params: `n u32 | security u16 | k u8 | q_1..q_k u64 | t u64`
//! * secret key: `n u32 | n × i8` (coefficients in `{-1, 0, 1}`)
//! * public key: `n u32 | k u8 | p0 | p1`, NTT domain
//! * relin key: `base_bits u8 | count u32 | n u32 | k u8 | count × (b | a)`, NTT domain
//! * plaintext: `scale_exp i32 | t u64 | n u32 | n × u64`
//! * ciphertext: `scale_exp i32 | size u8 | k u8 | n u32 | size × ring element`

use super::context::{Context, RingContext};
use super::keys::{PublicKey, RelinKey, SecretKey};
use super::params::EncryptionParams;
use super::rns::RnsPoly;
use super::{Ciphertext, Plaintext, SheError};

pub const MAGIC: &[u8; 4] = b"LITD";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 38;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ObjectType {
    Params = 1,
    SecretKey = 2,
    PublicKey = 3,
    RelinKey = 4,
    Plaintext = 5,
    Ciphertext = 6,
    CipherTensor = 7,
}

impl ObjectType {
    pub fn from_u8(v: u8) -> Option<Self> {
        use ObjectType::*;
        [Params, SecretKey, PublicKey, RelinKey, Plaintext, Ciphertext, CipherTensor]
            .into_iter()
            .find(|t| *t as u8 == v)
    }
}

fn err(msg: impl Into<String>) -> SheError {
    SheError::Format(msg.into())
}

/// Little-endian byte sink.
#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_header(kind: ObjectType, hash: &[u8; 32]) -> Self {
        let mut w = Self::default();
        w.bytes(MAGIC);
        w.u8(FORMAT_VERSION);
        w.u8(kind as u8);
        w.bytes(hash);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn words(&mut self, w: &[u64]) {
        self.buf.reserve(w.len() * 8);
        for x in w {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Little-endian byte source with bounds checks.
#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Parses and checks the header, returning the stored hash.
    pub fn header(buf: &'a [u8], kind: ObjectType) -> Result<(Self, [u8; 32]), SheError> {
        let mut r = Self::new(buf);
        if r.take(4)? != MAGIC {
            return Err(err("bad magic"));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(err(format!("unsupported format version {version}")));
        }
        let tag = r.u8()?;
        if tag != kind as u8 {
            return Err(err(format!("expected object type {}, found {tag}", kind as u8)));
        }
        let hash = r.hash()?;
        Ok((r, hash))
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8], SheError> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len()).ok_or_else(|| err("truncated object"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, SheError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, SheError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, SheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn i32(&mut self) -> Result<i32, SheError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, SheError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn hash(&mut self) -> Result<[u8; 32], SheError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    pub fn words(&mut self, count: usize) -> Result<Vec<u64>, SheError> {
        let bytes = self.take(count.checked_mul(8).ok_or_else(|| err("length overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(self) -> Result<(), SheError> {
        if self.remaining() != 0 {
            return Err(err(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

fn write_poly(w: &mut Writer, p: &RnsPoly) {
    w.words(p.data());
}

/// Reads a ring element, checking every word is reduced.
fn read_poly(r: &mut Reader<'_>, ring: &RingContext) -> Result<RnsPoly, SheError> {
    let n = ring.degree();
    let data = r.words(n * ring.q().len())?;
    for (chunk, m) in data.chunks_exact(n).zip(ring.q().moduli()) {
        if chunk.iter().any(|&x| x >= m.value()) {
            return Err(err("ring element word not reduced"));
        }
    }
    Ok(RnsPoly::from_data(n, data))
}

fn check_shape(r: &mut Reader<'_>, ring: &RingContext) -> Result<(), SheError> {
    let n = r.u32()? as usize;
    if n != ring.degree() {
        return Err(err(format!("ring degree {n} does not match {}", ring.degree())));
    }
    Ok(())
}

fn check_moduli(r: &mut Reader<'_>, ring: &RingContext) -> Result<(), SheError> {
    let k = r.u8()? as usize;
    if k != ring.q().len() {
        return Err(err(format!("{k} residues, expected {}", ring.q().len())));
    }
    Ok(())
}

fn check_hash(found: [u8; 32], expected: [u8; 32]) -> Result<(), SheError> {
    if found != expected {
        return Err(SheError::ParamsMismatch);
    }
    Ok(())
}

pub fn params_to_bytes(p: &EncryptionParams) -> Vec<u8> {
    let mut w = Writer::with_header(ObjectType::Params, &p.params_id());
    w.bytes(&p.canonical_bytes());
    w.finish()
}

pub fn params_from_bytes(buf: &[u8]) -> Result<EncryptionParams, SheError> {
    let (mut r, hash) = Reader::header(buf, ObjectType::Params)?;
    let n = r.u32()? as usize;
    let security = r.u16()?;
    if super::SecurityLevel::from_bits(security).is_none() {
        return Err(err(format!("unsupported security level {security}")));
    }
    let k = r.u8()? as usize;
    let primes = r.words(k)?;
    let t = r.u64()?;
    r.finish()?;
    let params = EncryptionParams::new(n, primes, t);
    params.validate()?;
    if params.params_id() != hash {
        return Err(err("parameter hash does not match body"));
    }
    Ok(params)
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::SecretKey, &self.ring_id);
        w.u32(self.coeffs.len() as u32);
        w.bytes(&self.coeffs.iter().map(|&c| c as u8).collect::<Vec<_>>());
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], ring: &RingContext) -> Result<Self, SheError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::SecretKey)?;
        check_hash(hash, ring.ring_id())?;
        check_shape(&mut r, ring)?;
        let raw = r.take(ring.degree())?;
        r.finish()?;
        let coeffs = raw
            .iter()
            .map(|&b| match b as i8 {
                c @ -1..=1 => Ok(c),
                _ => Err(err("secret coefficient outside {-1, 0, 1}")),
            })
            .collect::<Result<Vec<i8>, _>>()?;
        Ok(SecretKey::from_coeffs(ring, coeffs))
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::PublicKey, &self.ring_id);
        w.u32(self.p0.degree() as u32);
        w.u8(self.p0.moduli() as u8);
        write_poly(&mut w, &self.p0);
        write_poly(&mut w, &self.p1);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], ring: &RingContext) -> Result<Self, SheError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::PublicKey)?;
        check_hash(hash, ring.ring_id())?;
        check_shape(&mut r, ring)?;
        check_moduli(&mut r, ring)?;
        let p0 = read_poly(&mut r, ring)?;
        let p1 = read_poly(&mut r, ring)?;
        r.finish()?;
        Ok(PublicKey {
            ring_id: hash,
            p0,
            p1,
        })
    }
}

impl RelinKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::RelinKey, &self.ring_id);
        w.u8(self.base_bits as u8);
        w.u32(self.pairs.len() as u32);
        let first = &self.pairs[0].0;
        w.u32(first.degree() as u32);
        w.u8(first.moduli() as u8);
        for (b, a) in &self.pairs {
            write_poly(&mut w, b);
            write_poly(&mut w, a);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], ring: &RingContext) -> Result<Self, SheError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::RelinKey)?;
        check_hash(hash, ring.ring_id())?;
        let base_bits = r.u8()? as u32;
        if base_bits != super::RELIN_BASE_BITS {
            return Err(err(format!("unsupported relinearization base 2^{base_bits}")));
        }
        let count = r.u32()? as usize;
        if count != ring.relin_count() {
            return Err(err(format!("{count} relinearization pairs, expected {}", ring.relin_count())));
        }
        check_shape(&mut r, ring)?;
        check_moduli(&mut r, ring)?;
        let mut pairs = Vec::with_capacity(count);
        for _ in 0..count {
            let b = read_poly(&mut r, ring)?;
            let a = read_poly(&mut r, ring)?;
            pairs.push((b, a));
        }
        r.finish()?;
        Ok(RelinKey {
            ring_id: hash,
            base_bits,
            pairs,
        })
    }
}

impl Plaintext {
    pub fn to_bytes(&self, ctx: &Context) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::Plaintext, &ctx.params_id());
        w.i32(self.scale_exp());
        w.u64(self.plain_modulus());
        w.u32(self.coeffs().len() as u32);
        w.words(self.coeffs());
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], ctx: &Context) -> Result<Self, SheError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::Plaintext)?;
        check_hash(hash, ctx.params_id())?;
        let scale_exp = r.i32()?;
        let t = r.u64()?;
        if t != ctx.plain_modulus() {
            return Err(SheError::ParamsMismatch);
        }
        check_shape(&mut r, ctx.ring())?;
        let coeffs = r.words(ctx.degree())?;
        r.finish()?;
        Plaintext::new(coeffs, scale_exp, t)
    }
}

impl Ciphertext {
    /// Body only, without the object header.
    pub fn write_body(&self, w: &mut Writer) {
        w.i32(self.scale_exp());
        w.u8(self.size() as u8);
        let first = &self.components()[0];
        w.u8(first.moduli() as u8);
        w.u32(first.degree() as u32);
        for c in self.components() {
            write_poly(w, c);
        }
    }

    pub fn read_body(r: &mut Reader<'_>, ctx: &Context) -> Result<Self, SheError> {
        let scale_exp = r.i32()?;
        let size = r.u8()? as usize;
        if !(2..=3).contains(&size) {
            return Err(SheError::ComponentCount(size));
        }
        check_moduli(r, ctx.ring())?;
        check_shape(r, ctx.ring())?;
        let comps = (0..size).map(|_| read_poly(r, ctx.ring())).collect::<Result<Vec<_>, _>>()?;
        Ok(Ciphertext::from_parts(comps, scale_exp, ctx.params_id()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::Ciphertext, &self.params_id());
        self.write_body(&mut w);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], ctx: &Context) -> Result<Self, SheError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::Ciphertext)?;
        check_hash(hash, ctx.params_id())?;
        let ct = Self::read_body(&mut r, ctx)?;
        r.finish()?;
        Ok(ct)
    }
}
