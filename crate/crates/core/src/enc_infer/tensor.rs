//! Tensors of ciphertexts and their container format.

use super::lanes::LaneSet;
use super::EncError;
use crate::she::serial::{ObjectType, Reader, Writer};
use crate::she::Ciphertext;

/// One plaintext lane of a [`CipherTensor`]: a ciphertext per scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneTensor {
    pub plain_modulus: u64,
    pub elements: Vec<Ciphertext>,
}

/// A tensor of encrypted scalars, row-major `(h, w, c)` or flat.
///
/// Body after the object header (hash = ring id):
/// `rank u8 | rank × dim u32 | scale_exp i32 | lanes u8 | lanes × (t u64 | count u32 | count × ciphertext body)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherTensor {
    shape: Vec<usize>,
    scale_exp: i32,
    lanes: Vec<LaneTensor>,
    /// Lowest noise budget seen so far; only filled by test probes.
    pub budget_floor: Option<i64>,
}

const MAX_RANK: usize = 4;

impl CipherTensor {
    pub fn new(shape: Vec<usize>, scale_exp: i32, lanes: Vec<LaneTensor>) -> Result<Self, EncError> {
        let count: usize = shape.iter().product();
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(EncError::Shape(format!("rank {} outside 1..=4", shape.len())));
        }
        if lanes.is_empty() {
            return Err(EncError::Shape("no lanes".into()));
        }
        for lane in &lanes {
            if lane.elements.len() != count {
                return Err(EncError::Shape(format!(
                    "lane holds {} ciphertexts for shape {shape:?}",
                    lane.elements.len()
                )));
            }
            let Some(first) = lane.elements.first() else { continue };
            if lane
                .elements
                .iter()
                .any(|c| c.scale_exp() != scale_exp || c.params_id() != first.params_id())
            {
                return Err(EncError::Shape("elements disagree on scale or parameters".into()));
            }
        }
        Ok(Self {
            shape,
            scale_exp,
            lanes,
            budget_floor: None,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scale_exp(&self) -> i32 {
        self.scale_exp
    }

    pub fn lanes(&self) -> &[LaneTensor] {
        &self.lanes
    }

    pub fn into_lanes(self) -> Vec<LaneTensor> {
        self.lanes
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self, EncError> {
        if shape.iter().product::<usize>() != self.len() {
            return Err(EncError::Shape(format!("cannot reshape {:?} to {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn to_bytes(&self, lanes: &LaneSet) -> Vec<u8> {
        let mut w = Writer::with_header(ObjectType::CipherTensor, &lanes.ring().ring_id());
        w.u8(self.shape.len() as u8);
        for &d in &self.shape {
            w.u32(d as u32);
        }
        w.i32(self.scale_exp);
        w.u8(self.lanes.len() as u8);
        for lane in &self.lanes {
            w.u64(lane.plain_modulus);
            w.u32(lane.elements.len() as u32);
            for ct in &lane.elements {
                ct.write_body(&mut w);
            }
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8], lanes: &LaneSet) -> Result<Self, EncError> {
        let (mut r, hash) = Reader::header(buf, ObjectType::CipherTensor)?;
        if hash != lanes.ring().ring_id() {
            return Err(EncError::Format("tensor belongs to a different ring".into()));
        }
        let rank = r.u8()? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(EncError::Format(format!("rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| EncError::Format("shape overflows".into()))?;
        let scale_exp = r.i32()?;
        let lane_count = r.u8()? as usize;
        let mut out = Vec::with_capacity(lane_count);
        for _ in 0..lane_count {
            let t = r.u64()?;
            let lane = lanes
                .lane_of(t)
                .ok_or_else(|| EncError::Format(format!("unknown plaintext modulus {t}")))?;
            if out.iter().any(|l: &LaneTensor| l.plain_modulus == t) {
                return Err(EncError::Format(format!("lane {t} repeated")));
            }
            let n = r.u32()? as usize;
            if n != count {
                return Err(EncError::Format(format!("lane holds {n} ciphertexts, shape needs {count}")));
            }
            let ctx = lanes.context(lane);
            let elements = (0..n)
                .map(|_| Ciphertext::read_body(&mut r, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            out.push(LaneTensor {
                plain_modulus: t,
                elements,
            });
        }
        r.finish()?;
        Self::new(shape, scale_exp, out).map_err(|e| EncError::Format(e.to_string()))
    }
}
