//! Homomorphic evaluation of the network, lane by lane.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::RngCore;
use rayon::prelude::*;

use super::lanes::LaneSet;
use super::quant::{dequantize, pool_window, quantize_image, QConv, QDense, QPoly, QuantizedModel};
use super::tensor::{CipherTensor, LaneTensor};
use super::{EncError, Stage};
use crate::nn::{argmax, Tensor, IMAGE_SIDE};
use crate::she::{Ciphertext, Context, PublicKey, RelinKey, SecretKey};

/// `v mod t` as a centered residue.
pub fn centered_residue(ctx: &Context, v: &BigInt) -> i64 {
    let t = ctx.plain_modulus();
    let r = i64::try_from(&(v % BigInt::from(t))).expect("below t");
    ctx.plain().center(ctx.plain().reduce_i64(r))
}

/// Reads noise budgets with the secret key. Diagnostics and tests only; the
/// evaluation itself never needs it.
#[derive(Clone, Copy)]
pub struct BudgetProbe<'a> {
    secret: &'a SecretKey,
}

impl std::fmt::Debug for BudgetProbe<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BudgetProbe")
    }
}

impl<'a> BudgetProbe<'a> {
    pub fn new(secret: &'a SecretKey) -> Self {
        Self { secret }
    }

    pub fn budget(&self, ctx: &Context, ct: &Ciphertext) -> i64 {
        ctx.noise_budget(self.secret, ct).unwrap_or(i64::MIN)
    }

    fn min(&self, ctx: &Context, cts: &[Ciphertext]) -> i64 {
        cts.par_iter().map(|c| self.budget(ctx, c)).min().unwrap_or(i64::MAX)
    }
}

/// Timing and budget of one stage, summed over lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: Stage,
    pub time: Duration,
    pub scale_exp: i32,
    /// Lowest budget over elements and lanes, when probed.
    pub min_budget: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Telemetry {
    pub encryption: Duration,
    pub stages: Vec<StageRecord>,
    pub decryption: Duration,
}

impl Telemetry {
    fn record(&mut self, stage: Stage, time: Duration, scale_exp: i32, min_budget: Option<i64>) {
        match self.stages.iter_mut().find(|r| r.stage == stage) {
            Some(r) => {
                r.time += time;
                r.min_budget = match (r.min_budget, min_budget) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            None => self.stages.push(StageRecord {
                stage,
                time,
                scale_exp,
                min_budget,
            }),
        }
    }

    /// `layer,description,time_ms,min_budget` with one row per timed step,
    /// encryption first and decryption last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,description,time_ms,min_budget\n");
        let ms = |d: Duration| format!("{:.3}", d.as_secs_f64() * 1e3);
        out.push_str(&format!("Encryption,encrypt 28x28 image,{},\n", ms(self.encryption)));
        for r in &self.stages {
            let budget = r.min_budget.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.stage.label(),
                r.stage.description(),
                ms(r.time),
                budget
            ));
        }
        out.push_str(&format!("Decryption,decrypt 10 logits,{},\n", ms(self.decryption)));
        out
    }
}

/// Encrypts integer pixels into one lane.
pub fn encrypt_lane<R: RngCore>(
    ctx: &Context,
    pk: &PublicKey,
    pixels: &[i64],
    scale_exp: i32,
    rng: &mut R,
) -> Result<LaneTensor, EncError> {
    let elements = pixels
        .iter()
        .map(|&p| ctx.encrypt(pk, &ctx.encode_int(p as i128, scale_exp)?, rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LaneTensor {
        plain_modulus: ctx.plain_modulus(),
        elements,
    })
}

/// Encrypts a `28×28×1` image in `[0, 1]` at `2^scale_exp`, in every lane.
pub fn encrypt_image<R: RngCore>(
    lanes: &LaneSet,
    pk: &PublicKey,
    image: &Tensor,
    scale_exp: i32,
    rng: &mut R,
) -> Result<CipherTensor, EncError> {
    let pixels = quantize_image(image, scale_exp)?;
    let data = lanes
        .contexts()
        .iter()
        .map(|ctx| encrypt_lane(ctx, pk, &pixels, scale_exp, rng))
        .collect::<Result<Vec<_>, _>>()?;
    CipherTensor::new(vec![IMAGE_SIDE, IMAGE_SIDE, 1], scale_exp, data)
}

fn noiseless(ctx: &Context, value: i64, scale_exp: i32) -> Result<Ciphertext, EncError> {
    Ok(ctx.encrypt_trivial(&ctx.encode_int(value as i128, scale_exp)?)?)
}

/// `Σ w_i · x_i + bias` at `out_scale`, weights given mod `t`.
fn affine(
    ctx: &Context,
    terms: &[(&Ciphertext, i64)],
    bias: &BigInt,
    weight_scale: i32,
    out_scale: i32,
) -> Result<Ciphertext, EncError> {
    let b = centered_residue(ctx, bias);
    let live = terms.iter().any(|&(_, w)| ctx.plain().reduce_i64(w) != 0);
    if !live {
        return noiseless(ctx, b, out_scale);
    }
    let mut ct = ctx.linear_combination(terms, weight_scale)?;
    if ct.scale_exp() != out_scale {
        return Err(EncError::Shape(format!(
            "affine output at scale {} but bias at {out_scale}",
            ct.scale_exp()
        )));
    }
    if b != 0 {
        ct = ctx.add_plain(&ct, &ctx.encode_int(b as i128, out_scale)?)?;
    }
    Ok(ct)
}

fn check_scale(x_scale: i32, weight_scale: i32, bias_scale: i32) -> Result<i32, EncError> {
    let out = x_scale + weight_scale;
    if out != bias_scale {
        return Err(EncError::Shape(format!(
            "input scale {x_scale} + weight scale {weight_scale} does not match bias scale {bias_scale}"
        )));
    }
    Ok(out)
}

/// One convolution output.
pub fn conv_output(
    ctx: &Context,
    x: &[Ciphertext],
    shape: [usize; 3],
    conv: &QConv,
    (oy, ox, fi): (usize, usize, usize),
    out_scale: i32,
) -> Result<Ciphertext, EncError> {
    let taps = conv.taps(shape, oy, ox, fi);
    let terms: Vec<(&Ciphertext, i64)> = taps.iter().map(|&(i, w)| (&x[i], w)).collect();
    affine(ctx, &terms, &conv.bias[fi], conv.weight_scale, out_scale)
}

/// Convolution over one lane.
pub fn conv_lane(
    ctx: &Context,
    x: &[Ciphertext],
    shape: [usize; 3],
    scale_exp: i32,
    conv: &QConv,
) -> Result<Vec<Ciphertext>, EncError> {
    if x.len() != shape.iter().product::<usize>() {
        return Err(EncError::Shape(format!("{} ciphertexts for shape {shape:?}", x.len())));
    }
    let out_scale = check_scale(scale_exp, conv.weight_scale, conv.bias_scale)?;
    let [oh, ow, f] = conv.output_shape(shape)?;
    (0..oh * ow * f)
        .into_par_iter()
        .map(|i| conv_output(ctx, x, shape, conv, (i / (ow * f), (i / f) % ow, i % f), out_scale))
        .collect()
}

/// Dense layer over one lane.
pub fn dense_lane(ctx: &Context, x: &[Ciphertext], scale_exp: i32, fc: &QDense) -> Result<Vec<Ciphertext>, EncError> {
    if x.len() != fc.inputs {
        return Err(EncError::Shape(format!("dense expects {} inputs, got {}", fc.inputs, x.len())));
    }
    let out_scale = check_scale(scale_exp, fc.weight_scale, fc.bias_scale)?;
    (0..fc.outputs)
        .into_par_iter()
        .map(|o| {
            let terms: Vec<(&Ciphertext, i64)> = x.iter().zip(fc.row(o)).map(|(c, &w)| (c, w)).collect();
            affine(ctx, &terms, &fc.bias[o], fc.weight_scale, out_scale)
        })
        .collect()
}

/// Aligned activation coefficients reduced mod the lane's `t`.
pub fn lane_coefficients(ctx: &Context, poly: &QPoly, input_scale: i32) -> Vec<i64> {
    poly.aligned(input_scale).iter().map(|a| centered_residue(ctx, a)).collect()
}

/// `Σ c_k y^k` with power-basis products of depth `⌈log2 d⌉`. With
/// `relin = false` the result may keep three components.
pub fn activation_ct(
    ctx: &Context,
    rlk: &RelinKey,
    y: &Ciphertext,
    coeffs: &[i64],
    out_scale: i32,
    relin: bool,
) -> Result<Ciphertext, EncError> {
    let d = coeffs.len().saturating_sub(1);
    if d > QPoly::MAX_DEGREE || coeffs.is_empty() {
        return Err(EncError::Degree(d));
    }
    // powers[k] is y^k as produced; relined[k] its two-component form.
    let mut powers: Vec<Option<Ciphertext>> = vec![None; d + 1];
    let mut relined: Vec<Option<Ciphertext>> = vec![None; d + 1];
    if d >= 1 {
        powers[1] = Some(y.clone());
        relined[1] = Some(y.clone());
    }
    for k in 2..=d {
        let hi = 1 << (usize::BITS - 1 - k.leading_zeros());
        let (a, b) = if hi == k { (k / 2, k / 2) } else { (hi, k - hi) };
        for j in [a, b] {
            if relined[j].is_none() {
                relined[j] = Some(ctx.relinearize(powers[j].as_ref().expect("built in order"), rlk)?);
            }
        }
        let (ra, rb) = (relined[a].as_ref().unwrap(), relined[b].as_ref().unwrap());
        powers[k] = Some(if a == b {
            ctx.square_no_relin(ra)?
        } else {
            ctx.multiply_no_relin(ra, rb)?
        });
    }
    let terms: Vec<Ciphertext> = (1..=d)
        .filter(|&k| ctx.plain().reduce_i64(coeffs[k]) != 0)
        .map(|k| powers[k].clone().expect("built").with_scale_exp(0))
        .collect();
    let weights: Vec<i64> = (1..=d)
        .filter(|&k| ctx.plain().reduce_i64(coeffs[k]) != 0)
        .map(|k| coeffs[k])
        .collect();
    if terms.is_empty() {
        return noiseless(ctx, coeffs[0], out_scale);
    }
    let pairs: Vec<(&Ciphertext, i64)> = terms.iter().zip(weights).collect();
    let mut out = ctx.linear_combination(&pairs, 0)?.with_scale_exp(out_scale);
    if coeffs[0] != 0 {
        out = ctx.add_plain(&out, &ctx.encode_int(coeffs[0] as i128, out_scale)?)?;
    }
    if relin {
        out = ctx.relinearize(&out, rlk)?;
    }
    Ok(out)
}

/// Sum of the 2×2 window; relinearized if any summand has three components.
fn pool_output(ctx: &Context, rlk: Option<&RelinKey>, window: [&Ciphertext; 4], out_scale: i32) -> Result<Ciphertext, EncError> {
    let mut acc = window[0].clone();
    for c in &window[1..] {
        ctx.add_assign(&mut acc, c)?;
    }
    let mut acc = acc.with_scale_exp(out_scale);
    if let Some(rlk) = rlk {
        acc = ctx.relinearize(&acc, rlk)?;
    }
    Ok(acc)
}

fn pool_shape(shape: [usize; 3]) -> Result<[usize; 3], EncError> {
    let [h, w, c] = shape;
    if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
        return Err(EncError::Shape(format!("cannot pool {h}x{w}")));
    }
    Ok([h / 2, w / 2, c])
}

fn shape3(shape: &[usize]) -> Result<[usize; 3], EncError> {
    shape
        .try_into()
        .map_err(|_| EncError::Shape(format!("expected (h, w, c), got {shape:?}")))
}

fn map_lanes<F>(lanes: &LaneSet, x: &CipherTensor, shape: Vec<usize>, scale: i32, f: F) -> Result<CipherTensor, EncError>
where
    F: Fn(&Context, &[Ciphertext]) -> Result<Vec<Ciphertext>, EncError>,
{
    let out = x
        .lanes()
        .iter()
        .map(|lane| {
            let idx = lanes
                .lane_of(lane.plain_modulus)
                .ok_or_else(|| EncError::Shape(format!("no context for lane {}", lane.plain_modulus)))?;
            Ok(LaneTensor {
                plain_modulus: lane.plain_modulus,
                elements: f(lanes.context(idx), &lane.elements)?,
            })
        })
        .collect::<Result<Vec<_>, EncError>>()?;
    CipherTensor::new(shape, scale, out)
}

/// Convolution; the output scale is the input scale plus the weight scale.
pub fn conv2d_enc(lanes: &LaneSet, x: &CipherTensor, conv: &QConv) -> Result<CipherTensor, EncError> {
    let shape = shape3(x.shape())?;
    let out_shape = conv.output_shape(shape)?;
    let scale = check_scale(x.scale_exp(), conv.weight_scale, conv.bias_scale)?;
    map_lanes(lanes, x, out_shape.to_vec(), scale, |ctx, cts| {
        conv_lane(ctx, cts, shape, x.scale_exp(), conv)
    })
}

/// Elementwise polynomial; the output scale is `d·s + coeff_scale`.
pub fn activation_enc(lanes: &LaneSet, x: &CipherTensor, poly: &QPoly, rlk: &RelinKey) -> Result<CipherTensor, EncError> {
    poly.check_degree()?;
    let scale = poly.output_scale(x.scale_exp());
    map_lanes(lanes, x, x.shape().to_vec(), scale, |ctx, cts| {
        let coeffs = lane_coefficients(ctx, poly, x.scale_exp());
        cts.par_iter()
            .map(|y| activation_ct(ctx, rlk, y, &coeffs, scale, true))
            .collect()
    })
}

/// 2×2 window sums; the `÷4` becomes `+2` on the scale.
pub fn mean_pool_enc(lanes: &LaneSet, x: &CipherTensor) -> Result<CipherTensor, EncError> {
    let shape = shape3(x.shape())?;
    let out_shape = pool_shape(shape)?;
    let scale = x.scale_exp() + 2;
    let [oh, ow, c] = out_shape;
    map_lanes(lanes, x, out_shape.to_vec(), scale, |ctx, cts| {
        (0..oh * ow * c)
            .into_par_iter()
            .map(|i| {
                let idx = pool_window(shape, i / (ow * c), (i / c) % ow, i % c);
                pool_output(ctx, None, idx.map(|j| &cts[j]), scale)
            })
            .collect()
    })
}

/// Dense layer over a flat tensor.
pub fn fc_enc(lanes: &LaneSet, x: &CipherTensor, fc: &QDense) -> Result<CipherTensor, EncError> {
    let scale = check_scale(x.scale_exp(), fc.weight_scale, fc.bias_scale)?;
    map_lanes(lanes, x, vec![fc.outputs], scale, |ctx, cts| dense_lane(ctx, cts, x.scale_exp(), fc))
}

#[derive(Default)]
struct StageClock {
    nanos: [AtomicU64; 3],
    budget: [AtomicI64; 3],
}

impl StageClock {
    fn new() -> Self {
        Self {
            nanos: Default::default(),
            budget: [AtomicI64::new(i64::MAX), AtomicI64::new(i64::MAX), AtomicI64::new(i64::MAX)],
        }
    }

    fn time<T>(&self, slot: usize, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.nanos[slot].fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }

    fn observe(&self, slot: usize, probe: Option<&BudgetProbe<'_>>, ctx: &Context, ct: &Ciphertext) {
        if let Some(p) = probe {
            self.budget[slot].fetch_min(p.budget(ctx, ct), Ordering::Relaxed);
        }
    }

    /// Splits `wall` between the slots in proportion to the time spent in each.
    fn shares(&self, wall: Duration) -> [Duration; 3] {
        let n = self.nanos.each_ref().map(|a| a.load(Ordering::Relaxed) as f64);
        let total: f64 = n.iter().sum::<f64>().max(1.0);
        n.map(|v| wall.mul_f64(v / total))
    }
}

/// Runs the whole network on encrypted inputs.
#[derive(Debug, Clone, Copy)]
pub struct Evaluator<'a> {
    model: &'a QuantizedModel,
    lanes: &'a LaneSet,
    rlk: &'a RelinKey,
    probe: Option<BudgetProbe<'a>>,
    audit: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a QuantizedModel, lanes: &'a LaneSet, rlk: &'a RelinKey) -> Self {
        Self {
            model,
            lanes,
            rlk,
            probe: None,
            audit: true,
        }
    }

    /// Turns the pre-evaluation budget forecast on or off. Without it an
    /// exhausted budget only shows up at decryption.
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    /// Records per-stage minimum budgets in the telemetry.
    pub fn with_probe(mut self, probe: BudgetProbe<'a>) -> Self {
        self.probe = Some(probe);
        self
    }

    pub fn lanes(&self) -> &LaneSet {
        self.lanes
    }

    /// Convolution, activation and pooling in one pass over the pooled
    /// outputs, so that the full-resolution maps never exist at once.
    fn conv_block(
        &self,
        ctx: &Context,
        x: &[Ciphertext],
        shape: [usize; 3],
        scale: i32,
        conv: &QConv,
        stages: [Stage; 3],
        telemetry: &mut Telemetry,
    ) -> Result<(Vec<Ciphertext>, [usize; 3], i32), EncError> {
        let conv_scale = check_scale(scale, conv.weight_scale, conv.bias_scale)?;
        let conv_shape = conv.output_shape(shape)?;
        let act = &self.model.activation;
        let act_scale = act.output_scale(conv_scale);
        let pool_scale = act_scale + 2;
        let out_shape = pool_shape(conv_shape)?;
        let coeffs = lane_coefficients(ctx, act, conv_scale);
        let clock = StageClock::new();
        let probe = self.probe.as_ref();
        let [oh, ow, f] = out_shape;
        let start = Instant::now();
        let out = (0..oh * ow * f)
            .into_par_iter()
            .map(|i| {
                let (py, px, fi) = (i / (ow * f), (i / f) % ow, i % f);
                let mut window = Vec::with_capacity(4);
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let pos = (2 * py + dy, 2 * px + dx, fi);
                    let y = clock.time(0, || conv_output(ctx, x, shape, conv, pos, conv_scale))?;
                    clock.observe(0, probe, ctx, &y);
                    let a = clock.time(1, || activation_ct(ctx, self.rlk, &y, &coeffs, act_scale, false))?;
                    clock.observe(1, probe, ctx, &a);
                    window.push(a);
                }
                let refs = [&window[0], &window[1], &window[2], &window[3]];
                let p = clock.time(2, || pool_output(ctx, Some(self.rlk), refs, pool_scale))?;
                clock.observe(2, probe, ctx, &p);
                Ok(p)
            })
            .collect::<Result<Vec<_>, EncError>>()?;
        let shares = clock.shares(start.elapsed());
        for (slot, (stage, s)) in stages.into_iter().zip([conv_scale, act_scale, pool_scale]).enumerate() {
            let budget = probe.map(|_| clock.budget[slot].load(Ordering::Relaxed));
            telemetry.record(stage, shares[slot], s, budget);
        }
        Ok((out, out_shape, pool_scale))
    }

    fn timed<T>(
        &self,
        ctx: &Context,
        stage: Stage,
        scale: i32,
        telemetry: &mut Telemetry,
        f: impl FnOnce() -> Result<Vec<Ciphertext>, EncError>,
    ) -> Result<Vec<Ciphertext>, EncError> {
        let start = Instant::now();
        let out = f()?;
        let elapsed = start.elapsed();
        let budget = self.probe.as_ref().map(|p| p.min(ctx, &out));
        telemetry.record(stage, elapsed, scale, budget);
        Ok(out)
    }

    /// Evaluates one lane of an encrypted image.
    pub fn infer_lane(&self, lane: usize, x: &LaneTensor, telemetry: &mut Telemetry) -> Result<LaneTensor, EncError> {
        let ctx = self.lanes.context(lane);
        if x.plain_modulus != ctx.plain_modulus() {
            return Err(EncError::Shape(format!("lane {lane} is not modulus {}", x.plain_modulus)));
        }
        if self.audit {
            super::budget::audit(self.model, ctx)?;
        }
        let m = self.model;
        let shape = [IMAGE_SIDE, IMAGE_SIDE, 1];
        let scale = m.input_scale;
        if let Some(c) = x.elements.iter().find(|c| c.scale_exp() != scale) {
            return Err(EncError::Shape(format!("image at scale {}, model expects {scale}", c.scale_exp())));
        }
        let blocks = [
            (&m.conv1, [Stage::Conv1, Stage::Act1, Stage::Pool1]),
            (&m.conv2, [Stage::Conv2, Stage::Act2, Stage::Pool2]),
        ];
        let (h1, s1, c1) = self.conv_block(ctx, &x.elements, shape, scale, blocks[0].0, blocks[0].1, telemetry)?;
        let (h2, _, c2) = self.conv_block(ctx, &h1, s1, c1, blocks[1].0, blocks[1].1, telemetry)?;
        drop(h1);
        let f1_scale = c2 + m.fc1.weight_scale;
        let h3 = self.timed::<()>(ctx, Stage::Fc1, f1_scale, telemetry, || dense_lane(ctx, &h2, c2, &m.fc1))?;
        let a3_scale = m.activation.output_scale(f1_scale);
        let coeffs = lane_coefficients(ctx, &m.activation, f1_scale);
        let h4 = self.timed::<()>(ctx, Stage::Act3, a3_scale, telemetry, || {
            h3.par_iter()
                .map(|y| activation_ct(ctx, self.rlk, y, &coeffs, a3_scale, true))
                .collect()
        })?;
        let out_scale = a3_scale + m.fc2.weight_scale;
        let out = self.timed::<()>(ctx, Stage::Fc2, out_scale, telemetry, || dense_lane(ctx, &h4, a3_scale, &m.fc2))?;
        self.check_ledger(telemetry)?;
        Ok(LaneTensor {
            plain_modulus: ctx.plain_modulus(),
            elements: out,
        })
    }

    /// Every recorded stage sits at the scale the plan predicts.
    fn check_ledger(&self, telemetry: &Telemetry) -> Result<(), EncError> {
        for r in &telemetry.stages {
            let plan = self.model.plan().iter().find(|p| p.stage == r.stage).expect("planned stage");
            if plan.scale_exp != r.scale_exp {
                return Err(EncError::Shape(format!(
                    "{} at scale {} but planned {}",
                    r.stage.label(),
                    r.scale_exp,
                    plan.scale_exp
                )));
            }
        }
        Ok(())
    }

    /// Evaluates every lane; returns the ten encrypted logits.
    pub fn infer(&self, x: &CipherTensor) -> Result<(CipherTensor, Telemetry), EncError> {
        if x.shape() != [IMAGE_SIDE, IMAGE_SIDE, 1] {
            return Err(EncError::Shape(format!("expected a 28x28x1 image, got {:?}", x.shape())));
        }
        if self.audit {
            for ctx in self.lanes.contexts() {
                super::budget::audit(self.model, ctx)?;
            }
        }
        let mut telemetry = Telemetry::default();
        let mut out = Vec::with_capacity(x.lanes().len());
        for lane in x.lanes() {
            let idx = self
                .lanes
                .lane_of(lane.plain_modulus)
                .ok_or_else(|| EncError::Shape(format!("no context for lane {}", lane.plain_modulus)))?;
            out.push(self.infer_lane(idx, lane, &mut telemetry)?);
        }
        let mut result = CipherTensor::new(vec![self.model.fc2.outputs], self.model.output_scale(), out)?;
        result.budget_floor = telemetry.stages.iter().filter_map(|r| r.min_budget).min();
        Ok((result, telemetry))
    }
}

/// Encrypted logits for an encrypted image.
pub fn infer_enc(
    model: &QuantizedModel,
    lanes: &LaneSet,
    ct_image: &CipherTensor,
    rlk: &RelinKey,
) -> Result<CipherTensor, EncError> {
    Ok(Evaluator::new(model, lanes, rlk).infer(ct_image)?.0)
}

/// Decrypted logits: exact integers, their real values, and the top class.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub integers: Vec<BigInt>,
    pub logits: Vec<f64>,
    pub class: usize,
}

/// Residues of one lane, refusing any element whose budget is spent.
pub fn decrypt_lane(ctx: &Context, sk: &SecretKey, lane: &LaneTensor) -> Result<Vec<u64>, EncError> {
    lane.elements
        .iter()
        .enumerate()
        .map(|(i, ct)| {
            let budget = ctx.noise_budget(sk, ct)?;
            if budget <= 0 {
                return Err(EncError::Budget {
                    layer: format!("output element {i} (t = {})", ctx.plain_modulus()),
                    budget,
                });
            }
            let pt = ctx.decrypt(sk, ct)?;
            Ok(pt.coeffs()[0])
        })
        .collect()
}

/// Combines per-lane residues (`residues[lane][element]`) into logits.
pub fn decode_residues(lanes: &LaneSet, residues: &[Vec<u64>], scale_exp: i32) -> Result<Decoded, EncError> {
    let count = residues.first().map_or(0, Vec::len);
    if residues.iter().any(|r| r.len() != count) {
        return Err(EncError::Shape("lanes disagree on element count".into()));
    }
    let integers = (0..count)
        .map(|i| lanes.reconstruct(&residues.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    let logits: Vec<f64> = integers.iter().map(|v| dequantize(v, scale_exp)).collect();
    Ok(Decoded {
        class: argmax(&integers),
        integers,
        logits,
    })
}

/// Decrypts the encrypted logits; ties go to the lowest index.
pub fn decrypt_result(lanes: &LaneSet, sk: &SecretKey, out: &CipherTensor) -> Result<Decoded, EncError> {
    if out.lanes().len() != lanes.len() {
        return Err(EncError::Shape(format!(
            "result has {} lanes, expected {}",
            out.lanes().len(),
            lanes.len()
        )));
    }
    let mut residues = vec![Vec::new(); lanes.len()];
    for lane in out.lanes() {
        let idx = lanes
            .lane_of(lane.plain_modulus)
            .ok_or_else(|| EncError::Shape(format!("no context for lane {}", lane.plain_modulus)))?;
        residues[idx] = decrypt_lane(lanes.context(idx), sk, lane)?;
    }
    decode_residues(lanes, &residues, out.scale_exp())
}
