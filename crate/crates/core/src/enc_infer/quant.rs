//! Fixed-point quantization of the network and its exact integer oracle.

use num_bigint::{BigInt, Sign};

use super::{EncError, Stage};
use crate::approx::MonomialPoly;
use crate::nn::{conv_geometry, ModelWeights, Padding, Tensor, IMAGE_SIDE};

/// Largest magnitude accepted for a quantized weight or coefficient.
const WEIGHT_LIMIT: f64 = (1u64 << 62) as f64;

/// `round(value · 2^scale)` computed exactly, ties away from zero.
pub fn round_scaled(value: f64, scale: i32) -> BigInt {
    if value == 0.0 || !value.is_finite() {
        return BigInt::default();
    }
    let bits = value.to_bits();
    let negative = bits >> 63 == 1;
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exp_field == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp_field - 1075)
    };
    let shift = exp + scale as i64;
    let mag = if shift >= 0 {
        BigInt::from(mant) << shift as usize
    } else {
        let s = (-shift) as usize;
        if s > 64 {
            BigInt::default()
        } else {
            (BigInt::from(mant) + (BigInt::from(1u8) << (s - 1))) >> s
        }
    };
    if negative {
        -mag
    } else {
        mag
    }
}

/// `v / 2^scale` as the nearest-ish `f64`.
pub fn dequantize(v: &BigInt, scale: i32) -> f64 {
    let bits = v.bits() as i64;
    if bits <= 62 {
        return i64::try_from(v).expect("fits") as f64 * 2f64.powi(-scale);
    }
    let drop = bits - 62;
    let top = i64::try_from(v >> drop as usize).expect("fits");
    top as f64 * 2f64.powi((drop - scale as i64) as i32)
}

fn quantize_weight(v: f64, scale: i32, layer: &str) -> Result<i64, EncError> {
    let s = (v * 2f64.powi(scale)).round();
    if s.abs() >= WEIGHT_LIMIT {
        return Err(EncError::Headroom {
            layer: layer.to_string(),
            required_bits: s.abs().log2().ceil() as u32 + 1,
            available_bits: 63,
        });
    }
    Ok(s as i64)
}

/// A convolution with integer weights `(f, kh, kw, c)` and biases stored at
/// `bias_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct QConv {
    pub weights: Vec<i64>,
    pub shape: [usize; 4],
    pub bias: Vec<BigInt>,
    pub stride: usize,
    pub padding: Padding,
    pub weight_scale: i32,
    pub bias_scale: i32,
}

impl QConv {
    pub fn from_float(
        weight: &Tensor,
        bias: &Tensor,
        stride: usize,
        padding: Padding,
        weight_scale: i32,
        bias_scale: i32,
        name: &str,
    ) -> Result<Self, EncError> {
        let [f, kh, kw, c] = weight.shape()[..] else {
            return Err(EncError::Shape(format!("{name}: conv weights must be rank 4")));
        };
        if bias.shape() != [f] {
            return Err(EncError::Shape(format!("{name}: bias must have {f} entries")));
        }
        Ok(Self {
            weights: weight
                .data()
                .iter()
                .map(|&w| quantize_weight(w, weight_scale, name))
                .collect::<Result<_, _>>()?,
            shape: [f, kh, kw, c],
            bias: bias.data().iter().map(|&b| round_scaled(b, bias_scale)).collect(),
            stride,
            padding,
            weight_scale,
            bias_scale,
        })
    }

    pub fn filters(&self) -> usize {
        self.shape[0]
    }

    /// Output `(h, w, f)` for an `(h, w, c)` input.
    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3], EncError> {
        let [f, kh, kw, c] = self.shape;
        if input[2] != c {
            return Err(EncError::Shape(format!("input has {} channels, filters expect {c}", input[2])));
        }
        let (_, oh) = conv_geometry(input[0], kh, self.stride, self.padding);
        let (_, ow) = conv_geometry(input[1], kw, self.stride, self.padding);
        Ok([oh, ow, f])
    }

    /// `(input index, weight)` pairs feeding output `(oy, ox, fi)`.
    pub fn taps(&self, input: [usize; 3], oy: usize, ox: usize, fi: usize) -> Vec<(usize, i64)> {
        let [_, kh, kw, c] = self.shape;
        let [h, w, _] = input;
        let (pad_y, _) = conv_geometry(h, kh, self.stride, self.padding);
        let (pad_x, _) = conv_geometry(w, kw, self.stride, self.padding);
        let mut taps = Vec::with_capacity(kh * kw * c);
        for ky in 0..kh {
            let Some(y) = (oy * self.stride + ky).checked_sub(pad_y).filter(|&y| y < h) else {
                continue;
            };
            for kx in 0..kw {
                let Some(x) = (ox * self.stride + kx).checked_sub(pad_x).filter(|&x| x < w) else {
                    continue;
                };
                for ci in 0..c {
                    taps.push(((y * w + x) * c + ci, self.weights[((fi * kh + ky) * kw + kx) * c + ci]));
                }
            }
        }
        taps
    }
}

/// A dense layer with integer weights `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QDense {
    pub weights: Vec<i64>,
    pub outputs: usize,
    pub inputs: usize,
    pub bias: Vec<BigInt>,
    pub weight_scale: i32,
    pub bias_scale: i32,
}

impl QDense {
    pub fn from_float(
        weight: &Tensor,
        bias: &Tensor,
        weight_scale: i32,
        bias_scale: i32,
        name: &str,
    ) -> Result<Self, EncError> {
        let [outputs, inputs] = weight.shape()[..] else {
            return Err(EncError::Shape(format!("{name}: dense weights must be rank 2")));
        };
        if bias.shape() != [outputs] {
            return Err(EncError::Shape(format!("{name}: bias must have {outputs} entries")));
        }
        Ok(Self {
            weights: weight
                .data()
                .iter()
                .map(|&w| quantize_weight(w, weight_scale, name))
                .collect::<Result<_, _>>()?,
            outputs,
            inputs,
            bias: bias.data().iter().map(|&b| round_scaled(b, bias_scale)).collect(),
            weight_scale,
            bias_scale,
        })
    }

    pub fn row(&self, o: usize) -> &[i64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

/// A monomial activation polynomial with coefficients `round(a_k · 2^coeff_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QPoly {
    pub coeffs: Vec<i64>,
    pub coeff_scale: i32,
}

impl QPoly {
    pub const MAX_DEGREE: usize = 9;

    pub fn from_monomial(poly: &MonomialPoly, coeff_scale: i32) -> Result<Self, EncError> {
        let coeffs = poly
            .coeffs()
            .iter()
            .map(|&a| quantize_weight(a, coeff_scale, "activation"))
            .collect::<Result<Vec<_>, _>>()?;
        let q = Self { coeffs, coeff_scale };
        q.check_degree()?;
        Ok(q)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn check_degree(&self) -> Result<(), EncError> {
        if self.coeffs.is_empty() || self.degree() > Self::MAX_DEGREE {
            return Err(EncError::Degree(self.degree()));
        }
        Ok(())
    }

    pub fn output_scale(&self, input_scale: i32) -> i32 {
        self.degree() as i32 * input_scale + self.coeff_scale
    }

    /// `A_k · 2^((d - k)·s)`: the coefficients aligned to the common output scale.
    pub fn aligned(&self, input_scale: i32) -> Vec<BigInt> {
        let d = self.degree() as i32;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &a)| BigInt::from(a) << ((d - k as i32) * input_scale) as usize)
            .collect()
    }

    pub fn eval_int(&self, y: &BigInt, input_scale: i32) -> BigInt {
        self.eval_aligned(&self.aligned(input_scale), y)
    }

    fn eval_aligned(&self, aligned: &[BigInt], y: &BigInt) -> BigInt {
        aligned.iter().rev().fold(BigInt::default(), |acc, a| acc * y + a)
    }
}

/// Expected shape, scale and worst-case magnitude after one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub stage: Stage,
    pub shape: Vec<usize>,
    pub scale_exp: i32,
    /// `log2` of the largest absolute integer any element can take.
    pub bound_bits: f64,
}

impl StagePlan {
    /// Bits of plaintext capacity the stage needs, sign included.
    pub fn required_bits(&self) -> u32 {
        self.bound_bits.max(0.0).floor() as u32 + 2
    }
}

/// The network with every weight, bias and activation coefficient as an integer.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub input_scale: i32,
    pub weight_scale: i32,
    pub conv1: QConv,
    pub conv2: QConv,
    pub fc1: QDense,
    pub fc2: QDense,
    pub activation: QPoly,
    plan: Vec<StagePlan>,
}

/// Quantizes `model` with inputs at `2^input_scale`, weights and activation
/// coefficients at `2^weight_scale`, and checks that every stage fits in
/// `capacity_bits` of signed plaintext.
pub fn quantize_model(
    model: &ModelWeights,
    input_scale: i32,
    weight_scale: i32,
    poly: &MonomialPoly,
    capacity_bits: u32,
) -> Result<QuantizedModel, EncError> {
    let q = QuantizedModel::new(model, input_scale, weight_scale, poly)?;
    q.check_headroom(capacity_bits)?;
    Ok(q)
}

fn layer<'a>(model: &'a ModelWeights, name: &str) -> Result<(&'a Tensor, &'a Tensor), EncError> {
    let p = model
        .layer(name)
        .ok_or_else(|| EncError::Shape(format!("model has no layer {name}")))?;
    Ok((&p.weight, &p.bias))
}

fn log2_sum(values: impl Iterator<Item = f64>) -> f64 {
    values.sum::<f64>().log2()
}

fn big_log2(v: &BigInt) -> f64 {
    if v.sign() == Sign::NoSign {
        f64::NEG_INFINITY
    } else {
        dequantize(v, 0).abs().log2()
    }
}

impl QuantizedModel {
    /// Quantizes without a headroom check.
    pub fn new(model: &ModelWeights, input_scale: i32, weight_scale: i32, poly: &MonomialPoly) -> Result<Self, EncError> {
        if input_scale < 0 || weight_scale < 0 {
            return Err(EncError::Shape("scale exponents must be non-negative".into()));
        }
        let activation = QPoly::from_monomial(poly, weight_scale)?;
        let s1 = input_scale + weight_scale;
        let (w, b) = layer(model, "conv1")?;
        let conv1 = QConv::from_float(w, b, 1, Padding::Same, weight_scale, s1, "conv1")?;
        let s2 = activation.output_scale(s1) + 2 + weight_scale;
        let (w, b) = layer(model, "conv2")?;
        let conv2 = QConv::from_float(w, b, 1, Padding::Same, weight_scale, s2, "conv2")?;
        let s3 = activation.output_scale(s2) + 2 + weight_scale;
        let (w, b) = layer(model, "fc1")?;
        let fc1 = QDense::from_float(w, b, weight_scale, s3, "fc1")?;
        let s4 = activation.output_scale(s3) + weight_scale;
        let (w, b) = layer(model, "fc2")?;
        let fc2 = QDense::from_float(w, b, weight_scale, s4, "fc2")?;
        let mut q = Self {
            input_scale,
            weight_scale,
            conv1,
            conv2,
            fc1,
            fc2,
            activation,
            plan: Vec::new(),
        };
        q.plan = q.analyse();
        Ok(q)
    }

    /// Per-stage shapes, scales and magnitude bounds.
    pub fn plan(&self) -> &[StagePlan] {
        &self.plan
    }

    pub fn output_scale(&self) -> i32 {
        self.plan.last().expect("non-empty plan").scale_exp
    }

    /// Capacity needed by the widest stage.
    pub fn required_bits(&self) -> u32 {
        self.plan.iter().map(StagePlan::required_bits).max().unwrap_or(0)
    }

    /// Fails at the first stage whose bound exceeds `capacity_bits`.
    pub fn check_headroom(&self, capacity_bits: u32) -> Result<(), EncError> {
        match self.plan.iter().find(|p| p.required_bits() > capacity_bits) {
            Some(p) => Err(EncError::Headroom {
                layer: p.stage.label().to_string(),
                required_bits: p.required_bits(),
                available_bits: capacity_bits,
            }),
            None => Ok(()),
        }
    }

    fn analyse(&self) -> Vec<StagePlan> {
        let mut plan = Vec::new();
        let mut shape = [IMAGE_SIDE, IMAGE_SIDE, 1];
        let mut scale = self.input_scale;
        // Per-channel bounds, log2.
        let mut bound = vec![scale as f64];
        let act = &self.activation;
        let act_bound = |b: f64, s: i32| -> f64 {
            log2_sum(
                act.aligned(s)
                    .iter()
                    .enumerate()
                    .map(|(k, a)| (big_log2(a) + k as f64 * b).exp2()),
            )
        };
        let push = |plan: &mut Vec<StagePlan>, stage, shape: Vec<usize>, scale, bound: &[f64]| {
            plan.push(StagePlan {
                stage,
                shape,
                scale_exp: scale,
                bound_bits: bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
        };
        for (conv, stages) in [
            (&self.conv1, [Stage::Conv1, Stage::Act1, Stage::Pool1]),
            (&self.conv2, [Stage::Conv2, Stage::Act2, Stage::Pool2]),
        ] {
            let [f, kh, kw, c] = conv.shape;
            bound = (0..f)
                .map(|fi| {
                    let taps = (0..kh * kw * c).map(|k| {
                        let w = conv.weights[fi * kh * kw * c + k] as f64;
                        w.abs() * bound[k % c].exp2()
                    });
                    let b = big_log2(&conv.bias[fi]).exp2();
                    log2_sum(taps.chain(std::iter::once(b)))
                })
                .collect();
            scale += conv.weight_scale;
            shape = conv.output_shape(shape).expect("consistent shapes");
            push(&mut plan, stages[0], shape.to_vec(), scale, &bound);
            bound = bound.iter().map(|&b| act_bound(b, scale)).collect();
            scale = act.output_scale(scale);
            push(&mut plan, stages[1], shape.to_vec(), scale, &bound);
            bound = bound.iter().map(|&b| b + 2.0).collect();
            scale += 2;
            shape = [shape[0] / 2, shape[1] / 2, shape[2]];
            push(&mut plan, stages[2], shape.to_vec(), scale, &bound);
        }
        let [h, w, c] = shape;
        let mut flat: Vec<f64> = (0..h * w * c).map(|i| bound[i % c]).collect();
        for (fc, stage, activate) in [(&self.fc1, Stage::Fc1, true), (&self.fc2, Stage::Fc2, false)] {
            flat = (0..fc.outputs)
                .map(|o| {
                    let taps = fc.row(o).iter().zip(&flat).map(|(&w, &b)| (w as f64).abs() * b.exp2());
                    log2_sum(taps.chain(std::iter::once(big_log2(&fc.bias[o]).exp2())))
                })
                .collect();
            scale += fc.weight_scale;
            push(&mut plan, stage, vec![fc.outputs], scale, &flat);
            if activate {
                flat = flat.iter().map(|&b| act_bound(b, scale)).collect();
                scale = act.output_scale(scale);
                push(&mut plan, Stage::Act3, vec![fc.outputs], scale, &flat);
            }
        }
        plan
    }

    /// Pixels as integers at `2^input_scale`.
    pub fn quantize_image(&self, image: &Tensor) -> Result<Vec<i64>, EncError> {
        quantize_image(image, self.input_scale)
    }

    /// Runs the integer pipeline, returning every stage output.
    pub fn trace_integer(&self, image: &Tensor) -> Result<Vec<(Stage, Vec<BigInt>)>, EncError> {
        let pixels: Vec<BigInt> = self.quantize_image(image)?.into_iter().map(BigInt::from).collect();
        let mut out = Vec::new();
        let mut x = pixels;
        let mut shape = [IMAGE_SIDE, IMAGE_SIDE, 1];
        let mut scale = self.input_scale;
        for (conv, stages) in [
            (&self.conv1, [Stage::Conv1, Stage::Act1, Stage::Pool1]),
            (&self.conv2, [Stage::Conv2, Stage::Act2, Stage::Pool2]),
        ] {
            x = conv_int(&x, shape, conv)?;
            shape = conv.output_shape(shape)?;
            scale += conv.weight_scale;
            out.push((stages[0], x.clone()));
            x = poly_int(&x, &self.activation, scale);
            scale = self.activation.output_scale(scale);
            out.push((stages[1], x.clone()));
            x = pool_int(&x, shape)?;
            shape = [shape[0] / 2, shape[1] / 2, shape[2]];
            scale += 2;
            out.push((stages[2], x.clone()));
        }
        x = dense_int(&x, &self.fc1)?;
        scale += self.fc1.weight_scale;
        out.push((Stage::Fc1, x.clone()));
        x = poly_int(&x, &self.activation, scale);
        out.push((Stage::Act3, x.clone()));
        x = dense_int(&x, &self.fc2)?;
        out.push((Stage::Fc2, x));
        Ok(out)
    }

    /// Integer logits at `2^output_scale()`.
    pub fn infer_integer(&self, image: &Tensor) -> Result<Vec<BigInt>, EncError> {
        Ok(self.trace_integer(image)?.pop().expect("non-empty trace").1)
    }

    /// Integer logits divided by `2^output_scale()`.
    pub fn infer_dequantized(&self, image: &Tensor) -> Result<Vec<f64>, EncError> {
        let scale = self.output_scale();
        Ok(self.infer_integer(image)?.iter().map(|v| dequantize(v, scale)).collect())
    }
}

pub fn quantize_image(image: &Tensor, scale: i32) -> Result<Vec<i64>, EncError> {
    if image.shape() != [IMAGE_SIDE, IMAGE_SIDE, 1] {
        return Err(EncError::Shape(format!("image must be 28x28x1, got {:?}", image.shape())));
    }
    image
        .data()
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * 2f64.powi(scale)).round() as i64)
            } else {
                Err(EncError::Pixel(p))
            }
        })
        .collect()
}

pub fn conv_int(x: &[BigInt], shape: [usize; 3], conv: &QConv) -> Result<Vec<BigInt>, EncError> {
    check_len(x.len(), shape.iter().product())?;
    let [oh, ow, f] = conv.output_shape(shape)?;
    let mut out = Vec::with_capacity(oh * ow * f);
    for oy in 0..oh {
        for ox in 0..ow {
            for fi in 0..f {
                let mut acc = conv.bias[fi].clone();
                for (i, w) in conv.taps(shape, oy, ox, fi) {
                    acc += &x[i] * w;
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

pub fn dense_int(x: &[BigInt], fc: &QDense) -> Result<Vec<BigInt>, EncError> {
    check_len(x.len(), fc.inputs)?;
    Ok((0..fc.outputs)
        .map(|o| {
            fc.row(o)
                .iter()
                .zip(x)
                .fold(fc.bias[o].clone(), |acc, (&w, v)| acc + v * w)
        })
        .collect())
}

/// Sums of 2×2 windows at stride 2; the `÷4` is left to the scale.
pub fn pool_int(x: &[BigInt], shape: [usize; 3]) -> Result<Vec<BigInt>, EncError> {
    check_len(x.len(), shape.iter().product())?;
    let [h, w, c] = shape;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(EncError::Shape(format!("cannot pool {h}x{w}")));
    }
    let mut out = Vec::with_capacity(h * w * c / 4);
    for oy in 0..h / 2 {
        for ox in 0..w / 2 {
            for ci in 0..c {
                out.push(pool_window(shape, oy, ox, ci).iter().map(|&i| &x[i]).sum());
            }
        }
    }
    Ok(out)
}

/// Input indices of the 2×2 window under pooled output `(oy, ox, ci)`.
pub fn pool_window(shape: [usize; 3], oy: usize, ox: usize, ci: usize) -> [usize; 4] {
    let [_, w, c] = shape;
    let at = |y: usize, x: usize| (y * w + x) * c + ci;
    [
        at(2 * oy, 2 * ox),
        at(2 * oy, 2 * ox + 1),
        at(2 * oy + 1, 2 * ox),
        at(2 * oy + 1, 2 * ox + 1),
    ]
}

pub fn poly_int(x: &[BigInt], poly: &QPoly, input_scale: i32) -> Vec<BigInt> {
    let aligned = poly.aligned(input_scale);
    x.iter().map(|y| poly.eval_aligned(&aligned, y)).collect()
}

fn check_len(got: usize, want: usize) -> Result<(), EncError> {
    if got != want {
        return Err(EncError::Shape(format!("expected {want} elements, got {got}")));
    }
    Ok(())
}
