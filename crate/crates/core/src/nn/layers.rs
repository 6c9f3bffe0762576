use super::{NnError, Tensor};
use crate::approx::{relu, sigmoid, Approximant, MonomialPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding so that the output has `ceil(h / stride)` rows.
    Same,
    Valid,
}

/// Leading padding and output length along one axis.
pub fn conv_geometry(len: usize, k: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(len);
            (total / 2, out)
        }
        Padding::Valid => (0, if len >= k { (len - k) / stride + 1 } else { 0 }),
    }
}

/// Cross-correlation of an `(h, w, c)` input with filters of shape `(f, kh, kw, c)`,
/// plus one bias per filter.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize, padding: Padding) -> Result<Tensor, NnError> {
    let (h, w, c) = input.hwc()?;
    let [f, kh, kw, wc] = weights.shape()[..] else {
        return Err(NnError::Shape(format!("conv weights must be (f, kh, kw, c), got {:?}", weights.shape())));
    };
    if wc != c {
        return Err(NnError::Shape(format!("input has {c} channels, filters expect {wc}")));
    }
    if bias.shape() != [f] {
        return Err(NnError::Shape(format!("conv bias must be ({f}), got {:?}", bias.shape())));
    }
    if stride == 0 {
        return Err(NnError::Shape("stride must be positive".into()));
    }
    let (pad_y, oh) = conv_geometry(h, kh, stride, padding);
    let (pad_x, ow) = conv_geometry(w, kw, stride, padding);
    let mut out = Tensor::zeros(vec![oh, ow, f]);
    let wd = weights.data();
    let od = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for fi in 0..f {
                let mut acc = bias.data()[fi];
                for ky in 0..kh {
                    let Some(y) = (oy * stride + ky).checked_sub(pad_y).filter(|&y| y < h) else {
                        continue;
                    };
                    for kx in 0..kw {
                        let Some(x) = (ox * stride + kx).checked_sub(pad_x).filter(|&x| x < w) else {
                            continue;
                        };
                        for ci in 0..c {
                            acc += input.at(y, x, ci) * wd[((fi * kh + ky) * kw + kx) * c + ci];
                        }
                    }
                }
                od[(oy * ow + ox) * f + fi] = acc;
            }
        }
    }
    Ok(out)
}

/// Mean over `window × window` blocks with the given stride.
pub fn mean_pool(input: &Tensor, window: usize, stride: usize) -> Result<Tensor, NnError> {
    let (h, w, c) = input.hwc()?;
    if window == 0 || stride == 0 || h < window || w < window {
        return Err(NnError::Shape(format!("cannot pool {h}x{w} with window {window}")));
    }
    if (h - window) % stride != 0 || (w - window) % stride != 0 {
        return Err(NnError::Shape(format!(
            "{h}x{w} is not tiled by window {window} at stride {stride}"
        )));
    }
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let norm = 1.0 / (window * window) as f64;
    let mut out = Tensor::zeros(vec![oh, ow, c]);
    let od = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            for ci in 0..c {
                let mut acc = 0.0;
                for dy in 0..window {
                    for dx in 0..window {
                        acc += input.at(oy * stride + dy, ox * stride + dx, ci);
                    }
                }
                od[(oy * ow + ox) * c + ci] = acc * norm;
            }
        }
    }
    Ok(out)
}

/// `W x + b` with `W` of shape `(out, in)`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let [out, inp] = weights.shape()[..] else {
        return Err(NnError::Shape(format!("dense weights must be (out, in), got {:?}", weights.shape())));
    };
    if input.len() != inp {
        return Err(NnError::Shape(format!("dense expects {inp} inputs, got {}", input.len())));
    }
    if bias.shape() != [out] {
        return Err(NnError::Shape(format!("dense bias must be ({out}), got {:?}", bias.shape())));
    }
    let x = input.data();
    let data = weights
        .data()
        .chunks_exact(inp)
        .zip(bias.data())
        .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    Ok(Tensor::vector(data))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Poly(MonomialPoly),
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Poly(_) => "poly",
        }
    }
}

/// Result of an elementwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Activated {
    pub output: Tensor,
    /// Inputs outside a polynomial's interval (evaluated anyway).
    pub out_of_interval: usize,
}

pub fn apply_activation(input: &Tensor, act: &Activation) -> Activated {
    match act {
        Activation::Relu => Activated {
            output: input.map(relu),
            out_of_interval: 0,
        },
        Activation::Sigmoid => Activated {
            output: input.map(sigmoid),
            out_of_interval: 0,
        },
        Activation::Poly(p) => {
            let interval = p.interval();
            Activated {
                output: input.map(|v| p.value(v)),
                out_of_interval: input.data().iter().filter(|&&v| !interval.contains(v)).count(),
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(input: &Tensor) -> Tensor {
    let (_, hi) = input.min_max();
    let exps: Vec<f64> = input.data().iter().map(|&v| (v - hi).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::vector(exps.into_iter().map(|e| e / total).collect())
}
