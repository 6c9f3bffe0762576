use super::layers::{apply_activation, conv2d, dense, mean_pool, Activation, Padding};
use super::{NnError, Tensor};

pub const IMAGE_SIDE: usize = 28;
pub const CLASSES: usize = 10;

/// One stage of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        name: &'static str,
        window: usize,
        filters: usize,
        stride: usize,
        padding: Padding,
    },
    Activation,
    MeanPool {
        window: usize,
        stride: usize,
    },
    Flatten,
    Fc {
        name: &'static str,
        outputs: usize,
    },
    Softmax,
}

/// conv 5x5x5 → act → pool → conv 5x5x10 → act → pool → fc 128 → act → fc 10 → softmax.
pub const ARCHITECTURE: [LayerSpec; 11] = [
    LayerSpec::Conv {
        name: "conv1",
        window: 5,
        filters: 5,
        stride: 1,
        padding: Padding::Same,
    },
    LayerSpec::Activation,
    LayerSpec::MeanPool { window: 2, stride: 2 },
    LayerSpec::Conv {
        name: "conv2",
        window: 5,
        filters: 10,
        stride: 1,
        padding: Padding::Same,
    },
    LayerSpec::Activation,
    LayerSpec::MeanPool { window: 2, stride: 2 },
    LayerSpec::Flatten,
    LayerSpec::Fc { name: "fc1", outputs: 128 },
    LayerSpec::Activation,
    LayerSpec::Fc { name: "fc2", outputs: CLASSES },
    LayerSpec::Softmax,
];

pub const ARCHITECTURE_NAME: &str = "cnn28-conv5x5x5-pool-conv5x5x10-pool-fc128-fc10";

/// Expected `(name, weight shape, bias shape)` for every parameterised layer.
pub fn parameter_shapes() -> Vec<(&'static str, Vec<usize>, Vec<usize>)> {
    let mut shape = vec![IMAGE_SIDE, IMAGE_SIDE, 1];
    let mut out = Vec::new();
    for layer in &ARCHITECTURE {
        match *layer {
            LayerSpec::Conv { name, window, filters, stride, .. } => {
                out.push((name, vec![filters, window, window, shape[2]], vec![filters]));
                shape = vec![shape[0].div_ceil(stride), shape[1].div_ceil(stride), filters];
            }
            LayerSpec::MeanPool { window, stride } => {
                shape = vec![(shape[0] - window) / stride + 1, (shape[1] - window) / stride + 1, shape[2]];
            }
            LayerSpec::Flatten => shape = vec![shape.iter().product()],
            LayerSpec::Fc { name, outputs } => {
                out.push((name, vec![outputs, shape[0]], vec![outputs]));
                shape = vec![outputs];
            }
            LayerSpec::Activation | LayerSpec::Softmax => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub name: String,
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Fixed-point scale exponents suggested for encrypted inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScaleHint {
    pub input: i32,
    pub weight: i32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightsMeta {
    /// Activation the weights were trained with.
    pub activation: Option<Activation>,
    pub training_accuracy: Option<f64>,
    pub scale_hint: Option<ScaleHint>,
}

/// Validated parameters for [`ARCHITECTURE`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    layers: Vec<LayerParams>,
    meta: WeightsMeta,
}

impl ModelWeights {
    /// Checks names, shapes and finiteness; layers may come in any order.
    pub fn new(layers: Vec<LayerParams>, meta: WeightsMeta) -> Result<Self, NnError> {
        let mut ordered = Vec::new();
        for (name, wshape, bshape) in parameter_shapes() {
            let layer = layers
                .iter()
                .find(|l| l.name == name)
                .ok_or_else(|| NnError::Incomplete(format!("missing layer {name}")))?;
            for (what, t, shape) in [("weight", &layer.weight, &wshape), ("bias", &layer.bias, &bshape)] {
                if t.shape() != shape.as_slice() {
                    return Err(NnError::Shape(format!(
                        "{name}.{what}: expected {shape:?}, got {:?}",
                        t.shape()
                    )));
                }
                if t.data().iter().any(|v| !v.is_finite()) {
                    return Err(NnError::NonFinite(format!("{name}.{what}")));
                }
            }
            ordered.push(layer.clone());
        }
        if let Some(extra) = layers.iter().find(|l| !ordered.iter().any(|o| o.name == l.name)) {
            return Err(NnError::Shape(format!("unknown layer {}", extra.name)));
        }
        Ok(Self { layers: ordered, meta })
    }

    /// All weights and biases zero.
    pub fn zeros() -> Self {
        let layers = parameter_shapes()
            .into_iter()
            .map(|(name, w, b)| LayerParams {
                name: name.into(),
                weight: Tensor::zeros(w),
                bias: Tensor::zeros(b),
            })
            .collect();
        Self {
            layers,
            meta: WeightsMeta::default(),
        }
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&LayerParams> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn meta(&self) -> &WeightsMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: WeightsMeta) -> Self {
        self.meta = meta;
        self
    }

    fn params(&self, name: &str) -> &LayerParams {
        self.layer(name).expect("validated at construction")
    }
}

/// Logits together with per-stage diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainInference {
    pub logits: Tensor,
    /// `(stage label, output)` after every stage except softmax.
    pub stages: Vec<(String, Tensor)>,
    pub out_of_interval: usize,
}

impl PlainInference {
    pub fn class(&self) -> usize {
        self.logits.argmax()
    }
}

/// Runs the network up to (not including) softmax with `act` at every activation.
pub fn infer_plain(model: &ModelWeights, image: &Tensor, act: &Activation) -> Result<PlainInference, NnError> {
    if image.shape() != [IMAGE_SIDE, IMAGE_SIDE, 1] {
        return Err(NnError::Shape(format!("image must be 28x28x1, got {:?}", image.shape())));
    }
    let mut x = image.clone();
    let mut stages = Vec::new();
    let mut out_of_interval = 0;
    for (i, layer) in ARCHITECTURE.iter().enumerate() {
        x = match *layer {
            LayerSpec::Conv { name, stride, padding, .. } => {
                let p = model.params(name);
                conv2d(&x, &p.weight, &p.bias, stride, padding)?
            }
            LayerSpec::Activation => {
                let a = apply_activation(&x, act);
                out_of_interval += a.out_of_interval;
                a.output
            }
            LayerSpec::MeanPool { window, stride } => mean_pool(&x, window, stride)?,
            LayerSpec::Flatten => x.flatten(),
            LayerSpec::Fc { name, .. } => {
                let p = model.params(name);
                dense(&x, &p.weight, &p.bias)?
            }
            LayerSpec::Softmax => break,
        };
        stages.push((format!("{i}:{}", stage_label(layer)), x.clone()));
    }
    Ok(PlainInference {
        logits: x,
        stages,
        out_of_interval,
    })
}

fn stage_label(layer: &LayerSpec) -> &'static str {
    match layer {
        LayerSpec::Conv { name, .. } | LayerSpec::Fc { name, .. } => name,
        LayerSpec::Activation => "activation",
        LayerSpec::MeanPool { .. } => "mean_pool",
        LayerSpec::Flatten => "flatten",
        LayerSpec::Softmax => "softmax",
    }
}
