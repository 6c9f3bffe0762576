//! Plaintext inference for the 28×28 digit CNN, used as the oracle for
//! encrypted inference.

mod layers;
mod model;
pub mod pgm;
mod tensor;
pub mod weights;

use thiserror::Error;

pub use layers::{apply_activation, conv2d, conv_geometry, dense, mean_pool, softmax, Activated, Activation, Padding};
pub use model::{
    infer_plain, parameter_shapes, LayerParams, LayerSpec, ModelWeights, PlainInference, ScaleHint, WeightsMeta,
    ARCHITECTURE, ARCHITECTURE_NAME, CLASSES, IMAGE_SIDE,
};
pub use pgm::{decode_pgm, encode_pgm, read_image};
pub use tensor::{argmax, Tensor};
pub use weights::{load_weights, save_weights};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("incomplete weights: {0}")]
    Incomplete(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("corrupt weights header: {0}")]
    Header(String),
    #[error("unexpected end of weights stream")]
    Truncated,
    #[error("bad image: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
