//! Inference on encrypted images.
//!
//! Every scalar of a tensor is one ciphertext per plaintext lane. Lanes share
//! the ring and the keys and differ only in the plaintext modulus, so the
//! integer pipeline runs modulo the product of the lane moduli and the final
//! logits are recovered by the Chinese remainder theorem.

mod budget;
mod eval;
mod lanes;
mod quant;
mod tensor;

use thiserror::Error;

use crate::nn::NnError;
use crate::she::SheError;

pub use eval::{
    activation_ct, activation_enc, centered_residue, conv2d_enc, conv_lane, conv_output, decode_residues,
    decrypt_lane, decrypt_result, dense_lane, encrypt_image, encrypt_lane, fc_enc, infer_enc, lane_coefficients,
    mean_pool_enc, BudgetProbe, Decoded, Evaluator, StageRecord, Telemetry,
};
pub use budget::{audit, forecast, BudgetForecast};
pub use lanes::{capacity_bits, lane_primes, LaneSet};
pub use tensor::{CipherTensor, LaneTensor};
pub use quant::{
    conv_int, dense_int, dequantize, pool_int, pool_window, poly_int, quantize_image, quantize_model,
    round_scaled, QConv, QDense, QPoly, QuantizedModel, StagePlan,
};

/// The encrypted stages in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Conv1,
    Act1,
    Pool1,
    Conv2,
    Act2,
    Pool2,
    Fc1,
    Act3,
    Fc2,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Conv1,
        Stage::Act1,
        Stage::Pool1,
        Stage::Conv2,
        Stage::Act2,
        Stage::Pool2,
        Stage::Fc1,
        Stage::Act3,
        Stage::Fc2,
    ];

    /// Row name in the timing table.
    pub fn label(self) -> &'static str {
        match self {
            Stage::Conv1 => "1st Conv",
            Stage::Act1 => "1st AF",
            Stage::Pool1 => "1st pooling layer",
            Stage::Conv2 => "2nd Conv",
            Stage::Act2 => "2nd AF",
            Stage::Pool2 => "2nd pooling layer",
            Stage::Fc1 => "1st FC layer",
            Stage::Act3 => "3rd AF",
            Stage::Fc2 => "2nd FC layer",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Stage::Conv1 => "5x5 conv 5 maps 28x28x1 -> 28x28x5",
            Stage::Act1 | Stage::Act2 | Stage::Act3 => "polynomial activation",
            Stage::Pool1 => "2x2 mean pool -> 14x14x5",
            Stage::Conv2 => "5x5 conv 10 maps -> 14x14x10",
            Stage::Pool2 => "2x2 mean pool -> 7x7x10",
            Stage::Fc1 => "490 -> 128",
            Stage::Fc2 => "128 -> 10",
        }
    }
}

#[derive(Debug, Error)]
pub enum EncError {
    #[error("plaintext headroom exceeded at {layer}: needs {required_bits} bits, have {available_bits}")]
    Headroom {
        layer: String,
        required_bits: u32,
        available_bits: u32,
    },
    #[error("noise budget exhausted at {layer} ({budget} bits)")]
    Budget { layer: String, budget: i64 },
    #[error("predicted noise budget exhausted at {layer} for t = {plain_modulus} ({budget} bits)")]
    PredictedBudget {
        layer: String,
        plain_modulus: u64,
        budget: i64,
    },
    #[error("activation degree {0} outside 1..=9")]
    Degree(usize),
    #[error("pixel value {0} outside [0, 1]")]
    Pixel(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed cipher tensor: {0}")]
    Format(String),
    #[error(transparent)]
    She(#[from] SheError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
