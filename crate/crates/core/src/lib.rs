//! Encrypted CNN inference with polynomial activations.
#![doc = include_str!("../../../book/src/overview.md")]

#[doc = include_str!("../../../book/src/approximation.md")]
pub mod approx;
#[doc = include_str!("../../../book/src/encrypted-inference.md")]
pub mod enc_infer;
#[doc = include_str!("../../../book/src/network.md")]
pub mod nn;
#[doc = include_str!("../../../book/src/profiles.md")]
pub mod profile;
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod proto;
#[doc = include_str!("../../../book/src/she.md")]
pub mod she;
