//! A fast protocol setup: one 55-bit prime, one 20-bit lane, and a linear
//! classifier in place of the network, so a request costs milliseconds.

use litd::enc_infer::{dense_int, fc_enc, quantize_image, CipherTensor, EncError, LaneSet, QDense, Telemetry};
use litd::nn::{argmax, Tensor};
use litd::proto::*;
use litd::she::{coeff_primes_for_bits, EncryptionParams, RelinKey};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const INPUT_SCALE: i32 = 4;

pub fn fast_keys(seed: u64) -> SessionKeys {
    let params = EncryptionParams::new(1024, coeff_primes_for_bits(1024, 55), 2);
    SessionKeys::setup_params(&params, LaneSpec { bits: 20, count: 1 }, Some(seed)).unwrap()
}

pub struct Linear(pub QDense);

impl Linear {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Linear(QDense {
            weights: (0..7840).map(|_| rng.gen_range(-3..=3)).collect(),
            outputs: 10,
            inputs: 784,
            bias: (0..10).map(|_| BigInt::from(rng.gen_range(-500..=500))).collect(),
            weight_scale: 2,
            bias_scale: INPUT_SCALE + 2,
        })
    }

    pub fn class(&self, image: &Tensor) -> usize {
        let x: Vec<BigInt> = quantize_image(image, INPUT_SCALE).unwrap().into_iter().map(BigInt::from).collect();
        argmax(&dense_int(&x, &self.0).unwrap())
    }
}

impl Evaluate for Linear {
    fn evaluate(&self, lanes: &LaneSet, _rlk: &RelinKey, image: &CipherTensor) -> Result<(CipherTensor, Telemetry), EncError> {
        let x = image.clone().reshape(vec![784])?;
        Ok((fc_enc(lanes, &x, &self.0)?, Telemetry::default()))
    }
}

pub struct Party {
    pub keys: SessionKeys,
    pub client: Client,
    pub server: Server<Linear>,
}

pub fn party(seed: u64) -> Party {
    let keys = fast_keys(seed);
    Party {
        client: Client::new(keys.clone(), INPUT_SCALE).unwrap(),
        server: Server::new(keys.server_keys(), Linear::new(seed)).unwrap().with_seed(seed),
        keys,
    }
}

/// The code a single bit flip at `pos` must produce.
pub fn expected_code(pos: usize) -> RejectCode {
    let body = FRAME_HEADER_LEN + NONCE_LEN;
    if pos < FRAME_HEADER_LEN || (body..body + 4).contains(&pos) {
        RejectCode::Format
    } else {
        RejectCode::Auth
    }
}

#[derive(Debug, Default)]
pub struct FuzzReport {
    pub trials: usize,
    pub correct: usize,
    pub accepted: usize,
    pub wrong: Vec<(usize, u8, String)>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.correct == self.trials
    }
}

fn fuzz(message: &[u8], trials: usize, seed: u64, mut check: impl FnMut(&[u8]) -> Result<(), Option<RejectCode>>) -> FuzzReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut buf = message.to_vec();
    let mut report = FuzzReport { trials, ..Default::default() };
    for _ in 0..trials {
        // Half the flips land in the framing and nonce, where the codes differ.
        let pos = if rng.gen_bool(0.5) {
            rng.gen_range(0..FRAME_HEADER_LEN + NONCE_LEN + 4)
        } else {
            rng.gen_range(0..buf.len())
        };
        let bit = 1u8 << rng.gen_range(0..8);
        buf[pos] ^= bit;
        match check(&buf) {
            Ok(()) => {
                report.accepted += 1;
                report.wrong.push((pos, bit, "accepted".into()));
            }
            Err(Some(code)) if code == expected_code(pos) => report.correct += 1,
            Err(code) => report.wrong.push((pos, bit, format!("{code:?}"))),
        }
        buf[pos] ^= bit;
    }
    report
}

pub fn fuzz_request(server: &Server<Linear>, m1: &[u8], trials: usize, seed: u64) -> FuzzReport {
    fuzz(m1, trials, seed, |m| match server.handle(m) {
        Ok(_) => Ok(()),
        Err(r) => Err(Some(r.code)),
    })
}

pub fn fuzz_response(client: &Client, m2: &[u8], pending: &PendingRequest, trials: usize, seed: u64) -> FuzzReport {
    fuzz(m2, trials, seed, |m| match client.finish(m, pending) {
        Ok(_) => Ok(()),
        Err(ProtoError::Local(r)) => Err(Some(r.code)),
        Err(_) => Err(None),
    })
}

pub fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}
