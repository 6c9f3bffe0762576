mod common;

use std::sync::OnceLock;

use common::*;
use litd::approx::{sigmoid, ChebyshevSeries, Interval, MonomialPoly};
use litd::enc_infer::*;
use litd::nn::{self, infer_plain, Activation, ModelWeights, Padding, Tensor};
use litd::profile::Profile;
use litd::she::{keygen_ring, Ciphertext, KeySet};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Toy {
    lanes: LaneSet,
    keys: KeySet,
}

/// Two 20-bit lanes on a 240-bit toy ring.
fn toy() -> &'static Toy {
    static TOY: OnceLock<Toy> = OnceLock::new();
    TOY.get_or_init(|| {
        let ring = toy_ring(240);
        let keys = keygen_ring(&ring, Some(11));
        Toy {
            lanes: LaneSet::with_bits(ring, 20, 2).unwrap(),
            keys,
        }
    })
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Encrypts integers into every lane of `toy`.
fn encrypt_ints(t: &Toy, values: &[i64], shape: Vec<usize>, scale: i32, rng: &mut ChaCha20Rng) -> CipherTensor {
    let lanes = t
        .lanes
        .contexts()
        .iter()
        .map(|ctx| {
            let residues: Vec<i64> = values.iter().map(|&v| centered_residue(ctx, &BigInt::from(v))).collect();
            encrypt_lane(ctx, &t.keys.public, &residues, scale, rng).unwrap()
        })
        .collect();
    CipherTensor::new(shape, scale, lanes).unwrap()
}

/// Decrypts every element and reconstructs the integers.
fn decrypt_ints(t: &Toy, x: &CipherTensor) -> Vec<BigInt> {
    let residues: Vec<Vec<u64>> = x
        .lanes()
        .iter()
        .enumerate()
        .map(|(l, lane)| decrypt_lane(t.lanes.context(l), &t.keys.secret, lane).unwrap())
        .collect();
    (0..x.len())
        .map(|i| t.lanes.reconstruct(&residues.iter().map(|r| r[i]).collect::<Vec<_>>()).unwrap())
        .collect()
}

fn bigs(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

fn random_conv(rng: &mut ChaCha20Rng, f: usize, k: usize, c: usize, weight_scale: i32, bias_scale: i32) -> QConv {
    QConv {
        weights: (0..f * k * k * c).map(|_| rng.gen_range(-40..=40)).collect(),
        shape: [f, k, k, c],
        bias: (0..f).map(|_| BigInt::from(rng.gen_range(-1000..=1000))).collect(),
        stride: 1,
        padding: Padding::Same,
        weight_scale,
        bias_scale,
    }
}

fn random_dense(rng: &mut ChaCha20Rng, outputs: usize, inputs: usize, weight_scale: i32, bias_scale: i32) -> QDense {
    QDense {
        weights: (0..outputs * inputs).map(|_| rng.gen_range(-60..=60)).collect(),
        outputs,
        inputs,
        bias: (0..outputs).map(|_| BigInt::from(rng.gen_range(-5000..=5000))).collect(),
        weight_scale,
        bias_scale,
    }
}

#[test]
fn zero_image_encrypts_to_zeros() {
    let t = toy();
    let img = Tensor::zeros(vec![28, 28, 1]);
    let x = encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(1)).unwrap();
    assert_eq!(x.shape(), [28, 28, 1]);
    assert_eq!(x.lanes().len(), 2);
    assert!(decrypt_ints(t, &x).iter().all(|v| *v == BigInt::default()));
}

#[test]
fn fixture_image_roundtrip_within_quantization() {
    let t = toy();
    let img = fixture_image(0);
    let x = encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(2)).unwrap();
    let decoded = decrypt_ints(t, &x);
    let worst = decoded
        .iter()
        .zip(img.data())
        .map(|(v, p)| (dequantize(v, 8) - p).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 2f64.powi(-8), "max error {worst}");
}

#[test]
fn encrypting_twice_differs_but_decrypts_equal() {
    let t = toy();
    let img = fixture_image(1);
    let a = encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(3)).unwrap();
    let b = encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(4)).unwrap();
    assert_ne!(a.lanes()[0].elements[300], b.lanes()[0].elements[300]);
    assert_eq!(decrypt_ints(t, &a), decrypt_ints(t, &b));
}

#[test]
fn out_of_range_pixels_are_rejected() {
    let t = toy();
    let mut img = Tensor::zeros(vec![28, 28, 1]);
    img.data_mut()[5] = 1.5;
    assert!(matches!(
        encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(5)),
        Err(EncError::Pixel(v)) if v == 1.5
    ));
    let small = Tensor::zeros(vec![27, 28, 1]);
    assert!(matches!(encrypt_image(&t.lanes, &t.keys.public, &small, 8, &mut rng(5)), Err(EncError::Shape(_))));
}

#[test]
fn identity_kernel_shifts_only_the_scale() {
    let t = toy();
    let values: Vec<i64> = (0..16).map(|i| i * 7 - 50).collect();
    let x = encrypt_ints(t, &values, vec![4, 4, 1], 5, &mut rng(6));
    let conv = QConv {
        weights: vec![1 << 3],
        shape: [1, 1, 1, 1],
        bias: vec![BigInt::default()],
        stride: 1,
        padding: Padding::Same,
        weight_scale: 3,
        bias_scale: 8,
    };
    let y = conv2d_enc(&t.lanes, &x, &conv).unwrap();
    assert_eq!(y.scale_exp(), 8);
    let got: Vec<f64> = decrypt_ints(t, &y).iter().map(|v| dequantize(v, 8)).collect();
    let want: Vec<f64> = values.iter().map(|&v| v as f64 / 32.0).collect();
    assert_eq!(got, want);
}

#[test]
fn convolution_matches_integer_oracle_50_trials() {
    let t = toy();
    let mut r = rng(7);
    for trial in 0..50 {
        let c = r.gen_range(1..=2);
        let f = r.gen_range(1..=3);
        let k = if trial % 2 == 0 { 3 } else { 5 };
        let values: Vec<i64> = (0..64 * c).map(|_| r.gen_range(-300..=300)).collect();
        let x = encrypt_ints(t, &values, vec![8, 8, c], 4, &mut r);
        let conv = random_conv(&mut r, f, k, c, 6, 10);
        let y = conv2d_enc(&t.lanes, &x, &conv).unwrap();
        assert_eq!(y.shape(), [8, 8, f]);
        assert_eq!(y.scale_exp(), 10);
        assert_eq!(decrypt_ints(t, &y), conv_int(&bigs(&values), [8, 8, c], &conv).unwrap(), "trial {trial}");
    }
}

#[test]
fn first_layer_keeps_the_image_geometry() {
    let t = toy();
    let (model, poly) = fixture_model();
    let q = QuantizedModel::new(&model, 8, 8, &poly).unwrap();
    let img = fixture_image(2);
    let x = encrypt_image(&t.lanes, &t.keys.public, &img, 8, &mut rng(8)).unwrap();
    let y = conv2d_enc(&t.lanes, &x, &q.conv1).unwrap();
    assert_eq!(y.shape(), [28, 28, 5]);
    assert_eq!(y.scale_exp(), 16);
    let trace = q.trace_integer(&img).unwrap();
    assert_eq!(trace[0].0, Stage::Conv1);
    assert_eq!(decrypt_ints(t, &y), trace[0].1);
}

#[test]
fn scale_mismatch_is_rejected() {
    let t = toy();
    let x = encrypt_ints(t, &[1, 2, 3, 4], vec![2, 2, 1], 4, &mut rng(9));
    let conv = random_conv(&mut rng(9), 1, 1, 1, 6, 11);
    assert!(matches!(conv2d_enc(&t.lanes, &x, &conv), Err(EncError::Shape(_))));
}

#[test]
fn identity_polynomial_is_identity() {
    let t = toy();
    let values = [-7i64, 0, 3, 100];
    let x = encrypt_ints(t, &values, vec![4], 6, &mut rng(10));
    let poly = QPoly {
        coeffs: vec![0, 1],
        coeff_scale: 0,
    };
    let y = activation_enc(&t.lanes, &x, &poly, &t.keys.relin).unwrap();
    assert_eq!(y.scale_exp(), 6);
    assert_eq!(decrypt_ints(t, &y), bigs(&values));
}

#[test]
fn quadratic_on_three_matches_oracle() {
    let t = toy();
    let x = encrypt_ints(t, &[3], vec![1], 0, &mut rng(11));
    let poly = QPoly {
        coeffs: vec![-4, 5, 7],
        coeff_scale: 0,
    };
    let y = activation_enc(&t.lanes, &x, &poly, &t.keys.relin).unwrap();
    assert_eq!(decrypt_ints(t, &y), vec![BigInt::from(7 * 9 + 5 * 3 - 4)]);
    assert_eq!(y.lanes()[0].elements[0].size(), 2);
}

#[test]
fn cubic_sigmoid_at_zero_is_one_half() {
    let t = toy();
    let poly = ChebyshevSeries::fit(sigmoid, 3, Interval::symmetric(10.0).unwrap())
        .unwrap()
        .to_monomial()
        .unwrap();
    let q = QPoly::from_monomial(&poly, 12).unwrap();
    let x = encrypt_ints(t, &[0], vec![1], 6, &mut rng(12));
    let y = activation_enc(&t.lanes, &x, &q, &t.keys.relin).unwrap();
    assert_eq!(y.scale_exp(), 3 * 6 + 12);
    let v = dequantize(&decrypt_ints(t, &y)[0], y.scale_exp());
    assert!((v - 0.5).abs() < 1e-3, "{v}");
}

#[test]
fn degree_ten_is_rejected() {
    let poly = MonomialPoly::new(vec![0.5; 11], Interval::unit()).unwrap();
    assert!(matches!(QPoly::from_monomial(&poly, 4), Err(EncError::Degree(10))));
    let t = toy();
    let x = encrypt_ints(t, &[1], vec![1], 0, &mut rng(13));
    let q = QPoly {
        coeffs: vec![1; 11],
        coeff_scale: 0,
    };
    assert!(matches!(activation_enc(&t.lanes, &x, &q, &t.keys.relin), Err(EncError::Degree(10))));
}

#[test]
fn activations_match_integer_oracle_50_trials() {
    let t = toy();
    let mut r = rng(14);
    for trial in 0..50 {
        let d = r.gen_range(1..=4);
        let poly = QPoly {
            coeffs: (0..=d).map(|_| r.gen_range(-20..=20)).collect(),
            coeff_scale: r.gen_range(0..=4),
        };
        let scale = r.gen_range(0..=3);
        let values: Vec<i64> = (0..6).map(|_| r.gen_range(-200..=200)).collect();
        let x = encrypt_ints(t, &values, vec![6], scale, &mut r);
        let y = activation_enc(&t.lanes, &x, &poly, &t.keys.relin).unwrap();
        assert_eq!(y.scale_exp(), poly.output_scale(scale));
        assert_eq!(decrypt_ints(t, &y), poly_int(&bigs(&values), &poly, scale), "trial {trial}, {poly:?}");
    }
}

#[test]
fn pooling_a_constant_window_decodes_to_the_constant() {
    let t = toy();
    let x = encrypt_ints(t, &[9; 4], vec![2, 2, 1], 3, &mut rng(15));
    let y = mean_pool_enc(&t.lanes, &x).unwrap();
    assert_eq!(y.shape(), [1, 1, 1]);
    assert_eq!(y.scale_exp(), 5);
    let v = &decrypt_ints(t, &y)[0];
    assert_eq!(*v, BigInt::from(36));
    assert_eq!(dequantize(v, 5), 9.0 / 8.0);
}

#[test]
fn pooling_matches_integer_oracle_50_trials() {
    let t = toy();
    let mut r = rng(16);
    for trial in 0..50 {
        let (h, w, c) = (2 * r.gen_range(1..=3), 2 * r.gen_range(1..=3), r.gen_range(1..=3));
        let values: Vec<i64> = (0..h * w * c).map(|_| r.gen_range(-10_000..=10_000)).collect();
        let x = encrypt_ints(t, &values, vec![h, w, c], 7, &mut r);
        let y = mean_pool_enc(&t.lanes, &x).unwrap();
        assert_eq!(y.shape(), [h / 2, w / 2, c]);
        assert_eq!(decrypt_ints(t, &y), pool_int(&bigs(&values), [h, w, c]).unwrap(), "trial {trial}");
    }
}

#[test]
fn pooling_halves_the_first_feature_map() {
    let t = toy();
    let values: Vec<i64> = (0..28 * 28 * 5).map(|i| (i % 17) as i64 - 8).collect();
    let x = encrypt_ints(t, &values, vec![28, 28, 5], 0, &mut rng(17));
    let y = mean_pool_enc(&t.lanes, &x).unwrap();
    assert_eq!(y.shape(), [14, 14, 5]);
    assert_eq!(decrypt_ints(t, &y), pool_int(&bigs(&values), [28, 28, 5]).unwrap());
    let odd = encrypt_ints(t, &[1, 2, 3], vec![3, 1, 1], 0, &mut rng(17));
    assert!(matches!(mean_pool_enc(&t.lanes, &odd), Err(EncError::Shape(_))));
}

#[test]
fn identity_dense_layer_passes_through() {
    let t = toy();
    let values = [5i64, -6, 7];
    let x = encrypt_ints(t, &values, vec![3], 2, &mut rng(18));
    let fc = QDense {
        weights: vec![4, 0, 0, 0, 4, 0, 0, 0, 4],
        outputs: 3,
        inputs: 3,
        bias: vec![BigInt::default(); 3],
        weight_scale: 2,
        bias_scale: 4,
    };
    let y = fc_enc(&t.lanes, &x, &fc).unwrap();
    assert_eq!(y.scale_exp(), 4);
    let got: Vec<f64> = decrypt_ints(t, &y).iter().map(|v| dequantize(v, 4)).collect();
    assert_eq!(got, vec![5.0 / 4.0, -6.0 / 4.0, 7.0 / 4.0]);
}

#[test]
fn dense_layers_match_integer_oracle_50_trials() {
    let t = toy();
    let mut r = rng(19);
    for trial in 0..50 {
        let values: Vec<i64> = (0..16).map(|_| r.gen_range(-1000..=1000)).collect();
        let x = encrypt_ints(t, &values, vec![16], 5, &mut r);
        let fc = random_dense(&mut r, 4, 16, 3, 8);
        let y = fc_enc(&t.lanes, &x, &fc).unwrap();
        assert_eq!(y.shape(), [4]);
        assert_eq!(decrypt_ints(t, &y), dense_int(&bigs(&values), &fc).unwrap(), "trial {trial}");
    }
}

#[test]
fn last_layer_emits_ten_ciphertexts() {
    let t = toy();
    let (model, poly) = fixture_model();
    let q = QuantizedModel::new(&model, 8, 8, &poly).unwrap();
    let values: Vec<i64> = (0..128).map(|i| i * 3 - 190).collect();
    let scale = q.fc2.bias_scale - q.fc2.weight_scale;
    let x = encrypt_ints(t, &values, vec![128], scale, &mut rng(20));
    let mut fc2 = q.fc2.clone();
    fc2.bias = vec![BigInt::default(); 10];
    let y = fc_enc(&t.lanes, &x, &fc2).unwrap();
    assert_eq!(y.len(), 10);
    assert_eq!(decrypt_ints(t, &y), dense_int(&bigs(&values), &fc2).unwrap());
}

#[test]
fn zero_weights_give_no_noise() {
    let t = toy();
    let x = encrypt_ints(t, &[1, 2, 3, 4], vec![4], 0, &mut rng(21));
    let fc = QDense {
        weights: vec![0; 8],
        outputs: 2,
        inputs: 4,
        bias: vec![BigInt::from(-9), BigInt::default()],
        weight_scale: 1,
        bias_scale: 1,
    };
    let y = fc_enc(&t.lanes, &x, &fc).unwrap();
    assert_eq!(decrypt_ints(t, &y), bigs(&[-9, 0]));
}

#[test]
fn cipher_tensor_roundtrips_and_rejects_corruption() {
    let t = toy();
    let x = encrypt_ints(t, &[1, -2, 3, -4, 5, -6], vec![1, 2, 3], 9, &mut rng(22));
    let bytes = x.to_bytes(&t.lanes);
    let back = CipherTensor::from_bytes(&bytes, &t.lanes).unwrap();
    assert_eq!(back, x);
    assert!(CipherTensor::from_bytes(&bytes[..bytes.len() - 1], &t.lanes).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(CipherTensor::from_bytes(&extra, &t.lanes).is_err());
    // Rank byte sits right after the 38-byte header.
    let mut bad_rank = bytes.clone();
    bad_rank[38] = 9;
    assert!(matches!(CipherTensor::from_bytes(&bad_rank, &t.lanes), Err(EncError::Format(_))));
    let other = LaneSet::with_bits(toy_ring(200), 20, 2).unwrap();
    assert!(CipherTensor::from_bytes(&bytes, &other).is_err());
}

#[test]
fn cipher_tensor_rejects_mixed_scales() {
    let t = toy();
    let a = encrypt_ints(t, &[1], vec![1], 3, &mut rng(23));
    let b = encrypt_ints(t, &[1], vec![1], 4, &mut rng(23));
    let mixed: Vec<Ciphertext> = vec![a.lanes()[0].elements[0].clone(), b.lanes()[0].elements[0].clone()];
    let lane = LaneTensor {
        plain_modulus: a.lanes()[0].plain_modulus,
        elements: mixed,
    };
    assert!(CipherTensor::new(vec![2], 3, vec![lane]).is_err());
}

#[test]
fn decrypt_result_picks_the_largest_logit() {
    let t = toy();
    let logits = [3i64, -5, 17, 2, 17, 0, -1, 9, 16, 4];
    let x = encrypt_ints(t, &logits, vec![10], 2, &mut rng(24));
    let d = decrypt_result(&t.lanes, &t.keys.secret, &x).unwrap();
    assert_eq!(d.class, 2, "ties go to the lowest index");
    assert_eq!(d.logits[2], 17.0 / 4.0);
    assert_eq!(d.integers, bigs(&logits));
}

#[test]
fn decrypt_result_reports_exhausted_elements() {
    let t = toy();
    let ctx = t.lanes.context(0);
    let mut x = encrypt_ints(t, &[2, 3], vec![2], 0, &mut rng(25));
    let mut lanes = x.clone().into_lanes();
    let mut ct = lanes[0].elements[1].clone();
    while ctx.noise_budget(&t.keys.secret, &ct).unwrap() > 0 {
        ct = ctx.square(&ct, &t.keys.relin).unwrap().with_scale_exp(0);
    }
    lanes[0].elements[1] = ct;
    x = CipherTensor::new(vec![2], 0, lanes).unwrap();
    match decrypt_result(&t.lanes, &t.keys.secret, &x) {
        Err(EncError::Budget { layer, budget }) => {
            assert!(layer.contains("output element 1"), "{layer}");
            assert!(budget <= 0);
        }
        other => panic!("expected budget error, got {other:?}"),
    }
}

#[test]
fn quantizing_zero_weights_gives_zeros() {
    let poly = MonomialPoly::new(vec![0.0, 0.5, 0.06], Interval::symmetric(10.0).unwrap()).unwrap();
    let q = QuantizedModel::new(&ModelWeights::zeros(), 8, 8, &poly).unwrap();
    for w in [&q.conv1.weights, &q.conv2.weights, &q.fc1.weights, &q.fc2.weights] {
        assert!(w.iter().all(|&v| v == 0));
    }
    assert!(q.fc2.bias.iter().all(|b| *b == BigInt::default()));
    let logits = q.infer_integer(&fixture_image(0)).unwrap();
    assert!(logits.iter().all(|v| *v == BigInt::default()));
}

#[test]
fn default_scales_fit_the_profile_capacity() {
    let (model, poly) = fixture_model();
    for p in Profile::ALL {
        let (si, sw) = p.inference_scales();
        let q = quantize_model(&model, si, sw, &poly, p.inference_capacity_bits()).unwrap();
        assert!(q.required_bits() <= p.inference_capacity_bits());
    }
}

#[test]
fn wide_weight_scale_overflows_at_the_first_dense_layer() {
    let (model, poly) = fixture_model();
    let cap = Profile::Default8192.inference_capacity_bits();
    match quantize_model(&model, 8, 30, &poly, cap) {
        Err(EncError::Headroom {
            layer,
            required_bits,
            available_bits,
        }) => {
            assert_eq!(layer, "1st FC layer");
            assert!(required_bits > available_bits);
        }
        other => panic!("expected headroom error, got {other:?}"),
    }
}

#[test]
fn scale_ledger_follows_the_closed_form() {
    let (model, poly) = fixture_model();
    for (si, sw) in [(8, 8), (4, 6), (16, 16)] {
        let q = QuantizedModel::new(&model, si, sw, &poly).unwrap();
        let d = 2;
        let c1 = si + sw;
        let a1 = d * c1 + sw;
        let c2 = a1 + 2 + sw;
        let a2 = d * c2 + sw;
        let f1 = a2 + 2 + sw;
        let a3 = d * f1 + sw;
        let want = [c1, a1, a1 + 2, c2, a2, a2 + 2, f1, a3, a3 + sw];
        let got: Vec<i32> = q.plan().iter().map(|p| p.scale_exp).collect();
        assert_eq!(got, want, "scales ({si}, {sw})");
        let stages: Vec<Stage> = q.plan().iter().map(|p| p.stage).collect();
        assert_eq!(stages, Stage::ALL);
    }
}

#[test]
fn dequantized_inference_tracks_the_float_network() {
    let (model, poly) = fixture_model();
    let q = QuantizedModel::new(&model, 16, 16, &poly).unwrap();
    let act = Activation::Poly(poly);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let img = fixture_image(i);
        let plain = infer_plain(&model, &img, &act).unwrap();
        let deq = q.infer_dequantized(&img).unwrap();
        worst = plain.logits.data().iter().zip(&deq).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    assert!(worst < 2f64.powi(-6), "max logit error {worst}");
}

#[test]
fn integer_oracle_agrees_with_plain_argmax_at_small_scales() {
    let (model, poly) = fixture_model();
    let q = QuantizedModel::new(&model, 4, 4, &poly).unwrap();
    let act = Activation::Poly(poly);
    for i in 0..20 {
        let img = fixture_image(i);
        let want = infer_plain(&model, &img, &act).unwrap().class();
        assert_eq!(nn::argmax(&q.infer_integer(&img).unwrap()), want, "image {i}");
    }
}

#[test]
fn forecast_flags_the_small_ring_and_clears_the_large_one() {
    let (model, poly) = fixture_model();
    let q = QuantizedModel::new(&model, 8, 8, &poly).unwrap();
    for p in Profile::SECURE {
        let ring = std::sync::Arc::new(litd::she::RingContext::new(&p.params()).unwrap());
        let lanes = LaneSet::with_bits(ring, p.lane_bits(), 1).unwrap();
        let result = audit(&q, lanes.context(0));
        match p {
            Profile::Ci4096 => match result {
                Err(EncError::PredictedBudget { layer, .. }) => assert_eq!(layer, "2nd AF"),
                other => panic!("expected a forecast failure, got {other:?}"),
            },
            Profile::Default8192 => {
                let f = result.unwrap();
                assert!(f.final_budget() > 5.0, "{f:?}");
            }
            Profile::Toy1024 => unreachable!(),
        }
    }
}

#[test]
fn secret_key_stays_out_of_evaluation() {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/enc_infer/eval.rs")).unwrap();
    let allowed = ["BudgetProbe", "fn decrypt_lane", "fn decrypt_result", "use crate::she"];
    for (i, line) in src.lines().enumerate() {
        if line.contains("SecretKey") {
            assert!(
                allowed.iter().any(|a| line.contains(a)) || line.trim_start().starts_with("secret:") || line.contains("secret: &'a SecretKey"),
                "line {}: {line}",
                i + 1
            );
        }
    }
    for other in ["quant.rs", "budget.rs", "tensor.rs", "lanes.rs"] {
        let path = format!("{}/src/enc_infer/{other}", env!("CARGO_MANIFEST_DIR"));
        assert!(!std::fs::read_to_string(path).unwrap().contains("SecretKey"), "{other}");
    }
}
