mod common;

use litd::approx::{relu, sigmoid, Approximant, ChebyshevSeries, Interval, MonomialPoly};
use litd::nn::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_tensor(rng: &mut ChaCha20Rng, shape: Vec<usize>) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn conv_shapes_and_hand_values() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let img = random_tensor(&mut rng, vec![28, 28, 1]);
    let w = random_tensor(&mut rng, vec![5, 5, 5, 1]);
    let out = conv2d(&img, &w, &Tensor::zeros(vec![5]), 1, Padding::Same).unwrap();
    assert_eq!(out.shape(), [28, 28, 5]);

    let mut ident = Tensor::zeros(vec![3, 1, 1, 3]);
    for c in 0..3 {
        ident.data_mut()[c * 3 + c] = 1.0;
    }
    let x = random_tensor(&mut rng, vec![6, 7, 3]);
    assert_eq!(conv2d(&x, &ident, &Tensor::zeros(vec![3]), 1, Padding::Same).unwrap(), x);

    let ones = Tensor::filled(vec![3, 3, 1], 1.0);
    let k = Tensor::filled(vec![1, 3, 3, 1], 1.0);
    let out = conv2d(&ones, &k, &Tensor::zeros(vec![1]), 1, Padding::Same).unwrap();
    assert_eq!(out.at(1, 1, 0), 9.0);
    assert_eq!(out.at(0, 0, 0), 4.0);
    let valid = conv2d(&ones, &k, &Tensor::vector(vec![0.5]), 1, Padding::Valid).unwrap();
    assert_eq!(valid.data(), [9.5]);

    assert!(matches!(
        conv2d(&img, &Tensor::zeros(vec![5, 5, 5, 2]), &Tensor::zeros(vec![5]), 1, Padding::Same),
        Err(NnError::Shape(_))
    ));
}

#[test]
fn mean_pool_examples() {
    let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(mean_pool(&x, 2, 2).unwrap().data(), [2.5]);
    let c = Tensor::filled(vec![28, 28, 5], 0.7);
    let pooled = mean_pool(&c, 2, 2).unwrap();
    assert_eq!(pooled.shape(), [14, 14, 5]);
    assert!(pooled.data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
    assert!(mean_pool(&Tensor::zeros(vec![7, 8, 1]), 2, 2).is_err());
}

#[test]
fn dense_examples() {
    let x = Tensor::vector(vec![1.0, 2.0]);
    let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(dense(&x, &w, &Tensor::vector(vec![1.0, 1.0])).unwrap().data(), [2.0, 3.0]);
    let b = Tensor::vector((0..128).map(|i| i as f64).collect());
    let out = dense(&Tensor::filled(vec![490], 3.0), &Tensor::zeros(vec![128, 490]), &b).unwrap();
    assert_eq!(out, b);
    assert!(dense(&x, &Tensor::zeros(vec![2, 3]), &Tensor::zeros(vec![2])).is_err());
}

#[test]
fn activation_examples() {
    let x = Tensor::vector(vec![-1.0, 2.0]);
    assert_eq!(apply_activation(&x, &Activation::Relu).output.data(), [0.0, 2.0]);

    // Degree-3 sigmoid fit on [-10, 10]: 0.139786538317376 x + 0.499999999992724 (plus a cubic term).
    let wide = Interval::new(-10.0, 10.0).unwrap();
    let p3 = ChebyshevSeries::fit(sigmoid, 3, wide).unwrap().to_monomial().unwrap();
    let at0 = apply_activation(&Tensor::vector(vec![0.0]), &Activation::Poly(p3.clone()));
    assert!((at0.output.data()[0] - 0.5).abs() < 1e-9);
    let outside = apply_activation(&Tensor::vector(vec![-11.0, 0.0, 10.5]), &Activation::Poly(p3));
    assert_eq!(outside.out_of_interval, 2);

    let narrow = Interval::new(-5.0, 5.0).unwrap();
    let p9 = ChebyshevSeries::fit(sigmoid, 9, narrow).unwrap().to_monomial().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let t = Tensor::vector((0..1000).map(|_| rng.gen_range(-5.0..5.0)).collect());
    let approx = apply_activation(&t, &Activation::Poly(p9)).output;
    assert!(approx.max_abs_diff(&t.map(sigmoid)) < 5e-3);
}

#[test]
fn softmax_examples() {
    let u = softmax(&Tensor::vector(vec![0.3; 10]));
    assert!(u.data().iter().all(|&p| (p - 0.1).abs() < 1e-15));
    let two = softmax(&Tensor::vector(vec![0.0, 3f64.ln()]));
    assert!((two.data()[1] / two.data()[0] - 3.0).abs() < 1e-12);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..100 {
        let v = Tensor::vector((0..10).map(|_| rng.gen_range(-50.0..50.0)).collect());
        let s = softmax(&v);
        assert!((s.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(s.data().iter().all(|&p| p > 0.0));
        assert_eq!(s.argmax(), v.argmax());
    }
}

#[test]
fn golden_logits_for_both_fixture_models() {
    let golden = common::golden();
    for (file, key, act) in [
        ("weights-relu.bin", "relu", Activation::Relu),
        ("weights-poly2.bin", "poly2", common::fixture_poly2()),
    ] {
        let model = load_weights(common::fixture_path(file)).unwrap();
        let rows = golden[key]["logits"].as_array().unwrap();
        for (i, row) in rows.iter().enumerate() {
            let image = common::fixture_image(i);
            let got = infer_plain(&model, &image, &act).unwrap();
            let expected: Vec<f64> = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
            let diff = got.logits.max_abs_diff(&Tensor::vector(expected));
            assert!(diff < 1e-9, "{key} image {i}: logits differ by {diff}");
        }
    }
}

#[test]
fn fixture_models_classify_the_fixture_digits() {
    let labels = common::fixture_labels();
    let model = load_weights(common::fixture_path("weights-relu.bin")).unwrap();
    let correct = (0..labels.len())
        .filter(|&i| infer_plain(&model, &common::fixture_image(i), &Activation::Relu).unwrap().class() == labels[i])
        .count();
    assert!(correct >= 97, "{correct}/100");
    assert_eq!(model.meta().activation, Some(Activation::Relu));
}

fn agreement(model: &ModelWeights, a: &Activation, b: &Activation) -> usize {
    (0..100)
        .filter(|&i| {
            let image = common::fixture_image(i);
            infer_plain(model, &image, a).unwrap().class() == infer_plain(model, &image, b).unwrap().class()
        })
        .count()
}

#[test]
fn polynomial_relu_agreement_is_recorded() {
    // Swapping ReLU for a polynomial after ReLU training is reported, not gated:
    // the interpolant's offset near zero compounds over three activations.
    let model = load_weights(common::fixture_path("weights-relu.bin")).unwrap();
    let wide = Interval::new(-10.0, 10.0).unwrap();
    for degree in [3, 9] {
        let p = ChebyshevSeries::fit(relu, degree, wide).unwrap().to_monomial().unwrap();
        let agree = agreement(&model, &Activation::Relu, &Activation::Poly(p));
        println!("relu-trained model, relu vs degree-{degree} polynomial: {agree}/100");
        assert!(agree <= 100);
    }
}

#[test]
fn polynomial_trained_model_classifies_in_polynomial_mode() {
    let model = load_weights(common::fixture_path("weights-poly2.bin")).unwrap();
    let labels = common::fixture_labels();
    let act = common::fixture_poly2();
    let correct = (0..100)
        .filter(|&i| infer_plain(&model, &common::fixture_image(i), &act).unwrap().class() == labels[i])
        .count();
    assert!(correct >= 90, "{correct}/100");
    let Activation::Poly(p) = act else { panic!("fixture activation is a polynomial") };
    let fitted = ChebyshevSeries::fit(relu, 2, p.interval()).unwrap().to_monomial().unwrap();
    for (a, b) in p.coeffs().iter().zip(fitted.coeffs()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_weights_yield_the_final_bias() {
    let mut layers = ModelWeights::zeros().layers().to_vec();
    let bias: Vec<f64> = (0..10).map(|i| i as f64 * 0.25 - 1.0).collect();
    layers[3].bias = Tensor::vector(bias.clone());
    let model = ModelWeights::new(layers, WeightsMeta::default()).unwrap();
    let out = infer_plain(&model, &common::fixture_image(0), &Activation::Relu).unwrap();
    assert_eq!(out.logits.data(), bias.as_slice());
    assert_eq!(out.class(), 9);
}

#[test]
fn stages_follow_the_shape_chain() {
    let model = load_weights(common::fixture_path("weights-relu.bin")).unwrap();
    let out = infer_plain(&model, &common::fixture_image(1), &Activation::Relu).unwrap();
    let shapes: Vec<Vec<usize>> = out.stages.iter().map(|(_, t)| t.shape().to_vec()).collect();
    let expected: Vec<Vec<usize>> = vec![
        vec![28, 28, 5],
        vec![28, 28, 5],
        vec![14, 14, 5],
        vec![14, 14, 10],
        vec![14, 14, 10],
        vec![7, 7, 10],
        vec![490],
        vec![128],
        vec![128],
        vec![10],
    ];
    assert_eq!(shapes, expected);
    assert!(infer_plain(&model, &Tensor::zeros(vec![28, 27, 1]), &Activation::Relu).is_err());
}

#[test]
fn weights_roundtrip_and_error_paths() {
    let path = common::fixture_path("weights-poly2.bin");
    let bytes = std::fs::read(&path).unwrap();
    let model = weights::from_bytes(&bytes).unwrap();
    let again = weights::to_bytes(&model);
    assert_eq!(weights::from_bytes(&again).unwrap(), model);
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("w.bin");
    save_weights(&model, &copy).unwrap();
    assert_eq!(load_weights(&copy).unwrap(), model);

    let err = weights::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
    assert_eq!(err.to_string(), "unexpected end of weights stream");

    let split = bytes.iter().position(|&b| b == 0).unwrap();
    let header = String::from_utf8(bytes[..split].to_vec()).unwrap();
    let payload = &bytes[split..];
    let rebuild = |h: String| [h.into_bytes(), payload.to_vec()].concat();

    assert!(matches!(weights::from_bytes(&bytes[..split]), Err(NnError::Header(_))));
    assert!(matches!(weights::from_bytes(&rebuild(header.replace("litd-weights", "other"))), Err(NnError::Header(_))));
    assert!(matches!(weights::from_bytes(&rebuild(header.replacen("{", "[", 1))), Err(NnError::Header(_))));
    // Same byte count, different shape split.
    let swapped = header.replace("[128, 490]", "[490, 128]");
    assert_ne!(swapped, header);
    assert!(matches!(weights::from_bytes(&rebuild(swapped)), Err(NnError::Shape(_))));

    let mut layers = model.layers().to_vec();
    layers[2].weight.data_mut()[7] = f64::NAN;
    let nan_model = ModelWeights::zeros();
    let nan_bytes = {
        let mut b = weights::to_bytes(&nan_model);
        let split = b.iter().position(|&x| x == 0).unwrap();
        let at = split + 1 + 8 * 3;
        b[at..at + 8].copy_from_slice(&f64::INFINITY.to_le_bytes());
        b
    };
    assert!(matches!(weights::from_bytes(&nan_bytes), Err(NnError::NonFinite(_))));
    assert!(matches!(ModelWeights::new(layers, WeightsMeta::default()), Err(NnError::NonFinite(_))));
    let mut missing = model.layers().to_vec();
    missing.pop();
    assert!(matches!(ModelWeights::new(missing, WeightsMeta::default()), Err(NnError::Incomplete(_))));
}

#[test]
fn pgm_roundtrip_and_comments() {
    let image = common::fixture_image(5);
    let encoded = encode_pgm(&image).unwrap();
    assert_eq!(decode_pgm(&encoded).unwrap(), image);
    let with_comment = b"P5\n# a comment\n2 1\n# another\n255\n\x00\xff";
    assert_eq!(decode_pgm(with_comment).unwrap().data(), [0.0, 1.0]);
    let wide = b"P5 1 1 1000 \x03\xe8";
    assert_eq!(decode_pgm(wide).unwrap().data(), [1.0]);
    assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
    assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
}

#[test]
fn inference_is_thread_safe_and_deterministic() {
    let model = load_weights(common::fixture_path("weights-relu.bin")).unwrap();
    let image = common::fixture_image(3);
    let first = infer_plain(&model, &image, &Activation::Relu).unwrap();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..4).map(|_| s.spawn(|| infer_plain(&model, &image, &Activation::Relu).unwrap())).collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), first);
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conv_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, vec![9, 7, 2]);
        let y = random_tensor(&mut rng, vec![9, 7, 2]);
        let w = random_tensor(&mut rng, vec![3, 5, 5, 2]);
        let zero = Tensor::zeros(vec![3]);
        let f = |t: &Tensor| conv2d(t, &w, &zero, 1, Padding::Same).unwrap();
        let lhs = f(&x.scale(a).add(&y.scale(b)).unwrap());
        let rhs = f(&x).scale(a).add(&f(&y).scale(b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn dense_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, vec![40]);
        let y = random_tensor(&mut rng, vec![40]);
        let w = random_tensor(&mut rng, vec![6, 40]);
        let zero = Tensor::zeros(vec![6]);
        let f = |t: &Tensor| dense(t, &w, &zero).unwrap();
        let lhs = f(&x.scale(a).add(&y.scale(b)).unwrap());
        let rhs = f(&x).scale(a).add(&f(&y).scale(b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn mean_pool_commutes_with_scaling(seed in any::<u64>(), k in -10.0f64..10.0) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, vec![8, 6, 3]);
        let lhs = mean_pool(&x.scale(k), 2, 2).unwrap();
        let rhs = mean_pool(&x, 2, 2).unwrap().scale(k);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn polynomial_activation_matches_horner(c in prop::collection::vec(-2.0f64..2.0, 1..6), z in -4.0f64..4.0) {
        let p = MonomialPoly::new(c.clone(), Interval::new(-4.0, 4.0).unwrap()).unwrap();
        let out = apply_activation(&Tensor::vector(vec![z]), &Activation::Poly(p));
        let direct: f64 = c.iter().enumerate().map(|(i, a)| a * z.powi(i as i32)).sum();
        prop_assert!((out.output.data()[0] - direct).abs() < 1e-9);
    }
}
