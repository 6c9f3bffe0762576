#![allow(dead_code)]

pub mod protocol;
pub mod tables;

use litd::she::*;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Outcome of one random add/multiply circuit (sums, differences, plaintext sums, products) checked against integer arithmetic mod `t`.
#[derive(Debug, Default, Clone)]
pub struct CircuitReport {
    pub ops: usize,
    pub multiplies: usize,
    pub max_depth: u32,
    pub final_budget: i64,
    pub max_add_drop: i64,
    /// Operations dropped because their result was a trivial ciphertext.
    pub cancelled: usize,
    pub failure: Option<String>,
    /// One line per operation: operands, values mod t and budgets.
    pub trace: Vec<String>,
}

struct Node {
    ct: Ciphertext,
    value: i128,
    depth: u32,
}

/// Builds a random circuit of multiplicative depth at most `max_depth`, checking
/// every intermediate budget and the final decryption.
pub fn random_circuit(ctx: &Context, keys: &KeySet, max_depth: u32, rng: &mut ChaCha20Rng) -> CircuitReport {
    let t = ctx.plain_modulus() as i128;
    let sk = &keys.secret;
    let budget = |ct: &Ciphertext| ctx.noise_budget(sk, ct).unwrap();
    let mut report = CircuitReport::default();
    let mut nodes: Vec<Node> = (0..3)
        .map(|_| {
            let v = rng.gen_range(-t / 2..=t / 2);
            let ct = ctx.encrypt(&keys.public, &ctx.encode_int(v, 0).unwrap(), rng).unwrap();
            Node { ct, value: v.rem_euclid(t), depth: 0 }
        })
        .collect();
    let steps = rng.gen_range(4..=10);
    for _ in 0..steps {
        let i = rng.gen_range(0..nodes.len());
        let j = (i + rng.gen_range(1..nodes.len())) % nodes.len();
        let (a, b) = (&nodes[i], &nodes[j]);
        let floor = budget(&a.ct).min(budget(&b.ct));
        let op = rng.gen_range(0..4);
        let node = match op {
            0 | 1 => {
                let (ct, value) = if op == 0 {
                    (ctx.add(&a.ct, &b.ct).unwrap(), a.value + b.value)
                } else {
                    (ctx.sub(&a.ct, &b.ct).unwrap(), a.value - b.value)
                };
                let drop = floor - budget(&ct);
                report.max_add_drop = report.max_add_drop.max(drop);
                if drop > 2 {
                    report.failure = Some(format!("add dropped {drop} bits"));
                }
                Node { ct, value, depth: a.depth.max(b.depth) }
            }
            2 => {
                let c = rng.gen_range(-t / 2..=t / 2);
                let ct = ctx.add_plain(&a.ct, &ctx.encode_int(c, 0).unwrap()).unwrap();
                let before = budget(&a.ct);
                let drop = before - budget(&ct);
                report.max_add_drop = report.max_add_drop.max(drop);
                if drop > 2 {
                    report.failure = Some(format!("plain add dropped {drop} bits from {before}"));
                }
                Node { ct, value: a.value + c, depth: a.depth }
            }
            _ => {
                if a.depth.max(b.depth) + 1 > max_depth {
                    continue;
                }
                let ct = ctx.multiply(&a.ct, &b.ct, &keys.relin).unwrap();
                report.multiplies += 1;
                if budget(&ct) >= floor {
                    report.failure = Some(format!(
                        "multiply of {} by {} did not consume budget ({floor} -> {})",
                        a.value,
                        b.value,
                        budget(&ct)
                    ));
                }
                Node { ct, value: a.value * b.value, depth: a.depth.max(b.depth) + 1 }
            }
        };
        // Sums that cancel every key-dependent term leave a trivial ciphertext with no noise.
        if node.ct.components()[1..].iter().all(|c| c.is_zero()) {
            report.cancelled += 1;
            continue;
        }
        report.ops += 1;
        let value = node.value.rem_euclid(t);
        report.trace.push(format!(
            "#{} = op{op} #{i}({}, {}b) #{j}({}, {}b) -> {value}, {}b",
            nodes.len(),
            nodes[i].value,
            budget(&nodes[i].ct),
            nodes[j].value,
            budget(&nodes[j].ct),
            budget(&node.ct)
        ));
        nodes.push(Node { value, ..node });
    }
    // Extend the output to the full depth.
    while nodes.last().unwrap().depth < max_depth {
        let (a, b) = (nodes.last().unwrap(), &nodes[rng.gen_range(0..3)]);
        let floor = budget(&a.ct).min(budget(&b.ct));
        let ct = ctx.multiply(&a.ct, &b.ct, &keys.relin).unwrap();
        report.multiplies += 1;
        report.ops += 1;
        if budget(&ct) >= floor {
            report.failure = Some(format!(
                "multiply of {} by {} did not consume budget ({floor} -> {})",
                a.value,
                b.value,
                budget(&ct)
            ));
        }
        let node = Node { ct, value: (a.value * b.value).rem_euclid(t), depth: a.depth + 1 };
        nodes.push(node);
    }
    let last = nodes.last().unwrap();
    report.max_depth = nodes.iter().map(|n| n.depth).max().unwrap();
    report.final_budget = budget(&last.ct);
    match ctx.decrypt(sk, &last.ct) {
        Ok(pt) if pt.coeffs()[0] as i128 == last.value && pt.is_scalar() => {}
        Ok(pt) => {
            report.failure = Some(format!("decrypted {} expected {}", pt.coeffs()[0], last.value));
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    report
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_image(i: usize) -> litd::nn::Tensor {
    litd::nn::read_image(fixture_path(&format!("digits/{i:03}.pgm"))).unwrap()
}

pub fn golden() -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture_path("golden.json")).unwrap()).unwrap()
}

pub fn fixture_labels() -> Vec<usize> {
    golden()["labels"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect()
}

/// The activation stored in the degree-2 fixture model.
pub fn fixture_poly2() -> litd::nn::Activation {
    litd::nn::load_weights(fixture_path("weights-poly2.bin")).unwrap().meta().activation.clone().unwrap()
}

/// An insecure n = 1024 ring with a wide coefficient modulus, for fast
/// end-to-end tests.
pub fn toy_ring(q_bits: u32) -> std::sync::Arc<litd::she::RingContext> {
    use litd::she::{coeff_primes_for_bits, EncryptionParams, RingContext};
    let params = EncryptionParams::new(1024, coeff_primes_for_bits(1024, q_bits), 2);
    std::sync::Arc::new(RingContext::new(&params).unwrap())
}

/// The degree-2 fixture model and its activation polynomial.
pub fn fixture_model() -> (litd::nn::ModelWeights, litd::approx::MonomialPoly) {
    let model = litd::nn::load_weights(fixture_path("weights-poly2.bin")).unwrap();
    let Some(litd::nn::Activation::Poly(poly)) = model.meta().activation.clone() else {
        panic!("fixture model has no polynomial activation");
    };
    (model, poly)
}
