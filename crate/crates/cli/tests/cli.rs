use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use litd::approx::MonomialPoly;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn litd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_litd"))
        .args(args)
        .current_dir(dir)
        .env_remove("LITD_PROFILE")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(stdout(out).trim()).unwrap_or_else(|e| panic!("{e}: {}", stdout(out)))
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}\n{}", out.status.code(), stdout(out), stderr(out));
}

/// Compares with the stored document; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, value: &Value) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(value).unwrap() + "\n").unwrap();
    }
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(&stored, value, "{name} drifted from its golden file");
}

#[test]
fn approx_writes_four_sigmoid_coefficients_and_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = litd(dir.path(), &["approx", "sigmoid", "3", "s3.csv", "--interval=-10,10"]);
    assert_ok(&out);
    let poly = MonomialPoly::from_csv(&std::fs::read_to_string(dir.path().join("s3.csv")).unwrap()).unwrap();
    assert_eq!(poly.coeffs().len(), 4);
    assert!((poly.coeffs()[0] - 0.499999999992724).abs() < 1e-9);
    let grid = std::fs::read_to_string(dir.path().join("s3.errors.csv")).unwrap();
    assert_eq!(grid.lines().next(), Some("x,f,p,diff"));
    assert_eq!(grid.lines().count(), 1 + 1001);
}

#[test]
fn approx_relu_error_grid_is_even() {
    // relu(x) - x/2 = |x|/2 is even, so the fit's odd part is exactly x/2.
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&litd(dir.path(), &["approx", "relu", "3", "r.csv", "--interval", "-1,1", "--points", "201"]));
    let poly = MonomialPoly::from_csv(&std::fs::read_to_string(dir.path().join("r.csv")).unwrap()).unwrap();
    assert!((poly.coeffs()[1] - 0.5).abs() < 1e-12);
    assert!(poly.coeffs()[3].abs() < 1e-12);
    let diffs: Vec<f64> = std::fs::read_to_string(dir.path().join("r.errors.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    for (a, b) in diffs.iter().zip(diffs.iter().rev()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["approx", "sigmoid", "4", "x.csv"][..],
        &["approx", "tanh", "3", "x.csv"],
        &["approx", "relu", "3", "x.csv", "--interval", "5,1"],
        &["infer-plain"],
        &["--profile", "fast", "keygen"],
        &["frobnicate"],
    ] {
        let out = litd(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
    }
    assert!(!dir.path().join("x.csv").exists());
    assert_eq!(litd(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn degree_nine_on_ci_4096_exhausts_the_budget() {
    let f = fixtures();
    let out = litd(
        &f,
        &["--json", "--profile", "ci-4096", "--seed", "1", "infer-enc", "--weights", "weights-poly2.bin", "--degree", "9", "digits/001.pgm"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let doc = json(&out);
    assert_eq!(doc["kind"], "budget");
    assert_eq!(doc["exit_code"], 3);
    let msg = doc["error"].as_str().unwrap();
    assert!(msg.contains("AF") && msg.contains("budget"), "{msg}");
    assert!(stderr(&out).contains("error: "));
}

#[test]
fn golden_approx_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = litd(dir.path(), &["--json", "approx", "sigmoid", "5", "s5.csv"]);
    assert_ok(&out);
    check_golden("approx-sigmoid-5.json", &json(&out));
}

#[test]
fn golden_infer_plain_json() {
    let out = litd(&fixtures(), &["--json", "infer-plain", "--weights", "weights-poly2.bin", "digits/001.pgm", "digits/002.pgm"]);
    assert_ok(&out);
    check_golden("infer-plain.json", &json(&out));
    let out = litd(
        &fixtures(),
        &["--json", "infer-plain", "--weights", "weights-poly2.bin", "--quantized", "--input-scale", "4", "--weight-scale", "4", "digits/001.pgm"],
    );
    assert_ok(&out);
    check_golden("infer-plain-quantized.json", &json(&out));
}

#[test]
fn golden_keygen_json_and_seeded_key_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = litd(dir.path(), &["--json", "--profile", "toy-1024", "--seed", "9", "keygen", "--out-dir", "a"]);
    let b = litd(dir.path(), &["--json", "--profile", "toy-1024", "--seed", "9", "keygen", "--out-dir", "a"]);
    assert_ok(&a);
    assert_eq!(json(&a), json(&b));
    check_golden("keygen-toy.json", &json(&a));
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    let client = read("a/client.keys");
    assert_ok(&litd(dir.path(), &["--profile", "toy-1024", "--seed", "9", "keygen", "--out-dir", "b"]));
    assert_eq!(client, read("b/client.keys"));
    assert_ok(&litd(dir.path(), &["--profile", "toy-1024", "--seed", "10", "keygen", "--out-dir", "c"]));
    assert_ne!(client, read("c/client.keys"));
}

#[test]
fn encryption_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&litd(dir.path(), &["--profile", "toy-1024", "--seed", "4", "keygen"]));
    let image = fixtures().join("digits/003.pgm");
    let image = image.to_str().unwrap();
    let digest = |seed: &str, out: &str| {
        let o = litd(dir.path(), &["--json", "--seed", seed, "encrypt-image", "--keys", "client.keys", image, "--out", out]);
        assert_ok(&o);
        let doc = json(&o);
        assert_eq!(doc["lanes"], 5);
        assert_eq!(doc["scale_exp"], 4);
        doc["sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(digest("1", "x.ct"), digest("1", "y.ct"));
    assert_ne!(digest("1", "x.ct"), digest("2", "z.ct"));
    assert_eq!(std::fs::read(dir.path().join("x.ct")).unwrap(), std::fs::read(dir.path().join("y.ct")).unwrap());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    std::fs::write(
        dir.path().join("litd.conf"),
        format!(
            "# shared settings\nweights = {}\nimage = {}\ninput_scale = 4\nweight_scale = 4\n",
            f.join("weights-poly2.bin").display(),
            f.join("digits/001.pgm").display()
        ),
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["--json", "--config", "litd.conf", "infer-plain", "--quantized"];
        args.extend_from_slice(extra);
        let out = litd(dir.path(), &args);
        assert_ok(&out);
        json(&out)
    };
    assert_eq!(run(&[])["scales"], serde_json::json!([4, 4]));
    assert_eq!(run(&["--input-scale", "6"])["scales"], serde_json::json!([6, 4]));
    std::fs::write(dir.path().join("bad.conf"), "colour = red\n").unwrap();
    assert_eq!(litd(dir.path(), &["--config", "bad.conf", "keygen"]).status.code(), Some(1));
}

#[test]
fn profile_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_litd"))
        .args(["--json", "--seed", "1", "keygen"])
        .current_dir(dir.path())
        .env("LITD_PROFILE", "toy-1024")
        .output()
        .unwrap();
    assert_ok(&out);
    assert_eq!(json(&out)["profile"], "toy-1024");
    let out = Command::new(env!("CARGO_BIN_EXE_litd"))
        .arg("keygen")
        .current_dir(dir.path())
        .env("LITD_PROFILE", "huge")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_emits_the_layer_table() {
    let f = fixtures();
    let out = litd(
        &f,
        &["--json", "--profile", "toy-1024", "--seed", "2", "bench", "--weights", "weights-poly2.bin", "--lanes", "1", "digits/001.pgm"],
    );
    assert_ok(&out);
    let doc = json(&out);
    let layers: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["layer"].as_str().unwrap()).collect();
    assert_eq!(
        layers,
        [
            "Encryption",
            "1st Conv",
            "1st AF",
            "1st pooling layer",
            "2nd Conv",
            "2nd AF",
            "2nd pooling layer",
            "1st FC layer",
            "3rd AF",
            "2nd FC layer",
            "Decryption"
        ]
    );
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r["time_ms"].as_f64().unwrap() >= 0.0));
    assert_eq!(doc["lanes"], 1);
    assert!(doc["class"].is_null());
}

struct Serving {
    child: std::process::Child,
    addr: String,
}

fn spawn_server(dir: &Path, keys: &str, max_requests: &str) -> Serving {
    let weights = fixtures().join("weights-poly2.bin");
    let mut child = Command::new(env!("CARGO_BIN_EXE_litd"))
        .args(["--seed", "8", "serve", "--keys", keys, "--weights", weights.to_str().unwrap()])
        .args(["--listen", "127.0.0.1:0", "--max-requests", max_requests])
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .strip_prefix("listening on ")
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();
    Serving { child, addr }
}

#[test]
fn classify_against_a_local_server() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&litd(dir.path(), &["--profile", "toy-1024", "--seed", "21", "keygen", "--out-dir", "good"]));
    assert_ok(&litd(dir.path(), &["--profile", "toy-1024", "--seed", "22", "keygen", "--out-dir", "other"]));
    let image = fixtures().join("digits/004.pgm");
    let image = image.to_str().unwrap();
    let mut server = spawn_server(dir.path(), "good/server.keys", "2");

    // A client holding another session's MAC key is refused before any evaluation.
    let forged = litd(dir.path(), &["--json", "classify", "--keys", "other/client.keys", "--endpoint", &server.addr, image]);
    assert_eq!(forged.status.code(), Some(2), "{}", stderr(&forged));
    assert_eq!(json(&forged)["kind"], "verification");
    assert!(stderr(&forged).contains("auth"), "{}", stderr(&forged));

    let out = litd(dir.path(), &["classify", "--keys", "good/client.keys", "--endpoint", &server.addr, image]);
    assert_ok(&out);
    let class: usize = stdout(&out).trim().parse().unwrap();
    assert!(class < 10);
    assert!(server.child.wait().unwrap().success());

    let plain = litd(
        dir.path(),
        &["--json", "infer-plain", "--weights", fixtures().join("weights-poly2.bin").to_str().unwrap(), "--quantized"],
    );
    assert_eq!(plain.status.code(), Some(1), "no image given");
    let plain = litd(
        dir.path(),
        &[
            "--json",
            "infer-plain",
            "--weights",
            fixtures().join("weights-poly2.bin").to_str().unwrap(),
            "--quantized",
            "--input-scale",
            "4",
            "--weight-scale",
            "4",
            image,
        ],
    );
    assert_ok(&plain);
    assert_eq!(json(&plain)["results"][0]["class"], class);
}
