use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use litd::approx::{error_report, relu, sigmoid, ChebyshevSeries, Interval, MonomialPoly};
use litd::enc_infer::{audit, decrypt_result, encrypt_image, BudgetProbe, Evaluator, LaneSet, QuantizedModel, Telemetry};
use litd::nn::{argmax, infer_plain, load_weights, read_image, Activation, ModelWeights, Tensor};
use litd::profile::Profile;
use litd::proto::{serve, Client, Server, ServerKeys, SessionKeys};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::{Cli, Command, FitArgs, Function, Output, PlainActivation, ScaleArgs};

const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

// Independent ChaCha streams under one --seed.
const STREAM_ENCRYPT: u64 = 2;
const STREAM_NONCES: u64 = 3;

impl FromStr for Function {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Function as ValueEnum>::from_str(s, true)
    }
}

impl Function {
    fn eval(self) -> fn(f64) -> f64 {
        match self {
            Function::Relu => relu,
            Function::Sigmoid => sigmoid,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Function::Relu => "relu",
            Function::Sigmoid => "sigmoid",
        }
    }
}

struct Env {
    cfg: Config,
    json: bool,
    seed: Option<u64>,
    profile: Option<Profile>,
}

impl Env {
    fn profile(&self) -> Result<Profile> {
        Ok(self.cfg.or(self.profile, "profile")?.unwrap_or(Profile::Default8192))
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        rng.set_stream(stream);
        rng
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.cfg
            .or(flag, key)?
            .ok_or_else(|| anyhow!("missing {key}: pass --{} or set it in the config file", flag_name(key)))
    }

    fn interval(&self, flag: Option<String>) -> Result<Interval> {
        match self.cfg.or(flag, "interval")? {
            Some(s) => parse_interval(&s),
            None => Ok(Interval::symmetric(10.0)?),
        }
    }

    fn scales(&self, args: &ScaleArgs, profile: Profile) -> Result<(i32, i32)> {
        let (input, weight) = profile.inference_scales();
        Ok((
            self.cfg.or(args.input_scale, "input_scale")?.unwrap_or(input),
            self.cfg.or(args.weight_scale, "weight_scale")?.unwrap_or(weight),
        ))
    }

    fn images(&self, flag: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
        if !flag.is_empty() {
            return Ok(flag);
        }
        Ok(vec![self.path(None, "image")?])
    }

    /// The fitted polynomial when --degree is set, else the one stored with the weights.
    fn activation_poly(&self, model: &ModelWeights, fit: &FitArgs) -> Result<MonomialPoly> {
        let degree = self.cfg.or(fit.degree, "degree")?;
        let function = self.cfg.or(fit.function, "function")?;
        match (degree, function) {
            (Some(d), f) => {
                let f = f.unwrap_or(Function::Relu);
                let interval = self.interval(fit.interval.clone())?;
                info!("fitting {} with degree {d} on [{}, {}]", f.name(), interval.lo(), interval.hi());
                Ok(ChebyshevSeries::fit(f.eval(), d, interval)?.to_monomial()?)
            }
            (None, Some(_)) => bail!("--function needs --degree"),
            (None, None) => match &model.meta().activation {
                Some(Activation::Poly(p)) => Ok(p.clone()),
                _ => bail!("the weights carry no activation polynomial; pass --degree"),
            },
        }
    }

    /// Client keys from a file, or fresh ones for the profile.
    fn session(&self, flag: Option<PathBuf>) -> Result<(SessionKeys, Profile)> {
        match self.cfg.or(flag, "keys")? {
            Some(path) => {
                let keys = SessionKeys::load(&path).with_context(|| format!("loading {}", path.display()))?;
                let profile = key_profile(keys.params(), &path)?;
                Ok((keys, profile))
            }
            None => {
                let profile = self.profile()?;
                info!("no key file given; generating keys for {profile}");
                Ok((SessionKeys::setup(profile, self.seed)?, profile))
            }
        }
    }
}

fn flag_name(key: &str) -> String {
    match key {
        "server_keys" => "keys".into(),
        _ => key.replace('_', "-"),
    }
}

fn key_profile(params: &litd::she::EncryptionParams, path: &Path) -> Result<Profile> {
    Profile::matching(params).ok_or_else(|| anyhow!("{} is not on the ring of any profile", path.display()))
}

fn parse_interval(s: &str) -> Result<Interval> {
    let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
    let (lo, hi) = inner.split_once(',').ok_or_else(|| anyhow!("interval {s:?}: expected lo,hi"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| anyhow!("interval {s:?}: {e}"));
    Ok(Interval::new(num(lo)?, num(hi)?)?)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_model(path: &Path) -> Result<ModelWeights> {
    load_weights(path).with_context(|| format!("loading weights {}", path.display()))
}

fn load_image(path: &Path) -> Result<Tensor> {
    read_image(path).with_context(|| format!("reading image {}", path.display()))
}

fn telemetry_json(t: &Telemetry) -> Value {
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    let mut rows = vec![json!({ "layer": "Encryption", "time_ms": ms(t.encryption), "min_budget": null })];
    rows.extend(t.stages.iter().map(|r| {
        json!({ "layer": r.stage.label(), "time_ms": ms(r.time), "scale_exp": r.scale_exp, "min_budget": r.min_budget })
    }));
    rows.push(json!({ "layer": "Decryption", "time_ms": ms(t.decryption), "min_budget": null }));
    Value::Array(rows)
}

fn logits_text(logits: &[f64]) -> String {
    logits.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ")
}

pub fn run(cli: Cli) -> Result<Output> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let env = Env {
        seed: cfg.or(cli.seed, "seed")?,
        profile: cli.profile,
        json: cli.json,
        cfg,
    };
    match cli.command {
        Command::Approx {
            function,
            degree,
            out,
            interval,
            errors,
            points,
        } => approx(&env, function, degree, &out, interval, errors, points),
        Command::Keygen { out_dir } => keygen(&env, &out_dir),
        Command::EncryptImage {
            keys,
            image,
            out,
            input_scale,
        } => encrypt(&env, keys, image, &out, input_scale),
        Command::InferPlain {
            weights,
            images,
            activation,
            fit,
            quantized,
            scales,
        } => infer_plain_cmd(&env, weights, images, activation, &fit, quantized, &scales),
        Command::InferEnc {
            weights,
            keys,
            image,
            fit,
            scales,
            telemetry,
        } => infer_enc(&env, weights, keys, image, &fit, &scales, telemetry),
        Command::Serve {
            keys,
            weights,
            listen,
            max_requests,
            max_frame,
            fit,
            scales,
        } => serve_cmd(&env, keys, weights, listen, max_requests, max_frame, &fit, &scales),
        Command::Classify {
            keys,
            endpoint,
            images,
            input_scale,
            max_frame,
        } => classify(&env, keys, endpoint, images, input_scale, max_frame),
        Command::Bench {
            weights,
            keys,
            image,
            fit,
            scales,
            lanes,
            budgets,
            out,
        } => bench(&env, weights, keys, image, &fit, &scales, lanes, budgets, out),
    }
}

fn approx(
    env: &Env,
    function: Function,
    degree: usize,
    out: &Path,
    interval: Option<String>,
    errors: Option<PathBuf>,
    points: usize,
) -> Result<Output> {
    let interval = env.interval(interval)?;
    if points == 0 {
        bail!("--points must be positive");
    }
    let f = function.eval();
    let poly = ChebyshevSeries::fit(f, degree, interval)?.to_monomial()?;
    let report = error_report(f, &poly, &interval.grid(points))?;
    let errors = errors.unwrap_or_else(|| out.with_extension("errors.csv"));
    write(out, poly.to_csv())?;
    write(&errors, report.to_csv())?;
    Ok(Output {
        text: format!(
            "{} degree {degree} on [{}, {}]: max |p - f| = {:.6e}\ncoefficients: {}\nerror grid: {}",
            function.name(),
            interval.lo(),
            interval.hi(),
            report.max_abs_error,
            out.display(),
            errors.display()
        ),
        json: json!({
            "function": function.name(),
            "degree": degree,
            "interval": [interval.lo(), interval.hi()],
            "coefficients": poly.coeffs(),
            "max_abs_error": report.max_abs_error,
            "grid_points": points,
            "coefficients_csv": out,
            "errors_csv": errors,
        }),
    })
}

fn keygen(env: &Env, out_dir: &Path) -> Result<Output> {
    let profile = env.profile()?;
    let keys = SessionKeys::setup(profile, env.seed)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let client = out_dir.join("client.keys");
    let server = out_dir.join("server.keys");
    let server_keys = keys.server_keys();
    keys.save(&client)?;
    server_keys.save(&server)?;
    let lanes = keys.lane_set()?;
    let fingerprint = hex(&Sha256::digest(server_keys.to_bytes())[..8]);
    Ok(Output {
        text: format!(
            "{profile}: n = {}, q = {} bits, {} lanes of {} bits\nclient keys: {}\nserver keys: {}\nfingerprint: {fingerprint}",
            keys.params().poly_degree(),
            keys.params().coeff_modulus_bits(),
            lanes.len(),
            keys.lanes.bits,
            client.display(),
            server.display()
        ),
        json: json!({
            "profile": profile.name(),
            "poly_degree": keys.params().poly_degree(),
            "coeff_modulus_bits": keys.params().coeff_modulus_bits(),
            "lanes": lanes.len(),
            "lane_bits": keys.lanes.bits,
            "capacity_bits": lanes.capacity_bits(),
            "client_keys": client,
            "server_keys": server,
            "fingerprint": fingerprint,
        }),
    })
}

fn encrypt(env: &Env, keys: Option<PathBuf>, image: Option<PathBuf>, out: &Path, input_scale: Option<i32>) -> Result<Output> {
    let path = env.path(keys, "keys")?;
    let keys = SessionKeys::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let profile = key_profile(keys.params(), &path)?;
    let scale = env.cfg.or(input_scale, "input_scale")?.unwrap_or(profile.inference_scales().0);
    let image_path = env.path(image, "image")?;
    let image = load_image(&image_path)?;
    let lanes = keys.lane_set()?;
    let ct = encrypt_image(&lanes, &keys.keys.public, &image, scale, &mut env.rng(STREAM_ENCRYPT))?;
    let bytes = ct.to_bytes(&lanes);
    write(out, &bytes)?;
    let digest = hex(&Sha256::digest(&bytes));
    Ok(Output {
        text: format!("{} bytes, {} lanes, scale 2^{scale} -> {}", bytes.len(), lanes.len(), out.display()),
        json: json!({
            "image": image_path,
            "out": out,
            "bytes": bytes.len(),
            "lanes": lanes.len(),
            "scale_exp": scale,
            "sha256": digest,
        }),
    })
}

fn infer_plain_cmd(
    env: &Env,
    weights: Option<PathBuf>,
    images: Vec<PathBuf>,
    activation: PlainActivation,
    fit: &FitArgs,
    quantized: bool,
    scales: &ScaleArgs,
) -> Result<Output> {
    let model = load_model(&env.path(weights, "weights")?)?;
    let act = match activation {
        PlainActivation::Model => model.meta().activation.clone().unwrap_or(Activation::Relu),
        PlainActivation::Relu => Activation::Relu,
        PlainActivation::Sigmoid => Activation::Sigmoid,
        PlainActivation::Poly => Activation::Poly(env.activation_poly(&model, fit)?),
    };
    let q = if quantized {
        let Activation::Poly(poly) = &act else {
            bail!("--quantized needs a polynomial activation");
        };
        let (si, sw) = env.scales(scales, env.profile()?)?;
        Some(QuantizedModel::new(&model, si, sw, poly)?)
    } else {
        None
    };
    let mut results = Vec::new();
    let mut lines = Vec::new();
    for path in env.images(images)? {
        let image = load_image(&path)?;
        let (class, logits, outside) = match &q {
            Some(q) => {
                let ints = q.infer_integer(&image)?;
                (argmax(&ints), q.infer_dequantized(&image)?, None)
            }
            None => {
                let r = infer_plain(&model, &image, &act)?;
                (r.class(), r.logits.data().to_vec(), Some(r.out_of_interval))
            }
        };
        lines.push(format!("{}: {class}  [{}]", path.display(), logits_text(&logits)));
        results.push(json!({ "image": path, "class": class, "logits": logits, "out_of_interval": outside }));
    }
    Ok(Output {
        text: lines.join("\n"),
        json: json!({
            "activation": act.name(),
            "quantized": quantized,
            "scales": q.as_ref().map(|q| [q.input_scale, q.weight_scale]),
            "results": results,
        }),
    })
}

/// Quantizes `model` and rejects it early if the keys cannot carry it.
fn prepare(env: &Env, model: &ModelWeights, lanes: &LaneSet, profile: Profile, fit: &FitArgs, scales: &ScaleArgs) -> Result<QuantizedModel> {
    let (si, sw) = env.scales(scales, profile)?;
    let poly = env.activation_poly(model, fit)?;
    let q = QuantizedModel::new(model, si, sw, &poly)?;
    for ctx in lanes.contexts() {
        audit(&q, ctx)?;
    }
    Ok(q)
}

fn infer_enc(
    env: &Env,
    weights: Option<PathBuf>,
    keys: Option<PathBuf>,
    image: Option<PathBuf>,
    fit: &FitArgs,
    scales: &ScaleArgs,
    telemetry: Option<PathBuf>,
) -> Result<Output> {
    let model = load_model(&env.path(weights, "weights")?)?;
    let (keys, profile) = env.session(keys)?;
    let lanes = keys.lane_set()?;
    let q = prepare(env, &model, &lanes, profile, fit, scales)?;
    q.check_headroom(lanes.capacity_bits())?;
    let image_path = env.path(image, "image")?;
    let image = load_image(&image_path)?;

    let start = Instant::now();
    let ct = encrypt_image(&lanes, &keys.keys.public, &image, q.input_scale, &mut env.rng(STREAM_ENCRYPT))?;
    let encryption = start.elapsed();
    let (out, mut t) = Evaluator::new(&q, &lanes, &keys.keys.relin).infer(&ct)?;
    let start = Instant::now();
    let decoded = decrypt_result(&lanes, &keys.keys.secret, &out)?;
    t.encryption = encryption;
    t.decryption = start.elapsed();
    if let Some(path) = &telemetry {
        write(path, t.to_csv())?;
    }
    let oracle = q.infer_integer(&image)?;
    let agrees = oracle == decoded.integers;
    Ok(Output {
        text: format!(
            "{}\nlogits: {}\ninteger oracle: {}",
            decoded.class,
            logits_text(&decoded.logits),
            if agrees { "exact match" } else { "MISMATCH" }
        ),
        json: json!({
            "image": image_path,
            "profile": profile.name(),
            "lanes": lanes.len(),
            "scales": [q.input_scale, q.weight_scale],
            "output_scale": q.output_scale(),
            "class": decoded.class,
            "logits": decoded.logits,
            "integers": decoded.integers.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "oracle_class": argmax(&oracle),
            "oracle_match": agrees,
            "telemetry": telemetry,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn serve_cmd(
    env: &Env,
    keys: Option<PathBuf>,
    weights: Option<PathBuf>,
    listen: Option<String>,
    max_requests: Option<usize>,
    max_frame: usize,
    fit: &FitArgs,
    scales: &ScaleArgs,
) -> Result<Output> {
    let path = env.path(keys, "server_keys")?;
    let keys = ServerKeys::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let profile = key_profile(keys.params(), &path)?;
    let model = load_model(&env.path(weights, "weights")?)?;
    let q = prepare(env, &model, &keys.lane_set()?, profile, fit, scales)?;
    let mut server = Server::new(keys, q)?.with_max_frame(max_frame);
    if let Some(seed) = env.seed {
        server = server.with_seed(seed);
    }
    let listen = env.cfg.or(listen, "listen")?.unwrap_or_else(|| DEFAULT_LISTEN.into());
    let max_requests = env.cfg.or(max_requests, "max_requests")?;
    let listener = TcpListener::bind(&listen).with_context(|| format!("binding {listen}"))?;
    let addr = listener.local_addr()?;
    {
        let mut stdout = std::io::stdout().lock();
        if env.json {
            writeln!(stdout, "{}", json!({ "listening": addr.to_string(), "profile": profile.name() }))?;
        } else {
            writeln!(stdout, "listening on {addr} ({profile})")?;
        }
        stdout.flush()?;
    }
    serve(&listener, &server, max_requests)?;
    Ok(Output {
        text: format!("stopped after {} connections", max_requests.unwrap_or(0)),
        json: json!({ "stopped": true, "connections": max_requests, "fresh_requests": server.cache().len() }),
    })
}

fn classify(
    env: &Env,
    keys: Option<PathBuf>,
    endpoint: Option<String>,
    images: Vec<PathBuf>,
    input_scale: Option<i32>,
    max_frame: usize,
) -> Result<Output> {
    let path = env.path(keys, "keys")?;
    let keys = SessionKeys::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let profile = key_profile(keys.params(), &path)?;
    let scale = env.cfg.or(input_scale, "input_scale")?.unwrap_or(profile.inference_scales().0);
    let endpoint = env.path(endpoint.map(PathBuf::from), "endpoint")?.display().to_string();
    let images = env.images(images)?;
    let client = Client::new(keys, scale)?;
    let mut rng = env.rng(STREAM_NONCES);
    let mut results = Vec::new();
    let mut lines = Vec::new();
    for path in &images {
        let image = load_image(path)?;
        let decoded = client
            .classify(endpoint.as_str(), &image, &mut rng, max_frame)
            .with_context(|| format!("classifying {} via {endpoint}", path.display()))?;
        lines.push(if images.len() == 1 {
            decoded.class.to_string()
        } else {
            format!("{}: {}", path.display(), decoded.class)
        });
        results.push(json!({ "image": path, "class": decoded.class, "logits": decoded.logits }));
    }
    Ok(Output {
        text: lines.join("\n"),
        json: json!({ "endpoint": endpoint, "results": results }),
    })
}

#[allow(clippy::too_many_arguments)]
fn bench(
    env: &Env,
    weights: Option<PathBuf>,
    keys: Option<PathBuf>,
    image: Option<PathBuf>,
    fit: &FitArgs,
    scales: &ScaleArgs,
    lane_limit: Option<usize>,
    budgets: bool,
    out: Option<PathBuf>,
) -> Result<Output> {
    let model = load_model(&env.path(weights, "weights")?)?;
    let (keys, profile) = env.session(keys)?;
    let all = keys.lane_set()?;
    let lanes = match lane_limit {
        Some(n) if n == 0 || n > all.len() => bail!("--lanes must be in 1..={}", all.len()),
        Some(n) => LaneSet::new(all.ring().clone(), &all.moduli()[..n])?,
        None => all,
    };
    let q = prepare(env, &model, &lanes, profile, fit, scales)?;
    if lane_limit.is_none() {
        q.check_headroom(lanes.capacity_bits())?;
    }
    let image_path = env.path(image, "image")?;
    let image = load_image(&image_path)?;

    let start = Instant::now();
    let ct = encrypt_image(&lanes, &keys.keys.public, &image, q.input_scale, &mut env.rng(STREAM_ENCRYPT))?;
    let encryption = start.elapsed();
    let mut evaluator = Evaluator::new(&q, &lanes, &keys.keys.relin);
    if budgets {
        evaluator = evaluator.with_probe(BudgetProbe::new(&keys.keys.secret));
    }
    let (result, mut t) = evaluator.infer(&ct)?;
    let start = Instant::now();
    let decoded = decrypt_result(&lanes, &keys.keys.secret, &result)?;
    t.encryption = encryption;
    t.decryption = start.elapsed();
    let csv = t.to_csv();
    if let Some(path) = &out {
        write(path, &csv)?;
    }
    let class = lane_limit.is_none().then_some(decoded.class);
    let mut text = match &out {
        Some(path) => format!("table: {}", path.display()),
        None => csv.trim_end().to_string(),
    };
    if let Some(c) = class {
        text.push_str(&format!("\nclass: {c}"));
    }
    Ok(Output {
        text,
        json: json!({
            "image": image_path,
            "profile": profile.name(),
            "lanes": lanes.len(),
            "scales": [q.input_scale, q.weight_scale],
            "class": class,
            "rows": telemetry_json(&t),
            "csv": out,
        }),
    })
}
