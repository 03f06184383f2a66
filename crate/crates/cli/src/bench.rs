//! Wall-clock timings of the client and evaluation operations, locally and
//! against a running service, plus serialized sizes per ring degree.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use edl_core::backend::{Backend, CkksBackend, Tensor};
use edl_core::ckks::{decode, encode, keygen, Ciphertext, CkksContext, Decryptor, Encryptor, HeParams, KeyBundle, Plaintext};
use edl_core::nn::{pack_timestep, ComputeGraph};
use edl_core::registry::Registry;
use edl_core::wire::{deserialize_record, serialize_ciphertext, serialize_record, serialize_values, EncryptedRecord, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::client::ApiClient;
use crate::ClientError;

pub const MIN_TRIALS: usize = 30;
const WARMUP: usize = 2;
/// Seconds are kept to this many decimals in both report forms.
const DECIMALS: i32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean_s: f64,
    pub std_s: f64,
    pub trials: usize,
}

impl Stats {
    pub fn from_samples(samples: &[Duration]) -> Self {
        let n = samples.len();
        let secs: Vec<f64> = samples.iter().map(Duration::as_secs_f64).collect();
        let mean = secs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean_s: round(mean),
            std_s: round(var.sqrt()),
            trials: n,
        }
    }
}

fn round(x: f64) -> f64 {
    let k = 10f64.powi(DECIMALS);
    (x * k).round() / k
}

/// Remote column of a row. Primitive operations are not offered by the
/// service and stay blank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RemoteCell {
    NotApplicable,
    Absent,
    Measured { client: Stats, service: Option<Stats> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpRow {
    pub operation: String,
    pub local: Stats,
    pub remote: RemoteCell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub poly_modulus_degree: usize,
    pub vector_length: usize,
    pub plaintext_bytes: usize,
    pub ciphertext_bytes: usize,
    pub level0_ciphertext_bytes: usize,
    pub record_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub poly_modulus_degree: usize,
    pub levels: usize,
    pub remote: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_error: Option<String>,
    pub rows: Vec<OpRow>,
    #[serde(default)]
    pub sizes: Vec<SizeRow>,
}

impl BenchReport {
    pub fn row(&self, operation: &str) -> Option<&OpRow> {
        self.rows.iter().find(|r| r.operation == operation)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Text table with the same numbers as the JSON form.
    pub fn to_table(&self) -> String {
        let d = DECIMALS as usize;
        let mut out = String::new();
        let _ = writeln!(out, "operations (N = {}, {} levels), seconds", self.poly_modulus_degree, self.levels);
        let _ = writeln!(
            out,
            "{:<10} {:>12} {:>12} {:>6}   {:>12} {:>12} {:>12} {:>6}",
            "operation", "local_mean", "local_std", "n", "remote_mean", "remote_std", "service_mean", "n"
        );
        for r in &self.rows {
            let mut line = format!(
                "{:<10} {:>12.d$} {:>12.d$} {:>6}   ",
                r.operation, r.local.mean_s, r.local.std_s, r.local.trials
            );
            match &r.remote {
                RemoteCell::NotApplicable => {}
                RemoteCell::Absent => line.push_str(&format!("{:>12}", "absent")),
                RemoteCell::Measured { client, service } => {
                    let svc = service.map(|s| format!("{:.d$}", s.mean_s)).unwrap_or_default();
                    line.push_str(&format!(
                        "{:>12.d$} {:>12.d$} {:>12} {:>6}",
                        client.mean_s, client.std_s, svc, client.trials
                    ));
                }
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        if let Some(e) = &self.remote_error {
            let _ = writeln!(out, "remote: {e}");
        }
        if !self.sizes.is_empty() {
            let _ = writeln!(out, "\nsizes, bytes");
            let _ = writeln!(
                out,
                "{:>6} {:>8} {:>10} {:>12} {:>12} {:>12}",
                "N", "length", "plaintext", "ciphertext", "ct_level0", "record"
            );
            for s in &self.sizes {
                let _ = writeln!(
                    out,
                    "{:>6} {:>8} {:>10} {:>12} {:>12} {:>12}",
                    s.poly_modulus_degree,
                    s.vector_length,
                    s.plaintext_bytes,
                    s.ciphertext_bytes,
                    s.level0_ciphertext_bytes,
                    s.record_bytes
                );
            }
        }
        out
    }
}

/// Everything an operation needs, prepared once so trials time only the
/// operation itself.
pub struct Fixture {
    pub params: HeParams,
    pub ctx: Arc<CkksContext>,
    pub keys: KeyBundle,
    pub encryptor: Encryptor,
    pub decryptor: Decryptor,
    pub backend: CkksBackend,
    pub graph: ComputeGraph,
    pub values: Vec<f64>,
    pub plaintext: Plaintext,
    pub a: Ciphertext,
    pub b: Ciphertext,
    pub window: Vec<Ciphertext>,
    pub rng: ChaCha20Rng,
}

impl Fixture {
    pub fn new(params: &HeParams, graph: ComputeGraph, seed: u64) -> Result<Self, ClientError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = keygen(params, &mut rng)?;
        let ctx = CkksContext::new(params)?;
        let encryptor = Encryptor::new(ctx.clone(), &keys.public_key)?;
        let decryptor = Decryptor::new(ctx.clone(), &keys.secret_key)?;
        let backend = CkksBackend::new(params, Some(&keys.relin_key))?;
        let slots = params.slot_count();
        let draw = |rng: &mut ChaCha20Rng| -> Vec<f64> { (0..slots).map(|_| rng.random_range(0.0..1.0)).collect() };
        let values = draw(&mut rng);
        let top = params.max_level();
        let plaintext = encode(&ctx, &draw(&mut rng), params.scale(), top)?;
        let a = encryptor.encrypt(&encode(&ctx, &values, params.scale(), top)?, &mut rng)?;
        let b = encryptor.encrypt(&encode(&ctx, &draw(&mut rng), params.scale(), top)?, &mut rng)?;
        let window = (0..graph.window_length())
            .map(|_| {
                let x: Vec<f64> = (0..graph.feature_count()).map(|_| rng.random_range(0.0..1.0)).collect();
                let pt = encode(&ctx, &pack_timestep(&x, slots), params.scale(), top)?;
                encryptor.encrypt(&pt, &mut rng)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            params: params.clone(),
            ctx,
            keys,
            encryptor,
            decryptor,
            backend,
            graph,
            values,
            plaintext,
            a,
            b,
            window,
            rng,
        })
    }

    /// A record of the fixture window, ready to upload.
    pub fn record_frame(&self) -> Result<Vec<u8>, ClientError> {
        let record = EncryptedRecord {
            dataset_name: "bench".into(),
            owner: "bench".into(),
            submitted_at: chrono::Utc::now(),
            window_length: self.graph.window_length(),
            feature_count: self.graph.feature_count(),
            annotations: Default::default(),
            params: self.params.clone(),
            public_key: Some(self.keys.public_key.clone()),
            relin_key: Some(self.keys.relin_key.clone()),
            ciphertexts: self.window.clone(),
            secret_key: None,
        };
        Ok(serialize_record(&record, Mode::Transmission)?)
    }
}

/// State for remote trials: the service, a stored copy of the fixture window
/// and a finished job whose result can be fetched.
pub struct Remote {
    pub client: ApiClient,
    pub model_id: String,
    pub dataset_id: String,
    pub done_job: String,
}

pub struct RemoteSample {
    pub client: Duration,
    pub service: Option<Duration>,
}

const POLL: Duration = Duration::from_millis(5);
const JOB_DEADLINE: Duration = Duration::from_secs(600);

pub trait BenchOp: Send + Sync {
    fn name(&self) -> &'static str;

    /// One timed local trial.
    fn local(&self, fx: &mut Fixture) -> Result<Duration, ClientError>;

    fn offered_remotely(&self) -> bool {
        false
    }

    /// One timed remote trial, or `None` when the service has no such
    /// operation.
    fn remote(&self, _fx: &mut Fixture, _remote: &Remote) -> Result<Option<RemoteSample>, ClientError> {
        Ok(None)
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T, ClientError>) -> Result<(Duration, T), ClientError> {
    let start = Instant::now();
    let out = f()?;
    Ok((start.elapsed(), out))
}

struct EncryptOp;

impl BenchOp for EncryptOp {
    fn name(&self) -> &'static str {
        "encrypt"
    }

    fn offered_remotely(&self) -> bool {
        true
    }

    fn local(&self, fx: &mut Fixture) -> Result<Duration, ClientError> {
        let (params, ctx, enc, values, rng) = (&fx.params, &fx.ctx, &fx.encryptor, &fx.values, &mut fx.rng);
        Ok(timed(|| Ok(enc.encrypt(&encode(ctx, values, params.scale(), params.max_level())?, rng)?))?.0)
    }

    /// Encrypt, serialize and upload.
    fn remote(&self, fx: &mut Fixture, remote: &Remote) -> Result<Option<RemoteSample>, ClientError> {
        let (elapsed, _) = timed(|| {
            let slots = fx.params.slot_count();
            let top = fx.params.max_level();
            let mut cts = Vec::with_capacity(fx.window.len());
            for _ in 0..fx.window.len() {
                let x: Vec<f64> = (0..fx.graph.feature_count()).map(|_| fx.rng.random_range(0.0..1.0)).collect();
                let pt = encode(&fx.ctx, &pack_timestep(&x, slots), fx.params.scale(), top)?;
                cts.push(fx.encryptor.encrypt(&pt, &mut fx.rng)?);
            }
            let record = EncryptedRecord {
                dataset_name: "bench".into(),
                owner: "bench".into(),
                submitted_at: chrono::Utc::now(),
                window_length: fx.graph.window_length(),
                feature_count: fx.graph.feature_count(),
                annotations: Default::default(),
                params: fx.params.clone(),
                public_key: Some(fx.keys.public_key.clone()),
                relin_key: Some(fx.keys.relin_key.clone()),
                ciphertexts: cts,
                secret_key: None,
            };
            remote.client.submit(&serialize_record(&record, Mode::Transmission)?)
        })?;
        Ok(Some(RemoteSample {
            client: elapsed,
            service: None,
        }))
    }
}

struct DecryptOp;

impl BenchOp for DecryptOp {
    fn name(&self) -> &'static str {
        "decrypt"
    }

    fn offered_remotely(&self) -> bool {
        true
    }

    fn local(&self, fx: &mut Fixture) -> Result<Duration, ClientError> {
        Ok(timed(|| Ok(decode(&fx.ctx, &fx.decryptor.decrypt(&fx.a)?)?))?.0)
    }

    /// Download a finished result, parse and decrypt it.
    fn remote(&self, fx: &mut Fixture, remote: &Remote) -> Result<Option<RemoteSample>, ClientError> {
        let (elapsed, _) = timed(|| {
            let bytes = remote
                .client
                .fetch(&remote.done_job)?
                .result
                .ok_or_else(|| ClientError::Usage("finished job has no result".into()))?;
            let record = deserialize_record(&bytes, Mode::Transmission)?;
            let mut out = Vec::new();
            for ct in &record.ciphertexts {
                out.push(decode(&fx.ctx, &fx.decryptor.decrypt(ct)?)?);
            }
            Ok(out)
        })?;
        Ok(Some(RemoteSample {
            client: elapsed,
            service: None,
        }))
    }
}

struct InferenceOp;

impl BenchOp for InferenceOp {
    fn name(&self) -> &'static str {
        "inference"
    }

    fn offered_remotely(&self) -> bool {
        true
    }

    fn local(&self, fx: &mut Fixture) -> Result<Duration, ClientError> {
        let inputs: Vec<Tensor> = fx.window.iter().cloned().map(Tensor::Encrypted).collect();
        Ok(timed(|| {
            let out = fx.graph.forward(&fx.backend, &inputs)?;
            Ok(fx.backend.mod_switch_to(&out.output, 0)?)
        })?
        .0)
    }

    /// Start a job on the stored window and wait for it. The service column
    /// is the job's own creation-to-completion span.
    fn remote(&self, _fx: &mut Fixture, remote: &Remote) -> Result<Option<RemoteSample>, ClientError> {
        let (elapsed, view) = timed(|| {
            let job = remote.client.infer(&remote.dataset_id, &remote.model_id)?;
            remote.client.wait(&job, POLL, JOB_DEADLINE)
        })?;
        let span = (view.job.updated_at - view.job.created_at).to_std().unwrap_or_default();
        Ok(Some(RemoteSample {
            client: elapsed,
            service: Some(span),
        }))
    }
}

struct Primitive {
    name: &'static str,
    run: fn(&Fixture) -> Result<Ciphertext, ClientError>,
}

impl BenchOp for Primitive {
    fn name(&self) -> &'static str {
        self.name
    }

    fn local(&self, fx: &mut Fixture) -> Result<Duration, ClientError> {
        Ok(timed(|| (self.run)(fx))?.0)
    }
}

pub type BenchRegistry = Registry<Arc<dyn BenchOp>>;

/// Operations in report order.
pub const OPERATIONS: [&str; 7] = ["encrypt", "decrypt", "inference", "ct+ct", "ct+pt", "ct*ct", "ct*pt"];

pub fn default_registry() -> BenchRegistry {
    let mut r: BenchRegistry = Registry::new("bench operation");
    let ops: Vec<Arc<dyn BenchOp>> = vec![
        Arc::new(EncryptOp),
        Arc::new(DecryptOp),
        Arc::new(InferenceOp),
        Arc::new(Primitive {
            name: "ct+ct",
            run: |fx| Ok(fx.backend.evaluator().add(&fx.a, &fx.b)?),
        }),
        Arc::new(Primitive {
            name: "ct+pt",
            run: |fx| Ok(fx.backend.evaluator().add_plain(&fx.a, &fx.plaintext)?),
        }),
        Arc::new(Primitive {
            name: "ct*ct",
            run: |fx| Ok(fx.backend.evaluator().mul(&fx.a, &fx.b)?),
        }),
        Arc::new(Primitive {
            name: "ct*pt",
            run: |fx| Ok(fx.backend.evaluator().mul_plain(&fx.a, &fx.plaintext)?),
        }),
    ];
    for op in ops {
        r.register(op.name(), op).expect("distinct names");
    }
    r
}

/// Where remote rows are measured.
#[derive(Clone, Debug)]
pub struct RemoteTarget {
    pub url: String,
    pub token: String,
    pub model_id: String,
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub trials: usize,
    pub seed: u64,
    pub operations: Vec<String>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            trials: MIN_TRIALS,
            seed: 7,
            operations: OPERATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn connect(target: &RemoteTarget, fx: &Fixture) -> Result<Remote, ClientError> {
    let client = ApiClient::new(&target.url, &target.token, Default::default())?;
    client.health()?;
    let dataset_id = client.submit(&fx.record_frame()?)?;
    let job = client.infer(&dataset_id, &target.model_id)?;
    client.wait(&job, POLL, JOB_DEADLINE)?;
    Ok(Remote {
        client,
        model_id: target.model_id.clone(),
        dataset_id,
        done_job: job,
    })
}

/// Runs every selected operation `trials` times after a short warm-up. When
/// the target cannot be reached the report is local-only with the remote
/// cells marked absent.
pub fn bench_ops(
    params: &HeParams,
    graph: ComputeGraph,
    target: Option<&RemoteTarget>,
    registry: &BenchRegistry,
    options: &BenchOptions,
) -> Result<BenchReport, ClientError> {
    if options.trials < MIN_TRIALS {
        return Err(ClientError::Usage(format!("at least {MIN_TRIALS} trials per row")));
    }
    let mut fx = Fixture::new(params, graph, options.seed)?;
    let (remote, remote_error) = match target {
        Some(t) => match connect(t, &fx) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };
    let mut rows = Vec::new();
    for name in &options.operations {
        let op = registry.get(name).map_err(|e| ClientError::Usage(e.to_string()))?.clone();
        let mut samples = Vec::with_capacity(options.trials);
        for i in 0..WARMUP + options.trials {
            let t = op.local(&mut fx)?;
            if i >= WARMUP {
                samples.push(t);
            }
        }
        let local = Stats::from_samples(&samples);
        let remote_cell = match (&remote, op.offered_remotely()) {
            (_, false) => RemoteCell::NotApplicable,
            (None, true) => RemoteCell::Absent,
            (Some(r), true) => {
                let mut client = Vec::with_capacity(options.trials);
                let mut service = Vec::new();
                for i in 0..WARMUP + options.trials {
                    let s = op
                        .remote(&mut fx, r)?
                        .ok_or_else(|| ClientError::Usage(format!("`{name}` has no remote form")))?;
                    if i >= WARMUP {
                        client.push(s.client);
                        service.extend(s.service);
                    }
                }
                RemoteCell::Measured {
                    client: Stats::from_samples(&client),
                    service: (!service.is_empty()).then(|| Stats::from_samples(&service)),
                }
            }
        };
        rows.push(OpRow {
            operation: name.clone(),
            local,
            remote: remote_cell,
        });
    }
    Ok(BenchReport {
        poly_modulus_degree: params.poly_modulus_degree(),
        levels: params.max_level(),
        remote: target.map(|t| t.url.clone()),
        remote_error,
        rows,
        sizes: Vec::new(),
    })
}

/// Serialized sizes of one vector of `N/2` values as plain values, as a
/// fresh ciphertext, as that ciphertext switched to level 0, and as a
/// one-ciphertext record with its evaluation keys.
pub fn bench_sizes(param_sets: &[HeParams], seed: u64) -> Result<Vec<SizeRow>, ClientError> {
    let mut rows = Vec::with_capacity(param_sets.len());
    for params in param_sets {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = keygen(params, &mut rng)?;
        let ctx = CkksContext::new(params)?;
        let values: Vec<f64> = (0..params.slot_count()).map(|_| rng.random_range(0.0..1.0)).collect();
        let pt = encode(&ctx, &values, params.scale(), params.max_level())?;
        let ct = Encryptor::new(ctx.clone(), &keys.public_key)?.encrypt(&pt, &mut rng)?;
        let bottom = CkksBackend::new(params, None)?.evaluator().mod_switch_to(&ct, 0)?;
        let record = EncryptedRecord {
            dataset_name: "sizes".into(),
            owner: "bench".into(),
            submitted_at: chrono::Utc::now(),
            window_length: 1,
            feature_count: 1,
            annotations: Default::default(),
            params: params.clone(),
            public_key: Some(keys.public_key.clone()),
            relin_key: Some(keys.relin_key.clone()),
            ciphertexts: vec![ct.clone()],
            secret_key: None,
        };
        rows.push(SizeRow {
            poly_modulus_degree: params.poly_modulus_degree(),
            vector_length: values.len(),
            plaintext_bytes: serialize_values(&values).len(),
            ciphertext_bytes: serialize_ciphertext(&ct, params)?.len(),
            level0_ciphertext_bytes: serialize_ciphertext(&bottom, params)?.len(),
            record_bytes: serialize_record(&record, Mode::Transmission)?.len(),
        });
    }
    Ok(rows)
}

/// Starts a service on a loopback port, serving `graph` as `model_id`, with
/// its store and model directory under `dir`.
pub fn loopback(
    dir: &std::path::Path,
    graph: &ComputeGraph,
    model_id: &str,
    token: &str,
) -> Result<(edl_server::RunningServer, RemoteTarget), ClientError> {
    let models = dir.join("models");
    let model = edl_core::nn::ModelFile::from_graph(model_id, graph, None);
    crate::write_file(&models.join(format!("{model_id}.json")), model.to_json().as_bytes())?;
    let config = edl_server::ServerConfig {
        listen: "127.0.0.1:0".parse().expect("loopback address"),
        store: dir.join("store"),
        models,
        token: token.to_string(),
        max_body_bytes: 1 << 30,
        workers: 1,
        queue_capacity: 64,
    };
    let server = edl_server::RunningServer::start(config).map_err(|e| ClientError::Transport(e.to_string()))?;
    let target = RemoteTarget {
        url: server.url(),
        token: token.to_string(),
        model_id: model_id.to_string(),
    };
    Ok((server, target))
}
