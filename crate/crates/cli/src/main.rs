use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use edl_cli::bench::{self, BenchOptions, RemoteTarget};
use edl_cli::client::{ApiClient, ClientOptions};
use edl_cli::synth::{synth_csv, synthetic_spec};
use edl_cli::wrangle::{denormalize, wrangle, WrangleSpec, Wrangled};
use edl_cli::{decrypt_result, encrypt_dataset, read_file, write_file, KeyStore};
use edl_core::ckks::HeParams;
use edl_core::nn::{
    train, ActivationRegistry, ComputeGraph, ModelFile, Sample, TrainOptions, TrainingSummary,
};
use edl_core::wire::{serialize_record, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "edl", version, about = "Encrypted inference client")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ServerArgs {
    #[arg(long, env = "EDL_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    #[arg(long, env = "EDL_TOKEN", hide_env_values = true)]
    token: String,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    /// Extra attempts on connection failure or 503.
    #[arg(long, default_value_t = 2)]
    retries: u32,
}

impl ServerArgs {
    fn client(&self) -> Result<ApiClient> {
        let options = ClientOptions {
            timeout: Duration::from_secs(self.timeout),
            retries: self.retries,
            ..Default::default()
        };
        Ok(ApiClient::new(&self.server, &self.token, options)?)
    }
}

#[derive(Args, Clone)]
struct KeystoreArg {
    #[arg(long, env = "EDL_KEYSTORE", default_value = "edl-keys")]
    keystore: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Ring degree from --degree, five levels.
    Desk,
    /// N = 1024, five levels. Not secure.
    Test,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    #[arg(long, default_value_t = 8192)]
    degree: usize,
}

impl ParamArgs {
    fn params(&self) -> Result<HeParams> {
        Ok(match self.profile {
            Profile::Desk => HeParams::desk(self.degree)?,
            Profile::Test => HeParams::insecure_test(5)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic yield series as CSV, and optionally its wrangle spec.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        spec_out: Option<PathBuf>,
    },
    /// Normalise a CSV into windows (JSON).
    Wrangle {
        #[arg(long)]
        input: PathBuf,
        /// Wrangle spec JSON; defaults to the synthetic series spec.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate keys for a dataset in the keystore.
    Keygen {
        #[arg(long)]
        dataset: String,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        keystore: KeystoreArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encrypt wrangled windows into a record ready for upload.
    Encrypt {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, default_value = "anonymous")]
        owner: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        keystore: KeystoreArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Upload a record; prints the dataset id.
    Submit {
        #[arg(long)]
        record: PathBuf,
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Start an inference job; prints the job id.
    Infer {
        #[arg(long)]
        dataset_id: String,
        #[arg(long)]
        model: String,
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Show a job; with --out, save its result once available.
    Fetch {
        #[arg(long)]
        job: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Poll until the job finishes.
        #[arg(long)]
        wait: bool,
        #[arg(long, default_value_t = 600)]
        wait_secs: u64,
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Decrypt a result with the keystore; prints predictions as JSON.
    Decrypt {
        #[arg(long)]
        result: PathBuf,
        #[command(flatten)]
        keystore: KeystoreArg,
        /// Spec used to map predictions back to target units.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List datasets held by the server.
    Datasets {
        #[arg(long)]
        owner: Option<String>,
        #[command(flatten)]
        server: ServerArgs,
    },
    /// List models served.
    Models {
        #[command(flatten)]
        server: ServerArgs,
    },
    /// Train the reference model on wrangled windows in the clear.
    Train {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        model_id: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Plaintext predictions of a model over wrangled windows.
    Predict {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Time operations and measure serialized sizes.
    Bench {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = bench::MIN_TRIALS)]
        trials: usize,
        /// Measure remote rows against this server.
        #[arg(long, env = "EDL_SERVER")]
        server: Option<String>,
        #[arg(long, env = "EDL_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[arg(long, default_value = "bench-ref")]
        model: String,
        /// Start a private server on a loopback port for the remote rows.
        #[arg(long, conflicts_with = "server")]
        loopback: bool,
        /// Ring degrees for the size table.
        #[arg(long, value_delimiter = ',', default_value = "8192,16384")]
        size_degrees: Vec<usize>,
        #[arg(long, default_value = "bench.json")]
        json_out: PathBuf,
        #[arg(long, default_value = "bench.txt")]
        text_out: PathBuf,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

fn load_windows(path: &Path) -> Result<Wrangled> {
    serde_json::from_slice(&read_file(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_spec(path: Option<&Path>) -> Result<WrangleSpec> {
    match path {
        None => Ok(synthetic_spec()),
        Some(p) => serde_json::from_slice(&read_file(p)?).with_context(|| format!("parsing {}", p.display())),
    }
}

fn samples(w: &Wrangled) -> Vec<Sample> {
    w.windows
        .iter()
        .map(|x| Sample {
            window: x.rows.clone(),
            target: x.target,
        })
        .collect()
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { seed, rows, out, spec_out } => {
            write_file(&out, synth_csv(seed, rows).as_bytes())?;
            if let Some(p) = spec_out {
                write_file(&p, serde_json::to_string_pretty(&synthetic_spec())?.as_bytes())?;
            }
        }
        Command::Wrangle { input, spec, out } => {
            let spec = load_spec(spec.as_deref())?;
            let text = String::from_utf8(read_file(&input)?).context("input is not UTF-8")?;
            let w = wrangle(&text, &spec)?;
            write_file(&out, serde_json::to_string(&w)?.as_bytes())?;
            eprintln!("{} windows of {} x {}", w.windows.len(), w.window_length, w.feature_count());
        }
        Command::Keygen { dataset, params, keystore, seed } => {
            let store = KeyStore::new(keystore.keystore);
            store.generate(&dataset, &params.params()?, &mut rng(seed))?;
            eprintln!("keys written to {}", store.path_for(&dataset)?.display());
        }
        Command::Encrypt { windows, dataset, owner, out, params, keystore, seed } => {
            let w = load_windows(&windows)?;
            let store = KeyStore::new(keystore.keystore);
            let record = encrypt_dataset(&w, &dataset, &owner, &params.params()?, &store, &mut rng(seed))?;
            write_file(&out, &serialize_record(&record, Mode::Transmission)?)?;
            eprintln!("{} ciphertexts in {} windows", record.ciphertexts.len(), record.window_count());
        }
        Command::Submit { record, server } => {
            println!("{}", server.client()?.submit(&read_file(&record)?)?);
        }
        Command::Infer { dataset_id, model, server } => {
            println!("{}", server.client()?.infer(&dataset_id, &model)?);
        }
        Command::Fetch { job, out, wait, wait_secs, server } => {
            let client = server.client()?;
            let view = if wait {
                client.wait(&job, Duration::from_millis(250), Duration::from_secs(wait_secs))?
            } else {
                client.fetch(&job)?
            };
            print_json(&view.job)?;
            match (out, view.result) {
                (Some(p), Some(bytes)) => write_file(&p, &bytes)?,
                (Some(_), None) => bail!("job {job} has no result yet (status {:?})", view.job.status),
                _ => {}
            }
        }
        Command::Decrypt { result, keystore, spec, out } => {
            let report = decrypt_result(&read_file(&result)?, &KeyStore::new(keystore.keystore))?;
            let mut value = serde_json::to_value(&report)?;
            if let Some(p) = spec {
                let spec = load_spec(Some(&p))?;
                let units: Vec<f64> = report.predictions.iter().map(|x| denormalize(&spec.target, x.value)).collect();
                value["predictions_in_units"] = json!(units);
            }
            let text = serde_json::to_string_pretty(&value)?;
            match out {
                Some(p) => write_file(&p, text.as_bytes())?,
                None => println!("{text}"),
            }
        }
        Command::Datasets { owner, server } => print_json(&server.client()?.list(owner.as_deref())?)?,
        Command::Models { server } => print_json(&server.client()?.models()?)?,
        Command::Train { windows, model_id, out, epochs, learning_rate, seed } => {
            let w = load_windows(&windows)?;
            let mut graph = ComputeGraph::reference(w.feature_count(), seed)?;
            if graph.window_length() != w.window_length {
                bail!("the reference model takes windows of {}", graph.window_length());
            }
            let options = TrainOptions {
                epochs,
                learning_rate,
                seed,
                frozen: Vec::new(),
            };
            let outcome = train(&mut graph, &samples(&w), &options)?;
            let summary = TrainingSummary {
                epochs,
                learning_rate,
                seed,
                loss_curve: outcome.loss_curve.clone(),
            };
            write_file(&out, ModelFile::from_graph(model_id, &graph, Some(summary)).to_json().as_bytes())?;
            eprintln!(
                "mse {:.6} -> {:.6}",
                outcome.loss_curve[0],
                outcome.loss_curve.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Predict { windows, model } => {
            let w = load_windows(&windows)?;
            let text = String::from_utf8(read_file(&model)?).context("model is not UTF-8")?;
            let graph = ModelFile::from_json(&text)?.to_graph(&ActivationRegistry::default())?;
            let preds: Vec<f64> = w.windows.iter().map(|x| graph.predict(&x.rows)).collect::<Result<_, _>>()?;
            print_json(&json!({ "predictions": preds }))?;
        }
        Command::Bench {
            params,
            trials,
            server,
            token,
            model,
            loopback,
            size_degrees,
            json_out,
            text_out,
        } => {
            let params = params.params()?;
            let graph = ComputeGraph::reference(synthetic_spec().feature_names().len(), 3)?;
            let scratch = tempfile::tempdir()?;
            let mut _running = None;
            let target = if loopback {
                let (s, t) = bench::loopback(scratch.path(), &graph, &model, "bench-token")?;
                _running = Some(s);
                Some(t)
            } else {
                server.map(|url| RemoteTarget {
                    url,
                    token: token.unwrap_or_default(),
                    model_id: model.clone(),
                })
            };
            let options = BenchOptions {
                trials,
                ..Default::default()
            };
            let mut report = bench::bench_ops(&params, graph, target.as_ref(), &bench::default_registry(), &options)?;
            let sets: Vec<HeParams> = size_degrees.iter().map(|&n| HeParams::desk(n)).collect::<Result<_, _>>()?;
            report.sizes = bench::bench_sizes(&sets, options.seed)?;
            write_file(&json_out, report.to_json().as_bytes())?;
            write_file(&text_out, report.to_table().as_bytes())?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}
