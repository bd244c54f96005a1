//! `abehg` command line: local crypto operations, the two services, the
//! end-to-end demo, and the benchmark harness.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 policy not satisfied,
//! 4 missing master-key material.

use abehg::authz::Clock;
use abehg::bench::{bench_run, fit_linear, parse_csv, rows_to_csv, summarize, BenchConfig};
use abehg::config::ServiceConfig;
use abehg::cpabe::{self, CpabeError, MasterKey, PrivateKey, PublicKey};
use abehg::demo::{run as run_demo, DemoOptions};
use abehg::envelope::{self, EnvelopeError, RecordEnvelope, RecordMeta};
use abehg::http::{start_all, start_authz, start_resource, ServeError, ServerHandle};
use abehg::policy::{parse_postfix, AttributeSet};
use clap::{Parser, Subcommand};
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_POLICY: u8 = 3;
const EXIT_MISSING_MSK: u8 = 4;

/// Deterministic entropy for test fixtures only; services refuse it.
const TEST_SEED_ENV: &str = "ABEHG_TEST_SEED";

#[derive(Parser)]
#[command(
    name = "abehg",
    version,
    about = "Attribute-based encryption toolkit with an OAuth 2.0 authorization layer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the attribute authority's public parameters and master key
    Setup {
        #[arg(long = "out-pk", value_name = "FILE.gpk")]
        out_pk: PathBuf,
        #[arg(long = "out-msk", value_name = "FILE.msk")]
        out_msk: PathBuf,
    },
    /// Issue an attribute-bound private key
    Keygen {
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        msk: PathBuf,
        /// Comma-separated attribute list, e.g. "position:doctor,university:amu"
        #[arg(long)]
        attrs: String,
        #[arg(long, value_name = "FILE.prk")]
        out: PathBuf,
    },
    /// Seal a file under a postfix access policy
    Enc {
        #[arg(long)]
        pk: PathBuf,
        /// Postfix policy, e.g. "a b 2of2"
        #[arg(long)]
        policy: String,
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE.ehrx")]
        out: PathBuf,
        #[arg(long, default_value = "application/octet-stream")]
        content_type: String,
        #[arg(long, default_value = "local")]
        owner_id: String,
    },
    /// Open a sealed file with a private key
    Dec {
        #[arg(long)]
        pk: PathBuf,
        #[arg(long, value_name = "FILE.prk")]
        key: PathBuf,
        #[arg(long = "in", value_name = "FILE.ehrx")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the authorization server
    ServeAuthz {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the resource server / attribute authority (split topology)
    ServeResource {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run both servers co-hosted in one process
    ServeAll {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay the full data-owner / data-user exchange against running servers
    Demo {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data-user attributes (defaults to a profile satisfying the reference policy)
        #[arg(long)]
        attrs: Option<String>,
        /// Postfix policy the owner binds (defaults to the reference policy)
        #[arg(long)]
        policy: Option<String>,
        /// Record file to upload (defaults to a small sample record)
        #[arg(long)]
        record: Option<PathBuf>,
        /// Emit machine-readable JSON lines instead of a human transcript
        #[arg(long)]
        json: bool,
    },
    /// Time keygen/encrypt/decrypt against attribute count and write a CSV
    Bench {
        #[arg(long, default_value_t = 10)]
        max_attrs: u32,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        #[arg(long, value_name = "FILE.csv")]
        out: PathBuf,
    },
    /// Fit per-phase linear trends to a benchmark CSV
    Fit {
        #[arg(long = "in", value_name = "FILE.csv")]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

enum CliRng {
    Os(OsRng),
    Seeded(Box<ChaCha20Rng>),
}

impl RngCore for CliRng {
    fn next_u32(&mut self) -> u32 {
        match self {
            CliRng::Os(r) => r.next_u32(),
            CliRng::Seeded(r) => r.next_u32(),
        }
    }

    fn next_u64(&mut self) -> u64 {
        match self {
            CliRng::Os(r) => r.next_u64(),
            CliRng::Seeded(r) => r.next_u64(),
        }
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        match self {
            CliRng::Os(r) => r.fill_bytes(dest),
            CliRng::Seeded(r) => r.fill_bytes(dest),
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        match self {
            CliRng::Os(r) => r.try_fill_bytes(dest),
            CliRng::Seeded(r) => r.try_fill_bytes(dest),
        }
    }
}

impl CryptoRng for CliRng {}

fn cli_rng() -> CliRng {
    match std::env::var(TEST_SEED_ENV) {
        Ok(seed_text) => {
            let seed: [u8; 32] = Sha256::digest(seed_text.as_bytes()).into();
            eprintln!("warning: {TEST_SEED_ENV} is set; using deterministic test entropy");
            CliRng::Seeded(Box::new(ChaCha20Rng::from_seed(seed)))
        }
        Err(_) => CliRng::Os(OsRng),
    }
}

fn refuse_seeded_entropy(context: &str) -> Result<(), CliError> {
    if std::env::var(TEST_SEED_ENV).is_ok() {
        return Err(CliError::usage(format!(
            "{TEST_SEED_ENV} is set; deterministic entropy is for tests only and {context} refuses it"
        )));
    }
    Ok(())
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

fn read_file(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {what} {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8], what: &str) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::failure(format!("cannot write {what} {}: {e}", path.display())))
}

fn load_config(path: Option<PathBuf>) -> Result<ServiceConfig, CliError> {
    let path = path.or_else(|| std::env::var("ABEHG_CONFIG").ok().map(PathBuf::from));
    match path {
        Some(path) => ServiceConfig::load(&path).map_err(|e| CliError::usage(e.to_string())),
        None => Ok(ServiceConfig::default()),
    }
}

fn serve_error(e: ServeError) -> CliError {
    match e {
        ServeError::Config(message) => CliError::usage(message),
        ServeError::MissingKeys(path) => CliError {
            code: EXIT_MISSING_MSK,
            message: format!(
                "key material not found at {path}; run `abehg setup` and point the config at it"
            ),
        },
        ServeError::Io(e) => CliError::failure(e.to_string()),
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn cmd_setup(out_pk: &Path, out_msk: &Path) -> Result<(), CliError> {
    let mut rng = cli_rng();
    let (pk, msk) = cpabe::setup(&mut rng);
    write_file(out_pk, &pk.to_bytes(), "public key")?;
    write_file(out_msk, &msk.to_bytes(), "master key")?;
    println!("public key  -> {}", out_pk.display());
    println!("master key  -> {}", out_msk.display());
    Ok(())
}

fn cmd_keygen(pk: &Path, msk: &Path, attrs: &str, out: &Path) -> Result<(), CliError> {
    let pk = PublicKey::from_bytes(&read_file(pk, "public key")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let msk = MasterKey::from_bytes(&read_file(msk, "master key")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let attrs = AttributeSet::parse_list(attrs).map_err(|e| CliError::usage(e.to_string()))?;
    let mut rng = cli_rng();
    let sk = cpabe::keygen(&pk, &msk, &attrs, &mut rng)
        .map_err(|e| CliError::usage(e.to_string()))?;
    write_file(out, &sk.to_bytes(), "private key")?;
    println!("private key ({} attributes) -> {}", attrs.len(), out.display());
    Ok(())
}

fn cmd_enc(
    pk: &Path,
    policy: &str,
    input: &Path,
    out: &Path,
    content_type: String,
    owner_id: String,
) -> Result<(), CliError> {
    let pk = PublicKey::from_bytes(&read_file(pk, "public key")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let tree = parse_postfix(policy).map_err(|e| CliError::usage(format!("policy: {e}")))?;
    let plaintext = read_file(input, "input")?;
    let meta = RecordMeta {
        content_type,
        created_at: abehg::authz::SystemClock.now(),
        owner_id,
    };
    let mut rng = cli_rng();
    let env = envelope::seal(&pk, &tree, &plaintext, meta, &mut rng)
        .map_err(|e| CliError::usage(e.to_string()))?;
    write_file(out, &env.to_bytes(), "sealed record")?;
    println!(
        "sealed {} bytes under \"{}\" -> {}",
        plaintext.len(),
        abehg::serialize_policy(&tree),
        out.display()
    );
    Ok(())
}

fn cmd_dec(pk: &Path, key: &Path, input: &Path, out: &Path) -> Result<(), CliError> {
    let pk = PublicKey::from_bytes(&read_file(pk, "public key")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let sk = PrivateKey::from_bytes(&read_file(key, "private key")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let env = RecordEnvelope::from_bytes(&read_file(input, "sealed record")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let plaintext = envelope::open(&pk, &sk, &env).map_err(|e| match e {
        EnvelopeError::PolicyNotSatisfied
        | EnvelopeError::Cpabe(CpabeError::PolicyNotSatisfied) => CliError {
            code: EXIT_POLICY,
            message: "policy not satisfied: the key's attributes cannot open this record".into(),
        },
        other => CliError::failure(other.to_string()),
    })?;
    write_file(out, &plaintext, "plaintext")?;
    println!("recovered {} bytes -> {}", plaintext.len(), out.display());
    Ok(())
}

async fn wait_for_interrupt(handles: Vec<ServerHandle>) {
    let _ = tokio::signal::ctrl_c().await;
    eprintln!("shutting down");
    for handle in handles {
        handle.shutdown().await;
    }
}

fn cmd_serve(which: &str, config: Option<PathBuf>) -> Result<(), CliError> {
    refuse_seeded_entropy("the service")?;
    let config = load_config(config)?;
    let rt = runtime();
    rt.block_on(async {
        let handles = match which {
            "authz" => {
                let h = start_authz(&config).await.map_err(serve_error)?;
                println!("authorization server listening on {}", h.addr);
                vec![h]
            }
            "resource" => {
                let h = start_resource(&config).await.map_err(serve_error)?;
                println!("resource server listening on {}", h.addr);
                vec![h]
            }
            _ => {
                let (a, r) = start_all(&config).await.map_err(serve_error)?;
                println!("authorization server listening on {}", a.addr);
                println!("resource server listening on {}", r.addr);
                vec![a, r]
            }
        };
        wait_for_interrupt(handles).await;
        Ok(())
    })
}

fn cmd_demo(
    config: Option<PathBuf>,
    attrs: Option<String>,
    policy: Option<String>,
    record: Option<PathBuf>,
    json: bool,
) -> Result<(), CliError> {
    let config = load_config(config)?;
    let mut opts = DemoOptions::new(config.authz_url(), config.resource_url());
    if let Some(attrs) = attrs {
        opts.user_attrs =
            AttributeSet::parse_list(&attrs).map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(policy) = policy {
        parse_postfix(&policy).map_err(|e| CliError::usage(format!("policy: {e}")))?;
        opts.policy_text = policy;
    }
    if let Some(path) = record {
        opts.record = read_file(&path, "record")?;
    }
    let rt = runtime();
    match rt.block_on(run_demo(&opts)) {
        Ok(transcript) => {
            for step in transcript {
                if json {
                    println!(
                        "{}",
                        serde_json::json!({"step": step.label, "detail": step.detail})
                    );
                } else {
                    println!("[{:>4}] {}", step.label, step.detail);
                }
            }
            Ok(())
        }
        Err(e) => Err(CliError::failure(format!("demo failed at {}: {}", e.step, e.message))),
    }
}

fn cmd_bench(max_attrs: u32, trials: u32, out: &Path) -> Result<(), CliError> {
    // the benchmark always measures real entropy paths
    let config = BenchConfig {
        max_attrs,
        trials,
        payload_bytes: 1024,
    };
    let rows = bench_run(&config).map_err(|e| CliError::usage(e.to_string()))?;
    write_file(out, rows_to_csv(&rows).as_bytes(), "benchmark csv")?;
    println!("{} rows -> {}", rows.len(), out.display());
    print_fits(&rows, false)?;
    Ok(())
}

fn cmd_fit(input: &Path, json: bool) -> Result<(), CliError> {
    let text = String::from_utf8(read_file(input, "benchmark csv")?)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let rows = parse_csv(&text).map_err(|e| CliError::usage(e.to_string()))?;
    print_fits(&rows, json)
}

fn print_fits(rows: &[abehg::bench::BenchRow], json: bool) -> Result<(), CliError> {
    let fits = fit_linear(rows).map_err(|e| CliError::usage(e.to_string()))?;
    let points = summarize(rows);
    if json {
        let fit_json: Vec<_> = fits
            .iter()
            .map(|f| {
                serde_json::json!({
                    "phase": f.phase.as_str(),
                    "slope_us_per_attr": f.slope_us_per_attr,
                    "intercept_us": f.intercept_us,
                    "r_squared": f.r_squared,
                })
            })
            .collect();
        let point_json: Vec<_> = points
            .iter()
            .map(|p| {
                serde_json::json!({
                    "phase": p.phase.as_str(),
                    "attr_count": p.attr_count,
                    "mean_us": p.mean_us,
                    "median_us": p.median_us,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({"fits": fit_json, "points": point_json})
        );
        return Ok(());
    }
    println!("phase    attrs   mean(us)    median(us)");
    for p in &points {
        println!(
            "{:<8} {:>5} {:>11.1} {:>12.1}",
            p.phase, p.attr_count, p.mean_us, p.median_us
        );
    }
    println!();
    println!("phase    slope(us/attr)  intercept(us)      r^2");
    for f in &fits {
        println!(
            "{:<8} {:>14.1} {:>14.1} {:>8.4}",
            f.phase, f.slope_us_per_attr, f.intercept_us, f.r_squared
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Setup { out_pk, out_msk } => cmd_setup(&out_pk, &out_msk),
        Command::Keygen { pk, msk, attrs, out } => cmd_keygen(&pk, &msk, &attrs, &out),
        Command::Enc {
            pk,
            policy,
            input,
            out,
            content_type,
            owner_id,
        } => cmd_enc(&pk, &policy, &input, &out, content_type, owner_id),
        Command::Dec { pk, key, input, out } => cmd_dec(&pk, &key, &input, &out),
        Command::ServeAuthz { config } => cmd_serve("authz", config),
        Command::ServeResource { config } => cmd_serve("resource", config),
        Command::ServeAll { config } => cmd_serve("all", config),
        Command::Demo {
            config,
            attrs,
            policy,
            record,
            json,
        } => cmd_demo(config, attrs, policy, record, json),
        Command::Bench {
            max_attrs,
            trials,
            out,
        } => cmd_bench(max_attrs, trials, &out),
        Command::Fit { input, json } => cmd_fit(&input, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
