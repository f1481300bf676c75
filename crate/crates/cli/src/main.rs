//! `chanlab`: generate channels, build their extensions, run the solvers and
//! the verification harness.
//!
//! Exit status: 0 success, 1 validation failure, 2 failed check, 3 usage
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use chanlab::channel::{default_env_dim, validate_kraus, ChannelRecord, ValidationReport};
use chanlab::extension::BundleRecord;
use chanlab::matrix::nats_to_bits;
use chanlab::solvers::Argument;
use chanlab::verify::{run_check, Theorem};
use chanlab::{
    convex_closure, max_output_pnorm, min_output_entropy, named_channel, random_channel, Channel,
    DensityMatrix, Error as CoreError, ExtensionBundle, NamedChannel, OptimizerConfig, Optimum,
    SchattenP,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "chanlab",
    version,
    about = "Quantum channel extensions and their additivity quantities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Root seed; all randomness of the run derives from it.
    #[arg(long, global = true, env = "CHANLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, env = "CHANLAB_RESTARTS", default_value_t = 64)]
    restarts: usize,
    #[arg(
        long = "max-iter",
        global = true,
        env = "CHANLAB_MAX_ITER",
        default_value_t = 2000
    )]
    max_iter: usize,
    #[arg(
        long = "tol-step",
        global = true,
        env = "CHANLAB_TOL_STEP",
        default_value_t = 1e-10
    )]
    tol_step: f64,
    #[arg(
        long = "tol-value",
        global = true,
        env = "CHANLAB_TOL_VALUE",
        default_value_t = 1e-7
    )]
    tol_value: f64,
    /// Solver worker threads (never changes results).
    #[arg(long, global = true, env = "CHANLAB_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true, env = "CHANLAB_FORMAT", value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the JSON artifact here.
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random channel from a Haar isometry.
    Gen {
        #[arg(long)]
        din: usize,
        #[arg(long)]
        dout: usize,
        /// Environment dimension (default din·dout).
        #[arg(long)]
        env: Option<usize>,
    },
    /// Check a channel or extension-bundle file (or a named channel).
    Validate { input: String },
    /// Build the bistochastic and unital extensions of a channel.
    Extend { channel: String },
    /// Minimal output entropy.
    Moe { channel: String },
    /// Maximal output Schatten p-norm.
    Pnorm {
        channel: String,
        #[arg(long, env = "CHANLAB_P", default_value = "2")]
        p: SchattenP,
    },
    /// Convex closure of output entropy at a state.
    Ccoe {
        channel: String,
        /// Density-matrix JSON file; default is the maximally mixed state.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Run a verification check on a channel pair.
    Verify {
        /// One of 1-moe, 1-pnorm, 1-ccoe, 2, 3.
        #[arg(long)]
        theorem: Theorem,
        #[arg(long)]
        phi: String,
        #[arg(long, default_value = "identity:2")]
        omega: String,
        #[arg(long, env = "CHANLAB_P")]
        p: Option<SchattenP>,
        /// Input state for 1-ccoe; default is a random full-rank state.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
}

/// Failure classes that map to exit statuses.
#[derive(Debug)]
enum Failure {
    Validation(anyhow::Error),
    CheckFailed,
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<CoreError>() {
            Some(CoreError::Validation { .. }) | Some(CoreError::Parse(_)) => {
                Failure::Validation(e)
            }
            _ => Failure::Usage(e),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn optimizer_config(c: &Common) -> Result<OptimizerConfig, Failure> {
    let cfg = OptimizerConfig {
        restarts: c.restarts,
        max_iterations: c.max_iter,
        step_tolerance: c.tol_step,
        value_tolerance: c.tol_value,
        seed: c.seed,
        workers: c.workers,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(cfg)
}

/// A channel from a JSON file, or from a `name:dim[:param]` spec when no
/// such file exists.
fn load_channel(arg: &str) -> Result<Channel, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        let text = read(path)?;
        let rec: ChannelRecord = serde_json::from_str(&text).map_err(|e| {
            Failure::Validation(anyhow!("{}: malformed channel file: {e}", path.display()))
        })?;
        return Channel::try_from(rec)
            .with_context(|| format!("{}: not a valid channel", path.display()))
            .map_err(Failure::from);
    }
    let spec: NamedChannel = arg.parse().map_err(|e| {
        Failure::Usage(anyhow!("{arg:?} is neither a file nor a channel spec: {e}"))
    })?;
    named_channel(&spec).map_err(|e| Failure::Usage(e.into()))
}

fn load_state(path: &Path) -> Result<DensityMatrix, Failure> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Validation(anyhow!("{}: malformed density matrix: {e}", path.display()))
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(anyhow!("cannot read {}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline; the one encoding used for every
/// artifact so that load → save is byte-stable.
fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

struct Output {
    json: String,
    text: String,
}

fn emit(common: &Common, out: Output) -> Result<(), Failure> {
    if let Some(path) = &common.output {
        fs::write(path, &out.json)
            .map_err(|e| Failure::Usage(anyhow!("cannot write {}: {e}", path.display())))?;
    }
    match common.format {
        Format::Json => print!("{}", out.json),
        Format::Text => print!("{}", out.text),
    }
    Ok(())
}

fn channel_ref(ch: &Channel) -> Value {
    json!({
        "label": ch.label(),
        "dim_in": ch.dim_in(),
        "dim_out": ch.dim_out(),
        "kraus_count": ch.kraus().len(),
        "sha256": ch.content_hash(),
    })
}

fn optimum_text(what: &str, ch: &Channel, opt: &Optimum, unit: &str) -> String {
    let mut s = format!(
        "{what} of {}\n  value      {:.10}{unit}\n",
        ch.label(),
        opt.value
    );
    if unit == " nats" {
        s.push_str(&format!(
            "             {:.10} bits\n",
            nats_to_bits(opt.value)
        ));
    }
    s.push_str(&format!(
        "  converged  {}  (restart {}, {} iterations, gradient {:.2e})\n  agreeing   {}/{} restarts\n  seed       {}\n",
        opt.converged,
        opt.best_restart,
        opt.iterations,
        opt.residual_gradient_norm,
        opt.restarts_agreeing,
        opt.config.restarts,
        opt.seed
    ));
    if let Argument::Ensemble(e) = &opt.argument {
        s.push_str(&format!("  ensemble   {} members\n", e.members.len()));
    }
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = &cli.common;
    match cli.command {
        Command::Gen { din, dout, env } => {
            let env = env.unwrap_or_else(|| default_env_dim(din, dout));
            let ch = random_channel(din, dout, env, common.seed)
                .map_err(|e| Failure::Usage(e.into()))?;
            let report = ch.validate();
            let json = to_json(&ch);
            emit(
                common,
                Output {
                    text: format!("{report}\n"),
                    json,
                },
            )
        }
        Command::Validate { input } => validate(common, &input),
        Command::Extend { channel } => {
            let ch = load_channel(&channel)?;
            let bundle = ExtensionBundle::new(&ch);
            let text = format!(
                "{}\n{}\n{}\n",
                bundle.base.validate(),
                bundle.bistochastic_ext.validate(),
                bundle.unital_ext.validate()
            );
            emit(
                common,
                Output {
                    json: to_json(&bundle.to_record()),
                    text,
                },
            )
        }
        Command::Moe { channel } => {
            let ch = load_channel(&channel)?;
            let cfg = optimizer_config(common)?;
            let opt = min_output_entropy(&ch, &cfg)?;
            let json =
                to_json(&json!({"command": "moe", "channel": channel_ref(&ch), "optimum": opt}));
            emit(
                common,
                Output {
                    text: optimum_text("minimal output entropy", &ch, &opt, " nats"),
                    json,
                },
            )
        }
        Command::Pnorm { channel, p } => {
            let ch = load_channel(&channel)?;
            let cfg = optimizer_config(common)?;
            let opt = max_output_pnorm(&ch, p, &cfg)?;
            let json = to_json(
                &json!({"command": "pnorm", "channel": channel_ref(&ch), "p": p, "optimum": opt}),
            );
            emit(
                common,
                Output {
                    text: optimum_text(&format!("maximal output {p}-norm"), &ch, &opt, ""),
                    json,
                },
            )
        }
        Command::Ccoe { channel, rho } => {
            let ch = load_channel(&channel)?;
            let cfg = optimizer_config(common)?;
            let rho = match rho {
                Some(path) => load_state(&path)?,
                None => DensityMatrix::maximally_mixed(ch.dim_in()),
            };
            let opt = convex_closure(&ch, &rho, &cfg)?;
            let json = to_json(
                &json!({"command": "ccoe", "channel": channel_ref(&ch), "rho": rho, "optimum": opt}),
            );
            emit(
                common,
                Output {
                    text: optimum_text("convex closure of output entropy", &ch, &opt, " nats"),
                    json,
                },
            )
        }
        Command::Verify {
            theorem,
            phi,
            omega,
            p,
            rho,
        } => {
            let phi = load_channel(&phi)?;
            let omega = load_channel(&omega)?;
            let cfg = optimizer_config(common)?;
            let rho = rho.as_deref().map(load_state).transpose()?;
            let report = run_check(theorem, &phi, &omega, p, rho.as_ref(), &cfg)?;
            report.validate_schema()?;
            emit(
                common,
                Output {
                    json: to_json(&report),
                    text: report.render_text(),
                },
            )?;
            if report.all_asserted_passed() {
                Ok(())
            } else {
                for c in report.failed() {
                    eprintln!(
                        "failed: {} ({} {} {}, tol {})",
                        c.name, c.lhs, c.relation, c.rhs, c.tol
                    );
                }
                Err(Failure::CheckFailed)
            }
        }
    }
}

/// Validates a channel file, a bundle file or a named channel. Bundles also
/// require the extensions to be bistochastic and unital respectively.
fn validate(common: &Common, input: &str) -> Result<(), Failure> {
    let path = Path::new(input);
    let mut reports: Vec<ValidationReport> = Vec::new();
    let mut problems: Vec<String> = Vec::new();
    if path.exists() {
        let text = read(path)?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Validation(anyhow!("{}: malformed JSON: {e}", path.display())))?;
        if value.get("bistochastic").is_some() {
            let rec: BundleRecord = serde_json::from_value(value).map_err(|e| {
                Failure::Validation(anyhow!("{}: malformed bundle: {e}", path.display()))
            })?;
            for (role, r, want) in [
                ("base", &rec.base, None),
                (
                    "bistochastic",
                    &rec.bistochastic,
                    Some(chanlab::ChannelKind::Bistochastic),
                ),
                ("unital", &rec.unital, Some(chanlab::ChannelKind::Unital)),
            ] {
                let rep = validate_kraus(&r.label, r.dim_in, r.dim_out, &r.kraus);
                if let Some(kind) = want {
                    if rep.kind != kind {
                        problems.push(format!("{role} extension is {}, expected {kind}", rep.kind));
                    }
                }
                reports.push(rep);
            }
            if ExtensionBundle::try_from(rec.clone()).is_err() {
                problems.push("bundle is inconsistent with its base channel".into());
            }
        } else {
            let rec: ChannelRecord = serde_json::from_value(value).map_err(|e| {
                Failure::Validation(anyhow!("{}: malformed channel: {e}", path.display()))
            })?;
            reports.push(validate_kraus(
                &rec.label,
                rec.dim_in,
                rec.dim_out,
                &rec.kraus,
            ));
        }
    } else {
        let ch = load_channel(input)?;
        reports.push(ch.validate());
    }

    let valid = reports.iter().all(|r| r.valid) && problems.is_empty();
    let mut text: String = reports.iter().map(|r| format!("{r}\n")).collect();
    for p in &problems {
        text.push_str(&format!("problem: {p}\n"));
    }
    let json = to_json(
        &json!({"command": "validate", "valid": valid, "channels": reports, "problems": problems}),
    );
    emit(common, Output { json, text })?;
    if valid {
        Ok(())
    } else {
        Err(Failure::Validation(anyhow!("{input}: validation failed")))
    }
}
