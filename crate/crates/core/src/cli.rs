//! Command-line front end.
//!
//! Every subcommand that writes files also writes `<out>.manifest.json`
//! recording the argument vector, the inputs and outputs with their SHA-256
//! digests, and the wall time. `replay` re-runs a manifest into a fresh
//! location and compares the digests.
//!
//! Exit codes: 0 success, 1 verification failure, 2 convergence failure,
//! 3 input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds;
use crate::compiler::{compile, CompileConfig, Compiled};
use crate::distribution::{condition_split, Distribution};
use crate::error::{Error, Result};
use crate::inference::{composition_check, layer_marginal, visible_factorization_check, Messages};
use crate::model::{joint_distribution_oracle, DbmParams, ORACLE_LIMIT};
use crate::space::StateSpace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONVERGENCE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Largest deviation `verify` accepts.
pub const VERIFY_TOLERANCE: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(
    name = "narrow-dbm",
    version,
    about = "Exact evaluation and compilation of narrow deep Boltzmann machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a target distribution into a DBM.
    Compile(CompileArgs),
    /// Exact layer marginal or clamped conditional of a model.
    Eval(EvalArgs),
    /// Check transfer-matrix inference against enumeration and the split identities.
    Verify(VerifyArgs),
    /// Depth, width and parameter bounds.
    Bounds(BoundsArgs),
    /// Re-run a manifest and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct CompileArgs {
    /// Distribution JSON file.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    target: Option<PathBuf>,
    /// Generate a seeded random strictly positive target on this many units.
    #[arg(long, value_name = "N")]
    random: Option<usize>,
    /// Alphabet size for --random.
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden layer width (defaults to the visible width).
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f64,
    #[arg(long, default_value_t = 8.0)]
    beta0: f64,
    #[arg(long, default_value_t = 64.0)]
    max_beta: f64,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Output prefix: writes `<out>.dbm.json`, `<out>.cert.json`, `<out>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Clamp units of the layer, e.g. `0=1,1=0`; the output is the
    /// conditional over the remaining units.
    #[arg(long)]
    clamp: Option<String>,
    /// Output file; prints to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Perturb the transfer-matrix marginals before comparison (negative control).
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    /// Depth at which to count parameters (defaults to the sufficient depth).
    #[arg(long)]
    layers: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output location for the re-run (a prefix for compile, a file otherwise).
    #[arg(long)]
    out: PathBuf,
}

/// Record of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub exit_code: i32,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    /// What the file holds: `target`, `model`, `certificate`, `distribution`, `report` or `bounds`.
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))
    }
}

/// Report written by `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub widths: Vec<usize>,
    pub q: usize,
    pub joint_states: String,
    /// Whether enumeration ran; when false only self-consistency was checked.
    pub oracle_checked: bool,
    pub log_partition: f64,
    pub log_partition_deviation: Option<f64>,
    pub marginal_deviation: Option<f64>,
    /// Spread of `log Z` computed at different layers, and of marginal totals from 1.
    pub self_consistency_deviation: f64,
    pub composition_deviation: Option<f64>,
    pub factorization_deviation: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Run the CLI on a full argument vector (program name first) and return
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let rest: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, rest) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command, argv: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let mut rec = Recorder::default();
    let (name, code, out, config, seed) = match command {
        Command::Compile(a) => {
            let code = cmd_compile(&a, &mut rec)?;
            let config = serde_json::json!({
                "random": a.random, "alphabet": a.alphabet, "width": a.width, "tolerance": a.tolerance,
                "beta0": a.beta0, "max_beta": a.max_beta, "max_depth": a.max_depth,
            });
            ("compile", code, Some(a.out), config, a.random.map(|_| a.seed))
        }
        Command::Eval(a) => {
            let code = cmd_eval(&a, &mut rec)?;
            let config = serde_json::json!({ "layer": a.layer, "clamp": a.clamp });
            ("eval", code, a.out, config, None)
        }
        Command::Verify(a) => {
            let code = cmd_verify(&a, &mut rec)?;
            let config = serde_json::json!({ "tolerance": VERIFY_TOLERANCE, "oracle_limit": ORACLE_LIMIT as u64 });
            ("verify", code, a.out, config, None)
        }
        Command::Bounds(a) => {
            let code = cmd_bounds(&a, &mut rec)?;
            let config = serde_json::json!({ "n": a.n, "alphabet": a.alphabet, "layers": a.layers });
            ("bounds", code, a.out, config, None)
        }
        Command::Replay(a) => return cmd_replay(&a),
    };
    if let Some(out) = out {
        let manifest = RunManifest {
            subcommand: name.to_string(),
            argv,
            inputs: rec.inputs,
            outputs: rec.outputs,
            config,
            seed,
            exit_code: code,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
        write_file(&with_suffix(&out, ".manifest.json"), &text)?;
    }
    Ok(code)
}

#[derive(Default)]
struct Recorder {
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Recorder {
    fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        self.inputs.push(digest(role, path, &text));
        Ok(text)
    }

    fn write(&mut self, role: &str, path: &Path, text: &str) -> Result<()> {
        write_file(path, text)?;
        self.outputs.push(digest(role, path, text));
        Ok(())
    }
}

fn digest(role: &str, path: &Path, text: &str) -> FileDigest {
    FileDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(text.as_bytes()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_compile(a: &CompileArgs, rec: &mut Recorder) -> Result<i32> {
    let target = match (&a.target, a.random) {
        (Some(path), _) => Distribution::from_json(&rec.read("target", path)?)?,
        (None, Some(n)) => {
            let t = Distribution::random_positive(StateSpace::new(n, a.alphabet)?, a.seed);
            rec.write("target", &with_suffix(&a.out, ".target.json"), &t.to_json())?;
            t
        }
        (None, None) => return Err(Error::domain("either --target or --random is required")),
    };
    let config = CompileConfig {
        tolerance: a.tolerance,
        beta0: a.beta0,
        max_beta: a.max_beta,
        max_depth: a.max_depth,
        width: a.width,
    };
    let (compiled, code) = match compile(&target, &config) {
        Ok(c) => (c, EXIT_OK),
        Err(Error::Convergence { outcome, .. }) => (*outcome, EXIT_CONVERGENCE),
        Err(e) => return Err(e),
    };
    write_compiled(&compiled, &a.out, rec)?;
    let cert = &compiled.certificate;
    println!(
        "kl {:e} depth {} width {} base_beta {} converged {}",
        cert.kl, cert.depth, cert.width, cert.base_beta, cert.converged
    );
    if code != EXIT_OK {
        eprintln!(
            "convergence failure: best KL {:e} exceeds tolerance {:e}",
            cert.kl, cert.tolerance
        );
    }
    Ok(code)
}

fn write_compiled(c: &Compiled, out: &Path, rec: &mut Recorder) -> Result<()> {
    rec.write("model", &with_suffix(out, ".dbm.json"), &c.params.to_json())?;
    rec.write("certificate", &with_suffix(out, ".cert.json"), &c.certificate.to_json())
}

/// Parse `i=v,j=w,...` into sorted coordinate and value lists.
pub fn parse_clamp(spec: &str, space: StateSpace) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut pairs = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (i, v) = item
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("clamp entry `{item}` is not of the form i=v")))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("bad unit index in `{item}`")))?;
        let v: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::domain(format!("bad value in `{item}`")))?;
        if i >= space.n() {
            return Err(Error::Index(format!("clamped unit {i} >= layer width {}", space.n())));
        }
        if v >= space.q() {
            return Err(Error::domain(format!(
                "clamped value {v} >= alphabet size {}",
                space.q()
            )));
        }
        if pairs.iter().any(|&(j, _)| j == i) {
            return Err(Error::domain(format!("unit {i} clamped twice")));
        }
        pairs.push((i, v));
    }
    if pairs.is_empty() {
        return Err(Error::domain("empty clamp specification"));
    }
    pairs.sort_unstable();
    Ok(pairs.into_iter().unzip())
}

fn cmd_eval(a: &EvalArgs, rec: &mut Recorder) -> Result<i32> {
    let params = DbmParams::from_json(&rec.read("model", &a.model)?)?;
    let marginal = layer_marginal(&params, a.layer)?;
    let result = match &a.clamp {
        None => marginal,
        Some(spec) => {
            let (coords, values) = parse_clamp(spec, marginal.space())?;
            condition_split(&marginal, &coords, &values)?
        }
    };
    emit(rec, "distribution", a.out.as_deref(), &result.to_json())?;
    Ok(EXIT_OK)
}

fn emit(rec: &mut Recorder, role: &str, out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => rec.write(role, p, text),
        None => {
            // A closed pipe on stdout is not an error worth reporting.
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
    }
}

/// Run every check `verify` performs. `corrupt` perturbs the transfer-matrix
/// marginals before comparison.
pub fn verify_model(params: &DbmParams, corrupt: bool) -> Result<VerifyReport> {
    let messages = Messages::compute(params)?;
    let mut marginals = Vec::with_capacity(params.depth() + 1);
    for k in 0..=params.depth() {
        marginals.push(layer_marginal(params, k)?.probs().to_vec());
    }
    if corrupt {
        marginals[0][0] += 1e-6;
    }
    let log_z = messages.log_partition_at(0);
    let scale = log_z.abs().max(1.0);
    let mut consistency: f64 = 0.0;
    for (k, m) in marginals.iter().enumerate() {
        consistency = consistency.max((messages.log_partition_at(k) - log_z).abs() / scale);
        consistency = consistency.max((m.iter().sum::<f64>() - 1.0).abs());
    }

    let states: u128 = params
        .widths()
        .iter()
        .try_fold(1u128, |acc, &w| {
            acc.checked_mul((params.q() as u128).checked_pow(w as u32)?)
        })
        .unwrap_or(u128::MAX);
    let (mut z_dev, mut m_dev) = (None, None);
    if states <= ORACLE_LIMIT {
        let joint = joint_distribution_oracle(params)?;
        let oracle_z = crate::model::oracle_log_partition(params, ORACLE_LIMIT)?;
        z_dev = Some((oracle_z - log_z).abs() / scale);
        let mut offset = 0;
        let mut worst: f64 = 0.0;
        for (k, m) in marginals.iter().enumerate() {
            let coords: Vec<usize> = (offset..offset + params.widths()[k]).collect();
            offset += params.widths()[k];
            let exact = joint.marginal(&coords)?;
            worst = worst.max(exact.probs().iter().zip(m).fold(0.0, |w, (a, b)| w.max((a - b).abs())));
        }
        m_dev = Some(worst);
    }

    let mut composition = None;
    for k in 1..params.depth() {
        let split = params.biases()[k].scale(0.5);
        let d = composition_check(params, k, &split)?;
        composition = Some(composition.map_or(d, |c: f64| c.max(d)));
    }
    let factorization = if params.depth() >= 2 {
        Some(visible_factorization_check(params)?)
    } else {
        None
    };
    let worst = [z_dev, m_dev, composition, factorization, Some(consistency)]
        .into_iter()
        .flatten()
        .fold(0.0, f64::max);
    Ok(VerifyReport {
        widths: params.widths().to_vec(),
        q: params.q(),
        joint_states: if states == u128::MAX {
            "overflow".into()
        } else {
            states.to_string()
        },
        oracle_checked: z_dev.is_some(),
        log_partition: log_z,
        log_partition_deviation: z_dev,
        marginal_deviation: m_dev,
        self_consistency_deviation: consistency,
        composition_deviation: composition,
        factorization_deviation: factorization,
        tolerance: VERIFY_TOLERANCE,
        passed: worst <= VERIFY_TOLERANCE,
    })
}

fn cmd_verify(a: &VerifyArgs, rec: &mut Recorder) -> Result<i32> {
    let params = DbmParams::from_json(&rec.read("model", &a.model)?)?;
    let report = verify_model(&params, a.corrupt)?;
    let text = serde_json::to_string_pretty(&report).expect("plain data serializes");
    emit(rec, "report", a.out.as_deref(), &text)?;
    if !report.oracle_checked {
        eprintln!("model too large for enumeration; checked self-consistency only");
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_bounds(a: &BoundsArgs, rec: &mut Recorder) -> Result<i32> {
    let report = bounds::report(a.n, a.alphabet, a.layers)?;
    let text = serde_json::to_string_pretty(&report).expect("plain data serializes");
    emit(rec, "bounds", a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

/// Re-run the argument vector of a manifest with `--out` redirected, then
/// compare the digest of every output against the recorded one.
fn cmd_replay(a: &ReplayArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|e| io_err(&a.manifest, e))?;
    let manifest = RunManifest::from_json(&text)?;
    let mut argv = vec!["narrow-dbm".to_string()];
    let mut args = manifest.argv.iter();
    let mut redirected = false;
    while let Some(arg) = args.next() {
        if arg == "--out" {
            args.next();
            argv.extend(["--out".to_string(), a.out.display().to_string()]);
            redirected = true;
        } else if arg.starts_with("--out=") {
            argv.push(format!("--out={}", a.out.display()));
            redirected = true;
        } else {
            argv.push(arg.clone());
        }
    }
    if !redirected {
        return Err(Error::domain(
            "the manifest records no --out, so there is nothing to compare",
        ));
    }
    let code = run(&argv);
    if code != manifest.exit_code {
        eprintln!("replay exit code {code} differs from recorded {}", manifest.exit_code);
        return Ok(EXIT_VERIFY);
    }
    let new_text = std::fs::read_to_string(with_suffix(&a.out, ".manifest.json"))
        .map_err(|e| io_err(&with_suffix(&a.out, ".manifest.json"), e))?;
    let replayed = RunManifest::from_json(&new_text)?;
    let mut same = replayed.outputs.len() == manifest.outputs.len();
    for (old, new) in manifest.outputs.iter().zip(&replayed.outputs) {
        let ok = old.role == new.role && old.sha256 == new.sha256;
        println!("{} {} {}", if ok { "match" } else { "DIFFER" }, old.role, new.path);
        same &= ok;
    }
    Ok(if same { EXIT_OK } else { EXIT_VERIFY })
}
