//! `ietlab` — batch front end for the interval-exchange toolkit.
//!
//! Every run is fully determined by its `RunConfig` (subcommand, inputs,
//! seed, precision, caps): identical configurations produce byte-identical
//! output files. Each report embeds the tool version and the complete
//! configuration. JSON is the canonical format; CSV is a lossy flattening
//! for plotting.
//!
//! Exit codes: `0` success, `2` invalid input, `3` numeric degradation,
//! `4` exact-tie halt before any usable output.

use std::fmt;
use std::io::Write as _;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::Serialize;

use ietlab::iet::{Iet, IetError};
use ietlab::lyap::{lyapunov_spectrum, LyapError, SpectrumEstimate};
use ietlab::perm::{PermError, Permutation};
use ietlab::renorm::{
    build_induced_cocycle, find_positive_window, rauzy_step, zorich_step, InducedCaps, RauzyStep,
    RauzyWord, RenormError,
};
use ietlab::scalar::{parse_lengths, parse_rational_token, Lengths, ParseLengthError, Scalar};
use ietlab::wmlab::{
    hausdorff_estimate, veech_scan_with, wstable_probe, HausdorffEstimate, InducedOrbitStream,
    LineJ, ScanReport, VeechConfig, WStableReport, WmError,
};
use ietlab::DEFAULT_PREC;

const TOOL: &str = "ietlab";
const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

/// Interval exchange transformations, Rauzy–Veech–Zorich renormalization,
/// Lyapunov spectra, and weak-mixing experiments.
///
/// The environment variable IETLAB_THREADS caps internal parallelism for
/// grid and sample loops (the current pipelines are sequential, so any cap
/// of at least 1 is honored; the cap is echoed into the run configuration).
#[derive(Parser)]
#[command(name = "ietlab", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List a Rauzy class: members, genus, singularity data, dim H(π).
    Class(ClassArgs),
    /// Estimate the Lyapunov spectrum of the Zorich cocycle on H(π).
    Lyapunov(LyapunovArgs),
    /// Veech-criterion scan of the family t·h along Rauzy induction.
    Scan(ScanArgs),
    /// Weak-stable exclusion probe: estimate μ(Γ^m_δ(J)) with certificates.
    Exclude(ExcludeArgs),
    /// Hausdorff-dimension covering bound for G ∩ W^s_δ along an orbit.
    Dim(DimArgs),
    /// Dump single Rauzy steps or Zorich-accelerated steps.
    Induct(InductArgs),
    /// Dump a forward orbit segment of an interval exchange map.
    Orbit(OrbitArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn as_str(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output format: canonical JSON, or a lossy CSV flattening.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report to PATH instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<String>,
}

#[derive(Args)]
struct ClassArgs {
    /// Permutation in image form, e.g. "4 3 2 1" or "4,3,2,1".
    #[arg(long)]
    perm: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct LyapunovArgs {
    /// Class representative in image form.
    #[arg(long)]
    perm: String,
    /// Zorich steps along the random orbit.
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Working precision in bits.
    #[arg(long, default_value_t = DEFAULT_PREC)]
    prec: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ScanArgs {
    /// Permutation in image form.
    #[arg(long)]
    perm: String,
    /// Lengths λ, comma- or space-separated; a token containing "/" forces
    /// exact-rational parsing (converted once to --prec bits for the scan).
    #[arg(long)]
    lambda: String,
    /// Integer height vector h, comma- or space-separated.
    #[arg(long)]
    h: String,
    #[arg(long, default_value_t = 0.0)]
    t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    /// Number of grid points (endpoints included).
    #[arg(long, default_value_t = 101)]
    t_steps: usize,
    /// Rauzy window word over {1,2}, or "auto" for the shortest positive window.
    #[arg(long, default_value = "auto")]
    window: String,
    /// Stop after this many window visits.
    #[arg(long, default_value_t = 30)]
    visits: usize,
    /// Hard cap on Rauzy steps; 0 selects the precision-safe automatic cap.
    #[arg(long, default_value_t = 0)]
    steps: usize,
    /// Working precision in bits for the torus vectors.
    #[arg(long, default_value_t = 512)]
    prec: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ExcludeArgs {
    /// Permutation in image form.
    #[arg(long, default_value = "4 3 2 1")]
    perm: String,
    /// Rauzy window word over {1,2}, or "auto" for the shortest positive window.
    #[arg(long, default_value = "auto")]
    window: String,
    /// Exclusion radius δ.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Number of blocks m: the probe reports μ̂(Γ^k_δ(J)) for k = 1..m.
    #[arg(long, default_value_t = 8)]
    blocks: usize,
    /// Return words composed per block.
    #[arg(long, default_value_t = 2)]
    block_n: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Line direction in H(π) lattice coordinates (rationals; default: all ones).
    #[arg(long)]
    j_direction: Option<String>,
    /// Line offset (rationals; default: 3/100·(e₁ − e₂)).
    #[arg(long)]
    j_offset: Option<String>,
    /// Maximum return time in Zorich steps for branch enumeration.
    #[arg(long, default_value_t = 30)]
    zorich_cap: usize,
    /// Maximum return-word length in Rauzy letters.
    #[arg(long, default_value_t = 22)]
    rauzy_cap: usize,
    /// Maximum number of enumeration tree nodes.
    #[arg(long, default_value_t = 200_000)]
    node_budget: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DimArgs {
    /// Permutation in image form.
    #[arg(long, default_value = "4 3 2 1")]
    perm: String,
    /// Rauzy window word over {1,2}, or "auto" for the shortest positive window.
    #[arg(long, default_value = "auto")]
    window: String,
    /// Covering radius δ.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Orbit length (horizon) for the Birkhoff average.
    #[arg(long, default_value_t = 4000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Zorich steps for the Lyapunov normalizer λ̂.
    #[arg(long, default_value_t = 20_000)]
    lyap_steps: usize,
    /// Working precision in bits for the Lyapunov run.
    #[arg(long, default_value_t = DEFAULT_PREC)]
    prec: u32,
    /// Line direction in H(π) lattice coordinates (rationals; default: all ones).
    #[arg(long)]
    j_direction: Option<String>,
    /// Line offset (rationals; default: 3/100·(e₁ − e₂)).
    #[arg(long)]
    j_offset: Option<String>,
    /// Maximum return time in Zorich steps for branch enumeration.
    #[arg(long, default_value_t = 30)]
    zorich_cap: usize,
    /// Maximum return-word length in Rauzy letters.
    #[arg(long, default_value_t = 22)]
    rauzy_cap: usize,
    /// Maximum number of enumeration tree nodes.
    #[arg(long, default_value_t = 200_000)]
    node_budget: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct InductArgs {
    /// Permutation in image form.
    #[arg(long)]
    perm: String,
    /// Lengths λ; a token containing "/" forces exact-rational mode.
    #[arg(long)]
    lambda: String,
    /// Number of steps to dump.
    #[arg(long, default_value_t = 1)]
    steps: usize,
    /// Dump Zorich-accelerated steps instead of single Rauzy steps.
    #[arg(long)]
    zorich: bool,
    /// Working precision in bits (float mode).
    #[arg(long, default_value_t = DEFAULT_PREC)]
    prec: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OrbitArgs {
    /// Permutation in image form.
    #[arg(long)]
    perm: String,
    /// Lengths λ; a token containing "/" forces exact-rational mode.
    #[arg(long)]
    lambda: String,
    /// Start point (defaults to the midpoint of the first interval); a "/"
    /// in the token forces exact-rational mode for the whole run.
    #[arg(long)]
    x0: Option<String>,
    /// Number of orbit points to record.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Working precision in bits (float mode).
    #[arg(long, default_value_t = DEFAULT_PREC)]
    prec: u32,
    #[command(flatten)]
    out: OutArgs,
}

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Exit 2: the input cannot be run.
    Invalid(String),
    /// Exit 3: numeric degradation (precision loss, divergence guard).
    Numeric(String),
    /// Exit 4: an exact Rauzy tie halted before any usable output.
    TieHalt(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::TieHalt(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numeric(m) | CliError::TieHalt(m) => f.write_str(m),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

impl From<PermError> for CliError {
    fn from(e: PermError) -> CliError {
        CliError::Invalid(e.to_string())
    }
}

impl From<IetError> for CliError {
    fn from(e: IetError) -> CliError {
        CliError::Invalid(e.to_string())
    }
}

impl From<ParseLengthError> for CliError {
    fn from(e: ParseLengthError) -> CliError {
        CliError::Invalid(e.to_string())
    }
}

impl From<RenormError> for CliError {
    fn from(e: RenormError) -> CliError {
        match e {
            RenormError::HaltOnTie => CliError::TieHalt(e.to_string()),
            RenormError::DivergenceGuard { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<LyapError> for CliError {
    fn from(e: LyapError) -> CliError {
        match e {
            LyapError::PrecisionLoss { .. } => CliError::Numeric(e.to_string()),
            LyapError::HaltOnTie | LyapError::TooManyTies { .. } => {
                CliError::TieHalt(e.to_string())
            }
            LyapError::Renorm(r) => CliError::from(r),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<WmError> for CliError {
    fn from(e: WmError) -> CliError {
        match e {
            WmError::Renorm(r) => CliError::from(r),
            WmError::Lyap(l) => CliError::from(l),
            WmError::Iet(i) => CliError::from(i),
            WmError::Perm(p) => CliError::from(p),
            WmError::InvalidParameter { .. } => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Invalid(format!("i/o error: {e}"))
    }
}

// ---------------------------------------------------------------------------
// Run configuration and output envelope
// ---------------------------------------------------------------------------

/// Complete, replayable record of one invocation; embedded in every output.
#[derive(Default, Serialize)]
#[serde(rename_all = "camelCase")]
struct RunConfig {
    subcommand: &'static str,
    /// Whether the run used exact-rational arithmetic.
    exact: bool,
    /// Worker cap from IETLAB_THREADS (≥ 1; pipelines are sequential, so
    /// every cap is honored).
    threads: usize,
    format: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perm: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    visits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prec: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lyap_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zorich_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rauzy_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    node_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_direction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_offset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zorich: Option<bool>,
}

impl RunConfig {
    fn new(subcommand: &'static str, exact: bool, threads: usize, out: &OutArgs) -> RunConfig {
        RunConfig {
            subcommand,
            exact,
            threads,
            format: out.format.as_str(),
            out: out.out.clone(),
            ..RunConfig::default()
        }
    }
}

#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Envelope<'a, T: Serialize> {
    meta: Meta,
    config: &'a RunConfig,
    result: &'a T,
}

/// CSV flattening of one report: a header and homogeneous rows.
struct CsvTable {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn render_json<T: Serialize>(config: &RunConfig, result: &T) -> Result<Vec<u8>, CliError> {
    let envelope =
        Envelope { meta: Meta { tool: TOOL, version: VERSION }, config, result };
    let mut s = serde_json::to_string_pretty(&envelope)
        .map_err(|e| invalid(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn render_csv(config: &RunConfig, table: &CsvTable) -> Result<Vec<u8>, CliError> {
    let cfg = serde_json::to_string(config)
        .map_err(|e| invalid(format!("serialization failed: {e}")))?;
    let mut out = format!("# {TOOL} {VERSION}\n# config {cfg}\n").into_bytes();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).map_err(|e| invalid(format!("csv error: {e}")))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| invalid(format!("csv error: {e}")))?;
    }
    let body = w.into_inner().map_err(|e| invalid(format!("csv error: {e}")))?;
    out.extend_from_slice(&body);
    Ok(out)
}

/// Render per `--format` and write through the single output writer.
fn emit<T: Serialize>(
    config: &RunConfig,
    result: &T,
    table: &CsvTable,
    out: &OutArgs,
) -> Result<(), CliError> {
    let bytes = match out.format {
        Format::Json => render_json(config, result)?,
        Format::Csv => render_csv(config, table)?,
    };
    match &out.out {
        Some(path) => std::fs::write(path, &bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Parsing helpers
// ---------------------------------------------------------------------------

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("IETLAB_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| invalid(format!("IETLAB_THREADS={s:?} is not a positive integer"))),
        Err(_) => Ok(1),
    }
}

fn parse_perm(s: &str) -> Result<Permutation, CliError> {
    let p: Permutation = s.parse()?;
    if !p.is_irreducible() {
        return Err(invalid(format!(
            "permutation {s:?} is reducible: a prefix {{1..k}} with k < d is invariant"
        )));
    }
    Ok(p)
}

fn split_tokens(s: &str) -> Vec<&str> {
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect()
}

fn parse_i64_vec(s: &str, what: &str) -> Result<Vec<i64>, CliError> {
    let toks = split_tokens(s);
    if toks.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    toks.iter()
        .map(|t| {
            t.parse::<i64>()
                .map_err(|e| invalid(format!("bad integer {t:?} in {what}: {e}")))
        })
        .collect()
}

fn parse_rat_vec(s: &str, what: &str) -> Result<Vec<BigRational>, CliError> {
    let toks = split_tokens(s);
    if toks.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    toks.iter()
        .map(|t| {
            parse_rational_token(t)
                .map_err(|e| invalid(format!("bad rational {t:?} in {what}: {e}")))
        })
        .collect()
}

fn parse_exact_lengths(s: &str) -> Result<Vec<BigRational>, CliError> {
    let v = parse_rat_vec(s, "lambda")?;
    for (i, x) in v.iter().enumerate() {
        if !x.is_positive() {
            return Err(invalid(format!("length lambda_{} must be strictly positive", i + 1)));
        }
    }
    Ok(v)
}

fn big_rational_to_float(r: &BigRational, prec: u32) -> rug::Float {
    let q = rug::Rational::from_str(&r.to_string()).expect("rational string roundtrip");
    rug::Float::with_val(prec, &q)
}

fn linspace(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n == 0 {
        return Err(invalid("t-steps must be at least 1"));
    }
    if !t_min.is_finite() || !t_max.is_finite() || t_max < t_min {
        return Err(invalid(format!("bad t range [{t_min}, {t_max}]")));
    }
    if n == 1 {
        return Ok(vec![t_min]);
    }
    Ok((0..n).map(|i| t_min + (t_max - t_min) * i as f64 / (n - 1) as f64).collect())
}

fn resolve_window(spec: &str, perm: &Permutation) -> Result<RauzyWord, CliError> {
    if spec == "auto" {
        find_positive_window(perm, 16)
            .ok_or_else(|| invalid("no positive window of length <= 16 from this permutation"))
    } else {
        Ok(spec.parse::<RauzyWord>()?)
    }
}

/// Build the probed line in the cocycle fiber `R^p`: explicit flags, or the
/// default `direction = (1,…,1)`, `offset = 3/100·(e₁ − e₂)` — a line
/// parallel to the positive cone at distance `3√2/100` from the origin, so
/// it lies inside `B_δ(0)` for the default δ = 0.05 but near its boundary.
fn build_line(p: usize, dir_s: Option<&str>, off_s: Option<&str>) -> Result<LineJ, CliError> {
    let direction = match dir_s {
        Some(s) => parse_rat_vec(s, "j-direction")?,
        None => vec![BigRational::one(); p],
    };
    let offset = match off_s {
        Some(s) => parse_rat_vec(s, "j-offset")?,
        None => {
            let mut v = vec![BigRational::zero(); p];
            let c = BigRational::new(BigInt::from(3), BigInt::from(100));
            if p >= 2 {
                v[0] = c.clone();
                v[1] = -c;
            } else {
                v[0] = c;
            }
            v
        }
    };
    Ok(LineJ::new(direction, offset)?)
}

fn f64_str(x: f64) -> String {
    format!("{x}")
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// class
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClassMember {
    index: usize,
    /// One-based image vector (π(1), …, π(d)).
    perm: Vec<usize>,
    standard: bool,
    /// Index of the type-1 image inside the class listing.
    type1: usize,
    /// Index of the type-2 image inside the class listing.
    type2: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ClassResult {
    d: usize,
    size: usize,
    genus: usize,
    num_singularities: usize,
    /// ν(S) per singularity of the representative (angles 2πν).
    nu: Vec<usize>,
    dim_h: usize,
    standard_count: usize,
    members: Vec<ClassMember>,
}

fn cmd_class(a: ClassArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    let class = perm.rauzy_class()?;
    let sing = perm.singularity_data()?;
    let h = perm.h_subspace()?;
    let members: Vec<ClassMember> = class
        .members
        .iter()
        .enumerate()
        .map(|(index, p)| ClassMember {
            index,
            perm: p.one_based(),
            standard: p.is_standard(),
            type1: class.type1[index],
            type2: class.type2[index],
        })
        .collect();
    let result = ClassResult {
        d: perm.d(),
        size: class.len(),
        genus: sing.genus,
        num_singularities: sing.n_orbits,
        nu: sing.nu.clone(),
        dim_h: h.dim,
        standard_count: members.iter().filter(|m| m.standard).count(),
        members,
    };
    let table = CsvTable {
        header: vec!["index", "perm", "standard", "type1", "type2"],
        rows: result
            .members
            .iter()
            .map(|m| {
                vec![
                    m.index.to_string(),
                    join_usize(&m.perm),
                    m.standard.to_string(),
                    m.type1.to_string(),
                    m.type2.to_string(),
                ]
            })
            .collect(),
    };
    let mut config = RunConfig::new("class", true, threads, &a.out);
    config.perm = Some(a.perm.clone());
    emit(&config, &result, &table, &a.out)
}

// ---------------------------------------------------------------------------
// lyapunov
// ---------------------------------------------------------------------------

fn spectrum_table(est: &SpectrumEstimate) -> CsvTable {
    CsvTable {
        header: vec!["index", "exponent", "normalized", "stderr"],
        rows: (0..est.exponents.len())
            .map(|i| {
                vec![
                    (i + 1).to_string(),
                    f64_str(est.exponents[i]),
                    f64_str(est.normalized[i]),
                    f64_str(est.stderr[i]),
                ]
            })
            .collect(),
    }
}

fn cmd_lyapunov(a: LyapunovArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    let est = lyapunov_spectrum(&perm, a.steps, a.seed, a.prec)?;
    let table = spectrum_table(&est);
    let mut config = RunConfig::new("lyapunov", false, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.steps = Some(a.steps);
    config.seed = Some(a.seed);
    config.prec = Some(a.prec);
    emit(&config, &est, &table, &a.out)
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

fn cmd_scan(a: ScanArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    let exact = a.lambda.contains('/');
    let lam: Vec<rug::Float> = match parse_lengths(&a.lambda, a.prec)? {
        Lengths::Exact(rs) => rs.iter().map(|r| big_rational_to_float(r, a.prec)).collect(),
        Lengths::Float(fs) => fs,
    };
    let h = parse_i64_vec(&a.h, "h")?;
    let t_grid = linspace(a.t_min, a.t_max, a.t_steps)?;
    let word = resolve_window(&a.window, &perm)?;
    let vc = VeechConfig { max_visits: a.visits, precision: a.prec, max_rauzy_steps: a.steps };
    let report: ScanReport = veech_scan_with(&lam, &perm, &h, &t_grid, &word, &vc)?;
    if report.halted && report.visit_steps.is_empty() {
        return Err(CliError::TieHalt(
            "exact Rauzy tie before the first window visit; no distances recorded".into(),
        ));
    }
    if report.halted {
        eprintln!(
            "warning: exact Rauzy tie halted the orbit after {} visits",
            report.visit_steps.len()
        );
    } else if report.truncated {
        eprintln!(
            "warning: scan stopped at the step cap ({} Rauzy steps) after {} visits",
            report.rauzy_steps,
            report.visit_steps.len()
        );
    }
    let mut rows = Vec::new();
    for (i, &t) in report.t_grid.iter().enumerate() {
        for (k, &dist) in report.series[i].iter().enumerate() {
            rows.push(vec![
                f64_str(t),
                k.to_string(),
                report.visit_steps[k].to_string(),
                f64_str(dist),
            ]);
        }
    }
    let table = CsvTable { header: vec!["t", "visit", "step", "distance"], rows };
    let mut config = RunConfig::new("scan", exact, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.lambda = Some(a.lambda.clone());
    config.h = Some(a.h.clone());
    config.t_min = Some(a.t_min);
    config.t_max = Some(a.t_max);
    config.t_steps = Some(a.t_steps);
    config.window = Some(a.window.clone());
    config.visits = Some(a.visits);
    config.steps = Some(a.steps);
    config.prec = Some(a.prec);
    emit(&config, &report, &table, &a.out)
}

// ---------------------------------------------------------------------------
// exclude
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExcludeResult {
    /// Resolved window word.
    window: String,
    /// True when branch enumeration was cut off by the caps.
    truncated: bool,
    line: LineJ,
    report: WStableReport,
}

fn cmd_exclude(a: ExcludeArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    let word = resolve_window(&a.window, &perm)?;
    let caps = InducedCaps {
        zorich_cap: a.zorich_cap,
        rauzy_cap: a.rauzy_cap,
        node_budget: a.node_budget,
    };
    let ic = build_induced_cocycle(&word, &perm, caps)?;
    if ic.branches.is_empty() {
        return Err(invalid("no return branches enumerated within the caps"));
    }
    if ic.truncated {
        eprintln!("warning: branch enumeration truncated by the caps (enumerated mass {:.3e})",
            ic.coverage.to_f64().unwrap_or(0.0));
    }
    let p = ic.branches[0].restricted.rows();
    let line = build_line(p, a.j_direction.as_deref(), a.j_offset.as_deref())?;
    let report: WStableReport =
        wstable_probe(&ic, &line, a.delta, a.block_n, a.blocks, a.samples, a.seed)?;
    let result = ExcludeResult { window: word.to_string(), truncated: ic.truncated, line, report };
    let table = CsvTable {
        header: vec!["block", "estimate"],
        rows: result
            .report
            .estimates
            .iter()
            .enumerate()
            .map(|(k, &mu)| vec![(k + 1).to_string(), f64_str(mu)])
            .collect(),
    };
    let mut config = RunConfig::new("exclude", true, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.window = Some(a.window.clone());
    config.delta = Some(a.delta);
    config.blocks = Some(a.blocks);
    config.block_n = Some(a.block_n);
    config.samples = Some(a.samples);
    config.seed = Some(a.seed);
    config.zorich_cap = Some(a.zorich_cap);
    config.rauzy_cap = Some(a.rauzy_cap);
    config.node_budget = Some(a.node_budget);
    config.j_direction = a.j_direction.clone();
    config.j_offset = a.j_offset.clone();
    emit(&config, &result, &table, &a.out)
}

// ---------------------------------------------------------------------------
// dim
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DimResult {
    /// Resolved window word.
    window: String,
    /// True when branch enumeration was cut off by the caps.
    truncated: bool,
    line: LineJ,
    estimate: HausdorffEstimate,
    /// Spectrum used for the normalizer λ̂.
    spectrum: SpectrumEstimate,
}

fn cmd_dim(a: DimArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    let word = resolve_window(&a.window, &perm)?;
    let caps = InducedCaps {
        zorich_cap: a.zorich_cap,
        rauzy_cap: a.rauzy_cap,
        node_budget: a.node_budget,
    };
    let ic = build_induced_cocycle(&word, &perm, caps)?;
    if ic.branches.is_empty() {
        return Err(invalid("no return branches enumerated within the caps"));
    }
    if ic.truncated {
        eprintln!("warning: branch enumeration truncated by the caps (enumerated mass {:.3e})",
            ic.coverage.to_f64().unwrap_or(0.0));
    }
    let spectrum = lyapunov_spectrum(&perm, a.lyap_steps, a.seed, a.prec)?;
    let p = ic.branches[0].restricted.rows();
    let line = build_line(p, a.j_direction.as_deref(), a.j_offset.as_deref())?;
    let mut stream = InducedOrbitStream::new(&ic, a.seed)?;
    let estimate = hausdorff_estimate(&mut stream, &line, a.delta, a.steps, &spectrum)?;
    let result = DimResult {
        window: word.to_string(),
        truncated: ic.truncated,
        line,
        estimate,
        spectrum,
    };
    let table = CsvTable {
        header: vec!["delta", "betaDelta", "dimBound", "lambdaHat", "stepsUsed", "p"],
        rows: vec![vec![
            f64_str(result.estimate.delta),
            f64_str(result.estimate.beta_delta),
            f64_str(result.estimate.dim_bound),
            f64_str(result.estimate.lambda_hat),
            result.estimate.steps_used.to_string(),
            result.estimate.p.to_string(),
        ]],
    };
    let mut config = RunConfig::new("dim", true, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.window = Some(a.window.clone());
    config.delta = Some(a.delta);
    config.steps = Some(a.steps);
    config.seed = Some(a.seed);
    config.lyap_steps = Some(a.lyap_steps);
    config.prec = Some(a.prec);
    config.zorich_cap = Some(a.zorich_cap);
    config.rauzy_cap = Some(a.rauzy_cap);
    config.node_budget = Some(a.node_budget);
    config.j_direction = a.j_direction.clone();
    config.j_offset = a.j_offset.clone();
    emit(&config, &result, &table, &a.out)
}

// ---------------------------------------------------------------------------
// induct
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StepRecord {
    index: usize,
    /// Step type letter: "1" or "2".
    kind: String,
    /// Zorich run length (accelerated mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    run_length: Option<usize>,
    /// Visitation matrix rows (decimal strings; entries can exceed i64).
    matrix: Vec<Vec<String>>,
    lambda_after: Vec<String>,
    perm_after: Vec<usize>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct InductResult {
    mode: &'static str,
    exact: bool,
    /// True when an exact tie halted the dump early (recorded steps kept).
    halted: bool,
    steps: Vec<StepRecord>,
}

fn matrix_strings(m: &ietlab::linalg::IMat) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| x.to_string()).collect())
        .collect()
}

fn run_induct<S: Scalar>(
    mut lam: Vec<S>,
    mut perm: Permutation,
    steps: usize,
    zorich: bool,
) -> Result<(Vec<StepRecord>, bool), CliError> {
    let mut recs: Vec<StepRecord> = Vec::new();
    for index in 0..steps {
        let outcome: Result<(RauzyStep<S>, Option<usize>), RenormError> = if zorich {
            zorich_step(&lam, &perm).map(|(s, n)| (s, Some(n)))
        } else {
            rauzy_step(&lam, &perm).map(|s| (s, None))
        };
        match outcome {
            Ok((step, run_length)) => {
                recs.push(StepRecord {
                    index,
                    kind: step.kind.letter().to_string(),
                    run_length,
                    matrix: matrix_strings(&step.matrix),
                    lambda_after: step.after.0.iter().map(|x| x.to_string()).collect(),
                    perm_after: step.after.1.one_based(),
                });
                lam = step.after.0;
                perm = step.after.1;
            }
            Err(RenormError::HaltOnTie) => {
                if recs.is_empty() {
                    return Err(CliError::TieHalt(
                        "exact tie at the first induction step; nothing to dump".into(),
                    ));
                }
                return Ok((recs, true));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((recs, false))
}

fn induct_table(result: &InductResult) -> CsvTable {
    CsvTable {
        header: vec!["index", "kind", "runLength", "permAfter", "lambdaAfter"],
        rows: result
            .steps
            .iter()
            .map(|s| {
                vec![
                    s.index.to_string(),
                    s.kind.clone(),
                    s.run_length.map_or(String::new(), |n| n.to_string()),
                    join_usize(&s.perm_after),
                    s.lambda_after.join(" "),
                ]
            })
            .collect(),
    }
}

fn cmd_induct(a: InductArgs, threads: usize) -> Result<(), CliError> {
    let perm = parse_perm(&a.perm)?;
    if a.steps == 0 {
        return Err(invalid("steps must be at least 1"));
    }
    let (records, halted, exact) = match parse_lengths(&a.lambda, a.prec)? {
        Lengths::Exact(rs) => {
            if rs.len() != perm.d() {
                return Err(invalid(format!(
                    "lambda has {} entries, permutation needs {}",
                    rs.len(),
                    perm.d()
                )));
            }
            let (r, h) = run_induct(rs, perm.clone(), a.steps, a.zorich)?;
            (r, h, true)
        }
        Lengths::Float(fs) => {
            if fs.len() != perm.d() {
                return Err(invalid(format!(
                    "lambda has {} entries, permutation needs {}",
                    fs.len(),
                    perm.d()
                )));
            }
            let (r, h) = run_induct(fs, perm.clone(), a.steps, a.zorich)?;
            (r, h, false)
        }
    };
    let result = InductResult {
        mode: if a.zorich { "zorich" } else { "single" },
        exact,
        halted,
        steps: records,
    };
    if result.halted {
        eprintln!(
            "warning: exact tie halted the dump after {} of {} steps",
            result.steps.len(),
            a.steps
        );
    }
    let table = induct_table(&result);
    let mut config = RunConfig::new("induct", exact, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.lambda = Some(a.lambda.clone());
    config.steps = Some(a.steps);
    config.prec = Some(a.prec);
    config.zorich = Some(a.zorich);
    emit(&config, &result, &table, &a.out)
}

// ---------------------------------------------------------------------------
// orbit
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OrbitResult {
    exact: bool,
    /// Total interval length Σλ.
    total: String,
    /// Start point actually used.
    x0: String,
    /// Orbit points x, f(x), …, f^{n−1}(x).
    points: Vec<String>,
    /// One-based interval symbols of each point.
    itinerary: Vec<usize>,
}

fn orbit_exact(
    lam: Vec<BigRational>,
    perm: Permutation,
    x0_s: Option<&str>,
    steps: usize,
) -> Result<OrbitResult, CliError> {
    let iet = Iet::new(lam, perm)?;
    let x0: BigRational = match x0_s {
        Some(s) => parse_rational_token(s)
            .map_err(|e| invalid(format!("bad rational {s:?} in x0: {e}")))?,
        None => &iet.lambda()[0] / BigRational::from_integer(BigInt::from(2)),
    };
    let (points, itinerary) = iet.orbit(&x0, steps)?;
    Ok(OrbitResult {
        exact: true,
        total: iet.total().to_string(),
        x0: x0.to_string(),
        points: points.iter().map(|x| x.to_string()).collect(),
        itinerary,
    })
}

fn orbit_float(
    lam: Vec<rug::Float>,
    perm: Permutation,
    x0_s: Option<&str>,
    steps: usize,
    prec: u32,
) -> Result<OrbitResult, CliError> {
    let iet = Iet::new(lam, perm)?;
    let x0: rug::Float = match x0_s {
        Some(s) => {
            let parsed = rug::Float::parse(s)
                .map_err(|e| invalid(format!("bad number {s:?} in x0: {e}")))?;
            let v = rug::Float::with_val(prec, parsed);
            if !v.is_finite() {
                return Err(invalid(format!("x0 = {s:?} is not finite")));
            }
            v
        }
        None => {
            let mut half = iet.lambda()[0].clone();
            half /= 2u32;
            half
        }
    };
    let (points, itinerary) = iet.orbit(&x0, steps)?;
    Ok(OrbitResult {
        exact: false,
        total: iet.total().to_string(),
        x0: x0.to_string(),
        points: points.iter().map(|x| x.to_string()).collect(),
        itinerary,
    })
}

fn cmd_orbit(a: OrbitArgs, threads: usize) -> Result<(), CliError> {
    let perm: Permutation = a.perm.parse()?;
    let exact = a.lambda.contains('/') || a.x0.as_deref().is_some_and(|s| s.contains('/'));
    let result = if exact {
        let lam = parse_exact_lengths(&a.lambda)?;
        if lam.len() != perm.d() {
            return Err(invalid(format!(
                "lambda has {} entries, permutation needs {}",
                lam.len(),
                perm.d()
            )));
        }
        orbit_exact(lam, perm, a.x0.as_deref(), a.steps)?
    } else {
        let lam = match parse_lengths(&a.lambda, a.prec)? {
            Lengths::Float(fs) => fs,
            Lengths::Exact(rs) => rs.iter().map(|r| big_rational_to_float(r, a.prec)).collect(),
        };
        if lam.len() != perm.d() {
            return Err(invalid(format!(
                "lambda has {} entries, permutation needs {}",
                lam.len(),
                perm.d()
            )));
        }
        orbit_float(lam, perm, a.x0.as_deref(), a.steps, a.prec)?
    };
    let table = CsvTable {
        header: vec!["k", "point", "symbol"],
        rows: result
            .points
            .iter()
            .zip(&result.itinerary)
            .enumerate()
            .map(|(k, (x, sym))| vec![k.to_string(), x.clone(), sym.to_string()])
            .collect(),
    };
    let mut config = RunConfig::new("orbit", result.exact, threads, &a.out);
    config.perm = Some(a.perm.clone());
    config.lambda = Some(a.lambda.clone());
    config.x0 = a.x0.clone();
    config.steps = Some(a.steps);
    config.prec = Some(a.prec);
    emit(&config, &result, &table, &a.out)
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    match cli.command {
        Command::Class(a) => cmd_class(a, threads),
        Command::Lyapunov(a) => cmd_lyapunov(a, threads),
        Command::Scan(a) => cmd_scan(a, threads),
        Command::Exclude(a) => cmd_exclude(a, threads),
        Command::Dim(a) => cmd_dim(a, threads),
        Command::Induct(a) => cmd_induct(a, threads),
        Command::Orbit(a) => cmd_orbit(a, threads),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
