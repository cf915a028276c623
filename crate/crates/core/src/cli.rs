//! Batch command-line front end.
//!
//! Every subcommand prints one JSON document with `schema`, `result` and
//! `manifest` sections; `--pretty` prints a plain-text table instead.
//! Exit statuses: 0 success, 2 no implied vol, 3 missing data, 4 correlation
//! out of range, 5 calendar arbitrage, 1 anything else.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::correlation::{
    build_matrix, implied_corr, term_corr, CorrOptions, CorrQuery, Horizon, ImpliedCorrelation, PsdStatus,
};
use crate::error::{Error, Result};
use crate::market_data::{check_spot_triangles, load_snapshot_file, FxPair, LoadOptions, MarketSnapshot};
use crate::montecarlo::{price, PayoffSpec, SimulationConfig};
use crate::term_structure::{bootstrap_piecewise_vol, total_variance};
use crate::vanilla::{implied_vol, OptionKind, VanillaSpec};

/// Environment variable naming a default snapshot file.
pub const SNAPSHOT_ENV: &str = "FXCORR_SNAPSHOT";

#[derive(Debug, Parser)]
#[command(name = "fxcorr", version, about = "Implied FX correlations and multi-FX Monte Carlo pricing")]
pub struct Cli {
    /// Market snapshot file (defaults to $FXCORR_SNAPSHOT).
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,

    /// Human-readable table instead of a JSON document.
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Invert Garman–Kohlhagen for the implied vol of a vanilla price.
    ImpliedVol(ImpliedVolArgs),
    /// Implied correlation between two pairs.
    Corr(CorrArgs),
    /// Bucketed implied correlation matrix for a list of pairs.
    CorrMatrix(MatrixArgs),
    /// Monte Carlo price of a payoff file.
    Price(PriceArgs),
    /// Piecewise-constant instantaneous vols of one pair.
    Bootstrap(BootstrapArgs),
    /// Validate a snapshot, including spot triangles.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ImpliedVolArgs {
    /// Pair as DENOMINATING/FOREIGN, e.g. EUR/USD.
    #[arg(long)]
    pub pair: String,
    #[arg(long)]
    pub strike: f64,
    #[arg(long)]
    pub maturity: f64,
    #[arg(long)]
    pub price: f64,
    #[arg(long, default_value = "call")]
    pub kind: String,
    /// Emit the full JSON record instead of the bare vol.
    #[arg(long)]
    pub record: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrArgs {
    #[arg(long)]
    pub pair_a: String,
    #[arg(long)]
    pub pair_b: String,
    /// Single horizon T for the correlation over (0, T].
    #[arg(long, conflicts_with = "buckets")]
    pub horizon: Option<f64>,
    /// Comma-separated bucket edges for term correlations.
    #[arg(long, value_delimiter = ',')]
    pub buckets: Option<Vec<f64>>,
    /// Clamp out-of-range correlations to ±1 with a warning.
    #[arg(long)]
    pub clamp: bool,
    /// Include the provenance record (formula and input vols).
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixArgs {
    /// Comma-separated pairs.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pairs: Vec<String>,
    /// Comma-separated bucket edges.
    #[arg(long, value_delimiter = ',', required = true)]
    pub buckets: Vec<f64>,
    /// Repair indefinite bucket matrices.
    #[arg(long)]
    pub repair: bool,
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PriceArgs {
    /// Payoff specification file.
    #[arg(long)]
    pub payoff: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Extra comma-separated simulation times.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub antithetic: bool,
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub clamp: bool,
    #[arg(long)]
    pub repair: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub pair: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Relative tolerance for spot triangles.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    subcommand: &'static str,
    input: Option<String>,
    config: Value,
    tool_version: &'static str,
    timestamp: u64,
}

#[derive(Debug, Serialize)]
struct Document<R: Serialize> {
    schema: String,
    result: R,
    manifest: Manifest,
}

/// What a CLI invocation produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Formats with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..15).contains(&magnitude) {
        let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = digits - 1)
    }
}

fn parse_pair(s: &str) -> Result<FxPair> {
    s.parse()
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Context {
    snapshot_path: Option<PathBuf>,
    pretty: bool,
}

impl Context {
    fn snapshot(&self) -> Result<MarketSnapshot> {
        let path = self
            .snapshot_path
            .as_ref()
            .ok_or_else(|| Error::MissingData(format!("no snapshot given (use --snapshot or ${SNAPSHOT_ENV})")))?;
        load_snapshot_file(path, LoadOptions::default())
    }

    fn emit<R: Serialize>(&self, subcommand: &'static str, config: &impl Serialize, result: R) -> String {
        let doc = Document {
            schema: format!("fxcorr.{subcommand}/v1"),
            result,
            manifest: Manifest {
                subcommand,
                input: self.snapshot_path.as_ref().map(|p| p.display().to_string()),
                config: serde_json::to_value(config).expect("config serializes"),
                tool_version: env!("CARGO_PKG_VERSION"),
                timestamp: unix_time(),
            },
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("document serializes");
        out.push('\n');
        out
    }
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let exit_code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if e.use_stderr() { (String::new(), text) } else { (text, String::new()) };
            return Outcome { exit_code, stdout, stderr };
        }
    };
    let ctx = Context {
        snapshot_path: cli.snapshot.clone().or_else(|| std::env::var_os(SNAPSHOT_ENV).map(PathBuf::from)),
        pretty: cli.pretty,
    };
    let result = match &cli.command {
        Command::ImpliedVol(a) => cmd_implied_vol(&ctx, a),
        Command::Corr(a) => cmd_corr(&ctx, a),
        Command::CorrMatrix(a) => cmd_matrix(&ctx, a),
        Command::Price(a) => cmd_price(&ctx, a),
        Command::Bootstrap(a) => cmd_bootstrap(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
    };
    match result {
        Ok((exit_code, stdout)) => Outcome { exit_code, stdout, stderr: String::new() },
        Err(e) => Outcome { exit_code: e.class() as i32, stdout: String::new(), stderr: format!("{e}\n") },
    }
}

type CmdResult = Result<(i32, String)>;

fn cmd_implied_vol(ctx: &Context, a: &ImpliedVolArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let pair = parse_pair(&a.pair)?;
    let kind: OptionKind = a.kind.parse()?;
    let spec = VanillaSpec::new(pair, a.strike, a.maturity, kind)?;
    let spot = snap.spot(pair).ok_or_else(|| Error::MissingData(format!("no spot for {pair}")))?;
    let rate = |c| {
        snap.rate_curve(c)
            .map(|curve| curve.average_rate(a.maturity))
            .ok_or_else(|| Error::MissingData(format!("no rate curve for {c}")))
    };
    let (r_dom, r_for) = (rate(pair.denominating)?, rate(pair.foreign)?);
    let vol = implied_vol(&spec, a.price, spot, r_dom, r_for)?;
    if !a.record {
        return Ok((0, format!("{}\n", format_significant(vol, 10))));
    }
    if ctx.pretty {
        return Ok((0, format!("pair {pair}  spot {spot}  implied vol {}\n", format_significant(vol, 10))));
    }
    let result = json!({
        "pair": pair,
        "strike": a.strike,
        "maturity": a.maturity,
        "kind": kind,
        "price": a.price,
        "spot": spot,
        "domestic_rate": r_dom,
        "foreign_rate": r_for,
        "implied_vol": vol,
    });
    Ok((0, ctx.emit("implied-vol", a, result)))
}

fn corr_row(c: &ImpliedCorrelation, audit: bool) -> Value {
    let mut row = json!({
        "horizon": c.provenance.horizon,
        "value": c.value,
        "formula": c.provenance.formula,
        "degenerate": c.degenerate,
        "clamped": c.clamped,
    });
    if c.clamped {
        row["warning"] = json!(format!("raw correlation {} clamped to {}", c.provenance.raw, c.value));
    }
    if c.provenance.inputs.iter().any(|i| i.extrapolated) {
        row["extrapolated"] = json!(true);
    }
    if audit {
        row["provenance"] = serde_json::to_value(&c.provenance).expect("provenance serializes");
    }
    row
}

fn cmd_corr(ctx: &Context, a: &CorrArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let pair_a = parse_pair(&a.pair_a)?;
    let pair_b = parse_pair(&a.pair_b)?;
    let options = CorrOptions { clamp: a.clamp, repair: false };
    let rows: Vec<ImpliedCorrelation> = match (&a.buckets, a.horizon) {
        (Some(edges), _) => term_corr(pair_a, pair_b, &snap, edges, options)?.buckets,
        (None, Some(t)) => vec![implied_corr(&CorrQuery { pair_a, pair_b, horizon: Horizon::Total(t) }, &snap, options)?],
        (None, None) => return Err(Error::Domain("give --horizon or --buckets".into())),
    };
    if ctx.pretty {
        let mut out = format!("{pair_a} vs {pair_b}\n");
        for r in &rows {
            out += &format!("{:<24} {:>16}  {:?}\n", r.provenance.horizon.to_string(), format_significant(r.value, 10), r.provenance.formula);
        }
        return Ok((0, out));
    }
    let result = json!({
        "pair_a": pair_a,
        "pair_b": pair_b,
        "correlations": rows.iter().map(|r| corr_row(r, a.audit)).collect::<Vec<_>>(),
    });
    Ok((0, ctx.emit("corr", a, result)))
}

fn cmd_matrix(ctx: &Context, a: &MatrixArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let pairs = a.pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
    let m = build_matrix(&pairs, &snap, &a.buckets, CorrOptions { clamp: a.clamp, repair: a.repair })?;
    if ctx.pretty {
        let mut out = String::new();
        for b in &m.buckets {
            out += &format!("bucket ({}, {}]  status {:?}  min eigenvalue {}\n", b.start, b.end, b.status, format_significant(b.min_eigenvalue, 10));
            for row in &b.matrix {
                out += &row.iter().map(|v| format!("{:>14}", format_significant(*v, 10))).collect::<String>();
                out.push('\n');
            }
        }
        return Ok((0, out));
    }
    let repaired = m.buckets.iter().any(|b| b.status == PsdStatus::Repaired);
    let result = json!({ "pairs": m.pairs, "buckets": m.buckets, "any_repaired": repaired });
    Ok((0, ctx.emit("corr-matrix", a, result)))
}

fn cmd_price(ctx: &Context, a: &PriceArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let text = std::fs::read_to_string(&a.payoff)
        .map_err(|source| Error::Io { path: a.payoff.display().to_string(), source })?;
    let payoff: PayoffSpec = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("payoff file: {e}")))?;
    let config = SimulationConfig { n_paths: a.paths, seed: a.seed, grid: a.grid.clone(), antithetic: a.antithetic, workers: a.workers };
    let result = price(&payoff, &snap, &config, CorrOptions { clamp: a.clamp, repair: a.repair })?;
    if ctx.pretty {
        return Ok((
            0,
            format!(
                "price {}  standard error {}  paths {}  discount {} @ {}\n",
                format_significant(result.price, 10),
                format_significant(result.standard_error, 10),
                result.n_paths,
                result.discount_currency,
                format_significant(result.discount_rate, 10)
            ),
        ));
    }
    Ok((0, ctx.emit("price", a, json!({ "payoff": payoff, "pricing": result }))))
}

fn cmd_bootstrap(ctx: &Context, a: &BootstrapArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let pair = parse_pair(&a.pair)?;
    let ts = snap
        .vols(pair)
        .ok_or_else(|| Error::MissingVol { pair: pair.to_string(), horizon: "any".into() })?;
    let pc = bootstrap_piecewise_vol(ts)?;
    let mut checks = Vec::new();
    for &(t, quoted) in ts.points() {
        let rebuilt = (total_variance(&pc, t)?.value / t).sqrt();
        checks.push(json!({ "T": t, "quoted_vol": quoted, "reconstructed_vol": rebuilt, "residual": rebuilt - quoted }));
    }
    if ctx.pretty {
        let mut out = format!("{pair}\n");
        for (start, end, v) in pc.buckets() {
            out += &format!("({start}, {end}]  {}\n", format_significant(v, 10));
        }
        return Ok((0, out));
    }
    let buckets: Vec<Value> = pc.buckets().map(|(s, e, v)| json!({ "start": s, "end": e, "vol": v })).collect();
    let result = json!({ "pair": pair, "breakpoints": pc.breakpoints(), "values": pc.values(), "buckets": buckets, "reconstruction": checks });
    Ok((0, ctx.emit("bootstrap", a, result)))
}

fn cmd_validate(ctx: &Context, a: &ValidateArgs) -> CmdResult {
    let snap = ctx.snapshot()?;
    let violations = check_spot_triangles(&snap, a.tolerance);
    let exit = if violations.is_empty() { 0 } else { 1 };
    if ctx.pretty {
        let mut out = format!("{} spots, {} vol structures, {} rate curves\n", snap.spots().count(), snap.vol_structures().count(), snap.rate_curves().count());
        for v in &violations {
            out += &format!("triangle {}/{}/{} off by {:e}\n", v.currencies[0], v.currencies[1], v.currencies[2], v.magnitude);
        }
        return Ok((exit, out));
    }
    let result = json!({
        "valid": violations.is_empty(),
        "spots": snap.spots().count(),
        "vol_structures": snap.vol_structures().count(),
        "rate_curves": snap.rate_curves().count(),
        "triangle_violations": violations,
    });
    Ok((exit, ctx.emit("validate", a, result)))
}
