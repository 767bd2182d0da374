use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use jcdress::config::ParamConfig;
use jcdress::jch2::{ground_state, outcoupling, TwoSiteParams};
use jcdress::kbody::{coeff_dispersive, coeff_resonant, coefficient};
use jcdress::oracle::{spectrum, verify_diagonalization};
use jcdress::precision::PrecisionPolicy;
use jcdress::sweep::{format_float, run_coefficient_scan, run_sweep_with_workers, GridSpec, Regime};
use jcdress::{Branch, DetuningApproach, Error, SystemParams};

#[derive(Parser, Debug)]
#[command(name = "jcdress", version, about = "Dressed-basis k-body Jaynes-Cummings numerics")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// k-body coefficients C_k^- and C_k^+.
    Coeffs(CoeffsArgs),
    /// Closed-form dressed spectrum up to manifold n_max.
    Spectrum(SpectrumArgs),
    /// Residuals of the dressing transformation against the brute-force oracle.
    Verify(VerifyArgs),
    /// Two-site ground-state report in the two-particle sector.
    Twosite(TwositeArgs),
    /// Parameter-grid sweep or coefficient scan.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    /// Flat TOML parameter file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "omega-c", allow_hyphen_values = true)]
    omega_c: Option<f64>,
    /// Detuning Δ = ω_a − ω_c.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "lambda")]
    delta: Option<f64>,
    /// λ = g/Δ, an alternative to --delta.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<f64>,
    /// Energy unit Γ used by --units gamma.
    #[arg(long = "gamma-scale")]
    gamma_scale: Option<f64>,
    /// Side from which Δ = 0 is approached.
    #[arg(long, value_enum)]
    approach: Option<Approach>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Approach {
    Above,
    Below,
}

impl From<Approach> for DetuningApproach {
    fn from(a: Approach) -> Self {
        match a {
            Approach::Above => DetuningApproach::FromAbove,
            Approach::Below => DetuningApproach::FromBelow,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output format (alias --report).
    #[arg(long, alias = "report", value_enum)]
    format: Option<Format>,
    /// Write data here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Units {
    Gamma,
    G,
}

#[derive(Args, Debug)]
#[group(id = "mode", multiple = false)]
struct ModeArgs {
    /// Closed form at Δ → 0 (C_k^- only).
    #[arg(long)]
    resonant: bool,
    /// Leading-order closed form in λ (C_k^- only).
    #[arg(long)]
    dispersive: bool,
    /// Exact alternating sums (default).
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct CoeffsArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long = "k-max", default_value_t = 10)]
    k_max: u64,
    #[arg(long, value_enum, default_value_t = Units::Gamma)]
    units: Units,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long = "n-max", default_value_t = 10)]
    n_max: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long = "n-max", default_value_t = 30)]
    n_max: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TwositeArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Inter-site photon hopping J.
    #[arg(long = "hop-j")]
    hop_j: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Preset {
    PhaseDiagram,
    CoefficientMap,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScanRegime {
    Resonant,
    Dispersive,
    Exact,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Grid specification file (flat TOML).
    #[arg(long, conflicts_with_all = ["preset", "scan"])]
    spec: Option<PathBuf>,
    /// Built-in grid.
    #[arg(long, value_enum, conflicts_with = "scan")]
    preset: Option<Preset>,
    /// C_k^- against k instead of a grid; uses the parameter flags.
    #[arg(long, value_enum)]
    scan: Option<ScanRegime>,
    #[arg(long = "k-max", default_value_t = 100)]
    k_max: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_domain() {
            Failure::Domain(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Coeffs(a) => coeffs(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Verify(a) => verify(a),
        Command::Twosite(a) => twosite(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Defaults, then the config file, then flags.
fn layered(p: &ParamArgs, hop_j: Option<f64>) -> CliResult<ParamConfig> {
    let defaults = ParamConfig { omega_c: Some(1000.0), delta: Some(1.0), g: Some(1.0), ..Default::default() };
    let file = match &p.config {
        Some(path) => ParamConfig::load(path)?,
        None => ParamConfig::default(),
    };
    let flags = ParamConfig {
        omega_c: p.omega_c,
        delta: p.delta,
        lambda: p.lambda,
        g: p.g,
        gamma_scale: p.gamma_scale,
        zero_detuning_sign: p.approach.map(Into::into),
        hop_j,
    };
    Ok(defaults.overlay(&file).overlay(&flags))
}

fn policy() -> CliResult<PrecisionPolicy> {
    Ok(PrecisionPolicy::from_env()?)
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => format_float(n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn num(v: f64) -> Value {
    // non-finite values become null
    json!(v)
}

fn table_csv(t: &Table) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(cell_text).map(|s| csv_quote(&s)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn table_json(t: &Table) -> String {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|r| {
            let m: Map<String, Value> = t.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect();
            Value::Object(m)
        })
        .collect();
    pretty(&Value::Array(rows))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// `key = value` lines for a flat or nested JSON object.
fn record_text(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) => {
                let parts: Vec<String> = a.iter().map(cell_text).collect();
                out.push_str(&format!("{prefix} = [{}]\n", parts.join(", ")));
            }
            x => out.push_str(&format!("{prefix} = {}\n", cell_text(x))),
        }
    }
    let mut out = String::new();
    walk("", v, &mut out);
    out
}

/// One CSV header plus one row holding every scalar of a JSON object.
fn record_csv(v: &Value) -> String {
    fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    flatten(&key, x, out);
                }
            }
            Value::Array(_) => {}
            x => out.push((prefix.to_string(), x.clone())),
        }
    }
    let mut fields = Vec::new();
    flatten("", v, &mut fields);
    let header: Vec<String> = fields.iter().map(|(k, _)| csv_quote(k)).collect();
    let row: Vec<String> = fields.iter().map(|(_, x)| csv_quote(&cell_text(x))).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn emit(output: &OutputArgs, text: &str) -> CliResult<()> {
    match &output.out {
        Some(path) => {
            std::fs::write(path, text)
                .map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))?;
            log::info!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Domain(format!("cannot write to stdout: {e}")))?;
        }
    }
    Ok(())
}

fn emit_table(output: &OutputArgs, default: Format, t: &Table) -> CliResult<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Csv | Format::Text => table_csv(t),
        Format::Json => table_json(t),
    };
    emit(output, &text)
}

fn emit_record(output: &OutputArgs, default: Format, v: &Value) -> CliResult<()> {
    let text = match output.format.unwrap_or(default) {
        Format::Json => pretty(v),
        Format::Csv => record_csv(v),
        Format::Text => record_text(v),
    };
    emit(output, &text)
}

fn coeffs(a: CoeffsArgs) -> CliResult<()> {
    let cfg = layered(&a.params, None)?;
    let policy = policy()?;
    let closed_form = a.mode.resonant || a.mode.dispersive;
    // the resonant form ignores Δ, so exact resonance needs no approach flag there
    let params = cfg.system_params(!a.mode.resonant)?;
    let unit = match a.units {
        Units::Gamma => params.gamma(),
        Units::G if params.g > 0.0 => params.g,
        Units::G => return Err(Failure::Usage("--units g needs g > 0".into())),
    };
    let first = if closed_form { 1 } else { 0 };
    let mut rows = Vec::new();
    for k in first..=a.k_max {
        let row = if a.mode.resonant {
            let v = coeff_resonant(params.g, k, params.zero_detuning_sign)?;
            vec![json!(k), num(v / unit), Value::Null, Value::Null]
        } else if a.mode.dispersive {
            let v = coeff_dispersive(params.g, params.lambda()?, k)?;
            vec![json!(k), num(v / unit), Value::Null, Value::Null]
        } else {
            let m = coefficient(&params, k, Branch::Minus, &policy)?;
            let p = coefficient(&params, k, Branch::Plus, &policy)?;
            let bits = m.precision_bits.max(p.precision_bits);
            vec![json!(k), num(m.value / unit), num(p.value / unit), json!(bits)]
        };
        rows.push(row);
    }
    let t = Table { columns: vec!["k", "C_k_minus", "C_k_plus", "precision_bits"], rows };
    emit_table(&a.output, Format::Csv, &t)
}

fn spectrum_cmd(a: SpectrumArgs) -> CliResult<()> {
    let params = layered(&a.params, None)?.system_params(true)?;
    let levels = spectrum(&params, a.n_max)?;
    let rows = levels
        .iter()
        .map(|l| {
            vec![
                json!(l.label.n()),
                json!(l.label.branch().symbol().to_string()),
                num(l.energy),
                num(l.ground_weight),
            ]
        })
        .collect();
    let t = Table { columns: vec!["n", "branch", "energy", "ground_weight"], rows };
    emit_table(&a.output, Format::Csv, &t)
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    let params = layered(&a.params, None)?.system_params(true)?;
    let report = verify_diagonalization(&params, a.n_max)?;
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["passes"] = json!(report.passes());
    emit_record(&a.output, Format::Text, &v)?;
    if !report.passes() {
        return Err(Failure::Domain("residuals exceed the verification tolerances".into()));
    }
    Ok(())
}

fn twosite(a: TwositeArgs) -> CliResult<()> {
    let cfg = layered(&a.params, a.hop_j)?;
    let params: TwoSiteParams = cfg.two_site_params(true)?;
    if params.site.g > 0.0 && params.site.delta != 0.0 && (params.site.g / params.site.delta).abs() > 0.1 {
        log::info!("|lambda| > 0.1: outside the dispersive regime");
    }
    let report = ground_state(&params)?;
    let out = outcoupling(&params)?;
    let v = json!({
        "params": {
            "omega_c": params.site.omega_c,
            "delta": params.site.delta,
            "g": params.site.g,
            "hop_j": params.hop_j,
        },
        "energy": report.energy,
        "variance": report.variance,
        "variance_site2": report.variance_site2,
        "overlaps": report.overlaps,
        "j_eff1": report.j_eff1,
        "j_eff2": report.j_eff2,
        "u_eff": report.u_eff,
        "effective_ratio": report.effective_ratio,
        "gap": report.gap,
        "near_degenerate": report.near_degenerate,
        "outcoupling": out,
        "basis": report.basis,
        "amplitudes": report.amplitudes,
    });
    if report.near_degenerate {
        log::warn!("ground state is (near-)degenerate; overlaps depend on the eigensolver's choice");
    }
    emit_record(&a.output, Format::Json, &v)
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let format = a.output.format.unwrap_or(Format::Csv);
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(Failure::Usage("--workers must be >= 1".into()));
    }
    if let Some(regime) = a.scan {
        let regime = match regime {
            ScanRegime::Resonant => Regime::Resonant,
            ScanRegime::Dispersive => Regime::Dispersive,
            ScanRegime::Exact => Regime::Exact,
        };
        let params: SystemParams = layered(&a.params, None)?.system_params(regime != Regime::Resonant)?;
        let policy = policy()?;
        let pool = rayon_pool(workers)?;
        let scan = pool.install(|| run_coefficient_scan(&params, a.k_max, regime, &policy))?;
        let failed = scan.rows.iter().filter(|r| r.error.is_some()).count();
        if failed > 0 {
            log::warn!("{failed} of {} scan rows failed; see the error column", scan.rows.len());
        }
        let text = if format == Format::Json { scan.to_json()? + "\n" } else { scan.to_csv()? };
        return emit(&a.output, &text);
    }
    let spec = match (&a.spec, a.preset) {
        (Some(path), _) => GridSpec::load(path)?,
        (None, Some(Preset::CoefficientMap)) => GridSpec::coefficient_map(),
        (None, _) => GridSpec::phase_diagram(),
    };
    let started = std::time::Instant::now();
    let table = run_sweep_with_workers(&spec, workers)?;
    log::info!("{} grid points in {:.2?} on {workers} workers", table.rows.len(), started.elapsed());
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} grid points failed; see the error column", table.rows.len());
    }
    let text = if format == Format::Json { table.to_json()? + "\n" } else { table.to_csv()? };
    emit(&a.output, &text)
}

fn rayon_pool(workers: usize) -> CliResult<jcdress::sweep::WorkerPool> {
    Ok(jcdress::sweep::WorkerPool::new(workers)?)
}
