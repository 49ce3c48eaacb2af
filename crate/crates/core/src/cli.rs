//! Command-line front end: `test` runs the bootstrap test on a CSV file,
//! `simulate` runs the Monte Carlo designs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bootstrap::{run_test_sweep, TestResult};
use crate::error::{Error, Result};
use crate::model::{
    validate_dataset, Dataset, Direction, EmptyCellPolicy, InstrumentGrid, TestConfig, XiMeasure,
};
use crate::simulation::{
    emit_tables, fmt_full, full_bootstrap_mc, warp_speed_mc, DgpId, DgpSpec, McConfig, McReport, POWER_DESIGNS,
};

pub const THREADS_ENV: &str = "IVMONO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ivmono", version, about = "Bootstrap test of partial instrument monotonicity")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the test on a CSV file.
    Test(TestArgs),
    /// Monte Carlo rejection rates for the built-in designs.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub y: String,
    #[arg(long, default_value = "d")]
    pub d: String,
    /// Instrument columns, comma separated. Defaults to z1, z2, ... found in the header.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Contact-set threshold; `inf` keeps every candidate.
    #[arg(long, default_value = "2")]
    pub tau: String,
    #[arg(long, default_value_t = 1e-10)]
    pub xi0: f64,
    /// `dirac:<xi>` or `grid:<xi_1,...,xi_m>`.
    #[arg(long, default_value = "dirac:0.05")]
    pub nu: String,
    /// Report every Dirac of the standard ξ grid plus the equal-weight grid.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long = "bootstrap", short = 'B', default_value_t = 1000)]
    pub n_bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `error` or `drop-pair`.
    #[arg(long, default_value = "error")]
    pub empty_cell_policy: String,
    /// Per-dimension ordering, e.g. `asc,desc`.
    #[arg(long, value_delimiter = ',')]
    pub directions: Vec<String>,
    /// Full treatment support when a boundary arm may be unobserved.
    #[arg(long, value_delimiter = ',')]
    pub treatment_support: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutputFormat,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// null, p1, ..., p6
    #[arg(long)]
    pub dgp: String,
    #[arg(long)]
    pub n: Option<usize>,
    /// `P(Z_j = 1)`; 0.5 by default.
    #[arg(long)]
    pub rn: Option<f64>,
    /// Run the five (n, r_n) power designs instead of a single n.
    #[arg(long)]
    pub power_sizes: bool,
    /// Contact-set thresholds, comma separated; `inf` allowed.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub tau: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    pub mc: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub xi0: f64,
    /// Use a full bootstrap with this many draws per replication instead of warp speed.
    #[arg(long)]
    pub full_bootstrap: Option<usize>,
    /// Directory for `table.txt` and `rows.jsonl`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses a threshold, accepting `inf`.
pub fn parse_tau(s: &str) -> Result<f64> {
    let t = s.trim();
    if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
        return Ok(f64::INFINITY);
    }
    t.parse::<f64>()
        .ok()
        .filter(|v| *v >= 0.0)
        .ok_or_else(|| Error::InvalidConfig(format!("invalid tau '{s}'")))
}

/// Reads `y`, `d` and the instrument columns from a CSV file.
pub fn read_csv(path: &Path, y: &str, d: &str, z: &[String]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let z_cols: Vec<String> = if z.is_empty() {
        let mut found = Vec::new();
        while let Some(name) = Some(format!("z{}", found.len() + 1)).filter(|n| header.iter().any(|h| h == n)) {
            found.push(name);
        }
        if found.len() < 2 {
            return Err(Error::UnknownColumn(format!("z{}", found.len() + 1)));
        }
        found
    } else {
        z.to_vec()
    };
    let (yi, di) = (find(y)?, find(d)?);
    let zi = z_cols.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let (mut ys, mut ds, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let num = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::MalformedValue {
                column: name.to_string(),
                row: row + 1,
                value: raw.to_string(),
            })
        };
        ys.push(num(yi, y)?);
        ds.push(num(di, d)?);
        for (col, name) in zi.iter().zip(&z_cols) {
            let v = num(*col, name)?;
            if v.fract() != 0.0 || !v.is_finite() {
                return Err(Error::MalformedValue {
                    column: name.clone(),
                    row: row + 1,
                    value: record.get(*col).unwrap_or("").to_string(),
                });
            }
            zs.push(v as i64);
        }
    }
    if ys.is_empty() {
        return Err(Error::LengthMismatch("CSV has no data rows".into()));
    }
    Dataset::from_flat(ys, ds, zs, z_cols.len())
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let outcome = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(Error::InvalidConfig(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command),
    };
    match outcome.and_then(|text| out.write_all(text.as_bytes()).map_err(Error::from)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", e.name());
            2
        }
    }
}

fn dispatch(command: &Command) -> Result<String> {
    match command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn test_config(args: &TestArgs) -> Result<TestConfig> {
    let config = TestConfig {
        alpha: args.alpha,
        n_bootstrap: args.n_bootstrap,
        tau_n: parse_tau(&args.tau)?,
        xi0: args.xi0,
        xi_measure: args.nu.parse()?,
        seed: args.seed,
        empty_cell_policy: args.empty_cell_policy.parse::<EmptyCellPolicy>()?,
        treatment_support: (!args.treatment_support.is_empty()).then(|| args.treatment_support.clone()),
    };
    config.validate()?;
    Ok(config)
}

/// Runs the test; returns what goes to stdout.
pub fn cmd_test(args: &TestArgs) -> Result<String> {
    let config = test_config(args)?;
    let data = read_csv(&args.input, &args.y, &args.d, &args.z)?;
    let mut grid = InstrumentGrid::observed(&data);
    if !args.directions.is_empty() {
        let dirs = args.directions.iter().map(|s| s.parse::<Direction>()).collect::<Result<Vec<_>>>()?;
        grid = grid.with_directions(dirs)?;
    }
    let data = validate_dataset(data, &grid, &config)?;
    let measures = if args.sweep { XiMeasure::standard_sweep() } else { vec![config.xi_measure.clone()] };
    let results = run_test_sweep(&data, &config, &measures)?;
    let report = match args.format {
        OutputFormat::Text => render_text(&results, data.n()),
        OutputFormat::Jsonl => render_jsonl(&results),
    };
    match &args.output {
        Some(path) => {
            fs::write(path, report)?;
            Ok(String::new())
        }
        None => Ok(report),
    }
}

/// One structured record per ξ measure.
pub fn render_jsonl(results: &[TestResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{{\"xi_spec\":{},\"ts\":{},\"critical_value\":{},\"p_value\":{},\"reject\":{},\"contact_set_size\":{},\"n_bootstrap\":{},\"tau\":{},\"t_n\":{},\"seed\":{}}}\n",
            serde_json::to_string(&r.xi_spec).expect("string"),
            fmt_full(r.ts),
            fmt_full(r.critical_value),
            fmt_full(r.p_value),
            r.reject,
            r.contact_set_size,
            r.n_bootstrap_used,
            fmt_full(r.config.tau_n),
            fmt_full(r.diagnostics.t_n),
            r.seed
        ));
    }
    s
}

pub fn render_text(results: &[TestResult], n: usize) -> String {
    let first = &results[0];
    let c = &first.config;
    let tau = if c.tau_n.is_finite() { format!("{}", c.tau_n) } else { "inf".into() };
    let mut s = format!(
        "n = {n}, T_n = {:.6}, candidates = {}, contact set = {}\nalpha = {}, tau_n = {tau}, xi0 = {:e}, bootstrap draws = {}, seed = {}\n\n",
        first.diagnostics.t_n, first.diagnostics.candidates, first.contact_set_size, c.alpha, c.xi0, first.n_bootstrap_used, first.seed
    );
    s.push_str(&format!("{:<24} {:>12} {:>12} {:>8}  {}\n", "nu", "TS_n", "critical", "p-value", "decision"));
    for r in results {
        s.push_str(&format!(
            "{:<24} {:>12.6} {:>12.6} {:>8.3}  {}\n",
            r.config.xi_measure.label(),
            r.ts,
            r.critical_value,
            r.p_value,
            if r.reject { "reject" } else { "do not reject" }
        ));
    }
    s.push_str("\npair                 dim   n_lower   n_upper  candidates     max phi   max stud.\n");
    for p in &first.diagnostics.pairs {
        s.push_str(&format!(
            "{:<20} {:>3} {:>9} {:>9} {:>11} {:>11.4} {:>11.4}\n",
            format!("{:?}->{:?}", p.lower, p.upper),
            p.dim + 1,
            p.lower_count,
            p.upper_count,
            p.candidates,
            p.max_phi,
            p.max_studentized
        ));
    }
    for w in &first.diagnostics.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let id: DgpId = args.dgp.parse()?;
    let taus = args.tau.iter().map(|t| parse_tau(t)).collect::<Result<Vec<_>>>()?;
    let config = McConfig {
        alpha: args.alpha,
        taus,
        xi0: args.xi0,
        measures: XiMeasure::standard_sweep(),
        seed: args.seed,
        empty_cell_policy: EmptyCellPolicy::Error,
    };
    let designs: Vec<(usize, f64)> = if args.power_sizes {
        POWER_DESIGNS.to_vec()
    } else {
        let n = args.n.ok_or_else(|| Error::InvalidConfig("--n or --power-sizes is required".into()))?;
        vec![(n, args.rn.unwrap_or(0.5))]
    };
    let reports = designs
        .into_iter()
        .map(|(n, r_n)| {
            let spec = DgpSpec::new(id, n, r_n)?;
            match args.full_bootstrap {
                Some(b) => full_bootstrap_mc(&spec, &config, args.mc, b),
                None => warp_speed_mc(&spec, &config, args.mc),
            }
        })
        .collect::<Result<Vec<McReport>>>()?;
    let tables = emit_tables(&reports)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("table.txt"), &tables.text)?;
        fs::write(dir.join("rows.jsonl"), &tables.jsonl)?;
    }
    Ok(tables.text)
}
