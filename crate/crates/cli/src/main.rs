mod config;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use grouphet::ingest::{log_returns, read_groups_csv, read_matrix_csv};
use grouphet::null_dist::write_critical_values_csv;
use grouphet::panel::group_structure;
use grouphet::report::DEFAULT_ALPHAS;
use grouphet::rng::null_seed;
use grouphet::{
    ingest_panel, run_experiment, run_test, vech_len, DataPanel64, DgpKind, ExperimentConfig, GramSide,
    IngestOptions, InferenceMode, NullDistribution, NullSimulationConfig, PrincipalComponents, TestOptions,
};

use config::{parse_cell, Cells, Config};

const SEED_ENV: &str = "GROUPHET_SEED";

const CSV_HELP: &str = "\
Input files:
  matrix CSV  header row of series ids, then one row per period
              (T rows x N columns: time down, series across)
  groups CSV  two columns series_id,group_tag, one row per series;
              a header line is optional

Configuration:
  --config FILE reads key = value lines (alpha, draws, perms, seed, r, rmax,
  demean, log-returns, inference, kind, grid, replications, ...). Flags
  override the file. The default seed comes from GROUPHET_SEED, else 0.";

#[derive(Parser)]
#[command(name = "grouphet", version, about = "LM tests for group-specific heterogeneity in factor models")]
#[command(after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both heterogeneity tests on a grouped panel.
    Test(TestArgs),
    /// Monte Carlo size/power experiment on a simulated design.
    Mc(McArgs),
    /// Simulated critical values of the limiting null law.
    Critvals(CritvalsArgs),
    /// Choose the number of factors by information criterion.
    SelectFactors(SelectArgs),
}

#[derive(Args)]
struct Shared {
    /// key = value configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root seed [default: $GROUPHET_SEED or 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TestArgs {
    /// Matrix CSV (T rows x N columns).
    #[arg(long, value_name = "FILE")]
    matrix: PathBuf,
    /// Groups CSV (series_id,group_tag).
    #[arg(long, value_name = "FILE")]
    groups: PathBuf,
    /// Fixed number of factors; otherwise selected up to --rmax.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    rmax: Option<usize>,
    /// Significance level; repeat for several [default: 0.01 0.05 0.10].
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    /// Draws of the simulated null law [default: 500000].
    #[arg(long)]
    draws: Option<usize>,
    /// Number of permutations B [default: 999].
    #[arg(long)]
    perms: Option<usize>,
    /// Skip demeaning each series.
    #[arg(long)]
    no_demean: bool,
    /// Inputs are price levels; convert to log returns.
    #[arg(long)]
    log_returns: bool,
    /// asymptotic, permutation or both [default: both].
    #[arg(long)]
    inference: Option<InferenceMode>,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// Write the JSON report here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the text report here.
    #[arg(long, value_name = "FILE")]
    text_out: Option<PathBuf>,
    /// Print JSON instead of text on stdout.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct McArgs {
    /// Design: 1-a, 2-a, 1-b, 2-b, 1-c or 2-c.
    #[arg(long)]
    kind: Option<DgpKind>,
    /// Cells as NxT; repeat or comma-separate.
    #[arg(long, value_parser = parse_cell, value_delimiter = ',')]
    grid: Vec<(usize, usize)>,
    /// Replications per cell (at least 50).
    #[arg(long, short = 'm')]
    replications: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    alpha: Option<f64>,
    /// [default: both]
    #[arg(long)]
    inference: Option<InferenceMode>,
    /// [default: 10]
    #[arg(long)]
    rmax: Option<usize>,
    /// [default: 999]
    #[arg(long)]
    perms: Option<usize>,
    /// [default: 500000]
    #[arg(long)]
    draws: Option<usize>,
    /// Loading scale of the group factors [default: 1].
    #[arg(long)]
    b: Option<f64>,
    /// Cross-sectional MA coefficient [default: 0.1].
    #[arg(long)]
    theta: Option<f64>,
    /// Cross-sectional MA order [default: 4].
    #[arg(long)]
    p: Option<usize>,
    /// Correlation of the group factors [default: 0.3].
    #[arg(long)]
    rho: Option<f64>,
    /// Write the rejection-frequency CSV here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the full result as JSON here.
    #[arg(long, value_name = "FILE")]
    json_out: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct CritvalsArgs {
    /// Group shares, comma-separated (normalized to sum to one).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["sizes", "groups"])]
    shares: Vec<f64>,
    /// Group sizes, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "groups")]
    sizes: Vec<usize>,
    /// Groups CSV to take the sizes from.
    #[arg(long, value_name = "FILE")]
    groups: Option<PathBuf>,
    /// Dimension of the limit law.
    #[arg(long, conflicts_with = "r")]
    d: Option<usize>,
    /// Number of factors; sets d = r(r+1)/2.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long)]
    draws: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, value_name = "FILE")]
    matrix: PathBuf,
    #[arg(long)]
    rmax: Option<usize>,
    #[arg(long)]
    no_demean: bool,
    #[arg(long)]
    log_returns: bool,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    shared: Shared,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Critvals(a) => cmd_critvals(a),
        Command::SelectFactors(a) => cmd_select(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}

/// One JSON object on stderr: the error kind and the full message chain.
fn report_error(e: &anyhow::Error) {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<grouphet::Error>())
        .map_or("Error", grouphet::Error::kind);
    let msg = e.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    let body = serde_json::json!({ "error": { "kind": kind, "message": msg } });
    eprintln!("{body}");
}

fn resolve_seed(flag: Option<u64>, cfg: &Config) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.get("seed")? {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not a valid seed")),
        Err(_) => Ok(0),
    }
}

fn resolve_alphas(flags: Vec<f64>, cfg: &Config) -> Result<Vec<f64>> {
    if !flags.is_empty() {
        return Ok(flags);
    }
    Ok(cfg.list("alpha")?.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()))
}

/// Writes to a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let cfg = Config::load(a.shared.config.as_deref())?;
    let log = a.log_returns || cfg.get("log-returns")?.unwrap_or(false);
    let defaults = TestOptions::default();
    let opts = TestOptions {
        r: a.r.or(cfg.get("r")?),
        rmax: a.rmax.or(cfg.get("rmax")?).unwrap_or(defaults.rmax),
        alphas: resolve_alphas(a.alphas, &cfg)?,
        null_draws: a.draws.or(cfg.get("draws")?).unwrap_or(defaults.null_draws),
        permutations: a.perms.or(cfg.get("perms")?).unwrap_or(defaults.permutations),
        seed: resolve_seed(a.shared.seed, &cfg)?,
        demean: !a.no_demean && cfg.get("demean")?.unwrap_or(true),
        log_returns: log,
        inference: a.inference.or(cfg.get("inference")?).unwrap_or(defaults.inference),
    };
    let deterministic = a.deterministic || cfg.get("deterministic")?.unwrap_or(false);

    let (panel, groups) = ingest_panel(&a.matrix, &a.groups, IngestOptions { log_returns: log })
        .with_context(|| format!("ingesting {} and {}", a.matrix.display(), a.groups.display()))?;
    let mut report = run_test(&panel, &groups, &opts)?;
    if !deterministic {
        report.provenance.timestamp = Some(timestamp());
    }
    let json = report.to_json()? + "\n";
    let text = report.render_text();
    if let Some(p) = &a.out {
        write_atomic(p, json.as_bytes())?;
    }
    if let Some(p) = &a.text_out {
        write_atomic(p, text.as_bytes())?;
    }
    if a.json {
        print!("{json}");
    } else {
        print!("{text}");
    }
    Ok(())
}

fn cmd_mc(a: McArgs) -> Result<()> {
    let cfg = Config::load(a.shared.config.as_deref())?;
    let Some(kind) = a.kind.or(cfg.get("kind")?) else {
        bail!("--kind is required (1-a, 2-a, 1-b, 2-b, 1-c or 2-c)");
    };
    let grid = if a.grid.is_empty() {
        cfg.get::<Cells>("grid")?.map(|c| c.0).unwrap_or_default()
    } else {
        a.grid
    };
    if grid.is_empty() {
        bail!("--grid is required, e.g. --grid 80x50");
    }
    let Some(m) = a.replications.or(cfg.get("replications")?) else {
        bail!("--replications is required");
    };
    let mut ec = ExperimentConfig::new(kind, grid, m);
    ec.alpha = a.alpha.or(cfg.get("alpha")?).unwrap_or(ec.alpha);
    ec.inference = a.inference.or(cfg.get("inference")?).unwrap_or(ec.inference);
    ec.rmax = a.rmax.or(cfg.get("rmax")?).unwrap_or(ec.rmax);
    ec.permutations = a.perms.or(cfg.get("perms")?).unwrap_or(ec.permutations);
    ec.null_draws = a.draws.or(cfg.get("draws")?).unwrap_or(ec.null_draws);
    ec.seed = resolve_seed(a.shared.seed, &cfg)?;
    ec.b = a.b.or(cfg.get("b")?).unwrap_or(ec.b);
    ec.theta = a.theta.or(cfg.get("theta")?).unwrap_or(ec.theta);
    ec.p = a.p.or(cfg.get("p")?).unwrap_or(ec.p);
    ec.rho = a.rho.or(cfg.get("rho")?).unwrap_or(ec.rho);

    let res = run_experiment(&ec)?;
    if let Some(p) = &a.out {
        let mut buf = Vec::new();
        res.write_csv(&mut buf)?;
        write_atomic(p, &buf)?;
    }
    if let Some(p) = &a.json_out {
        write_atomic(p, (serde_json::to_string_pretty(&res)? + "\n").as_bytes())?;
    }
    print!("{}", res.render_table());
    Ok(())
}

fn cmd_critvals(a: CritvalsArgs) -> Result<()> {
    let cfg = Config::load(a.shared.config.as_deref())?;
    let sizes: Vec<usize> = if let Some(g) = &a.groups {
        let file = File::open(g).with_context(|| format!("opening {}", g.display()))?;
        let tags: Vec<String> = read_groups_csv(BufReader::new(file))?.into_iter().map(|(_, t)| t).collect();
        group_structure(&tags)?.0.sizes().to_vec()
    } else if !a.sizes.is_empty() {
        a.sizes
    } else {
        cfg.list("sizes")?.unwrap_or_default()
    };
    let raw: Vec<f64> = if !sizes.is_empty() {
        sizes.iter().map(|&s| s as f64).collect()
    } else if !a.shares.is_empty() {
        a.shares
    } else {
        cfg.list("shares")?.unwrap_or_default()
    };
    if raw.is_empty() {
        bail!("one of --shares, --sizes or --groups is required");
    }
    let total: f64 = raw.iter().sum();
    let shares: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let d = match (a.d.or(cfg.get("d")?), a.r.or(cfg.get("r")?)) {
        (Some(d), _) => d,
        (None, Some(r)) => vech_len(r),
        (None, None) => bail!("one of --d or --r is required"),
    };
    let alphas = resolve_alphas(a.alphas, &cfg)?;
    let draws = a.draws.or(cfg.get("draws")?).unwrap_or(grouphet::null_dist::DEFAULT_NULL_DRAWS);
    // same null seed as `test` with this seed
    let seed = null_seed(resolve_seed(a.shared.seed, &cfg)?);

    let null = NullDistribution::simulate(&NullSimulationConfig::new(shares, d, draws, seed)?)?;
    let mut buf = Vec::new();
    write_critical_values_csv(&null.table(&alphas)?, &mut buf)?;
    match &a.out {
        Some(p) => write_atomic(p, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let cfg = Config::load(a.shared.config.as_deref())?;
    let rmax = a.rmax.or(cfg.get("rmax")?).unwrap_or(grouphet::report::DEFAULT_RMAX);
    let demean = !a.no_demean && cfg.get("demean")?.unwrap_or(true);
    let log = a.log_returns || cfg.get("log-returns")?.unwrap_or(false);

    let file = File::open(&a.matrix).with_context(|| format!("opening {}", a.matrix.display()))?;
    let (ids, mut m) = read_matrix_csv(BufReader::new(file))?;
    if log {
        m = log_returns(&m)?;
    }
    let panel = DataPanel64::new(m.transpose(), ids)?;
    let pcs = PrincipalComponents::fit(&panel, demean, GramSide::Auto)?;
    let sel = pcs.select(rmax)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&sel)?);
        return Ok(());
    }
    println!("N = {}, T = {}, rmax = {}", panel.n(), panel.t(), sel.rmax);
    println!("{:>4}{:>16}{:>16}", "k", "V(k)", "IC(k)");
    for (i, (v, ic)) in sel.residual_variances.iter().zip(&sel.criterion_values).enumerate() {
        let mark = if i + 1 == sel.r_selected { "  *" } else { "" };
        println!("{:>4}{:>16.6}{:>16.6}{mark}", i + 1, v, ic);
    }
    println!("selected r = {}", sel.r_selected);
    Ok(())
}
