use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lossycs::bounds::{BoundAlgorithm, BoundKind, BoundQuery};
use lossycs::config::{parse_experiment, parse_topology_record, TopologyRecord};
use lossycs::experiment::{
    compare_topologies, extract_transition, fit_transition, parse_grid_csv, run_grid, Axis, ComparisonSpec, FitForm,
    RunManifest,
};
use lossycs::pmf::{pmf_analytic, pmf_bruteforce};
use lossycs::ric::{ric_exact, ric_sampled};
use lossycs::sensing::{generate_matrix, EnsembleFamily, SensingEnsemble};
use lossycs::topology::{ErasureParams, Topology};
use lossycs::{Error, Matrix, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "lossycs", version, about = "Compressed sensing over lossy sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sufficient number of measurements for a topology.
    Bounds(BoundsArgs),
    /// Distribution of the number of observed measurements.
    Pmf(PmfArgs),
    /// Restricted isometry constant of a matrix.
    Ric(RicArgs),
    /// Monte Carlo success-probability grid.
    Simulate(SimulateArgs),
    /// Fit a transition curve to a simulated grid.
    Fit(FitArgs),
    /// Star vs tree vs serial success at equal sensor counts.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyArg {
    Star,
    Tree,
    Serial,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulaArg {
    Classic,
    Star,
    StarAlgo,
    Tree,
    Serial,
    RelayLowerBound,
    BranchLowerBound,
    OversamplingBaseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Bp,
    Iht,
    Cosamp,
}

#[derive(Args)]
struct BoundsArgs {
    /// Without a topology the lossless bound is reported.
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Explicit formula; overrides the choice implied by --topology.
    #[arg(long, value_enum)]
    formula: Option<FormulaArg>,
    #[arg(short = 'N', long = "n")]
    n: usize,
    #[arg(short, long)]
    s: usize,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(short = 'C', long = "c", default_value_t = 1.0)]
    c: f64,
    #[arg(short, long, default_value_t = 1.0)]
    p: f64,
    #[arg(short, long, default_value_t = 1.0)]
    q: f64,
    #[arg(short = 'K', long = "k", default_value_t = 1)]
    k: usize,
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PmfMethod {
    Analytic,
    Bruteforce,
}

#[derive(Args)]
struct TopologyFlags {
    /// Topology record file (`topology`, `m` or `R`/`K`, `p`, `q`).
    #[arg(long, conflicts_with_all = ["topology", "m", "r", "k", "p", "q"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    topology: Option<TopologyArg>,
    /// Sensors of a star.
    #[arg(short, long)]
    m: Option<usize>,
    /// Relays or branches.
    #[arg(short = 'R', long = "r")]
    r: Option<usize>,
    /// Sensors per relay or branch.
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    #[arg(short, long)]
    p: Option<f64>,
    #[arg(short, long)]
    q: Option<f64>,
}

#[derive(Args)]
struct PmfArgs {
    #[command(flatten)]
    network: TopologyFlags,
    #[arg(long, value_enum, default_value = "analytic")]
    method: PmfMethod,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RicMethod {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnsembleArg {
    Gaussian,
    Rademacher,
    UniformSym,
}

#[derive(Args)]
struct RicArgs {
    /// Matrix file, one comma-separated row per line.
    #[arg(long, conflicts_with_all = ["rows", "cols", "seed", "ensemble"])]
    matrix: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    ensemble: EnsembleArg,
    /// Keep the generated entries at unit variance instead of scaling by rows^{-1/2}.
    #[arg(long)]
    unnormalized: bool,
    #[arg(short, long)]
    s: usize,
    #[arg(long, value_enum, default_value = "exact")]
    mode: RicMethod,
    /// Supports drawn in sampled mode.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Grid CSV; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Run manifest JSON.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Star,
    Tree,
    Serial,
    SerialPrinted,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_enum)]
    form: FormArg,
    #[arg(short, long)]
    q: Option<f64>,
    #[arg(short = 'K', long = "k")]
    k: Option<usize>,
    /// Success level that defines the transition.
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    /// `RxK` layouts, e.g. `4x10`; repeatable.
    #[arg(long = "layout", required = true, value_parser = parse_layout)]
    layouts: Vec<(usize, usize)>,
    #[arg(short, long, default_value_t = 1.0)]
    q: f64,
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_layout(v: &str) -> std::result::Result<(usize, usize), String> {
    let (r, k) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxK, got '{v}'"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad layout '{v}': {e}"));
    Ok((num(r)?, num(k)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// JSON number, with non-finite values spelled out since JSON has none.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let kind = match (a.formula, a.topology) {
        (Some(f), _) => match f {
            FormulaArg::Classic => BoundKind::Classic,
            FormulaArg::Star => BoundKind::Star,
            FormulaArg::StarAlgo => BoundKind::StarAlgo,
            FormulaArg::Tree => BoundKind::Tree,
            FormulaArg::Serial => BoundKind::Serial,
            FormulaArg::RelayLowerBound => BoundKind::RelayLowerBound,
            FormulaArg::BranchLowerBound => BoundKind::BranchLowerBound,
            FormulaArg::OversamplingBaseline => BoundKind::OversamplingBaseline,
        },
        (None, None) => BoundKind::Classic,
        (None, Some(TopologyArg::Star)) if a.algo.is_some() => BoundKind::StarAlgo,
        (None, Some(TopologyArg::Star)) => BoundKind::Star,
        (None, Some(TopologyArg::Tree)) => BoundKind::Tree,
        (None, Some(TopologyArg::Serial)) => BoundKind::Serial,
    };
    let mut query = BoundQuery::new(a.n, a.s, a.delta, a.eps)
        .with_c(a.c)
        .with_p(a.p)
        .with_q(a.q)
        .with_k(a.k);
    if let Some(algo) = a.algo {
        query = query.with_algorithm(match algo {
            AlgoArg::Bp => BoundAlgorithm::BasisPursuit,
            AlgoArg::Iht => BoundAlgorithm::Iht,
            AlgoArg::Cosamp => BoundAlgorithm::Cosamp,
        });
    }
    let r = kind.evaluate(&query)?;
    let record = json!({
        "formula": serde_json::to_value(r.formula)?,
        "value": num(r.value),
        "numerator": num(r.numerator),
        "log_denominator": num(r.log_denominator),
        "degenerate": r.degenerate,
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

fn network(f: &TopologyFlags) -> Result<TopologyRecord> {
    if let Some(path) = &f.config {
        return parse_topology_record(&read(path)?);
    }
    let missing = |flag: &str| Error::Config(format!("missing --{flag}"));
    let kind = f.topology.ok_or_else(|| missing("topology or --config"))?;
    let topology = match kind {
        TopologyArg::Star => Topology::star(f.m.ok_or_else(|| missing("m"))?)?,
        TopologyArg::Tree => Topology::tree(f.r.ok_or_else(|| missing("r"))?, f.k.ok_or_else(|| missing("k"))?)?,
        TopologyArg::Serial => {
            Topology::serial_star(f.r.ok_or_else(|| missing("r"))?, f.k.ok_or_else(|| missing("k"))?)?
        }
    };
    let params = ErasureParams::new(f.p.ok_or_else(|| missing("p"))?, f.q.unwrap_or(1.0))?;
    Ok(TopologyRecord { topology, params })
}

fn topology_echo(rec: &TopologyRecord) -> String {
    let shape = match rec.topology {
        Topology::Star { sensors } => format!("topology=star m={sensors}"),
        Topology::Tree { relays, per_relay } => format!("topology=tree R={relays} K={per_relay}"),
        Topology::SerialStar { branches, per_branch } => format!("topology=serial R={branches} K={per_branch}"),
    };
    format!("{shape} p={} q={}", rec.params.p, rec.params.q)
}

fn pmf(a: PmfArgs) -> Result<()> {
    let rec = network(&a.network)?;
    let pmf = match a.method {
        PmfMethod::Analytic => pmf_analytic(&rec.topology, &rec.params)?,
        PmfMethod::Bruteforce => pmf_bruteforce(&rec.topology, &rec.params)?,
    };
    let mut out = format!("# {}\ni,probability\n", topology_echo(&rec));
    for (i, v) in pmf.probabilities.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    emit(a.output.as_deref(), &out)
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), n + 1)))?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Error::Config(format!("{} line {}: ragged row", path.display(), n + 1)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{} holds no matrix", path.display())));
    }
    let cols = rows[0].len();
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

fn ric(a: RicArgs) -> Result<()> {
    let matrix = match &a.matrix {
        Some(path) => read_matrix(path)?,
        None => {
            let missing = |flag: &str| Error::Config(format!("missing --{flag} (or --matrix)"));
            let rows = a.rows.ok_or_else(|| missing("rows"))?;
            let cols = a.cols.ok_or_else(|| missing("cols"))?;
            let family = match a.ensemble {
                EnsembleArg::Gaussian => EnsembleFamily::Gaussian,
                EnsembleArg::Rademacher => EnsembleFamily::Rademacher,
                EnsembleArg::UniformSym => EnsembleFamily::UniformSym,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let m: Matrix = generate_matrix(&SensingEnsemble::new(family, rows, cols), &mut rng);
            if a.unnormalized || rows == 0 {
                m
            } else {
                m / (rows as f64).sqrt()
            }
        }
    };
    let est = match a.mode {
        RicMethod::Exact => ric_exact(&matrix, a.s)?,
        RicMethod::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x5eed);
            ric_sampled(&matrix, a.s, a.samples, &mut rng)?
        }
    };
    let record = json!({
        "delta_s": num(est.value),
        "mode": serde_json::to_value(est.mode)?,
        "extremal_support": est.extremal_support,
        "subsets_examined": est.subsets_examined,
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut config = parse_experiment(&read(&a.config)?)?;
    if a.workers.is_some() {
        config.workers = a.workers;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let grid = run_grid(&config)?;
    emit(a.output.as_deref(), &grid.to_csv())?;
    if let Some(path) = &a.manifest {
        fs::write(path, serde_json::to_string_pretty(&RunManifest::new(&config))?)?;
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let need_k = || a.k.ok_or_else(|| Error::Config("this form needs --k".into()));
    let form = match a.form {
        FormArg::Star => FitForm::Star,
        FormArg::Tree => FitForm::Tree {
            q: a.q.ok_or_else(|| Error::Config("the tree form needs --q".into()))?,
            k: need_k()?,
        },
        FormArg::Serial => FitForm::Serial { k: need_k()? },
        FormArg::SerialPrinted => FitForm::SerialPrinted { k: need_k()? },
    };
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {} is outside (0, 1]", a.threshold)));
    }
    let grid = parse_grid_csv(&read(&a.grid)?, Axis::M)?;
    let transition = extract_transition(&grid, a.threshold);
    let fit = fit_transition(&transition.points, form)?;
    let record = json!({
        "form": fit.form,
        "alpha": num(fit.alpha),
        "lambda": num(fit.lambda),
        "residual": num(fit.residual),
        "points_used": fit.points_used,
        "converged": fit.converged,
        "omitted_p": transition.omitted,
    });
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut base = parse_experiment(&read(&a.config)?)?;
    if a.workers.is_some() {
        base.workers = a.workers;
    }
    let spec = ComparisonSpec {
        p_grid: base.p_grid.clone(),
        base,
        layouts: a.layouts,
        q: a.q,
    };
    let report = compare_topologies(&spec)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config() || matches!(e, Error::Io(_) | Error::Json(_)) {
        2
    } else if e.is_capacity() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bounds(a) => bounds(a),
        Command::Pmf(a) => pmf(a),
        Command::Ric(a) => ric(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
