//! The `nqs` command line: experiment runs, sweeps and analysis of results.

pub mod config;
pub mod results;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::ansatz::{AnsatzState, Architecture};
use crate::flops::{simplified_flops, training_flops, FlopInputs};
use crate::oracle::{ground_energy, OracleError};
use crate::pauli::{group_flip_patterns, parse_hamiltonian, PauliHamiltonian};
use crate::scaling::{
    constrained_minimum, efficient_frontier, fit_curve, optimal_allocation, DataPoint, FitReport, Metric,
    ScalingCurve, ScalingError,
};
use crate::vmc::{train, RunStatus};
use config::{ConfigError, RunFile, RunSpec, SweepFile};
use results::{append_rows, merge_staged, read_rows, stage_row, ResultRow, ResultsError, RESULTS_FILE};

/// Minimum number of usable rows for a fit.
pub const MIN_FIT_ROWS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Results(#[from] ResultsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Runtime(_) | CliError::Results(_) => 2,
        }
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn parse_architecture(s: &str) -> Result<Architecture, String> {
    Architecture::parse(s).ok_or_else(|| format!("unknown ansatz {s:?} (expected made, transformer or retnet)"))
}

#[derive(Debug, Parser)]
#[command(name = "nqs", version, about = "Neural quantum state training and scaling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration and append its row to the results table.
    Run(RunArgs),
    /// Train every point of a sweep grid.
    Sweep(SweepArgs),
    /// Fit the parametric loss curve to a results table.
    Fit(FitArgs),
    /// Compute-optimal frontier and allocation for a fitted curve.
    Frontier(FrontierArgs),
    /// Bin results on a log grid over model size and scaled iterations.
    Heatmap(HeatmapArgs),
    /// Exact ground energy of a Hamiltonian file.
    Exact(ExactArgs),
    /// Evaluate the FLOP estimators.
    Flops(FlopsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_architecture)]
    pub ansatz: Option<Architecture>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run only this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run only this architecture.
    #[arg(long, value_parser = parse_architecture)]
    pub ansatz: Option<Architecture>,
    /// Skip grid points already completed in the results table.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Results CSV.
    pub results: PathBuf,
    #[arg(long)]
    pub metric: Metric,
    /// Fit only rows of this architecture; all rows are pooled otherwise.
    #[arg(long, value_parser = parse_architecture)]
    pub ansatz: Option<Architecture>,
    /// Where to write the curve document.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Curve document written by `fit`.
    pub curve: PathBuf,
    /// Compute budget C.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Cost coefficient k in C = k N D'.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    pub results: PathBuf,
    #[arg(long)]
    pub metric: Metric,
    #[arg(long, value_parser = parse_architecture)]
    pub ansatz: Option<Architecture>,
    /// Grid CSV path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub bins_per_decade: u32,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    pub hamiltonian: PathBuf,
    /// Write a copy of the Hamiltonian with the computed `%fci` header.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlopsArgs {
    #[arg(long, value_parser = parse_architecture)]
    pub ansatz: Architecture,
    /// Take n, M, parameter counts and model shape from a run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_qubits: Option<f64>,
    /// Unique batch size B.
    #[arg(long)]
    pub batch: Option<f64>,
    #[arg(long)]
    pub steps: Option<f64>,
    /// Flip-group count M.
    #[arg(long)]
    pub groups: Option<f64>,
    #[arg(long)]
    pub n_mod: Option<f64>,
    #[arg(long)]
    pub n_ph: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub blocks: f64,
    #[arg(long, default_value_t = 16.0)]
    pub d_model: f64,
    /// Search-space size S, for the simplified estimate.
    #[arg(long)]
    pub search_space: Option<f64>,
    /// Scaled iterations D', for the simplified estimate.
    #[arg(long)]
    pub d_prime: Option<f64>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Run(a) => {
            let row = cmd_run(&a)?;
            println!("{}", describe_row(&row));
            Ok(if row.status() == Some(RunStatus::Ok) { 0 } else { 2 })
        }
        Command::Sweep(a) => {
            let s = cmd_sweep(&a)?;
            println!(
                "sweep: {} runs executed ({} ok, {} diverged, {} failed), {} skipped",
                s.executed, s.ok, s.diverged, s.failed, s.skipped
            );
            Ok(0)
        }
        Command::Fit(a) => {
            let rows = read_rows(&a.results)?;
            let (report, skipped) = cmd_fit(&rows, a.metric, a.ansatz, a.seed)?;
            if skipped > 0 {
                println!("skipped {skipped} rows without a usable {} value", a.metric);
            }
            for w in &report.warnings {
                println!("warning: {w}");
            }
            print!("{}", curve_table(std::slice::from_ref(&report.curve)));
            println!("objective {:.6e}, {} values clamped to the metric floor", report.objective, report.clamped);
            let doc = report.curve.to_toml();
            match &a.out {
                Some(p) => write_file(p, &doc)?,
                None => print!("{doc}"),
            }
            Ok(0)
        }
        Command::Frontier(a) => {
            let text = fs::read_to_string(&a.curve).map_err(|e| CliError::Validation(format!("{}: {e}", a.curve.display())))?;
            let curve = ScalingCurve::from_toml(&text)?;
            print!("{}", cmd_frontier(&curve, a.budget, a.k)?);
            Ok(0)
        }
        Command::Heatmap(a) => {
            let rows = read_rows(&a.results)?;
            let cells = cmd_heatmap(&rows, a.metric, a.ansatz, a.bins_per_decade)?;
            let csv = heatmap_csv(&cells);
            match &a.out {
                Some(p) => write_file(p, &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::Exact(a) => {
            let (h, energy) = cmd_exact(&a.hamiltonian)?;
            println!("ground energy {energy:.12}");
            if let Some(fci) = h.fci_energy() {
                println!("file %fci {fci:.12} (difference {:.3e})", energy - fci);
            }
            println!("suggested header: %fci {energy:.12}");
            if let Some(p) = &a.out {
                write_file(p, &h.with_fci_energy(Some(energy)).to_text())?;
            }
            Ok(0)
        }
        Command::Flops(a) => {
            print!("{}", cmd_flops(&a)?);
            Ok(0)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn describe_row(r: &ResultRow) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
    format!(
        "{} {} {} T={} status={} energy={} abs_error={} vscore={}",
        r.config_hash,
        r.ansatz,
        r.molecule,
        r.steps,
        r.status,
        r.energy.map_or_else(|| "-".into(), |e| format!("{e:.10}")),
        opt(r.abs_error),
        opt(r.vscore),
    )
}

fn load_hamiltonian(path: &Path) -> Result<(String, PauliHamiltonian), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("hamiltonian file {}: {e}", path.display())))?;
    let h = parse_hamiltonian(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((text, h))
}

/// Trains one spec; failures become a `failed` row rather than an error.
fn execute_spec(spec: &RunSpec, h: &PauliHamiltonian, hash: &str, checkpoints: Option<&Path>) -> ResultRow {
    let ansatz = spec.ansatz.to_config(h.n_qubits(), spec.train.seed);
    match train(h, &ansatz, &spec.train.to_config()) {
        Ok(outcome) => {
            if let Some(dir) = checkpoints {
                let path = dir.join(format!("{hash}.ckpt"));
                let written = fs::create_dir_all(dir)
                    .and_then(|_| fs::File::create(&path))
                    .and_then(|f| outcome.state.params().write_checkpoint(std::io::BufWriter::new(f)));
                if let Err(e) = written {
                    log::warn!("checkpoint {}: {e}", path.display());
                }
            }
            ResultRow::from_record(hash, &spec.molecule, &outcome.record)
        }
        Err(e) => {
            log::error!("run {hash} failed: {e}");
            ResultRow::failed(
                hash,
                spec.ansatz.architecture.name(),
                &spec.molecule,
                h.n_qubits(),
                h.n_electrons(),
                spec.train.steps,
                spec.train.max_unique,
                spec.train.seed,
            )
        }
    }
}

/// Runs one configuration and appends its row to `<out>/results.csv`.
pub fn cmd_run(args: &RunArgs) -> Result<ResultRow, CliError> {
    let mut file = RunFile::load(&args.config)?;
    if let Some(out) = &args.out {
        file.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        file.train.seed = seed;
    }
    if let Some(arch) = args.ansatz {
        file.ansatz.architecture = arch;
    }
    let spec = file.spec();
    let (text, h) = load_hamiltonian(&spec.hamiltonian)?;
    let hash = spec.config_hash(&text);
    let ckpt = file.output.checkpoints.then(|| file.output.dir.join("checkpoints"));
    let row = execute_spec(&spec, &h, &hash, ckpt.as_deref());
    append_rows(&file.output.dir.join(RESULTS_FILE), std::slice::from_ref(&row))?;
    Ok(row)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepSummary {
    pub executed: usize,
    pub skipped: usize,
    pub ok: usize,
    pub diverged: usize,
    pub failed: usize,
}

/// Runs a sweep grid. Each finished run is first written to its own staging
/// file; staged rows are merged into the results table in grid order.
pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepSummary, CliError> {
    let mut file = SweepFile::load(&args.config)?;
    if let Some(out) = &args.out {
        file.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        file.sweep.seeds = vec![seed];
    }
    if let Some(arch) = args.ansatz {
        file.sweep.architectures.retain(|a| *a == arch);
        if file.sweep.architectures.is_empty() {
            return Err(CliError::Validation(format!("sweep.architectures does not include {arch}")));
        }
    }
    if args.workers == 0 {
        return Err(CliError::Validation("--workers must be positive".into()));
    }
    let out = file.output.dir.clone();
    let mut hamiltonians: BTreeMap<PathBuf, (String, PauliHamiltonian)> = BTreeMap::new();
    for path in &file.sweep.hamiltonians {
        hamiltonians.insert(path.clone(), load_hamiltonian(path)?);
    }
    let grid: Vec<(RunSpec, String)> = file
        .grid()
        .into_iter()
        .map(|s| {
            let hash = s.config_hash(&hamiltonians[&s.hamiltonian].0);
            (s, hash)
        })
        .collect();
    let order: Vec<String> = grid.iter().map(|(_, h)| h.clone()).collect();

    // rows staged by an interrupted sweep belong to the table
    merge_staged(&out, &order)?;
    let results_path = out.join(RESULTS_FILE);
    let done: HashSet<String> = if args.resume && results_path.exists() {
        read_rows(&results_path)?.into_iter().filter(ResultRow::is_complete).map(|r| r.config_hash).collect()
    } else {
        HashSet::new()
    };
    let mut seen = HashSet::new();
    let pending: Vec<&(RunSpec, String)> =
        grid.iter().filter(|(_, h)| !done.contains(h) && seen.insert(h.clone())).collect();
    let mut summary = SweepSummary { skipped: grid.len() - pending.len(), ..Default::default() };

    let ckpt = file.output.checkpoints.then(|| out.join("checkpoints"));
    let merge_lock = Mutex::new(());
    let run_one = |(spec, hash): &(RunSpec, String)| -> Result<ResultRow, CliError> {
        log::info!("running {hash}: {} {}", spec.ansatz.architecture, spec.molecule);
        let row = execute_spec(spec, &hamiltonians[&spec.hamiltonian].1, hash, ckpt.as_deref());
        stage_row(&out, &row)?;
        if args.workers == 1 {
            let _guard = merge_lock.lock().unwrap_or_else(|p| p.into_inner());
            merge_staged(&out, &order)?;
        }
        Ok(row)
    };
    let rows: Vec<Result<ResultRow, CliError>> = if args.workers == 1 {
        pending.iter().map(|p| run_one(p)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        pool.install(|| pending.par_iter().map(|p| run_one(p)).collect())
    };
    merge_staged(&out, &order)?;
    for row in rows {
        let row = row?;
        summary.executed += 1;
        match row.status() {
            Some(RunStatus::Ok) => summary.ok += 1,
            Some(RunStatus::Diverged) => summary.diverged += 1,
            _ => summary.failed += 1,
        }
    }
    Ok(summary)
}

fn metric_value(row: &ResultRow, metric: Metric) -> Option<f64> {
    match metric {
        Metric::VScore => row.vscore,
        Metric::AbsError => row.abs_error,
    }
}

/// Usable `(N, D', value)` points of completed rows, and the number of rows
/// skipped for lacking them.
pub fn data_points(rows: &[ResultRow], metric: Metric, ansatz: Option<Architecture>) -> (Vec<DataPoint>, usize) {
    let selected = rows.iter().filter(|r| ansatz.is_none_or(|a| r.ansatz == a.name()));
    let mut points = Vec::new();
    let mut skipped = 0;
    for r in selected {
        let usable = r.status() == Some(RunStatus::Ok);
        match (usable, r.n_k, r.d_prime, metric_value(r, metric)) {
            (true, Some(n), Some(d), Some(v)) if n > 0.0 && d > 0.0 && v.is_finite() && v >= 0.0 => {
                points.push(DataPoint { n_k: n, d_prime: d, value: v, flops: r.flops_simplified.unwrap_or(0.0) })
            }
            _ => skipped += 1,
        }
    }
    (points, skipped)
}

/// Fits one curve to the selected rows; without a filter all
/// architectures are pooled under the tag `all`.
pub fn cmd_fit(
    rows: &[ResultRow],
    metric: Metric,
    ansatz: Option<Architecture>,
    seed: u64,
) -> Result<(FitReport, usize), CliError> {
    let (points, skipped) = data_points(rows, metric, ansatz);
    if points.len() < MIN_FIT_ROWS {
        return Err(CliError::Validation(format!(
            "insufficient data: {} usable rows, {MIN_FIT_ROWS} required",
            points.len()
        )));
    }
    let tag = ansatz.map_or("all", Architecture::name);
    Ok((fit_curve(&points, metric, tag, seed)?, skipped))
}

/// Curves in the layout `metric | A0 A1 A2 alpha1 alpha2 Log-R2`.
pub fn curve_table(curves: &[ScalingCurve]) -> String {
    let mut s = String::new();
    let mut last: Option<Metric> = None;
    for c in curves {
        if last != Some(c.metric) {
            let _ = writeln!(
                s,
                "{:<12} {:>10} {:>10} {:>10} {:>8} {:>8} {:>7}",
                c.metric, "A0", "A1", "A2", "alpha1", "alpha2", "Log-R2"
            );
            last = Some(c.metric);
        }
        let _ = writeln!(
            s,
            "{:<12} {:>10.3e} {:>10.3e} {:>10.3e} {:>8.3} {:>8.3} {:>7.2}",
            c.ansatz, c.a0, c.a1, c.a2, c.alpha1, c.alpha2, c.r2_log
        );
    }
    s
}

pub fn cmd_frontier(curve: &ScalingCurve, budget: Option<f64>, k: f64) -> Result<String, CliError> {
    let f = efficient_frontier(curve)?;
    let mut s = String::new();
    let _ = writeln!(s, "{} {}: D' = {:.3} x N^{:.3}", curve.ansatz, curve.metric, f.coefficient, f.exponent);
    if let Some(c) = budget {
        let (n, d) = optimal_allocation(curve, c, k)?;
        let _ = writeln!(s, "frontier allocation at C = {c:e}, k = {k:e}: N* = {n:.6e}, D'* = {d:.6e}, k N* D'* = {:.6e}", k * n * d);
        let (n_min, d_min) = constrained_minimum(curve, c, k)?;
        let _ = writeln!(
            s,
            "loss-minimizing allocation: N = {n_min:.6e}, D' = {d_min:.6e}, predicted {:.6e} (frontier {:.6e})",
            curve.predict(n_min, d_min),
            curve.predict(n, d)
        );
    }
    Ok(s)
}

/// One populated heatmap cell; coordinates are lower bin edges in log10.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatCell {
    pub log10_n: f64,
    pub log10_d_prime: f64,
    /// Geometric mean of the floored metric values in the cell.
    pub value: f64,
    pub count: usize,
}

pub fn cmd_heatmap(
    rows: &[ResultRow],
    metric: Metric,
    ansatz: Option<Architecture>,
    bins_per_decade: u32,
) -> Result<Vec<HeatCell>, CliError> {
    if bins_per_decade == 0 {
        return Err(CliError::Validation("--bins-per-decade must be positive".into()));
    }
    let (points, skipped) = data_points(rows, metric, ansatz);
    if skipped > 0 {
        log::info!("heatmap skipped {skipped} rows");
    }
    let bpd = bins_per_decade as f64;
    let mut cells: BTreeMap<(i64, i64), (f64, usize)> = BTreeMap::new();
    for p in &points {
        let key = ((p.n_k.log10() * bpd).floor() as i64, (p.d_prime.log10() * bpd).floor() as i64);
        let e = cells.entry(key).or_insert((0.0, 0));
        e.0 += p.value.max(metric.floor()).log10();
        e.1 += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((i, j), (sum, count))| HeatCell {
            log10_n: i as f64 / bpd,
            log10_d_prime: j as f64 / bpd,
            value: 10f64.powf(sum / count as f64),
            count,
        })
        .collect())
}

pub fn heatmap_csv(cells: &[HeatCell]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["log10_n", "log10_d_prime", "metric", "count"]);
    for c in cells {
        let _ = w.write_record([
            c.log10_n.to_string(),
            c.log10_d_prime.to_string(),
            format!("{:e}", c.value),
            c.count.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Exact ground energy within the file's particle sector.
pub fn cmd_exact(path: &Path) -> Result<(PauliHamiltonian, f64), CliError> {
    let (_, h) = load_hamiltonian(path)?;
    match ground_energy(&h) {
        Ok(e) => Ok((h, e)),
        Err(e @ OracleError::TooLarge { .. }) => Err(CliError::Validation(e.to_string())),
        Err(e) => Err(CliError::Runtime(e.to_string())),
    }
}

pub fn cmd_flops(a: &FlopsArgs) -> Result<String, CliError> {
    let missing = |name: &str| CliError::Validation(format!("--{name} is required without --config"));
    let mut inputs = FlopInputs {
        n_qubits: a.n_qubits.unwrap_or(0.0),
        batch: a.batch.unwrap_or(0.0),
        steps: a.steps.unwrap_or(0.0),
        flip_groups: a.groups.unwrap_or(0.0),
        n_mod: a.n_mod.unwrap_or(0.0),
        n_ph: a.n_ph.unwrap_or(0.0),
        n_blocks: a.blocks,
        d_model: a.d_model,
    };
    let mut search_space = a.search_space;
    if let Some(path) = &a.config {
        let mut file = RunFile::load(path)?;
        file.ansatz.architecture = a.ansatz;
        let (_, h) = load_hamiltonian(&file.run.hamiltonian)?;
        let cfg = file.ansatz.to_config(h.n_qubits(), file.train.seed).with_sector(h.sector());
        let state = AnsatzState::new(cfg.clone()).map_err(|e| CliError::Validation(e.to_string()))?;
        inputs.n_qubits = a.n_qubits.unwrap_or(h.n_qubits() as f64);
        inputs.flip_groups = a.groups.unwrap_or(group_flip_patterns(&h).count() as f64);
        inputs.n_mod = a.n_mod.unwrap_or(state.params().modulus_count() as f64);
        inputs.n_ph = a.n_ph.unwrap_or(state.params().phase_count() as f64);
        inputs.n_blocks = cfg.n_blocks as f64;
        inputs.d_model = cfg.d_model as f64;
        inputs.batch = a.batch.unwrap_or(file.train.max_unique as f64);
        inputs.steps = a.steps.unwrap_or(file.train.steps as f64);
        if search_space.is_none() {
            search_space = h.search_space_size().ok().map(|s| s as f64);
        }
    } else {
        for (v, name) in [
            (a.n_qubits, "n-qubits"),
            (a.batch, "batch"),
            (a.steps, "steps"),
            (a.groups, "groups"),
            (a.n_mod, "n-mod"),
            (a.n_ph, "n-ph"),
        ] {
            v.ok_or_else(|| missing(name))?;
        }
    }
    for (v, name) in [(inputs.n_qubits, "n-qubits"), (inputs.batch, "batch"), (inputs.steps, "steps")] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Validation(format!("--{name} must be positive")));
        }
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} n={} B={} T={} M={} N_mod={} N_ph={}: training FLOPs {:.6e}",
        a.ansatz,
        inputs.n_qubits,
        inputs.batch,
        inputs.steps,
        inputs.flip_groups,
        inputs.n_mod,
        inputs.n_ph,
        training_flops(a.ansatz, &inputs)
    );
    if let (Some(space), Some(d)) = (search_space, a.d_prime) {
        let n_raw = inputs.n_mod + inputs.n_ph;
        let simplified = simplified_flops(a.ansatz, inputs.flip_groups, inputs.n_qubits, inputs.d_model, space, d, n_raw);
        let _ = writeln!(s, "simplified estimate (S={space}, D'={d}, N={n_raw}): {simplified:.6e}");
    }
    Ok(s)
}
