//! Command-line front end for the `conan` binary.
//!
//! Exit codes: 0 on success, 1 for bad input or usage, 2 when a solver
//! fails numerically.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use conan_core::bench::{
    bound_sweep, convergence_experiment, runtime_scaling, synthetic_conformer, RateReport,
    RuntimeReport,
};
use conan_core::io::{
    graph_to_json, read_graph_json, read_graph_parts, read_molecule_json, read_xyz,
    write_csv_atomic, write_report_json,
};
use conan_core::{
    barycenter, conan_forward, entropic_fgw, validate_graph, AttributedGraph, BarycenterOptions,
    EncoderConfig, EncoderWeights, Error, FgwParams, LossKind,
};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "conan", version, about = "FGW distances, barycenters and conformer aggregation")]
struct Cli {
    /// Worker threads (default: all cores). FGW_THREADS overrides.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Entropic FGW distance and barycenters.
    #[command(subcommand)]
    Fgw(FgwCmd),
    /// Forward pass of the conformer aggregation network.
    #[command(subcommand)]
    Conan(ConanCmd),
    /// Seeded experiments.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Check a graph, molecule or XYZ file.
    Validate(ValidateArgs),
}

#[derive(Subcommand, Debug)]
enum FgwCmd {
    Dist(DistArgs),
    Barycenter(BaryArgs),
}

#[derive(Subcommand, Debug)]
enum ConanCmd {
    Forward(ForwardArgs),
}

#[derive(Subcommand, Debug)]
enum BenchCmd {
    Convergence(ConvergenceArgs),
    Runtime(RuntimeArgs),
    Bound(BoundArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// `square` (alias `l2`) or `kl`.
    #[arg(long, default_value = "square")]
    loss: String,
    #[arg(long, default_value_t = 30)]
    inner_iters: usize,
    #[arg(long, default_value_t = 50)]
    sinkhorn_iters: usize,
    #[arg(long, default_value_t = 10)]
    outer_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl SolverArgs {
    fn params(&self) -> Result<FgwParams, CliError> {
        let loss: LossKind = self.loss.parse().map_err(CliError::Core)?;
        let p = FgwParams {
            alpha: self.alpha,
            epsilon: self.epsilon,
            p: self.p,
            loss,
            inner_iters: self.inner_iters,
            sinkhorn_iters: self.sinkhorn_iters,
            outer_iters: self.outer_iters,
            tol: self.tol,
            ..FgwParams::default()
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct DistArgs {
    #[arg(long)]
    g1: Option<PathBuf>,
    #[arg(long)]
    g2: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Include the transport plan in the output.
    #[arg(long)]
    emit_coupling: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaryArgs {
    /// Input graph files (space- or comma-separated).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    graphs: Vec<PathBuf>,
    #[arg(long)]
    n_bar: Option<usize>,
    /// Input weights, comma-separated; default uniform.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Keep the KL barycenter's diagonal as computed.
    #[arg(long)]
    keep_kl_diagonal: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    emit_couplings: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[arg(long)]
    graph2d: Option<PathBuf>,
    #[arg(long)]
    conformers: Option<PathBuf>,
    /// Use the first K frames.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Hidden width.
    #[arg(long, default_value_t = 16)]
    d: usize,
    /// Interaction blocks and attention layers.
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 10.0)]
    cutoff: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    /// Atoms in the synthetic base conformer.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Use the first frame of this XYZ file as the base conformer instead.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// K runs over powers of two from 2 up to kmax.
    #[arg(long, default_value_t = 32)]
    kmax: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RuntimeArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    kvalues: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Coordinate noise between the two conformers of a pair (Å).
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    molecule: Option<PathBuf>,
    #[arg(long)]
    xyz: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Invalid(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        let raw = match self {
            CliError::Usage(m) | CliError::Invalid(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        };
        raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ")
    }
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    match std::env::var("FGW_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Usage(format!("FGW_THREADS = {v:?} is not a positive integer"))),
        _ => match flag {
            Some(0) => Err(CliError::Usage("--threads must be ≥ 1".into())),
            other => Ok(other),
        },
    }
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code. Diagnostics go to `stderr` as a single line.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            let _ = writeln!(stderr, "{}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match execute(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    let code = pool.install(|| dispatch(cli.cmd, &mut buf))?;
    stdout.write_all(&buf).map_err(Error::from)?;
    Ok(code)
}

fn dispatch(cmd: Cmd, stdout: &mut Vec<u8>) -> Result<i32, CliError> {
    match cmd {
        Cmd::Fgw(FgwCmd::Dist(a)) => fgw_dist(a, stdout),
        Cmd::Fgw(FgwCmd::Barycenter(a)) => fgw_barycenter(a, stdout),
        Cmd::Conan(ConanCmd::Forward(a)) => forward(a, stdout),
        Cmd::Bench(BenchCmd::Convergence(a)) => bench_convergence(a, stdout),
        Cmd::Bench(BenchCmd::Runtime(a)) => bench_runtime(a, stdout),
        Cmd::Bench(BenchCmd::Bound(a)) => bench_bound(a, stdout),
        Cmd::Validate(a) => validate(a, stdout),
    }
}

fn emit(value: &Value, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(p) => write_report_json(p, value)?,
        None => {
            let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
            writeln!(stdout, "{text}").map_err(Error::from)?;
        }
    }
    Ok(())
}

fn csv_mirror(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

fn matrix_json(m: ndarray::ArrayView2<'_, f64>) -> Value {
    json!(m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn fgw_dist(a: DistArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let g1 = read_graph_json(required(&a.g1, "g1")?)?;
    let g2 = read_graph_json(required(&a.g2, "g2")?)?;
    let params = a.solver.params()?;
    let r = entropic_fgw(&g1, &g2, &params)?;
    let mut v = json!({
        "cost": r.cost,
        "value_entropic": r.value_entropic,
        "inner_iterations": r.inner_iterations,
        "converged": r.converged,
        "marginal_err": r.marginal_err,
        "alpha": params.alpha,
        "epsilon": params.epsilon,
    });
    if a.emit_coupling {
        v["coupling"] = matrix_json(r.coupling.pi.view());
    }
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn fgw_barycenter(a: BaryArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if a.graphs.is_empty() {
        return Err(CliError::Usage("missing required flag --graphs".into()));
    }
    let graphs: Vec<AttributedGraph> = a.graphs.iter().map(read_graph_json).collect::<Result<_, _>>()?;
    let params = a.solver.params()?;
    let opts = BarycenterOptions {
        n_bar: a.n_bar,
        omega_bar: None,
        lambdas: a.lambdas.clone(),
        zero_kl_diagonal: !a.keep_kl_diagonal,
    };
    let r = barycenter(&graphs, &opts, &params)?;
    let mut v = json!({
        "graph": graph_to_json(&r.graph),
        "outer_iterations": r.outer_iterations,
        "converged": r.converged,
        "objective_trace": r.objective_trace,
    });
    if a.emit_couplings {
        v["couplings"] = json!(r.couplings.iter().map(|c| matrix_json(c.pi.view())).collect::<Vec<_>>());
    }
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn forward(a: ForwardArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mol = read_molecule_json(required(&a.graph2d, "graph2d")?)?;
    let mut confs = read_xyz(required(&a.conformers, "conformers")?)?;
    let seed = *required(&a.seed, "seed")?;
    if let Some(k) = a.k {
        if k == 0 || k > confs.len() {
            return Err(CliError::Invalid(format!(
                "--k {k} outside 1..={} (frames in the XYZ file)",
                confs.len()
            )));
        }
        confs.truncate(k);
    }
    let config = EncoderConfig {
        d: a.d,
        layers: a.layers,
        gat_layers: a.layers,
        d0: mol.node_features().ncols(),
        edge_dim: mol.edge_features().map_or(0, |e| e.ncols()),
        cutoff: a.cutoff,
        ..EncoderConfig::default()
    };
    if config.d == 0 {
        return Err(CliError::Invalid("--d must be ≥ 1".into()));
    }
    let enc = EncoderWeights::from_seed(seed, &config);
    let params = FgwParams {
        alpha: a.alpha,
        epsilon: a.epsilon,
        ..FgwParams::default()
    };
    params.validate()?;
    let r = conan_forward(&mol, &confs, &enc, &params)?;
    let h3d: Vec<Vec<f64>> = r.h3d_per_conf.columns().into_iter().map(|c| c.to_vec()).collect();
    let v = json!({
        "y_hat": r.y_hat,
        "h2d": r.h2d.to_vec(),
        "h3d": h3d,
        "h_bc": r.h_bc.to_vec(),
        "barycenter_summary": {
            "n": r.barycenter.graph.n(),
            "outer_iterations": r.barycenter.outer_iterations,
            "converged": r.barycenter.converged,
            "objective_trace": r.barycenter.objective_trace,
        },
        "k": confs.len(),
        "seed": seed,
    });
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn powers_of_two(kmax: usize) -> Vec<usize> {
    std::iter::successors(Some(2usize), |k| k.checked_mul(2)).take_while(|&k| k <= kmax).collect()
}

fn bench_convergence(a: ConvergenceArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let base = match &a.base {
        Some(p) => read_xyz(p)?.swap_remove(0),
        None => synthetic_conformer(a.n, a.seed)?,
    };
    let ks = powers_of_two(a.kmax);
    let params = a.solver.params()?;
    let enc = EncoderWeights::from_seed(a.seed, &EncoderConfig::default());
    let r: RateReport = convergence_experiment(&base, a.sigma, &ks, a.trials, &enc, &params, a.seed)?;
    let v = serde_json::to_value(&r).map_err(Error::from)?;
    if let Some(out) = &a.out {
        let rows: Vec<Vec<String>> = r
            .k_values
            .iter()
            .zip(&r.mean_sq_fgw)
            .map(|(k, m)| vec![k.to_string(), m.to_string()])
            .collect();
        write_csv_atomic(csv_mirror(out), &["k", "mean_sq_fgw"], &rows)?;
    }
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn bench_runtime(a: RuntimeArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let params = a.solver.params()?;
    let r: RuntimeReport = runtime_scaling(&a.kvalues, a.n, a.d, a.repeats, &params, 0)?;
    let v = serde_json::to_value(&r).map_err(Error::from)?;
    if let Some(out) = &a.out {
        let rows: Vec<Vec<String>> = r
            .k_values
            .iter()
            .zip(&r.mean_seconds)
            .map(|(k, s)| vec![k.to_string(), s.to_string()])
            .collect();
        write_csv_atomic(csv_mirror(out), &["k", "mean_seconds"], &rows)?;
    }
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn bench_bound(a: BoundArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let enc = EncoderWeights::from_seed(a.seed, &EncoderConfig::default());
    let r = bound_sweep(a.pairs, a.seed, a.alpha, a.epsilon, a.sigma, &enc)?;
    let v = serde_json::to_value(&r).map_err(Error::from)?;
    if let Some(out) = &a.out {
        let rows: Vec<Vec<String>> = r
            .pairs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    i.to_string(),
                    c.fgw_cost.to_string(),
                    c.w_bound.to_string(),
                    c.separable_bound.to_string(),
                    c.holds.to_string(),
                ]
            })
            .collect();
        write_csv_atomic(csv_mirror(out), &["pair", "fgw_cost", "w_bound", "separable_bound", "holds"], &rows)?;
    }
    emit(&v, a.out.as_deref(), stdout)?;
    Ok(0)
}

fn validate(a: ValidateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut lines = Vec::new();
    let mut failed = false;
    if let Some(p) = &a.graph {
        let (h, a_mat, omega) = read_graph_parts(p)?;
        let n = h.nrows();
        let omega = omega.unwrap_or_else(|| conan_core::graph::uniform(n));
        let report = validate_graph(&AttributedGraph::new_unchecked(h, a_mat, omega));
        if !report.is_pass() {
            return Err(CliError::Invalid(format!("{}: {report}", p.display())));
        }
        lines.push(format!("{}: pass", p.display()));
    }
    if let Some(p) = &a.molecule {
        let m = read_molecule_json(p)?;
        lines.push(format!("{}: pass ({} atoms, {} bonds)", p.display(), m.n(), m.edges().len()));
    }
    if let Some(p) = &a.xyz {
        let c = read_xyz(p)?;
        lines.push(format!("{}: pass ({} frames, {} atoms)", p.display(), c.len(), c[0].n()));
    }
    if lines.is_empty() {
        failed = true;
    }
    if failed {
        return Err(CliError::Usage("missing required flag --graph (or --molecule / --xyz)".into()));
    }
    for l in lines {
        writeln!(stdout, "{l}").map_err(Error::from)?;
    }
    Ok(0)
}
