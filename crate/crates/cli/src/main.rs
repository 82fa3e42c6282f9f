//! Command-line front end: solve, verify, generate, compare.
//!
//! Exit codes: 0 success (and all checks passed), 2 solver stopped without
//! converging (breakdown, iteration cap, or a nonexistent reference
//! iterate), 3 verification failure, 64 usage error, 66 unreadable or
//! malformed input, 73 output could not be written.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use skrylov::{
    cgne_general, cgne_skew, cgnr_general, cgnr_skew, check_equivalence, check_orthogonality,
    check_projection, compare_methods, galerkin_reference, minres_reference, precondition,
    scaled_tolerance, verify_skew, CheckRecord, GalerkinIterate, Instance, IterationRow,
    PrecondSide, Rng, RunReport, SolveResult, SolverConfig, Termination, Vector,
};

use skrylov_cli::matrix_market::{self, write_matrix_market, LoadedMatrix};
use skrylov_cli::problem::{generate_matrix, resolve_instance, GeneratorSpec, RhsSpec};
use skrylov_cli::report::{write_csv, write_report, ReportFile};
use skrylov_cli::CliError;

const EXIT_INCOMPLETE: i32 = 2;
const EXIT_VERIFY_FAILED: i32 = 3;
const EXIT_USAGE: i32 = 64;

fn core_err(e: skrylov::Error) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "skrylov",
    version,
    about = "Krylov solvers for skew-symmetric systems and a verification harness for their equivalence properties"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one system with a chosen method.
    Solve(SolveArgs),
    /// Run the orthogonality, equivalence, and projection checks.
    Verify(VerifyArgs),
    /// Write a random skew-symmetric instance as a Matrix Market file.
    Generate(GenerateArgs),
    /// Run all methods side by side and tabulate their convergence.
    Compare(CompareArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Matrix Market file holding the system matrix.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Generated instance, as n,density,seed.
    #[arg(long)]
    random: Option<GeneratorSpec>,
    /// Right-hand side: 'ones', 'random:SEED', or a vector file
    /// (defaults to ones for files, to a seed-derived vector for --random).
    #[arg(long)]
    rhs: Option<RhsSpec>,
}

impl InstanceArgs {
    /// Resolves the instance and builds the config block recording the
    /// effective inputs, including any comments the matrix file carried.
    fn resolve(&self) -> Result<(Instance, BTreeMap<String, serde_json::Value>), CliError> {
        let resolved = resolve_instance(self.matrix.as_deref(), self.random, self.rhs.as_ref())?;
        let mut config = BTreeMap::new();
        if let Some(path) = &self.matrix {
            config.insert("matrix".into(), json!(path.display().to_string()));
        }
        if let Some(spec) = &self.random {
            config.insert(
                "random".into(),
                json!(format!("{},{},{}", spec.n, spec.density, spec.seed)),
            );
        }
        if let Some(rhs) = &self.rhs {
            config.insert("rhs".into(), json!(format!("{rhs:?}")));
        }
        if !resolved.comments.is_empty() {
            config.insert("matrix_comments".into(), json!(resolved.comments));
        }
        Ok((resolved.instance, config))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Cgne,
    Cgnr,
    Galerkin,
    Minres,
}

/// Left preconditioner specification: `none`, `randdiag:SEED`, `diag:FILE`.
#[derive(Debug, Clone)]
enum PrecondSpec {
    None,
    RandDiag { seed: u64 },
    DiagFile(PathBuf),
}

impl FromStr for PrecondSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "none" {
            return Ok(PrecondSpec::None);
        }
        if let Some(seed) = s.strip_prefix("randdiag:") {
            let seed = seed
                .parse()
                .map_err(|_| format!("bad preconditioner seed '{seed}'"))?;
            return Ok(PrecondSpec::RandDiag { seed });
        }
        if let Some(path) = s.strip_prefix("diag:") {
            return Ok(PrecondSpec::DiagFile(PathBuf::from(path)));
        }
        Err(format!(
            "unknown preconditioner '{s}' (none, randdiag:SEED, diag:FILE)"
        ))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    method: Method,
    /// Subspace dimension for the galerkin and minres reference methods.
    #[arg(long)]
    m: Option<usize>,
    /// Relative residual stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    /// Iteration cap (defaults to the dimension).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Left preconditioner for cgne/cgnr: none, randdiag:SEED, diag:FILE.
    #[arg(long, default_value = "none")]
    precond: PrecondSpec,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV iteration-history path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Largest normal-equation iteration index checked.
    #[arg(long, default_value_t = 4)]
    qmax: usize,
    /// One tolerance for every check; default is per-family
    /// (1e-8 equalities, 1e-10 identities) scaled by conditioning.
    #[arg(long)]
    tol: Option<f64>,
    /// Random trial vectors per projection check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Seed for the projection-check trial draws.
    #[arg(long, default_value_t = 1)]
    check_seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Dimension (must be even).
    #[arg(long)]
    n: usize,
    /// Strict-upper fill probability in (0, 1].
    #[arg(long)]
    density: f64,
    #[arg(long)]
    seed: u64,
    /// Output Matrix Market path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("skrylov: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Verify(args) => run_verify(args),
        Command::Generate(args) => run_generate(args),
        Command::Compare(args) => run_compare(args),
    }
}

fn rows_from_solve(result: &SolveResult) -> Vec<IterationRow> {
    let mut rows = vec![IterationRow {
        method: result.method.to_string(),
        q: 0,
        res_norm: result.history.initial_residual,
        rec_res_norm: Some(result.history.initial_residual),
        err_norm: None,
        alpha: None,
        beta: None,
    }];
    for q in 1..=result.iterations {
        rows.push(IterationRow {
            method: result.method.to_string(),
            q,
            res_norm: result.history.true_residual_norms[q - 1],
            rec_res_norm: Some(result.history.recurrence_residual_norms[q - 1]),
            err_norm: None,
            alpha: Some(result.history.alphas[q - 1]),
            beta: result.history.betas.get(q - 1).copied(),
        });
    }
    rows
}

fn build_precond_side(
    spec: &PrecondSpec,
    n: usize,
) -> Result<Option<(PrecondSide, String)>, CliError> {
    match spec {
        PrecondSpec::None => Ok(None),
        PrecondSpec::RandDiag { seed } => {
            let mut rng = Rng::new(*seed);
            let d = Vector::from_fn(n, |_, _| rng.uniform(0.5, 1.5));
            let side = PrecondSide::diagonal(&d).map_err(core_err)?;
            Ok(Some((side, format!("randdiag:{seed}"))))
        }
        PrecondSpec::DiagFile(path) => {
            let d = matrix_market::read_vector(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            if d.len() != n {
                return Err(CliError::Input(format!(
                    "{}: diagonal has dimension {}, matrix has {n}",
                    path.display(),
                    d.len()
                )));
            }
            let side = PrecondSide::diagonal(&d).map_err(core_err)?;
            Ok(Some((side, format!("diag:{}", path.display()))))
        }
    }
}

/// The skew recurrences and reference methods rely on `A^t = -A`; gate the
/// resolved matrix through the sampled skew check before any of them runs.
fn enforce_skew_gate(
    instance: &Instance,
    config: &mut BTreeMap<String, serde_json::Value>,
) -> Result<(), CliError> {
    if !instance.operator().is_skew() {
        return Ok(());
    }
    let gate = verify_skew(instance.operator(), 10, 0x5eed, 1e-10);
    config.insert(
        "skew_gate_max_violation".into(),
        json!(gate.max_quadratic.max(gate.max_transpose)),
    );
    if gate.pass {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "matrix failed the skew gate (quadratic {:.3e}, transpose {:.3e})",
            gate.max_quadratic, gate.max_transpose
        )))
    }
}

fn run_solve(args: SolveArgs) -> Result<i32, CliError> {
    let (instance, mut config) = args.instance.resolve()?;
    let n = instance.descriptor.n;
    config.insert("rtol".into(), json!(args.rtol));
    enforce_skew_gate(&instance, &mut config)?;

    let (outcome, exit, x, rows, checks) = match args.method {
        Method::Galerkin | Method::Minres => {
            if !matches!(args.precond, PrecondSpec::None) {
                return Err(CliError::Usage(
                    "--precond is not supported for the reference methods".into(),
                ));
            }
            let m = args.m.ok_or_else(|| {
                CliError::Usage("--m is required for the galerkin and minres methods".into())
            })?;
            config.insert("m".into(), json!(m));
            if !instance.operator().is_skew() {
                return Err(CliError::Input(
                    "the reference methods need a skew-symmetric matrix".into(),
                ));
            }
            solve_reference(&instance, args.method, m)?
        }
        Method::Cgne | Method::Cgnr => {
            let mut solver_config = SolverConfig::new(n).with_rtol(args.rtol).with_history();
            if let Some(max_iter) = args.max_iter {
                solver_config = solver_config.with_max_iter(max_iter);
            } else if !matches!(args.precond, PrecondSpec::None) {
                // Preconditioning through the general recurrences loses the
                // paired-spectrum termination, so floating point routinely
                // needs more than n iterations.
                solver_config = solver_config.with_max_iter(10 * n);
            }
            config.insert("max_iter".into(), json!(solver_config.max_iter));
            solve_recurrence(
                &instance,
                args.method,
                &args.precond,
                &solver_config,
                &mut config,
            )?
        }
    };

    let b_norm = instance.rhs.norm();
    let rel_residual = if b_norm > 0.0 {
        (&instance.rhs - instance.operator().apply(&x)).norm() / b_norm
    } else {
        0.0
    };
    println!(
        "solve: n={n} method={} outcome={outcome} rel_residual={rel_residual:.3e}",
        method_name(args.method),
    );

    let report = ReportFile {
        command: "solve".into(),
        config,
        report: RunReport::new(instance.descriptor.clone(), checks, rows, vec![], 0),
        outcome: Some(outcome.clone()),
        solution: Some(x.iter().copied().collect()),
    };
    if let Some(path) = &args.out {
        write_report(&report, path)?;
    }
    if let Some(path) = &args.csv {
        write_csv(&report.report.iterations, path)?;
    }
    Ok(exit)
}

fn method_name(method: Method) -> &'static str {
    match method {
        Method::Cgne => "cgne",
        Method::Cgnr => "cgnr",
        Method::Galerkin => "galerkin",
        Method::Minres => "minres",
    }
}

type SolveOutcome = (String, i32, Vector, Vec<IterationRow>, Vec<CheckRecord>);

fn solve_reference(
    instance: &Instance,
    method: Method,
    m: usize,
) -> Result<SolveOutcome, CliError> {
    let a = instance.operator();
    let b = &instance.rhs;
    match method {
        Method::Galerkin => match galerkin_reference(a, b, m) {
            Ok(GalerkinIterate::Exists(x)) => {
                let rows = vec![IterationRow {
                    method: "galerkin_reference".into(),
                    q: m,
                    res_norm: (b - a.apply(&x)).norm(),
                    rec_res_norm: None,
                    err_norm: None,
                    alpha: None,
                    beta: None,
                }];
                Ok(("exists".into(), 0, x, rows, vec![]))
            }
            Ok(GalerkinIterate::Nonexistent { sigma_min, scale }) => {
                let check = CheckRecord::new("galerkin_nonexistent", sigma_min, 1e-12 * scale);
                Ok((
                    format!("nonexistent (sigma_min {sigma_min:.3e})"),
                    EXIT_INCOMPLETE,
                    Vector::zeros(a.dim()),
                    vec![],
                    vec![check],
                ))
            }
            Err(skrylov::Error::BasisTruncated { grade, .. }) => Ok((
                format!("basis truncated at grade {grade}"),
                EXIT_INCOMPLETE,
                Vector::zeros(a.dim()),
                vec![],
                vec![],
            )),
            Err(e) => Err(core_err(e)),
        },
        Method::Minres => match minres_reference(a, b, m) {
            Ok(x) => {
                let rows = vec![IterationRow {
                    method: "minres_reference".into(),
                    q: m,
                    res_norm: (b - a.apply(&x)).norm(),
                    rec_res_norm: None,
                    err_norm: None,
                    alpha: None,
                    beta: None,
                }];
                Ok(("exists".into(), 0, x, rows, vec![]))
            }
            Err(skrylov::Error::BasisTruncated { grade, .. }) => Ok((
                format!("basis truncated at grade {grade}"),
                EXIT_INCOMPLETE,
                Vector::zeros(a.dim()),
                vec![],
                vec![],
            )),
            Err(e) => Err(core_err(e)),
        },
        _ => unreachable!("reference path only"),
    }
}

fn solve_recurrence(
    instance: &Instance,
    method: Method,
    precond: &PrecondSpec,
    solver_config: &SolverConfig,
    config: &mut BTreeMap<String, serde_json::Value>,
) -> Result<SolveOutcome, CliError> {
    let a = instance.operator();
    let b = &instance.rhs;
    let result = match build_precond_side(precond, a.dim())? {
        None => if a.is_skew() {
            match method {
                Method::Cgne => cgne_skew(a, b, solver_config),
                Method::Cgnr => cgnr_skew(a, b, solver_config),
                _ => unreachable!(),
            }
        } else {
            match method {
                Method::Cgne => cgne_general(a, b, solver_config),
                Method::Cgnr => cgnr_general(a, b, solver_config),
                _ => unreachable!(),
            }
        }
        .map_err(core_err)?,
        Some((left, label)) => {
            config.insert("precond".into(), json!(label));
            let system = precondition(a, left, PrecondSide::identity()).map_err(core_err)?;
            let b_tilde = system.transform_rhs(b);
            let result = match method {
                Method::Cgne => cgne_general(&system, &b_tilde, solver_config),
                Method::Cgnr => cgnr_general(&system, &b_tilde, solver_config),
                _ => unreachable!(),
            }
            .map_err(core_err)?;
            let mut result = result;
            result.x = system.recover(&result.x);
            result
        }
    };
    let exit = match result.termination {
        Termination::Converged => 0,
        Termination::MaxIter | Termination::Breakdown => EXIT_INCOMPLETE,
    };
    let rows = rows_from_solve(&result);
    Ok((
        result.termination.as_str().to_string(),
        exit,
        result.x.clone(),
        rows,
        vec![],
    ))
}

fn run_verify(args: VerifyArgs) -> Result<i32, CliError> {
    if args.qmax == 0 {
        return Err(CliError::Usage("--qmax must be positive".into()));
    }
    let (instance, mut config) = args.instance.resolve()?;
    let a = instance.operator();
    let cond = instance.descriptor.cond_estimate;
    let gate_tol = args.tol.unwrap_or(1e-10);
    let equality_tol = args.tol.unwrap_or_else(|| scaled_tolerance(1e-8, cond));
    let identity_tol = args.tol.unwrap_or_else(|| scaled_tolerance(1e-10, cond));

    config.insert("qmax".into(), json!(args.qmax));
    config.insert("trials".into(), json!(args.trials));
    config.insert("check_seed".into(), json!(args.check_seed));
    config.insert("equality_tol".into(), json!(equality_tol));
    config.insert("identity_tol".into(), json!(identity_tol));

    let gate = verify_skew(a, 20, 0x5eed, gate_tol);
    let gate_check = CheckRecord::new(
        "skew_gate",
        gate.max_quadratic.max(gate.max_transpose),
        gate_tol,
    );
    let mut reports = vec![RunReport::new(
        instance.descriptor.clone(),
        vec![gate_check],
        vec![],
        vec![],
        0,
    )];

    if gate.pass && a.is_skew() {
        reports.push(
            check_orthogonality(&instance, args.qmax, args.qmax, identity_tol).map_err(core_err)?,
        );
        reports.push(check_equivalence(&instance, args.qmax, equality_tol).map_err(core_err)?);
        reports.push(
            check_projection(
                &instance,
                2 * args.qmax,
                args.trials,
                args.check_seed,
                identity_tol,
            )
            .map_err(core_err)?,
        );
        reports.push(
            check_projection(
                &instance,
                2 * args.qmax + 1,
                args.trials,
                args.check_seed.wrapping_add(1),
                identity_tol,
            )
            .map_err(core_err)?,
        );
    } else if let Ok(extra) = check_orthogonality(&instance, args.qmax, args.qmax, identity_tol) {
        // Failed gate: still measure the orthogonality deviations so the
        // report shows how far from skew the instance is.
        reports.push(extra);
    }

    let merged = RunReport::merge(reports).expect("at least the gate report");
    for (family, worst) in &merged.summary.worst_by_family {
        println!("verify: {family}: worst deviation {worst:.3e}");
    }
    println!(
        "verify: {} checks, {} failed -> {}",
        merged.summary.checks_total,
        merged.summary.checks_failed,
        if merged.all_pass() { "PASS" } else { "FAIL" }
    );

    let all_pass = merged.all_pass();
    let report = ReportFile {
        command: "verify".into(),
        config,
        report: merged,
        outcome: Some(if all_pass {
            "pass".into()
        } else {
            "fail".into()
        }),
        solution: None,
    };
    if let Some(path) = &args.out {
        write_report(&report, path)?;
    }
    if let Some(path) = &args.csv {
        write_csv(&report.report.iterations, path)?;
    }
    Ok(if all_pass { 0 } else { EXIT_VERIFY_FAILED })
}

fn run_generate(args: GenerateArgs) -> Result<i32, CliError> {
    if args.n < 2 || !args.n.is_multiple_of(2) {
        return Err(CliError::Usage(format!(
            "--n must be even and at least 2, got {}",
            args.n
        )));
    }
    if !(args.density > 0.0 && args.density <= 1.0) {
        return Err(CliError::Usage(format!(
            "--density must lie in (0, 1], got {}",
            args.density
        )));
    }
    let spec = GeneratorSpec {
        n: args.n,
        density: args.density,
        seed: args.seed,
    };
    let matrix = generate_matrix(spec)?;
    let comments = vec![format!(
        "random skew-symmetric instance: n={} density={} seed={}",
        args.n, args.density, args.seed
    )];
    let nnz = matrix.nnz_stored();
    write_matrix_market(&LoadedMatrix::SparseSkew(matrix), &comments, &args.out)
        .map_err(|e| CliError::Output(format!("{}: {e}", args.out.display())))?;
    println!(
        "generate: wrote {} ({}x{}, {} stored entries)",
        args.out.display(),
        args.n,
        args.n,
        nnz
    );
    Ok(0)
}

fn run_compare(args: CompareArgs) -> Result<i32, CliError> {
    let (instance, mut config) = args.instance.resolve()?;
    config.insert("rtol".into(), json!(args.rtol));
    let solver_config = SolverConfig::new(instance.descriptor.n).with_rtol(args.rtol);
    let run_report = compare_methods(&instance, &solver_config).map_err(core_err)?;

    for stat in &run_report.methods {
        println!(
            "compare: {:<18} iterations={:<4} applies={:<5} termination={} final_residual={:.3e}",
            stat.method, stat.iterations, stat.applies, stat.termination, stat.final_res_norm
        );
    }
    for (family, worst) in &run_report.summary.worst_by_family {
        println!("compare: {family}: worst deviation {worst:.3e}");
    }
    let all_pass = run_report.all_pass();
    let report = ReportFile {
        command: "compare".into(),
        config,
        report: run_report,
        outcome: Some(if all_pass {
            "pass".into()
        } else {
            "fail".into()
        }),
        solution: None,
    };
    if let Some(path) = &args.out {
        write_report(&report, path)?;
    }
    if let Some(path) = &args.csv {
        write_csv(&report.report.iterations, path)?;
    }
    Ok(if all_pass { 0 } else { EXIT_VERIFY_FAILED })
}
