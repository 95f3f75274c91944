#![forbid(unsafe_code)]

//! Command-line front end: solve the free-boundary game, simulate it,
//! lift paths to the multiclass game, sweep the ambiguity parameter, and
//! verify solution residuals. Artifacts are deterministic CSV/JSON files;
//! every JSON embeds the resolved configuration and the SHA-256 of the
//! instance file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use sha2::{Digest, Sha256};

use ambictrl::analysis::{epsilon_sweep, uniqueness_check, UniquenessVerdict};
use ambictrl::error::Error as CoreError;
use ambictrl::exec::ExecMode;
use ambictrl::export;
use ambictrl::hjb::{default_paste_tol, shoot, verify_solution, SolverConfig, ValueSolution};
use ambictrl::model::{instance_from_json, reduce_instance, MultiClassInstance, ReducedInstance};
use ambictrl::simulate::{
    dt_bias_budget, equilibrium_report, horizon_for_budget, lift_path, mc_estimate, simulate_path,
    AdversarySpec, EquilibriumConfig, McRun, StrategySpec,
};

#[derive(Debug, Parser, Serialize)]
#[command(name = "ambictrl", about = "Robust workload control: solver, simulator, and sweeps")]
struct Cli {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    /// One of: solve | simulate | lift | sweep | verify | equilibrium.
    #[arg(long)]
    command: String,
    /// Ambiguity level for solve/simulate/lift/verify.
    #[arg(long)]
    eps: Option<f64>,
    /// Comma-separated increasing ambiguity grid for sweep.
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    /// Mesh cells for the solver.
    #[arg(long, default_value_t = 4096)]
    cells: usize,
    /// Pasting tolerance override (defaults to the scale-relative value).
    #[arg(long)]
    paste_tol: Option<f64>,
    /// Shot-parameter bisection tolerance.
    #[arg(long, default_value_t = 1e-12)]
    s_tol: f64,
    /// Initial workload for simulate/lift.
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    /// Euler step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Horizon; omitted means sized from the 1% discounting tail budget.
    #[arg(long)]
    horizon: Option<f64>,
    /// Monte Carlo path count.
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// RNG seed; required for simulate/lift/equilibrium.
    #[arg(long)]
    seed: Option<u64>,
    /// Reflection threshold; omitted means the solved beta_eps.
    #[arg(long)]
    beta: Option<f64>,
    /// Adversary: feedback | null | const:PSI0.
    #[arg(long, default_value = "feedback")]
    adversary: String,
    /// Use antithetic path pairs.
    #[arg(long, default_value_t = false)]
    antithetic: bool,
    /// Also write the first simulated path as CSV.
    #[arg(long, default_value_t = false)]
    export_path: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    config: &'a Cli,
    instance_sha256: String,
}

#[derive(Debug, Serialize)]
struct Artifact<'a, T: Serialize> {
    #[serde(flatten)]
    body: T,
    provenance: Provenance<'a>,
}

enum Failure {
    Usage(String, Option<&'static str>),
    Core(CoreError),
    Io(String),
    GateFailed,
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_thread_pool();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (code, body) = match &failure {
                Failure::Usage(message, field) => (
                    1,
                    ErrorBody { kind: "validation", message: message.clone(), field: *field },
                ),
                Failure::Core(CoreError::Validation { field, message }) => (
                    1,
                    ErrorBody { kind: "validation", message: message.clone(), field: Some(field) },
                ),
                Failure::Core(CoreError::Domain(m)) => {
                    (1, ErrorBody { kind: "domain", message: m.clone(), field: None })
                }
                Failure::Core(CoreError::Solver(m)) => {
                    (2, ErrorBody { kind: "solver", message: m.clone(), field: None })
                }
                Failure::Core(CoreError::Simulation(m)) => {
                    (2, ErrorBody { kind: "simulation", message: m.clone(), field: None })
                }
                Failure::Io(m) => (1, ErrorBody { kind: "io", message: m.clone(), field: None }),
                Failure::GateFailed => (
                    3,
                    ErrorBody {
                        kind: "gate",
                        message: "one or more verification checks failed".into(),
                        field: None,
                    },
                ),
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": serde_json::to_value(&body).unwrap() })
            );
            ExitCode::from(code)
        }
    }
}

fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("AMBICTRL_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let text = fs::read_to_string(&cli.instance)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", cli.instance.display())))?;
    let sha = hex_digest(text.as_bytes());
    let inst = instance_from_json(&text)?;
    let red = reduce_instance(&inst)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", cli.out.display())))?;

    if cli.cells == 0 {
        return Err(Failure::Usage("cells must be positive".into(), Some("cells")));
    }
    let solver = SolverConfig {
        cells: cli.cells,
        paste_tol: cli.paste_tol,
        s_tol: cli.s_tol,
        ..SolverConfig::default()
    };

    match cli.command.as_str() {
        "solve" => cmd_solve(cli, &red, &solver, &sha),
        "simulate" => cmd_simulate(cli, &red, &solver, &sha),
        "lift" => cmd_lift(cli, &inst, &red, &solver, &sha),
        "sweep" => cmd_sweep(cli, &inst, &solver, &sha),
        "verify" => cmd_verify(cli, &red, &solver, &sha),
        "equilibrium" => cmd_equilibrium(cli, &inst, &red, &solver, &sha),
        other => Err(Failure::Usage(
            format!("unknown command `{other}`; expected solve|simulate|lift|sweep|verify|equilibrium"),
            Some("command"),
        )),
    }
}

fn require_eps(cli: &Cli) -> Result<f64, Failure> {
    let eps = cli
        .eps
        .ok_or_else(|| Failure::Usage("--eps is required for this command".into(), Some("eps")))?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Failure::Usage("eps must be nonnegative and finite".into(), Some("eps")));
    }
    Ok(eps)
}

fn require_seed(cli: &Cli) -> Result<u64, Failure> {
    cli.seed.ok_or_else(|| {
        Failure::Usage("--seed is required for reproducible simulation".into(), Some("seed"))
    })
}

fn solve_at(red: &ReducedInstance, eps: f64, solver: &SolverConfig) -> Result<ValueSolution, Failure> {
    Ok(shoot(&red.with_eps(eps), eps, solver)?)
}

fn adversary_spec<'a>(cli: &Cli, sol: &'a ValueSolution) -> Result<AdversarySpec<'a>, Failure> {
    match cli.adversary.as_str() {
        "feedback" => Ok(AdversarySpec::Feedback(sol)),
        "null" => Ok(AdversarySpec::Null),
        other => match other.strip_prefix("const:") {
            Some(v) => {
                let psi0: f64 = v.parse().map_err(|_| {
                    Failure::Usage(format!("bad constant adversary `{other}`"), Some("adversary"))
                })?;
                Ok(AdversarySpec::Constant(psi0))
            }
            None => Err(Failure::Usage(
                format!("unknown adversary `{other}`; expected feedback|null|const:PSI0"),
                Some("adversary"),
            )),
        },
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_artifact<T: Serialize>(cli: &Cli, sha: &str, name: &str, body: T) -> Result<(), Failure> {
    let artifact =
        Artifact { body, provenance: Provenance { config: cli, instance_sha256: sha.into() } };
    write_file(&cli.out.join(name), &export::to_json_pretty(&artifact))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_solve(cli: &Cli, red: &ReducedInstance, solver: &SolverConfig, sha: &str) -> Result<(), Failure> {
    let eps = require_eps(cli)?;
    let sol = solve_at(red, eps, solver)?;
    write_file(&cli.out.join("solution.csv"), &export::solution_csv(&sol))?;
    write_artifact(cli, sha, "solution.json", export::SolutionSummary::from(&sol))
}

#[derive(Debug, Serialize)]
struct SimulateBody {
    mean: f64,
    std_error: f64,
    n_paths: usize,
    dt: f64,
    horizon: f64,
    tail_bound: f64,
    seed: u64,
    beta: f64,
    adversary: String,
    x0: f64,
    eps: f64,
    dt_bias_budget: f64,
}

fn resolved_run(cli: &Cli, red: &ReducedInstance, sol: &ValueSolution, seed: u64) -> McRun {
    let horizon = cli
        .horizon
        .unwrap_or_else(|| horizon_for_budget(&red.with_eps(sol.eps), sol.eps, sol.s_star, 0.01));
    McRun {
        dt: cli.dt,
        horizon,
        n_paths: cli.paths,
        seed,
        antithetic: cli.antithetic,
        exec: ExecMode::Parallel,
    }
}

fn cmd_simulate(cli: &Cli, red: &ReducedInstance, solver: &SolverConfig, sha: &str) -> Result<(), Failure> {
    let eps = require_eps(cli)?;
    let seed = require_seed(cli)?;
    let sol = solve_at(red, eps, solver)?;
    let beta = cli.beta.unwrap_or(sol.beta);
    let adv = adversary_spec(cli, &sol)?;
    let strat = StrategySpec::Reflecting { beta };
    let run = resolved_run(cli, red, &sol, seed);
    let game = red.with_eps(eps);
    let est = mc_estimate(&game, &strat, &adv, cli.x0, eps, &run)?;
    if cli.export_path {
        let path = simulate_path(&game, &strat, &adv, cli.x0, eps, run.dt, run.horizon, seed)?;
        write_file(&cli.out.join("path.csv"), &export::path_csv(&path))?;
    }
    write_artifact(
        cli,
        sha,
        "estimate.json",
        SimulateBody {
            mean: est.mean,
            std_error: est.std_error,
            n_paths: est.n_paths,
            dt: est.dt,
            horizon: est.horizon,
            tail_bound: est.tail_bound,
            seed,
            beta,
            adversary: cli.adversary.clone(),
            x0: cli.x0,
            eps,
            dt_bias_budget: dt_bias_budget(red, est.dt),
        },
    )
}

#[derive(Debug, Serialize)]
struct LiftBody {
    rsdg_cost: f64,
    msdg_cost: f64,
    cost_defect: f64,
    holding_defect: f64,
    workload_defect: f64,
    penalty_defect: f64,
    class_order: Vec<usize>,
    i_star: usize,
}

fn cmd_lift(
    cli: &Cli,
    inst: &MultiClassInstance,
    red: &ReducedInstance,
    solver: &SolverConfig,
    sha: &str,
) -> Result<(), Failure> {
    // The lift identities are tied to the instance's own ambiguity weights.
    let eps = red.eps;
    if let Some(requested) = cli.eps {
        if requested != eps {
            return Err(Failure::Usage(
                format!("lift runs at the instance's aggregated eps = {eps}; drop --eps"),
                Some("eps"),
            ));
        }
    }
    let seed = require_seed(cli)?;
    let sol = solve_at(red, eps, solver)?;
    let beta = cli.beta.unwrap_or(sol.beta);
    let adv = adversary_spec(cli, &sol)?;
    let strat = StrategySpec::Reflecting { beta };
    let run = resolved_run(cli, red, &sol, seed);
    let path = simulate_path(red, &strat, &adv, cli.x0, eps, run.dt, run.horizon, seed)?;
    let lifted = lift_path(&path, red, inst, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    write_file(&cli.out.join("lifted.csv"), &export::lifted_csv(&lifted))?;
    write_artifact(
        cli,
        sha,
        "lift.json",
        LiftBody {
            rsdg_cost: lifted.rsdg_cost,
            msdg_cost: lifted.msdg_cost,
            cost_defect: lifted.cost_defect,
            holding_defect: lifted.holding_defect,
            workload_defect: lifted.workload_defect,
            penalty_defect: lifted.penalty_defect,
            class_order: red.class_order.clone(),
            i_star: red.i_star,
        },
    )
}

fn cmd_sweep(cli: &Cli, inst: &MultiClassInstance, solver: &SolverConfig, sha: &str) -> Result<(), Failure> {
    let grid = cli.eps_grid.clone().ok_or_else(|| {
        Failure::Usage("--eps-grid is required for sweep".into(), Some("eps_grid"))
    })?;
    let report = epsilon_sweep(inst, &grid, solver, ExecMode::Parallel)?;
    write_file(&cli.out.join("sweep.csv"), &export::sweep_csv(&report))?;
    write_artifact(cli, sha, "sweep.json", export::SweepSummary::from(&report))
}

#[derive(Debug, Serialize)]
struct CheckRow {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct VerifyBody {
    eps: f64,
    s_star: f64,
    beta: f64,
    beta_hat: f64,
    uniqueness: String,
    checks: Vec<CheckRow>,
    all_pass: bool,
}

fn cmd_verify(cli: &Cli, red: &ReducedInstance, solver: &SolverConfig, sha: &str) -> Result<(), Failure> {
    let eps = require_eps(cli)?;
    let sol = solve_at(red, eps, solver)?;
    let report = verify_solution(&sol);
    let tol = solver.paste_tol.unwrap_or_else(|| default_paste_tol(red));
    let checks = vec![
        CheckRow {
            name: "residual_sup",
            value: report.residual_sup,
            threshold: tol,
            pass: report.residual_sup <= tol,
        },
        CheckRow {
            name: "slope_defect_sup",
            value: report.slope_defect_sup,
            threshold: 0.0,
            pass: report.slope_defect_sup == 0.0,
        },
        CheckRow {
            name: "left_neumann",
            value: report.left_neumann,
            threshold: 1e-8,
            pass: report.left_neumann <= 1e-8,
        },
        CheckRow {
            name: "right_neumann",
            value: report.right_neumann,
            threshold: 1e-8,
            pass: report.right_neumann <= 1e-8,
        },
        CheckRow {
            name: "v_prime_min",
            value: report.v_prime_min,
            threshold: -1e-10,
            pass: report.v_prime_min >= -1e-10,
        },
        CheckRow {
            name: "v_prime_max",
            value: report.v_prime_max,
            threshold: red.r + 1e-10,
            pass: report.v_prime_max <= red.r + 1e-10,
        },
        CheckRow {
            name: "inequality_min",
            value: report.inequality_min,
            threshold: -tol,
            pass: report.inequality_min >= -tol,
        },
        CheckRow {
            name: "threshold_order",
            value: sol.beta_hat - sol.beta,
            threshold: 0.0,
            pass: sol.beta > 0.0 && sol.beta_hat >= sol.beta && sol.beta_hat <= red.b,
        },
    ];
    let all_pass = checks.iter().all(|c| c.pass);
    let uniqueness = match uniqueness_check(red, eps) {
        UniquenessVerdict::Unique { reason } => format!("unique: {reason}"),
        UniquenessVerdict::PossiblyNonUnique { slope_index } => {
            format!("possibly non-unique: holding slope {slope_index} equals rho r")
        }
    };
    write_artifact(
        cli,
        sha,
        "verify.json",
        VerifyBody {
            eps,
            s_star: sol.s_star,
            beta: sol.beta,
            beta_hat: sol.beta_hat,
            uniqueness,
            checks,
            all_pass,
        },
    )?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure::GateFailed)
    }
}

fn cmd_equilibrium(
    cli: &Cli,
    inst: &MultiClassInstance,
    red: &ReducedInstance,
    solver: &SolverConfig,
    sha: &str,
) -> Result<(), Failure> {
    let eps = require_eps(cli)?;
    let seed = require_seed(cli)?;
    let sol = solve_at(red, eps, solver)?;
    let run = resolved_run(cli, red, &sol, seed);
    let game = red.with_eps(eps);
    let sigma_r = eps * red.sigma * red.r;
    let cfg = EquilibriumConfig {
        x0: cli.x0,
        run,
        beta_deviations: vec![0.75 * sol.beta, (1.25 * sol.beta).min(red.b)],
        constant_adversaries: vec![0.5 * sigma_r, sigma_r],
        include_null: true,
        lift_paths: 4,
    };
    let report = equilibrium_report(&game, &sol, inst, &cfg)?;
    write_artifact(cli, sha, "equilibrium.json", report)
}
