//! Seeded Monte Carlo for the reduced game and its multidimensional lift.
//!
//! Paths follow the controlled dynamics
//! `X = x0 + m t + \int sigma psi ds + sigma B + Y - R` under a reflecting
//! strategy on `[0, beta]`; the adversary contributes the drift perturbation
//! `sigma psi` at the quadratic penalty `psi^2 / (2 eps)`. Increments are
//! Euler--Maruyama with per-step two-sided reflection, the feedback
//! adversary evaluates `eps sigma V'` at the state opening the step, and
//! every path is reproducible from `seed ^ path_index`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, ExecMode};
use crate::hjb::ValueSolution;
use crate::model::{MultiClassInstance, ReducedInstance};
use crate::skorokhod::Reflector;

/// Minimizer strategies. Reflecting keeps the workload in `[0, beta]` with
/// minimal idleness and rejection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum StrategySpec {
    Reflecting { beta: f64 },
}

impl StrategySpec {
    fn validate(&self, red: &ReducedInstance) -> Result<()> {
        let StrategySpec::Reflecting { beta } = self;
        if !(*beta > 0.0 && *beta <= red.b) {
            return Err(Error::validation("beta", format!("must lie in (0, b = {}]", red.b)));
        }
        Ok(())
    }
}

/// Adversary drift policies.
#[derive(Debug, Clone, Copy)]
pub enum AdversarySpec<'a> {
    /// Worst-case feedback `psi(t) = eps sigma V'(X(t))` from a solved game.
    Feedback(&'a ValueSolution),
    /// Constant perturbation `psi(t) = psi0`.
    Constant(f64),
    /// Reference measure, `psi = 0`.
    Null,
}

impl AdversarySpec<'_> {
    fn validate(&self, red: &ReducedInstance, eps: f64) -> Result<()> {
        if let AdversarySpec::Feedback(sol) = self {
            if sol.eps != eps {
                return Err(Error::Simulation(format!(
                    "feedback solution solved at eps = {}, game runs at eps = {eps}",
                    sol.eps
                )));
            }
            if !reduced_matches(&sol.reduced, red) {
                return Err(Error::Simulation(
                    "feedback solution belongs to a different reduced instance".into(),
                ));
            }
        }
        Ok(())
    }

    #[inline]
    fn psi(&self, eps: f64, x: f64) -> f64 {
        match self {
            AdversarySpec::Feedback(sol) => eps * sol.reduced.sigma * sol.slope_at(x),
            AdversarySpec::Constant(p) => *p,
            AdversarySpec::Null => 0.0,
        }
    }
}

fn reduced_matches(a: &ReducedInstance, b: &ReducedInstance) -> bool {
    a.b == b.b
        && a.m == b.m
        && a.sigma == b.sigma
        && a.r == b.r
        && a.discount == b.discount
        && a.theta == b.theta
        && a.h_breakpoints.len() == b.h_breakpoints.len()
        && a.h_breakpoints.iter().zip(&b.h_breakpoints).all(|(x, y)| x == y)
}

/// One discretized trajectory of the reduced game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimPath {
    pub dt: f64,
    pub horizon: f64,
    /// Constrained workload, idleness, rejection, driving noise, and
    /// adversary perturbation per mesh point.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: Vec<f64>,
    pub b: Vec<f64>,
    pub psi: Vec<f64>,
    pub seed: u64,
    /// Steps whose increments exceeded the reflection interval width.
    pub coarse_steps: usize,
}

#[inline]
fn draw_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Compensated (Kahan) accumulator; the long-horizon integrals need it so
/// path identities hold near machine precision.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Simulates one path under the strategy/adversary pair.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path(
    red: &ReducedInstance,
    strat: &StrategySpec,
    adv: &AdversarySpec,
    x0: f64,
    eps: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<SimPath> {
    simulate_path_signed(red, strat, adv, x0, eps, dt, horizon, seed, 1.0)
}

/// `sign` mirrors the Gaussian draws; used for antithetic pairs.
#[allow(clippy::too_many_arguments)]
fn simulate_path_signed(
    red: &ReducedInstance,
    strat: &StrategySpec,
    adv: &AdversarySpec,
    x0: f64,
    eps: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    sign: f64,
) -> Result<SimPath> {
    strat.validate(red)?;
    adv.validate(red, eps)?;
    if !(0.0..=red.b).contains(&x0) {
        return Err(Error::validation("x0", format!("must lie in [0, b = {}]", red.b)));
    }
    let dt_cap = 1e-2 * red.b / red.sigma;
    if !(dt > 0.0 && dt <= dt_cap) {
        return Err(Error::validation(
            "dt",
            format!("must lie in (0, {dt_cap}] to resolve the reflection"),
        ));
    }
    let n = (horizon / dt).round() as usize;
    if n == 0 {
        return Err(Error::validation("horizon", "must cover at least one step"));
    }

    let StrategySpec::Reflecting { beta } = *strat;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = dt.sqrt();
    let width = beta; // reflection interval is [0, beta]

    let mut x = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut r = Vec::with_capacity(n + 1);
    let mut b_path = Vec::with_capacity(n + 1);
    let mut psi_path = Vec::with_capacity(n + 1);

    let mut state = Reflector::new(0.0, beta, x0);
    let mut noise = Kahan::default();
    let mut coarse_steps = 0usize;

    x.push(state.x);
    y.push(state.y);
    r.push(state.r);
    b_path.push(0.0);
    psi_path.push(adv.psi(eps, state.x));

    for k in 0..n {
        let psi_k = psi_path[k];
        let xi = sign * draw_normal(&mut rng);
        if !xi.is_finite() {
            return Err(Error::Simulation("non-finite Gaussian draw".into()));
        }
        let d_eta = (red.m + red.sigma * psi_k) * dt + red.sigma * sqrt_dt * xi;
        if d_eta.abs() > width {
            coarse_steps += 1;
        }
        noise.add(sqrt_dt * xi);
        state.step(d_eta);
        x.push(state.x);
        y.push(state.y);
        r.push(state.r);
        b_path.push(noise.sum);
        psi_path.push(adv.psi(eps, state.x));
    }

    Ok(SimPath {
        dt,
        horizon: n as f64 * dt,
        x,
        y,
        r,
        b: b_path,
        psi: psi_path,
        seed,
        coarse_steps,
    })
}

impl SimPath {
    pub fn steps(&self) -> usize {
        self.x.len() - 1
    }

    /// Initial condition before the time-0 regulator jump.
    pub fn x0(&self) -> f64 {
        self.x[0] - self.y[0] + self.r[0]
    }

    /// Sup-norm defect of the dynamics identity
    /// `X = x0 + m t + \int sigma psi ds + sigma B + Y - R` over the mesh.
    pub fn dynamics_defect(&self, red: &ReducedInstance) -> f64 {
        let x0 = self.x0();
        let mut psi_int = Kahan::default();
        let mut worst = 0.0f64;
        for k in 0..self.x.len() {
            let t = k as f64 * self.dt;
            let rebuilt =
                x0 + red.m * t + red.sigma * psi_int.sum + red.sigma * self.b[k] + self.y[k]
                    - self.r[k];
            worst = worst.max((self.x[k] - rebuilt).abs());
            psi_int.add(self.psi[k] * self.dt);
        }
        worst
    }
}

/// Discount table `e^{-rho t_k}` shared across paths of one estimate.
fn discount_table(discount: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| (-discount * k as f64 * dt).exp()).collect()
}

/// Discounted pathwise cost: left-endpoint quadrature of
/// `e^{-rho t} (h(X) - psi^2 / (2 eps)) dt` plus the Stieltjes sum of
/// `e^{-rho t} r dR` including the time-0 rejection atom.
///
/// `eps = 0` is admissible only for paths with no drift perturbation; the
/// penalty is then dropped.
pub fn discounted_cost(red: &ReducedInstance, path: &SimPath, eps: f64) -> Result<f64> {
    let disc = discount_table(red.discount, path.dt, path.steps());
    discounted_cost_with_table(red, path, eps, &disc)
}

fn discounted_cost_with_table(
    red: &ReducedInstance,
    path: &SimPath,
    eps: f64,
    disc: &[f64],
) -> Result<f64> {
    if eps == 0.0 && path.psi.iter().any(|&p| p != 0.0) {
        return Err(Error::Simulation(
            "eps = 0 with a nonzero drift perturbation: the penalty is undefined".into(),
        ));
    }
    let n = path.steps();
    let dt = path.dt;
    let mut running = Kahan::default();
    // Time-0 rejection atom at discount 1.
    running.add(red.r * path.r[0]);
    for (k, &discount) in disc.iter().enumerate().take(n) {
        let mut integrand = red.holding_cost_unchecked(path.x[k]);
        if eps > 0.0 {
            integrand -= path.psi[k] * path.psi[k] / (2.0 * eps);
        }
        running.add(discount * (integrand * dt + red.r * (path.r[k + 1] - path.r[k])));
    }
    Ok(running.sum)
}

/// Truncation budget for the infinite-horizon discounted cost at horizon
/// `T`: `e^{-rho T} (h(b)/rho + r (|m| + sigma eps r + sigma)(T + 1))`.
pub fn tail_bound(red: &ReducedInstance, eps: f64, horizon: f64) -> f64 {
    let drift_scale = red.m.abs() + red.sigma * eps * red.r + red.sigma;
    (-red.discount * horizon).exp()
        * (red.holding_cost_unchecked(red.b) / red.discount
            + red.r * drift_scale * (horizon + 1.0))
}

/// Smallest horizon (on a 0.5 grid) whose tail bound is below
/// `budget_fraction * value_scale`.
pub fn horizon_for_budget(
    red: &ReducedInstance,
    eps: f64,
    value_scale: f64,
    budget_fraction: f64,
) -> f64 {
    let target = budget_fraction * value_scale.abs().max(1e-12);
    let mut horizon = 1.0f64;
    while tail_bound(red, eps, horizon) > target && horizon < 1e6 {
        horizon += 0.5;
    }
    horizon
}

/// Monte Carlo run configuration. Path `i` draws from a generator seeded
/// with `seed ^ i`; antithetic runs mirror the draws of the even partner.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McRun {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl McRun {
    pub fn new(dt: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        McRun { dt, horizon, n_paths, seed, antithetic: false, exec: ExecMode::default() }
    }
}

/// Aggregate of a Monte Carlo estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub tail_bound: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

/// Estimates the discounted game cost under the pair `(strat, adv)` from
/// independent seeded paths. Deterministic for a fixed seed: per-path costs
/// are materialized in path order and reduced sequentially.
pub fn mc_estimate(
    red: &ReducedInstance,
    strat: &StrategySpec,
    adv: &AdversarySpec,
    x0: f64,
    eps: f64,
    run: &McRun,
) -> Result<CostEstimate> {
    if run.n_paths < 2 {
        return Err(Error::validation("n_paths", "need at least 2 paths"));
    }
    if run.antithetic && !run.n_paths.is_multiple_of(2) {
        return Err(Error::validation("n_paths", "antithetic runs need an even path count"));
    }
    let n_steps = (run.horizon / run.dt).round() as usize;
    let disc = discount_table(red.discount, run.dt, n_steps);

    let costs: Vec<f64> = try_map_indexed(run.exec, run.n_paths, |i| -> Result<f64> {
        let (path_seed, sign) = if run.antithetic {
            (run.seed ^ ((i & !1usize) as u64), if i % 2 == 0 { 1.0 } else { -1.0 })
        } else {
            (run.seed ^ (i as u64), 1.0)
        };
        let path = simulate_path_signed(red, strat, adv, x0, eps, run.dt, run.horizon, path_seed, sign)?;
        discounted_cost_with_table(red, &path, eps, &disc)
    })?;

    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    Ok(CostEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_paths: costs.len(),
        tail_bound: tail_bound(red, eps, run.horizon),
        dt: run.dt,
        horizon: run.horizon,
        seed: run.seed,
    })
}

/// A reduced path lifted to the multiclass game, with the collapse
/// identities evaluated along the way.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LiftedPath {
    pub dt: f64,
    pub class_count: usize,
    /// Outer index: canonical class; inner: mesh point.
    pub x_hat: Vec<Vec<f64>>,
    pub y_hat: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    pub b_hat: Vec<Vec<f64>>,
    pub psi_hat: Vec<Vec<f64>>,
    /// Discounted multiclass cost of the lifted path.
    pub msdg_cost: f64,
    /// Discounted reduced cost of the source path.
    pub rsdg_cost: f64,
    /// Sup over the mesh of `|h_hat . gamma(X) - h(X)|`.
    pub holding_defect: f64,
    /// Sup over the mesh of `|theta . Y_hat - Y|`.
    pub workload_defect: f64,
    /// Sup over the mesh of `|sum psi_hat^2/(2 eps_hat) - psi^2/(2 eps)|`.
    pub penalty_defect: f64,
    /// `|msdg_cost - rsdg_cost|`.
    pub cost_defect: f64,
}

/// Lifts a reduced path to the multiclass game: `X_hat = gamma(X)`,
/// rejections concentrate on the cheapest class, the idleness vector closes
/// the multiclass dynamics, and the drift perturbation splits across
/// classes proportionally to `(theta sigma_hat)_i eps_hat_i`.
///
/// The lifted Brownian motion reproduces the reduced one along
/// `theta sigma_hat / sigma`; its orthogonal component is drawn from `seed`
/// and cancels from every cost term.
pub fn lift_path(
    path: &SimPath,
    red: &ReducedInstance,
    inst: &MultiClassInstance,
    seed: u64,
) -> Result<LiftedPath> {
    let i_count = red.class_count();
    if inst.class_count != i_count {
        return Err(Error::Simulation("instance dimension differs from reduced data".into()));
    }
    let order = &red.class_order;
    let mu: Vec<f64> = order.iter().map(|&k| inst.mu[k]).collect();
    let lambda: Vec<f64> = order.iter().map(|&k| inst.lambda[k]).collect();
    let h_hat: Vec<f64> = order.iter().map(|&k| inst.h_hat[k]).collect();
    let r_hat_cost: Vec<f64> = order.iter().map(|&k| inst.r_hat[k]).collect();
    let eps_hat: Vec<f64> = order.iter().map(|&k| inst.eps_hat[k]).collect();
    let lambda_hat: Vec<f64> = order.iter().map(|&k| inst.lambda_hat[k]).collect();
    let mu_hat: Vec<f64> = order.iter().map(|&k| inst.mu_hat[k]).collect();

    let sigma_hat: Vec<f64> = lambda.iter().map(|&l| (2.0 * l).sqrt()).collect();
    let u: Vec<f64> = (0..i_count).map(|k| red.theta[k] * sigma_hat[k]).collect();
    let u_norm_sq: f64 = u.iter().map(|v| v * v).sum();
    let u_norm = u_norm_sq.sqrt();
    let eps_weighted: f64 = (0..i_count).map(|k| u[k] * u[k] * eps_hat[k]).sum();
    let eps_check = eps_weighted / u_norm_sq;
    if (eps_check - red.eps).abs() > 1e-12 * red.eps.max(1.0) {
        return Err(Error::Simulation(format!(
            "reduced eps = {} does not match the instance aggregation {eps_check}; \
             lift identities require the unmodified reduction",
            red.eps
        )));
    }
    let m_hat: Vec<f64> =
        (0..i_count).map(|k| lambda_hat[k] - (lambda[k] / mu[k]) * mu_hat[k]).collect();

    let n = path.steps();
    let x0 = path.x0();
    let x_hat_0 = red.gamma_lift(inst, x0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_dt = path.dt.sqrt();

    let mut x_hat = vec![Vec::with_capacity(n + 1); i_count];
    let mut y_hat = vec![Vec::with_capacity(n + 1); i_count];
    let mut r_hat = vec![Vec::with_capacity(n + 1); i_count];
    let mut b_hat = vec![Vec::with_capacity(n + 1); i_count];
    let mut psi_hat = vec![Vec::with_capacity(n + 1); i_count];

    let mut ortho = vec![Kahan::default(); i_count];
    let mut psi_int = Kahan::default();
    let mut holding_defect = 0.0f64;
    let mut workload_defect = 0.0f64;
    let mut penalty_defect = 0.0f64;

    for k in 0..=n {
        if k > 0 {
            psi_int.add(path.psi[k - 1] * path.dt);
            // Independent I-dimensional increment, projected off u.
            let w: Vec<f64> = (0..i_count).map(|_| sqrt_dt * draw_normal(&mut rng)).collect();
            let dot: f64 = (0..i_count).map(|j| u[j] * w[j]).sum();
            for j in 0..i_count {
                ortho[j].add(w[j] - u[j] * dot / u_norm_sq);
            }
        }
        let t = k as f64 * path.dt;
        // The multiclass dynamics run under the reference measure: their
        // Brownian motion is the perturbed one, B + int psi ds.
        let b_reference = path.b[k] + psi_int.sum;
        let gamma = red.gamma_lift(inst, path.x[k])?;
        let h_of_x = red.holding_cost_unchecked(path.x[k]);
        let h_dot: f64 = (0..i_count).map(|j| h_hat[j] * gamma[j]).sum();
        holding_defect = holding_defect.max((h_dot - h_of_x).abs());

        let mut theta_y = 0.0f64;
        let mut pen_hat = 0.0f64;
        for j in 0..i_count {
            let b_j = u[j] / u_norm * b_reference + ortho[j].sum;
            let r_j = if j == red.i_star { path.r[k] * mu[j] } else { 0.0 };
            let x_j = gamma[j];
            let y_j = x_j - x_hat_0[j] - m_hat[j] * t - sigma_hat[j] * b_j + r_j;
            let psi_j = red.sigma * path.psi[k] * u[j] * eps_hat[j] / eps_weighted;
            x_hat[j].push(x_j);
            y_hat[j].push(y_j);
            r_hat[j].push(r_j);
            b_hat[j].push(b_j);
            psi_hat[j].push(psi_j);
            theta_y += red.theta[j] * y_j;
            pen_hat += psi_j * psi_j / (2.0 * eps_hat[j]);
        }
        workload_defect = workload_defect.max((theta_y - path.y[k]).abs());
        if red.eps > 0.0 {
            let pen = path.psi[k] * path.psi[k] / (2.0 * red.eps);
            penalty_defect = penalty_defect.max((pen_hat - pen).abs());
        }
    }

    // Multiclass discounted cost with the same quadrature as the reduced one.
    let disc = discount_table(red.discount, path.dt, n);
    let mut msdg = Kahan::default();
    let r_star_price = r_hat_cost[red.i_star];
    msdg.add(r_star_price * r_hat[red.i_star][0]);
    for k in 0..n {
        let h_dot: f64 = (0..i_count).map(|j| h_hat[j] * x_hat[j][k]).sum();
        let pen: f64 = (0..i_count).map(|j| {
            let p = psi_hat[j][k];
            p * p / (2.0 * eps_hat[j])
        }).sum();
        let d_rej = r_hat[red.i_star][k + 1] - r_hat[red.i_star][k];
        msdg.add(disc[k] * ((h_dot - pen) * path.dt + r_star_price * d_rej));
    }

    let rsdg_cost = discounted_cost_with_table(red, path, red.eps, &disc)?;
    let msdg_cost = msdg.sum;

    Ok(LiftedPath {
        dt: path.dt,
        class_count: i_count,
        x_hat,
        y_hat,
        r_hat,
        b_hat,
        psi_hat,
        msdg_cost,
        rsdg_cost,
        holding_defect,
        workload_defect,
        penalty_defect,
        cost_defect: (msdg_cost - rsdg_cost).abs(),
    })
}

/// One row of the equilibrium gap table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapRow {
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
    /// Mean minus the Monte Carlo saddle mean (same dt, horizon, and
    /// seeds), so the discretization bias common to all arms cancels. The
    /// saddle row itself reports its gap against the solved `V(x0; eps)`.
    pub gap_vs_saddle: f64,
}

/// Equilibrium verification summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumReport {
    /// Solved value `V(x0; eps)`.
    pub saddle_value: f64,
    pub saddle: GapRow,
    /// Minimizer deviations under the feedback adversary; their gaps must
    /// be bounded below by `-3 SE`.
    pub minimizer_deviations: Vec<GapRow>,
    /// Adversary deviations against the optimal reflecting strategy; their
    /// gaps must be bounded above by `+3 SE`.
    pub adversary_deviations: Vec<GapRow>,
    /// Largest multiclass replication defect `|J_hat - J|` over the probed
    /// paths.
    pub lift_cost_defect: f64,
    pub tail_bound: f64,
    pub dt_bias_budget: f64,
}

/// Gap-table configuration: which deviations to probe around the saddle.
#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    pub x0: f64,
    pub run: McRun,
    pub beta_deviations: Vec<f64>,
    pub constant_adversaries: Vec<f64>,
    pub include_null: bool,
    /// How many saddle paths to lift for the multiclass replication check.
    pub lift_paths: usize,
}

/// Reflection discretization bias budget: boundary displacement of the
/// Euler scheme is `O(sigma sqrt(dt))` per boundary, priced through the
/// rejection cost and the holding-cost Lipschitz constant.
pub fn dt_bias_budget(red: &ReducedInstance, dt: f64) -> f64 {
    1.2 * red.sigma * dt.sqrt() * (red.r + red.h_lipschitz() / red.discount)
}

/// Builds the gap table around the solved saddle `(beta_eps, feedback)`.
pub fn equilibrium_report(
    red: &ReducedInstance,
    sol: &ValueSolution,
    inst: &MultiClassInstance,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumReport> {
    let eps = sol.eps;
    let saddle_value = sol.value_at(cfg.x0);
    let optimal = StrategySpec::Reflecting { beta: sol.beta };
    let feedback = AdversarySpec::Feedback(sol);

    let saddle_est = mc_estimate(red, &optimal, &feedback, cfg.x0, eps, &cfg.run)?;
    let saddle = GapRow {
        label: "saddle".into(),
        mean: saddle_est.mean,
        std_error: saddle_est.std_error,
        gap_vs_saddle: saddle_est.mean - saddle_value,
    };

    let mut minimizer_deviations = Vec::new();
    for &beta in &cfg.beta_deviations {
        let est = mc_estimate(
            red,
            &StrategySpec::Reflecting { beta },
            &feedback,
            cfg.x0,
            eps,
            &cfg.run,
        )?;
        minimizer_deviations.push(GapRow {
            label: format!("beta={beta}"),
            mean: est.mean,
            std_error: est.std_error,
            gap_vs_saddle: est.mean - saddle.mean,
        });
    }

    let mut adversary_deviations = Vec::new();
    let mut adversaries: Vec<(String, AdversarySpec)> = Vec::new();
    if cfg.include_null {
        adversaries.push(("null".into(), AdversarySpec::Null));
    }
    for &p in &cfg.constant_adversaries {
        adversaries.push((format!("const={p}"), AdversarySpec::Constant(p)));
    }
    for (label, adv) in adversaries {
        let est = mc_estimate(red, &optimal, &adv, cfg.x0, eps, &cfg.run)?;
        adversary_deviations.push(GapRow {
            label,
            mean: est.mean,
            std_error: est.std_error,
            gap_vs_saddle: est.mean - saddle.mean,
        });
    }

    let mut lift_cost_defect = 0.0f64;
    for i in 0..cfg.lift_paths {
        let path_seed = cfg.run.seed ^ (i as u64);
        let path = simulate_path(red, &optimal, &feedback, cfg.x0, eps, cfg.run.dt, cfg.run.horizon, path_seed)?;
        let lifted = lift_path(&path, red, inst, path_seed ^ 0x9e37_79b9_7f4a_7c15)?;
        lift_cost_defect = lift_cost_defect.max(lifted.cost_defect);
    }

    Ok(EquilibriumReport {
        saddle_value,
        saddle,
        minimizer_deviations,
        adversary_deviations,
        lift_cost_defect,
        tail_bound: tail_bound(red, eps, cfg.run.horizon),
        dt_bias_budget: dt_bias_budget(red, cfg.run.dt),
    })
}
