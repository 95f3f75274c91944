//! Comparative statics over the ambiguity parameter.
//!
//! [`epsilon_sweep`] solves the game along an `eps` grid and checks the
//! structural facts the sweep exists to validate: the value is strictly
//! increasing in `eps`, adjacent levels obey the explicit proof bound
//! `V(.; e1) <= V(.; e2) + e1 sigma^2 r^2 (e1 - e2) / (2 e2 rho)`, the
//! distance to the risk-neutral curve shrinks linearly (`~ C eps`), and
//! perturbed thresholds stay inside the `[beta, beta_hat]` sandwich of the
//! base level. [`uniqueness_check`] decides whether the optimal reflecting
//! strategy is provably unique for the instance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, ExecMode};
use crate::hjb::{shoot, SolverConfig, ValueSolution};
use crate::model::{reduce_instance, MultiClassInstance, ReducedInstance};

/// Per-`eps` summary row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub s_star: f64,
    pub beta: f64,
    pub beta_hat: f64,
    /// `sup_x |V(x; eps) - V(x; eps_0)|` against the first grid level.
    pub sup_diff_to_eps0: f64,
    /// `min_x (V(x; eps_i) - V(x; eps_{i-1}))`; positive means strictly
    /// monotone. Absent on the first row.
    pub monotonicity_margin: Option<f64>,
    /// `min_x (V(x; eps_{i-1}) + bound - V(x; eps_i))` for the proof bound
    /// above; nonnegative means the bound holds. Absent when the previous
    /// level is `0` (the bound divides by it) or on the first row.
    pub bound_slack: Option<f64>,
}

/// Sweep output: per-level records, the solved curves, and the linear fit
/// of the distance to the risk-neutral limit.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub solutions: Vec<ValueSolution>,
    /// Least-squares coefficient of `sup_diff ~ C eps` over the smallest
    /// nonzero levels.
    pub c_fit: f64,
    /// Relative fit residual `||d - C eps|| / ||d||`.
    pub fit_residual: f64,
}

/// Solves every level of `eps_grid` (in parallel under `exec`) and builds
/// the comparative-statics report. The grid must be strictly increasing and
/// nonnegative; the first entry may be `0`.
pub fn epsilon_sweep(
    inst: &MultiClassInstance,
    eps_grid: &[f64],
    cfg: &SolverConfig,
    exec: ExecMode,
) -> Result<SweepReport> {
    if eps_grid.is_empty() {
        return Err(Error::validation("eps_grid", "must be nonempty"));
    }
    if eps_grid[0] < 0.0 {
        return Err(Error::validation("eps_grid", "levels must be nonnegative"));
    }
    if eps_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("eps_grid", "levels must be strictly increasing"));
    }
    let red = reduce_instance(inst)?;
    let solutions: Vec<ValueSolution> =
        try_map_indexed(exec, eps_grid.len(), |i| -> Result<ValueSolution> {
            let eps = eps_grid[i];
            shoot(&red.with_eps(eps), eps, cfg)
                .map_err(|e| Error::Solver(format!("sweep failed at eps = {eps}: {e}")))
        })?;

    let base = &solutions[0];
    let mut records = Vec::with_capacity(eps_grid.len());
    for (i, sol) in solutions.iter().enumerate() {
        let sup_diff = sup_abs_diff(&sol.v, &base.v);
        let (margin, slack) = if i == 0 {
            (None, None)
        } else {
            let prev = &solutions[i - 1];
            let margin = min_diff(&sol.v, &prev.v);
            let slack = if eps_grid[i - 1] > 0.0 {
                let (e2, e1) = (eps_grid[i - 1], eps_grid[i]);
                let bound = e1 * red.sigma * red.sigma * red.r * red.r * (e1 - e2)
                    / (2.0 * e2 * red.discount);
                Some(min_diff(&prev.v, &sol.v) + bound)
            } else {
                None
            };
            (Some(margin), slack)
        };
        records.push(SweepRecord {
            eps: eps_grid[i],
            s_star: sol.s_star,
            beta: sol.beta,
            beta_hat: sol.beta_hat,
            sup_diff_to_eps0: sup_diff,
            monotonicity_margin: margin,
            bound_slack: slack,
        });
    }

    // Linear fit through the origin on the (up to) three smallest nonzero
    // levels with their sup-distance to the base curve.
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|rec| rec.eps > eps_grid[0])
        .take(3)
        .map(|rec| (rec.eps, rec.sup_diff_to_eps0))
        .collect();
    let (c_fit, fit_residual) = fit_through_origin(&pts);

    Ok(SweepReport { records, solutions, c_fit, fit_residual })
}

fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn min_diff(hi: &[f64], lo: &[f64]) -> f64 {
    hi.iter().zip(lo).map(|(x, y)| x - y).fold(f64::INFINITY, f64::min)
}

fn fit_through_origin(pts: &[(f64, f64)]) -> (f64, f64) {
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let c = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|(x, y)| (y - c * x) * (y - c * x)).sum();
    let ss_tot: f64 = pts.iter().map(|(_, y)| y * y).sum();
    let residual = if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else { 0.0 };
    (c, residual)
}

/// Threshold semicontinuity probe at one level: solves at `eps ± delta`
/// and checks both perturbed thresholds against `[beta - tol, beta_hat + tol]`
/// of the base level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub eps: f64,
    pub delta: f64,
    pub beta: f64,
    pub beta_hat: f64,
    pub beta_up: f64,
    pub beta_down: Option<f64>,
    pub tolerance: f64,
    pub holds: bool,
}

/// Verifies the threshold sandwich at `eps` with probe width `delta` and
/// containment tolerance `tol` (one solver threshold tolerance).
pub fn check_beta_sandwich(
    inst: &MultiClassInstance,
    eps: f64,
    delta: f64,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<SandwichCheck> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::validation("delta", "probe width must be positive"));
    }
    let red = reduce_instance(inst)?;
    let base = shoot(&red.with_eps(eps), eps, cfg)?;
    let up = shoot(&red.with_eps(eps + delta), eps + delta, cfg)?;
    let down = if eps - delta >= 0.0 {
        Some(shoot(&red.with_eps(eps - delta), eps - delta, cfg)?)
    } else {
        None
    };
    let lo = base.beta - tol;
    let hi = base.beta_hat + tol;
    let mut holds = (lo..=hi).contains(&up.beta);
    if let Some(d) = &down {
        holds &= (lo..=hi).contains(&d.beta);
    }
    Ok(SandwichCheck {
        eps,
        delta,
        beta: base.beta,
        beta_hat: base.beta_hat,
        beta_up: up.beta,
        beta_down: down.map(|d| d.beta),
        tolerance: tol,
        holds,
    })
}

/// Verdict of the sufficient uniqueness condition for the optimal
/// reflecting strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UniquenessVerdict {
    Unique { reason: String },
    /// Some holding-cost slope equals `rho r` and the value level can
    /// match; the offending canonical slope index is reported.
    PossiblyNonUnique { slope_index: usize },
}

/// Checks: every slope `h_hat_i mu_i != rho r`, or
/// `m r + sigma^2 eps r^2 / 2 + h(b) <= 0`. Either disjunct forces
/// `beta_hat = beta`. Comparisons use a `1e-12` relative tolerance.
pub fn uniqueness_check(red: &ReducedInstance, eps: f64) -> UniquenessVerdict {
    let target = red.discount * red.r;
    let tol = 1e-12 * target.abs().max(1.0);
    let negativity = red.m * red.r
        + 0.5 * red.sigma * red.sigma * eps * red.r * red.r
        + red.holding_cost_unchecked(red.b);
    if negativity <= 0.0 {
        return UniquenessVerdict::Unique {
            reason: format!("value level bound m r + sigma^2 eps r^2/2 + h(b) = {negativity} <= 0"),
        };
    }
    // Segment slopes are the distinct h_hat_i mu_i values.
    for (j, knot) in red.h_breakpoints.iter().take(red.class_count()).enumerate() {
        if (knot.slope - target).abs() <= tol {
            return UniquenessVerdict::PossiblyNonUnique { slope_index: j };
        }
    }
    UniquenessVerdict::Unique { reason: format!("no holding-cost slope equals rho r = {target}") }
}
