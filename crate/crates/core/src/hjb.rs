//! Free-boundary solver for the nonlinear variational equation on `[0, b]`
//!
//! ```text
//! [f'' + H(x, f, f')] ∧ f' ∧ [r - f'] = 0,   f'(0) = 0,  f'(b) = r,
//! H(x, y, z) = (2/sigma^2) (m z + (1/2) sigma^2 eps z^2 - rho y + h(x)),
//! ```
//!
//! by shooting on the initial value `s = k(0)` of the Cauchy problem
//! `k'' + H_F(x, k, k') = 0`, `k(0) = s`, `k'(0) = 0`, where `H_F` replaces
//! the slope by a C^1 clamp `F` so the right-hand side is globally
//! Lipschitz. The solution pastes smoothly onto the affine branch of slope
//! `r` at the reflection threshold `beta`: `k'(beta) = r` and, for an
//! interior threshold, `k''(beta) = 0`.
//!
//! Classification of a trace (too low / too high / pasted) is monotone in
//! `s`; bisection first brackets on classification and then pins `s` down
//! to `s_tol` on the sign of the pasting defect, which makes boundary
//! conditions reproducible to far below the pasting tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ReducedInstance;

/// The slope clamp `F`: identity on `[-r, r]`, quadratic blends on
/// `[-2r, -r]` and `[r, 2r]`, saturated at `±3r/2` beyond. `|F| <= 3r/2`
/// and `|F'| <= 1`; the clamp is inactive wherever the converged slope
/// stays in `[0, r]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClampSpec {
    pub r: f64,
}

impl ClampSpec {
    pub fn new(r: f64) -> Self {
        ClampSpec { r }
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let r = self.r;
        if z < -2.0 * r {
            -1.5 * r
        } else if z < -r {
            0.5 * r + 2.0 * z + z * z / (2.0 * r)
        } else if z <= r {
            z
        } else if z < 2.0 * r {
            -0.5 * r + 2.0 * z - z * z / (2.0 * r)
        } else {
            1.5 * r
        }
    }
}

/// Clamped slope `F(z)`.
pub fn clamp(spec: &ClampSpec, z: f64) -> f64 {
    spec.value(z)
}

/// `H(x, y, z)` for the given game; errors when `x` leaves `[0, b]`.
pub fn hamiltonian(red: &ReducedInstance, eps: f64, x: f64, y: f64, z: f64) -> Result<f64> {
    if !(0.0..=red.b).contains(&x) {
        return Err(Error::Domain(format!("workload {x} outside [0, {}]", red.b)));
    }
    Ok(hamiltonian_raw(red, eps, x, y, z))
}

#[inline]
fn hamiltonian_raw(red: &ReducedInstance, eps: f64, x: f64, y: f64, z: f64) -> f64 {
    let sig_sq = red.sigma * red.sigma;
    2.0 / sig_sq
        * (red.m * z + 0.5 * sig_sq * eps * z * z - red.discount * y
            + red.holding_cost_unchecked(x))
}

#[inline]
fn hamiltonian_clamped(red: &ReducedInstance, eps: f64, clamp: &ClampSpec, x: f64, y: f64, z: f64) -> f64 {
    hamiltonian_raw(red, eps, x, y, clamp.value(z))
}

/// Solver knobs. `paste_tol = None` resolves to the scale-relative default
/// `1e-6 * (2/sigma^2) * h(b)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Uniform cells on `[0, b]`.
    pub cells: usize,
    /// Pasting tolerance on the curvature at the candidate threshold.
    pub paste_tol: Option<f64>,
    /// Bisection width at which the shot parameter is considered converged.
    pub s_tol: f64,
    /// Cap on Cauchy integrations per solve.
    pub max_shots: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cells: 4096, paste_tol: None, s_tol: 1e-12, max_shots: 400 }
    }
}

impl SolverConfig {
    pub fn resolved_paste_tol(&self, red: &ReducedInstance) -> f64 {
        self.paste_tol.unwrap_or_else(|| default_paste_tol(red))
    }
}

/// Scale-relative pasting tolerance `1e-6 * (2/sigma^2) * h(b)`.
pub fn default_paste_tol(red: &ReducedInstance) -> f64 {
    1e-6 * 2.0 / (red.sigma * red.sigma) * red.holding_cost_unchecked(red.b)
}

/// Outcome of one Cauchy integration, relative to the pasting conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// No slope-`r` crossing and `k'(b) < r - paste_tol`: raise `s`.
    TooLow,
    /// Crossing with curvature above `paste_tol`: lower `s`.
    TooHigh,
    /// Smooth pasting within tolerance (interior crossing with flat
    /// curvature, or grazing `k'(b) = r` at the right endpoint).
    Pasted,
}

/// One integrated shot `k^(s)`. The mesh spans `[0, b]` for shots that
/// never reach the rejection slope and stops at the crossing cell
/// otherwise; past the threshold the affine branch replaces the trace.
#[derive(Debug, Clone)]
pub struct CauchyTrace {
    pub s: f64,
    pub grid: Vec<f64>,
    pub k: Vec<f64>,
    pub k_prime: Vec<f64>,
    pub k_second: Vec<f64>,
    /// First slope-`r` crossing (root-polished inside its cell), or `b`.
    pub beta_s: f64,
    /// `k(beta_s)` and `k'(beta_s)` from the polished crossing state.
    pub beta_value: f64,
    pub beta_slope: f64,
    /// Maximum of `k'` up to the crossing (over all of `[0, b]` when there
    /// is none), with interior peaks resolved inside their cells.
    pub max_slope: f64,
    /// `k''(beta_s)`.
    pub pasting_curvature: f64,
    pub classification: Classification,
    crossed: bool,
    target_r: f64,
}

impl CauchyTrace {
    /// Signed pasting defect `max k' - r`: negative shots never reach the
    /// rejection slope, positive shots overshoot it. The defect is
    /// continuous in `s` and vanishes exactly at the pasted solution, both
    /// for interior (tangential) thresholds and for grazing at `b`.
    pub fn defect(&self) -> f64 {
        self.max_slope - self.target_r
    }
}

/// Integrates the Cauchy problem `k'' = -H_F(x, k, k')`, `k(0) = s`,
/// `k'(0) = 0` with a classical fixed-step fourth-order scheme on the
/// first-order system `(k, k')`, stopping at the first slope-`r` crossing
/// (or `b`).
pub fn integrate_cauchy(
    red: &ReducedInstance,
    eps: f64,
    s: f64,
    cfg: &SolverConfig,
) -> Result<CauchyTrace> {
    if cfg.cells < 16 {
        return Err(Error::validation("cells", "need at least 16 mesh cells"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::validation("eps", "must be nonnegative and finite"));
    }
    let n = cfg.cells;
    let b = red.b;
    let r = red.r;
    // Slope feedback stiffness: the integrator must resolve the boundary
    // layer of rate (2/sigma^2)(|m| + sigma^2 eps |F|_max) or the one-step
    // scheme leaves its stability region.
    let sig_sq = red.sigma * red.sigma;
    let stiffness = 2.0 / sig_sq * (red.m.abs() + sig_sq * eps * 1.5 * r);
    if b / n as f64 * stiffness > 2.5 {
        let needed = (b * stiffness / 2.5).ceil() as usize;
        return Err(Error::Validation {
            field: "cells",
            message: format!(
                "{n} cells under-resolve the slope feedback at eps = {eps} (need at least {needed})"
            ),
        });
    }
    let clamp = ClampSpec::new(r);
    let paste_tol = cfg.resolved_paste_tol(red);

    let mut grid: Vec<f64> = (0..=n).map(|i| b * (i as f64 / n as f64)).collect();
    let mut k = Vec::with_capacity(n + 1);
    let mut k_prime = Vec::with_capacity(n + 1);
    let mut k_second = Vec::with_capacity(n + 1);

    let rhs = |x: f64, u: f64, v: f64| -> (f64, f64) {
        (v, -hamiltonian_clamped(red, eps, &clamp, x, u, v))
    };

    let mut u = s;
    let mut v = 0.0f64;
    k.push(u);
    k_prime.push(v);
    k_second.push(-hamiltonian_clamped(red, eps, &clamp, 0.0, u, v));

    // Integrate until the slope reaches r, resolving the crossing inside
    // its cell; near the pasted solution the contact is tangential (an
    // interior maximum of k' touching r), so local maxima are refined too.
    // Integration stops at the crossing: past the threshold the affine
    // branch replaces the trace, and for large eps the equation turns stiff
    // once the slope leaves [0, r].
    let eval = |k: &[f64], k_prime: &[f64], i: usize, x: f64| -> (f64, f64) {
        if x <= grid[i] {
            (k[i], k_prime[i])
        } else {
            rk4_step(&rhs, grid[i], k[i], k_prime[i], x - grid[i])
        }
    };

    let mut crossing: Option<(f64, f64, f64)> = None;
    let mut max_slope = v;
    for i in 0..n {
        let x = grid[i];
        let h = grid[i + 1] - grid[i];
        let (u1, v1) = rk4_step(&rhs, x, u, v, h);
        if !(u1.is_finite() && v1.is_finite()) {
            return Err(Error::Solver(format!(
                "non-finite state at x = {} while shooting from s = {s}",
                grid[i + 1]
            )));
        }
        u = u1;
        v = v1;
        k.push(u);
        k_prime.push(v);
        k_second.push(-hamiltonian_clamped(red, eps, &clamp, grid[i + 1], u, v));

        if v >= r {
            // Transversal crossing inside (grid[i], grid[i+1]].
            let state = slope_root(&|j, x| eval(&k, &k_prime, j, x), i, grid[i], grid[i + 1], r);
            max_slope = max_slope.max(v);
            crossing = Some(state);
            break;
        }
        if k_second[i] > 0.0 && k_second[i + 1] < 0.0 {
            // Interior maximum of k' in this cell.
            let (x_peak, peak) =
                slope_peak(&|j, x| eval(&k, &k_prime, j, x), i, grid[i], grid[i + 1]);
            max_slope = max_slope.max(peak.1);
            if peak.1 >= r {
                let state = slope_root(&|j, x| eval(&k, &k_prime, j, x), i, grid[i], x_peak, r);
                crossing = Some(state);
                break;
            }
        }
        max_slope = max_slope.max(v);
    }

    let (beta_s, beta_value, beta_slope, crossed) = match crossing {
        Some((bx, bv, bs)) => {
            grid.truncate(k.len());
            (bx, bv, bs, true)
        }
        None => (b, k[n], k_prime[n], false),
    };
    let pasting_curvature = -hamiltonian_clamped(red, eps, &clamp, beta_s, beta_value, beta_slope);

    let classification = if crossed {
        if beta_s < b {
            if pasting_curvature > paste_tol {
                Classification::TooHigh
            } else {
                Classification::Pasted
            }
        } else if (beta_slope - r).abs() <= paste_tol {
            Classification::Pasted
        } else {
            Classification::TooHigh
        }
    } else if (beta_slope - r).abs() <= paste_tol {
        Classification::Pasted
    } else {
        Classification::TooLow
    };

    Ok(CauchyTrace {
        s,
        grid,
        k,
        k_prime,
        k_second,
        beta_s,
        beta_value,
        beta_slope,
        max_slope,
        pasting_curvature,
        classification,
        crossed,
        target_r: r,
    })
}

/// Root of `k'(x) = r` in `[lo, hi]` by bisection on substep evaluations
/// from node `i`; assumes `k'(lo) <= r <= k'` somewhere in the bracket.
fn slope_root<F>(eval: &F, i: usize, lo: f64, hi: f64, r: f64) -> (f64, f64, f64)
where
    F: Fn(usize, f64) -> (f64, f64),
{
    let (mut a, mut b) = (lo, hi);
    for _ in 0..64 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let (_, v) = eval(i, mid);
        if v < r {
            a = mid;
        } else {
            b = mid;
        }
    }
    let x = b;
    let (u, v) = eval(i, x);
    (x, u, v)
}

/// Maximum of `k'` in `[lo, hi]` by golden-section on substep evaluations
/// from node `i`. Returns the abscissa and the `(k, k')` state there.
fn slope_peak<F>(eval: &F, i: usize, lo: f64, hi: f64) -> (f64, (f64, f64))
where
    F: Fn(usize, f64) -> (f64, f64),
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(i, c).1;
    let mut fd = eval(i, d).1;
    for _ in 0..64 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(i, c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(i, d).1;
        }
        if b - a < 1e-15 * (1.0 + hi.abs()) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, eval(i, x))
}

fn rk4_step<F>(rhs: &F, x: f64, u: f64, v: f64, h: f64) -> (f64, f64)
where
    F: Fn(f64, f64, f64) -> (f64, f64),
{
    let (a1, b1) = rhs(x, u, v);
    let (a2, b2) = rhs(x + 0.5 * h, u + 0.5 * h * a1, v + 0.5 * h * b1);
    let (a3, b3) = rhs(x + 0.5 * h, u + 0.5 * h * a2, v + 0.5 * h * b2);
    let (a4, b4) = rhs(x + h, u + h * a3, v + h * b3);
    (
        u + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        v + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

/// Grid solution of the variational problem: the pasted shot on
/// `[0, beta]` extended affinely with slope `r` on `[beta, b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueSolution {
    pub reduced: ReducedInstance,
    pub eps: f64,
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub v_second: Vec<f64>,
    /// `V(0; eps)`, the converged shot parameter.
    pub s_star: f64,
    /// Reflection threshold `beta_eps`.
    pub beta: f64,
    /// Upper optimal threshold `beta_hat >= beta`.
    pub beta_hat: f64,
    pub shoot_iterations: usize,
    /// Finite-difference sup-norm of the equation residual on `[0, beta]`.
    pub residual_sup: f64,
}

/// Shooting solve of the free-boundary problem.
///
/// Brackets the shot parameter between a too-low and a too-high trace
/// (upper seed from the a-priori bound
/// `(2|m| r + 2 sigma^2 eps r^2 + h(b) + r sigma^2 / b) / rho + 1`,
/// lower seed by doubling a negative excursion from 0), then bisects: on
/// classification until the pasted band is reached, and on the sign of the
/// pasting defect inside the band until the bracket is narrower than
/// `s_tol`. The returned solution carries the pasted trace with the
/// smallest defect magnitude.
pub fn shoot(red: &ReducedInstance, eps: f64, cfg: &SolverConfig) -> Result<ValueSolution> {
    let r = red.r;
    let sig_sq = red.sigma * red.sigma;
    let h_b = red.holding_cost_unchecked(red.b);
    let s_hi_seed =
        (2.0 * red.m.abs() * r + 2.0 * sig_sq * eps * r * r + h_b + r * sig_sq / red.b)
            / red.discount
            + 1.0;

    let mut shots = 0usize;
    let mut fire = |s: f64| -> Result<CauchyTrace> {
        shots += 1;
        if shots > cfg.max_shots {
            return Err(Error::Solver(format!("exceeded {} integrations", cfg.max_shots)));
        }
        integrate_cauchy(red, eps, s, cfg)
    };

    // Classification interval structure is asserted while bracketing.
    let mut max_too_low = f64::NEG_INFINITY;
    let mut min_too_high = f64::INFINITY;
    let mut best: Option<CauchyTrace> = None;
    let mut note = |trace: &CauchyTrace, best: &mut Option<CauchyTrace>| -> Result<()> {
        match trace.classification {
            Classification::TooLow => max_too_low = max_too_low.max(trace.s),
            Classification::TooHigh => min_too_high = min_too_high.min(trace.s),
            Classification::Pasted => {
                // Prefer traces that actually reach the rejection slope:
                // when V' is flat at r past the threshold, the crossed
                // trace pins beta at the infimum of the flat stretch.
                let replace = match best.as_ref() {
                    None => true,
                    Some(t) if trace.crossed != t.crossed => trace.crossed,
                    Some(t) => trace.defect().abs() < t.defect().abs(),
                };
                if replace {
                    *best = Some(trace.clone());
                }
            }
        }
        if max_too_low >= min_too_high {
            return Err(Error::Solver(format!(
                "classification is not monotone in s: TooLow at {max_too_low} above TooHigh at {min_too_high}"
            )));
        }
        Ok(())
    };

    let hi_trace = fire(s_hi_seed)?;
    note(&hi_trace, &mut best)?;
    if hi_trace.classification == Classification::TooLow {
        return Err(Error::Solver(format!(
            "upper bracket seed {s_hi_seed} classified TooLow; instance outside solver assumptions"
        )));
    }
    let mut hi = s_hi_seed;

    // Walk 0, -1, -2, -4, ... until a TooLow trace is found.
    let mut lo = 0.0f64;
    let mut excursion = 1.0f64;
    let mut found_low = false;
    for doubling in 0..=60 {
        let trace = fire(lo)?;
        note(&trace, &mut best)?;
        match trace.classification {
            Classification::TooLow => {
                found_low = true;
                break;
            }
            Classification::TooHigh => hi = hi.min(lo),
            Classification::Pasted => {}
        }
        if doubling == 60 {
            break;
        }
        lo = -excursion;
        excursion *= 2.0;
    }
    if !found_low {
        return Err(Error::Solver(
            "no TooLow classification found within 60 doublings of the lower seed".into(),
        ));
    }

    // Bisection on the sign of the pasting defect. The defect varies
    // continuously through zero, so halving proceeds past `s_tol` if the
    // pasted band has not been hit yet; the band always spans many ulps.
    loop {
        let width = hi - lo;
        if width <= cfg.s_tol && best.is_some() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // float resolution exhausted
        }
        let trace = fire(mid)?;
        note(&trace, &mut best)?;
        if trace.defect() > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let trace = best.ok_or_else(|| {
        Error::Solver(format!(
            "bracket [{lo}, {hi}] reached float resolution without a pasted trace; \
             paste_tol may be below the attainable pasting accuracy on this mesh"
        ))
    })?;

    let solution = build_solution(red, eps, trace, shots, cfg.cells);
    Ok(solution)
}

fn build_solution(
    red: &ReducedInstance,
    eps: f64,
    trace: CauchyTrace,
    shots: usize,
    cells: usize,
) -> ValueSolution {
    let n = cells;
    let beta = trace.beta_s;
    let r = red.r;
    let mut v = Vec::with_capacity(n + 1);
    let mut v_prime = Vec::with_capacity(n + 1);
    let mut v_second = Vec::with_capacity(n + 1);
    let grid: Vec<f64> = (0..=n).map(|i| red.b * (i as f64 / n as f64)).collect();
    for (i, &x) in grid.iter().enumerate() {
        if x <= beta && i < trace.k.len() {
            v.push(trace.k[i]);
            // Tangential contact may overshoot r by the pasting defect;
            // project onto the analytic bound V' <= r.
            v_prime.push(trace.k_prime[i].min(r));
            v_second.push(trace.k_second[i]);
        } else {
            v.push(trace.beta_value + r * (x - beta));
            v_prime.push(r);
            v_second.push(0.0);
        }
    }

    let mut sol = ValueSolution {
        reduced: red.clone(),
        eps,
        grid,
        v,
        v_prime,
        v_second,
        s_star: trace.s,
        beta,
        beta_hat: beta,
        shoot_iterations: shots,
        residual_sup: 0.0,
    };
    sol.beta_hat = beta_hat(&sol);
    sol.residual_sup = verify_solution(&sol).residual_sup;
    sol
}

/// Largest `x` such that the equation residual vanishes on all of
/// `[0, x]`: past `beta` the affine branch keeps solving the equation
/// exactly while the holding-cost slope equals `rho * r` and the value
/// identity `rho V = m r + sigma^2 r^2 eps / 2 + h` holds. Returns `beta`
/// when that interval is degenerate.
pub fn beta_hat(sol: &ValueSolution) -> f64 {
    let red = &sol.reduced;
    let r = red.r;
    if sol.beta >= red.b {
        return red.b;
    }
    let slope_target = red.discount * r;
    let slope_tol = 1e-12 * slope_target.max(1.0);
    // Value identity tolerance: the pasting curvature tolerance expressed
    // in value units.
    let value_tol = default_paste_tol(red) * red.sigma * red.sigma / 2.0 / red.discount.max(1e-300);

    let value_identity_holds = |x: f64, v: f64| -> bool {
        let target =
            (red.m * r + 0.5 * red.sigma * red.sigma * r * r * sol.eps + red.holding_cost_unchecked(x))
                / red.discount;
        (v - target).abs() <= value_tol
    };

    let v_at = |x: f64| -> f64 {
        // On the affine branch.
        sol.value_at_beta() + r * (x - sol.beta)
    };

    if !value_identity_holds(sol.beta, sol.value_at_beta()) {
        return sol.beta;
    }

    let mut x_end = sol.beta;
    let knots = &red.h_breakpoints;
    for j in 0..knots.len() - 1 {
        let (w_lo, w_hi) = (knots[j].workload, knots[j + 1].workload);
        if w_hi <= x_end {
            continue;
        }
        if x_end < w_lo {
            break;
        }
        // Segment containing or starting at x_end.
        if (knots[j].slope - slope_target).abs() <= slope_tol
            && value_identity_holds(x_end, v_at(x_end))
        {
            x_end = w_hi;
        } else {
            break;
        }
    }
    x_end.min(red.b)
}

impl ValueSolution {
    fn value_at_beta(&self) -> f64 {
        // The affine branch anchors at the polished crossing state; grid
        // nodes past beta encode it, and for beta on the last node the value
        // is the last sample.
        let r = self.reduced.r;
        match self.grid.iter().position(|&x| x > self.beta) {
            Some(i) => self.v[i] - r * (self.grid[i] - self.beta),
            None => *self.v.last().unwrap(),
        }
    }

    /// Linear interpolation of `V` at `x` in `[0, b]`.
    pub fn value_at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.v, x)
    }

    /// Linear interpolation of `V'` at `x` in `[0, b]`.
    pub fn slope_at(&self, x: f64) -> f64 {
        interpolate(&self.grid, &self.v_prime, x)
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len() - 1;
    let b = grid[n];
    let x = x.clamp(grid[0], b);
    let step = b / n as f64;
    let mut i = ((x / b) * n as f64).floor() as usize;
    if i >= n {
        i = n - 1;
    }
    // Guard against roundoff in the cell index.
    while i > 0 && x < grid[i] {
        i -= 1;
    }
    while i + 1 < n && x >= grid[i + 1] {
        i += 1;
    }
    let w = (x - grid[i]) / step;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Residual diagnostics for a solved value function. All derivative checks
/// are independent finite-difference evaluations, not the integrator's own
/// stored curvature.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sup |D(V') + H(x, V, V')|` on `[0, beta]`, `D` a fourth-order stencil.
    pub residual_sup: f64,
    /// `sup |V' - r|` on `[beta, b]`.
    pub slope_defect_sup: f64,
    /// `|V'(0)|`.
    pub left_neumann: f64,
    /// `|V'(b) - r|`.
    pub right_neumann: f64,
    pub v_prime_min: f64,
    pub v_prime_max: f64,
    /// `min (V'' + H)` on `[beta, b]`; the variational inequality requires
    /// this to be nonnegative up to tolerance.
    pub inequality_min: f64,
    /// `sup |D(V) - V'|` on the whole interval (derivative consistency).
    pub derivative_defect_sup: f64,
}

/// Computes the residual report for `sol`.
///
/// Derivatives are measured with fourth-order stencils confined to the
/// panels on which the solution is smooth: stencils never straddle the
/// pasting point or a holding-cost breakpoint, where third derivatives
/// jump and a naive stencil would report spurious residual.
pub fn verify_solution(sol: &ValueSolution) -> ResidualReport {
    let red = &sol.reduced;
    let n = sol.grid.len() - 1;
    let dx = red.b / n as f64;

    let mut boundaries: Vec<f64> = red
        .h_breakpoints
        .iter()
        .map(|k| k.workload)
        .filter(|&w| w > 0.0 && w < red.b)
        .collect();
    if sol.beta > 0.0 && sol.beta < red.b {
        boundaries.push(sol.beta);
    }
    boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let fd_vpp = panelwise_fd4(&sol.v_prime, &sol.grid, dx, &boundaries);
    let fd_vp = panelwise_fd4(&sol.v, &sol.grid, dx, &boundaries);

    let mut residual_sup = 0.0f64;
    let mut slope_defect_sup = 0.0f64;
    let mut inequality_min = f64::INFINITY;
    let mut derivative_defect_sup = 0.0f64;
    let mut v_prime_min = f64::INFINITY;
    let mut v_prime_max = f64::NEG_INFINITY;

    for i in 0..=n {
        let x = sol.grid[i];
        v_prime_min = v_prime_min.min(sol.v_prime[i]);
        v_prime_max = v_prime_max.max(sol.v_prime[i]);
        if let Some(fd) = fd_vp[i] {
            derivative_defect_sup = derivative_defect_sup.max((fd - sol.v_prime[i]).abs());
        }
        let ham = hamiltonian_raw(red, sol.eps, x, sol.v[i], sol.v_prime[i]);
        if x <= sol.beta {
            if let Some(fd) = fd_vpp[i] {
                residual_sup = residual_sup.max((fd + ham).abs());
            }
        }
        if x >= sol.beta {
            slope_defect_sup = slope_defect_sup.max((sol.v_prime[i] - red.r).abs());
            inequality_min = inequality_min.min(sol.v_second[i] + ham);
        }
    }

    ResidualReport {
        residual_sup,
        slope_defect_sup,
        left_neumann: sol.v_prime[0].abs(),
        right_neumann: (sol.v_prime[n] - red.r).abs(),
        v_prime_min,
        v_prime_max,
        inequality_min,
        derivative_defect_sup,
    }
}

/// Fourth-order first derivative per smoothness panel; `None` where a
/// panel is too short for a five-node stencil.
fn panelwise_fd4(
    values: &[f64],
    grid: &[f64],
    dx: f64,
    boundaries: &[f64],
) -> Vec<Option<f64>> {
    let n = values.len();
    let mut out = vec![None; n];
    // Panel id per node: number of boundaries strictly below x (a node
    // sitting on a boundary joins the left panel).
    let panel_of = |x: f64| boundaries.iter().filter(|&&w| w < x).count();
    // Five-node first-derivative weights by eval position, all O(dx^4).
    const W: [[f64; 5]; 5] = [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
        [1.0, -8.0, 0.0, 8.0, -1.0],
        [-1.0, 6.0, -18.0, 10.0, 3.0],
        [3.0, -16.0, 36.0, -48.0, 25.0],
    ];
    let mut start = 0usize;
    while start < n {
        let p = panel_of(grid[start]);
        let mut end = start;
        while end + 1 < n && panel_of(grid[end + 1]) == p {
            end += 1;
        }
        if end - start + 1 >= 5 {
            for i in start..=end {
                let j = i.saturating_sub(2).clamp(start, end - 4);
                let w = &W[i - j];
                let fd = (0..5).map(|o| w[o] * values[j + o]).sum::<f64>() / (12.0 * dx);
                out[i] = Some(fd);
            }
        }
        start = end + 1;
    }
    out
}
