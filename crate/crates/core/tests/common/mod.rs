//! Shared fixtures and independent oracles for the integration suites.
//!
//! The finite-difference solver here is the acceptance oracle for the
//! risk-neutral free-boundary problem: a dense tridiagonal two-point BVP
//! solve with Neumann data, combined with bisection on the pasting defect.
//! It shares no code with the shooting solver it checks.

use ambictrl::model::{MultiClassInstance, ReducedInstance};

/// The default three-class instance shipped with the repository.
pub fn default_instance() -> MultiClassInstance {
    MultiClassInstance {
        class_count: 3,
        lambda: vec![1.0, 1.0 / 3.0, 0.5],
        mu: vec![3.0, 1.0, 1.5],
        lambda_hat: vec![0.0, 0.0, 0.0],
        mu_hat: vec![1.0, 1.0, 1.0],
        h_hat: vec![1.0, 2.5, 1.5],
        r_hat: vec![1.0, 1.0, 1.0],
        b_hat: vec![4.0, 7.0, 6.0],
        eps_hat: vec![1.0, 1.0, 1.0],
        discount: 1.0,
    }
}

/// Solution of the linear (risk-neutral) BVP for a fixed threshold:
/// `1/2 sigma^2 k'' + m k' - rho k + h = 0` on `[0, beta]`,
/// `k'(0) = 0`, `k'(beta) = r`, by second-order central differences with
/// ghost-node Neumann rows, solved with the Thomas algorithm.
pub struct FdSolution {
    pub beta: f64,
    pub grid: Vec<f64>,
    pub k: Vec<f64>,
}

impl FdSolution {
    /// Piecewise-linear evaluation, extended affinely with slope `r`
    /// past `beta`.
    pub fn value_at(&self, x: f64, r: f64) -> f64 {
        let n = self.grid.len() - 1;
        if x >= self.beta {
            return self.k[n] + r * (x - self.beta);
        }
        let step = self.beta / n as f64;
        let mut i = (x / step).floor() as usize;
        if i >= n {
            i = n - 1;
        }
        let w = (x - self.grid[i]) / step;
        self.k[i] * (1.0 - w) + self.k[i + 1] * w
    }
}

fn thomas_solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Solves the fixed-threshold BVP on `cells` cells and returns the grid
/// values together with the pasting defect `rho k(beta) - m r - h(beta)`
/// (proportional to `k''(beta)`).
pub fn fd_solve_at(red: &ReducedInstance, beta: f64, cells: usize) -> (FdSolution, f64) {
    let n = cells;
    let step = beta / n as f64;
    let sig_sq = red.sigma * red.sigma;
    let rho = red.discount;
    let m = red.m;
    let r = red.r;

    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    let mut c = vec![0.0; n + 1];
    let mut d = vec![0.0; n + 1];

    let h = |x: f64| red.holding_cost(x.min(red.b)).unwrap();

    b[0] = -sig_sq / (step * step) - rho;
    c[0] = sig_sq / (step * step);
    d[0] = -h(0.0);
    for i in 1..n {
        let x = i as f64 * step;
        a[i] = 0.5 * sig_sq / (step * step) - m / (2.0 * step);
        b[i] = -sig_sq / (step * step) - rho;
        c[i] = 0.5 * sig_sq / (step * step) + m / (2.0 * step);
        d[i] = -h(x);
    }
    a[n] = sig_sq / (step * step);
    b[n] = -sig_sq / (step * step) - rho;
    d[n] = -sig_sq * r / step - m * r - h(beta);

    let k = thomas_solve(&a, &b, &c, &d);
    let defect = rho * k[n] - m * r - h(beta);
    let grid = (0..=n).map(|i| beta * (i as f64 / n as f64)).collect();
    (FdSolution { beta, grid, k }, defect)
}

/// Exact minimal total variation over all feasible lattice regulator
/// pairs, by dynamic programming over the constrained state. The state is
/// Markov and total variation additive, so the DP minimum equals the
/// minimum of an exhaustive enumeration.
pub fn dp_min_total_variation(eta: &[f64], alpha: f64, beta: f64, g: f64) -> f64 {
    let states: Vec<f64> = {
        let n = ((beta - alpha) / g).round() as usize;
        (0..=n).map(|k| alpha + k as f64 * g).collect()
    };
    let mut cost: Vec<f64> = states.iter().map(|&s| (s - eta[0]).abs()).collect();
    for w in eta.windows(2) {
        let d = w[1] - w[0];
        let mut next = vec![f64::INFINITY; states.len()];
        for (i, &s) in states.iter().enumerate() {
            if !cost[i].is_finite() {
                continue;
            }
            for (j, &s2) in states.iter().enumerate() {
                let c = cost[i] + (s2 - s - d).abs();
                if c < next[j] {
                    next[j] = c;
                }
            }
        }
        cost = next;
    }
    cost.into_iter().fold(f64::INFINITY, f64::min)
}

/// Literal enumeration over per-step regulator increment pairs, feasible
/// prefixes only; validates the DP on short meshes.
pub fn enumerate_min_total_variation(
    eta: &[f64],
    alpha: f64,
    beta: f64,
    g: f64,
    k_max: usize,
) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        eta: &[f64],
        alpha: f64,
        beta: f64,
        g: f64,
        k_max: usize,
        step: usize,
        chi: f64,
        tv: f64,
        best: &mut f64,
    ) {
        if tv >= *best {
            return;
        }
        if step == eta.len() {
            *best = tv;
            return;
        }
        let drive = if step == 0 { eta[0] } else { chi + (eta[step] - eta[step - 1]) };
        for dz1 in 0..=k_max {
            for dz2 in 0..=k_max {
                let inc1 = dz1 as f64 * g;
                let inc2 = dz2 as f64 * g;
                let next = drive + inc1 - inc2;
                if next < alpha - 1e-9 || next > beta + 1e-9 {
                    continue;
                }
                recurse(eta, alpha, beta, g, k_max, step + 1, next, tv + inc1 + inc2, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    recurse(eta, alpha, beta, g, k_max, 0, 0.0, 0.0, &mut best);
    best
}

/// Full oracle: scans for a sign change of the pasting defect in the
/// threshold, bisects it on the dense mesh, and returns the pasted
/// solution (`beta = b` when the defect never changes sign).
pub fn fd_oracle(red: &ReducedInstance, cells: usize) -> FdSolution {
    let scan: Vec<f64> = (1..=64).map(|i| red.b * i as f64 / 64.0).collect();
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for &beta in &scan {
        let (_, defect) = fd_solve_at(red, beta, 4096);
        if let Some((pb, pd)) = prev {
            if pd > 0.0 && defect <= 0.0 {
                bracket = Some((pb, beta));
                break;
            }
        }
        prev = Some((beta, defect));
    }
    let Some((mut lo, mut hi)) = bracket else {
        return fd_solve_at(red, red.b, cells).0;
    };
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (_, defect) = fd_solve_at(red, mid, cells);
        if defect > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    fd_solve_at(red, 0.5 * (lo + hi), cells).0
}
