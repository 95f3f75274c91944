//! Deterministic CSV and JSON rendering of solver and simulator artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs produce byte-identical files.

use serde::Serialize;

use crate::analysis::SweepReport;
use crate::hjb::ValueSolution;
use crate::simulate::{CostEstimate, LiftedPath, SimPath};

fn push_row(out: &mut String, cells: &[f64]) {
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{c}"));
    }
    out.push('\n');
}

/// Value-curve CSV: `x, V, V_prime, V_second`.
pub fn solution_csv(sol: &ValueSolution) -> String {
    let mut out = String::from("x,V,V_prime,V_second\n");
    for i in 0..sol.grid.len() {
        push_row(&mut out, &[sol.grid[i], sol.v[i], sol.v_prime[i], sol.v_second[i]]);
    }
    out
}

/// Sidecar summary for a solved value function.
#[derive(Debug, Serialize)]
pub struct SolutionSummary {
    pub s_star: f64,
    pub beta: f64,
    pub beta_hat: f64,
    pub eps: f64,
    pub residual_sup: f64,
    pub iterations: usize,
}

impl From<&ValueSolution> for SolutionSummary {
    fn from(sol: &ValueSolution) -> Self {
        SolutionSummary {
            s_star: sol.s_star,
            beta: sol.beta,
            beta_hat: sol.beta_hat,
            eps: sol.eps,
            residual_sup: sol.residual_sup,
            iterations: sol.shoot_iterations,
        }
    }
}

/// Path CSV: `t, X, Y, R, B, psi`.
pub fn path_csv(path: &SimPath) -> String {
    let mut out = String::from("t,X,Y,R,B,psi\n");
    for k in 0..path.x.len() {
        let t = k as f64 * path.dt;
        push_row(&mut out, &[t, path.x[k], path.y[k], path.r[k], path.b[k], path.psi[k]]);
    }
    out
}

/// Lifted-path CSV: one block of columns per canonical class.
pub fn lifted_csv(lift: &LiftedPath) -> String {
    let i_count = lift.class_count;
    let mut out = String::from("t");
    for name in ["X_hat", "Y_hat", "R_hat", "B_hat", "psi_hat"] {
        for j in 1..=i_count {
            out.push_str(&format!(",{name}_{j}"));
        }
    }
    out.push('\n');
    let n = lift.x_hat[0].len();
    for k in 0..n {
        let mut cells = vec![k as f64 * lift.dt];
        for series in [&lift.x_hat, &lift.y_hat, &lift.r_hat, &lift.b_hat, &lift.psi_hat] {
            for class in series.iter() {
                cells.push(class[k]);
            }
        }
        push_row(&mut out, &cells);
    }
    out
}

/// Reflection fixture CSV: `t, eta, chi, zeta1, zeta2`.
pub fn reflection_csv(eta: &crate::skorokhod::PathGrid, triple: &crate::skorokhod::ReflectionTriple) -> String {
    let mut out = String::from("t,eta,chi,zeta1,zeta2\n");
    for k in 0..eta.values.len() {
        push_row(
            &mut out,
            &[
                eta.t[k],
                eta.values[k],
                triple.chi.values[k],
                triple.zeta1.values[k],
                triple.zeta2.values[k],
            ],
        );
    }
    out
}

/// Sweep CSV: one row per `eps` level.
pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("eps,s_star,beta,beta_hat,sup_diff,margin,slack\n");
    for rec in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rec.eps,
            rec.s_star,
            rec.beta,
            rec.beta_hat,
            rec.sup_diff_to_eps0,
            rec.monotonicity_margin.map(|v| format!("{v}")).unwrap_or_default(),
            rec.bound_slack.map(|v| format!("{v}")).unwrap_or_default(),
        ));
    }
    out
}

/// Sweep summary for the JSON sidecar.
#[derive(Debug, Serialize)]
pub struct SweepSummary {
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub fit_residual: f64,
}

impl From<&SweepReport> for SweepSummary {
    fn from(report: &SweepReport) -> Self {
        SweepSummary { c_fit: report.c_fit, fit_residual: report.fit_residual }
    }
}

/// Pretty JSON with a trailing newline; struct field order is preserved, so
/// output bytes are stable.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable artifact");
    s.push('\n');
    s
}

/// Estimate JSON body.
pub fn estimate_json(est: &CostEstimate) -> String {
    to_json_pretty(est)
}
