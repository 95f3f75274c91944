//! Multiclass problem data and its projection to the one-dimensional
//! workload game.
//!
//! A critically loaded system of `I` customer classes is reduced to a scalar
//! controlled diffusion on `[0, b]`: drift `m = theta . m_hat`, noise
//! `sigma = ||theta sigma_hat||`, aggregated ambiguity weight `eps`, a
//! piecewise-linear convex holding cost `h`, and the cheapest weighted
//! rejection price `r`. The map `gamma` lifts any workload level back to the
//! cheapest queue-length configuration carrying that workload, which is how
//! optimal multidimensional play collapses onto a one-dimensional curve.
//!
//! All quantities are stored in *canonical class order*: classes sorted by
//! `h_hat_i * mu_i` descending (stable), so that the cheapest class sits
//! last and buffers are filled from the back. `class_order` records the
//! permutation back to the user's input order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the critical-load constraint `sum lambda_i / mu_i = 1`.
pub const CRITICAL_LOAD_TOL: f64 = 1e-12;

/// Full multiclass problem data, in user input order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiClassInstance {
    pub class_count: usize,
    /// First-order arrival rates `lambda_i > 0`.
    pub lambda: Vec<f64>,
    /// First-order service rates `mu_i > 0`.
    pub mu: Vec<f64>,
    /// Second-order arrival rates `lambda_hat_i` (any sign).
    pub lambda_hat: Vec<f64>,
    /// Second-order service rates `mu_hat_i` (any sign).
    pub mu_hat: Vec<f64>,
    /// Holding costs `h_hat_i > 0` per customer.
    pub h_hat: Vec<f64>,
    /// Rejection costs `r_hat_i > 0` per customer.
    pub r_hat: Vec<f64>,
    /// Buffer capacities `b_hat_i > 0` in customers.
    pub b_hat: Vec<f64>,
    /// Per-class ambiguity weights `eps_hat_i > 0`.
    pub eps_hat: Vec<f64>,
    /// Discount rate `rho > 0`.
    pub discount: f64,
}

/// One knot of the piecewise-linear holding cost: `slope` applies on the
/// segment to the right of `workload` (the last knot repeats the slope of
/// its left segment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub workload: f64,
    pub cost: f64,
    pub slope: f64,
}

/// One-dimensional game data produced by [`reduce_instance`].
///
/// Vector fields are in canonical order; `class_order[k]` is the original
/// index of canonical class `k`, and `i_star` is a canonical position.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedInstance {
    /// Workload weights `theta_i = 1 / mu_i`.
    pub theta: Vec<f64>,
    /// Drift `theta . m_hat` with `m_hat_i = lambda_hat_i - rho_i mu_hat_i`.
    pub m: f64,
    /// Diffusion coefficient `||theta sigma_hat||`, `sigma_hat_i = sqrt(2 lambda_i)`.
    pub sigma: f64,
    /// Right endpoint `b = theta . b_hat`.
    pub b: f64,
    /// Aggregated ambiguity `(1/sigma^2) sum (theta sigma_hat)_i^2 eps_hat_i`.
    pub eps: f64,
    /// Discount rate.
    pub discount: f64,
    /// `I + 1` knots of the holding cost, cheapest slope first.
    pub h_breakpoints: Vec<Knot>,
    /// Rejection price `min_i r_hat_i mu_i`.
    pub r: f64,
    /// Canonical position of the class attaining `r` (ties: smallest
    /// original index).
    pub i_star: usize,
    /// Canonical-to-original index permutation.
    pub class_order: Vec<usize>,
}

impl MultiClassInstance {
    /// Checks positivity, dimensions, and the critical-load constraint.
    pub fn validate(&self) -> Result<()> {
        let i = self.class_count;
        if i == 0 {
            return Err(Error::validation("class_count", "must be at least 1"));
        }
        let dims: [(&str, usize); 8] = [
            ("lambda", self.lambda.len()),
            ("mu", self.mu.len()),
            ("lambda_hat", self.lambda_hat.len()),
            ("mu_hat", self.mu_hat.len()),
            ("h_hat", self.h_hat.len()),
            ("r_hat", self.r_hat.len()),
            ("b_hat", self.b_hat.len()),
            ("eps_hat", self.eps_hat.len()),
        ];
        for (name, len) in dims {
            if len != i {
                return Err(Error::Validation {
                    field: "class_count",
                    message: format!("`{name}` has length {len}, expected {i}"),
                });
            }
        }
        check_positive("lambda", &self.lambda)?;
        check_positive("mu", &self.mu)?;
        check_positive("h_hat", &self.h_hat)?;
        check_positive("r_hat", &self.r_hat)?;
        check_positive("b_hat", &self.b_hat)?;
        check_positive("eps_hat", &self.eps_hat)?;
        check_finite("lambda_hat", &self.lambda_hat)?;
        check_finite("mu_hat", &self.mu_hat)?;
        if !(self.discount > 0.0 && self.discount.is_finite()) {
            return Err(Error::validation("discount", "must be positive and finite"));
        }
        let load: f64 = self.load();
        if (load - 1.0).abs() > CRITICAL_LOAD_TOL {
            return Err(Error::Validation {
                field: "lambda",
                message: format!(
                    "system is not critically loaded: sum lambda_i/mu_i = {load:.17} (tolerance {CRITICAL_LOAD_TOL:e}); \
                     renormalize with `renormalized_load()` if intended"
                ),
            });
        }
        Ok(())
    }

    /// Total offered load `sum_i lambda_i / mu_i`.
    pub fn load(&self) -> f64 {
        self.lambda.iter().zip(&self.mu).map(|(l, m)| l / m).sum()
    }

    /// Returns a copy with `lambda` scaled so the critical-load constraint
    /// holds exactly (up to roundoff). Use for user-entered rates that miss
    /// `sum rho_i = 1` by more than the tolerance.
    pub fn renormalized_load(&self) -> Self {
        let load = self.load();
        let mut out = self.clone();
        for l in &mut out.lambda {
            *l /= load;
        }
        out
    }
}

fn check_positive(field: &'static str, xs: &[f64]) -> Result<()> {
    for (idx, &x) in xs.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Validation {
                field,
                message: format!("entry {idx} is {x}, expected positive and finite"),
            });
        }
    }
    Ok(())
}

fn check_finite(field: &'static str, xs: &[f64]) -> Result<()> {
    for (idx, &x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::Validation { field, message: format!("entry {idx} is {x}") });
        }
    }
    Ok(())
}

/// On-disk instance format: `eps_hat` may be given directly or through the
/// per-rate ambiguity pairs `kappa = [[kappa_1i, kappa_2i], ...]`.
#[derive(Debug, Deserialize)]
struct InstanceFile {
    class_count: usize,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    lambda_hat: Vec<f64>,
    mu_hat: Vec<f64>,
    h_hat: Vec<f64>,
    r_hat: Vec<f64>,
    b_hat: Vec<f64>,
    #[serde(default)]
    eps_hat: Option<Vec<f64>>,
    #[serde(default)]
    kappa: Option<Vec<(f64, f64)>>,
    discount: f64,
}

/// Parses an instance from its JSON representation.
pub fn instance_from_json(text: &str) -> Result<MultiClassInstance> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| Error::validation("instance", format!("malformed JSON: {e}")))?;
    let eps_hat = match (file.eps_hat, file.kappa) {
        (Some(e), None) => e,
        (None, Some(pairs)) => epsilon_from_kappa(&pairs)?,
        (Some(_), Some(_)) => {
            return Err(Error::validation("eps_hat", "give either eps_hat or kappa, not both"))
        }
        (None, None) => {
            return Err(Error::validation("eps_hat", "missing both eps_hat and kappa"))
        }
    };
    let inst = MultiClassInstance {
        class_count: file.class_count,
        lambda: file.lambda,
        mu: file.mu,
        lambda_hat: file.lambda_hat,
        mu_hat: file.mu_hat,
        h_hat: file.h_hat,
        r_hat: file.r_hat,
        b_hat: file.b_hat,
        eps_hat,
        discount: file.discount,
    };
    inst.validate()?;
    Ok(inst)
}

/// Per-class ambiguity from the pairwise rate-ambiguity weights:
/// `eps_hat_i = (kappa_1i + kappa_2i) / 2`.
pub fn epsilon_from_kappa(kappa_pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
    kappa_pairs
        .iter()
        .enumerate()
        .map(|(idx, &(k1, k2))| {
            if !(k1 > 0.0 && k1.is_finite() && k2 > 0.0 && k2.is_finite()) {
                Err(Error::Validation {
                    field: "kappa",
                    message: format!("pair {idx} is ({k1}, {k2}), expected positive and finite"),
                })
            } else {
                Ok(0.5 * (k1 + k2))
            }
        })
        .collect()
}

/// Projects the multiclass instance to the one-dimensional game.
///
/// Classes are reordered canonically (`h_hat_i mu_i` descending, stable) so
/// the user may enter them in any order; the cheapest class fills first,
/// which makes the holding cost convex with ascending slopes.
pub fn reduce_instance(inst: &MultiClassInstance) -> Result<ReducedInstance> {
    inst.validate()?;
    let i_count = inst.class_count;

    let mut order: Vec<usize> = (0..i_count).collect();
    // Stable descending sort by h_hat * mu; ties keep input order.
    order.sort_by(|&a, &b| {
        let pa = inst.h_hat[a] * inst.mu[a];
        let pb = inst.h_hat[b] * inst.mu[b];
        pb.partial_cmp(&pa).expect("validated finite costs")
    });

    let mu: Vec<f64> = order.iter().map(|&k| inst.mu[k]).collect();
    let lambda: Vec<f64> = order.iter().map(|&k| inst.lambda[k]).collect();
    let h_hat: Vec<f64> = order.iter().map(|&k| inst.h_hat[k]).collect();
    let r_hat: Vec<f64> = order.iter().map(|&k| inst.r_hat[k]).collect();
    let b_hat: Vec<f64> = order.iter().map(|&k| inst.b_hat[k]).collect();
    let eps_hat: Vec<f64> = order.iter().map(|&k| inst.eps_hat[k]).collect();
    let lambda_hat: Vec<f64> = order.iter().map(|&k| inst.lambda_hat[k]).collect();
    let mu_hat: Vec<f64> = order.iter().map(|&k| inst.mu_hat[k]).collect();

    let theta: Vec<f64> = mu.iter().map(|&m| 1.0 / m).collect();
    let rho: Vec<f64> = lambda.iter().zip(&mu).map(|(l, m)| l / m).collect();

    let m: f64 = (0..i_count).map(|k| theta[k] * (lambda_hat[k] - rho[k] * mu_hat[k])).sum();
    // (theta sigma_hat)_k^2 = theta_k^2 * 2 lambda_k
    let weights: Vec<f64> = (0..i_count).map(|k| theta[k] * theta[k] * 2.0 * lambda[k]).collect();
    let sigma_sq: f64 = weights.iter().sum();
    let sigma = sigma_sq.sqrt();
    let eps = (0..i_count).map(|k| weights[k] * eps_hat[k]).sum::<f64>() / sigma_sq;
    let b: f64 = (0..i_count).map(|k| theta[k] * b_hat[k]).sum();

    // Fill cheapest (last canonical) class first: knot j sits at the
    // cumulative workload of the j cheapest buffers.
    let mut knots = Vec::with_capacity(i_count + 1);
    let mut w = 0.0;
    let mut c = 0.0;
    for j in 0..i_count {
        let k = i_count - 1 - j; // canonical class filled at this segment
        let slope = h_hat[k] * mu[k];
        knots.push(Knot { workload: w, cost: c, slope });
        w += theta[k] * b_hat[k];
        c += h_hat[k] * b_hat[k];
    }
    knots.push(Knot { workload: b, cost: c, slope: knots[i_count - 1].slope });
    // Pin the last knot to b exactly so interval checks and `gamma` agree.
    knots[i_count].workload = b;

    let mut i_star = 0usize;
    let mut r = f64::INFINITY;
    for k in 0..i_count {
        let candidate = r_hat[k] * mu[k];
        let better = candidate < r || (candidate == r && order[k] < order[i_star]);
        if better {
            r = candidate;
            i_star = k;
        }
    }

    Ok(ReducedInstance {
        theta,
        m,
        sigma,
        b,
        eps,
        discount: inst.discount,
        h_breakpoints: knots,
        r,
        i_star,
        class_order: order,
    })
}

impl ReducedInstance {
    pub fn class_count(&self) -> usize {
        self.theta.len()
    }

    /// Copy with the aggregated ambiguity replaced (equivalent to setting
    /// every `eps_hat_i` to `eps`, since the aggregation is a weighted
    /// average with weights summing to one).
    pub fn with_eps(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.eps = eps;
        out
    }

    /// Holding cost rate `h(x)`; errors outside `[0, b]`.
    pub fn holding_cost(&self, x: f64) -> Result<f64> {
        if !(0.0..=self.b).contains(&x) {
            return Err(Error::Domain(format!("workload {x} outside [0, {}]", self.b)));
        }
        Ok(self.holding_cost_unchecked(x))
    }

    /// Interpolates `h` without the domain check; used on hot paths where
    /// the state is already constrained to `[0, b]`.
    #[inline]
    pub(crate) fn holding_cost_unchecked(&self, x: f64) -> f64 {
        let knots = &self.h_breakpoints;
        // Few classes: a linear scan beats binary search.
        let mut j = 0;
        while j + 2 < knots.len() && x >= knots[j + 1].workload {
            j += 1;
        }
        let k = &knots[j];
        k.cost + k.slope * (x - k.workload)
    }

    /// Lipschitz constant of `h` (the steepest slope).
    pub fn h_lipschitz(&self) -> f64 {
        self.h_breakpoints.iter().map(|k| k.slope).fold(0.0, f64::max)
    }

    /// Cheapest queue-length configuration with workload `x`: buffers fill
    /// in ascending holding-cost order (canonical back to front), at most
    /// one partially. Returned in canonical order.
    ///
    /// At interior breakpoints the boundary class is taken empty (the
    /// `upsilon = 0` convention); at `x = b` every buffer is full.
    pub fn gamma_lift(&self, inst: &MultiClassInstance, x: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.b).contains(&x) {
            return Err(Error::Domain(format!("workload {x} outside [0, {}]", self.b)));
        }
        let i_count = self.class_count();
        let b_hat: Vec<f64> = self.class_order.iter().map(|&k| inst.b_hat[k]).collect();
        let mut xi = vec![0.0; i_count];
        if x == self.b {
            xi.copy_from_slice(&b_hat);
            return Ok(xi);
        }
        // knots[j].workload is the total workload of the j cheapest buffers,
        // i.e. canonical classes I-1, ..., I-j.
        let knots = &self.h_breakpoints;
        let mut j = 0;
        while j + 1 < i_count && x >= knots[j + 1].workload {
            j += 1;
        }
        for step in 0..j {
            xi[i_count - 1 - step] = b_hat[i_count - 1 - step];
        }
        let fill = i_count - 1 - j;
        xi[fill] = (x - knots[j].workload) / self.theta[fill];
        Ok(xi)
    }
}

#[cfg(test)]
pub(crate) mod test_instances {
    use super::*;

    /// The three-class instance used throughout the test suite, with the
    /// default rates documented in the repository README.
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
}
