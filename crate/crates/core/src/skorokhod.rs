//! Discrete two-sided Skorokhod map on an interval.
//!
//! Given a path `eta` on a uniform mesh, [`reflect`] produces the constrained
//! path `chi` in `[alpha, beta]` and the two nondecreasing regulators
//! `zeta1` (pushes up at `alpha`) and `zeta2` (pushes down at `beta`) with
//! `chi = eta + zeta1 - zeta2` and the complementarity property: a regulator
//! moves only while `chi` sits on its boundary.
//!
//! Regulators act at step granularity, which is the exact solution for the
//! piecewise-constant interpolation of `eta`; an initial value outside the
//! interval is booked as a time-0 jump of the appropriate regulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformity tolerance for the time mesh.
pub const MESH_TOL: f64 = 1e-12;

/// A real-valued path sampled on a uniform mesh starting at `t = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathGrid {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathGrid {
    /// Builds the mesh `0, dt, 2 dt, ...` under the given values.
    pub fn from_values(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive and finite"));
        }
        let t = (0..values.len()).map(|k| k as f64 * dt).collect();
        let grid = PathGrid { t, values };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t.len() != self.values.len() {
            return Err(Error::validation("values", "length differs from mesh length"));
        }
        if self.t.len() < 2 {
            return Err(Error::validation("t", "need at least two mesh points"));
        }
        if self.t[0] != 0.0 {
            return Err(Error::validation("t", "mesh must start at 0"));
        }
        let dt = self.t[1] - self.t[0];
        for w in self.t.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > MESH_TOL {
                return Err(Error::validation("t", "mesh is not uniform"));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("values", "path contains non-finite entries"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }
}

/// Output of the reflection map: constrained path and regulators on the
/// input mesh.
#[derive(Debug, Clone)]
pub struct ReflectionTriple {
    pub chi: PathGrid,
    pub zeta1: PathGrid,
    pub zeta2: PathGrid,
    /// Number of steps whose increment exceeded the interval width; a
    /// nonzero count signals that the mesh is too coarse for the input.
    pub coarse_steps: usize,
}

/// Per-step reflection state shared by [`reflect`] and the Monte Carlo
/// simulator. A step clips the driven point first at the lower then at the
/// upper boundary and books the clipped amounts into the regulators, so the
/// constrained value is bitwise `alpha` or `beta` on boundary steps.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reflector {
    alpha: f64,
    beta: f64,
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Reflector {
    /// Starts the state at `eta0`, booking any initial excursion as a
    /// time-0 regulator jump.
    pub fn new(alpha: f64, beta: f64, eta0: f64) -> Self {
        let mut s = Reflector { alpha, beta, x: 0.0, y: 0.0, r: 0.0 };
        s.x = s.clip(eta0);
        s
    }

    fn clip(&mut self, w: f64) -> f64 {
        let mut w = w;
        if w < self.alpha {
            self.y += self.alpha - w;
            w = self.alpha;
        }
        if w > self.beta {
            self.r += w - self.beta;
            w = self.beta;
        }
        w
    }

    /// Advances by one increment of the driving path.
    pub fn step(&mut self, d_eta: f64) {
        let w = self.x + d_eta;
        self.x = self.clip(w);
    }
}

/// Two-sided Skorokhod map of `eta` onto `[alpha, beta]`.
pub fn reflect(eta: &PathGrid, alpha: f64, beta: f64) -> Result<ReflectionTriple> {
    if alpha.partial_cmp(&beta) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!("need alpha < beta, got [{alpha}, {beta}]")));
    }
    eta.validate()?;
    let n = eta.values.len();
    let width = beta - alpha;
    let mut chi = Vec::with_capacity(n);
    let mut zeta1 = Vec::with_capacity(n);
    let mut zeta2 = Vec::with_capacity(n);
    let mut coarse_steps = 0usize;

    let mut state = Reflector::new(alpha, beta, eta.values[0]);
    chi.push(state.x);
    zeta1.push(state.y);
    zeta2.push(state.r);
    for k in 1..n {
        let d_eta = eta.values[k] - eta.values[k - 1];
        if d_eta.abs() > width {
            coarse_steps += 1;
        }
        state.step(d_eta);
        chi.push(state.x);
        zeta1.push(state.y);
        zeta2.push(state.r);
    }

    Ok(ReflectionTriple {
        chi: PathGrid { t: eta.t.clone(), values: chi },
        zeta1: PathGrid { t: eta.t.clone(), values: zeta1 },
        zeta2: PathGrid { t: eta.t.clone(), values: zeta2 },
        coarse_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ramp(dt: f64, n: usize, slope: f64) -> PathGrid {
        PathGrid::from_values(dt, (0..n).map(|k| slope * k as f64 * dt).collect()).unwrap()
    }

    #[test]
    fn pure_upper_reflection() {
        let eta = ramp(0.01, 201, 1.0); // eta(t) = t on [0, 2]
        let out = reflect(&eta, 0.0, 1.0).unwrap();
        for k in 0..eta.values.len() {
            let t = eta.t[k];
            assert!((out.chi.values[k] - t.min(1.0)).abs() < 1e-12);
            assert_eq!(out.zeta1.values[k], 0.0);
            assert!((out.zeta2.values[k] - (t - 1.0).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_lower_reflection() {
        let eta = ramp(0.01, 101, -1.0); // eta(t) = -t on [0, 1]
        let out = reflect(&eta, 0.0, 1.0).unwrap();
        for k in 0..eta.values.len() {
            let t = eta.t[k];
            assert_eq!(out.chi.values[k], 0.0);
            assert!((out.zeta1.values[k] - t).abs() < 1e-12);
            assert_eq!(out.zeta2.values[k], 0.0);
        }
    }

    #[test]
    fn identity_on_interior_paths() {
        let eta = PathGrid::from_values(0.1, vec![0.5; 20]).unwrap();
        let out = reflect(&eta, 0.0, 1.0).unwrap();
        assert_eq!(out.chi.values, eta.values);
        assert!(out.zeta1.values.iter().all(|&v| v == 0.0));
        assert!(out.zeta2.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_condition_outside_books_time_zero_jump() {
        let eta = PathGrid::from_values(0.1, vec![3.0, 3.0, 3.0]).unwrap();
        let out = reflect(&eta, 0.0, 1.0).unwrap();
        assert_eq!(out.chi.values[0], 1.0);
        assert_eq!(out.zeta2.values[0], 2.0);
        assert_eq!(out.zeta1.values[0], 0.0);
    }

    #[test]
    fn increments_spanning_the_interval_are_flagged() {
        let eta = PathGrid::from_values(0.1, vec![0.5, 0.5, 3.0, -2.0]).unwrap();
        let out = reflect(&eta, 0.0, 1.0).unwrap();
        assert_eq!(out.coarse_steps, 2, "jumps wider than beta - alpha signal a coarse mesh");
        let tame = PathGrid::from_values(0.1, vec![0.5, 0.9, 0.2]).unwrap();
        assert_eq!(reflect(&tame, 0.0, 1.0).unwrap().coarse_steps, 0);
    }

    #[test]
    fn rejects_inverted_interval() {
        let eta = ramp(0.1, 5, 1.0);
        assert!(reflect(&eta, 1.0, 1.0).is_err());
        assert!(reflect(&eta, 2.0, 1.0).is_err());
    }

    fn random_path(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(n);
        let mut x: f64 = rng.gen_range(-1.0..2.0);
        v.push(x);
        for _ in 1..n {
            x += rng.gen_range(-scale..scale);
            v.push(x);
        }
        v
    }

    #[test]
    fn complementarity_containment_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (alpha, beta) = (0.0, 1.0);
        for _ in 0..10_000 {
            let n = rng.gen_range(2..40);
            let eta = PathGrid::from_values(0.05, random_path(&mut rng, n, 0.4)).unwrap();
            let out = reflect(&eta, alpha, beta).unwrap();
            let mut running = 0.0f64;
            for k in 0..n {
                let (x, y, r) = (out.chi.values[k], out.zeta1.values[k], out.zeta2.values[k]);
                assert!((alpha..=beta).contains(&x), "containment violated");
                running = running.max(eta.values[k].abs()).max(y).max(r);
                let defect = (x - (eta.values[k] + y - r)).abs();
                assert!(defect <= 4.0 * f64::EPSILON * running.max(1.0), "constraint defect {defect}");
                if k > 0 {
                    let dy = y - out.zeta1.values[k - 1];
                    let dr = r - out.zeta2.values[k - 1];
                    assert!(dy >= 0.0 && dr >= 0.0, "regulators must be nondecreasing");
                    // Boundary values are assigned exactly, so compare bitwise.
                    if dy > 0.0 {
                        assert_eq!(x, alpha, "zeta1 increased off the lower boundary");
                    }
                    if dr > 0.0 {
                        assert_eq!(x, beta, "zeta2 increased off the upper boundary");
                    }
                    assert!(dy == 0.0 || dr == 0.0, "both regulators moved in one step");
                }
            }
        }
    }

    #[test]
    fn idempotence_on_constrained_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let eta = PathGrid::from_values(0.05, random_path(&mut rng, 50, 0.5)).unwrap();
            let out = reflect(&eta, 0.0, 1.0).unwrap();
            let again = reflect(&out.chi, 0.0, 1.0).unwrap();
            assert_eq!(again.chi.values, out.chi.values);
            assert!(again.zeta1.values.iter().all(|&v| v == 0.0));
            assert!(again.zeta2.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn measured_lipschitz_ratio_below_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let n = rng.gen_range(4..64);
            let base = random_path(&mut rng, n, 0.5);
            let bump: f64 = rng.gen_range(-0.5..0.5);
            let mut other = base.clone();
            for v in &mut other {
                *v += bump * rng.gen_range(0.0..1.0);
            }
            let eta1 = PathGrid::from_values(0.05, base).unwrap();
            let eta2 = PathGrid::from_values(0.05, other).unwrap();
            let o1 = reflect(&eta1, 0.0, 1.0).unwrap();
            let o2 = reflect(&eta2, 0.0, 1.0).unwrap();
            let input: f64 = eta1
                .values
                .iter()
                .zip(&eta2.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if input < 1e-12 {
                continue;
            }
            let output: f64 = (0..n)
                .map(|k| {
                    (o1.chi.values[k] - o2.chi.values[k])
                        .abs()
                        .max((o1.zeta1.values[k] - o2.zeta1.values[k]).abs())
                        .max((o1.zeta2.values[k] - o2.zeta2.values[k]).abs())
                })
                .fold(0.0, f64::max);
            worst = worst.max(output / input);
        }
        assert!(worst <= 4.0, "measured Lipschitz ratio {worst} exceeds 4");
        assert!(worst >= 1.0, "suspiciously small measured ratio {worst}");
    }

    /// Exact minimal total variation over all feasible regulator pairs on a
    /// lattice, by dynamic programming over the constrained state.
    fn dp_min_total_variation(eta: &[f64], alpha: f64, beta: f64, g: f64) -> f64 {
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
                    let net = s2 - s - d;
                    let c = cost[i] + net.abs();
                    if c < next[j] {
                        next[j] = c;
                    }
                }
            }
            cost = next;
        }
        cost.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Literal enumeration over per-step regulator increment pairs; cross
    /// checks the DP on short paths.
    fn enumerate_min_total_variation(eta: &[f64], alpha: f64, beta: f64, g: f64, k_max: usize) -> f64 {
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

    #[test]
    fn minimality_against_lattice_brute_force() {
        let (alpha, beta, g) = (0.0, 2.0, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for trial in 0..200 {
            let n = rng.gen_range(2..=12);
            let mut vals = Vec::with_capacity(n);
            // Lattice-valued path so the reflected output stays on the lattice.
            let mut v: i64 = rng.gen_range(-4..12);
            vals.push(v as f64 * g);
            for _ in 1..n {
                v += rng.gen_range(-4..=4);
                vals.push(v as f64 * g);
            }
            let eta = PathGrid::from_values(0.1, vals.clone()).unwrap();
            let out = reflect(&eta, alpha, beta).unwrap();
            let tv = out.zeta1.values[n - 1] + out.zeta2.values[n - 1];
            let dp = dp_min_total_variation(&vals, alpha, beta, g);
            assert!(tv <= dp + 1e-9, "trial {trial}: reflect TV {tv} above minimum {dp}");
            assert!(tv >= dp - 1e-9, "trial {trial}: reflect TV {tv} beats the DP bound {dp}");
        }
    }

    #[test]
    fn dp_oracle_matches_literal_enumeration() {
        let (alpha, beta, g) = (0.0, 1.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..20 {
            let n = rng.gen_range(2..=5);
            let mut vals = Vec::with_capacity(n);
            let mut v: i64 = rng.gen_range(-2..4);
            vals.push(v as f64 * g);
            for _ in 1..n {
                v += rng.gen_range(-2..=2);
                vals.push(v as f64 * g);
            }
            let dp = dp_min_total_variation(&vals, alpha, beta, g);
            let lit = enumerate_min_total_variation(&vals, alpha, beta, g, 6);
            assert!((dp - lit).abs() < 1e-9, "DP {dp} vs enumeration {lit} on {vals:?}");
        }
    }

    proptest! {
        #[test]
        fn shift_equivariance(c in -5.0f64..5.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals = random_path(&mut rng, 30, 0.5);
            let eta = PathGrid::from_values(0.1, vals.clone()).unwrap();
            let shifted = PathGrid::from_values(0.1, vals.iter().map(|v| v + c).collect()).unwrap();
            let a = reflect(&eta, 0.0, 1.0).unwrap();
            let b = reflect(&shifted, c, 1.0 + c).unwrap();
            for k in 0..30 {
                prop_assert!((a.chi.values[k] + c - b.chi.values[k]).abs() < 1e-12);
                prop_assert!((a.zeta1.values[k] - b.zeta1.values[k]).abs() < 1e-12);
                prop_assert!((a.zeta2.values[k] - b.zeta2.values[k]).abs() < 1e-12);
            }
        }
    }
}
