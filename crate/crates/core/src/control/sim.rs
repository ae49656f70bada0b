//! Euler-Maruyama simulation of the controlled state and Monte Carlo cost
//! estimation.
//!
//! Noise is generated on the uniform base grid `k * dt`: every path draws its
//! base increments from its own ChaCha stream `(seed, path)`. Control
//! breakpoints that fall strictly inside a base step are added to the grid and
//! the Brownian path is filled in with a bridge whose randomness depends only
//! on `(seed, path, step)`. Two controls simulated with the same seed therefore
//! see the same Brownian path on the base grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cone::increments_in_cone;
use super::problem::ProblemSpec;
use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::{norm2, TIME_TOL};

/// Residual tolerance for cone membership of control increments.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

const BRIDGE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// One simulated path on the refined grid. `states[i]` is the right value at
/// `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub cost: f64,
    /// First grid time at which the state (before or after a control jump) left the state set.
    pub exit_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    /// The first few sampled paths.
    pub sample_paths: Vec<Vec<Vec<f64>>>,
    pub control: CadlagPath,
    pub costs: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
    /// Exact `int h dU`, shared by all paths.
    pub control_cost: f64,
    pub terminal_mean: Vec<f64>,
    pub terminal_std_error: Vec<f64>,
    pub p_star: f64,
    /// `|U(T)|^p*` (the control is deterministic).
    pub moment_control: f64,
    /// Sample mean of `sup_t |X(t)|^p*`.
    pub moment_state: f64,
    pub exit_count: usize,
    pub first_exit: Option<f64>,
}

/// Sample mean and standard error `std / sqrt(n)`.
pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn matvec(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Deterministic parts of a simulation: the grid, the control kicks and the
/// control cost.
struct Plan {
    grid: Vec<f64>,
    /// `first[j]` is the grid index of base time `j * dt`.
    first: Vec<usize>,
    /// `k(t_i) (U(t_i) - U(t_i-))`, one per grid point.
    jumps: Vec<Vec<f64>>,
    /// `k(t_i) (U(t_{i+1}-) - U(t_i))`, one per grid step.
    drifts: Vec<Vec<f64>>,
    control_cost: f64,
    /// Row-major `sigma` when it does not depend on the state.
    sigma: Option<Vec<f64>>,
    base_dt: f64,
}

impl Plan {
    fn new(spec: &ProblemSpec, control: &CadlagPath, dt: f64) -> Result<Self> {
        if control.dim() != spec.d1 {
            return Err(Error::Shape(format!("{}-d control for a problem with d1 = {}", control.dim(), spec.d1)));
        }
        let horizon = spec.horizon;
        if (control.horizon() - horizon).abs() > TIME_TOL * horizon.max(1.0) {
            return Err(Error::Shape(format!(
                "control horizon {} differs from the problem horizon {horizon}",
                control.horizon()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Domain(format!("time step {dt} does not divide the horizon {horizon}")));
        }
        let steps = steps as usize;
        increments_in_cone(control, &spec.control_cone, ADMISSIBILITY_TOL)?.into_result()?;

        let base_dt = horizon / steps as f64;
        let mut grid = Vec::with_capacity(steps + control.len() + 1);
        let mut first = Vec::with_capacity(steps + 1);
        let inner: Vec<f64> = control.times().iter().copied().filter(|&t| t > 0.0 && t < horizon).collect();
        let mut next = 0;
        for j in 0..=steps {
            let t = horizon * j as f64 / steps as f64;
            while next < inner.len() && inner[next] < t - TIME_TOL {
                if grid.last().is_none_or(|&last| inner[next] > last + TIME_TOL) {
                    grid.push(inner[next]);
                }
                next += 1;
            }
            while next < inner.len() && (inner[next] - t).abs() <= TIME_TOL {
                next += 1;
            }
            first.push(grid.len());
            grid.push(t);
        }

        let mut jumps = Vec::with_capacity(grid.len());
        let mut drifts = Vec::with_capacity(grid.len() - 1);
        for (i, &t) in grid.iter().enumerate() {
            let k = spec.k.eval(t);
            let before = if i == 0 { control.pad_value() } else { control.left_limit_unchecked(t) };
            let at = control.value_unchecked(t);
            let du: Vec<f64> = at.iter().zip(&before).map(|(a, b)| a - b).collect();
            jumps.push(matvec(&k, &du));
            if i + 1 < grid.len() {
                let end = control.left_limit_unchecked(grid[i + 1]);
                let du: Vec<f64> = end.iter().zip(&at).map(|(a, b)| a - b).collect();
                drifts.push(matvec(&k, &du));
            }
        }
        let sigma = spec.diffusion.is_state_independent().then(|| {
            let m = spec.diffusion.eval(&vec![0.0; spec.d]);
            (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
        });
        Ok(Plan { grid, first, jumps, drifts, control_cost: control_cost(spec, control), sigma, base_dt })
    }
}

/// `int_{[0, T]} h(t) dU(t)`: jumps (including the one from the pad value at
/// zero) plus the exact integral of the piecewise-linear `h` against each
/// segment slope.
pub fn control_cost(spec: &ProblemSpec, control: &CadlagPath) -> f64 {
    let horizon = control.horizon();
    let dot = |t: f64, v: &[f64]| -> f64 {
        let h = spec.h.eval(t);
        (0..v.len()).map(|j| h[(0, j)] * v[j]).sum()
    };
    let mut total = 0.0;
    let pad = control.pad_value();
    let start: Vec<f64> = control.initial_value().iter().zip(&pad).map(|(a, b)| a - b).collect();
    total += dot(0.0, &start);
    let n = control.len();
    for k in 0..n {
        let bp = control.breakpoint(k);
        if k > 0 {
            let du: Vec<f64> = bp.right.iter().zip(bp.left).map(|(a, b)| a - b).collect();
            total += dot(bp.time, &du);
        }
        let end = if k + 1 < n { control.times()[k + 1] } else { horizon };
        if end > bp.time && bp.slope.iter().any(|s| *s != 0.0) {
            let mut cuts = vec![bp.time];
            cuts.extend(spec.h.times.iter().copied().filter(|&t| t > bp.time && t < end));
            cuts.push(end);
            for w in cuts.windows(2) {
                total += 0.5 * (dot(w[0], bp.slope) + dot(w[1], bp.slope)) * (w[1] - w[0]);
            }
        }
    }
    total
}

struct PathOutcome {
    cost: f64,
    sup: f64,
    terminal: Vec<f64>,
    exit_time: Option<f64>,
    states: Option<Vec<Vec<f64>>>,
}

fn simulate_one(spec: &ProblemSpec, plan: &Plan, seed: u64, path: u64, keep: bool) -> PathOutcome {
    let d = spec.d;
    let m = spec.d2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let mut x = spec.initial_state.clone();
    let mut next = vec![0.0; d];
    let mut inner = vec![0.0; spec.drift.offset.len()];
    let mut bx = vec![0.0; d];
    let mut w_end = vec![0.0; m];
    let mut w_prev = vec![0.0; m];
    let mut w_here = vec![0.0; m];
    let mut states = keep.then(|| Vec::with_capacity(plan.grid.len()));
    let mut exit_time = None;
    let check = |x: &[f64], t: f64, exit_time: &mut Option<f64>| {
        if exit_time.is_none() && !spec.state_set.contains(x, 1e-12) {
            *exit_time = Some(t);
        }
    };

    for (v, j) in x.iter_mut().zip(&plan.jumps[0]) {
        *v += j;
    }
    check(&x, 0.0, &mut exit_time);
    let mut sup = norm2(&x);
    let mut f_prev = spec.f.eval(&x);
    let mut running = 0.0;
    if let Some(s) = states.as_mut() {
        s.push(x.clone());
    }
    let sqrt_dt = plan.base_dt.sqrt();
    for j in 0..plan.first.len() - 1 {
        let (i0, i1) = (plan.first[j], plan.first[j + 1]);
        for w in w_end.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sqrt_dt * z;
        }
        let mut bridge = (i1 - i0 > 1).then(|| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ BRIDGE_SALT);
            r.set_stream(path);
            r.set_word_pos((j as u128) << 20);
            r
        });
        w_prev.iter_mut().for_each(|v| *v = 0.0);
        let b = plan.grid[i1];
        for i in i0..i1 {
            let (t0, t1) = (plan.grid[i], plan.grid[i + 1]);
            let h = t1 - t0;
            if i + 1 == i1 {
                w_here.copy_from_slice(&w_end);
            } else {
                let r = bridge.as_mut().unwrap();
                let frac = (t1 - t0) / (b - t0);
                let sd = ((t1 - t0) * (b - t1) / (b - t0)).sqrt();
                for c in 0..m {
                    let z: f64 = r.sample(StandardNormal);
                    w_here[c] = w_prev[c] + frac * (w_end[c] - w_prev[c]) + sd * z;
                }
            }
            spec.drift.eval_into(&x, &mut inner, &mut bx);
            for r in 0..d {
                next[r] = x[r] + bx[r] * h + plan.drifts[i][r];
            }
            match &plan.sigma {
                Some(sig) => {
                    for r in 0..d {
                        let row = &sig[r * m..(r + 1) * m];
                        for c in 0..m {
                            next[r] += row[c] * (w_here[c] - w_prev[c]);
                        }
                    }
                }
                None => {
                    let sig = spec.diffusion.eval(&x);
                    for r in 0..d {
                        for c in 0..m {
                            next[r] += sig[(r, c)] * (w_here[c] - w_prev[c]);
                        }
                    }
                }
            }
            w_prev.copy_from_slice(&w_here);
            check(&next, t1, &mut exit_time);
            sup = sup.max(norm2(&next));
            let f_left = spec.f.eval(&next);
            running += 0.5 * (f_prev + f_left) * h;
            let jump = &plan.jumps[i + 1];
            if jump.iter().any(|v| *v != 0.0) {
                for (v, j) in next.iter_mut().zip(jump) {
                    *v += j;
                }
                check(&next, t1, &mut exit_time);
                sup = sup.max(norm2(&next));
                f_prev = spec.f.eval(&next);
            } else {
                f_prev = f_left;
            }
            std::mem::swap(&mut x, &mut next);
            if let Some(s) = states.as_mut() {
                s.push(x.clone());
            }
        }
    }
    let cost = running + plan.control_cost + spec.g.eval(&x);
    PathOutcome { cost, sup, terminal: x, exit_time, states }
}

/// Single Euler-Maruyama path number `path` of the stream family `seed`.
pub fn euler_simulate(spec: &ProblemSpec, control: &CadlagPath, dt: f64, seed: u64, path: u64) -> Result<SimPath> {
    spec.validate()?;
    let plan = Plan::new(spec, control, dt)?;
    let out = simulate_one(spec, &plan, seed, path, true);
    Ok(SimPath { times: plan.grid, states: out.states.unwrap(), cost: out.cost, exit_time: out.exit_time })
}

/// Monte Carlo estimate of the cost over `n_paths` independent paths,
/// keeping the first `keep` of them. Paths run in parallel.
pub fn cost_estimate_keep(
    spec: &ProblemSpec,
    control: &CadlagPath,
    n_paths: usize,
    dt: f64,
    seed: u64,
    keep: usize,
) -> Result<SimResult> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::Domain("need at least one path".into()));
    }
    let plan = Plan::new(spec, control, dt)?;
    let outcomes: Vec<PathOutcome> = (0..n_paths)
        .into_par_iter()
        .map(|p| simulate_one(spec, &plan, seed, p as u64, p < keep))
        .collect();
    let p_star = spec.p_star();
    let costs: Vec<f64> = outcomes.iter().map(|o| o.cost).collect();
    let (mean, std_error) = mean_and_error(&costs);
    let (terminal_mean, terminal_std_error) = (0..spec.d)
        .map(|c| mean_and_error(&outcomes.iter().map(|o| o.terminal[c]).collect::<Vec<_>>()))
        .unzip();
    let moment_state = outcomes.iter().map(|o| o.sup.powf(p_star)).sum::<f64>() / n_paths as f64;
    let exits: Vec<f64> = outcomes.iter().filter_map(|o| o.exit_time).collect();
    let first_exit = exits.iter().copied().reduce(f64::min);
    let sample_paths = outcomes.into_iter().filter_map(|o| o.states).collect();
    Ok(SimResult {
        n_paths,
        dt,
        seed,
        times: plan.grid,
        sample_paths,
        control: control.clone(),
        costs,
        mean,
        std_error,
        control_cost: plan.control_cost,
        terminal_mean,
        terminal_std_error,
        p_star,
        moment_control: norm2(&control.terminal_value()).powf(p_star),
        moment_state,
        exit_count: exits.len(),
        first_exit,
    })
}

/// Monte Carlo estimate of the cost, keeping no sample paths.
pub fn cost_estimate(spec: &ProblemSpec, control: &CadlagPath, n_paths: usize, dt: f64, seed: u64) -> Result<SimResult> {
    cost_estimate_keep(spec, control, n_paths, dt, seed, 0)
}
