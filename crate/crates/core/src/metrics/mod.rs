//! Distances between cadlag paths.
//!
//! One-dimensional M1 distances are computed as Fréchet distances between
//! completed graphs. In higher dimension the weak metric is bracketed: the
//! lower end is certified (product metric and endpoint gaps) and the upper end
//! is realised by an explicit pair of parametric representations.

pub mod frechet;
mod j1;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::{CadlagPath, VariationNorm};
use crate::error::{Error, Result};
use crate::graphrep::{build_paramrep_tv, build_routed, JumpRoute, ParamRep};
use crate::oscillation;
use crate::{dist2, TIME_TOL};
use frechet::{frechet, matching_cost, Curve};

pub use j1::d_j1_bracket;

/// Absolute bisection tolerance for the free-space decision procedure.
pub const FRECHET_TOL: f64 = 1e-10;

/// Default number of waypoints per jump in the weak-metric search.
pub const DEFAULT_BUDGET: usize = 8;

/// Lower and upper bounds on a distance with an object realising the upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBracket {
    pub lower: f64,
    pub upper: f64,
    pub method: String,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Two parametric representations whose distance is the upper bound.
    ParamReps { first: ParamRep, second: ParamRep },
    /// A piecewise-linear time change `lambda` with `lambda(from[k]) = to[k]`,
    /// applied to the first path.
    TimeChange { from: Vec<f64>, to: Vec<f64> },
}

impl DistanceBracket {
    /// Distance between the witness representations, when there are any.
    pub fn witness_value(&self) -> Option<f64> {
        match &self.witness {
            Some(Witness::ParamReps { first, second }) => first.distance(second).ok(),
            _ => None,
        }
    }
}

fn check_pair(x: &CadlagPath, y: &CadlagPath) -> Result<()> {
    x.check_same_shape(y)
}

/// Fréchet comparison of two representation curves, returning `(lower, cost,
/// witness pair)` where `cost` is the re-evaluated witness distance.
fn match_reps(a: &ParamRep, b: &ParamRep, tol: f64) -> (f64, ParamRep, ParamRep) {
    let ca = a.curve();
    let cb = b.curve();
    let m = frechet(&ca, &cb, tol);
    let (wa, wb) = reps_along(&ca, &cb, &m.path);
    (m.lower, wa, wb)
}

/// Reparametrises both curves along a monotone matching path.
fn reps_along(ca: &Curve, cb: &Curve, path: &[(f64, f64)]) -> (ParamRep, ParamRep) {
    let k = path.len() - 1;
    let knots: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut xa = Vec::with_capacity(k + 1);
    let mut ra = Vec::with_capacity(k + 1);
    let mut xb = Vec::with_capacity(k + 1);
    let mut rb = Vec::with_capacity(k + 1);
    for &(a, b) in path {
        let (x, t) = ca.point(a);
        xa.push(x);
        ra.push(t);
        let (x, t) = cb.point(b);
        xb.push(x);
        rb.push(t);
    }
    (
        ParamRep { knots: knots.clone(), xhat: xa, rhat: ra },
        ParamRep { knots, xhat: xb, rhat: rb },
    )
}

/// `(certified lower bound, matched value)` of the M1 distance between two
/// one-dimensional paths.
pub fn d_m1_1d_bracket(x: &CadlagPath, y: &CadlagPath, tol: f64) -> Result<(f64, f64)> {
    if x.dim() != 1 || y.dim() != 1 {
        return Err(Error::Shape(format!(
            "one-dimensional paths required, got dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    check_pair(x, y)?;
    let cx = build_paramrep_tv(x).curve();
    let cy = build_paramrep_tv(y).curve();
    let m = frechet(&cx, &cy, tol);
    let value = matching_cost(&cx, &cy, &m.path);
    Ok((m.lower.min(value), value))
}

/// M1 distance between one-dimensional paths (to [`FRECHET_TOL`]).
pub fn d_m1_1d(x: &CadlagPath, y: &CadlagPath) -> Result<f64> {
    Ok(d_m1_1d_bracket(x, y, FRECHET_TOL)?.1)
}

/// `(certified lower bound, value)` of the product metric.
pub fn d_p_bracket(x: &CadlagPath, y: &CadlagPath) -> Result<(f64, f64)> {
    check_pair(x, y)?;
    let parts: Vec<(f64, f64)> = (0..x.dim())
        .into_par_iter()
        .map(|i| d_m1_1d_bracket(&x.component(i)?, &y.component(i)?, FRECHET_TOL))
        .collect::<Result<_>>()?;
    Ok(parts.iter().fold((0.0, 0.0), |(l, v), (a, b)| (f64::max(l, *a), f64::max(v, *b))))
}

/// Product metric: the largest coordinatewise M1 distance.
pub fn d_p(x: &CadlagPath, y: &CadlagPath) -> Result<f64> {
    Ok(d_p_bracket(x, y)?.1)
}

/// Waypoints for rerouting the jumps of `x` so that they follow the shape of
/// `other` near each jump time.
fn seed_routes(x: &CadlagPath, other: &Curve, budget: usize) -> Vec<JumpRoute> {
    if budget == 0 {
        return Vec::new();
    }
    let jumps = x.interior_jumps();
    let horizon = x.horizon();
    let mut routes = Vec::new();
    for (k, jump) in jumps.iter().enumerate() {
        let from = if k == 0 { 0.0 } else { 0.5 * (jumps[k - 1].time + jump.time) };
        let to = if k + 1 == jumps.len() { horizon } else { 0.5 * (jump.time + jumps[k + 1].time) };
        let samples = curve_window(other, from, to);
        let inc = jump.increment();
        let mut progress = vec![0.0; inc.len()];
        let mut points: Vec<Vec<f64>> = Vec::new();
        for z in samples {
            let mut w = Vec::with_capacity(inc.len());
            for c in 0..inc.len() {
                let p = ((z[c] - jump.left[c]) * inc[c].signum()).clamp(0.0, inc[c].abs());
                progress[c] = f64::max(progress[c], p);
                w.push(jump.left[c] + inc[c].signum() * progress[c]);
            }
            let at_start = progress.iter().all(|&p| p == 0.0);
            let at_end = progress.iter().zip(&inc).all(|(p, d)| *p == d.abs());
            if !at_start && !at_end && points.last() != Some(&w) {
                points.push(w);
            }
        }
        if points.is_empty() {
            continue;
        }
        if points.len() > budget {
            let n = points.len();
            points = (0..budget)
                .map(|i| points[if budget == 1 { n / 2 } else { i * (n - 1) / (budget - 1) }].clone())
                .collect();
        }
        routes.push(JumpRoute { time: jump.time, waypoints: points });
    }
    routes
}

/// Spatial points of `curve` whose time lies in `[from, to]`, including the
/// interpolated crossings of both window ends.
fn curve_window(curve: &Curve, from: f64, to: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..curve.len() {
        let t = curve.time[i];
        if i > 0 {
            let t0 = curve.time[i - 1];
            for edge in [from, to] {
                if t0 < edge && edge < t {
                    let w = (edge - t0) / (t - t0);
                    out.push(
                        curve.space[i - 1]
                            .iter()
                            .zip(&curve.space[i])
                            .map(|(a, b)| a + w * (b - a))
                            .collect(),
                    );
                }
            }
        }
        if t >= from && t <= to {
            out.push(curve.space[i].clone());
        }
    }
    out
}

/// Clamps waypoints into the jump box and enforces coordinatewise progress.
fn normalise_route(x: &CadlagPath, route: &mut JumpRoute) {
    let Some(jump) = x.interior_jumps().into_iter().find(|j| (j.time - route.time).abs() <= TIME_TOL)
    else {
        return;
    };
    let inc = jump.increment();
    let mut progress = vec![0.0; inc.len()];
    for w in route.waypoints.iter_mut() {
        for c in 0..inc.len() {
            let p = ((w[c] - jump.left[c]) * inc[c].signum()).clamp(0.0, inc[c].abs());
            progress[c] = f64::max(progress[c], p);
            w[c] = jump.left[c] + inc[c].signum() * progress[c];
        }
    }
}

struct Candidate {
    routes_x: Vec<JumpRoute>,
    routes_y: Vec<JumpRoute>,
}

fn evaluate(x: &CadlagPath, y: &CadlagPath, cand: &Candidate, tol: f64) -> (f64, f64, ParamRep, ParamRep) {
    let a = build_routed(x, VariationNorm::L1, &cand.routes_x);
    let b = build_routed(y, VariationNorm::L1, &cand.routes_y);
    let (lower, wa, wb) = match_reps(&a, &b, tol);
    let value = wa.distance(&wb).expect("same dimension");
    (value, lower, wa, wb)
}

/// Certified bracket for the weak metric.
///
/// The lower end is the largest of the product-metric lower bound and the two
/// endpoint gaps. The upper end is the smallest matching distance found among
/// the total-variation representations of both paths and variants whose jump
/// traversals are rerouted through up to `budget` waypoints per jump, seeded
/// from the other path and refined by coordinate descent.
pub fn d_w_bracket(x: &CadlagPath, y: &CadlagPath, budget: usize) -> Result<DistanceBracket> {
    check_pair(x, y)?;
    let (dp_lower, _) = d_p_bracket(x, y)?;
    let lower = dp_lower
        .max(dist2(&x.initial_value(), &y.initial_value()))
        .max(dist2(&x.terminal_value(), &y.terminal_value()));

    let base_x = build_paramrep_tv(x);
    let base_y = build_paramrep_tv(y);
    let seeded_x = seed_routes(x, &base_y.curve(), budget);
    let seeded_y = seed_routes(y, &base_x.curve(), budget);
    let mut candidates = vec![Candidate { routes_x: vec![], routes_y: vec![] }];
    if !seeded_y.is_empty() {
        candidates.push(Candidate { routes_x: vec![], routes_y: seeded_y.clone() });
    }
    if !seeded_x.is_empty() {
        candidates.push(Candidate { routes_x: seeded_x.clone(), routes_y: vec![] });
    }
    if !seeded_x.is_empty() && !seeded_y.is_empty() {
        candidates.push(Candidate { routes_x: seeded_x, routes_y: seeded_y });
    }
    let scored: Vec<f64> = candidates
        .par_iter()
        .map(|c| evaluate(x, y, c, FRECHET_TOL).0)
        .collect();
    let mut best_idx = 0;
    for (i, v) in scored.iter().enumerate() {
        if *v < scored[best_idx] {
            best_idx = i;
        }
    }
    let mut best = candidates.swap_remove(best_idx);
    let mut best_value = scored[best_idx];

    // coordinate descent on the waypoints of the winning candidate
    let scale = x
        .interior_jumps()
        .iter()
        .chain(y.interior_jumps().iter())
        .map(|j| dist2(&j.left, &j.right))
        .fold(0.0, f64::max);
    let mut step = 0.25 * scale;
    let max_evals = 64 * budget.max(1);
    let mut evals = 0;
    for _sweep in 0..3 {
        if best_value <= lower || step <= 0.0 {
            break;
        }
        for side in 0..2 {
            let n_routes = if side == 0 { best.routes_x.len() } else { best.routes_y.len() };
            for r in 0..n_routes {
                let n_points = if side == 0 {
                    best.routes_x[r].waypoints.len()
                } else {
                    best.routes_y[r].waypoints.len()
                };
                for w in 0..n_points {
                    for c in 0..x.dim() {
                        let trials: Vec<Candidate> = [step, -step]
                            .iter()
                            .map(|delta| {
                                let mut cand = Candidate {
                                    routes_x: best.routes_x.clone(),
                                    routes_y: best.routes_y.clone(),
                                };
                                let (path, route) = if side == 0 {
                                    (x, &mut cand.routes_x[r])
                                } else {
                                    (y, &mut cand.routes_y[r])
                                };
                                route.waypoints[w][c] += delta;
                                normalise_route(path, route);
                                cand
                            })
                            .collect();
                        if evals + trials.len() > max_evals {
                            break;
                        }
                        evals += trials.len();
                        let values: Vec<f64> =
                            trials.par_iter().map(|t| evaluate(x, y, t, FRECHET_TOL).0).collect();
                        for (t, v) in trials.into_iter().zip(values) {
                            if v < best_value {
                                best_value = v;
                                best = t;
                            }
                        }
                    }
                }
            }
        }
        step *= 0.5;
    }
    let (value, _, wa, wb) = evaluate(x, y, &best, FRECHET_TOL);
    Ok(DistanceBracket {
        lower: lower.min(value),
        upper: value,
        method: "product-metric/endpoint lower bound; rerouted-jump representation matching upper bound"
            .into(),
        witness: Some(Witness::ParamReps { first: wa, second: wb }),
    })
}

/// Truncated weak metric on an unbounded horizon:
/// `sum_{T=0}^{N} 2^{-T} d_w(x|_T, y|_T)` with each term replaced by its upper bound.
pub fn d_w_truncated_infinite(x: &CadlagPath, y: &CadlagPath, terms: usize, budget: usize) -> Result<f64> {
    check_pair(x, y)?;
    if terms as f64 > x.horizon() + TIME_TOL {
        return Err(Error::Domain(format!(
            "{terms} terms exceed the horizon {}",
            x.horizon()
        )));
    }
    let mut total = dist2(&x.initial_value(), &y.initial_value());
    for t in 1..=terms {
        let h = (t as f64).min(x.horizon());
        let b = d_w_bracket(&x.restrict(h)?, &y.restrict(h)?, budget)?;
        total += b.upper * 0.5f64.powi(t as i32);
    }
    Ok(total)
}

/// Pass/fail with the measured quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub passed: bool,
    pub value: f64,
}

/// Finite-sample check of convergence through pointwise limits at continuity
/// points and vanishing oscillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Largest error of the last member over the probe set.
    pub pointwise: Criterion,
    /// Tail maximum of the oscillation at the smallest `delta`.
    pub oscillation: Criterion,
    pub probes: Vec<f64>,
    /// Per-member largest probe error.
    pub pointwise_errors: Vec<f64>,
    /// `(delta, max over the tail half of the sequence of w_w(x_n, delta))`.
    pub oscillation_profile: Vec<(f64, f64)>,
    pub note: String,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.pointwise.passed && self.oscillation.passed
    }
}

/// Number of uniform probe candidates used by [`check_convergence`].
pub const CONVERGENCE_PROBES: usize = 201;

/// Checks pointwise convergence at continuity points of `x` and vanishing of
/// the tail oscillation along `delta_grid`.
///
/// Probes are a uniform grid on `[0, T]` minus points within the smallest
/// `delta` of a discontinuity of `x`, plus `T`. Both criteria compare against
/// `eps`.
pub fn check_convergence(
    sequence: &[CadlagPath],
    x: &CadlagPath,
    delta_grid: &[f64],
    eps: f64,
) -> Result<ConvergenceReport> {
    if sequence.is_empty() {
        return Err(Error::Domain("empty sequence".into()));
    }
    if delta_grid.is_empty() || delta_grid.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Domain("delta grid must be nonempty and positive".into()));
    }
    for member in sequence {
        check_pair(member, x)?;
    }
    let mut deltas = delta_grid.to_vec();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let guard = deltas[0];
    let horizon = x.horizon();
    let jumps: Vec<f64> = x.interior_jumps().iter().map(|j| j.time).collect();
    let mut probes: Vec<f64> = (0..CONVERGENCE_PROBES)
        .map(|i| horizon * i as f64 / (CONVERGENCE_PROBES - 1) as f64)
        .filter(|t| jumps.iter().all(|s| (t - s).abs() >= guard))
        .collect();
    if jumps.iter().all(|s| (horizon - s).abs() > TIME_TOL) && probes.last() != Some(&horizon) {
        probes.push(horizon);
    }
    let pointwise_errors: Vec<f64> = sequence
        .par_iter()
        .map(|xn| {
            probes
                .iter()
                .map(|&t| dist2(&xn.value_unchecked(t), &x.value_unchecked(t)))
                .fold(0.0, f64::max)
        })
        .collect();
    let last_error = *pointwise_errors.last().unwrap();

    let tail = &sequence[sequence.len() / 2..];
    let oscillation_profile: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&d| {
            let values: Vec<f64> = tail
                .par_iter()
                .map(|xn| oscillation::w_w_global(xn, d))
                .collect::<Result<_>>()?;
            Ok((d, values.into_iter().fold(0.0, f64::max)))
        })
        .collect::<Result<_>>()?;
    let osc = oscillation_profile[0].1;
    Ok(ConvergenceReport {
        pointwise: Criterion { passed: last_error <= eps, value: last_error },
        oscillation: Criterion { passed: osc <= eps, value: osc },
        probes,
        pointwise_errors,
        oscillation_profile,
        note: "finite-sample diagnostic: limits over n are replaced by the last member and the tail half"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cadlag::PadMode;
    use crate::fixtures::{shrinking_wiggle, single_jump_limit, two_stage_jump};

    fn step(at: f64, to: f64) -> CadlagPath {
        CadlagPath::step(2.0, PadMode::HoldLeft, vec![0.0, at], vec![vec![0.0], vec![to]]).unwrap()
    }

    #[test]
    fn m1_identity_and_shift() {
        let x = single_jump_limit().component(0).unwrap();
        assert_eq!(d_m1_1d(&x, &x).unwrap(), 0.0);
        let xn = two_stage_jump(100).component(0).unwrap();
        assert!((d_m1_1d(&xn, &x).unwrap() - 0.01).abs() < 1e-6);
    }

    #[test]
    fn m1_step_against_constant() {
        let x = step(1.0, 1.0);
        let zero = CadlagPath::constant(2.0, PadMode::HoldLeft, vec![0.0]).unwrap();
        let (lo, v) = d_m1_1d_bracket(&x, &zero, 1e-6).unwrap();
        assert!(lo >= 1.0 - 1e-6 && v <= 1.0 + 1e-12, "{lo} {v}");
    }

    #[test]
    fn m1_rejects_bad_shapes() {
        let x = single_jump_limit();
        assert!(matches!(d_m1_1d(&x, &x), Err(Error::Shape(_))));
        let a = step(1.0, 1.0);
        let b = CadlagPath::constant(3.0, PadMode::HoldLeft, vec![0.0]).unwrap();
        assert!(matches!(d_m1_1d(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn product_metric_on_example() {
        let x = single_jump_limit();
        assert_eq!(d_p(&x, &x).unwrap(), 0.0);
        let v: Vec<f64> = [10, 100, 1000].iter().map(|&n| d_p(&two_stage_jump(n), &x).unwrap()).collect();
        assert!(v[1] <= 0.02 && v[1] >= 0.0);
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn weak_bracket_on_example() {
        let x = single_jump_limit();
        let same = d_w_bracket(&x, &x, DEFAULT_BUDGET).unwrap();
        assert_eq!((same.lower, same.upper), (0.0, 0.0));
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000] {
            let b = d_w_bracket(&two_stage_jump(n), &x, DEFAULT_BUDGET).unwrap();
            assert!(b.lower <= b.upper);
            assert!((b.witness_value().unwrap() - b.upper).abs() < 1e-12);
            assert!(b.upper < prev);
            prev = b.upper;
            if n == 100 {
                assert!(b.upper <= 0.05, "{b:?}");
            }
        }
    }

    #[test]
    fn weak_bracket_terminal_gap() {
        let x = step(1.0, 1.0);
        let y = CadlagPath::step(2.0, PadMode::HoldLeft, vec![0.0, 1.0, 2.0], vec![vec![0.0], vec![1.0], vec![1.5]])
            .unwrap();
        let b = d_w_bracket(&x, &y, DEFAULT_BUDGET).unwrap();
        assert!(b.lower >= 0.5);
    }

    #[test]
    fn truncated_sum_for_translation() {
        let x = CadlagPath::step(3.0, PadMode::HoldLeft, vec![0.0, 0.5, 2.5], vec![vec![0.0], vec![1.0], vec![-1.0]])
            .unwrap();
        let c = 0.3;
        let y = x.translate(&[c]).unwrap();
        assert_eq!(d_w_truncated_infinite(&x, &x, 3, 4).unwrap(), 0.0);
        for n in 0..=3 {
            let v = d_w_truncated_infinite(&x, &y, n, 4).unwrap();
            let expected = c * (2.0 - 0.5f64.powi(n as i32));
            assert!((v - expected).abs() < 1e-9, "n = {n}: {v} vs {expected}");
        }
        assert!(matches!(d_w_truncated_infinite(&x, &y, 4, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn convergence_checks() {
        let x = single_jump_limit();
        let seq: Vec<CadlagPath> = [10, 20, 50, 100, 200].iter().map(|&n| two_stage_jump(n)).collect();
        let report = check_convergence(&seq, &x, &[0.05, 0.1, 0.2], 1e-9).unwrap();
        assert!(report.passed(), "{report:?}");
        let same = vec![x.clone(); 4];
        assert!(check_convergence(&same, &x, &[0.1], 1e-12).unwrap().passed());

        let flat = CadlagPath::constant(2.0, PadMode::HoldLeft, vec![0.0]).unwrap();
        let wiggles: Vec<CadlagPath> = [10, 20, 50, 100].iter().map(|&n| shrinking_wiggle(n)).collect();
        let report = check_convergence(&wiggles, &flat, &[0.05, 0.1, 0.6], 0.1).unwrap();
        assert!(!report.oscillation.passed);
        assert!(report.oscillation_profile.iter().all(|(_, v)| *v >= 1.0));
    }
}
