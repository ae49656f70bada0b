//! Thick graphs, the weak order and weak parametric representations.
//!
//! A weak parametric representation of `x` on `[0, T]` is a continuous map
//! `s -> (xhat(s), rhat(s))` from `[0, 1]` onto the thick graph
//! `G(x) = {(z, t) : z in [[x(t-), x(t)]]}` that starts at `(x(0), 0)`, ends at
//! `(x(T), T)` and is nondecreasing for the weak order. Representations here
//! are piecewise linear in `s` and stored by their knots.

use serde::{Deserialize, Serialize};

use crate::cadlag::{CadlagPath, PadMode, VariationNorm};
use crate::error::{Error, Result};
use crate::{dist2, GRAPH_TOL, TIME_TOL};

/// The box `[[a, b]] = prod_i [min(a_i, b_i), max(a_i, b_i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSegment {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ProductSegment {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape("product segment endpoints differ in dimension".into()));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Componentwise projection of `z` onto the box.
    pub fn clamp(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(v, (a, b))| v.clamp(a.min(*b), a.max(*b)))
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim() && box_distance(z, &self.a, &self.b) <= tol
    }
}

/// Euclidean distance from `z` to `[[a, b]]` without allocating.
pub(crate) fn box_distance(z: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..z.len() {
        let (lo, hi) = if a[i] <= b[i] { (a[i], b[i]) } else { (b[i], a[i]) };
        let d = if z[i] > hi {
            z[i] - hi
        } else if z[i] < lo {
            lo - z[i]
        } else {
            0.0
        };
        acc += d * d;
    }
    acc.sqrt()
}

/// `|z - [[a, b]]|`.
pub fn segment_distance(z: &[f64], seg: &ProductSegment) -> Result<f64> {
    if z.len() != seg.dim() {
        return Err(Error::Shape(format!(
            "point of dimension {} against a {}-d segment",
            z.len(),
            seg.dim()
        )));
    }
    Ok(box_distance(z, &seg.a, &seg.b))
}

/// The section `[[x(t-), x(t)]]` of the thick graph at time `t` in `[0, T]`,
/// with the convention `x(0-) = x(0)`.
pub fn graph_section(x: &CadlagPath, t: f64) -> Result<ProductSegment> {
    if !(t >= -TIME_TOL && t <= x.horizon() + TIME_TOL) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", x.horizon())));
    }
    let t = t.clamp(0.0, x.horizon());
    Ok(ProductSegment { a: x.graph_left(t), b: x.value_unchecked(t) })
}

/// Whether `(z, t)` lies in `G(x)` up to [`GRAPH_TOL`].
pub fn in_thick_graph(x: &CadlagPath, z: &[f64], t: f64) -> bool {
    match graph_section(x, t) {
        Ok(seg) => seg.contains(z, GRAPH_TOL),
        Err(_) => false,
    }
}

/// The weak order on `G(x)`: `(z1, t1) <= (z2, t2)` iff `t1 < t2`, or `t1 = t2`
/// and every coordinate of `z1` is at most as far from `x_i(t1-)` as `z2`.
pub fn weak_order_leq(p1: (&[f64], f64), p2: (&[f64], f64), x: &CadlagPath) -> Result<bool> {
    for (z, t) in [p1, p2] {
        if z.len() != x.dim() {
            return Err(Error::Shape("point dimension differs from the path".into()));
        }
        if !in_thick_graph(x, z, t) {
            return Err(Error::Membership { time: t, point: z.to_vec() });
        }
    }
    let (z1, t1) = p1;
    let (z2, t2) = p2;
    if t1 < t2 - TIME_TOL {
        return Ok(true);
    }
    if (t1 - t2).abs() > TIME_TOL {
        return Ok(false);
    }
    let left = x.graph_left(t1.max(0.0));
    Ok(left
        .iter()
        .zip(z1.iter().zip(z2))
        .all(|(l, (a, b))| (l - a).abs() <= (l - b).abs() + GRAPH_TOL))
}

/// A piecewise-linear pair `(xhat, rhat)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRep {
    pub knots: Vec<f64>,
    pub xhat: Vec<Vec<f64>>,
    pub rhat: Vec<f64>,
}

/// Outcome of [`is_paramrep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRepReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

impl ParamRep {
    /// Validates the knot structure (not the relation to any path).
    pub fn new(knots: Vec<f64>, xhat: Vec<Vec<f64>>, rhat: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != xhat.len() || knots.len() != rhat.len() {
            return Err(Error::Shape("knots, xhat and rhat must have equal length >= 2".into()));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::Contract("knots must run from 0 to 1".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract("knots must be strictly increasing".into()));
        }
        let dim = xhat[0].len();
        if dim == 0 || xhat.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape("xhat values must share a positive dimension".into()));
        }
        Ok(Self { knots, xhat, rhat })
    }

    pub fn dim(&self) -> usize {
        self.xhat[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.rhat.last().unwrap()
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, 1.0);
        let j = self.knots.partition_point(|&k| k <= s).saturating_sub(1).min(self.knots.len() - 2);
        let w = (s - self.knots[j]) / (self.knots[j + 1] - self.knots[j]);
        (j, w.clamp(0.0, 1.0))
    }

    /// `(xhat(s), rhat(s))`, with `s` clamped to `[0, 1]`.
    pub fn eval(&self, s: f64) -> (Vec<f64>, f64) {
        let (j, w) = self.locate(s);
        let x = self.xhat[j]
            .iter()
            .zip(&self.xhat[j + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect();
        let r = self.rhat[j] + w * (self.rhat[j + 1] - self.rhat[j]);
        (x, r)
    }

    pub fn xhat_at(&self, s: f64) -> Vec<f64> {
        self.eval(s).0
    }

    pub fn rhat_at(&self, s: f64) -> f64 {
        self.eval(s).1
    }

    /// Largest slope of `rhat` over the knot intervals.
    pub fn time_lipschitz(&self) -> f64 {
        (0..self.knots.len() - 1)
            .map(|j| (self.rhat[j + 1] - self.rhat[j]).abs() / (self.knots[j + 1] - self.knots[j]))
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean slope of `xhat` over the knot intervals.
    pub fn space_lipschitz(&self) -> f64 {
        (0..self.knots.len() - 1)
            .map(|j| dist2(&self.xhat[j + 1], &self.xhat[j]) / (self.knots[j + 1] - self.knots[j]))
            .fold(0.0, f64::max)
    }

    /// Largest slope of any single coordinate of `xhat`.
    pub fn coordinate_lipschitz(&self) -> f64 {
        (0..self.knots.len() - 1)
            .map(|j| {
                let ds = self.knots[j + 1] - self.knots[j];
                self.xhat[j + 1]
                    .iter()
                    .zip(&self.xhat[j])
                    .map(|(b, a)| (b - a).abs() / ds)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `(sup_s |xhat - xhat'|, sup_s |rhat - rhat'|)`, exact because both are
    /// piecewise linear on the merged knot set.
    pub fn sup_gaps(&self, other: &ParamRep) -> Result<(f64, f64)> {
        if self.dim() != other.dim() {
            return Err(Error::Shape("representations differ in dimension".into()));
        }
        let mut grid: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let mut space: f64 = 0.0;
        let mut time: f64 = 0.0;
        for s in grid {
            let (x1, r1) = self.eval(s);
            let (x2, r2) = other.eval(s);
            space = space.max(dist2(&x1, &x2));
            time = time.max((r1 - r2).abs());
        }
        Ok((space, time))
    }

    /// `max(sup |xhat - xhat'|, sup |rhat - rhat'|)`.
    pub fn distance(&self, other: &ParamRep) -> Result<f64> {
        let (a, b) = self.sup_gaps(other)?;
        Ok(a.max(b))
    }

    /// The right inverse `r(t) = inf{s : rhat(s) > t} ∧ 1` on `[0, T]`, as a
    /// nondecreasing right-continuous one-dimensional path.
    pub fn right_inverse(&self) -> Result<CadlagPath> {
        right_inverse(&self.knots, &self.rhat)
    }

    /// The common `(space, time)` polyline traced by the representation.
    pub(crate) fn curve(&self) -> crate::metrics::frechet::Curve {
        crate::metrics::frechet::Curve::new(self.xhat.clone(), self.rhat.clone())
    }
}

/// Right inverse of a nondecreasing continuous piecewise-linear `rhat` given by
/// knots, as a cadlag path on `[0, rhat(1)]`.
pub fn right_inverse(knots: &[f64], rhat: &[f64]) -> Result<CadlagPath> {
    if knots.len() != rhat.len() || knots.len() < 2 {
        return Err(Error::Shape("knots and rhat must have equal length >= 2".into()));
    }
    if rhat[0].abs() > TIME_TOL {
        return Err(Error::Contract(format!("rhat(0) must be 0, got {}", rhat[0])));
    }
    if rhat.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("rhat must be nondecreasing".into()));
    }
    let horizon = *rhat.last().unwrap();
    if !(horizon > 0.0) {
        return Err(Error::Contract("rhat(1) must be positive".into()));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for j in 0..knots.len() - 1 {
        let dr = rhat[j + 1] - rhat[j];
        if dr <= 0.0 {
            continue;
        }
        let t = if j == 0 { 0.0 } else { rhat[j] };
        let slope = (knots[j + 1] - knots[j]) / dr;
        match times.last() {
            Some(&last) if (t - last).abs() <= TIME_TOL => {
                // previous increasing piece ended at the same time; overwrite is impossible
                // because pieces are disjoint in time
                values.pop();
                slopes.pop();
                times.pop();
            }
            _ => {}
        }
        times.push(t);
        values.push(vec![knots[j]]);
        slopes.push(vec![slope]);
    }
    // r(T) = 1: a final plateau of rhat at T becomes a jump at T.
    let end_value = {
        let k = times.len() - 1;
        values[k][0] + slopes[k][0] * (horizon - times[k])
    };
    if (1.0 - end_value).abs() > 1e-15 {
        times.push(horizon);
        values.push(vec![1.0]);
        slopes.push(vec![0.0]);
    }
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::Contract("rhat never increases from 0".into()));
    }
    CadlagPath::new(horizon, PadMode::ZeroLeft, times, values, slopes)
}

/// Builds the total-variation (time-stretching) representation of `x` under the L1 norm.
pub fn build_paramrep_tv(x: &CadlagPath) -> ParamRep {
    build_paramrep_tv_with(x, VariationNorm::L1)
}

/// Time-stretching representation: `r(t) = (t + V(x, t)) / (T + V(x, T))` and
/// `rhat` its left inverse capped at `T`. Each jump gets a flat stretch of
/// `rhat` whose length is the jump size over `T + V(x, T)`, on which `xhat`
/// interpolates linearly from `x(t-)` to `x(t)`; elsewhere `xhat = x(rhat)`.
pub fn build_paramrep_tv_with(x: &CadlagPath, norm: VariationNorm) -> ParamRep {
    build_routed(x, norm, &[])
}

/// Intermediate waypoints for the flat stretch of one jump.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct JumpRoute {
    pub time: f64,
    pub waypoints: Vec<Vec<f64>>,
}

/// Like [`build_paramrep_tv_with`], but the flat stretch of a jump listed in
/// `routes` visits the given waypoints (which must be weak-order monotone
/// within the jump box) at parameters proportional to the cumulative length
/// of the route.
pub(crate) fn build_routed(x: &CadlagPath, norm: VariationNorm, routes: &[JumpRoute]) -> ParamRep {
    let horizon = x.horizon();
    let total = horizon + x.total_variation_with(norm, horizon).expect("horizon in range");
    let mut knots = vec![0.0];
    let mut xhat = vec![x.initial_value()];
    let mut rhat = vec![0.0];
    let push = |s: f64, v: Vec<f64>, r: f64, knots: &mut Vec<f64>, xhat: &mut Vec<Vec<f64>>, rhat: &mut Vec<f64>| {
        let last = *knots.last().unwrap();
        if s > last {
            knots.push(s);
            xhat.push(v);
            rhat.push(r);
        } else {
            // zero-length stretch: keep the later state
            *xhat.last_mut().unwrap() = v;
            *rhat.last_mut().unwrap() = r;
        }
    };
    let mut variation = 0.0;
    let n = x.len();
    for k in 0..n {
        let bp = x.breakpoint(k);
        if k > 0 {
            let jump: Vec<f64> = bp.right.iter().zip(bp.left).map(|(r, l)| r - l).collect();
            let size = norm.apply(&jump);
            if size > 0.0 {
                let route = routes.iter().find(|r| (r.time - bp.time).abs() <= TIME_TOL);
                if let Some(route) = route {
                    let mut pts: Vec<&[f64]> = vec![bp.left];
                    pts.extend(route.waypoints.iter().map(|w| w.as_slice()));
                    pts.push(bp.right);
                    let lengths: Vec<f64> = pts
                        .windows(2)
                        .map(|w| {
                            let d: Vec<f64> = w[1].iter().zip(w[0]).map(|(b, a)| b - a).collect();
                            norm.apply(&d)
                        })
                        .collect();
                    let route_len: f64 = lengths.iter().sum();
                    let mut acc = 0.0;
                    for (i, len) in lengths.iter().enumerate().take(lengths.len() - 1) {
                        acc += len;
                        let s = (bp.time + variation + size * acc / route_len) / total;
                        push(s, pts[i + 1].to_vec(), bp.time, &mut knots, &mut xhat, &mut rhat);
                    }
                }
                variation += size;
                push((bp.time + variation) / total, bp.right.to_vec(), bp.time, &mut knots, &mut xhat, &mut rhat);
            }
        }
        let end = if k + 1 < n { x.times()[k + 1] } else { horizon };
        if end > bp.time {
            variation += norm.apply(bp.slope) * (end - bp.time);
            let value = x.segment_value(k, end);
            push((end + variation) / total, value, end, &mut knots, &mut xhat, &mut rhat);
        }
    }
    // pin the terminal knot exactly
    let last = knots.len() - 1;
    knots[last] = 1.0;
    rhat[last] = horizon;
    if knots[last - 1] >= 1.0 {
        knots.remove(last - 1);
        xhat.remove(last - 1);
        rhat.remove(last - 1);
    }
    ParamRep { knots, xhat, rhat }
}

/// `max_t |xhat(r(t)) - x(t)|` over every breakpoint of `x` and a uniform grid
/// of `probes` points on `[0, T]`.
pub fn compose_check(rep: &ParamRep, x: &CadlagPath, probes: usize) -> Result<f64> {
    if rep.dim() != x.dim() {
        return Err(Error::Shape("representation and path differ in dimension".into()));
    }
    let r = rep.right_inverse()?;
    let horizon = x.horizon().min(r.horizon());
    let mut times: Vec<f64> = x.times().iter().copied().filter(|&t| t <= horizon).collect();
    let m = probes.max(2);
    times.extend((0..m).map(|i| horizon * i as f64 / (m - 1) as f64));
    let mut worst: f64 = 0.0;
    for t in times {
        let s = r.value_unchecked(t)[0];
        let lhs = rep.xhat_at(s);
        let rhs = x.value_unchecked(t);
        worst = worst.max(dist2(&lhs, &rhs));
    }
    Ok(worst)
}

/// Checks that `rep` is a weak parametric representation of `x`, listing every violation.
pub fn is_paramrep(rep: &ParamRep, x: &CadlagPath) -> ParamRepReport {
    let mut violations = Vec::new();
    if rep.dim() != x.dim() {
        return ParamRepReport {
            valid: false,
            violations: vec![format!("dimension {} vs path dimension {}", rep.dim(), x.dim())],
        };
    }
    let horizon = x.horizon();
    let (x0, r0) = rep.eval(0.0);
    if r0.abs() > GRAPH_TOL || dist2(&x0, &x.initial_value()) > GRAPH_TOL {
        violations.push(format!("start ({x0:?}, {r0}) is not (x(0), 0)"));
    }
    let (x1, r1) = rep.eval(1.0);
    if (r1 - horizon).abs() > GRAPH_TOL || dist2(&x1, &x.terminal_value()) > GRAPH_TOL {
        violations.push(format!("end ({x1:?}, {r1}) is not (x(T), T)"));
    }
    for j in 0..rep.knots.len() - 1 {
        if rep.rhat[j + 1] < rep.rhat[j] - GRAPH_TOL {
            violations.push(format!(
                "rhat decreases on [{}, {}] ({} -> {})",
                rep.knots[j],
                rep.knots[j + 1],
                rep.rhat[j],
                rep.rhat[j + 1]
            ));
        }
    }
    if rep.rhat.iter().any(|&r| r < -GRAPH_TOL || r > horizon + GRAPH_TOL) {
        violations.push("rhat leaves [0, T]".into());
    }
    let mut probes: Vec<f64> = rep.knots.clone();
    probes.extend(rep.knots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    probes.extend((0..=1000).map(|i| i as f64 / 1000.0));
    probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    probes.dedup();
    let mut off_graph = 0usize;
    for &s in &probes {
        let (z, t) = rep.eval(s);
        if !in_thick_graph(x, &z, t) {
            if off_graph < 5 {
                violations.push(format!("({z:?}, {t}) at s = {s} is off the thick graph"));
            }
            off_graph += 1;
        }
    }
    if off_graph > 5 {
        violations.push(format!("... {} more off-graph probes", off_graph - 5));
    }
    for j in 0..rep.knots.len() - 1 {
        let (t1, t2) = (rep.rhat[j], rep.rhat[j + 1]);
        if (t1 - t2).abs() <= TIME_TOL {
            let left = x.graph_left(t1.clamp(0.0, horizon));
            let ok = left
                .iter()
                .zip(rep.xhat[j].iter().zip(&rep.xhat[j + 1]))
                .all(|(l, (a, b))| (l - a).abs() <= (l - b).abs() + GRAPH_TOL);
            if !ok {
                violations.push(format!(
                    "weak order violated between knots {} and {} at t = {t1}",
                    rep.knots[j],
                    rep.knots[j + 1]
                ));
            }
        }
    }
    ParamRepReport { valid: violations.is_empty(), violations }
}
