//! Oscillation functionals on the extended interval `[-1, T + 1]` and the
//! compactness and tightness diagnostics built on them.
//!
//! The triple supremum in `w_w` runs over candidate events: constant pieces
//! carry their whole time interval, so piecewise-constant paths are handled
//! exactly. Affine segments contribute their endpoints, left limits, the
//! times where a coordinate crosses a breakpoint value and a uniform grid of
//! [`GRID_POINTS`] points. The result is a lower bound on the exact value,
//! short of it by at most [`refinement_error_bound`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::graphrep::box_distance;
use crate::{dist2, norm2};

/// Refinement grid per affine segment.
pub const GRID_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
struct Event {
    value: Vec<f64>,
    /// Earliest time at which the value is taken (or approached).
    lo: f64,
    /// Latest such time.
    hi: f64,
    /// The value is not attained at `hi` (constant piece open on the right).
    hi_open: bool,
    /// The value is a left limit at `lo = hi`, approached strictly from the left.
    left_limit: bool,
}

impl Event {
    fn point(value: Vec<f64>, t: f64) -> Self {
        Event { value, lo: t, hi: t, hi_open: false, left_limit: false }
    }

    fn key(&self) -> (f64, u8) {
        (self.lo, if self.left_limit { 0 } else { 1 })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("width must be positive, got {delta}")));
    }
    Ok(())
}

/// Candidate events of `x` with times in `[lo, hi]`, sorted in time order.
fn events(x: &CadlagPath, lo: f64, hi: f64, grid: usize) -> Vec<Event> {
    let horizon = x.horizon();
    let mut out: Vec<Event> = Vec::new();
    let piece = |value: Vec<f64>, a: f64, b: f64, open: bool, out: &mut Vec<Event>| {
        let a2 = a.max(lo);
        let (b2, open2) = if b > hi { (hi, false) } else { (b, open) };
        if a2 < b2 || (a2 == b2 && !open2) {
            out.push(Event { value, lo: a2, hi: b2, hi_open: open2, left_limit: false });
        }
    };
    piece(x.pad_value(), -1.0, 0.0, true, &mut out);

    // breakpoint values, for coordinate crossings
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); x.dim()];
    for bp in x.breakpoints() {
        for c in 0..x.dim() {
            levels[c].push(bp.right[c]);
            levels[c].push(bp.left[c]);
        }
    }

    let n = x.len();
    for k in 0..n {
        let bp = x.breakpoint(k);
        let start = bp.time;
        let end = if k + 1 < n { x.times()[k + 1] } else { horizon };
        let constant = bp.slope.iter().all(|s| *s == 0.0);
        if constant {
            if k + 1 < n {
                piece(bp.right.to_vec(), start, end, true, &mut out);
            } else {
                piece(bp.right.to_vec(), start, horizon + 1.0, false, &mut out);
            }
            continue;
        }
        let span = end - start;
        let mut offsets: Vec<f64> = (0..grid).map(|i| span * (i as f64 / grid as f64)).collect();
        for c in 0..x.dim() {
            let s = bp.slope[c];
            if s == 0.0 {
                continue;
            }
            for &level in &levels[c] {
                let dt = (level - bp.right[c]) / s;
                if dt > 0.0 && dt < span {
                    offsets.push(dt);
                }
            }
        }
        for dt in offsets {
            let t = start + dt;
            // recompute the offset from the rounded time so equal times carry equal values
            let dt = t - start;
            if t >= lo && t <= hi {
                let value = bp.right.iter().zip(bp.slope).map(|(v, s)| v + s * dt).collect();
                out.push(Event::point(value, t));
            }
        }
        if end > lo && end <= hi {
            let value = x.segment_value(k, end);
            out.push(Event { value, lo: end, hi: end, hi_open: false, left_limit: true });
        }
        if k + 1 == n {
            piece(x.terminal_value(), horizon, horizon + 1.0, false, &mut out);
        }
    }
    // window edges that fall inside affine segments
    for t in [lo, hi] {
        if t >= 0.0 && t < horizon && !x.slope_at_segment(x.segment_at(t)).iter().all(|s| *s == 0.0) {
            out.push(Event::point(x.value_unchecked(t), t));
        }
    }
    if hi > 0.0 && hi <= horizon && !x.slope_at_segment(x.segment_at(hi)).iter().all(|s| *s == 0.0) {
        out.push(Event { value: x.left_limit_unchecked(hi), lo: hi, hi, hi_open: false, left_limit: true });
    }
    out.sort_by(|a, b| a.key().partial_cmp(&b.key()).unwrap());
    out
}

/// `sup_{t1 <= t2 in window} |x(t1) - x(t2)|` over `[-1 v (t - delta), (t + delta) ^ (T + 1)]`.
pub fn vbar(x: &CadlagPath, t: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (lo, hi) = window(x, t, delta)?;
    // distances between affine pieces peak at endpoints, so no refinement is needed
    let ev = events(x, lo, hi, 1);
    let mut best: f64 = 0.0;
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            best = best.max(dist2(&ev[i].value, &ev[j].value));
        }
    }
    Ok(best)
}

fn window(x: &CadlagPath, t: f64, delta: f64) -> Result<(f64, f64)> {
    let end = x.horizon() + 1.0;
    if !(t >= -1.0 && t <= end) {
        return Err(Error::Domain(format!("time {t} outside [-1, {end}]")));
    }
    Ok(((t - delta).max(-1.0), (t + delta).min(end)))
}

/// Middle-point distance to the box of the outer values, maximised over
/// ordered triples of events; `admissible(i, k)` filters the outer pair.
fn triple_sup<F>(ev: &[Event], admissible: F) -> f64
where
    F: Fn(&Event, &Event) -> bool + Sync,
{
    (0..ev.len())
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for k in i + 2..ev.len() {
                if !admissible(&ev[i], &ev[k]) {
                    // events are sorted, so later k only widen the span
                    break;
                }
                for j in i + 1..k {
                    best = best.max(box_distance(&ev[j].value, &ev[i].value, &ev[k].value));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// `w_w(x, t, delta)`: the largest distance from a middle value to the product
/// segment of two outer values, over ordered triples in the window around `t`.
pub fn w_w_local(x: &CadlagPath, t: f64, delta: f64) -> Result<f64> {
    w_w_local_with(x, t, delta, GRID_POINTS)
}

pub fn w_w_local_with(x: &CadlagPath, t: f64, delta: f64, grid: usize) -> Result<f64> {
    check_delta(delta)?;
    let (lo, hi) = window(x, t, delta)?;
    let ev = events(x, lo, hi, grid.max(1));
    Ok(triple_sup(&ev, |_, _| true))
}

/// `w_w(x, delta) = sup_{-1 <= t <= T + 1} w_w(x, t, delta)`, i.e. the triple
/// supremum over `[-1, T + 1]` restricted to spans of at most `2 delta`.
pub fn w_w_global(x: &CadlagPath, delta: f64) -> Result<f64> {
    w_w_global_with(x, delta, GRID_POINTS)
}

pub fn w_w_global_with(x: &CadlagPath, delta: f64, grid: usize) -> Result<f64> {
    check_delta(delta)?;
    let ev = events(x, -1.0, x.horizon() + 1.0, grid.max(1));
    let width = 2.0 * delta;
    Ok(triple_sup(&ev, |a, b| {
        let gap = b.lo - a.hi;
        if b.left_limit {
            gap <= width
        } else if a.hi_open || a.left_limit {
            gap < width
        } else {
            gap <= width
        }
    }))
}

/// Error bound of the grid refinement: twice the largest
/// `|slope| * length / grid` over affine segments, zero for piecewise-constant
/// paths. The computed `w_w` never exceeds the exact value and falls short of
/// it by at most this amount.
pub fn refinement_error_bound(x: &CadlagPath, grid: usize) -> f64 {
    let n = x.len();
    (0..n)
        .map(|k| {
            let end = if k + 1 < n { x.times()[k + 1] } else { x.horizon() };
            2.0 * norm2(x.slope_at_segment(k)) * (end - x.times()[k]) / grid.max(1) as f64
        })
        .fold(0.0, f64::max)
}

/// Oscillation profile `delta -> w_w(x, delta)`.
pub fn profile(x: &CadlagPath, deltas: &[f64]) -> Result<Vec<f64>> {
    deltas.iter().map(|&d| w_w_global(x, d)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    /// `sup_family |x|_T`.
    pub sup_norm_bound: f64,
    pub deltas: Vec<f64>,
    /// `sup_family w_w(x, delta)` per delta.
    pub oscillation: Vec<f64>,
    /// Per member, per delta.
    pub member_oscillation: Vec<Vec<f64>>,
    /// The profile is nondecreasing in delta and at most `eps` at the smallest delta.
    pub certified: bool,
    pub eps: f64,
    pub note: String,
}

/// Sufficient-condition diagnostic for relative compactness of a finite family.
pub fn compactness_report(family: &[CadlagPath], deltas: &[f64], eps: f64) -> Result<CompactnessReport> {
    if family.is_empty() {
        return Err(Error::Domain("empty family".into()));
    }
    if deltas.is_empty() {
        return Err(Error::Domain("empty delta grid".into()));
    }
    for m in &family[1..] {
        family[0].check_same_shape(m)?;
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let member_oscillation: Vec<Vec<f64>> =
        family.par_iter().map(|x| profile(x, &deltas)).collect::<Result<_>>()?;
    let sup_norm_bound = family
        .iter()
        .map(|x| x.sup_norm(x.horizon()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let oscillation: Vec<f64> = (0..deltas.len())
        .map(|d| member_oscillation.iter().map(|row| row[d]).fold(0.0, f64::max))
        .collect();
    let monotone = oscillation.windows(2).all(|w| w[0] <= w[1] + 1e-12);
    let certified = monotone && oscillation[0] <= eps;
    Ok(CompactnessReport {
        sup_norm_bound,
        deltas,
        oscillation,
        member_oscillation,
        certified,
        eps,
        note: "finite-grid heuristic: the sufficient condition involves a limit in delta that no finite grid can verify"
            .into(),
    })
}

impl CompactnessReport {
    /// Rows are deltas, columns are family members.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# schema: wm1-compactness v1\ndelta");
        for i in 0..self.member_oscillation.len() {
            s.push_str(&format!(",member_{i}"));
        }
        s.push_str(",sup\n");
        for (d, delta) in self.deltas.iter().enumerate() {
            s.push_str(&format!("{delta}"));
            for row in &self.member_oscillation {
                s.push_str(&format!(",{}", row[d]));
            }
            s.push_str(&format!(",{}\n", self.oscillation[d]));
        }
        s
    }
}

/// A weighted sample of paths for one sequence index.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub index: u64,
    pub paths: Vec<CadlagPath>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn uniform(index: u64, paths: Vec<CadlagPath>) -> Self {
        let w = 1.0 / paths.len().max(1) as f64;
        let weights = vec![w; paths.len()];
        Self { index, paths, weights }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub indices: Vec<u64>,
    pub k_grid: Vec<f64>,
    pub deltas: Vec<f64>,
    pub eps: f64,
    /// `[n][k]`: weighted fraction with `|x|_T > K`.
    pub norm_tail: Vec<Vec<f64>>,
    /// `[n][d]`: weighted fraction with `w_w(x, delta) >= eps`.
    pub oscillation_tail: Vec<Vec<f64>>,
    /// Per K, the maximum of `norm_tail` over the tail half of the indices.
    pub norm_limsup: Vec<f64>,
    /// Per delta, the maximum of `oscillation_tail` over the tail half of the indices.
    pub oscillation_limsup: Vec<f64>,
    pub note: String,
}

/// Empirical tail probabilities for sup-norm and oscillation per ensemble.
pub fn tightness_report(
    ensembles: &[Ensemble],
    k_grid: &[f64],
    eps: f64,
    deltas: &[f64],
) -> Result<TightnessReport> {
    if ensembles.is_empty() || ensembles.iter().any(|e| e.paths.is_empty()) {
        return Err(Error::Domain("ensembles must be nonempty".into()));
    }
    for e in ensembles {
        if e.paths.len() != e.weights.len() {
            return Err(Error::Shape("one weight per path required".into()));
        }
    }
    let mut norm_tail = Vec::new();
    let mut oscillation_tail = Vec::new();
    for e in ensembles {
        let total: f64 = e.weights.iter().sum();
        let stats: Vec<(f64, Vec<f64>)> = e
            .paths
            .par_iter()
            .map(|x| Ok((x.sup_norm(x.horizon())?, profile(x, deltas)?)))
            .collect::<Result<_>>()?;
        norm_tail.push(
            k_grid
                .iter()
                .map(|&k| {
                    stats.iter().zip(&e.weights).filter(|((n, _), _)| *n > k).map(|(_, w)| w).sum::<f64>()
                        / total
                })
                .collect(),
        );
        oscillation_tail.push(
            (0..deltas.len())
                .map(|d| {
                    stats.iter().zip(&e.weights).filter(|((_, p), _)| p[d] >= eps).map(|(_, w)| w).sum::<f64>()
                        / total
                })
                .collect::<Vec<f64>>(),
        );
    }
    let tail = ensembles.len() / 2;
    let limsup = |rows: &Vec<Vec<f64>>, cols: usize| -> Vec<f64> {
        (0..cols).map(|c| rows[tail..].iter().map(|r| r[c]).fold(0.0, f64::max)).collect()
    };
    Ok(TightnessReport {
        indices: ensembles.iter().map(|e| e.index).collect(),
        k_grid: k_grid.to_vec(),
        deltas: deltas.to_vec(),
        eps,
        norm_limsup: limsup(&norm_tail, k_grid.len()),
        oscillation_limsup: limsup(&oscillation_tail, deltas.len()),
        norm_tail,
        oscillation_tail,
        note: "finite-sample diagnostic: limsup over n is the maximum over the tail half of the indices".into(),
    })
}

impl TightnessReport {
    /// Rows are deltas, columns are ensemble indices.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# schema: wm1-tightness v1\ndelta");
        for n in &self.indices {
            s.push_str(&format!(",n_{n}"));
        }
        s.push('\n');
        for (d, delta) in self.deltas.iter().enumerate() {
            s.push_str(&format!("{delta}"));
            for row in &self.oscillation_tail {
                s.push_str(&format!(",{}", row[d]));
            }
            s.push('\n');
        }
        s
    }
}
