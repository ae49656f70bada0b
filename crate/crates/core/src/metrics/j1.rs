//! J1 bracket through order-preserving matchings of jump times.

use crate::cadlag::CadlagPath;
use crate::dist2;
use crate::error::Result;

use super::{DistanceBracket, Witness};

/// Matchings are searched exhaustively below this many jump pairs.
const EXHAUSTIVE_PAIRS: usize = 400;

/// `sup_{s in [s0, s1]} |x(lambda(s)) - y(s)|` for `lambda` affine from
/// `(s0, t0)` to `(s1, t1)`, using right values and left limits at every
/// breakpoint of the composition.
fn piece_cost(x: &CadlagPath, y: &CadlagPath, s0: f64, t0: f64, s1: f64, t1: f64) -> f64 {
    let rate = (t1 - t0) / (s1 - s0);
    let lambda = |s: f64| t0 + (s - s0) * rate;
    let mut cuts = vec![s0, s1];
    cuts.extend(y.times().iter().copied().filter(|&s| s > s0 && s < s1));
    cuts.extend(
        x.times()
            .iter()
            .copied()
            .filter(|&t| t > t0 && t < t1)
            .map(|t| s0 + (t - t0) / rate),
    );
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut worst: f64 = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let mid = 0.5 * (u + v);
        let kx = x.segment_at(lambda(mid));
        let ky = y.segment_at(mid);
        // both sides are affine on (u, v): compare the right value at u and the left limit at v
        for s in [u, v] {
            let a = x.segment_value(kx, lambda(s));
            let b = y.segment_value(ky, s);
            worst = worst.max(dist2(&a, &b));
        }
    }
    worst
}

fn jump_sizes(path: &CadlagPath) -> Vec<(f64, Vec<f64>)> {
    path.interior_jumps()
        .into_iter()
        .filter(|j| j.time < path.horizon())
        .map(|j| {
            let inc = j.increment();
            (j.time, inc)
        })
        .collect()
}

/// Lower bound from jumps of `a` that `b` cannot absorb: a time change moving
/// a jump `J` of `a` to `s` leaves either a time error `|s - t|` or a value
/// error of at least half the mismatch `|J - J_b(s)|`.
fn obstruction(a: &[(f64, Vec<f64>)], b: &[(f64, Vec<f64>)]) -> f64 {
    let mut bound: f64 = 0.0;
    for (t, inc) in a {
        let zero = vec![0.0; inc.len()];
        let mut best = 0.5 * dist2(inc, &zero);
        for (s, other) in b {
            best = best.min((s - t).abs().max(0.5 * dist2(inc, other)));
        }
        bound = bound.max(best);
    }
    bound
}

/// Bracket for the J1 distance.
///
/// The upper bound minimises, over order-preserving matchings of interior
/// jump times, the largest of the time displacement and the uniform error of
/// the piecewise-affine time change through the matched pairs (exhaustive
/// bottleneck search when there are at most 400 pairs, greedy otherwise).
pub fn d_j1_bracket(x: &CadlagPath, y: &CadlagPath) -> Result<DistanceBracket> {
    x.check_same_shape(y)?;
    let horizon = x.horizon();
    let jx = jump_sizes(x);
    let jy = jump_sizes(y);
    let end_gap = dist2(&x.initial_value(), &y.initial_value())
        .max(dist2(&x.terminal_value(), &y.terminal_value()));
    let lower = end_gap.max(obstruction(&jx, &jy)).max(obstruction(&jy, &jx));

    // nodes: (s, t) with lambda(s) = t; s ranges over y's jump times, t over x's
    let mut chain: Vec<(f64, f64)>;
    let mut best_cost;
    if jx.len() * jy.len() <= EXHAUSTIVE_PAIRS {
        let nodes: Vec<(usize, usize)> =
            (0..jy.len()).flat_map(|a| (0..jx.len()).map(move |b| (a, b))).collect();
        let coord = |k: usize| (jy[nodes[k].0].0, jx[nodes[k].1].0);
        // best[k] = bottleneck from the start to node k, prev[k] = predecessor (None = start)
        let mut best = vec![f64::INFINITY; nodes.len()];
        let mut prev: Vec<Option<usize>> = vec![None; nodes.len()];
        for k in 0..nodes.len() {
            let (s, t) = coord(k);
            best[k] = piece_cost(x, y, 0.0, 0.0, s, t).max((s - t).abs());
            for p in 0..k {
                let (a, b) = nodes[p];
                if a >= nodes[k].0 || b >= nodes[k].1 {
                    continue;
                }
                if best[p] >= best[k] {
                    continue;
                }
                let (s0, t0) = coord(p);
                let c = best[p].max(piece_cost(x, y, s0, t0, s, t)).max((s - t).abs());
                if c < best[k] {
                    best[k] = c;
                    prev[k] = Some(p);
                }
            }
        }
        best_cost = piece_cost(x, y, 0.0, 0.0, horizon, horizon);
        let mut last: Option<usize> = None;
        for k in 0..nodes.len() {
            if best[k] >= best_cost {
                continue;
            }
            let (s, t) = coord(k);
            let c = best[k].max(piece_cost(x, y, s, t, horizon, horizon));
            if c < best_cost {
                best_cost = c;
                last = Some(k);
            }
        }
        chain = Vec::new();
        let mut cur = last;
        while let Some(k) = cur {
            chain.push(coord(k));
            cur = prev[k];
        }
        chain.reverse();
    } else {
        chain = Vec::new();
        let mut next_x = 0;
        for (s, inc) in &jy {
            let mut pick = None;
            let mut pick_cost = 0.5 * dist2(inc, &vec![0.0; inc.len()]);
            for (b, (t, other)) in jx.iter().enumerate().skip(next_x) {
                let c = (s - t).abs().max(0.5 * dist2(inc, other));
                if c < pick_cost {
                    pick_cost = c;
                    pick = Some(b);
                }
            }
            if let Some(b) = pick {
                chain.push((*s, jx[b].0));
                next_x = b + 1;
            }
        }
        best_cost = chain_cost(x, y, &chain);
        let identity = piece_cost(x, y, 0.0, 0.0, horizon, horizon);
        if identity <= best_cost {
            best_cost = identity;
            chain.clear();
        }
    }
    let upper = best_cost.max(end_gap).max(lower);
    let mut from = vec![0.0];
    let mut to = vec![0.0];
    for (s, t) in chain {
        from.push(s);
        to.push(t);
    }
    from.push(horizon);
    to.push(horizon);
    Ok(DistanceBracket {
        lower,
        upper,
        method: "jump-obstruction lower bound; jump-matching time change upper bound".into(),
        witness: Some(Witness::TimeChange { from, to }),
    })
}

fn chain_cost(x: &CadlagPath, y: &CadlagPath, chain: &[(f64, f64)]) -> f64 {
    let horizon = x.horizon();
    let mut pts = vec![(0.0, 0.0)];
    pts.extend_from_slice(chain);
    pts.push((horizon, horizon));
    pts.windows(2)
        .map(|w| piece_cost(x, y, w[0].0, w[0].1, w[1].0, w[1].1).max((w[1].0 - w[1].1).abs()))
        .fold(0.0, f64::max)
}
