#![allow(dead_code)]

use rand::Rng;
use wm1::{CadlagPath, PadMode};

/// Sorted breakpoint times `0 = t0 < t1 < ...` in `[0, horizon)`, separated by at least `gap`.
pub fn random_times(rng: &mut impl Rng, horizon: f64, count: usize, gap: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    while times.len() < count {
        let t = rng.random_range(gap..horizon - gap);
        if times.iter().all(|s| (s - t).abs() >= gap) {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
}

/// Mixed step/affine path with values in `[-2, 2]` and slopes in `[-1, 1]`.
pub fn random_path(rng: &mut impl Rng, dim: usize, horizon: f64, pad: PadMode, pieces: usize) -> CadlagPath {
    let times = random_times(rng, horizon, pieces, 0.02 * horizon);
    let values = times.iter().map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let slopes = times
        .iter()
        .map(|_| {
            if rng.random_bool(0.5) {
                vec![0.0; dim]
            } else {
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
            }
        })
        .collect();
    CadlagPath::new(horizon, pad, times, values, slopes).unwrap()
}

/// Componentwise nondecreasing path with nonnegative start, nonnegative jumps and slopes.
pub fn random_monotone_path(rng: &mut impl Rng, dim: usize, horizon: f64, pad: PadMode, pieces: usize) -> CadlagPath {
    let times = random_times(rng, horizon, pieces, 0.02 * horizon);
    let mut level: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for k in 0..times.len() {
        let slope: Vec<f64> = (0..dim)
            .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        values.push(level.clone());
        let end = if k + 1 < times.len() { times[k + 1] } else { horizon };
        for c in 0..dim {
            level[c] += slope[c] * (end - times[k]);
            if rng.random_bool(0.5) {
                level[c] += rng.random_range(0.0..1.0);
            }
        }
        slopes.push(slope);
    }
    CadlagPath::new(horizon, pad, times, values, slopes).unwrap()
}

/// Continuous piecewise-linear path with knot values in `[-amp, amp]`.
pub fn random_continuous(rng: &mut impl Rng, dim: usize, horizon: f64, pad: PadMode, knots: usize, amp: f64) -> CadlagPath {
    let mut times = random_times(rng, horizon, knots, 0.05 * horizon);
    times.push(horizon);
    let values = times.iter().map(|_| (0..dim).map(|_| rng.random_range(-amp..amp)).collect()).collect();
    CadlagPath::from_knots(pad, times, values).unwrap()
}

/// `sup` of the distance from `x(t2)` to the box spanned by `x(t1), x(t3)` over
/// grid triples `t1 < t2 < t3` with `t3 - t1 <= 2 delta`, for one-dimensional
/// `x`. The middle point enters only through running extremes, which prunes
/// the triple loop to pairs.
pub fn brute_force_oscillation_1d(x: &CadlagPath, delta: f64, grid: usize) -> f64 {
    let h = x.horizon();
    let m = (grid - 1) as f64;
    // one rounding per point, so grid points hit breakpoints of the form k / m exactly
    let ts: Vec<f64> = (0..grid).map(|i| ((h + 2.0) * i as f64 - m) / m).map(|t| t.min(h + 1.0)).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| x.evaluate(t).unwrap()[0]).collect();
    let mut best: f64 = 0.0;
    for i in 0..grid {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for k in i + 1..grid {
            // tolerance keeps grid-aligned spans of exactly 2 delta inside
            if ts[k] - ts[i] > 2.0 * delta + 1e-9 {
                break;
            }
            if k > i + 1 {
                let m = vals[k - 1];
                hi = hi.max(m);
                lo = lo.min(m);
                let top = vals[i].max(vals[k]);
                let bottom = vals[i].min(vals[k]);
                best = best.max(hi - top).max(bottom - lo);
            }
        }
    }
    best
}
