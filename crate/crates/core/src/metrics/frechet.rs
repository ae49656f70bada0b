//! Fréchet matching of polylines in `R^m x R` under the ground cost
//! `max(|dx|_2, |dt|)`, by free-space reachability and bisection.

use crate::dist2;

/// A polyline with spatial part in `R^m` and a scalar time part.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub space: Vec<Vec<f64>>,
    pub time: Vec<f64>,
}

impl Curve {
    pub fn new(space: Vec<Vec<f64>>, time: Vec<f64>) -> Self {
        debug_assert_eq!(space.len(), time.len());
        Self { space, time }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn segments(&self) -> usize {
        self.len() - 1
    }

    /// Point at polyline parameter `a` in `[0, len - 1]`.
    pub fn point(&self, a: f64) -> (Vec<f64>, f64) {
        let n = self.segments();
        if n == 0 {
            return (self.space[0].clone(), self.time[0]);
        }
        let i = (a.floor() as usize).min(n - 1);
        let w = (a - i as f64).clamp(0.0, 1.0);
        let x = self.space[i]
            .iter()
            .zip(&self.space[i + 1])
            .map(|(p, q)| p + w * (q - p))
            .collect();
        (x, self.time[i] + w * (self.time[i + 1] - self.time[i]))
    }
}

pub(crate) fn ground(x1: &[f64], t1: f64, x2: &[f64], t2: f64) -> f64 {
    dist2(x1, x2).max((t1 - t2).abs())
}

/// Closed sub-interval of `[0, 1]`; empty when `lo > hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    const EMPTY: Interval = Interval { lo: 1.0, hi: 0.0 };

    fn is_empty(self) -> bool {
        self.lo > self.hi
    }
}

/// Parameters `a` in `[0, 1]` with `ground(seg(a), q) <= eps`.
fn free_interval(curve: &Curve, i: usize, qx: &[f64], qt: f64, eps: f64) -> Interval {
    let (ax, at) = (&curve.space[i], curve.time[i]);
    let (bx, bt) = (&curve.space[i + 1], curve.time[i + 1]);
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;

    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for c in 0..qx.len() {
        let d = bx[c] - ax[c];
        let e = ax[c] - qx[c];
        alpha += d * d;
        beta += d * e;
        gamma += e * e;
    }
    let eps2 = eps * eps;
    if alpha <= f64::EPSILON * f64::EPSILON * (1.0 + gamma) {
        if gamma > eps2 {
            return Interval::EMPTY;
        }
    } else {
        let disc = beta * beta - alpha * (gamma - eps2);
        if disc < 0.0 {
            return Interval::EMPTY;
        }
        let root = disc.sqrt();
        lo = lo.max((-beta - root) / alpha);
        hi = hi.min((-beta + root) / alpha);
    }

    let dt = bt - at;
    if dt == 0.0 {
        if (at - qt).abs() > eps {
            return Interval::EMPTY;
        }
    } else {
        let u = (qt - eps - at) / dt;
        let v = (qt + eps - at) / dt;
        lo = lo.max(u.min(v));
        hi = hi.min(u.max(v));
    }
    if lo > hi {
        Interval::EMPTY
    } else {
        Interval { lo, hi }
    }
}

/// Reachable intervals of the free-space diagram at one `eps`.
struct Reach {
    /// `left[i][j]`: reachable part of the edge `a = i`, `b in [j, j+1]`.
    left: Vec<Vec<Interval>>,
    /// `bottom[i][j]`: reachable part of the edge `b = j`, `a in [i, i+1]`.
    bottom: Vec<Vec<Interval>>,
    feasible: bool,
}

fn reach(p: &Curve, q: &Curve, eps: f64) -> Reach {
    let n = p.segments();
    let m = q.segments();
    let mut left = vec![vec![Interval::EMPTY; m]; n + 1];
    let mut bottom = vec![vec![Interval::EMPTY; m + 1]; n];
    let start_ok = ground(&p.space[0], p.time[0], &q.space[0], q.time[0]) <= eps;
    let end_ok = ground(&p.space[n], p.time[n], &q.space[m], q.time[m]) <= eps;
    if !start_ok || !end_ok {
        return Reach { left, bottom, feasible: false };
    }
    // boundary a = 0
    let mut open = true;
    for j in 0..m {
        if !open {
            break;
        }
        let f = free_interval(q, j, &p.space[0], p.time[0], eps);
        if !f.is_empty() && f.lo <= 0.0 {
            left[0][j] = f;
            open = f.hi >= 1.0;
        } else {
            open = false;
        }
    }
    // boundary b = 0
    let mut open = true;
    for i in 0..n {
        if !open {
            break;
        }
        let f = free_interval(p, i, &q.space[0], q.time[0], eps);
        if !f.is_empty() && f.lo <= 0.0 {
            bottom[i][0] = f;
            open = f.hi >= 1.0;
        } else {
            open = false;
        }
    }
    for i in 0..n {
        for j in 0..m {
            let lr = left[i][j];
            let br = bottom[i][j];
            if lr.is_empty() && br.is_empty() {
                continue;
            }
            // right edge a = i + 1, b in [j, j + 1]
            let free = free_interval(q, j, &p.space[i + 1], p.time[i + 1], eps);
            if !free.is_empty() {
                left[i + 1][j] = if !br.is_empty() {
                    free
                } else {
                    let lo = free.lo.max(lr.lo);
                    if lo <= free.hi {
                        Interval { lo, hi: free.hi }
                    } else {
                        Interval::EMPTY
                    }
                };
            }
            // top edge b = j + 1, a in [i, i + 1]
            let free = free_interval(p, i, &q.space[j + 1], q.time[j + 1], eps);
            if !free.is_empty() {
                bottom[i][j + 1] = if !lr.is_empty() {
                    free
                } else {
                    let lo = free.lo.max(br.lo);
                    if lo <= free.hi {
                        Interval { lo, hi: free.hi }
                    } else {
                        Interval::EMPTY
                    }
                };
            }
        }
    }
    let feasible = if n == 0 && m == 0 {
        true
    } else if n == 0 {
        let l = left[0][m - 1];
        !l.is_empty() && l.hi >= 1.0
    } else if m == 0 {
        let b = bottom[n - 1][0];
        !b.is_empty() && b.hi >= 1.0
    } else {
        let l = left[n][m - 1];
        let b = bottom[n - 1][m];
        (!l.is_empty() && l.hi >= 1.0) || (!b.is_empty() && b.hi >= 1.0)
    };
    Reach { left, bottom, feasible }
}

/// Whether the Fréchet distance between `p` and `q` is at most `eps`.
pub fn decide(p: &Curve, q: &Curve, eps: f64) -> bool {
    reach(p, q, eps).feasible
}

/// Result of [`frechet`]: a certified interval for the distance and a
/// monotone matching realising the upper end.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Largest value shown infeasible, or an exact lower bound.
    pub lower: f64,
    /// Smallest value shown feasible.
    pub upper: f64,
    /// Vertices `(a, b)` of a monotone path in parameter space.
    pub path: Vec<(f64, f64)>,
}

/// Fréchet distance by bisection to absolute tolerance `tol`.
pub fn frechet(p: &Curve, q: &Curve, tol: f64) -> Matching {
    let n = p.segments();
    let m = q.segments();
    let lo0 = ground(&p.space[0], p.time[0], &q.space[0], q.time[0])
        .max(ground(&p.space[n], p.time[n], &q.space[m], q.time[m]));
    // the endpoint bound is often exact; allow for rounding in the free intervals
    let probe = lo0 * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
    if decide(p, q, probe) {
        let path = extract(p, q, probe);
        return Matching { lower: lo0, upper: probe.max(lo0), path };
    }
    let mut hi = lo0;
    for a in 0..=n {
        for b in 0..=m {
            hi = hi.max(ground(&p.space[a], p.time[a], &q.space[b], q.time[b]));
        }
    }
    hi = hi * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE;
    let mut lo = lo0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if decide(p, q, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let path = extract(p, q, hi);
    Matching { lower: lo, upper: hi, path }
}

/// Position of the current point on the top or right edge of a cell.
#[derive(Clone, Copy)]
enum Edge {
    /// `(i + x, j + 1)`.
    Top(f64),
    /// `(i + 1, j + y)`.
    Right(f64),
}

/// Walks backwards through the reachable intervals at a feasible `eps`.
/// Each step stays inside one cell, where the free space is convex, so the
/// straight piece between consecutive points is feasible.
fn extract(p: &Curve, q: &Curve, eps: f64) -> Vec<(f64, f64)> {
    let n = p.segments();
    let m = q.segments();
    let mut rev = vec![(n as f64, m as f64)];
    if n > 0 && m > 0 {
        let r = reach(p, q, eps);
        debug_assert!(r.feasible);
        let (mut i, mut j) = (n - 1, m - 1);
        let mut edge = Edge::Top(1.0);
        loop {
            let lr = r.left[i][j];
            let br = r.bottom[i][j];
            let (limit_x, limit_y) = match edge {
                Edge::Top(x) => (x, 1.0),
                Edge::Right(y) => (1.0, y),
            };
            let take_bottom = if !br.is_empty() && br.lo <= limit_x {
                true
            } else if !lr.is_empty() && lr.lo <= limit_y {
                false
            } else {
                // rounding left no strictly admissible predecessor; take the nearest
                !br.is_empty()
            };
            if take_bottom {
                let x = br.lo.min(limit_x);
                rev.push((i as f64 + x, j as f64));
                if j == 0 {
                    break;
                }
                j -= 1;
                edge = Edge::Top(x);
            } else {
                let y = lr.lo.min(limit_y);
                rev.push((i as f64, j as f64 + y));
                if i == 0 {
                    break;
                }
                i -= 1;
                edge = Edge::Right(y);
            }
        }
    }
    rev.push((0.0, 0.0));
    rev.reverse();
    rev.dedup();
    with_integer_points(rev)
}

/// Splits segments of a parameter path that run along a cell boundary across
/// several cells, so every piece lies in a single cell.
fn with_integer_points(path: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(path.len());
    for w in path.windows(2) {
        let (a0, b0) = w[0];
        let (a1, b1) = w[1];
        if out.last() != Some(&(a0, b0)) {
            out.push((a0, b0));
        }
        let mut cuts: Vec<f64> = Vec::new();
        let da = a1 - a0;
        let db = b1 - b0;
        let mut k = a0.floor() + 1.0;
        while k < a1 {
            cuts.push((k - a0) / da);
            k += 1.0;
        }
        let mut k = b0.floor() + 1.0;
        while k < b1 {
            cuts.push((k - b0) / db);
            k += 1.0;
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for c in cuts {
            let pt = (a0 + c * da, b0 + c * db);
            if out.last() != Some(&pt) {
                out.push(pt);
            }
        }
    }
    if let Some(&last) = path.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

/// Largest ground distance along a parameter path, exact because the ground
/// cost is convex along each straight piece inside a cell.
pub fn matching_cost(p: &Curve, q: &Curve, path: &[(f64, f64)]) -> f64 {
    path.iter()
        .map(|&(a, b)| {
            let (x1, t1) = p.point(a);
            let (x2, t2) = q.point(b);
            ground(&x1, t1, &x2, t2)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, f64)]) -> Curve {
        Curve::new(points.iter().map(|p| vec![p.0]).collect(), points.iter().map(|p| p.1).collect())
    }

    #[test]
    fn identical_curves_have_zero_distance() {
        let c = line(&[(0.0, 0.0), (0.0, 1.0), (2.0, 1.0), (2.0, 2.0)]);
        let m = frechet(&c, &c, 1e-9);
        assert_eq!(m.lower, 0.0);
        assert!(m.upper < 1e-300);
        assert!(matching_cost(&c, &c, &m.path) < 1e-12);
    }

    #[test]
    fn shifted_vertical_jump() {
        let p = line(&[(0.0, 0.0), (0.0, 0.99), (2.0, 0.99), (2.0, 2.0)]);
        let q = line(&[(0.0, 0.0), (0.0, 1.0), (2.0, 1.0), (2.0, 2.0)]);
        let m = frechet(&p, &q, 1e-10);
        assert!((m.upper - 0.01).abs() < 1e-9, "{m:?}");
        assert!((matching_cost(&p, &q, &m.path) - 0.01).abs() < 1e-9);
    }

    #[test]
    fn matching_path_is_monotone() {
        let p = line(&[(0.0, 0.0), (1.0, 0.3), (-1.0, 0.6), (0.5, 1.0)]);
        let q = line(&[(0.0, 0.0), (0.8, 0.5), (0.5, 1.0)]);
        let m = frechet(&p, &q, 1e-10);
        for w in m.path.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1, "{:?}", m.path);
        }
        assert_eq!(m.path[0], (0.0, 0.0));
        assert_eq!(*m.path.last().unwrap(), (3.0, 2.0));
        let cost = matching_cost(&p, &q, &m.path);
        assert!(cost <= m.upper + 1e-9 && cost >= m.lower - 1e-9);
    }
}
