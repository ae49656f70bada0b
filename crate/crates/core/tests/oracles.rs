//! Comparisons against independent brute-force computations.

mod common;

use common::{brute_force_oscillation_1d, random_path};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wm1::control::{cost_estimate, DiffusionField};
use wm1::fixtures::mean_reverting_problem;
use wm1::metrics::d_m1_1d;
use wm1::oscillation::w_w_global;
use wm1::{CadlagPath, PadMode};

/// Vertices of the completed graph of a 1-d path on `[0, T]`, traversed in
/// time order with jumps as vertical segments.
fn completed_graph(x: &CadlagPath) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for (k, &t) in x.times().iter().enumerate() {
        if k > 0 {
            pts.push((x.left_limit(t).unwrap()[0], t));
        }
        pts.push((x.evaluate(t).unwrap()[0], t));
    }
    pts.push((x.evaluate(x.horizon()).unwrap()[0], x.horizon()));
    pts
}

/// Samples a polyline so that consecutive points are at most `step` apart in
/// the max ground metric.
fn densify(poly: &[(f64, f64)], step: f64) -> Vec<(f64, f64)> {
    let mut out = vec![poly[0]];
    for w in poly.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = (b.0 - a.0).abs().max((b.1 - a.1).abs());
        let pieces = (len / step).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            let f = i as f64 / pieces as f64;
            out.push((a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1)));
        }
    }
    out
}

/// Discrete Fréchet distance by the coupling recursion.
fn discrete_frechet(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let d = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs().max((a.1 - b.1).abs());
    let mut prev = vec![0.0f64; q.len()];
    let mut cur = vec![0.0f64; q.len()];
    for i in 0..p.len() {
        for j in 0..q.len() {
            let c = d(p[i], q[j]);
            cur[j] = match (i, j) {
                (0, 0) => c,
                (0, _) => cur[j - 1].max(c),
                (_, 0) => prev[0].max(c),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(c),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len() - 1]
}

#[test]
fn m1_distance_matches_discrete_frechet_of_completed_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let step = 2e-3;
    for _ in 0..12 {
        let k1 = rng.random_range(2..6);
        let x = random_path(&mut rng, 1, 1.0, PadMode::HoldLeft, k1);
        let k2 = rng.random_range(2..6);
        let y = random_path(&mut rng, 1, 1.0, PadMode::HoldLeft, k2);
        let exact = d_m1_1d(&x, &y).unwrap();
        let discrete = discrete_frechet(&densify(&completed_graph(&x), step), &densify(&completed_graph(&y), step));
        // dense sampling overestimates by at most one sampling step
        assert!(exact <= discrete + 1e-9, "exact {exact} above discrete {discrete}");
        assert!(discrete <= exact + step + 1e-9, "discrete {discrete} exceeds exact {exact} by more than {step}");
    }
}

fn random_step(rng: &mut ChaCha8Rng, pieces: usize) -> CadlagPath {
    let mut times: Vec<f64> = vec![0.0];
    // grid-aligned breakpoints so the brute-force grid sees every jump exactly
    while times.len() < pieces {
        let t = rng.random_range(1..200) as f64 / 200.0;
        if !times.contains(&t) {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let values = times.iter().map(|_| vec![rng.random_range(-2..=2) as f64 * 0.5]).collect();
    CadlagPath::step(1.0, PadMode::ZeroLeft, times, values).unwrap()
}

#[test]
fn oscillation_of_step_paths_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // grid spacing 1/200 on [-1, 2] with 601 points
    for _ in 0..15 {
        let pieces = rng.random_range(2..8);
        let x = random_step(&mut rng, pieces);
        for delta in [0.01, 0.05, 0.1, 0.3] {
            let fast = w_w_global(&x, delta).unwrap();
            let brute = brute_force_oscillation_1d(&x, delta, 601);
            assert!((fast - brute).abs() <= 1e-12, "delta {delta}: {fast} vs {brute} for {x:?}");
        }
    }
}

#[test]
fn euler_bias_halves_with_the_step() {
    // without noise the scheme is deterministic, so the bias is visible exactly
    let mut spec = mean_reverting_problem();
    spec.diffusion = DiffusionField::constant(vec![vec![0.0]]);
    let u = CadlagPath::constant(1.0, PadMode::HoldLeft, vec![0.0]).unwrap();
    let exact_terminal = (-1.0f64).exp();
    let exact_cost = (1.0 - (-2.0f64).exp()) / 2.0;
    let errors: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let r = cost_estimate(&spec, &u, 2, dt, 0).unwrap();
            ((r.terminal_mean[0] - exact_terminal).abs(), (r.mean - exact_cost).abs())
        })
        .collect();
    for w in errors.windows(2) {
        let terminal_ratio = w[0].0 / w[1].0;
        let cost_ratio = w[0].1 / w[1].1;
        assert!((1.8..2.2).contains(&terminal_ratio), "terminal ratio {terminal_ratio}");
        assert!((1.8..2.2).contains(&cost_ratio), "cost ratio {cost_ratio}");
    }
}
