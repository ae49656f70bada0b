//! Acceptance run: each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wm1::control::{
    convergence_experiment, cost_estimate, cone_to_orthant, transform_problem, verify_halfspace, AffineField,
    ConeSpec, CostCase, CostPolynomial, DiffusionField, Growth, MatrixTable, PowerTerm, ProblemSpec, StateSet,
};
use wm1::fixtures::{mean_reverting_problem, relaxation_problem, single_jump_limit, two_stage_jump};
use wm1::graphrep::{build_paramrep_tv, compose_check};
use wm1::metrics::{d_j1_bracket, d_p, d_w_bracket, DEFAULT_BUDGET};
use wm1::oscillation::{refinement_error_bound, w_w_global, GRID_POINTS};
use wm1::timestretch::stretch_pipeline;
use wm1::{CadlagPath, PadMode};

use common::{brute_force_oscillation_1d, random_continuous, random_monotone_path, random_path};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Closed-form representation of member `n` (`n = None` gives the limit).
fn closed_form(n: Option<f64>, t: f64) -> ([f64; 2], f64) {
    let a = match n {
        Some(n) => (1.0 - 1.0 / n) / 6.0,
        None => 1.0 / 6.0,
    };
    let b = match n {
        Some(_) => a + 0.5,
        None => 2.0 / 3.0,
    };
    if t < a {
        ([0.0, 0.0], 6.0 * t)
    } else if t < b {
        let w = 2.0 * t - 2.0 * a;
        ([2.0 * w, w], if n.is_some() { 6.0 * a } else { 1.0 })
    } else if t < 2.0 / 3.0 {
        ([2.0, 1.0], 6.0 * t - 3.0)
    } else if t < 5.0 / 6.0 {
        ([2.0, 1.0 + (6.0 * t - 4.0)], 1.0)
    } else {
        ([2.0, 2.0], 6.0 * t - 4.0)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let probes: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    let mut worst: f64 = 0.0;
    for n in [2u64, 10, 100] {
        let rep = build_paramrep_tv(&two_stage_jump(n));
        for &t in &probes {
            let (x, r) = closed_form(Some(n as f64), t);
            let (xh, rh) = rep.eval(t);
            worst = worst.max(max_abs_diff(&xh, &x)).max((rh - r).abs());
        }
    }
    let proxy = build_paramrep_tv(&two_stage_jump(10_000));
    let mut limit_gap: f64 = 0.0;
    for &t in &probes {
        let (x, r) = closed_form(None, t);
        let (xh, rh) = proxy.eval(t);
        limit_gap = limit_gap.max(max_abs_diff(&xh, &x)).max((rh - r).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && limit_gap <= 1e-3 && secs < 5.0,
        format!("closed-form error {worst:.2e} (n = 2, 10, 100), limit proxy gap {limit_gap:.2e}, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let dim = 1 + i % 4;
        let pad = if rng.random_bool(0.5) { PadMode::ZeroLeft } else { PadMode::HoldLeft };
        let horizon = rng.random_range(0.5..3.0);
        let pieces = rng.random_range(1..8);
        let x = random_path(&mut rng, dim, horizon, pad, pieces);
        let rep = build_paramrep_tv(&x);
        worst = worst.max(compose_check(&rep, &x, 1000).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-9 && secs < 30.0, format!("max |xhat(r(t)) - x(t)| = {worst:.2e} over 200 paths, {secs:.2} s"))
}

fn criterion_3() -> Outcome {
    let ns = [625u64, 1250, 2500, 5000, 10_000];
    let seq: Vec<CadlagPath> = ns.iter().map(|&n| two_stage_jump(n)).collect();
    let report = stretch_pipeline(&seq, &single_jump_limit(), 1000).unwrap();
    let lip_err = report.members.iter().map(|m| (m.time_lipschitz - 6.0).abs()).fold(0.0, f64::max);
    let gaps: Vec<f64> = report.cauchy.iter().map(|c| c.time_gap).collect();
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        lip_err <= 1e-9 && min_ratio >= 1.8 && report.deviation <= 1e-3,
        format!(
            "Lipschitz error {lip_err:.1e}, Cauchy gap ratios {:?}, deviation {:.2e}",
            ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            report.deviation
        ),
    )
}

fn criterion_4() -> Outcome {
    let x = single_jump_limit();
    let dp: Vec<f64> = [10u64, 100, 1000].iter().map(|&n| d_p(&two_stage_jump(n), &x).unwrap()).collect();
    let j1 = d_j1_bracket(&two_stage_jump(100), &x).unwrap();
    let decreasing = dp.windows(2).all(|w| w[1] < w[0]);
    outcome(
        dp[1] <= 0.02 && j1.lower >= 0.4 && decreasing,
        format!("d_p(n = 10, 100, 1000) = {dp:?}, J1 lower bound at n = 100 = {:.3}", j1.lower),
    )
}

fn down_up() -> CadlagPath {
    CadlagPath::step(3.0, PadMode::HoldLeft, vec![0.0, 1.0, 1.5], vec![vec![1.0], vec![0.0], vec![1.0]]).unwrap()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let deltas = [0.01, 0.1, 0.5, 2.0];
    let mut monotone_max: f64 = 0.0;
    for i in 0..100 {
        let dim = 1 + i % 3;
        let pad = if i % 2 == 0 { PadMode::ZeroLeft } else { PadMode::HoldLeft };
        let x = { let k = rng.random_range(1..6); random_monotone_path(&mut rng, dim, 2.0, pad, k) };
        for &d in &deltas {
            monotone_max = monotone_max.max(w_w_global(&x, d).unwrap());
        }
    }
    let value = w_w_global(&down_up(), 0.6).unwrap();
    let oracle = brute_force_oscillation_1d(&down_up(), 0.6, 2000);

    let mut sub_ok = true;
    let mut mono_ok = true;
    for _ in 0..100 {
        let x = { let k = rng.random_range(1..5); random_path(&mut rng, 1, 2.0, PadMode::HoldLeft, k) };
        let y = { let k = rng.random_range(1..5); random_path(&mut rng, 1, 2.0, PadMode::HoldLeft, k) };
        let xy = x.concat(&y).unwrap();
        let (d1, d2) = (rng.random_range(0.01..0.5), rng.random_range(0.5..1.0));
        let wx = w_w_global(&x, d1).unwrap();
        let wy = w_w_global(&y, d1).unwrap();
        // computed values undershoot by at most the refinement bound
        let slack = refinement_error_bound(&x, GRID_POINTS) + refinement_error_bound(&y, GRID_POINTS);
        sub_ok &= w_w_global(&xy, d1).unwrap() <= wx + wy + slack + 1e-12;
        mono_ok &= wx <= w_w_global(&x, d2).unwrap() + 1e-12;
    }
    outcome(
        monotone_max == 0.0 && (value - 1.0).abs() <= 1e-9 && (oracle - value).abs() <= 1e-9 && sub_ok && mono_ok,
        format!(
            "monotone max {monotone_max}, down-up {value} (grid oracle {oracle}), subadditive {sub_ok}, monotone in delta {mono_ok}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_order = f64::INFINITY;
    let mut worst_witness: f64 = 0.0;
    for i in 0..100 {
        let dim = 1 + i % 3;
        let pad = if rng.random_bool(0.5) { PadMode::ZeroLeft } else { PadMode::HoldLeft };
        let x = { let k = rng.random_range(1..5); random_path(&mut rng, dim, 2.0, pad, k) };
        let y = { let k = rng.random_range(1..5); random_path(&mut rng, dim, 2.0, pad, k) };
        let dp = d_p(&x, &y).unwrap();
        let b = d_w_bracket(&x, &y, DEFAULT_BUDGET).unwrap();
        worst_order = worst_order.min(b.upper - dp).min(b.upper - b.lower);
        worst_witness = worst_witness.max((b.witness_value().unwrap() - b.upper).abs());
    }
    outcome(
        worst_order >= -1e-9 && worst_witness <= 1e-9,
        format!("min(d_w upper - d_p, upper - lower) = {worst_order:.2e}, witness mismatch {worst_witness:.2e}"),
    )
}

fn fig2_generators() -> Vec<Vec<f64>> {
    vec![vec![-1.0, -1.0], vec![1.0 / 3.0, 1.0]]
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

/// Random two-dimensional problem with the cone spanned by two fixed generators.
fn random_problem(rng: &mut impl Rng, noisy: bool) -> ProblemSpec {
    let d = 2;
    let sigma = if noisy { random_matrix(rng, d, 2, 0.3) } else { vec![vec![0.0; 2]; 2] };
    ProblemSpec {
        d,
        d1: 2,
        d2: 2,
        horizon: 1.0,
        initial_state: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        drift: AffineField {
            out: random_matrix(rng, d, 3, 1.0),
            offset: (0..3).map(|_| rng.random_range(-0.5..0.5)).collect(),
            linear: random_matrix(rng, 3, d, 1.0),
            clip: Some(1.5),
        },
        diffusion: DiffusionField {
            out: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            base: sigma,
            slopes: if noisy { vec![random_matrix(rng, 2, 2, 0.1), random_matrix(rng, 2, 2, 0.1)] } else { Vec::new() },
            clip: Some(1.0),
        },
        k: MatrixTable { times: vec![0.0, 1.0], values: vec![random_matrix(rng, d, 2, 1.0), random_matrix(rng, d, 2, 1.0)] },
        h: MatrixTable { times: vec![0.0, 0.5, 1.0], values: (0..3).map(|_| random_matrix(rng, 1, 2, 1.0)).collect() },
        f: CostPolynomial {
            terms: vec![PowerTerm { coef: 0.7, linear: random_matrix(rng, 2, d, 1.0), shift: vec![0.1, -0.2], power: 2.0 }],
            weight: vec![0.3, -0.4],
            constant: 0.5,
        },
        g: CostPolynomial {
            terms: vec![PowerTerm { coef: 1.1, linear: random_matrix(rng, 1, d, 1.0), shift: vec![0.3], power: 1.5 }],
            weight: vec![-0.2, 0.1],
            constant: 0.0,
        },
        state_set: StateSet::default(),
        case: CostCase::A,
        growth: Growth { p: 2.0, p_bar: 3.0, c_f: 1.0, c_g: 1.0, c_g_bar: 1.0, c_h: 0.0, c_k: 0.0 },
        control_cone: ConeSpec::new(fig2_generators()).unwrap(),
        state_cone: None,
    }
}

fn conic(rng: &mut impl Rng, generators: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let a = rng.random_range(0.0..scale);
    let b = rng.random_range(0.0..scale);
    (0..2).map(|i| a * generators[0][i] + b * generators[1][i]).collect()
}

/// Control with jumps and slopes that are random conic combinations of the generators.
fn random_cone_control(rng: &mut impl Rng, generators: &[Vec<f64>]) -> CadlagPath {
    let times = vec![0.0, 0.237, 0.5, 0.81];
    let mut level = vec![0.0, 0.0];
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for k in 0..times.len() {
        let jump = conic(rng, generators, 1.0);
        for i in 0..2 {
            level[i] += jump[i];
        }
        let slope = if k % 2 == 0 { conic(rng, generators, 0.5) } else { vec![0.0, 0.0] };
        values.push(level.clone());
        let end = if k + 1 < times.len() { times[k + 1] } else { 1.0 };
        for i in 0..2 {
            level[i] += slope[i] * (end - times[k]);
        }
        slopes.push(slope);
    }
    CadlagPath::new(1.0, PadMode::ZeroLeft, times, values, slopes).unwrap()
}

fn criterion_7() -> Outcome {
    let gens = fig2_generators();
    let s1 = cone_to_orthant(&gens).unwrap();
    let mut map_err: f64 = 0.0;
    for (i, g) in gens.iter().enumerate() {
        let img = &s1 * DVector::from_column_slice(g);
        for k in 0..2 {
            map_err = map_err.max((img[k] - if k == i { 1.0 } else { 0.0 }).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut det_err: f64 = 0.0;
    for _ in 0..10 {
        let spec = random_problem(&mut rng, false);
        let u = random_cone_control(&mut rng, &gens);
        let s2 = DMatrix::from_fn(2, 2, |i, j| rng.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
        let primed = transform_problem(&spec, &s1, &s2).unwrap();
        let u_primed = u.map_linear(&s1).unwrap();
        let j0 = cost_estimate(&spec, &u, 1, 0.01, 1).unwrap().mean;
        let j1 = cost_estimate(&primed, &u_primed, 1, 0.01, 1).unwrap().mean;
        det_err = det_err.max((j0 - j1).abs());
    }
    let mut stoch_z: f64 = 0.0;
    for _ in 0..3 {
        let spec = random_problem(&mut rng, true);
        let u = random_cone_control(&mut rng, &gens);
        let s2 = DMatrix::from_fn(2, 2, |i, j| rng.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
        let primed = transform_problem(&spec, &s1, &s2).unwrap();
        let a = cost_estimate(&spec, &u, 2000, 0.01, 11).unwrap();
        let b = cost_estimate(&primed, &u.map_linear(&s1).unwrap(), 2000, 0.01, 11).unwrap();
        let se = a.std_error.max(b.std_error);
        stoch_z = stoch_z.max((a.mean - b.mean).abs() / se);
    }

    let (u1, a0) = verify_halfspace(&gens).unwrap();
    let mut cert_min = f64::INFINITY;
    for _ in 0..10_000 {
        let (a, b) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let v: Vec<f64> = (0..2).map(|i| a * gens[0][i] + b * gens[1][i]).collect();
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        cert_min = cert_min.min(u1[0] * v[0] + u1[1] * v[1] - a0 * norm);
    }
    outcome(
        map_err <= 1e-12 && det_err <= 1e-9 && stoch_z <= 3.0 && cert_min >= -1e-9,
        format!(
            "S1 g_i - e_i = {map_err:.1e}, deterministic cost gap {det_err:.1e}, stochastic gap {stoch_z:.2e} standard errors, certificate slack {cert_min:.2e} (a0 = {a0:.4})"
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let spec = mean_reverting_problem();
    let zero = CadlagPath::constant(1.0, PadMode::ZeroLeft, vec![0.0]).unwrap();
    let dt = 1e-3;
    let res = cost_estimate(&spec, &zero, 100_000, dt, 8).unwrap();
    let mean_exact = (-1.0f64).exp();
    let second_exact = 0.5 + (1.0 - (-2.0f64).exp()) / 4.0;
    // first-order Euler bias allowance: one unit of dt
    let mean_ok = (res.terminal_mean[0] - mean_exact).abs() <= 3.0 * res.terminal_std_error[0] + dt;
    let cost_ok = (res.mean - second_exact).abs() <= 3.0 * res.std_error + dt;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mean_ok && cost_ok && secs < 60.0,
        format!(
            "E X(1) = {:.5} +- {:.1e} (exact {mean_exact:.5}), int E X^2 = {:.5} +- {:.1e} (exact {second_exact:.5}), {secs:.1} s",
            res.terminal_mean[0], res.terminal_std_error[0], res.mean, res.std_error
        ),
    )
}

fn criterion_9() -> Outcome {
    let spec = relaxation_problem();
    let controls = [two_stage_jump(10), two_stage_jump(100)];
    let rep = convergence_experiment(&spec, &controls, &[10, 100], &single_jump_limit(), 4000, 0.01, 9).unwrap();
    let (g10, g100) = (rep.rows[0].gap, rep.rows[1].gap);
    outcome(
        g100 <= g10 && g100 <= 0.05 && rep.moment_control_ratio <= 1.01,
        format!(
            "gap(10) = {g10:.4}, gap(100) = {g100:.4}, moment ratio {:.4}, sup E|X|^p* = {:.3}",
            rep.moment_control_ratio, rep.sup_moment_state
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = single_jump_limit();
    let ns = [10u64, 100, 1000];
    let base: Vec<f64> = ns.iter().map(|&n| d_p(&two_stage_jump(n), &x).unwrap()).collect();
    let mut worst_ratio: f64 = 0.0;
    let mut all_decreasing = true;
    for _ in 0..20 {
        let y = random_continuous(&mut rng, 2, 2.0, PadMode::ZeroLeft, 5, 0.5);
        let z = random_continuous(&mut rng, 2, 2.0, PadMode::ZeroLeft, 4, 0.5);
        let target = x.add(&y).unwrap();
        let values: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let yn = y.add(&z.scale(1.0 / n as f64)).unwrap();
                d_p(&two_stage_jump(n).add(&yn).unwrap(), &target).unwrap()
            })
            .collect();
        all_decreasing &= values.windows(2).all(|w| w[1] < w[0]);
        worst_ratio = worst_ratio.max(values[2] / base[2]);
    }
    outcome(
        worst_ratio <= 2.0 && all_decreasing,
        format!("max final d_p(x_n + y_n, x + y) / d_p(x_n, x) = {worst_ratio:.3}, decreasing along n: {all_decreasing}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-jump example: closed-form representations", criterion_1),
        ("composition identity on random paths", criterion_2),
        ("stretched-path pipeline on the doubling sequence", criterion_3),
        ("metric separation: product metric against J1", criterion_4),
        ("oscillation laws", criterion_5),
        ("product metric below the weak-metric bracket", criterion_6),
        ("cone reduction and cost invariance", criterion_7),
        ("Euler simulation against the mean-reverting oracle", criterion_8),
        ("cost convergence along the example controls", criterion_9),
        ("sums with continuous perturbations", criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let status = if out.passed { "PASS" } else { "FAIL" };
        if !out.passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {status} {name}: {} [{:.2} s]",
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
