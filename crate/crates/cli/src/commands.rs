//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wm1::control::{
    convergence_experiment, cost_estimate_keep, increments_in_cone, ExperimentReport, IncrementReport, ADMISSIBILITY_TOL,
};
use wm1::fixtures::{limit_representation, single_jump_limit, two_stage_jump};
use wm1::graphrep::{build_paramrep_tv, compose_check, is_paramrep};
use wm1::metrics::{check_convergence, d_j1_bracket, d_p_bracket, d_w_bracket, ConvergenceReport};
use wm1::oscillation::{compactness_report, tightness_report, Ensemble, TightnessReport};
use wm1::timestretch::{stretch_pipeline, StretchBundle};
use wm1::{CadlagPath, DistanceBracket, ParamRep};

use crate::io::{emit, parse_f64_list, parse_u64_list, read_path, read_problem, to_json, write_file, ParseError};
use crate::{Command, Format, Output};

/// Norm levels of the tightness table.
const NORM_LEVELS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 8.0];

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Distance { first, second, budget, output } => distance(&first, &second, budget, &output),
        Command::Paramrep { path, probes, output } => paramrep(&path, probes, &output),
        Command::Oscillation { paths, delta_grid, epsilon, output } => oscillation(&paths, &delta_grid, epsilon, &output),
        Command::Stretch { control, direction, output } => stretch(&control, direction.as_deref(), &output),
        Command::DemoExample { n_range, budget, out } => demo_example(&n_range, budget, &out),
        Command::Simulate { problem, control, dt, paths, seed, keep, output } => {
            simulate(&problem, &control, dt, paths, seed, keep, &output)
        }
        Command::Experiment { problem, controls, dt, paths, seed, delta_grid, epsilon, output } => {
            experiment(&problem, &controls, dt, paths, seed, &delta_grid, epsilon, &output)
        }
    }
}

#[derive(Serialize)]
struct DistanceReport {
    d_uniform: f64,
    d_p: f64,
    d_p_lower: f64,
    d_w: DistanceBracket,
    d_j1: DistanceBracket,
}

fn distance(first: &Path, second: &Path, budget: usize, output: &Output) -> Result<()> {
    let x = read_path(first)?;
    let y = read_path(second)?;
    let d_uniform = x.uniform_distance(&y)?;
    let (d_p_lower, d_p) = d_p_bracket(&x, &y)?;
    let d_w = d_w_bracket(&x, &y, budget)?;
    let d_j1 = d_j1_bracket(&x, &y)?;
    let report = DistanceReport { d_uniform, d_p, d_p_lower, d_w, d_j1 };
    let text = match output.format {
        Format::Json => to_json(&report),
        Format::Csv => format!(
            "# schema: wm1-distance v1\nd_uniform,d_p,d_w_lower,d_w_upper,d_j1_lower,d_j1_upper\n{},{},{},{},{},{}\n",
            report.d_uniform, report.d_p, report.d_w.lower, report.d_w.upper, report.d_j1.lower, report.d_j1.upper
        ),
    };
    emit(output.out.as_deref(), &text)
}

fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let m = points.max(2);
    (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect()
}

fn rep_trace(rep: &ParamRep, probes: usize) -> String {
    let mut s = String::from("# schema: wm1-paramrep v1\ns,rhat");
    for c in 0..rep.dim() {
        s.push_str(&format!(",xhat_{}", c + 1));
    }
    s.push('\n');
    for t in uniform_grid(0.0, 1.0, probes) {
        let (x, r) = rep.eval(t);
        s.push_str(&format!("{t},{r}"));
        for v in x {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

fn paramrep(path: &Path, probes: usize, output: &Output) -> Result<()> {
    let x = read_path(path)?;
    let rep = build_paramrep_tv(&x);
    let report = is_paramrep(&rep, &x);
    if !report.valid {
        bail!(wm1::Error::Contract(format!("representation check failed: {:?}", report.violations)));
    }
    let err = compose_check(&rep, &x, probes)?;
    if err > 1e-9 {
        bail!(wm1::Error::Contract(format!("composition error {err:e} exceeds 1e-9")));
    }
    let text = match output.format {
        Format::Json => to_json(&rep),
        Format::Csv => rep_trace(&rep, probes),
    };
    emit(output.out.as_deref(), &text)
}

fn oscillation(paths: &[PathBuf], delta_grid: &str, epsilon: f64, output: &Output) -> Result<()> {
    let deltas = parse_f64_list(delta_grid, "--delta-grid")?;
    let family: Vec<CadlagPath> = paths.iter().map(|p| read_path(p)).collect::<Result<_>>()?;
    let report = compactness_report(&family, &deltas, epsilon)?;
    let text = match output.format {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    };
    emit(output.out.as_deref(), &text)
}

fn stretch(control: &Path, direction: Option<&str>, output: &Output) -> Result<()> {
    let u = read_path(control)?;
    let dir = match direction {
        Some(text) => parse_f64_list(text, "--direction")?,
        None => vec![1.0; u.dim()],
    };
    let bundle = StretchBundle::build(&u, &dir)?;
    let text = match output.format {
        Format::Json => to_json(&bundle),
        Format::Csv => {
            let mut s = String::from("# schema: wm1-stretch v1\nt,tau_hat");
            for c in 0..u.dim() {
                s.push_str(&format!(",u_{}", c + 1));
            }
            s.push('\n');
            for t in uniform_grid(0.0, bundle.inverse_clock.horizon(), 1001) {
                s.push_str(&format!("{t},{}", bundle.inverse_clock.evaluate(t)?[0]));
                for v in bundle.stretched.evaluate(t)? {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
            s
        }
    };
    emit(output.out.as_deref(), &text)
}

fn demo_example(n_range: &str, budget: usize, out: &Path) -> Result<()> {
    let ns = parse_u64_list(n_range, "--n-range")?;
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return Err(ParseError("--n-range needs indices of at least 2".into()).into());
    }
    let paths_dir = out.join("paths");
    fs::create_dir_all(&paths_dir).with_context(|| format!("cannot create {}", paths_dir.display()))?;
    let x = single_jump_limit();
    write_file(&paths_dir, "x.json", &to_json(&x))?;
    let members: Vec<CadlagPath> = ns.iter().map(|&n| two_stage_jump(n)).collect();
    for (n, xn) in ns.iter().zip(&members) {
        write_file(&paths_dir, &format!("x_n{n}.json"), &to_json(xn))?;
    }
    let reps: Vec<ParamRep> = members.iter().map(build_paramrep_tv).collect();
    let limit = limit_representation();
    write_file(&paths_dir, "limit_rep.json", &to_json(&limit))?;

    // traces on a grid containing every twelfth, where the closed forms change
    let mut traces = String::from("# schema: wm1-paramrep-traces v1\ns");
    for n in &ns {
        traces.push_str(&format!(",rhat_n{n},xhat1_n{n},xhat2_n{n}"));
    }
    traces.push_str(",rhat_limit,xhat1_limit,xhat2_limit\n");
    for s in uniform_grid(0.0, 1.0, 1201) {
        traces.push_str(&format!("{s}"));
        for rep in reps.iter().chain(std::iter::once(&limit)) {
            let (xh, r) = rep.eval(s);
            traces.push_str(&format!(",{r},{},{}", xh[0], xh[1]));
        }
        traces.push('\n');
    }
    write_file(out, "paramrep_traces.csv", &traces)?;

    let mut table = String::from("# schema: wm1-convergence v1\nn,d_p,d_w_upper,rhat_gap,xhat_gap\n");
    for ((n, xn), rep) in ns.iter().zip(&members).zip(&reps) {
        let (_, dp) = d_p_bracket(xn, &x)?;
        let dw = d_w_bracket(xn, &x, budget)?;
        let (space_gap, time_gap) = rep.sup_gaps(&limit)?;
        table.push_str(&format!("{n},{dp},{},{time_gap},{space_gap}\n", dw.upper));
    }
    write_file(out, "convergence.csv", &table)?;

    let pipeline = stretch_pipeline(&members, &x, 1000)?;
    write_file(out, "pipeline.json", &to_json(&pipeline))?;
    write_file(out, "pipeline.csv", &pipeline.to_csv(&ns))?;
    Ok(())
}

fn simulate(
    problem: &Path,
    control: &Path,
    dt: f64,
    paths: usize,
    seed: u64,
    keep: usize,
    output: &Output,
) -> Result<()> {
    let spec = read_problem(problem)?;
    let u = read_path(control)?;
    let res = cost_estimate_keep(&spec, &u, paths, dt, seed, keep)
        .with_context(|| format!("simulating control {}", control.display()))?;
    let text = match output.format {
        Format::Json => to_json(&res),
        Format::Csv => format!(
            "# schema: wm1-simulate v1\nn_paths,dt,seed,J,stderr,control_cost,p_star,moment_control,moment_state,exits\n{},{},{},{},{},{},{},{},{},{}\n",
            res.n_paths,
            res.dt,
            res.seed,
            res.mean,
            res.std_error,
            res.control_cost,
            res.p_star,
            res.moment_control,
            res.moment_state,
            res.exit_count
        ),
    };
    emit(output.out.as_deref(), &text)
}

/// Numeric label from the digits of a file stem (`n100.json` -> 100).
fn label_of(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn control_files(dir: &Path) -> Result<(PathBuf, Vec<(u64, PathBuf)>)> {
    let limit = dir.join("limit.json");
    if !limit.is_file() {
        return Err(ParseError(format!("{} has no limit.json", dir.display())).into());
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") || path == limit {
            continue;
        }
        let label = label_of(&path)
            .ok_or_else(|| ParseError(format!("control file {} has no numeric label", path.display())))?;
        files.push((label, path));
    }
    if files.is_empty() {
        return Err(ParseError(format!("{} holds no controls besides limit.json", dir.display())).into());
    }
    files.sort();
    Ok((limit, files))
}

#[derive(Serialize)]
struct AdmissibilityEntry {
    file: String,
    report: IncrementReport,
}

#[derive(Serialize)]
struct FullExperiment {
    admissibility: Vec<AdmissibilityEntry>,
    experiment: ExperimentReport,
    tightness: TightnessReport,
    convergence: ConvergenceReport,
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    problem: &Path,
    dir: &Path,
    dt: f64,
    paths: usize,
    seed: u64,
    delta_grid: &str,
    epsilon: f64,
    output: &Output,
) -> Result<()> {
    let deltas = parse_f64_list(delta_grid, "--delta-grid")?;
    let spec = read_problem(problem)?;
    let (limit_file, files) = control_files(dir)?;
    let limit = read_path(&limit_file)?;
    let mut controls = Vec::with_capacity(files.len());
    let mut labels = Vec::with_capacity(files.len());
    let mut admissibility = Vec::new();
    for (label, file) in files.iter().map(|(l, f)| (*l, f)).chain(std::iter::once((u64::MAX, &limit_file))) {
        let u = if file == &limit_file { limit.clone() } else { read_path(file)? };
        let report = increments_in_cone(&u, &spec.control_cone, ADMISSIBILITY_TOL)?;
        if let Some(v) = report.violations.first() {
            eprintln!(
                "inadmissible {} increment {:?} at t = {} in {} (residual {:.3e})",
                v.kind,
                v.increment,
                v.time,
                file.display(),
                v.residual
            );
        }
        admissibility.push(AdmissibilityEntry { file: file.display().to_string(), report: report.clone() });
        report.into_result().with_context(|| format!("control {} is not admissible", file.display()))?;
        if file != &limit_file {
            controls.push(u);
            labels.push(label);
        }
    }
    let experiment = convergence_experiment(&spec, &controls, &labels, &limit, paths, dt, seed)?;
    let ensembles: Vec<Ensemble> =
        controls.iter().zip(&labels).map(|(u, &n)| Ensemble::uniform(n, vec![u.clone()])).collect();
    let tightness = tightness_report(&ensembles, &NORM_LEVELS, epsilon, &deltas)?;
    let convergence = check_convergence(&controls, &limit, &deltas, epsilon)?;
    let full = FullExperiment { admissibility, experiment, tightness, convergence };
    match output.out.as_deref() {
        Some(out) => {
            fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
            write_file(out, "experiment.json", &to_json(&full))?;
            write_file(out, "experiment.csv", &full.experiment.to_csv())?;
            write_file(out, "tightness.csv", &full.tightness.to_csv())?;
            Ok(())
        }
        None => {
            let text = match output.format {
                Format::Json => to_json(&full),
                Format::Csv => full.experiment.to_csv(),
            };
            emit(None, &text)
        }
    }
}
