//! Time stretching at path level.
//!
//! A control `U` defines the clock `tau(s) = s + U(s) . u1`. Its left inverse
//! `tau_hat` is continuous and flat across the jumps of `tau`, so the stretched
//! control `U o tau_hat` is Lipschitz whenever `U` is continuous. The pipeline
//! at the bottom of the module follows total-variation representations along
//! a convergent sequence and maps their limit back to the original time scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cadlag::{CadlagPath, PadMode};
use crate::error::{Error, Result};
use crate::graphrep::{build_paramrep_tv, ParamRep};
use crate::{dist2, TIME_TOL};

/// `tau(s) = s + U(s) . u1` as a one-dimensional path with `U`'s pad mode.
pub fn stretch_clock(u: &CadlagPath, u1: &[f64]) -> Result<CadlagPath> {
    if u1.len() != u.dim() {
        return Err(Error::Shape(format!(
            "direction of length {} for a {}-d control",
            u1.len(),
            u.dim()
        )));
    }
    let dot = |v: &[f64]| v.iter().zip(u1).map(|(a, b)| a * b).sum::<f64>();
    let times = u.times().to_vec();
    let values = u.breakpoints().map(|bp| vec![bp.time + dot(bp.right)]).collect();
    let slopes = u.breakpoints().map(|bp| vec![1.0 + dot(bp.slope)]).collect();
    CadlagPath::new(u.horizon(), u.pad(), times, values, slopes)
}

/// `tau_hat(t) = inf{s >= 0 : tau(s) > t} ^ cap` on `[0, tau(T)]`, as a
/// continuous one-dimensional path. `cap` defaults to the horizon of `tau`,
/// which keeps `tau_hat` continuous at its right end.
pub fn left_inverse_clock(tau: &CadlagPath, cap: Option<f64>) -> Result<CadlagPath> {
    if tau.dim() != 1 {
        return Err(Error::Shape("a clock is one-dimensional".into()));
    }
    let horizon = tau.horizon();
    let cap = cap.unwrap_or(horizon);
    if !(cap > 0.0) {
        return Err(Error::Domain(format!("cap must be positive, got {cap}")));
    }
    let start = tau.initial_value()[0];
    if start < 0.0 {
        return Err(Error::Contract(format!("clock starts below zero at {start}")));
    }
    // knots (t, s) of tau_hat
    let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    if start > 0.0 {
        knots.push((start, 0.0));
    }
    let n = tau.len();
    for k in 0..n {
        let bp = tau.breakpoint(k);
        if bp.slope[0] <= 0.0 && bp.time < horizon {
            return Err(Error::Contract(format!(
                "clock slope {} at s = {} is not positive",
                bp.slope[0], bp.time
            )));
        }
        if k > 0 {
            let jump = bp.right[0] - bp.left[0];
            if jump < -TIME_TOL {
                return Err(Error::Contract(format!("clock decreases by {} at s = {}", -jump, bp.time)));
            }
            if jump > 0.0 {
                knots.push((bp.right[0], bp.time));
            }
        }
        let end = if k + 1 < n { tau.times()[k + 1] } else { horizon };
        if end > bp.time {
            knots.push((tau.segment_value(k, end)[0], end));
        }
    }
    let mut times = Vec::with_capacity(knots.len());
    let mut values = Vec::with_capacity(knots.len());
    for (t, s) in knots {
        match times.last() {
            Some(&last) if t - last <= TIME_TOL => {
                *values.last_mut().unwrap() = vec![s];
            }
            _ => {
                times.push(t);
                values.push(vec![s]);
            }
        }
    }
    if times.len() < 2 {
        return Err(Error::Contract("clock has an empty range".into()));
    }
    // apply the cap, inserting the crossing knot
    let mut ct = Vec::with_capacity(times.len() + 1);
    let mut cv: Vec<Vec<f64>> = Vec::with_capacity(times.len() + 1);
    for i in 0..times.len() {
        let s = values[i][0];
        if i > 0 {
            let s0 = values[i - 1][0];
            if s0 < cap && s > cap {
                let w = (cap - s0) / (s - s0);
                ct.push(times[i - 1] + w * (times[i] - times[i - 1]));
                cv.push(vec![cap]);
            }
        }
        ct.push(times[i]);
        cv.push(vec![s.min(cap)]);
    }
    let mut t2: Vec<f64> = Vec::with_capacity(ct.len());
    let mut v2: Vec<Vec<f64>> = Vec::with_capacity(ct.len());
    for (t, v) in ct.into_iter().zip(cv) {
        if t2.last().is_some_and(|&last| t - last <= TIME_TOL) {
            continue;
        }
        t2.push(t);
        v2.push(v);
    }
    CadlagPath::from_knots(PadMode::ZeroLeft, t2, v2)
}

/// `x o tau_hat` on `[0, horizon of tau_hat]`, keeping `x`'s pad mode. Jumps
/// of `x` survive as jumps at the first time `tau_hat` reaches them.
pub fn stretch_path(x: &CadlagPath, tau_hat: &CadlagPath) -> Result<CadlagPath> {
    if tau_hat.dim() != 1 {
        return Err(Error::Shape("the inverse clock is one-dimensional".into()));
    }
    let knots_t = tau_hat.times();
    let h = tau_hat.horizon();
    // candidate breakpoints: knots of tau_hat and hitting times of x's breakpoints
    let mut cuts: Vec<f64> = knots_t.to_vec();
    for &b in &x.times()[1..] {
        if let Some(t) = hitting_time(tau_hat, b) {
            cuts.push(t);
        }
    }
    cuts.push(h);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| *a - *b <= TIME_TOL);
    if cuts.last().is_some_and(|&t| t > h) {
        cuts.pop();
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut slopes = Vec::new();
    for w in 0..cuts.len() {
        let t0 = cuts[w];
        if t0 >= h && w > 0 {
            break;
        }
        let t1 = cuts.get(w + 1).copied().unwrap_or(h);
        let mid = if t1 > t0 { 0.5 * (t0 + t1) } else { t0 };
        let kt = tau_hat.segment_at(mid);
        let clock_slope = tau_hat.slope_at_segment(kt)[0];
        let s_mid = tau_hat.segment_value(kt, mid)[0];
        let s0 = tau_hat.segment_value(kt, t0)[0];
        let kx = x.segment_at(s_mid.min(x.horizon()));
        let at_end = s_mid >= x.horizon();
        let value = if at_end { x.terminal_value() } else { x.segment_value(kx, s0) };
        let slope = if at_end || t1 <= t0 {
            vec![0.0; x.dim()]
        } else {
            x.slope_at_segment(kx).iter().map(|v| v * clock_slope).collect()
        };
        times.push(t0);
        values.push(value);
        slopes.push(slope);
    }
    CadlagPath::new(h, x.pad(), times, values, slopes)
}

/// First `t` with `tau_hat(t) >= s`, if any.
fn hitting_time(tau_hat: &CadlagPath, s: f64) -> Option<f64> {
    let times = tau_hat.times();
    for k in 0..times.len() {
        let v0 = tau_hat.breakpoint(k).right[0];
        if v0 >= s {
            return Some(times[k]);
        }
        let end = if k + 1 < times.len() { times[k + 1] } else { tau_hat.horizon() };
        let v1 = tau_hat.segment_value(k, end)[0];
        if v1 >= s {
            let slope = tau_hat.slope_at_segment(k)[0];
            return Some(times[k] + (s - v0) / slope);
        }
    }
    None
}

/// A control with its clock, inverse clock and stretched version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchBundle {
    pub original: CadlagPath,
    pub clock: CadlagPath,
    pub inverse_clock: CadlagPath,
    pub stretched: CadlagPath,
    pub direction: Vec<f64>,
}

impl StretchBundle {
    pub fn build(u: &CadlagPath, u1: &[f64]) -> Result<Self> {
        let clock = stretch_clock(u, u1)?;
        let inverse_clock = left_inverse_clock(&clock, None)?;
        let stretched = stretch_path(u, &inverse_clock)?;
        Ok(Self { original: u.clone(), clock, inverse_clock, stretched, direction: u1.to_vec() })
    }

    /// Largest `|stretched(tau(t)) - original(t)|` over the breakpoints of the
    /// original and a uniform grid of `probes` points.
    pub fn roundtrip_error(&self, probes: usize) -> f64 {
        let h = self.original.horizon();
        let mut ts: Vec<f64> = self.original.times().to_vec();
        let m = probes.max(2);
        ts.extend((0..m).map(|i| h * i as f64 / (m - 1) as f64));
        ts.into_iter()
            .map(|t| {
                let tau = self.clock.value_unchecked(t)[0];
                dist2(&self.stretched.value_unchecked(tau), &self.original.value_unchecked(t))
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDiagnostics {
    pub index: usize,
    pub variation: f64,
    pub time_lipschitz: f64,
    pub space_lipschitz: f64,
    /// `sup |rhat_n - rhat|` against the limit proxy.
    pub time_gap: f64,
    /// `sup |xhat_n - xhat|` against the limit proxy.
    pub space_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyGap {
    pub from: usize,
    pub to: usize,
    pub time_gap: f64,
    pub space_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub members: Vec<MemberDiagnostics>,
    /// `T + sup_n V(x_n, T)`.
    pub lipschitz_bound: f64,
    /// `sup_n` of the time Lipschitz constants.
    pub uniform_time_lipschitz: f64,
    pub uniform_space_lipschitz: f64,
    /// Consecutive pairs of the sequence.
    pub cauchy: Vec<CauchyGap>,
    /// `max |xhat(r(t)) - x(t)|` over the probe set, with the last member's
    /// representation as the limit proxy.
    pub deviation: f64,
    pub limit_proxy: ParamRep,
}

/// Builds total-variation representations along `sequence`, checks their
/// uniform Lipschitz bound and measures how well the last one, mapped back
/// through the right inverse of its time component, reproduces `x`.
pub fn stretch_pipeline(sequence: &[CadlagPath], x: &CadlagPath, probes: usize) -> Result<PipelineReport> {
    if sequence.is_empty() {
        return Err(Error::Domain("empty sequence".into()));
    }
    for member in sequence {
        member.check_same_shape(x)?;
    }
    let horizon = x.horizon();
    let variations: Vec<f64> =
        sequence.iter().map(|m| m.total_variation(horizon)).collect::<Result<_>>()?;
    if variations.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("sequence has unbounded variation".into()));
    }
    let reps: Vec<ParamRep> = sequence.par_iter().map(build_paramrep_tv).collect();
    let limit = reps.last().unwrap().clone();
    let lipschitz_bound = horizon + variations.iter().copied().fold(0.0, f64::max);

    let members: Vec<MemberDiagnostics> = reps
        .iter()
        .enumerate()
        .map(|(index, rep)| {
            let (space_gap, time_gap) = rep.sup_gaps(&limit)?;
            Ok(MemberDiagnostics {
                index,
                variation: variations[index],
                time_lipschitz: rep.time_lipschitz(),
                space_lipschitz: rep.coordinate_lipschitz(),
                time_gap,
                space_gap,
            })
        })
        .collect::<Result<_>>()?;
    let uniform_time_lipschitz = members.iter().map(|m| m.time_lipschitz).fold(0.0, f64::max);
    let uniform_space_lipschitz = members.iter().map(|m| m.space_lipschitz).fold(0.0, f64::max);
    if uniform_time_lipschitz > lipschitz_bound * (1.0 + 1e-9) {
        return Err(Error::Contract(format!(
            "time Lipschitz constant {uniform_time_lipschitz} exceeds T + sup V = {lipschitz_bound}"
        )));
    }
    let cauchy = reps
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (space_gap, time_gap) = w[0].sup_gaps(&w[1])?;
            Ok(CauchyGap { from: i, to: i + 1, time_gap, space_gap })
        })
        .collect::<Result<_>>()?;

    let r = limit.right_inverse()?;
    let m = probes.max(2);
    let mut ts: Vec<f64> = x.times().to_vec();
    ts.extend((0..m).map(|i| horizon * i as f64 / (m - 1) as f64));
    let deviation = ts
        .into_iter()
        .map(|t| dist2(&limit.xhat_at(r.value_unchecked(t)[0]), &x.value_unchecked(t)))
        .fold(0.0, f64::max);

    Ok(PipelineReport {
        members,
        lipschitz_bound,
        uniform_time_lipschitz,
        uniform_space_lipschitz,
        cauchy,
        deviation,
        limit_proxy: limit,
    })
}

impl PipelineReport {
    /// `(n, sup|rhat_n - rhat|, sup|xhat_n - xhat|)` rows; `labels` name the members.
    pub fn to_csv(&self, labels: &[u64]) -> String {
        let mut s = String::from("# schema: wm1-pipeline v1\nn,rhat_gap,xhat_gap,time_lipschitz\n");
        for m in &self.members {
            let label = labels.get(m.index).copied().unwrap_or(m.index as u64);
            s.push_str(&format!("{label},{},{},{}\n", m.time_gap, m.space_gap, m.time_lipschitz));
        }
        s
    }
}
