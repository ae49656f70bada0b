//! Piecewise-affine cadlag paths with finitely many breakpoints.
//!
//! A [`CadlagPath`] on `[0, T]` is stored as a strictly increasing list of
//! breakpoints `0 = t_0 < t_1 < ... < t_K <= T`. At each breakpoint the path
//! takes a right value and then moves affinely with a constant slope until the
//! next breakpoint. Left limits are derived from the preceding segment, so the
//! representation is internally consistent by construction.
//!
//! Paths live on the extended interval `[-1, T + 1]`: on `[-1, 0)` they take
//! the pad value selected by [`PadMode`] and on `(T, T + 1]` they are frozen at
//! `x(T)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{norm2, TIME_TOL};

/// Extension of a path to `[-1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PadMode {
    /// `x(t) = 0` for `t < 0`; used for control-like paths with `U(0-) = 0`.
    #[serde(rename = "zero")]
    ZeroLeft,
    /// `x(t) = x(0)` for `t < 0`.
    #[default]
    #[serde(rename = "hold")]
    HoldLeft,
}

/// Norm used to measure increments when accumulating total variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariationNorm {
    /// Componentwise variation: sum of absolute coordinate increments.
    #[default]
    L1,
    /// Euclidean length of increments.
    L2,
}

impl VariationNorm {
    pub fn apply(self, v: &[f64]) -> f64 {
        match self {
            VariationNorm::L1 => v.iter().map(|a| a.abs()).sum(),
            VariationNorm::L2 => norm2(v),
        }
    }
}

/// A breakpoint as seen from outside: time, left limit, right value and outgoing slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint<'a> {
    pub time: f64,
    pub left: &'a [f64],
    pub right: &'a [f64],
    pub slope: &'a [f64],
}

/// A discontinuity `(t, x(t-), x(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Jump {
    pub fn increment(&self) -> Vec<f64> {
        self.right.iter().zip(&self.left).map(|(r, l)| r - l).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    dim: usize,
    horizon: f64,
    pad: PadMode,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    lefts: Vec<Vec<f64>>,
}

impl CadlagPath {
    /// Builds a path from breakpoint times, right values and outgoing slopes.
    ///
    /// The first time must be `0` (within [`TIME_TOL`]); times must be strictly
    /// increasing and not exceed the horizon. A slope attached to a breakpoint
    /// sitting exactly at the horizon is ignored.
    pub fn new(
        horizon: f64,
        pad: PadMode,
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
        slopes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if times.is_empty() {
            return Err(Error::Contract("a path needs at least the breakpoint t = 0".into()));
        }
        if times.len() != values.len() || times.len() != slopes.len() {
            return Err(Error::Shape(format!(
                "{} times, {} values, {} slopes",
                times.len(),
                values.len(),
                slopes.len()
            )));
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::Shape("path dimension must be positive".into()));
        }
        for (v, s) in values.iter().zip(&slopes) {
            if v.len() != dim || s.len() != dim {
                return Err(Error::Shape(format!("expected vectors of length {dim}")));
            }
            if v.iter().chain(s).any(|a| !a.is_finite()) {
                return Err(Error::Domain("non-finite path value or slope".into()));
            }
        }
        let mut times = times;
        if times[0].abs() > TIME_TOL {
            return Err(Error::Contract(format!("first breakpoint must be 0, got {}", times[0])));
        }
        times[0] = 0.0;
        for w in times.windows(2) {
            if !(w[1] - w[0] > TIME_TOL) {
                return Err(Error::Contract(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let last = *times.last().unwrap();
        if last > horizon + TIME_TOL || !last.is_finite() {
            return Err(Error::Contract(format!("breakpoint {last} beyond horizon {horizon}")));
        }
        let k_last = times.len() - 1;
        if (last - horizon).abs() <= TIME_TOL {
            times[k_last] = horizon;
        }
        let mut slopes = slopes;
        if times[k_last] == horizon {
            slopes[k_last] = vec![0.0; dim];
        }

        let mut lefts = Vec::with_capacity(times.len());
        lefts.push(match pad {
            PadMode::ZeroLeft => vec![0.0; dim],
            PadMode::HoldLeft => values[0].clone(),
        });
        for k in 1..times.len() {
            let dt = times[k] - times[k - 1];
            lefts.push(
                values[k - 1]
                    .iter()
                    .zip(&slopes[k - 1])
                    .map(|(v, s)| v + s * dt)
                    .collect(),
            );
        }
        Ok(Self { dim, horizon, pad, times, values, slopes, lefts })
    }

    /// Piecewise-constant path taking `values[k]` on `[times[k], times[k + 1])`.
    pub fn step(horizon: f64, pad: PadMode, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let slopes = values.iter().map(|v| vec![0.0; v.len()]).collect();
        Self::new(horizon, pad, times, values, slopes)
    }

    pub fn constant(horizon: f64, pad: PadMode, value: Vec<f64>) -> Result<Self> {
        Self::step(horizon, pad, vec![0.0], vec![value])
    }

    /// Continuous piecewise-linear path interpolating `(times[k], values[k])`.
    ///
    /// The knots must start at 0 and end at the horizon.
    pub fn from_knots(pad: PadMode, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::Shape("need at least two knots with matching values".into()));
        }
        let horizon = *times.last().unwrap();
        let mut slopes = Vec::with_capacity(times.len());
        for k in 0..times.len() - 1 {
            let dt = times[k + 1] - times[k];
            if !(dt > TIME_TOL) {
                return Err(Error::Contract("knot times must be strictly increasing".into()));
            }
            if values[k].len() != values[k + 1].len() {
                return Err(Error::Shape("knot values differ in length".into()));
            }
            slopes.push(
                values[k + 1]
                    .iter()
                    .zip(&values[k])
                    .map(|(b, a)| (b - a) / dt)
                    .collect(),
            );
        }
        slopes.push(vec![0.0; values[0].len()]);
        Self::new(horizon, pad, times, values, slopes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pad(&self) -> PadMode {
        self.pad
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = Breakpoint<'_>> + '_ {
        (0..self.times.len()).map(move |k| Breakpoint {
            time: self.times[k],
            left: &self.lefts[k],
            right: &self.values[k],
            slope: &self.slopes[k],
        })
    }

    pub fn breakpoint(&self, k: usize) -> Breakpoint<'_> {
        Breakpoint {
            time: self.times[k],
            left: &self.lefts[k],
            right: &self.values[k],
            slope: &self.slopes[k],
        }
    }

    /// True when every slope is zero.
    pub fn is_piecewise_constant(&self) -> bool {
        self.slopes.iter().flatten().all(|s| *s == 0.0)
    }

    /// Value on `[-1, 0)`.
    pub fn pad_value(&self) -> Vec<f64> {
        self.lefts[0].clone()
    }

    /// Index of the segment active at `t` (last breakpoint `<= t`), for `t` in `[0, T]`.
    pub(crate) fn segment_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Value of segment `k` at time `t` (no domain checks).
    pub(crate) fn segment_value(&self, k: usize, t: f64) -> Vec<f64> {
        let dt = t - self.times[k];
        self.values[k]
            .iter()
            .zip(&self.slopes[k])
            .map(|(v, s)| v + s * dt)
            .collect()
    }

    pub(crate) fn slope_at_segment(&self, k: usize) -> &[f64] {
        &self.slopes[k]
    }

    fn check_range(&self, t: f64, open_left: bool) -> Result<()> {
        let ok = if open_left { t > -1.0 } else { t >= -1.0 };
        if !ok || t > self.horizon + 1.0 || t.is_nan() {
            return Err(Error::Domain(format!(
                "time {t} outside [-1, {}]",
                self.horizon + 1.0
            )));
        }
        Ok(())
    }

    /// Right-continuous evaluation on `[-1, T + 1]`.
    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>> {
        self.check_range(t, false)?;
        Ok(self.value_unchecked(t))
    }

    pub(crate) fn value_unchecked(&self, t: f64) -> Vec<f64> {
        if t < 0.0 {
            self.lefts[0].clone()
        } else if t >= self.horizon {
            self.terminal_value()
        } else {
            self.segment_value(self.segment_at(t), t)
        }
    }

    /// `x(T)`.
    pub fn terminal_value(&self) -> Vec<f64> {
        let k = self.times.len() - 1;
        self.segment_value(k, self.horizon)
    }

    pub fn initial_value(&self) -> Vec<f64> {
        self.values[0].clone()
    }

    /// `lim_{s -> t-} x(s)` for `t` in `(-1, T + 1]`.
    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        self.check_range(t, true)?;
        Ok(self.left_limit_unchecked(t))
    }

    pub(crate) fn left_limit_unchecked(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            self.lefts[0].clone()
        } else if t > self.horizon {
            self.terminal_value()
        } else {
            // last breakpoint strictly before t
            let k = self.times.partition_point(|&s| s < t) - 1;
            self.segment_value(k, t)
        }
    }

    /// Left limit with the graph convention `x(0-) = x(0)`.
    pub(crate) fn graph_left(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            self.values[0].clone()
        } else {
            self.left_limit_unchecked(t)
        }
    }

    /// Breakpoints in `(0, T]` where the left limit differs from the right value,
    /// plus a jump at `0` when the pad value differs from `x(0)`.
    pub fn discontinuities(&self) -> Vec<Jump> {
        (0..self.times.len())
            .filter(|&k| {
                self.lefts[k]
                    .iter()
                    .zip(&self.values[k])
                    .any(|(l, r)| (l - r).abs() > TIME_TOL)
            })
            .map(|k| Jump {
                time: self.times[k],
                left: self.lefts[k].clone(),
                right: self.values[k].clone(),
            })
            .collect()
    }

    /// Jumps inside `(0, T]`, i.e. ignoring a pad jump at the origin.
    pub fn interior_jumps(&self) -> Vec<Jump> {
        self.discontinuities().into_iter().filter(|j| j.time > 0.0).collect()
    }

    pub fn is_continuous(&self) -> bool {
        self.interior_jumps().is_empty()
    }

    /// Total variation on `[0, t]` under the componentwise (L1) norm.
    ///
    /// The pad jump at the origin is not counted (`x(0-) = x(0)` on `[0, T]`).
    pub fn total_variation(&self, t: f64) -> Result<f64> {
        self.total_variation_with(VariationNorm::L1, t)
    }

    pub fn total_variation_with(&self, norm: VariationNorm, t: f64) -> Result<f64> {
        if !(t >= -TIME_TOL && t <= self.horizon + TIME_TOL) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let t = t.clamp(0.0, self.horizon);
        let mut total = 0.0;
        for k in 0..self.times.len() {
            let start = self.times[k];
            if start > t {
                break;
            }
            if k > 0 {
                let jump: Vec<f64> =
                    self.values[k].iter().zip(&self.lefts[k]).map(|(r, l)| r - l).collect();
                total += norm.apply(&jump);
            }
            let end = self.times.get(k + 1).copied().unwrap_or(self.horizon).min(t);
            if end > start {
                total += norm.apply(&self.slopes[k]) * (end - start);
            }
        }
        Ok(total)
    }

    /// `sup_{0 <= s <= t} |x(s)|` (Euclidean), exact for piecewise-affine paths.
    pub fn sup_norm(&self, t: f64) -> Result<f64> {
        if !(t >= -TIME_TOL && t <= self.horizon + TIME_TOL) {
            return Err(Error::Domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let t = t.clamp(0.0, self.horizon);
        let mut best = norm2(&self.value_unchecked(t));
        for k in 0..self.times.len() {
            if self.times[k] > t {
                break;
            }
            best = best.max(norm2(&self.values[k]));
            if k > 0 {
                best = best.max(norm2(&self.lefts[k]));
            }
        }
        Ok(best)
    }

    /// `sup_{0 <= t <= T} |x(t) - y(t)|`, exact for piecewise-affine paths.
    pub fn uniform_distance(&self, other: &CadlagPath) -> Result<f64> {
        self.check_same_shape(other)?;
        let times = merge_times(&self.times, &other.times);
        let mut best: f64 = 0.0;
        for &t in &times {
            best = best.max(crate::dist2(&self.value_snapped(t), &other.value_snapped(t)));
            if t > 0.0 {
                best = best.max(crate::dist2(
                    &self.left_limit_unchecked(t),
                    &other.left_limit_unchecked(t),
                ));
            }
        }
        best = best.max(crate::dist2(&self.terminal_value(), &other.terminal_value()));
        Ok(best)
    }

    pub(crate) fn check_same_shape(&self, other: &CadlagPath) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        if (self.horizon - other.horizon).abs() > TIME_TOL {
            return Err(Error::Shape(format!(
                "horizons {} and {}",
                self.horizon, other.horizon
            )));
        }
        Ok(())
    }

    /// Value at `t`, reading a breakpoint within [`TIME_TOL`] after `t` as if it sat at `t`.
    fn value_snapped(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t + TIME_TOL).saturating_sub(1);
        if t >= self.horizon {
            return self.terminal_value();
        }
        let dt = (t - self.times[k]).max(0.0);
        self.values[k].iter().zip(&self.slopes[k]).map(|(v, s)| v + s * dt).collect()
    }

    fn slope_snapped(&self, t: f64) -> &[f64] {
        let k = self.times.partition_point(|&s| s <= t + TIME_TOL).saturating_sub(1);
        &self.slopes[k]
    }

    /// Exact pointwise sum. Breakpoints closer than [`TIME_TOL`] are merged.
    pub fn add(&self, other: &CadlagPath) -> Result<CadlagPath> {
        self.check_same_shape(other)?;
        if self.pad != other.pad {
            return Err(Error::Shape("cannot add paths with different pad modes".into()));
        }
        let times = merge_times(&self.times, &other.times);
        let values = times
            .iter()
            .map(|&t| {
                let a = self.value_snapped(t);
                let b = other.value_snapped(t);
                a.iter().zip(&b).map(|(x, y)| x + y).collect()
            })
            .collect();
        let slopes = times
            .iter()
            .map(|&t| {
                self.slope_snapped(t)
                    .iter()
                    .zip(other.slope_snapped(t))
                    .map(|(x, y)| x + y)
                    .collect()
            })
            .collect();
        CadlagPath::new(self.horizon, self.pad, times, values, slopes)
    }

    /// Image under the linear map `v -> M v`.
    pub fn map_linear(&self, matrix: &DMatrix<f64>) -> Result<CadlagPath> {
        if matrix.ncols() != self.dim {
            return Err(Error::Shape(format!(
                "matrix has {} columns, path dimension is {}",
                matrix.ncols(),
                self.dim
            )));
        }
        let apply = |v: &Vec<f64>| -> Vec<f64> {
            (0..matrix.nrows())
                .map(|r| (0..self.dim).map(|c| matrix[(r, c)] * v[c]).sum())
                .collect()
        };
        CadlagPath::new(
            self.horizon,
            self.pad,
            self.times.clone(),
            self.values.iter().map(apply).collect(),
            self.slopes.iter().map(apply).collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> CadlagPath {
        let mut out = self.clone();
        for v in out.values.iter_mut().chain(out.slopes.iter_mut()).chain(out.lefts.iter_mut()) {
            v.iter_mut().for_each(|a| *a *= factor);
        }
        out
    }

    /// Adds a constant vector to every value (including the pad value for hold-left paths).
    pub fn translate(&self, offset: &[f64]) -> Result<CadlagPath> {
        if offset.len() != self.dim {
            return Err(Error::Shape("offset dimension mismatch".into()));
        }
        let values = self
            .values
            .iter()
            .map(|v| v.iter().zip(offset).map(|(a, b)| a + b).collect())
            .collect();
        CadlagPath::new(self.horizon, self.pad, self.times.clone(), values, self.slopes.clone())
    }

    /// Coordinate `i` as a one-dimensional path.
    pub fn component(&self, i: usize) -> Result<CadlagPath> {
        if i >= self.dim {
            return Err(Error::Shape(format!("component {i} of a {}-d path", self.dim)));
        }
        CadlagPath::new(
            self.horizon,
            self.pad,
            self.times.clone(),
            self.values.iter().map(|v| vec![v[i]]).collect(),
            self.slopes.iter().map(|v| vec![v[i]]).collect(),
        )
    }

    /// The path `t -> (x(t), y(t))` in dimension `dim(x) + dim(y)`.
    pub fn concat(&self, other: &CadlagPath) -> Result<CadlagPath> {
        if (self.horizon - other.horizon).abs() > TIME_TOL {
            return Err(Error::Shape("horizons differ".into()));
        }
        if self.pad != other.pad {
            return Err(Error::Shape("pad modes differ".into()));
        }
        let times = merge_times(&self.times, &other.times);
        let values = times
            .iter()
            .map(|&t| {
                let mut v = self.value_snapped(t);
                v.extend(other.value_snapped(t));
                v
            })
            .collect();
        let slopes = times
            .iter()
            .map(|&t| {
                let mut v = self.slope_snapped(t).to_vec();
                v.extend_from_slice(other.slope_snapped(t));
                v
            })
            .collect();
        CadlagPath::new(self.horizon, self.pad, times, values, slopes)
    }

    /// Restriction to `[0, horizon]` for `0 < horizon <= T`.
    pub fn restrict(&self, horizon: f64) -> Result<CadlagPath> {
        if !(horizon > 0.0 && horizon <= self.horizon + TIME_TOL) {
            return Err(Error::Domain(format!(
                "restriction horizon {horizon} not in (0, {}]",
                self.horizon
            )));
        }
        let n = self.times.partition_point(|&s| s <= horizon);
        CadlagPath::new(
            horizon.min(self.horizon),
            self.pad,
            self.times[..n].to_vec(),
            self.values[..n].to_vec(),
            self.slopes[..n].to_vec(),
        )
    }

    pub fn with_pad(&self, pad: PadMode) -> CadlagPath {
        CadlagPath::new(
            self.horizon,
            pad,
            self.times.clone(),
            self.values.clone(),
            self.slopes.clone(),
        )
        .expect("re-padding keeps a valid path")
    }

    /// True when every coordinate is nondecreasing on `[0, T]`.
    pub fn is_componentwise_nondecreasing(&self) -> bool {
        self.slopes.iter().flatten().all(|s| *s >= 0.0)
            && (1..self.times.len())
                .all(|k| self.values[k].iter().zip(&self.lefts[k]).all(|(r, l)| r >= l))
    }

    pub fn to_spec(&self) -> PathSpec {
        PathSpec {
            dim: self.dim,
            horizon: self.horizon,
            pad: self.pad,
            segments: (0..self.times.len())
                .map(|k| SegmentSpec {
                    t: self.times[k],
                    left: Some(self.lefts[k].clone()),
                    right: self.values[k].clone(),
                    slope: Some(self.slopes[k].clone()),
                })
                .collect(),
        }
    }

    pub fn from_spec(spec: PathSpec) -> Result<CadlagPath> {
        let PathSpec { dim, horizon, pad, segments } = spec;
        let times: Vec<f64> = segments.iter().map(|s| s.t).collect();
        let values: Vec<Vec<f64>> = segments.iter().map(|s| s.right.clone()).collect();
        let slopes: Vec<Vec<f64>> = segments
            .iter()
            .map(|s| s.slope.clone().unwrap_or_else(|| vec![0.0; s.right.len()]))
            .collect();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape(format!("segment values must have length {dim}")));
        }
        let path = CadlagPath::new(horizon, pad, times, values, slopes)?;
        for (k, seg) in segments.iter().enumerate() {
            if let Some(left) = &seg.left {
                if left.len() != dim {
                    return Err(Error::Shape(format!("left limit at t = {} has wrong length", seg.t)));
                }
                let consistent = left
                    .iter()
                    .zip(&path.lefts[k])
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                if !consistent {
                    return Err(Error::Contract(format!(
                        "left limit {:?} at t = {} disagrees with the preceding segment {:?}",
                        left, seg.t, path.lefts[k]
                    )));
                }
            }
        }
        Ok(path)
    }
}

/// JSON document for a path: `{"dim", "horizon", "pad", "segments": [{"t", "left", "right", "slope"}]}`.
///
/// `left` and `slope` are optional on input; `left` is checked against the
/// preceding segment when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub dim: usize,
    pub horizon: f64,
    #[serde(default)]
    pub pad: PadMode,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Vec<f64>>,
    pub right: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Vec<f64>>,
}

impl Serialize for CadlagPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CadlagPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = PathSpec::deserialize(deserializer)?;
        CadlagPath::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

/// Sorted union of two breakpoint lists, merging times closer than [`TIME_TOL`].
pub(crate) fn merge_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= TIME_TOL => {}
            _ => out.push(t),
        }
    }
    out
}
