//! Problem specification for singularly controlled diffusions and the linear
//! change of variables that maps the control cone onto the orthant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cone::{cone_to_orthant, ConeSpec};
use crate::error::{Error, Result};
use crate::norm2;

type Rows = Vec<Vec<f64>>;

fn to_matrix(rows: &Rows, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn check_rows(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<()> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{name} must be {nrows} x {ncols}")));
    }
    Ok(())
}

/// `x -> out . clip(offset + linear x)` with componentwise clipping to
/// `[-clip, clip]` when `clip` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineField {
    pub out: Rows,
    pub offset: Vec<f64>,
    pub linear: Rows,
    #[serde(default)]
    pub clip: Option<f64>,
}

impl AffineField {
    pub fn zero(d: usize) -> Self {
        Self { out: vec![vec![0.0; d]; d], offset: vec![0.0; d], linear: vec![vec![0.0; d]; d], clip: None }
    }

    /// `b(x) = a x + offset`, clipped componentwise.
    pub fn affine(linear: Rows, offset: Vec<f64>, clip: Option<f64>) -> Self {
        let d = offset.len();
        let out = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { out, offset, linear, clip }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let q = self.offset.len();
        check_rows("drift output map", &self.out, d, q)?;
        check_rows("drift linear part", &self.linear, q, d)?;
        if self.clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Domain("drift clip must be positive".into()));
        }
        Ok(())
    }

    pub fn eval_into(&self, x: &[f64], inner: &mut [f64], out: &mut [f64]) {
        for (i, v) in inner.iter_mut().enumerate() {
            let mut s = self.offset[i];
            for (a, b) in self.linear[i].iter().zip(x) {
                s += a * b;
            }
            if let Some(c) = self.clip {
                s = s.clamp(-c, c);
            }
            *v = s;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.out[i].iter().zip(inner.iter()).map(|(a, b)| a * b).sum();
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut inner = vec![0.0; self.offset.len()];
        let mut out = vec![0.0; self.out.len()];
        self.eval_into(x, &mut inner, &mut out);
        out
    }
}

/// `x -> out . clip(base + sum_c x_c slopes[c])`, where `clip` rescales the
/// inner matrix so that its operator norm is at most the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionField {
    pub out: Rows,
    pub base: Rows,
    /// One matrix per state coordinate; empty for a state-independent field.
    #[serde(default)]
    pub slopes: Vec<Rows>,
    #[serde(default)]
    pub clip: Option<f64>,
}

impl DiffusionField {
    pub fn constant(sigma: Rows) -> Self {
        let d = sigma.len();
        let out = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { out, base: sigma, slopes: Vec::new(), clip: None }
    }

    pub fn noise_dim(&self) -> usize {
        self.base.first().map_or(0, Vec::len)
    }

    fn validate(&self, d: usize, noise: usize) -> Result<()> {
        let q = self.base.len();
        check_rows("diffusion output map", &self.out, d, q)?;
        check_rows("diffusion base", &self.base, q, noise)?;
        if !self.slopes.is_empty() {
            if self.slopes.len() != d {
                return Err(Error::Shape(format!("diffusion needs {d} slope matrices")));
            }
            for s in &self.slopes {
                check_rows("diffusion slope", s, q, noise)?;
            }
        }
        if self.clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Domain("diffusion clip must be positive".into()));
        }
        Ok(())
    }

    pub fn is_state_independent(&self) -> bool {
        self.slopes.iter().all(|s| s.iter().flatten().all(|v| *v == 0.0))
    }

    /// `sigma(x)` as a `d x noise` matrix.
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let q = self.base.len();
        let noise = self.noise_dim();
        let mut inner = to_matrix(&self.base, noise);
        for (c, s) in self.slopes.iter().enumerate() {
            if x[c] != 0.0 {
                inner += to_matrix(s, noise) * x[c];
            }
        }
        if let Some(bound) = self.clip {
            let norm = inner.clone().svd(false, false).singular_values.max();
            if norm > bound {
                inner *= bound / norm;
            }
        }
        to_matrix(&self.out, q) * inner
    }
}

/// Piecewise-linear matrix-valued table in time, constant beyond its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixTable {
    pub times: Vec<f64>,
    pub values: Vec<Rows>,
}

impl MatrixTable {
    pub fn constant(value: Rows) -> Self {
        Self { times: vec![0.0], values: vec![value] }
    }

    pub fn shape(&self) -> (usize, usize) {
        let rows = self.values.first().map_or(0, Vec::len);
        let cols = self.values.first().and_then(|m| m.first()).map_or(0, Vec::len);
        (rows, cols)
    }

    fn validate(&self, name: &str, nrows: usize, ncols: usize) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::Shape(format!("{name} needs one matrix per time")));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract(format!("{name} times must increase")));
        }
        for m in &self.values {
            check_rows(name, m, nrows, ncols)?;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let (r, c) = self.shape();
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return to_matrix(&self.values[0], c);
        }
        if k == self.times.len() {
            return to_matrix(&self.values[k - 1], c);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        DMatrix::from_fn(r, c, |i, j| (1.0 - w) * self.values[k - 1][i][j] + w * self.values[k][i][j])
    }

    fn map(&self, f: impl Fn(DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let c = self.shape().1;
        Self { times: self.times.clone(), values: self.values.iter().map(|m| to_rows(&f(to_matrix(m, c)))).collect() }
    }
}

/// `coef * |linear x + shift|^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub linear: Rows,
    pub shift: Vec<f64>,
    pub power: f64,
}

/// `sum of power terms + weight . x + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPolynomial {
    #[serde(default)]
    pub terms: Vec<PowerTerm>,
    pub weight: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
}

impl CostPolynomial {
    pub fn zero(d: usize) -> Self {
        Self { terms: Vec::new(), weight: vec![0.0; d], constant: 0.0 }
    }

    /// `coef * |x|^power`.
    pub fn norm_power(d: usize, coef: f64, power: f64) -> Self {
        let linear = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { terms: vec![PowerTerm { coef, linear, shift: vec![0.0; d], power }], weight: vec![0.0; d], constant: 0.0 }
    }

    fn validate(&self, name: &str, d: usize) -> Result<()> {
        if self.weight.len() != d {
            return Err(Error::Shape(format!("{name} weight must have length {d}")));
        }
        for term in &self.terms {
            check_rows(name, &term.linear, term.shift.len(), d)?;
            if !(term.power >= 0.0) {
                return Err(Error::Domain(format!("{name} has a negative power")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut total = self.constant;
        for (w, v) in self.weight.iter().zip(x) {
            total += w * v;
        }
        for term in &self.terms {
            let mut sq = 0.0;
            for (row, s) in term.linear.iter().zip(&term.shift) {
                let v = s + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                sq += v * v;
            }
            total += term.coef * if term.power == 2.0 { sq } else { sq.sqrt().powf(term.power) };
        }
        total
    }

    fn pull_back(&self, s2_inv: &DMatrix<f64>) -> Self {
        let d = self.weight.len();
        let weight = s2_inv.transpose() * DVector::from_column_slice(&self.weight);
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| PowerTerm { linear: to_rows(&(to_matrix(&t.linear, d) * s2_inv)), ..t.clone() })
                .collect(),
            weight: weight.iter().copied().collect(),
            constant: self.constant,
        }
    }
}

/// `normal . x <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Intersection of half-spaces; empty means the whole space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateSet {
    #[serde(default)]
    pub halfspaces: Vec<HalfSpace>,
}

impl StateSet {
    /// `lo <= x <= hi` componentwise; infinite bounds are dropped.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let d = lo.len();
        let mut halfspaces = Vec::new();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            if hi[i].is_finite() {
                halfspaces.push(HalfSpace { normal: e.clone(), offset: hi[i] });
            }
            if lo[i].is_finite() {
                halfspaces.push(HalfSpace { normal: e.iter().map(|v| -v).collect(), offset: -lo[i] });
            }
        }
        Self { halfspaces }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() <= h.offset + tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostCase {
    /// Growth-dominated running and terminal costs.
    A,
    /// Nonnegative control cost on the cone.
    B,
    /// Control cost bounded below by `c_h |u|` on the cone.
    C,
}

/// Growth exponents and constants of the cost and coefficient bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub p: f64,
    pub p_bar: f64,
    #[serde(default)]
    pub c_f: f64,
    #[serde(default)]
    pub c_g: f64,
    #[serde(default)]
    pub c_g_bar: f64,
    #[serde(default)]
    pub c_h: f64,
    #[serde(default)]
    pub c_k: f64,
}

/// Controlled dynamics `dX = b(X) dt + sigma(X) dW + k(t) dU` on `[0, T]`
/// with cost `E[int f(X) dt + int h(t) dU + g(X(T))]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// State dimension.
    pub d: usize,
    /// Control dimension.
    pub d1: usize,
    /// Noise dimension.
    pub d2: usize,
    pub horizon: f64,
    pub initial_state: Vec<f64>,
    pub drift: AffineField,
    pub diffusion: DiffusionField,
    /// `d x d1` control loading.
    pub k: MatrixTable,
    /// `1 x d1` control cost density.
    pub h: MatrixTable,
    pub f: CostPolynomial,
    pub g: CostPolynomial,
    #[serde(default)]
    pub state_set: StateSet,
    pub case: CostCase,
    pub growth: Growth,
    pub control_cone: ConeSpec,
    #[serde(default)]
    pub state_cone: Option<ConeSpec>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| Error::Domain(format!("invalid problem JSON: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem specs serialise")
    }

    /// Exponent of the moment bounds: `p_bar` in cases a and b, 1 in case c.
    pub fn p_star(&self) -> f64 {
        match self.case {
            CostCase::A | CostCase::B => self.growth.p_bar,
            CostCase::C => 1.0,
        }
    }

    /// Checks shapes, growth exponents and the case-dependent sign conditions
    /// of `h` and the lower bound on `k` on the cone generators at every table time.
    pub fn validate(&self) -> Result<()> {
        let (d, d1) = (self.d, self.d1);
        if d == 0 || d1 == 0 {
            return Err(Error::Shape("dimensions must be positive".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.initial_state.len() != d {
            return Err(Error::Shape(format!("initial state must have length {d}")));
        }
        self.drift.validate(d)?;
        self.diffusion.validate(d, self.d2)?;
        self.k.validate("k", d, d1)?;
        self.h.validate("h", 1, d1)?;
        self.f.validate("f", d)?;
        self.g.validate("g", d)?;
        for hs in &self.state_set.halfspaces {
            if hs.normal.len() != d {
                return Err(Error::Shape(format!("state constraint normal must have length {d}")));
            }
        }
        if self.control_cone.dim() != d1 {
            return Err(Error::Shape(format!("control cone must live in R^{d1}")));
        }
        self.control_cone.validate()?;
        if let Some(c) = &self.state_cone {
            if c.dim() != d {
                return Err(Error::Shape(format!("state cone must live in R^{d}")));
            }
            c.validate()?;
        }
        let gr = &self.growth;
        if !(gr.p >= 0.0 && gr.p_bar > gr.p) {
            return Err(Error::Domain(format!("growth exponents need p_bar > p >= 0, got p = {}, p_bar = {}", gr.p, gr.p_bar)));
        }
        let mut times = self.h.times.clone();
        times.extend_from_slice(&self.k.times);
        for t in times {
            let h = self.h.eval(t);
            let k = self.k.eval(t);
            for g in &self.control_cone.generators {
                let gv = DVector::from_column_slice(g);
                let hu = (&h * &gv)[0];
                let size = gv.norm();
                match self.case {
                    CostCase::B if hu < -1e-12 => {
                        return Err(Error::Contract(format!("h(t) . u < 0 at t = {t} on generator {g:?}")));
                    }
                    CostCase::C if hu < gr.c_h * size - 1e-12 => {
                        return Err(Error::Contract(format!("h(t) . u < c_h |u| at t = {t} on generator {g:?}")));
                    }
                    _ => {}
                }
                if (&k * &gv).norm() < gr.c_k * size - 1e-12 {
                    return Err(Error::Contract(format!("|k(t) u| < c_k |u| at t = {t} on generator {g:?}")));
                }
            }
        }
        Ok(())
    }
}

fn invert(name: &str, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Rank(format!("{name} is not square")));
    }
    let sv = m.clone().svd(false, false).singular_values;
    if !(sv.min() > 1e-12 * sv.max()) {
        return Err(Error::Rank(format!("{name} is singular")));
    }
    m.clone().try_inverse().ok_or_else(|| Error::Rank(format!("{name} is singular")))
}

fn map_cone(cone: &ConeSpec, s: &DMatrix<f64>) -> Result<ConeSpec> {
    let generators: Vec<Vec<f64>> = cone
        .generators
        .iter()
        .map(|g| (s * DVector::from_column_slice(g)).iter().copied().collect())
        .collect();
    let d = cone.dim();
    let ones = vec![1.0; d];
    let a0 = generators
        .iter()
        .map(|g| g.iter().sum::<f64>() / norm2(g))
        .fold(f64::INFINITY, f64::min);
    if a0 > 0.0 {
        Ok(ConeSpec { generators, certificate: ones, a0 })
    } else {
        ConeSpec::new(generators)
    }
}

/// Primed problem for `X' = S2 X`, `U' = S1 U`: the drift and diffusion are
/// conjugated by `S2`, `k' = S2 k S1^-1`, `h' = h S1^-1`, the costs and the
/// state set are pulled back through `S2^-1`, and the cones are mapped. The
/// certificate becomes `(1, ..., 1)` whenever that is valid for the mapped
/// cone (always the case for the orthant).
pub fn transform_problem(spec: &ProblemSpec, s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<ProblemSpec> {
    let (d, d1) = (spec.d, spec.d1);
    if s1.shape() != (d1, d1) || s2.shape() != (d, d) {
        return Err(Error::Shape(format!("need S1 in R^{d1}x{d1} and S2 in R^{d}x{d}")));
    }
    let s1_inv = invert("S1", s1)?;
    let s2_inv = invert("S2", s2)?;

    let q = spec.drift.offset.len();
    let drift = AffineField {
        out: to_rows(&(s2 * to_matrix(&spec.drift.out, q))),
        offset: spec.drift.offset.clone(),
        linear: to_rows(&(to_matrix(&spec.drift.linear, d) * &s2_inv)),
        clip: spec.drift.clip,
    };
    let noise = spec.d2;
    let qs = spec.diffusion.base.len();
    let slopes = if spec.diffusion.slopes.is_empty() {
        Vec::new()
    } else {
        let old: Vec<DMatrix<f64>> = spec.diffusion.slopes.iter().map(|s| to_matrix(s, noise)).collect();
        (0..d)
            .map(|e| {
                let mut acc = DMatrix::zeros(qs, noise);
                for (c, m) in old.iter().enumerate() {
                    acc += m * s2_inv[(c, e)];
                }
                to_rows(&acc)
            })
            .collect()
    };
    let diffusion = DiffusionField {
        out: to_rows(&(s2 * to_matrix(&spec.diffusion.out, qs))),
        base: spec.diffusion.base.clone(),
        slopes,
        clip: spec.diffusion.clip,
    };
    let initial = s2 * DVector::from_column_slice(&spec.initial_state);
    let state_set = StateSet {
        halfspaces: spec
            .state_set
            .halfspaces
            .iter()
            .map(|h| HalfSpace {
                normal: (s2_inv.transpose() * DVector::from_column_slice(&h.normal)).iter().copied().collect(),
                offset: h.offset,
            })
            .collect(),
    };
    Ok(ProblemSpec {
        d,
        d1,
        d2: spec.d2,
        horizon: spec.horizon,
        initial_state: initial.iter().copied().collect(),
        drift,
        diffusion,
        k: spec.k.map(|k| s2 * k * &s1_inv),
        h: spec.h.map(|h| h * &s1_inv),
        f: spec.f.pull_back(&s2_inv),
        g: spec.g.pull_back(&s2_inv),
        state_set,
        case: spec.case,
        growth: spec.growth.clone(),
        control_cone: map_cone(&spec.control_cone, s1)?,
        state_cone: spec.state_cone.as_ref().map(|c| map_cone(c, s2)).transpose()?,
    })
}

/// Reduction of the control cone to the orthant with `S2` the identity.
pub fn reduce_to_orthant(spec: &ProblemSpec) -> Result<(ProblemSpec, DMatrix<f64>)> {
    let s1 = cone_to_orthant(&spec.control_cone.generators)?;
    let primed = transform_problem(spec, &s1, &DMatrix::identity(spec.d, spec.d))?;
    Ok((primed, s1))
}
