//! Cone geometry: half-space certificates, orthant reduction and membership
//! of control increments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cadlag::CadlagPath;
use crate::error::{Error, Result};
use crate::norm2;

/// Polyhedral cone spanned by `generators`, with a certificate `u1` such that
/// `u1 . g >= a0 |g|` on every generator and hence on the whole cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub generators: Vec<Vec<f64>>,
    pub certificate: Vec<f64>,
    pub a0: f64,
}

impl ConeSpec {
    /// Builds the cone and derives its certificate.
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self> {
        let (certificate, a0) = verify_halfspace(&generators)?;
        Ok(Self { generators, certificate, a0 })
    }

    /// Nonnegative orthant of `R^d` with certificate `(1, ..., 1)` and `a0 = 1`.
    pub fn orthant(d: usize) -> Self {
        let generators = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { generators, certificate: vec![1.0; d], a0: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.certificate.len()
    }

    /// Checks the stored certificate against every generator.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.generators.is_empty() {
            return Err(Error::Domain("cone without generators".into()));
        }
        if !(self.a0 > 0.0) {
            return Err(Error::Contract(format!("certificate constant {} is not positive", self.a0)));
        }
        for g in &self.generators {
            if g.len() != d {
                return Err(Error::Shape(format!("generator of length {} in R^{d}", g.len())));
            }
            let lhs: f64 = g.iter().zip(&self.certificate).map(|(a, b)| a * b).sum();
            if lhs < self.a0 * norm2(g) - 1e-12 {
                return Err(Error::Contract(format!("certificate fails on generator {g:?}")));
            }
        }
        Ok(())
    }

    /// Nonnegative least-squares residual of `v` against the generators.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let a = generator_matrix(&self.generators);
        nnls(&a, &DVector::from_column_slice(v)).1
    }
}

fn generator_matrix(generators: &[Vec<f64>]) -> DMatrix<f64> {
    let d = generators.first().map_or(0, Vec::len);
    DMatrix::from_fn(d, generators.len(), |i, j| generators[j][i])
}

/// Lawson-Hanson nonnegative least squares: `min |A x - b|` over `x >= 0`.
/// Returns the minimiser and the residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0) * b.norm().max(1.0);
    let tol = 1e-12 * scale * (a.nrows().max(n) as f64);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let solve = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
        let zs = sub.svd(true, true).solve(b, 1e-14).expect("SVD with both factors");
        let mut z = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            z[j] = zs[k];
        }
        z
    };
    for _ in 0..3 * n.max(1) + 10 {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = pick else { break };
        if w[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let z = solve(&passive);
            if (0..n).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..n).filter(|&j| passive[j] && z[j] <= 0.0) {
                alpha = alpha.min(x[j] / (x[j] - z[j]));
            }
            x += (z - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Finds `u` with `u . g_i >= 1` for every generator (the least-norm such `u`)
/// and returns it with `a0 = min_i u . g_i / |g_i|`.
pub fn verify_halfspace(generators: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let Some(first) = generators.first() else {
        return Err(Error::Domain("no generators".into()));
    };
    let d = first.len();
    for g in generators {
        if g.len() != d {
            return Err(Error::Shape("generators of different lengths".into()));
        }
        if norm2(g) == 0.0 {
            return Err(Error::Domain("zero generator".into()));
        }
    }
    // least-distance program min |u| s.t. G u >= 1, through its NNLS dual
    let m = generators.len();
    let e = DMatrix::from_fn(d + 1, m, |i, j| if i < d { generators[j][i] } else { 1.0 });
    let mut f = DVector::zeros(d + 1);
    f[d] = 1.0;
    let (y, _) = nnls(&e, &f);
    let r = &e * y - f;
    if r.norm() < 1e-10 || r[d].abs() < 1e-12 {
        return Err(Error::Infeasible);
    }
    let u: Vec<f64> = (0..d).map(|i| -r[i] / r[d]).collect();
    let a0 = generators
        .iter()
        .map(|g| g.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / norm2(g))
        .fold(f64::INFINITY, f64::min);
    if !(a0 > 0.0) {
        return Err(Error::Infeasible);
    }
    Ok((u, a0))
}

/// `S1` with `S1 g_i = e_i`, i.e. the inverse of the generator matrix.
pub fn cone_to_orthant(generators: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = generators.first().map_or(0, Vec::len);
    if d == 0 || generators.len() != d || generators.iter().any(|g| g.len() != d) {
        return Err(Error::Rank(format!(
            "need {d} generators of length {d} for a simplicial cone, got {}",
            generators.len()
        )));
    }
    let g = generator_matrix(generators);
    let svd = g.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Rank("generators are linearly dependent".into()));
    }
    g.try_inverse().ok_or_else(|| Error::Rank("generator matrix is singular".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementViolation {
    pub time: f64,
    /// `"jump"` or `"slope"`.
    pub kind: String,
    pub increment: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub admissible: bool,
    pub checked: usize,
    pub violations: Vec<IncrementViolation>,
}

impl IncrementReport {
    /// The first violation as an admissibility error.
    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::Admissibility { time: v.time, increment: v.increment, residual: v.residual }),
        }
    }
}

/// Checks every jump (including the one from the pad value at `0`) and every
/// segment slope of `control` for membership in the cone, up to a residual of
/// `tol * max(1, |increment|)`.
pub fn increments_in_cone(control: &CadlagPath, cone: &ConeSpec, tol: f64) -> Result<IncrementReport> {
    if control.dim() != cone.dim() {
        return Err(Error::Shape(format!("{}-d control against a cone in R^{}", control.dim(), cone.dim())));
    }
    let a = generator_matrix(&cone.generators);
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut check = |time: f64, kind: &str, inc: Vec<f64>| {
        if inc.iter().all(|v| *v == 0.0) {
            return;
        }
        checked += 1;
        let (_, residual) = nnls(&a, &DVector::from_column_slice(&inc));
        if residual > tol * norm2(&inc).max(1.0) {
            violations.push(IncrementViolation { time, kind: kind.into(), increment: inc, residual });
        }
    };
    let pad = control.pad_value();
    let start: Vec<f64> = control.initial_value().iter().zip(&pad).map(|(a, b)| a - b).collect();
    check(0.0, "jump", start);
    for bp in control.breakpoints() {
        if bp.time > 0.0 {
            let inc = bp.right.iter().zip(bp.left).map(|(a, b)| a - b).collect();
            check(bp.time, "jump", inc);
        }
        if bp.time < control.horizon() {
            check(bp.time, "slope", bp.slope.to_vec());
        }
    }
    Ok(IncrementReport { admissible: violations.is_empty(), checked, violations })
}
