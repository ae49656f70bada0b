//! The two-jump example family on `[0, 2]` in dimension two.
//!
//! `x^n` jumps from `(0, 0)` to `(2, 1)` at `1 - 1/n` and on to `(2, 2)` at `1`;
//! its WM1 limit jumps from `(0, 0)` straight to `(2, 2)` at `1`. Both are
//! componentwise nondecreasing and carry the zero-left pad, so they double as
//! orthant-valued singular controls.
//!
//! Two control problems accompany the family: a two-dimensional relaxation
//! problem driven by it and a one-dimensional mean-reverting equation with a
//! closed-form mean and second moment.

use crate::cadlag::{CadlagPath, PadMode};
use crate::graphrep::ParamRep;
use crate::control::{
    AffineField, ConeSpec, CostCase, CostPolynomial, DiffusionField, Growth, MatrixTable, ProblemSpec, StateSet,
};

pub const HORIZON: f64 = 2.0;

/// Member `n >= 2` of the sequence.
pub fn two_stage_jump(n: u64) -> CadlagPath {
    assert!(n >= 2, "sequence index must be at least 2");
    let first = 1.0 - 1.0 / n as f64;
    CadlagPath::step(
        HORIZON,
        PadMode::ZeroLeft,
        vec![0.0, first, 1.0],
        vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![2.0, 2.0]],
    )
    .expect("valid example path")
}

/// The limit path: a single jump `(0, 0) -> (2, 2)` at `t = 1`.
pub fn single_jump_limit() -> CadlagPath {
    CadlagPath::step(
        HORIZON,
        PadMode::ZeroLeft,
        vec![0.0, 1.0],
        vec![vec![0.0, 0.0], vec![2.0, 2.0]],
    )
    .expect("valid example path")
}

/// Representation of the limit that crosses the jump box through `(2, 1)`,
/// the corner inherited from the sequence: it is the uniform limit of the
/// total-variation representations of `x^n`.
pub fn limit_representation() -> ParamRep {
    ParamRep::new(
        vec![0.0, 1.0 / 6.0, 2.0 / 3.0, 5.0 / 6.0, 1.0],
        vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![2.0, 1.0], vec![2.0, 2.0], vec![2.0, 2.0]],
        vec![0.0, 1.0, 1.0, 1.0, 2.0],
    )
    .expect("valid representation")
}

/// One-dimensional excursion of height one on `[1 - 1/n, 1 + 1/n)`, zero elsewhere on `[0, 2]`.
pub fn shrinking_wiggle(n: u64) -> CadlagPath {
    assert!(n >= 2, "sequence index must be at least 2");
    let h = 1.0 / n as f64;
    CadlagPath::step(
        HORIZON,
        PadMode::ZeroLeft,
        vec![0.0, 1.0 - h, 1.0 + h],
        vec![vec![0.0], vec![1.0], vec![0.0]],
    )
    .expect("valid example path")
}

/// `dX = -0.2 X dt + 0.05 dW + dU` on `[0, 2]` in `R^2`, started at the
/// origin, with running cost `|X|^2 / 4`, control cost `0.1 (dU_1 + dU_2)` and
/// orthant controls.
pub fn relaxation_problem() -> ProblemSpec {
    let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    ProblemSpec {
        d: 2,
        d1: 2,
        d2: 2,
        horizon: HORIZON,
        initial_state: vec![0.0, 0.0],
        drift: AffineField::affine(vec![vec![-0.2, 0.0], vec![0.0, -0.2]], vec![0.0, 0.0], Some(10.0)),
        diffusion: DiffusionField::constant(vec![vec![0.05, 0.0], vec![0.0, 0.05]]),
        k: MatrixTable::constant(id),
        h: MatrixTable::constant(vec![vec![0.1, 0.1]]),
        f: CostPolynomial::norm_power(2, 0.25, 2.0),
        g: CostPolynomial::zero(2),
        state_set: StateSet::default(),
        case: CostCase::C,
        growth: Growth { p: 2.0, p_bar: 3.0, c_f: 0.25, c_g: 0.0, c_g_bar: 0.0, c_h: 0.1, c_k: 1.0 },
        control_cone: ConeSpec::orthant(2),
        state_cone: None,
    }
}

/// `dX = -X dt + dW` on `[0, 1]` from `X(0) = 1`, uncontrolled in effect
/// (orthant cone, zero control), with running cost `X^2`.
pub fn mean_reverting_problem() -> ProblemSpec {
    ProblemSpec {
        d: 1,
        d1: 1,
        d2: 1,
        horizon: 1.0,
        initial_state: vec![1.0],
        drift: AffineField::affine(vec![vec![-1.0]], vec![0.0], None),
        diffusion: DiffusionField::constant(vec![vec![1.0]]),
        k: MatrixTable::constant(vec![vec![1.0]]),
        h: MatrixTable::constant(vec![vec![0.0]]),
        f: CostPolynomial::norm_power(1, 1.0, 2.0),
        g: CostPolynomial::zero(1),
        state_set: StateSet::default(),
        case: CostCase::A,
        growth: Growth { p: 2.0, p_bar: 3.0, c_f: 1.0, c_g: 0.0, c_g_bar: 0.0, c_h: 0.0, c_k: 1.0 },
        control_cone: ConeSpec::orthant(1),
        state_cone: None,
    }
}
