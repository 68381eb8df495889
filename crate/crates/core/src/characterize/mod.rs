//! Executable predicates for pseudo-, quasi- and semistrict quasi-convexity
//! and the characterizations of pseudolinearity.
//!
//! Every comparison is made against the band
//! `ε = 1e-7·(1 + |f(x)| + |f(y)|)`. A predicate is evaluated at `ε/10`, `ε`
//! and `10ε`; it fails only when it fails at all three, and is reported
//! inconclusive when the verdict flips inside that range. Consequently every
//! reported residual exceeds `10ε`.
//!
//! Quantifiers over `∂f(x)` range over the estimate's generators. All
//! predicates are affine in the subgradient, so holding on the generators is
//! the same as holding on their convex hull.

mod pairs;
mod segments;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::EvalError;
use crate::point::Point;

pub use pairs::{
    check_gradient_kernel, check_pseudoconvex_pair, check_subdiff_kernel_pair, check_symmetric_equality,
    check_symmetric_inequality, check_weak_monotone_pair, compute_p, project_onto_kernel, verify_p_identity,
    KernelCheck, PValue,
};
pub use segments::{
    check_b_bounds, check_interlacing, check_quasiconvex_segment, check_semistrict_qcvx_segment, compute_b,
    cross_check_b_via_subdifferential, cross_check_b_with_tolerance, estimate_q_limit, interior_grid,
    lambda_grid, BBound, BClass, BRecord, CrossCheck, QLimit, DEFAULT_Q_SCHEDULE,
};
pub(crate) use segments::{b_bound_at, interlacing_at, quasiconvex_at, semistrict_at};

/// Ratio between the outer and middle bands.
pub const HYSTERESIS: f64 = 10.0;

/// The equality band / strict margin for a pair of values.
pub fn band(fx: f64, fy: f64) -> f64 {
    1e-7 * (1.0 + fx.abs() + fy.abs())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("f(x) and f(y) are within the equality band")]
    EqualValues,
    #[error("no smooth gradient at x; use the subdifferential kernel check")]
    NotSmooth,
    #[error("lambda {0} outside (0, 1)")]
    Lambda(f64),
}

/// A decisive violation of an implication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub relation: String,
}

impl Violation {
    pub(crate) fn new(residual: f64, relation: &str) -> Self {
        Violation { residual, generator: None, generator_y: None, lambda: None, relation: relation.to_string() }
    }

    pub(crate) fn generator(mut self, i: usize) -> Self {
        self.generator = Some(i);
        self
    }

    pub(crate) fn generator_y(mut self, j: usize) -> Self {
        self.generator_y = Some(j);
        self
    }

    pub(crate) fn lambda(mut self, l: f64) -> Self {
        self.lambda = Some(l);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    /// The antecedent of the implication did not hold.
    Vacuous,
    Inconclusive { reason: String },
    Fail(Violation),
}

impl Outcome {
    pub fn is_fail(&self) -> bool {
        matches!(self, Outcome::Fail(_))
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Outcome::Pass)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Outcome::Fail(v) => Some(v),
            _ => None,
        }
    }

    /// Fail beats inconclusive beats pass beats vacuous.
    pub(crate) fn severity(&self) -> u8 {
        match self {
            Outcome::Vacuous => 0,
            Outcome::Pass => 1,
            Outcome::Inconclusive { .. } => 2,
            Outcome::Fail(_) => 3,
        }
    }

    pub(crate) fn worst(a: Outcome, b: Outcome) -> Outcome {
        if b.severity() > a.severity() {
            b
        } else {
            a
        }
    }
}

/// Result of one predicate evaluation.
///
/// `score` is a continuous measure of how close the sample is to violating
/// the predicate (larger is closer; values near 0 sit on the boundary). It
/// guides counterexample refinement and is `None` when the antecedent is far
/// from holding.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub x: Point,
    pub y: Point,
    pub fx: f64,
    pub fy: f64,
    pub fz: Option<f64>,
    pub lambda: Option<f64>,
    pub outcome: Outcome,
    pub score: Option<f64>,
}

/// The outcome of a predicate at one band value.
pub(crate) struct Raw {
    pub kind: RawKind,
    pub score: Option<f64>,
}

pub(crate) enum RawKind {
    Pass,
    Vacuous,
    Fail(Violation),
}

impl Raw {
    pub fn pass(score: Option<f64>) -> Raw {
        Raw { kind: RawKind::Pass, score }
    }
    pub fn vacuous(score: Option<f64>) -> Raw {
        Raw { kind: RawKind::Vacuous, score }
    }
    pub fn fail(v: Violation, score: Option<f64>) -> Raw {
        Raw { kind: RawKind::Fail(v), score }
    }
}

/// Applies the hysteresis rule to a predicate parameterized by its band.
///
/// The predicate is evaluated at `ε/10`, `ε` and `10ε` with `ε = band(fx, fy)`.
/// A failure must also persist at the scale-relative band
/// `1e-7·(|f(x)| + |f(y)|)` when that is finer: near-flat stretches where
/// every value is far below the absolute band (x³ around 0) would otherwise
/// produce ties that are artifacts of the band, not of the function.
pub(crate) fn settle(fx: f64, fy: f64, mut eval: impl FnMut(f64) -> Raw) -> (Outcome, Option<f64>) {
    let eps = band(fx, fy);
    let lo = eval(eps / HYSTERESIS);
    let mid = eval(eps);
    let hi = eval(eps * HYSTERESIS);
    let fails = [&lo, &mid, &hi].iter().filter(|r| matches!(r.kind, RawKind::Fail(_))).count();
    let flip = || Outcome::Inconclusive { reason: "verdict flips within the hysteresis band".into() };
    let outcome = match (fails, mid.kind) {
        (3, RawKind::Fail(v)) => {
            let fine = 1e-7 * (fx.abs() + fy.abs());
            if fine < eps / HYSTERESIS && !matches!(eval(fine).kind, RawKind::Fail(_)) {
                Outcome::Inconclusive { reason: "violation vanishes at the scale-relative band".into() }
            } else {
                Outcome::Fail(v)
            }
        }
        (0, RawKind::Pass) => Outcome::Pass,
        (0, RawKind::Vacuous) => Outcome::Vacuous,
        _ => flip(),
    };
    (outcome, mid.score)
}
