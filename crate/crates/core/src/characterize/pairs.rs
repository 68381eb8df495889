//! Predicates on point pairs and subgradients.

use super::{band, settle, Check, CheckError, Outcome, Raw, Violation};
use crate::function::FunctionHandle;
use crate::nonsmooth::SubdifferentialEstimate;
use crate::point::{dot, norm, Point};
use crate::region::Region;

struct Pair {
    fx: f64,
    fy: f64,
    dir: Vec<f64>,
}

impl Pair {
    fn new(f: &FunctionHandle, x: &Point, y: &Point) -> Result<Pair, CheckError> {
        Ok(Pair { fx: f.eval(x)?, fy: f.eval(y)?, dir: y.sub(x) })
    }

    fn d(&self) -> f64 {
        self.fy - self.fx
    }

    fn check(self, x: &Point, y: &Point, (outcome, score): (Outcome, Option<f64>)) -> Check {
        Check { x: x.clone(), y: y.clone(), fx: self.fx, fy: self.fy, fz: None, lambda: None, outcome, score }
    }
}

fn max_opt(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.max(v)))
}

/// `f(y) < f(x) ⇒ ⟨x*, y − x⟩ < 0` for every generator `x*` of `∂f(x)`.
pub fn check_pseudoconvex_pair(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
) -> Result<Check, CheckError> {
    let pair = Pair::new(f, x, y)?;
    let d = pair.d();
    let settled = settle(pair.fx, pair.fy, |e| {
        if !(d < -e) {
            return Raw::vacuous(None);
        }
        let mut score = None;
        let mut fail = None;
        for (i, g) in sub_x.generators.iter().enumerate() {
            let ip = dot(g, &pair.dir);
            score = max_opt(score, ip / d.abs());
            if fail.is_none() && ip >= -e {
                fail = Some(Violation::new(-d, "f(y) < f(x) but <x*, y - x> >= 0").generator(i));
            }
        }
        match fail {
            Some(v) => Raw::fail(v, score),
            None => Raw::pass(score),
        }
    });
    Ok(pair.check(x, y, settled))
}

/// `f(y) ≤ f(x) ⇒ ⟨x*, y − x⟩ ≤ 0` for every generator.
pub fn check_weak_monotone_pair(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
) -> Result<Check, CheckError> {
    let pair = Pair::new(f, x, y)?;
    let d = pair.d();
    let scale = 1.0 + pair.fx.abs() + pair.fy.abs();
    let settled = settle(pair.fx, pair.fy, |e| {
        if d > e {
            return Raw::vacuous(None);
        }
        let mut score = None;
        let mut fail = None;
        for (i, g) in sub_x.generators.iter().enumerate() {
            let ip = dot(g, &pair.dir);
            score = max_opt(score, ip / scale);
            if fail.is_none() && ip > e {
                fail = Some(Violation::new(ip, "f(y) <= f(x) but <x*, y - x> > 0").generator(i));
            }
        }
        match fail {
            Some(v) => Raw::fail(v, score),
            None => Raw::pass(score),
        }
    });
    Ok(pair.check(x, y, settled))
}

/// The proportional function `p(x, y, x*)` built from a single subgradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub p: f64,
    /// `⟨x*, y − x⟩`.
    pub inner: f64,
    /// `⟨x*, y − x⟩` fell inside the band, so `p = 1` by convention.
    pub band_case: bool,
    /// `p > 0`; a nonpositive `p` refutes pseudolinearity.
    pub valid: bool,
}

pub(crate) fn p_value(d: f64, inner: f64, eps: f64) -> PValue {
    let band_case = inner.abs() <= eps;
    let p = if band_case { 1.0 } else { d / inner };
    PValue { p, inner, band_case, valid: p > 0.0 }
}

/// `p = (f(y) − f(x)) / ⟨x*, y − x⟩`, or 1 when the inner product is in the band.
pub fn compute_p(f: &FunctionHandle, x: &Point, y: &Point, generator: &[f64]) -> Result<PValue, CheckError> {
    let pair = Pair::new(f, x, y)?;
    Ok(p_value(pair.d(), dot(generator, &pair.dir), band(pair.fx, pair.fy)))
}

/// How close `p` is to breaking down: the inner product vanishing while the
/// values differ, or the two having opposite signs.
fn p_score(d: f64, inner: f64, e: f64) -> f64 {
    let r = inner.abs() / (d.abs() + e);
    if inner * d > 0.0 {
        -r
    } else {
        r
    }
}

/// `f(y) − f(x) = p(x, y, x*)·⟨x*, y − x⟩` with `p > 0`, for every generator.
pub fn verify_p_identity(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
) -> Result<Check, CheckError> {
    let pair = Pair::new(f, x, y)?;
    let d = pair.d();
    let settled = settle(pair.fx, pair.fy, |e| {
        let mut score = None;
        let mut fail = None;
        for (i, g) in sub_x.generators.iter().enumerate() {
            let pv = p_value(d, dot(g, &pair.dir), e);
            score = max_opt(score, p_score(d, pv.inner, e));
            if fail.is_some() {
                continue;
            }
            let r = (d - pv.p * pv.inner).abs();
            if !pv.valid {
                fail = Some(Violation::new(pv.inner.abs() + d.abs(), "p(x, y, x*) <= 0").generator(i));
            } else if r > e {
                fail = Some(Violation::new(r, "f(y) - f(x) != p <x*, y - x>").generator(i));
            }
        }
        match fail {
            Some(v) => Raw::fail(v, score),
            None => Raw::pass(score),
        }
    });
    Ok(pair.check(x, y, settled))
}

fn symmetric(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
    sub_y: &SubdifferentialEstimate,
    equality: bool,
) -> Result<Check, CheckError> {
    let pair = Pair::new(f, x, y)?;
    let d = pair.d();
    let back: Vec<f64> = pair.dir.iter().map(|v| -v).collect();
    let scale = 1.0 + pair.fx.abs() + pair.fy.abs();
    let settled = settle(pair.fx, pair.fy, |e| {
        let mut score = None;
        let mut fail = None;
        for (i, gx) in sub_x.generators.iter().enumerate() {
            let px = p_value(d, dot(gx, &pair.dir), e);
            for (j, gy) in sub_y.generators.iter().enumerate() {
                let py = p_value(-d, dot(gy, &back), e);
                if equality {
                    score = max_opt(score, p_score(d, px.inner, e).max(p_score(-d, py.inner, e)));
                    if fail.is_some() {
                        continue;
                    }
                    if !px.valid || !py.valid {
                        let bad = if px.valid { py.inner } else { px.inner };
                        fail = Some(
                            Violation::new(bad.abs() + d.abs(), "p <= 0 in symmetric equality")
                                .generator(i)
                                .generator_y(j),
                        );
                        continue;
                    }
                    let s = px.p * px.inner + py.p * py.inner;
                    if s.abs() > e {
                        fail = Some(
                            Violation::new(s.abs(), "p(x,y,x*)<x*,y-x> + p(y,x,y*)<y*,x-y> != 0")
                                .generator(i)
                                .generator_y(j),
                        );
                    }
                } else {
                    // constructed p where positive, p = 1 otherwise
                    let wx = if px.valid { px.p } else { 1.0 };
                    let wy = if py.valid { py.p } else { 1.0 };
                    let s = wx * px.inner + wy * py.inner;
                    score = max_opt(score, s / scale);
                    if fail.is_none() && s > e {
                        fail = Some(
                            Violation::new(s, "p(x,y,x*)<x*,y-x> + p(y,x,y*)<y*,x-y> > 0")
                                .generator(i)
                                .generator_y(j),
                        );
                    }
                }
            }
        }
        match fail {
            Some(v) => Raw::fail(v, score),
            None => Raw::pass(score),
        }
    });
    Ok(pair.check(x, y, settled))
}

/// `p(x,y,x*)⟨x*,y−x⟩ + p(y,x,y*)⟨y*,x−y⟩ = 0` over all generator pairs,
/// with `p` from [`compute_p`] required positive.
pub fn check_symmetric_equality(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
    sub_y: &SubdifferentialEstimate,
) -> Result<Check, CheckError> {
    symmetric(f, x, y, sub_x, sub_y, true)
}

/// The same sum required `≤ 0`. The existential `p` is replaced by the
/// constructed one (or 1 where that is not positive), so a pass is only
/// consistent with pseudoconvexity.
pub fn check_symmetric_inequality(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
    sub_y: &SubdifferentialEstimate,
) -> Result<Check, CheckError> {
    symmetric(f, x, y, sub_x, sub_y, false)
}

fn kernel_score(d: f64, inner: f64, e: f64) -> f64 {
    -inner.abs() / (d.abs() + e)
}

/// `⟨∇f(x), y − x⟩ = 0 ⇒ f(y) = f(x)` for a smooth gradient.
pub fn check_gradient_kernel(f: &FunctionHandle, x: &Point, y: &Point, grad: &[f64]) -> Result<Check, CheckError> {
    let pair = Pair::new(f, x, y)?;
    let d = pair.d();
    let inner = dot(grad, &pair.dir);
    let settled = settle(pair.fx, pair.fy, |e| {
        let score = Some(kernel_score(d, inner, e));
        if inner.abs() > e {
            Raw::vacuous(score)
        } else if d.abs() > e {
            Raw::fail(Violation::new(d.abs(), "<grad f(x), y - x> = 0 but f(y) != f(x)"), score)
        } else {
            Raw::pass(score)
        }
    });
    Ok(pair.check(x, y, settled))
}

/// Moves `y` onto the hyperplane `⟨grad, · − x⟩ = 0`, pulling it toward `x`
/// until it lies inside the region's margin. `None` if it collapses onto `x`.
pub fn project_onto_kernel(region: &Region, x: &Point, grad: &[f64], y: &Point) -> Option<Point> {
    let gg = dot(grad, grad);
    let dir = y.sub(x);
    let coef = if gg > 0.0 { dot(grad, &dir) / gg } else { 0.0 };
    let tangent: Vec<f64> = dir.iter().zip(grad).map(|(v, g)| v - coef * g).collect();
    if norm(&tangent) < 1e-9 {
        return None;
    }
    let mut s = 1.0;
    for _ in 0..40 {
        let cand: Vec<f64> = x.coords().iter().zip(&tangent).map(|(a, t)| a + s * t).collect();
        if region.contains_with_margin(&cand) {
            if s * norm(&tangent) < 1e-9 {
                return None;
            }
            return Point::new(cand).ok();
        }
        s *= 0.5;
    }
    None
}

/// Both halves of the subdifferential kernel condition.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheck {
    /// `⟨ξ, y − x⟩ = 0, ξ ∈ ∂f(x) ⇒ f(y) ≥ f(x)`.
    pub lower: Check,
    /// `⟨η, y − x⟩ = 0, η ∈ ∂(−f)(x) ⇒ f(y) ≤ f(x)`.
    pub upper: Check,
    pub combined: Outcome,
}

/// The kernel conditions for a locally Lipschitz `f`; `∂(−f)(x)` is taken
/// as the negated generators of `∂f(x)`.
pub fn check_subdiff_kernel_pair(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    sub_x: &SubdifferentialEstimate,
) -> Result<KernelCheck, CheckError> {
    let neg = sub_x.negated();
    let half = |gens: &SubdifferentialEstimate, upper: bool| -> Result<Check, CheckError> {
        let pair = Pair::new(f, x, y)?;
        let d = pair.d();
        let settled = settle(pair.fx, pair.fy, |e| {
            let mut score = None;
            let mut fail = None;
            let mut active = false;
            for (i, g) in gens.generators.iter().enumerate() {
                let inner = dot(g, &pair.dir);
                score = max_opt(score, kernel_score(d, inner, e));
                if inner.abs() > e {
                    continue;
                }
                active = true;
                let violated = if upper { d > e } else { d < -e };
                if fail.is_none() && violated {
                    let rel = if upper {
                        "<eta, y - x> = 0 for eta in d(-f)(x) but f(y) > f(x)"
                    } else {
                        "<xi, y - x> = 0 for xi in df(x) but f(y) < f(x)"
                    };
                    fail = Some(Violation::new(d.abs(), rel).generator(i));
                }
            }
            match (fail, active) {
                (Some(v), _) => Raw::fail(v, score),
                (None, true) => Raw::pass(score),
                (None, false) => Raw::vacuous(score),
            }
        });
        Ok(pair.check(x, y, settled))
    };
    let lower = half(sub_x, false)?;
    let upper = half(&neg, true)?;
    let combined = Outcome::worst(lower.outcome.clone(), upper.outcome.clone());
    Ok(KernelCheck { lower, upper, combined })
}
