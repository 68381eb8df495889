//! Predicates along segments, the interpolation coefficient `b` and its limit.

use serde::{Deserialize, Serialize};

use super::{band, settle, Check, CheckError, Outcome, Raw, Violation};
use crate::function::FunctionHandle;
use crate::nonsmooth::SubdifferentialEstimate;
use crate::point::{dot, Point, Segment};

/// `m` uniform points `k/(m−1)` covering `[0, 1]`.
pub fn lambda_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..m).map(|k| k as f64 / (m - 1) as f64).collect(),
    }
}

/// [`lambda_grid`] without its endpoints.
pub fn interior_grid(m: usize) -> Vec<f64> {
    lambda_grid(m).into_iter().filter(|l| *l > 0.0 && *l < 1.0).collect()
}

struct Triple {
    fx: f64,
    fy: f64,
    fz: f64,
}

impl Triple {
    fn eval(f: &FunctionHandle, seg: &Segment, lambda: f64) -> Result<Triple, CheckError> {
        let fx = f.eval(seg.x())?;
        let fy = f.eval(seg.y())?;
        let fz = match lambda {
            0.0 => fx,
            1.0 => fy,
            l => f.eval(&seg.point_unchecked(l))?,
        };
        Ok(Triple { fx, fy, fz })
    }

    fn check(&self, seg: &Segment, lambda: f64, (outcome, score): (Outcome, Option<f64>)) -> Check {
        Check {
            x: seg.x().clone(),
            y: seg.y().clone(),
            fx: self.fx,
            fy: self.fy,
            fz: Some(self.fz),
            lambda: Some(lambda),
            outcome,
            score,
        }
    }
}

fn check_lambda(lambda: f64, interior: bool) -> Result<(), CheckError> {
    let ok = if interior { lambda > 0.0 && lambda < 1.0 } else { (0.0..=1.0).contains(&lambda) };
    if ok {
        Ok(())
    } else {
        Err(CheckError::Lambda(lambda))
    }
}

/// `f(z(λ)) ≤ max{f(x), f(y)}` at one `λ`.
pub(crate) fn quasiconvex_at(f: &FunctionHandle, seg: &Segment, lambda: f64) -> Result<Check, CheckError> {
    check_lambda(lambda, false)?;
    let t = Triple::eval(f, seg, lambda)?;
    let top = t.fx.max(t.fy);
    let scale = 1.0 + t.fx.abs() + t.fy.abs();
    let settled = settle(t.fx, t.fy, |e| {
        let excess = t.fz - top;
        let score = Some(excess / scale);
        if excess > e {
            Raw::fail(Violation::new(excess, "f(z) > max{f(x), f(y)}").lambda(lambda), score)
        } else {
            Raw::pass(score)
        }
    });
    Ok(t.check(seg, lambda, settled))
}

/// `f(y) < f(x) ⇒ f(z(λ)) < f(x)` at one interior `λ`.
pub(crate) fn semistrict_at(f: &FunctionHandle, seg: &Segment, lambda: f64) -> Result<Check, CheckError> {
    check_lambda(lambda, true)?;
    let t = Triple::eval(f, seg, lambda)?;
    let d = t.fy - t.fx;
    let settled = settle(t.fx, t.fy, |e| {
        if !(d < -e) {
            return Raw::vacuous(None);
        }
        let score = Some((t.fz - t.fx) / d.abs());
        if t.fz >= t.fx - e {
            let r = -d + (t.fz - t.fx).max(0.0);
            Raw::fail(Violation::new(r, "f(y) < f(x) but f(z) >= f(x)").lambda(lambda), score)
        } else {
            Raw::pass(score)
        }
    });
    Ok(t.check(seg, lambda, settled))
}

/// `f(y) < f(x) ⇒ f(y) < f(z(λ)) < f(x)` at one interior `λ`.
pub(crate) fn interlacing_at(f: &FunctionHandle, seg: &Segment, lambda: f64) -> Result<Check, CheckError> {
    check_lambda(lambda, true)?;
    let t = Triple::eval(f, seg, lambda)?;
    let d = t.fy - t.fx;
    let settled = settle(t.fx, t.fy, |e| {
        if !(d < -e) {
            return Raw::vacuous(None);
        }
        let worst = (t.fy - t.fz).max(t.fz - t.fx);
        let score = Some(worst / d.abs());
        if t.fz <= t.fy + e || t.fz >= t.fx - e {
            let r = -d + worst.max(0.0);
            Raw::fail(Violation::new(r, "f(z) not strictly between f(y) and f(x)").lambda(lambda), score)
        } else {
            Raw::pass(score)
        }
    });
    Ok(t.check(seg, lambda, settled))
}

fn over_grid(
    f: &FunctionHandle,
    seg: &Segment,
    grid: &[f64],
    interior: bool,
    at: fn(&FunctionHandle, &Segment, f64) -> Result<Check, CheckError>,
) -> Result<Check, CheckError> {
    let mut worst: Option<Check> = None;
    for &l in grid {
        if interior && !(l > 0.0 && l < 1.0) {
            continue;
        }
        let c = at(f, seg, l)?;
        if c.outcome.is_fail() {
            return Ok(c);
        }
        let replace = match &worst {
            None => true,
            Some(w) => {
                let (a, b) = (c.outcome.severity(), w.outcome.severity());
                a > b || (a == b && c.score.unwrap_or(f64::NEG_INFINITY) > w.score.unwrap_or(f64::NEG_INFINITY))
            }
        };
        if replace {
            worst = Some(c);
        }
    }
    worst.ok_or(CheckError::Lambda(f64::NAN))
}

/// Quasiconvexity along a segment: fails at the first grid `λ` with
/// `f(z(λ)) > max{f(x), f(y)}`.
pub fn check_quasiconvex_segment(f: &FunctionHandle, seg: &Segment, grid: &[f64]) -> Result<Check, CheckError> {
    over_grid(f, seg, grid, false, quasiconvex_at)
}

/// Semistrict quasiconvexity along `x → y` at the interior grid points.
pub fn check_semistrict_qcvx_segment(f: &FunctionHandle, seg: &Segment, grid: &[f64]) -> Result<Check, CheckError> {
    over_grid(f, seg, grid, true, semistrict_at)
}

/// The interlacing `f(y) < f(z(λ)) < f(x)` at the interior grid points.
pub fn check_interlacing(f: &FunctionHandle, seg: &Segment, grid: &[f64]) -> Result<Check, CheckError> {
    over_grid(f, seg, grid, true, interlacing_at)
}

/// Where `λb` falls relative to `(0, 1)`, with band margins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BClass {
    /// `0 < λb < 1`.
    Strict,
    /// `λb = 1` within the band: weak holds, strict does not.
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRecord {
    pub x: Point,
    pub y: Point,
    pub lambda: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub b: f64,
    pub lambda_b: f64,
    pub strict: bool,
    pub weak: bool,
    pub class: BClass,
    /// `f(y) = f(x)` within the band, so `b = 1` by convention.
    pub degenerate: bool,
}

fn classify_lb(lambda_b: f64, delta: f64) -> BClass {
    if lambda_b > delta && lambda_b < 1.0 - delta {
        BClass::Strict
    } else if (lambda_b - 1.0).abs() <= delta {
        BClass::Boundary
    } else {
        BClass::Outside
    }
}

/// `b = (f(z(λ)) − f(x)) / (λ(f(y) − f(x)))`, or 1 when the endpoint values
/// agree within the band.
pub fn compute_b(f: &FunctionHandle, x: &Point, y: &Point, lambda: f64) -> Result<BRecord, CheckError> {
    check_lambda(lambda, true)?;
    let seg = Segment::new(x.clone(), y.clone()).map_err(|_| CheckError::EqualValues)?;
    let t = Triple::eval(f, &seg, lambda)?;
    Ok(b_record(x, y, lambda, &t, band(t.fx, t.fy)))
}

fn b_record(x: &Point, y: &Point, lambda: f64, t: &Triple, eps: f64) -> BRecord {
    let d = t.fy - t.fx;
    let degenerate = d.abs() <= eps;
    let (b, delta) = if degenerate { (1.0, 0.0) } else { ((t.fz - t.fx) / (lambda * d), eps / d.abs()) };
    let lambda_b = lambda * b;
    let class = classify_lb(lambda_b, delta);
    BRecord {
        x: x.clone(),
        y: y.clone(),
        lambda,
        fx: t.fx,
        fy: t.fy,
        fz: t.fz,
        b,
        lambda_b,
        strict: class == BClass::Strict,
        weak: class != BClass::Outside,
        class,
        degenerate,
    }
}

/// Which bound on `b` to require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BBound {
    /// `0 < b ≤ 1/λ`.
    Weak,
    /// `0 < λb < 1`.
    Strict,
}

pub(crate) fn b_bound_at(f: &FunctionHandle, seg: &Segment, lambda: f64, bound: BBound) -> Result<Check, CheckError> {
    check_lambda(lambda, true)?;
    let t = Triple::eval(f, seg, lambda)?;
    let d = t.fy - t.fx;
    let settled = settle(t.fx, t.fy, |e| {
        if d.abs() <= e {
            return Raw::vacuous(None);
        }
        let r = b_record(seg.x(), seg.y(), lambda, &t, e);
        let score = Some((-r.lambda_b).max(r.lambda_b - 1.0));
        let ok = match bound {
            BBound::Weak => r.weak,
            BBound::Strict => r.strict,
        };
        if ok {
            return Raw::pass(score);
        }
        let lb = r.lambda_b;
        let (residual, relation) = if lb > 0.5 {
            match bound {
                BBound::Weak => (d.abs() * (lb - 1.0), "b > 1/lambda"),
                BBound::Strict => (d.abs() * (1.0 + (lb - 1.0).max(0.0)), "lambda b >= 1"),
            }
        } else {
            (d.abs() * (1.0 + (-lb).max(0.0)), "b <= 0")
        };
        Raw::fail(Violation::new(residual, relation).lambda(lambda), score)
    });
    Ok(t.check(seg, lambda, settled))
}

/// Checks the weak or strict bound on `b(x, y, λ)`. Pairs with equal values
/// are vacuous.
pub fn check_b_bounds(f: &FunctionHandle, x: &Point, y: &Point, lambda: f64, bound: BBound) -> Result<Check, CheckError> {
    let seg = Segment::new(x.clone(), y.clone()).map_err(|_| CheckError::EqualValues)?;
    b_bound_at(f, &seg, lambda, bound)
}

/// `b` recomputed from the subgradients at `z(λ)` through `q = 1/p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub outcome: Outcome,
    pub b_direct: f64,
    /// One value per generator of `∂f(z(λ))`.
    pub b_via: Vec<f64>,
    /// Largest `|b_via − b_direct| / (1 + |b_direct|)`, and generator spread on the same scale.
    pub max_rel_err: f64,
}

/// [`cross_check_b_with_tolerance`] at tolerance `1e-6`.
pub fn cross_check_b_via_subdifferential(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    lambda: f64,
    sub_z: &SubdifferentialEstimate,
) -> Result<CrossCheck, CheckError> {
    cross_check_b_with_tolerance(f, x, y, lambda, sub_z, 1e-6)
}

/// `b = q(z,y,ξ) / (λ q(z,y,ξ) + (1 − λ) q(z,x,ξ))` for each generator `ξ`,
/// compared with [`compute_b`] at relative tolerance `tol`.
pub fn cross_check_b_with_tolerance(
    f: &FunctionHandle,
    x: &Point,
    y: &Point,
    lambda: f64,
    sub_z: &SubdifferentialEstimate,
    tol: f64,
) -> Result<CrossCheck, CheckError> {
    let rec = compute_b(f, x, y, lambda)?;
    let (fx, fy, fz) = (rec.fx, rec.fy, rec.fz);
    let inconclusive = |reason: &str, b_via: Vec<f64>| CrossCheck {
        outcome: Outcome::Inconclusive { reason: reason.to_string() },
        b_direct: rec.b,
        b_via,
        max_rel_err: 0.0,
    };
    let eps = band(fx, fy).max(band(fz, fx)).max(band(fz, fy));
    if (fy - fx).abs() <= eps || (fz - fx).abs() <= eps || (fz - fy).abs() <= eps {
        return Ok(inconclusive("function values within the equality band", Vec::new()));
    }
    let dir = y.sub(x);
    let mut b_via = Vec::with_capacity(sub_z.generators.len());
    for xi in &sub_z.generators {
        let inner = dot(xi, &dir);
        if inner.abs() <= eps {
            return Ok(inconclusive("q undefined: <xi, y - x> within the band", b_via));
        }
        let q_x = -lambda * inner / (fx - fz);
        let q_y = (1.0 - lambda) * inner / (fy - fz);
        if !(q_x > 0.0 && q_y > 0.0) {
            return Ok(inconclusive("q undefined: p(z, ., xi) is not positive", b_via));
        }
        b_via.push(q_y / (lambda * q_y + (1.0 - lambda) * q_x));
    }
    let scale = 1.0 + rec.b.abs();
    let mut err: f64 = 0.0;
    for (i, v) in b_via.iter().enumerate() {
        err = err.max((v - rec.b).abs() / scale);
        for w in &b_via[i + 1..] {
            err = err.max((v - w).abs() / scale);
        }
    }
    let outcome = if err <= tol {
        Outcome::Pass
    } else {
        Outcome::Fail(Violation::new(err * scale, "b via q differs from b").lambda(lambda))
    };
    Ok(CrossCheck { outcome, b_direct: rec.b, b_via, max_rel_err: err })
}

/// Default λ schedule for [`estimate_q_limit`].
pub const DEFAULT_Q_SCHEDULE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLimit {
    pub estimate: f64,
    /// Successive `b` values contract toward the limit.
    pub converged: bool,
    /// `⟨∇f(x), y − x⟩ / (f(y) − f(x))` when a smooth gradient is available.
    pub closed_form: Option<f64>,
    /// `(λ, b(x, y, λ))` over the schedule.
    pub samples: Vec<(f64, f64)>,
}

/// Polynomial (Neville) extrapolation of `b(x, y, λ)` to `λ = 0`.
pub fn estimate_q_limit(f: &FunctionHandle, x: &Point, y: &Point, schedule: &[f64]) -> Result<QLimit, CheckError> {
    if schedule.is_empty() {
        return Err(CheckError::Lambda(f64::NAN));
    }
    let mut samples = Vec::with_capacity(schedule.len());
    for &l in schedule {
        let r = compute_b(f, x, y, l)?;
        if r.degenerate {
            return Err(CheckError::EqualValues);
        }
        samples.push((l, r.b));
    }
    // Neville tableau evaluated at 0
    let mut t: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let lam: Vec<f64> = samples.iter().map(|s| s.0).collect();
    for k in 1..t.len() {
        for i in (k..t.len()).rev() {
            let (li, lk) = (lam[i], lam[i - k]);
            t[i] = (li * t[i - 1] - lk * t[i]) / (li - lk);
        }
    }
    let estimate = *t.last().expect("nonempty");

    let b0 = samples.last().expect("nonempty").1;
    let floor = 1e-9 * (1.0 + b0.abs());
    let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    let converged = diffs.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);

    let closed_form = match f.gradient(x) {
        Some(Ok(g)) if !g.at_kink => {
            let fx = f.eval(x)?;
            let fy = f.eval(y)?;
            Some(dot(&g.grad, &y.sub(x)) / (fy - fx))
        }
        _ => None,
    };
    Ok(QLimit { estimate, converged, closed_form, samples })
}
