use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CampaignError, SamplingPlan, Witness};
use crate::characterize::{
    b_bound_at, check_gradient_kernel, check_pseudoconvex_pair, check_subdiff_kernel_pair, check_symmetric_equality,
    interior_grid, interlacing_at, quasiconvex_at, semistrict_at, verify_p_identity, BBound, Check,
};
use crate::function::FunctionHandle;
use crate::nonsmooth::{clarke_directional, subdifferential, SubdifferentialEstimate};
use crate::point::{dot, Point, Segment};
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    /// `f(y) < f(x) ⇒ ⟨x*, y − x⟩ < 0`.
    PseudoconvexPair,
    /// `f(y) − f(x) = p⟨x*, y − x⟩`, `p > 0`.
    PIdentity,
    SymmetricEquality,
    /// `0 < b ≤ 1/λ`.
    WeakB,
    /// `0 < λb < 1`.
    StrictB,
    GradientKernel,
    SubdiffKernel,
    QuasiconvexSegment,
    SemistrictSegment,
    Interlacing,
}

impl PredicateKind {
    pub fn on_segment(self) -> bool {
        use PredicateKind::*;
        matches!(self, WeakB | StrictB | QuasiconvexSegment | SemistrictSegment | Interlacing)
    }

    pub fn name(self) -> &'static str {
        use PredicateKind::*;
        match self {
            PseudoconvexPair => "pseudoconvex-pair",
            PIdentity => "p-identity",
            SymmetricEquality => "symmetric-equality",
            WeakB => "weak-b",
            StrictB => "strict-b",
            GradientKernel => "gradient-kernel",
            SubdiffKernel => "subdiff-kernel",
            QuasiconvexSegment => "quasiconvex-segment",
            SemistrictSegment => "semistrict-segment",
            Interlacing => "interlacing",
        }
    }
}

/// One concrete predicate instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub kind: PredicateKind,
    /// Evaluate on `−f` (with the negated subdifferential).
    pub negated: bool,
    pub x: Point,
    pub y: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Probe {
    pub(crate) fn key(&self) -> (PredicateKind, bool, Vec<u64>, Vec<u64>, u64) {
        let bits = |p: &Point| p.coords().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        (self.kind, self.negated, bits(&self.x), bits(&self.y), self.lambda.map_or(0, f64::to_bits))
    }
}

/// A predicate evaluation with the generators it refers to resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub check: Check,
    pub generator: Option<Vec<f64>>,
    pub generator_y: Option<Vec<f64>>,
    pub seed_x: u64,
    pub seed_y: u64,
}

impl ProbeResult {
    pub(crate) fn witness(&self, probe: &Probe, refined: bool) -> Option<Witness> {
        let v = self.check.outcome.violation()?;
        Some(Witness {
            predicate: probe.kind,
            negated: probe.negated,
            x: probe.x.clone(),
            y: probe.y.clone(),
            lambda: probe.lambda,
            generator: self.generator.clone(),
            generator_y: self.generator_y.clone(),
            fx: self.check.fx,
            fy: self.check.fy,
            fz: self.check.fz,
            relation: v.relation.clone(),
            residual: v.residual,
            subdiff_seed_x: self.seed_x,
            subdiff_seed_y: self.seed_y,
            refined,
        })
    }
}

/// Seed of the subdifferential estimate at `p`: FNV-1a over the plan seed
/// and the coordinate bits, so the estimate at a point never depends on
/// which sample asked for it.
pub fn subdiff_seed(seed: u64, p: &Point) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for word in std::iter::once(seed).chain(p.coords().iter().map(|v| v.to_bits())) {
        for byte in word.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

pub(crate) struct Context<'a> {
    pub f: &'a FunctionHandle,
    pub neg: FunctionHandle,
    pub region: &'a Region,
    pub plan: &'a SamplingPlan,
    pub grid: Vec<f64>,
}

impl<'a> Context<'a> {
    pub fn new(f: &'a FunctionHandle, region: &'a Region, plan: &'a SamplingPlan) -> Self {
        Context { f, neg: f.negated(), region, plan, grid: interior_grid(plan.lambda_grid) }
    }
}

/// Relative tolerance between the support function of a kink estimate and
/// the Clarke directional derivative along coordinate directions.
const SUPPORT_TOL: f64 = 5e-2;

/// Subdifferential estimates of `f` keyed by point.
#[derive(Default)]
pub(crate) struct SubCache {
    entries: HashMap<Vec<u64>, Result<SubdifferentialEstimate, String>>,
}

impl SubCache {
    pub fn get(&mut self, ctx: &Context, p: &Point) -> Result<SubdifferentialEstimate, String> {
        let key: Vec<u64> = p.coords().iter().map(|v| v.to_bits()).collect();
        self.entries.entry(key).or_insert_with(|| estimate(ctx, p)).clone()
    }
}

fn estimate(ctx: &Context, p: &Point) -> Result<SubdifferentialEstimate, String> {
    let seed = subdiff_seed(ctx.plan.seed, p);
    let est = subdifferential(
        ctx.f,
        ctx.region,
        p,
        ctx.plan.subdiff_radius,
        ctx.plan.subdiff_count_for(p.dim()),
        seed,
    )
    .map_err(|e| e.to_string())?;
    if est.at_kink {
        support_matches_clarke(ctx, p, &est, seed)?;
    }
    Ok(est)
}

/// At a kink, `max_ξ ⟨ξ, v⟩` over the generators must reproduce `f⁰(x; v)`
/// along every `±e_i`; otherwise the generator set is not trusted.
fn support_matches_clarke(
    ctx: &Context,
    p: &Point,
    est: &SubdifferentialEstimate,
    seed: u64,
) -> Result<(), String> {
    for i in 0..p.dim() {
        for (s, sign) in [(0u64, 1.0), (1, -1.0)] {
            let mut v = vec![0.0; p.dim()];
            v[i] = sign;
            let scheme = ctx.plan.clarke_scheme(seed ^ ((2 * i as u64 + s + 1) << 48));
            let Ok(f0) = clarke_directional(ctx.f, ctx.region, p, &v, &scheme) else {
                continue;
            };
            let support = est.generators.iter().map(|g| dot(g, &v)).fold(f64::NEG_INFINITY, f64::max);
            if (support - f0).abs() > SUPPORT_TOL * (1.0 + f0.abs()) {
                return Err(format!(
                    "generator support {support} disagrees with Clarke derivative {f0} along direction {i}"
                ));
            }
        }
    }
    Ok(())
}

fn segment(probe: &Probe) -> Result<(Segment, f64), String> {
    let lambda = probe.lambda.ok_or("segment predicate without lambda")?;
    let seg = Segment::new(probe.x.clone(), probe.y.clone()).map_err(|e| e.to_string())?;
    Ok((seg, lambda))
}

pub(crate) fn eval_in(ctx: &Context, probe: &Probe, cache: &mut SubCache) -> Result<ProbeResult, String> {
    use PredicateKind::*;
    let h = if probe.negated { &ctx.neg } else { ctx.f };
    let (x, y) = (&probe.x, &probe.y);
    let sign = |e: SubdifferentialEstimate| if probe.negated { e.negated() } else { e };
    let seed_x = subdiff_seed(ctx.plan.seed, x);
    let seed_y = subdiff_seed(ctx.plan.seed, y);
    let err = |e: crate::characterize::CheckError| e.to_string();
    let mut sx = None;
    let mut sy = None;
    let check = match probe.kind {
        PseudoconvexPair | PIdentity | GradientKernel | SubdiffKernel | SymmetricEquality => {
            let ex = sign(cache.get(ctx, x)?);
            let c = match probe.kind {
                PseudoconvexPair => check_pseudoconvex_pair(h, x, y, &ex).map_err(err)?,
                PIdentity => verify_p_identity(h, x, y, &ex).map_err(err)?,
                GradientKernel => {
                    if ex.at_kink || !h.has_gradient() {
                        return Err("no smooth gradient at x".into());
                    }
                    check_gradient_kernel(h, x, y, &ex.generators[0]).map_err(err)?
                }
                SubdiffKernel => {
                    let k = check_subdiff_kernel_pair(h, x, y, &ex).map_err(err)?;
                    let half = if k.upper.outcome.severity() > k.lower.outcome.severity() {
                        k.upper.clone()
                    } else {
                        k.lower.clone()
                    };
                    let score = match (k.lower.score, k.upper.score) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        (a, b) => a.or(b),
                    };
                    Check { outcome: k.combined, score, ..half }
                }
                _ => {
                    let ey = sign(cache.get(ctx, y)?);
                    let c = check_symmetric_equality(h, x, y, &ex, &ey).map_err(err)?;
                    sy = Some(ey);
                    c
                }
            };
            sx = Some(ex);
            c
        }
        WeakB | StrictB => {
            let (seg, l) = segment(probe)?;
            let bound = if probe.kind == WeakB { BBound::Weak } else { BBound::Strict };
            b_bound_at(h, &seg, l, bound).map_err(err)?
        }
        QuasiconvexSegment => {
            let (seg, l) = segment(probe)?;
            quasiconvex_at(h, &seg, l).map_err(err)?
        }
        SemistrictSegment => {
            let (seg, l) = segment(probe)?;
            semistrict_at(h, &seg, l).map_err(err)?
        }
        Interlacing => {
            let (seg, l) = segment(probe)?;
            interlacing_at(h, &seg, l).map_err(err)?
        }
    };
    let pick = |est: &Option<SubdifferentialEstimate>, idx: Option<usize>| {
        est.as_ref().zip(idx).and_then(|(e, i)| e.generators.get(i).cloned())
    };
    let (generator, generator_y) = match check.outcome.violation() {
        Some(v) => (pick(&sx, v.generator), pick(&sy, v.generator_y)),
        None => (None, None),
    };
    Ok(ProbeResult { check, generator, generator_y, seed_x, seed_y })
}

/// Evaluates one predicate instance exactly as the campaign does.
pub fn evaluate_probe(
    f: &FunctionHandle,
    region: &Region,
    plan: &SamplingPlan,
    probe: &Probe,
) -> Result<ProbeResult, CampaignError> {
    let ctx = Context::new(f, region, plan);
    eval_in(&ctx, probe, &mut SubCache::default()).map_err(CampaignError::Sample)
}

/// Re-runs the predicate recorded in a witness.
pub fn replay(
    f: &FunctionHandle,
    region: &Region,
    plan: &SamplingPlan,
    witness: &Witness,
) -> Result<ProbeResult, CampaignError> {
    evaluate_probe(f, region, plan, &witness.probe())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::Outcome;

    #[test]
    fn seeds_depend_on_point_and_plan_seed() {
        let a = Point::from_slice(&[0.1, 0.2]);
        let b = Point::from_slice(&[0.1, 0.20000000000000004]);
        assert_eq!(subdiff_seed(1, &a), subdiff_seed(1, &a));
        assert_ne!(subdiff_seed(1, &a), subdiff_seed(1, &b));
        assert_ne!(subdiff_seed(1, &a), subdiff_seed(2, &a));
    }

    #[test]
    fn kink_estimate_matches_clarke_support() {
        let f = FunctionHandle::parse("pw", "x1 + max(x1, 0)", 1).unwrap();
        let r = Region::parse("box(-1..1), margin(0.01)").unwrap();
        let plan = SamplingPlan::default();
        let ctx = Context::new(&f, &r, &plan);
        let mut cache = SubCache::default();
        let e = cache.get(&ctx, &Point::from_slice(&[0.0])).unwrap();
        assert!(e.at_kink);
        let lo = e.generators.iter().map(|g| g[0]).fold(f64::INFINITY, f64::min);
        let hi = e.generators.iter().map(|g| g[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 1.0).abs() < 1e-6 && (hi - 2.0).abs() < 1e-6, "{e:?}");
    }

    #[test]
    fn subdiff_kernel_probe_on_cubic_names_the_generator() {
        let f = FunctionHandle::parse("c", "x1^3", 1).unwrap();
        let r = Region::parse("box(-1..1), margin(0.01)").unwrap();
        let plan = SamplingPlan::default();
        let probe = Probe {
            kind: PredicateKind::SubdiffKernel,
            negated: false,
            x: Point::from_slice(&[0.0]),
            y: Point::from_slice(&[-0.5]),
            lambda: None,
        };
        let res = evaluate_probe(&f, &r, &plan, &probe).unwrap();
        assert_eq!(res.check.outcome.violation().unwrap().residual, 0.125);
        assert_eq!(res.generator, Some(vec![0.0]));
        let probe = Probe { kind: PredicateKind::GradientKernel, y: Point::from_slice(&[0.5]), ..probe };
        let res = evaluate_probe(&f, &r, &plan, &probe).unwrap();
        assert!(matches!(res.check.outcome, Outcome::Fail(_)));
    }
}
