//! Sampling campaigns: predicate outcomes over sampled pairs and segments,
//! aggregated into per-property verdicts with replayable witnesses.
//!
//! Every sample draws from its own random stream (`seed`, stream = sample
//! index), so results do not depend on how samples are spread over workers.

mod exec;
mod lattice;
mod probe;
mod refine;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterize::{project_onto_kernel, CheckError, Outcome};
use crate::corpus::Property;
use crate::function::FunctionHandle;
use crate::nonsmooth::{ClarkeScheme, EstimateError};
use crate::point::Point;
use crate::region::{Region, RegionError};

pub use exec::Execution;
pub use lattice::{check_implication_lattice, LatticeViolation, IMPLICATIONS};
pub use probe::{evaluate_probe, replay, subdiff_seed, PredicateKind, Probe, ProbeResult};
pub use refine::{refine_counterexample, Refinement};

use probe::{Context, SubCache};

/// Witnesses kept per property (largest residual first).
pub const MAX_WITNESSES: usize = 5;
/// Candidates refined per predicate kind when sampling found no violation.
pub const REFINE_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error("sample not evaluable: {0}")]
    Sample(String),
    #[error("function has dimension {function} but region has dimension {region}")]
    Dimension { function: usize, region: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    pub pairs: usize,
    pub lambda_grid: usize,
    pub refinement_rounds: usize,
    pub seed: u64,
    pub clarke_steps: Vec<f64>,
    pub clarke_neighborhood: f64,
    pub clarke_probes: usize,
    pub subdiff_radius: f64,
    /// Defaults to `max(2n + 1, 8)`.
    pub subdiff_count: Option<usize>,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        let clarke = ClarkeScheme::default();
        SamplingPlan {
            pairs: 200,
            lambda_grid: 33,
            refinement_rounds: 3,
            seed: 42,
            clarke_steps: clarke.steps,
            clarke_neighborhood: clarke.neighborhood,
            clarke_probes: clarke.probes,
            subdiff_radius: 1e-5,
            subdiff_count: None,
        }
    }
}

impl SamplingPlan {
    pub fn with_seed(seed: u64) -> Self {
        SamplingPlan { seed, ..SamplingPlan::default() }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.pairs == 0 {
            return Err(CampaignError::Plan("pair count must be positive".into()));
        }
        if self.lambda_grid < 3 {
            return Err(CampaignError::Plan("lambda grid needs at least 3 points".into()));
        }
        if self.refinement_rounds == 0 {
            return Err(CampaignError::Plan("refinement rounds must be positive".into()));
        }
        if !(self.subdiff_radius > 0.0 && self.subdiff_radius.is_finite()) {
            return Err(CampaignError::Plan("subdifferential radius must be positive".into()));
        }
        self.clarke_scheme(0).validate()?;
        Ok(())
    }

    pub fn clarke_scheme(&self, seed: u64) -> ClarkeScheme {
        ClarkeScheme {
            steps: self.clarke_steps.clone(),
            neighborhood: self.clarke_neighborhood,
            probes: self.clarke_probes,
            seed,
        }
    }

    pub fn subdiff_count_for(&self, dim: usize) -> usize {
        self.subdiff_count.unwrap_or((2 * dim + 1).max(8))
    }

    /// Smallest `λ` used on segments; refinement stays inside `[λ_min, 1 − λ_min]`.
    pub fn lambda_min(&self) -> f64 {
        1.0 / (self.lambda_grid - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    HoldsAtSamples,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::HoldsAtSamples => "holds-at-samples",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub vacuous: usize,
    pub inconclusive: usize,
}

impl Counts {
    fn add(&mut self, o: Option<&Outcome>) {
        match o {
            Some(Outcome::Pass) => self.pass += 1,
            Some(Outcome::Fail(_)) => self.fail += 1,
            Some(Outcome::Vacuous) => self.vacuous += 1,
            Some(Outcome::Inconclusive { .. }) | None => self.inconclusive += 1,
        }
    }
}

/// A concrete violated implication, replayable with [`replay`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub predicate: PredicateKind,
    /// The predicate was evaluated on `−f`; the values below are those of `−f`.
    pub negated: bool,
    pub x: Point,
    pub y: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_y: Option<Vec<f64>>,
    pub fx: f64,
    pub fy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fz: Option<f64>,
    pub relation: String,
    pub residual: f64,
    pub subdiff_seed_x: u64,
    pub subdiff_seed_y: u64,
    /// Found by counterexample refinement rather than plain sampling.
    pub refined: bool,
}

impl Witness {
    pub fn probe(&self) -> Probe {
        Probe {
            kind: self.predicate,
            negated: self.negated,
            x: self.x.clone(),
            y: self.y.clone(),
            lambda: self.lambda,
        }
    }

    fn sort_key(&self) -> (std::cmp::Reverse<u64>, (PredicateKind, bool, Vec<u64>, Vec<u64>, u64)) {
        (std::cmp::Reverse(order_bits(self.residual)), self.probe().key())
    }
}

/// Monotone map from non-negative floats to integers for canonical ordering.
fn order_bits(v: f64) -> u64 {
    if v.is_sign_negative() {
        !v.to_bits()
    } else {
        v.to_bits() | (1 << 63)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub property: Property,
    pub verdict: Verdict,
    pub counts: Counts,
    pub witnesses: Vec<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
}

fn verdict_from(counts: &Counts) -> Verdict {
    if counts.fail > 0 {
        Verdict::Refuted
    } else if counts.pass > 0 {
        Verdict::HoldsAtSamples
    } else {
        Verdict::Inconclusive
    }
}

/// The predicate templates used for one property on one pair. Segment
/// predicates have `lambda = None` and are run over the interior grid.
fn probes_for(property: Property, x: &Point, y: &Point, kernel: Option<&Probe>) -> Vec<Probe> {
    use PredicateKind::*;
    let mk = |kind, negated, a: &Point, b: &Point| Probe { kind, negated, x: a.clone(), y: b.clone(), lambda: None };
    match property {
        Property::Pseudoconvex => vec![mk(PseudoconvexPair, false, x, y), mk(PseudoconvexPair, false, y, x)],
        Property::Pseudoconcave => vec![mk(PseudoconvexPair, true, x, y), mk(PseudoconvexPair, true, y, x)],
        Property::Pseudolinear => {
            let mut v = vec![
                mk(PIdentity, false, x, y),
                mk(PIdentity, false, y, x),
                mk(SymmetricEquality, false, x, y),
                mk(WeakB, false, x, y),
            ];
            v.extend(kernel.cloned());
            v
        }
        Property::Quasiconvex => vec![mk(QuasiconvexSegment, false, x, y)],
        Property::Quasiconcave => vec![mk(QuasiconvexSegment, true, x, y)],
        Property::Quasilinear => vec![mk(QuasiconvexSegment, false, x, y), mk(QuasiconvexSegment, true, x, y)],
        Property::SemistrictlyQuasiconvex => {
            vec![mk(SemistrictSegment, false, x, y), mk(SemistrictSegment, false, y, x)]
        }
        Property::SemistrictlyQuasiconcave => {
            vec![mk(SemistrictSegment, true, x, y), mk(SemistrictSegment, true, y, x)]
        }
        Property::SemistrictlyQuasilinear => {
            vec![mk(Interlacing, false, x, y), mk(Interlacing, false, y, x), mk(StrictB, false, x, y)]
        }
    }
}

/// One predicate evaluated on one sample (the worst grid point for segment
/// predicates).
#[derive(Debug, Clone)]
struct Sampled {
    index: usize,
    probe: Option<Probe>,
    result: Result<ProbeResult, String>,
}

impl Sampled {
    fn outcome(&self) -> Option<&Outcome> {
        self.result.as_ref().ok().map(|r| &r.check.outcome)
    }

    fn score(&self) -> Option<f64> {
        self.result.as_ref().ok().and_then(|r| r.check.score)
    }
}

fn worse(a: &Result<ProbeResult, String>, b: &Result<ProbeResult, String>) -> bool {
    let sev = |r: &Result<ProbeResult, String>| match r {
        Ok(p) => p.check.outcome.severity(),
        Err(_) => 2,
    };
    let score = |r: &Result<ProbeResult, String>| {
        r.as_ref().ok().and_then(|p| p.check.score).unwrap_or(f64::NEG_INFINITY)
    };
    let (sa, sb) = (sev(a), sev(b));
    sa > sb || (sa == sb && score(a) > score(b))
}

fn run_template(ctx: &Context, template: &Probe, cache: &mut SubCache) -> (Probe, Result<ProbeResult, String>) {
    if !template.kind.on_segment() {
        return (template.clone(), probe::eval_in(ctx, template, cache));
    }
    let mut best: Option<(Probe, Result<ProbeResult, String>)> = None;
    for &l in &ctx.grid {
        let p = Probe { lambda: Some(l), ..template.clone() };
        let r = probe::eval_in(ctx, &p, cache);
        let failed = matches!(&r, Ok(res) if res.check.outcome.is_fail());
        let replace = match &best {
            None => true,
            Some((_, b)) => worse(&r, b),
        };
        if replace {
            best = Some((p, r));
        }
        if failed {
            break;
        }
    }
    best.expect("interior grid is nonempty")
}

pub(crate) fn sample_pair(region: &Region, seed: u64, index: usize) -> Result<(Point, Point), RegionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let x = region.sample_one(&mut rng)?;
    if index % 10 == 9 {
        // axis-aligned pair: y differs from x in one coordinate
        let n = x.dim();
        for _ in 0..1000 {
            let j = rng.random_range(0..n);
            let (lo, hi) = region.bounds()[j];
            let mut c = x.coords().to_vec();
            c[j] = rng.random_range(lo..=hi);
            if c[j] != x[j] && region.contains_with_margin(&c) {
                return Ok((x, Point::from_slice(&c)));
            }
        }
    }
    loop {
        let y = region.sample_one(&mut rng)?;
        if y != x {
            return Ok((x, y));
        }
    }
}

fn kernel_probe(ctx: &Context, x: &Point, y: &Point, cache: &mut SubCache) -> Probe {
    let (kind, target) = match cache.get(ctx, x) {
        Ok(sx) => {
            let kind = if !sx.at_kink && ctx.f.has_gradient() {
                PredicateKind::GradientKernel
            } else {
                PredicateKind::SubdiffKernel
            };
            let target = project_onto_kernel(ctx.region, x, &sx.generators[0], y).unwrap_or_else(|| y.clone());
            (kind, target)
        }
        Err(_) => (PredicateKind::SubdiffKernel, y.clone()),
    };
    Probe { kind, negated: false, x: x.clone(), y: target, lambda: None }
}

fn run_sample(ctx: &Context, properties: &[Property], index: usize) -> Vec<Vec<Sampled>> {
    let mut cache = SubCache::default();
    let (x, y) = match sample_pair(ctx.region, ctx.plan.seed, index) {
        Ok(p) => p,
        Err(e) => {
            let reason = e.to_string();
            return properties
                .iter()
                .map(|_| vec![Sampled { index, probe: None, result: Err(reason.clone()) }])
                .collect();
        }
    };
    let kernel = properties.contains(&Property::Pseudolinear).then(|| kernel_probe(ctx, &x, &y, &mut cache));
    properties
        .iter()
        .map(|&prop| {
            probes_for(prop, &x, &y, kernel.as_ref())
                .iter()
                .map(|t| {
                    let (probe, result) = run_template(ctx, t, &mut cache);
                    Sampled { index, probe: Some(probe), result }
                })
                .collect()
        })
        .collect()
}

/// The highest-scoring samples of each predicate kind. Scores of different
/// predicates are not comparable, so candidates are chosen per kind.
fn refinement_candidates(samples: &[Sampled]) -> Vec<Probe> {
    let mut by_kind: BTreeMap<(PredicateKind, bool), Vec<(f64, usize, &Probe)>> = BTreeMap::new();
    for s in samples {
        if let (Some(score), Some(p)) = (s.score(), &s.probe) {
            by_kind.entry((p.kind, p.negated)).or_default().push((score, s.index, p));
        }
    }
    let mut out = Vec::new();
    for (_, mut c) in by_kind {
        c.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.extend(c.into_iter().take(REFINE_CANDIDATES).map(|(_, _, p)| p.clone()));
    }
    out
}

fn aggregate(ctx: &Context, property: Property, samples: &[Sampled], exec: Execution) -> PropertyVerdict {
    let mut counts = Counts::default();
    let mut witnesses = Vec::new();
    for s in samples {
        counts.add(s.outcome());
        if let (Ok(r), Some(p)) = (&s.result, &s.probe) {
            witnesses.extend(r.witness(p, false));
        }
    }
    if counts.fail == 0 {
        let probes = refinement_candidates(samples);
        let refined = exec::map(probes.len(), exec, |i| refine::refine_in(ctx, &probes[i], ctx.plan.refinement_rounds));
        for r in refined.into_iter().flatten() {
            if let Some(w) = r.witness {
                counts.fail += 1;
                witnesses.push(w);
            }
        }
    }
    witnesses.sort_by_key(Witness::sort_key);
    witnesses.dedup_by(|a, b| a.probe() == b.probe());
    let max_residual = witnesses.first().map(|w| w.residual);
    witnesses.truncate(MAX_WITNESSES);
    PropertyVerdict { property, verdict: verdict_from(&counts), counts, witnesses, max_residual }
}

/// Runs the campaign for `properties` with the default execution mode.
pub fn classify(
    f: &FunctionHandle,
    region: &Region,
    properties: &[Property],
    plan: &SamplingPlan,
) -> Result<Vec<PropertyVerdict>, CampaignError> {
    classify_with(f, region, properties, plan, Execution::default())
}

pub fn classify_with(
    f: &FunctionHandle,
    region: &Region,
    properties: &[Property],
    plan: &SamplingPlan,
    exec: Execution,
) -> Result<Vec<PropertyVerdict>, CampaignError> {
    plan.validate()?;
    if f.dim() != region.dim() {
        return Err(CampaignError::Dimension { function: f.dim(), region: region.dim() });
    }
    let mut props = properties.to_vec();
    props.sort();
    props.dedup();
    let ctx = Context::new(f, region, plan);
    let per_sample = exec::map(plan.pairs, exec, |i| run_sample(&ctx, &props, i));

    let mut by_property: BTreeMap<Property, Vec<Sampled>> = BTreeMap::new();
    for sample in per_sample {
        for (prop, outs) in props.iter().zip(sample) {
            by_property.entry(*prop).or_default().extend(outs);
        }
    }
    let grouped: Vec<(Property, Vec<Sampled>)> = by_property.into_iter().collect();
    // parallelize across properties, or across candidates when there is one
    let inner = if grouped.len() > 1 { Execution::Sequential } else { exec };
    Ok(exec::map(grouped.len(), exec, |i| aggregate(&ctx, grouped[i].0, &grouped[i].1, inner)))
}
