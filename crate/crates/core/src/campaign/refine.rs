use super::probe::{eval_in, Context, ProbeResult, SubCache};
use super::{CampaignError, Probe, SamplingPlan, Witness};
use crate::characterize::Outcome;
use crate::function::FunctionHandle;
use crate::point::Point;
use crate::region::Region;

/// Step halvings per refinement round.
const LEVELS_PER_ROUND: usize = 10;
const MAX_SWEEPS: usize = 8;
/// Offset placing every failing sample above every non-failing one.
const FAIL_OFFSET: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub probe: Probe,
    pub outcome: Outcome,
    /// Best objective after each round; nondecreasing.
    pub objective_trace: Vec<f64>,
    /// Present when the refined probe fails decisively.
    pub witness: Option<Witness>,
}

fn objective(r: &ProbeResult) -> f64 {
    match &r.check.outcome {
        Outcome::Fail(v) => FAIL_OFFSET + v.residual,
        _ => r.check.score.unwrap_or(f64::NEG_INFINITY),
    }
}

#[derive(Clone)]
struct State {
    coords: Vec<f64>,
    n: usize,
    has_lambda: bool,
}

impl State {
    fn from_probe(p: &Probe) -> State {
        let mut coords: Vec<f64> = p.x.coords().iter().chain(p.y.coords()).copied().collect();
        if let Some(l) = p.lambda {
            coords.push(l);
        }
        State { coords, n: p.x.dim(), has_lambda: p.lambda.is_some() }
    }

    fn probe(&self, template: &Probe) -> Probe {
        Probe {
            kind: template.kind,
            negated: template.negated,
            x: Point::from_slice(&self.coords[..self.n]),
            y: Point::from_slice(&self.coords[self.n..2 * self.n]),
            lambda: self.has_lambda.then(|| self.coords[2 * self.n]),
        }
    }

    fn feasible(&self, region: &Region, lambda_min: f64) -> bool {
        let (x, rest) = self.coords.split_at(self.n);
        let y = &rest[..self.n];
        let lambda_ok = !self.has_lambda || {
            let l = self.coords[2 * self.n];
            l >= lambda_min && l <= 1.0 - lambda_min
        };
        lambda_ok && x != y && region.contains_with_margin(x) && region.contains_with_margin(y)
    }
}

pub(crate) fn refine_in(ctx: &Context, start: &Probe, rounds: usize) -> Result<Refinement, String> {
    let mut cache = SubCache::default();
    let mut state = State::from_probe(start);
    let mut best = eval_in(ctx, start, &mut cache)?;
    let mut best_obj = objective(&best);
    let lambda_min = ctx.plan.lambda_min();
    let mut step = 0.1 * ctx.region.diagonal();
    let mut lambda_step = 0.1;
    let mut trace = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        for _ in 0..LEVELS_PER_ROUND {
            for _ in 0..MAX_SWEEPS {
                let mut improved = false;
                for k in 0..state.coords.len() {
                    let h = if k >= 2 * state.n { lambda_step } else { step };
                    for dir in [1.0, -1.0] {
                        let mut cand = state.clone();
                        cand.coords[k] += dir * h;
                        if !cand.feasible(ctx.region, lambda_min) {
                            continue;
                        }
                        let Ok(r) = eval_in(ctx, &cand.probe(start), &mut cache) else {
                            continue;
                        };
                        let o = objective(&r);
                        if o > best_obj {
                            best_obj = o;
                            best = r;
                            state = cand;
                            improved = true;
                            break;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            step *= 0.5;
            lambda_step *= 0.5;
        }
        trace.push(best_obj);
    }
    let probe = state.probe(start);
    let witness = best.witness(&probe, true);
    Ok(Refinement { probe, outcome: best.check.outcome, objective_trace: trace, witness })
}

/// Coordinate search over `(x, y, λ)` that maximizes closeness to violating
/// the probe's predicate, then the violation residual once it fails.
/// Points stay inside the region's margin and `λ` inside
/// `[λ_min, 1 − λ_min]` of the plan's grid.
pub fn refine_counterexample(
    f: &FunctionHandle,
    region: &Region,
    plan: &SamplingPlan,
    candidate: &Probe,
    rounds: usize,
) -> Result<Refinement, CampaignError> {
    let ctx = Context::new(f, region, plan);
    refine_in(&ctx, candidate, rounds).map_err(CampaignError::Sample)
}
