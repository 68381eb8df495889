//! Numerical estimators for Clarke generalized derivatives.
//!
//! Clarke–Rockafellar subdifferentials are identified with the Clarke
//! construction throughout: the two coincide for locally Lipschitz functions,
//! which is the only class these estimators accept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::EvalError;
use crate::function::FunctionHandle;
use crate::point::{norm, Point};
use crate::region::Region;

/// Spread above which a generator set is treated as a genuine set rather
/// than one gradient seen through noise.
pub const COHERENCE: f64 = 1e-3;
const DEDUP: f64 = 1e-12;
const REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("insufficient interior room around the base point")]
    InsufficientRoom,
    #[error("gradient evaluation failed at {failed} of {total} probes")]
    GradientFailures { failed: usize, total: usize },
    #[error("invalid estimator parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Discretization of the Clarke limsup: step schedule `t_1 > … > t_K`,
/// probe radius `neighborhood · t_k`, `probes` base points per scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarkeScheme {
    pub steps: Vec<f64>,
    pub neighborhood: f64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for ClarkeScheme {
    fn default() -> Self {
        ClarkeScheme::geometric(1e-3, 1e-7, 9, 10.0, 64, 0)
    }
}

impl ClarkeScheme {
    /// `count` steps spaced geometrically from `first` down to `last`.
    pub fn geometric(first: f64, last: f64, count: usize, neighborhood: f64, probes: usize, seed: u64) -> Self {
        let steps = if count == 1 {
            vec![first]
        } else {
            let ratio = (last / first).powf(1.0 / (count - 1) as f64);
            (0..count).map(|k| first * ratio.powi(k as i32)).collect()
        };
        ClarkeScheme { steps, neighborhood, probes, seed }
    }

    pub fn validate(&self) -> Result<(), EstimateError> {
        if self.steps.is_empty() || self.steps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(EstimateError::Parameters("steps must be positive".into()));
        }
        if self.steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(EstimateError::Parameters("steps must be strictly decreasing".into()));
        }
        if self.probes < 8 {
            return Err(EstimateError::Parameters("at least 8 probes per scale".into()));
        }
        if !(self.neighborhood > 0.0) {
            return Err(EstimateError::Parameters("neighborhood factor must be positive".into()));
        }
        Ok(())
    }
}

/// Uniform draw from the ball of radius `r` around `x`.
fn ball_point<R: Rng + ?Sized>(rng: &mut R, x: &[f64], r: f64) -> Vec<f64> {
    let n = x.len();
    let mut u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let len = norm(&u);
    let scale = if len > 0.0 { r * rng.random::<f64>().powf(1.0 / n as f64) / len } else { 0.0 };
    for (ui, xi) in u.iter_mut().zip(x) {
        *ui = xi + *ui * scale;
    }
    u
}

/// Estimates `f⁰(x; v)`: per scale, the max difference quotient over probes
/// in `ball(x, c·t_k)`; the result is the max over the three finest scales
/// that produced a value.
pub fn clarke_directional(
    f: &FunctionHandle,
    region: &Region,
    x: &Point,
    v: &[f64],
    scheme: &ClarkeScheme,
) -> Result<f64, EstimateError> {
    scheme.validate()?;
    if v.len() != x.dim() || norm(v) == 0.0 {
        return Err(EstimateError::Parameters("direction must be nonzero with matching dimension".into()));
    }
    let k = scheme.steps.len();
    let mut per_scale: Vec<Option<f64>> = Vec::with_capacity(k);
    for (idx, &t) in scheme.steps.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(scheme.seed);
        rng.set_stream(idx as u64);
        let radius = scheme.neighborhood * t;
        let mut best: Option<f64> = None;
        let mut skipped = false;
        for _ in 0..scheme.probes {
            let mut quotient = None;
            for _ in 0..REDRAWS {
                let y = ball_point(&mut rng, x.coords(), radius);
                let y_step: Vec<f64> = y.iter().zip(v).map(|(a, b)| a + t * b).collect();
                if !region.contains(&y) || !region.contains(&y_step) {
                    continue;
                }
                if let (Ok(fy), Ok(fs)) = (f.eval_slice(&y), f.eval_slice(&y_step)) {
                    quotient = Some((fs - fy) / t);
                    break;
                }
            }
            match quotient {
                Some(q) => best = Some(best.map_or(q, |b: f64| b.max(q))),
                None => {
                    skipped = true;
                    break;
                }
            }
        }
        per_scale.push(if skipped { None } else { best });
    }
    per_scale[k.saturating_sub(3)..]
        .iter()
        .flatten()
        .copied()
        .reduce(f64::max)
        .ok_or(EstimateError::InsufficientRoom)
}

/// Central finite-difference gradient with step `h`.
pub fn central_gradient(f: &FunctionHandle, x: &[f64], h: f64) -> Result<Vec<f64>, EvalError> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f.eval_slice(&probe)?;
            probe[i] = x[i] - h;
            let down = f.eval_slice(&probe)?;
            probe[i] = x[i];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// A finite generator set standing in for `∂f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdifferentialEstimate {
    pub generators: Vec<Vec<f64>>,
    pub radius: f64,
    pub at_kink: bool,
}

impl SubdifferentialEstimate {
    /// The estimate for `-f`: every generator negated.
    pub fn negated(&self) -> SubdifferentialEstimate {
        SubdifferentialEstimate {
            generators: self.generators.iter().map(|g| g.iter().map(|v| -v).collect()).collect(),
            radius: self.radius,
            at_kink: self.at_kink,
        }
    }

    /// Largest Euclidean distance between two generators.
    pub fn spread(&self) -> f64 {
        let mut s: f64 = 0.0;
        for (i, a) in self.generators.iter().enumerate() {
            for b in &self.generators[i + 1..] {
                let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
                s = s.max(norm(&d));
            }
        }
        s
    }
}

struct Sampled {
    grad: Vec<f64>,
    smooth_exact: bool,
    branches: Option<Vec<i8>>,
}

fn gradient_at(f: &FunctionHandle, p: &[f64], fd_step: f64) -> Result<Sampled, EvalError> {
    if let Some(res) = f.gradient_slice(p) {
        let g = res?;
        if !g.at_kink {
            return Ok(Sampled { grad: g.grad, smooth_exact: true, branches: g.branches });
        }
    }
    Ok(Sampled { grad: central_gradient(f, p, fd_step)?, smooth_exact: false, branches: None })
}

/// Gradient-sampling estimate of the Clarke subdifferential at `x`.
///
/// Gradients are taken at `x` and at `count` points of `ball(x, radius)`.
/// When every sample is an exact gradient on the same smooth piece, or the
/// samples agree to [`COHERENCE`], the estimate collapses to the single
/// gradient at `x`.
///
/// An exact or automatic gradient at `x` without a kink flag means `x` is
/// not on a tie of any abs/min/max, so `f` is smooth around `x` and that
/// gradient is the whole subdifferential; sampling is skipped. Sampling near
/// (rather than at) a kink would otherwise mix in the neighbouring piece.
pub fn subdifferential(
    f: &FunctionHandle,
    region: &Region,
    x: &Point,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<SubdifferentialEstimate, EstimateError> {
    let n = x.dim();
    if count < 2 * n + 1 {
        return Err(EstimateError::Parameters(format!("need at least {} probes", 2 * n + 1)));
    }
    if !(radius > 0.0) {
        return Err(EstimateError::Parameters("radius must be positive".into()));
    }
    let fd_step = radius / 100.0;
    let center = gradient_at(f, x.coords(), fd_step)?;
    if center.smooth_exact {
        return Ok(SubdifferentialEstimate { generators: vec![center.grad], radius, at_kink: false });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut failed = 0;
    for _ in 0..count {
        let probe = (0..REDRAWS)
            .map(|_| ball_point(&mut rng, x.coords(), radius))
            .find(|p| region.contains(p));
        match probe.map(|p| gradient_at(f, &p, fd_step)) {
            Some(Ok(s)) => samples.push(s),
            _ => failed += 1,
        }
    }
    if failed * 2 > count {
        return Err(EstimateError::GradientFailures { failed, total: count });
    }

    let same_piece = center.smooth_exact
        && samples.iter().all(|s| s.smooth_exact && s.branches == center.branches);
    let mut generators: Vec<Vec<f64>> = vec![center.grad];
    if !same_piece {
        for s in samples {
            let dup = generators
                .iter()
                .any(|g| g.iter().zip(&s.grad).all(|(a, b)| (a - b).abs() <= DEDUP));
            if !dup {
                generators.push(s.grad);
            }
        }
    }
    let mut est = SubdifferentialEstimate { generators, radius, at_kink: false };
    if est.spread() > COHERENCE {
        est.at_kink = true;
    } else {
        est.generators.truncate(1);
    }
    Ok(est)
}

/// One-sided derivative along `v`, Richardson-extrapolated (least-squares
/// line in the step) over steps 1e-3, 1e-4, 1e-5.
pub fn directional_derivative(
    f: &FunctionHandle,
    region: &Region,
    x: &Point,
    v: &[f64],
) -> Result<f64, EstimateError> {
    const STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];
    let fx = f.eval(x)?;
    let mut pts = Vec::with_capacity(STEPS.len());
    for h in STEPS {
        let p: Vec<f64> = x.coords().iter().zip(v).map(|(a, b)| a + h * b).collect();
        if !region.contains(&p) {
            return Err(EstimateError::InsufficientRoom);
        }
        pts.push((h, (f.eval_slice(&p)? - fx) / h));
    }
    let m = pts.len() as f64;
    let mean_h = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_q = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_h).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_h) * (p.1 - mean_q)).sum();
    let slope = sxy / sxx;
    Ok(mean_q - slope * mean_h)
}
