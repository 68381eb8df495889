//! Convex sampling regions: a bounding box intersected with affine halfspaces.
//!
//! Textual form, as accepted on the command line:
//!
//! ```text
//! x1 > 0.05, box(0..2, -1..1), margin(0.05)
//! ```
//!
//! `box(..)` is required and fixes the dimension. Constraints are affine
//! comparisons using `<`, `<=`, `>`, `>=`. `margin(m)` overrides the default
//! interior offset of 5% of the box diagonal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Expr};
use crate::point::{dot, norm, Point};

const MAX_ATTEMPTS: u64 = 1_000_000;
const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("region too thin: accepted {accepted} of {attempts} candidate points")]
    TooThin { accepted: u64, attempts: u64 },
    #[error("invalid region: {0}")]
    Invalid(String),
    #[error("region syntax: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `<`
    Less,
    /// `<=`
    LessEq,
}

/// `⟨coeffs, x⟩ relation rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    fn holds(&self, x: &[f64]) -> bool {
        let lhs = dot(&self.coeffs, x);
        match self.relation {
            Relation::Less => lhs < self.rhs,
            Relation::LessEq => lhs <= self.rhs,
        }
    }

    /// Euclidean distance to the boundary hyperplane, signed positive inside.
    fn slack(&self, x: &[f64]) -> f64 {
        let n = norm(&self.coeffs);
        if n == 0.0 {
            return if self.holds(x) { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        (self.rhs - dot(&self.coeffs, x)) / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    dim: usize,
    bounds: Vec<(f64, f64)>,
    constraints: Vec<Constraint>,
    margin: f64,
}

pub struct RegionBuilder {
    region: Region,
    margin_set: bool,
}

impl RegionBuilder {
    /// Adds `⟨coeffs, x⟩ < rhs`.
    pub fn less(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.region.constraints.push(Constraint { coeffs, relation: Relation::Less, rhs });
        self
    }

    /// Adds `⟨coeffs, x⟩ <= rhs`.
    pub fn less_eq(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.region.constraints.push(Constraint { coeffs, relation: Relation::LessEq, rhs });
        self
    }

    pub fn margin(mut self, margin: f64) -> Self {
        self.region.margin = margin;
        self.margin_set = true;
        self
    }

    /// Validates the region, including nonemptiness at its margin.
    pub fn build(mut self) -> Result<Region, RegionError> {
        let r = &mut self.region;
        if r.dim == 0 {
            return Err(RegionError::Invalid("dimension must be positive".into()));
        }
        for &(lo, hi) in &r.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(RegionError::Invalid(format!("bad bounds {lo}..{hi}")));
            }
        }
        for c in &r.constraints {
            if c.coeffs.len() != r.dim || !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(RegionError::Invalid("malformed constraint".into()));
            }
        }
        if !self.margin_set {
            r.margin = 0.05 * r.diagonal();
        }
        if !(r.margin > 0.0 && r.margin.is_finite()) {
            return Err(RegionError::Invalid("margin must be positive".into()));
        }
        sample_region(r, 1, 0)?;
        Ok(self.region)
    }
}

impl Region {
    /// Starts a region from per-coordinate sampling bounds.
    pub fn builder(bounds: Vec<(f64, f64)>) -> RegionBuilder {
        RegionBuilder {
            region: Region { dim: bounds.len(), bounds, constraints: Vec::new(), margin: 0.0 },
            margin_set: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt()
    }

    /// Membership in the closed box intersected with the constraints.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| lo <= v && v <= hi)
            && self.constraints.iter().all(|c| c.holds(x))
    }

    /// Membership with slack at least `margin` from every face.
    pub fn contains_with_margin(&self, x: &[f64]) -> bool {
        let m = self.margin;
        x.len() == self.dim
            && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| lo + m <= *v && *v <= hi - m)
            && self.constraints.iter().all(|c| c.holds(x) && c.slack(x) >= m)
    }

    /// Draws one point satisfying every face with slack `margin`.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point, RegionError> {
        let mut attempts = 0u64;
        let mut x = vec![0.0; self.dim];
        while attempts < MAX_ATTEMPTS {
            attempts += 1;
            for (v, (lo, hi)) in x.iter_mut().zip(&self.bounds) {
                *v = rng.random_range(*lo..=*hi);
            }
            if self.contains_with_margin(&x) {
                return Ok(Point::from_slice(&x));
            }
        }
        Err(RegionError::TooThin { accepted: 0, attempts })
    }

    /// Parses the textual region form.
    pub fn parse(text: &str) -> Result<Region, RegionError> {
        let terms = split_top_level(text)?;
        let mut bounds = None;
        let mut margin = None;
        let mut rest = Vec::new();
        for term in terms {
            if let Some(inner) = call_body(&term, "box") {
                if bounds.is_some() {
                    return Err(RegionError::Syntax("more than one box(..)".into()));
                }
                bounds = Some(parse_box(inner)?);
            } else if let Some(inner) = call_body(&term, "margin") {
                let m: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| RegionError::Syntax(format!("bad margin `{inner}`")))?;
                margin = Some(m);
            } else {
                rest.push(term);
            }
        }
        let bounds = bounds.ok_or_else(|| RegionError::Syntax("missing box(..)".into()))?;
        let dim = bounds.len();
        let mut b = Region::builder(bounds);
        for term in rest {
            let (coeffs, rel, rhs) = parse_constraint(&term, dim)?;
            b = match rel {
                Relation::Less => b.less(coeffs, rhs),
                Relation::LessEq => b.less_eq(coeffs, rhs),
            };
        }
        if let Some(m) = margin {
            b = b.margin(m);
        }
        b.build()
    }
}

/// Draws `count` points by rejection over the bounding box; deterministic in `seed`.
pub fn sample_region(region: &Region, count: usize, seed: u64) -> Result<Vec<Point>, RegionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    let mut x = vec![0.0; region.dim];
    while out.len() < count {
        attempts += 1;
        for (v, (lo, hi)) in x.iter_mut().zip(&region.bounds) {
            *v = rng.random_range(*lo..=*hi);
        }
        if region.contains_with_margin(&x) {
            out.push(Point::from_slice(&x));
        }
        if attempts >= MAX_ATTEMPTS && (out.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(RegionError::TooThin { accepted: out.len() as u64, attempts });
        }
    }
    Ok(out)
}

fn split_top_level(text: &str) -> Result<Vec<String>, RegionError> {
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut out = Vec::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(RegionError::Syntax("unbalanced `)`".into()));
        }
        if ch == ',' && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    if depth != 0 {
        return Err(RegionError::Syntax("unbalanced `(`".into()));
    }
    out.push(cur);
    let out: Vec<String> = out.into_iter().map(|s| s.trim().to_string()).collect();
    if out.iter().any(|s| s.is_empty()) {
        return Err(RegionError::Syntax("empty term".into()));
    }
    Ok(out)
}

fn call_body<'a>(term: &'a str, name: &str) -> Option<&'a str> {
    let rest = term.strip_prefix(name)?.trim_start();
    rest.strip_prefix('(')?.strip_suffix(')')
}

fn parse_box(inner: &str) -> Result<Vec<(f64, f64)>, RegionError> {
    inner
        .split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once("..")
                .ok_or_else(|| RegionError::Syntax(format!("expected lo..hi, got `{}`", part.trim())))?;
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| RegionError::Syntax(format!("bad number `{}`", s.trim())))
            };
            Ok((num(lo)?, num(hi)?))
        })
        .collect()
}

fn parse_constraint(term: &str, dim: usize) -> Result<(Vec<f64>, Relation, f64), RegionError> {
    // two-character operators first
    let ops: [(&str, bool, Relation); 4] = [
        ("<=", false, Relation::LessEq),
        (">=", true, Relation::LessEq),
        ("<", false, Relation::Less),
        (">", true, Relation::Less),
    ];
    let (lhs, rhs, flip, rel) = ops
        .iter()
        .find_map(|(op, flip, rel)| term.split_once(op).map(|(l, r)| (l, r, *flip, *rel)))
        .ok_or_else(|| RegionError::Syntax(format!("no comparison in `{term}`")))?;
    let parse = |s: &str| dsl::parse(s, dim).map_err(|e| RegionError::Syntax(format!("`{}`: {e}", s.trim())));
    let g = Expr::Sub(Box::new(parse(lhs)?), Box::new(parse(rhs)?));
    let g = if flip { Expr::neg(g) } else { g };
    // g(x) rel 0 with g affine: ⟨a, x⟩ + c0 rel 0
    let zero = vec![0.0; dim];
    let at_zero = dsl::eval_dual(&g, &zero).map_err(|e| RegionError::Syntax(format!("`{term}`: {e}")))?;
    let a = at_zero.derivative;
    let c0 = at_zero.value;
    for k in 1..=3 {
        let probe: Vec<f64> = (0..dim).map(|i| (k * (i + 2)) as f64 * 0.37 - 0.9).collect();
        let v = dsl::eval(&g, &probe).map_err(|e| RegionError::Syntax(format!("`{term}`: {e}")))?;
        if (v - (dot(&a, &probe) + c0)).abs() > 1e-9 * (1.0 + v.abs()) {
            return Err(RegionError::Syntax(format!("constraint `{term}` is not affine")));
        }
    }
    Ok((a, rel, -c0))
}
