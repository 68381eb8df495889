//! Run configuration, the versioned JSON report and the `b(λ)` CSV curve.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::{classify, replay, CampaignError, PropertyVerdict, SamplingPlan, Verdict};
use crate::characterize::{compute_b, CheckError};
use crate::corpus::{corpus_entry, CorpusEntry, Property};
use crate::dsl::{self, ParseError};
use crate::function::FunctionHandle;
use crate::point::Point;
use crate::region::{Region, RegionError};

pub const SCHEMA: &str = "v1";
pub const TOOL: &str = "gencvx";

/// Upper bound on variable indices when the dimension is inferred from the source.
const MAX_INFERRED_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("region: {0}")]
    Region(#[from] RegionError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("unknown corpus entry `{0}`")]
    UnknownCorpus(String),
    #[error("{0}")]
    Invalid(String),
    #[error("config file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn all_properties() -> Vec<Property> {
    Property::ALL.to_vec()
}

/// Everything needed to reproduce a run. Echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default = "all_properties")]
    pub properties: Vec<Property>,
    #[serde(default)]
    pub plan: SamplingPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            function: None,
            dim: None,
            region: None,
            properties: all_properties(),
            plan: SamplingPlan::default(),
            out: None,
        }
    }
}

/// A function and region ready to analyze, with the texts they came from.
#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub source: String,
    pub region_text: String,
    pub function: FunctionHandle,
    pub region: Region,
}

impl Target {
    fn from_entry(e: CorpusEntry) -> Target {
        Target {
            name: e.name.into(),
            source: e.source.into(),
            region_text: e.region_text.into(),
            function: e.function,
            region: e.region,
        }
    }

    fn build(name: &str, source: &str, dim: Option<usize>, region_text: Option<&str>) -> Result<Target, ConfigError> {
        let region = region_text.map(Region::parse).transpose()?;
        let dim = match (dim, &region) {
            (Some(d), _) => d,
            (None, Some(r)) => r.dim(),
            (None, None) => dsl::parse(source, MAX_INFERRED_DIM)?.max_var().max(1),
        };
        let function = FunctionHandle::parse(name, source, dim)?;
        let region_text = match region_text {
            Some(t) => t.to_string(),
            None => default_region(dim),
        };
        let region = match region {
            Some(r) => r,
            None => Region::parse(&region_text)?,
        };
        if region.dim() != dim {
            return Err(CampaignError::Dimension { function: dim, region: region.dim() }.into());
        }
        Ok(Target { name: name.into(), source: source.into(), region_text, function, region })
    }

    pub fn report(&self, verdicts: Vec<PropertyVerdict>) -> FunctionReport {
        FunctionReport {
            name: self.name.clone(),
            source: self.source.clone(),
            dim: self.function.dim(),
            region: self.region_text.clone(),
            verdicts,
            mismatches: Vec::new(),
        }
    }
}

/// `box(-1..1, ...)` in `dim` coordinates.
pub fn default_region(dim: usize) -> String {
    format!("box({})", vec!["-1..1"; dim].join(", "))
}

impl RunConfig {
    /// Reads a JSON config file; unknown keys are rejected.
    pub fn from_file(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn target(&self) -> Result<Target, ConfigError> {
        match (&self.corpus, &self.function) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid("give either a corpus entry or a function, not both".into())),
            (None, None) => Err(ConfigError::Invalid("no function given (use --function or --corpus)".into())),
            (Some(name), None) => {
                let e = corpus_entry(name).ok_or_else(|| ConfigError::UnknownCorpus(name.clone()))?;
                if let Some(d) = self.dim {
                    if d != e.dim() {
                        return Err(CampaignError::Dimension { function: e.dim(), region: d }.into());
                    }
                }
                match &self.region {
                    Some(r) => Target::build(e.name, e.source, Some(e.dim()), Some(r)),
                    None => Ok(Target::from_entry(e)),
                }
            }
            (None, Some(src)) => Target::build("f", src, self.dim, self.region.as_deref()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MismatchKind {
    /// Labelled true, refuted by a witness.
    Contradiction,
    /// Labelled false, no violation found.
    Missed,
    /// No decisive sample.
    Inconclusive,
    /// Labelled false, no violation found, but fewer than [`MIN_SUPPORT`]
    /// samples passed.
    Undersampled,
}

/// Passing samples needed before a missed refutation counts as a real mismatch.
pub const MIN_SUPPORT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub property: Property,
    pub expected: bool,
    pub verdict: Verdict,
    pub kind: MismatchKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub name: String,
    pub source: String,
    pub dim: usize,
    pub region: String,
    pub verdicts: Vec<PropertyVerdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mismatches: Vec<Mismatch>,
}

impl FunctionReport {
    pub fn function(&self) -> Result<FunctionHandle, ConfigError> {
        Ok(FunctionHandle::parse(&self.name, &self.source, self.dim)?)
    }

    pub fn region(&self) -> Result<Region, ConfigError> {
        Ok(Region::parse(&self.region)?)
    }

    pub fn verdict(&self, p: Property) -> Option<&PropertyVerdict> {
        self.verdicts.iter().find(|v| v.property == p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub functions: Vec<FunctionReport>,
    pub assumptions: Vec<String>,
    /// Wall-clock time; only recorded on request so reports stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

fn assumptions(plan: &SamplingPlan) -> Vec<String> {
    vec![
        "functions are locally Lipschitz on the region; the Clarke, upper and Clarke-Rockafellar subdifferentials are identified".into(),
        format!(
            "subdifferentials are estimated from exact gradients where smooth, else by gradient sampling within radius {:e}",
            plan.subdiff_radius
        ),
        "strict inequalities use the band 1e-7*(1+|f(x)|+|f(y)|), checked at band/10, band and 10*band".into(),
        "points are drawn from the region interior shrunk by its margin; boundary points are never evaluated".into(),
        "holds-at-samples means no sampled violation, not a proof over the region".into(),
    ]
}

impl Report {
    fn new(config: RunConfig, functions: Vec<FunctionReport>, started: Option<Instant>) -> Report {
        Report {
            schema: SCHEMA.into(),
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            assumptions: assumptions(&config.plan),
            config,
            functions,
            timing: started.map(|t| Timing { elapsed_ms: t.elapsed().as_secs_f64() * 1e3 }),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Report, ConfigError> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema != SCHEMA {
            return Err(ConfigError::Invalid(format!("unsupported report schema `{}`", r.schema)));
        }
        Ok(r)
    }

    pub fn any_refuted(&self) -> bool {
        self.functions.iter().flat_map(|f| &f.verdicts).any(|v| v.verdict == Verdict::Refuted)
    }

    /// One line per property: name, verdict, witness count, max residual.
    pub fn summary_lines(&self) -> Vec<String> {
        let multi = self.functions.len() > 1;
        let mut out = Vec::new();
        for f in &self.functions {
            for v in &f.verdicts {
                let residual = v.max_residual.map_or_else(|| "-".to_string(), |r| format!("{r:.3e}"));
                let prefix = if multi { format!("{} ", f.name) } else { String::new() };
                out.push(format!(
                    "{prefix}{} {} witnesses={} max_residual={residual}",
                    v.property,
                    v.verdict.name(),
                    v.witnesses.len()
                ));
            }
        }
        out
    }

    /// Re-runs every recorded witness from the report alone and returns
    /// `(recorded, replayed)` residual pairs; `None` when the replay no longer fails.
    pub fn replay_witnesses(&self) -> Result<Vec<(f64, Option<f64>)>, ConfigError> {
        let mut out = Vec::new();
        for fr in &self.functions {
            let f = fr.function()?;
            let region = fr.region()?;
            for v in &fr.verdicts {
                for w in &v.witnesses {
                    let r = replay(&f, &region, &self.config.plan, w)?;
                    out.push((w.residual, r.check.outcome.violation().map(|x| x.residual)));
                }
            }
        }
        Ok(out)
    }
}

/// Runs the configured analysis. Timing is recorded only when asked for.
pub fn analyze(config: &RunConfig, timing: bool) -> Result<Report, ConfigError> {
    let started = Instant::now();
    let target = config.target()?;
    let verdicts = classify(&target.function, &target.region, &config.properties, &config.plan)?;
    let fr = target.report(verdicts);
    Ok(Report::new(config.clone(), vec![fr], timing.then_some(started)))
}

fn mismatch(v: &PropertyVerdict, expected: bool) -> Option<Mismatch> {
    let kind = match (expected, v.verdict) {
        (true, Verdict::HoldsAtSamples) | (false, Verdict::Refuted) => return None,
        (_, Verdict::Inconclusive) => MismatchKind::Inconclusive,
        (true, Verdict::Refuted) => MismatchKind::Contradiction,
        (false, Verdict::HoldsAtSamples) if v.counts.pass < MIN_SUPPORT => MismatchKind::Undersampled,
        (false, Verdict::HoldsAtSamples) => MismatchKind::Missed,
    };
    Some(Mismatch { property: v.property, expected, verdict: v.verdict, kind })
}

/// Classifies every entry against its labels. The config's properties and
/// plan are used; its function fields are ignored.
pub fn corpus_report(entries: &[CorpusEntry], config: &RunConfig, timing: bool) -> Result<Report, ConfigError> {
    let started = Instant::now();
    let mut functions = Vec::with_capacity(entries.len());
    for e in entries {
        let target = Target::from_entry(e.clone());
        let verdicts = classify(&target.function, &target.region, &config.properties, &config.plan)?;
        let mut fr = target.report(verdicts);
        fr.mismatches = fr
            .verdicts
            .iter()
            .filter_map(|v| mismatch(v, e.labels[&v.property]))
            .collect();
        functions.push(fr);
    }
    Ok(Report::new(config.clone(), functions, timing.then_some(started)))
}

/// Exit status for a corpus report: 0 when every label matches, 3 when the
/// only disagreements can be explained by too few samples, 4 otherwise.
pub fn corpus_status(report: &Report) -> i32 {
    let kinds: Vec<MismatchKind> = report.functions.iter().flat_map(|f| &f.mismatches).map(|m| m.kind).collect();
    if kinds.is_empty() {
        0
    } else if kinds.iter().any(|k| matches!(k, MismatchKind::Contradiction | MismatchKind::Missed)) {
        4
    } else {
        3
    }
}

pub const BCURVE_HEADER: &str = "lambda,b,lambda_b,strict,weak,degenerate";

/// CSV of `b(λ)` on the open grid `k/(m+1)`, `k = 1..m`. Numbers carry 17
/// significant digits; the separator is always `.`.
pub fn bcurve_csv(f: &FunctionHandle, x: &Point, y: &Point, m: usize) -> Result<String, ConfigError> {
    if m == 0 {
        return Err(ConfigError::Invalid("grid size must be positive".into()));
    }
    for (name, p) in [("x", x), ("y", y)] {
        if p.dim() != f.dim() {
            return Err(ConfigError::Invalid(format!("{name} has dimension {}, expected {}", p.dim(), f.dim())));
        }
    }
    let mut out = String::from(BCURVE_HEADER);
    out.push('\n');
    for k in 1..=m {
        let lambda = k as f64 / (m + 1) as f64;
        let r = compute_b(f, x, y, lambda)?;
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            lambda, r.b, r.lambda_b, r.strict, r.weak, r.degenerate
        )
        .expect("write to string");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>(r#"{"corpus": "affine", "colour": 1}"#).unwrap_err();
        assert!(err.to_string().contains("colour"));
        let err = serde_json::from_str::<RunConfig>(r#"{"plan": {"pears": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("pears"));
    }

    #[test]
    fn partial_plan_takes_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"function": "x1", "plan": {"pairs": 7}}"#).unwrap();
        assert_eq!(c.plan.pairs, 7);
        assert_eq!(c.plan.lambda_grid, SamplingPlan::default().lambda_grid);
        assert_eq!(c.properties, Property::ALL.to_vec());
    }

    #[test]
    fn dimension_is_inferred() {
        let c = RunConfig { function: Some("x1*x3".into()), ..RunConfig::default() };
        let t = c.target().unwrap();
        assert_eq!(t.function.dim(), 3);
        assert_eq!(t.region_text, "box(-1..1, -1..1, -1..1)");
        let c = RunConfig { function: Some("x1".into()), region: Some("box(0..1, 0..1)".into()), ..RunConfig::default() };
        assert_eq!(c.target().unwrap().function.dim(), 2);
    }

    #[test]
    fn target_errors() {
        let both = RunConfig { corpus: Some("affine".into()), function: Some("x1".into()), ..RunConfig::default() };
        assert!(matches!(both.target(), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::default().target(), Err(ConfigError::Invalid(_))));
        let unknown = RunConfig { corpus: Some("nope".into()), ..RunConfig::default() };
        assert!(matches!(unknown.target(), Err(ConfigError::UnknownCorpus(_))));
        let bad = RunConfig { function: Some("min(x1".into()), ..RunConfig::default() };
        let msg = bad.target().unwrap_err().to_string();
        assert!(msg.contains("offset 7"), "{msg}");
        let dims = RunConfig { function: Some("x1".into()), dim: Some(2), region: Some("box(0..1)".into()), ..RunConfig::default() };
        assert!(matches!(dims.target(), Err(ConfigError::Campaign(CampaignError::Dimension { .. }))));
    }

    fn verdict(verdict: Verdict, pass: usize) -> PropertyVerdict {
        PropertyVerdict {
            property: Property::Quasiconvex,
            verdict,
            counts: crate::campaign::Counts { pass, ..Default::default() },
            witnesses: Vec::new(),
            max_residual: None,
        }
    }

    #[test]
    fn mismatch_kinds() {
        use Verdict::*;
        let kind = |v, n, expected| mismatch(&verdict(v, n), expected).map(|m| m.kind);
        assert_eq!(kind(HoldsAtSamples, 50, true), None);
        assert_eq!(kind(Refuted, 0, false), None);
        assert_eq!(kind(Refuted, 50, true), Some(MismatchKind::Contradiction));
        assert_eq!(kind(HoldsAtSamples, 50, false), Some(MismatchKind::Missed));
        assert_eq!(kind(HoldsAtSamples, 3, false), Some(MismatchKind::Undersampled));
        assert_eq!(kind(Inconclusive, 0, false), Some(MismatchKind::Inconclusive));
    }

    #[test]
    fn corpus_status_precedence() {
        let report = |kinds: &[MismatchKind]| {
            let mut r = Report::new(RunConfig::default(), Vec::new(), None);
            r.functions.push(FunctionReport {
                name: "f".into(),
                source: "x1".into(),
                dim: 1,
                region: "box(0..1)".into(),
                verdicts: Vec::new(),
                mismatches: kinds
                    .iter()
                    .map(|&kind| Mismatch { property: Property::Quasiconvex, expected: false, verdict: Verdict::Inconclusive, kind })
                    .collect(),
            });
            corpus_status(&r)
        };
        use MismatchKind::*;
        assert_eq!(report(&[]), 0);
        assert_eq!(report(&[Inconclusive, Undersampled]), 3);
        assert_eq!(report(&[Undersampled, Missed]), 4);
        assert_eq!(report(&[Contradiction]), 4);
    }

    #[test]
    fn bcurve_fractional() {
        let e = corpus_entry("fractional").unwrap();
        let x = Point::from_slice(&[1.0, 0.0]);
        let y = Point::from_slice(&[2.0, 2.0]);
        let csv = bcurve_csv(&e.function, &x, &y, 5).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], BCURVE_HEADER);
        assert_eq!(lines.len(), 6);
        for (k, line) in lines[1..].iter().enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let lambda: f64 = cols[0].parse().unwrap();
            let b: f64 = cols[1].parse().unwrap();
            assert!((lambda - (k + 1) as f64 / 6.0).abs() < 1e-15);
            assert!((b - 2.0 / (1.0 + lambda)).abs() < 1e-12);
            assert_eq!(&cols[3..], ["true", "true", "false"]);
        }
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn bcurve_degenerate_and_affine() {
        let e = corpus_entry("paraboloid").unwrap();
        let x = Point::from_slice(&[0.5, 0.0]);
        let y = Point::from_slice(&[0.0, 0.5]);
        let csv = bcurve_csv(&e.function, &x, &y, 3).unwrap();
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[1].parse::<f64>().unwrap(), 1.0);
            assert_eq!(cols[5], "true");
        }
        let a = corpus_entry("affine").unwrap();
        let y = Point::from_slice(&[-0.5, 0.5]);
        let csv = bcurve_csv(&a.function, &x, &y, 4).unwrap();
        for line in csv.lines().skip(1) {
            let b: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((b - 1.0).abs() < 1e-12);
        }
        assert!(bcurve_csv(&a.function, &Point::from_slice(&[3.0]), &y, 4).is_err());
        let frac = corpus_entry("fractional").unwrap();
        assert!(bcurve_csv(&frac.function, &Point::from_slice(&[0.0, 1.0]), &Point::from_slice(&[0.0, 2.0]), 4).is_err());
    }
}
