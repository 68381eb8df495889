//! Command-line front end: `analyze`, `bcurve`, `corpus`.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{corpus, parse_properties, Property};
use crate::point::Point;
use crate::report::{analyze, bcurve_csv, corpus_report, corpus_status, ConfigError, Report, RunConfig};

pub const SEED_ENV: &str = "GENCVX_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REFUTED: i32 = 2;
pub const EXIT_STARVED: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gencvx", version, about = "Sample-based checks of generalized convexity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one function and write a JSON report.
    Analyze(Common),
    /// Emit b(λ) along one segment as CSV.
    Bcurve(BcurveArgs),
    /// Check every corpus entry against its labels.
    Corpus(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Expression over x1..xn.
    #[arg(long, allow_hyphen_values = true)]
    pub function: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Name of a built-in corpus entry.
    #[arg(long)]
    pub corpus: Option<String>,
    /// e.g. "x1 > 0, box(0..2, -1..1), margin(0.05)".
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Comma-separated property names, or `all`.
    #[arg(long)]
    pub properties: Option<String>,
    /// Number of sampled pairs.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub lambda_grid: Option<usize>,
    /// Falls back to $GENCVX_SEED, then 42.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; `-` writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated decreasing step sizes.
    #[arg(long, value_delimiter = ',')]
    pub clarke_steps: Option<Vec<f64>>,
    #[arg(long)]
    pub clarke_probes: Option<usize>,
    #[arg(long)]
    pub subdiff_radius: Option<f64>,
    #[arg(long)]
    pub subdiff_count: Option<usize>,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BcurveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Segment start, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub x: Vec<f64>,
    /// Segment end, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y: Vec<f64>,
}

/// Merges config file, flags and the seed environment variable, in that
/// order of increasing precedence except that the environment seed is only
/// used when neither the flag nor the file sets one.
pub fn resolve_config(args: &Common, env_seed: Option<&str>) -> Result<RunConfig, ConfigError> {
    let (mut c, file_seed) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let has_seed = value.get("plan").and_then(|p| p.get("seed")).is_some();
            (serde_json::from_value::<RunConfig>(value)?, has_seed)
        }
        None => (RunConfig::default(), false),
    };
    if args.function.is_some() || args.corpus.is_some() {
        c.function = args.function.clone();
        c.corpus = args.corpus.clone();
    }
    if args.dim.is_some() {
        c.dim = args.dim;
    }
    if args.region.is_some() {
        c.region = args.region.clone();
    }
    if let Some(p) = &args.properties {
        c.properties = parse_properties(p).map_err(ConfigError::Invalid)?;
    }
    if let Some(n) = args.samples {
        c.plan.pairs = n;
    }
    if let Some(m) = args.lambda_grid {
        c.plan.lambda_grid = m;
    }
    if let Some(s) = &args.clarke_steps {
        c.plan.clarke_steps = s.clone();
    }
    if let Some(k) = args.clarke_probes {
        c.plan.clarke_probes = k;
    }
    if let Some(r) = args.subdiff_radius {
        c.plan.subdiff_radius = r;
    }
    if args.subdiff_count.is_some() {
        c.plan.subdiff_count = args.subdiff_count;
    }
    if args.out.is_some() {
        c.out = args.out.clone();
    }
    match (args.seed, file_seed, env_seed) {
        (Some(s), _, _) => c.plan.seed = s,
        (None, false, Some(s)) => {
            c.plan.seed = s
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{s}` is not an unsigned integer")))?
        }
        _ => {}
    }
    c.plan.validate()?;
    Ok(c)
}

/// Writes via a sibling temporary file so a failed run never leaves a partial file.
fn write_output(path: &Path, content: &str) -> Result<(), ConfigError> {
    if path == Path::new("-") {
        std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        return Ok(());
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let io = |source| ConfigError::Io { path: path.into(), source };
    std::fs::write(&tmp, content).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), ConfigError> {
    match out {
        Some(p) => {
            write_output(p, &report.to_json())?;
            if p != Path::new("-") {
                for line in report.summary_lines() {
                    println!("{line}");
                }
            }
        }
        None => {
            for line in report.summary_lines() {
                println!("{line}");
            }
        }
    }
    Ok(())
}

fn cmd_analyze(args: &Common, env_seed: Option<&str>) -> Result<i32, ConfigError> {
    let config = resolve_config(args, env_seed)?;
    let report = analyze(&config, args.timing)?;
    emit(&report, config.out.as_deref())?;
    Ok(if report.any_refuted() { EXIT_REFUTED } else { EXIT_OK })
}

fn cmd_corpus(args: &Common, env_seed: Option<&str>) -> Result<i32, ConfigError> {
    let config = resolve_config(args, env_seed)?;
    if config.function.is_some() {
        return Err(ConfigError::Invalid("corpus does not take --function".into()));
    }
    let mut entries = corpus();
    if let Some(name) = &config.corpus {
        entries.retain(|e| e.name == name);
        if entries.is_empty() {
            return Err(ConfigError::UnknownCorpus(name.clone()));
        }
    }
    let report = corpus_report(&entries, &config, args.timing)?;
    emit(&report, config.out.as_deref())?;
    for f in &report.functions {
        for m in &f.mismatches {
            eprintln!(
                "mismatch: {} {} expected {} got {} ({:?})",
                f.name,
                m.property,
                if m.expected { "holds" } else { "refuted" },
                m.verdict.name(),
                m.kind
            );
        }
    }
    let status = corpus_status(&report);
    if status == EXIT_STARVED {
        eprintln!("insufficient sampling: some verdicts are inconclusive");
    }
    Ok(status)
}

fn cmd_bcurve(args: &BcurveArgs, env_seed: Option<&str>) -> Result<i32, ConfigError> {
    let config = resolve_config(&args.common, env_seed)?;
    let target = config.target()?;
    let point = |v: &[f64]| Point::new(v.to_vec()).map_err(|e| ConfigError::Invalid(e.to_string()));
    let (x, y) = (point(&args.x)?, point(&args.y)?);
    for (name, p) in [("x", &x), ("y", &y)] {
        if p.dim() == target.region.dim() && !target.region.contains(p.coords()) {
            eprintln!("warning: {name} = {p} lies outside the region {}", target.region_text);
        }
    }
    let m = args.common.lambda_grid.unwrap_or(config.plan.lambda_grid);
    let csv = bcurve_csv(&target.function, &x, &y, m)?;
    match &config.out {
        Some(p) => write_output(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let env_seed = env_seed.as_deref();
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, env_seed),
        Command::Bcurve(b) => cmd_bcurve(b, env_seed),
        Command::Corpus(a) => cmd_corpus(a, env_seed),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

/// Property names accepted by `--properties`.
pub fn property_names() -> Vec<&'static str> {
    Property::ALL.iter().map(|p| p.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(args: &[&str]) -> Common {
        let mut v = vec!["gencvx", "analyze"];
        v.extend_from_slice(args);
        match Cli::try_parse_from(v).unwrap().command {
            Command::Analyze(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn seed_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.json");
        std::fs::write(&with, r#"{"corpus": "affine", "plan": {"seed": 5}}"#).unwrap();
        let without = dir.path().join("without.json");
        std::fs::write(&without, r#"{"corpus": "affine"}"#).unwrap();
        let w = with.to_str().unwrap();
        let wo = without.to_str().unwrap();

        assert_eq!(resolve_config(&common(&["--corpus", "affine"]), None).unwrap().plan.seed, 42);
        assert_eq!(resolve_config(&common(&["--corpus", "affine"]), Some("9")).unwrap().plan.seed, 9);
        assert_eq!(resolve_config(&common(&["--config", w]), Some("9")).unwrap().plan.seed, 5);
        assert_eq!(resolve_config(&common(&["--config", wo]), Some("9")).unwrap().plan.seed, 9);
        assert_eq!(resolve_config(&common(&["--config", w, "--seed", "7"]), Some("9")).unwrap().plan.seed, 7);
        assert!(resolve_config(&common(&["--corpus", "affine"]), Some("x")).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"function": "x1^2", "dim": 1, "plan": {"pairs": 10, "lambda_grid": 9}}"#).unwrap();
        let c = resolve_config(
            &common(&["--config", path.to_str().unwrap(), "--samples", "20", "--properties", "quasiconvex,pseudoconvex"]),
            None,
        )
        .unwrap();
        assert_eq!(c.plan.pairs, 20);
        assert_eq!(c.plan.lambda_grid, 9);
        assert_eq!(c.function.as_deref(), Some("x1^2"));
        assert_eq!(c.properties, vec![Property::Pseudoconvex, Property::Quasiconvex]);
        let c = resolve_config(&common(&["--config", path.to_str().unwrap(), "--corpus", "cubic"]), None).unwrap();
        assert_eq!((c.corpus.as_deref(), c.function.as_deref()), (Some("cubic"), None));
    }

    #[test]
    fn bad_flags_are_errors() {
        assert!(resolve_config(&common(&["--samples", "0"]), None).is_err());
        assert!(resolve_config(&common(&["--properties", "convexish"]), None).is_err());
        assert!(resolve_config(&common(&["--clarke-steps", "1e-3,1e-2"]), None).is_err());
        assert_eq!(run(["gencvx", "analyze", "--bogus"]), EXIT_ERROR);
        assert_eq!(run(["gencvx", "--version"]), EXIT_OK);
    }

    #[test]
    fn clarke_steps_list() {
        let c = resolve_config(&common(&["--clarke-steps", "1e-3,1e-4,1e-5"]), None).unwrap();
        assert_eq!(c.plan.clarke_steps, vec![1e-3, 1e-4, 1e-5]);
    }

    #[test]
    fn property_names_round_trip() {
        let all = property_names().join(",");
        assert_eq!(parse_properties(&all).unwrap(), Property::ALL.to_vec());
    }
}
