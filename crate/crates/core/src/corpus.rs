//! Generalized-convexity properties and the built-in labelled corpus.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::function::FunctionHandle;
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Pseudoconvex,
    Pseudoconcave,
    Pseudolinear,
    Quasiconvex,
    Quasiconcave,
    Quasilinear,
    SemistrictlyQuasiconvex,
    SemistrictlyQuasiconcave,
    SemistrictlyQuasilinear,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::Pseudoconvex,
        Property::Pseudoconcave,
        Property::Pseudolinear,
        Property::Quasiconvex,
        Property::Quasiconcave,
        Property::Quasilinear,
        Property::SemistrictlyQuasiconvex,
        Property::SemistrictlyQuasiconcave,
        Property::SemistrictlyQuasilinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Pseudoconvex => "pseudoconvex",
            Property::Pseudoconcave => "pseudoconcave",
            Property::Pseudolinear => "pseudolinear",
            Property::Quasiconvex => "quasiconvex",
            Property::Quasiconcave => "quasiconcave",
            Property::Quasilinear => "quasilinear",
            Property::SemistrictlyQuasiconvex => "semistrictly-quasiconvex",
            Property::SemistrictlyQuasiconcave => "semistrictly-quasiconcave",
            Property::SemistrictlyQuasilinear => "semistrictly-quasilinear",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "all" {
            return Err("`all` expands to a list; use parse_properties".into());
        }
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown property `{s}`"))
    }
}

/// Parses a comma-separated property list; `all` selects every property.
pub fn parse_properties(text: &str) -> Result<Vec<Property>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if part == "all" {
            out.extend(Property::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err("no properties requested".into());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
    pub region_text: &'static str,
    pub function: FunctionHandle,
    pub region: Region,
    pub labels: BTreeMap<Property, bool>,
}

impl CorpusEntry {
    pub fn dim(&self) -> usize {
        self.function.dim()
    }
}

struct Def {
    name: &'static str,
    source: &'static str,
    dim: usize,
    region: &'static str,
    /// Properties that fail; everything else holds.
    fails: &'static [Property],
}

use Property::*;

const DEFS: [Def; 7] = [
    Def { name: "affine", source: "2*x1 - x2 + 0.5", dim: 2, region: "box(-1..1, -1..1), margin(0.01)", fails: &[] },
    Def { name: "fractional", source: "x2/x1", dim: 2, region: "x1 > 0, box(0..2, -1..1), margin(0.05)", fails: &[] },
    Def { name: "arctan", source: "atan(x1)", dim: 1, region: "box(-3..3), margin(0.01)", fails: &[] },
    Def {
        name: "cubic",
        source: "x1^3",
        dim: 1,
        region: "box(-1..1), margin(0.01)",
        fails: &[Pseudoconvex, Pseudoconcave, Pseudolinear],
    },
    Def {
        name: "ramp",
        source: "x1 + abs(x1)",
        dim: 1,
        region: "box(-1..1), margin(0.01)",
        fails: &[Pseudoconcave, Pseudolinear, SemistrictlyQuasiconcave, SemistrictlyQuasilinear],
    },
    Def { name: "piecewise", source: "x1 + max(x1, 0)", dim: 1, region: "box(-1..1), margin(0.01)", fails: &[] },
    Def {
        name: "paraboloid",
        source: "x1^2 + x2^2",
        dim: 2,
        region: "box(-1..1, -1..1), margin(0.01)",
        fails: &[
            Pseudoconcave,
            Pseudolinear,
            Quasiconcave,
            Quasilinear,
            SemistrictlyQuasiconcave,
            SemistrictlyQuasilinear,
        ],
    },
];

/// The seven labelled corpus functions, in fixed order.
pub fn corpus() -> Vec<CorpusEntry> {
    DEFS
        .iter()
        .map(|s| CorpusEntry {
            name: s.name,
            source: s.source,
            region_text: s.region,
            function: FunctionHandle::parse(s.name, s.source, s.dim).expect("corpus source parses"),
            region: Region::parse(s.region).expect("corpus region is valid"),
            labels: Property::ALL.into_iter().map(|p| (p, !s.fails.contains(&p))).collect(),
        })
        .collect()
}

pub fn corpus_entry(name: &str) -> Option<CorpusEntry> {
    corpus().into_iter().find(|e| e.name == name)
}
