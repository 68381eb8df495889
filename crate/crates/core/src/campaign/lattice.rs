use serde::{Deserialize, Serialize};

use super::{PropertyVerdict, Verdict};
use crate::corpus::Property;
use Property::*;

/// `(antecedent, consequent)` pairs that hold as theorems.
pub const IMPLICATIONS: [(Property, Property); 9] = [
    (Pseudoconvex, Quasiconvex),
    (Pseudoconcave, Quasiconcave),
    (SemistrictlyQuasiconvex, Quasiconvex),
    (SemistrictlyQuasiconcave, Quasiconcave),
    (Pseudolinear, SemistrictlyQuasiconvex),
    (Pseudolinear, SemistrictlyQuasiconcave),
    (Pseudolinear, SemistrictlyQuasilinear),
    (Pseudolinear, Pseudoconvex),
    (Pseudolinear, Pseudoconcave),
];

/// An antecedent that holds at samples while its consequent is refuted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeViolation {
    pub function: String,
    pub antecedent: Property,
    pub consequent: Property,
}

/// Self-diagnostic: any violation points at a bug, since every implication
/// is a theorem. Pairs whose properties were not both classified are skipped.
pub fn check_implication_lattice(results: &[(String, Vec<PropertyVerdict>)]) -> Vec<LatticeViolation> {
    let mut out = Vec::new();
    for (name, verdicts) in results {
        let of = |p: Property| verdicts.iter().find(|v| v.property == p).map(|v| v.verdict);
        for (a, c) in IMPLICATIONS {
            if of(a) == Some(Verdict::HoldsAtSamples) && of(c) == Some(Verdict::Refuted) {
                out.push(LatticeViolation { function: name.clone(), antecedent: a, consequent: c });
            }
        }
    }
    out
}
