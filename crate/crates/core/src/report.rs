use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of a check. Sampling-based checks can fail to decide, and that is
/// kept distinct from a verified `False`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    /// Conjunction: any `False` wins, then any `Inconclusive`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::True,
        }
    }

    pub fn all(it: impl IntoIterator<Item = Verdict>) -> Verdict {
        it.into_iter().fold(Verdict::True, Verdict::and)
    }

    pub fn is_true(self) -> bool {
        self == Verdict::True
    }

    /// Process exit code: 0 true, 1 false, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::True => 0,
            Verdict::False => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::True => "true",
            Verdict::False => "false",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub verdict: Verdict,
    pub detail: String,
}

/// Data sufficient to redo one rank decision by hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<String>,
    pub mode: String,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub expected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_pivot_log2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_log2: Option<f64>,
    pub marginal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub verdicts: Vec<Check>,
    pub witnesses: Vec<Witness>,
}

impl VerificationReport {
    pub fn new(family: impl Into<String>, seed: u64) -> Self {
        VerificationReport {
            family: family.into(),
            seed,
            verdict: Verdict::True,
            verdicts: Vec::new(),
            witnesses: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, verdict: Verdict, detail: impl Into<String>) {
        self.verdict = self.verdict.and(verdict);
        self.verdicts.push(Check {
            label: label.into(),
            verdict,
            detail: detail.into(),
        });
    }

    pub fn witness(&mut self, w: Witness) {
        self.witnesses.push(w);
    }

    /// Appends all checks and witnesses of `other`, prefixing labels.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for c in other.verdicts {
            self.push(format!("{prefix}{}", c.label), c.verdict, c.detail);
        }
        for mut w in other.witnesses {
            w.label = format!("{prefix}{}", w.label);
            self.witnesses.push(w);
        }
        self.verdict = self.verdict.and(other.verdict);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.verdicts.iter().filter(|c| c.verdict != Verdict::True)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjunction() {
        use Verdict::*;
        assert_eq!(True.and(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.and(False), False);
        assert_eq!(Verdict::all([True, True]), True);
        assert_eq!(Verdict::all([]), True);
    }

    #[test]
    fn verdict_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&Verdict::Inconclusive).unwrap(), "\"inconclusive\"");
        let mut r = VerificationReport::new("f", 3);
        r.push("a", Verdict::True, "");
        r.push("b", Verdict::False, "x");
        assert_eq!(r.verdict, Verdict::False);
        assert_eq!(r.failures().count(), 1);
    }
}
