//! Check records and the machine-readable verification report.
//!
//! Every verification suite flattens into a list of records. A record either
//! compares a computed canonical display against a frozen reference display,
//! or asserts an internal property outright. The three statuses mean:
//!
//! * `Pass`: the check holds.
//! * `Fail`: an internal identity or a numeric budget is violated. Any fail
//!   makes the whole report fail.
//! * `Discrepancy`: the engine's exact value disagrees with a recorded
//!   reference display. Discrepancies are first class results, not errors;
//!   they document where the recorded displays are internally inconsistent,
//!   and they never fail a run.
//!
//! Reports from the same inputs are byte-identical: record order is the
//! insertion order of the (serial, deterministic) suites, the config echo is
//! key-sorted, and both renderings avoid non-deterministic formatting.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Result;

/// Versioned schema identifier embedded in every report.
pub const SCHEMA: &str = "stark-verify-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Discrepancy,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Discrepancy => "discrepancy",
        };
        f.write_str(s)
    }
}

/// One verified fact. `subject` says what is being checked in domain words;
/// internal consistency checks with no external meaning use `"plumbing"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub subject: String,
    pub status: Status,
    pub computed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl CheckRecord {
    /// Boolean check with no reference display: pass or fail.
    pub fn asserted(
        id: impl Into<String>,
        subject: impl Into<String>,
        ok: bool,
        computed: impl Into<String>,
    ) -> Self {
        CheckRecord {
            id: id.into(),
            subject: subject.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            computed: computed.into(),
            reference: None,
            notes: String::new(),
        }
    }

    /// Comparison against a frozen reference display. A mismatch is a
    /// discrepancy, not a failure; callers must secure engine correctness
    /// through separate asserted checks before trusting that reading.
    pub fn compared(
        id: impl Into<String>,
        subject: impl Into<String>,
        computed: impl Into<String>,
        reference: impl Into<String>,
    ) -> Self {
        let computed = computed.into();
        let reference = reference.into();
        let status = if computed == reference {
            Status::Pass
        } else {
            Status::Discrepancy
        };
        CheckRecord {
            id: id.into(),
            subject: subject.into(),
            status,
            computed,
            reference: Some(reference),
            notes: String::new(),
        }
    }

    /// Comparison against a reference display whose agreement the caller
    /// has already decided by an exact procedure, typically equality modulo
    /// a constraint ideal. Disagreement is a discrepancy, as in `compared`.
    pub fn reconciled(
        id: impl Into<String>,
        subject: impl Into<String>,
        agrees: bool,
        computed: impl Into<String>,
        reference: impl Into<String>,
    ) -> Self {
        CheckRecord {
            id: id.into(),
            subject: subject.into(),
            status: if agrees {
                Status::Pass
            } else {
                Status::Discrepancy
            },
            computed: computed.into(),
            reference: Some(reference.into()),
            notes: String::new(),
        }
    }

    /// Numeric budget check: passes iff `|value| <= tol`.
    pub fn bounded(
        id: impl Into<String>,
        subject: impl Into<String>,
        value: f64,
        tol: f64,
    ) -> Self {
        CheckRecord {
            id: id.into(),
            subject: subject.into(),
            status: if value.abs() <= tol {
                Status::Pass
            } else {
                Status::Fail
            },
            computed: format!("{:.3e} within {:.0e}", value, tol),
            reference: None,
            notes: String::new(),
        }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Schema identifier, see [`SCHEMA`].
    pub schema: String,
    /// Engine name and version that produced the report.
    pub engine: String,
    /// Echo of the effective input configuration.
    pub config: BTreeMap<String, String>,
    pub records: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport {
            schema: SCHEMA.to_string(),
            engine: format!("stark-core {}", env!("CARGO_PKG_VERSION")),
            config: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn set_config(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.config.insert(key.into(), value.into());
    }

    /// Appends a record. Check ids are compiled in, so a duplicate is a
    /// programming error and panics rather than producing an ambiguous report.
    pub fn push(&mut self, record: CheckRecord) {
        assert!(
            self.records.iter().all(|r| r.id != record.id),
            "duplicate check id {:?}",
            record.id
        );
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        for r in records {
            self.push(r);
        }
    }

    /// (pass, discrepancy, fail) counts.
    pub fn tally(&self) -> (usize, usize, usize) {
        let mut t = (0, 0, 0);
        for r in &self.records {
            match r.status {
                Status::Pass => t.0 += 1,
                Status::Discrepancy => t.1 += 1,
                Status::Fail => t.2 += 1,
            }
        }
        t
    }

    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.status == Status::Fail)
    }

    /// Process exit code contract: 0 all pass (discrepancies allowed),
    /// 1 any fail. Usage errors (2) are the caller's concern.
    pub fn exit_code(&self) -> i32 {
        if self.failed() {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

impl Default for VerificationReport {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for VerificationReport {
    /// Human-readable rendering: one status line per record, with computed
    /// and reference displays spelled out for anything that is not a pass.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verification report ({})", self.schema)?;
        writeln!(f, "engine: {}", self.engine)?;
        for (k, v) in &self.config {
            writeln!(f, "config: {} = {}", k, v)?;
        }
        writeln!(f)?;
        for r in &self.records {
            writeln!(f, "[{:^11}] {}  {}", r.status, r.id, r.subject)?;
            if r.status != Status::Pass {
                writeln!(f, "{:14}computed:  {}", "", r.computed)?;
                if let Some(reference) = &r.reference {
                    writeln!(f, "{:14}reference: {}", "", reference)?;
                }
            }
            if !r.notes.is_empty() {
                writeln!(f, "{:14}note: {}", "", r.notes)?;
            }
        }
        let (pass, disc, fail) = self.tally();
        writeln!(f)?;
        writeln!(
            f,
            "summary: {} pass, {} discrepancy, {} fail",
            pass, disc, fail
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_three_constructors_pick_the_right_status() {
        let a = CheckRecord::asserted("a", "plumbing", true, "ok");
        assert_eq!(a.status, Status::Pass);
        let b = CheckRecord::asserted("b", "plumbing", false, "bad");
        assert_eq!(b.status, Status::Fail);
        let c = CheckRecord::compared("c", "display", "x + y", "x + y");
        assert_eq!(c.status, Status::Pass);
        let d = CheckRecord::compared("d", "display", "x + y", "x - y");
        assert_eq!(d.status, Status::Discrepancy);
        assert_eq!(d.reference.as_deref(), Some("x - y"));
        let e = CheckRecord::bounded("e", "drift", 1.0e-13, 1.0e-12);
        assert_eq!(e.status, Status::Pass);
        let g = CheckRecord::bounded("g", "drift", -2.0e-12, 1.0e-12);
        assert_eq!(g.status, Status::Fail);
    }

    #[test]
    fn discrepancies_do_not_fail_the_report() {
        let mut rep = VerificationReport::new();
        rep.push(CheckRecord::asserted("ok", "plumbing", true, "fine"));
        rep.push(CheckRecord::compared("typo", "display", "a", "b"));
        assert!(!rep.failed());
        assert_eq!(rep.exit_code(), 0);
        assert_eq!(rep.tally(), (1, 1, 0));

        rep.push(CheckRecord::asserted("broken", "plumbing", false, "no"));
        assert!(rep.failed());
        assert_eq!(rep.exit_code(), 1);
    }

    #[test]
    #[should_panic(expected = "duplicate check id")]
    fn duplicate_ids_are_rejected() {
        let mut rep = VerificationReport::new();
        rep.push(CheckRecord::asserted("same", "plumbing", true, "x"));
        rep.push(CheckRecord::asserted("same", "plumbing", true, "y"));
    }

    #[test]
    fn rendering_is_deterministic_and_self_describing() {
        let mut rep = VerificationReport::new();
        rep.set_config("h", "1");
        rep.set_config("eps", "1/1000");
        rep.push(
            CheckRecord::compared("r1", "vertical part", "2*x", "3*x")
                .with_notes("coefficient delta 1"),
        );

        let json = rep.to_json().unwrap();
        assert_eq!(json, rep.to_json().unwrap());
        assert!(json.contains(SCHEMA));
        assert!(json.contains("\"status\": \"discrepancy\""));

        let text = format!("{}", rep);
        assert_eq!(text, format!("{}", rep));
        assert!(text.contains("summary: 0 pass, 1 discrepancy, 0 fail"));
        assert!(text.contains("reference: 3*x"));
        assert!(text.contains("config: eps = 1/1000"));

        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.records.len(), 1);
        assert_eq!(back.records[0].notes, "coefficient delta 1");
    }
}
