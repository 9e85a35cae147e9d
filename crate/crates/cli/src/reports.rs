//! JSON-facing shapes for command output. Every rational is printed exactly
//! (as `num/den` or an integer) and, where useful, paired with a
//! `*_decimal` convenience float.

use agentmix::scalar::to_decimal;
use agentmix::{
    CheckReport, Counterexample, Dist, ExtremaOutcome, Rational, SeparabilityOutcome,
    SymmetryOutcome, ValueRange, ValueResult, Verdict,
};
use serde::Serialize;

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Output of `value` and `upsilon`: the exact value, the tail bound if the
/// environment provides one, and the horizon.
#[derive(Serialize)]
pub struct ValueOut {
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<String>,
    pub t: usize,
}

impl ValueOut {
    pub fn from_result(r: &ValueResult<Rational>) -> Self {
        ValueOut {
            value: r.value.to_string(),
            tail: r.tail.as_ref().map(|s| s.to_string()),
            t: r.t,
        }
    }
}

#[derive(Serialize)]
pub struct CexOut {
    pub location: String,
    pub left: String,
    pub left_decimal: f64,
    pub right: String,
    pub right_decimal: f64,
}

impl CexOut {
    fn from(cex: &Counterexample<Rational>) -> Self {
        CexOut {
            location: cex.location.clone(),
            left: cex.left.to_string(),
            left_decimal: to_decimal(&cex.left),
            right: cex.right.to_string(),
            right_decimal: to_decimal(&cex.right),
        }
    }
}

#[derive(Serialize)]
pub struct SubReport {
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CexOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SubReport {
    fn from(report: &CheckReport<Rational>) -> Self {
        SubReport {
            verdict: verdict_str(report.verdict).to_string(),
            counterexample: report.counterexample.as_ref().map(CexOut::from),
            notes: report.notes.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct RangeOut {
    pub lo: String,
    pub lo_decimal: f64,
    pub hi: String,
    pub hi_decimal: f64,
}

impl RangeOut {
    fn from(range: &ValueRange<Rational>) -> Self {
        RangeOut {
            lo: range.lo.to_string(),
            lo_decimal: to_decimal(&range.lo),
            hi: range.hi.to_string(),
            hi_decimal: to_decimal(&range.hi),
        }
    }
}

/// One line of a check run, emitted as JSON. Op-specific fields stay absent
/// when they do not apply.
#[derive(Serialize, Default)]
pub struct ReportOut {
    pub check: String,
    pub op: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CexOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weak: Option<SubReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong: Option<SubReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside: Option<RangeOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outside: Option<RangeOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_prime_decimal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_decimal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raised: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raised_score: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raised_score_decimal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowered: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowered_score: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lowered_score_decimal: Option<f64>,
}

fn dist_strings(d: &Dist<Rational>) -> Vec<String> {
    d.masses().iter().map(|m| m.to_string()).collect()
}

impl ReportOut {
    pub fn base(check: &str, op: &str) -> Self {
        ReportOut {
            check: check.to_string(),
            op: op.to_string(),
            ..ReportOut::default()
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict != "pass"
    }

    pub fn from_report(check: &str, op: &str, report: &CheckReport<Rational>) -> Self {
        let mut out = ReportOut::base(check, op);
        out.verdict = verdict_str(report.verdict).to_string();
        out.depth = Some(report.depth);
        out.counterexample = report.counterexample.as_ref().map(CexOut::from);
        out.notes = report.notes.clone();
        out
    }

    pub fn from_error(check: &str, op: &str, error: String) -> Self {
        let mut out = ReportOut::base(check, op);
        out.verdict = "error".to_string();
        out.error = Some(error);
        out
    }

    pub fn from_symmetry(check: &str, outcome: &SymmetryOutcome<Rational>) -> Self {
        let mut out = ReportOut::base(check, "symmetry");
        let both_pass = outcome.weak.passed() && outcome.strong.passed();
        out.verdict = if both_pass { "pass" } else { "fail" }.to_string();
        out.depth = Some(outcome.weak.depth);
        out.weak = Some(SubReport::from(&outcome.weak));
        out.strong = Some(SubReport::from(&outcome.strong));
        out.diverged = Some(outcome.diverged);
        out
    }

    pub fn from_separability(check: &str, outcome: &SeparabilityOutcome<Rational>) -> Self {
        let mut out = ReportOut::from_report(check, "separability", &outcome.report);
        out.inside = Some(RangeOut::from(&outcome.inside));
        out.outside = Some(RangeOut::from(&outcome.outside));
        out
    }

    pub fn from_extrema(check: &str, outcome: &ExtremaOutcome<Rational>) -> Self {
        let mut out = ReportOut::from_report(check, "extrema", &outcome.report);
        out.eps_prime = Some(outcome.eps_prime.to_string());
        out.eps_prime_decimal = Some(to_decimal(&outcome.eps_prime));
        out.score = Some(outcome.score.to_string());
        out.score_decimal = Some(to_decimal(&outcome.score));
        out.raised = Some(dist_strings(&outcome.raised));
        out.raised_score = Some(outcome.raised_score.to_string());
        out.raised_score_decimal = Some(to_decimal(&outcome.raised_score));
        out.lowered = Some(dist_strings(&outcome.lowered));
        out.lowered_score = Some(outcome.lowered_score.to_string());
        out.lowered_score_decimal = Some(to_decimal(&outcome.lowered_score));
        out
    }
}
