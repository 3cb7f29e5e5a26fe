//! Assessment report: the JSON document and its text rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::assessor::{Finding, NodeAccessRecord, ServerInfo, Severity};
use crate::discovery::{sort_key, ProbeResult};
use crate::identity::CertificateSummary;
use crate::policy::{classify_policy, PolicyClass};
use crate::services::{EndpointDescriptor, SecurityMode, UserTokenPolicy};

pub const SCHEMA_VERSION: &str = "1";
pub const SCHEMA_JSON: &str = include_str!("../../../schema/report.v1.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "text" => Ok(OutputFormat::Text),
            _ => Err(format!(
                "unknown output format {s:?} (expected json or text)"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub total: usize,
    pub critical: usize,
    pub high: usize,
    pub medium: usize,
    pub low: usize,
    pub info: usize,
}

impl SeverityCounts {
    pub fn of<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> Self {
        let mut c = SeverityCounts::default();
        for f in findings {
            c.total += 1;
            *match f.severity {
                Severity::Critical => &mut c.critical,
                Severity::High => &mut c.high,
                Severity::Medium => &mut c.medium,
                Severity::Low => &mut c.low,
                Severity::Info => &mut c.info,
            } += 1;
        }
        c
    }
}

/// An advertised endpoint without its certificate bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSummary {
    pub endpoint_url: String,
    pub security_policy_uri: String,
    pub policy_class: PolicyClass,
    pub security_mode: SecurityMode,
    pub security_level: u8,
    pub user_token_policies: Vec<UserTokenPolicy>,
}

impl From<&EndpointDescriptor> for EndpointSummary {
    fn from(e: &EndpointDescriptor) -> Self {
        EndpointSummary {
            endpoint_url: e.endpoint_url.clone(),
            security_policy_uri: e.security_policy_uri.clone(),
            policy_class: classify_policy(&e.security_policy_uri).class,
            security_mode: e.message_security_mode,
            security_level: e.security_level,
            user_token_policies: e.user_token_policies.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkippedTest {
    pub test: String,
    pub reason: String,
}

impl SkippedTest {
    pub fn new(test: impl Into<String>, reason: impl Into<String>) -> Self {
        SkippedTest {
            test: test.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetAssessment {
    pub host: String,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    pub endpoints: Vec<EndpointSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_info: Option<ServerInfo>,
    pub findings: Vec<Finding>,
    pub node_access_records: Vec<NodeAccessRecord>,
    pub skipped_tests: Vec<SkippedTest>,
    pub warnings: Vec<String>,
}

impl TargetAssessment {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        TargetAssessment {
            host: host.into(),
            port,
            ..Default::default()
        }
    }

    pub fn skip(&mut self, test: &str, reason: impl Into<String>) {
        self.skipped_tests.push(SkippedTest::new(test, reason));
    }

    /// Severity descending, then rule, subject and id; duplicates by id dropped.
    pub fn normalize(&mut self) {
        self.findings.sort_by(|a, b| {
            b.severity
                .cmp(&a.severity)
                .then_with(|| a.rule.cmp(&b.rule))
                .then_with(|| a.subject.cmp(&b.subject))
                .then_with(|| a.id.cmp(&b.id))
        });
        let mut seen = BTreeSet::new();
        self.findings.retain(|f| seen.insert(f.id.clone()));
        self.node_access_records
            .sort_by(|a, b| (a.identity_used, &a.node).cmp(&(b.identity_used, &b.node)));
        self.skipped_tests.sort();
        self.skipped_tests.dedup();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub schema_version: String,
    pub tool_version: String,
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub targets: Vec<String>,
    pub probe_results: Vec<ProbeResult>,
    pub assessments: Vec<TargetAssessment>,
    pub warnings: Vec<String>,
    pub summary: SeverityCounts,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl AssessmentReport {
    pub fn new(command: impl Into<String>) -> Self {
        let now = now_rfc3339();
        AssessmentReport {
            schema_version: SCHEMA_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            started_at: now.clone(),
            finished_at: now,
            targets: Vec::new(),
            probe_results: Vec::new(),
            assessments: Vec::new(),
            warnings: Vec::new(),
            summary: SeverityCounts::default(),
        }
    }

    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.assessments.iter().flat_map(|a| a.findings.iter())
    }

    /// Sorts every list and recomputes the summary.
    pub fn finalize(&mut self) {
        for a in &mut self.assessments {
            a.normalize();
        }
        self.assessments.sort_by_key(|a| sort_key(&a.host, a.port));
        crate::discovery::sort_results(&mut self.probe_results);
        self.summary = SeverityCounts::of(self.findings());
    }

    pub fn max_severity(&self) -> Option<Severity> {
        self.findings().map(|f| f.severity).max()
    }

    /// 1 when any finding is High or Critical, else 0.
    pub fn exit_code(&self) -> i32 {
        exit_code_for(self.findings())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn render(&self, format: OutputFormat) -> Vec<u8> {
        match format {
            OutputFormat::Json => {
                let mut s = self.to_json();
                s.push('\n');
                s.into_bytes()
            }
            OutputFormat::Text => render_text(self).into_bytes(),
        }
    }
}

pub fn exit_code_for<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> i32 {
    i32::from(findings.into_iter().any(|f| f.severity >= Severity::High))
}

fn render_text(r: &AssessmentReport) -> String {
    let mut out = String::new();
    let s = &r.summary;
    let _ = writeln!(
        out,
        "uascan {} report (schema {})",
        r.command, r.schema_version
    );
    let _ = writeln!(out, "tool version {}", r.tool_version);
    let _ = writeln!(out, "started  {}", r.started_at);
    let _ = writeln!(out, "finished {}", r.finished_at);
    let _ = writeln!(
        out,
        "findings {} (critical {}, high {}, medium {}, low {}, info {})",
        s.total, s.critical, s.high, s.medium, s.low, s.info
    );
    if !r.probe_results.is_empty() {
        let _ = writeln!(out, "\nprobe results");
        for p in &r.probe_results {
            let mut line = format!("  {:<28} {:?}", format!("{}:{}", p.host, p.port), p.verdict);
            if let Some(st) = &p.error_status {
                let _ = write!(line, " ({st})");
            }
            let _ = writeln!(out, "{line}");
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    for a in &r.assessments {
        let _ = write!(out, "\n== {}:{}", a.host, a.port);
        if let Some(u) = &a.endpoint_url {
            let _ = write!(out, " ({u})");
        }
        let _ = writeln!(out, " ==");
        if let Some(info) = &a.server_info {
            if !info.application_uri.is_empty() {
                let _ = writeln!(out, "application {}", info.application_uri);
            }
            let b = &info.build_info;
            if !b.product_name.is_empty() {
                let _ = writeln!(
                    out,
                    "software    {} {} (build {})",
                    b.product_name, b.software_version, b.build_number
                );
            }
        }
        let _ = writeln!(out, "endpoints   {}", a.endpoints.len());
        for e in &a.endpoints {
            let policy = e
                .security_policy_uri
                .rsplit_once('#')
                .map_or(e.security_policy_uri.as_str(), |p| p.1);
            let _ = writeln!(
                out,
                "  {:<22} {:<15} level {:<3} {:?}",
                policy,
                format!("{:?}", e.security_mode),
                e.security_level,
                e.policy_class
            );
        }
        for sev in Severity::ALL {
            let group: Vec<&Finding> = a.findings.iter().filter(|f| f.severity == sev).collect();
            if group.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{sev}");
            for f in group {
                let _ = write!(out, "  {} {} {}", f.id, f.rule, f.title);
                if let Some(subj) = &f.subject {
                    let _ = write!(out, " [{subj}]");
                }
                let _ = writeln!(out);
                let ev: Vec<String> = f.evidence.iter().map(|(k, v)| format!("{k}={v}")).collect();
                if !ev.is_empty() {
                    let _ = writeln!(out, "      evidence: {}", ev.join(", "));
                }
                let _ = writeln!(out, "      fix: {}", f.remediation);
            }
        }
        for t in &a.skipped_tests {
            let _ = writeln!(out, "skipped {}: {}", t.test, t.reason);
        }
        for w in &a.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessor::{Rule, TargetRef};
    use crate::evidence;

    fn report_with(rules: &[Rule]) -> AssessmentReport {
        let mut r = AssessmentReport::new("full");
        let mut a = TargetAssessment::new("10.0.0.1", 4840);
        let t = TargetRef::new("10.0.0.1", 4840);
        for (i, rule) in rules.iter().enumerate() {
            a.findings.push(Finding::new(
                *rule,
                &t,
                Some(format!("s{i}")),
                evidence! {"n" => i},
            ));
        }
        r.assessments.push(a);
        r.finalize();
        r
    }

    #[test]
    fn empty_report_is_valid_json_with_zero_counts() {
        let r = report_with(&[]);
        let v: serde_json::Value = serde_json::from_slice(&r.render(OutputFormat::Json)).unwrap();
        assert_eq!(v["summary"]["total"], 0);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn three_findings_counted() {
        let r = report_with(&[Rule::ModeNone, Rule::SignOnly, Rule::DefaultCredentials]);
        assert_eq!(r.summary.total, 3);
        assert_eq!(
            (r.summary.critical, r.summary.high, r.summary.low),
            (1, 1, 1)
        );
        assert_eq!(r.assessments[0].findings[0].severity, Severity::Critical);
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn json_round_trip() {
        let r = report_with(&[Rule::AnonymousReadable, Rule::ServerSoftware]);
        assert_eq!(AssessmentReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn text_groups_by_severity_descending() {
        let r = report_with(&[
            Rule::ServerSoftware,
            Rule::AnonymousWritable,
            Rule::PermissionMismatch,
        ]);
        let text = String::from_utf8(r.render(OutputFormat::Text)).unwrap();
        let c = text.find("\nCritical").unwrap();
        let m = text.find("\nMedium").unwrap();
        let i = text.find("\nInfo").unwrap();
        assert!(c < m && m < i);
    }
}
