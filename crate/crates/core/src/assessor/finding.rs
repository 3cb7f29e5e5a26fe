//! Findings, severities and the rubric they come from.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUBRIC_TOML: &str = include_str!("../../../../data/severity-rubric.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Transport,
    EndpointConfig,
    Authentication,
    AccessControl,
    Availability,
    Info,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Ascending order: `Info < Low < ... < Critical`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Low,
    Medium,
    High,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 5] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
        Severity::Info,
    ];
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Severity::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown severity {s:?}"))
    }
}

/// Every rule the assessor can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    InsecurePolicy,
    DeprecatedPolicy,
    UnknownPolicy,
    ModeNone,
    SignOnly,
    AnonymousOnNone,
    AnonymousOnSecure,
    SecurityLevelInversion,
    ShortServerNonce,
    AnonymousAccepted,
    DefaultCredentials,
    UserCredentials,
    SelfSignedAccepted,
    AnonymousReadable,
    AnonymousWritable,
    PermissionMismatch,
    SessionExhaustion,
    LimitAboveCap,
    ServerSoftware,
    KnownServers,
}

impl Rule {
    pub const ALL: [Rule; 20] = [
        Rule::InsecurePolicy,
        Rule::DeprecatedPolicy,
        Rule::UnknownPolicy,
        Rule::ModeNone,
        Rule::SignOnly,
        Rule::AnonymousOnNone,
        Rule::AnonymousOnSecure,
        Rule::SecurityLevelInversion,
        Rule::ShortServerNonce,
        Rule::AnonymousAccepted,
        Rule::DefaultCredentials,
        Rule::UserCredentials,
        Rule::SelfSignedAccepted,
        Rule::AnonymousReadable,
        Rule::AnonymousWritable,
        Rule::PermissionMismatch,
        Rule::SessionExhaustion,
        Rule::LimitAboveCap,
        Rule::ServerSoftware,
        Rule::KnownServers,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Rule::InsecurePolicy => "endpoint.insecure-policy",
            Rule::DeprecatedPolicy => "endpoint.deprecated-policy",
            Rule::UnknownPolicy => "endpoint.unknown-policy",
            Rule::ModeNone => "endpoint.mode-none",
            Rule::SignOnly => "endpoint.sign-only",
            Rule::AnonymousOnNone => "endpoint.anonymous-on-none",
            Rule::AnonymousOnSecure => "endpoint.anonymous-on-secure",
            Rule::SecurityLevelInversion => "endpoint.security-level-inversion",
            Rule::ShortServerNonce => "transport.short-server-nonce",
            Rule::AnonymousAccepted => "auth.anonymous-accepted",
            Rule::DefaultCredentials => "auth.default-credentials",
            Rule::UserCredentials => "auth.user-credentials",
            Rule::SelfSignedAccepted => "auth.self-signed-accepted",
            Rule::AnonymousReadable => "access.anonymous-readable",
            Rule::AnonymousWritable => "access.anonymous-writable",
            Rule::PermissionMismatch => "access.permission-mismatch",
            Rule::SessionExhaustion => "availability.session-exhaustion",
            Rule::LimitAboveCap => "availability.limit-above-cap",
            Rule::ServerSoftware => "info.server-software",
            Rule::KnownServers => "info.known-servers",
        }
    }

    pub fn from_key(key: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.key() == key)
    }

    pub fn entry(self) -> &'static RubricEntry {
        rubric()
            .rules
            .get(self.key())
            .unwrap_or_else(|| panic!("rule {} missing from the severity rubric", self.key()))
    }

    pub fn severity(self) -> Severity {
        self.entry().severity
    }

    pub fn category(self) -> Category {
        self.entry().category
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricEntry {
    pub category: Category,
    pub severity: Severity,
    pub title: String,
    pub remediation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rubric {
    pub rules: BTreeMap<String, RubricEntry>,
}

impl Rubric {
    pub fn parse(text: &str) -> Result<Rubric, String> {
        let r: Rubric = toml::from_str(text).map_err(|e| e.to_string())?;
        if let Some(k) = r.rules.keys().find(|k| Rule::from_key(k).is_none()) {
            return Err(format!("rubric entry {k:?} names no known rule"));
        }
        if let Some(rule) = Rule::ALL
            .into_iter()
            .find(|rule| !r.rules.contains_key(rule.key()))
        {
            return Err(format!("rule {rule} has no rubric entry"));
        }
        Ok(r)
    }
}

/// The committed rubric, parsed once.
pub fn rubric() -> &'static Rubric {
    static R: OnceLock<Rubric> = OnceLock::new();
    R.get_or_init(|| Rubric::parse(RUBRIC_TOML).expect("committed severity rubric is valid"))
}

/// Where a finding was observed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TargetRef {
    pub host: String,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
}

impl TargetRef {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        TargetRef {
            host: host.into(),
            port,
            endpoint_url: None,
        }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.endpoint_url = Some(url.into());
        self
    }
}

impl fmt::Display for TargetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.host.contains(':') {
            write!(f, "[{}]:{}", self.host, self.port)
        } else {
            write!(f, "{}:{}", self.host, self.port)
        }
    }
}

pub type Evidence = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub id: String,
    pub rule: String,
    pub category: Category,
    pub severity: Severity,
    pub title: String,
    pub target: TargetRef,
    /// The node, account or policy the finding is about, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub evidence: Evidence,
    pub remediation: String,
}

impl Finding {
    pub fn new(
        rule: Rule,
        target: &TargetRef,
        subject: Option<String>,
        evidence: Evidence,
    ) -> Finding {
        let entry = rule.entry();
        Finding {
            id: finding_id(rule, entry.category, target, subject.as_deref(), &evidence),
            rule: rule.key().to_string(),
            category: entry.category,
            severity: entry.severity,
            title: entry.title.clone(),
            target: target.clone(),
            subject,
            evidence,
            remediation: entry.remediation.clone(),
        }
    }
}

/// Stable id: a digest over category, rule, target, subject and the set of
/// evidence keys. Evidence values do not contribute.
pub fn finding_id(
    rule: Rule,
    category: Category,
    target: &TargetRef,
    subject: Option<&str>,
    evidence: &Evidence,
) -> String {
    let mut h = Sha256::new();
    let mut field = |s: &str| {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    };
    field(&category.to_string());
    field(rule.key());
    field(&target.host);
    field(&target.port.to_string());
    field(target.endpoint_url.as_deref().unwrap_or(""));
    field(subject.unwrap_or(""));
    for k in evidence.keys() {
        field(k);
    }
    let digest = h.finalize();
    format!("UA-{}", hex::encode(&digest[..8]))
}

/// Builds an evidence map from `key => value` pairs.
#[macro_export]
macro_rules! evidence {
    ($($k:expr => $v:expr),* $(,)?) => {{
        #[allow(unused_mut)]
        let mut m = $crate::assessor::Evidence::new();
        $( m.insert(String::from($k), serde_json::json!($v)); )*
        m
    }};
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_rubric_covers_every_rule() {
        let r = Rubric::parse(RUBRIC_TOML).unwrap();
        assert_eq!(r.rules.len(), Rule::ALL.len());
        assert_eq!(Rule::AnonymousWritable.severity(), Severity::Critical);
        assert_eq!(Rule::DeprecatedPolicy.severity(), Severity::Medium);
        assert_eq!(Rule::AnonymousOnSecure.severity(), Severity::Medium);
        assert_eq!(Rule::SignOnly.severity(), Severity::Low);
    }

    #[test]
    fn rubric_rejects_gaps_and_strays() {
        let missing =
            RUBRIC_TOML.replace("[rules.\"info.known-servers\"]", "[rules.\"info.other\"]");
        assert!(Rubric::parse(&missing).is_err());
    }

    #[test]
    fn ids_ignore_evidence_values() {
        let t = TargetRef::new("10.0.0.1", 4840);
        let a = Finding::new(Rule::ModeNone, &t, None, evidence! {"endpoints" => 1});
        let b = Finding::new(Rule::ModeNone, &t, None, evidence! {"endpoints" => 2});
        assert_eq!(a.id, b.id);
        let c = Finding::new(
            Rule::ModeNone,
            &t,
            None,
            evidence! {"endpoints" => 1, "extra" => true},
        );
        assert_ne!(a.id, c.id);
        let d = Finding::new(
            Rule::AnonymousWritable,
            &t,
            Some("ns=2;s=A".into()),
            Evidence::new(),
        );
        let e = Finding::new(
            Rule::AnonymousWritable,
            &t,
            Some("ns=2;s=B".into()),
            Evidence::new(),
        );
        assert_ne!(d.id, e.id);
        assert!(a.id.starts_with("UA-") && a.id.len() == 19);
    }

    #[test]
    fn severity_order_and_parse() {
        assert!(Severity::Critical > Severity::High && Severity::Low > Severity::Info);
        assert_eq!("high".parse::<Severity>().unwrap(), Severity::High);
    }
}
