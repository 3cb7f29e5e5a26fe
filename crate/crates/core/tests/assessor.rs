use std::path::PathBuf;
use std::time::Duration;

use uascan_core::assessor::{
    self, assess_endpoints, audit_namespace, check_session_exhaustion, run_checks, test_anonymous,
    test_credentials, test_self_signed, AssessError, Finding, IdentityKind, Severity, TargetConn,
    TargetRef, VulnerabilityCheck, WriteProbe,
};
use uascan_core::identity::{self, Credential, CredentialSource};
use uascan_core::mock::{MockEvent, MockServer, ScenarioConfig};
use uascan_core::services::{self, BrowseLimits, ClientDescription, EndpointDescriptor};
use uascan_core::transport::Timeouts;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::load(&path).unwrap()
}

fn start(name: &str) -> (MockServer, TargetConn, Vec<EndpointDescriptor>) {
    let m = MockServer::start(scenario(name)).unwrap();
    let conn = TargetConn::new(
        "127.0.0.1",
        m.port(),
        Timeouts::uniform(Duration::from_secs(5)),
    );
    let mut ch = conn.connect().unwrap();
    let eps = services::get_endpoints(&mut ch).unwrap();
    ch.close();
    (m, conn, eps)
}

fn severities(f: &[Finding]) -> Vec<(String, Severity)> {
    let mut v: Vec<_> = f.iter().map(|f| (f.rule.clone(), f.severity)).collect();
    v.sort();
    v
}

fn auth_attempts(m: &MockServer) -> usize {
    m.event_log()
        .iter()
        .filter(|e| matches!(e, MockEvent::AuthAttempt { .. }))
        .count()
}

fn twenty_with_admin_at(pos: usize) -> Vec<Credential> {
    let mut v: Vec<Credential> = (0..19)
        .map(|i| {
            Credential::new(
                format!("user{i}"),
                format!("pw{i}"),
                CredentialSource::DefaultList,
            )
        })
        .collect();
    v.insert(
        pos,
        Credential::new("admin", "admin", CredentialSource::DefaultList),
    );
    v
}

#[test]
fn mixed_endpoint_findings() {
    let (_m, conn, eps) = start("mixed");
    let f = assess_endpoints(&conn.target(), &eps, Some(32));
    assert_eq!(
        severities(&f),
        [
            ("endpoint.deprecated-policy".to_string(), Severity::Medium),
            ("endpoint.insecure-policy".to_string(), Severity::High),
            ("endpoint.mode-none".to_string(), Severity::High),
        ]
    );
}

#[test]
fn anonymous_battery() {
    let (m, conn, eps) = start("anon");
    let f = test_anonymous(&conn, &eps).unwrap().expect("anon accepted");
    assert_eq!(f.severity, Severity::High);
    assert!(!f.evidence.contains_key("undeclared"));
    assert_eq!(m.live_sessions(), 0);

    let (m, conn, eps) = start("strictauth");
    assert_eq!(test_anonymous(&conn, &eps).unwrap(), None);
    assert_eq!(m.live_sessions(), 0);

    let (m, conn, mut eps) = start("misdeclare");
    for e in &mut eps {
        e.user_token_policies
            .retain(|p| p.token_type != uascan_core::codec::UserTokenType::Anonymous);
    }
    let f = test_anonymous(&conn, &eps)
        .unwrap()
        .expect("undeclared anon accepted");
    assert_eq!(f.evidence["undeclared"], serde_json::json!(true));
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn default_credentials_battery() {
    let (m, conn, eps) = start("defaultcreds");
    let out = test_credentials(&conn, &eps, &twenty_with_admin_at(7), false).unwrap();
    assert_eq!(out.accepted.len(), 1);
    assert_eq!(out.accepted[0].finding.severity, Severity::Critical);
    assert_eq!(out.accepted[0].finding.subject.as_deref(), Some("admin"));
    assert!(!serde_json::to_string(&out.accepted[0].finding)
        .unwrap()
        .contains("\"admin\":\"admin\""));
    assert_eq!(out.attempts, 20);
    assert_eq!(auth_attempts(&m), 20);
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn stop_on_first_counts_attempts() {
    let (m, conn, eps) = start("defaultcreds");
    let out = test_credentials(&conn, &eps, &twenty_with_admin_at(2), true).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(auth_attempts(&m), 3);
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn user_supplied_credentials_are_high() {
    let (m, conn, eps) = start("strictauth");
    let creds = [
        Credential::new("plantadmin", "wrong", CredentialSource::UserSupplied),
        Credential::new("plantadmin", "Xr8!tq2#Lm4v", CredentialSource::UserSupplied),
    ];
    let out = test_credentials(&conn, &eps, &creds, false).unwrap();
    assert_eq!(out.accepted.len(), 1);
    assert_eq!(out.accepted[0].finding.severity, Severity::High);
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn empty_credential_list_makes_no_connection() {
    let (m, conn, eps) = start("defaultcreds");
    m.clear_events();
    let out = test_credentials(&conn, &eps, &[], false).unwrap();
    assert_eq!(out.attempts, 0);
    assert!(m.event_log().is_empty());
}

#[test]
fn lockout_aborts_run() {
    let mut s = scenario("defaultcreds");
    s.lockout_after = Some(3);
    let m = MockServer::start(s).unwrap();
    let conn = TargetConn::new(
        "127.0.0.1",
        m.port(),
        Timeouts::uniform(Duration::from_secs(5)),
    );
    let mut ch = conn.connect().unwrap();
    let eps = services::get_endpoints(&mut ch).unwrap();
    ch.close();
    let out = test_credentials(&conn, &eps, &twenty_with_admin_at(19), false).unwrap();
    assert!(out.aborted);
    assert!(out.warnings.iter().any(|w| w == assessor::LOCKOUT_WARNING));
    assert!(out.attempts < 20);
}

#[test]
fn self_signed_battery() {
    let (m, conn, eps) = start("trustall");
    let f = test_self_signed(&conn, &eps).unwrap().expect("accepted");
    assert_eq!(f.severity, Severity::High);
    assert_eq!(m.live_sessions(), 0);

    let (m, conn, eps) = start("stricttrust");
    assert_eq!(test_self_signed(&conn, &eps).unwrap(), None);
    assert_eq!(m.live_sessions(), 0);

    let (_m, conn, eps) = start("anon");
    assert!(matches!(
        test_self_signed(&conn, &eps),
        Err(AssessError::Skipped(_))
    ));
}

fn anonymous_session(conn: &TargetConn, eps: &[EndpointDescriptor]) -> services::SessionHandle {
    let mut s = conn.open_session().unwrap();
    let ep = eps
        .iter()
        .find(|e| e.offers(uascan_core::codec::UserTokenType::Anonymous))
        .unwrap();
    s.activate(&identity::build_anonymous(ep).unwrap()).unwrap();
    s
}

#[test]
fn audit_finds_two_writable_nodes_and_preserves_values() {
    let (m, conn, eps) = start("audit");
    let before = m.node_values();
    let target = TargetRef::new("127.0.0.1", m.port());
    let mut s = anonymous_session(&conn, &eps);
    let out = audit_namespace(
        &mut s,
        &target,
        IdentityKind::Anonymous,
        &BrowseLimits::default(),
        WriteProbe::WriteBack,
    )
    .unwrap();
    s.close();
    let mut critical: Vec<_> = out
        .findings
        .iter()
        .filter(|f| f.severity == Severity::Critical)
        .map(|f| f.subject.clone().unwrap())
        .collect();
    critical.sort();
    assert_eq!(critical, ["ns=2;s=Setpoint", "ns=2;s=ValveOpen"]);
    assert!(out
        .records
        .iter()
        .any(|r| r.observed_access.write_ok == Some(true)));
    assert!(!out
        .records
        .iter()
        .any(|r| r.node.to_string() == "ns=2;s=SecretKey"));
    assert!(out
        .findings
        .iter()
        .any(|f| f.rule == "access.anonymous-readable"));
    assert!(!out
        .findings
        .iter()
        .any(|f| f.rule == "access.permission-mismatch"));
    assert_eq!(m.node_values(), before);
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn write_probe_off_leaves_writes_untested() {
    let (m, conn, eps) = start("audit");
    let target = TargetRef::new("127.0.0.1", m.port());
    let mut s = anonymous_session(&conn, &eps);
    let out = audit_namespace(
        &mut s,
        &target,
        IdentityKind::Anonymous,
        &BrowseLimits::default(),
        WriteProbe::Off,
    )
    .unwrap();
    assert!(out.records.iter().all(|r| r.observed_access.untested()));
    assert_eq!(
        out.findings
            .iter()
            .filter(|f| f.severity == Severity::Critical)
            .count(),
        2
    );
    assert!(!m
        .event_log()
        .iter()
        .any(|e| matches!(e, MockEvent::NodeWrite { .. })));
}

#[test]
fn credentialed_audit_sees_hidden_node() {
    let (m, conn, eps) = start("audit");
    let target = TargetRef::new("127.0.0.1", m.port());
    let ep = assessor::credential_endpoint(&eps).unwrap().clone();
    let mut s =
        services::create_session(conn.connect().unwrap(), &ClientDescription::default()).unwrap();
    let cred = Credential::new("engineer", "Qz4$wn8@Kd1r", CredentialSource::UserSupplied);
    s.activate(
        &identity::build_username(&ep, &cred, &s.server_certificate, &s.server_nonce).unwrap(),
    )
    .unwrap();
    let out = audit_namespace(
        &mut s,
        &target,
        IdentityKind::UserName,
        &BrowseLimits::default(),
        WriteProbe::Off,
    )
    .unwrap();
    assert!(out
        .records
        .iter()
        .any(|r| r.node.to_string() == "ns=2;s=SecretKey"));
    assert!(!out
        .findings
        .iter()
        .any(|f| f.category == assessor::Category::AccessControl
            && f.rule.starts_with("access.anonymous")));
}

#[test]
fn session_exhaustion_lowcap() {
    let (m, conn, _) = start("lowcap");
    let out = check_session_exhaustion(&conn, 100).unwrap();
    assert_eq!(out.observed_limit, Some(5));
    assert_eq!(out.finding.rule, "availability.session-exhaustion");
    assert_eq!(out.finding.evidence["observed_limit"], serde_json::json!(5));
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn session_exhaustion_above_cap() {
    let (m, conn, _) = start("highcap");
    let out = check_session_exhaustion(&conn, 100).unwrap();
    assert_eq!(out.observed_limit, None);
    assert_eq!(out.opened, 100);
    assert_eq!(out.finding.rule, "availability.limit-above-cap");
    assert_eq!(out.finding.severity, Severity::Info);
    assert_eq!(m.live_sessions(), 0);
}

struct Exploding;

impl VulnerabilityCheck for Exploding {
    fn name(&self) -> &str {
        "exploding"
    }

    fn run(&self, _: &TargetConn) -> Result<Vec<Finding>, AssessError> {
        panic!("deliberate failure")
    }
}

#[test]
fn check_registry_isolation() {
    let (m, conn, _) = start("lowcap");
    assert!(run_checks(&conn, &[]).findings.is_empty());

    let single = run_checks(&conn, &assessor::builtin_registry(100));
    assert_eq!(single.findings.len(), 1);
    assert_eq!(
        single.findings[0].evidence["observed_limit"],
        serde_json::json!(5)
    );

    let mut registry: Vec<Box<dyn VulnerabilityCheck>> = vec![Box::new(Exploding)];
    registry.extend(assessor::builtin_registry(100));
    let out = run_checks(&conn, &registry);
    assert_eq!(out.findings.len(), 1);
    assert!(out.warnings.iter().any(|w| w.contains("exploding")));
    assert_eq!(m.live_sessions(), 0);
}

#[test]
fn server_info_baseline_and_restricted() {
    let (m, conn, eps) = start("baseline");
    let ep = assessor::credential_endpoint(&eps).unwrap().clone();
    let mut s = conn.open_session().unwrap();
    let cred = Credential::new("operator", "k7#Vq9!mZp2w", CredentialSource::UserSupplied);
    s.activate(
        &identity::build_username(&ep, &cred, &s.server_certificate, &s.server_nonce).unwrap(),
    )
    .unwrap();
    let (info, findings, _) =
        assessor::gather_server_info(&mut s, &TargetRef::new("127.0.0.1", m.port()));
    assert_eq!(info.product_uri, "urn:mock:server");
    assert_eq!(info.application_uri, "urn:mock:server");
    assert_eq!(info.namespace_array[0], "http://opcfoundation.org/UA/");
    assert!(info.field_status.is_empty());
    assert!(findings.iter().any(|f| f.rule == "info.server-software"));
    s.close();

    let (m, conn, eps) = start("restricted");
    let mut s = anonymous_session(&conn, &eps);
    let (info, _, _) = assessor::gather_server_info(&mut s, &TargetRef::new("127.0.0.1", m.port()));
    assert!(info.build_info.is_empty());
    assert!(info
        .field_status
        .contains_key("build_info.software_version"));
    assert!(info.field_status.contains_key("known_servers"));
    assert!(!info.namespace_array.is_empty());
}
