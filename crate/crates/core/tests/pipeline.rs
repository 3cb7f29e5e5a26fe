use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use uascan_core::assessor::Severity;
use uascan_core::discovery::{HostEntry, TargetSpec, Verdict};
use uascan_core::mock::{MockServer, RegisteredServer, ScenarioConfig};
use uascan_core::pipeline::{self, Command, ScanConfig};
use uascan_core::report::{AssessmentReport, SCHEMA_JSON};
use uascan_core::transport::Timeouts;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::load(&path).unwrap()
}

fn config(mocks: &[&MockServer]) -> ScanConfig {
    let mut spec = TargetSpec::new(vec![HostEntry::Host {
        host: "127.0.0.1".into(),
        port: None,
    }]);
    spec.ports = mocks.iter().map(|m| m.port()).collect();
    spec.timeouts = Timeouts::uniform(Duration::from_secs(5));
    ScanConfig::new(spec)
}

fn ids(r: &AssessmentReport) -> BTreeSet<String> {
    r.findings().map(|f| f.id.clone()).collect()
}

fn without_timestamps(r: &AssessmentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap();
    v["started_at"] = serde_json::Value::Null;
    v["finished_at"] = serde_json::Value::Null;
    v
}

#[test]
fn full_over_baseline_anon_lowcap() {
    let mocks: Vec<MockServer> = ["baseline", "anon", "lowcap"]
        .iter()
        .map(|n| MockServer::start(scenario(n)).unwrap())
        .collect();
    let refs: Vec<&MockServer> = mocks.iter().collect();
    let mut cfg = config(&refs);
    cfg.dos.acknowledged = true;
    let r = pipeline::run(Command::Full, &cfg).unwrap();
    assert_eq!(r.exit_code(), 1);
    assert_eq!(r.assessments.len(), 3);
    let anon = r
        .assessments
        .iter()
        .find(|a| a.port == mocks[1].port())
        .unwrap();
    assert!(anon
        .findings
        .iter()
        .any(|f| f.rule == "auth.anonymous-accepted" && f.severity == Severity::High));
    let low = r
        .assessments
        .iter()
        .find(|a| a.port == mocks[2].port())
        .unwrap();
    let ex = low
        .findings
        .iter()
        .find(|f| f.rule == "availability.session-exhaustion")
        .unwrap();
    assert_eq!(ex.evidence["observed_limit"], serde_json::json!(5));
    for m in &mocks {
        assert_eq!(m.live_sessions(), 0);
    }
    assert_eq!(r.summary.total, r.findings().count());
}

#[test]
fn dos_is_skipped_without_acknowledgement() {
    let m = MockServer::start(scenario("lowcap")).unwrap();
    let r = pipeline::run(Command::Full, &config(&[&m])).unwrap();
    let a = &r.assessments[0];
    assert!(a
        .skipped_tests
        .iter()
        .any(|t| t.test == "session-exhaustion"));
    assert!(!a
        .findings
        .iter()
        .any(|f| f.category == uascan_core::assessor::Category::Availability));

    let mut cfg = config(&[&m]);
    cfg.dos.allow_list.push("urn:mock:lowcap".into());
    let r = pipeline::run(Command::Dos, &cfg).unwrap();
    let a = &r.assessments[0];
    assert!(
        a.findings
            .iter()
            .any(|f| f.rule == "availability.session-exhaustion"),
        "{a:?}"
    );
}

#[test]
fn audit_without_access_is_skipped() {
    let m = MockServer::start(scenario("strictauth")).unwrap();
    let r = pipeline::run(Command::Audit, &config(&[&m])).unwrap();
    assert_eq!(r.exit_code(), 0);
    assert!(r.assessments[0]
        .skipped_tests
        .iter()
        .any(|t| t.test == "audit"));
}

#[test]
fn repeated_full_runs_are_identical() {
    let mocks: Vec<MockServer> = ["mixed", "anon", "audit", "defaultcreds"]
        .iter()
        .map(|n| MockServer::start(scenario(n)).unwrap())
        .collect();
    let refs: Vec<&MockServer> = mocks.iter().collect();
    let cfg = config(&refs);
    let a = pipeline::run(Command::Full, &cfg).unwrap();
    let b = pipeline::run(Command::Full, &cfg).unwrap();
    assert_eq!(ids(&a), ids(&b));
    assert_eq!(without_timestamps(&a), without_timestamps(&b));
}

#[test]
fn more_stages_never_remove_findings() {
    let mocks: Vec<MockServer> = ["mixed", "anon", "audit", "trustall", "baseline"]
        .iter()
        .map(|n| MockServer::start(scenario(n)).unwrap())
        .collect();
    let refs: Vec<&MockServer> = mocks.iter().collect();
    let cfg = config(&refs);
    let full = ids(&pipeline::run(Command::Full, &cfg).unwrap());
    for cmd in [
        Command::Endpoints,
        Command::Auth,
        Command::Info,
        Command::Audit,
        Command::Dos,
    ] {
        let part = ids(&pipeline::run(cmd, &cfg).unwrap());
        assert!(
            part.is_subset(&full),
            "{cmd:?} produced findings missing from full"
        );
    }
}

#[test]
fn report_validates_against_schema() {
    let mocks: Vec<MockServer> = ["audit", "baseline"]
        .iter()
        .map(|n| MockServer::start(scenario(n)).unwrap())
        .collect();
    let refs: Vec<&MockServer> = mocks.iter().collect();
    let mut cfg = config(&refs);
    cfg.spec.ports.push(1);
    let r = pipeline::run(Command::Full, &cfg).unwrap();
    let schema: serde_json::Value = serde_json::from_str(SCHEMA_JSON).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc = serde_json::to_value(&r).unwrap();
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert!(r.probe_results.iter().any(|p| p.verdict == Verdict::Closed));
    assert!(
        !r.assessments[0].node_access_records.is_empty()
            || !r.assessments[1].node_access_records.is_empty()
    );
}

#[test]
fn find_servers_feedback_extends_scope_once() {
    let leaf = MockServer::start(scenario("anon")).unwrap();
    let mut hub_cfg = scenario("anon");
    hub_cfg.server_info.application_uri = "urn:mock:hub".into();
    hub_cfg.registered_servers.push(RegisteredServer {
        application_uri: "urn:mock:anon".into(),
        product_uri: "urn:mock:server".into(),
        application_name: "leaf".into(),
        discovery_urls: vec![leaf.endpoint_url().to_string()],
    });
    let hub = MockServer::start(hub_cfg).unwrap();
    let r = pipeline::run(Command::Full, &config(&[&hub])).unwrap();
    let ports: BTreeSet<u16> = r.assessments.iter().map(|a| a.port).collect();
    assert_eq!(ports, BTreeSet::from([hub.port(), leaf.port()]));
    let hub_a = r.assessments.iter().find(|a| a.port == hub.port()).unwrap();
    assert!(hub_a
        .findings
        .iter()
        .any(|f| f.rule == "info.known-servers"));

    let mut capped = config(&[&hub]);
    capped.spec.matrix_cap = 1;
    let r = pipeline::run(Command::Full, &capped).unwrap();
    assert_eq!(r.assessments.len(), 1);
    assert!(!r.warnings.is_empty());
}
