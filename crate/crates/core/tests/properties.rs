use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Duration;

use proptest::prelude::*;

use uascan_core::assessor::{Evidence, Finding, Rule, Severity, TargetConn, TargetRef};
use uascan_core::codec::{ids, StatusCode, UserTokenType};
use uascan_core::identity::{self, Credential, CredentialSource};
use uascan_core::mock::{MockServer, ScenarioConfig};
use uascan_core::report::{exit_code_for, AssessmentReport, SeverityCounts, TargetAssessment};
use uascan_core::services::{self, EndpointDescriptor, ServiceError, SessionHandle};
use uascan_core::transport::Timeouts;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::load(&path).unwrap()
}

struct Fixture {
    mock: MockServer,
    conn: TargetConn,
    endpoints: Vec<EndpointDescriptor>,
}

fn fixture(name: &'static str, cell: &'static OnceLock<Fixture>) -> &'static Fixture {
    cell.get_or_init(|| {
        let mock = MockServer::start(scenario(name)).unwrap();
        let conn = TargetConn::new(
            "127.0.0.1",
            mock.port(),
            Timeouts::uniform(Duration::from_secs(5)),
        );
        let mut ch = conn.connect().unwrap();
        let endpoints = services::get_endpoints(&mut ch).unwrap();
        ch.close();
        Fixture {
            mock,
            conn,
            endpoints,
        }
    })
}

fn login(f: &Fixture, cred: &Credential) -> Result<SessionHandle, ServiceError> {
    let ep = f
        .endpoints
        .iter()
        .find(|e| e.offers(UserTokenType::UserName))
        .unwrap();
    let mut s = f.conn.open_session().unwrap();
    let token = identity::build_username(ep, cred, &s.server_certificate, &s.server_nonce).unwrap();
    s.activate(&token)?;
    Ok(s)
}

fn perturb(s: &str, at: usize, with: char) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let i = at % chars.len();
    chars[i] = with;
    chars.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbed_credentials_never_authenticate(
        at in 0usize..64,
        with in proptest::char::range(' ', '~'),
        in_user in any::<bool>(),
    ) {
        static CELL: OnceLock<Fixture> = OnceLock::new();
        let f = fixture("strictauth", &CELL);
        let (user, pass) = ("plantadmin", "Xr8!tq2#Lm4v");
        let (u, p) = if in_user {
            (perturb(user, at, with), pass.to_string())
        } else {
            (user.to_string(), perturb(pass, at, with))
        };
        prop_assume!(u != user || p != pass);
        let r = login(f, &Credential::new(u, p, CredentialSource::UserSupplied));
        prop_assert!(matches!(r, Err(ServiceError::AuthRejected(_))));
        prop_assert_eq!(f.mock.live_sessions(), 0);
    }
}

#[test]
fn configured_credentials_authenticate() {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    let f = fixture("strictauth", &CELL);
    let mut s = login(
        f,
        &Credential::new("plantadmin", "Xr8!tq2#Lm4v", CredentialSource::UserSupplied),
    )
    .unwrap();
    s.close();
}

#[test]
fn access_enforcement_matrix() {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    let f = fixture("audit", &CELL);
    let before = f.mock.node_values();
    let cfg = f.mock.scenario().clone();
    let anon_ep = f
        .endpoints
        .iter()
        .find(|e| e.offers(UserTokenType::Anonymous))
        .unwrap();
    for anonymous in [true, false] {
        let mut s = if anonymous {
            let mut s = f.conn.open_session().unwrap();
            s.activate(&identity::build_anonymous(anon_ep).unwrap())
                .unwrap();
            s
        } else {
            login(
                f,
                &Credential::new("engineer", "Qz4$wn8@Kd1r", CredentialSource::UserSupplied),
            )
            .unwrap()
        };
        for node in cfg.nodes.iter().filter(|n| n.is_variable()) {
            let visible = !anonymous || node.anonymous_visible;
            let bits = node.access_level & node.effective_user_access_level();
            let read = s
                .read_attributes(&[(node.node.clone(), ids::attribute::VALUE)])
                .unwrap()
                .remove(0);
            assert_eq!(
                read.status.is_good(),
                visible && bits & 1 != 0,
                "read {} anon={anonymous}",
                node.node
            );
            let value = node.value().unwrap().unwrap();
            let status = s.write_value(&node.node, value).unwrap();
            assert_eq!(
                status.is_good(),
                visible && bits & 2 != 0,
                "write {} anon={anonymous}",
                node.node
            );
            if !visible {
                assert_eq!(status, StatusCode::BAD_NODE_ID_UNKNOWN);
            }
        }
        s.close();
    }
    assert_eq!(f.mock.node_values(), before);
    assert_eq!(f.mock.live_sessions(), 0);
}

fn finding() -> impl Strategy<Value = Finding> {
    (
        0..Rule::ALL.len(),
        1u8..255,
        any::<u16>(),
        proptest::option::of("[a-z=;0-9]{1,12}"),
        proptest::collection::btree_map(
            "[a-z_]{1,8}",
            prop_oneof![
                any::<i64>().prop_map(serde_json::Value::from),
                "[ -~]{0,16}".prop_map(serde_json::Value::from),
                any::<bool>().prop_map(serde_json::Value::from),
            ],
            0..4,
        ),
    )
        .prop_map(|(r, octet, port, subject, evidence)| {
            let target = TargetRef::new(format!("10.0.0.{octet}"), port);
            Finding::new(
                Rule::ALL[r],
                &target,
                subject,
                evidence.into_iter().collect::<Evidence>(),
            )
        })
}

fn report() -> impl Strategy<Value = AssessmentReport> {
    proptest::collection::vec(finding(), 0..24).prop_map(|findings| {
        let mut r = AssessmentReport::new("full");
        for f in findings {
            let (h, p) = (f.target.host.clone(), f.target.port);
            match r
                .assessments
                .iter_mut()
                .find(|a| a.host == h && a.port == p)
            {
                Some(a) => a.findings.push(f),
                None => {
                    let mut a = TargetAssessment::new(h, p);
                    a.findings.push(f);
                    r.assessments.push(a);
                }
            }
        }
        r.finalize();
        r
    })
}

proptest! {
    #[test]
    fn report_json_round_trips(r in report()) {
        prop_assert_eq!(AssessmentReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn summary_counts_match_findings(r in report()) {
        let all: Vec<&Finding> = r.findings().collect();
        prop_assert_eq!(r.summary.total, all.len());
        for sev in Severity::ALL {
            let n = all.iter().filter(|f| f.severity == sev).count();
            let c = &r.summary;
            let got = match sev {
                Severity::Critical => c.critical,
                Severity::High => c.high,
                Severity::Medium => c.medium,
                Severity::Low => c.low,
                Severity::Info => c.info,
            };
            prop_assert_eq!(got, n);
        }
        prop_assert_eq!(SeverityCounts::of(all.iter().copied()), r.summary.clone());
    }

    #[test]
    fn exit_code_contract(findings in proptest::collection::vec(finding(), 0..16)) {
        let expected = i32::from(findings.iter().any(|f| matches!(f.severity, Severity::High | Severity::Critical)));
        prop_assert_eq!(exit_code_for(&findings), expected);
    }

    #[test]
    fn every_emission_carries_its_rubric_row(f in finding()) {
        let rule = Rule::from_key(&f.rule).unwrap();
        let row = rule.entry();
        prop_assert_eq!(f.severity, row.severity);
        prop_assert_eq!(f.category, row.category);
        prop_assert_eq!(&f.remediation, &row.remediation);
    }

    #[test]
    fn finding_ids_depend_on_keys_not_values(f in finding(), bump in any::<i64>()) {
        let rule = Rule::from_key(&f.rule).unwrap();
        let again = Finding::new(rule, &f.target, f.subject.clone(), f.evidence.clone());
        prop_assert_eq!(&again.id, &f.id);
        let changed: Evidence = f.evidence.keys().map(|k| (k.clone(), serde_json::json!(bump))).collect();
        prop_assert_eq!(Finding::new(rule, &f.target, f.subject.clone(), changed).id, f.id);
    }
}
