//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command as Proc, Stdio};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use uascan_core::assessor::{
    assess_endpoints, audit_namespace, check_session_exhaustion, test_anonymous, test_credentials,
    test_self_signed, Category, IdentityKind, Severity, TargetConn, WriteProbe,
};
use uascan_core::codec::golden::{parse_hex_fixture, reference_fixtures};
use uascan_core::codec::{
    decode_frame, decode_response, decode_value, encode_value, sample, UserTokenType,
};
use uascan_core::discovery::{self, HostEntry, TargetSpec, Verdict};
use uascan_core::identity::{self, Credential, CredentialSource};
use uascan_core::mock::{control_query, MockEvent, MockServer, ScenarioConfig};
use uascan_core::pipeline::{self, Command, ScanConfig};
use uascan_core::report::{AssessmentReport, SCHEMA_JSON};
use uascan_core::services::{self, BrowseLimits, EndpointDescriptor};
use uascan_core::transport::Timeouts;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&root().join("scenarios").join(format!("{name}.toml"))).unwrap()
}

fn farm_names() -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(root().join("scenarios"))
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "toml")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    v.sort();
    v
}

fn timeouts() -> Timeouts {
    Timeouts::uniform(Duration::from_secs(5))
}

fn start(name: &str) -> (MockServer, TargetConn, Vec<EndpointDescriptor>) {
    let m = MockServer::start(scenario(name)).unwrap();
    let conn = TargetConn::new("127.0.0.1", m.port(), timeouts());
    let mut ch = conn.connect().unwrap();
    let eps = services::get_endpoints(&mut ch).unwrap();
    ch.close();
    (m, conn, eps)
}

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(t: Instant, limit: Duration) -> Result<Duration, String> {
    let e = t.elapsed();
    check(e < limit, format!("took {e:.2?}, limit {limit:?}"))?;
    Ok(e)
}

fn c1_codec() -> Outcome {
    let t = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5EED);
    let kinds = sample::all_kinds();
    for kind in &kinds {
        for i in 0..10_000 {
            let v = sample::value(&mut rng, kind);
            let enc = encode_value(&v).map_err(|e| format!("{kind:?} #{i}: encode {e}"))?;
            let (back, used) =
                decode_value(&enc, kind).map_err(|e| format!("{kind:?} #{i}: decode {e}"))?;
            check(
                back == v && used == enc.len(),
                format!("{kind:?} #{i}: {v:?} came back as {back:?}"),
            )?;
        }
    }
    let fixtures = reference_fixtures();
    let mut seeds: Vec<Vec<u8>> = fixtures.iter().map(|(_, f)| f.encode().unwrap()).collect();
    for kind in &kinds {
        seeds.push(encode_value(&sample::value(&mut rng, kind)).unwrap());
    }
    let quiet = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0usize;
    for i in 0..100_000usize {
        let s = i % seeds.len();
        let mut buf = seeds[s].clone();
        for _ in 0..rng.gen_range(1..4) {
            buf = sample::mutate(&mut rng, &buf);
        }
        let kind = &kinds[i % kinds.len()];
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            if let Some((_, f)) = fixtures.get(s) {
                let _ = f.decode_like(&buf);
            }
            let _ = decode_frame(&buf);
            if buf.len() > 8 {
                let _ = decode_response(&buf[8..]);
            }
            let _ = decode_value(&buf, kind);
        }));
        crashes += usize::from(r.is_err());
    }
    panic::set_hook(quiet);
    check(crashes == 0, format!("{crashes} decoder panics"))?;
    let e = within(t, Duration::from_secs(60))?;
    Ok(format!(
        "{} kinds x 10^4 round-trips, 10^5 mutated buffers, 0 crashes, {e:.2?}",
        kinds.len()
    ))
}

fn c2_golden() -> Outcome {
    let mut n = 0;
    for (name, fixture) in reference_fixtures() {
        let path = root()
            .join("crates/core/tests/golden")
            .join(format!("{name}.hex"));
        let text =
            std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let theirs = parse_hex_fixture(&text).map_err(|e| format!("{name}: {e}"))?;
        let ours = fixture.encode().map_err(|e| format!("{name}: {e}"))?;
        check(
            ours == theirs,
            format!("{name}: encoding differs from capture"),
        )?;
        n += 1;
    }
    check(n > 0, "no fixtures")?;
    Ok(format!("{n} captures byte-identical"))
}

fn http_listener() -> u16 {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    std::thread::spawn(move || {
        for s in l.incoming() {
            let Ok(mut s) = s else { continue };
            let _ = s.set_read_timeout(Some(Duration::from_secs(2)));
            let mut buf = [0u8; 1024];
            let _ = s.read(&mut buf);
            let _ = s.write_all(
                b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
            );
        }
    });
    port
}

fn closed_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn c3_discovery() -> Outcome {
    let a = MockServer::start(scenario("baseline")).unwrap();
    let b = MockServer::start(scenario("anon")).unwrap();
    let web = http_listener();
    let closed = closed_port();
    let mut spec = TargetSpec::new(vec![HostEntry::Host {
        host: "127.0.0.1".into(),
        port: None,
    }]);
    spec.ports = vec![a.port(), b.port(), web, closed];
    spec.timeouts = Timeouts::uniform(Duration::from_secs(2));
    let t = Instant::now();
    let results = discovery::sweep(&spec).map_err(|e| e.to_string())?;
    let e = within(t, Duration::from_secs(10))?;
    let count = |v: Verdict| results.iter().filter(|r| r.verdict == v).count();
    let verdict = |p: u16| results.iter().find(|r| r.port == p).map(|r| r.verdict);
    check(
        (
            count(Verdict::OpcUa),
            count(Verdict::OpenNotOpcUa),
            count(Verdict::Closed),
        ) == (2, 1, 1),
        format!(
            "verdicts {:?}",
            results
                .iter()
                .map(|r| (r.port, r.verdict))
                .collect::<Vec<_>>()
        ),
    )?;
    check(
        verdict(a.port()) == Some(Verdict::OpcUa)
            && verdict(b.port()) == Some(Verdict::OpcUa)
            && verdict(web) == Some(Verdict::OpenNotOpcUa)
            && verdict(closed) == Some(Verdict::Closed),
        "verdicts assigned to the wrong ports",
    )?;
    Ok(format!("2 OpcUa, 1 OpenNotOpcUa, 1 Closed in {e:.2?}"))
}

fn c4_mixed() -> Outcome {
    let (_m, conn, eps) = start("mixed");
    let got: BTreeSet<(String, Severity)> = assess_endpoints(&conn.target(), &eps, Some(32))
        .into_iter()
        .map(|f| (f.rule, f.severity))
        .collect();
    let want = BTreeSet::from([
        ("endpoint.insecure-policy".to_string(), Severity::High),
        ("endpoint.mode-none".to_string(), Severity::High),
        ("endpoint.deprecated-policy".to_string(), Severity::Medium),
    ]);
    check(got == want, format!("got {got:?}"))?;
    Ok("1 High insecure-policy, 1 High mode-None, 1 Medium deprecated-policy".into())
}

fn auth_attempts(m: &MockServer) -> usize {
    m.event_log()
        .iter()
        .filter(|e| matches!(e, MockEvent::AuthAttempt { .. }))
        .count()
}

fn twenty_with_planted(pos: usize, user: &str, pass: &str) -> Vec<Credential> {
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
        Credential::new(user, pass, CredentialSource::DefaultList),
    );
    v
}

fn c5_auth() -> Outcome {
    let (m, conn, eps) = start("anon");
    let f = test_anonymous(&conn, &eps).map_err(|e| format!("anon: {e:?}"))?;
    check(
        f.map(|f| f.severity) == Some(Severity::High),
        "anon: no High anonymous finding",
    )?;
    check(m.live_sessions() == 0, "anon: sessions left open")?;

    let (_m, conn, eps) = start("strictauth");
    check(
        test_anonymous(&conn, &eps)
            .map_err(|e| format!("strictauth: {e:?}"))?
            .is_none(),
        "strictauth: anonymous finding",
    )?;

    let planted = scenario("defaultcreds").credentials[0].clone();
    let (m, conn, eps) = start("defaultcreds");
    m.clear_events();
    let out = test_credentials(
        &conn,
        &eps,
        &twenty_with_planted(7, &planted.username, &planted.password),
        false,
    )
    .map_err(|e| format!("defaultcreds: {e:?}"))?;
    let critical = out
        .accepted
        .iter()
        .filter(|a| a.finding.severity == Severity::Critical)
        .count();
    check(
        critical == 1 && out.accepted.len() == 1,
        format!("defaultcreds: {critical} Critical"),
    )?;
    let seen = auth_attempts(&m);
    check(
        seen == 20,
        format!("defaultcreds: {seen} AuthAttempt events"),
    )?;

    let pos = 11;
    m.clear_events();
    let out = test_credentials(
        &conn,
        &eps,
        &twenty_with_planted(pos, &planted.username, &planted.password),
        true,
    )
    .map_err(|e| format!("stop-on-first: {e:?}"))?;
    let seen_first = auth_attempts(&m);
    check(
        out.accepted.len() == 1 && seen_first <= pos + 1,
        format!(
            "stop-on-first: {seen_first} attempts for a credential at position {}",
            pos + 1
        ),
    )?;

    let (_m, conn, eps) = start("trustall");
    let f = test_self_signed(&conn, &eps).map_err(|e| format!("trustall: {e:?}"))?;
    check(
        f.map(|f| f.severity) == Some(Severity::High),
        "trustall: no High self-signed finding",
    )?;

    let (_m, conn, eps) = start("stricttrust");
    check(
        test_self_signed(&conn, &eps)
            .map_err(|e| format!("stricttrust: {e:?}"))?
            .is_none(),
        "stricttrust: finding",
    )?;
    Ok(format!("anon High, strictauth none, 1 Critical over {seen} attempts ({seen_first} with stop-on-first), trustall High, stricttrust none"))
}

fn c6_audit() -> Outcome {
    let cfg = scenario("audit");
    let want: BTreeSet<String> = cfg
        .nodes
        .iter()
        .filter(|n| {
            n.is_variable()
                && n.anonymous_visible
                && n.access_level & n.effective_user_access_level() & 2 != 0
        })
        .map(|n| n.node.to_string())
        .collect();
    let (m, conn, eps) = start("audit");
    let before = m.node_values();
    let mut s = conn.open_session().map_err(|e| e.to_string())?;
    let ep = eps
        .iter()
        .find(|e| e.offers(UserTokenType::Anonymous))
        .ok_or("no anonymous endpoint")?;
    s.activate(&identity::build_anonymous(ep).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let out = audit_namespace(
        &mut s,
        &conn.target(),
        IdentityKind::Anonymous,
        &BrowseLimits::default(),
        WriteProbe::WriteBack,
    )
    .map_err(|e| format!("{e:?}"))?;
    s.close();
    let critical: Vec<String> = out
        .findings
        .iter()
        .filter(|f| f.severity == Severity::Critical)
        .filter_map(|f| f.subject.clone())
        .collect();
    let got: BTreeSet<String> = critical.iter().cloned().collect();
    check(
        critical.len() == 2 && got == want,
        format!("Critical subjects {critical:?}, configured {want:?}"),
    )?;
    check(
        m.node_values() == before,
        "node values changed by the write probe",
    )?;
    Ok(format!(
        "2 Critical: {}; values restored",
        critical.join(", ")
    ))
}

fn c7_lowcap() -> Outcome {
    let (m, conn, _) = start("lowcap");
    let out = check_session_exhaustion(&conn, 100).map_err(|e| format!("{e:?}"))?;
    let f = &out.finding;
    check(
        f.category == Category::Availability,
        format!("finding {}", f.rule),
    )?;
    let limit = f
        .evidence
        .get("observed_limit")
        .cloned()
        .unwrap_or_default();
    check(
        limit == serde_json::json!(5),
        format!("observed_limit {limit}"),
    )?;
    check(
        out.observed_limit == Some(5) && out.cleanup_failures == 0,
        format!("{out:?}"),
    )?;
    std::thread::sleep(Duration::from_millis(50));
    check(
        m.live_sessions() == 0,
        format!("gauge {} after run", m.live_sessions()),
    )?;
    Ok("observed_limit 5, gauge 0".into())
}

fn farm_config(mocks: &[MockServer]) -> ScanConfig {
    let mut spec = TargetSpec::new(vec![HostEntry::Host {
        host: "127.0.0.1".into(),
        port: None,
    }]);
    spec.ports = mocks.iter().map(|m| m.port()).collect();
    spec.timeouts = timeouts();
    let mut cfg = ScanConfig::new(spec);
    cfg.dos.acknowledged = true;
    cfg
}

fn without_timestamps(r: &AssessmentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(r).unwrap();
    v["started_at"] = serde_json::Value::Null;
    v["finished_at"] = serde_json::Value::Null;
    v
}

fn c8_determinism() -> Outcome {
    let mocks: Vec<MockServer> = farm_names()
        .iter()
        .map(|n| MockServer::start(scenario(n)).unwrap())
        .collect();
    let cfg = farm_config(&mocks);
    let a = pipeline::run(Command::Full, &cfg).map_err(|e| e.to_string())?;
    let b = pipeline::run(Command::Full, &cfg).map_err(|e| e.to_string())?;
    let ids = |r: &AssessmentReport| r.findings().map(|f| f.id.clone()).collect::<BTreeSet<_>>();
    check(ids(&a) == ids(&b), "finding-id sets differ")?;
    check(
        without_timestamps(&a) == without_timestamps(&b),
        "reports differ beyond timestamps",
    )?;
    Ok(format!(
        "{} findings over {} servers, identical",
        ids(&a).len(),
        mocks.len()
    ))
}

struct MockFarm {
    child: std::process::Child,
    servers: Vec<(u16, SocketAddr)>,
}

impl Drop for MockFarm {
    fn drop(&mut self) {
        for (_, control) in &self.servers {
            let _ = control_query(*control, "stop");
        }
        if self.child.wait_timeout().is_none() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

trait WaitTimeout {
    fn wait_timeout(&mut self) -> Option<std::process::ExitStatus>;
}

impl WaitTimeout for std::process::Child {
    fn wait_timeout(&mut self) -> Option<std::process::ExitStatus> {
        let t = Instant::now();
        while t.elapsed() < Duration::from_secs(5) {
            if let Ok(Some(s)) = self.try_wait() {
                return Some(s);
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        None
    }
}

fn spawn_farm(names: &[String]) -> Result<MockFarm, String> {
    let mut cmd = Proc::new(env!("CARGO_BIN_EXE_uascan-mock"));
    for n in names {
        cmd.arg("--scenario").arg(n);
    }
    let mut child = cmd
        .current_dir(root())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let mut farm = MockFarm {
        child,
        servers: Vec::new(),
    };
    for _ in names {
        let line = lines
            .next()
            .ok_or("mock farm exited early")?
            .map_err(|e| e.to_string())?;
        let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| e.to_string())?;
        let port = v["port"].as_u64().ok_or("no port")? as u16;
        let control = v["control"]
            .as_str()
            .ok_or("no control")?
            .parse()
            .map_err(|e| format!("{e}"))?;
        farm.servers.push((port, control));
    }
    Ok(farm)
}

fn c9_end_to_end(suite_start: Instant) -> Outcome {
    let names = farm_names();
    let farm = spawn_farm(&names)?;
    let ports: Vec<String> = farm.servers.iter().map(|(p, _)| p.to_string()).collect();
    let report_path =
        std::env::temp_dir().join(format!("uascan-acceptance-{}.json", std::process::id()));
    let status = Proc::new(env!("CARGO_BIN_EXE_uascan"))
        .args([
            "full",
            "--targets",
            "127.0.0.1",
            "--ports",
            &ports.join(","),
            "--timeout",
            "5",
        ])
        .args(["--i-understand-dos", "--output", "json", "--report-file"])
        .arg(&report_path)
        .status()
        .map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&report_path);
    check(status.code() == Some(1), format!("exit status {status}"))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let schema: serde_json::Value = serde_json::from_str(SCHEMA_JSON).map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator
        .iter_errors(&doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    check(errors.is_empty(), format!("schema violations: {errors:?}"))?;
    let assessed = doc["assessments"].as_array().map_or(0, Vec::len);
    check(
        assessed == names.len(),
        format!("{assessed} of {} servers assessed", names.len()),
    )?;
    for (_, control) in &farm.servers {
        let live = control_query(*control, "live_sessions").map_err(|e| e.to_string())?;
        check(
            live["live_sessions"] == 0,
            format!("sessions left open: {live}"),
        )?;
    }
    drop(farm);
    let e = within(suite_start, Duration::from_secs(180))?;
    Ok(format!(
        "exit 1, {} servers, {} findings, schema valid; suite {e:.2?}",
        names.len(),
        doc["summary"]["total"]
    ))
}

fn main() {
    let suite_start = Instant::now();
    let criteria: Vec<Criterion> = vec![
        ("codec round-trip and fuzz", Box::new(c1_codec)),
        ("golden captures", Box::new(c2_golden)),
        ("discovery precision and recall", Box::new(c3_discovery)),
        ("endpoint classification (mixed)", Box::new(c4_mixed)),
        ("authentication battery", Box::new(c5_auth)),
        ("namespace audit (audit)", Box::new(c6_audit)),
        ("session exhaustion (lowcap)", Box::new(c7_lowcap)),
        ("determinism", Box::new(c8_determinism)),
        (
            "end-to-end pipeline",
            Box::new(move || c9_end_to_end(suite_start)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = t.elapsed();
        match r {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    std::io::stdout().flush().unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
