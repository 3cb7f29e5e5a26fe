use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use uascan_core::discovery::{self, HostEntry, TargetSpec, Verdict};
use uascan_core::mock::{MockEvent, MockServer, ScenarioConfig};
use uascan_core::transport::Timeouts;

fn scenario(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    ScenarioConfig::load(&path).unwrap()
}

fn quick() -> Timeouts {
    Timeouts::uniform(Duration::from_secs(2))
}

/// Accepts `n` connections and answers each with `reply(request_bytes)`.
fn responder<F>(n: usize, reply: F) -> (u16, JoinHandle<()>)
where
    F: Fn(&[u8]) -> Vec<u8> + Send + 'static,
{
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    let h = std::thread::spawn(move || {
        for s in l.incoming().take(n) {
            let Ok(mut s) = s else { continue };
            s.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
            let mut buf = [0u8; 4096];
            let got = s.read(&mut buf).unwrap_or(0);
            let _ = s.write_all(&reply(&buf[..got]));
        }
    });
    (port, h)
}

fn http(_: &[u8]) -> Vec<u8> {
    b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_vec()
}

fn closed_port() -> u16 {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().port()
}

#[test]
fn mock_probe_reports_ack_limits_without_sessions() {
    let m = MockServer::start(scenario("baseline")).unwrap();
    for _ in 0..3 {
        let r = discovery::probe("127.0.0.1", m.port(), &quick());
        assert_eq!(r.verdict, Verdict::OpcUa);
        let limits = r.ack_limits.unwrap();
        assert_eq!(limits.receive_buffer, 65_535);
    }
    // the mock logs a frame only once it has been read; wait for the last CLO
    let deadline = Instant::now() + Duration::from_secs(2);
    let frames = || {
        m.event_log()
            .into_iter()
            .filter_map(|e| match e {
                MockEvent::FrameReceived { message_type, .. } => Some(message_type),
                _ => None,
            })
            .collect::<Vec<_>>()
    };
    while frames().len() < 6 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }
    assert_eq!(frames(), ["HEL", "CLO", "HEL", "CLO", "HEL", "CLO"]);
    assert_eq!(m.live_sessions(), 0);
    assert!(!m.event_log().iter().any(|e| matches!(
        e,
        MockEvent::SessionCreated { .. } | MockEvent::AuthAttempt { .. }
    )));
}

#[test]
fn error_reply_to_hello_still_proves_opcua() {
    let mut s = scenario("baseline");
    s.reject_hello_url = true;
    let m = MockServer::start(s).unwrap();
    let r = discovery::probe("127.0.0.1", m.port(), &quick());
    assert_eq!(r.verdict, Verdict::OpcUa);
    assert!(r.ack_limits.is_none());
    assert!(r
        .error_status
        .unwrap()
        .starts_with("Bad_TcpEndpointUrlInvalid"));
}

#[test]
fn http_and_echo_listeners_are_not_opcua() {
    let (p, h) = responder(1, http);
    assert_eq!(
        discovery::probe("127.0.0.1", p, &quick()).verdict,
        Verdict::OpenNotOpcUa
    );
    h.join().unwrap();
    let (p, h) = responder(1, |req| req.to_vec());
    assert_eq!(
        discovery::probe("127.0.0.1", p, &quick()).verdict,
        Verdict::OpenNotOpcUa
    );
    h.join().unwrap();
}

#[test]
fn silent_listener_is_open_not_opcua_within_bound() {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    let t = Timeouts::uniform(Duration::from_millis(300));
    let start = Instant::now();
    let r = discovery::probe("127.0.0.1", port, &t);
    assert_eq!(r.verdict, Verdict::OpenNotOpcUa);
    assert!(start.elapsed() < Duration::from_secs(2));
    drop(l);
}

#[test]
fn three_target_harness() {
    let a = MockServer::start(scenario("baseline")).unwrap();
    let b = MockServer::start(scenario("anon")).unwrap();
    let (web, h) = responder(1, http);
    let closed = closed_port();
    let mut spec = TargetSpec::new(vec![HostEntry::Host {
        host: "127.0.0.1".into(),
        port: None,
    }]);
    spec.ports = vec![a.port(), b.port(), web, closed];
    spec.timeouts = quick();
    let start = Instant::now();
    let results = discovery::sweep(&spec).unwrap();
    assert!(start.elapsed() < Duration::from_secs(10));
    h.join().unwrap();
    let count = |v| results.iter().filter(|r| r.verdict == v).count();
    assert_eq!(count(Verdict::OpcUa), 2);
    assert_eq!(count(Verdict::OpenNotOpcUa), 1);
    assert_eq!(count(Verdict::Closed), 1);
    assert_eq!(results.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_byte_responders_are_never_opcua(reply in proptest::collection::vec(any::<u8>(), 0..256)) {
        let (p, h) = responder(1, move |_| reply.clone());
        let r = discovery::probe("127.0.0.1", p, &Timeouts::uniform(Duration::from_millis(500)));
        h.join().unwrap();
        prop_assert_ne!(r.verdict, Verdict::OpcUa);
    }

    #[test]
    fn probes_never_touch_the_session_gauge(n in 1usize..6) {
        let m = MockServer::start(scenario("anon")).unwrap();
        for _ in 0..n {
            discovery::probe("127.0.0.1", m.port(), &quick());
        }
        prop_assert_eq!(m.live_sessions(), 0);
    }
}

#[test]
fn all_timeout_sweep_respects_wall_time_bound() {
    // TEST-NET-1, never routed
    let mut spec = TargetSpec::new(vec!["192.0.2.1".parse().unwrap()]);
    spec.ports = (1..=8).collect();
    spec.parallelism = 4;
    spec.timeouts = Timeouts::uniform(Duration::from_millis(200));
    let start = Instant::now();
    let results = discovery::sweep(&spec).unwrap();
    let bound = discovery::worst_case_duration(8, 4, &spec.timeouts).mul_f64(1.2);
    assert!(
        start.elapsed() <= bound,
        "{:?} > {:?}",
        start.elapsed(),
        bound
    );
    assert!(results.iter().all(|r| r.verdict != Verdict::OpcUa));
}
