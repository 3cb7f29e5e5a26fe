//! Runs one mock OPC UA server per `--scenario` until each is stopped over
//! its control socket. Prints one JSON line per server once all are up.

use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;

use uascan_core::mock::MockServer;

#[derive(Debug, Parser)]
#[command(
    name = "uascan-mock",
    version,
    about = "Scenario-driven mock OPC UA server"
)]
struct Args {
    /// Scenario file path or bundled scenario name. Repeatable.
    #[arg(long, required = true)]
    scenario: Vec<String>,
    /// Extra directory to look up scenario names in.
    #[arg(long)]
    scenario_dir: Vec<PathBuf>,
    /// Control socket port of the first server; later servers use the
    /// following ports. 0 picks free ports.
    #[arg(long, default_value_t = 0)]
    control_port: u16,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut dirs = args.scenario_dir.clone();
    dirs.push(PathBuf::from("scenarios"));
    dirs.push(uascan_cli::bundled_scenarios());

    let mut servers = Vec::new();
    for (i, name) in args.scenario.iter().enumerate() {
        let started = uascan_cli::resolve_scenario(name, &dirs).and_then(|s| {
            let mut m = MockServer::start(s).map_err(|e| e.to_string())?;
            let port = if args.control_port == 0 {
                0
            } else {
                args.control_port.saturating_add(i as u16)
            };
            let control = m.start_control(port).map_err(|e| e.to_string())?;
            Ok((m, control))
        });
        match started {
            Ok(s) => servers.push(s),
            Err(e) => {
                eprintln!("uascan-mock: {name}: {e}");
                std::process::exit(2);
            }
        }
    }
    for (m, control) in &servers {
        println!(
            "{}",
            serde_json::json!({
                "scenario": m.scenario().name,
                "port": m.port(),
                "endpoint_url": m.endpoint_url(),
                "control": control.to_string(),
            })
        );
    }
    while servers.iter().any(|(m, _)| m.is_running()) {
        std::thread::sleep(Duration::from_millis(100));
    }
}
