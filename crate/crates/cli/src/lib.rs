//! Argument handling for the `uascan` and `uascan-mock` binaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use uascan_core::assessor::WriteProbe;
use uascan_core::discovery::{
    self, HostEntry, TargetSpec, DEFAULT_MATRIX_CAP, DEFAULT_PARALLELISM,
};
use uascan_core::identity::{Credential, CredentialSource};
use uascan_core::mock::ScenarioConfig;
use uascan_core::pipeline::{self, Command, ScanConfig};
use uascan_core::report::OutputFormat;
use uascan_core::transport::Timeouts;

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "uascan",
    version,
    about = "Security assessment of OPC UA servers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Find OPC UA servers on the given hosts and ports.
    Discover(Common),
    /// List endpoints and rate their security policies.
    Endpoints(Common),
    /// Test anonymous, credential and self-signed certificate logins.
    Auth(Common),
    /// Read server identity and build information.
    Info(Common),
    /// Walk the namespace and compare declared with observed access.
    Audit(Common),
    /// Session exhaustion check. Disruptive.
    Dos(Common),
    /// All of the above, feeding discovered servers back in.
    Full(Common),
}

impl Sub {
    fn split(&self) -> (Command, &Common) {
        match self {
            Sub::Discover(c) => (Command::Discover, c),
            Sub::Endpoints(c) => (Command::Endpoints, c),
            Sub::Auth(c) => (Command::Auth, c),
            Sub::Info(c) => (Command::Info, c),
            Sub::Audit(c) => (Command::Audit, c),
            Sub::Dos(c) => (Command::Dos, c),
            Sub::Full(c) => (Command::Full, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeArg {
    Off,
    Writeback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputArg {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Hosts, host:port pairs or CIDR ranges, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    /// File with one host[:port] or CIDR per line.
    #[arg(long)]
    pub targets_file: Option<PathBuf>,
    /// Ports for entries without one, e.g. `4840,4841` or `4840-4850`.
    #[arg(long, value_delimiter = ',')]
    pub ports: Vec<String>,
    /// Per-operation timeout in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub timeout: f64,
    /// Probes and assessments in flight at once.
    #[arg(long, default_value_t = DEFAULT_PARALLELISM)]
    pub parallelism: usize,
    /// Upper bound on the host x port matrix, including servers found on the way.
    #[arg(long, default_value_t = DEFAULT_MATRIX_CAP)]
    pub matrix_cap: usize,
    /// `user:password` per line; replaces the built-in default list.
    #[arg(long)]
    pub creds_file: Option<PathBuf>,
    /// Stop credential testing at the first accepted login.
    #[arg(long)]
    pub stop_on_first: bool,
    /// `writeback` writes each writable node's current value back to confirm write access.
    #[arg(long, value_enum, default_value = "off")]
    pub write_probe: ProbeArg,
    /// Run the session exhaustion check against every target.
    #[arg(long = "i-understand-dos")]
    pub i_understand_dos: bool,
    /// ApplicationUri the session exhaustion check may run against. Repeatable.
    #[arg(long)]
    pub dos_allow: Vec<String>,
    /// Most sessions the exhaustion check opens [default: 100].
    #[arg(long)]
    pub dos_cap: Option<usize>,
    /// Report format.
    #[arg(long, value_enum, default_value = "text")]
    pub output: OutputArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report_file: Option<PathBuf>,
}

fn parse_ports(specs: &[String]) -> Result<Vec<u16>, String> {
    let mut out = Vec::new();
    for s in specs.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let one = |p: &str| match p.trim().parse::<u16>() {
            Ok(0) | Err(_) => Err(format!("bad port {p:?}")),
            Ok(n) => Ok(n),
        };
        match s.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (one(a)?, one(b)?);
                if a > b {
                    return Err(format!("bad port range {s:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(one(s)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Builds the scan configuration from parsed flags.
pub fn scan_config(c: &Common) -> Result<ScanConfig, String> {
    let mut hosts = Vec::new();
    for t in c.targets.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
        hosts.push(
            t.parse::<HostEntry>()
                .map_err(|e| format!("target {t:?}: {e}"))?,
        );
    }
    if let Some(path) = &c.targets_file {
        hosts.extend(discovery::load_targets(path).map_err(|e| e.to_string())?);
    }
    if hosts.is_empty() {
        return Err("no targets given (use --targets or a non-empty --targets-file)".into());
    }
    if !(c.timeout.is_finite() && c.timeout > 0.0) {
        return Err(format!("bad timeout {}", c.timeout));
    }
    let mut spec = TargetSpec::new(hosts);
    let ports = parse_ports(&c.ports)?;
    if !ports.is_empty() {
        spec.ports = ports;
    }
    spec.timeouts = Timeouts::uniform(Duration::from_secs_f64(c.timeout));
    spec.parallelism = c.parallelism.max(1);
    spec.matrix_cap = c.matrix_cap;

    let mut cfg = ScanConfig::new(spec);
    if let Some(path) = &c.creds_file {
        cfg.credentials = Credential::load_list(path, CredentialSource::UserSupplied)
            .map_err(|e| e.to_string())?;
    }
    cfg.stop_on_first = c.stop_on_first;
    cfg.write_probe = match c.write_probe {
        ProbeArg::Off => WriteProbe::Off,
        ProbeArg::Writeback => WriteProbe::WriteBack,
    };
    cfg.dos.acknowledged = c.i_understand_dos;
    cfg.dos.allow_list = c.dos_allow.clone();
    if let Some(cap) = c.dos_cap {
        cfg.dos.safety_cap = cap.max(1);
    }
    Ok(cfg)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, String> {
    let (command, common) = cli.command.split();
    let cfg = scan_config(common)?;
    let report = pipeline::run(command, &cfg).map_err(|e| e.to_string())?;
    let format = match common.output {
        OutputArg::Json => OutputFormat::Json,
        OutputArg::Text => OutputFormat::Text,
    };
    let bytes = report.render(format);
    match &common.report_file {
        Some(path) => fs::write(path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?,
        None => out.write_all(&bytes).map_err(|e| e.to_string())?,
    }
    Ok(report.exit_code())
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_CLEAN;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(msg) => {
            error!("{msg}");
            let _ = writeln!(err, "uascan: {msg}");
            EXIT_ERROR
        }
    }
}

/// Resolves a scenario argument: a file path, or a name looked up in `dirs`.
pub fn resolve_scenario(arg: &str, dirs: &[PathBuf]) -> Result<ScenarioConfig, String> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return ScenarioConfig::load(direct).map_err(|e| e.to_string());
    }
    for d in dirs {
        let p = d.join(format!("{arg}.toml"));
        if p.is_file() {
            return ScenarioConfig::load(&p).map_err(|e| e.to_string());
        }
    }
    Err(format!("scenario {arg:?} not found"))
}

/// The scenarios directory shipped with the source tree.
pub fn bundled_scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_lists_and_ranges() {
        let ports = parse_ports(&["4841".into(), "4840-4842".into(), " ".into()]).unwrap();
        assert_eq!(ports, vec![4840, 4841, 4842]);
        assert!(parse_ports(&["0".into()]).is_err());
        assert!(parse_ports(&["10-5".into()]).is_err());
        assert!(parse_ports(&["x".into()]).is_err());
    }

    #[test]
    fn flags_map_onto_config() {
        let cli = Cli::try_parse_from([
            "uascan",
            "full",
            "--targets",
            "127.0.0.1,10.0.0.0/30",
            "--ports",
            "4840,4850",
            "--timeout",
            "0.5",
            "--parallelism",
            "3",
            "--stop-on-first",
            "--write-probe",
            "writeback",
            "--i-understand-dos",
            "--dos-allow",
            "urn:a",
            "--output",
            "json",
        ])
        .unwrap();
        let (cmd, c) = cli.command.split();
        assert_eq!(cmd, Command::Full);
        let cfg = scan_config(c).unwrap();
        assert_eq!(cfg.spec.hosts.len(), 2);
        assert_eq!(cfg.spec.ports, vec![4840, 4850]);
        assert_eq!(
            cfg.spec.timeouts,
            Timeouts::uniform(Duration::from_millis(500))
        );
        assert_eq!(cfg.spec.parallelism, 3);
        assert!(cfg.stop_on_first && cfg.dos.acknowledged);
        assert_eq!(cfg.write_probe, WriteProbe::WriteBack);
        assert_eq!(cfg.dos.allow_list, vec!["urn:a".to_string()]);
    }

    #[test]
    fn missing_targets_is_an_error() {
        let cli = Cli::try_parse_from(["uascan", "discover"]).unwrap();
        assert!(scan_config(cli.command.split().1).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["uascan", "nope"], &mut o, &mut e), EXIT_ERROR);
        assert_eq!(
            run(
                ["uascan", "audit", "--write-probe", "always"],
                &mut o,
                &mut e
            ),
            EXIT_ERROR
        );
        assert_eq!(
            run(["uascan", "full", "--targets", "a:b:c:d"], &mut o, &mut e),
            EXIT_ERROR
        );
    }
}
