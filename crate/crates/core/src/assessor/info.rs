//! Server identity, build information and the servers it knows about.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{ids, NodeRef, StatusCode};
use crate::evidence;
use crate::services::{self, ServerRecord, SessionHandle};

use super::finding::{Finding, Rule, TargetRef};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub product_name: String,
    pub product_uri: String,
    pub manufacturer_name: String,
    pub software_version: String,
    pub build_number: String,
    pub build_date: String,
}

impl BuildInfo {
    pub fn is_empty(&self) -> bool {
        *self == BuildInfo::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerInfo {
    pub application_uri: String,
    pub product_uri: String,
    pub build_info: BuildInfo,
    pub namespace_array: Vec<String>,
    pub server_array: Vec<String>,
    /// Status of every field that could not be read, keyed by field name.
    #[serde(default)]
    pub field_status: BTreeMap<String, String>,
    #[serde(default)]
    pub known_servers: Vec<ServerRecord>,
}

const FIELDS: [(&str, u32); 8] = [
    ("server_array", ids::SERVER_SERVER_ARRAY),
    ("namespace_array", ids::SERVER_NAMESPACE_ARRAY),
    ("build_info.product_name", ids::BUILD_INFO_PRODUCT_NAME),
    ("build_info.product_uri", ids::BUILD_INFO_PRODUCT_URI),
    (
        "build_info.manufacturer_name",
        ids::BUILD_INFO_MANUFACTURER_NAME,
    ),
    (
        "build_info.software_version",
        ids::BUILD_INFO_SOFTWARE_VERSION,
    ),
    ("build_info.build_number", ids::BUILD_INFO_BUILD_NUMBER),
    ("build_info.build_date", ids::BUILD_INFO_BUILD_DATE),
];

/// Reads the standard server nodes and calls FindServers. Never fails as a
/// whole; unreadable fields stay empty with their status recorded.
pub fn gather_server_info(
    session: &mut SessionHandle,
    target: &TargetRef,
) -> (ServerInfo, Vec<Finding>, Vec<String>) {
    let mut info = ServerInfo::default();
    let mut warnings = Vec::new();
    let request: Vec<_> = FIELDS
        .iter()
        .map(|(_, id)| (NodeRef::numeric(0, *id), ids::attribute::VALUE))
        .collect();
    match session.read_attributes(&request) {
        Ok(results) => {
            for ((name, _), r) in FIELDS.iter().zip(results) {
                let value = match (&r.value, r.status.is_good()) {
                    (Some(v), true) => v,
                    _ => {
                        let status = if r.status.is_good() {
                            StatusCode::BAD_NO_DATA
                        } else {
                            r.status
                        };
                        info.field_status
                            .insert(name.to_string(), status.to_string());
                        continue;
                    }
                };
                match *name {
                    "server_array" => {
                        info.server_array = value.as_string_list().unwrap_or_default()
                    }
                    "namespace_array" => {
                        info.namespace_array = value.as_string_list().unwrap_or_default()
                    }
                    field => {
                        let s = value
                            .as_str()
                            .map(str::to_owned)
                            .unwrap_or_else(|| value.to_string());
                        let b = &mut info.build_info;
                        match field {
                            "build_info.product_name" => b.product_name = s,
                            "build_info.product_uri" => b.product_uri = s,
                            "build_info.manufacturer_name" => b.manufacturer_name = s,
                            "build_info.software_version" => b.software_version = s,
                            "build_info.build_number" => b.build_number = s,
                            _ => b.build_date = s,
                        }
                    }
                }
            }
        }
        Err(e) => {
            warnings.push(format!("server info read failed: {e}"));
            for (name, _) in FIELDS {
                info.field_status.insert(name.to_string(), e.to_string());
            }
        }
    }
    info.application_uri = info.server_array.first().cloned().unwrap_or_default();
    info.product_uri = info.build_info.product_uri.clone();

    match services::find_servers(&mut session.channel) {
        Ok(outcome) => {
            if let Some(w) = outcome.warning {
                info.field_status.insert("known_servers".into(), w.clone());
                warnings.push(w);
            }
            info.known_servers = outcome.servers;
            info.known_servers
                .sort_by(|a, b| a.application_uri.cmp(&b.application_uri));
        }
        Err(e) => {
            info.field_status
                .insert("known_servers".into(), e.to_string());
        }
    }

    let mut findings = Vec::new();
    let b = &info.build_info;
    if !b.product_name.is_empty() || !b.software_version.is_empty() {
        findings.push(Finding::new(
            Rule::ServerSoftware,
            target,
            None,
            evidence! {
                "product_name" => b.product_name,
                "manufacturer_name" => b.manufacturer_name,
                "software_version" => b.software_version,
                "build_number" => b.build_number,
            },
        ));
    }
    let others: Vec<&ServerRecord> = info
        .known_servers
        .iter()
        .filter(|s| s.application_uri != info.application_uri)
        .collect();
    if !others.is_empty() {
        let urls: Vec<&str> = others
            .iter()
            .flat_map(|s| s.discovery_urls.iter().map(String::as_str))
            .collect();
        let uris: Vec<&str> = others.iter().map(|s| s.application_uri.as_str()).collect();
        findings.push(Finding::new(
            Rule::KnownServers,
            target,
            None,
            evidence! {"application_uris" => uris, "discovery_urls" => urls},
        ));
    }
    (info, findings, warnings)
}
