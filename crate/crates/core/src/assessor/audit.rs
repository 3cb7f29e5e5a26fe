//! Namespace permission audit.

use serde::{Deserialize, Serialize};

use crate::codec::{ids, NodeRef, StatusCode, WireValue};
use crate::evidence;
use crate::services::{BrowseLimits, NodeClass, SessionHandle, TreeNode};

use super::finding::{Finding, Rule, TargetRef};
use super::{AssessError, IdentityKind};

const READ_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteProbe {
    #[default]
    Off,
    WriteBack,
}

impl std::str::FromStr for WriteProbe {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(WriteProbe::Off),
            "writeback" => Ok(WriteProbe::WriteBack),
            _ => Err(format!(
                "unknown write probe mode {s:?} (expected off or writeback)"
            )),
        }
    }
}

/// Access bits as the server declares them for the identity in use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredAccess {
    pub readable: bool,
    pub writable: bool,
    pub access_level: Option<u8>,
    pub user_access_level: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedAccess {
    pub read_ok: bool,
    pub read_status: String,
    /// `None` when no write was attempted.
    pub write_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_status: Option<String>,
}

impl ObservedAccess {
    pub fn untested(&self) -> bool {
        self.write_ok.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAccessRecord {
    pub node: NodeRef,
    pub display_name: String,
    pub declared_access: DeclaredAccess,
    pub observed_access: ObservedAccess,
    pub identity_used: IdentityKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditOutcome {
    pub records: Vec<NodeAccessRecord>,
    pub findings: Vec<Finding>,
    pub warnings: Vec<String>,
    pub truncated: bool,
}

fn byte(v: &Option<WireValue>, status: StatusCode) -> Option<u8> {
    v.as_ref()
        .filter(|_| status.is_good())
        .and_then(WireValue::as_u8)
}

/// Browses from the Objects folder and checks every Variable found.
pub fn audit_namespace(
    session: &mut SessionHandle,
    target: &TargetRef,
    identity: IdentityKind,
    limits: &BrowseLimits,
    write_probe: WriteProbe,
) -> Result<AuditOutcome, AssessError> {
    let mut out = AuditOutcome::default();
    let tree = session.browse_tree(&NodeRef::numeric(0, ids::OBJECTS_FOLDER), limits)?;
    out.truncated = tree.truncated;
    for (node, status) in &tree.failed {
        out.warnings.push(format!("browse {node}: {status}"));
    }
    let variables: Vec<&TreeNode> = tree
        .nodes
        .iter()
        .filter(|n| n.node.node_class == NodeClass::Variable)
        .collect();

    for batch in variables.chunks(READ_BATCH) {
        let request: Vec<(NodeRef, u32)> = batch
            .iter()
            .flat_map(|n| {
                [
                    ids::attribute::ACCESS_LEVEL,
                    ids::attribute::USER_ACCESS_LEVEL,
                    ids::attribute::VALUE,
                ]
                .map(|a| (n.node.node.clone(), a))
            })
            .collect();
        let results = session.read_attributes(&request)?;
        for (n, r) in batch.iter().zip(results.chunks(3)) {
            let access_level = byte(&r[0].value, r[0].status);
            let user_access_level = byte(&r[1].value, r[1].status);
            let effective = user_access_level.or(access_level).unwrap_or(0);
            let declared = DeclaredAccess {
                readable: effective & ids::access::CURRENT_READ != 0,
                writable: effective & ids::access::CURRENT_WRITE != 0,
                access_level,
                user_access_level,
            };
            let value = &r[2];
            let read_ok = value.status.is_good() && value.value.is_some();
            let mut observed = ObservedAccess {
                read_ok,
                read_status: value.status.to_string(),
                write_ok: None,
                write_status: None,
            };
            if write_probe == WriteProbe::WriteBack && declared.writable {
                if let Some(v) = value.value.clone().filter(|_| read_ok) {
                    match session.write_value(&n.node.node, v) {
                        Ok(s) => {
                            observed.write_ok = Some(s.is_good());
                            observed.write_status = Some(s.to_string());
                        }
                        Err(e) => out.warnings.push(format!("write {}: {e}", n.node.node)),
                    }
                }
            }
            out.records.push(NodeAccessRecord {
                node: n.node.node.clone(),
                display_name: n.node.display_name.clone(),
                declared_access: declared,
                observed_access: observed,
                identity_used: identity,
            });
        }
    }
    out.records.sort_by(|a, b| a.node.cmp(&b.node));
    out.findings = access_findings(target, &out.records);
    Ok(out)
}

/// Findings derived from access records. Namespace 0 holds standard server
/// metadata and is exempt from the anonymous-readable rule.
pub fn access_findings(target: &TargetRef, records: &[NodeAccessRecord]) -> Vec<Finding> {
    let mut out = Vec::new();
    let anonymous: Vec<&NodeAccessRecord> = records
        .iter()
        .filter(|r| r.identity_used == IdentityKind::Anonymous)
        .collect();

    let readable: Vec<String> = anonymous
        .iter()
        .filter(|r| r.node.namespace != 0 && r.observed_access.read_ok)
        .map(|r| r.node.to_string())
        .collect();
    if !readable.is_empty() {
        out.push(Finding::new(
            Rule::AnonymousReadable,
            target,
            None,
            evidence! {"count" => readable.len(), "nodes" => readable},
        ));
    }

    for r in &anonymous {
        let writable = r
            .observed_access
            .write_ok
            .unwrap_or(r.declared_access.writable);
        if writable {
            out.push(Finding::new(
                Rule::AnonymousWritable,
                target,
                Some(r.node.to_string()),
                evidence! {
                    "display_name" => r.display_name,
                    "user_access_level" => r.declared_access.user_access_level,
                    "write_verified" => r.observed_access.write_ok == Some(true),
                },
            ));
        }
    }

    for r in records {
        let read_mismatch = r.declared_access.readable != r.observed_access.read_ok;
        let write_mismatch = r
            .observed_access
            .write_ok
            .is_some_and(|ok| ok != r.declared_access.writable);
        if read_mismatch || write_mismatch {
            out.push(Finding::new(
                Rule::PermissionMismatch,
                target,
                Some(format!("{} ({:?})", r.node, r.identity_used)),
                evidence! {
                    "declared_readable" => r.declared_access.readable,
                    "declared_writable" => r.declared_access.writable,
                    "read_status" => r.observed_access.read_status,
                    "write_status" => r.observed_access.write_status,
                },
            ));
        }
    }
    out
}
