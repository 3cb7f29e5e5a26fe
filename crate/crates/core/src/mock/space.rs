//! In-memory address space served by the mock.

use std::collections::BTreeMap;

use crate::codec::{
    ids, DataValue, DateTime, ExpandedNodeRef, LocalizedText, NodeRef, QualifiedName,
    ReferenceDescription, StatusCode, ValueKind, WireValue,
};
use crate::services::NodeClass;

use super::scenario::{ScenarioConfig, ScenarioError};

/// Who is asking, for access decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum IdentityClass {
    Anonymous,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockNode {
    pub id: NodeRef,
    pub browse_name: String,
    pub display_name: String,
    pub class: NodeClass,
    pub type_definition: NodeRef,
    pub value: Option<WireValue>,
    pub kind: Option<ValueKind>,
    pub access_level: u8,
    pub user_access_level: u8,
    pub anonymous_visible: bool,
    pub enforce_access: bool,
    pub restricted: bool,
    /// Forward hierarchical references: (reference type, child).
    pub children: Vec<(NodeRef, NodeRef)>,
}

impl MockNode {
    fn object(id: NodeRef, name: &str, type_definition: u32) -> Self {
        MockNode {
            id,
            browse_name: name.into(),
            display_name: name.into(),
            class: NodeClass::Object,
            type_definition: NodeRef::numeric(0, type_definition),
            value: None,
            kind: None,
            access_level: 0,
            user_access_level: 0,
            anonymous_visible: true,
            enforce_access: true,
            restricted: false,
            children: Vec::new(),
        }
    }

    fn variable(id: NodeRef, name: &str, value: WireValue, type_definition: u32) -> Self {
        MockNode {
            kind: Some(value.kind()),
            value: Some(value),
            class: NodeClass::Variable,
            type_definition: NodeRef::numeric(0, type_definition),
            access_level: ids::access::CURRENT_READ,
            user_access_level: ids::access::CURRENT_READ,
            ..MockNode::object(id, name, 0)
        }
    }

    fn visible_to(&self, who: IdentityClass) -> bool {
        who == IdentityClass::User || self.anonymous_visible
    }
}

#[derive(Debug, Clone, Default)]
pub struct AddressSpace {
    nodes: BTreeMap<NodeRef, MockNode>,
}

const BASE_OBJECT_TYPE: u32 = 58;

fn ns0(id: u32) -> NodeRef {
    NodeRef::numeric(0, id)
}

fn build_date(s: &Option<String>) -> WireValue {
    let t = s
        .as_deref()
        .and_then(|s| chrono::DateTime::parse_from_rfc3339(s).ok())
        .map(|t| DateTime::from_chrono(t.with_timezone(&chrono::Utc)))
        .unwrap_or(DateTime::NULL);
    WireValue::DateTime(t)
}

impl AddressSpace {
    pub fn from_scenario(s: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let mut space = AddressSpace::default();
        let info = &s.server_info;
        let bi = &info.build_info;
        space.insert(MockNode::object(ns0(84), "Root", ids::FOLDER_TYPE));
        space.insert(MockNode::object(
            ns0(ids::OBJECTS_FOLDER),
            "Objects",
            ids::FOLDER_TYPE,
        ));
        space.link(ns0(84), ids::ORGANIZES, ns0(ids::OBJECTS_FOLDER));
        space.insert(MockNode::object(ns0(ids::SERVER), "Server", 2004));
        space.link(ns0(ids::OBJECTS_FOLDER), ids::ORGANIZES, ns0(ids::SERVER));

        let mut namespaces = vec![
            ids::STANDARD_NAMESPACE_URI.to_string(),
            info.application_uri.clone(),
        ];
        if !s.nodes.is_empty() {
            namespaces.push(format!(
                "urn:uascan:mock:{}",
                if s.name.is_empty() { "nodes" } else { &s.name }
            ));
        }
        let props = [
            (
                ids::SERVER_SERVER_ARRAY,
                "ServerArray",
                WireValue::string_array([info.application_uri.clone()]),
            ),
            (
                ids::SERVER_NAMESPACE_ARRAY,
                "NamespaceArray",
                WireValue::string_array(namespaces),
            ),
        ];
        for (id, name, value) in props {
            space.insert(MockNode::variable(ns0(id), name, value, ids::PROPERTY_TYPE));
            space.link(ns0(ids::SERVER), ids::HAS_PROPERTY, ns0(id));
        }
        space.insert(MockNode::variable(
            ns0(ids::SERVER_STATUS),
            "ServerStatus",
            WireValue::Int32(0),
            2138,
        ));
        space.link(
            ns0(ids::SERVER),
            ids::HAS_COMPONENT,
            ns0(ids::SERVER_STATUS),
        );
        space.insert(MockNode::variable(
            ns0(ids::BUILD_INFO),
            "BuildInfo",
            WireValue::string(bi.product_name.clone()),
            3051,
        ));
        space.link(
            ns0(ids::SERVER_STATUS),
            ids::HAS_COMPONENT,
            ns0(ids::BUILD_INFO),
        );
        let build = [
            (
                ids::BUILD_INFO_PRODUCT_NAME,
                "ProductName",
                WireValue::string(bi.product_name.clone()),
            ),
            (
                ids::BUILD_INFO_PRODUCT_URI,
                "ProductUri",
                WireValue::string(info.product_uri.clone()),
            ),
            (
                ids::BUILD_INFO_MANUFACTURER_NAME,
                "ManufacturerName",
                WireValue::string(bi.manufacturer_name.clone()),
            ),
            (
                ids::BUILD_INFO_SOFTWARE_VERSION,
                "SoftwareVersion",
                WireValue::string(bi.software_version.clone()),
            ),
            (
                ids::BUILD_INFO_BUILD_NUMBER,
                "BuildNumber",
                WireValue::string(bi.build_number.clone()),
            ),
            (
                ids::BUILD_INFO_BUILD_DATE,
                "BuildDate",
                build_date(&bi.build_date),
            ),
        ];
        for (id, name, value) in build {
            space.insert(MockNode::variable(
                ns0(id),
                name,
                value,
                ids::BASE_DATA_VARIABLE_TYPE,
            ));
            space.link(ns0(ids::BUILD_INFO), ids::HAS_COMPONENT, ns0(id));
        }
        if s.restrict_build_info {
            for id in [ids::BUILD_INFO].into_iter().chain(build_ids()) {
                if let Some(n) = space.nodes.get_mut(&ns0(id)) {
                    n.restricted = true;
                }
            }
        }

        for n in &s.nodes {
            let node = match n.value()? {
                Some(value) => MockNode {
                    access_level: n.access_level,
                    user_access_level: n.effective_user_access_level(),
                    anonymous_visible: n.anonymous_visible,
                    enforce_access: n.enforce_access,
                    ..MockNode::variable(
                        n.node.clone(),
                        &n.display_name,
                        value,
                        ids::BASE_DATA_VARIABLE_TYPE,
                    )
                },
                None => MockNode {
                    anonymous_visible: n.anonymous_visible,
                    ..MockNode::object(n.node.clone(), &n.display_name, BASE_OBJECT_TYPE)
                },
            };
            space.insert(node);
        }
        for n in &s.nodes {
            let parent = n.parent.clone().unwrap_or_else(|| ns0(ids::OBJECTS_FOLDER));
            if !space.nodes.contains_key(&parent) {
                return Err(ScenarioError::Invalid(format!(
                    "{}: unknown parent {parent}",
                    n.node
                )));
            }
            let is_folder = space.nodes[&parent].type_definition == ns0(ids::FOLDER_TYPE);
            let rt = if is_folder {
                ids::ORGANIZES
            } else {
                ids::HAS_COMPONENT
            };
            space.link(parent, rt, n.node.clone());
        }
        Ok(space)
    }

    fn insert(&mut self, n: MockNode) {
        self.nodes.insert(n.id.clone(), n);
    }

    fn link(&mut self, parent: NodeRef, reference_type: u32, child: NodeRef) {
        if let Some(p) = self.nodes.get_mut(&parent) {
            p.children.push((ns0(reference_type), child));
        }
    }

    pub fn get(&self, id: &NodeRef) -> Option<&MockNode> {
        self.nodes.get(id)
    }

    fn visible(&self, id: &NodeRef, who: IdentityClass) -> Option<&MockNode> {
        self.nodes.get(id).filter(|n| n.visible_to(who))
    }

    /// Hierarchical children visible to `who`, or a bad status.
    pub fn browse(
        &self,
        id: &NodeRef,
        who: IdentityClass,
    ) -> Result<Vec<ReferenceDescription>, StatusCode> {
        let node = self
            .visible(id, who)
            .ok_or(StatusCode::BAD_NODE_ID_UNKNOWN)?;
        Ok(node
            .children
            .iter()
            .filter_map(|(rt, child)| {
                let c = self.visible(child, who)?;
                Some(ReferenceDescription {
                    reference_type_id: rt.clone(),
                    is_forward: true,
                    node_id: ExpandedNodeRef::local(c.id.clone()),
                    browse_name: QualifiedName {
                        namespace: c.id.namespace,
                        name: Some(c.browse_name.clone()),
                    },
                    display_name: LocalizedText::new(c.display_name.clone()),
                    node_class: c.class.to_wire(),
                    type_definition: ExpandedNodeRef::local(c.type_definition.clone()),
                })
            })
            .collect())
    }

    pub fn read(&self, id: &NodeRef, attribute: u32, who: IdentityClass) -> DataValue {
        let Some(node) = self.visible(id, who) else {
            return DataValue::from_status(StatusCode::BAD_NODE_ID_UNKNOWN);
        };
        let is_var = node.class == NodeClass::Variable;
        let v = match attribute {
            ids::attribute::NODE_CLASS => WireValue::Int32(node.class.to_wire() as i32),
            ids::attribute::DISPLAY_NAME => {
                WireValue::LocalizedText(LocalizedText::new(node.display_name.clone()))
            }
            ids::attribute::ACCESS_LEVEL if is_var => WireValue::Byte(node.access_level),
            ids::attribute::USER_ACCESS_LEVEL if is_var => WireValue::Byte(node.user_access_level),
            ids::attribute::VALUE if is_var => {
                if let Err(s) = self.check(node, ids::access::CURRENT_READ) {
                    return DataValue::from_status(s);
                }
                node.value.clone().expect("variables carry values")
            }
            _ => return DataValue::from_status(StatusCode::BAD_ATTRIBUTE_ID_INVALID),
        };
        DataValue::from_value(v)
    }

    fn check(&self, node: &MockNode, bit: u8) -> Result<(), StatusCode> {
        if node.restricted {
            return Err(StatusCode::BAD_USER_ACCESS_DENIED);
        }
        if !node.enforce_access {
            return Ok(());
        }
        if node.access_level & bit == 0 {
            return Err(if bit == ids::access::CURRENT_READ {
                StatusCode::BAD_NOT_READABLE
            } else {
                StatusCode::BAD_NOT_WRITABLE
            });
        }
        if node.user_access_level & bit == 0 {
            return Err(StatusCode::BAD_USER_ACCESS_DENIED);
        }
        Ok(())
    }

    pub fn write(
        &mut self,
        id: &NodeRef,
        attribute: u32,
        value: &DataValue,
        who: IdentityClass,
    ) -> StatusCode {
        let Some(node) = self.visible(id, who) else {
            return StatusCode::BAD_NODE_ID_UNKNOWN;
        };
        if attribute != ids::attribute::VALUE {
            return StatusCode::BAD_WRITE_NOT_SUPPORTED;
        }
        if node.class != NodeClass::Variable {
            return StatusCode::BAD_NOT_WRITABLE;
        }
        if let Err(s) = self.check(node, ids::access::CURRENT_WRITE) {
            return s;
        }
        let Some(v) = &value.value.value else {
            return StatusCode::BAD_TYPE_MISMATCH;
        };
        if Some(v.kind()) != node.kind {
            return StatusCode::BAD_TYPE_MISMATCH;
        }
        let node = self.nodes.get_mut(id).expect("checked above");
        node.value = Some(v.clone());
        StatusCode::GOOD
    }

    /// Current values of every variable outside namespace 0.
    pub fn snapshot(&self) -> BTreeMap<NodeRef, WireValue> {
        self.nodes
            .values()
            .filter(|n| n.id.namespace != 0)
            .filter_map(|n| Some((n.id.clone(), n.value.clone()?)))
            .collect()
    }
}

fn build_ids() -> [u32; 6] {
    [
        ids::BUILD_INFO_PRODUCT_NAME,
        ids::BUILD_INFO_PRODUCT_URI,
        ids::BUILD_INFO_MANUFACTURER_NAME,
        ids::BUILD_INFO_SOFTWARE_VERSION,
        ids::BUILD_INFO_BUILD_NUMBER,
        ids::BUILD_INFO_BUILD_DATE,
    ]
}
