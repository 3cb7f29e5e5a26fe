use std::fmt;
use std::str::FromStr;

use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BinaryCodec, CodecError, CodecResult, DecodeLimits, Reader, StatusCode, Writer};

/// 128-bit GUID in its wire layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Guid {
    pub data1: u32,
    pub data2: u16,
    pub data3: u16,
    pub data4: [u8; 8],
}

impl BinaryCodec for Guid {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.data1);
        w.u16(self.data2);
        w.u16(self.data3);
        w.raw(&self.data4);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let data1 = r.u32()?;
        let data2 = r.u16()?;
        let data3 = r.u16()?;
        let mut data4 = [0u8; 8];
        data4.copy_from_slice(r.take(8)?);
        Ok(Guid {
            data1,
            data2,
            data3,
            data4,
        })
    }
}

impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.data4;
        write!(
            f,
            "{:08x}-{:04x}-{:04x}-{:02x}{:02x}-{:02x}{:02x}{:02x}{:02x}{:02x}{:02x}",
            self.data1, self.data2, self.data3, d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7]
        )
    }
}

impl FromStr for Guid {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::malformed(format!("invalid guid {s:?}"));
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 5
            || [8, 4, 4, 4, 12]
                != [
                    parts[0].len(),
                    parts[1].len(),
                    parts[2].len(),
                    parts[3].len(),
                    parts[4].len(),
                ]
        {
            return Err(bad());
        }
        let data1 = u32::from_str_radix(parts[0], 16).map_err(|_| bad())?;
        let data2 = u16::from_str_radix(parts[1], 16).map_err(|_| bad())?;
        let data3 = u16::from_str_radix(parts[2], 16).map_err(|_| bad())?;
        let tail = hex::decode(format!("{}{}", parts[3], parts[4])).map_err(|_| bad())?;
        let mut data4 = [0u8; 8];
        data4.copy_from_slice(&tail);
        Ok(Guid {
            data1,
            data2,
            data3,
            data4,
        })
    }
}

/// 100-nanosecond ticks since 1601-01-01 UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct DateTime(pub i64);

const TICKS_UNIX_EPOCH: i64 = 116_444_736_000_000_000;

impl DateTime {
    pub const NULL: DateTime = DateTime(0);

    pub fn now() -> Self {
        Self::from_chrono(chrono::Utc::now())
    }

    pub fn from_chrono(t: chrono::DateTime<chrono::Utc>) -> Self {
        let ticks = t.timestamp() * 10_000_000 + i64::from(t.timestamp_subsec_nanos() / 100);
        DateTime(ticks + TICKS_UNIX_EPOCH)
    }

    pub fn to_chrono(self) -> Option<chrono::DateTime<chrono::Utc>> {
        if self.0 <= 0 {
            return None;
        }
        let since_unix = self.0 - TICKS_UNIX_EPOCH;
        let secs = since_unix.div_euclid(10_000_000);
        let nanos = (since_unix.rem_euclid(10_000_000) * 100) as u32;
        chrono::DateTime::from_timestamp(secs, nanos)
    }
}

/// Identifier part of a node id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Identifier {
    Numeric(u32),
    String(String),
    Guid(Guid),
    Opaque(Vec<u8>),
}

/// Address-space node identity (namespace index plus identifier).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub namespace: u16,
    pub identifier: Identifier,
}

impl NodeRef {
    pub const NULL: NodeRef = NodeRef {
        namespace: 0,
        identifier: Identifier::Numeric(0),
    };

    pub fn numeric(namespace: u16, id: u32) -> Self {
        NodeRef {
            namespace,
            identifier: Identifier::Numeric(id),
        }
    }

    pub fn string(namespace: u16, id: impl Into<String>) -> Self {
        NodeRef {
            namespace,
            identifier: Identifier::String(id.into()),
        }
    }

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }

    pub fn as_ns0_numeric(&self) -> Option<u32> {
        match self.identifier {
            Identifier::Numeric(n) if self.namespace == 0 => Some(n),
            _ => None,
        }
    }
}

const NODE_TWO_BYTE: u8 = 0x00;
const NODE_FOUR_BYTE: u8 = 0x01;
const NODE_NUMERIC: u8 = 0x02;
const NODE_STRING: u8 = 0x03;
const NODE_GUID: u8 = 0x04;
const NODE_OPAQUE: u8 = 0x05;
const EXPANDED_NAMESPACE_URI: u8 = 0x80;
const EXPANDED_SERVER_INDEX: u8 = 0x40;

impl NodeRef {
    fn encode_with_flags(&self, w: &mut Writer, flags: u8) -> CodecResult<()> {
        match &self.identifier {
            Identifier::Numeric(id) => {
                if self.namespace == 0 && *id <= 0xFF {
                    w.u8(NODE_TWO_BYTE | flags);
                    w.u8(*id as u8);
                } else if self.namespace <= 0xFF && *id <= 0xFFFF {
                    w.u8(NODE_FOUR_BYTE | flags);
                    w.u8(self.namespace as u8);
                    w.u16(*id as u16);
                } else {
                    w.u8(NODE_NUMERIC | flags);
                    w.u16(self.namespace);
                    w.u32(*id);
                }
            }
            Identifier::String(s) => {
                w.u8(NODE_STRING | flags);
                w.u16(self.namespace);
                w.string(Some(s))?;
            }
            Identifier::Guid(g) => {
                w.u8(NODE_GUID | flags);
                w.u16(self.namespace);
                g.encode(w)?;
            }
            Identifier::Opaque(b) => {
                w.u8(NODE_OPAQUE | flags);
                w.u16(self.namespace);
                w.byte_string(Some(b))?;
            }
        }
        Ok(())
    }

    fn decode_form(r: &mut Reader<'_>, form: u8) -> CodecResult<Self> {
        Ok(match form {
            NODE_TWO_BYTE => NodeRef::numeric(0, u32::from(r.u8()?)),
            NODE_FOUR_BYTE => {
                let ns = u16::from(r.u8()?);
                NodeRef::numeric(ns, u32::from(r.u16()?))
            }
            NODE_NUMERIC => {
                let ns = r.u16()?;
                NodeRef::numeric(ns, r.u32()?)
            }
            NODE_STRING => {
                let ns = r.u16()?;
                NodeRef::string(ns, r.string_or_empty()?)
            }
            NODE_GUID => {
                let ns = r.u16()?;
                NodeRef {
                    namespace: ns,
                    identifier: Identifier::Guid(Guid::decode(r)?),
                }
            }
            NODE_OPAQUE => {
                let ns = r.u16()?;
                NodeRef {
                    namespace: ns,
                    identifier: Identifier::Opaque(r.bytes_or_empty()?),
                }
            }
            other => {
                return Err(CodecError::malformed(format!(
                    "illegal node id encoding 0x{other:02x}"
                )))
            }
        })
    }
}

impl BinaryCodec for NodeRef {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.encode_with_flags(w, 0)
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let form = r.u8()?;
        if form & (EXPANDED_NAMESPACE_URI | EXPANDED_SERVER_INDEX) != 0 {
            return Err(CodecError::malformed(format!(
                "expanded node id flags 0x{form:02x} in plain node id"
            )));
        }
        Self::decode_form(r, form)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace != 0 {
            write!(f, "ns={};", self.namespace)?;
        }
        match &self.identifier {
            Identifier::Numeric(n) => write!(f, "i={n}"),
            Identifier::String(s) => write!(f, "s={s}"),
            Identifier::Guid(g) => write!(f, "g={g}"),
            Identifier::Opaque(b) => write!(
                f,
                "b={}",
                base64::engine::general_purpose::STANDARD.encode(b)
            ),
        }
    }
}

impl FromStr for NodeRef {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CodecError::malformed(format!("invalid node id {s:?}"));
        let (namespace, rest) = match s.strip_prefix("ns=") {
            Some(tail) => {
                let (ns, rest) = tail.split_once(';').ok_or_else(bad)?;
                (ns.parse::<u16>().map_err(|_| bad())?, rest)
            }
            None => (0, s),
        };
        let (kind, body) = rest.split_once('=').ok_or_else(bad)?;
        let identifier = match kind {
            "i" => Identifier::Numeric(body.parse().map_err(|_| bad())?),
            "s" => Identifier::String(body.to_owned()),
            "g" => Identifier::Guid(body.parse()?),
            "b" => Identifier::Opaque(
                base64::engine::general_purpose::STANDARD
                    .decode(body)
                    .map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        Ok(NodeRef {
            namespace,
            identifier,
        })
    }
}

impl Serialize for NodeRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Node id that may point into another namespace table or server.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExpandedNodeRef {
    pub node: NodeRef,
    pub namespace_uri: Option<String>,
    pub server_index: u32,
}

impl ExpandedNodeRef {
    pub fn local(node: NodeRef) -> Self {
        ExpandedNodeRef {
            node,
            namespace_uri: None,
            server_index: 0,
        }
    }

    pub fn is_local(&self) -> bool {
        self.namespace_uri.is_none() && self.server_index == 0
    }
}

impl BinaryCodec for ExpandedNodeRef {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        let mut flags = 0;
        if self.namespace_uri.is_some() {
            flags |= EXPANDED_NAMESPACE_URI;
        }
        if self.server_index != 0 {
            flags |= EXPANDED_SERVER_INDEX;
        }
        self.node.encode_with_flags(w, flags)?;
        if let Some(uri) = &self.namespace_uri {
            w.string(Some(uri))?;
        }
        if self.server_index != 0 {
            w.u32(self.server_index);
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let first = r.u8()?;
        let node = NodeRef::decode_form(r, first & 0x3F)?;
        let namespace_uri = if first & EXPANDED_NAMESPACE_URI != 0 {
            Some(r.string_or_empty()?)
        } else {
            None
        };
        let server_index = if first & EXPANDED_SERVER_INDEX != 0 {
            r.u32()?
        } else {
            0
        };
        Ok(ExpandedNodeRef {
            node,
            namespace_uri,
            server_index,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QualifiedName {
    pub namespace: u16,
    pub name: Option<String>,
}

impl BinaryCodec for QualifiedName {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u16(self.namespace);
        w.string(self.name.as_deref())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(QualifiedName {
            namespace: r.u16()?,
            name: r.string()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LocalizedText {
    pub locale: Option<String>,
    pub text: Option<String>,
}

impl LocalizedText {
    pub fn new(text: impl Into<String>) -> Self {
        LocalizedText {
            locale: None,
            text: Some(text.into()),
        }
    }

    pub fn text_or_empty(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }
}

impl BinaryCodec for LocalizedText {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        let mask = u8::from(self.locale.is_some()) | (u8::from(self.text.is_some()) << 1);
        w.u8(mask);
        if let Some(l) = &self.locale {
            w.string(Some(l))?;
        }
        if let Some(t) = &self.text {
            w.string(Some(t))?;
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let mask = r.u8()?;
        let locale = if mask & 0x01 != 0 { r.string()? } else { None };
        let text = if mask & 0x02 != 0 { r.string()? } else { None };
        Ok(LocalizedText { locale, text })
    }
}

/// Payload carried by an extension object.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtensionPayload {
    None,
    Binary(Vec<u8>),
    Xml(Vec<u8>),
}

/// Extension object: a type id followed by an opaque, length-prefixed body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtensionBody {
    pub type_id: NodeRef,
    pub payload: ExtensionPayload,
}

impl ExtensionBody {
    pub fn null() -> Self {
        ExtensionBody {
            type_id: NodeRef::NULL,
            payload: ExtensionPayload::None,
        }
    }

    pub fn binary(type_id: u32, body: Vec<u8>) -> Self {
        ExtensionBody {
            type_id: NodeRef::numeric(0, type_id),
            payload: ExtensionPayload::Binary(body),
        }
    }
}

impl BinaryCodec for ExtensionBody {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        self.type_id.encode(w)?;
        match &self.payload {
            ExtensionPayload::None => w.u8(0),
            ExtensionPayload::Binary(b) => {
                w.u8(1);
                w.byte_string(Some(b))?;
            }
            ExtensionPayload::Xml(b) => {
                w.u8(2);
                w.byte_string(Some(b))?;
            }
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let type_id = NodeRef::decode(r)?;
        let payload = match r.u8()? {
            0 => ExtensionPayload::None,
            1 => ExtensionPayload::Binary(r.bytes_or_empty()?),
            2 => ExtensionPayload::Xml(r.bytes_or_empty()?),
            other => {
                return Err(CodecError::malformed(format!(
                    "illegal extension object encoding {other}"
                )))
            }
        };
        Ok(ExtensionBody { type_id, payload })
    }
}

/// Type tag for [`WireValue`]; the numeric value is the variant type id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Boolean,
    SByte,
    Byte,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Int64,
    UInt64,
    Float32,
    Float64,
    UtfString,
    DateTime,
    Guid,
    ByteString,
    XmlElement,
    NodeRef,
    ExpandedNodeRef,
    StatusCode,
    QualifiedName,
    LocalizedText,
    ExtensionBody,
    Array(Box<ValueKind>),
}

impl ValueKind {
    pub const SCALARS: [ValueKind; 22] = [
        ValueKind::Boolean,
        ValueKind::SByte,
        ValueKind::Byte,
        ValueKind::Int16,
        ValueKind::UInt16,
        ValueKind::Int32,
        ValueKind::UInt32,
        ValueKind::Int64,
        ValueKind::UInt64,
        ValueKind::Float32,
        ValueKind::Float64,
        ValueKind::UtfString,
        ValueKind::DateTime,
        ValueKind::Guid,
        ValueKind::ByteString,
        ValueKind::XmlElement,
        ValueKind::NodeRef,
        ValueKind::ExpandedNodeRef,
        ValueKind::StatusCode,
        ValueKind::QualifiedName,
        ValueKind::LocalizedText,
        ValueKind::ExtensionBody,
    ];

    /// Built-in type id used in variant encodings. Arrays have none.
    pub fn type_id(&self) -> Option<u8> {
        Some(match self {
            ValueKind::Boolean => 1,
            ValueKind::SByte => 2,
            ValueKind::Byte => 3,
            ValueKind::Int16 => 4,
            ValueKind::UInt16 => 5,
            ValueKind::Int32 => 6,
            ValueKind::UInt32 => 7,
            ValueKind::Int64 => 8,
            ValueKind::UInt64 => 9,
            ValueKind::Float32 => 10,
            ValueKind::Float64 => 11,
            ValueKind::UtfString => 12,
            ValueKind::DateTime => 13,
            ValueKind::Guid => 14,
            ValueKind::ByteString => 15,
            ValueKind::XmlElement => 16,
            ValueKind::NodeRef => 17,
            ValueKind::ExpandedNodeRef => 18,
            ValueKind::StatusCode => 19,
            ValueKind::QualifiedName => 20,
            ValueKind::LocalizedText => 21,
            ValueKind::ExtensionBody => 22,
            ValueKind::Array(_) => return None,
        })
    }

    pub fn from_type_id(id: u8) -> Option<ValueKind> {
        ValueKind::SCALARS
            .iter()
            .find(|k| k.type_id() == Some(id))
            .cloned()
    }

    /// Name used in scenario files and reports.
    pub fn name(&self) -> String {
        match self {
            ValueKind::Array(inner) => format!("{}[]", inner.name()),
            other => format!("{other:?}"),
        }
    }
}

impl FromStr for ValueKind {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(inner) = s.strip_suffix("[]") {
            return Ok(ValueKind::Array(Box::new(inner.parse()?)));
        }
        let alias = match s {
            "String" => "UtfString",
            "Double" => "Float64",
            "Float" => "Float32",
            "NodeId" => "NodeRef",
            other => other,
        };
        ValueKind::SCALARS
            .iter()
            .find(|k| format!("{k:?}") == alias)
            .cloned()
            .ok_or_else(|| CodecError::malformed(format!("unknown value kind {s:?}")))
    }
}

/// A typed value on the wire.
#[derive(Debug, Clone)]
pub enum WireValue {
    Boolean(bool),
    SByte(i8),
    Byte(u8),
    Int16(i16),
    UInt16(u16),
    Int32(i32),
    UInt32(u32),
    Int64(i64),
    UInt64(u64),
    Float32(f32),
    Float64(f64),
    UtfString(Option<String>),
    DateTime(DateTime),
    Guid(Guid),
    ByteString(Option<Vec<u8>>),
    XmlElement(Option<Vec<u8>>),
    NodeRef(NodeRef),
    ExpandedNodeRef(ExpandedNodeRef),
    StatusCode(StatusCode),
    QualifiedName(QualifiedName),
    LocalizedText(LocalizedText),
    ExtensionBody(ExtensionBody),
    /// Homogeneous sequence; `items == None` is the null array.
    Array {
        kind: ValueKind,
        items: Option<Vec<WireValue>>,
    },
}

// Floats compare by bit pattern so NaN payloads survive round-trip checks.
impl PartialEq for WireValue {
    fn eq(&self, other: &Self) -> bool {
        use WireValue::*;
        match (self, other) {
            (Boolean(a), Boolean(b)) => a == b,
            (SByte(a), SByte(b)) => a == b,
            (Byte(a), Byte(b)) => a == b,
            (Int16(a), Int16(b)) => a == b,
            (UInt16(a), UInt16(b)) => a == b,
            (Int32(a), Int32(b)) => a == b,
            (UInt32(a), UInt32(b)) => a == b,
            (Int64(a), Int64(b)) => a == b,
            (UInt64(a), UInt64(b)) => a == b,
            (Float32(a), Float32(b)) => a.to_bits() == b.to_bits(),
            (Float64(a), Float64(b)) => a.to_bits() == b.to_bits(),
            (UtfString(a), UtfString(b)) => a == b,
            (DateTime(a), DateTime(b)) => a == b,
            (Guid(a), Guid(b)) => a == b,
            (ByteString(a), ByteString(b)) => a == b,
            (XmlElement(a), XmlElement(b)) => a == b,
            (NodeRef(a), NodeRef(b)) => a == b,
            (ExpandedNodeRef(a), ExpandedNodeRef(b)) => a == b,
            (StatusCode(a), StatusCode(b)) => a == b,
            (QualifiedName(a), QualifiedName(b)) => a == b,
            (LocalizedText(a), LocalizedText(b)) => a == b,
            (ExtensionBody(a), ExtensionBody(b)) => a == b,
            (
                Array {
                    kind: k1,
                    items: i1,
                },
                Array {
                    kind: k2,
                    items: i2,
                },
            ) => k1 == k2 && i1 == i2,
            _ => false,
        }
    }
}

impl fmt::Display for WireValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(f: &mut fmt::Formatter<'_>, v: &Option<T>) -> fmt::Result {
            match v {
                Some(v) => write!(f, "{v}"),
                None => f.write_str("null"),
            }
        }
        match self {
            WireValue::Boolean(v) => write!(f, "{v}"),
            WireValue::SByte(v) => write!(f, "{v}"),
            WireValue::Byte(v) => write!(f, "{v}"),
            WireValue::Int16(v) => write!(f, "{v}"),
            WireValue::UInt16(v) => write!(f, "{v}"),
            WireValue::Int32(v) => write!(f, "{v}"),
            WireValue::UInt32(v) => write!(f, "{v}"),
            WireValue::Int64(v) => write!(f, "{v}"),
            WireValue::UInt64(v) => write!(f, "{v}"),
            WireValue::Float32(v) => write!(f, "{v}"),
            WireValue::Float64(v) => write!(f, "{v}"),
            WireValue::UtfString(v) => opt(f, v),
            WireValue::DateTime(d) => match d.to_chrono() {
                Some(t) => write!(
                    f,
                    "{}",
                    t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
                ),
                None => f.write_str("null"),
            },
            WireValue::Guid(g) => write!(f, "{g}"),
            WireValue::ByteString(b) | WireValue::XmlElement(b) => match b {
                Some(b) => write!(f, "0x{}", hex::encode(b)),
                None => f.write_str("null"),
            },
            WireValue::NodeRef(n) => write!(f, "{n}"),
            WireValue::ExpandedNodeRef(n) => write!(f, "{}", n.node),
            WireValue::StatusCode(s) => write!(f, "{s}"),
            WireValue::QualifiedName(q) => {
                write!(f, "{}:", q.namespace)?;
                opt(f, &q.name)
            }
            WireValue::LocalizedText(t) => opt(f, &t.text),
            WireValue::ExtensionBody(e) => write!(f, "extension {}", e.type_id),
            WireValue::Array { items: None, .. } => f.write_str("null"),
            WireValue::Array {
                items: Some(items), ..
            } => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl WireValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            WireValue::Boolean(_) => ValueKind::Boolean,
            WireValue::SByte(_) => ValueKind::SByte,
            WireValue::Byte(_) => ValueKind::Byte,
            WireValue::Int16(_) => ValueKind::Int16,
            WireValue::UInt16(_) => ValueKind::UInt16,
            WireValue::Int32(_) => ValueKind::Int32,
            WireValue::UInt32(_) => ValueKind::UInt32,
            WireValue::Int64(_) => ValueKind::Int64,
            WireValue::UInt64(_) => ValueKind::UInt64,
            WireValue::Float32(_) => ValueKind::Float32,
            WireValue::Float64(_) => ValueKind::Float64,
            WireValue::UtfString(_) => ValueKind::UtfString,
            WireValue::DateTime(_) => ValueKind::DateTime,
            WireValue::Guid(_) => ValueKind::Guid,
            WireValue::ByteString(_) => ValueKind::ByteString,
            WireValue::XmlElement(_) => ValueKind::XmlElement,
            WireValue::NodeRef(_) => ValueKind::NodeRef,
            WireValue::ExpandedNodeRef(_) => ValueKind::ExpandedNodeRef,
            WireValue::StatusCode(_) => ValueKind::StatusCode,
            WireValue::QualifiedName(_) => ValueKind::QualifiedName,
            WireValue::LocalizedText(_) => ValueKind::LocalizedText,
            WireValue::ExtensionBody(_) => ValueKind::ExtensionBody,
            WireValue::Array { kind, .. } => ValueKind::Array(Box::new(kind.clone())),
        }
    }

    pub fn string(s: impl Into<String>) -> Self {
        WireValue::UtfString(Some(s.into()))
    }

    pub fn string_array<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        WireValue::Array {
            kind: ValueKind::UtfString,
            items: Some(items.into_iter().map(WireValue::string).collect()),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            WireValue::UtfString(Some(s)) => Some(s),
            WireValue::LocalizedText(t) => t.text.as_deref(),
            _ => None,
        }
    }

    pub fn as_u8(&self) -> Option<u8> {
        match self {
            WireValue::Byte(b) => Some(*b),
            _ => None,
        }
    }

    /// Elements of a string array, skipping nulls.
    pub fn as_string_list(&self) -> Option<Vec<String>> {
        match self {
            WireValue::Array {
                kind: ValueKind::UtfString,
                items,
            } => Some(
                items
                    .iter()
                    .flatten()
                    .filter_map(|v| v.as_str().map(str::to_owned))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Short human-readable rendering for reports.
    pub fn display(&self) -> String {
        match self {
            WireValue::UtfString(Some(s)) => s.clone(),
            WireValue::UtfString(None) => "null".into(),
            WireValue::LocalizedText(t) => t.text_or_empty().to_owned(),
            WireValue::ByteString(Some(b)) | WireValue::XmlElement(Some(b)) => hex::encode(b),
            WireValue::NodeRef(n) => n.to_string(),
            WireValue::StatusCode(s) => s.to_string(),
            WireValue::Array {
                items: Some(items), ..
            } => {
                let inner: Vec<String> = items.iter().map(WireValue::display).collect();
                format!("[{}]", inner.join(", "))
            }
            WireValue::Array { items: None, .. } => "null".into(),
            WireValue::Boolean(v) => v.to_string(),
            WireValue::SByte(v) => v.to_string(),
            WireValue::Byte(v) => v.to_string(),
            WireValue::Int16(v) => v.to_string(),
            WireValue::UInt16(v) => v.to_string(),
            WireValue::Int32(v) => v.to_string(),
            WireValue::UInt32(v) => v.to_string(),
            WireValue::Int64(v) => v.to_string(),
            WireValue::UInt64(v) => v.to_string(),
            WireValue::Float32(v) => v.to_string(),
            WireValue::Float64(v) => v.to_string(),
            WireValue::DateTime(d) => d
                .to_chrono()
                .map(|t| t.to_rfc3339())
                .unwrap_or_else(|| d.0.to_string()),
            other => format!("{other:?}"),
        }
    }
}

fn encode_scalar(w: &mut Writer, v: &WireValue) -> CodecResult<()> {
    match v {
        WireValue::Boolean(b) => w.bool(*b),
        WireValue::SByte(b) => w.u8(*b as u8),
        WireValue::Byte(b) => w.u8(*b),
        WireValue::Int16(x) => w.i16(*x),
        WireValue::UInt16(x) => w.u16(*x),
        WireValue::Int32(x) => w.i32(*x),
        WireValue::UInt32(x) => w.u32(*x),
        WireValue::Int64(x) => w.i64(*x),
        WireValue::UInt64(x) => w.u64(*x),
        WireValue::Float32(x) => w.f32(*x),
        WireValue::Float64(x) => w.f64(*x),
        WireValue::UtfString(s) => w.string(s.as_deref())?,
        WireValue::DateTime(d) => w.i64(d.0),
        WireValue::Guid(g) => g.encode(w)?,
        WireValue::ByteString(b) | WireValue::XmlElement(b) => w.byte_string(b.as_deref())?,
        WireValue::NodeRef(n) => n.encode(w)?,
        WireValue::ExpandedNodeRef(n) => n.encode(w)?,
        WireValue::StatusCode(s) => w.u32(s.0),
        WireValue::QualifiedName(q) => q.encode(w)?,
        WireValue::LocalizedText(t) => t.encode(w)?,
        WireValue::ExtensionBody(e) => e.encode(w)?,
        WireValue::Array { kind, items } => {
            w.array_len(items.as_ref().map(Vec::len))?;
            for item in items.iter().flatten() {
                if item.kind() != *kind {
                    return Err(CodecError::malformed(format!(
                        "heterogeneous array: {} element in {} array",
                        item.kind().name(),
                        kind.name()
                    )));
                }
                encode_scalar(w, item)?;
            }
        }
    }
    Ok(())
}

fn decode_kind(r: &mut Reader<'_>, kind: &ValueKind) -> CodecResult<WireValue> {
    Ok(match kind {
        ValueKind::Boolean => WireValue::Boolean(r.bool()?),
        ValueKind::SByte => WireValue::SByte(r.i8()?),
        ValueKind::Byte => WireValue::Byte(r.u8()?),
        ValueKind::Int16 => WireValue::Int16(r.i16()?),
        ValueKind::UInt16 => WireValue::UInt16(r.u16()?),
        ValueKind::Int32 => WireValue::Int32(r.i32()?),
        ValueKind::UInt32 => WireValue::UInt32(r.u32()?),
        ValueKind::Int64 => WireValue::Int64(r.i64()?),
        ValueKind::UInt64 => WireValue::UInt64(r.u64()?),
        ValueKind::Float32 => WireValue::Float32(r.f32()?),
        ValueKind::Float64 => WireValue::Float64(r.f64()?),
        ValueKind::UtfString => WireValue::UtfString(r.string()?),
        ValueKind::DateTime => WireValue::DateTime(DateTime(r.i64()?)),
        ValueKind::Guid => WireValue::Guid(Guid::decode(r)?),
        ValueKind::ByteString => WireValue::ByteString(r.byte_string()?),
        ValueKind::XmlElement => WireValue::XmlElement(r.byte_string()?),
        ValueKind::NodeRef => WireValue::NodeRef(NodeRef::decode(r)?),
        ValueKind::ExpandedNodeRef => WireValue::ExpandedNodeRef(ExpandedNodeRef::decode(r)?),
        ValueKind::StatusCode => WireValue::StatusCode(StatusCode(r.u32()?)),
        ValueKind::QualifiedName => WireValue::QualifiedName(QualifiedName::decode(r)?),
        ValueKind::LocalizedText => WireValue::LocalizedText(LocalizedText::decode(r)?),
        ValueKind::ExtensionBody => WireValue::ExtensionBody(ExtensionBody::decode(r)?),
        ValueKind::Array(inner) => {
            r.enter()?;
            let items = r.array_of(|r| decode_kind(r, inner))?;
            r.leave();
            WireValue::Array {
                kind: (**inner).clone(),
                items,
            }
        }
    })
}

/// Canonical encoding of a single value (no variant type prefix).
pub fn encode_value(v: &WireValue) -> CodecResult<Vec<u8>> {
    let mut w = Writer::new();
    encode_scalar(&mut w, v)?;
    Ok(w.into_inner())
}

/// Decodes a value of a known kind; returns the value and octets consumed.
pub fn decode_value(buf: &[u8], kind: &ValueKind) -> CodecResult<(WireValue, usize)> {
    decode_value_with_limits(buf, kind, DecodeLimits::default())
}

pub fn decode_value_with_limits(
    buf: &[u8],
    kind: &ValueKind,
    limits: DecodeLimits,
) -> CodecResult<(WireValue, usize)> {
    let mut r = Reader::with_limits(buf, limits);
    let v = decode_kind(&mut r, kind)?;
    Ok((v, r.position()))
}

const VARIANT_ARRAY: u8 = 0x80;
const VARIANT_DIMENSIONS: u8 = 0x40;

/// Self-describing value as found in `DataValue`s and attribute reads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Variant {
    pub value: Option<WireValue>,
    /// Matrix dimensions; the items are stored flattened in `value`.
    pub dimensions: Option<Vec<i32>>,
}

impl Variant {
    pub fn new(v: WireValue) -> Self {
        Variant {
            value: Some(v),
            dimensions: None,
        }
    }
}

impl BinaryCodec for Variant {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        let Some(value) = &self.value else {
            w.u8(0);
            return Ok(());
        };
        match value {
            WireValue::Array { kind, .. } => {
                let id = kind.type_id().ok_or_else(|| {
                    CodecError::malformed("nested arrays are not representable in a variant")
                })?;
                let dims = if self.dimensions.is_some() {
                    VARIANT_DIMENSIONS
                } else {
                    0
                };
                w.u8(id | VARIANT_ARRAY | dims);
                encode_scalar(w, value)?;
                if let Some(d) = &self.dimensions {
                    w.vec_of(d, |w, x| {
                        w.i32(*x);
                        Ok(())
                    })?;
                }
            }
            scalar => {
                w.u8(scalar.kind().type_id().expect("scalar kind"));
                encode_scalar(w, scalar)?;
            }
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let mask = r.u8()?;
        let type_id = mask & 0x3F;
        if type_id == 0 {
            return Ok(Variant::default());
        }
        let kind = ValueKind::from_type_id(type_id).ok_or_else(|| {
            CodecError::malformed(format!("unsupported variant type id {type_id}"))
        })?;
        r.enter()?;
        let out = if mask & VARIANT_ARRAY != 0 {
            let items = r.array_of(|r| decode_kind(r, &kind))?;
            let dimensions = if mask & VARIANT_DIMENSIONS != 0 {
                Some(r.vec_of(|r| r.i32())?)
            } else {
                None
            };
            Variant {
                value: Some(WireValue::Array { kind, items }),
                dimensions,
            }
        } else {
            Variant::new(decode_kind(r, &kind)?)
        };
        r.leave();
        Ok(out)
    }
}

/// Value plus quality and timestamps, as returned by Read.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataValue {
    pub value: Variant,
    pub status: Option<StatusCode>,
    pub source_timestamp: Option<DateTime>,
    pub source_picoseconds: Option<u16>,
    pub server_timestamp: Option<DateTime>,
    pub server_picoseconds: Option<u16>,
}

impl DataValue {
    pub fn from_value(v: WireValue) -> Self {
        DataValue {
            value: Variant::new(v),
            ..Default::default()
        }
    }

    pub fn from_status(s: StatusCode) -> Self {
        DataValue {
            status: Some(s),
            ..Default::default()
        }
    }

    /// Effective status; absence means Good.
    pub fn status(&self) -> StatusCode {
        self.status.unwrap_or(StatusCode::GOOD)
    }
}

impl BinaryCodec for DataValue {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        let mut mask = 0u8;
        if self.value.value.is_some() {
            mask |= 0x01;
        }
        if self.status.is_some() {
            mask |= 0x02;
        }
        if self.source_timestamp.is_some() {
            mask |= 0x04;
        }
        if self.server_timestamp.is_some() {
            mask |= 0x08;
        }
        if self.source_picoseconds.is_some() {
            mask |= 0x10;
        }
        if self.server_picoseconds.is_some() {
            mask |= 0x20;
        }
        w.u8(mask);
        if self.value.value.is_some() {
            self.value.encode(w)?;
        }
        if let Some(s) = self.status {
            w.u32(s.0);
        }
        if let Some(t) = self.source_timestamp {
            w.i64(t.0);
        }
        if let Some(p) = self.source_picoseconds {
            w.u16(p);
        }
        if let Some(t) = self.server_timestamp {
            w.i64(t.0);
        }
        if let Some(p) = self.server_picoseconds {
            w.u16(p);
        }
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let mask = r.u8()?;
        let value = if mask & 0x01 != 0 {
            Variant::decode(r)?
        } else {
            Variant::default()
        };
        let status = if mask & 0x02 != 0 {
            Some(StatusCode(r.u32()?))
        } else {
            None
        };
        let source_timestamp = if mask & 0x04 != 0 {
            Some(DateTime(r.i64()?))
        } else {
            None
        };
        let source_picoseconds = if mask & 0x10 != 0 {
            Some(r.u16()?)
        } else {
            None
        };
        let server_timestamp = if mask & 0x08 != 0 {
            Some(DateTime(r.i64()?))
        } else {
            None
        };
        let server_picoseconds = if mask & 0x20 != 0 {
            Some(r.u16()?)
        } else {
            None
        };
        Ok(DataValue {
            value,
            status,
            source_timestamp,
            source_picoseconds,
            server_timestamp,
            server_picoseconds,
        })
    }
}

/// Consumes one DiagnosticInfo without keeping it.
pub fn skip_diagnostic_info(r: &mut Reader<'_>) -> CodecResult<()> {
    r.enter()?;
    let mask = r.u8()?;
    for bit in [0x01u8, 0x02, 0x04, 0x08] {
        if mask & bit != 0 {
            r.i32()?;
        }
    }
    if mask & 0x10 != 0 {
        r.string()?;
    }
    if mask & 0x20 != 0 {
        r.u32()?;
    }
    if mask & 0x40 != 0 {
        skip_diagnostic_info(r)?;
    }
    r.leave();
    Ok(())
}

pub fn skip_diagnostic_infos(r: &mut Reader<'_>) -> CodecResult<()> {
    r.array_of(skip_diagnostic_info)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uint32_zero() {
        assert_eq!(encode_value(&WireValue::UInt32(0)).unwrap(), [0, 0, 0, 0]);
    }

    #[test]
    fn null_string_encoding() {
        assert_eq!(
            encode_value(&WireValue::UtfString(None)).unwrap(),
            [0xFF, 0xFF, 0xFF, 0xFF]
        );
    }

    #[test]
    fn namespace_array_node_uses_four_byte_form() {
        let v = WireValue::NodeRef(NodeRef::numeric(0, 2255));
        assert_eq!(encode_value(&v).unwrap(), [0x01, 0x00, 0xCF, 0x08]);
    }

    #[test]
    fn node_forms_are_shortest() {
        let enc = |n: NodeRef| encode_value(&WireValue::NodeRef(n)).unwrap();
        assert_eq!(enc(NodeRef::numeric(0, 85)), [0x00, 85]);
        assert_eq!(enc(NodeRef::numeric(1, 85)), [0x01, 1, 85, 0]);
        assert_eq!(enc(NodeRef::numeric(0, 256))[0], 0x01);
        assert_eq!(enc(NodeRef::numeric(256, 1))[0], 0x02);
        assert_eq!(enc(NodeRef::numeric(0, 70_000))[0], 0x02);
    }

    #[test]
    fn empty_string_decodes() {
        let (v, used) = decode_value(&[0, 0, 0, 0], &ValueKind::UtfString).unwrap();
        assert_eq!(v, WireValue::UtfString(Some(String::new())));
        assert_eq!(used, 4);
    }

    #[test]
    fn null_array_decodes() {
        let kind = ValueKind::Array(Box::new(ValueKind::Int32));
        let (v, used) = decode_value(&[0xFF; 4], &kind).unwrap();
        assert_eq!(
            v,
            WireValue::Array {
                kind: ValueKind::Int32,
                items: None
            }
        );
        assert_eq!(used, 4);
    }

    #[test]
    fn short_buffer_is_truncated() {
        assert!(matches!(
            decode_value(&[1, 2], &ValueKind::UInt32),
            Err(CodecError::Truncated { .. })
        ));
    }

    #[test]
    fn invalid_utf8_is_malformed() {
        let buf = [2, 0, 0, 0, 0xC3, 0x28];
        assert!(matches!(
            decode_value(&buf, &ValueKind::UtfString),
            Err(CodecError::Malformed(_))
        ));
    }

    #[test]
    fn illegal_node_form_is_malformed() {
        assert!(matches!(
            decode_value(&[0x07, 0, 0], &ValueKind::NodeRef),
            Err(CodecError::Malformed(_))
        ));
    }

    #[test]
    fn heterogeneous_array_rejected() {
        let v = WireValue::Array {
            kind: ValueKind::Int32,
            items: Some(vec![WireValue::Int32(1), WireValue::Boolean(true)]),
        };
        assert!(encode_value(&v).is_err());
    }

    #[test]
    fn node_ref_text_forms() {
        for s in [
            "i=85",
            "ns=2;s=Line 1/Temp",
            "ns=3;g=72962b91-fa75-4ae6-8d28-b404dc7daf63",
            "ns=1;b=AAEC",
        ] {
            let n: NodeRef = s.parse().unwrap();
            assert_eq!(n.to_string(), s);
        }
        assert!("ns=x;i=1".parse::<NodeRef>().is_err());
        assert!("q=1".parse::<NodeRef>().is_err());
    }

    #[test]
    fn variant_matrix_keeps_dimensions() {
        let v = Variant {
            value: Some(WireValue::Array {
                kind: ValueKind::Int16,
                items: Some((0..6).map(WireValue::Int16).collect()),
            }),
            dimensions: Some(vec![2, 3]),
        };
        let bytes = v.to_bytes().unwrap();
        assert_eq!(bytes[0], 4 | 0x80 | 0x40);
        assert_eq!(Variant::from_bytes(&bytes).unwrap(), v);
    }

    #[test]
    fn datetime_chrono_roundtrip() {
        let t = chrono::DateTime::from_timestamp(1_700_000_000, 123_456_700).unwrap();
        assert_eq!(DateTime::from_chrono(t).to_chrono(), Some(t));
        assert_eq!(DateTime::NULL.to_chrono(), None);
    }

    #[test]
    fn value_kind_names_parse() {
        assert_eq!("Double".parse::<ValueKind>().unwrap(), ValueKind::Float64);
        assert_eq!(
            "String[]".parse::<ValueKind>().unwrap(),
            ValueKind::Array(Box::new(ValueKind::UtfString))
        );
        for k in ValueKind::SCALARS {
            assert_eq!(k.name().parse::<ValueKind>().unwrap(), k);
        }
    }
}
