//! Seeded value generators and buffer mutators for round-trip and fuzz runs.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{
    DateTime, ExpandedNodeRef, ExtensionBody, ExtensionPayload, Guid, Identifier, LocalizedText,
    NodeRef, QualifiedName, StatusCode, ValueKind, WireValue,
};

const MAX_LEN: usize = 24;

fn opt<R: Rng, T>(rng: &mut R, f: impl FnOnce(&mut R) -> T) -> Option<T> {
    if rng.gen_ratio(1, 8) {
        None
    } else {
        Some(f(rng))
    }
}

pub fn string<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(0..MAX_LEN);
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.7) {
                rng.gen_range(' '..='~')
            } else {
                rng.gen::<char>()
            }
        })
        .collect()
}

pub fn bytes<R: Rng>(rng: &mut R) -> Vec<u8> {
    let n = rng.gen_range(0..MAX_LEN);
    (0..n).map(|_| rng.gen()).collect()
}

pub fn guid<R: Rng>(rng: &mut R) -> Guid {
    Guid {
        data1: rng.gen(),
        data2: rng.gen(),
        data3: rng.gen(),
        data4: rng.gen(),
    }
}

pub fn node_ref<R: Rng>(rng: &mut R) -> NodeRef {
    let namespace = match rng.gen_range(0..3) {
        0 => 0,
        1 => rng.gen_range(0..=255),
        _ => rng.gen(),
    };
    let identifier = match rng.gen_range(0..4) {
        0 => Identifier::Numeric(match rng.gen_range(0..3) {
            0 => rng.gen_range(0..=255),
            1 => rng.gen_range(0..=65535),
            _ => rng.gen(),
        }),
        1 => Identifier::String(string(rng)),
        2 => Identifier::Guid(guid(rng)),
        _ => Identifier::Opaque(bytes(rng)),
    };
    NodeRef {
        namespace,
        identifier,
    }
}

fn finite_f32<R: Rng>(rng: &mut R) -> f32 {
    match rng.gen_range(0..6) {
        0 => f32::NAN,
        1 => f32::INFINITY,
        2 => -0.0,
        _ => f32::from_bits(rng.gen()),
    }
}

fn finite_f64<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..6) {
        0 => f64::NAN,
        1 => f64::NEG_INFINITY,
        2 => -0.0,
        _ => f64::from_bits(rng.gen()),
    }
}

/// A random scalar of `kind`; arrays get random scalar items.
pub fn value<R: Rng>(rng: &mut R, kind: &ValueKind) -> WireValue {
    match kind {
        ValueKind::Boolean => WireValue::Boolean(rng.gen()),
        ValueKind::SByte => WireValue::SByte(rng.gen()),
        ValueKind::Byte => WireValue::Byte(rng.gen()),
        ValueKind::Int16 => WireValue::Int16(rng.gen()),
        ValueKind::UInt16 => WireValue::UInt16(rng.gen()),
        ValueKind::Int32 => WireValue::Int32(rng.gen()),
        ValueKind::UInt32 => WireValue::UInt32(rng.gen()),
        ValueKind::Int64 => WireValue::Int64(rng.gen()),
        ValueKind::UInt64 => WireValue::UInt64(rng.gen()),
        ValueKind::Float32 => WireValue::Float32(finite_f32(rng)),
        ValueKind::Float64 => WireValue::Float64(finite_f64(rng)),
        ValueKind::UtfString => WireValue::UtfString(opt(rng, string)),
        ValueKind::DateTime => WireValue::DateTime(DateTime(rng.gen())),
        ValueKind::Guid => WireValue::Guid(guid(rng)),
        ValueKind::ByteString => WireValue::ByteString(opt(rng, bytes)),
        ValueKind::XmlElement => WireValue::XmlElement(opt(rng, bytes)),
        ValueKind::NodeRef => WireValue::NodeRef(node_ref(rng)),
        ValueKind::ExpandedNodeRef => WireValue::ExpandedNodeRef(ExpandedNodeRef {
            node: node_ref(rng),
            namespace_uri: opt(rng, string).filter(|_| rng.gen_bool(0.5)),
            server_index: if rng.gen_bool(0.5) { 0 } else { rng.gen() },
        }),
        ValueKind::StatusCode => WireValue::StatusCode(StatusCode(rng.gen())),
        ValueKind::QualifiedName => WireValue::QualifiedName(QualifiedName {
            namespace: rng.gen(),
            name: opt(rng, string),
        }),
        ValueKind::LocalizedText => WireValue::LocalizedText(LocalizedText {
            locale: opt(rng, string),
            text: opt(rng, string),
        }),
        ValueKind::ExtensionBody => WireValue::ExtensionBody(match rng.gen_range(0..3) {
            0 => ExtensionBody {
                type_id: node_ref(rng),
                payload: ExtensionPayload::None,
            },
            1 => ExtensionBody {
                type_id: node_ref(rng),
                payload: ExtensionPayload::Binary(bytes(rng)),
            },
            _ => ExtensionBody {
                type_id: node_ref(rng),
                payload: ExtensionPayload::Xml(bytes(rng)),
            },
        }),
        ValueKind::Array(inner) => {
            let items = opt(rng, |rng| {
                let n = rng.gen_range(0..8);
                (0..n).map(|_| value(rng, inner)).collect()
            });
            WireValue::Array {
                kind: (**inner).clone(),
                items,
            }
        }
    }
}

/// Every scalar kind plus an array of each.
pub fn all_kinds() -> Vec<ValueKind> {
    ValueKind::SCALARS
        .iter()
        .cloned()
        .chain(
            ValueKind::SCALARS
                .iter()
                .map(|k| ValueKind::Array(Box::new(k.clone()))),
        )
        .collect()
}

/// One random structural edit: bit flip, byte overwrite, truncation,
/// insertion, deletion or a length-field smash.
pub fn mutate<R: Rng>(rng: &mut R, buf: &[u8]) -> Vec<u8> {
    let mut out = buf.to_vec();
    if out.is_empty() {
        out.push(rng.gen());
        return out;
    }
    let at = rng.gen_range(0..out.len());
    match rng.gen_range(0..6) {
        0 => out[at] ^= 1 << rng.gen_range(0..8),
        1 => out[at] = rng.gen(),
        2 => out.truncate(at),
        3 => out.insert(at, rng.gen()),
        4 => {
            out.remove(at);
        }
        _ => {
            let smash: [u8; 4] = *[
                [0xFF; 4],
                [0xFF, 0xFF, 0xFF, 0x7F],
                [0, 0, 0, 0x80],
                rng.gen(),
            ]
            .choose(rng)
            .expect("non-empty");
            for (i, b) in smash.iter().enumerate() {
                if let Some(slot) = out.get_mut(at + i) {
                    *slot = *b;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_value, encode_value};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn every_kind_round_trips() {
        let mut rng = StdRng::seed_from_u64(7);
        for kind in all_kinds() {
            for _ in 0..200 {
                let v = value(&mut rng, &kind);
                let enc = encode_value(&v).unwrap();
                let (back, used) = decode_value(&enc, &kind).unwrap();
                assert_eq!(used, enc.len());
                assert_eq!(back, v, "{kind:?}");
            }
        }
    }

    #[test]
    fn mutate_changes_something() {
        let mut rng = StdRng::seed_from_u64(1);
        let base = vec![1, 2, 3, 4, 5, 6, 7, 8];
        let changed = (0..100).filter(|_| mutate(&mut rng, &base) != base).count();
        assert!(changed > 80);
    }
}
