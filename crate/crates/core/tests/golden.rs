//! Differential check against captures produced by an independent stack.

use std::path::PathBuf;

use uascan_core::codec::golden::{parse_hex_fixture, reference_fixtures};

fn capture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.hex"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_hex_fixture(&text).unwrap()
}

#[test]
fn encodings_match_captures() {
    let mut mismatched = Vec::new();
    for (name, fixture) in reference_fixtures() {
        let ours = fixture.encode().unwrap();
        let theirs = capture(name);
        if ours != theirs {
            let at = ours.iter().zip(&theirs).position(|(a, b)| a != b);
            mismatched.push(format!(
                "{name}: first difference at {at:?}, lengths {} vs {}",
                ours.len(),
                theirs.len()
            ));
        }
    }
    assert!(mismatched.is_empty(), "{}", mismatched.join("\n"));
}

#[test]
fn captures_decode_to_fixtures() {
    for (name, fixture) in reference_fixtures() {
        let decoded = fixture.decode_like(&capture(name)).unwrap();
        assert_eq!(decoded, fixture, "{name}");
    }
}

#[test]
fn every_capture_has_a_fixture() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let names: Vec<_> = reference_fixtures().into_iter().map(|(n, _)| n).collect();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_owned();
        assert!(names.contains(&stem.as_str()), "orphan capture {stem}");
    }
}
