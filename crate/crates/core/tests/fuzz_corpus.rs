//! Replays the checked-in fuzz seeds through the same properties the fuzz
//! targets assert, so the seeds stay meaningful as the formats evolve.

use std::fs;
use std::path::PathBuf;

use sas_autofocus::learned::{decode_checkpoint, encode_checkpoint};
use sas_autofocus::slc::io::{decode_slc, encode_slc};
use sas_autofocus::synth::DatasetManifest;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn slc1_seeds() {
    for (name, bytes) in seeds("slc1_decode") {
        let decoded = decode_slc(&bytes);
        assert_eq!(decoded.is_ok(), name.starts_with("valid"), "{name}");
        if let Ok(g) = decoded {
            assert_eq!(encode_slc(&g).unwrap(), bytes, "{name}");
        }
    }
}

#[test]
fn daf1_seeds() {
    for (name, bytes) in seeds("daf1_decode") {
        let decoded = decode_checkpoint(&bytes);
        assert_eq!(decoded.is_ok(), name.starts_with("valid"), "{name}");
        if let Ok(p) = decoded {
            assert_eq!(encode_checkpoint(&p), bytes, "{name}");
        }
    }
}

#[test]
fn manifest_seeds() {
    for (name, bytes) in seeds("manifest_parse") {
        let text = String::from_utf8(bytes).unwrap();
        let parsed = DatasetManifest::from_csv_str(&text, "");
        assert_eq!(parsed.is_ok(), !name.starts_with("bad"), "{name}: {parsed:?}");
        if let Ok(m) = parsed {
            assert_eq!(m.to_csv_string().unwrap(), text, "{name}");
        }
    }
}
