#![no_main]

use libfuzzer_sys::fuzz_target;
use sas_autofocus::synth::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(manifest) = DatasetManifest::from_csv_str(text, "") {
        // Writing normalizes path separators, so compare after one pass.
        let written = manifest.to_csv_string().expect("parsed manifest serializes");
        let again = DatasetManifest::from_csv_str(&written, "").expect("written manifest parses");
        assert_eq!(again.to_csv_string().unwrap(), written);
        assert_eq!(again.records.len(), manifest.records.len());
    }
});
