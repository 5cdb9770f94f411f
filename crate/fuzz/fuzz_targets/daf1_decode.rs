#![no_main]

use libfuzzer_sys::fuzz_target;
use sas_autofocus::learned::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&params);
        let again = decode_checkpoint(&bytes).expect("re-encoded checkpoint decodes");
        assert_eq!(again, params);
    }
});
