#![no_main]

use libfuzzer_sys::fuzz_target;
use sas_autofocus::slc::io::{decode_slc, encode_slc};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = decode_slc(data) {
        // Anything accepted must survive a round trip unchanged.
        let bytes = encode_slc(&g).expect("decoded image re-encodes");
        let again = decode_slc(&bytes).expect("re-encoded image decodes");
        assert_eq!(encode_slc(&again).unwrap(), bytes);
    }
});
