#![no_main]

use libfuzzer_sys::fuzz_target;
use music_imaging::spectral::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_binary(data) {
        let bytes = encode_binary(&m);
        assert_eq!(decode_binary(&bytes).expect("encoded matrix decodes"), m);
    }
});
