#![no_main]

use libfuzzer_sys::fuzz_target;
use music_imaging::spectral::{decode_csv, encode_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = decode_csv(text) {
            assert_eq!(
                decode_csv(&encode_csv(&m)).expect("encoded matrix decodes"),
                m
            );
        }
    }
});
