#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::corpus::{read_jsonl, write_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(examples) = read_jsonl(text) {
        assert_eq!(read_jsonl(&write_jsonl(&examples)).unwrap(), examples);
    }
});
