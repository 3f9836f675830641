#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::corpus::{ingest_semeval, read_jsonl, write_jsonl, Split};

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = ingest_semeval(data, "en", Split::Train) {
        let again = read_jsonl(&write_jsonl(d.examples())).expect("ingested data serializes");
        assert_eq!(again.as_slice(), d.examples());
    }
});
