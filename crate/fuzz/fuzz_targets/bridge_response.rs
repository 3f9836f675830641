#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::bridge::{best_of_topk, parse_response, StepReply};

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(resp) = parse_response(line) {
        if let Some(payload) = resp.payload {
            if let Ok(StepReply::TopK { topk }) = serde_json::from_value::<StepReply>(payload) {
                let best = best_of_topk(&topk);
                assert_eq!(best.is_some(), !topk.is_empty());
            }
        }
    }
});
