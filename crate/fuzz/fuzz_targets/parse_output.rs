#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::format::parse_output;
use markabsa_core::{CategoryInventory, Lexicalization, Task};

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let task = Task::ALL[selector as usize % Task::ALL.len()];
    let (sentence, output) = text.split_once('\n').unwrap_or(("", text));
    let lex = Lexicalization::default();
    let inv = CategoryInventory::semeval_restaurants();
    let parsed = parse_output(output, task, sentence, &lex, &inv);
    for d in &parsed.diagnostics {
        assert!(output.contains(&d.fragment));
    }
});
