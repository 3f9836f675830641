#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::decode::{decode, DecodeConfig, StopReason};
use markabsa_core::format::parse_output;
use markabsa_core::scorers::{NoiseScorer, WordTokenizer};
use markabsa_core::token::Tokenizer;
use markabsa_core::{CategoryInventory, Example, Lexicalization, Task};

fuzz_target!(|data: &[u8]| {
    if data.len() < 9 {
        return;
    }
    let seed = u64::from_le_bytes(data[..8].try_into().unwrap());
    let task = Task::ALL[data[8] as usize % Task::ALL.len()];
    let Ok(sentence) = std::str::from_utf8(&data[9..]) else {
        return;
    };
    if sentence.trim().is_empty() {
        return;
    }
    let lex = Lexicalization::default();
    let inv = CategoryInventory::semeval_restaurants();
    let Ok(example) = Example::new("fuzz", "xx", sentence, Vec::new()) else {
        return;
    };
    let tok = WordTokenizer::for_corpus([&example], &inv, &lex);
    let mut scorer = NoiseScorer::new(seed, tok.vocab_size());
    let cfg = DecodeConfig {
        constrained: true,
        max_len: 256,
    };
    let Ok(out) = decode(&mut scorer, &tok, sentence, task, &inv, &lex, cfg) else {
        return;
    };
    if out.stop == StopReason::EndToken {
        let parsed = parse_output(&out.text, task, sentence, &lex, &inv);
        assert!(parsed.is_clean(), "{:?} from {:?}", parsed.diagnostics, out.text);
    }
});
