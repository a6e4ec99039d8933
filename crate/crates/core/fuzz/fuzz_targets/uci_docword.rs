#![no_main]

use libfuzzer_sys::fuzz_target;
use skiplda::corpus::uci::{parse_docword, Limits};

// Small limits keep header-declared sizes from turning into huge allocations.
const LIMITS: Limits = Limits {
    max_docs: 1 << 12,
    max_words: 1 << 12,
    max_tokens: 1 << 16,
};

fuzz_target!(|data: &[u8]| {
    if let Ok(dw) = parse_docword(data, LIMITS) {
        assert_eq!(dw.docs.len(), dw.words.len());
        assert!(dw.docs.iter().all(|&d| (d as usize) < dw.num_docs));
    }
});
