#![no_main]

use libfuzzer_sys::fuzz_target;
use skiplda::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = Checkpoint::read(data) {
        assert!(c.topics.iter().all(|&t| t < c.topics_k));
        let mut out = Vec::new();
        c.write(&mut out).unwrap();
        assert_eq!(Checkpoint::read(&out[..]).unwrap(), c);
    }
});
