#![no_main]

use libfuzzer_sys::fuzz_target;
use qwfc_core::experiment::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = Checkpoint::decode(data) {
        let bytes = c.encode();
        assert_eq!(Checkpoint::decode(&bytes).expect("re-encoded value decodes").encode(), bytes);
    }
});
