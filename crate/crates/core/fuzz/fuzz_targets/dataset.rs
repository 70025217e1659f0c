#![no_main]

use libfuzzer_sys::fuzz_target;
use qwfc_core::experiment::DatasetContainer;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = DatasetContainer::decode(data) {
        let bytes = c.encode();
        assert_eq!(DatasetContainer::decode(&bytes).expect("re-encoded value decodes").encode(), bytes);
        let _ = c.config();
    }
});
