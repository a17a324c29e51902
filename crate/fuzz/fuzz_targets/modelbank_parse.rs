#![no_main]

use libfuzzer_sys::fuzz_target;

use gaitlab::classifier::{modelbank_from_str, modelbank_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bank) = modelbank_from_str(text) {
        // A parsed bank re-serializes (labels were validated on the way
        // in) and the canonical form is a fixed point.
        let canonical = modelbank_to_string(&bank).expect("parsed banks serialize");
        let reparsed = modelbank_from_str(&canonical).expect("canonical form must parse");
        assert_eq!(canonical, modelbank_to_string(&reparsed).unwrap());
    }
});
