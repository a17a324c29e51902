#![no_main]

use libfuzzer_sys::fuzz_target;

use gaitlab::covariate::{momentdb_from_str, momentdb_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Parsing must never panic; anything accepted must round-trip to a
    // stable canonical form.
    if let Ok(db) = momentdb_from_str(text) {
        let canonical = momentdb_to_string(&db);
        let reparsed = momentdb_from_str(&canonical).expect("canonical form must parse");
        assert_eq!(canonical, momentdb_to_string(&reparsed));
    }
});
