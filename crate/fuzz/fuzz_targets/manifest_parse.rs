#![no_main]

use libfuzzer_sys::fuzz_target;

use gaitlab::dataset::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = Manifest::from_json_str(text) {
        let json = manifest.to_json_string();
        let reparsed = Manifest::from_json_str(&json).expect("canonical form must parse");
        assert_eq!(manifest, reparsed);
    }
});
