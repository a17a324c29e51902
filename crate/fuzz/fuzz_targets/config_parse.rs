#![no_main]

use libfuzzer_sys::fuzz_target;

use gaitlab::config::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = text.parse::<PipelineConfig>() {
        let canonical = cfg.to_canonical_string();
        let reparsed = canonical
            .parse::<PipelineConfig>()
            .expect("canonical form must parse");
        assert_eq!(cfg, reparsed);
        // The compatibility hash is a pure function of the config.
        assert_eq!(cfg.config_hash(), reparsed.config_hash());
    }
});
