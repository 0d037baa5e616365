#![no_main]
use libfuzzer_sys::fuzz_target;
use wflow_core::jump_process::parse_generator_config;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let _ = parse_generator_config(src);
});
