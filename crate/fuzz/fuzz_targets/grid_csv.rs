#![no_main]
use libfuzzer_sys::fuzz_target;
use wflow_core::measures::GridMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(m) = GridMeasure::from_csv(src) {
        let back = GridMeasure::from_csv(&m.to_csv()).expect("round trip");
        assert_eq!(back.grid(), m.grid());
        let _ = m.quantile(0.5);
    }
});
