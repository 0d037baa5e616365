#![no_main]
use libfuzzer_sys::fuzz_target;
use wflow_core::measures::DiscreteMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(m) = DiscreteMeasure::from_csv(src) {
        let back = DiscreteMeasure::from_csv(&m.to_csv()).expect("round trip");
        assert_eq!(back.support(), m.support());
        assert!((m.cumulative().last().unwrap() - 1.0).abs() < 1e-9);
    }
});
