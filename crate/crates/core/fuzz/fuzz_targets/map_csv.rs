#![no_main]

use libfuzzer_sys::fuzz_target;
use music_imaging::imaging::ImageGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = ImageGrid::from_csv(text) else {
        return;
    };
    let csv = map.to_csv();
    let again = ImageGrid::from_csv(&csv).expect("written map reparses");
    assert_eq!(again.values(), map.values());
    assert_eq!(again.to_csv(), csv);
});
