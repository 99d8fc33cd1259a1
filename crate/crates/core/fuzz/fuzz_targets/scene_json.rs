#![no_main]

use libfuzzer_sys::fuzz_target;
use music_imaging::scene::Scene;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(scene) = Scene::from_json(text) {
            let again = Scene::from_json(&scene.to_json()).expect("serialized scene reparses");
            assert_eq!(scene, again);
        }
    }
});
