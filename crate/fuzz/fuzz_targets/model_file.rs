#![no_main]
use dp_stts::model::SynthModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(m) = SynthModel::from_json_slice(data) else {
        return;
    };
    let bytes = m.to_json_vec();
    let again = SynthModel::from_json_slice(&bytes).expect("re-encoded model decodes");
    assert_eq!(again, m);
    assert_eq!(again.to_json_vec(), bytes);
});
