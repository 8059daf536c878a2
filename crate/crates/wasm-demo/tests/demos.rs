use engage_wasm_demo::{decode_demo, pitch_demo, segment_demo};

#[test]
fn pitch_follows_glide() {
    let d = pitch_demo(120.0, 220.0, 0.0, 1).unwrap();
    let errs: Vec<f64> = d
        .f0_hz
        .iter()
        .zip(&d.true_hz)
        .zip(&d.voiced)
        .filter(|(_, v)| **v)
        .map(|((f, t), _)| (f - t).abs())
        .collect();
    assert!(!errs.is_empty());
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!(mean < 5.0, "mean error {mean}");
    assert!(d.voiced_fraction > 0.5 && d.voiced_fraction < 0.95);
}

#[test]
fn segmentation_finds_bursts() {
    let d = segment_demo(4, 0.002, 30.0, 2).unwrap();
    assert_eq!(d.truth.len(), 4);
    assert_eq!(d.found.len(), 4, "{:?} vs {:?}", d.found, d.truth);
}

#[test]
fn decode_lengths_and_json() {
    let d = decode_demo(6, 50, 3).unwrap();
    assert_eq!(d.speaker.len(), 50);
    for p in [&d.gold, &d.hmm, &d.chmm] {
        assert!(p.iter().all(|c| c.len() == 50 && c.iter().all(|s| (1..=5).contains(s))));
    }
    assert!((0.0..=1.0).contains(&d.chmm_accuracy));
    assert!(engage_wasm_demo::decode_demo_js(6, 50, 3).unwrap().contains("chmm_accuracy"));
}
