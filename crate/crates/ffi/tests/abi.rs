use std::ffi::{CStr, CString};
use std::path::Path;

use soundmix::audio_io::{canonical_segment, load_segment, save_wav, RawAudio};
use soundmix::features::{FeatureConfig, FeatureStats};
use soundmix::model::{init_params, save_checkpoint, ModelConfig};
use soundmix::pipeline::{Predictor, Preprocess};
use soundmix::synth::{synth_segment, SynthClass};
use soundmix_ffi::*;

const NAMES: [&str; 3] = ["dog", "horn", "siren"];

fn write_model(dir: &Path) -> CString {
    let cfg = ModelConfig {
        input_channels: 1,
        input_height: 16,
        input_width: 16,
        conv_channels: vec![4],
        kernel_size: 3,
        fc_hidden: 8,
        num_classes: 3,
        weight_init_seed: 5,
    };
    let params = init_params(&cfg).unwrap();
    let pre = Preprocess {
        feature: FeatureConfig::log_mel(),
        input_height: 16,
        input_width: 16,
        stats: FeatureStats { mean: -8.0, std: 6.0 },
        class_names: NAMES.iter().map(|s| s.to_string()).collect(),
        threshold: 0.4,
    };
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &params, &pre.to_extra()).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

struct Handle(*mut SoundmixModel);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { soundmix_model_free(self.0) }
    }
}

fn load(path: &CString) -> Handle {
    let mut h = std::ptr::null_mut();
    assert_eq!(unsafe { soundmix_model_load(path.as_ptr(), &mut h) }, SoundmixStatus::Ok);
    assert!(!h.is_null());
    Handle(h)
}

#[test]
fn model_metadata_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let h = load(&write_model(dir.path()));
    unsafe {
        assert_eq!(soundmix_model_num_classes(h.0), 3);
        assert_eq!(soundmix_model_threshold(h.0), 0.4);
        for (i, want) in NAMES.iter().enumerate() {
            let got = CStr::from_ptr(soundmix_model_class_name(h.0, i));
            assert_eq!(got.to_str().unwrap(), *want);
        }
        assert!(soundmix_model_class_name(h.0, 3).is_null());
    }
}

#[test]
fn predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_model(dir.path());
    let h = load(&ckpt);
    let predictor = Predictor::load(Path::new(ckpt.to_str().unwrap())).unwrap();

    let seg = synth_segment(SynthClass::Chirp, 3, 0, 11);
    let wav = dir.path().join("chirp.wav");
    save_wav(&seg, &wav).unwrap();
    let want = predictor.predict_segment(&load_segment(&wav).unwrap()).unwrap();
    let mut got = [f64::NAN; 3];
    let cwav = CString::new(wav.to_str().unwrap()).unwrap();
    let st = unsafe { soundmix_predict_wav(h.0, cwav.as_ptr(), got.as_mut_ptr(), 3) };
    assert_eq!(st, SoundmixStatus::Ok);
    assert_eq!(got.to_vec(), want);

    // 22.05 kHz, 2 s: resampled and padded like any other input.
    let short: Vec<f64> = seg.samples.iter().step_by(2).take(44_100).copied().collect();
    let want = predictor
        .predict_segment(&canonical_segment(RawAudio::new(short.clone(), 22_050)).unwrap())
        .unwrap();
    let st = unsafe { soundmix_predict_samples(h.0, short.as_ptr(), short.len(), 22_050, got.as_mut_ptr(), 3) };
    assert_eq!(st, SoundmixStatus::Ok);
    assert_eq!(got.to_vec(), want);
    assert!(got.iter().all(|p| *p > 0.0 && *p < 1.0));
}

#[test]
fn small_buffers_and_bad_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let h = load(&write_model(dir.path()));
    let x = vec![0.1; 44_100 * 4];
    let mut two = [0.0; 2];
    let st = unsafe { soundmix_predict_samples(h.0, x.as_ptr(), x.len(), 44_100, two.as_mut_ptr(), 2) };
    assert_eq!(st, SoundmixStatus::BufferTooSmall);
    let msg = unsafe { CStr::from_ptr(soundmix_last_error()) }.to_str().unwrap().to_owned();
    assert!(msg.contains("need 3"), "{msg}");

    let junk = dir.path().join("junk.wav");
    std::fs::write(&junk, b"definitely not a wav file").unwrap();
    let cjunk = CString::new(junk.to_str().unwrap()).unwrap();
    let mut three = [0.0; 3];
    let st = unsafe { soundmix_predict_wav(h.0, cjunk.as_ptr(), three.as_mut_ptr(), 3) };
    assert_eq!(st, SoundmixStatus::BadFormat);

    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"SMCK").unwrap();
    let cbad = CString::new(bad.to_str().unwrap()).unwrap();
    let mut out = std::ptr::null_mut();
    assert_eq!(unsafe { soundmix_model_load(cbad.as_ptr(), &mut out) }, SoundmixStatus::BadFormat);
    assert!(out.is_null());
}

#[test]
fn log_mel_matches_the_extractor() {
    let seg = synth_segment(SynthClass::Tone700, 1, 2, 4);
    let want = FeatureConfig::log_mel().extractor().unwrap().extract(&seg).unwrap().values;
    let (mut r, mut c) = (0, 0);
    let mut buf = vec![0.0; want.as_slice().len()];
    let st = unsafe {
        soundmix_log_mel(seg.samples.as_ptr(), seg.samples.len(), 44_100, buf.as_mut_ptr(), buf.len(), &mut r, &mut c)
    };
    assert_eq!(st, SoundmixStatus::Ok);
    assert_eq!((r, c), (128, 341));
    assert_eq!(buf, want.as_slice());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/soundmix.h")).unwrap();
    for f in [
        "soundmix_last_error",
        "soundmix_model_load",
        "soundmix_model_free",
        "soundmix_model_num_classes",
        "soundmix_model_threshold",
        "soundmix_model_class_name",
        "soundmix_predict_wav",
        "soundmix_predict_samples",
        "soundmix_log_mel",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct SoundmixModel SoundmixModel;"));
    assert!(header.contains("SOUNDMIX_STATUS_BUFFER_TOO_SMALL = 5"));
}

#[test]
fn c_example_compiles_against_header() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(root.join("examples/predict.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "cc rejected examples/predict.c"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
