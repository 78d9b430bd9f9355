use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use soundmix::audio_io::save_wav;
use soundmix::mixer::{mix_segments, read_metadata};
use soundmix::synth::{synth_segment, SynthClass};

fn soundmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soundmix"))
        .args(args)
        .output()
        .expect("spawn soundmix")
}

fn ok(args: &[&str]) -> String {
    let out = soundmix(args);
    assert!(
        out.status.success(),
        "soundmix {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn unknown_subcommand_exits_one() {
    assert_eq!(soundmix(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(soundmix(&["train"]).status.code(), Some(1));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = soundmix(&["inspect", "--meta", p(&dir.path().join("absent.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn end_to_end_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (pool, mixes, feats, train) =
        (root.join("pool"), root.join("mixes"), root.join("features"), root.join("train"));

    ok(&["synth", "--out", p(&pool), "--per-class", "30", "--seed", "3"]);
    assert!(pool.join("segments.csv").exists());

    ok(&[
        "mix", "--pool", p(&pool), "--mode", "variable", "--min", "1", "--max", "2", "--count", "240",
        "--folds", "4", "--seed", "3", "--out", p(&mixes),
    ]);
    let table = read_metadata(mixes.join("metadata.csv"), Some(6)).unwrap();
    assert_eq!(table.rows.len(), 240);
    let mut per_fold: BTreeMap<u32, usize> = BTreeMap::new();
    for row in &table.rows {
        assert!((1..=2).contains(&row.class_ids.len()));
        assert_eq!(row.component_files.len(), row.class_ids.len());
        assert!(mixes.join(format!("fold{}", row.fold_id)).join(&row.file_name).exists());
        *per_fold.entry(row.fold_id).or_default() += 1;
    }
    assert_eq!(per_fold.keys().copied().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    for k in 1..=4u32 {
        let on_disk = std::fs::read_dir(mixes.join(format!("fold{k}"))).unwrap().count();
        assert_eq!(on_disk, per_fold[&k]);
    }

    ok(&["featurize", "--in", p(&mixes), "--feature", "melspec", "--out", p(&feats)]);
    let inspect = ok(&["inspect", "--meta", p(&feats.join("metadata.csv"))]);
    assert!(inspect.contains("rows        240"), "{inspect}");

    let config = root.join("small.json");
    std::fs::write(
        &config,
        r#"{
  "model": { "input_height": 32, "input_width": 32, "conv_channels": [8, 16], "fc_hidden": 32 },
  "train": { "epochs": 25, "batch_size": 16, "learning_rate": 0.002, "seed": 1 }
}"#,
    )
    .unwrap();
    ok(&[
        "train", "--features", p(&feats), "--meta", p(&feats.join("metadata.csv")), "--config", p(&config),
        "--out", p(&train), "--quiet",
    ]);
    for f in ["model.ckpt", "history.jsonl", "split.json", "report.csv", "report.txt", "run_manifest.json"] {
        assert!(train.join(f).exists(), "{f} missing");
    }
    let history = soundmix::trainer::read_history(&train.join("history.jsonl")).unwrap();
    assert_eq!(history.len(), 25);

    let eval_out = root.join("eval");
    let text = ok(&[
        "eval", "--checkpoint", p(&train.join("model.ckpt")), "--features", p(&feats), "--meta",
        p(&feats.join("metadata.csv")), "--out", p(&eval_out), "--subset", "test",
    ]);
    assert!(text.contains("macro"), "{text}");
    let report = std::fs::read_to_string(eval_out.join("report.csv")).unwrap();
    assert!(report.starts_with("class_id,class_name,tp,fp,fn,tn,precision,recall,f1"));
    assert_eq!(report.lines().count(), 1 + 6 + 1);

    // A fresh two-class mixture built from segments outside the pool.
    let a = synth_segment(SynthClass::Tone300, 0, 500, 99);
    let b = synth_segment(SynthClass::Chirp, 3, 501, 99);
    let mixed = mix_segments(&[a, b], 6).unwrap();
    let wav = root.join("pair.wav");
    save_wav(&mixed.to_segment(), &wav).unwrap();
    let plot = root.join("plot").join("pair.csv");
    let stdout = ok(&["predict", "--checkpoint", p(&train.join("model.ckpt")), "--wav", p(&wav), "--plot-out", p(&plot)]);
    let detected: Vec<&str> = stdout
        .lines()
        .filter(|l| l.ends_with("detected"))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(detected, vec!["tone_300hz", "chirp"], "{stdout}");
    assert!(plot.with_extension("svg").exists());
    let rows = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(rows.lines().count(), 7);
}
