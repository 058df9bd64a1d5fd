mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cudaug::augment::{AugmentManifest, MANIFEST_NAME};
use cudaug::codec::decode_png;
use tempfile::tempdir;

fn cudaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cudaug")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn profile_exp_ends_with_tail_class() {
    let o = cudaug(&["profile", "exp", "--classes", "100", "--n-max", "500", "--imbalance", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("class_id,count\n0,500\n"));
    assert!(text.ends_with("99,5\n"));
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn profile_balanced_and_round_trip() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = cudaug(&["profile", "exp", "--classes", "10", "--n-max", "40", "--imbalance", "1", "--out", p(&out)]);
    assert!(o.status.success());
    let profile = cudaug::formats::load_profile(&out).unwrap();
    assert!(profile.counts().iter().all(|&c| c == 40));

    let o = cudaug(&["profile", "pareto", "--classes", "1000", "--n-max", "1280", "--n-min", "5", "--out", p(&out)]);
    assert!(o.status.success());
    let profile = cudaug::formats::load_profile(&out).unwrap();
    assert_eq!((profile.n_max(), profile.n_min(), profile.num_classes()), (1280, 5, 1000));
}

#[test]
fn exit_codes() {
    assert_eq!(cudaug(&[]).status.code(), Some(1));
    assert_eq!(cudaug(&["profile", "exp", "--classes", "x"]).status.code(), Some(1));
    assert_eq!(cudaug(&["--help"]).status.code(), Some(0));
    // parameters that make an empty class
    let o = cudaug(&["profile", "exp", "--classes", "10", "--n-max", "5", "--imbalance", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cudaug(&["augment", "--input", "/nonexistent", "--output", "/tmp/x", "--strength", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cudaug(&["augment", "--input", "/tmp", "--output", "/tmp/x", "--strength", "31"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn augment_zero_strength_copies_bytes() {
    let dir = tempdir().unwrap();
    let (input, output) = (dir.path().join("in"), dir.path().join("out"));
    common::write_corpus(&input, 12, 16, 16);
    let o = cudaug(&["augment", "--input", p(&input), "--output", p(&output), "--strength", "0", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (name, bytes) in common::read_tree(&input) {
        assert_eq!(fs::read(output.join(&name)).unwrap(), bytes, "{name}");
    }
}

#[test]
fn augment_thread_count_does_not_matter_and_manifest_replays() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in");
    common::write_corpus(&input, 40, 20, 16);
    let run = |threads: &str, out: &str| {
        let out = dir.path().join(out);
        let o = cudaug(&["augment", "--input", p(&input), "--output", p(&out), "--strength", "4", "--seed", "11", "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("1", "a");
    let b = run("8", "b");
    assert_eq!(common::read_tree(&a), common::read_tree(&b));

    let manifest: AugmentManifest = serde_json::from_slice(&fs::read(a.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert_eq!(manifest.files.len(), 40);
    for entry in &manifest.files {
        let src = decode_png(&fs::read(input.join(&entry.file)).unwrap()).unwrap();
        let want = decode_png(&fs::read(a.join(&entry.file)).unwrap()).unwrap();
        assert_eq!(cudaug::augment::replay(&src, entry).unwrap(), want, "{}", entry.file);
        assert_eq!(entry.sequence.split(',').count(), 2 + 4);
    }
}

#[test]
fn augment_per_class_levels() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in");
    let files = common::write_corpus(&input, 6, 12, 12);
    let labels = dir.path().join("labels.csv");
    let mut text = String::from("sample,class_id\n");
    for (i, f) in files.iter().enumerate() {
        text += &format!("{},{}\n", f.file_name().unwrap().to_str().unwrap(), i % 2);
    }
    fs::write(&labels, text).unwrap();
    let lol = dir.path().join("lol.csv");
    fs::write(&lol, "epoch,class_id,level\n1,0,1\n1,1,0\n2,0,2\n2,1,0\n").unwrap();
    let out = dir.path().join("out");
    let o = cudaug(&["augment", "--input", p(&input), "--output", p(&out), "--lol", p(&lol), "--labels", p(&labels)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: AugmentManifest = serde_json::from_slice(&fs::read(out.join(MANIFEST_NAME)).unwrap()).unwrap();
    for e in &manifest.files {
        assert_eq!(e.strength, if e.class_id == Some(0) { 2 } else { 0 });
        if e.strength == 0 {
            assert_eq!(fs::read(out.join(&e.file)).unwrap(), fs::read(input.join(&e.file)).unwrap());
        }
    }
}

#[test]
fn augment_reports_bad_files_and_continues() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in");
    common::write_corpus(&input, 3, 8, 8);
    fs::write(input.join("broken.png"), b"definitely not a png").unwrap();
    let out = dir.path().join("out");
    let o = cudaug(&["augment", "--input", p(&input), "--output", p(&out), "--strength", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.png"), "{err}");
    assert!(out.join("img_0002.png").exists());
}

#[test]
fn subsample_writes_exact_counts() {
    let dir = tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    let mut text = String::from("sample,class_id\n");
    for i in 0..90 {
        text += &format!("s{i},{}\n", i % 3);
    }
    fs::write(&labels, text).unwrap();
    let profile = dir.path().join("profile.csv");
    fs::write(&profile, "class_id,count\n0,30\n1,12\n2,2\n").unwrap();
    let o = cudaug(&["subsample", "--labels", p(&labels), "--profile", p(&profile), "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let kept: Vec<usize> = stdout(&o).lines().map(|l| l[1..].parse().unwrap()).collect();
    assert_eq!(kept.len(), 44);
    let per = |c| kept.iter().filter(|&&i| i % 3 == c).count();
    assert_eq!((per(0), per(1), per(2)), (30, 12, 2));
    let again = cudaug(&["subsample", "--labels", p(&labels), "--profile", p(&profile), "--seed", "5"]);
    assert_eq!(stdout(&again), stdout(&o));
}

#[test]
fn simulate_writes_history_manifest_and_plot() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[curriculum]\nepochs = 12\nseed = 1\n\n[profile]\nkind = \"exp\"\nclasses = 20\nn_max = 200\nimbalance = 10.0\n").unwrap();
    let (history, manifest, plot) = (dir.path().join("h.csv"), dir.path().join("m.json"), dir.path().join("p.png"));
    let o = cudaug(&["simulate", "--config", p(&cfg), "--history", p(&history), "--manifest", p(&manifest), "--plot", p(&plot)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = cudaug::formats::load_history(&history).unwrap();
    assert_eq!((table.history().len(), table.num_classes()), (12, 20));
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["epochs"].as_array().unwrap().len(), 12);
    assert_eq!(m["config"]["seed"], 1);
    assert!(decode_png(&fs::read(&plot).unwrap()).is_ok());
}

#[test]
fn simulate_config_errors_name_the_line() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[curriculum]\nepochs = 12\np_aug = \"half\"\n").unwrap();
    let o = cudaug(&["simulate", "--config", p(&cfg), "--history", p(&dir.path().join("h.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:3:"), "{err}");
}

#[test]
fn analyze_commands() {
    let dir = tempdir().unwrap();
    let w = dir.path().join("w.csv");
    fs::write(&w, "1,0\n-2,1\n").unwrap();
    let o = cudaug(&["analyze", "weights", "--weights", p(&w)]);
    assert_eq!(stdout(&o), "metric,value\nweight_norm_variance,1\n");

    let f = dir.path().join("f.csv");
    fs::write(&f, "1,0,0\n2,0,0\n1,0,1\n0,1,1\n5,5,2\n").unwrap();
    let o = cudaug(&["analyze", "alignment", "--features", p(&f)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "class_id,samples,alignment\n0,2,1\n1,2,0\n");
    let o = cudaug(&["analyze", "alignment", "--features", p(&f), "--base", p(&f)]);
    assert_eq!(stdout(&o), "class_id,gain\n0,0\n1,0\n");

    let preds = dir.path().join("pred.csv");
    fs::write(&preds, "prediction,label\n0,0\n1,0\n1,1\n2,2\n").unwrap();
    let prof = dir.path().join("prof.csv");
    fs::write(&prof, "class_id,count\n0,300\n1,50\n2,10\n").unwrap();
    let o = cudaug(&["analyze", "accuracy", "--predictions", p(&preds), "--profile", p(&prof)]);
    assert_eq!(stdout(&o), "metric,value\nall,0.75\nmany,0.5\nmed,1\nfew,1\n");
}
