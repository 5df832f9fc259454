use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use colanet::data::{encode_idx, write_flat, Dataset, ImageRecord, PIXELS};
use colanet::evaluation::{evaluate, parse_predictions_csv};

fn colanet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colanet")).args(args).env_remove("COLANET_DATA").output().expect("spawn colanet")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A bright horizontal bar whose row depends on the class.
fn record(k: usize) -> ImageRecord {
    let label = (k % 10) as u8;
    let mut px = [0u8; PIXELS];
    let row = 3 + 2 * label as usize;
    for col in 4..24 {
        px[row * 28 + col] = 255;
        px[(row + 1) * 28 + col] = 200 + (k % 50) as u8;
    }
    ImageRecord::new(px, label).unwrap()
}

fn fixture(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let records: Vec<ImageRecord> = (0..n).map(record).collect();
    let ds = Dataset::with_mnist_split(records);
    let (images, labels) = (dir.join("imgs.bin"), dir.join("imgs.target"));
    write_flat(&ds, &images, &labels).unwrap();
    (images, labels)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_eval(dir: &Path, out: &str, train: usize) -> Output {
    let (images, labels) = fixture(dir, 60);
    let out_dir = dir.join(out);
    colanet(&[
        "train-eval",
        "--images",
        s(&images),
        "--labels",
        s(&labels),
        "--train-split",
        "40",
        "--train-count",
        &train.to_string(),
        "--seed",
        "5",
        "--out-dir",
        s(&out_dir),
    ])
}

#[test]
fn convert_one_image_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (images, labels) = encode_idx(&[record(3)]);
    fs::write(tmp.path().join("i.idx"), images).unwrap();
    fs::write(tmp.path().join("l.idx"), labels).unwrap();
    let out = tmp.path().join("flat");
    let o = colanet(&[
        "convert",
        "--images",
        s(&tmp.path().join("i.idx")),
        "--labels",
        s(&tmp.path().join("l.idx")),
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 1 records"));
    assert_eq!(fs::metadata(out.join("MNIST.bin")).unwrap().len(), 784);
    assert_eq!(fs::read_to_string(out.join("MNIST.target")).unwrap(), "3\n");
}

#[test]
fn convert_missing_file_exits_2_naming_the_path() {
    let o = colanet(&["convert", "--images", "/nonexistent/imgs", "--labels", "/nonexistent/lbls"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/imgs"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(colanet(&["train-eval", "--bogus"]).status.code(), Some(2));
    let o = colanet(&["train-eval"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("COLANET_DATA"));
}

#[test]
fn train_eval_writes_artifacts_and_consistent_accuracy() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_eval(tmp.path(), "run", 40);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("run");
    for f in ["predictions.csv", "metrics.txt", "weights.csv", "weights.ppm", "manifest.txt"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let printed: f64 = stdout(&o)
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("accuracy "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    let preds = parse_predictions_csv(&fs::read_to_string(dir.join("predictions.csv")).unwrap()).unwrap();
    assert_eq!(preds.len(), 20);
    let recomputed = evaluate(&preds).unwrap().accuracy;
    assert_eq!(format!("{recomputed:.4}"), format!("{printed:.4}"));

    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed=5\n") && manifest.contains("train_images=40\n"));
    assert!(manifest.contains("learning_until=800\n"), "{manifest}");
    let ppm = fs::read(dir.join("weights.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n280 420\n255\n"));
}

#[test]
fn train_eval_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(train_eval(tmp.path(), "a", 40).status.success());
    assert!(train_eval(tmp.path(), "b", 40).status.success());
    for f in ["predictions.csv", "weights.csv"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn untrained_network_is_at_most_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = train_eval(tmp.path(), "untrained", 0);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds =
        parse_predictions_csv(&fs::read_to_string(tmp.path().join("untrained/predictions.csv")).unwrap()).unwrap();
    assert!(evaluate(&preds).unwrap().accuracy <= 0.2);
}

#[test]
fn export_weights_round_trip_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("section,post_index,pre_index,weight\n");
    for post in 0..150 {
        for pre in 0..PIXELS {
            csv.push_str(&format!("L,{post},{pre},0\n"));
        }
    }
    let weights = tmp.path().join("zero.csv");
    fs::write(&weights, csv).unwrap();
    let ppm = tmp.path().join("zero.ppm");
    let grid_csv = tmp.path().join("grid.csv");
    let o = colanet(&["export-weights", "--weights", s(&weights), "--out", s(&ppm), "--csv", s(&grid_csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(&ppm).unwrap();
    let header = b"P6\n280 420\n255\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 280 * 420 * 3);
    assert!(bytes[header.len()..].iter().all(|&b| b == 0), "zero weights render black");
    assert!(grid_csv.exists());

    let corrupt = tmp.path().join("corrupt.csv");
    fs::write(&corrupt, "section,post_index,pre_index,weight\nL,zero,1,0.5\n").unwrap();
    let o = colanet(&["export-weights", "--weights", s(&corrupt), "--out", s(&ppm)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

fn optimize(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "optimize",
        "--synthetic-fitness",
        "--seed",
        "9",
        "--ga-population",
        "12",
        "--ga-repeats",
        "2",
        "--out-dir",
        s(out),
    ];
    args.extend_from_slice(extra);
    colanet(&args)
}

#[test]
fn optimize_smoke_with_tiny_population() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ga");
    let o = colanet(&[
        "optimize",
        "--synthetic-fitness",
        "--ga-population",
        "2",
        "--ga-stagnation",
        "1",
        "--out-dir",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("best (d="));
    let log = fs::read_to_string(out.join("ga_log.csv")).unwrap();
    assert!(log.starts_with("generation,best_error"));
    let config = fs::read_to_string(out.join("best_config.xml")).unwrap();
    assert!(colanet::config::parse_config(&config).is_ok());
}

#[test]
fn resumed_search_matches_uninterrupted() {
    let tmp = tempfile::tempdir().unwrap();
    let full = tmp.path().join("full");
    let o = optimize(&full, &[]);
    assert!(o.status.success(), "{}", stderr(&o));

    let split = tmp.path().join("split");
    assert!(optimize(&split, &["--ga-max-generations", "2"]).status.success());
    let o = optimize(&split, &["--resume"]);
    assert!(o.status.success(), "{}", stderr(&o));

    for f in ["ga_log.csv", "best_config.xml", "ga.checkpoint"] {
        assert_eq!(fs::read(full.join(f)).unwrap(), fs::read(split.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resume_without_checkpoint_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = optimize(&tmp.path().join("none"), &["--resume"]);
    assert_eq!(o.status.code(), Some(2));
}
