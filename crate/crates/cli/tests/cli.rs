use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn d3r(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d3r")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn generate(data: &Path, cats: &str) {
    ok(&d3r(&[
        "generate", "--out", data.to_str().unwrap(), "--categories", cats, "--image-side", "32",
        "--n-train", "6", "--n-good", "3", "--n-defect", "3", "--seed", "7",
    ]));
}

fn small<'a>(root: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["--root", root, "--out", out, "--image-side", "32", "--epochs", "1", "--batch-size", "4", "--n-thresholds", "20"]
}

fn count(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .map(|d| d.flatten().filter(|e| e.path().extension().is_some_and(|x| x == ext)).count())
        .unwrap_or(0)
}

#[test]
fn generate_refuses_to_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, "alpha");
    assert_eq!(count(&data.join("alpha/train/good"), "png"), 6);
    assert!(data.join("generate-manifest.json").is_file());
    let again = d3r(&["generate", "--out", data.to_str().unwrap(), "--categories", "alpha", "--image-side", "32"]);
    assert_eq!(again.status.code(), Some(2));
    ok(&d3r(&[
        "generate", "--out", data.to_str().unwrap(), "--categories", "alpha", "--image-side", "32", "--force",
    ]));
}

#[test]
fn train_then_eval_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let runs = tmp.path().join("runs");
    generate(&data, "alpha");
    let (root, out) = (data.to_str().unwrap(), runs.to_str().unwrap());

    let mut args = vec!["train", "--category", "alpha", "--method", "d3r-fft"];
    args.extend(small(root, out));
    args.extend(["--checkpoint-every", "1"]);
    ok(&d3r(&args));
    let dir = runs.join("alpha/d3r-fft");
    for f in ["model.ckpt", "train_log.csv", "train_summary.json", "train-manifest.json", "checkpoints/epoch-001.ckpt"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    // 6 images at batch 4: one full batch and a partial batch of 2.
    let log = fs::read_to_string(dir.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count() - 1, 2);

    let mut args = vec!["eval", "--category", "alpha", "--method", "d3r-fft", "--export-maps", "--panels", "all"];
    args.extend(small(root, out));
    ok(&d3r(&args));
    assert_eq!(count(&dir.join("maps"), "d3rmap"), 6);
    assert_eq!(count(&dir.join("panels"), "png"), 6);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "d3r-fft");
    assert!(report["img_auc"].is_number());
    assert!(dir.join("roc.csv").is_file() && dir.join("pro.csv").is_file());
    assert!(dir.join("eval-manifest.json").is_file());
}

#[test]
fn bench_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let runs = tmp.path().join("runs");
    generate(&data, "alpha,beta");
    let (root, out) = (data.to_str().unwrap(), runs.to_str().unwrap());

    let mut args = vec!["bench", "--categories", "alpha,beta"];
    args.extend(small(root, out));
    ok(&d3r(&args));
    let mut reports = 0;
    for cat in ["alpha", "beta"] {
        for m in ["ae-mse", "d3r-mse", "d3r-fft", "d3r-fft-ssim"] {
            reports += usize::from(runs.join(cat).join(m).join("report.json").is_file());
        }
    }
    assert_eq!(reports, 8);
    let csv = fs::read_to_string(runs.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,img_auc,img_ap,px_auc,px_ap,pro,fps,categories");
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",2")));
    assert!(runs.join("tables/alpha.csv").is_file() && runs.join("summary.md").is_file());

    ok(&d3r(&["report", "--out", out]));
    let svg = fs::read_to_string(runs.join("report/roc_alpha.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
    let first: Vec<_> = ["roc_alpha.svg", "roc_beta.svg", "summary.md", "summary.csv"]
        .iter()
        .map(|f| fs::read(runs.join("report").join(f)).unwrap())
        .collect();
    ok(&d3r(&["report", "--out", out]));
    let second: Vec<_> = ["roc_alpha.svg", "roc_beta.svg", "summary.md", "summary.csv"]
        .iter()
        .map(|f| fs::read(runs.join("report").join(f)).unwrap())
        .collect();
    assert_eq!(first, second);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(d3r(&["--help"]).status.code(), Some(0));
    assert_eq!(d3r(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(d3r(&["train", "--category", "x", "--method", "nope", "--root", out]).status.code(), Some(1));
    assert_eq!(d3r(&["train", "--category", "x", "--method", "ae-mse"]).status.code(), Some(1));
    let missing = tmp.path().join("absent");
    let code = d3r(&["train", "--category", "x", "--method", "ae-mse", "--root", missing.to_str().unwrap(), "--out", out]);
    assert_eq!(code.status.code(), Some(2));
    assert_eq!(d3r(&["report", "--out", out]).status.code(), Some(2));
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(d3r(&["report", "--config", cfg.to_str().unwrap(), "--out", out]).status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, format!("out = {:?}\ncategories = [\"gamma\"]\nimage_side = 32\n", data.to_str().unwrap())).unwrap();
    ok(&d3r(&["generate", "--config", cfg.to_str().unwrap(), "--n-train", "2", "--n-good", "1", "--n-defect", "1"]));
    assert_eq!(count(&data.join("gamma/train/good"), "png"), 2);
}
