use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn glai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glai")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = glai(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

struct Fixture {
    _dir: tempfile::TempDir,
    dir: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().to_path_buf();
        let f = Fixture { _dir: dir, dir: path };
        ok(&["gen-data", "--classes", "3", "--dims", "4", "--per-class", "40", "--seed", "7",
             "--out-train", &f.path("train.csv"), "--out-val", &f.path("val.csv")]);
        ok(&["train-initial", "--spec", "4,6,3", "--train", &f.path("train.csv"), "--val", &f.path("val.csv"),
             "--epochs", "10", "--seed", "1", "--selector-out", &f.path("sel.glai"),
             "--estimator-out", &f.path("est.glai"), "--metrics", &f.path("m.csv")]);
        f
    }

    fn path(&self, name: &str) -> String {
        p(&self.dir, name)
    }

    fn read(&self, name: &str) -> Vec<u8> {
        fs::read(self.dir.join(name)).unwrap()
    }
}

#[test]
fn metrics_header_and_default_epochs() {
    let f = Fixture::new();
    let m = String::from_utf8(f.read("m.csv")).unwrap();
    let mut lines = m.lines();
    assert_eq!(lines.next(), Some("epoch,split,loss,accuracy,pattern_diff"));
    assert_eq!(m.lines().filter(|l| l.contains(",train,")).count(), 10);
    assert_eq!(f.read("sel.glai"), f.read("est.glai"));

    ok(&["retrain-poc", "--estimator", &f.path("est.glai"), "--selector", &f.path("sel.glai"),
         "--train", &f.path("train.csv"), "--out", &f.path("r.glai"), "--metrics", &f.path("r.csv")]);
    let r = String::from_utf8(f.read("r.csv")).unwrap();
    assert_eq!(r.lines().filter(|l| l.contains(",train,")).count(), 50);
}

#[test]
fn zero_epoch_retrain_is_byte_identical() {
    let f = Fixture::new();
    ok(&["retrain-poc", "--estimator", &f.path("est.glai"), "--selector", &f.path("sel.glai"),
         "--train", &f.path("train.csv"), "--epochs", "0", "--out", &f.path("r0.glai")]);
    assert_eq!(f.read("r0.glai"), f.read("est.glai"));
}

#[test]
fn reruns_reproduce_outputs() {
    let f = Fixture::new();
    let run = |tag: &str| {
        ok(&["retrain-poc", "--estimator", &f.path("est.glai"), "--selector", &f.path("sel.glai"),
             "--train", &f.path("train.csv"), "--val", &f.path("val.csv"), "--epochs", "3", "--baseline",
             "--out", &f.path(&format!("q{tag}.glai")), "--baseline-out", &f.path(&format!("b{tag}.glai")),
             "--metrics", &f.path(&format!("q{tag}.csv"))]);
    };
    run("1");
    run("2");
    for name in ["q{}.glai", "b{}.glai", "q{}.csv"] {
        assert_eq!(f.read(&name.replace("{}", "1")), f.read(&name.replace("{}", "2")), "{name}");
    }
    let csv = String::from_utf8(f.read("q1.csv")).unwrap();
    assert!(csv.contains(",baseline_val,"));
}

#[test]
fn estimator_pipeline() {
    let f = Fixture::new();
    let out = ok(&["build-estimator", "--model", &f.path("sel.glai"), "--out", &f.path("pe.glai")]);
    assert!(out.contains("93 paths (72 full, 21 bias)"), "{out}");
    ok(&["capture-patterns", "--model", &f.path("sel.glai"), "--data", &f.path("train.csv"), "--out", &f.path("ps.glai")]);

    // the estimator built from the selector reproduces the network exactly
    let net_eval = ok(&["eval", "--model", &f.path("sel.glai"), "--data", &f.path("train.csv")]);
    let est_eval = ok(&["eval", "--model", &f.path("pe.glai"), "--patterns", &f.path("ps.glai"), "--data", &f.path("train.csv")]);
    let acc = |s: &str| s.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    assert_eq!(acc(&net_eval), acc(&est_eval));

    ok(&["train-estimator", "--estimator", &f.path("pe.glai"), "--selector", &f.path("sel.glai"),
         "--train", &f.path("train.csv"), "--method", "direct", "--ridge", "1e-6", "--out", &f.path("d.glai")]);
    ok(&["train-estimator", "--estimator", &f.path("pe.glai"), "--patterns", &f.path("ps.glai"), "--selector", &f.path("sel.glai"),
         "--train", &f.path("train.csv"), "--method", "sgd", "--loss", "mse", "--epochs", "2", "--out", &f.path("s.glai")]);
    ok(&["merge", "--a", &f.path("d.glai"), "--b", &f.path("d.glai"), "--merge-alpha", "0.3", "--out", &f.path("dd.glai")]);
    assert!(f.read("dd.glai") == f.read("d.glai"));
    ok(&["merge", "--a", &f.path("d.glai"), "--b", &f.path("s.glai"), "--merge-alpha", "1", "--out", &f.path("m1.glai")]);
    assert!(f.read("m1.glai") == f.read("d.glai"));

    let fed = ok(&["federated-sim", "--estimator", &f.path("pe.glai"), "--selector", &f.path("sel.glai"),
                   "--train", &f.path("train.csv"), "--val", &f.path("val.csv"), "--nodes", "3",
                   "--method", "direct", "--ridge", "1e-4", "--out", &f.path("fed.glai")]);
    assert!(fed.contains("3 nodes"));
}

#[test]
fn config_file_and_flag_override() {
    let f = Fixture::new();
    let cfg = f.path("run.cfg");
    fs::write(&cfg, format!(
        "# trace settings\nspec = 4,5,3\nseed = 2\nepochs = 4\ntrain = {}\nval = {}\nmetrics = {}\n",
        f.path("train.csv"), f.path("val.csv"), f.path("t.csv")
    )).unwrap();
    ok(&["pattern-trace", "--config", &cfg]);
    let t = String::from_utf8(f.read("t.csv")).unwrap();
    assert_eq!(t.lines().filter(|l| l.contains(",val,")).count(), 4);
    ok(&["pattern-trace", "--config", &cfg, "--epochs", "2"]);
    let t = String::from_utf8(f.read("t.csv")).unwrap();
    assert_eq!(t.lines().filter(|l| l.contains(",val,")).count(), 2);
    assert!(t.lines().filter(|l| l.contains(",val,")).all(|l| !l.ends_with(',')));

    fs::write(&cfg, "spec = 4,5,3\nlearning_rate = 0.1\n").unwrap();
    let out = glai(&["pattern-trace", "--config", &cfg]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
}

#[test]
fn failures_exit_nonzero_without_writing() {
    let f = Fixture::new();
    fs::write(f.dir.join("bad.csv"), "a,b,label\n1,2,0\n3,x,1\n").unwrap();
    let out = glai(&["train-initial", "--spec", "2,3,2", "--train", &f.path("bad.csv"),
                     "--selector-out", &f.path("never.glai")]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!f.dir.join("never.glai").exists());

    let out = glai(&["build-estimator", "--model", &f.path("sel.glai"), "--max-paths", "92", "--out", &f.path("never.glai")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("93"));
    assert!(!f.dir.join("never.glai").exists());

    let out = glai(&["eval", "--model", &f.path("missing.glai"), "--data", &f.path("val.csv")]);
    assert!(!out.status.success());

    let out = Command::new(env!("CARGO_BIN_EXE_glai"))
        .env("GLAI_THREADS", "zero")
        .args(["eval", "--model", &f.path("sel.glai"), "--data", &f.path("val.csv")])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_glai"))
        .env("GLAI_THREADS", "2")
        .args(["eval", "--model", &f.path("sel.glai"), "--data", &f.path("val.csv")])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn idx_datasets_load() {
    let f = Fixture::new();
    let mut images = vec![0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0, 2];
    images.extend([0u8, 255, 128, 64, 10, 20, 30, 40, 250, 0, 0, 1]);
    let labels = vec![0u8, 0, 8, 1, 0, 0, 0, 3, 0, 1, 2];
    fs::write(f.dir.join("img.idx"), images).unwrap();
    fs::write(f.dir.join("lbl.idx"), labels).unwrap();
    let net = f.path("idxnet.glai");
    let src = format!("idx:{},{}", f.path("img.idx"), f.path("lbl.idx"));
    ok(&["train-initial", "--spec", "4,3,3", "--train", &src, "--epochs", "2", "--selector-out", &net]);
    let out = ok(&["eval", "--model", &net, "--data", &src]);
    assert!(out.contains("network,3,"));
}

#[test]
fn retrain_sweep_writes_paired_rows() {
    let f = Fixture::new();
    ok(&["retrain-sweep", "--selector", &f.path("sel.glai"), "--train", &f.path("train.csv"), "--val", &f.path("val.csv"),
         "--initial", "40", "--increment", "20", "--max-extra", "40", "--epochs", "2", "--metrics", &f.path("sw.csv")]);
    let s = String::from_utf8(f.read("sw.csv")).unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "samples,added,method,loss,accuracy");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("60,20,quantitative,"));
    assert!(lines[4].starts_with("80,40,traditional,"));
}
