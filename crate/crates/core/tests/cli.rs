use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ifsgraph");

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ifsgraph-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn build_writes_exports() {
    let dir = scratch("build");
    let o = run(&["build", "--preset", "interval3", "--depth", "3", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let names: Vec<String> = files(&dir).into_iter().map(|f| f.0).collect();
    for want in ["degrees.json", "edges.csv", "graph_E.dot", "intersect_cache.csv", "summary.json", "vertices.csv"] {
        assert!(names.iter().any(|n| n == want), "missing {want} in {names:?}");
    }
    let edges = fs::read_to_string(dir.join("edges.csv")).unwrap();
    assert!(edges.lines().next().unwrap().contains("kind"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("summary.json"));
}

#[test]
fn config_file_runs() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        "[ifs]\ndimension = 1\nlabel_base = 0\n\n[[ifs.map]]\nratio = \"1/2\"\ntranslation = [\"0\"]\n\n\
         [[ifs.map]]\nratio = \"1/2\"\ntranslation = [\"1/2\"]\n\n[[ifs.map]]\nratio = \"1/2\"\ntranslation = [\"1\"]\n\n\
         [run]\ndepth = 2\nview = \"Ed\"\n",
    )
    .unwrap();
    let out = dir.join("out");
    let o = run(&["build", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("graph_Ed.dot").exists());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = scratch("cfgerr");
    let d = dir.to_str().unwrap();
    for args in [
        vec!["build", "--preset", "no-such-system", "--out", d],
        vec!["build", "--preset", "interval3", "--view", "X", "--out", d],
        vec!["build", "--preset", "interval3", "--mode", "lenient", "--out", d],
        vec!["build", "--preset", "interval3", "--caps", "bogus=3", "--out", d],
        vec!["build", "--out", d],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn undecided_pairs_abort_in_strict_mode() {
    let dir = scratch("unknown");
    let caps = "refine_depth=0,witness_word_len=0,witness_period_len=0";
    let d = dir.to_str().unwrap();
    let o = run(&["build", "--preset", "interval3", "--depth", "2", "--caps", caps, "--mode", "strict", "--out", d]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("undecided"));
    let o = run(&["build", "--preset", "interval3", "--depth", "2", "--caps", caps, "--mode", "optimistic", "--out", d]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn metric_cap_exits_4() {
    let dir = scratch("cap");
    let d = dir.to_str().unwrap();
    let o = run(&["analyze", "--preset", "gasket3", "--depth", "3", "--caps", "metric_vertices=10", "--out", d]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("metric cap"));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = scratch("io");
    let blocker = dir.join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(&["build", "--preset", "interval3", "--depth", "1", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        let o = run(&["report", "--preset", "interval3", "--depth", "3", "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.iter().any(|f| f.0 == "report.json"));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }
}

#[test]
fn gaps_reports_designated_pairs() {
    let dir = scratch("gaps");
    let o = run(&["gaps", "--preset", "example2-1d(4)", "--depth", "4", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("condition_h.json")).unwrap()).unwrap();
    let lows: Vec<&str> = v["designated"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["normalized_lower"].as_str().unwrap())
        .collect();
    assert_eq!(lows, ["2269/19683", "82/2187", "1/81"]);
    assert_eq!(v["trend"], "Decaying");
    assert!(dir.join("gaps_plot.csv").exists());
}
