use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vrptight_core::generator::{gen_dataset, CapacityMode, GenSpec};
use vrptight_core::io::parse_dataset;
use vrptight_core::ProblemKind;
use vrptight_lab::results::read_rows;

fn vrptight(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrptight")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = vrptight(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    vrptight(dir, args).status.code().unwrap()
}

#[test]
fn gen_writes_the_library_dataset() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--kind", "ovrp", "--n", "12", "--count", "5", "--capacity-range", "10,500", "--seed", "9", "--out", "d.txt"]);
    let got = parse_dataset(&fs::read_to_string(dir.path().join("d.txt")).unwrap()).unwrap();
    let want = gen_dataset(&GenSpec::new(ProblemKind::Ovrp, 12, CapacityMode::Range(10, 500), 9, 5)).unwrap();
    assert_eq!(got, want);
}

#[test]
fn batch_assignment_shares_capacity_within_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--n", "5", "--count", "12", "--capacity-range", "10,500", "--assignment", "batch", "--batch-size", "4", "--out", "d.txt"];
    ok(dir.path(), &args);
    let insts = parse_dataset(&fs::read_to_string(dir.path().join("d.txt")).unwrap()).unwrap();
    let caps: Vec<u32> = insts.iter().map(|i| i.capacity).collect();
    for chunk in caps.chunks(4) {
        assert!(chunk.iter().all(|&c| c == chunk[0]), "{caps:?}");
    }
}

#[test]
fn oracle_against_itself_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "10", "--count", "6", "--capacity", "20", "--out", "d.txt"]);
    ok(d, &["solve", "--data", "d.txt", "--method", "oracle", "--out", "s.txt"]);
    ok(d, &["eval", "--data", "d.txt", "--solutions", "s.txt", "--out", "r.csv"]);
    let rows = read_rows(&d.join("r.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].bucket.as_str(), rows[0].instances), ("C20", 6));
    assert_eq!(rows[0].mean_gap_pct, 0.0);
}

#[test]
fn transforms_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--n", "10", "--count", "4", "--capacity", "15", "--out", "d.txt"]);
    ok(d, &["solve", "--data", "d.txt", "--method", "cw", "--out", "cw.txt"]);
    ok(d, &["transform", "--data", "d.txt", "--solutions", "cw.txt", "--transform", "cvrp-to-tsp", "--out", "tsp.txt"]);
    ok(d, &["transform", "--data", "d.txt", "--solutions", "tsp.txt", "--transform", "tsp-to-cvrp", "--out", "back.txt"]);
    ok(d, &["transform", "--data", "d.txt", "--solutions", "back.txt", "--transform", "cvrp-to-ovrp", "--out", "open.txt"]);
    assert_eq!(code(d, &["transform", "--data", "d.txt", "--solutions", "cw.txt", "--transform", "tsp-to-ovrp", "--out", "x"]), 2);
}

#[test]
fn gapstats_averages_buckets_and_reports_expansion() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let csv = "dataset,bucket,method,mean_cost,mean_gap_pct,instances,wall_ms\n\
               a,C10,m,1,6,2,0\na,C50,m,1,2,2,0\na,C500,m,1,4,2,0\n";
    fs::write(d.join("r.csv"), csv).unwrap();
    let out = ok(d, &["gapstats", "--results", "r.csv", "--in-domain", "C50"]);
    assert_eq!(out, "method,C10,C50,C500,avg,expansion\nm,6.0000,2.0000,4.0000,4.0000,2.5000\n");
}

#[test]
fn exit_codes_classify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["gen", "--n", "5", "--out", "x", "--bogus"]), 2);
    assert_eq!(code(d, &["gen", "--n", "5", "--capacity-range", "50,10", "--out", "x"]), 2);
    fs::write(d.join("bad.txt"), "not a dataset\n").unwrap();
    assert_eq!(code(d, &["solve", "--data", "bad.txt", "--out", "x"]), 3);
    ok(d, &["gen", "--n", "6", "--count", "2", "--capacity", "10", "--out", "d.txt"]);
    // a TSP ring is not a CVRP solution
    ok(d, &["solve", "--data", "d.txt", "--out", "s.txt"]);
    ok(d, &["transform", "--data", "d.txt", "--solutions", "s.txt", "--transform", "cvrp-to-tsp", "--out", "ring.txt"]);
    assert_eq!(code(d, &["eval", "--data", "d.txt", "--solutions", "ring.txt", "--out", "r.csv"]), 4);
    assert_eq!(code(d, &["solve", "--data", "d.txt", "--method", "model", "--out", "x"]), 2);
    assert_eq!(code(d, &["solve", "--data", "missing.txt", "--out", "x"]), 1);
}

#[test]
fn training_resumes_where_it_stopped() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = ["train", "--n", "6", "--train-size", "16", "--batch-size", "8", "--eval-per-bucket", "2", "--seed", "1"];
    let full: Vec<&str> = base.iter().copied().chain(["--epochs", "2", "--out", "full"]).collect();
    ok(d, &full);
    let half: Vec<&str> = base.iter().copied().chain(["--epochs", "2", "--out", "half"]).collect();
    ok(d, &half);
    // restart the second run from its first epoch
    fs::copy(d.join("half/epoch0.ckpt"), d.join("e0.ckpt")).unwrap();
    let log = fs::read_to_string(d.join("half/metrics.csv")).unwrap();
    let cut: Vec<&str> = log.lines().filter(|l| !l.starts_with("1,")).collect();
    fs::write(d.join("half/metrics.csv"), cut.join("\n") + "\n").unwrap();
    ok(d, &["train", "--resume", "e0.ckpt", "--out", "half"]);
    for f in ["metrics.csv", "last.ckpt"] {
        assert_eq!(fs::read(d.join("full").join(f)).unwrap(), fs::read(d.join("half").join(f)).unwrap(), "{f}");
    }
    let model = ok(d, &["eval", "--n", "6", "--count", "2", "--method", "model", "--checkpoint", "full/last.ckpt", "--starts", "3", "--out", "r.csv"]);
    assert_eq!(model.lines().count(), 5);
}
