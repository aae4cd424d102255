use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use chaoslab::traj_io::read_trajectory;
use chaoslab::{ErrorRecord, RunManifest};
use sha2::{Digest, Sha256};

fn run(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let conf = out.with_extension("conf");
    std::fs::write(&conf, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .arg(sub)
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("CHAOSLAB_THREADS")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].to_string()).collect()
}

fn manifest(dir: &Path, sub: &str) -> RunManifest {
    let text = std::fs::read_to_string(dir.join(format!("{sub}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

const SIMULATE: &str = "[kernel]\nname = riesz-truncated\nalpha = 0.3\ns = -1\n\n[sim]\nn_particles = 24\ndim = 2\n\
horizon = 0.25\ndt = 0.015625\nseed = 9\ninitial = gaussian\ninitial_var = 1\nrecord_every = 4\n\n[experiment]\nruns = 2\n";

#[test]
fn check_kernel_flags_global_riesz_as_h2_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("check");
    let o = run("check-kernel", "[kernel]\nname = riesz\nalpha = 0.25\n\n[sim]\nn_particles = 2\ndim = 1\nhorizon = 1\ndt = 0.1\nseed = 1\n", &out, &[]);
    ok(&o);
    assert_eq!(column(&out.join("check_kernel.csv"), "verdict"), vec!["H2-only"]);
    let m = manifest(&out, "check-kernel");
    assert!(m.outputs.iter().any(|r| r.path == "check_kernel.csv" && r.rows == 1));
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("sim{threads}"));
        ok(&run("simulate", SIMULATE, &out, &["--threads", threads]));
        let m = manifest(&out, "simulate");
        let bins: BTreeSet<String> = m.outputs.iter().filter(|r| r.path.ends_with(".bin")).map(|r| r.path.clone()).collect();
        assert_eq!(bins.len(), 2, "one trajectory file per run");
        hashes.push((m.config_hash.clone(), bins.iter().map(|b| digest(&out.join(b))).collect::<Vec<_>>()));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn trajectory_files_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&run("simulate", SIMULATE, &out, &[]));
    let path = out.join("trajectory_N24_run0.bin");
    let (traj, _header) = read_trajectory(&mut std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!((traj.n_particles, traj.dim), (24, 2));
    assert_eq!(traj.step_indices, vec![0, 4, 8, 12, 16]);
    assert!(traj.snapshots.iter().all(|x| x.is_finite()));
}

#[test]
fn seed_flag_changes_hash_and_paths() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&run("simulate", SIMULATE, &a, &[]));
    ok(&run("simulate", SIMULATE, &b, &["--seed", "10"]));
    let (ma, mb) = (manifest(&a, "simulate"), manifest(&b, "simulate"));
    assert_eq!((ma.seed, mb.seed), (9, 10));
    assert_ne!(ma.config_hash, mb.config_hash);
    let f = "trajectory_N24_run0.bin";
    assert_ne!(digest(&a.join(f)), digest(&b.join(f)));
}

#[test]
fn girsanov_writes_one_row_per_n_r_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let conf = "[kernel]\nname = bounded-lipschitz\nc = 1\nomega = 0.5\n\n[sim]\nn_particles = 4\ndim = 1\n\
horizon = 0.5\ndt = 0.03125\nseed = 3\ninitial = gaussian\ninitial_var = 1\n\n[experiment]\nn_list = 4, 8\npaths = 40\nalphas = 0.5, 1, 2\n";
    ok(&run("girsanov", conf, &out, &[]));
    let rows = csv_rows(&out.join("girsanov.csv"));
    assert_eq!(rows.len(), 2 * 2 * 3);
    let keys: BTreeSet<(String, String, String)> =
        rows.iter().map(|r| (r[0].to_string(), r[1].to_string(), r[2].to_string())).collect();
    assert_eq!(keys.len(), rows.len(), "no duplicate (N, r, alpha) rows");
}

#[test]
fn invalid_config_writes_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let o = run("simulate", "[kernel]\nname = zero\n\n[sim]\nn_particles = 0\ndim = 1\nhorizon = 1\ndt = 0.1\nseed = 1\n", &out, &[]);
    assert!(!o.status.success());
    let rec: ErrorRecord = serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert!(rec.error.contains("n_particles"), "{}", rec.error);
    assert!(rec.config_hash.is_none());
}

#[test]
fn runtime_failure_records_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    // the study only supports r in {0, 1}
    let conf = "[kernel]\nname = bounded-lipschitz\n\n[sim]\nn_particles = 4\ndim = 1\nhorizon = 0.1\ndt = 0.05\nseed = 1\n\n\
[experiment]\nr_list = 2\npaths = 4\n";
    let o = run("girsanov", conf, &out, &[]);
    assert!(!o.status.success());
    let rec: ErrorRecord = serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(rec.config_hash.as_deref().map(str::len), Some(16));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_chaoslab")).args(["explode", "--config", "x", "--out", "y"]).output().unwrap();
    assert!(!o.status.success());
}
