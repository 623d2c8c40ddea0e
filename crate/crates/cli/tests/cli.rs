//! End-to-end behaviour of the `climarket` binary: exit codes, flag and
//! config-file precedence, output shapes, and error messages. Each test
//! drives the compiled binary in a fresh temp directory with the bundled
//! synthetic data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use climarket_core::sensitivity::{write_sweep_csv, SweepResult, SweepRow};
use climarket_core::sim::ParamSet;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_climarket"))
}

fn data_path(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

/// Flags for the bundled data plus a configuration small enough to finish in
/// about a second.
fn fast_args(out_dir: &Path) -> Vec<String> {
    vec![
        "--temperature-csv".into(),
        data_path("temperature_synthetic.csv"),
        "--co2-csv".into(),
        data_path("co2_synthetic.csv"),
        "--tsi-csv".into(),
        data_path("tsi_synthetic.csv"),
        "--out-dir".into(),
        out_dir.display().to_string(),
        "--n-traders".into(),
        "16".into(),
        "--n-edge".into(),
        "24".into(),
        "--n-draws".into(),
        "300".into(),
        "--burn-in".into(),
        "100".into(),
    ]
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn expect_exit(cmd: &mut Command, code: i32) -> String {
    let out = cmd.output().expect("binary runs");
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn run_writes_requested_number_of_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .args(["run", "--seed", "1", "--seg", "0.05", "--n-sequences", "8"])
            .args(fast_args(tmp.path())),
    );
    let csv = read(&tmp.path().join("run.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("sequence,end_year,frac_true,trades,score")
    );
    assert_eq!(lines.count(), 8, "one record per sequence");
    assert!(tmp.path().join("manifest.txt").exists());
}

#[test]
fn historical_defaults_to_fourteen_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .args(["historical", "--seed", "3"])
            .args(fast_args(tmp.path())),
    );
    let csv = read(&tmp.path().join("run.csv"));
    assert_eq!(csv.lines().count(), 15, "header plus 14 records");
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("14,2014,"), "got {last}");
}

#[test]
fn missing_data_file_exits_2_and_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = fast_args(tmp.path());
    args[1] = "/no/such/temps.csv".into();
    let stderr = expect_exit(bin().args(["run", "--seed", "1"]).args(args), 2);
    assert!(
        stderr.contains("/no/such/temps.csv"),
        "stderr should name the missing file: {stderr}"
    );
}

#[test]
fn unknown_config_key_exits_2_with_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 4\nn_tarders = 10\n").unwrap();
    let stderr = expect_exit(
        bin().args(["run", "--config"]).arg(&cfg).args(fast_args(tmp.path())),
        2,
    );
    assert!(stderr.contains("n_tarders"), "names the key: {stderr}");
    assert!(stderr.contains("line 2"), "names the line: {stderr}");
}

#[test]
fn invalid_flag_value_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let stderr = expect_exit(
        bin()
            .args(["run", "--true-model", "phlogiston"])
            .args(fast_args(tmp.path())),
        2,
    );
    assert!(stderr.contains("phlogiston"), "{stderr}");
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("base.cfg");
    std::fs::write(&cfg, "seed = 7\nn_traders = 10\nn_edge = 12\n").unwrap();
    let out_dir = tmp.path().join("out");
    // fast_args pins n_traders 16 / n_edge 24; those flags must beat the file
    run_ok(
        bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(fast_args(&out_dir))
            .args(["--n-sequences", "2"]),
    );
    let manifest = read(&out_dir.join("manifest.txt"));
    assert!(manifest.contains("seed = 7"), "file value survives:\n{manifest}");
    assert!(manifest.contains("n_traders = 16"), "flag wins:\n{manifest}");
    assert!(manifest.contains("n_edge = 24"), "flag wins:\n{manifest}");
}

#[test]
fn manifest_reproduces_the_run_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    run_ok(
        bin()
            .args(["run", "--seed", "42", "--n-sequences", "3"])
            .args(fast_args(&first)),
    );
    let second = tmp.path().join("second");
    run_ok(
        bin()
            .args(["run", "--config"])
            .arg(first.join("manifest.txt"))
            .args(["--out-dir"])
            .arg(&second),
    );
    assert_eq!(
        read(&first.join("run.csv")),
        read(&second.join("run.csv")),
        "replay from manifest must reproduce run.csv exactly"
    );
    let strip = |m: String| -> String {
        m.lines()
            .filter(|l| !l.starts_with("out_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(read(&first.join("manifest.txt"))),
        strip(read(&second.join("manifest.txt"))),
        "manifests agree except for the output directory"
    );
}

#[test]
fn run_csv_directory_collision_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // out/run.csv exists as a directory, so the post-simulation write fails
    std::fs::create_dir_all(tmp.path().join("run.csv")).unwrap();
    let stderr = expect_exit(
        bin()
            .args(["run", "--seed", "1", "--n-sequences", "2"])
            .args(fast_args(tmp.path())),
        3,
    );
    assert!(stderr.contains("run.csv"), "{stderr}");
}

#[test]
fn prcc_on_constant_column_exits_2_naming_the_parameter() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep_path = tmp.path().join("sweep.csv");
    let rows: Vec<SweepRow> = (0..12)
        .map(|i| SweepRow {
            params: ParamSet {
                ideo: 0.05 * i as f64,
                n_edge: 100 + 7 * i,
                n_traders: 50 + 11 * i,
                risk_tak: 0.07 * i as f64,
                seg: 0.4, // constant on purpose
                true_model: if i % 2 == 0 {
                    climarket_core::climate::ForcingKind::LogCo2
                } else {
                    climarket_core::climate::ForcingKind::Tsi
                },
            },
            mean_score: Some(0.3 + 0.04 * i as f64),
            n_ok: 2,
            n_replicates: 2,
        })
        .collect();
    write_sweep_csv(&SweepResult { rows }, &sweep_path).unwrap();

    let stderr = expect_exit(
        bin()
            .args(["prcc"])
            .arg(&sweep_path)
            .args(["--out-dir"])
            .arg(tmp.path()),
        2,
    );
    assert!(
        stderr.contains("column 'seg'"),
        "constant column is named: {stderr}"
    );
}

#[test]
fn prcc_missing_sweep_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing: PathBuf = tmp.path().join("absent.csv");
    let stderr = expect_exit(
        bin().args(["prcc"]).arg(&missing).args(["--out-dir"]).arg(tmp.path()),
        2,
    );
    assert!(stderr.contains("absent.csv"), "{stderr}");
}

#[test]
fn sweep_then_prcc_produces_interval_table() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .args([
                "sweep",
                "--seed",
                "9",
                "--n-points",
                "12",
                "--replicates",
                "1",
                "--n-sequences",
                "2",
            ])
            .args(fast_args(tmp.path())),
    );
    assert!(tmp.path().join("design.csv").exists());
    let sweep = read(&tmp.path().join("sweep.csv"));
    assert_eq!(sweep.lines().count(), 13, "header plus 12 rows");
    assert!(sweep
        .lines()
        .next()
        .unwrap()
        .starts_with("ideo,n_edge,n_traders,risk_tak,seg,true_model,mean_score"));

    let out = run_ok(
        bin()
            .args(["prcc", "--seed", "9", "--n-boot", "200", "--out-dir"])
            .arg(tmp.path()),
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("estimate"), "{table}");
    let prcc = read(&tmp.path().join("prcc.csv"));
    assert_eq!(prcc.lines().count(), 7, "header plus six parameters");
    assert!(prcc.lines().next().unwrap().contains("ci_low"));
}
