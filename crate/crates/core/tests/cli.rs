use std::fs;
use std::path::Path;
use std::process::Command;

fn cho() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cho"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SIM: &str = r#"
seed = 4
[grid]
nx = 8
[time]
final_time = 0.1
steps = 10
[potential]
variant = "regular"
[initial]
kind = "band-limited"
amplitude = 0.3
[control]
m = 0.5
kind = "random-smooth"
amplitude = 0.3
"#;

#[test]
fn simulate_then_restart_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let out = dir.path().join("first");
    let status = cho().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("t,mean,energy,min_phi,max_phi,grad_mu_norm\n"));

    let restart = SIM.replace(
        "kind = \"band-limited\"\namplitude = 0.3",
        "kind = \"snapshot\"\npath = \"first/snapshots.cho\"\nframe = 10",
    );
    let cfg2 = write(dir.path(), "restart.toml", &restart);
    let out2 = dir.path().join("second");
    let status = cho().args(["simulate", "--config"]).arg(&cfg2).arg("--out").arg(&out2).status().unwrap();
    assert!(status.success());
    let last_first = csv.lines().last().unwrap().split(',').nth(1).unwrap().to_string();
    let csv2 = fs::read_to_string(out2.join("diagnostics.csv")).unwrap();
    let first_second = csv2.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    assert_eq!(last_first, first_second, "restart must begin from the stored mean");
}

#[test]
fn seed_flag_changes_output_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.toml", SIM);
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert!(cho()
            .args(["simulate", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .success());
        fs::read(out.join("diagnostics.csv")).unwrap()
    };
    let a = run("1", "a");
    assert_eq!(a, run("1", "b"));
    assert_ne!(a, run("2", "c"));
}

#[test]
fn incompatible_data_are_refused_with_a_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[grid]
nx = 8
[time]
final_time = 0.1
steps = 5
[potential]
variant = "logarithmic"
eps = 0.1
[initial]
kind = "constant"
value = 0.95
[control]
m = 0.5
"#;
    let cfg = write(dir.path(), "bad.toml", text);
    let out = dir.path().join("out");
    let output = cho().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("compatibility"));
    let failure: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(failure["error"], "ValidationError");
    assert!(!out.join("diagnostics.csv").exists());

    let forced_out = dir.path().join("forced");
    let forced = cho()
        .args(["simulate", "--override-compatibility", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&forced_out)
        .output()
        .unwrap();
    assert!(forced.status.success(), "{}", String::from_utf8_lossy(&forced.stderr));
    assert!(forced_out.join("diagnostics.csv").exists());
}

#[test]
fn parse_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", "[grid]\nnx = 8\n[time]\nfinal_time = 1.0\nstepz = 10\n");
    let output = cho().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("line 5"), "{err}");
    assert!(err.contains("stepz"), "{err}");
}

#[test]
fn presets_run_through_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("simulate", "stationary", "diagnostics.csv"),
        ("oracle-compare", "stationary", "oracle.csv"),
        ("verify", "gradient-check", "verify.csv"),
        ("optimize", "inverse-crime", "summary.json"),
    ];
    for (cmd, preset, file) in cases {
        let out = dir.path().join(cmd);
        let output = cho().args([cmd, "--preset", preset, "--out"]).arg(&out).output().unwrap();
        assert!(output.status.success(), "{cmd}: {}", String::from_utf8_lossy(&output.stderr));
        assert!(out.join(file).exists(), "{cmd} wrote no {file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("optimize/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "converged");
    let list = cho().arg("list").output().unwrap();
    assert!(String::from_utf8_lossy(&list.stdout).contains("control.variational_inequality"));
}
