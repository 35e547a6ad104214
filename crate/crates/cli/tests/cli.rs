use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_prefbandit"));
    c.env_remove("PREFBANDIT_OUT");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn quick_run(dir: &Path, extra: &[&str]) -> Output {
    bin()
        .args([
            "run",
            "--env",
            "cpap",
            "--policy",
            "dopl",
            "-k",
            "3",
            "--horizon",
            "20",
            "--seed",
            "7",
        ])
        .args(extra)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

#[test]
fn run_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(quick_run(&a, &[]));
    ok(quick_run(&b, &[]));
    let name = "cpap_dopl_seed7.csv";
    let bytes = std::fs::read(a.join(name)).unwrap();
    assert_eq!(bytes, std::fs::read(b.join(name)).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with(
        "episode,episodic_reward,cumulative_regret,index_error,F_error,P_error,R_error\n"
    ));
    assert_eq!(text.lines().count(), 4);
    assert!(a.join("cpap_dopl_seed7.json").exists());
}

#[test]
fn env_var_sets_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from_env");
    ok(bin()
        .args([
            "run",
            "--env",
            "app-marketing",
            "--policy",
            "random",
            "-k",
            "2",
            "--horizon",
            "5",
        ])
        .env("PREFBANDIT_OUT", &out)
        .output()
        .unwrap());
    assert!(out.join("app_marketing_random_seed0.csv").exists());
}

#[test]
fn sweep_then_regret_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(bin()
        .args([
            "sweep",
            "--env",
            "app-marketing",
            "--policy",
            "random",
            "-k",
            "8",
            "--horizon",
            "10",
        ])
        .args(["--seeds", "0..3", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap());
    assert!(stdout.contains("aggregate over 3 seeds"));
    for s in 0..3 {
        assert!(tmp
            .path()
            .join(format!("app_marketing_random_seed{s}.csv"))
            .exists());
    }
    let agg = tmp.path().join("app_marketing_random_aggregate.csv");
    let fit = ok(bin().arg("regret-fit").arg(&agg).output().unwrap());
    assert!(fit.contains("episodes 8"), "{fit}");
}

#[test]
fn custom_world_and_reference_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let world = tmp.path().join("w.toml");
    std::fs::write(
        &world,
        "budget = 2\n\n[[arms]]\nrewards = [0.0, 1.0]\npassive = [[0.9, 0.1], [0.5, 0.5]]\nactive = [[0.2, 0.8], [0.1, 0.9]]\ncount = 4\n",
    )
    .unwrap();
    let dump = tmp.path().join("ref.jsonl");
    ok(bin()
        .args([
            "run",
            "--env",
            "custom",
            "-k",
            "3",
            "--horizon",
            "10",
            "--world",
        ])
        .arg(&world)
        .arg("--dump-reference")
        .arg(&dump)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap());
    let lines = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(lines.lines().count(), 3);
    assert!(lines.contains("\"q_tilde\""));
}

#[test]
fn reports_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--env", "custom", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--world"));

    let out = bin()
        .args(["run", "--env", "cpap", "--budget", "50", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(!out.status.success());

    let out = bin()
        .args(["regret-fit", "/nonexistent/file.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/file.csv"));
}
