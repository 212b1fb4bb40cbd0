use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinscale"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("spawn");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL_ISING: &str = r#"
[[sweep]]
name = "small"
model = "ising_half"
lengths = [6, 8]
field = "Bx"
coupling = "Bz"
coupling_values = [0.5]
solver = "ed_dense"
tol = 1e-12
order_parameter = "x"
rdm_elements = true
output = "small.csv"
grid = { start = -0.02, stop = 0.02, count = 9 }

[sweep.spec]
J = 1.0
Bz = 0.5
Bx = 0.0
"#;

#[test]
fn validate_passes_on_a_clean_build() {
    let (code, out, _) = run(bin().arg("validate"));
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn collapse_of_concurrence_fixture_is_regression_locked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scaled.csv");
    let (code, stdout, err) = run(bin()
        .args(["collapse"])
        .arg(fixture("concurrence-L10.csv"))
        .arg(fixture("concurrence-L12.csv"))
        .args(["--x", "kappa1", "--y", "entanglement", "--derivative", "--normalize", "min", "--max-q", "0.05"])
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0, "{stdout}{err}");
    let q: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("Q = "))
        .expect("Q line")
        .parse()
        .unwrap();
    assert!(q < 0.05);
    assert!((q - 2.6370377269e-4).abs() < 1e-6 * 2.6370377269e-4, "Q drifted: {q}");
    let scaled = std::fs::read_to_string(&out).unwrap();
    assert!(scaled.starts_with("series,kappa1,d_entanglement\n"));
    assert_eq!(scaled.lines().count(), 1 + 4 * 41);
}

#[test]
fn undifferentiated_concurrence_does_not_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bin()
        .args(["collapse"])
        .arg(fixture("concurrence-L10.csv"))
        .arg(fixture("concurrence-L12.csv"))
        .args(["--x", "kappa1", "--y", "entanglement", "--normalize", "min", "--max-q", "0.05", "--out"])
        .arg(dir.path().join("c.csv")));
    assert_eq!(code, 1);
}

#[test]
fn locate_finds_the_magnetization_step_at_zero_field() {
    let (code, out, err) = run(bin().arg("locate").arg(fixture("concurrence-L12.csv")).args(["--column", "magnetization"]));
    assert_eq!(code, 0, "{err}");
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let field: f64 = r.split(',').nth(3).unwrap().parse().unwrap();
        assert!(field.abs() < 1e-12, "{r}");
    }
}

#[test]
fn ed_request_beyond_capacity_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[[sweep]]
name = "too-big"
model = "xxz_spin1"
lengths = [20]
field = "D"
coupling = "Jz"
coupling_values = [3.8]
solver = "ed_lanczos"
order_parameter = "z_staggered"
rdm_elements = false
output = "big.csv"
grid = { start = 3.0, stop = 4.0, count = 3 }

[sweep.spec]
Jz = 3.8
D = 0.0
Bz_uniform = 0.0
Bz_st = 0.0
"#,
    );
    let (code, _, err) = run(bin().arg("sweep").arg(&cfg));
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("capacity"), "{err}");
    assert!(!dir.path().join("big.csv").exists());
}

#[test]
fn bad_config_and_usage_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL_ISING.replace("Bx = 0.0\n", ""));
    let (code, _, err) = run(bin().arg("sweep").arg(&cfg));
    assert_eq!(code, 2);
    assert!(err.contains("Bx"), "{err}");
    assert_eq!(run(bin().args(["collapse", "x.csv", "--x", "kappa9", "--y", "gap"])).0, 2);
    assert_eq!(run(bin().arg("frobnicate")).0, 2);
    let (code, _, _) = run(bin().arg("locate").arg(dir.path().join("absent.csv")).args(["--column", "gap"]));
    assert_eq!(code, 2);
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // a residual tolerance below machine precision cannot be met
    let cfg = write_config(
        dir.path(),
        &SMALL_ISING.replace("solver = \"ed_dense\"", "solver = \"ed_lanczos\"").replace("tol = 1e-12", "tol = 1e-30"),
    );
    let (code, _, err) = run(bin().arg("sweep").arg(&cfg));
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("aborted"), "{err}");
}

#[test]
fn sweep_output_is_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_ISING);
    let mut outputs = Vec::new();
    for threads in ["1", "2", "2"] {
        let (code, _, err) = run(bin().arg("sweep").arg(&cfg).env("SPINSCALE_THREADS", threads));
        assert_eq!(code, 0, "{err}");
        outputs.push(std::fs::read(dir.path().join("small.csv")).unwrap());
        let meta = std::fs::read_to_string(dir.path().join("small.meta")).unwrap();
        assert!(meta.contains(&format!("threads={threads}\n")), "{meta}");
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with(
        "model,L,coupling_name,coupling_value,field_name,field,E0,E1,gap,magnetization,entanglement,rdm_11,rdm_12_re,rdm_12_im,flags\n"
    ));
    assert_eq!(text.lines().count(), 1 + 2 * 9);
}

#[test]
fn master_prints_the_two_level_curves() {
    let (code, out, _) = run(bin().args(["master", "--kappa-range", "-5:5:41"]));
    assert_eq!(code, 0);
    let rows: Vec<Vec<f64>> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 41);
    for r in rows {
        let root = (1.0 + r[0] * r[0]).sqrt();
        assert!((r[1] - r[0] / root).abs() < 1e-11);
        assert!((r[2] - root).abs() < 1e-11);
    }
    assert_eq!(run(bin().args(["master", "--kappa-range", "5:1:3"])).0, 2);
}
