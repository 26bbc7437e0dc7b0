use std::path::Path;
use std::process::{Command, Output};

fn spamm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spamm"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&spamm(&["--help"])), 0);
    assert_eq!(code(&spamm(&["--version"])), 0);
    for sub in ["generate", "multiply", "verify", "bench", "sweep-tau"] {
        assert_eq!(code(&spamm(&[sub, "--help"])), 0, "{sub}");
    }
}

#[test]
fn generate_multiply_verify_round() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mtx");
    let c = dir.path().join("c.mtx");
    let o = spamm(&[
        "generate",
        "--n",
        "48",
        "--lambda",
        "0.4",
        "--seed",
        "9",
        "--out",
        s(&a),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(a.exists());

    let o = spamm(&[
        "multiply",
        s(&a),
        "--tau",
        "0",
        "--repeats",
        "1",
        "--out",
        s(&c),
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut l = out.lines();
    assert!(l.next().unwrap().starts_with("scenario,n,tau"));
    assert!(l.next().unwrap().starts_with("spamm4,48,"));
    let m: spamm::DenseMatrix<f32> = spamm::bench::load_matrix(&c).unwrap();
    assert_eq!(m.shape(), (48, 48));

    let o = spamm(&["verify", s(&a), "--tau", "0"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "method,tau,max_norm_error,row,col,products4");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("dense-single,"));
    assert!(rows[2].starts_with("fine4,"));
    assert!(rows[3].starts_with("coarse16,"));
}

#[test]
fn bench_and_sweep_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ratios.csv");
    let o = spamm(&[
        "bench",
        "--n",
        "32,64",
        "--tau",
        "1e-6",
        "--scenario",
        "spamm4,spamm16",
        "--repeats",
        "1",
        "--ratios",
        s(&r),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 5);
    assert_eq!(std::fs::read_to_string(&r).unwrap().lines().count(), 3);

    let o = spamm(&[
        "sweep-tau",
        "--n",
        "64",
        "--target",
        "1e-4",
        "--iterations",
        "3",
        "--repeats",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(
        rows[0],
        "granularity,n,target,tau,max_norm_error,products4,met"
    );
    assert_eq!(rows.len(), 3);
    assert!(rows[1].ends_with(",true"));
}

#[test]
fn validation_errors_exit_2() {
    assert_eq!(code(&spamm(&[])), 2);
    assert_eq!(code(&spamm(&["frobnicate"])), 2);
    assert_eq!(
        code(&spamm(&["generate", "--n", "abc", "--out", "x.mtx"])),
        2
    );
    assert_eq!(
        code(&spamm(&["bench", "--n", "32", "--scenario", "bogus"])),
        2
    );
    assert_eq!(
        code(&spamm(&[
            "bench",
            "--n",
            "32",
            "--tau",
            "-1",
            "--repeats",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&spamm(&[
            "bench",
            "--n",
            "32",
            "--lambda",
            "1.5",
            "--repeats",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&spamm(&["sweep-tau", "--n", "32", "--target", "0"])),
        2
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mtx");
    std::fs::write(&bad, "not a matrix market file\n").unwrap();
    assert_eq!(code(&spamm(&["verify", s(&bad)])), 2);
    let rect = dir.path().join("rect.mtx");
    std::fs::write(
        &rect,
        "%%MatrixMarket matrix array real general\n2 1\n1.0\n2.0\n",
    )
    .unwrap();
    assert_eq!(code(&spamm(&["verify", s(&rect)])), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.mtx");
    assert_eq!(code(&spamm(&["verify", s(&missing)])), 3);
    assert_eq!(code(&spamm(&["multiply", s(&missing)])), 3);
    let unwritable = dir.path().join("no/such/dir/out.mtx");
    assert_eq!(
        code(&spamm(&["generate", "--n", "8", "--out", s(&unwritable)])),
        3
    );
    assert_eq!(
        code(&spamm(&[
            "bench",
            "--n",
            "16",
            "--repeats",
            "1",
            "--out",
            s(&unwritable)
        ])),
        3
    );
}
