use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_iga-biharm-mg"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn small_bench_succeeds_and_prints_table() {
    let (code, stdout) = run(&["bench", "--smoother", "scms", "--degrees", "3,4", "--levels", "1..2"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("sigma0_inv=0.02"));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("|     ")).count(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["bench", "--degrees", "1..3"]).0, 2);
    assert_eq!(run(&["bench", "--smoother", "jacobi"]).0, 2);
    assert_eq!(run(&["verify", "bogus"]).0, 2);
    assert_eq!(run(&["bench", "--degrees", "3", "--levels", "2", "--max-iters", "1"]).0, 1);
    assert_eq!(run(&["verify", "inverse"]).0, 0);
}

#[test]
fn csv_output_is_reproducible() {
    let dir = std::env::temp_dir().join(format!("iga-biharm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    let args = ["bench", "--degrees", "3", "--levels", "1", "--out", path.to_str().unwrap()];
    assert_eq!(run(&args).0, 0);
    let first = std::fs::read_to_string(&path).unwrap();
    assert_eq!(run(&args).0, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), first);
    assert!(path.with_extension("md").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}
