use std::process::{Command, Output};

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_falsetheta"));
    c.args(args);
    match threads {
        Some(t) => c.env("FALSETHETA_THREADS", t),
        None => c.env_remove("FALSETHETA_THREADS"),
    };
    c.output().expect("run binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn coefficient_tables() {
    let o = run(&["coeffs", "--podeu", "--n", "10"], None);
    assert_eq!(o.status.code(), Some(0));
    let vals: Vec<String> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["podeu"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(vals.join(","), "1,1,1,2,3,3,4,5,8,8");
}

#[test]
fn scan_is_byte_identical_across_thread_counts() {
    let args = ["asymptotic", "--j", "2", "--scan", "500:4000:4", "--exact"];
    let a = run(&args, Some("1"));
    let b = run(&args, Some("3"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 4);
    for l in text.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["n34_ratio"].as_f64().unwrap().abs() < 1.0);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["coeffs", "--j", "7", "--n", "3"], None).status.code(), Some(2));
    assert_eq!(run(&["coeffs", "--j", "0"], None).status.code(), Some(2));
    assert_eq!(run(&["coeffs", "--j", "0", "--n", "3"], Some("many")).status.code(), Some(2));
    assert_eq!(run(&["multiplier", "--a", "2", "--b", "0", "--c", "0", "--d", "2"], None).status.code(), Some(2));
    assert_eq!(run(&["asymptotic", "--j", "0", "--n", "300", "--tol", "1e-300"], None).status.code(), Some(4));
    assert_eq!(run(&["verify", "--only", "density"], None).status.code(), Some(3));
    assert_eq!(run(&["verify", "--only", "sigma"], None).status.code(), Some(0));
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("falsetheta-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    let o = run(&["kernel-table", "--output", path.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("j,r,value,closed_form_string,rel_error_vs_table\n"));
    assert_eq!(text.lines().count(), 16);
    std::fs::remove_dir_all(&dir).unwrap();
}
