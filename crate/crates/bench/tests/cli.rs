use std::fs;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparse-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn exit_codes() {
    let ok = bench(&["bench", "--problem", "synth:m=5,n=8,s=2", "--solvers", "cd", "--max-iters", "50"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let cases: [(&[&str], i32); 7] = [
        (&["bench", "--problem", "synth:m=5,n=8,s=2", "--solvers", ""], 2),
        (&["bench", "--problem", "synth:m=5,n=8,s=2", "--solvers", "cd", "--reg", "l7"], 2),
        (&["bench", "--solvers", "cd"], 2),
        (&["bench", "--problem", "synth:m=5,n=8,s=2", "--solvers", "cd", "--lambda-frac", "-1"], 2),
        (&["bench", "--problem", "synth:m=5,n=8,s=2", "--solvers", "nope"], 2),
        (&["bench", "--problem", "libsvm:/definitely/missing.txt", "--solvers", "cd"], 3),
        (&["lq-phase", "--n", "8", "--k", "9", "--m", "8"], 2),
    ];
    for (args, want) in cases {
        let o = bench(args);
        assert_eq!(code(&o), want, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn malformed_libsvm_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "1 2:1 1:3\n").unwrap();
    let spec = format!("libsvm:{}", path.display());
    let o = bench(&["bench", "--problem", &spec, "--solvers", "cd"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_with_cli_override() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.txt");
    fs::write(&data, "1 1:1 2:0.5\n-1 2:1 3:2\n0.5 1:0.3 3:1\n2 1:1 2:1 3:1\n").unwrap();
    let out = dir.path().join("trace.csv");
    let cfg = dir.path().join("race.cfg");
    fs::write(
        &cfg,
        format!(
            "# race\nproblem = libsvm:{}\nsolvers = cd,fista\nlambda = 100\nmax-iters = 30\nout = {}\n",
            data.display(),
            out.display()
        ),
    )
    .unwrap();
    let o = bench(&["bench", "--config", cfg.to_str().unwrap(), "--lambda-frac", "2", "--solvers", "cd,noncvx-pro"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&fs::read_to_string(&out).unwrap());
    assert!(rows.iter().any(|r| r[0] == "noncvx-pro"));
    assert!(!rows.iter().any(|r| r[0] == "fista"));
    // λ = λ_max / 2 leaves a nonzero solution; λ = 100 would not.
    let last: f64 = rows.iter().filter(|r| r[0] == "cd").last().unwrap()[3].parse().unwrap();
    let first: f64 = rows.iter().find(|r| r[0] == "cd").unwrap()[3].parse().unwrap();
    assert!(last < first);
}

#[test]
fn graph_problem_from_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.txt");
    fs::write(&edges, "0 1\n1 2\n2 3\n0 3\n").unwrap();
    let spec = format!("graph:edges={},source=0,sink=2", edges.display());
    let o = bench(&["solve", "--problem", &spec, "--lambda", "0", "--solvers", "noncvx-pro:route=dual,dr"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    for line in stdout.lines() {
        let obj: f64 = line.split("objective=").nth(1).unwrap().split('\t').next().unwrap().parse().unwrap();
        assert!((obj - 2.0).abs() <= 1e-6, "{line}");
    }
}

#[test]
fn lq_phase_trivial_cases() {
    let square = bench(&["lq-phase", "--n", "6", "--k", "2", "--m", "6", "--q", "0.8,1", "--trials", "3", "--restarts", "2"]);
    assert_eq!(code(&square), 0, "{}", String::from_utf8_lossy(&square.stderr));
    let rows = csv_rows(&String::from_utf8(square.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] == "3" && r[3] == "3"), "{rows:?}");
    let zero = bench(&["lq-phase", "--n", "10", "--k", "0", "--m", "1,3", "--trials", "2", "--restarts", "1"]);
    let rows = csv_rows(&String::from_utf8(zero.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[2] == "2"), "{rows:?}");
}
