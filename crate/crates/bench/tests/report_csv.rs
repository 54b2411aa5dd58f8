use sparse_varpro::baselines::{Budget, Sample, SolverTrace};
use sparse_varpro::linalg::DenseMatrix;
use sparse_varpro::problems::Problem;
use sparse_varpro::regularizers::Regularizer;
use sparse_varpro_bench::{
    parse_solvers, run_benchmark, run_instance, write_csv, BenchConfig, BenchReport, Instance,
    LambdaSpec, ProblemSpec, RegSpec, CSV_HEADER,
};

fn scalar_instance() -> Instance {
    let x = DenseMatrix::from_rows(&[vec![1.0]]).unwrap();
    Instance::Vector(Problem::new(x, vec![2.0], 1.0, Regularizer::L1).unwrap())
}

fn read_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn csv_bytes(report: &BenchReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf).unwrap();
    buf
}

fn synth_config(solvers: &str) -> BenchConfig {
    BenchConfig {
        problem: ProblemSpec::Synth { m: 20, n: 40, s: 4, noise: 0.01 },
        reg: RegSpec::L1,
        lambda: LambdaSpec::Fraction(10.0),
        solvers: parse_solvers(solvers).unwrap(),
        budget_s: 60.0,
        max_iters: 200,
        seed: 5,
        out: None,
        parallel: false,
    }
}

#[test]
fn scalar_race_reaches_the_known_optimum() {
    let solvers = parse_solvers("noncvx-pro,ista,cd").unwrap();
    let report = run_instance(&scalar_instance(), &solvers, Budget::iters(1000), 0, false).unwrap();
    assert!(report.failures.is_empty());
    assert!((report.f_star - 1.5).abs() <= 1e-6);
    for t in &report.traces {
        assert!((t.final_objective() - 1.5).abs() <= 1e-6, "{}", t.solver);
    }
    assert!(report.disagreement.is_none());
}

#[test]
fn zero_time_budget_keeps_only_the_initial_point() {
    let solvers = parse_solvers("noncvx-pro,ista,fista,cd,irls,altmin,quadvar").unwrap();
    let budget = Budget::iters(1000).with_time(0.0);
    let report = run_instance(&scalar_instance(), &solvers, budget, 0, false).unwrap();
    assert_eq!(report.traces.len(), 7);
    for t in &report.traces {
        assert_eq!(t.samples.len(), 1, "{}", t.solver);
        assert_eq!(t.samples[0].iteration, 0);
    }
}

#[test]
fn empty_solver_list_is_a_config_error() {
    let mut c = synth_config("cd");
    c.solvers.clear();
    assert_eq!(run_benchmark(&c).unwrap_err().exit_code(), 2);
    assert!(run_instance(&scalar_instance(), &[], Budget::iters(1), 0, false).is_err());
}

#[test]
fn one_sample_report_is_two_lines() {
    let trace = SolverTrace {
        solver: "x,\"y\"".into(),
        samples: vec![Sample { iteration: 0, time_s: 0.25, objective: 0.1 + 0.2 }],
        beta: vec![],
        config: vec![],
        gap: None,
    };
    let report = BenchReport::from_traces(1.0, vec![trace], vec![]);
    let bytes = csv_bytes(&report);
    assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 2);
    let (header, rows) = read_rows(&bytes);
    assert_eq!(header, CSV_HEADER);
    assert_eq!(rows[0][0], "x,\"y\"");
    assert_eq!(rows[0][3].parse::<f64>().unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
    assert_eq!(rows[0][4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn csv_round_trip_and_suboptimality_recomputation() {
    let report = run_benchmark(&synth_config("noncvx-pro,fista,ista,cd,altmin")).unwrap();
    let (_, rows) = read_rows(&csv_bytes(&report));
    let total: usize = report.traces.iter().map(|t| t.samples.len()).sum();
    assert_eq!(rows.len(), total);
    let samples = report.traces.iter().flat_map(|t| t.samples.iter().map(move |s| (t, s)));
    for (row, (t, s)) in rows.iter().zip(samples) {
        assert_eq!(row[0], t.solver);
        assert_eq!(row[1].parse::<usize>().unwrap(), s.iteration);
        assert_eq!(row[2].parse::<f64>().unwrap().to_bits(), s.time_s.to_bits());
        assert_eq!(row[3].parse::<f64>().unwrap().to_bits(), s.objective.to_bits());
    }
    let objective: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let min = objective.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut running = std::collections::HashMap::new();
    for (row, f) in rows.iter().zip(&objective) {
        let sub: f64 = row[4].parse().unwrap();
        assert_eq!(sub.to_bits(), (f - min).to_bits());
        assert!(sub >= -1e-12);
        let best = running.entry(row[0].clone()).or_insert(f64::INFINITY);
        let next = best.min(sub);
        assert!(next <= *best);
        *best = next;
    }
}

#[test]
fn same_seed_reproduces_objective_columns() {
    let config = synth_config("noncvx-pro,fista,cd,irls,quadvar");
    let a = run_benchmark(&config).unwrap();
    let b = run_benchmark(&config).unwrap();
    let column = |r: &BenchReport| -> Vec<Vec<u64>> {
        r.traces
            .iter()
            .map(|t| t.samples.iter().map(|s| s.objective.to_bits()).collect())
            .collect()
    };
    assert_eq!(column(&a), column(&b));
    let mut parallel = config.clone();
    parallel.parallel = true;
    assert_eq!(column(&a), column(&run_benchmark(&parallel).unwrap()));
}

#[test]
fn solver_failures_are_recorded_not_fatal() {
    let mut c = synth_config("noncvx-pro,dr:mu=0.1,ista");
    c.lambda = LambdaSpec::Absolute(0.0);
    c.max_iters = 20_000;
    let report = run_benchmark(&c).unwrap();
    assert_eq!(report.traces.len(), 2);
    assert_eq!(report.failures.len(), 1);
    assert!(report.failures[0].0.starts_with("ista"));
    let feasible = report.feasible_f_star.unwrap();
    for t in &report.traces {
        let f = t.final_objective();
        assert!((f - feasible).abs() <= 1e-6 * feasible, "{}: {f} vs {feasible}", t.solver);
    }
}

#[test]
fn trace_norm_race() {
    let c = BenchConfig {
        problem: ProblemSpec::MultiTask { tasks: 3, n: 5, m: 8 },
        reg: RegSpec::Trace,
        lambda: LambdaSpec::Fraction(5.0),
        solvers: parse_solvers("noncvx-pro,irls:eps=1e-6,cd").unwrap(),
        budget_s: 60.0,
        max_iters: 20_000,
        seed: 1,
        out: None,
        parallel: false,
    };
    let report = run_benchmark(&c).unwrap();
    assert_eq!(report.traces.len(), 2);
    assert_eq!(report.failures.len(), 1);
    let (a, b) = (report.traces[0].final_objective(), report.traces[1].final_objective());
    assert!((a - b).abs() <= 1e-3 * a, "{a} vs {b}");
}
