use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::BenchError;

/// Where the data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    /// LIBSVM text file.
    Libsvm { path: PathBuf, standardize: bool },
    /// Gaussian design with a sparse ground truth.
    Synth { m: usize, n: usize, s: usize, noise: f64 },
    /// Edge list file; unit mass is moved from `source` to `sink`.
    Graph { edges: PathBuf, source: usize, sink: usize },
    /// Random connected graph with random balanced masses.
    RandomGraph { nodes: usize, edges: usize },
    /// Rank-one multitask regression.
    MultiTask { tasks: usize, n: usize, m: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegSpec {
    L1,
    /// Contiguous groups of the given size (the last one may be shorter).
    Group(usize),
    Trace,
    Lq(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaSpec {
    /// `λ = λ_max / r`.
    Fraction(f64),
    /// Absolute value; `0` selects the constrained problem.
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    NoncvxPro,
    Ista,
    Fista,
    Cd,
    Irls,
    Altmin,
    Quadvar,
    DouglasRachford,
    ChambollePock,
}

impl SolverKind {
    pub const ALL: [SolverKind; 9] = [
        SolverKind::NoncvxPro,
        SolverKind::Ista,
        SolverKind::Fista,
        SolverKind::Cd,
        SolverKind::Irls,
        SolverKind::Altmin,
        SolverKind::Quadvar,
        SolverKind::DouglasRachford,
        SolverKind::ChambollePock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::NoncvxPro => "noncvx-pro",
            SolverKind::Ista => "ista",
            SolverKind::Fista => "fista",
            SolverKind::Cd => "cd",
            SolverKind::Irls => "irls",
            SolverKind::Altmin => "altmin",
            SolverKind::Quadvar => "quadvar",
            SolverKind::DouglasRachford => "dr",
            SolverKind::ChambollePock => "cp",
        }
    }
}

/// One entry of the solver list: `name[:key=value[:key=value...]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub options: Vec<(String, String)>,
}

impl SolverSpec {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            options: Vec::new(),
        }
    }

    /// Label used in reports: the name followed by the options as given.
    pub fn label(&self) -> String {
        let mut s = self.kind.name().to_string();
        for (k, v) in &self.options {
            s.push_str(&format!(":{k}={v}"));
        }
        s
    }

    pub fn option<T: FromStr>(&self, key: &str) -> Result<Option<T>, BenchError> {
        match self.options.iter().rev().find(|(k, _)| k == key) {
            None => Ok(None),
            Some((_, v)) => v.parse().map(Some).map_err(|_| {
                BenchError::Config(format!("solver {}: invalid value {v:?} for {key}", self.kind.name()))
            }),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), BenchError> {
        match self.options.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => Err(BenchError::Config(format!(
                "solver {} has no option {k:?} (known: {})",
                self.kind.name(),
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn allowed_options(kind: SolverKind) -> &'static [&'static str] {
        match kind {
            SolverKind::NoncvxPro => &["memory", "grad_tol", "route"],
            SolverKind::Quadvar => &["memory", "grad_tol"],
            SolverKind::Ista | SolverKind::Fista | SolverKind::Altmin => &[],
            SolverKind::Cd => &["tol"],
            SolverKind::Irls => &["eps"],
            SolverKind::DouglasRachford => &["mu", "gamma"],
            SolverKind::ChambollePock => &["sigma", "theta", "step_product"],
        }
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub problem: ProblemSpec,
    pub reg: RegSpec,
    pub lambda: LambdaSpec,
    pub solvers: Vec<SolverSpec>,
    /// Wall-clock budget per solver in seconds.
    pub budget_s: f64,
    /// Iteration cap per solver.
    pub max_iters: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

/// Keys accepted in a config file; they mirror the CLI flags.
pub const CONFIG_KEYS: [&str; 10] = [
    "problem",
    "reg",
    "lambda-frac",
    "lambda",
    "solvers",
    "budget-s",
    "max-iters",
    "seed",
    "out",
    "parallel",
];

pub const DEFAULT_BUDGET_S: f64 = 10.0;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

impl BenchConfig {
    /// Builds a config from `key=value` settings. `lambda-frac` and `lambda`
    /// are mutually exclusive; with neither, `λ = λ_max / 10`.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self, BenchError> {
        if let Some(k) = settings.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(BenchError::Config(format!("unknown setting {k:?}")));
        }
        let get = |k: &str| settings.get(k).map(String::as_str);
        let problem = parse_problem(get("problem").ok_or_else(|| cfg("missing problem"))?)?;
        let reg = parse_reg(get("reg").unwrap_or("l1"))?;
        let lambda = match (get("lambda-frac"), get("lambda")) {
            (Some(_), Some(_)) => return Err(cfg("lambda-frac and lambda are mutually exclusive")),
            (Some(r), None) => {
                let r = parse_num::<f64>("lambda-frac", r)?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(cfg(&format!("lambda-frac must be positive, got {r}")));
                }
                LambdaSpec::Fraction(r)
            }
            (None, Some(l)) => {
                let l = parse_num::<f64>("lambda", l)?;
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(cfg(&format!("lambda must be nonnegative, got {l}")));
                }
                LambdaSpec::Absolute(l)
            }
            (None, None) => LambdaSpec::Fraction(10.0),
        };
        let solvers = parse_solvers(get("solvers").ok_or_else(|| cfg("missing solvers"))?)?;
        let budget_s = match get("budget-s") {
            Some(b) => parse_num::<f64>("budget-s", b)?,
            None => DEFAULT_BUDGET_S,
        };
        if !(budget_s >= 0.0) {
            return Err(cfg(&format!("budget-s must be nonnegative, got {budget_s}")));
        }
        let max_iters = match get("max-iters") {
            Some(v) => parse_num("max-iters", v)?,
            None => DEFAULT_MAX_ITERS,
        };
        let seed = match get("seed") {
            Some(v) => parse_num("seed", v)?,
            None => 0,
        };
        let parallel = match get("parallel") {
            Some(v) => parse_bool("parallel", v)?,
            None => false,
        };
        Ok(Self {
            problem,
            reg,
            lambda,
            solvers,
            budget_s,
            max_iters,
            seed,
            out: get("out").map(PathBuf::from),
            parallel,
        })
    }
}

/// Parses a flat config file: one `key=value` per line, `#` comments and
/// blank lines ignored.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, BenchError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg(&format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Overlays `overrides` on `base`. Giving one of `lambda`/`lambda-frac`
/// drops the other from `base`.
pub fn merge_settings(
    mut base: BTreeMap<String, String>,
    overrides: BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    if overrides.contains_key("lambda") {
        base.remove("lambda-frac");
    }
    if overrides.contains_key("lambda-frac") {
        base.remove("lambda");
    }
    base.extend(overrides);
    base
}

fn cfg(msg: &str) -> BenchError {
    BenchError::Config(msg.to_string())
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, BenchError> {
    v.trim()
        .parse()
        .map_err(|_| cfg(&format!("invalid value {v:?} for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, BenchError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(cfg(&format!("invalid boolean {v:?} for {key}"))),
    }
}

/// `kind:key=value,key=value`; `libsvm:` takes a path, optionally followed
/// by `,standardize`.
pub fn parse_problem(s: &str) -> Result<ProblemSpec, BenchError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    if kind == "libsvm" {
        let (path, standardize) = match rest.strip_suffix(",standardize") {
            Some(p) => (p, true),
            None => (rest, false),
        };
        if path.is_empty() {
            return Err(cfg("libsvm problem needs a path"));
        }
        return Ok(ProblemSpec::Libsvm {
            path: PathBuf::from(path),
            standardize,
        });
    }
    let mut fields = BTreeMap::new();
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| cfg(&format!("problem field {part:?} is not key=value")))?;
        fields.insert(k.trim(), v.trim());
    }
    let allowed: &[&str] = match kind {
        "synth" => &["m", "n", "s", "noise"],
        "graph" => &["edges", "source", "sink"],
        "random-graph" => &["nodes", "edges"],
        "multitask" => &["tasks", "n", "m"],
        _ => return Err(cfg(&format!("unknown problem kind {kind:?}"))),
    };
    if let Some(k) = fields.keys().find(|k| !allowed.contains(k)) {
        return Err(cfg(&format!("problem {kind} has no field {k:?}")));
    }
    let num = |k: &str| -> Result<usize, BenchError> {
        parse_num(k, fields.get(k).ok_or_else(|| cfg(&format!("problem {kind} needs {k}")))?)
    };
    let spec = match kind {
        "synth" => {
            let noise = match fields.get("noise") {
                Some(v) => parse_num("noise", v)?,
                None => 0.0,
            };
            let (m, n, s) = (num("m")?, num("n")?, num("s")?);
            if s > n || m == 0 {
                return Err(cfg(&format!("synth needs m > 0 and s <= n, got m={m}, n={n}, s={s}")));
            }
            ProblemSpec::Synth { m, n, s, noise }
        }
        "graph" => ProblemSpec::Graph {
            edges: PathBuf::from(fields.get("edges").ok_or_else(|| cfg("graph needs edges"))?),
            source: num("source")?,
            sink: num("sink")?,
        },
        "random-graph" => {
            let (nodes, edges) = (num("nodes")?, num("edges")?);
            if nodes < 2 || edges + 1 < nodes || edges > nodes * (nodes - 1) / 2 {
                return Err(cfg(&format!(
                    "random-graph needs nodes >= 2 and nodes-1 <= edges <= nodes(nodes-1)/2, got {nodes}, {edges}"
                )));
            }
            ProblemSpec::RandomGraph { nodes, edges }
        }
        _ => {
            let (tasks, n, m) = (num("tasks")?, num("n")?, num("m")?);
            if tasks == 0 || n == 0 || m == 0 {
                return Err(cfg("multitask sizes must be positive"));
            }
            ProblemSpec::MultiTask { tasks, n, m }
        }
    };
    Ok(spec)
}

/// `l1`, `group[:size]`, `trace`, `lq:<q>`.
pub fn parse_reg(s: &str) -> Result<RegSpec, BenchError> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    match (kind, arg) {
        ("l1", None) => Ok(RegSpec::L1),
        ("trace", None) => Ok(RegSpec::Trace),
        ("group", None) => Ok(RegSpec::Group(1)),
        ("group", Some(a)) => match parse_num::<usize>("group size", a)? {
            0 => Err(cfg("group size must be positive")),
            k => Ok(RegSpec::Group(k)),
        },
        ("lq", Some(a)) => {
            let q = parse_num::<f64>("lq exponent", a)?;
            sparse_varpro::regularizers::LqFamily::new(q).map_err(|e| cfg(&e.to_string()))?;
            Ok(RegSpec::Lq(q))
        }
        _ => Err(cfg(&format!("unknown regularizer {s:?} (expected l1, group[:size], trace, lq:<q>)"))),
    }
}

/// Comma-separated `name[:key=value...]` entries; at least one.
pub fn parse_solvers(s: &str) -> Result<Vec<SolverSpec>, BenchError> {
    let mut out = Vec::new();
    for entry in s.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let mut parts = entry.split(':');
        let name = parts.next().unwrap_or_default();
        let kind = SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| cfg(&format!("unknown solver {name:?}")))?;
        let mut spec = SolverSpec::new(kind);
        for opt in parts {
            let (k, v) = opt
                .split_once('=')
                .ok_or_else(|| cfg(&format!("solver option {opt:?} is not key=value")))?;
            spec.options.push((k.to_string(), v.to_string()));
        }
        spec.check_keys(SolverSpec::allowed_options(kind))?;
        out.push(spec);
    }
    if out.is_empty() {
        return Err(cfg("solver list is empty"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn parses_problem_specs() {
        assert_eq!(
            parse_problem("synth:m=10,n=20,s=3").unwrap(),
            ProblemSpec::Synth { m: 10, n: 20, s: 3, noise: 0.0 }
        );
        assert_eq!(
            parse_problem("libsvm:data/a,b.txt,standardize").unwrap(),
            ProblemSpec::Libsvm { path: "data/a,b.txt".into(), standardize: true }
        );
        assert!(parse_problem("synth:m=10,n=2,s=3").is_err());
        assert!(parse_problem("random-graph:nodes=4,edges=7").is_err());
        assert!(parse_problem("synth:m=10,n=20,s=3,k=1").is_err());
        assert!(parse_problem("bogus:").is_err());
    }

    #[test]
    fn parses_regularizers_and_solvers() {
        assert_eq!(parse_reg("lq:0.8").unwrap(), RegSpec::Lq(0.8));
        assert_eq!(parse_reg("group:3").unwrap(), RegSpec::Group(3));
        assert!(parse_reg("lq:0.5").is_err());
        assert!(parse_reg("l2").is_err());
        let s = parse_solvers("noncvx-pro:route=dual:memory=20, irls:eps=1e-6").unwrap();
        assert_eq!(s[0].label(), "noncvx-pro:route=dual:memory=20");
        assert_eq!(s[1].option::<f64>("eps").unwrap(), Some(1e-6));
        assert!(parse_solvers("").is_err());
        assert!(parse_solvers("ista:step=1").is_err());
    }

    #[test]
    fn lambda_settings() {
        let base = settings(&[("problem", "synth:m=5,n=5,s=1"), ("solvers", "cd")]);
        let c = BenchConfig::from_settings(&base).unwrap();
        assert_eq!(c.lambda, LambdaSpec::Fraction(10.0));
        let mut s = base.clone();
        s.insert("lambda-frac".into(), "0".into());
        assert!(BenchConfig::from_settings(&s).is_err());
        s.insert("lambda".into(), "0".into());
        assert!(BenchConfig::from_settings(&s).is_err());
        let merged = merge_settings(s, settings(&[("lambda", "0")]));
        assert_eq!(BenchConfig::from_settings(&merged).unwrap().lambda, LambdaSpec::Absolute(0.0));
    }

    #[test]
    fn config_file_and_overrides() {
        let file = parse_config_file("# race\nproblem = synth:m=5,n=8,s=2\nsolvers=cd,ista\nseed=3\n").unwrap();
        let merged = merge_settings(file, settings(&[("seed", "9")]));
        let c = BenchConfig::from_settings(&merged).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.solvers.len(), 2);
        assert!(parse_config_file("nonsense").is_err());
        assert!(BenchConfig::from_settings(&settings(&[("problme", "x")])).is_err());
    }
}
