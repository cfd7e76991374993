//! Command-line front end.
//!
//! Every command prints either a complete result on stdout and exits 0,
//! or a message on stderr and exits non-zero with nothing on stdout.

use std::ffi::OsString;
use std::fmt;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::BridgeError;
use crate::feynman_kac::{g_ratio_mc, s_mc, McConfig, McEstimate};
use crate::functionals::{
    j_transform, k_growth, k_transform, n_functional, newton_growth, newton_potential, s_functional,
    BridgeSpec,
};
use crate::growth::GrowthDiagnosis;
use crate::kernels::{f_integral, heat_kernel, j_kernel, k0, Dimension};
use crate::potentials::{lp_halfd_norm, Potential, Support};
use crate::quadrature::{Estimate, InfiniteMap, QuadratureSpec, Status};
use crate::real::{self, Real};
use crate::sup::{sup_search, SupDomain, SupResult, SupStrategy};
use crate::verify::{run_suite, SuiteConfig, SuiteReport, SUITES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bridgepot",
    version,
    about = "Kernels, bridge functionals and comparability checks for Schrödinger heat kernels"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = SuiteConfig::default().seed)]
    pub seed: u64,
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Spatial dimension for commands without explicit points.
    #[arg(long, global = true, default_value_t = 3)]
    pub d: u32,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub abs_tol: f64,
    #[arg(long, global = true, default_value_t = 2000)]
    pub max_subdivisions: usize,
    /// Record wall-clock runtimes in reports.
    #[arg(long, global = true)]
    pub timing: bool,
    /// Reduced grids and sample counts.
    #[arg(long, global = true)]
    pub quick: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pointwise kernel evaluation.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Functional of a potential at given arguments.
    Transform {
        #[arg(value_enum)]
        kind: TransformKind,
        #[command(flatten)]
        args: TransformArgs,
    },
    /// Supremum search or norm of a potential.
    Norm {
        #[arg(value_enum)]
        kind: NormKind,
        #[command(flatten)]
        args: NormArgs,
    },
    /// Brownian-bridge Monte Carlo.
    Simulate {
        #[arg(value_enum)]
        kind: SimulateKind,
        #[command(flatten)]
        args: SimulateArgs,
    },
    /// Runs a verification suite, or `all`.
    Verify { suite: String },
    /// Full report on the potential with finite Newton potential and infinite K-norm.
    Counterexample,
}

#[derive(Debug, Subcommand)]
pub enum KernelCmd {
    /// `K₀(x, y)`.
    K0(PairArgs),
    /// `J(x, y)`.
    J(PairArgs),
    /// `f(a, b; β, c)`.
    F(FArgs),
    /// Heat kernel `g(t, x, y)`.
    G(GArgs),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|c| real::parse(c.trim()).ok_or_else(|| format!("not a number: {c:?}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Point)
    }
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Comma-separated coordinates; repeat for a grid.
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub x: Vec<Point>,
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub y: Vec<Point>,
}

#[derive(Debug, Args)]
pub struct FArgs {
    #[arg(long, required = true)]
    pub a: Vec<f64>,
    #[arg(long, required = true)]
    pub b: Vec<f64>,
    #[arg(long, required = true)]
    pub beta: Vec<f64>,
    #[arg(long, required = true)]
    pub c: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct GArgs {
    #[arg(long, required = true)]
    pub t: Vec<f64>,
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub x: Vec<Point>,
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub y: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    K,
    Newton,
    N,
    S,
    Jt,
}

#[derive(Debug, Args)]
pub struct PotentialArg {
    /// Inline JSON or a path to a JSON file.
    #[arg(long)]
    pub potential: String,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub potential: PotentialArg,
    #[arg(long, required = true, allow_hyphen_values = true)]
    pub x: Vec<Point>,
    /// Second point (origin if omitted).
    #[arg(long, allow_hyphen_values = true)]
    pub y: Vec<Point>,
    /// Time, for `n` and `s`.
    #[arg(long)]
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormKind {
    K,
    Newton,
    Ldh,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    #[command(flatten)]
    pub potential: PotentialArg,
    /// Centre of the search region (origin if omitted).
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<Point>,
    /// Length scale `ρ`: `x` ranges over `|x - c| ≤ 2ρ`, `|y|` over `[0, 10/ρ]`.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = SupStrategy::default().grid_density)]
    pub grid_density: usize,
    #[arg(long, default_value_t = SupStrategy::default().multistarts)]
    pub multistarts: usize,
    #[arg(long, default_value_t = SupStrategy::default().local_refinement)]
    pub local_refinement: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateKind {
    Ratio,
    S,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub potential: PotentialArg,
    #[arg(long)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Point,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Point,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 256)]
    pub steps: usize,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(String),
}

impl From<BridgeError> for Failure {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Parse(_) | BridgeError::Io(_) | BridgeError::UnknownSuite(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Compute(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::fail(EXIT_USAGE, text)
            } else {
                Outcome::ok(text)
            };
        }
    };
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Outcome::fail(EXIT_USAGE, "error: --threads must be at least 1\n".into());
        }
        // a pool configured by an earlier call in the same process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli) {
        Ok(Report { text, passed }) => Outcome {
            code: if passed { EXIT_OK } else { EXIT_FAILURE },
            stdout: text,
            stderr: String::new(),
        },
        Err(Failure::Usage(m)) => Outcome::fail(EXIT_USAGE, format!("error: {m}\n")),
        Err(Failure::Compute(m)) => Outcome::fail(EXIT_FAILURE, format!("error: {m}\n")),
    }
}

struct Report {
    text: String,
    passed: bool,
}

impl Report {
    fn passed(text: String) -> Self {
        Self { text, passed: true }
    }
}

/// One output row: named inputs followed by `value, error, status`.
struct Row {
    inputs: Vec<(String, f64)>,
    value: f64,
    error: f64,
    status: Status,
    extra: Map<String, Value>,
}

impl Row {
    fn new(inputs: Vec<(String, f64)>, est: Estimate) -> Self {
        Self {
            inputs,
            value: est.value,
            error: est.error_bound,
            status: est.status,
            extra: Map::new(),
        }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("value".into(), json!(Real(self.value)));
        m.insert("error".into(), json!(Real(self.error)));
        m.insert("status".into(), json!(self.status));
        for (k, v) in &self.inputs {
            m.insert(k.clone(), json!(Real(*v)));
        }
        m.extend(self.extra.clone());
        Value::Object(m)
    }
}

fn quadrature(g: &Global) -> CliResult<QuadratureSpec> {
    Ok(QuadratureSpec::new(
        g.rel_tol,
        g.abs_tol,
        g.max_subdivisions,
        InfiniteMap::LogMap,
    )?)
}

fn coords(name: &str, p: &[f64]) -> Vec<(String, f64)> {
    p.iter()
        .enumerate()
        .map(|(i, v)| (format!("{name}{}", i + 1), *v))
        .collect()
}

fn load_potential(arg: &PotentialArg) -> CliResult<Potential> {
    let text = if arg.potential.trim_start().starts_with('{') {
        arg.potential.clone()
    } else {
        std::fs::read_to_string(&arg.potential)
            .map_err(|e| Failure::Usage(format!("cannot read potential file {}: {e}", arg.potential)))?
    };
    Ok(Potential::from_json(&text)?)
}

fn execute(cli: &Cli) -> CliResult<Report> {
    let g = &cli.global;
    match &cli.command {
        Command::Kernel(k) => rows_report(g, kernel(g, k)?),
        Command::Transform { kind, args } => rows_report(g, transform(g, *kind, args)?),
        Command::Norm { kind, args } => rows_report(g, vec![norm(g, *kind, args)?]),
        Command::Simulate { kind, args } => rows_report(g, vec![simulate(g, *kind, args)?]),
        Command::Verify { suite } => verify(g, suite),
        Command::Counterexample => verify(g, "counterexample"),
    }
}

fn product<A: Clone, B: Clone>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| (x.clone(), y.clone())))
        .collect()
}

fn kernel(g: &Global, cmd: &KernelCmd) -> CliResult<Vec<Row>> {
    let q = quadrature(g)?;
    let mut rows = Vec::new();
    match cmd {
        KernelCmd::K0(p) | KernelCmd::J(p) => {
            for (x, y) in product(&p.x, &p.y) {
                let d = Dimension::new(x.0.len() as u32)?;
                let est = match cmd {
                    KernelCmd::K0(_) => Estimate::exact(k0(&x.0, &y.0, d)?),
                    _ => j_kernel(&x.0, &y.0, d, &q)?,
                };
                rows.push(Row::new([coords("x", &x.0), coords("y", &y.0)].concat(), est));
            }
        }
        KernelCmd::F(f) => {
            for (a, b) in product(&f.a, &f.b) {
                for (beta, c) in product(&f.beta, &f.c) {
                    let est = f_integral(a, b, beta, c, &q)?;
                    let inputs = vec![
                        ("a".into(), a),
                        ("b".into(), b),
                        ("beta".into(), beta),
                        ("c".into(), c),
                    ];
                    rows.push(Row::new(inputs, est));
                }
            }
        }
        KernelCmd::G(k) => {
            for t in &k.t {
                for (x, y) in product(&k.x, &k.y) {
                    let d = Dimension::new(x.0.len() as u32)?;
                    let est = Estimate::exact(heat_kernel(*t, &x.0, &y.0, d)?);
                    let inputs = [vec![("t".into(), *t)], coords("x", &x.0), coords("y", &y.0)].concat();
                    rows.push(Row::new(inputs, est));
                }
            }
        }
    }
    Ok(rows)
}

fn transform(g: &Global, kind: TransformKind, args: &TransformArgs) -> CliResult<Vec<Row>> {
    let v = load_potential(&args.potential)?;
    let q = quadrature(g)?;
    let ys = if args.y.is_empty() || kind == TransformKind::Newton {
        vec![Point(vec![0.0; args.x[0].0.len()])]
    } else {
        args.y.clone()
    };
    let needs_t = matches!(kind, TransformKind::N | TransformKind::S);
    if needs_t && args.t.is_empty() {
        return Err(Failure::Usage("--t is required for `n` and `s`".into()));
    }
    let ts = if needs_t { args.t.clone() } else { vec![f64::NAN] };
    let mut rows = Vec::new();
    for t in ts {
        for (x, y) in product(&args.x, &ys) {
            let est = match kind {
                TransformKind::K => k_transform(&v, &x.0, &y.0, &q)?,
                TransformKind::Jt => j_transform(&v, &x.0, &y.0, &q)?,
                TransformKind::Newton => newton_potential(&v, &x.0, &q)?,
                TransformKind::N | TransformKind::S => {
                    let spec = BridgeSpec::new(t, x.0.clone(), y.0.clone())?;
                    if kind == TransformKind::N {
                        n_functional(&v, &spec, &q)?
                    } else {
                        s_functional(&v, &spec, &q)?
                    }
                }
            };
            require_converged(&est)?;
            let mut inputs = Vec::new();
            if needs_t {
                inputs.push(("t".into(), t));
            }
            inputs.extend(coords("x", &x.0));
            if kind != TransformKind::Newton {
                inputs.extend(coords("y", &y.0));
            }
            rows.push(Row::new(inputs, est));
        }
    }
    Ok(rows)
}

fn require_converged(est: &Estimate) -> CliResult<()> {
    match est.status {
        Status::Converged => Ok(()),
        Status::Diverged => Err(Failure::Compute("the integral diverges (value is infinite)".into())),
        Status::MaxSubdivisionsReached => Err(Failure::Compute(format!(
            "quadrature did not reach the requested tolerance (value {}, error bound {})",
            real::format(est.value),
            real::format(est.error_bound)
        ))),
    }
}

fn planar_points(center: &[f64], a: f64, b: f64, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let d = center.len();
    let mut x = center.to_vec();
    x[0] += a;
    let mut y = vec![0.0; d];
    y[0] = b * theta.cos();
    y[1] = b * theta.sin();
    (x, y)
}

fn norm(g: &Global, kind: NormKind, args: &NormArgs) -> CliResult<Row> {
    let v = load_potential(&args.potential)?;
    let q = quadrature(g)?;
    let d = Dimension::new(g.d)?;
    v.check_dimension(d)?;
    if kind == NormKind::Ldh {
        let est = lp_halfd_norm(&v, d, &q)?;
        if est.status == Status::MaxSubdivisionsReached {
            require_converged(&est)?;
        }
        return Ok(Row::new(vec![("d".into(), g.d as f64)], est));
    }
    let center = args.center.clone().map(|p| p.0).unwrap_or_else(|| vec![0.0; d.as_usize()]);
    d.check(&center)?;
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Failure::Usage(format!("--scale must be positive, got {}", args.scale)));
    }
    let rho = args.scale;
    let strategy = SupStrategy {
        grid_density: args.grid_density,
        multistarts: args.multistarts,
        local_refinement: args.local_refinement,
    };
    let eval = |u: &[f64]| -> crate::Result<Estimate> {
        match kind {
            NormKind::K => {
                let (x, y) = planar_points(&center, u[0], u[1], u[2]);
                k_transform(&v, &x, &y, &q)
            }
            _ => newton_potential(&v, &planar_points(&center, u[0], 0.0, 0.0).0, &q),
        }
    };
    let domain = match kind {
        NormKind::K => SupDomain::new(vec![0.0; 3], vec![2.0 * rho, 10.0 / rho, std::f64::consts::PI], vec![false; 3])?,
        _ => SupDomain::new(vec![0.0], vec![2.0 * rho], vec![false])?,
    };
    let sup = sup_search(
        |u| match eval(u) {
            Ok(e) => e.value,
            Err(_) => f64::NAN,
        },
        &domain,
        &strategy,
    )?;
    let at = eval(&sup.arg)?;
    let mut est = Estimate {
        value: sup.value,
        error_bound: at.error_bound,
        status: at.status,
    };
    if sup.value.is_infinite() {
        est = Estimate::infinite();
    } else {
        require_converged(&est)?;
    }
    let mut row = Row::new(vec![("d".into(), g.d as f64)], est);
    row.extra.insert("arg".into(), json!(sup_arg_points(kind, &center, &sup)));
    row.extra.insert("evaluations".into(), json!(sup.evaluations));
    row.extra.insert("boundary_hit".into(), json!(sup.boundary_hit));
    if matches!(v.support(), Support::Unbounded) {
        row.extra.insert("diagnosis".into(), json!(diagnosis_at(&v, kind, &center, &sup, &q)?));
    }
    Ok(row)
}

fn sup_arg_points(kind: NormKind, center: &[f64], sup: &SupResult) -> Value {
    match kind {
        NormKind::K => {
            let (x, y) = planar_points(center, sup.arg[0], sup.arg[1], sup.arg[2]);
            json!({"x": x, "y": y})
        }
        _ => json!({"x": planar_points(center, sup.arg[0], 0.0, 0.0).0}),
    }
}

fn diagnosis_at(
    v: &Potential,
    kind: NormKind,
    center: &[f64],
    sup: &SupResult,
    q: &QuadratureSpec,
) -> CliResult<GrowthDiagnosis> {
    let radii: Vec<f64> = (2..=5).map(|k| 10f64.powi(k)).collect();
    Ok(match kind {
        NormKind::K => {
            let (x, y) = planar_points(center, sup.arg[0], sup.arg[1], sup.arg[2]);
            k_growth(v, &x, &y, &radii, q)?
        }
        _ => newton_growth(v, &planar_points(center, sup.arg[0], 0.0, 0.0).0, &radii, q)?,
    })
}

fn simulate(g: &Global, kind: SimulateKind, args: &SimulateArgs) -> CliResult<Row> {
    let v = load_potential(&args.potential)?;
    let mc = McConfig::new(args.paths, args.steps, g.seed)?;
    let spec = BridgeSpec::new(args.t, args.x.0.clone(), args.y.0.clone())?;
    let est: McEstimate = match kind {
        SimulateKind::Ratio => g_ratio_mc(&v, &spec, &mc)?,
        SimulateKind::S => s_mc(&v, &spec, &mc)?,
    };
    let inputs = [vec![("t".into(), args.t)], coords("x", &args.x.0), coords("y", &args.y.0)].concat();
    let mut row = Row::new(
        inputs,
        Estimate {
            value: est.mean,
            error_bound: est.std_error,
            status: Status::Converged,
        },
    );
    row.extra.insert("paths".into(), json!(est.paths));
    row.extra.insert("steps".into(), json!(args.steps));
    row.extra.insert("seed".into(), json!(g.seed));
    Ok(row)
}

fn rows_report(g: &Global, rows: Vec<Row>) -> CliResult<Report> {
    let text = match g.format {
        Format::Json => {
            let value = if rows.len() == 1 {
                rows[0].to_json()
            } else {
                Value::Array(rows.iter().map(Row::to_json).collect())
            };
            to_json_line(&value)
        }
        Format::Csv => {
            let mut header: Vec<String> = rows[0].inputs.iter().map(|(k, _)| k.clone()).collect();
            header.extend(["value", "error", "status"].map(String::from));
            let body = rows.iter().map(|r| {
                let mut rec: Vec<String> = r.inputs.iter().map(|(_, v)| real::format(*v)).collect();
                rec.push(real::format(r.value));
                rec.push(real::format(r.error));
                rec.push(status_name(r.status));
                rec
            });
            write_csv(header, body)?
        }
    };
    Ok(Report::passed(text))
}

fn status_name(s: Status) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_csv<I: IntoIterator<Item = Vec<String>>>(header: Vec<String>, rows: I) -> CliResult<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Compute(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 fields"))
}

fn verify(g: &Global, suite: &str) -> CliResult<Report> {
    let cfg = SuiteConfig {
        seed: g.seed,
        quick: g.quick,
        timing: g.timing,
    };
    let ids: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let reports = ids
        .iter()
        .map(|id| run_suite(id, &cfg))
        .collect::<crate::Result<Vec<SuiteReport>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let text = match g.format {
        Format::Json if reports.len() == 1 => to_json_line(&reports[0]),
        Format::Json => to_json_line(&reports),
        Format::Csv => {
            let header = ["suite", "name", "value", "bound", "passed"].map(String::from).to_vec();
            let rows = reports.iter().flat_map(|r| {
                r.findings.iter().map(move |f| {
                    vec![
                        r.suite.clone(),
                        f.name.clone(),
                        real::format(f.value),
                        real::format(f.bound),
                        f.passed.to_string(),
                    ]
                })
            });
            write_csv(header, rows)?
        }
    };
    Ok(Report { text, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        run(std::iter::once("bridgepot").chain(args.iter().copied()))
    }

    #[test]
    fn point_parsing() {
        assert_eq!("1,-2.5,inf".parse::<Point>().unwrap().0, vec![1.0, -2.5, f64::INFINITY]);
        assert!("1,,2".parse::<Point>().is_err());
    }

    #[test]
    fn k0_record() {
        let out = run_args(&["kernel", "k0", "--d", "4", "--x", "2,0,0,0", "--y", "0,0,0,0"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let v: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["status"], "converged");
        assert_eq!(v["value"].as_f64().unwrap(), 0.25);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["frobnicate"]).code, EXIT_USAGE);
        let bad = run_args(&["transform", "k", "--potential", "{\"type\":\"nope\"}", "--x", "0,0,0"]);
        assert_eq!(bad.code, EXIT_USAGE);
        assert!(bad.stdout.is_empty());
        assert_eq!(run_args(&["verify", "nope"]).code, EXIT_USAGE);
    }

    #[test]
    fn divergence_exits_1_without_output() {
        let out = run_args(&[
            "transform",
            "k",
            "--potential",
            r#"{"type":"counterexample_a"}"#,
            "--x",
            "0,0,0,0",
            "--y",
            "1,0,0,0",
            "--rel-tol",
            "1e-6",
        ]);
        assert_eq!(out.code, EXIT_FAILURE);
        assert!(out.stdout.is_empty());
    }

    #[test]
    fn csv_grid() {
        let out = run_args(&["kernel", "f", "--a", "1", "--a", "2", "--b", "1", "--beta", "1.5", "--c", "1", "--format", "csv"]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let lines: Vec<&str> = out.stdout.lines().collect();
        assert_eq!(lines[0], "a,b,beta,c,value,error,status");
        assert_eq!(lines.len(), 3);
        assert!(!out.stdout.contains('\r'));
    }
}
