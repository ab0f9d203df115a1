mod table;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::Value;

use stieltjes::corpus;
use stieltjes::exponential::{exp_extended, exp_series, ExpG};
use stieltjes::monomials::{monomial, monomial_bounds, MonomialRequest};
use stieltjes::ode::{residual, solve, ProblemLiteral, SolveOptions};
use stieltjes::series::{eval_series, SeriesLiteral};
use stieltjes::verify::{self, run_suite, Fixture, SuiteReport, CORPUS_SIZE};
use stieltjes::{Derivator, Error, PointClass, Scalar};

use table::{Cell, Format, Table};

const SEED_ENV: &str = "STIELTJES_SEED";

#[derive(Parser, Debug)]
#[command(name = "stieltjes", version, about = "Calculus with respect to a derivator g")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate g, its jump and the point class on a grid.
    Eval(Common),
    /// Tabulate the g-monomial g_n centered at x0, with its bounds.
    Monomial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
    },
    /// Evaluate a g-monomial series given as a JSON literal.
    Series {
        #[command(flatten)]
        common: Common,
        /// Series literal: {center, coeffs, tail: {kind, lambda, scale}, growth_cert}.
        #[arg(long)]
        series: PathBuf,
    },
    /// Evaluate the g-exponential exp_g(lambda; x0).
    Exp {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Imaginary part of lambda.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        lambda_im: f64,
    },
    /// Solve a linear Stieltjes ODE with constant coefficients.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Problem file: {derivator, x0, m, lambdas, initial, forcing}.
        #[arg(long)]
        problem: PathBuf,
    },
    /// Run verification suites and report the largest deviations.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite name, or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Derivator config file, `random` or `random:SEED/INDEX`.
    #[arg(long)]
    derivator: Option<String>,
    /// Center; defaults to 0, or to the center drawn with a random derivator.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    /// Evaluation grid `lo:hi:n` with n >= 2 evenly spaced points.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
    grid: Option<Grid>,
    #[arg(long, default_value_t = 1e-12, value_parser = parse_tol)]
    tol: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for random derivators; the STIELTJES_SEED variable overrides it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected lo:hi:n, got {s:?}"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("bad grid start {lo:?}: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("bad grid end {hi:?}: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("bad grid size {n:?}: {e}"))?;
    if n < 2 {
        return Err(format!("grid needs at least 2 points, got {n}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("grid needs finite lo < hi, got {lo}:{hi}"));
    }
    Ok(Grid { lo, hi, n })
}

fn parse_tol(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("bad tolerance {s:?}: {e}"))?;
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(format!("tolerance must be positive, got {t}"))
    }
}

/// Ways a run can end other than success.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Suites(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

impl Common {
    fn seed(&self) -> Run<u64> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| invalid(format!("InvalidConfig: {SEED_ENV}={v:?}: {e}"))),
            Err(_) => Ok(self.seed),
        }
    }

    fn grid(&self) -> Run<Vec<f64>> {
        self.grid
            .map(|g| g.points())
            .ok_or_else(|| invalid("InvalidConfig: --grid lo:hi:n is required"))
    }

    /// The derivator and the center to use with it.
    fn load(&self) -> Run<(Derivator, f64)> {
        let handle = self
            .derivator
            .as_deref()
            .ok_or_else(|| invalid("InvalidConfig: --derivator is required"))?;
        let (g, center) = if handle == "random" {
            let e = corpus::entry(self.seed()?, 0);
            (e.derivator, e.center)
        } else if let Some((seed, index)) = corpus::parse_path(handle) {
            let e = corpus::entry(seed, index);
            (e.derivator, e.center)
        } else if handle.starts_with("random") {
            return Err(invalid(format!(
                "InvalidConfig: expected random or random:SEED/INDEX, got {handle:?}"
            )));
        } else {
            (Derivator::from_json(&read(Path::new(handle))?)?, 0.0)
        };
        let x0 = self.x0.unwrap_or(center);
        g.check_window(x0)?;
        Ok((g, x0))
    }
}

fn read(path: &Path) -> Run<String> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("InvalidConfig: cannot read {}: {e}", path.display())))
}

fn check_grid(g: &Derivator, xs: &[f64]) -> Run<()> {
    for &x in [xs.first(), xs.last()].into_iter().flatten() {
        g.check_window(x)?;
    }
    Ok(())
}

fn status<T>(r: &stieltjes::Result<T>) -> Cell {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => e.name().into(),
    }
}

fn class_name(c: PointClass) -> &'static str {
    match c {
        PointClass::Jump => "jump",
        PointClass::ConstantInterior { .. } => "constant_interior",
        PointClass::LeftEndpoint => "left_endpoint",
        PointClass::RightEndpoint => "right_endpoint",
        PointClass::Regular => "regular",
    }
}

fn eval_table(c: &Common) -> Run<Table> {
    let (g, _) = c.load()?;
    let xs = c.grid()?;
    check_grid(&g, &xs)?;
    let mut t = Table::new(&["x", "value", "jump", "class"]);
    for x in xs {
        t.push(vec![x.into(), g.eval(x)?.into(), g.delta(x)?.into(), class_name(g.classify(x)?).into()]);
    }
    Ok(t)
}

fn monomial_table(c: &Common, n: usize) -> Run<Table> {
    let (g, x0) = c.load()?;
    let xs = c.grid()?;
    check_grid(&g, &xs)?;
    let req = MonomialRequest::new(x0, n);
    let mut t = Table::new(&["x", "value", "lower_bound", "upper_bound", "status"]);
    for x in xs {
        let v = monomial(&g, &req, x);
        let b = monomial_bounds(&g, x0, n, x);
        let st = if v.is_err() { status(&v) } else { status(&b) };
        let (lo, hi) = b.ok().unzip();
        t.push(vec![x.into(), v.ok().into(), lo.into(), hi.into(), st]);
    }
    t.meta.insert("x0".into(), x0.into());
    t.meta.insert("n".into(), n.into());
    Ok(t)
}

fn series_table(c: &Common, path: &Path) -> Run<Table> {
    let (g, _) = c.load()?;
    let lit: SeriesLiteral = serde_json::from_str(&read(path)?)
        .map_err(|e| invalid(format!("InvalidConfig: series literal {}: {e}", path.display())))?;
    let s = lit.into_series(g)?;
    let xs = c.grid()?;
    check_grid(&s.g, &xs)?;
    let mut t = Table::new(&["x", "value", "tail_bound", "terms", "certified", "status"]);
    for x in xs {
        let r = eval_series(&s, x, c.tol);
        let st = status(&r);
        match r {
            Ok(v) => t.push(vec![x.into(), v.value.into(), v.tail_bound.into(), Cell::Int(v.terms as u64), v.certified.into(), st]),
            Err(_) => t.push(vec![x.into(), Cell::Empty, Cell::Empty, Cell::Empty, false.into(), st]),
        }
    }
    t.meta.insert("center".into(), s.center.into());
    Ok(t)
}

/// Series value inside the convergence domain, the product extension
/// (uncertified as a series) elsewhere.
fn exp_rows<S: Scalar>(g: &Derivator, x0: f64, lambda: S, xs: &[f64], tol: f64, parts: impl Fn(S) -> (f64, f64)) -> Run<Table> {
    let e = ExpG::new(g.clone(), lambda, x0)?;
    let mut t = Table::new(&["x", "value", "value_im", "in_domain", "status"]);
    for &x in xs {
        let inside = e.domain.contains(x);
        let r = if inside { exp_series(&e, x, tol) } else { exp_extended(g, x0, lambda, x) };
        let st = status(&r);
        let (re, im) = r.ok().map(&parts).unzip();
        t.push(vec![x.into(), re.into(), im.into(), inside.into(), st]);
    }
    t.meta.insert("domain".into(), serde_json::to_value(e.domain).expect("plain data"));
    Ok(t)
}

fn exp_table(c: &Common, lambda: f64, lambda_im: f64) -> Run<Table> {
    let (g, x0) = c.load()?;
    let xs = c.grid()?;
    check_grid(&g, &xs)?;
    if lambda_im == 0.0 {
        exp_rows(&g, x0, lambda, &xs, c.tol, |v| (v, 0.0))
    } else {
        exp_rows(&g, x0, Complex64::new(lambda, lambda_im), &xs, c.tol, |v| (v.re, v.im))
    }
}

fn solve_table(c: &Common, path: &Path) -> Run<Table> {
    let lit = ProblemLiteral::from_json(&read(path)?)?;
    let p = lit.into_problem(path.parent())?;
    let xs = c.grid()?;
    check_grid(&p.g, &xs)?;
    let opts = SolveOptions {
        abs_tol: c.tol,
        span: Some((xs[0], xs[xs.len() - 1])),
        ..Default::default()
    };
    let sol = solve(&p, &opts)?;
    let mut t = Table::new(&["x", "value", "residual", "certified", "status"]);
    for x in xs {
        let v = sol.eval(x, c.tol).and_then(|_| eval_series(&sol.series, x, c.tol));
        let st = status(&v);
        let res = v.as_ref().ok().and_then(|_| residual(&p, &sol, &[x]).ok());
        let certified = sol.validity.certified && v.as_ref().is_ok_and(|v| v.certified);
        t.push(vec![x.into(), v.ok().map(|v| v.value).into(), res.into(), certified.into(), st]);
    }
    let r = &sol.residual_report;
    t.meta.insert("x0".into(), p.center.into());
    t.meta.insert("terms".into(), sol.series.coeffs.len().into());
    t.meta.insert("growth_m".into(), sol.growth_m.map_or(Value::Null, Value::from));
    t.meta.insert("validity".into(), serde_json::to_value(sol.validity).expect("plain data"));
    t.meta.insert("residual_max".into(), table::json_value(&r.max.into()));
    t.meta.insert("residual_max_relative".into(), table::json_value(&r.max_relative.into()));
    t.meta.insert("residual_points".into(), r.points.into());
    Ok(t)
}

fn verify_table(c: &Common, suite: &str) -> Run<Table> {
    let seed = c.seed()?;
    let names: Vec<&str> = if suite == "all" {
        verify::SUITES.to_vec()
    } else if verify::SUITES.contains(&suite) {
        vec![suite]
    } else {
        return Err(invalid(format!(
            "InvalidConfig: unknown suite {suite:?}; expected all or one of {}",
            verify::SUITES.join(", ")
        )));
    };
    let fixtures = match c.derivator.as_deref() {
        None | Some("random") => Vec::new(),
        Some(handle) => {
            let (g, x0) = c.load()?;
            vec![Fixture::new(g, x0, handle)]
        }
    };
    let mut t = Table::new(&["suite", "seed", "passed", "max_deviation", "tolerance", "points", "worst"]);
    let mut failures = Vec::new();
    for name in names {
        let r: SuiteReport = run_suite(name, seed, &fixtures)?;
        t.push(vec![
            name.into(),
            Cell::Int(seed),
            r.passed.into(),
            r.max_deviation.into(),
            r.tolerance.into(),
            Cell::Int(r.points as u64),
            r.worst.clone().into(),
        ]);
        if let Err(e) = r.into_result() {
            failures.push(e.to_string());
        }
    }
    t.meta.insert("corpus_size".into(), CORPUS_SIZE.into());
    if failures.is_empty() {
        Ok(t)
    } else {
        // the report still goes out before the failure is signalled
        emit(c, &t)?;
        Err(Failure::Suites(failures))
    }
}

fn emit(c: &Common, t: &Table) -> Run<()> {
    let io = |e: std::io::Error| invalid(format!("cannot write output: {e}"));
    match &c.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).map_err(io)?);
            t.write(c.format, &mut w).map_err(io)?;
            w.flush().map_err(io)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            t.write(c.format, &mut w).map_err(io)
        }
    }
}

fn run(cli: Cli) -> Run<()> {
    let (common, table) = match &cli.command {
        Command::Eval(c) => (c, eval_table(c)?),
        Command::Monomial { common, n } => (common, monomial_table(common, *n)?),
        Command::Series { common, series } => (common, series_table(common, series)?),
        Command::Exp { common, lambda, lambda_im } => (common, exp_table(common, *lambda, *lambda_im)?),
        Command::Solve { common, problem } => (common, solve_table(common, problem)?),
        Command::Verify { common, suite } => (common, verify_table(common, suite)?),
    };
    emit(common, &table)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Suites(msgs)) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            ExitCode::from(3)
        }
    }
}
