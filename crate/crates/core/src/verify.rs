//! Named verification suites. Each compares two independent routes over a
//! set of fixtures and reports the largest deviation against a tolerance.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus;
use crate::derivator::{Derivator, PointClass};
use crate::error::{Error, Result};
use crate::exponential::{exp_extended, exp_product, exp_series, ExpG};
use crate::fixtures;
use crate::integral::{g_derivative, DerivativeOptions, Quadrature};
use crate::monomials::{
    change_center, monomial, monomial_bounds, monomial_by_h_recursion,
    monomial_by_power_recursion, normalized_monomials, scale_by_factorial, MonomialOracle,
    MonomialRequest, Route,
};
use crate::scalar::factorial;
use crate::ode::{default_grid, residual, solve, LinearOdeProblem, SolveOptions};

pub const SUITES: [&str; 8] = [
    "bounds",
    "decomposition",
    "center-change",
    "hrecursion",
    "exp-product",
    "exp-ode",
    "ode-residual",
    "gm-convergence",
];

/// Size of the randomized corpus used when no fixture is given.
pub const CORPUS_SIZE: usize = 20;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub derivator: Derivator,
    pub center: f64,
    /// Reproduction handle: a file path, `random:SEED/INDEX` or a fixture name.
    pub path: String,
}

impl Fixture {
    pub fn new(derivator: Derivator, center: f64, path: impl Into<String>) -> Self {
        Fixture {
            derivator,
            center,
            path: path.into(),
        }
    }
}

pub fn random_fixtures(seed: u64, count: usize) -> Vec<Fixture> {
    corpus::corpus(seed, count)
        .into_iter()
        .map(|e| {
            let path = e.path();
            Fixture::new(e.derivator, e.center, path)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub points: usize,
    pub passed: bool,
    /// Fixture and sample at the largest deviation or first failure.
    pub worst: String,
}

impl SuiteReport {
    pub fn into_result(self) -> Result<SuiteReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::SuiteFailed(format!(
                "suite {} (seed {}): deviation {:e} > tolerance {:e} at {}",
                self.suite, self.seed, self.max_deviation, self.tolerance, self.worst
            )))
        }
    }
}

struct Tracker {
    max: f64,
    worst: String,
    points: usize,
    failure: Option<String>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            max: 0.0,
            worst: String::new(),
            points: 0,
            failure: None,
        }
    }

    fn observe(&mut self, dev: f64, fx: &Fixture, detail: impl FnOnce() -> String) {
        self.points += 1;
        if !(dev <= self.max) {
            self.max = dev;
            self.worst = format!("{} ({})", fx.path, detail());
        }
    }

    fn fail(&mut self, fx: &Fixture, why: String) {
        if self.failure.is_none() {
            self.failure = Some(format!("{} ({why})", fx.path));
        }
    }

    fn report(self, suite: &str, seed: u64, tolerance: f64) -> SuiteReport {
        let passed = self.failure.is_none() && self.max <= tolerance;
        SuiteReport {
            suite: suite.to_string(),
            seed,
            max_deviation: self.max,
            tolerance,
            points: self.points,
            passed,
            worst: self.failure.unwrap_or(self.worst),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `k` points on each side of the center reaching the window ends, plus the
/// center itself.
pub fn two_sided_grid(g: &Derivator, x0: f64, k: usize) -> Vec<f64> {
    let (lo, hi) = g.window();
    let mut pts = vec![x0];
    for i in 1..=k {
        let t = i as f64 / k as f64;
        if hi > x0 {
            pts.push(x0 + (hi - x0) * t);
        }
        if lo < x0 {
            pts.push(x0 - (x0 - lo) * t);
        }
    }
    pts.sort_by(f64::total_cmp);
    pts
}

/// Run the suite `name` on `fixtures`, or on its default fixtures (the
/// randomized corpus for `seed`, or the suite's own fixture) when empty.
pub fn run_suite(name: &str, seed: u64, fixtures: &[Fixture]) -> Result<SuiteReport> {
    let default;
    let fx = if fixtures.is_empty() {
        default = default_fixtures(name, seed);
        &default[..]
    } else {
        fixtures
    };
    match name {
        "bounds" => Ok(bounds(seed, fx)),
        "decomposition" => decomposition(seed, fx),
        "center-change" => Ok(center_change(seed, fx)),
        "hrecursion" => Ok(hrecursion(seed, fx)),
        "exp-product" => Ok(exp_product_suite(seed, fx)),
        "exp-ode" => Ok(exp_ode(seed, fx)),
        "ode-residual" => Ok(ode_residual(seed, fx)),
        "gm-convergence" => Ok(gm_convergence(seed, fx)),
        _ => Err(Error::InvalidConfig(format!(
            "unknown suite {name:?}; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

fn default_fixtures(name: &str, seed: u64) -> Vec<Fixture> {
    match name {
        "gm-convergence" => vec![Fixture::new(
            fixtures::geometric_accumulation(),
            0.0,
            "fixture:geometric-accumulation",
        )],
        "exp-product" => {
            let mut v = random_fixtures(seed, CORPUS_SIZE);
            v.push(Fixture::new(fixtures::two_half_jumps(), 0.0, "fixture:two-half-jumps"));
            v
        }
        _ => random_fixtures(seed, CORPUS_SIZE),
    }
}

const BOUNDS_SLACK: f64 = 1e-12;

fn bounds(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    for f in fx {
        let g = &f.derivator;
        for x in two_sided_grid(g, f.center, 21) {
            for n in 0..=8 {
                let v = match monomial(g, &MonomialRequest::new(f.center, n), x) {
                    Ok(v) => v,
                    Err(e) => {
                        t.fail(f, format!("n={n} x={x}: {e}"));
                        continue;
                    }
                };
                let (lo, hi) = monomial_bounds(g, f.center, n, x).expect("grid is in the window");
                let a = v.abs();
                let scale = hi.abs().max(1.0);
                let mut dev = (lo - a).max(a - hi).max(0.0) / scale;
                // sign pattern: nonnegative on the right, (-1)^n on the left
                let wrong_sign = if x >= f.center {
                    v < 0.0
                } else {
                    v != 0.0 && (v < 0.0) != (n % 2 == 1)
                };
                if wrong_sign {
                    dev = dev.max(a / scale);
                }
                t.observe(dev, f, || format!("n={n} x={x} value={v} bounds=({lo}, {hi})"));
            }
        }
    }
    t.report("bounds", seed, BOUNDS_SLACK)
}

fn decomposition(seed: u64, fx: &[Fixture]) -> Result<SuiteReport> {
    let mut t = Tracker::new();
    let q = Quadrature::default();
    for f in fx {
        let g = &f.derivator;
        let oracle = MonomialOracle::new(g, f.center, 8, &q)?;
        for x in two_sided_grid(g, f.center, 21) {
            for n in 0..=8 {
                let req = MonomialRequest::new(f.center, n).route(Route::Decomposition);
                match monomial(g, &req, x) {
                    Ok(v) => {
                        let o = oracle.eval(n, x);
                        t.observe(rel(v, o), f, || format!("n={n} x={x} value={v} oracle={o}"));
                    }
                    Err(e) => t.fail(f, format!("n={n} x={x}: {e}")),
                }
            }
        }
    }
    Ok(t.report("decomposition", seed, 1e-6))
}

fn center_change(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in fx {
        let g = &f.derivator;
        let (lo, hi) = g.window();
        for _ in 0..20 {
            let r = rng.random_range(lo..=hi);
            let s = rng.random_range(lo..=hi);
            let x = rng.random_range(lo..=hi);
            let n = rng.random_range(0..=6usize);
            let direct = monomial(g, &MonomialRequest::new(r, n), x);
            let via = change_center(g, r, s, n, x);
            match (direct, via) {
                (Ok(a), Ok(b)) => {
                    // the binomial sum cancels; deviations count against
                    // the size of its terms
                    let size = center_change_size(g, r, s, n, x);
                    let dev = (a - b).abs() / size.max(a.abs()).max(1.0);
                    t.observe(dev, f, || format!("r={r} s={s} x={x} n={n}: {b} vs {a}"))
                }
                (Err(e), _) | (_, Err(e)) => t.fail(f, format!("r={r} s={s} x={x} n={n}: {e}")),
            }
        }
    }
    t.report("center-change", seed, 1e-8)
}

// sum_k C(n,k) |g_{r,k}(s)| |g_{s,n-k}(x)|
fn center_change_size(g: &Derivator, r: f64, s: f64, n: usize, x: f64) -> f64 {
    let ur = normalized_monomials(g, r, s, n);
    let us = normalized_monomials(g, s, x, n);
    let sum: f64 = (0..=n).map(|k| (ur[k] * us[n - k]).abs()).sum();
    scale_by_factorial(sum, n)
}

fn hrecursion(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let q = Quadrature::default();
    for f in fx {
        let g = &f.derivator;
        for x in two_sided_grid(g, f.center, 3) {
            for n in 1..=6 {
                let want = match monomial(g, &MonomialRequest::new(f.center, n), x) {
                    Ok(v) => v,
                    Err(e) => {
                        t.fail(f, format!("n={n} x={x}: {e}"));
                        continue;
                    }
                };
                for (label, got) in [
                    ("product", monomial_by_h_recursion(g, f.center, n, x, &q)),
                    ("power", monomial_by_power_recursion(g, f.center, n, x, &q)),
                ] {
                    match got {
                        Ok(v) => t.observe(rel(v, want), f, || {
                            format!("{label} recursion n={n} x={x}: {v} vs {want}")
                        }),
                        Err(e) => t.fail(f, format!("{label} recursion n={n} x={x}: {e}")),
                    }
                }
            }
        }
    }
    t.report("hrecursion", seed, 1e-6)
}

fn right_grid(g: &Derivator, x0: f64, k: usize) -> Vec<f64> {
    let hi = g.window().1;
    (0..=k).map(|i| x0 + (hi - x0) * i as f64 / k as f64).collect()
}

fn exp_product_suite(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-13;
    for f in fx {
        let g = &f.derivator;
        let (gc, gb) = g.split();
        let mut lambdas: Vec<f64> = (0..4).map(|_| rng.random_range(-4.0..=4.0)).collect();
        lambdas.push(1.0);
        for lambda in lambdas {
            let e = ExpG::new(g.clone(), lambda, f.center).expect("lambda != 0");
            let ec = ExpG::new(gc.clone(), lambda, f.center).expect("lambda != 0");
            let eb = ExpG::new(gb.clone(), lambda, f.center).expect("lambda != 0");
            for x in right_grid(g, f.center, 20) {
                let r = (|| -> Result<(f64, f64, f64)> {
                    let s = exp_series(&e, x, tol)?;
                    let p = exp_product(&e, x)?;
                    let split = exp_series(&ec, x, tol)? * exp_series(&eb, x, tol)?;
                    Ok((s, p, split))
                })();
                match r {
                    Ok((s, p, split)) => {
                        let scale = p.abs().max(1.0);
                        let dev = ((s - p).abs().max((split - s).abs())) / scale;
                        t.observe(dev, f, || {
                            format!("lambda={lambda} x={x}: series={s} product={p} split={split}")
                        });
                    }
                    Err(err) => t.fail(f, format!("lambda={lambda} x={x}: {err}")),
                }
            }
        }
    }
    t.report("exp-product", seed, 1e-9)
}

/// At least `count` sample points of `[from, hi)` for derivative checks: an
/// even grid refined until enough points remain, the jump points and a point
/// inside every constancy interval, keeping only points where the
/// g-derivative is defined. Fewer come back only when the grid cannot be
/// refined further.
pub fn derivative_sample(g: &Derivator, from: f64, count: usize) -> Vec<f64> {
    let hi = g.window().1;
    let jumps: Vec<f64> = g.jumps_in(from, hi, 1e-6).0.into_iter().map(|j| j.0).collect();
    let mut cuts = g.breakpoints();
    cuts.extend(&jumps);
    cuts.push(from);
    cuts.push(hi);
    cuts.retain(|&c| c >= from && c <= hi);
    cuts.sort_by(f64::total_cmp);
    let mut extra = jumps.clone();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if matches!(g.point_class(mid), PointClass::ConstantInterior { .. }) {
            extra.push(mid);
        }
    }
    let defined = |x: &f64| match g.point_class(*x) {
        PointClass::ConstantInterior { component_end } => component_end < hi,
        _ => *x < hi,
    };
    let mut even = count;
    loop {
        let mut pts: Vec<f64> = (0..even)
            .map(|i| from + (hi - from) * i as f64 / even as f64)
            .chain(extra.iter().copied())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts.retain(defined);
        if pts.len() >= count || even >= count << 10 {
            return pts;
        }
        even *= 2;
    }
}

fn exp_ode(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = DerivativeOptions::default();
    for f in fx {
        let g = &f.derivator;
        let lambda: f64 = rng.random_range(-2.0..=2.0);
        let lambda = if lambda == 0.0 { 1.0 } else { lambda };
        // the whole line when the extension exists, else from the center on
        let from = match exp_extended(g, f.center, lambda, f.center) {
            Ok(_) => g.window().0,
            Err(_) => f.center,
        };
        let e = ExpG::new(g.clone(), lambda, f.center).expect("lambda != 0");
        let value = |y: f64| exp_product(&e, y).unwrap_or(f64::NAN);
        let pts = derivative_sample(g, from, 100);
        // a derivator constant on all of [from, hi) has nothing to check
        if !pts.is_empty() && pts.len() < 100 {
            t.fail(f, format!("only {} sample points", pts.len()));
        }
        for x in pts {
            match g_derivative(g, value, x, &opts) {
                Ok(d) => {
                    let want = lambda * value(x);
                    t.observe((d - want).abs() / want.abs().max(1.0), f, || {
                        format!("lambda={lambda} x={x}: derivative={d} lambda*exp={want}")
                    });
                }
                Err(err) => t.fail(f, format!("lambda={lambda} x={x}: {err}")),
            }
        }
    }
    t.report("exp-ode", seed, 1e-5)
}

/// Ends of the stretch around `x0` over which `g` changes by at most
/// `length` on either side, on a 0.05 lattice.
fn g_span(g: &Derivator, x0: f64, length: f64) -> (f64, f64) {
    let (lo, hi) = g.window();
    let base = g.value(x0);
    let mut b = x0;
    while b < hi {
        let next = (b + 0.05).min(hi);
        if g.value(next) - base > length {
            break;
        }
        b = next;
    }
    let mut a = x0;
    while a > lo {
        let next = (a - 0.05).max(lo);
        if base - g.value(next) > length {
            break;
        }
        a = next;
    }
    (a, b)
}

fn ode_residual(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in fx.iter().filter(|f| f.derivator.config().jumps.len() <= 4) {
        let g = &f.derivator;
        for m in 1..=3usize {
            let lambdas: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let initial: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let p = LinearOdeProblem::new(g.clone(), f.center, lambdas.clone(), initial)
                .expect("center is in the window");
            // far from the center the sums cancel heavily and numerical
            // derivatives of them lose the accuracy under test
            let span = g_span(g, f.center, 2.0);
            let opts = SolveOptions {
                span: Some(span),
                ..Default::default()
            };
            let sol = match solve(&p, &opts) {
                Ok(s) => s,
                Err(e) => {
                    t.fail(f, format!("m={m} lambdas={lambdas:?}: {e}"));
                    continue;
                }
            };
            let grid = default_grid(&p, &sol, span.0, span.1);
            match residual(&p, &sol, &grid) {
                Ok(r) => t.observe(r, f, || format!("m={m} lambdas={lambdas:?}: coefficient residual")),
                Err(e) => t.fail(f, format!("m={m}: {e}")),
            }
            let rep = sol.residual_report;
            t.observe(rep.max_relative, f, || {
                format!("m={m} lambdas={lambdas:?}: relative numerical residual, worst absolute at x={}", rep.worst_x)
            });
            let mut bad = sol.clone();
            // a_5 enters the residual through 5!/(5-m)! g_(5-m), which
            // vanishes identically with fewer than 5-m jumps and no
            // continuous growth
            let visible = grid.iter().any(|&x| {
                monomial(g, &MonomialRequest::new(f.center, 5 - m), x)
                    .is_ok_and(|v| v.abs() * factorial(5) / factorial(5 - m) >= 1.0)
            });
            if bad.series.coeffs.len() > 5 && visible {
                bad.series.coeffs[5] += 1e-3;
                match residual(&p, &bad, &grid) {
                    Ok(r) if r > 1e-4 => {}
                    Ok(r) => t.fail(f, format!("m={m}: perturbed coefficient left residual {r:e}")),
                    Err(e) => t.fail(f, format!("m={m}: {e}")),
                }
            }
        }
    }
    t.report("ode-residual", seed, 1e-5)
}

/// Sup-grid errors of the truncated monomials against the full ones, for
/// each truncation level.
pub fn truncation_errors(f: &Fixture, levels: &[u32], max_degree: usize, grid_points: usize) -> Result<Vec<f64>> {
    let g = &f.derivator;
    let (lo, hi) = g.window();
    let grid: Vec<f64> = (0..=grid_points)
        .map(|i| lo + (hi - lo) * i as f64 / grid_points as f64)
        .collect();
    let mut out = Vec::with_capacity(levels.len());
    for &m in levels {
        let (gm, _) = g.truncate_jumps(m)?;
        let mut sup: f64 = 0.0;
        for &x in &grid {
            for n in 1..=max_degree {
                let req = MonomialRequest::new(f.center, n);
                sup = sup.max((monomial(&gm, &req, x)? - monomial(g, &req, x)?).abs());
            }
        }
        out.push(sup);
    }
    Ok(out)
}

fn gm_convergence(seed: u64, fx: &[Fixture]) -> SuiteReport {
    let mut t = Tracker::new();
    let levels = [2, 4, 8, 16];
    for f in fx {
        match truncation_errors(f, &levels, 4, 40) {
            Ok(errs) => {
                if errs.windows(2).any(|w| !(w[1] < w[0])) {
                    t.fail(f, format!("errors not decreasing over m = {levels:?}: {errs:?}"));
                }
                let last = *errs.last().expect("levels are nonempty");
                t.observe(last, f, || format!("m=16, errors over m = {levels:?}: {errs:?}"));
            }
            Err(e) => t.fail(f, e.to_string()),
        }
    }
    t.report("gm-convergence", seed, 1e-3)
}
