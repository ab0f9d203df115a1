//! Linear g-differential equations of order m with constant coefficients,
//! `v^(m) = sum_k lambda_k v^(k) (+ f)`, solved as g-monomial series through
//! the coefficient recurrence.

use serde::{Deserialize, Serialize};

use crate::derivator::{Derivator, DerivatorSource, PointClass};
use crate::error::{Error, Result};
use crate::exponential::omega_domain;
use crate::integral::g_derivatives_at;
use crate::scalar::{factorial, Scalar};
use crate::series::{
    differentiate_series, eval_derivative, eval_series, eval_series_with, ConvergenceDomain, DomainKind, GSeries, SeriesLiteral, Tail,
    MAX_TERMS,
};

#[derive(Debug, Clone)]
pub struct LinearOdeProblem<S> {
    pub g: Derivator,
    pub center: f64,
    /// `lambda_0..lambda_(m-1)`; the order is their number.
    pub lambdas: Vec<S>,
    /// `v(x0), v'(x0), ..., v^(m-1)(x0)`.
    pub initial: Vec<S>,
    pub forcing: Option<GSeries<S>>,
}

impl<S: Scalar> LinearOdeProblem<S> {
    pub fn new(g: Derivator, center: f64, lambdas: Vec<S>, initial: Vec<S>) -> Result<Self> {
        g.check_window(center)?;
        if lambdas.is_empty() {
            return Err(Error::InvalidConfig("equation order must be at least 1".into()));
        }
        if initial.len() != lambdas.len() {
            return Err(Error::InvalidConfig(format!(
                "order {} needs {} initial values, got {}",
                lambdas.len(),
                lambdas.len(),
                initial.len()
            )));
        }
        Ok(LinearOdeProblem {
            g,
            center,
            lambdas,
            initial,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, f: GSeries<S>) -> Result<Self> {
        if f.center != self.center {
            return Err(Error::InvalidConfig(format!(
                "forcing is centered at {}, the problem at {}",
                f.center, self.center
            )));
        }
        self.forcing = Some(f);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    fn forcing_coefficients(&self, n: usize) -> Result<Vec<S>> {
        match &self.forcing {
            None => Ok(vec![S::zero(); n + 1]),
            Some(f) => {
                if matches!(f.tail, Tail::None) && n >= f.coeffs.len() {
                    return Err(Error::NotCertified(format!(
                        "forcing has {} known coefficients, {} needed",
                        f.coeffs.len(),
                        n + 1
                    )));
                }
                Ok(f.coefficients(n))
            }
        }
    }
}

/// Problem file: `{derivator, x0, m, lambdas, initial, forcing}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemLiteral {
    pub derivator: DerivatorSource,
    pub x0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub lambdas: Vec<f64>,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<SeriesLiteral>,
}

impl ProblemLiteral {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("problem file: {e}")))
    }

    pub fn into_problem(self, base: Option<&std::path::Path>) -> Result<LinearOdeProblem<f64>> {
        if let Some(m) = self.m {
            if m != self.lambdas.len() {
                return Err(Error::InvalidConfig(format!(
                    "m = {m} but {} lambdas given",
                    self.lambdas.len()
                )));
            }
        }
        let g = self.derivator.load(base)?;
        let p = LinearOdeProblem::new(g.clone(), self.x0, self.lambdas, self.initial)?;
        match self.forcing {
            Some(f) => p.with_forcing(f.into_series(g)?),
            None => Ok(p),
        }
    }
}

/// `a_0..=a_n` from `a_k = c_k / k!` and
/// `a_(j+m) (j+m)! = sum_k lambda_k a_(j+k) (j+k)! + r_j j!`.
pub fn solve_recurrence<S: Scalar>(p: &LinearOdeProblem<S>, n: usize) -> Result<Vec<S>> {
    let m = p.order();
    if n < m {
        return Err(Error::InvalidConfig(format!("need at least {m} coefficients")));
    }
    let r = p.forcing_coefficients(n - m)?;
    let mut a: Vec<S> = p
        .initial
        .iter()
        .enumerate()
        .map(|(k, &c)| c.scale(1.0 / factorial(k)))
        .collect();
    for j in 0..=(n - m) {
        // divide through by (j+m)! so nothing overflows
        let mut next = S::zero();
        for (k, &l) in p.lambdas.iter().enumerate() {
            let ratio: f64 = ((j + k + 1)..=(j + m)).map(|i| 1.0 / i as f64).product();
            next += l * a[j + k].scale(ratio);
        }
        let ratio: f64 = ((j + 1)..=(j + m)).map(|i| 1.0 / i as f64).product();
        next += r[j].scale(ratio);
        a.push(next);
    }
    Ok(a)
}

// |a_n| n! <= M^(n+1) on the prefix, compared in logarithms.
fn check_growth<S: Scalar>(a: &[S], m: f64) -> Result<()> {
    let mut lf = 0.0;
    for (n, c) in a.iter().enumerate() {
        if n > 0 {
            lf += (n as f64).ln();
        }
        let v = c.modulus();
        if v > 0.0 && v.ln() + lf > (n + 1) as f64 * m.ln() + 1e-9 {
            return Err(Error::BoundViolated(format!(
                "|a_{n}| n! exceeds M^(n+1) for M = {m}"
            )));
        }
    }
    Ok(())
}

/// `M` with `|a_n| n! <= M^(n+1)` for the solution coefficients.
///
/// Homogeneous: `M = m max(1, |c_k|, |lambda_k|)`. With a forcing whose
/// certificate is `M_f`: `C = max(1, sum |lambda_k|, sum |c_k|)`,
/// `R_0 = C^2 + |r_0|` and `M = 2 max(C^2, M_f, R_0)`; the factor 2 absorbs
/// the forcing into the induction step. The bound is checked on a computed
/// prefix.
pub fn growth_certificate<S: Scalar>(p: &LinearOdeProblem<S>) -> Result<f64> {
    let m = p.order();
    let bound = match &p.forcing {
        None => {
            let c = p
                .initial
                .iter()
                .chain(&p.lambdas)
                .map(|v| v.modulus())
                .fold(1.0, f64::max);
            m as f64 * c
        }
        Some(f) => {
            let mf = f.certificate().ok_or_else(|| {
                Error::NotCertified("the forcing series has no growth certificate".into())
            })?;
            let sl: f64 = p.lambdas.iter().map(|v| v.modulus()).sum();
            let sc: f64 = p.initial.iter().map(|v| v.modulus()).sum();
            let c = sl.max(sc).max(1.0);
            let r0 = f.coefficients(0)[0].modulus();
            2.0 * (c * c).max(mf).max(c * c + r0)
        }
    };
    let probe = match &p.forcing {
        Some(f) if matches!(f.tail, Tail::None) => (f.coeffs.len() + m).saturating_sub(1).max(m),
        _ => 80.max(m),
    };
    check_growth(&solve_recurrence(p, probe)?, bound)?;
    Ok(bound)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub abs_tol: f64,
    /// Interval on which the solution is needed; defaults to the window.
    pub span: Option<(f64, f64)>,
    pub max_terms: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            abs_tol: 1e-12,
            span: None,
            max_terms: MAX_TERMS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub max: f64,
    pub worst_x: f64,
    /// Largest residual divided by `max(1, |v^(m)|, |lambda_k v^(k)|, |f|)`.
    pub max_relative: f64,
    pub points: usize,
    /// Grid points whose neighbourhood reaches where the series is not
    /// certified, so no numerical derivative was taken.
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct OdeSolution<S> {
    pub series: GSeries<S>,
    pub growth_m: Option<f64>,
    pub validity: ConvergenceDomain,
    /// Residual from numerical g-derivatives of the evaluated series.
    pub residual_report: ResidualReport,
}

impl<S: Scalar> OdeSolution<S> {
    pub fn eval(&self, x: f64, abs_tol: f64) -> Result<S> {
        if !self.validity.contains(x) {
            return Err(Error::OutsideDomain {
                x,
                domain: self.validity.describe(),
            });
        }
        Ok(eval_series(&self.series, x, abs_tol)?.value)
    }
}

/// Solve the problem as a g-monomial series with a growth certificate, the
/// convergence domain of an exponential with rate `M` as validity, and a
/// residual report on the default grid.
///
/// A forcing without certificate cannot be controlled to the left of the
/// center: the solution is then restricted to `[x0, inf)` and its series
/// carries no certificate.
pub fn solve<S: Scalar>(p: &LinearOdeProblem<S>, opts: &SolveOptions) -> Result<OdeSolution<S>> {
    let g = &p.g;
    let m = p.order();
    let cert = match growth_certificate(p) {
        Ok(c) => Some(c),
        Err(Error::NotCertified(_)) if p.forcing.is_some() => None,
        Err(e) => return Err(e),
    };
    let (lo, hi) = opts.span.unwrap_or(g.window());
    g.check_window(lo)?;
    g.check_window(hi)?;
    let g0 = g.value(p.center);
    let (validity, n) = match cert {
        Some(mm) => {
            let validity = omega_domain(g, p.center, mm);
            let right = (g.value(hi) - g0).max(0.0) * mm;
            let mut n = m;
            // tail of the m-th derivative series, the slowest to close:
            // sum_{j > n - m} M^(m+1) (M g1)^j / j!
            let tail = |n: usize| {
                if n < m {
                    return f64::INFINITY;
                }
                let mut t = mm.powi(m as i32 + 1);
                for j in 1..=n - m + 1 {
                    t *= right / j as f64;
                }
                let ratio = right / (n - m + 2) as f64;
                if ratio >= 1.0 {
                    f64::INFINITY
                } else {
                    t / (1.0 - ratio)
                }
            };
            let cap = match &p.forcing {
                Some(f) if matches!(f.tail, Tail::None) => {
                    opts.max_terms.min(f.coeffs.len() + m - 1)
                }
                _ => opts.max_terms,
            };
            while n < cap && tail(n) > opts.abs_tol {
                n += 1;
            }
            if tail(n) > opts.abs_tol {
                return Err(Error::NotCertified(format!(
                    "more than {cap} terms needed for the certified tail"
                )));
            }
            (validity, left_prefix(p, mm, &validity, lo, n, cap, opts.abs_tol)?)
        }
        None => {
            let f = p.forcing.as_ref().expect("only forced problems lack a certificate");
            let n = (f.coeffs.len() + m).saturating_sub(1).max(m);
            let validity = ConvergenceDomain {
                kind: DomainKind::LeftBounded {
                    t: p.center,
                    open: false,
                },
                certified: false,
            };
            (validity, n)
        }
    };
    let coeffs = solve_recurrence(p, n)?;
    let mut series = GSeries::new(g.clone(), p.center, coeffs, Tail::None)?;
    series.growth_cert = cert;
    let mut sol = OdeSolution {
        series,
        growth_m: cert,
        validity,
        residual_report: ResidualReport {
            max: 0.0,
            worst_x: p.center,
            max_relative: 0.0,
            points: 0,
            skipped: 0,
        },
    };
    let grid = default_grid(p, &sol, lo, hi);
    sol.residual_report = numeric_residual(p, &sol, &grid)?;
    Ok(sol)
}

// Prefix length certifying the series as far left in `[lo, x0)` as a prefix
// of at most `cap` terms allows, probing eight points from the far end.
fn left_prefix<S: Scalar>(
    p: &LinearOdeProblem<S>,
    mm: f64,
    validity: &ConvergenceDomain,
    lo: f64,
    n_right: usize,
    cap: usize,
    abs_tol: f64,
) -> Result<usize> {
    if lo >= p.center {
        return Ok(n_right);
    }
    // doubling up to LEFT_CAP keeps the probes cheap
    const LEFT_CAP: usize = 2000;
    let cap = cap.min(LEFT_CAP.max(n_right));
    let coeffs = solve_recurrence(p, cap)?;
    let certified = |n: usize, x: f64| {
        GSeries::new(p.g.clone(), p.center, coeffs[..=n].to_vec(), Tail::None)
            .and_then(|s| s.with_certificate(mm))
            .is_ok_and(|s| certified_at(&s, p.order(), x, abs_tol))
    };
    for k in (1..=8).rev() {
        let x = p.center - (p.center - lo) * k as f64 / 8.0;
        if !validity.contains(x) {
            continue;
        }
        let mut n = n_right;
        loop {
            if certified(n, x) {
                return Ok(n);
            }
            if n >= cap {
                break;
            }
            n = (2 * n).min(cap);
        }
    }
    Ok(n_right)
}

// The solution and its m-th derivative both close to `abs_tol` at `x`.
fn certified_at<S: Scalar>(s: &GSeries<S>, m: usize, x: f64, abs_tol: f64) -> bool {
    eval_series(s, x, abs_tol).is_ok() && eval_derivative(s, m, x, abs_tol).is_ok()
}

/// Points of `[lo, hi]` spaced 1/33 apart in the continuous part of g, plus
/// the jump points, skipping constancy interiors, points where the m-th
/// g-derivative is undefined, points outside the validity domain and left
/// points where the series cannot be certified.
pub fn default_grid<S: Scalar>(p: &LinearOdeProblem<S>, sol: &OdeSolution<S>, lo: f64, hi: f64) -> Vec<f64> {
    let g = &p.g;
    let mut pts = Vec::new();
    let len = g.continuous_value(hi) - g.continuous_value(lo);
    let count = (33.0 * len).ceil() as usize;
    for i in 0..=count {
        let y = if i == 0 {
            lo
        } else {
            g.continuous_offset_inverse(lo, len * i as f64 / count as f64)
        };
        if y.is_finite() && y >= lo && y <= hi {
            pts.push(y);
        }
    }
    pts.extend(g.jumps_in(lo, hi, 1e-3).0.into_iter().map(|j| j.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.retain(|&x| {
        let class = g.point_class(x);
        let certified_left = match sol.growth_m {
            Some(_) => x >= p.center || certified_at(&sol.series, p.order(), x, 1e-12),
            None => x >= p.center,
        };
        !matches!(class, PointClass::ConstantInterior { .. })
            && sol.validity.contains(x)
            && certified_left
            && g_derivatives_at(g, |_| 0.0, x, p.order()).is_ok()
    });
    pts
}

fn forcing_at<S: Scalar>(p: &LinearOdeProblem<S>, x: f64, tol: f64) -> Result<S> {
    match &p.forcing {
        None => Ok(S::zero()),
        Some(f) => Ok(eval_series_with(f, x, tol, true)?.value),
    }
}

// Items are (x, residual, size of the largest term).
fn worst(points: impl Iterator<Item = Result<Option<(f64, f64, f64)>>>) -> Result<ResidualReport> {
    let mut rep = ResidualReport {
        max: 0.0,
        worst_x: f64::NAN,
        max_relative: 0.0,
        points: 0,
        skipped: 0,
    };
    for r in points {
        let Some((x, v, size)) = r? else {
            rep.skipped += 1;
            continue;
        };
        rep.points += 1;
        rep.max_relative = rep.max_relative.max(v / size.max(1.0));
        if !(v <= rep.max) {
            rep.max = v;
            rep.worst_x = x;
        }
    }
    Ok(rep)
}

/// `max |v^(m) - sum lambda_k v^(k) - f|` over `grid`, with every
/// `v^(k)` summed from the differentiated series.
pub fn residual<S: Scalar>(p: &LinearOdeProblem<S>, sol: &OdeSolution<S>, grid: &[f64]) -> Result<f64> {
    let m = p.order();
    let tol = 1e-10;
    let derivative = |k: usize, x: f64| match sol.growth_m {
        Some(_) => eval_derivative(&sol.series, k, x, tol).map(|v| v.value),
        None => eval_series_with(&differentiate_series(&sol.series, k), x, tol, true).map(|v| v.value),
    };
    let rep = worst(grid.iter().map(|&x| {
        if let PointClass::ConstantInterior { component_end } = p.g.classify(x)? {
            if !component_end.is_finite() {
                return Err(Error::DerivativeUndefined(format!(
                    "{x} lies in a constancy interval unbounded to the right"
                )));
            }
        }
        let d: Vec<S> = (0..=m).map(|k| derivative(k, x)).collect::<Result<_>>()?;
        let (r, size) = equation_residual(p, &d, forcing_at(p, x, tol)?);
        Ok(Some((x, r, size)))
    }))?;
    Ok(rep.max)
}

/// As [`residual`], but with `v^(k)` from numerical g-derivatives of the
/// evaluated series.
pub fn numeric_residual<S: Scalar>(p: &LinearOdeProblem<S>, sol: &OdeSolution<S>, grid: &[f64]) -> Result<ResidualReport> {
    let m = p.order();
    let tol = 1e-14;
    let heuristic = sol.growth_m.is_none();
    let f = |y: f64| {
        eval_series_with(&sol.series, y, tol, heuristic)
            .map(|v| v.value)
            .unwrap_or_else(|_| S::from_f64(f64::NAN))
    };
    worst(grid.iter().map(|&x| {
        let d = g_derivatives_at(&p.g, f, x, m)?;
        if !d.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        let (r, size) = equation_residual(p, &d, forcing_at(p, x, tol)?);
        Ok(Some((x, r, size)))
    }))
}

// |v^(m) - sum lambda_k v^(k) - f| and the largest of the terms.
fn equation_residual<S: Scalar>(p: &LinearOdeProblem<S>, d: &[S], f: S) -> (f64, f64) {
    let m = p.order();
    let mut r = d[m] - f;
    let mut size = d[m].modulus().max(f.modulus());
    for (k, &l) in p.lambdas.iter().enumerate() {
        let t = l * d[k];
        r -= t;
        size = size.max(t.modulus());
    }
    (r.modulus(), size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponential::exp_extended;
    use crate::fixtures;
    use proptest::prelude::*;

    fn problem(g: Derivator, lambdas: &[f64], initial: &[f64]) -> LinearOdeProblem<f64> {
        LinearOdeProblem::new(g, 0.0, lambdas.to_vec(), initial.to_vec()).unwrap()
    }

    // (v, v', ..., v^(m-1)) pushed through the jumps of a pure-jump derivator:
    // v^(k)(y+) = v^(k)(y) + dg(y) v^(k+1)(y), v^(m) = sum lambda_k v^(k).
    fn jump_propagation(jumps: &[(f64, f64)], lambdas: &[f64], initial: &[f64], x: f64) -> f64 {
        let m = lambdas.len();
        let mut v = initial.to_vec();
        for &(y, d) in jumps {
            if y >= x {
                break;
            }
            let top: f64 = lambdas.iter().zip(&v).map(|(l, c)| l * c).sum();
            let mut next = v.clone();
            for k in 0..m {
                let higher = if k + 1 < m { v[k + 1] } else { top };
                next[k] = v[k] + d * higher;
            }
            v = next;
        }
        v[0]
    }

    #[test]
    fn recurrence_examples() {
        let g = Derivator::identity(-5.0, 5.0);
        let a = solve_recurrence(&problem(g.clone(), &[1.5], &[1.0]), 10).unwrap();
        for (n, v) in a.iter().enumerate() {
            assert!((v - 1.5f64.powi(n as i32) / factorial(n)).abs() < 1e-15);
        }
        let a = solve_recurrence(&problem(g.clone(), &[-1.0, 0.0], &[1.0, 0.0]), 12).unwrap();
        for (n, v) in a.iter().enumerate() {
            let want = if n % 2 == 1 {
                0.0
            } else {
                (-1f64).powi(n as i32 / 2) / factorial(n)
            };
            assert!((v - want).abs() < 1e-16, "n={n}");
        }
        let a = solve_recurrence(&problem(g, &[0.3, -2.0], &[0.0, 0.0]), 8).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn certificate_examples() {
        let g = Derivator::identity(-5.0, 5.0);
        assert_eq!(growth_certificate(&problem(g.clone(), &[1.0], &[1.0])).unwrap(), 1.0);
        assert_eq!(growth_certificate(&problem(g.clone(), &[-1.0, 0.0], &[1.0, 0.0])).unwrap(), 2.0);
        assert_eq!(growth_certificate(&problem(g, &[0.0], &[0.0])).unwrap(), 1.0);
    }

    #[test]
    fn first_order_is_the_exponential() {
        let id = Derivator::identity(-5.0, 5.0);
        let sol = solve(&problem(id, &[1.0], &[1.0]), &SolveOptions { span: Some((-1.0, 2.0)), ..Default::default() }).unwrap();
        assert!(sol.residual_report.max <= 1e-5, "{:?}", sol.residual_report);
        assert!((sol.eval(2.0, 1e-12).unwrap() - 2f64.exp()).abs() < 1e-10);

        let g = fixtures::identity_with_unit_jump();
        let sol = solve(&problem(g.clone(), &[1.0], &[1.0]), &SolveOptions { span: Some((-1.0, 2.0)), ..Default::default() }).unwrap();
        let v = sol.eval(0.5, 1e-12).unwrap();
        assert!((v - 2.0 * 0.5f64.exp()).abs() < 1e-10);
        assert!((v - exp_extended(&g, 0.0, 1.0, 0.5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn second_order_through_jumps() {
        let g = DerivatorConfig::new(-5.0, 5.0)
            .jump(0.5, 0.25)
            .jump(1.0, 0.25)
            .build()
            .unwrap();
        let p = problem(g, &[-1.0, 0.0], &[1.0, 0.0]);
        let sol = solve(&p, &SolveOptions { span: Some((0.0, 2.0)), ..Default::default() }).unwrap();
        let v = sol.eval(1.25, 1e-12).unwrap();
        let want = jump_propagation(&[(0.5, 0.25), (1.0, 0.25)], &[-1.0, 0.0], &[1.0, 0.0], 1.25);
        assert!((want - 0.9375).abs() < 1e-15);
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn residual_routes_and_fault_injection() {
        let g = fixtures::identity_with_unit_jump();
        let p = problem(g.clone(), &[0.5, -0.3, 0.2], &[1.0, 0.5, -1.0]);
        let sol = solve(&p, &SolveOptions { span: Some((-0.1, 1.5)), ..Default::default() }).unwrap();
        let grid = default_grid(&p, &sol, -0.1, 1.5);
        assert!(residual(&p, &sol, &grid).unwrap() <= 1e-8);
        assert!(sol.residual_report.max <= 1e-5, "{:?}", sol.residual_report);
        let mut bad = sol.clone();
        bad.series.coeffs[5] += 1e-3;
        assert!(residual(&p, &bad, &grid).unwrap() > 1e-4);
    }

    #[test]
    fn initial_conditions_are_exact() {
        let g = fixtures::two_half_jumps();
        let p = problem(g, &[0.5, -0.3, 0.2], &[1.0, 0.5, -1.0]);
        let a = solve_recurrence(&p, 10).unwrap();
        for k in 0..3 {
            assert_eq!(a[k] * factorial(k), p.initial[k]);
        }
    }

    #[test]
    fn forcing_without_certificate_restricts_to_the_right() {
        let g = fixtures::identity_with_unit_jump();
        let f = GSeries::new(g.clone(), 0.0, (0..40).map(|n| 1.0 / factorial(n)).collect(), Tail::None).unwrap();
        let p = problem(g, &[0.5], &[1.0]).with_forcing(f).unwrap();
        let sol = solve(&p, &SolveOptions { span: Some((0.0, 1.0)), ..Default::default() }).unwrap();
        assert_eq!(sol.growth_m, None);
        assert!(!sol.validity.certified);
        assert!(!sol.validity.contains(-0.1));
        assert!(sol.validity.contains(0.0));
    }

    use crate::derivator::DerivatorConfig;

    #[test]
    fn problem_file_round_trip() {
        let text = r#"{"derivator": {"continuous": [{"kind": "identity"}], "jumps": [{"x": 0.0, "size": 1.0}], "window": [-5, 5]},
            "x0": 0, "m": 2, "lambdas": [-1, 0], "initial": [1, 0],
            "forcing": {"center": 0, "tail": {"kind": "exp", "lambda": 0.5}}}"#;
        let lit = ProblemLiteral::from_json(text).unwrap();
        let p = lit.clone().into_problem(None).unwrap();
        assert_eq!(p.order(), 2);
        assert!(p.forcing.is_some());
        let back = ProblemLiteral::from_json(&serde_json::to_string(&lit).unwrap()).unwrap();
        assert_eq!(back, lit);
        let bad = text.replace("\"m\": 2", "\"m\": 3");
        assert!(ProblemLiteral::from_json(&bad).unwrap().into_problem(None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn recurrence_and_growth_hold(
            lambdas in prop::collection::vec(-2.0f64..2.0, 1..4),
            init in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let m = lambdas.len();
            let p = problem(Derivator::identity(-5.0, 5.0), &lambdas, &init[..m]);
            let a = solve_recurrence(&p, 40).unwrap();
            for j in 0..=(40 - m) {
                let lhs = a[j + m] * factorial(j + m);
                let rhs: f64 = (0..m).map(|k| lambdas[k] * a[j + k] * factorial(j + k)).sum();
                prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs.abs()) * 8.0);
            }
            let mm = growth_certificate(&p).unwrap();
            for (n, v) in a.iter().enumerate() {
                prop_assert!(v.abs() * factorial(n) <= mm.powi(n as i32 + 1) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn superposition(
            lambdas in prop::collection::vec(-2.0f64..2.0, 2),
            c1 in prop::collection::vec(-2.0f64..2.0, 2),
            c2 in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let g = Derivator::identity(-5.0, 5.0);
            let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
            let a = solve_recurrence(&problem(g.clone(), &lambdas, &c1), 20).unwrap();
            let b = solve_recurrence(&problem(g.clone(), &lambdas, &c2), 20).unwrap();
            let s = solve_recurrence(&problem(g, &lambdas, &sum), 20).unwrap();
            for n in 0..=20 {
                prop_assert!((a[n] + b[n] - s[n]).abs() <= 1e-15 * (1.0 + s[n].abs()) * 4.0);
            }
        }
    }
}
