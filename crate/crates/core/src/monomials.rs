//! g-monomials `g_{x0,n}`: closed forms, the continuous/jump binomial
//! decomposition, the recursive-integral oracle, bounds, center change and
//! the h-functions.

use crate::derivator::{Derivator, Side};
use crate::error::{Error, Result};
use crate::integral::{Quadrature, Tabulated};
use crate::scalar::{factorial, ln_factorial_table};

// Generator jumps below this mass are dropped when listing jumps for the
// closed forms.
const GENERATOR_TAIL: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    #[default]
    Auto,
    ContinuousClosedForm,
    JumpClosedForm,
    Decomposition,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonomialRequest {
    pub center: f64,
    pub degree: usize,
    pub route: Route,
}

impl MonomialRequest {
    pub fn new(center: f64, degree: usize) -> Self {
        MonomialRequest {
            center,
            degree,
            route: Route::Auto,
        }
    }

    pub fn route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }
}

/// `n! e_n(sizes)`: the monomial of a pure-jump derivator to the right of the
/// center, with `sizes` the jumps in `[x0, x)`.
pub fn jump_monomial_right(sizes: &[f64], n: usize) -> f64 {
    scale_by_factorial(elementary(sizes, n)[n], n)
}

/// `(-1)^n n! h_n(sizes)`: the monomial of a pure-jump derivator to the left
/// of the center, with `sizes` the jumps in `[x, x0)`.
pub fn jump_monomial_left(sizes: &[f64], n: usize) -> f64 {
    let h = complete(sizes, n)[n];
    let v = scale_by_factorial(h, n);
    if n % 2 == 0 {
        v
    } else {
        -v
    }
}

/// Elementary symmetric polynomials `e_0..=e_n`.
fn elementary(sizes: &[f64], n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (count, &s) in sizes.iter().enumerate() {
        for j in (1..=n.min(count + 1)).rev() {
            e[j] += s * e[j - 1];
        }
    }
    e
}

/// Complete homogeneous symmetric polynomials `h_0..=h_n`.
fn complete(sizes: &[f64], n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    for &s in sizes {
        for j in 1..=n {
            h[j] += s * h[j - 1];
        }
    }
    h
}

/// `n! * v`, through logarithms once `n!` leaves the f64 range.
pub fn scale_by_factorial(v: f64, n: usize) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    if n <= 170 {
        return v * factorial(n);
    }
    let lf = ln_factorial_table()[n];
    v.signum() * (lf + v.abs().ln()).exp()
}

/// Whether infinitely many generator jumps lie in `[lo, hi)`.
fn generator_infinite_in(g: &Derivator, lo: f64, hi: f64) -> bool {
    match g.generator() {
        None => false,
        Some(gen) => match gen.side {
            Side::Left => lo < gen.accumulation && hi >= gen.accumulation,
            Side::Right => lo <= gen.accumulation && hi > gen.accumulation,
        },
    }
}

/// Jump sizes between the center and `x`: those in `[x0, x)` when `x >= x0`
/// and those in `[x, x0)` otherwise.
fn sizes_between(g: &Derivator, x0: f64, x: f64) -> Vec<f64> {
    let (a, b) = if x >= x0 { (x0, x) } else { (x, x0) };
    g.jumps_in(a, b, GENERATOR_TAIL)
        .0
        .into_iter()
        .map(|p| p.1)
        .collect()
}

/// Normalized monomials `u_n = g_{x0,n}(x) / n!` for `n = 0..=n_max`.
///
/// Uses `u_n = sum_k c^k/k! * E_{n-k}` with `c = gC(x) - gC(x0)` and `E_j`
/// the signed symmetric polynomial of the jumps between center and `x`. All
/// terms share the sign `(-1)^n` on the left and are nonnegative on the
/// right, so the sum is free of cancellation.
pub fn normalized_monomials(g: &Derivator, x0: f64, x: f64, n_max: usize) -> Vec<f64> {
    let c = g.continuous_value(x) - g.continuous_value(x0);
    let sizes = sizes_between(g, x0, x);
    let jump: Vec<f64> = if x >= x0 {
        elementary(&sizes, n_max)
    } else {
        complete(&sizes, n_max)
            .into_iter()
            .enumerate()
            .map(|(j, h)| if j % 2 == 0 { h } else { -h })
            .collect()
    };
    let mut powers = Vec::with_capacity(n_max + 1);
    let mut p = 1.0;
    for k in 0..=n_max {
        if k > 0 {
            p *= c / k as f64;
        }
        powers.push(p);
    }
    (0..=n_max)
        .map(|n| (0..=n).map(|k| powers[k] * jump[n - k]).sum())
        .collect()
}

/// `g_{x0,n}(x)` along the requested route.
pub fn monomial(g: &Derivator, req: &MonomialRequest, x: f64) -> Result<f64> {
    g.check_window(x)?;
    g.check_window(req.center)?;
    let (x0, n) = (req.center, req.degree);
    let (lo, hi) = if x >= x0 { (x0, x) } else { (x, x0) };
    let route = match req.route {
        Route::Auto => {
            if !g.has_jumps() {
                Route::ContinuousClosedForm
            } else if g.continuous_is_constant() && !generator_infinite_in(g, lo, hi) {
                Route::JumpClosedForm
            } else {
                Route::Decomposition
            }
        }
        r => r,
    };
    match route {
        Route::ContinuousClosedForm => {
            if g.has_jumps() {
                return Err(Error::RouteUnavailable(
                    "continuous closed form needs a derivator without jumps".into(),
                ));
            }
            Ok((g.value(x) - g.value(x0)).powi(n as i32))
        }
        Route::JumpClosedForm => {
            if !g.continuous_is_constant() {
                return Err(Error::RouteUnavailable(
                    "jump closed form needs a constant continuous part".into(),
                ));
            }
            if generator_infinite_in(g, lo, hi) {
                return Err(Error::RouteUnavailable(format!(
                    "infinitely many jumps between {x0} and {x}"
                )));
            }
            let sizes = sizes_between(g, x0, x);
            Ok(if x >= x0 {
                jump_monomial_right(&sizes, n)
            } else {
                jump_monomial_left(&sizes, n)
            })
        }
        Route::Decomposition => {
            let u = normalized_monomials(g, x0, x, n);
            Ok(scale_by_factorial(u[n], n))
        }
        Route::Oracle => monomial_oracle(g, x0, n, x, &Quadrature::default()),
        Route::Auto => unreachable!("auto route resolved above"),
    }
}

/// `sum_k C(n,k) g_{r,k}(s) g_{s,n-k}(x)`, which equals `g_{r,n}(x)`.
pub fn change_center(g: &Derivator, r: f64, s: f64, n: usize, x: f64) -> Result<f64> {
    g.check_window(r)?;
    g.check_window(s)?;
    g.check_window(x)?;
    let ur = normalized_monomials(g, r, s, n);
    let us = normalized_monomials(g, s, x, n);
    let mut acc = 0.0;
    for k in 0..=n {
        // C(n,k) k! (n-k)! u_k u_{n-k} = n! u_k u_{n-k}
        acc += ur[k] * us[n - k];
    }
    Ok(scale_by_factorial(acc, n))
}

/// Lower and upper bounds on `|g_{x0,n}(x)|`.
pub fn monomial_bounds(g: &Derivator, x0: f64, n: usize, x: f64) -> Result<(f64, f64)> {
    g.check_window(x)?;
    g.check_window(x0)?;
    if n == 0 {
        return Ok((1.0, 1.0));
    }
    let g1 = g.value(x) - g.value(x0);
    if x >= x0 {
        let c = g.continuous_value(x) - g.continuous_value(x0);
        let sizes = sizes_between(g, x0, x);
        let lower = c.powi(n as i32).max(jump_monomial_right(&sizes, n));
        Ok((lower, g1.powi(n as i32)))
    } else {
        let p = g1.abs().powi(n as i32);
        Ok((p, scale_by_factorial(p, n)))
    }
}

/// Sorted partition of the window containing the center, the continuous
/// breakpoints and every jump of mass above `tail_tol`.
pub(crate) fn partition(g: &Derivator, x0: f64, tail_tol: f64) -> Vec<f64> {
    let (lo, hi) = g.window();
    let mut pts = vec![lo, hi, x0];
    pts.extend(g.breakpoints().into_iter().filter(|&p| p > lo && p < hi));
    pts.extend(g.jumps_in(lo, hi, tail_tol).0.into_iter().map(|p| p.0));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Brute-force evaluator of `g_{x0,0..=max_degree}` from the recursive
/// definition `g_n(x) = n * integral_{[x0, x)} g_{n-1} d mu_g`, tabulated
/// over the whole window. Uses only [`integrate`].
#[derive(Debug, Clone)]
pub struct MonomialOracle {
    levels: Vec<Tabulated>,
}

impl MonomialOracle {
    pub fn new(g: &Derivator, x0: f64, max_degree: usize, q: &Quadrature) -> Result<Self> {
        g.check_window(x0)?;
        let pts = partition(g, x0, q.abs_tol * 1e-3);
        // g_n is a polynomial of degree n in s on every piece
        let base = Tabulated::constant(pts, max_degree + 2, 1.0);
        let mut levels = vec![base];
        for n in 1..=max_degree {
            let prev = &levels[n - 1];
            let next = prev.primitive(g, x0, n as f64, &|s| prev.eval(s), q)?;
            levels.push(next);
        }
        Ok(MonomialOracle { levels })
    }

    pub fn max_degree(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn eval(&self, n: usize, x: f64) -> f64 {
        self.levels[n].eval(x)
    }
}

/// `g_{x0,n}(x)` from the recursive integral definition alone.
pub fn monomial_oracle(g: &Derivator, x0: f64, n: usize, x: f64, q: &Quadrature) -> Result<f64> {
    g.check_window(x)?;
    Ok(MonomialOracle::new(g, x0, n, q)?.eval(n, x))
}

/// `h_{j,k}(x)` from its recursive definition:
/// `h_{1,k} = (k+1) integral g_k dg d mu_g` and
/// `h_{j+1,k} = (k+j+1) integral h_{j,k} d mu_g`, all from the center.
pub fn h_function(g: &Derivator, x0: f64, j: usize, k: usize, x: f64, q: &Quadrature) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidConfig("h-functions start at j = 1".into()));
    }
    g.check_window(x)?;
    g.check_window(x0)?;
    let pts = partition(g, x0, q.abs_tol * 1e-3);
    let gk = MonomialRequest::new(x0, k);
    let base_integrand = |s: f64| {
        let d = g.jump_at(s);
        if d == 0.0 {
            0.0
        } else {
            monomial(g, &gk, s).unwrap_or(f64::NAN) * d
        }
    };
    let zero = Tabulated::constant(pts, j + k + 2, 0.0);
    let mut h = zero.primitive(g, x0, (k + 1) as f64, &base_integrand, q)?;
    for i in 1..j {
        let prev = h;
        h = prev.primitive(g, x0, (k + i + 1) as f64, &|s| prev.eval(s), q)?;
    }
    Ok(h.eval(x))
}

/// Right-hand side of `g_n = g_{n-1} g_1 - sum_{j=1}^{n-1} h_{j,n-1-j}`.
pub fn monomial_by_h_recursion(g: &Derivator, x0: f64, n: usize, x: f64, q: &Quadrature) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let m = |d: usize| monomial(g, &MonomialRequest::new(x0, d), x);
    let mut v = m(n - 1)? * m(1)?;
    for j in 1..n {
        v -= h_function(g, x0, j, n - 1 - j, x, q)?;
    }
    Ok(v)
}

/// Right-hand side of
/// `g_n = g_1^n - sum_{k=1}^{n-1} g_1^{n-1-k} sum_{j=1}^{k} h_{j,k-j}`.
pub fn monomial_by_power_recursion(g: &Derivator, x0: f64, n: usize, x: f64, q: &Quadrature) -> Result<f64> {
    let g1 = monomial(g, &MonomialRequest::new(x0, 1), x)?;
    let mut v = g1.powi(n as i32);
    for k in 1..n {
        let mut inner = 0.0;
        for j in 1..=k {
            inner += h_function(g, x0, j, k - j, x, q)?;
        }
        v -= g1.powi((n - 1 - k) as i32) * inner;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivator::{DerivatorConfig, SegmentConfig};
    use crate::fixtures;
    use crate::integral::{g_derivative, DerivativeOptions};
    use proptest::prelude::*;

    fn q() -> Quadrature {
        Quadrature::default()
    }

    // Brute force over all subsets / multisets, independent of the DP.
    fn subsets_sum(sizes: &[f64], n: usize) -> f64 {
        let m = sizes.len();
        (0u32..(1 << m))
            .filter(|mask| mask.count_ones() as usize == n)
            .map(|mask| {
                (0..m)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| sizes[i])
                    .product::<f64>()
            })
            .sum()
    }

    fn multisets_sum(sizes: &[f64], n: usize) -> f64 {
        fn rec(sizes: &[f64], n: usize) -> f64 {
            match sizes.split_first() {
                None => {
                    if n == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Some((&s, rest)) => (0..=n).map(|e| s.powi(e as i32) * rec(rest, n - e)).sum(),
            }
        }
        rec(sizes, n)
    }

    #[test]
    fn jump_closed_forms() {
        assert_eq!(jump_monomial_right(&[1.0, 2.0, 3.0], 2), 22.0);
        assert_eq!(jump_monomial_right(&[], 1), 0.0);
        assert_eq!(jump_monomial_right(&[0.5, 0.5], 3), 0.0);
        assert_eq!(jump_monomial_left(&[1.0], 3), -6.0);
        assert_eq!(jump_monomial_left(&[1.0, 2.0], 2), 14.0);
        assert_eq!(jump_monomial_left(&[0.3, 7.0], 0), 1.0);
    }

    #[test]
    fn monomial_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        assert_eq!(monomial(&id, &MonomialRequest::new(0.0, 3), 2.0).unwrap(), 8.0);

        let g = fixtures::identity_with_unit_jump();
        let v = monomial(&g, &MonomialRequest::new(0.0, 2), 0.5).unwrap();
        assert!((v - 1.25).abs() < 1e-15);

        let e = fixtures::single_jump(-1.0, 1.0);
        assert_eq!(monomial(&e, &MonomialRequest::new(0.0, 3), -1.5).unwrap(), -6.0);

        let st = fixtures::integer_staircase();
        assert_eq!(monomial(&st, &MonomialRequest::new(0.0, 4), 2.5).unwrap(), 0.0);
    }

    #[test]
    fn forced_routes_check_preconditions() {
        let g = fixtures::identity_with_unit_jump();
        let r = monomial(&g, &MonomialRequest::new(0.0, 2).route(Route::ContinuousClosedForm), 1.0);
        assert!(matches!(r, Err(Error::RouteUnavailable(_))));
        let r = monomial(&g, &MonomialRequest::new(0.0, 2).route(Route::JumpClosedForm), 1.0);
        assert!(matches!(r, Err(Error::RouteUnavailable(_))));
        let acc = DerivatorConfig::new(-2.0, 2.0)
            .generator(0.0, Side::Left, 0.5, 0.5)
            .build()
            .unwrap();
        let r = monomial(&acc, &MonomialRequest::new(-1.0, 2).route(Route::JumpClosedForm), 1.0);
        assert!(matches!(r, Err(Error::RouteUnavailable(_))));
        assert!(monomial(&acc, &MonomialRequest::new(-1.0, 2), 1.0).is_ok());
    }

    #[test]
    fn oracle_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let v = monomial_oracle(&id, 0.0, 2, 1.0, &q()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let g = fixtures::identity_with_unit_jump();
        let v = monomial_oracle(&g, 0.0, 2, 0.5, &q()).unwrap();
        assert!((v - 1.25).abs() < 1e-8);
        let e = fixtures::single_jump(-1.0, 1.0);
        let v = monomial_oracle(&e, 0.0, 2, -2.0, &q()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_closed_form_left_and_right() {
        let g = fixtures::identity_with_unit_jump();
        let o = MonomialOracle::new(&g, 0.0, 6, &q()).unwrap();
        for &x in &[-3.0f64, -0.5, 0.0, 0.25, 1.0, 2.5] {
            for n in 0..=6 {
                // x^n + n x^(n-1) on the right of the jump, x^n on the left
                let want = if x > 0.0 {
                    x.powi(n as i32) + n as f64 * x.powi(n as i32 - 1)
                } else {
                    x.powi(n as i32)
                };
                let got = o.eval(n, x);
                assert!((got - want).abs() <= 1e-8 * (1.0 + want.abs()), "n={n} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn change_center_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        assert!((change_center(&id, 0.0, 1.0, 2, 3.0).unwrap() - 9.0).abs() < 1e-14);
        let g = fixtures::identity_with_unit_jump();
        let v = change_center(&g, 0.0, 0.5, 2, 0.75).unwrap();
        assert!((v - 2.0625).abs() < 1e-14);
        let direct = monomial(&g, &MonomialRequest::new(-0.4, 5), 1.3).unwrap();
        assert_eq!(change_center(&g, -0.4, -0.4, 5, 1.3).unwrap(), direct);
    }

    #[test]
    fn bounds_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let (lo, hi) = monomial_bounds(&id, 0.0, 3, 2.0).unwrap();
        assert_eq!((lo, hi), (8.0, 8.0));
        let e = fixtures::single_jump(-1.0, 1.0);
        let (_, hi) = monomial_bounds(&e, 0.0, 2, -1.5).unwrap();
        assert_eq!(hi, 2.0);
        assert_eq!(monomial(&e, &MonomialRequest::new(0.0, 2), -1.5).unwrap(), hi);
        assert_eq!(monomial_bounds(&e, 0.0, 0, 3.0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn h_function_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        assert_eq!(h_function(&id, 0.0, 2, 1, 1.5, &q()).unwrap(), 0.0);
        let g = fixtures::identity_with_unit_jump();
        let v = h_function(&g, 0.0, 1, 0, 1.0, &q()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let rhs = monomial_by_h_recursion(&g, 0.0, 3, 0.5, &q()).unwrap();
        assert!((rhs - 0.875).abs() < 1e-8, "{rhs}");
        let rhs = monomial_by_power_recursion(&g, 0.0, 3, 0.5, &q()).unwrap();
        assert!((rhs - 0.875).abs() < 1e-8, "{rhs}");
    }

    #[test]
    fn derivative_law_on_a_jump_fixture() {
        let g = fixtures::identity_with_unit_jump();
        for &x in &[-1.0, 0.0, 0.4] {
            let d = g_derivative(&g, |s| monomial(&g, &MonomialRequest::new(0.0, 3), s).unwrap(), x, &DerivativeOptions::default()).unwrap();
            let want = 3.0 * monomial(&g, &MonomialRequest::new(0.0, 2), x).unwrap();
            assert!((d - want).abs() < 1e-5, "x={x}: {d} vs {want}");
        }
    }

    #[test]
    fn large_degrees_stay_finite() {
        let g = fixtures::identity_with_unit_jump();
        let u = normalized_monomials(&g, 0.0, 3.0, 400);
        assert!(u.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(scale_by_factorial(u[200], 200).is_finite());
    }

    fn affine_with_jumps(slopes: &[f64], jumps: &[(f64, f64)]) -> Derivator {
        let mut c = DerivatorConfig::new(-5.0, 5.0);
        let cuts = [-5.0, -2.0, 0.5, 2.5, 5.0];
        let mut v = 0.0;
        for (i, &s) in slopes.iter().enumerate() {
            let (a, b) = (cuts[i], cuts[i + 1]);
            let from = if i == 0 { None } else { Some(a) };
            let to = if i + 1 == slopes.len() { None } else { Some(b) };
            c = c.segment(SegmentConfig::affine(from, to, s, v - s * a));
            v += s * (b - a);
        }
        for &(x, h) in jumps {
            c = c.jump(x, h);
        }
        c.build().unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn symmetric_polynomials_match_enumeration(
            sizes in prop::collection::vec(0.1f64..2.0, 0..6),
            n in 0usize..6,
        ) {
            let r = jump_monomial_right(&sizes, n);
            let want = factorial(n) * subsets_sum(&sizes, n);
            prop_assert!((r - want).abs() <= 1e-12 * (1.0 + want.abs()));
            let l = jump_monomial_left(&sizes, n);
            let want = (-1f64).powi(n as i32) * factorial(n) * multisets_sum(&sizes, n);
            prop_assert!((l - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }

        #[test]
        fn signs_and_bounds(
            slopes in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], 4),
            jumps in prop::collection::btree_map(-45i32..45, 0.1f64..2.0, 0..6),
            x0 in -4.0f64..4.0,
            x in -5.0f64..5.0,
            n in 0usize..8,
        ) {
            let jumps: Vec<(f64, f64)> = jumps.into_iter().map(|(k, h)| (k as f64 / 10.0, h)).collect();
            let g = affine_with_jumps(&slopes, &jumps);
            let v = monomial(&g, &MonomialRequest::new(x0, n), x).unwrap();
            if x >= x0 {
                prop_assert!(v >= 0.0);
            } else if v != 0.0 {
                prop_assert_eq!(v.signum(), (-1f64).powi(n as i32));
            }
            let (lo, hi) = monomial_bounds(&g, x0, n, x).unwrap();
            let slack = 1e-12 * (1.0 + hi.abs());
            prop_assert!(v.abs() >= lo - slack && v.abs() <= hi + slack, "{lo} <= |{v}| <= {hi}");
        }

        #[test]
        fn center_change_identity(
            slopes in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], 4),
            jumps in prop::collection::btree_map(-45i32..45, 0.1f64..2.0, 0..6),
            r in -4.0f64..4.0,
            s in -4.0f64..4.0,
            x in -4.0f64..4.0,
            n in 0usize..8,
        ) {
            let jumps: Vec<(f64, f64)> = jumps.into_iter().map(|(k, h)| (k as f64 / 10.0, h)).collect();
            let g = affine_with_jumps(&slopes, &jumps);
            let direct = monomial(&g, &MonomialRequest::new(r, n), x).unwrap();
            let via = change_center(&g, r, s, n, x).unwrap();
            prop_assert!((direct - via).abs() <= 1e-8 * (1.0 + direct.abs()), "{direct} vs {via}");
        }
    }
}
