//! The g-exponential `exp_g(lambda; x0)`: convergence domain, series and
//! product evaluation, and the extension to the whole line.

use crate::derivator::Derivator;
use crate::error::{Error, Result};
use crate::series::{eval_series, ConvergenceDomain, DomainKind, GSeries};
use crate::scalar::Scalar;

/// Factors `1 + lambda dg(y)` at most this large in modulus count as zero.
pub const ZERO_FACTOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ExpG<S> {
    pub g: Derivator,
    pub lambda: S,
    pub center: f64,
    pub domain: ConvergenceDomain,
    /// No factor `1 + lambda dg(y)` vanishes for a jump `y < center`.
    pub nonvanishing_left: bool,
    pub extendable: bool,
}

impl<S: Scalar> ExpG<S> {
    pub fn new(g: Derivator, lambda: S, center: f64) -> Result<Self> {
        g.check_window(center)?;
        if lambda.modulus() == 0.0 {
            return Err(Error::InvalidConfig("the exponential needs lambda != 0".into()));
        }
        let domain = omega_domain(&g, center, lambda.modulus());
        let nonvanishing_left = first_vanishing_left(&g, center, lambda).is_none();
        Ok(ExpG {
            g,
            lambda,
            center,
            domain,
            nonvanishing_left,
            extendable: nonvanishing_left,
        })
    }
}

/// Jumps below `x0` (anywhere on the line) of size at least `min_size`.
fn big_jumps_below(g: &Derivator, x0: f64, min_size: f64) -> Vec<(f64, f64)> {
    g.jumps_in(f64::NEG_INFINITY, x0, 0.5 * min_size)
        .0
        .into_iter()
        .filter(|p| p.1 >= min_size)
        .collect()
}

fn first_vanishing_left<S: Scalar>(g: &Derivator, x0: f64, lambda: S) -> Option<f64> {
    big_jumps_below(g, x0, 0.5 / lambda.modulus())
        .into_iter()
        .rev()
        .find(|&(_, d)| (S::one() + lambda.scale(d)).modulus() <= ZERO_FACTOR)
        .map(|p| p.0)
}

/// Maximal interval of absolute convergence of the exponential series with
/// rate of modulus `lambda_abs`: the whole line unless some jump below `x0`
/// has `dg >= 1/lambda_abs`, in which case it starts (open) at the largest
/// such jump.
pub fn omega_domain(g: &Derivator, x0: f64, lambda_abs: f64) -> ConvergenceDomain {
    if lambda_abs == 0.0 {
        return ConvergenceDomain::whole_line();
    }
    match big_jumps_below(g, x0, 1.0 / lambda_abs).last() {
        None => ConvergenceDomain::whole_line(),
        Some(&(t, _)) => ConvergenceDomain {
            kind: DomainKind::LeftBounded { t, open: true },
            certified: true,
        },
    }
}

/// Points `x0 = p_0 < p_1 < ... < p_k = x` such that `[p_i, p_(i+1))` holds
/// no jump of weight `|lambda| dg >= 1e-3` except possibly at `p_i`, and the
/// continuous part grows by at most `1/|lambda|` on each.
fn chain_points(g: &Derivator, x0: f64, x: f64, lambda_abs: f64) -> Vec<f64> {
    let mut stops: Vec<f64> = g
        .jumps_in(x0, x, 1e-3 / lambda_abs)
        .0
        .into_iter()
        .filter(|p| p.1 * lambda_abs >= 1e-3 && p.0 > x0)
        .map(|p| p.0)
        .collect();
    stops.push(x);
    let mut out = vec![x0];
    let mut a = x0;
    for b in stops {
        let dc = g.continuous_value(b) - g.continuous_value(a);
        let k = (lambda_abs * dc).ceil().max(1.0) as usize;
        for i in 1..k {
            let y = g.continuous_offset_inverse(a, dc * i as f64 / k as f64);
            if y.is_finite() && y > *out.last().expect("nonempty") && y < b {
                out.push(y);
            }
        }
        if b > *out.last().expect("nonempty") {
            out.push(b);
        }
        a = b;
    }
    out
}

/// The exponential series evaluated at `x` within `abs_tol`.
///
/// To the right of the center the series is summed as a product of short
/// re-centered steps, each a certified partial sum, so large `|lambda| g1`
/// never forces cancellation between huge terms. To the left the series is
/// summed directly while `|lambda g1(x)| < 1`; elsewhere in the convergence
/// domain the product form is used.
pub fn exp_series<S: Scalar>(e: &ExpG<S>, x: f64, abs_tol: f64) -> Result<S> {
    let g = &e.g;
    g.check_window(x)?;
    let lambda_abs = e.lambda.modulus();
    if x >= e.center {
        let pts = chain_points(g, e.center, x, lambda_abs);
        let steps = (pts.len() - 1).max(1) as f64;
        let majorant = (lambda_abs * (g.value(x) - g.value(e.center))).exp();
        let tol = (abs_tol / (steps * majorant.max(1.0))).max(1e-300);
        let mut v = S::one();
        for w in pts.windows(2) {
            let step = GSeries::exp(g.clone(), w[0], e.lambda)?;
            v = v * eval_series(&step, w[1], tol)?.value;
        }
        return Ok(v);
    }
    if !e.domain.contains(x) {
        return Err(Error::OutsideDomain {
            x,
            domain: e.domain.describe(),
        });
    }
    let g1 = g.value(x) - g.value(e.center);
    if lambda_abs * g1.abs() < 1.0 {
        let s = GSeries::exp(g.clone(), e.center, e.lambda)?;
        return Ok(eval_series(&s, x, abs_tol)?.value);
    }
    exp_product(e, x)
}

/// `e^(lambda (gC(x) - gC(x0)))` times the product of `1 + lambda dg(y)`
/// over the jumps in `[x0, x)`, or divided by the product over `[x, x0)`
/// when `x < x0`.
pub fn exp_product<S: Scalar>(e: &ExpG<S>, x: f64) -> Result<S> {
    let g = &e.g;
    g.check_window(x)?;
    let lambda_abs = e.lambda.modulus();
    let cont = e
        .lambda
        .scale(g.continuous_value(x) - g.continuous_value(e.center))
        .exp();
    // generator jumps are listed until |lambda| times the rest is negligible
    let tail_tol = 1e-17 / lambda_abs;
    if x >= e.center {
        let mut p = cont;
        for (_, d) in g.jumps_in(e.center, x, tail_tol).0 {
            p = p * (S::one() + e.lambda.scale(d));
        }
        Ok(p)
    } else {
        let mut p = S::one();
        for (y, d) in g.jumps_in(x, e.center, tail_tol).0 {
            let f = S::one() + e.lambda.scale(d);
            if f.modulus() <= ZERO_FACTOR {
                return Err(Error::SingularFactor { y });
            }
            p = p * f;
        }
        Ok(cont * p.powi(-1))
    }
}

/// The extension of the exponential to the whole line, defined whenever no
/// factor `1 + lambda dg(y)` vanishes for a jump `y < x0`.
pub fn exp_extended<S: Scalar>(g: &Derivator, x0: f64, lambda: S, x: f64) -> Result<S> {
    let e = ExpG::new(g.clone(), lambda, x0)?;
    if let Some(y) = first_vanishing_left(g, x0, lambda) {
        return Err(Error::HypothesisViolated { y });
    }
    exp_product(&e, x)
}

/// Both sides of `exp(lambda; t)(s) * exp(lambda; s)(x) = exp(lambda; t)(x)`.
pub fn exp_recenter_check<S: Scalar>(
    g: &Derivator,
    t: f64,
    s: f64,
    x: f64,
    lambda: S,
    abs_tol: f64,
) -> Result<(S, S)> {
    let et = ExpG::new(g.clone(), lambda, t)?;
    let es = ExpG::new(g.clone(), lambda, s)?;
    for (dom, p) in [(&et.domain, s), (&es.domain, x), (&et.domain, x)] {
        if !dom.contains(p) {
            return Err(Error::OutsideDomain {
                x: p,
                domain: dom.describe(),
            });
        }
    }
    let lhs = exp_series(&et, s, abs_tol)? * exp_series(&es, x, abs_tol)?;
    let rhs = exp_series(&et, x, abs_tol)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivator::{DerivatorConfig, SegmentConfig};
    use crate::fixtures;
    use crate::integral::{g_derivative, DerivativeOptions};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn omega_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        assert_eq!(omega_domain(&id, 0.0, 3.0).kind, DomainKind::WholeLine);
        let g = fixtures::single_jump(-1.0, 2.0);
        assert_eq!(
            omega_domain(&g, 0.0, 1.0).kind,
            DomainKind::LeftBounded { t: -1.0, open: true }
        );
        assert_eq!(omega_domain(&g, 0.0, 0.25).kind, DomainKind::WholeLine);
    }

    #[test]
    fn series_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let e = ExpG::new(id.clone(), 1.0, 0.0).unwrap();
        assert!((exp_series(&e, 1.0, 1e-13).unwrap() - E).abs() < 1e-10);

        let two = fixtures::two_half_jumps();
        let e = ExpG::new(two, 1.0, 0.0).unwrap();
        assert!((exp_series(&e, 2.5, 1e-13).unwrap() - 2.25).abs() < 1e-12);
        assert!((exp_product(&e, 2.5).unwrap() - 2.25).abs() < 1e-15);

        let tiny = ExpG::new(id.clone(), 1e-12, 0.0).unwrap();
        assert!((exp_series(&tiny, 1.0, 1e-16).unwrap() - (1.0 + 1e-12)).abs() < 1e-15);
        assert!(matches!(ExpG::new(id, 0.0, 0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn large_negative_rates_do_not_cancel() {
        let id = Derivator::identity(-10.0, 10.0);
        let e = ExpG::new(id, -4.0, -5.0).unwrap();
        let v = exp_series(&e, 5.0, 1e-14).unwrap();
        assert!((v - (-40f64).exp()).abs() < 1e-25, "{v}");
    }

    #[test]
    fn product_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let e = ExpG::new(id, 0.7, 1.0).unwrap();
        assert!((exp_product(&e, -2.0).unwrap() - (0.7f64 * -3.0).exp()).abs() < 1e-15);
        let g = fixtures::single_jump(0.5, 0.5);
        let e = ExpG::new(g, -2.0, 0.0).unwrap();
        assert_eq!(exp_product(&e, 1.0).unwrap(), 0.0);
        let e = ExpG::new(fixtures::single_jump(0.5, 0.5), -2.0, 1.0).unwrap();
        assert!(matches!(exp_product(&e, 0.0), Err(Error::SingularFactor { y }) if y == 0.5));
    }

    #[test]
    fn extended_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let v = exp_extended(&id, 0.0, 0.3, -4.0).unwrap();
        assert!((v - (-1.2f64).exp()).abs() < 1e-15);
        let g = fixtures::single_jump(-1.0, 2.0);
        assert!((exp_extended(&g, 0.0, 1.0, -1.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(exp_extended(&g, 0.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            exp_extended(&g, 0.0, -0.5, 1.0),
            Err(Error::HypothesisViolated { y }) if y == -1.0
        ));
        // outside the convergence domain the series refuses
        let e = ExpG::new(g, 1.0, 0.0).unwrap();
        assert!(matches!(exp_series(&e, -1.5, 1e-12), Err(Error::OutsideDomain { .. })));
        assert_eq!(exp_series(&e, -0.5, 1e-13).unwrap(), 1.0);
    }

    #[test]
    fn left_series_falls_back_to_the_product() {
        // |lambda g1| >= 1 but no jump is large enough to bound the domain
        let g = fixtures::identity_with_unit_jump();
        let e = ExpG::new(g.clone(), 0.5, 0.5).unwrap();
        let v = exp_series(&e, -3.0, 1e-13).unwrap();
        let want = exp_extended(&g, 0.5, 0.5, -3.0).unwrap();
        assert!((v - want).abs() < 1e-14);
    }

    #[test]
    fn recenter_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let (l, r) = exp_recenter_check(&id, 0.0, 1.0, 2.0, 1.0, 1e-14).unwrap();
        assert!((l - E * E).abs() < 1e-12 && (r - E * E).abs() < 1e-12);
        let two = fixtures::two_half_jumps();
        let (l, r) = exp_recenter_check(&two, 0.0, 1.5, 2.5, 1.0, 1e-14).unwrap();
        assert!((l - 2.25).abs() < 1e-12 && (r - 2.25).abs() < 1e-12);
    }

    #[test]
    fn solves_its_equation_at_every_point_class() {
        let g = DerivatorConfig::new(-3.0, 3.0)
            .segment(SegmentConfig::affine(None, Some(-1.0), 1.0, 0.0))
            .segment(SegmentConfig::affine(Some(-1.0), Some(0.5), 0.0, -1.0))
            .segment(SegmentConfig::affine(Some(0.5), None, 2.0, -2.0))
            .jump(0.0, 0.5)
            .jump(1.0, 0.25)
            .build()
            .unwrap();
        let lambda = 0.8;
        let f = |s: f64| exp_extended(&g, 0.2, lambda, s).unwrap();
        for &x in &[-2.0, -1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 2.0] {
            let d = g_derivative(&g, f, x, &DerivativeOptions::default()).unwrap();
            let want = lambda * if x > -1.0 && x < 0.5 && x != 0.0 {
                // constancy interior: routed to the component end
                match g.classify(x).unwrap() {
                    crate::PointClass::ConstantInterior { component_end } => f(component_end),
                    _ => f(x),
                }
            } else {
                f(x)
            };
            assert!((d - want).abs() < 1e-5, "x={x}: {d} vs {want}");
        }
    }

    #[test]
    fn complex_rate() {
        let two = fixtures::two_half_jumps();
        let lambda = Complex64::new(0.5, 1.0);
        let e = ExpG::new(two, lambda, 0.0).unwrap();
        let p = exp_product(&e, 3.0).unwrap();
        let s = exp_series(&e, 3.0, 1e-14).unwrap();
        let f = Complex64::new(1.0, 0.0) + lambda * 0.5;
        assert!((p - f * f).norm() < 1e-14);
        assert!((s - p).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn product_and_series_agree_and_factor(
            slopes in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], 3),
            jumps in prop::collection::btree_map(-45i32..45, 0.1f64..2.0, 0..6),
            lambda in -4.0f64..4.0,
            x0 in -4.0f64..0.0,
            dx in 0.0f64..4.0,
        ) {
            let mut c = DerivatorConfig::new(-5.0, 5.0);
            let cuts = [-5.0, -1.0, 2.0, 5.0];
            let mut v = 0.0;
            for (i, &s) in slopes.iter().enumerate() {
                let (a, b) = (cuts[i], cuts[i + 1]);
                let from = if i == 0 { None } else { Some(a) };
                let to = if i + 1 == slopes.len() { None } else { Some(b) };
                c = c.segment(SegmentConfig::affine(from, to, s, v - s * a));
                v += s * (b - a);
            }
            for (k, h) in jumps {
                c = c.jump(k as f64 / 10.0, h);
            }
            let g = c.build().unwrap();
            prop_assume!(lambda.abs() > 1e-3);
            let x = x0 + dx;
            let e = ExpG::new(g.clone(), lambda, x0).unwrap();
            let p = exp_product(&e, x).unwrap();
            let s = exp_series(&e, x, 1e-13).unwrap();
            prop_assert!((p - s).abs() <= 1e-9 * (1.0 + p.abs()), "{p} vs {s}");
            let (gc, gb) = g.split();
            let sc = exp_series(&ExpG::new(gc, lambda, x0).unwrap(), x, 1e-13).unwrap();
            let sb = exp_series(&ExpG::new(gb, lambda, x0).unwrap(), x, 1e-13).unwrap();
            prop_assert!((sc * sb - s).abs() <= 1e-9 * (1.0 + s.abs()), "{} vs {s}", sc * sb);
        }
    }
}
