//! Lebesgue–Stieltjes integration against a derivator and the numerical
//! g-derivative.
//!
//! Integrals split into an exact sum over the jumps in `[a, b)` and a
//! Gauss–Legendre quadrature of the continuous part, one affine piece at a
//! time, with the density equal to the piece slope.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::derivator::{Derivator, PointClass};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const GL_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub max_refinements: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-10,
            max_refinements: 40,
        }
    }
}

impl Quadrature {
    pub fn with_tol(abs_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            ..Default::default()
        }
    }
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

// Returns (integral, integral of |f|) over [a, b].
fn gl<S: Scalar>(f: &impl Fn(f64) -> S, a: f64, b: f64) -> (S, f64) {
    let (xs, ws) = rule();
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    let mut acc = S::zero();
    let mut mag = 0.0;
    for (x, w) in xs.iter().zip(ws) {
        let v = f(mid + half * x);
        acc += v.scale(*w);
        mag += w * v.modulus();
    }
    (acc.scale(half), mag * half)
}

struct Adaptive<'a, S, F> {
    f: &'a F,
    max_depth: u32,
    worst: f64,
    failed: bool,
    _s: std::marker::PhantomData<S>,
}

impl<S: Scalar, F: Fn(f64) -> S> Adaptive<'_, S, F> {
    fn run(&mut self, a: f64, b: f64, whole: (S, f64), tol: f64, depth: u32) -> S {
        let m = 0.5 * (a + b);
        let l = gl(self.f, a, m);
        let r = gl(self.f, m, b);
        let sum = l.0 + r.0;
        let err = (sum - whole.0).modulus();
        let floor = 1e-14 * (l.1 + r.1);
        if err <= tol.max(floor) || m <= a || m >= b {
            return sum;
        }
        if depth >= self.max_depth {
            self.failed = true;
            self.worst = self.worst.max(err);
            return sum;
        }
        self.run(a, m, l, tol / 2.0, depth + 1) + self.run(m, b, r, tol / 2.0, depth + 1)
    }
}

/// `mu_g([a, b)) = g(b) - g(a)`.
pub fn measure_interval(g: &Derivator, a: f64, b: f64) -> Result<f64> {
    g.check_window(a)?;
    g.check_window(b)?;
    if a > b {
        return Err(Error::InvalidConfig(format!(
            "measure_interval needs a <= b, got [{a}, {b})"
        )));
    }
    Ok(g.value(b) - g.value(a))
}

/// Oriented integral of `f` with respect to `mu_g`: over `[a, b)` when
/// `a <= b`, and minus the integral over `[b, a)` otherwise.
pub fn integrate<S: Scalar>(
    g: &Derivator,
    f: impl Fn(f64) -> S,
    a: f64,
    b: f64,
    q: &Quadrature,
) -> Result<S> {
    g.check_window(a)?;
    g.check_window(b)?;
    if a == b {
        return Ok(S::zero());
    }
    if a > b {
        return Ok(-integrate_forward(g, &f, b, a, q, None)?);
    }
    integrate_forward(g, &f, a, b, q, None)
}

/// As [`integrate`], with a caller-supplied bound on `|f|` used to size the
/// generator truncation.
pub fn integrate_bounded<S: Scalar>(
    g: &Derivator,
    f: impl Fn(f64) -> S,
    a: f64,
    b: f64,
    q: &Quadrature,
    bound: f64,
) -> Result<S> {
    g.check_window(a)?;
    g.check_window(b)?;
    if a == b {
        return Ok(S::zero());
    }
    if a > b {
        return Ok(-integrate_forward(g, &f, b, a, q, Some(bound))?);
    }
    integrate_forward(g, &f, a, b, q, Some(bound))
}

fn integrate_forward<S: Scalar>(
    g: &Derivator,
    f: &impl Fn(f64) -> S,
    a: f64,
    b: f64,
    q: &Quadrature,
    bound: Option<f64>,
) -> Result<S> {
    let tail_tol = if g.generator().is_some() {
        let m = bound.unwrap_or_else(|| sample_bound(f, a, b));
        q.abs_tol / (2.0 * (m + 1.0))
    } else {
        f64::INFINITY
    };
    let (jumps, _) = g.jumps_in(a, b, tail_tol);
    let mut total = S::zero();
    for &(y, s) in &jumps {
        total += f(y).scale(s);
    }

    let mut cuts = vec![a];
    cuts.extend(g.breakpoints().into_iter().filter(|&p| p > a && p < b));
    cuts.extend(jumps.iter().map(|j| j.0).filter(|&y| y > a && y < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let budget = q.abs_tol / 2.0;
    let mut failed = false;
    let mut worst: f64 = 0.0;
    for w in cuts.windows(2) {
        let (c, d) = (w[0], w[1]);
        let slope = g.slope_right(c);
        if slope == 0.0 {
            continue;
        }
        let tol = budget * (d - c) / (b - a) / slope;
        let mut ad = Adaptive {
            f,
            max_depth: q.max_refinements,
            worst: 0.0,
            failed: false,
            _s: std::marker::PhantomData,
        };
        let whole = gl(f, c, d);
        let v = ad.run(c, d, whole, tol, 0);
        failed |= ad.failed;
        worst = worst.max(ad.worst * slope);
        total += v.scale(slope);
    }
    if failed {
        return Err(Error::ToleranceNotMet {
            estimate: worst,
            tol: q.abs_tol,
        });
    }
    Ok(total)
}

fn sample_bound<S: Scalar>(f: &impl Fn(f64) -> S, a: f64, b: f64) -> f64 {
    (0..=32)
        .map(|i| f(a + (b - a) * i as f64 / 32.0).modulus())
        .fold(0.0, f64::max)
}

/// Controls for the difference-quotient limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeOptions {
    /// First step; defaults to `1e-3` of the window span, shrunk to stay
    /// clear of neighbouring jumps and flat stretches.
    pub h0: Option<f64>,
    pub max_levels: usize,
    /// Successive extrapolated estimates closer than this (relative) are
    /// accepted immediately.
    pub accept_rel: f64,
    /// Loosest spread that still counts as converged.
    pub cauchy_rel: f64,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        DerivativeOptions {
            h0: None,
            max_levels: 12,
            accept_rel: 1e-9,
            cauchy_rel: 1e-6,
        }
    }
}

fn default_step(g: &Derivator, room: f64, opts: &DerivativeOptions) -> f64 {
    let (lo, hi) = g.window();
    let base = opts.h0.unwrap_or(1e-3 * (hi - lo));
    base.min(0.5 * room)
}

// Extrapolate q(h) to h -> 0 along h_k = h0 / 2^k.
fn extrapolate<S: Scalar>(
    q: impl Fn(f64) -> S,
    h0: f64,
    x: f64,
    opts: &DerivativeOptions,
) -> Result<S> {
    let mut prev: Vec<S> = Vec::new();
    let mut best: Option<(f64, S)> = None;
    let mut last = None;
    for k in 0..opts.max_levels {
        let h = h0 / 2f64.powi(k as i32);
        let mut row = vec![q(h)];
        for j in 1..=k {
            let factor = 2f64.powi(j as i32) - 1.0;
            let t = row[j - 1] + (row[j - 1] - prev[j - 1]).scale(1.0 / factor);
            row.push(t);
        }
        let est = row[k];
        if !est.is_finite() {
            break;
        }
        if let Some(old) = last {
            let spread = (est - old).modulus();
            let scale = 1.0 + est.modulus();
            if spread <= opts.accept_rel * scale {
                return Ok(est);
            }
            if best.is_none_or(|(s, _)| spread < s) {
                best = Some((spread, est));
            }
        }
        last = Some(est);
        prev = row;
    }
    match best {
        Some((spread, est)) if spread <= opts.cauchy_rel * (1.0 + est.modulus()) => Ok(est),
        Some((spread, _)) => Err(Error::LimitNotConverged { x, spread }),
        None => Err(Error::LimitNotConverged {
            x,
            spread: f64::INFINITY,
        }),
    }
}

/// `f(x+)`, estimated by extrapolating `f(x + h)` as `h` halves.
pub fn right_limit<S: Scalar>(
    g: &Derivator,
    f: &impl Fn(f64) -> S,
    x: f64,
    opts: &DerivativeOptions,
) -> Result<S> {
    let room = g.next_barrier(x).min(g.window().1) - x;
    if room <= 0.0 {
        return Err(Error::DerivativeUndefined(format!(
            "no room to the right of {x} inside the window"
        )));
    }
    let h0 = default_step(g, room, opts);
    extrapolate(|h| f(x + h), h0, x, opts)
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Dir {
    Right,
    Left,
    Both,
}

fn quotient_limit<S: Scalar>(
    g: &Derivator,
    f: &impl Fn(f64) -> S,
    x: f64,
    dir: Dir,
    opts: &DerivativeOptions,
) -> Result<S> {
    let right = g.regular_extent_right(x);
    let left = g.regular_extent_left(x);
    let dir = match dir {
        Dir::Both if right == 0.0 => Dir::Left,
        Dir::Both if left == 0.0 => Dir::Right,
        d => d,
    };
    let room = match dir {
        Dir::Right => right,
        Dir::Left => left,
        Dir::Both => right.min(left),
    };
    if room <= 0.0 {
        return Err(Error::DerivativeUndefined(format!(
            "g is not increasing on either side of {x} inside the window"
        )));
    }
    let h0 = default_step(g, room, opts);
    let fx = f(x);
    let gx = g.value(x);
    match dir {
        Dir::Right => extrapolate(|h| (f(x + h) - fx).scale(1.0 / (g.value(x + h) - gx)), h0, x, opts),
        Dir::Left => extrapolate(|h| (f(x - h) - fx).scale(1.0 / (g.value(x - h) - gx)), h0, x, opts),
        Dir::Both => extrapolate(
            |h| (f(x + h) - f(x - h)).scale(1.0 / (g.value(x + h) - g.value(x - h))),
            h0,
            x,
            opts,
        ),
    }
}

/// The g-derivative of `f` at `x`, following the jump quotient at jump
/// points, the two-sided quotient at regular points, the one-sided quotient
/// at constancy endpoints and the right quotient at the component end for
/// points inside a constancy interval.
pub fn g_derivative<S: Scalar>(
    g: &Derivator,
    f: impl Fn(f64) -> S,
    x: f64,
    opts: &DerivativeOptions,
) -> Result<S> {
    g.check_window(x)?;
    match g.point_class(x) {
        PointClass::Jump => jump_quotient(g, &f, x, opts),
        PointClass::ConstantInterior { component_end } => {
            let b = component_end;
            if !b.is_finite() {
                return Err(Error::DerivativeUndefined(format!(
                    "{x} lies in a constancy interval unbounded to the right"
                )));
            }
            if !g.in_window(b) || b >= g.window().1 {
                return Err(Error::DerivativeUndefined(format!(
                    "constancy interval around {x} ends at {b}, at or beyond the window"
                )));
            }
            if g.jump_at(b) > 0.0 {
                jump_quotient(g, &f, b, opts)
            } else {
                quotient_limit(g, &f, b, Dir::Right, opts)
            }
        }
        PointClass::RightEndpoint => quotient_limit(g, &f, x, Dir::Right, opts),
        PointClass::LeftEndpoint => quotient_limit(g, &f, x, Dir::Left, opts),
        PointClass::Regular => quotient_limit(g, &f, x, Dir::Both, opts),
    }
}

fn jump_quotient<S: Scalar>(
    g: &Derivator,
    f: &impl Fn(f64) -> S,
    x: f64,
    opts: &DerivativeOptions,
) -> Result<S> {
    let plus = right_limit(g, f, x, opts)?;
    Ok((plus - f(x)).scale(1.0 / g.jump_at(x)))
}

// Nodes for the local fits, in g-units and in number.
const FIT_NODES: usize = 12;
const FIT_WIDTH: f64 = 0.5;

/// Derivatives of orders `0..=order` of `F` at `u = 0`, where
/// `f(y) = F(g(y) - g(x))` on an increasing stretch next to `x`.
fn local_fit<S: Scalar>(
    g: &Derivator,
    f: &impl Fn(f64) -> S,
    x: f64,
    dir: Dir,
    order: usize,
) -> Result<Vec<S>> {
    let right = g.regular_extent_right(x);
    let left = g.regular_extent_left(x);
    let dir = match dir {
        Dir::Both if right == 0.0 => Dir::Left,
        Dir::Both if left == 0.0 => Dir::Right,
        d => d,
    };
    let c0 = g.continuous_value(x);
    let ur = (g.continuous_value(x + right) - c0).min(FIT_WIDTH);
    let ul = (c0 - g.continuous_value(x - left)).min(FIT_WIDTH);
    let (a, b, at) = match dir {
        Dir::Right => (0.0, ur, -1.0),
        Dir::Left => (-ul, 0.0, 1.0),
        // f is smooth in u across a regular point, so the fit interval
        // need not be centered
        Dir::Both => (-ul, ur, (ul - ur) / (ul + ur)),
    };
    if !(b > a) {
        return Err(Error::DerivativeUndefined(format!(
            "g is not increasing next to {x}"
        )));
    }
    let n = FIT_NODES;
    let mut values = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    for i in 0..n {
        let t = (PI * (i as f64 + 0.5) / n as f64).cos();
        let u = a + (b - a) * (t + 1.0) / 2.0;
        let y = g.continuous_offset_inverse(x, u);
        if !y.is_finite() {
            return Err(Error::DerivativeUndefined(format!(
                "cannot invert the continuous part near {x}"
            )));
        }
        values.push(f(y));
        ts.push(t);
    }
    let mut coeffs = vec![S::zero(); n];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut acc = S::zero();
        for i in 0..n {
            let tj = (j as f64 * (PI * (i as f64 + 0.5) / n as f64)).cos();
            acc += values[i].scale(tj);
        }
        *c = acc.scale(2.0 / n as f64);
    }
    coeffs[0] = coeffs[0].scale(0.5);
    let mut out = Vec::with_capacity(order + 1);
    let stretch = 2.0 / (b - a);
    let mut cur = coeffs;
    for k in 0..=order {
        out.push(chebyshev_eval(&cur, at).scale(stretch.powi(k as i32)));
        cur = chebyshev_derivative(&cur);
    }
    Ok(out)
}

fn chebyshev_eval<S: Scalar>(c: &[S], t: f64) -> S {
    let (mut b1, mut b2) = (S::zero(), S::zero());
    for &ck in c.iter().skip(1).rev() {
        let b0 = b1.scale(2.0 * t) - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => b1.scale(t) - b2 + c0,
        None => S::zero(),
    }
}

fn chebyshev_derivative<S: Scalar>(c: &[S]) -> Vec<S> {
    let n = c.len();
    if n <= 1 {
        return vec![S::zero()];
    }
    let mut d = vec![S::zero(); n];
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { d[k + 2] } else { S::zero() };
        d[k] = next + c[k + 1].scale(2.0 * (k + 1) as f64);
    }
    d[0] = d[0].scale(0.5);
    d.truncate(n - 1);
    d
}

// D^k f(b+) for k <= order. When g is constant right after b, the
// derivatives there are those at the end of the constancy interval.
fn right_limits<S: Scalar>(g: &Derivator, f: &dyn Fn(f64) -> S, b: f64, order: usize) -> Result<Vec<S>> {
    if g.regular_extent_right(b) > 0.0 {
        return local_fit(g, &f, b, Dir::Right, order);
    }
    let c = g.constancy_end_right(b);
    if c > b && c < g.window().1 {
        let mut out = derivatives_dyn(g, f, c, order)?;
        out[0] = f((b + c) / 2.0);
        return Ok(out);
    }
    Err(Error::DerivativeUndefined(format!("g is not increasing next to {b}")))
}

/// Iterated g-derivatives `f, f'_g, ..., f^(order)_g` at `x`, from local
/// Chebyshev fits of `f` in the g-coordinate. Intended for functions that
/// are smooth functions of `g` away from jumps (g-monomial series).
pub fn g_derivatives_at<S: Scalar>(
    g: &Derivator,
    f: impl Fn(f64) -> S,
    x: f64,
    order: usize,
) -> Result<Vec<S>> {
    derivatives_dyn(g, &f, x, order)
}

fn derivatives_dyn<S: Scalar>(g: &Derivator, f: &dyn Fn(f64) -> S, x: f64, order: usize) -> Result<Vec<S>> {
    g.check_window(x)?;
    let fx = f(x);
    if order == 0 {
        return Ok(vec![fx]);
    }
    let from_right = |b: f64| -> Result<Vec<S>> {
        let d = g.jump_at(b);
        if d > 0.0 {
            // D^k f(b) = (D^{k-1} f(b+) - D^{k-1} f(b)) / dg(b)
            let r = right_limits(g, f, b, order.saturating_sub(1))?;
            let mut out = vec![f(b)];
            for k in 1..=order {
                let prev = out[k - 1];
                out.push((r[k - 1] - prev).scale(1.0 / d));
            }
            Ok(out)
        } else {
            local_fit(g, &f, b, Dir::Right, order)
        }
    };
    let mut out = match g.point_class(x) {
        PointClass::Jump => from_right(x)?,
        PointClass::ConstantInterior { component_end } => {
            if !component_end.is_finite() || component_end >= g.window().1 {
                return Err(Error::DerivativeUndefined(format!(
                    "{x} lies in a constancy interval with no usable right end"
                )));
            }
            from_right(component_end)?
        }
        PointClass::RightEndpoint => local_fit(g, &f, x, Dir::Right, order)?,
        PointClass::LeftEndpoint => local_fit(g, &f, x, Dir::Left, order)?,
        PointClass::Regular => local_fit(g, &f, x, Dir::Both, order)?,
    };
    out[0] = fx;
    Ok(out)
}

/// A real function tabulated on a partition: exact values at the partition
/// points and Chebyshev interpolation inside each piece.
#[derive(Debug, Clone)]
pub struct Tabulated {
    points: Vec<f64>,
    at: Vec<f64>,
    interior: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Tabulated {
    /// Constant function on the partition `points` (sorted, distinct) with
    /// `n` interior nodes per piece.
    pub fn constant(points: Vec<f64>, n: usize, c: f64) -> Self {
        let n = n.max(2);
        let pieces = points.len().saturating_sub(1);
        let nodes: Vec<f64> = (0..n)
            .map(|j| (PI * (2 * j + 1) as f64 / (2 * n) as f64).cos())
            .collect();
        let weights = (0..n)
            .map(|j| {
                let s = (PI * (2 * j + 1) as f64 / (2 * n) as f64).sin();
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Tabulated {
            at: vec![c; points.len()],
            interior: vec![vec![c; n]; pieces],
            points,
            nodes,
            weights,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    fn node_x(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.points[i], self.points[i + 1]);
        a + (b - a) * (self.nodes[j] + 1.0) / 2.0
    }

    // Index i with points[i] < x < points[i+1], or Err(index) at a point.
    fn locate(&self, x: f64) -> std::result::Result<usize, usize> {
        match self.points.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(k) => Err(k),
            Err(k) => Ok(k.saturating_sub(1).min(self.points.len() - 2)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = match self.locate(x) {
            Err(k) => return self.at[k],
            Ok(i) => i,
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        let t = (2.0 * x - a - b) / (b - a);
        let vals = &self.interior[i];
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..self.nodes.len() {
            let d = t - self.nodes[j];
            if d == 0.0 {
                return vals[j];
            }
            let w = self.weights[j] / d;
            num += w * vals[j];
            den += w;
        }
        num / den
    }

    /// `scale * integral from center to x of integrand d mu_g`, tabulated on
    /// the same partition. `center` must be one of the partition points.
    pub fn primitive(
        &self,
        g: &Derivator,
        center: f64,
        scale: f64,
        integrand: &impl Fn(f64) -> f64,
        q: &Quadrature,
    ) -> Result<Tabulated> {
        let c = self
            .points
            .binary_search_by(|p| p.total_cmp(&center))
            .map_err(|_| Error::InvalidConfig("center must be a partition point".into()))?;
        let mut out = self.clone();
        out.at[c] = 0.0;
        let n = self.nodes.len();
        for i in c..self.points.len() - 1 {
            let a = self.points[i];
            for j in 0..n {
                let y = self.node_x(i, j);
                out.interior[i][j] = out.at[i] + scale * integrate(g, integrand, a, y, q)?;
            }
            out.at[i + 1] = out.at[i] + scale * integrate(g, integrand, a, self.points[i + 1], q)?;
        }
        for i in (0..c).rev() {
            let b = self.points[i + 1];
            for j in 0..n {
                let y = self.node_x(i, j);
                out.interior[i][j] = out.at[i + 1] - scale * integrate(g, integrand, y, b, q)?;
            }
            out.at[i] = out.at[i + 1] - scale * integrate(g, integrand, self.points[i], b, q)?;
        }
        Ok(out)
    }

    /// `base(x) + scale * integral` evaluated at an arbitrary `x`, where
    /// `self` is the tabulated primitive of `integrand` from `center`.
    pub fn primitive_at(
        &self,
        g: &Derivator,
        center: f64,
        scale: f64,
        integrand: &impl Fn(f64) -> f64,
        x: f64,
        q: &Quadrature,
    ) -> Result<f64> {
        match self.locate(x) {
            Err(k) => Ok(self.at[k]),
            Ok(i) => {
                if self.points[i] >= center {
                    Ok(self.at[i] + scale * integrate(g, integrand, self.points[i], x, q)?)
                } else {
                    Ok(self.at[i + 1] - scale * integrate(g, integrand, x, self.points[i + 1], q)?)
                }
            }
        }
    }
}
