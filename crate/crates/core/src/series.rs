//! g-monomial series `sum a_n g_{x0,n}(x)`: certified evaluation, term-wise
//! integration and differentiation, re-centering, coefficient recovery and
//! growth bounds.

use serde::{Deserialize, Serialize};

use crate::derivator::Derivator;
use crate::error::{Error, Result};
use crate::integral::g_derivatives_at;
use crate::monomials::normalized_monomials;
use crate::scalar::{factorial, ln_factorial_table, Scalar};

/// Largest truncation index the evaluator will consider.
pub const MAX_TERMS: usize = 10_000;

/// Where a series (or the exponential) converges absolutely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDomain {
    pub kind: DomainKind,
    pub certified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    WholeLine,
    /// `(t, inf)` when `open`, `[t, inf)` otherwise.
    LeftBounded { t: f64, open: bool },
}

impl ConvergenceDomain {
    pub fn whole_line() -> Self {
        ConvergenceDomain {
            kind: DomainKind::WholeLine,
            certified: true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.kind {
            DomainKind::WholeLine => true,
            DomainKind::LeftBounded { t, open: true } => x > t,
            DomainKind::LeftBounded { t, open: false } => x >= t,
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            DomainKind::WholeLine => "(-inf, inf)".to_string(),
            DomainKind::LeftBounded { t, open: true } => format!("({t}, inf)"),
            DomainKind::LeftBounded { t, open: false } => format!("[{t}, inf)"),
        }
    }
}

/// Coefficients beyond the stored prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail<S> {
    /// Unknown; only a growth certificate bounds them.
    None,
    /// All zero: the series is a finite sum.
    Zero,
    /// `a_n = scale * lambda^n / n!`.
    Exp { lambda: S, scale: S },
}

#[derive(Debug, Clone)]
pub struct GSeries<S> {
    pub g: Derivator,
    pub center: f64,
    pub coeffs: Vec<S>,
    pub tail: Tail<S>,
    /// `M` with `|a_n| <= M^(n+1) / n!` for every n.
    pub growth_cert: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<S> {
    pub value: S,
    /// Number of terms summed.
    pub terms: usize,
    /// Bound on the neglected tail when certified, otherwise the size of the
    /// last summed term.
    pub tail_bound: f64,
    pub certified: bool,
}

// a * n!/k! * u, with lf = ln(n!/k!) used once the ratio leaves f64 range.
fn scaled_term<S: Scalar>(a: S, u: f64, n: usize, k: usize, lnf: &[f64]) -> S {
    if u == 0.0 || a.modulus() == 0.0 {
        return S::zero();
    }
    if n <= 170 {
        return a.scale(factorial(n) / factorial(k) * u);
    }
    let m = a.modulus();
    let l = m.ln() + lnf[n] - lnf[k] + u.abs().ln();
    a.scale(u.signum() * l.exp() / m)
}

// ln of sum_{n > N} r^n / n!, bounded by its first term over (1 - r/(N+2)).
fn exp_remainder(r: f64, n: usize, lnf: &[f64]) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let first = ((n + 1) as f64 * r.ln() - lnf[n + 1]).exp();
    let ratio = r / (n + 2) as f64;
    if ratio >= 1.0 {
        f64::INFINITY
    } else {
        first / (1.0 - ratio)
    }
}

fn geometric_remainder(q: f64, n: usize) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q.powi((n + 1) as i32) / (1.0 - q)
    }
}

impl<S: Scalar> GSeries<S> {
    pub fn new(g: Derivator, center: f64, coeffs: Vec<S>, tail: Tail<S>) -> Result<Self> {
        g.check_window(center)?;
        if coeffs.len() > MAX_TERMS {
            return Err(Error::InvalidConfig(format!(
                "at most {MAX_TERMS} stored coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(GSeries {
            g,
            center,
            coeffs,
            tail,
            growth_cert: None,
        })
    }

    /// Attach a growth certificate after checking it against the prefix and
    /// the tail rule.
    pub fn with_certificate(mut self, m: f64) -> Result<Self> {
        if !(m >= 1.0 && m.is_finite()) {
            return Err(Error::BoundViolated(format!(
                "growth certificate must be finite and >= 1, got {m}"
            )));
        }
        let lnf = ln_factorial_table();
        for (n, a) in self.coeffs.iter().enumerate() {
            let r = root_growth(a.modulus(), n, &lnf);
            if r > m * (1.0 + 1e-12) {
                return Err(Error::BoundViolated(format!(
                    "|a_{n}| n! = {:e} exceeds M^(n+1) for M = {m}",
                    a.modulus() * factorial(n)
                )));
            }
        }
        if let Tail::Exp { lambda, scale } = self.tail {
            if lambda.modulus() > m || scale.modulus() > m {
                return Err(Error::BoundViolated(format!(
                    "exponential tail exceeds the certificate M = {m}"
                )));
            }
        }
        self.growth_cert = Some(m);
        Ok(self)
    }

    pub fn exp(g: Derivator, center: f64, lambda: S) -> Result<Self> {
        GSeries::new(g, center, Vec::new(), Tail::Exp { lambda, scale: S::one() })
    }

    pub fn polynomial(g: Derivator, center: f64, coeffs: Vec<S>) -> Result<Self> {
        GSeries::new(g, center, coeffs, Tail::Zero)
    }

    /// `a_0..=a_n`.
    pub fn coefficients(&self, n: usize) -> Vec<S> {
        let mut out: Vec<S> = self.coeffs.iter().copied().take(n + 1).collect();
        let len = self.coeffs.len();
        if n + 1 > len {
            match self.tail {
                Tail::None | Tail::Zero => out.resize(n + 1, S::zero()),
                Tail::Exp { lambda, scale } => {
                    let mut t = scale;
                    for k in 1..len {
                        t = t * lambda.scale(1.0 / k as f64);
                    }
                    for k in len..=n {
                        if k > 0 {
                            t = t * lambda.scale(1.0 / k as f64);
                        }
                        out.push(t);
                    }
                }
            }
        }
        out
    }

    /// The attached certificate, or one derived from the tail rule when the
    /// tail is known.
    pub fn certificate(&self) -> Option<f64> {
        if self.growth_cert.is_some() {
            return self.growth_cert;
        }
        let extra = match self.tail {
            Tail::None => return None,
            Tail::Zero => 1.0,
            Tail::Exp { lambda, scale } => lambda.modulus().max(scale.modulus()),
        };
        let lnf = ln_factorial_table();
        let prefix = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, a)| root_growth(a.modulus(), n, &lnf))
            .fold(1.0, f64::max);
        Some(prefix.max(extra).max(1.0))
    }
}

// Bound on sum_{j > n} base rate^j |u_j(x)| for x left of the center, from
// |u_j| <= F(r) / r^j with F(r) = e^(|c| r) prod 1/(1 - d r) over the jumps
// in [x, x0), for any r between rate and 1/max d. A few r are tried.
struct LeftTail {
    ln_base: f64,
    // (ln(rate/r), ln F(r) - ln(1 - rate/r))
    candidates: Vec<(f64, f64)>,
    zero: bool,
}

impl LeftTail {
    fn new(g: &Derivator, center: f64, x: f64, base: f64, rate: f64) -> Self {
        let zero = rate == 0.0 || base == 0.0;
        let c = (g.continuous_value(center) - g.continuous_value(x)).abs();
        let (jumps, neglected) = g.jumps_in(x, center, 1e-17);
        let dmax = jumps.iter().map(|j| j.1).fold(neglected, f64::max);
        let rs: Vec<f64> = if dmax > 0.0 {
            let big = 1.0 / dmax;
            (1..32)
                .map(|k| k as f64 / 32.0)
                .chain((6..31).map(|k| 1.0 - 0.5f64.powi(k)))
                .map(|t| rate + (big - rate) * t)
                .collect()
        } else {
            (1..=200).map(|k| rate * 2f64.powf(k as f64 / 4.0)).collect()
        };
        let candidates = rs
            .into_iter()
            .filter(|&r| r > rate && r * dmax < 1.0)
            .filter_map(|r| {
                let mut ln_f = c * r - jumps.iter().map(|j| (-j.1 * r).ln_1p()).sum::<f64>();
                if neglected > 0.0 {
                    ln_f += neglected * r / (1.0 - neglected * r);
                }
                let q = rate / r;
                let v = (q.ln(), ln_f - (-q).ln_1p());
                (v.0.is_finite() && v.1.is_finite()).then_some(v)
            })
            .collect();
        LeftTail {
            ln_base: base.ln(),
            candidates,
            zero,
        }
    }

    fn bound(&self, n: usize) -> f64 {
        if self.zero {
            return 0.0;
        }
        self.candidates
            .iter()
            .map(|&(lq, lf)| (self.ln_base + lf + (n + 1) as f64 * lq).exp())
            .fold(f64::INFINITY, f64::min)
    }
}

// (|a| n!)^(1/(n+1))
fn root_growth(a: f64, n: usize, lnf: &[f64]) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        ((a.ln() + lnf[n]) / (n + 1) as f64).exp()
    }
}

/// Sum the series at `x` with a certified tail when possible, falling back
/// to an uncertified sum only for series without any certificate.
pub fn eval_series<S: Scalar>(s: &GSeries<S>, x: f64, abs_tol: f64) -> Result<SeriesValue<S>> {
    eval_series_with(s, x, abs_tol, false)
}

/// As [`eval_series`]; with `heuristic` set, points where no certificate
/// applies are summed until three consecutive terms fall below
/// `abs_tol / 10` and reported with `certified = false`.
pub fn eval_series_with<S: Scalar>(
    s: &GSeries<S>,
    x: f64,
    abs_tol: f64,
    heuristic: bool,
) -> Result<SeriesValue<S>> {
    s.g.check_window(x)?;
    let g1 = s.g.value(x) - s.g.value(s.center);
    let right = x >= s.center;
    let len = s.coeffs.len();
    let lnf = ln_factorial_table();

    let (n_last, bound) = match s.tail {
        Tail::Zero => (len, Some(0.0)),
        Tail::Exp { lambda, scale } => {
            let r = lambda.modulus() * g1.abs();
            let sc = scale.modulus();
            let left = (!right).then(|| LeftTail::new(&s.g, s.center, x, sc, lambda.modulus()));
            let rem = |n: usize| match &left {
                None => sc * exp_remainder(r, n, &lnf),
                Some(l) => l.bound(n),
            };
            let mut n = len.max(1) - 1;
            while n < MAX_TERMS && rem(n) > abs_tol {
                n += 1;
            }
            if rem(n) <= abs_tol {
                (n + 1, Some(rem(n)))
            } else if !right && !heuristic {
                return Err(Error::NotCertified(format!(
                    "no tail bound below {abs_tol:e} at {x}, left of the center"
                )));
            } else if !right || heuristic {
                (0, None)
            } else {
                return Err(Error::NotCertified(format!(
                    "more than {MAX_TERMS} terms needed at {x}"
                )));
            }
        }
        Tail::None => match s.growth_cert {
            Some(m) => {
                let n = len.max(1) - 1;
                let q = m * g1.abs();
                let rem = if len == 0 {
                    m
                } else if right {
                    m * exp_remainder(q, n, &lnf)
                } else {
                    LeftTail::new(&s.g, s.center, x, m, m).bound(n)
                };
                if rem <= abs_tol {
                    (len, Some(rem))
                } else if heuristic {
                    (len, None)
                } else if !right && rem.is_infinite() {
                    return Err(Error::NotCertified(format!(
                        "a jump in [{x}, {}) of size at least 1/M = {} blocks the tail bound",
                        s.center,
                        1.0 / m
                    )));
                } else {
                    return Err(Error::NotCertified(format!(
                        "stored prefix of {len} terms leaves a tail bound {rem:e} > {abs_tol:e} at {x}"
                    )));
                }
            }
            None => (len, None),
        },
    };

    if let Some(b) = bound {
        let u = normalized_monomials(&s.g, s.center, x, n_last.max(1) - 1);
        let a = s.coefficients(n_last.max(1) - 1);
        let mut value = S::zero();
        for n in 0..n_last {
            value += scaled_term(a[n], u[n], n, 0, &lnf);
        }
        return Ok(SeriesValue {
            value,
            terms: n_last,
            tail_bound: b,
            certified: true,
        });
    }

    // Uncertified: stored prefix for unknown tails, otherwise sum until the
    // terms die out.
    let target = abs_tol / 10.0;
    let small_run = |terms: &[S]| terms.len() >= 3 && terms[terms.len() - 3..].iter().all(|t| t.modulus() < target);
    let mut cap = if matches!(s.tail, Tail::None) { len } else { (len + 64).min(MAX_TERMS) };
    loop {
        let u = normalized_monomials(&s.g, s.center, x, cap.max(1) - 1);
        let a = s.coefficients(cap.max(1) - 1);
        let terms: Vec<S> = (0..cap).map(|n| scaled_term(a[n], u[n], n, 0, &lnf)).collect();
        if small_run(&terms) {
            let value = terms.iter().copied().sum();
            return Ok(SeriesValue {
                value,
                terms: cap,
                tail_bound: terms[cap - 1].modulus(),
                certified: false,
            });
        }
        if matches!(s.tail, Tail::None) || cap >= MAX_TERMS {
            return Err(Error::DivergenceDetected(format!(
                "terms of the series at {x} do not fall below {target:e}"
            )));
        }
        cap = (cap * 2).min(MAX_TERMS);
    }
}

/// `integral_{[x0, x)} f d mu_g` as a series: `b_0 = 0`, `b_{n+1} = a_n/(n+1)`.
pub fn integrate_series<S: Scalar>(s: &GSeries<S>) -> GSeries<S> {
    let mut coeffs = Vec::with_capacity(s.coeffs.len() + 1);
    coeffs.push(S::zero());
    for (n, &a) in s.coeffs.iter().enumerate() {
        coeffs.push(a.scale(1.0 / (n + 1) as f64));
    }
    let tail = match s.tail {
        Tail::Exp { lambda, scale } => {
            if lambda.modulus() == 0.0 {
                if s.coeffs.is_empty() {
                    // a_0 = scale and nothing after it
                    coeffs.push(scale);
                }
                Tail::Zero
            } else {
                Tail::Exp {
                    lambda,
                    scale: scale * lambda.powi(-1),
                }
            }
        }
        t => t,
    };
    GSeries {
        g: s.g.clone(),
        center: s.center,
        coeffs,
        tail,
        growth_cert: s.growth_cert,
    }
}

/// The k-th g-derivative as a series: `c_n = a_{n+k} (n+k)!/n!`.
pub fn differentiate_series<S: Scalar>(s: &GSeries<S>, k: usize) -> GSeries<S> {
    let coeffs = s
        .coeffs
        .iter()
        .enumerate()
        .skip(k)
        .map(|(n, &a)| {
            let m = n - k;
            let ratio: f64 = ((m + 1)..=n).map(|j| j as f64).product();
            a.scale(ratio)
        })
        .collect();
    let tail = match s.tail {
        Tail::Exp { lambda, scale } => Tail::Exp {
            lambda,
            scale: scale * lambda.powi(k as i32),
        },
        t => t,
    };
    GSeries {
        g: s.g.clone(),
        center: s.center,
        coeffs,
        tail,
        growth_cert: s.growth_cert.map(|m| m.powi(k as i32 + 1)),
    }
}

/// The `k`-th g-derivative of the series summed at `x`. For a stored prefix
/// with certificate `M`, the tail is bounded through
/// `|a_(n+k)| (n+k)! <= M^(k+1) M^n`, which is much sharper than the
/// certificate `M^(k+1)` carried by [`differentiate_series`].
pub fn eval_derivative<S: Scalar>(s: &GSeries<S>, k: usize, x: f64, abs_tol: f64) -> Result<SeriesValue<S>> {
    let d = differentiate_series(s, k);
    let m = match (s.tail, s.growth_cert) {
        (Tail::None, Some(m)) => m,
        _ => return eval_series(&d, x, abs_tol),
    };
    s.g.check_window(x)?;
    let len = d.coeffs.len();
    let base = m.powi(k as i32 + 1);
    let tail = if len == 0 {
        f64::INFINITY
    } else if x >= s.center {
        let q = m * (s.g.value(x) - s.g.value(s.center));
        base * exp_remainder(q, len - 1, ln_factorial_table())
    } else {
        LeftTail::new(&s.g, s.center, x, base, m).bound(len - 1)
    };
    if !(tail <= abs_tol) {
        return Err(Error::NotCertified(format!(
            "derivative of order {k} at {x}: tail bound {tail:e} > {abs_tol:e} with {len} terms"
        )));
    }
    let lnf = ln_factorial_table();
    let u = normalized_monomials(&s.g, s.center, x, len - 1);
    let mut value = S::zero();
    for n in 0..len {
        value += scaled_term(d.coeffs[n], u[n], n, 0, lnf);
    }
    Ok(SeriesValue {
        value,
        terms: len,
        tail_bound: tail,
        certified: true,
    })
}

/// Re-center the series at `new_center`:
/// `b_k = (1/k!) sum_{n>=k} a_n n!/(n-k)! g_{x0,n-k}(new_center)`, with
/// every inner sum truncated to within `abs_tol`.
///
/// For a tail without rule the recentered prefix stops at the first index
/// whose inner sum cannot be closed to `abs_tol`.
pub fn recenter_series<S: Scalar>(s: &GSeries<S>, new_center: f64, abs_tol: f64) -> Result<GSeries<S>> {
    s.g.check_window(new_center)?;
    let g1 = s.g.value(new_center) - s.g.value(s.center);
    let right = new_center >= s.center;
    let len = s.coeffs.len();
    let cert = s.certificate();
    let lnf = ln_factorial_table();

    if let Some(m) = cert {
        if !right && m * g1.abs() >= 1.0 && !matches!(s.tail, Tail::Zero) {
            return Err(Error::NotCertified(format!(
                "M |g1({new_center})| = {} >= 1 to the left of the center",
                m * g1.abs()
            )));
        }
    }
    // Bound on the part of inner sum k beyond index j, divided by M^(k+1)/k!.
    let inner_rem = |m: f64, j: usize| {
        if right {
            exp_remainder(m * g1.abs(), j, &lnf)
        } else {
            geometric_remainder(m * g1.abs(), j)
        }
    };
    let k_count = len;
    let mut j_max = len.max(1) - 1;
    if let (Tail::Exp { .. }, Some(m)) = (s.tail, cert) {
        // inner sums need enough monomials for the worst (k = 0) bound
        while j_max < MAX_TERMS && m * inner_rem(m, j_max) > abs_tol {
            j_max += 1;
        }
    }
    let u = normalized_monomials(&s.g, s.center, new_center, j_max.max(len));
    let a = s.coefficients(j_max + len);

    let mut out = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let last = match s.tail {
            Tail::Zero | Tail::None => len - 1 - k,
            Tail::Exp { .. } => {
                let m = cert.expect("exponential tails always have a certificate");
                let scale_k = (m.ln() * (k + 1) as f64 - lnf[k]).exp();
                let mut j = len.saturating_sub(k + 1);
                while j < j_max && scale_k * inner_rem(m, j) > abs_tol {
                    j += 1;
                }
                j
            }
        };
        let terms: Vec<S> = (0..=last).map(|j| scaled_term(a[j + k], u[j], j + k, k, &lnf)).collect();
        let ok = match (s.tail, cert) {
            (Tail::Zero, _) => true,
            (_, Some(m)) => {
                let scale_k = (m.ln() * (k + 1) as f64 - lnf[k]).exp();
                scale_k * inner_rem(m, last) <= abs_tol
            }
            (_, None) => {
                terms.len() >= 3 && terms[terms.len() - 3..].iter().all(|t| t.modulus() < abs_tol / 10.0)
            }
        };
        if !ok {
            if k == 0 {
                return Err(Error::NotCertified(format!(
                    "inner sums at {new_center} cannot be closed to {abs_tol:e}"
                )));
            }
            break;
        }
        out.push(terms.into_iter().sum());
    }

    let tail = match s.tail {
        Tail::Exp { lambda, scale } => {
            // for k past the prefix every inner term comes from the tail:
            // b_k = scale exp_g(lambda)(new_center) lambda^k / k!
            let e: S = (0..=j_max).map(|j| scaled_term(lambda.powi(j as i32), u[j], j, j, &lnf)).sum();
            Tail::Exp { lambda, scale: scale * e }
        }
        t => t,
    };
    let growth_cert = match (cert, s.tail) {
        (Some(m), _) if right => Some(m * (m * g1).exp()),
        (Some(m), _) if m * g1.abs() < 1.0 => Some(m / (1.0 - m * g1.abs())),
        _ => None,
    };
    Ok(GSeries {
        g: s.g.clone(),
        center: new_center,
        coeffs: out,
        tail,
        growth_cert,
    })
}

/// Recover `a_0..=a_n_max` as `f^(n)_g(t) / n!` from numerical
/// g-derivatives of the evaluated series at its center `t`.
pub fn coefficients_from_derivatives<S: Scalar>(s: &GSeries<S>, t: f64, n_max: usize) -> Result<Vec<S>> {
    if t != s.center {
        return Err(Error::InvalidConfig(format!(
            "coefficients are read off at the center {}, not at {t}",
            s.center
        )));
    }
    s.g.check_window(t)?;
    if n_max >= 2 && s.g.regular_extent_right(t) == 0.0 {
        return Err(Error::NotIdentifiable(format!(
            "g is not increasing immediately to the right of {t}, so coefficients beyond a_1 are not determined"
        )));
    }
    let f = |x: f64| {
        eval_series_with(s, x, 1e-15, true)
            .map(|v| v.value)
            .unwrap_or_else(|_| S::from_f64(f64::NAN))
    };
    let d = g_derivatives_at(&s.g, f, t, n_max)?;
    Ok(d.into_iter()
        .enumerate()
        .map(|(n, v)| v.scale(1.0 / factorial(n)))
        .collect())
}

/// Growth constant `M` with `|a_n| <= M^(n+1)/n!` for a series declared
/// absolutely convergent at the jump point `c` left of the center.
///
/// Absolute convergence at `c` forces `|a_n| n! dg(c)^n -> 0`, so the root
/// `(|a_n| n!)^(1/(n+1))` settles below `(1 + eps)/dg(c)`; earlier
/// coefficients are absorbed into `M`. A prefix whose last root still
/// exceeds that rate contradicts the declaration.
pub fn left_growth_bound<S: Scalar>(s: &GSeries<S>, c: f64, eps: f64) -> Result<f64> {
    s.g.check_window(c)?;
    let d = s.g.jump_at(c);
    if !(c < s.center && d > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "{c} must be a jump point left of the center {}",
            s.center
        )));
    }
    let mut theta = (1.0 + eps) / d;
    if let Tail::Exp { lambda, .. } = s.tail {
        theta = theta.max(lambda.modulus() * (1.0 + eps));
    }
    let lnf = ln_factorial_table();
    let roots: Vec<f64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, a)| root_growth(a.modulus(), n, &lnf))
        .collect();
    if let Some(&last) = roots.last() {
        if last > theta {
            return Err(Error::BoundViolated(format!(
                "(|a_n| n!)^(1/(n+1)) = {last:e} at n = {} is above the rate {theta:e} forced by convergence at {c}",
                roots.len() - 1
            )));
        }
    }
    let settled = roots.iter().rposition(|&r| r > theta).map_or(0, |i| i + 1);
    let mut m = roots[..settled].iter().copied().fold(theta.max(1.0), f64::max);
    if let Tail::Exp { scale, .. } = s.tail {
        m = m.max(scale.modulus());
    }
    Ok(m)
}

/// Series literal: `{center, coeffs, tail: {kind, lambda, scale}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesLiteral {
    pub center: f64,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    #[serde(default)]
    pub tail: TailLiteral,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_cert: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailLiteral {
    pub kind: TailKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailKind {
    #[default]
    None,
    Zero,
    Exp,
}

impl SeriesLiteral {
    pub fn into_series(self, g: Derivator) -> Result<GSeries<f64>> {
        let tail = match self.tail.kind {
            TailKind::None => Tail::None,
            TailKind::Zero => Tail::Zero,
            TailKind::Exp => Tail::Exp {
                lambda: self.tail.lambda.ok_or_else(|| {
                    Error::InvalidConfig("exponential tail needs lambda".into())
                })?,
                scale: self.tail.scale.unwrap_or(1.0),
            },
        };
        let s = GSeries::new(g, self.center, self.coeffs, tail)?;
        match self.growth_cert {
            Some(m) => s.with_certificate(m),
            None => Ok(s),
        }
    }

    pub fn from_series(s: &GSeries<f64>) -> Self {
        let tail = match s.tail {
            Tail::None => TailLiteral::default(),
            Tail::Zero => TailLiteral {
                kind: TailKind::Zero,
                ..Default::default()
            },
            Tail::Exp { lambda, scale } => TailLiteral {
                kind: TailKind::Exp,
                lambda: Some(lambda),
                scale: Some(scale),
            },
        };
        SeriesLiteral {
            center: s.center,
            coeffs: s.coeffs.clone(),
            tail,
            growth_cert: s.growth_cert,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivator::{DerivatorConfig, SegmentConfig};
    use crate::fixtures;
    use crate::integral::{g_derivative, integrate, DerivativeOptions, Quadrature};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn ones(g: Derivator, n: usize) -> GSeries<f64> {
        GSeries::new(g, 0.0, vec![1.0; n], Tail::None).unwrap()
    }

    #[test]
    fn exponential_on_identity() {
        let s = GSeries::exp(Derivator::identity(-5.0, 5.0), 0.0, 1.0).unwrap();
        let v = eval_series(&s, 1.0, 1e-12).unwrap();
        assert!(v.certified);
        assert!((v.value - E).abs() < 1e-10);
    }

    #[test]
    fn geometric_series_on_unit_jump_derivator() {
        let s = ones(fixtures::identity_with_unit_jump(), 120);
        let v = eval_series(&s, 0.5, 1e-12).unwrap();
        assert!(!v.certified);
        assert!((v.value - 6.0).abs() < 1e-9);
        let v = eval_series(&s, -0.5, 1e-12).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-9);
        // the terms n 0.5^(n-1) have not died out after 10 terms
        let short = ones(fixtures::identity_with_unit_jump(), 10);
        assert!(matches!(eval_series(&short, 0.5, 1e-12), Err(Error::DivergenceDetected(_))));
    }

    #[test]
    fn left_certification_needs_a_small_radius() {
        let g = fixtures::single_jump(-1.0, 1.0);
        let s = GSeries::exp(g, 0.0, 2.0).unwrap();
        // |lambda g1(-2)| = 2
        assert!(matches!(eval_series(&s, -2.0, 1e-12), Err(Error::NotCertified(_))));
        let s = GSeries::exp(fixtures::single_jump(-1.0, 1.0), 0.0, 0.5).unwrap();
        let v = eval_series(&s, -2.0, 1e-13).unwrap();
        // sum (1/2)^n n! (-1)^n / n! = 1/(1 + 1/2)
        assert!((v.value - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_examples() {
        let g = fixtures::identity_with_unit_jump();
        let one = GSeries::polynomial(g.clone(), 0.0, vec![1.0]).unwrap();
        assert_eq!(integrate_series(&one).coeffs, vec![0.0, 1.0]);
        let zero = GSeries::<f64>::polynomial(g.clone(), 0.0, vec![]).unwrap();
        let z = integrate_series(&zero);
        assert_eq!(eval_series(&z, 1.0, 1e-12).unwrap().value, 0.0);

        let e = GSeries::exp(g.clone(), 0.0, 0.5).unwrap();
        let ie = integrate_series(&e);
        let direct: f64 = integrate(
            &g,
            |s| eval_series(&e, s, 1e-14).unwrap().value,
            0.0,
            0.5,
            &Quadrature::default(),
        )
        .unwrap();
        let via = eval_series(&ie, 0.5, 1e-14).unwrap().value;
        assert!((direct - via).abs() < 1e-9, "{direct} vs {via}");
        let closed = (eval_series(&e, 0.5, 1e-14).unwrap().value - 1.0) / 0.5;
        assert!((closed - via).abs() < 1e-12);
    }

    #[test]
    fn differentiate_examples() {
        let g = fixtures::identity_with_unit_jump();
        let pure = GSeries::polynomial(g.clone(), 0.0, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(differentiate_series(&pure, 1).coeffs, vec![0.0, 2.0]);
        assert_eq!(differentiate_series(&pure, 0).coeffs, pure.coeffs);
        let e = GSeries::exp(g, 0.0, 0.75).unwrap();
        let d = differentiate_series(&e, 1);
        assert_eq!(d.tail, Tail::Exp { lambda: 0.75, scale: 0.75 });
    }

    #[test]
    fn recenter_examples() {
        let id = Derivator::identity(-5.0, 5.0);
        let sq = GSeries::polynomial(id, 0.0, vec![0.0, 0.0, 1.0]).unwrap();
        let r = recenter_series(&sq, 1.0, 1e-14).unwrap();
        assert_eq!(r.coeffs, vec![1.0, 2.0, 1.0]);
        let same = recenter_series(&sq, 0.0, 1e-14).unwrap();
        assert_eq!(same.coeffs, sq.coeffs);

        let s = ones(fixtures::identity_with_unit_jump(), 200);
        let r = recenter_series(&s, 0.5, 1e-12).unwrap();
        for k in 0..6 {
            let want = 2f64.powi(k + 1) + (k + 1) as f64 * 2f64.powi(k + 2);
            let got = r.coeffs[k as usize];
            assert!((got - want).abs() < 1e-9 * want, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn recentered_exponential_agrees() {
        let g = fixtures::identity_with_unit_jump();
        let e = GSeries::exp(g, -0.5, 0.8).unwrap();
        let r = recenter_series(&e, 0.25, 1e-14).unwrap();
        assert!(r.growth_cert.is_some());
        for &x in &[0.25, 0.5, 1.5, 3.0] {
            let a = eval_series(&e, x, 1e-13).unwrap().value;
            let b = eval_series(&r, x, 1e-13).unwrap().value;
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn coefficient_recovery() {
        let id = Derivator::identity(-5.0, 5.0);
        let p = GSeries::polynomial(id, 0.0, vec![1.0, 2.0, 3.0]).unwrap();
        let c = coefficients_from_derivatives(&p, 0.0, 2).unwrap();
        for (got, want) in c.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        let g = fixtures::identity_with_unit_jump();
        let e = GSeries::exp(g, 0.0, 0.7).unwrap();
        let c = coefficients_from_derivatives(&e, 0.0, 3).unwrap();
        let want = e.coefficients(3);
        for n in 0..=3 {
            assert!((c[n] - want[n]).abs() < 1e-5, "n={n}: {} vs {}", c[n], want[n]);
        }
        let st = GSeries::exp(fixtures::integer_staircase(), 0.0, 0.7).unwrap();
        assert!(matches!(
            coefficients_from_derivatives(&st, 0.0, 3),
            Err(Error::NotIdentifiable(_))
        ));
    }

    #[test]
    fn left_growth_examples() {
        let g = fixtures::single_jump(-1.0, 0.3);
        let e = GSeries::exp(g.clone(), 0.0, 2.5).unwrap();
        let m = left_growth_bound(&e, -1.0, 1e-6).unwrap();
        assert!(m >= 2.5);
        assert!(e.clone().with_certificate(m).is_ok());

        let fact: Vec<f64> = (0..20).map(factorial).collect();
        let bad = GSeries::new(g.clone(), 0.0, fact, Tail::None).unwrap();
        assert!(matches!(left_growth_bound(&bad, -1.0, 1e-6), Err(Error::BoundViolated(_))));

        let wide = fixtures::single_jump(-1.0, 2.0);
        let zero = GSeries::<f64>::polynomial(wide, 0.0, vec![0.0; 5]).unwrap();
        assert_eq!(left_growth_bound(&zero, -1.0, 1e-6).unwrap(), 1.0);
    }

    #[test]
    fn complex_coefficients() {
        let s = GSeries::exp(Derivator::identity(-5.0, 5.0), 0.0, Complex64::new(0.0, 1.0)).unwrap();
        let v = eval_series(&s, 1.0, 1e-13).unwrap().value;
        assert!((v - Complex64::new(1f64.cos(), 1f64.sin())).norm() < 1e-12);
    }

    #[test]
    fn literal_round_trip() {
        let text = r#"{"center":0.0,"coeffs":[1.0,0.5],"tail":{"kind":"exp","lambda":2.0,"scale":1.0}}"#;
        let lit: SeriesLiteral = serde_json::from_str(text).unwrap();
        let s = lit.clone().into_series(fixtures::identity_with_unit_jump()).unwrap();
        assert_eq!(SeriesLiteral::from_series(&s), lit);
        let bare: SeriesLiteral = serde_json::from_str(r#"{"center":1.0,"coeffs":[3.0]}"#).unwrap();
        assert_eq!(bare.tail.kind, TailKind::None);
    }

    fn random_g(slopes: &[f64], jumps: &[(f64, f64)]) -> Derivator {
        let mut c = DerivatorConfig::new(-5.0, 5.0);
        let cuts = [-5.0, -1.5, 1.0, 5.0];
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
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn integrate_then_differentiate_is_identity(
            coeffs in prop::collection::vec(-3.0f64..3.0, 0..12),
        ) {
            let s = GSeries::polynomial(fixtures::identity_with_unit_jump(), 0.0, coeffs).unwrap();
            let back = differentiate_series(&integrate_series(&s), 1);
            // a / (n+1) * (n+1) is a only up to one rounding
            prop_assert_eq!(back.coeffs.len(), s.coeffs.len());
            for (b, a) in back.coeffs.iter().zip(&s.coeffs) {
                prop_assert!((b - a).abs() <= 2.0 * f64::EPSILON * a.abs());
            }
        }

        #[test]
        fn series_level_fundamental_theorem(
            slopes in prop::collection::vec(prop_oneof![Just(0.0), 0.2f64..2.0], 3),
            jumps in prop::collection::btree_map(-40i32..40, 0.1f64..1.0, 0..4),
            lambda in -1.5f64..1.5,
            x in 0.0f64..2.0,
        ) {
            let jumps: Vec<(f64, f64)> = jumps.into_iter().map(|(k, h)| (k as f64 / 10.0, h)).collect();
            let g = random_g(&slopes, &jumps);
            let e = GSeries::exp(g.clone(), -0.5, lambda).unwrap();
            let via = eval_series(&integrate_series(&e), x, 1e-13).unwrap().value;
            let direct: f64 = integrate(&g, |s| eval_series(&e, s, 1e-13).unwrap().value, -0.5, x, &Quadrature::default()).unwrap();
            prop_assert!((via - direct).abs() < 1e-8 * (1.0 + direct.abs()), "{via} vs {direct}");
        }

        #[test]
        fn derivative_of_series_is_series_of_derivative(
            slopes in prop::collection::vec(0.2f64..2.0, 3),
            jumps in prop::collection::btree_map(-40i32..40, 0.1f64..1.0, 0..4),
            lambda in -1.5f64..1.5,
            x in -0.4f64..3.0,
        ) {
            let jumps: Vec<(f64, f64)> = jumps.into_iter().map(|(k, h)| (k as f64 / 10.0, h)).collect();
            let g = random_g(&slopes, &jumps);
            let e = GSeries::exp(g.clone(), -0.5, lambda).unwrap();
            let d = g_derivative(&g, |s| eval_series(&e, s, 1e-15).unwrap().value, x, &DerivativeOptions::default()).unwrap();
            let want = eval_series(&differentiate_series(&e, 1), x, 1e-15).unwrap().value;
            prop_assert!((d - want).abs() < 1e-5 * (1.0 + want.abs()), "{d} vs {want}");
        }
    }
}
