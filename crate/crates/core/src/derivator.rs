//! Derivators: left-continuous non-decreasing functions made of a piecewise
//! affine continuous part, a finite list of jumps and at most one geometric
//! jump generator accumulating at a point.
//!
//! The jump part is normalized at the origin, so that
//! `g(x) = continuous(x) + J(x) - J(0)` where `J(x)` is the total size of
//! the jumps located strictly below `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Tolerance for the continuity check at declared breakpoints.
const SEAM_TOL: f64 = 1e-12;

// Hard cap on how many generator jumps are ever enumerated.
const GENERATOR_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentConfig {
    Affine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<f64>,
        slope: f64,
        intercept: f64,
    },
    Identity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<f64>,
    },
}

impl SegmentConfig {
    pub fn affine(from: Option<f64>, to: Option<f64>, slope: f64, intercept: f64) -> Self {
        SegmentConfig::Affine {
            from,
            to,
            slope,
            intercept,
        }
    }

    pub fn identity() -> Self {
        SegmentConfig::Identity {
            from: None,
            to: None,
        }
    }

    fn bounds(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            SegmentConfig::Affine { from, to, .. } | SegmentConfig::Identity { from, to } => {
                (from, to)
            }
        }
    }

    fn coefficients(&self) -> (f64, f64) {
        match *self {
            SegmentConfig::Affine {
                slope, intercept, ..
            } => (slope, intercept),
            SegmentConfig::Identity { .. } => (1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpConfig {
    pub x: f64,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorRule {
    Geometric,
}

/// Countably many jumps accumulating at `accumulation`. Jump `k >= 1` has
/// size `first_size * ratio^(k-1)` and sits at distance equal to its size
/// from the accumulation point, on the given side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub accumulation: f64,
    pub side: Side,
    pub rule: GeneratorRule,
    pub first_size: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivatorConfig {
    #[serde(default)]
    pub continuous: Vec<SegmentConfig>,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    pub window: [f64; 2],
}

/// A derivator given inline or as a path to a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DerivatorSource {
    Path(String),
    Inline(DerivatorConfig),
}

impl DerivatorSource {
    /// Relative paths are resolved against `base`.
    pub fn load(&self, base: Option<&std::path::Path>) -> Result<Derivator> {
        match self {
            DerivatorSource::Inline(c) => Derivator::from_config(c.clone()),
            DerivatorSource::Path(p) => {
                let path = match base {
                    Some(b) if std::path::Path::new(p).is_relative() => b.join(p),
                    _ => p.into(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
                })?;
                Derivator::from_json(&text)
            }
        }
    }
}

impl DerivatorConfig {
    pub fn new(lo: f64, hi: f64) -> Self {
        DerivatorConfig {
            continuous: Vec::new(),
            jumps: Vec::new(),
            generator: None,
            window: [lo, hi],
        }
    }

    pub fn segment(mut self, s: SegmentConfig) -> Self {
        self.continuous.push(s);
        self
    }

    pub fn jump(mut self, x: f64, size: f64) -> Self {
        self.jumps.push(JumpConfig { x, size });
        self
    }

    pub fn generator(mut self, accumulation: f64, side: Side, first_size: f64, ratio: f64) -> Self {
        self.generator = Some(GeneratorConfig {
            accumulation,
            side,
            rule: GeneratorRule::Geometric,
            first_size,
            ratio,
        });
        self
    }

    pub fn build(self) -> Result<Derivator> {
        Derivator::from_config(self)
    }
}

/// Classification of a point with respect to the jump set and the constancy
/// components of g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointClass {
    Jump,
    /// Interior of a constancy component; carries its right endpoint
    /// (possibly `+inf`).
    ConstantInterior { component_end: f64 },
    LeftEndpoint,
    RightEndpoint,
    Regular,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    slope: f64,
    intercept: f64,
}

impl Piece {
    fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub accumulation: f64,
    pub side: Side,
    pub first_size: f64,
    pub ratio: f64,
    // Number of jumps whose location is distinguishable from the
    // accumulation point in floating point.
    resolved: usize,
}

impl Generator {
    fn new(c: &GeneratorConfig) -> Result<Self> {
        if !(c.accumulation.is_finite() && c.first_size.is_finite() && c.first_size > 0.0) {
            return Err(Error::InvalidConfig(
                "generator needs a finite accumulation point and first_size > 0".into(),
            ));
        }
        if !(c.ratio.is_finite() && c.ratio > 0.0) {
            return Err(Error::InvalidConfig("generator ratio must be positive".into()));
        }
        if c.ratio >= 1.0 {
            return Err(Error::GeneratorUnbounded(format!(
                "geometric ratio {} >= 1 gives infinite jump mass",
                c.ratio
            )));
        }
        let mut gen = Generator {
            accumulation: c.accumulation,
            side: c.side,
            first_size: c.first_size,
            ratio: c.ratio,
            resolved: 0,
        };
        let mut k = 1;
        while k <= GENERATOR_CAP && gen.size(k) > 0.0 && gen.location(k) != gen.accumulation {
            k += 1;
        }
        gen.resolved = k - 1;
        Ok(gen)
    }

    pub fn size(&self, k: usize) -> f64 {
        self.first_size * self.ratio.powi(k as i32 - 1)
    }

    pub fn location(&self, k: usize) -> f64 {
        match self.side {
            Side::Left => self.accumulation - self.size(k),
            Side::Right => self.accumulation + self.size(k),
        }
    }

    pub fn total(&self) -> f64 {
        self.first_size / (1.0 - self.ratio)
    }

    /// Mass of jumps `k, k+1, ...`.
    pub fn tail_from(&self, k: usize) -> f64 {
        if k <= 1 {
            self.total()
        } else {
            self.size(k) / (1.0 - self.ratio)
        }
    }

    // Largest k in [0, resolved] with pred(1..=k) all true; pred monotone.
    fn prefix_len(&self, pred: impl Fn(usize) -> bool) -> usize {
        let (mut lo, mut hi) = (0usize, self.resolved);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if pred(mid) {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Total size of generator jumps located strictly below `x`.
    fn mass_below(&self, x: f64) -> f64 {
        match self.side {
            Side::Left => {
                if x > self.accumulation {
                    self.total()
                } else {
                    let k = self.prefix_len(|k| self.location(k) < x);
                    self.total() - self.tail_from(k + 1)
                }
            }
            Side::Right => {
                if x <= self.accumulation {
                    0.0
                } else {
                    let k = self.prefix_len(|k| self.location(k) >= x);
                    self.tail_from(k + 1)
                }
            }
        }
    }

    fn index_at(&self, x: f64) -> Option<usize> {
        let k = match self.side {
            Side::Left => {
                if x >= self.accumulation {
                    return None;
                }
                self.prefix_len(|k| self.location(k) < x) + 1
            }
            Side::Right => {
                if x <= self.accumulation {
                    return None;
                }
                self.prefix_len(|k| self.location(k) > x) + 1
            }
        };
        (k <= self.resolved && self.location(k) == x).then_some(k)
    }

    /// Smallest generator feature (jump location or accumulation point)
    /// strictly above `x`.
    fn next_above(&self, x: f64) -> Option<f64> {
        match self.side {
            Side::Left => {
                if x >= self.accumulation {
                    return None;
                }
                let k = self.prefix_len(|k| self.location(k) <= x) + 1;
                Some(if k <= self.resolved {
                    self.location(k)
                } else {
                    self.accumulation
                })
            }
            Side::Right => {
                if x <= self.accumulation {
                    return Some(self.accumulation);
                }
                let k = self.prefix_len(|k| self.location(k) > x);
                (k >= 1).then(|| self.location(k))
            }
        }
    }

    /// Largest generator feature strictly below `x`.
    fn prev_below(&self, x: f64) -> Option<f64> {
        match self.side {
            Side::Left => {
                // jumps accumulate at the accumulation point from below
                if x >= self.accumulation {
                    return Some(self.accumulation);
                }
                let k = self.prefix_len(|k| self.location(k) < x);
                (k >= 1).then(|| self.location(k))
            }
            Side::Right => {
                if x <= self.accumulation {
                    return None;
                }
                let k = self.prefix_len(|k| self.location(k) >= x) + 1;
                Some(if k <= self.resolved {
                    self.location(k)
                } else {
                    self.accumulation
                })
            }
        }
    }

    /// Index of the first jump left out when only jumps of size at least
    /// `threshold` are kept.
    fn first_below(&self, threshold: f64) -> usize {
        self.prefix_len(|k| self.size(k) >= threshold) + 1
    }
}

/// A derivator. Immutable once built; every query is a pure function.
#[derive(Debug, Clone)]
pub struct Derivator {
    config: DerivatorConfig,
    pieces: Vec<Piece>,
    jump_x: Vec<f64>,
    jump_size: Vec<f64>,
    // cum[i] = jump_size[0] + ... + jump_size[i-1]
    cum: Vec<f64>,
    generator: Option<Generator>,
    window: (f64, f64),
    origin_mass: f64,
}

impl PartialEq for Derivator {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
    }
}

impl Derivator {
    pub fn from_config(config: DerivatorConfig) -> Result<Self> {
        let [lo, hi] = config.window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "window [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        let pieces = build_pieces(&config.continuous)?;

        let mut jump_x = Vec::with_capacity(config.jumps.len());
        let mut jump_size = Vec::with_capacity(config.jumps.len());
        for (i, j) in config.jumps.iter().enumerate() {
            if !j.x.is_finite() {
                return Err(Error::InvalidConfig(format!("jump {i} has non-finite location")));
            }
            if !(j.size.is_finite() && j.size > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "jump at {} has size {}; sizes must be positive",
                    j.x, j.size
                )));
            }
            if let Some(&prev) = jump_x.last() {
                if j.x <= prev {
                    return Err(Error::InvalidConfig(format!(
                        "jump locations must be strictly increasing ({} after {})",
                        j.x, prev
                    )));
                }
            }
            jump_x.push(j.x);
            jump_size.push(j.size);
        }
        let mut cum = Vec::with_capacity(jump_size.len() + 1);
        cum.push(0.0);
        for s in &jump_size {
            cum.push(cum.last().unwrap() + s);
        }

        let generator = config.generator.as_ref().map(Generator::new).transpose()?;
        if let Some(gen) = &generator {
            for &x in &jump_x {
                if gen.index_at(x).is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "explicit jump at {x} coincides with a generator jump"
                    )));
                }
            }
        }

        let mut g = Derivator {
            config,
            pieces,
            jump_x,
            jump_size,
            cum,
            generator,
            window: (lo, hi),
            origin_mass: 0.0,
        };
        g.origin_mass = g.mass_below(0.0);

        // The construction guarantees monotonicity; this catches seams that
        // passed the tolerance but still step downwards.
        let n = 256;
        let mut prev = g.value(lo);
        for i in 1..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let v = g.value(x);
            if v < prev - SEAM_TOL * (1.0 + prev.abs()) {
                return Err(Error::InvalidConfig(format!(
                    "derivator decreases near x = {x}"
                )));
            }
            prev = v;
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: DerivatorConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("derivator config: {e}")))?;
        Self::from_config(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.config).expect("config serializes")
    }

    pub fn config(&self) -> &DerivatorConfig {
        &self.config
    }

    /// The identity derivator on the given window.
    pub fn identity(lo: f64, hi: f64) -> Self {
        DerivatorConfig::new(lo, hi)
            .segment(SegmentConfig::identity())
            .build()
            .expect("identity derivator is valid")
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn has_jumps(&self) -> bool {
        !self.jump_x.is_empty() || self.generator.is_some()
    }

    pub fn in_window(&self, x: f64) -> bool {
        x >= self.window.0 && x <= self.window.1
    }

    pub fn check_window(&self, x: f64) -> Result<()> {
        if self.in_window(x) {
            Ok(())
        } else {
            Err(Error::OutOfWindow {
                x,
                lo: self.window.0,
                hi: self.window.1,
            })
        }
    }

    /// g(x), left-continuous.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_window(x)?;
        Ok(self.value(x))
    }

    /// Jump size at x, zero off the jump set.
    pub fn delta(&self, x: f64) -> Result<f64> {
        self.check_window(x)?;
        Ok(self.jump_at(x))
    }

    /// g(x) without the window check.
    pub(crate) fn value(&self, x: f64) -> f64 {
        self.continuous_value(x) + self.jump_value(x)
    }

    pub(crate) fn continuous_value(&self, x: f64) -> f64 {
        self.piece_at(x).at(x)
    }

    /// The normalized jump part: mass in [0, x) for x > 0, minus the mass in
    /// [x, 0) for x <= 0.
    pub(crate) fn jump_value(&self, x: f64) -> f64 {
        self.mass_below(x) - self.origin_mass
    }

    fn mass_below(&self, x: f64) -> f64 {
        let i = self.jump_x.partition_point(|&y| y < x);
        let mut m = self.cum[i];
        if let Some(gen) = &self.generator {
            m += gen.mass_below(x);
        }
        m
    }

    pub(crate) fn jump_at(&self, x: f64) -> f64 {
        let mut d = match self.jump_x.binary_search_by(|y| y.total_cmp(&x)) {
            Ok(i) => self.jump_size[i],
            Err(_) => 0.0,
        };
        if let Some(gen) = &self.generator {
            if let Some(k) = gen.index_at(x) {
                d += gen.size(k);
            }
        }
        d
    }

    fn piece_at(&self, x: f64) -> &Piece {
        let i = self.pieces.partition_point(|p| p.hi < x);
        &self.pieces[i.min(self.pieces.len() - 1)]
    }

    /// Slope of the continuous part just to the right of x.
    pub(crate) fn slope_right(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.hi <= x);
        self.pieces[i.min(self.pieces.len() - 1)].slope
    }

    /// Slope of the continuous part just to the left of x.
    pub(crate) fn slope_left(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.hi < x);
        self.pieces[i.min(self.pieces.len() - 1)].slope
    }

    /// True when the continuous part has zero slope everywhere.
    pub(crate) fn continuous_is_constant(&self) -> bool {
        self.pieces.iter().all(|p| p.slope == 0.0)
    }

    /// Interior breakpoints of the continuous part.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        self.pieces[..self.pieces.len() - 1]
            .iter()
            .map(|p| p.hi)
            .collect()
    }

    /// Nearest jump location or accumulation point strictly above x.
    pub(crate) fn next_barrier(&self, x: f64) -> f64 {
        let i = self.jump_x.partition_point(|&y| y <= x);
        let mut b = self.jump_x.get(i).copied().unwrap_or(f64::INFINITY);
        if let Some(y) = self.generator.as_ref().and_then(|gen| gen.next_above(x)) {
            b = b.min(y);
        }
        b
    }

    /// Nearest jump location or accumulation point strictly below x.
    pub(crate) fn prev_barrier(&self, x: f64) -> f64 {
        let i = self.jump_x.partition_point(|&y| y < x);
        let mut b = if i > 0 {
            self.jump_x[i - 1]
        } else {
            f64::NEG_INFINITY
        };
        if let Some(y) = self.generator.as_ref().and_then(|gen| gen.prev_below(x)) {
            b = b.max(y);
        }
        b
    }

    /// Length of the largest interval (x, x + w) inside the window that has
    /// no jumps and on which the continuous part is strictly increasing.
    pub(crate) fn regular_extent_right(&self, x: f64) -> f64 {
        let mut r = self.next_barrier(x).min(self.window.1);
        let mut i = self.pieces.partition_point(|p| p.hi <= x);
        while i < self.pieces.len() && self.pieces[i].lo < r {
            if self.pieces[i].slope == 0.0 {
                r = r.min(self.pieces[i].lo.max(x));
                break;
            }
            i += 1;
        }
        (r - x).max(0.0)
    }

    /// Mirror image of [`Derivator::regular_extent_right`].
    pub(crate) fn regular_extent_left(&self, x: f64) -> f64 {
        let mut l = self.prev_barrier(x).max(self.window.0);
        let mut i = self
            .pieces
            .partition_point(|p| p.hi < x)
            .min(self.pieces.len() - 1);
        loop {
            let p = &self.pieces[i];
            if p.hi <= l {
                break;
            }
            if p.slope == 0.0 {
                l = l.max(p.hi.min(x));
                break;
            }
            if i == 0 {
                break;
            }
            i -= 1;
        }
        (x - l).max(0.0)
    }

    /// Solve `continuous(y) - continuous(from) = du` for y moving away from
    /// `from` (to the right when `du > 0`, to the left when `du < 0`) across
    /// pieces with positive slope.
    pub(crate) fn continuous_offset_inverse(&self, from: f64, du: f64) -> f64 {
        if du == 0.0 {
            return from;
        }
        let base = self.continuous_value(from);
        let target = base + du;
        if du > 0.0 {
            let mut i = self.pieces.partition_point(|p| p.hi <= from);
            while i < self.pieces.len() {
                let p = &self.pieces[i];
                if p.slope > 0.0 && (p.hi.is_infinite() || p.at(p.hi) >= target) {
                    return (target - p.intercept) / p.slope;
                }
                i += 1;
            }
        } else {
            let mut i = self
                .pieces
                .partition_point(|p| p.hi < from)
                .min(self.pieces.len() - 1);
            loop {
                let p = &self.pieces[i];
                if p.slope > 0.0 && (p.lo.is_infinite() || p.at(p.lo) <= target) {
                    return (target - p.intercept) / p.slope;
                }
                if i == 0 {
                    break;
                }
                i -= 1;
            }
        }
        f64::NAN
    }

    pub fn classify(&self, x: f64) -> Result<PointClass> {
        self.check_window(x)?;
        Ok(self.point_class(x))
    }

    /// End of the constancy interval starting at x, or x if g increases
    /// right after x.
    pub(crate) fn constancy_end_right(&self, x: f64) -> f64 {
        if self.slope_right(x) == 0.0 {
            self.flat_run_end(x).min(self.next_barrier(x))
        } else {
            x
        }
    }

    pub(crate) fn point_class(&self, x: f64) -> PointClass {
        if self.jump_at(x) > 0.0 {
            return PointClass::Jump;
        }
        let lo = if self.slope_left(x) == 0.0 {
            self.flat_run_start(x).max(self.prev_barrier(x))
        } else {
            x
        };
        let hi = if self.slope_right(x) == 0.0 {
            self.flat_run_end(x).min(self.next_barrier(x))
        } else {
            x
        };
        if lo < x && x < hi {
            PointClass::ConstantInterior { component_end: hi }
        } else if lo == x && x < hi {
            PointClass::LeftEndpoint
        } else if lo < x && x == hi {
            PointClass::RightEndpoint
        } else {
            PointClass::Regular
        }
    }

    // Start of the maximal run of zero-slope pieces reaching x from the left.
    fn flat_run_start(&self, x: f64) -> f64 {
        let mut i = self
            .pieces
            .partition_point(|p| p.hi < x)
            .min(self.pieces.len() - 1);
        while i > 0 && self.pieces[i - 1].slope == 0.0 {
            i -= 1;
        }
        self.pieces[i].lo
    }

    fn flat_run_end(&self, x: f64) -> f64 {
        let mut i = self
            .pieces
            .partition_point(|p| p.hi <= x)
            .min(self.pieces.len() - 1);
        while i + 1 < self.pieces.len() && self.pieces[i + 1].slope == 0.0 {
            i += 1;
        }
        self.pieces[i].hi
    }

    /// Decompose g into its continuous part and its normalized jump part.
    pub fn split(&self) -> (Derivator, Derivator) {
        let mut c = self.config.clone();
        c.jumps.clear();
        c.generator = None;
        let gc = Derivator::from_config(c).expect("continuous part of a valid derivator");
        let b = DerivatorConfig {
            continuous: Vec::new(),
            jumps: self.config.jumps.clone(),
            generator: self.config.generator,
            window: self.config.window,
        };
        let gb = Derivator::from_config(b).expect("jump part of a valid derivator");
        (gc, gb)
    }

    /// Keep only the jumps of size at least `1/m` (materializing the
    /// generator down to that threshold). Returns the truncated derivator
    /// and the discarded jump mass inside the window.
    pub fn truncate_jumps(&self, m: u32) -> Result<(Derivator, f64)> {
        if m == 0 {
            return Err(Error::InvalidConfig("truncation level m must be >= 1".into()));
        }
        let threshold = 1.0 / m as f64;
        let (lo, hi) = self.window;
        let mut kept = Vec::new();
        let mut discarded = 0.0;
        for (&x, &s) in self.jump_x.iter().zip(&self.jump_size) {
            if s >= threshold {
                kept.push(JumpConfig { x, size: s });
            } else if x >= lo && x <= hi {
                discarded += s;
            }
        }
        if let Some(gen) = &self.generator {
            let first_out = gen.first_below(threshold);
            for k in 1..first_out {
                kept.push(JumpConfig {
                    x: gen.location(k),
                    size: gen.size(k),
                });
            }
            // Generator mass in the window minus what was kept there.
            let mut in_window = gen.mass_below(hi) + gen.index_at(hi).map_or(0.0, |k| gen.size(k))
                - gen.mass_below(lo);
            for k in 1..first_out {
                let y = gen.location(k);
                if y >= lo && y <= hi {
                    in_window -= gen.size(k);
                }
            }
            if !in_window.is_finite() {
                return Err(Error::GeneratorUnbounded("tail mass is not finite".into()));
            }
            discarded += in_window.max(0.0);
        }
        kept.sort_by(|a, b| a.x.total_cmp(&b.x));
        let config = DerivatorConfig {
            continuous: self.config.continuous.clone(),
            jumps: kept,
            generator: None,
            window: self.config.window,
        };
        Ok((Derivator::from_config(config)?, discarded))
    }

    /// Jumps located in `[a, b)`, with generator jumps enumerated until the
    /// neglected generator mass drops below `tail_tol`. Returns the list of
    /// `(location, size)` in increasing location order and the neglected mass.
    pub fn jumps_in(&self, a: f64, b: f64, tail_tol: f64) -> (Vec<(f64, f64)>, f64) {
        let mut out = Vec::new();
        if !(a < b) {
            return (out, 0.0);
        }
        let i0 = self.jump_x.partition_point(|&y| y < a);
        let i1 = self.jump_x.partition_point(|&y| y < b);
        for i in i0..i1 {
            out.push((self.jump_x[i], self.jump_size[i]));
        }
        let mut neglected = 0.0;
        if let Some(gen) = &self.generator {
            let mut k = 1;
            while k <= gen.resolved && gen.tail_from(k) > tail_tol {
                let y = gen.location(k);
                if y >= a && y < b {
                    out.push((y, gen.size(k)));
                }
                k += 1;
            }
            let listed: f64 = out[i1 - i0..].iter().map(|p| p.1).sum();
            neglected = (gen.mass_below(b) - gen.mass_below(a) - listed).max(0.0);
            out.sort_by(|p, q| p.0.total_cmp(&q.0));
        }
        (out, neglected)
    }

    /// Replace the generator by its jumps, enumerated until the remaining
    /// generator mass is at most `tail_tol`. Returns the new derivator and
    /// the neglected mass.
    pub fn materialize(&self, tail_tol: f64) -> (Derivator, f64) {
        let Some(gen) = &self.generator else {
            return (self.clone(), 0.0);
        };
        let mut jumps = self.config.jumps.clone();
        let mut k = 1;
        while k <= gen.resolved && gen.tail_from(k) > tail_tol {
            jumps.push(JumpConfig {
                x: gen.location(k),
                size: gen.size(k),
            });
            k += 1;
        }
        jumps.sort_by(|a, b| a.x.total_cmp(&b.x));
        let config = DerivatorConfig {
            continuous: self.config.continuous.clone(),
            jumps,
            generator: None,
            window: self.config.window,
        };
        let g = Derivator::from_config(config).expect("materialized generator stays valid");
        (g, gen.tail_from(k))
    }

    /// Total jump mass (explicit plus generator) located in `[a, b)`.
    pub fn jump_mass(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        self.mass_below(b) - self.mass_below(a)
    }
}

fn build_pieces(segments: &[SegmentConfig]) -> Result<Vec<Piece>> {
    if segments.is_empty() {
        return Ok(vec![Piece {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            slope: 0.0,
            intercept: 0.0,
        }]);
    }
    let mut pieces = Vec::with_capacity(segments.len() + 2);
    let last = segments.len() - 1;
    for (i, s) in segments.iter().enumerate() {
        let (from, to) = s.bounds();
        let (slope, intercept) = s.coefficients();
        if !(slope.is_finite() && intercept.is_finite()) {
            return Err(Error::InvalidConfig(format!("segment {i} has non-finite coefficients")));
        }
        if slope < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "segment {i} has negative slope {slope}"
            )));
        }
        if from.is_none() && i != 0 {
            return Err(Error::InvalidConfig(format!(
                "segment {i}: only the first segment may be unbounded below"
            )));
        }
        if to.is_none() && i != last {
            return Err(Error::InvalidConfig(format!(
                "segment {i}: only the last segment may be unbounded above"
            )));
        }
        let lo = from.unwrap_or(f64::NEG_INFINITY);
        let hi = to.unwrap_or(f64::INFINITY);
        if !(lo < hi) || lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(Error::InvalidConfig(format!(
                "segment {i} has empty range [{lo}, {hi}]"
            )));
        }
        let p = Piece {
            lo,
            hi,
            slope,
            intercept,
        };
        if let Some(prev) = pieces.last() {
            let prev: &Piece = prev;
            if prev.hi != lo {
                return Err(Error::InvalidConfig(format!(
                    "segments must be contiguous: gap or overlap at {} / {}",
                    prev.hi, lo
                )));
            }
            let (a, b) = (prev.at(lo), p.at(lo));
            if (a - b).abs() > SEAM_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidConfig(format!(
                    "continuous part is discontinuous at {lo} ({a} vs {b}); use a jump instead"
                )));
            }
        }
        pieces.push(p);
    }
    // Slope-one extension outside the declared range.
    let first = pieces[0];
    if first.lo.is_finite() {
        let v = first.at(first.lo);
        pieces.insert(
            0,
            Piece {
                lo: f64::NEG_INFINITY,
                hi: first.lo,
                slope: 1.0,
                intercept: v - first.lo,
            },
        );
    }
    let lastp = *pieces.last().unwrap();
    if lastp.hi.is_finite() {
        let v = lastp.at(lastp.hi);
        pieces.push(Piece {
            lo: lastp.hi,
            hi: f64::INFINITY,
            slope: 1.0,
            intercept: v - lastp.hi,
        });
    }
    Ok(pieces)
}
