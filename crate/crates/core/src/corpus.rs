//! Seeded random derivators for the verification suites: up to 6 jumps of
//! size in [0.1, 2] and a continuous part of up to 4 affine segments with
//! slopes in [0, 2], some exactly 0, on the window [-5, 5].

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derivator::{Derivator, DerivatorConfig, SegmentConfig};

pub const WINDOW: (f64, f64) = (-5.0, 5.0);

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub seed: u64,
    pub index: usize,
    pub derivator: Derivator,
    /// A center in [-2, 2].
    pub center: f64,
}

impl CorpusEntry {
    /// Reproduction handle, as accepted by `--derivator` in the CLI.
    pub fn path(&self) -> String {
        format!("random:{}/{}", self.seed, self.index)
    }
}

// Locations on a 1/20 lattice keep jumps and breakpoints apart.
fn lattice(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) * 20.0).round() as i64;
    lo + rng.random_range(1..steps) as f64 / 20.0
}

pub fn random_config(rng: &mut ChaCha8Rng) -> DerivatorConfig {
    let mut c = DerivatorConfig::new(WINDOW.0, WINDOW.1);
    let segments = rng.random_range(1..=4usize);
    let mut cuts: Vec<f64> = Vec::new();
    while cuts.len() + 1 < segments {
        let y = lattice(rng, WINDOW.0, WINDOW.1);
        if !cuts.contains(&y) {
            cuts.push(y);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut value = 0.0;
    let mut prev: Option<f64> = None;
    for i in 0..segments {
        let to = cuts.get(i).copied();
        let slope = if rng.random_range(0..4) == 0 {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        };
        let at = prev.unwrap_or(0.0);
        c = c.segment(SegmentConfig::affine(prev, to, slope, value - slope * at));
        if let Some(t) = to {
            value += slope * (t - at);
        }
        prev = to;
    }
    let jumps = rng.random_range(0..=6usize);
    let mut xs: Vec<f64> = Vec::new();
    while xs.len() < jumps {
        let y = lattice(rng, WINDOW.0, WINDOW.1);
        if !xs.contains(&y) {
            xs.push(y);
        }
    }
    xs.sort_by(f64::total_cmp);
    for x in xs {
        c = c.jump(x, rng.random_range(0.1..=2.0));
    }
    c
}

/// Entry `index` of the corpus for `seed`; each entry has its own stream so
/// it can be rebuilt alone.
pub fn entry(seed: u64, index: usize) -> CorpusEntry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let config = random_config(&mut rng);
    let center = rng.random_range(-40..=40) as f64 / 20.0;
    CorpusEntry {
        seed,
        index,
        derivator: Derivator::from_config(config).expect("generated configs are valid"),
        center,
    }
}

pub fn corpus(seed: u64, count: usize) -> Vec<CorpusEntry> {
    (0..count).map(|i| entry(seed, i)).collect()
}

/// Parse a `random:SEED/INDEX` handle.
pub fn parse_path(path: &str) -> Option<(u64, usize)> {
    let rest = path.strip_prefix("random:")?;
    let (s, i) = rest.split_once('/')?;
    Some((s.parse().ok()?, i.parse().ok()?))
}
