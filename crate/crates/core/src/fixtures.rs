//! Named derivators used throughout the tests, the verification suites and
//! the CLI documentation.

use crate::derivator::{Derivator, DerivatorConfig, SegmentConfig, Side};

const WINDOW: (f64, f64) = (-10.0, 10.0);

/// `g(x) = x` for `x <= 0` and `x + 1` for `x > 0`.
pub fn identity_with_unit_jump() -> Derivator {
    DerivatorConfig::new(WINDOW.0, WINDOW.1)
        .segment(SegmentConfig::identity())
        .jump(0.0, 1.0)
        .build()
        .expect("valid fixture")
}

/// Pure jump derivator with a single jump of size `h` at `x`.
pub fn single_jump(x: f64, h: f64) -> Derivator {
    DerivatorConfig::new(WINDOW.0, WINDOW.1)
        .jump(x, h)
        .build()
        .expect("valid fixture")
}

/// `g(x) = x` for `x <= 0` and `g(x) = n` on `(n-1, n]`.
pub fn integer_staircase() -> Derivator {
    let mut c = DerivatorConfig::new(WINDOW.0, WINDOW.1)
        .segment(SegmentConfig::affine(None, Some(0.0), 1.0, 0.0))
        .segment(SegmentConfig::affine(Some(0.0), None, 0.0, 0.0));
    for n in 0..=(WINDOW.1 as i32) {
        c = c.jump(n as f64, 1.0);
    }
    c.build().expect("valid fixture")
}

/// Pure jump derivator, `-1` up to `-1`, `0` on `(-1, 1]`, `1` after: the
/// g-derivative is undefined on `(1, inf)`.
pub fn two_step() -> Derivator {
    DerivatorConfig::new(-5.0, 5.0)
        .jump(-1.0, 1.0)
        .jump(1.0, 1.0)
        .build()
        .expect("valid fixture")
}

/// Pure jump derivator with jumps of size 1/2 at 1 and 2.
pub fn two_half_jumps() -> Derivator {
    DerivatorConfig::new(-5.0, 5.0)
        .jump(1.0, 0.5)
        .jump(2.0, 0.5)
        .build()
        .expect("valid fixture")
}

/// Flat to the left of zero except for jumps of sizes 1/2, 1/4 and 1/8 and a
/// geometric generator accumulating at zero from the left (first size 1/16,
/// ratio 1e-4); identity to the right. Every truncation level
/// `m = 2, 4, 8, 16` keeps one more jump.
pub fn geometric_accumulation() -> Derivator {
    DerivatorConfig::new(-1.0, 1.0)
        .segment(SegmentConfig::affine(None, Some(0.0), 0.0, 0.0))
        .segment(SegmentConfig::affine(Some(0.0), None, 1.0, 0.0))
        .jump(-0.9, 0.5)
        .jump(-0.6, 0.25)
        .jump(-0.3, 0.125)
        .generator(0.0, Side::Left, 0.0625, 1e-4)
        .build()
        .expect("valid fixture")
}
