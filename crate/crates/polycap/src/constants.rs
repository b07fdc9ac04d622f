//! The constant sequences `vdw(i) = i!/i^i` and `G(i) = vdw(i)/vdw(i-1)`.
//!
//! `G` telescopes: the product of `G(2)..G(n)` is exactly `vdw(n)`. Both
//! sequences are strictly decreasing. Exact rational values are available for
//! `i <= 20`; the `f64` accessors fall back to a stable product form beyond
//! that.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, ToPrimitive};

/// Largest index for which the `f64` accessors round the exact rational.
pub const EXACT_LIMIT: u32 = 20;

fn big(i: u32) -> BigInt {
    BigInt::from(i)
}

/// `i!/i^i` as an exact rational. Requires `i >= 1`.
pub fn vdw_exact(i: u32) -> BigRational {
    assert!(i >= 1, "vdw(i) requires i >= 1");
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 1..=i {
        num *= big(j);
        den *= big(i);
    }
    BigRational::new(num, den)
}

/// `((i-1)/i)^(i-1)` as an exact rational, with `G(1) = 1`. Requires `i >= 1`.
pub fn g_exact(i: u32) -> BigRational {
    assert!(i >= 1, "G(i) requires i >= 1");
    if i == 1 {
        return BigRational::one();
    }
    let base = BigRational::new(big(i - 1), big(i));
    let mut acc = BigRational::one();
    for _ in 0..(i - 1) {
        acc *= &base;
    }
    acc
}

/// `i!/i^i` as `f64`. Exactly rounded for `i <= EXACT_LIMIT`.
pub fn vdw(i: u32) -> f64 {
    assert!(i >= 1, "vdw(i) requires i >= 1");
    if i <= EXACT_LIMIT {
        vdw_exact(i).to_f64().expect("vdw fits in f64 for small i")
    } else {
        // product of j/i terms stays in range for any i
        (1..=i).map(|j| j as f64 / i as f64).product()
    }
}

/// `((i-1)/i)^(i-1)` as `f64`, with `G(1) = 1`. Exactly rounded for
/// `i <= EXACT_LIMIT`.
pub fn g(i: u32) -> f64 {
    assert!(i >= 1, "G(i) requires i >= 1");
    if i <= EXACT_LIMIT {
        g_exact(i).to_f64().expect("G fits in f64 for small i")
    } else {
        ((i - 1) as f64 / i as f64).powi(i as i32 - 1)
    }
}
