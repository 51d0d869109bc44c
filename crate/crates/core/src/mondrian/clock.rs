//! Competing exponential clocks and the cut-location draws they trigger.

use rand::Rng;
use rand_distr::{Distribution, Exp};

/// Time until a clock with the given rate rings; a rate-zero clock never rings.
pub(crate) fn ring_time<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    if rate > 0.0 && rate.is_finite() {
        Exp::new(rate).expect("positive finite rate").sample(rng)
    } else {
        f64::INFINITY
    }
}

/// Index of the winning clock among clocks with the given rates.
pub(crate) fn winning_clock<R: Rng + ?Sized>(rates: &[f64], rng: &mut R) -> usize {
    let total: f64 = rates.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (d, &r) in rates.iter().enumerate() {
        if r > 0.0 {
            if u < r {
                return d;
            }
            u -= r;
            last_positive = d;
        }
    }
    last_positive
}

/// Uniform draw from the open interval `(lo, hi)`; boundary draws are resampled.
pub(crate) fn uniform_open<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    debug_assert!(lo < hi);
    for _ in 0..64 {
        let a = lo + (hi - lo) * rng.random::<f64>();
        if lo < a && a < hi {
            return a;
        }
    }
    0.5 * (lo + hi)
}

/// Uniform draw from `[outer_lo, outer_hi]` minus `[inner_lo, inner_hi]`,
/// never landing on any of the four endpoints.
pub(crate) fn uniform_outside<R: Rng + ?Sized>(
    outer_lo: f64,
    outer_hi: f64,
    inner_lo: f64,
    inner_hi: f64,
    rng: &mut R,
) -> f64 {
    let below = inner_lo - outer_lo;
    let above = outer_hi - inner_hi;
    debug_assert!(below + above > 0.0);
    for _ in 0..64 {
        let u = (below + above) * rng.random::<f64>();
        let a = if u < below {
            outer_lo + u
        } else {
            inner_hi + (u - below)
        };
        let strictly_below = outer_lo < a && a < inner_lo;
        let strictly_above = inner_hi < a && a < outer_hi;
        if strictly_below || strictly_above {
            return a;
        }
    }
    if below >= above {
        0.5 * (outer_lo + inner_lo)
    } else {
        0.5 * (inner_hi + outer_hi)
    }
}
