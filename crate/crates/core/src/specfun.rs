//! Exponential-integral based kernels: `E1`, the rate kernel `h`, and the
//! `f`/`g` pair used by the distance form of the high-SNR rate.

use crate::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A strictly positive, finite real number (an argument of `h`, an SNR, ...).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PositiveReal(f64);

impl PositiveReal {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                what: "positive real",
                value,
            })
        }
    }

    /// Linear SNR from a value in decibels.
    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(10f64.powf(db / 10.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveReal {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PositiveReal> for f64 {
    fn from(p: PositiveReal) -> f64 {
        p.0
    }
}

/// `E1(x)` for x <= 1 via the alternating power series.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = 1.0; // (-1)^(k+1) x^k / k!
    for k in 1..200 {
        let kf = k as f64;
        power *= if k == 1 { x } else { -x / kf };
        let term = power / kf;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// `exp(x) E1(x)` for x > 1 via the modified Lentz continued fraction.
fn e1_scaled_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut out = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let delta = c * d;
        out *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    out
}

/// `exp(t) E1(t)` for t >= 0; infinite at zero.
fn e1_scaled(t: f64) -> f64 {
    if t > 1.0 {
        e1_scaled_cf(t)
    } else if t < 1e-8 {
        (1.0 + t) * (-EULER_GAMMA - t.ln() + t)
    } else {
        t.exp() * e1_series(t)
    }
}

/// Exponential integral `E1(x) = int_x^inf e^-t / t dt`.
pub fn exp_integral_e1(x: PositiveReal) -> f64 {
    let x = x.get();
    if x <= 1.0 {
        e1_series(x)
    } else {
        e1_scaled_cf(x) * (-x).exp()
    }
}

/// Rate kernel `h(x) = exp(1/x) E1(1/x)`.
pub fn h(x: PositiveReal) -> f64 {
    h_nonneg(x.get())
}

/// `h` extended by continuity with `h(0) = 0`.
pub(crate) fn h_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        0.0
    } else {
        e1_scaled(1.0 / x)
    }
}

/// Derivative of `h`, i.e. `1/x - h(x)/x^2`.
pub fn h_prime(x: PositiveReal) -> f64 {
    h_prime_nonneg(x.get())
}

pub(crate) fn h_prime_nonneg(x: f64) -> f64 {
    if x < 1e-3 {
        // asymptotic series sum (-1)^k (k+1)! x^k
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 0..8 {
            sum += term;
            term *= -((k + 2) as f64) * x;
        }
        sum
    } else {
        1.0 / x - h_nonneg(x) / (x * x)
    }
}

fn taylor_small_s(s: f64) -> f64 {
    let s2 = s * s;
    2.0 * (1.0 + s2 / 3.0 + s2 * s2 / 5.0)
}

// 2 atanh(s) = 2 log((1 + s)/z) since (1 - s)(1 + s) = z^2; this stays
// finite when s rounds to 1.
fn f_inner(z: f64) -> f64 {
    let s = ((1.0 - z) * (1.0 + z)).sqrt();
    if s < 1e-6 {
        taylor_small_s(s)
    } else {
        2.0 * ((1.0 + s).ln() - z.ln()) / s
    }
}

// f + 2 log z with the log z terms combined: 1 - 1/s = -z^2/(s (1 + s)).
fn g_inner(z: f64) -> f64 {
    let s = ((1.0 - z) * (1.0 + z)).sqrt();
    if s < 1e-6 {
        taylor_small_s(s) + 2.0 * z.ln()
    } else {
        2.0 * (1.0 + s).ln() / s - 2.0 * z.ln() * z * z / (s * (1.0 + s))
    }
}

/// `f(z) = log((1 + s)/(1 - s)) / s` with `s = sqrt(1 - z^2)`, for z in (0, 1).
pub fn f(z: f64) -> Result<f64> {
    if z > 0.0 && z < 1.0 {
        Ok(f_inner(z))
    } else {
        Err(Error::Domain { what: "f", value: z })
    }
}

/// `g(z) = f(z) + 2 log z`, for z in (0, 1]; `g(1) = 2`.
pub fn g(z: f64) -> Result<f64> {
    if z > 0.0 && z <= 1.0 {
        Ok(g_inner(z))
    } else {
        Err(Error::Domain { what: "g", value: z })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pr(x: f64) -> PositiveReal {
        PositiveReal::new(x).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rejects_non_positive() {
        assert!(PositiveReal::new(0.0).is_err());
        assert!(PositiveReal::new(-1.0).is_err());
        assert!(PositiveReal::new(f64::NAN).is_err());
        assert!(PositiveReal::new(f64::INFINITY).is_err());
    }

    #[test]
    fn e1_reference_values() {
        // reference values from adaptive quadrature
        assert!(rel(exp_integral_e1(pr(1.0)), 0.219_383_934_395_520_27) < 1e-14);
        assert!(rel(exp_integral_e1(pr(0.5)), 0.559_773_594_776_160_8) < 1e-14);
        let far = exp_integral_e1(pr(50.0));
        assert!(far > 0.0 && far < 1e-23);
        assert!(rel(far, 3.783_264_029_550_459e-24) < 1e-12);
    }

    #[test]
    fn e1_continuous_across_switchover() {
        let below = exp_integral_e1(pr(1.0 - 1e-12));
        let above = exp_integral_e1(pr(1.0 + 1e-12));
        assert!(rel(below, above) < 1e-11);
    }

    #[test]
    fn h_reference_values() {
        assert!(rel(h(pr(1.0)), 0.596_347_362_323_194) < 1e-14);
        let small = h(pr(1e-4)) / 1e-4;
        assert!((0.9995..=1.0).contains(&small));
        assert_eq!(h_nonneg(0.0), 0.0);
        // no overflow deep in the small-x regime
        let tiny = h(pr(1e-6));
        assert!(rel(tiny, 1e-6 * (1.0 - 1e-6 + 2e-12)) < 1e-12);
    }

    #[test]
    fn h_high_snr_asymptote() {
        let x = 1e8;
        assert!((h(pr(x)) - (x.ln() - EULER_GAMMA)).abs() < 1e-6);
    }

    #[test]
    fn h_prime_reference_values() {
        assert!(rel(h_prime(pr(1.0)), 0.403_652_637_676_806) < 1e-13);
        for x in [1e-2, 0.1, 1.0, 10.0, 100.0, 1e3] {
            let step = 1e-5 * x;
            let fd = (h(pr(x + step)) - h(pr(x - step))) / (2.0 * step);
            assert!(rel(h_prime(pr(x)), fd) < 1e-6, "x = {x}");
        }
    }

    #[test]
    fn h_prime_series_matches_closed_form_at_switch() {
        let x = 1e-3;
        let closed = 1.0 / x - h(pr(x)) / (x * x);
        assert!(rel(h_prime(pr(x * (1.0 - 1e-9))), closed) < 1e-9);
    }

    #[test]
    fn f_and_g_values() {
        assert!(rel(f(0.5).unwrap(), 3.041_383_985_203_785) < 1e-14);
        assert!((f(1.0 - 1e-14).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(g(1.0).unwrap(), 2.0);
        assert!((g(1e-12).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-9);
        assert!(f(1.0).is_err());
        assert!(f(0.0).is_err());
        assert!(g(1.5).is_err());
    }

    #[test]
    fn bound_chain_on_wide_grid() {
        for i in 0..=240 {
            let x = 10f64.powf(-6.0 + 12.0 * i as f64 / 240.0);
            let hx = h(pr(x));
            let lower = x / (1.0 + 2.0 * x);
            let mid = 0.5 * (2.0 * x).ln_1p();
            let upper = x.ln_1p();
            assert!(lower <= mid * (1.0 + 1e-15), "x = {x}");
            assert!(mid <= hx * (1.0 + 1e-15), "x = {x}");
            assert!(hx <= upper * (1.0 + 1e-15), "x = {x}");
            assert!(upper <= x, "x = {x}");
        }
    }

    proptest! {
        #[test]
        fn h_strictly_increasing(lx in -6.0f64..6.0, ld in -3.0f64..0.0) {
            let x = 10f64.powf(lx);
            let y = x * (1.0 + 10f64.powf(ld));
            prop_assert!(h(pr(y)) > h(pr(x)));
        }

        #[test]
        fn h_prime_positive(lx in -8.0f64..8.0) {
            prop_assert!(h_prime(pr(10f64.powf(lx))) > 0.0);
        }

        #[test]
        fn f_decreasing_g_increasing(a in 1e-6f64..0.999_999, b in 1e-6f64..0.999_999) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f(lo).unwrap() > f(hi).unwrap());
            prop_assert!(g(lo).unwrap() < g(hi).unwrap());
        }

        #[test]
        fn f_g_ranges(z in 1e-9f64..0.999_999_999) {
            prop_assert!(f(z).unwrap() >= 2.0);
            let gz = g(z).unwrap();
            prop_assert!(gz >= 2.0 * 2f64.ln() - 1e-12 && gz <= 2.0 + 1e-12);
        }
    }
}
