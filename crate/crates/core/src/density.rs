//! Distribution of `u^H diag(lambda) u` for an isotropic unit vector `u`.
//!
//! For distinct weights the density is the B-spline
//! `(M-1) sum_k (lambda_k - y)_+^(M-2) / prod_{j != k} (lambda_k - lambda_j)`.
//! Each piece is evaluated from whichever side of `y` has fewer knots; the two
//! forms agree because the full sum is a divided difference of a polynomial of
//! too low a degree.

use crate::{Error, Result};

const TIE_GAP: f64 = 1e-9;
const TIE_SPREAD: f64 = 1e-7;

/// Nonnegative weights sorted in descending order, at least one positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpectrum {
    lambdas: Vec<f64>,
}

impl WeightSpectrum {
    /// Sorts the input descending. Rejects negative or non-finite entries and
    /// the all-zero spectrum.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: lambdas.len(),
            });
        }
        if let Some(&bad) = lambdas.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Domain {
                what: "spectrum entry",
                value: bad,
            });
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        if lambdas[0] <= 0.0 {
            return Err(Error::Invalid("spectrum is identically zero".into()));
        }
        Ok(Self { lambdas })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn top(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn bottom(&self) -> f64 {
        self.lambdas[self.lambdas.len() - 1]
    }

    pub fn trace(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// Some consecutive gap is at most 1e-9 of the top weight.
    pub fn has_ties(&self) -> bool {
        let scale = self.top();
        self.lambdas.windows(2).any(|w| w[0] - w[1] <= TIE_GAP * scale)
    }

    /// Spreads tied groups by steps of 1e-7 of the top weight. Positive groups
    /// keep their mean; a group of zeros is spread upward and the added mass is
    /// taken from the top weight, so the trace is preserved either way.
    pub fn perturb_ties(&self) -> Self {
        let scale = self.top();
        let step = TIE_SPREAD * scale;
        let mut out = self.lambdas.clone();
        for _ in 0..8 {
            if !Self::ties_in(&out, scale) {
                break;
            }
            let mut i = 0;
            while i < out.len() {
                let mut j = i + 1;
                while j < out.len() && out[j - 1] - out[j] <= TIE_GAP * scale {
                    j += 1;
                }
                let n = j - i;
                if n > 1 {
                    let mean = out[i..j].iter().sum::<f64>() / n as f64;
                    if mean <= TIE_GAP * scale {
                        let mut added = 0.0;
                        for (r, slot) in out[i..j].iter_mut().enumerate() {
                            *slot = (n - 1 - r) as f64 * step;
                            added += *slot;
                        }
                        out[0] -= added;
                    } else {
                        for (r, slot) in out[i..j].iter_mut().enumerate() {
                            *slot = mean + ((n - 1) as f64 / 2.0 - r as f64) * step;
                        }
                    }
                }
                i = j;
            }
            out.sort_by(|a, b| b.total_cmp(a));
        }
        Self { lambdas: out }
    }

    fn ties_in(values: &[f64], scale: f64) -> bool {
        values.windows(2).any(|w| w[0] - w[1] <= TIE_GAP * scale)
    }

    fn check_closed_form(&self) -> Result<()> {
        if !(2..=4).contains(&self.dim()) {
            return Err(Error::Dimension {
                expected: 4,
                got: self.dim(),
            });
        }
        if self.has_ties() {
            return Err(Error::DegenerateSpectrum);
        }
        Ok(())
    }

    /// `prod_{j != k} (lambda_k - lambda_j)`.
    fn knot_denominator(&self, k: usize) -> f64 {
        let lk = self.lambdas[k];
        self.lambdas
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &lj)| lk - lj)
            .product()
    }

    /// `sum_{lambda_k > y} (lambda_k - y)^p / prod_{j != k}(...)`, computed as
    /// minus the sum over the knots below `y` when those are fewer.
    fn spline_sum(&self, y: f64, power: i32) -> f64 {
        let above = self.lambdas.iter().filter(|&&l| l >= y).count();
        let below = self.dim() - above;
        if above <= below {
            (0..above)
                .map(|k| (self.lambdas[k] - y).powi(power) / self.knot_denominator(k))
                .sum::<f64>()
        } else {
            -(above..self.dim())
                .map(|k| (self.lambdas[k] - y).powi(power) / self.knot_denominator(k))
                .sum::<f64>()
        }
    }
}

/// Density of `u^H Lambda u` at `y`; zero outside `(lambda_M, lambda_1]`.
pub fn weighted_norm_pdf(spec: &WeightSpectrum, y: f64) -> Result<f64> {
    spec.check_closed_form()?;
    let m = spec.dim();
    if y <= spec.bottom() || y > spec.top() {
        return Ok(0.0);
    }
    if m == 2 {
        return Ok(1.0 / (spec.top() - spec.bottom()));
    }
    let value = (m - 1) as f64 * spec.spline_sum(y, (m - 2) as i32);
    Ok(value.max(0.0))
}

/// Cumulative distribution of `u^H Lambda u`.
pub fn weighted_norm_cdf(spec: &WeightSpectrum, y: f64) -> Result<f64> {
    spec.check_closed_form()?;
    let m = spec.dim();
    if y <= spec.bottom() {
        return Ok(0.0);
    }
    if y >= spec.top() {
        return Ok(1.0);
    }
    // survival function is sum over knots above y of (lambda_k - y)^(M-1)/denominator
    let above = spec.lambdas.iter().filter(|&&l| l >= y).count();
    let below = m - above;
    let value = if above <= below {
        1.0 - (0..above)
            .map(|k| (spec.lambdas[k] - y).powi((m - 1) as i32) / spec.knot_denominator(k))
            .sum::<f64>()
    } else {
        (above..m)
            .map(|k| (spec.lambdas[k] - y).powi((m - 1) as i32) / spec.knot_denominator(k))
            .sum::<f64>()
    };
    Ok(value.clamp(0.0, 1.0))
}
