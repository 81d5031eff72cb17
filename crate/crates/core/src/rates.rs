//! Closed-form ergodic rates of linear beamforming with equal power split.
//!
//! All rates are in nats per channel use.

use nalgebra::DMatrix;

use crate::density::WeightSpectrum;
use crate::linalg::{
    distance_from_abc, eigh_matrix, generalized_eig, sqrtm_psd, tau_coefficients, Covariance,
    GrassmannVector,
};
use crate::specfun::{g, h_nonneg, h_prime_nonneg, PositiveReal};
use crate::{Error, Result, C64};

const CONFLUENT_GAP: f64 = 1e-8;
const ZERO_EIGENVALUE: f64 = 1e-13;

/// Quadratic forms of one user's covariance: `A = w_i^H S w_i`,
/// `B = w_j^H S w_j`, `C = |w_i^H S w_j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbcTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let ok = a >= 0.0 && b >= 0.0 && c >= 0.0 && c * c <= a * b * (1.0 + 1e-12) + 1e-300;
        if ok && a.is_finite() && b.is_finite() && c.is_finite() {
            Ok(Self { a, b, c })
        } else {
            Err(Error::Invalid(format!("({a}, {b}, {c}) violates C^2 <= AB")))
        }
    }

    /// `A B - C^2`, clamped at zero.
    pub fn det(&self) -> f64 {
        (self.a * self.b - self.c * self.c).max(0.0)
    }

    /// The weighted distance between the two beams.
    pub fn distance(&self) -> f64 {
        distance_from_abc(self.a, self.b, self.c)
    }
}

pub fn abc_coefficients(
    sigma_i: &Covariance,
    w_i: &GrassmannVector,
    w_j: &GrassmannVector,
) -> Result<AbcTriple> {
    let a = sigma_i.quad(w_i)?.max(0.0);
    let b = sigma_i.quad(w_j)?.max(0.0);
    let c = sigma_i.bilinear(w_i, w_j)?.norm().min((a * b).sqrt());
    AbcTriple::new(a, b, c)
}

/// Spectrum of the signal-plus-interference term and the interference term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSplit {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_tilde1: f64,
    pub degenerate: bool,
}

pub fn eigen_split(t: &AbcTriple) -> EigenSplit {
    let sum = t.a + t.b;
    let root = (t.a - t.b).hypot(2.0 * t.c);
    let lambda1 = 0.5 * (sum + root);
    let lambda2 = if lambda1 > 0.0 {
        (t.det() / lambda1).max(0.0)
    } else {
        0.0
    };
    let degenerate = (lambda1 - lambda2) / lambda1.max(f64::MIN_POSITIVE) < CONFLUENT_GAP;
    EigenSplit {
        lambda1,
        lambda2,
        lambda_tilde1: t.b,
        degenerate,
    }
}

/// Two-user ergodic rate from the eigen split.
pub fn rate_from_split(s: &EigenSplit, rho: PositiveReal) -> f64 {
    let half = 0.5 * rho.get();
    let signal = if s.degenerate {
        let x = half * 0.5 * (s.lambda1 + s.lambda2);
        if x == 0.0 {
            0.0
        } else {
            h_nonneg(x) + x * h_prime_nonneg(x)
        }
    } else {
        (s.lambda1 * h_nonneg(half * s.lambda1) - s.lambda2 * h_nonneg(half * s.lambda2))
            / (s.lambda1 - s.lambda2)
    };
    (signal - h_nonneg(half * s.lambda_tilde1)).max(0.0)
}

fn require_two(s: &Covariance) -> Result<()> {
    if s.dim() == 2 {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: 2,
            got: s.dim(),
        })
    }
}

/// Ergodic rate of user `i` served by `w_i` while `w_j` serves the other user.
pub fn ergodic_rate_two_user(
    sigma_i: &Covariance,
    w_i: &GrassmannVector,
    w_j: &GrassmannVector,
    rho: PositiveReal,
) -> Result<f64> {
    require_two(sigma_i)?;
    let t = abc_coefficients(sigma_i, w_i, w_j)?;
    Ok(rate_from_split(&eigen_split(&t), rho))
}

/// `lim_{rho -> 0} E[R_i] / rho = A / 2`.
pub fn rate_low_snr_slope(sigma_i: &Covariance, w_i: &GrassmannVector) -> Result<f64> {
    require_two(sigma_i)?;
    Ok(0.5 * sigma_i.quad(w_i)?)
}

/// `x log x / (x - 1)`, equal to 1 at `x = 1`.
pub fn x_log_x_ratio(x: f64) -> f64 {
    let u = x - 1.0;
    if u.abs() < 1e-6 {
        1.0 + u / 2.0 - u * u / 6.0 + u * u * u / 12.0
    } else {
        x * x.ln() / u
    }
}

/// `log x / (x - 1)`, equal to 1 at `x = 1`.
pub fn log_ratio(x: f64) -> f64 {
    let u = x - 1.0;
    if u.abs() < 1e-6 {
        1.0 - u / 2.0 + u * u / 3.0 - u * u * u / 4.0
    } else {
        x.ln() / u
    }
}

fn check_high_snr(t: &AbcTriple) -> Result<()> {
    let scale = (t.a + t.b).powi(2);
    if t.b <= 0.0 || t.det() <= 1e-14 * scale {
        Err(Error::Boundary)
    } else {
        Ok(())
    }
}

/// `lim_{rho -> inf} E[R_i]` in terms of `A`, `B`, `C`.
pub fn rate_high_snr_limit(t: &AbcTriple) -> Result<f64> {
    check_high_snr(t)?;
    let sum = t.a + t.b;
    let root = (t.a - t.b).hypot(2.0 * t.c);
    let det = t.det();
    let ratio = root / sum;
    let first = if ratio < 1e-6 {
        1.0 + ratio * ratio / 3.0
    } else {
        // (sum + root) / (sum - root), with the denominator as 4 det / (sum + root)
        let lower = 4.0 * det / (sum + root);
        sum / (2.0 * root) * ((sum + root) / lower).ln()
    };
    Ok(first + 0.5 * (det / (t.b * t.b)).ln())
}

/// The same limit written as `g(d) / 2 + log(1 + A/B) - log 2` with `d` the
/// weighted distance between the beams.
pub fn rate_high_snr_limit_distance_form(t: &AbcTriple) -> Result<f64> {
    check_high_snr(t)?;
    let d = t.distance();
    Ok(0.5 * g(d)? + (t.a / t.b).ln_1p() - std::f64::consts::LN_2)
}

/// Rate for a rank-one covariance `lambda1 u u^H`.
pub fn rate_rank_deficient(
    sigma_i: &Covariance,
    w_i: &GrassmannVector,
    w_j: &GrassmannVector,
    rho: PositiveReal,
) -> Result<f64> {
    require_two(sigma_i)?;
    if w_i.dim() != 2 || w_j.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: w_i.dim().max(w_j.dim()),
        });
    }
    let e = sigma_i.eigh();
    let (l1, l2) = (e.values[0], e.values[1]);
    if l1 <= 0.0 {
        return Ok(0.0);
    }
    if l2 > 1e-9 * l1 {
        return Err(Error::Rank(l2 / l1));
    }
    let u = &e.vectors[0];
    let own = u.inner(w_i).norm_sqr();
    let other = u.inner(w_j).norm_sqr();
    let x = 0.5 * rho.get() * l1;
    Ok(h_nonneg(x * (own + other)) - h_nonneg(x * other))
}

/// Nonnegative spectrum entries with numerical zeros snapped to zero.
fn snap_spectrum(values: &[f64]) -> Vec<f64> {
    let top = values.iter().cloned().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| if v <= ZERO_EIGENVALUE * top { 0.0 } else { v })
        .collect()
}

/// `E[log(1 + (rho/M) sum_k lambda_k |g_k|^2)]` by partial fractions.
/// Zero weights drop out exactly; ties among the rest are perturbed.
fn expected_log_general(values: &[f64], rho: f64, users: usize) -> f64 {
    let mut nonzero: Vec<f64> = snap_spectrum(values).into_iter().filter(|&v| v > 0.0).collect();
    let p = rho / users as f64;
    match nonzero.len() {
        0 => return 0.0,
        1 => return h_nonneg(p * nonzero[0]),
        _ => {}
    }
    let spec = WeightSpectrum::new(nonzero.clone()).expect("positive entries");
    if spec.has_ties() {
        nonzero = spec.perturb_ties().values().to_vec();
    }
    nonzero
        .iter()
        .enumerate()
        .map(|(k, &lk)| {
            let coeff: f64 = nonzero
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, &lj)| lk / (lk - lj))
                .product();
            coeff * h_nonneg(p * lk)
        })
        .sum()
}

/// Rate from the signal-plus-interference and interference-only spectra,
/// with power `rho / users` per beam.
pub fn ergodic_rate_general_m(
    signal: &WeightSpectrum,
    interference: &WeightSpectrum,
    rho: PositiveReal,
    users: usize,
) -> Result<f64> {
    if users == 0 {
        return Err(Error::Invalid("user count must be positive".into()));
    }
    let rho = rho.get();
    Ok(expected_log_general(signal.values(), rho, users)
        - expected_log_general(interference.values(), rho, users))
}

/// Eigenvalues of `S^1/2 (sum_k w_k w_k^H) S^1/2`, descending and clamped at 0.
fn beam_spectrum(sqrt: &DMatrix<C64>, beams: &[&GrassmannVector]) -> Vec<f64> {
    let n = sqrt.nrows();
    let mut outer = DMatrix::<C64>::zeros(n, n);
    for w in beams {
        outer += w.coords() * w.coords().adjoint();
    }
    let m = sqrt * outer * sqrt;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    snap_spectrum(&eigh_matrix(&m).0.iter().map(|v| v.max(0.0)).collect::<Vec<_>>())
}

/// Signal-plus-interference and interference-only spectra seen by `user`.
/// The interference spectrum may be identically zero and is returned raw.
pub fn user_spectra(
    sigma: &Covariance,
    beams: &[GrassmannVector],
    user: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if user >= beams.len() {
        return Err(Error::Invalid(format!("user {user} has no beam")));
    }
    if let Some(w) = beams.iter().find(|w| w.dim() != sigma.dim()) {
        return Err(Error::Dimension {
            expected: sigma.dim(),
            got: w.dim(),
        });
    }
    let root = sqrtm_psd(sigma);
    let all: Vec<&GrassmannVector> = beams.iter().collect();
    let others: Vec<&GrassmannVector> = beams
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != user)
        .map(|(_, w)| w)
        .collect();
    Ok((
        beam_spectrum(root.matrix(), &all),
        beam_spectrum(root.matrix(), &others),
    ))
}

/// Rate of `user` when one beam per user shares power `rho / beams.len()`.
pub fn ergodic_rate_multi_user(
    sigma: &Covariance,
    beams: &[GrassmannVector],
    user: usize,
    rho: PositiveReal,
) -> Result<f64> {
    let (signal, interference) = user_spectra(sigma, beams, user)?;
    let n = beams.len();
    Ok(expected_log_general(&signal, rho.get(), n)
        - expected_log_general(&interference, rho.get(), n))
}

/// Three-term expansion for a spectrum of three distinct entries.
fn expected_log_three(values: &[f64], rho: f64) -> f64 {
    let snapped = snap_spectrum(values);
    if snapped.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut spec = WeightSpectrum::new(snapped).expect("nonnegative spectrum");
    if spec.has_ties() {
        spec = spec.perturb_ties();
    }
    let l = spec.values();
    let term = |x: f64| x * x * h_nonneg(rho * x / 3.0);
    term(l[0]) / ((l[0] - l[1]) * (l[0] - l[2])) - term(l[1]) / ((l[0] - l[1]) * (l[1] - l[2]))
        + term(l[2]) / ((l[0] - l[2]) * (l[1] - l[2]))
}

/// Rate of the user served by `own` in a three-user system.
pub fn ergodic_rate_three_user(
    sigma: &Covariance,
    own: &GrassmannVector,
    other1: &GrassmannVector,
    other2: &GrassmannVector,
    rho: PositiveReal,
) -> Result<f64> {
    if sigma.dim() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: sigma.dim(),
        });
    }
    let beams = [own.clone(), other1.clone(), other2.clone()];
    let (signal, interference) = user_spectra(sigma, &beams, 0)?;
    Ok(expected_log_three(&signal, rho.get()) - expected_log_three(&interference, rho.get()))
}

/// Per-user and total rates at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user: Vec<f64>,
    pub sum: f64,
    pub weighted: Option<f64>,
    pub snr: PositiveReal,
}

/// Rates of both users for the pair `(w1, w2)`.
pub fn sum_rate(
    sigma1: &Covariance,
    sigma2: &Covariance,
    w1: &GrassmannVector,
    w2: &GrassmannVector,
    rho: PositiveReal,
) -> Result<RateReport> {
    let r1 = ergodic_rate_two_user(sigma1, w1, w2, rho)?;
    let r2 = ergodic_rate_two_user(sigma2, w2, w1, rho)?;
    Ok(RateReport {
        per_user: vec![r1, r2],
        sum: r1 + r2,
        weighted: None,
        snr: rho,
    })
}

/// Quantities that determine the optimal high-SNR sum-rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrSummary {
    pub eta1: f64,
    pub eta2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3_abs: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub chi1: f64,
    pub chi2: f64,
}

pub fn high_snr_summary(sigma1: &Covariance, sigma2: &Covariance) -> Result<HighSnrSummary> {
    require_two(sigma1)?;
    require_two(sigma2)?;
    let pair = generalized_eig(sigma1, sigma2)?;
    let taus = tau_coefficients(&pair, sigma2)?;
    let (eta1, eta2) = (pair.values[0], pair.values[1]);
    if eta2 <= 0.0 {
        return Err(Error::Singular(eta2));
    }
    Ok(HighSnrSummary {
        eta1,
        eta2,
        tau1: taus.tau1,
        tau2: taus.tau2,
        tau3_abs: taus.tau3_abs(),
        kappa1: eta1 * taus.tau2 / (eta2 * taus.tau1),
        kappa2: taus.tau2 / taus.tau1,
        chi1: sigma1.condition_number(),
        chi2: sigma2.condition_number(),
    })
}

/// Optimal sum-rate as `rho -> inf`.
pub fn sum_rate_high_snr_limit(s: &HighSnrSummary) -> f64 {
    x_log_x_ratio(s.kappa1) + log_ratio(s.kappa2)
}
