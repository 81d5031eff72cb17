//! Statistical beamformer design for two users.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{
    complex_gaussian, dominant_generalized, generalized_eig, Covariance, GrassmannVector,
};
use crate::rates::{
    abc_coefficients, eigen_split, high_snr_summary, log_ratio, rate_from_split, x_log_x_ratio,
    HighSnrSummary,
};
use crate::specfun::PositiveReal;
use crate::{Error, Result, C64};

/// Beamformers for user 1 and user 2.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPair {
    pub w1: GrassmannVector,
    pub w2: GrassmannVector,
}

/// Outcome of a beamformer search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub pair: BeamformerPair,
    /// Family parameters at the optimum; empty for the Grassmann search.
    pub params: Vec<f64>,
    /// Objective value at `pair`, in nats.
    pub achieved: f64,
    pub evaluations: usize,
}

/// Per-user weights of a weighted sum-rate objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedObjective {
    zeta1: f64,
    zeta2: f64,
}

impl WeightedObjective {
    pub fn new(zeta1: f64, zeta2: f64) -> Result<Self> {
        for z in [zeta1, zeta2] {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Domain {
                    what: "objective weight",
                    value: z,
                });
            }
        }
        Ok(Self { zeta1, zeta2 })
    }

    /// Plain sum-rate.
    pub fn sum() -> Self {
        Self {
            zeta1: 1.0,
            zeta2: 1.0,
        }
    }

    pub fn zeta1(&self) -> f64 {
        self.zeta1
    }

    pub fn zeta2(&self) -> f64 {
        self.zeta2
    }

    pub fn combine(&self, r1: f64, r2: f64) -> f64 {
        self.zeta1 * r1 + self.zeta2 * r2
    }
}

fn require_pair_dims(s1: &Covariance, s2: &Covariance) -> Result<()> {
    for s in [s1, s2] {
        if s.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: s.dim(),
            });
        }
    }
    Ok(())
}

/// Closed-form rates of both users, evaluated without re-validating inputs.
#[derive(Debug, Clone)]
pub(crate) struct PairObjective<'a> {
    s1: &'a Covariance,
    s2: &'a Covariance,
    rho: PositiveReal,
    weights: WeightedObjective,
}

impl<'a> PairObjective<'a> {
    pub(crate) fn new(
        s1: &'a Covariance,
        s2: &'a Covariance,
        rho: PositiveReal,
        weights: WeightedObjective,
    ) -> Self {
        Self {
            s1,
            s2,
            rho,
            weights,
        }
    }

    pub(crate) fn rates(&self, w1: &GrassmannVector, w2: &GrassmannVector) -> (f64, f64) {
        let user = |s: &Covariance, wi: &GrassmannVector, wj: &GrassmannVector| {
            let t = abc_coefficients(s, wi, wj).expect("dimensions checked on entry");
            rate_from_split(&eigen_split(&t), self.rho)
        };
        (user(self.s1, w1, w2), user(self.s2, w2, w1))
    }

    pub(crate) fn value(&self, pair: &BeamformerPair) -> f64 {
        let (r1, r2) = self.rates(&pair.w1, &pair.w2);
        self.weights.combine(r1, r2)
    }
}

/// Low-SNR optimum: each beam is its own user's dominant eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct LowSnrDesign {
    pub pair: BeamformerPair,
    /// `lim E[R_sum] / rho`.
    pub slope: f64,
    pub degenerate: bool,
}

pub fn optimal_low_snr(s1: &Covariance, s2: &Covariance) -> Result<LowSnrDesign> {
    require_pair_dims(s1, s2)?;
    let e1 = s1.eigh();
    let e2 = s2.eigh();
    Ok(LowSnrDesign {
        slope: 0.5 * (e1.values[0] + e2.values[0]),
        degenerate: e1.degenerate || e2.degenerate,
        pair: BeamformerPair {
            w1: e1.vectors[0].clone(),
            w2: e2.vectors[0].clone(),
        },
    })
}

/// High-SNR optimum: dominant generalized eigenvectors of `(S1, S2)` and
/// `(S2, S1)`.
pub fn optimal_high_snr(
    s1: &Covariance,
    s2: &Covariance,
) -> Result<(BeamformerPair, HighSnrSummary)> {
    require_pair_dims(s1, s2)?;
    let gen = generalized_eig(s1, s2)?;
    let summary = high_snr_summary(s1, s2)?;
    let pair = BeamformerPair {
        w1: gen.vectors[0].clone(),
        w2: gen.vectors[1].clone(),
    };
    Ok((pair, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    High,
}

/// Beams maximizing one user's rate alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserDesign {
    /// Beam of the favoured user.
    pub own: GrassmannVector,
    /// Beam of the other user (arbitrary at low SNR; fixed to `u2` here).
    pub other: GrassmannVector,
    pub chi: f64,
    /// `lim_{rho -> inf} E[R_i]`, reported for the high regime.
    pub limit: Option<f64>,
}

pub fn optimal_single_user(sigma_i: &Covariance, regime: Regime) -> Result<SingleUserDesign> {
    if sigma_i.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: sigma_i.dim(),
        });
    }
    let e = sigma_i.eigh();
    let chi = e.values[0] / e.values[1];
    let limit = match regime {
        Regime::Low => None,
        Regime::High => {
            if !chi.is_finite() || e.values[1] <= 0.0 {
                return Err(Error::Singular(e.values[1]));
            }
            Some(x_log_x_ratio(chi))
        }
    };
    Ok(SingleUserDesign {
        own: e.vectors[0].clone(),
        other: e.vectors[1].clone(),
        chi,
        limit,
    })
}

/// High-SNR optimum when both covariances share eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonBasisDesign {
    pub pair: BeamformerPair,
    /// Ratio of user 1's eigenvalues, `>= 1`.
    pub chi1: f64,
    /// Ratio of user 2's eigenvalues along the same two eigenvectors (any
    /// positive value).
    pub chi2: f64,
    pub limit: f64,
    /// User 1 takes the weak eigenvector (`chi1 < chi2`).
    pub swapped: bool,
}

pub fn common_basis_high_snr(s1: &Covariance, s2: &Covariance) -> Result<CommonBasisDesign> {
    require_pair_dims(s1, s2)?;
    let e1 = s1.eigh();
    let basis = if e1.degenerate { s2.eigh().vectors } else { e1.vectors.clone() };
    let (u1, u2) = (&basis[0], &basis[1]);
    let cross = s2.bilinear(u1, u2)?.norm();
    if cross > 1e-10 * s2.trace() || s1.bilinear(u1, u2)?.norm() > 1e-10 * s1.trace() {
        return Err(Error::Invalid("covariances do not share eigenvectors".into()));
    }
    let (l1, l2) = (s1.quad(u1)?, s1.quad(u2)?);
    let (m1, m2) = (s2.quad(u1)?, s2.quad(u2)?);
    if l2 <= 0.0 || m1 <= 0.0 || m2 <= 0.0 {
        return Err(Error::Singular(l2.min(m1).min(m2)));
    }
    let chi1 = l1 / l2;
    let chi2 = m1 / m2;
    let swapped = chi1 < chi2;
    let (pair, limit) = if swapped {
        (
            BeamformerPair {
                w1: u2.clone(),
                w2: u1.clone(),
            },
            x_log_x_ratio(chi2) + log_ratio(chi1),
        )
    } else {
        (
            BeamformerPair {
                w1: u1.clone(),
                w2: u2.clone(),
            },
            x_log_x_ratio(chi1) + log_ratio(chi2),
        )
    };
    Ok(CommonBasisDesign {
        pair,
        chi1,
        chi2,
        limit,
        swapped,
    })
}

fn shifted(s: &Covariance, scale: f64) -> DMatrix<C64> {
    let n = s.dim();
    s.matrix() * C64::new(scale, 0.0) + DMatrix::identity(n, n)
}

fn check_param(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: name, value: v })
    }
}

/// `w1 = u1((a S2 + I)^-1 S1)`, `w2 = u1((b S1 + I)^-1 S2)`.
pub fn candidate_pair(
    alpha: f64,
    beta: f64,
    s1: &Covariance,
    s2: &Covariance,
) -> Result<BeamformerPair> {
    check_param("alpha", alpha)?;
    check_param("beta", beta)?;
    require_pair_dims(s1, s2)?;
    Ok(candidate_unchecked(alpha, beta, s1, s2))
}

fn candidate_unchecked(alpha: f64, beta: f64, s1: &Covariance, s2: &Covariance) -> BeamformerPair {
    BeamformerPair {
        w1: dominant_generalized(s1.matrix(), &shifted(s2, alpha)),
        w2: dominant_generalized(s2.matrix(), &shifted(s1, beta)),
    }
}

/// `w1 = u1((a S2 + I)^-1 (c S1 + I))`, `w2 = u1((b S1 + I)^-1 (d S2 + I))`.
pub fn weighted_candidate_pair(
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
    s1: &Covariance,
    s2: &Covariance,
) -> Result<BeamformerPair> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma), ("delta", delta)] {
        check_param(name, v)?;
    }
    require_pair_dims(s1, s2)?;
    Ok(weighted_unchecked(&[alpha, beta, gamma, delta], s1, s2))
}

fn weighted_unchecked(p: &[f64], s1: &Covariance, s2: &Covariance) -> BeamformerPair {
    BeamformerPair {
        w1: dominant_generalized(&shifted(s1, p[2]), &shifted(s2, p[0])),
        w2: dominant_generalized(&shifted(s2, p[3]), &shifted(s1, p[1])),
    }
}

/// Upper end of every family parameter.
pub const PARAM_MAX: f64 = 1e4;

/// `0` followed by `n` log-spaced points in `[lo, PARAM_MAX]`.
fn param_axis(n: usize, lo: f64) -> Vec<f64> {
    let (a, b) = (lo.log10(), PARAM_MAX.log10());
    std::iter::once(0.0)
        .chain((0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)))
        .collect()
}

fn to_u(t: f64) -> f64 {
    t.ln_1p()
}

fn from_u(u: f64) -> f64 {
    u.exp_m1().max(0.0)
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64, usize) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while hi - lo > rel_tol * (0.5 * (hi + lo)).abs().max(1.0) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    if f1 >= f2 {
        (x1, f1, evals)
    } else {
        (x2, f2, evals)
    }
}

/// Coarse grid over the product of `axis` (in parallel, deterministic
/// argmax) followed by cyclic golden-section refinement in `log(1 + t)`.
fn grid_then_golden(
    dims: usize,
    axis: &[f64],
    objective: impl Fn(&[f64]) -> f64 + Sync,
) -> (Vec<f64>, f64, usize) {
    let per_axis = axis.len();
    let total = per_axis.pow(dims as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut p = vec![0.0; dims];
            let mut rest = idx;
            for slot in p.iter_mut().rev() {
                *slot = axis[rest % per_axis];
                rest /= per_axis;
            }
            objective(&p)
        })
        .collect();
    let mut best_idx = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best_idx] {
            best_idx = i;
        }
    }
    let mut best_val = values[best_idx];
    let mut best_pos = vec![0usize; dims];
    let mut rest = best_idx;
    for slot in best_pos.iter_mut().rev() {
        *slot = rest % per_axis;
        rest /= per_axis;
    }
    let mut best: Vec<f64> = best_pos.iter().map(|&i| axis[i]).collect();
    let mut evals = total;

    // bracket each coordinate by its grid neighbours
    let u_axis: Vec<f64> = axis.iter().map(|&t| to_u(t)).collect();
    let brackets: Vec<(f64, f64)> = best_pos
        .iter()
        .map(|&i| {
            let lo = if i == 0 { 0.0 } else { u_axis[i - 1] };
            let hi = if i + 1 == per_axis { u_axis[i] } else { u_axis[i + 1] };
            (lo, hi)
        })
        .collect();
    let u_max = to_u(PARAM_MAX);
    for _sweep in 0..20 {
        let start = best_val;
        for d in 0..dims {
            let centre = to_u(best[d]);
            let half = 0.5 * (brackets[d].1 - brackets[d].0);
            let lo = (centre - half).max(0.0);
            let hi = (centre + half).min(u_max);
            let (u, v, n) = golden_max(
                |u| {
                    let mut p = best.clone();
                    p[d] = from_u(u);
                    objective(&p)
                },
                lo,
                hi,
                1e-4,
            );
            evals += n;
            if v > best_val {
                best_val = v;
                best[d] = from_u(u);
            }
        }
        if best_val - start <= 1e-12 * best_val.abs().max(1.0) {
            break;
        }
    }
    (best, best_val, evals)
}

/// Best `(alpha, beta)` in the candidate family for the sum-rate at `rho`.
pub fn optimize_alpha_beta(
    s1: &Covariance,
    s2: &Covariance,
    rho: PositiveReal,
) -> Result<SearchResult> {
    require_pair_dims(s1, s2)?;
    let obj = PairObjective::new(s1, s2, rho, WeightedObjective::sum());
    let axis = param_axis(49, 1e-3);
    let (params, _, evaluations) = grid_then_golden(2, &axis, |p| {
        obj.value(&candidate_unchecked(p[0], p[1], s1, s2))
    });
    let pair = candidate_unchecked(params[0], params[1], s1, s2);
    let achieved = obj.value(&pair);
    Ok(SearchResult {
        pair,
        params,
        achieved,
        evaluations,
    })
}

/// Best `(alpha, beta, gamma, delta)` in the weighted family.
pub fn optimize_weighted(
    s1: &Covariance,
    s2: &Covariance,
    rho: PositiveReal,
    weights: WeightedObjective,
) -> Result<SearchResult> {
    require_pair_dims(s1, s2)?;
    let obj = PairObjective::new(s1, s2, rho, weights);
    let axis = param_axis(8, 1e-2);
    let (params, _, evaluations) =
        grid_then_golden(4, &axis, |p| obj.value(&weighted_unchecked(p, s1, s2)));
    let pair = weighted_unchecked(&params, s1, s2);
    let achieved = obj.value(&pair);
    Ok(SearchResult {
        pair,
        params,
        achieved,
        evaluations,
    })
}

const POLISH_STEPS: usize = 200;
const POLISH_SCALE: f64 = 0.05;
const POLISH_STREAM: u64 = u64::MAX;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn tangent_step(w: &GrassmannVector, scale: f64, rng: &mut ChaCha8Rng) -> GrassmannVector {
    let g = complex_gaussian(w.dim(), rng);
    let along = w.coords().dotc(&g);
    let tangent = g - w.coords() * along;
    GrassmannVector::new(w.coords() + tangent * C64::new(scale, 0.0)).unwrap_or_else(|_| w.clone())
}

/// Random search over pairs of isotropic beams plus a local polish.
pub fn grassmann_search(
    s1: &Covariance,
    s2: &Covariance,
    rho: PositiveReal,
    n_samples: usize,
    seed: u64,
) -> Result<SearchResult> {
    grassmann_search_weighted(s1, s2, rho, n_samples, seed, WeightedObjective::sum())
}

pub fn grassmann_search_weighted(
    s1: &Covariance,
    s2: &Covariance,
    rho: PositiveReal,
    n_samples: usize,
    seed: u64,
    weights: WeightedObjective,
) -> Result<SearchResult> {
    require_pair_dims(s1, s2)?;
    if n_samples == 0 {
        return Err(Error::Invalid("search needs at least one sample".into()));
    }
    let obj = PairObjective::new(s1, s2, rho, weights);
    let scored: Vec<(f64, BeamformerPair)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let pair = BeamformerPair {
                w1: GrassmannVector::random(2, &mut rng),
                w2: GrassmannVector::random(2, &mut rng),
            };
            (obj.value(&pair), pair)
        })
        .collect();
    let mut best_i = 0;
    for (i, (v, _)) in scored.iter().enumerate() {
        if *v > scored[best_i].0 {
            best_i = i;
        }
    }
    let (mut best_val, mut best) = scored[best_i].clone();

    let mut rng = stream(seed, POLISH_STREAM);
    let mut scale = POLISH_SCALE;
    for _ in 0..POLISH_STEPS {
        let trial = BeamformerPair {
            w1: tangent_step(&best.w1, scale, &mut rng),
            w2: tangent_step(&best.w2, scale, &mut rng),
        };
        let v = obj.value(&trial);
        if v > best_val {
            best_val = v;
            best = trial;
        } else {
            scale *= 0.5;
        }
    }
    Ok(SearchResult {
        pair: best,
        params: Vec::new(),
        achieved: best_val,
        evaluations: n_samples + POLISH_STEPS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamIndex {
    First,
    Second,
}

/// `|candidate(t)^H u1(S_i)|` for each parameter `t`: how far the candidate
/// beam of one user has turned away from its low-SNR direction.
pub fn angle_profile(
    s1: &Covariance,
    s2: &Covariance,
    params: &[f64],
    which: BeamIndex,
) -> Result<Vec<(f64, f64)>> {
    require_pair_dims(s1, s2)?;
    let (own, other) = match which {
        BeamIndex::First => (s1, s2),
        BeamIndex::Second => (s2, s1),
    };
    let anchor = own.eigh().vectors[0].clone();
    params
        .iter()
        .map(|&t| {
            check_param("angle parameter", t)?;
            let w = dominant_generalized(own.matrix(), &shifted(other, t));
            Ok((t, w.inner(&anchor).norm().min(1.0)))
        })
        .collect()
}
