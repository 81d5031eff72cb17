//! Correlated Rayleigh channel sampling and empirical estimators.
//!
//! Work is split into fixed-size chunks; chunk `c` draws from the ChaCha8
//! stream `c` of the configured seed, so results are bit-identical for any
//! number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::beamform::BeamformerPair;
use crate::density::WeightSpectrum;
use crate::linalg::{complex_gaussian, sqrtm_psd, Covariance, GrassmannVector};
use crate::specfun::PositiveReal;
use crate::{Error, Result, C64};

pub const DEFAULT_BATCH: usize = 1 << 14;

const RATE_STREAMS: u64 = 1;
const NORM_STREAMS: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    n_samples: usize,
    seed: u64,
    batch: usize,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64, batch: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Invalid("need at least one sample".into()));
        }
        if batch == 0 || batch > n_samples {
            return Err(Error::Invalid(format!(
                "batch must lie in 1..={n_samples}, got {batch}"
            )));
        }
        Ok(Self {
            n_samples,
            seed,
            batch,
        })
    }

    /// Default chunk size, capped at the sample count.
    pub fn with_samples(n_samples: usize, seed: u64) -> Result<Self> {
        Self::new(n_samples, seed, DEFAULT_BATCH.min(n_samples.max(1)))
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    fn chunks(&self) -> usize {
        self.n_samples.div_ceil(self.batch)
    }

    fn chunk_rng(&self, family: u64, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((family << 48) | chunk as u64);
        rng
    }

    fn chunk_len(&self, chunk: usize) -> usize {
        self.batch.min(self.n_samples - chunk * self.batch)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl EstimateWithError {
    /// `|value - mean|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (value - self.mean).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + d * b.n / n,
            m2: a.m2 + b.m2 + d * d * a.n * b.n / n,
        }
    }

    fn tree(parts: &[Moments]) -> Moments {
        match parts.len() {
            0 => Moments::default(),
            1 => parts[0],
            n => Moments::merge(Self::tree(&parts[..n / 2]), Self::tree(&parts[n / 2..])),
        }
    }

    fn estimate(&self) -> EstimateWithError {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        EstimateWithError {
            mean: self.mean,
            std_error: (var / self.n).sqrt(),
            n: self.n as usize,
        }
    }
}

/// Runs `sample` once per draw, accumulating `outputs` statistics.
fn estimate<F>(cfg: &McConfig, family: u64, outputs: usize, sample: F) -> Vec<EstimateWithError>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let per_chunk: Vec<Vec<Moments>> = (0..cfg.chunks())
        .into_par_iter()
        .map(|c| {
            let mut rng = cfg.chunk_rng(family, c);
            let mut acc = vec![Moments::default(); outputs];
            let mut buf = vec![0.0; outputs];
            for _ in 0..cfg.chunk_len(c) {
                sample(&mut rng, &mut buf);
                for (m, &x) in acc.iter_mut().zip(&buf) {
                    m.push(x);
                }
            }
            acc
        })
        .collect();
    (0..outputs)
        .map(|k| {
            let column: Vec<Moments> = per_chunk.iter().map(|acc| acc[k]).collect();
            Moments::tree(&column).estimate()
        })
        .collect()
}

/// Draws `h = S^1/2 g` with `g` standard circular complex Gaussian.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    root: DMatrix<C64>,
}

impl ChannelSampler {
    pub fn new(sigma: &Covariance) -> Self {
        Self {
            root: sqrtm_psd(sigma).matrix().clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<C64> {
        &self.root * complex_gaussian(self.root.nrows(), rng)
    }
}

/// One channel draw; builds the square root each call.
pub fn sample_channel<R: Rng + ?Sized>(sigma: &Covariance, rng: &mut R) -> DVector<C64> {
    ChannelSampler::new(sigma).sample(rng)
}

#[inline]
fn fill_gaussian(rng: &mut ChaCha8Rng, g: &mut [C64]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for z in g.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z = C64::new(s * re, s * im);
    }
}

/// Per-user empirical rates when user `i` (channel covariance `sigmas[i]`)
/// is served by `beams[i]` and all beams share power `rho / beams.len()`.
pub fn empirical_user_rates(
    sigmas: &[Covariance],
    beams: &[GrassmannVector],
    rho: PositiveReal,
    cfg: &McConfig,
) -> Result<Vec<EstimateWithError>> {
    let users = beams.len();
    if sigmas.len() != users || users == 0 {
        return Err(Error::Dimension {
            expected: users,
            got: sigmas.len(),
        });
    }
    let dim = beams[0].dim();
    for s in sigmas {
        if s.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: s.dim(),
            });
        }
    }
    if let Some(w) = beams.iter().find(|w| w.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: w.dim(),
        });
    }
    // h_i^H w_j = g^H (S_i^1/2 w_j), so precompute the effective beams
    let effective: Vec<Vec<Vec<C64>>> = sigmas
        .iter()
        .map(|s| {
            let root = sqrtm_psd(s);
            beams
                .iter()
                .map(|w| (root.matrix() * w.coords()).iter().copied().collect())
                .collect()
        })
        .collect();
    let power = rho.get() / users as f64;
    Ok(estimate(cfg, RATE_STREAMS, users, |rng, out| {
        let mut stack = [C64::new(0.0, 0.0); 8];
        let mut heap = Vec::new();
        let g: &mut [C64] = if dim <= stack.len() {
            &mut stack[..dim]
        } else {
            heap.resize(dim, C64::new(0.0, 0.0));
            &mut heap
        };
        for (i, eff) in effective.iter().enumerate() {
            fill_gaussian(rng, g);
            let mut interference = 0.0;
            let mut own = 0.0;
            for (j, a) in eff.iter().enumerate() {
                let ip: C64 = g.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
                if j == i {
                    own = ip.norm_sqr();
                } else {
                    interference += ip.norm_sqr();
                }
            }
            out[i] = (power * own / (1.0 + power * interference)).ln_1p();
        }
    }))
}

/// Empirical rates of both users for a two-user pair.
pub fn empirical_rate(
    sigma1: &Covariance,
    sigma2: &Covariance,
    pair: &BeamformerPair,
    rho: PositiveReal,
    cfg: &McConfig,
) -> Result<[EstimateWithError; 2]> {
    let est = empirical_user_rates(
        &[sigma1.clone(), sigma2.clone()],
        &[pair.w1.clone(), pair.w2.clone()],
        rho,
        cfg,
    )?;
    Ok([est[0], est[1]])
}

/// Draws of `u^H diag(lambda) u` for isotropic unit `u`, in stream order.
pub fn sample_weighted_norms(spec: &WeightSpectrum, cfg: &McConfig) -> Vec<f64> {
    let lambdas = spec.values();
    let dim = lambdas.len();
    let chunks: Vec<Vec<f64>> = (0..cfg.chunks())
        .into_par_iter()
        .map(|c| {
            let mut rng = cfg.chunk_rng(NORM_STREAMS, c);
            let mut g = vec![C64::new(0.0, 0.0); dim];
            (0..cfg.chunk_len(c))
                .map(|_| {
                    fill_gaussian(&mut rng, &mut g);
                    let norm: f64 = g.iter().map(|z| z.norm_sqr()).sum();
                    let weighted: f64 = g.iter().zip(lambdas).map(|(z, l)| l * z.norm_sqr()).sum();
                    weighted / norm
                })
                .collect()
        })
        .collect();
    chunks.concat()
}

/// Empirical CDF of `u^H diag(lambda) u` at each grid point.
pub fn empirical_weighted_norm_cdf(
    spec: &WeightSpectrum,
    cfg: &McConfig,
    grid: &[f64],
) -> Vec<(f64, f64)> {
    let mut draws = sample_weighted_norms(spec, cfg);
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    grid.iter()
        .map(|&y| (y, draws.partition_point(|&x| x <= y) as f64 / n))
        .collect()
}

/// Kolmogorov-Smirnov distance between the draws and a reference CDF.
pub fn ks_distance(draws: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::weighted_norm_cdf;
    use crate::fixtures;
    use crate::rates::{ergodic_rate_two_user, rate_low_snr_slope};

    fn pr(x: f64) -> PositiveReal {
        PositiveReal::new(x).unwrap()
    }

    fn empirical_covariance(sigma: &Covariance, n: usize, seed: u64) -> DMatrix<C64> {
        let sampler = ChannelSampler::new(sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = sigma.dim();
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for _ in 0..n {
            let h = sampler.sample(&mut rng);
            acc += &h * h.adjoint();
        }
        acc / C64::new(n as f64, 0.0)
    }

    fn frob(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::new(0, 1, 1).is_err());
        assert!(McConfig::new(10, 1, 11).is_err());
        assert!(McConfig::new(10, 1, 0).is_err());
        assert_eq!(McConfig::with_samples(10, 1).unwrap().batch(), 10);
    }

    #[test]
    fn identity_channel_covariance() {
        let id = Covariance::identity(2);
        let emp = empirical_covariance(&id, 100_000, 3);
        assert!(frob(&(emp - DMatrix::identity(2, 2))) < 0.02);
    }

    #[test]
    fn covariance_error_shrinks_with_n() {
        let (s, _) = fixtures::correlated_pair_a();
        let small = frob(&(empirical_covariance(&s, 4_000, 5) - s.matrix()));
        let large = frob(&(empirical_covariance(&s, 400_000, 5) - s.matrix()));
        assert!(large < small);
        assert!(large < 0.02);
    }

    #[test]
    fn norm_statistics() {
        // |h|^2 for S = I has mean M and variance M
        let id = Covariance::identity(2);
        let sampler = ChannelSampler::new(&id);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).norm_squared()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        assert!((var - 2.0).abs() < 0.05);
        let d = Covariance::diag(&[2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = (0..n).map(|_| sample_channel(&d, &mut rng).norm_squared()).sum::<f64>() / n as f64;
        assert!((m - 3.0).abs() < 3.0 * (5.0 / n as f64).sqrt());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (s1, s2) = fixtures::correlated_pair_a();
        let pair = BeamformerPair {
            w1: GrassmannVector::basis(2, 0),
            w2: GrassmannVector::basis(2, 1),
        };
        let cfg = McConfig::new(50_000, 42, 4096).unwrap();
        let a = empirical_rate(&s1, &s2, &pair, pr(5.0), &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| empirical_rate(&s1, &s2, &pair, pr(5.0), &cfg).unwrap());
        assert_eq!(a, b);
        let spec = WeightSpectrum::new(vec![3.0, 1.0]).unwrap();
        let x = sample_weighted_norms(&spec, &cfg);
        let y = pool.install(|| sample_weighted_norms(&spec, &cfg));
        assert_eq!(x, y);
    }

    #[test]
    fn phase_invariance() {
        let (s1, s2) = fixtures::correlated_pair_b();
        let w1 = GrassmannVector::from_real(&[0.6, 0.8]).unwrap();
        let w2 = GrassmannVector::from_slice(&[C64::new(0.0, 0.6), C64::new(0.8, 0.0)]).unwrap();
        let cfg = McConfig::with_samples(20_000, 8).unwrap();
        let base = empirical_rate(&s1, &s2, &BeamformerPair { w1: w1.clone(), w2: w2.clone() }, pr(2.0), &cfg).unwrap();
        for rot in [C64::new(-1.0, 0.0), C64::new(0.0, 1.0)] {
            let r1 = GrassmannVector::new(w1.coords() * rot).unwrap();
            let r2 = GrassmannVector::new(w2.coords() * rot).unwrap();
            let turned = empirical_rate(&s1, &s2, &BeamformerPair { w1: r1, w2: r2 }, pr(2.0), &cfg).unwrap();
            assert_eq!(base, turned);
        }
    }

    #[test]
    fn low_snr_slope_matches() {
        let (s1, s2) = fixtures::correlated_pair_a();
        let pair = BeamformerPair {
            w1: GrassmannVector::from_real(&[0.8, -0.6]).unwrap(),
            w2: GrassmannVector::from_real(&[0.6, 0.8]).unwrap(),
        };
        let rho = 1e-3;
        let cfg = McConfig::with_samples(1_000_000, 12).unwrap();
        let est = empirical_rate(&s1, &s2, &pair, pr(rho), &cfg).unwrap();
        let slope = rate_low_snr_slope(&s1, &pair.w1).unwrap();
        let scaled = EstimateWithError {
            mean: est[0].mean / rho,
            std_error: est[0].std_error / rho,
            n: est[0].n,
        };
        // the slope is a limit; at rho = 1e-3 the bias is O(rho)
        assert!(scaled.z_score(slope) < 3.0 || (scaled.mean / slope - 1.0).abs() < 2e-3);
    }

    #[test]
    fn coincident_beams_saturate() {
        let id = Covariance::identity(2);
        let w = GrassmannVector::basis(2, 0);
        let cfg = McConfig::with_samples(100_000, 4).unwrap();
        let est = empirical_rate(&id, &id, &BeamformerPair { w1: w.clone(), w2: w }, pr(1e4), &cfg).unwrap();
        assert!(est[0].mean < 2f64.ln() + 0.01);
    }

    #[test]
    fn closed_form_agreement_smoke() {
        let (s1, s2) = fixtures::correlated_pair_b();
        let pair = BeamformerPair {
            w1: GrassmannVector::from_real(&[0.8, -0.6]).unwrap(),
            w2: GrassmannVector::from_real(&[0.6, 0.8]).unwrap(),
        };
        let cfg = McConfig::with_samples(200_000, 21).unwrap();
        let est = empirical_rate(&s1, &s2, &pair, pr(4.0), &cfg).unwrap();
        let r1 = ergodic_rate_two_user(&s1, &pair.w1, &pair.w2, pr(4.0)).unwrap();
        assert!(est[0].z_score(r1) < 4.0);
    }

    #[test]
    fn weighted_norm_cdf_matches() {
        let spec = WeightSpectrum::new(vec![3.0, 2.0, 1.0]).unwrap();
        let cfg = McConfig::with_samples(100_000, 6).unwrap();
        let draws = sample_weighted_norms(&spec, &cfg);
        let ks = ks_distance(&draws, |y| weighted_norm_cdf(&spec, y).unwrap());
        assert!(ks < 0.01);
        let table = empirical_weighted_norm_cdf(&spec, &cfg, &[1.0, 2.0, 3.0]);
        assert_eq!(table[0].1, 0.0);
        assert_eq!(table[2].1, 1.0);
        assert!((table[1].1 - 0.5).abs() < 0.01);
    }

    #[test]
    fn tied_weights_concentrate() {
        let spec = WeightSpectrum::new(vec![1.7, 1.7]).unwrap();
        let cfg = McConfig::with_samples(1000, 1).unwrap();
        assert!(sample_weighted_norms(&spec, &cfg).iter().all(|x| (x - 1.7).abs() < 1e-12));
    }
}
