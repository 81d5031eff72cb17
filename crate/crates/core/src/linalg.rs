//! Small complex Hermitian linear algebra and Grassmann geometry.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result, C64};

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_CLAMP: f64 = 1e-12;
const DEGENERATE_GAP: f64 = 1e-10;
const SIGNIFICANT_ENTRY: f64 = 1e-9;

/// Unit-norm complex vector with its global phase fixed: the first entry
/// with modulus above 1e-9 is real and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannVector {
    coords: DVector<C64>,
}

impl GrassmannVector {
    pub fn new(coords: DVector<C64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Invalid(format!(
                "beamformer must be finite and nonzero (norm {norm})"
            )));
        }
        let mut coords = coords;
        if (norm - 1.0).abs() > 1e-14 {
            coords.unscale_mut(norm);
        }
        if let Some(k) = coords.iter().position(|z| z.norm() > SIGNIFICANT_ENTRY) {
            let lead = coords[k];
            if !(lead.im == 0.0 && lead.re > 0.0) {
                let modulus = lead.norm();
                let rot = lead.conj() / modulus;
                for z in coords.iter_mut() {
                    *z *= rot;
                }
                coords[k] = C64::new(modulus, 0.0);
            }
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn from_real(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            coords.len(),
            coords.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    /// Standard basis vector `e_k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        Self { coords: v }
    }

    /// Isotropically distributed point (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let v = complex_gaussian(dim, rng);
            if let Ok(w) = Self::new(v) {
                return w;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<C64> {
        &self.coords
    }

    /// `self^H other`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.coords.dotc(&other.coords)
    }
}

/// Vector with i.i.d. CN(0, 1) entries (variance 1/2 per component).
pub fn complex_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Hermitian positive semi-definite channel covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    m: DMatrix<C64>,
    trace_normalized: bool,
}

impl Covariance {
    /// Validates Hermitian symmetry and positive semi-definiteness. Small
    /// negative eigenvalues (above -1e-12 relative to the largest) are clamped.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::Dimension {
                expected: n,
                got: m.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::Invalid("empty covariance".into()));
        }
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid("non-finite covariance entry".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        let mut sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let (values, vectors) = eigh_matrix(&sym);
        let top = values[0].max(0.0);
        let bottom = values[n - 1];
        if bottom < -PSD_CLAMP * top.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(bottom));
        }
        if bottom < 0.0 {
            let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
            sym = compose(&clamped, &vectors);
        }
        let trace: f64 = (0..n).map(|i| sym[(i, i)].re).sum();
        let trace_normalized = (trace - n as f64).abs() <= 1e-9 * n as f64;
        Ok(Self {
            m: sym,
            trace_normalized,
        })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is a covariance")
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Whether `Tr = M` held on construction.
    pub fn is_trace_normalized(&self) -> bool {
        self.trace_normalized
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.m * C64::new(c, 0.0))
    }

    /// `a^H S b`.
    pub fn bilinear(&self, a: &GrassmannVector, b: &GrassmannVector) -> Result<C64> {
        check_dim(self.dim(), a.dim())?;
        check_dim(self.dim(), b.dim())?;
        Ok(a.coords.dotc(&(&self.m * &b.coords)))
    }

    /// `w^H S w`.
    pub fn quad(&self, w: &GrassmannVector) -> Result<f64> {
        Ok(self.bilinear(w, w)?.re)
    }

    pub fn eigh(&self) -> Eigh {
        eigh(self)
    }

    /// Ratio of the largest to the smallest eigenvalue (infinite if singular).
    pub fn condition_number(&self) -> f64 {
        let (values, _) = eigh_matrix(&self.m);
        let last = values[values.len() - 1];
        if last <= 0.0 {
            f64::INFINITY
        } else {
            values[0] / last
        }
    }

    fn check_pd(&self) -> Result<(Vec<f64>, Vec<DVector<C64>>)> {
        let (values, vectors) = eigh_matrix(&self.m);
        let last = values[values.len() - 1];
        if last <= PSD_CLAMP * values[0].max(f64::MIN_POSITIVE) {
            return Err(Error::Singular(last));
        }
        Ok((values, vectors))
    }

    /// `S^-1` for strictly positive-definite `S`.
    pub fn inverse_pd(&self) -> Result<DMatrix<C64>> {
        let (values, vectors) = self.check_pd()?;
        let inv: Vec<f64> = values.iter().map(|v| 1.0 / v).collect();
        Ok(compose(&inv, &vectors))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// `U diag(values) U^H`, made exactly Hermitian.
fn compose(values: &[f64], vectors: &[DVector<C64>]) -> DMatrix<C64> {
    let n = vectors[0].len();
    let mut out = DMatrix::zeros(n, n);
    for (v, u) in values.iter().zip(vectors) {
        out += u * u.adjoint() * C64::new(*v, 0.0);
    }
    (&out + out.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending. Closed form for
/// 2x2, nalgebra's Hermitian solver otherwise.
pub(crate) fn eigh_matrix(m: &DMatrix<C64>) -> (Vec<f64>, Vec<DVector<C64>>) {
    if m.nrows() == 2 {
        return eigh2(m);
    }
    let se = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| se.eigenvectors.column(k).into_owned())
        .collect();
    (values, vectors)
}

fn eigh2(m: &DMatrix<C64>) -> (Vec<f64>, Vec<DVector<C64>>) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b.norm());
    let l1 = mean + radius;
    let l2 = mean - radius;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let v1 = if b.norm() <= 1e-300 {
        if a >= d {
            DVector::from_vec(vec![one, zero])
        } else {
            DVector::from_vec(vec![zero, one])
        }
    } else {
        let p = DVector::from_vec(vec![b, C64::new(l1 - a, 0.0)]);
        let q = DVector::from_vec(vec![C64::new(l1 - d, 0.0), b.conj()]);
        let v = if p.norm() >= q.norm() { p } else { q };
        let n = v.norm();
        v.unscale(n)
    };
    let v2 = DVector::from_vec(vec![-v1[1].conj(), v1[0].conj()]);
    (vec![l1, l2], vec![v1, v2])
}

fn degenerate_gaps(values: &[f64]) -> bool {
    let scale = values[0].abs().max(f64::MIN_POSITIVE);
    values
        .windows(2)
        .any(|w| (w[0] - w[1]) < DEGENERATE_GAP * scale)
}

/// Eigendecomposition with canonical-phase eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigh {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<GrassmannVector>,
    /// Some consecutive gap is below 1e-10 of the top eigenvalue.
    pub degenerate: bool,
}

pub fn eigh(s: &Covariance) -> Eigh {
    let (values, vectors) = eigh_matrix(&s.m);
    let degenerate = degenerate_gaps(&values);
    let vectors = vectors
        .into_iter()
        .map(|v| GrassmannVector::new(v).expect("eigenvectors are unit vectors"))
        .collect();
    Eigh {
        values,
        vectors,
        degenerate,
    }
}

/// Principal square root of a PSD covariance.
pub fn sqrtm_psd(s: &Covariance) -> Covariance {
    let (values, vectors) = eigh_matrix(&s.m);
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    Covariance::new(compose(&roots, &vectors)).expect("square root of PSD is PSD")
}

/// Inverse principal square root of a strictly positive-definite covariance.
pub fn inv_sqrtm_pd(s: &Covariance) -> Result<Covariance> {
    let (values, vectors) = s.check_pd()?;
    let roots: Vec<f64> = values.iter().map(|v| 1.0 / v.sqrt()).collect();
    Covariance::new(compose(&roots, &vectors))
}

/// Solutions of `A x = eta B x` for PSD `A` and positive-definite `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenEigenPair {
    /// Generalized eigenvalues, descending.
    pub values: Vec<f64>,
    /// `B^-1/2 v_k` normalized to the Grassmannian.
    pub vectors: Vec<GrassmannVector>,
    /// Orthonormal eigenvectors `v_k` of the whitened matrix `B^-1/2 A B^-1/2`.
    pub whitened: Vec<DVector<C64>>,
    pub degenerate: bool,
}

pub fn generalized_eig(a: &Covariance, b: &Covariance) -> Result<GenEigenPair> {
    check_dim(a.dim(), b.dim())?;
    let (bvals, bvecs) = b.check_pd()?;
    let inv_half = compose(
        &bvals.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>(),
        &bvecs,
    );
    let whitened_matrix = &inv_half * &a.m * &inv_half;
    let whitened_matrix = (&whitened_matrix + whitened_matrix.adjoint()) * C64::new(0.5, 0.0);
    let (values, mut whitened) = eigh_matrix(&whitened_matrix);
    let degenerate = degenerate_gaps(&values);
    let scale = values[0].abs().max(f64::MIN_POSITIVE);
    let fully_degenerate = values[0] - values[values.len() - 1] < DEGENERATE_GAP * scale;
    let vectors = if fully_degenerate {
        // A is proportional to B; every direction is a generalized
        // eigenvector, so fall back to the eigenvectors of A.
        let half = compose(
            &bvals.iter().map(|v| v.sqrt()).collect::<Vec<_>>(),
            &bvecs,
        );
        let (_, avecs) = eigh_matrix(&a.m);
        whitened = avecs
            .iter()
            .map(|u| {
                let v = &half * u;
                let n = v.norm();
                v.unscale(n)
            })
            .collect();
        avecs
            .into_iter()
            .map(|u| GrassmannVector::new(u).expect("unit eigenvector"))
            .collect()
    } else {
        whitened
            .iter()
            .map(|v| GrassmannVector::new(&inv_half * v).expect("B^-1/2 is nonsingular"))
            .collect()
    };
    Ok(GenEigenPair {
        values,
        vectors,
        whitened,
        degenerate,
    })
}

/// Quadratic forms of the whitened generalized eigenvectors in `Sigma2^-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauCoefficients {
    pub tau1: f64,
    pub tau2: f64,
    /// `v1^H Sigma2^-1 v2`; only its modulus is phase invariant.
    pub tau3: C64,
}

impl TauCoefficients {
    pub fn tau3_abs(&self) -> f64 {
        self.tau3.norm()
    }
}

pub fn tau_coefficients(pair: &GenEigenPair, sigma2: &Covariance) -> Result<TauCoefficients> {
    if pair.whitened.len() < 2 {
        return Err(Error::Invalid("need two generalized eigenvectors".into()));
    }
    check_dim(sigma2.dim(), pair.whitened[0].len())?;
    let inv = sigma2.inverse_pd()?;
    let v1 = &pair.whitened[0];
    let v2 = &pair.whitened[1];
    Ok(TauCoefficients {
        tau1: v1.dotc(&(&inv * v1)).re,
        tau2: v2.dotc(&(&inv * v2)).re,
        tau3: v1.dotc(&(&inv * v2)),
    })
}

/// Dominant eigenvector of `B^-1 A` for PSD `A` and positive-definite `B`
/// (given as raw Hermitian matrices).
pub(crate) fn dominant_generalized(a: &DMatrix<C64>, b: &DMatrix<C64>) -> GrassmannVector {
    let (bvals, bvecs) = eigh_matrix(b);
    let inv_half = compose(
        &bvals.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>(),
        &bvecs,
    );
    let w = &inv_half * a * &inv_half;
    let w = (&w + w.adjoint()) * C64::new(0.5, 0.0);
    let (values, vectors) = eigh_matrix(&w);
    let scale = values[0].abs().max(f64::MIN_POSITIVE);
    if values[0] - values[1] < DEGENERATE_GAP * scale {
        let (_, avecs) = eigh_matrix(a);
        return GrassmannVector::new(avecs[0].clone()).expect("unit eigenvector");
    }
    GrassmannVector::new(&inv_half * &vectors[0]).expect("B^-1/2 is nonsingular")
}

/// Chordal distance `sqrt(1 - |w1^H w2|^2)`.
pub fn chordal_distance(w1: &GrassmannVector, w2: &GrassmannVector) -> Result<f64> {
    check_dim(w1.dim(), w2.dim())?;
    // residual of w1 after projecting onto w2; avoids sqrt(1 - c^2) cancellation
    let along = w2.coords().dotc(w1.coords());
    Ok((w1.coords() - w2.coords() * along).norm().min(1.0))
}

/// Covariance-weighted semi-metric `sqrt(4 (AB - C^2)) / (A + B)`.
pub fn d_sigma(s: &Covariance, w1: &GrassmannVector, w2: &GrassmannVector) -> Result<f64> {
    check_dim(s.dim(), w1.dim())?;
    check_dim(s.dim(), w2.dim())?;
    // AB - C^2 is the Gram determinant of x_k = S^1/2 w_k
    let root = sqrtm_psd(s);
    let x1 = root.matrix() * w1.coords();
    let x2 = root.matrix() * w2.coords();
    let a = x1.norm_squared();
    let b = x2.norm_squared();
    let sum = a + b;
    if sum <= 0.0 {
        return Ok(0.0);
    }
    let residual = if a > 0.0 {
        (&x2 - &x1 * (x1.dotc(&x2) / a)).norm_squared()
    } else {
        0.0
    };
    Ok(((4.0 * a * residual).sqrt() / sum).min(1.0))
}

pub(crate) fn distance_from_abc(a: f64, b: f64, c: f64) -> f64 {
    let sum = a + b;
    if sum <= 0.0 {
        return 0.0;
    }
    let det = (a * b - c * c).max(0.0);
    ((4.0 * det).sqrt() / sum).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn frob(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn on_grassmann(a: &GrassmannVector, b: &GrassmannVector, tol: f64) -> bool {
        chordal_distance(a, b).unwrap() < tol
    }

    #[test]
    fn covariance_rejects_bad_input() {
        let non_herm = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.2, 0.0), c(1.0, 0.0)]);
        assert!(matches!(Covariance::new(non_herm), Err(Error::NotHermitian(_))));
        let indefinite = Covariance::from_real_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(indefinite, Err(Error::NotPsd(_))));
        let ragged = Covariance::from_rows(&[vec![c(1.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]]);
        assert!(ragged.is_err());
    }

    #[test]
    fn covariance_clamps_roundoff() {
        // rank one up to a tiny negative eigenvalue
        let eps = 1e-14;
        let s = Covariance::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0 - eps]]).unwrap();
        assert!(s.eigh().values[1] >= 0.0);
    }

    #[test]
    fn trace_flag() {
        assert!(fixtures::correlated_pair_a().0.is_trace_normalized());
        assert!(!Covariance::diag(&[2.0, 1.0]).unwrap().is_trace_normalized());
    }

    #[test]
    fn eigh_examples() {
        let id = Covariance::identity(2).eigh();
        assert_eq!(id.values, vec![1.0, 1.0]);
        assert!(id.degenerate);

        let d = Covariance::diag(&[2.0, 1.0]).unwrap().eigh();
        assert_eq!(d.values, vec![2.0, 1.0]);
        assert!(!d.degenerate);
        assert_eq!(d.vectors[0], GrassmannVector::basis(2, 0));
        assert_eq!(d.vectors[1], GrassmannVector::basis(2, 1));

        let (s1, s2) = fixtures::correlated_pair_a();
        let e = s1.eigh();
        assert!((e.values[0] - 1.931_974_881_6).abs() < 1e-9);
        assert!((e.values[1] - 0.068_025_118_4).abs() < 1e-9);
        let e = s2.eigh();
        assert!((e.values[0] - 1.949_105_505_2).abs() < 1e-9);
    }

    fn reconstruct(e: &Eigh) -> DMatrix<C64> {
        let vecs: Vec<DVector<C64>> = e.vectors.iter().map(|v| v.coords().clone()).collect();
        compose(&e.values, &vecs)
    }

    #[test]
    fn eigh_reconstructs_random_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 2..=4 {
            for _ in 0..25 {
                let s = fixtures::random_pd(dim, &mut rng);
                let e = s.eigh();
                assert!(frob(&(reconstruct(&e) - s.matrix())) < 1e-10);
                assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn square_roots() {
        assert_eq!(sqrtm_psd(&Covariance::identity(2)), Covariance::identity(2));
        let d = Covariance::diag(&[4.0, 1.0]).unwrap();
        let r = sqrtm_psd(&d);
        assert!((r.entry(0, 0) - c(2.0, 0.0)).norm() < 1e-15);
        assert!((r.entry(1, 1) - c(1.0, 0.0)).norm() < 1e-15);
        let ri = inv_sqrtm_pd(&d).unwrap();
        assert!((ri.entry(0, 0) - c(0.5, 0.0)).norm() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 2..=4 {
            let s = fixtures::random_pd(dim, &mut rng);
            let r = sqrtm_psd(&s);
            assert!(frob(&(r.matrix() * r.matrix() - s.matrix())) <= 1e-10);
            let ri = inv_sqrtm_pd(&s).unwrap();
            let id = DMatrix::<C64>::identity(dim, dim);
            assert!(frob(&(ri.matrix() * s.matrix() * ri.matrix() - id)) <= 1e-10);
        }
    }

    #[test]
    fn inverse_sqrt_rejects_singular() {
        let s = Covariance::from_real_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!(matches!(inv_sqrtm_pd(&s), Err(Error::Singular(_))));
        assert!(generalized_eig(&Covariance::identity(2), &s).is_err());
    }

    #[test]
    fn generalized_eig_identity_and_equal() {
        let (s1, _) = fixtures::correlated_pair_a();
        let g = generalized_eig(&s1, &Covariance::identity(2)).unwrap();
        let e = s1.eigh();
        for k in 0..2 {
            assert!((g.values[k] - e.values[k]).abs() < 1e-12);
            assert!(on_grassmann(&g.vectors[k], &e.vectors[k], 1e-8));
        }
        let g = generalized_eig(&s1, &s1).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(g.degenerate);
        assert!(on_grassmann(&g.vectors[0], &e.vectors[0], 1e-12));
    }

    #[test]
    fn generalized_eig_fixture_one() {
        let (a, b) = fixtures::tau_fixture(1);
        let g = generalized_eig(&a, &b).unwrap();
        assert!((g.values[0] - 5.8).abs() < 1e-10);
        assert!((g.values[1] - 0.118_367_346_9).abs() < 1e-9);
        let t = tau_coefficients(&g, &b).unwrap();
        assert!((t.tau1 - 3.222_222_222_2).abs() < 1e-9);
        assert!((t.tau2 - 0.591_836_734_7).abs() < 1e-9);
    }

    #[test]
    fn generalized_eig_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 2..=4 {
            for _ in 0..10 {
                let a = fixtures::random_pd(dim, &mut rng);
                let b = fixtures::random_pd(dim, &mut rng);
                let g = generalized_eig(&a, &b).unwrap();
                assert!(g.values.iter().all(|&v| v > 0.0));
                let scale = frob(a.matrix());
                for (eta, x) in g.values.iter().zip(&g.vectors) {
                    let r = a.matrix() * x.coords() - b.matrix() * x.coords() * C64::new(*eta, 0.0);
                    assert!(r.norm() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn tau3_vanishes_for_common_basis() {
        let a = Covariance::diag(&[1.5, 0.5]).unwrap();
        let b = Covariance::diag(&[0.8, 1.2]).unwrap();
        let g = generalized_eig(&a, &b).unwrap();
        assert!(tau_coefficients(&g, &b).unwrap().tau3_abs() < 1e-15);
    }

    #[test]
    fn grassmann_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s1 = fixtures::random_pd(2, &mut rng);
            let s2 = fixtures::random_pd(2, &mut rng);
            let g12 = generalized_eig(&s1, &s2).unwrap();
            let g21 = generalized_eig(&s2, &s1).unwrap();
            assert!(on_grassmann(&g12.vectors[0], &g21.vectors[1], 1e-8));
            assert!(on_grassmann(&g12.vectors[1], &g21.vectors[0], 1e-8));
        }
    }

    #[test]
    fn conditioning_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let s1 = fixtures::random_pd(2, &mut rng);
            let s2 = fixtures::random_pd(2, &mut rng);
            let (chi1, chi2) = (s1.condition_number(), s2.condition_number());
            let g = generalized_eig(&s1, &s2).unwrap();
            let ratio = g.values[0] / g.values[1];
            assert!(chi1 / chi2 <= ratio * (1.0 + 1e-12));
            assert!(ratio <= chi1 * chi2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn chordal_examples() {
        let e1 = GrassmannVector::basis(2, 0);
        let e2 = GrassmannVector::basis(2, 1);
        assert_eq!(chordal_distance(&e1, &e1).unwrap(), 0.0);
        assert_eq!(chordal_distance(&e1, &e2).unwrap(), 1.0);
        assert!(chordal_distance(&e1, &GrassmannVector::basis(3, 0)).is_err());
    }

    #[test]
    fn d_sigma_reduces_to_chordal_for_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = Covariance::diag(&[2.5, 2.5]).unwrap();
        for _ in 0..100 {
            let a = GrassmannVector::random(2, &mut rng);
            let b = GrassmannVector::random(2, &mut rng);
            let d = d_sigma(&s, &a, &b).unwrap();
            assert!((d - chordal_distance(&a, &b).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn triangle_fixture_values() {
        let (s, w1, w2, w3) = fixtures::triangle();
        let d13 = d_sigma(&s, &w1, &w3).unwrap();
        let d12 = d_sigma(&s, &w1, &w2).unwrap();
        let d23 = d_sigma(&s, &w2, &w3).unwrap();
        assert!((d13 - 0.507_136_287_6).abs() < 1e-9);
        assert!((d12 + d23 - 0.506_822_050_5).abs() < 1e-9);
        assert!(d13 > d12 + d23);
        // without the factor four the same fixture gives the half values
        assert!((d13 / 2.0 - 0.2536).abs() < 5e-5);
        assert!(((d12 + d23) / 2.0 - 0.2534).abs() < 5e-5);
    }

    #[test]
    fn d_sigma_reaches_one() {
        // w2 chosen so that A = B and C = 0 under S
        let s = Covariance::diag(&[3.0, 1.0]).unwrap();
        let w1 = GrassmannVector::from_real(&[1.0, 3f64.sqrt()]).unwrap();
        let w2 = GrassmannVector::from_real(&[1.0, -(3f64.sqrt())]).unwrap();
        assert!((d_sigma(&s, &w1, &w2).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn canonical_phase() {
        let v = GrassmannVector::from_slice(&[c(0.0, 2.0), c(1.0, -1.0)]).unwrap();
        assert!(v.coords()[0].im == 0.0 && v.coords()[0].re > 0.0);
        assert!((v.coords().norm() - 1.0).abs() < 1e-15);
        let tiny_lead = GrassmannVector::from_slice(&[c(1e-12, 1e-12), c(0.0, -1.0)]).unwrap();
        assert_eq!(tiny_lead.coords()[1], c(1.0, 0.0));
        assert!(GrassmannVector::from_real(&[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn canonicalization_idempotent(re in proptest::collection::vec(-5.0f64..5.0, 6), im in proptest::collection::vec(-5.0f64..5.0, 6)) {
            let v: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| c(a, b)).collect();
            prop_assume!(v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-6);
            let once = GrassmannVector::from_slice(&v).unwrap();
            let twice = GrassmannVector::new(once.coords().clone()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn d_sigma_bounded_and_symmetric(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = fixtures::random_pd(2, &mut rng);
            let a = GrassmannVector::random(2, &mut rng);
            let b = GrassmannVector::random(2, &mut rng);
            let d = d_sigma(&s, &a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((d - d_sigma(&s, &b, &a).unwrap()).abs() < 1e-14);
            prop_assert!(d_sigma(&s, &a, &a).unwrap() < 1e-7);
        }

        #[test]
        fn phase_rotation_is_quotiented(seed in 0u64..10_000, theta in 0.0f64..std::f64::consts::TAU) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = GrassmannVector::random(3, &mut rng);
            let rotated = GrassmannVector::new(w.coords() * C64::from_polar(1.0, theta)).unwrap();
            prop_assert!((rotated.coords() - w.coords()).norm() < 1e-14);
        }
    }
}
