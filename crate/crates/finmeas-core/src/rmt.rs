//! Random-matrix and spectral primitives: GUE sampling, Haar states,
//! eigendecomposition, dephasing maps, distances, and Haar moment formulas.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Spectra whose minimum level gap falls below this fraction of the spectral
/// radius are treated as degenerate and rejected.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;

/// Dense complex self-adjoint matrix. Hermiticity is exact by construction:
/// samplers write conjugate pairs, and real-linear combinations preserve the
/// property entry for entry.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    entries: CMat,
}

impl HermitianOperator {
    /// Wrap a matrix, requiring exact (bitwise) self-adjointness.
    pub fn new(entries: CMat) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::ShapeMismatch {
                expected: (r, r),
                got: (r, c),
            });
        }
        if r == 0 {
            return Err(Error::InvalidDimension);
        }
        for i in 0..r {
            for j in i..r {
                if entries[(i, j)] != entries[(j, i)].conj() {
                    return Err(Error::Contract(format!(
                        "entry ({i},{j}) is not the conjugate of its transpose"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    /// `self + scale * other`, exactly Hermitian for real `scale`.
    pub fn add_scaled(&self, scale: f64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch {
                expected: (self.dim(), self.dim()),
                got: (other.dim(), other.dim()),
            });
        }
        let entries = &self.entries + &other.entries.mapv(|z| scale * z);
        Ok(Self { entries })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Eigensystem of a Hermitian operator: eigenvalues ascending, eigenvectors
/// as unitary columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        let v = &self.eigenvalues;
        (1..v.len())
            .map(|i| v[i] - v[i - 1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn degeneracy_tol(&self) -> f64 {
        DEGENERACY_REL_TOL * self.spectral_radius()
    }

    pub fn is_degenerate(&self) -> bool {
        self.dim() > 1 && self.min_gap() < self.degeneracy_tol()
    }

    /// Phase factors exp(-i lambda t).
    pub fn phases(&self, t: f64) -> CVec {
        self.eigenvalues
            .mapv(|l| Complex64::from_polar(1.0, -l * t))
    }
}

pub fn dagger(m: &CMat) -> CMat {
    let mut out = CMat::zeros((m.ncols(), m.nrows()));
    for ((i, j), z) in m.indexed_iter() {
        out[(j, i)] = z.conj();
    }
    out
}

fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Draw from the Gaussian Unitary Ensemble: off-diagonal entries have
/// independent real and imaginary parts of unit variance, diagonal entries
/// are real with variance 2, making the distribution exactly invariant under
/// unitary conjugation.
pub fn sample_gue(dim: usize, rng: &mut impl Rng) -> Result<HermitianOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    let mut a = CMat::zeros((dim, dim));
    for i in 0..dim {
        let x: f64 = rng.sample(StandardNormal);
        a[(i, i)] = Complex64::new(std::f64::consts::SQRT_2 * x, 0.0);
        for j in (i + 1)..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            a[(i, j)] = Complex64::new(re, im);
            a[(j, i)] = Complex64::new(re, -im);
        }
    }
    Ok(HermitianOperator { entries: a })
}

/// Haar-random unit vector: a standard complex Gaussian vector, normalized.
pub fn sample_haar_state(dim: usize, rng: &mut impl Rng) -> Result<CVec> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    let mut v = CVec::zeros(dim);
    loop {
        for z in v.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(re, im);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-100 {
            v.mapv_inplace(|z| z / norm);
            return Ok(v);
        }
    }
}

pub fn eig(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    if !all_finite(h.matrix()) {
        return Err(Error::NonFinite);
    }
    let (eigenvalues, vecs) = h.matrix().eigh(UPLO::Lower)?;
    // The LAPACK call reads the row-major buffer as column-major, so it
    // diagonalizes the transpose; conjugating restores column eigenvectors
    // of the logical matrix (and materializes standard layout).
    let eigenvectors = vecs.mapv(|z| z.conj());
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn require_same_dim(rho: &CMat, dim: usize) -> Result<()> {
    if rho.dim() != (dim, dim) {
        return Err(Error::ShapeMismatch {
            expected: (dim, dim),
            got: rho.dim(),
        });
    }
    Ok(())
}

/// Project onto the commutant of the decomposed Hamiltonian: keep only the
/// diagonal of rho in the eigenbasis. For a nondegenerate spectrum this is
/// the infinite-time average of the evolved state.
pub fn dephase(rho: &CMat, spec: &SpectralDecomposition) -> Result<CMat> {
    require_same_dim(rho, spec.dim())?;
    if spec.is_degenerate() {
        return Err(Error::DegenerateSpectrum {
            min_gap: spec.min_gap(),
            tol: spec.degeneracy_tol(),
        });
    }
    let q = &spec.eigenvectors;
    let y = dagger(q).dot(rho).dot(q);
    let mut scaled = q.clone();
    for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let w = y[(k, k)];
        col.mapv_inplace(|z| z * w);
    }
    Ok(scaled.dot(&dagger(q)))
}

/// Keep only the cross-frequency pairs of two spectra that coincide within
/// `tol`. Generic GUE spectra share no frequencies, so the result is zero;
/// the number of coinciding pairs is returned alongside.
pub fn cross_dephase(
    x: &CMat,
    spec_a: &SpectralDecomposition,
    spec_b: &SpectralDecomposition,
    tol: f64,
) -> Result<(CMat, usize)> {
    if x.dim() != (spec_a.dim(), spec_b.dim()) {
        return Err(Error::ShapeMismatch {
            expected: (spec_a.dim(), spec_b.dim()),
            got: x.dim(),
        });
    }
    let qa = &spec_a.eigenvectors;
    let qb = &spec_b.eigenvectors;
    let mut y = dagger(qa).dot(x).dot(qb);
    let mut coincidences = 0usize;
    for ((j, k), z) in y.indexed_iter_mut() {
        if (spec_a.eigenvalues[j] - spec_b.eigenvalues[k]).abs() <= tol {
            coincidences += 1;
        } else {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    if coincidences == 0 {
        return Ok((CMat::zeros(x.dim()), 0));
    }
    Ok((qa.dot(&y).dot(&dagger(qb)), coincidences))
}

/// Half the sum of absolute eigenvalues of rho - sigma.
pub fn trace_distance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let delta = rho - sigma;
    if !all_finite(&delta) {
        return Err(Error::NonFinite);
    }
    let (vals, _) = delta.eigh(UPLO::Lower)?;
    Ok(0.5 * vals.iter().map(|l| l.abs()).sum::<f64>())
}

pub fn frobenius_distance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    let mut s = 0.0;
    for (a, b) in rho.iter().zip(sigma.iter()) {
        s += (a - b).norm_sqr();
    }
    Ok(s.sqrt())
}

/// Closed form for the fourth moment of a single Haar-unitary column:
/// E[u_{i1} u_{i2} conj(u_{i3}) conj(u_{i4})]
/// = (delta_{i1,i3} delta_{i2,i4} + delta_{i1,i4} delta_{i2,i3}) / (d(d+1)).
/// Indices are zero-based.
pub fn haar_column_fourth_moment(
    d: usize,
    i1: usize,
    i2: usize,
    i3: usize,
    i4: usize,
) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension);
    }
    for &i in &[i1, i2, i3, i4] {
        if i >= d {
            return Err(Error::IndexOutOfRange { index: i, dim: d });
        }
    }
    let mut num = 0u64;
    if i1 == i3 && i2 == i4 {
        num += 1;
    }
    if i1 == i4 && i2 == i3 {
        num += 1;
    }
    Ok(num as f64 / (d as u64 * (d as u64 + 1)) as f64)
}
