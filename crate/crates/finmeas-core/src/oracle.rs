//! Slow reference routes on the full spin (x) apparatus product space, used
//! by tests and the self-check command to cross-validate the block fast
//! paths against direct dense computations.

use ndarray::Array2;
use num_complex::Complex64;
use rand::RngExt;

use crate::error::{Error, Result};
use crate::model::{ApparatusLayout, JointState};
use crate::rmt::{self, dagger, CMat, HermitianOperator, SpectralDecomposition};

/// Dimension of the full product space, two spin levels times the whole
/// apparatus ladder.
pub fn full_dim(layout: &ApparatusLayout) -> usize {
    2 * layout.apparatus_dim()
}

/// Starting indices of the two dynamical sectors in the full basis: spin-up
/// states come first, apparatus levels ordered (+1, 0, -1) within each half.
fn sector_offsets(layout: &ApparatusLayout) -> (usize, usize) {
    (0, layout.apparatus_dim() + layout.d1)
}

/// Assemble the full-space Hamiltonian from the two perturbed sector blocks.
/// Everything outside the two dynamical sectors stays zero.
pub fn full_hamiltonian(
    layout: &ApparatusLayout,
    h_plus: &CMat,
    h_minus: &CMat,
) -> Result<CMat> {
    let d = layout.sector_dim();
    if h_plus.dim() != (d, d) {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            got: h_plus.dim(),
        });
    }
    if h_minus.dim() != (d, d) {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            got: h_minus.dim(),
        });
    }
    let dim = full_dim(layout);
    let (off_p, off_m) = sector_offsets(layout);
    let mut h: CMat = Array2::zeros((dim, dim));
    for i in 0..d {
        for j in 0..d {
            h[(off_p + i, off_p + j)] = h_plus[(i, j)];
            h[(off_m + i, off_m + j)] = h_minus[(i, j)];
        }
    }
    Ok(h)
}

/// Embed a block state as a full-space density matrix.
pub fn embed_state(layout: &ApparatusLayout, state: &JointState) -> Result<CMat> {
    let d = layout.sector_dim();
    if state.dim() != d {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            got: (state.dim(), state.dim()),
        });
    }
    let dim = full_dim(layout);
    let (off_p, off_m) = sector_offsets(layout);
    let mut rho: CMat = Array2::zeros((dim, dim));
    for i in 0..d {
        for j in 0..d {
            rho[(off_p + i, off_p + j)] = state.bpp[(i, j)];
            rho[(off_m + i, off_m + j)] = state.bmm[(i, j)];
            rho[(off_p + i, off_m + j)] = state.bpm[(i, j)];
            rho[(off_m + j, off_p + i)] = state.bpm[(i, j)].conj();
        }
    }
    Ok(rho)
}

/// Read the three dynamical blocks back out of a full-space matrix.
pub fn extract_blocks(layout: &ApparatusLayout, full: &CMat) -> Result<JointState> {
    let dim = full_dim(layout);
    if full.dim() != (dim, dim) {
        return Err(Error::ShapeMismatch {
            expected: (dim, dim),
            got: full.dim(),
        });
    }
    let d = layout.sector_dim();
    let (off_p, off_m) = sector_offsets(layout);
    let mut state = JointState::zeros(d);
    for i in 0..d {
        for j in 0..d {
            state.bpp[(i, j)] = full[(off_p + i, off_p + j)];
            state.bmm[(i, j)] = full[(off_m + i, off_m + j)];
            state.bpm[(i, j)] = full[(off_p + i, off_m + j)];
        }
    }
    Ok(state)
}

fn conjugate_by_propagator(spec: &SpectralDecomposition, rho: &CMat, t: f64) -> CMat {
    let q = &spec.eigenvectors;
    let mut x = dagger(q).dot(rho).dot(q);
    let phases = spec.phases(t);
    for ((j, k), z) in x.indexed_iter_mut() {
        *z *= phases[j] * phases[k].conj();
    }
    q.dot(&x).dot(&dagger(q))
}

/// Evolve a full-space density matrix by direct dense diagonalization.
pub fn evolve_full(h: &CMat, rho: &CMat, t: f64) -> Result<CMat> {
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    if rho.dim() != h.dim() {
        return Err(Error::ShapeMismatch {
            expected: h.dim(),
            got: rho.dim(),
        });
    }
    let spec = rmt::eig(&HermitianOperator::new(h.clone())?)?;
    Ok(conjugate_by_propagator(&spec, rho, t))
}

/// Time average of the evolved state over [0, t_max] by the trapezoid rule,
/// a quadrature route that never invokes the dephasing shortcut.
pub fn time_average_quadrature(
    spec: &SpectralDecomposition,
    rho: &CMat,
    t_max: f64,
    n_steps: usize,
) -> Result<CMat> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "averaging window must be positive, got {t_max}"
        )));
    }
    if n_steps < 2 {
        return Err(Error::InvalidParameter(
            "quadrature needs at least 2 steps".into(),
        ));
    }
    if rho.dim() != (spec.dim(), spec.dim()) {
        return Err(Error::ShapeMismatch {
            expected: (spec.dim(), spec.dim()),
            got: rho.dim(),
        });
    }
    let q = &spec.eigenvectors;
    let x = dagger(q).dot(rho).dot(q);
    let mut acc: CMat = Array2::zeros(x.dim());
    let step = t_max / n_steps as f64;
    for i in 0..=n_steps {
        let w = if i == 0 || i == n_steps { 0.5 } else { 1.0 };
        let phases = spec.phases(step * i as f64);
        for ((j, k), z) in acc.indexed_iter_mut() {
            *z += x[(j, k)] * phases[j] * phases[k].conj() * w;
        }
    }
    acc.mapv_inplace(|z| z / n_steps as f64);
    Ok(q.dot(&acc).dot(&dagger(q)))
}

/// Haar-distributed unitary: modified Gram-Schmidt on a complex Ginibre
/// draw, which fixes the R diagonal real and positive.
pub fn haar_unitary(dim: usize, rng: &mut impl rand::Rng) -> Result<CMat> {
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    use rand_distr::StandardNormal;
    let mut g: CMat = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            g[(i, j)] = Complex64::new(re, im);
        }
    }
    for k in 0..dim {
        for j in 0..k {
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                proj += g[(i, j)].conj() * g[(i, k)];
            }
            for i in 0..dim {
                let v = g[(i, j)];
                g[(i, k)] -= proj * v;
            }
        }
        let norm = (0..dim).map(|i| g[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Contract("rank-deficient Ginibre draw".into()));
        }
        for i in 0..dim {
            g[(i, k)] /= norm;
        }
    }
    Ok(g)
}
