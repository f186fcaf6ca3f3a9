//! Sector geometry of the spin-apparatus model and the block representation
//! of its joint states.
//!
//! The apparatus basis is ordered by magnetization class as (H+1, H0, H-1)
//! with sizes (d1, d0, d1). The two Hamiltonian blocks act on the overlapping
//! sectors S+ = H+1 (+) H0 and S- = H0 (+) H-1, each of dimension d = d0+d1.
//! A joint state of the spin and apparatus that starts in the microcanonical
//! H0 state never develops support outside |+> (x) S+ and |-> (x) S-, so it
//! is stored as three d x d blocks.

use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmt::{self, CMat, HermitianOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApparatusLayout {
    pub n: usize,
    pub d0: usize,
    pub d1: usize,
}

impl ApparatusLayout {
    /// Dimension of each Hamiltonian block, d0 + d1.
    pub fn sector_dim(&self) -> usize {
        self.d0 + self.d1
    }

    /// Full apparatus dimension, 2^N.
    pub fn apparatus_dim(&self) -> usize {
        self.d0 + 2 * self.d1
    }
}

fn binomial_central(n: usize) -> u64 {
    let k = n / 2;
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

pub fn make_layout(n: usize) -> Result<ApparatusLayout> {
    if n < 2 || n > 16 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "apparatus size must be even and within 2..=16, got {n}"
        )));
    }
    let d0 = binomial_central(n) as usize;
    let d1 = ((1usize << n) - d0) / 2;
    Ok(ApparatusLayout { n, d0, d1 })
}

/// Spin amplitudes (c+, c-) with unit norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinState {
    pub c_plus: Complex64,
    pub c_minus: Complex64,
}

impl SpinState {
    pub fn new(c_plus: Complex64, c_minus: Complex64) -> Result<Self> {
        let norm2 = c_plus.norm_sqr() + c_minus.norm_sqr();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "spin amplitudes have squared norm {norm2}, expected 1"
            )));
        }
        Ok(Self { c_plus, c_minus })
    }

    /// Rescale arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(c_plus: Complex64, c_minus: Complex64) -> Result<Self> {
        let norm = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter(
                "spin amplitudes must be nonzero and finite".into(),
            ));
        }
        Ok(Self {
            c_plus: c_plus / norm,
            c_minus: c_minus / norm,
        })
    }

    pub fn p_plus(&self) -> f64 {
        self.c_plus.norm_sqr()
    }

    pub fn p_minus(&self) -> f64 {
        self.c_minus.norm_sqr()
    }
}

/// The bare model: fixed GUE blocks for both sectors, spin amplitudes, and
/// the perturbation strength used when a perturbation is attached.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    pub layout: ApparatusLayout,
    pub spin: SpinState,
    pub h_plus_block: HermitianOperator,
    pub h_minus_block: HermitianOperator,
    pub epsilon: f64,
}

pub fn build_model(
    n: usize,
    spin: SpinState,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<MeasurementModel> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let layout = make_layout(n)?;
    let d = layout.sector_dim();
    let h_plus_block = rmt::sample_gue(d, rng)?;
    let h_minus_block = rmt::sample_gue(d, rng)?;
    Ok(MeasurementModel {
        layout,
        spin,
        h_plus_block,
        h_minus_block,
        epsilon,
    })
}

/// A fresh perturbation draw, one GUE block per sector.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub v_plus_block: HermitianOperator,
    pub v_minus_block: HermitianOperator,
}

pub fn sample_perturbation(
    model: &MeasurementModel,
    rng: &mut impl Rng,
) -> Result<Perturbation> {
    let d = model.layout.sector_dim();
    Ok(Perturbation {
        v_plus_block: rmt::sample_gue(d, rng)?,
        v_minus_block: rmt::sample_gue(d, rng)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Trace,
    Frobenius,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Metric::Trace),
            "frobenius" => Ok(Metric::Frobenius),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric {other:?}, expected trace or frobenius"
            ))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Trace => "trace",
            Metric::Frobenius => "frobenius",
        })
    }
}

/// Block representation of the joint spin-apparatus density operator.
///
/// `bpp` is the |+><+| component on S+ (H+1 rows first), `bmm` the |-><-|
/// component on S- (H0 rows first), and `bpm` the |+><-| component with rows
/// indexed by S+ and columns by S-.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub bpp: CMat,
    pub bmm: CMat,
    pub bpm: CMat,
}

impl JointState {
    pub fn zeros(d: usize) -> Self {
        Self {
            bpp: CMat::zeros((d, d)),
            bmm: CMat::zeros((d, d)),
            bpm: CMat::zeros((d, d)),
        }
    }

    pub fn dim(&self) -> usize {
        self.bpp.nrows()
    }

    pub fn trace(&self) -> f64 {
        let t: Complex64 = self.bpp.diag().sum() + self.bmm.diag().sum();
        t.re
    }

    pub fn scale(&mut self, s: f64) {
        self.bpp.mapv_inplace(|z| z * s);
        self.bmm.mapv_inplace(|z| z * s);
        self.bpm.mapv_inplace(|z| z * s);
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.bpp += &other.bpp;
        self.bmm += &other.bmm;
        self.bpm += &other.bpm;
    }

    /// The 2d x 2d Hermitian matrix [[bpp, bpm], [bpm^H, bmm]]. Because the
    /// coordinates |+> (x) S+ and |-> (x) S- are independent directions of
    /// the full space, this compression is a faithful corner of the full
    /// 2 * 2^N operator: spectra, traces, and distances agree exactly.
    pub fn compressed(&self) -> CMat {
        let d = self.dim();
        let mut full = CMat::zeros((2 * d, 2 * d));
        for i in 0..d {
            for j in 0..d {
                full[(i, j)] = self.bpp[(i, j)];
                full[(d + i, d + j)] = self.bmm[(i, j)];
                full[(i, d + j)] = self.bpm[(i, j)];
                full[(d + j, i)] = self.bpm[(i, j)].conj();
            }
        }
        full
    }

    pub fn trace_distance_to(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        let delta = self.compressed() - other.compressed();
        let (vals, _) = delta.eigh(UPLO::Lower)?;
        Ok(0.5 * vals.iter().map(|l| l.abs()).sum::<f64>())
    }

    pub fn frobenius_distance_to(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        let mut s = 0.0;
        for (a, b) in self.bpp.iter().zip(other.bpp.iter()) {
            s += (a - b).norm_sqr();
        }
        for (a, b) in self.bmm.iter().zip(other.bmm.iter()) {
            s += (a - b).norm_sqr();
        }
        for (a, b) in self.bpm.iter().zip(other.bpm.iter()) {
            s += 2.0 * (a - b).norm_sqr();
        }
        Ok(s.sqrt())
    }

    pub fn distance_to(&self, other: &Self, metric: Metric) -> Result<f64> {
        match metric {
            Metric::Trace => self.trace_distance_to(other),
            Metric::Frobenius => self.frobenius_distance_to(other),
        }
    }

    /// Re tr(self * other) of the embedded operators.
    pub fn overlap(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.bpp.iter().zip(other.bpp.t().iter()) {
            s += (a * b).re;
        }
        for (a, b) in self.bmm.iter().zip(other.bmm.t().iter()) {
            s += (a * b).re;
        }
        for (a, b) in self.bpm.iter().zip(other.bpm.iter()) {
            s += 2.0 * (a * b.conj()).re;
        }
        s
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch {
                expected: (self.dim(), self.dim()),
                got: (other.dim(), other.dim()),
            });
        }
        Ok(())
    }
}

/// The initial state: spin in (c+, c-), apparatus microcanonical on H0.
pub fn initial_state(model: &MeasurementModel) -> JointState {
    let lay = &model.layout;
    let (d0, d1) = (lay.d0, lay.d1);
    let d = lay.sector_dim();
    let w = 1.0 / d0 as f64;
    let mut state = JointState::zeros(d);
    let app = model.spin.p_plus();
    let amm = model.spin.p_minus();
    let apm = model.spin.c_plus * model.spin.c_minus.conj();
    for i in 0..d0 {
        state.bpp[(d1 + i, d1 + i)] = Complex64::new(app * w, 0.0);
        state.bmm[(i, i)] = Complex64::new(amm * w, 0.0);
        state.bpm[(d1 + i, i)] = apm * w;
    }
    state
}

/// Born-rule weights of the three magnetization outcomes.
pub fn outcome_probabilities(
    state: &JointState,
    layout: &ApparatusLayout,
) -> Result<(f64, f64, f64)> {
    let d = layout.sector_dim();
    if state.dim() != d {
        return Err(Error::ShapeMismatch {
            expected: (d, d),
            got: (state.dim(), state.dim()),
        });
    }
    let mut p_plus = 0.0;
    for i in 0..layout.d1 {
        p_plus += state.bpp[(i, i)].re;
    }
    let mut p_minus = 0.0;
    for i in layout.d0..d {
        p_minus += state.bmm[(i, i)].re;
    }
    Ok((p_plus, 1.0 - p_plus - p_minus, p_minus))
}
