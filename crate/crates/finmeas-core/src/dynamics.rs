//! Exact spectral evolution of block states, infinite-time averaging,
//! perturbation-ensemble averaging, reversal, and effective dimension.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    initial_state, outcome_probabilities, sample_perturbation, ApparatusLayout, JointState,
    MeasurementModel, Perturbation,
};
use crate::rmt::{self, dagger, CMat, SpectralDecomposition, DEGENERACY_REL_TOL};
use crate::rng::RngStream;

/// Eigensystems of the two perturbed sector blocks H(+/-) = H0 + eps V.
#[derive(Clone, Debug)]
pub struct EvolutionCache {
    pub spec_plus: SpectralDecomposition,
    pub spec_minus: SpectralDecomposition,
}

impl EvolutionCache {
    pub fn dim(&self) -> usize {
        self.spec_plus.dim()
    }

    fn check_nondegenerate(&self) -> Result<()> {
        for spec in [&self.spec_plus, &self.spec_minus] {
            if spec.is_degenerate() {
                return Err(Error::DegenerateSpectrum {
                    min_gap: spec.min_gap(),
                    tol: spec.degeneracy_tol(),
                });
            }
        }
        Ok(())
    }
}

pub fn prepare(model: &MeasurementModel, v: &Perturbation) -> Result<EvolutionCache> {
    let hp = model.h_plus_block.add_scaled(model.epsilon, &v.v_plus_block)?;
    let hm = model
        .h_minus_block
        .add_scaled(model.epsilon, &v.v_minus_block)?;
    let cache = EvolutionCache {
        spec_plus: rmt::eig(&hp)?,
        spec_minus: rmt::eig(&hm)?,
    };
    cache.check_nondegenerate()?;
    Ok(cache)
}

/// Draw perturbations until one yields nondegenerate spectra, counting the
/// rejected draws. The generator keeps advancing within its stream, so the
/// retry sequence is as reproducible as the first attempt.
pub fn sample_nondegenerate(
    model: &MeasurementModel,
    rng: &mut impl rand::Rng,
) -> Result<(Perturbation, EvolutionCache, usize)> {
    const MAX_RETRIES: usize = 8;
    let mut rejected = 0usize;
    loop {
        let v = sample_perturbation(model, rng)?;
        match prepare(model, &v) {
            Ok(cache) => return Ok((v, cache, rejected)),
            Err(Error::DegenerateSpectrum { .. }) if rejected < MAX_RETRIES => rejected += 1,
            Err(e) => return Err(e),
        }
    }
}

fn propagator(spec: &SpectralDecomposition, t: f64) -> CMat {
    let phases = spec.phases(t);
    let mut scaled = spec.eigenvectors.clone();
    for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
        let w = phases[k];
        col.mapv_inplace(|z| z * w);
    }
    scaled.dot(&dagger(&spec.eigenvectors))
}

/// Conjugate the block state by the cached propagators. Negative times run
/// the evolution backwards; t = 0 returns the input unchanged.
pub fn evolve(cache: &EvolutionCache, state0: &JointState, t: f64) -> Result<JointState> {
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    if state0.dim() != cache.dim() {
        return Err(Error::ShapeMismatch {
            expected: (cache.dim(), cache.dim()),
            got: (state0.dim(), state0.dim()),
        });
    }
    if t == 0.0 {
        return Ok(state0.clone());
    }
    let up = propagator(&cache.spec_plus, t);
    let um = propagator(&cache.spec_minus, t);
    Ok(JointState {
        bpp: up.dot(&state0.bpp).dot(&dagger(&up)),
        bmm: um.dot(&state0.bmm).dot(&dagger(&um)),
        bpm: up.dot(&state0.bpm).dot(&dagger(&um)),
    })
}

fn phase_sandwich(
    x: &CMat,
    left: &ndarray::Array1<Complex64>,
    right: &ndarray::Array1<Complex64>,
) -> CMat {
    let mut y = x.clone();
    for ((j, k), z) in y.indexed_iter_mut() {
        *z *= left[j] * right[k].conj();
    }
    y
}

/// Evolve the state to every listed time, reusing one pair of eigenbasis
/// rotations for the whole list. Exact t = 0 entries return the input
/// unchanged, bit for bit.
pub fn evolve_at_times(
    cache: &EvolutionCache,
    state0: &JointState,
    times: &[f64],
) -> Result<Vec<JointState>> {
    if state0.dim() != cache.dim() {
        return Err(Error::ShapeMismatch {
            expected: (cache.dim(), cache.dim()),
            got: (state0.dim(), state0.dim()),
        });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    let qp = &cache.spec_plus.eigenvectors;
    let qm = &cache.spec_minus.eigenvectors;
    let qp_h = dagger(qp);
    let qm_h = dagger(qm);
    let xpp = qp_h.dot(&state0.bpp).dot(qp);
    let xmm = qm_h.dot(&state0.bmm).dot(qm);
    let xpm = qp_h.dot(&state0.bpm).dot(qm);
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(state0.clone());
            }
            let ep = cache.spec_plus.phases(t);
            let em = cache.spec_minus.phases(t);
            Ok(JointState {
                bpp: qp.dot(&phase_sandwich(&xpp, &ep, &ep)).dot(&qp_h),
                bmm: qm.dot(&phase_sandwich(&xmm, &em, &em)).dot(&qm_h),
                bpm: qp.dot(&phase_sandwich(&xpm, &ep, &em)).dot(&qm_h),
            })
        })
        .collect()
}

/// Sampling grid for time series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    pub spacing: Spacing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Logarithmic,
}

impl TimeGrid {
    pub fn linear(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if n == 1 {
            return Self::from_points(vec![t0], Spacing::Linear);
        }
        let step = (t1 - t0) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| t0 + step * i as f64).collect();
        points[n - 1] = t1;
        Self::from_points(points, Spacing::Linear)
    }

    pub fn logarithmic(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if !(t0 > 0.0) {
            return Err(Error::InvalidParameter(
                "logarithmic grid needs a positive start".into(),
            ));
        }
        if n == 1 {
            return Self::from_points(vec![t0], Spacing::Logarithmic);
        }
        let (l0, l1) = (t0.ln(), t1.ln());
        let step = (l1 - l0) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n)
            .map(|i| (l0 + step * i as f64).exp())
            .collect();
        points[0] = t0;
        points[n - 1] = t1;
        Self::from_points(points, Spacing::Logarithmic)
    }

    pub fn from_points(points: Vec<f64>, spacing: Spacing) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidParameter(
                "time grid points must be finite and nonnegative".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "time grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { points, spacing })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub t: f64,
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
}

/// Per-state eigenbasis images of the diagonal blocks, reused across times.
struct RotatedBlocks {
    xpp: CMat,
    xmm: CMat,
}

impl RotatedBlocks {
    fn new(cache: &EvolutionCache, state0: &JointState) -> Self {
        let qp = &cache.spec_plus.eigenvectors;
        let qm = &cache.spec_minus.eigenvectors;
        Self {
            xpp: dagger(qp).dot(&state0.bpp).dot(qp),
            xmm: dagger(qm).dot(&state0.bmm).dot(qm),
        }
    }

    /// Outcome weights at time t without forming the full evolved state:
    /// only partial diagonal sums of the back-rotated blocks are needed.
    fn probabilities_at(
        &self,
        cache: &EvolutionCache,
        layout: &ApparatusLayout,
        t: f64,
    ) -> (f64, f64, f64) {
        let d = layout.sector_dim();
        let p_plus = partial_diag_sum(
            &cache.spec_plus,
            &self.xpp,
            t,
            0,
            layout.d1,
        );
        let p_minus = partial_diag_sum(
            &cache.spec_minus,
            &self.xmm,
            t,
            layout.d0,
            d,
        );
        (p_plus, 1.0 - p_plus - p_minus, p_minus)
    }
}

fn partial_diag_sum(
    spec: &SpectralDecomposition,
    x: &CMat,
    t: f64,
    row_start: usize,
    row_end: usize,
) -> f64 {
    let phases = spec.phases(t);
    let mut y = x.clone();
    for ((j, k), z) in y.indexed_iter_mut() {
        *z *= phases[j] * phases[k].conj();
    }
    let q = &spec.eigenvectors;
    let z = q.dot(&y);
    let mut acc = 0.0;
    for i in row_start..row_end {
        for k in 0..q.ncols() {
            acc += (z[(i, k)] * q[(i, k)].conj()).re;
        }
    }
    acc
}

pub fn probability_timeseries(
    cache: &EvolutionCache,
    state0: &JointState,
    grid: &TimeGrid,
    layout: &ApparatusLayout,
) -> Result<Vec<ProbabilityRow>> {
    probabilities_at_times(cache, state0, grid.points(), layout)
}

fn probabilities_at_times(
    cache: &EvolutionCache,
    state0: &JointState,
    times: &[f64],
    layout: &ApparatusLayout,
) -> Result<Vec<ProbabilityRow>> {
    if state0.dim() != cache.dim() || layout.sector_dim() != cache.dim() {
        return Err(Error::ShapeMismatch {
            expected: (cache.dim(), cache.dim()),
            got: (state0.dim(), layout.sector_dim()),
        });
    }
    let rotated = RotatedBlocks::new(cache, state0);
    Ok(times
        .iter()
        .map(|&t| {
            let (p_plus, p_zero, p_minus) = rotated.probabilities_at(cache, layout, t);
            ProbabilityRow {
                t,
                p_plus,
                p_zero,
                p_minus,
            }
        })
        .collect())
}

/// Infinite-time average: dephase both diagonal blocks in their eigenbases
/// and keep only coinciding cross frequencies (none, for generic spectra).
pub fn time_averaged_state(cache: &EvolutionCache, state0: &JointState) -> Result<JointState> {
    cache.check_nondegenerate()?;
    let tol = DEGENERACY_REL_TOL
        * cache
            .spec_plus
            .spectral_radius()
            .max(cache.spec_minus.spectral_radius());
    let bpp = rmt::dephase(&state0.bpp, &cache.spec_plus)?;
    let bmm = rmt::dephase(&state0.bmm, &cache.spec_minus)?;
    let (bpm, _) = rmt::cross_dephase(&state0.bpm, &cache.spec_plus, &cache.spec_minus, tol)?;
    Ok(JointState { bpp, bmm, bpm })
}

pub fn equilibrium_probabilities(
    cache: &EvolutionCache,
    state0: &JointState,
    layout: &ApparatusLayout,
) -> Result<(f64, f64, f64)> {
    let averaged = time_averaged_state(cache, state0)?;
    outcome_probabilities(&averaged, layout)
}

/// Inverse purity of the initial state's energy-level populations,
/// 1 / sum_i <E_i|rho|E_i>^2 over the eigenvectors of both sector blocks.
pub fn effective_dimension(cache: &EvolutionCache, state0: &JointState) -> Result<f64> {
    cache.check_nondegenerate()?;
    if state0.dim() != cache.dim() {
        return Err(Error::ShapeMismatch {
            expected: (cache.dim(), cache.dim()),
            got: (state0.dim(), state0.dim()),
        });
    }
    let mut sum_sq = 0.0;
    for (spec, block) in [
        (&cache.spec_plus, &state0.bpp),
        (&cache.spec_minus, &state0.bmm),
    ] {
        let q = &spec.eigenvectors;
        let z = block.dot(q);
        for m in 0..q.ncols() {
            let mut w = 0.0;
            for i in 0..q.nrows() {
                w += (q[(i, m)].conj() * z[(i, m)]).re;
            }
            sum_sq += w * w;
        }
    }
    if sum_sq <= 0.0 {
        return Err(Error::Contract(
            "state has no support on the cached spectra".into(),
        ));
    }
    Ok(1.0 / sum_sq)
}

/// Mean of the evolved state over fresh perturbation draws, with entrywise
/// standard errors of the mean.
pub struct EnsembleAverage {
    pub mean: JointState,
    pub se_pp: Array2<f64>,
    pub se_mm: Array2<f64>,
    pub se_pm: Array2<f64>,
    pub n_samples: usize,
    pub resamples: usize,
}

impl EnsembleAverage {
    /// Aggregate entrywise standard error, Frobenius-style (cross block
    /// counted twice, matching the embedding).
    pub fn se_total(&self) -> f64 {
        let s: f64 = self.se_pp.iter().map(|x| x * x).sum::<f64>()
            + self.se_mm.iter().map(|x| x * x).sum::<f64>()
            + 2.0 * self.se_pm.iter().map(|x| x * x).sum::<f64>();
        s.sqrt()
    }
}

/// Entrywise Welford accumulator over joint states. Identical inputs give an
/// exactly zero second moment, so an unevolved ensemble reports zero standard
/// error rather than rounding residue.
pub struct MomentAccumulator {
    mean: JointState,
    m2_pp: Array2<f64>,
    m2_mm: Array2<f64>,
    m2_pm: Array2<f64>,
    n: usize,
}

impl MomentAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            mean: JointState::zeros(d),
            m2_pp: Array2::zeros((d, d)),
            m2_mm: Array2::zeros((d, d)),
            m2_pm: Array2::zeros((d, d)),
            n: 0,
        }
    }

    pub fn push(&mut self, state: &JointState) {
        self.n += 1;
        let n = self.n as f64;
        let step = |mean: &mut CMat, m2: &mut Array2<f64>, block: &CMat| {
            for ((m, s), z) in mean.iter_mut().zip(m2.iter_mut()).zip(block.iter()) {
                let delta = z - *m;
                *m += delta / n;
                *s += (delta.conj() * (z - *m)).re;
            }
        };
        step(&mut self.mean.bpp, &mut self.m2_pp, &state.bpp);
        step(&mut self.mean.bmm, &mut self.m2_mm, &state.bmm);
        step(&mut self.mean.bpm, &mut self.m2_pm, &state.bpm);
    }

    pub fn finish(self, resamples: usize) -> EnsembleAverage {
        let n = self.n as f64;
        let se = |m2: Array2<f64>| -> Array2<f64> {
            let mut out = m2;
            for s in out.iter_mut() {
                let var = if self.n > 1 {
                    (*s / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                *s = (var / n).sqrt();
            }
            out
        };
        EnsembleAverage {
            mean: self.mean,
            se_pp: se(self.m2_pp),
            se_mm: se(self.m2_mm),
            se_pm: se(self.m2_pm),
            n_samples: self.n,
            resamples,
        }
    }
}

pub fn average_evolved_state(
    model: &MeasurementModel,
    t: f64,
    n_samples: usize,
    base: RngStream,
) -> Result<EnsembleAverage> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(
            "ensemble average needs at least 2 samples".into(),
        ));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    const CHUNK: usize = 4;
    let state0 = initial_state(model);
    let mut acc = MomentAccumulator::new(model.layout.sector_dim());
    let mut resamples = 0usize;
    let mut start = 0usize;
    while start < n_samples {
        let len = CHUNK.min(n_samples - start);
        let outs = crate::par::map_indexed(len, |i| {
            let mut rng = base.with_stream(base.stream + (start + i) as u64).rng();
            let (_, cache, rejected) = sample_nondegenerate(model, &mut rng)?;
            let evolved = evolve(&cache, &state0, t)?;
            Ok::<_, Error>((evolved, rejected))
        });
        for out in outs {
            let (state, rejected) = out?;
            acc.push(&state);
            resamples += rejected;
        }
        start += len;
    }
    Ok(acc.finish(resamples))
}

/// Outcome of one forward-then-imperfectly-reversed run.
pub struct ReverseOutcome {
    pub final_state: JointState,
    pub trace_distance: f64,
    pub frobenius_distance: f64,
    pub series: Vec<ProbabilityRow>,
}

/// Evolve the initial state forward for `t_reverse` under H0 + eps V, then
/// backward for the same duration under H0 + eps V'. `series_points` samples
/// per leg are recorded (0 skips the series); backward-leg rows are stamped
/// with wall-clock time t_reverse + tau.
pub fn reverse_experiment(
    model: &MeasurementModel,
    v: &Perturbation,
    v_prime: &Perturbation,
    t_reverse: f64,
    series_points: usize,
) -> Result<ReverseOutcome> {
    if !(t_reverse.is_finite() && t_reverse > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reversal time must be positive, got {t_reverse}"
        )));
    }
    let layout = &model.layout;
    let cache_fwd = prepare(model, v)?;
    let cache_bwd = prepare(model, v_prime)?;
    let rho0 = initial_state(model);
    let rho_turn = evolve(&cache_fwd, &rho0, t_reverse)?;
    let final_state = evolve(&cache_bwd, &rho_turn, -t_reverse)?;
    let mut series = Vec::new();
    if series_points > 0 {
        let step = t_reverse / series_points as f64;
        let fwd_times: Vec<f64> = (0..=series_points).map(|k| step * k as f64).collect();
        series = probabilities_at_times(&cache_fwd, &rho0, &fwd_times, layout)?;
        let bwd_taus: Vec<f64> = (1..=series_points).map(|k| -step * k as f64).collect();
        let bwd = probabilities_at_times(&cache_bwd, &rho_turn, &bwd_taus, layout)?;
        for (k, mut row) in bwd.into_iter().enumerate() {
            row.t = t_reverse + step * (k + 1) as f64;
            series.push(row);
        }
    }
    Ok(ReverseOutcome {
        trace_distance: final_state.trace_distance_to(&rho0)?,
        frobenius_distance: final_state.frobenius_distance_to(&rho0)?,
        final_state,
        series,
    })
}

/// Mean and variance of a sampled signal under the uniform-in-time measure,
/// by the trapezoid rule on the (possibly non-uniform) grid.
pub fn time_mean_variance(ts: &[f64], ps: &[f64]) -> Result<(f64, f64)> {
    if ts.len() != ps.len() || ts.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two matching samples".into(),
        ));
    }
    let n = ts.len();
    let mut weights = vec![0.0; n];
    weights[0] = 0.5 * (ts[1] - ts[0]);
    weights[n - 1] = 0.5 * (ts[n - 1] - ts[n - 2]);
    for i in 1..n - 1 {
        weights[i] = 0.5 * (ts[i + 1] - ts[i - 1]);
    }
    let total: f64 = weights.iter().sum();
    let mean = weights
        .iter()
        .zip(ps)
        .map(|(w, p)| w * p)
        .sum::<f64>()
        / total;
    let var = weights
        .iter()
        .zip(ps)
        .map(|(w, p)| w * (p - mean) * (p - mean))
        .sum::<f64>()
        / total;
    Ok((mean, var))
}
