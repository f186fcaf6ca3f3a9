//! Experiment drivers: each one consumes a manifest and produces a run
//! record (rows, summary, resample count) that serializes to the standard
//! three-file layout. Replaying a manifest reproduces every output byte.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    avg_equilibrium_probability, avg_equilibrium_state, avg_prob_zero, Outcome,
};
use crate::dynamics::{
    equilibrium_probabilities, evolve_at_times, prepare, probability_timeseries,
    reverse_experiment, sample_nondegenerate, MomentAccumulator, ProbabilityRow, ReverseOutcome,
    TimeGrid,
};
use crate::error::{Error, Result};
use crate::model::{
    build_model, initial_state, make_layout, sample_perturbation, MeasurementModel, Metric,
    SpinState,
};
use crate::par;
use crate::rng::RngStream;

/// Grid points evolved per ensemble pass. Bounds the number of evolved
/// states held at once to `EQUILIBRATE_WINDOW * EQUILIBRATE_CHUNK`.
const EQUILIBRATE_WINDOW: usize = 32;
const EQUILIBRATE_CHUNK: usize = 2;

/// Samples per reversal leg in the recorded probability series.
const INSET_POINTS: usize = 64;

const MAX_RETRIES: usize = 8;

/// Complete description of one run. Identical manifests yield identical
/// rows and summaries under the same build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub experiment: String,
    pub version: String,
    pub seed: u64,
    pub n: usize,
    pub epsilon: f64,
    /// Spin amplitudes [[re, im]; 2] for (c_plus, c_minus).
    pub spin: [[f64; 2]; 2],
    pub n_samples: usize,
    pub tmin: f64,
    pub tmax: f64,
    pub tpoints: usize,
    pub log_spacing: bool,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_reverse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
}

impl ExperimentManifest {
    pub fn stream(&self, stream: u64) -> RngStream {
        RngStream::new(self.seed, stream)
    }

    pub fn spin_state(&self) -> Result<SpinState> {
        SpinState::new(
            Complex64::new(self.spin[0][0], self.spin[0][1]),
            Complex64::new(self.spin[1][0], self.spin[1][1]),
        )
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        if self.log_spacing {
            TimeGrid::logarithmic(self.tmin, self.tmax, self.tpoints)
        } else {
            TimeGrid::linear(self.tmin, self.tmax, self.tpoints)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibrateRow {
    pub h0_index: usize,
    pub t: f64,
    pub mean_distance: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalityRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub stream_index: u64,
    pub p_plus_inf: f64,
    pub p_zero_inf: f64,
    pub p_minus_inf: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseRow {
    pub epsilon: f64,
    pub stream_index: u64,
    pub trace_distance: f64,
    pub frobenius_distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub analytic_p_plus: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub analytic_p_zero: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub outcome: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rows {
    Equilibrate(Vec<EquilibrateRow>),
    Typicality(Vec<TypicalityRow>),
    Reverse(Vec<ReverseRow>),
    Born(Vec<BornRow>),
    Analytic(Vec<AnalyticRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Equilibrate(r) => r.len(),
            Rows::Typicality(r) => r.len(),
            Rows::Reverse(r) => r.len(),
            Rows::Born(r) => r.len(),
            Rows::Analytic(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match self {
            Rows::Equilibrate(rows) => {
                for row in rows {
                    w.serialize(row)?;
                }
            }
            Rows::Typicality(rows) => {
                for row in rows {
                    w.serialize(row)?;
                }
            }
            Rows::Reverse(rows) => {
                for row in rows {
                    w.serialize(row)?;
                }
            }
            Rows::Born(rows) => {
                for row in rows {
                    w.serialize(row)?;
                }
            }
            Rows::Analytic(rows) => {
                for row in rows {
                    w.serialize(row)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Plateau statistics of one averaged distance curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub h0_index: usize,
    pub initial_distance: f64,
    pub plateau: f64,
    pub onset: f64,
    pub flatness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibrateSummary {
    pub curves: Vec<CurveSummary>,
    pub resamples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypicalitySummary {
    pub analytic_p_plus: f64,
    pub mean_p_plus_inf: f64,
    pub std_p_plus_inf: f64,
    pub stderr_p_plus_inf: f64,
    pub delta: f64,
    pub deviation_fraction: f64,
    pub resamples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStat {
    pub epsilon: f64,
    pub median_trace_distance: f64,
    pub median_frobenius_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseSummary {
    pub t_reverse: f64,
    pub per_epsilon: Vec<EpsilonStat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inset_epsilon: Option<f64>,
    pub inset: Vec<ProbabilityRow>,
    pub resamples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornEntry {
    pub n: usize,
    pub analytic_p_plus: f64,
    pub analytic_p_zero: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub textbook_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BornSummary {
    pub entries: Vec<BornEntry>,
    pub resamples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSummary {
    pub n: usize,
    pub d0: usize,
    pub d1: usize,
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Summary {
    Equilibrate(EquilibrateSummary),
    Typicality(TypicalitySummary),
    Reverse(ReverseSummary),
    Born(BornSummary),
    Analytic(AnalyticSummary),
}

/// Everything one run produces. `wall_time` is informational only and never
/// written to disk, so output files stay reproducible.
pub struct RunRecord {
    pub manifest: ExperimentManifest,
    pub rows: Rows,
    pub summary: Summary,
    pub resamples: usize,
    pub wall_time: Duration,
}

impl RunRecord {
    /// Write manifest.json, rows.csv, and summary.json into `dir`,
    /// creating it if needed.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        fs::write(dir.join("manifest.json"), manifest)?;
        let file = fs::File::create(dir.join("rows.csv"))?;
        let mut buf = BufWriter::new(file);
        self.rows.write_csv(&mut buf)?;
        buf.flush()?;
        let mut summary = serde_json::to_string_pretty(&self.summary)?;
        summary.push('\n');
        fs::write(dir.join("summary.json"), summary)?;
        Ok(())
    }
}

/// Plateau level, onset time, and flatness of a distance curve. The plateau
/// is the mean over the final decade of the grid, the onset is the first
/// time the curve comes within 10% of that level, and the flatness is the
/// largest relative deviation from the plateau inside the final decade.
pub fn plateau_and_onset(ts: &[f64], ds: &[f64]) -> Result<(f64, f64, f64)> {
    if ts.len() != ds.len() || ts.is_empty() {
        return Err(Error::InvalidParameter(
            "need matching, nonempty time and distance samples".into(),
        ));
    }
    let t_end = *ts.last().unwrap();
    let cut = t_end / 10.0;
    let tail: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] >= cut).collect();
    let plateau = tail.iter().map(|&i| ds[i]).sum::<f64>() / tail.len() as f64;
    let scale = plateau.abs().max(f64::MIN_POSITIVE);
    let flatness = tail
        .iter()
        .map(|&i| (ds[i] - plateau).abs())
        .fold(0.0, f64::max)
        / scale;
    let onset = ts
        .iter()
        .zip(ds)
        .find(|&(_, &d)| (d - plateau).abs() <= 0.1 * scale)
        .map(|(&t, _)| t)
        .unwrap_or(t_end);
    Ok((plateau, onset, flatness))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Ensemble-averaged distance curves to the closed-form equilibrium state,
/// one curve per apparatus draw. Apparatus h uses stream h; its samples use
/// streams (h + 1) * 2^32 + k.
pub fn equilibration_experiment(man: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    if man.n_samples < 10 {
        return Err(Error::InvalidParameter(
            "equilibration needs at least 10 samples per curve".into(),
        ));
    }
    let spin = man.spin_state()?;
    let layout = make_layout(man.n)?;
    let grid = man.grid()?;
    let times = grid.points();
    let h0_draws = man.h0_draws.unwrap_or(2).max(1);
    let target = avg_equilibrium_state(&layout, &spin);
    let mut rows = Vec::with_capacity(h0_draws * times.len());
    let mut curves = Vec::with_capacity(h0_draws);
    let mut resamples = 0usize;
    for h in 0..h0_draws {
        let mut model_rng = man.stream(h as u64).rng();
        let model = build_model(man.n, spin, man.epsilon, &mut model_rng)?;
        let state0 = initial_state(&model);
        let mut dists = vec![0.0; times.len()];
        let mut stderrs = vec![0.0; times.len()];
        for (w, window) in times.chunks(EQUILIBRATE_WINDOW).enumerate() {
            let mut accs: Vec<MomentAccumulator> = (0..window.len())
                .map(|_| MomentAccumulator::new(layout.sector_dim()))
                .collect();
            let mut done = 0usize;
            while done < man.n_samples {
                let len = EQUILIBRATE_CHUNK.min(man.n_samples - done);
                let outs = par::map_indexed(len, |i| {
                    let stream = ((h as u64 + 1) << 32) + (done + i) as u64;
                    let mut rng = man.stream(stream).rng();
                    let (_, cache, rejected) = sample_nondegenerate(&model, &mut rng)?;
                    let states = evolve_at_times(&cache, &state0, window)?;
                    Ok::<_, Error>((states, rejected))
                });
                for out in outs {
                    let (states, rejected) = out?;
                    for (acc, state) in accs.iter_mut().zip(&states) {
                        acc.push(state);
                    }
                    if w == 0 {
                        resamples += rejected;
                    }
                }
                done += len;
            }
            for (j, acc) in accs.into_iter().enumerate() {
                let avg = acc.finish(0);
                dists[w * EQUILIBRATE_WINDOW + j] = avg.mean.distance_to(&target, man.metric)?;
                stderrs[w * EQUILIBRATE_WINDOW + j] = avg.se_total();
            }
        }
        for (j, &t) in times.iter().enumerate() {
            rows.push(EquilibrateRow {
                h0_index: h,
                t,
                mean_distance: dists[j],
                stderr: stderrs[j],
                n_samples: man.n_samples,
            });
        }
        let (plateau, onset, flatness) = plateau_and_onset(times, &dists)?;
        curves.push(CurveSummary {
            h0_index: h,
            initial_distance: dists[0],
            plateau,
            onset,
            flatness,
        });
    }
    Ok(RunRecord {
        manifest: man.clone(),
        rows: Rows::Equilibrate(rows),
        summary: Summary::Equilibrate(EquilibrateSummary { curves, resamples }),
        resamples,
        wall_time: start.elapsed(),
    })
}

/// One equilibrium-probability draw: a fresh apparatus and perturbation from
/// the given stream, redrawing the pair (at most eight times) if a perturbed
/// spectrum comes out degenerate.
pub fn typicality_draw(
    n: usize,
    spin: SpinState,
    epsilon: f64,
    stream: RngStream,
) -> Result<((f64, f64, f64), usize)> {
    let layout = make_layout(n)?;
    let mut rng = stream.rng();
    let mut rejected = 0usize;
    loop {
        let model = build_model(n, spin, epsilon, &mut rng)?;
        let v = sample_perturbation(&model, &mut rng)?;
        match prepare(&model, &v) {
            Ok(cache) => {
                let probs = equilibrium_probabilities(&cache, &initial_state(&model), &layout)?;
                return Ok((probs, rejected));
            }
            Err(Error::DegenerateSpectrum { .. }) if rejected < MAX_RETRIES => rejected += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Equilibrium outcome probabilities across independent apparatus draws,
/// row k from stream k, compared against the closed-form average.
pub fn typicality_experiment(man: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    if man.n_samples < 50 {
        return Err(Error::InvalidParameter(
            "typicality needs at least 50 draws".into(),
        ));
    }
    let spin = man.spin_state()?;
    let layout = make_layout(man.n)?;
    let delta = man.delta.unwrap_or(0.05);
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "deviation threshold must be positive, got {delta}"
        )));
    }
    let outs = par::map_indexed(man.n_samples, |k| {
        typicality_draw(man.n, spin, man.epsilon, man.stream(k as u64))
    });
    let mut rows = Vec::with_capacity(man.n_samples);
    let mut resamples = 0usize;
    for (k, out) in outs.into_iter().enumerate() {
        let ((p_plus, p_zero, p_minus), rejected) = out?;
        resamples += rejected;
        rows.push(TypicalityRow {
            n: man.n,
            stream_index: k as u64,
            p_plus_inf: p_plus,
            p_zero_inf: p_zero,
            p_minus_inf: p_minus,
        });
    }
    let analytic = avg_equilibrium_probability(&layout, &spin, Outcome::Plus);
    let vals: Vec<f64> = rows.iter().map(|r| r.p_plus_inf).collect();
    let (mean, std) = mean_std(&vals);
    let deviations = vals.iter().filter(|&&p| (p - analytic).abs() > delta).count();
    let summary = TypicalitySummary {
        analytic_p_plus: analytic,
        mean_p_plus_inf: mean,
        std_p_plus_inf: std,
        stderr_p_plus_inf: std / (vals.len() as f64).sqrt(),
        delta,
        deviation_fraction: deviations as f64 / vals.len() as f64,
        resamples,
    };
    Ok(RunRecord {
        manifest: man.clone(),
        rows: Rows::Typicality(rows),
        summary: Summary::Typicality(summary),
        resamples,
        wall_time: start.elapsed(),
    })
}

pub fn default_epsilon_list() -> Vec<f64> {
    vec![0.0, 0.01, 0.05, 0.1, 0.3, 0.5, 1.0]
}

fn pick_inset_epsilon(eps: &[f64]) -> Option<f64> {
    eps.iter()
        .copied()
        .find(|&e| e == 0.1)
        .or_else(|| eps.iter().copied().find(|&e| e > 0.0))
}

/// One reversal trial: V then V' drawn in sequence from the stream, forward
/// and backward evolution over `t_reverse`, redrawing the pair (at most
/// eight times) if a perturbed spectrum comes out degenerate.
pub fn reverse_trial(
    model: &MeasurementModel,
    stream: RngStream,
    t_reverse: f64,
    series_points: usize,
) -> Result<(ReverseOutcome, usize)> {
    let mut rng = stream.rng();
    let mut rejected = 0usize;
    loop {
        let v = sample_perturbation(model, &mut rng)?;
        let v_prime = sample_perturbation(model, &mut rng)?;
        match reverse_experiment(model, &v, &v_prime, t_reverse, series_points) {
            Ok(out) => return Ok((out, rejected)),
            Err(Error::DegenerateSpectrum { .. }) if rejected < MAX_RETRIES => rejected += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Pick the default reversal time: ten times the time at which the outcome
/// probability first closes 90% of its gap to the equilibrium value, probed
/// on one perturbation draw (stream 1) of the stream-0 apparatus.
pub fn detect_reverse_time(man: &ExperimentManifest) -> Result<f64> {
    let spin = man.spin_state()?;
    let layout = make_layout(man.n)?;
    let mut model_rng = man.stream(0).rng();
    let model = build_model(man.n, spin, man.epsilon, &mut model_rng)?;
    let mut probe_rng = man.stream(1).rng();
    let (_, cache, _) = sample_nondegenerate(&model, &mut probe_rng)?;
    let state0 = initial_state(&model);
    let grid = man.grid()?;
    let series = probability_timeseries(&cache, &state0, &grid, &layout)?;
    let (p_inf, _, _) = equilibrium_probabilities(&cache, &state0, &layout)?;
    let gap0 = (series[0].p_plus - p_inf).abs();
    if gap0 < 1e-9 {
        return Ok(1.0);
    }
    let onset = series
        .iter()
        .find(|r| (r.p_plus - p_inf).abs() <= 0.1 * gap0)
        .map(|r| r.t)
        .unwrap_or_else(|| *grid.points().last().unwrap());
    Ok(10.0 * onset)
}

/// Forward-then-reversed evolution under independently perturbed
/// Hamiltonians, swept over reversal strengths. One apparatus (stream 0) is
/// shared by every trial; trial k uses stream k + 1 for its (V, V') pair at
/// every strength, so curves differ only through epsilon.
pub fn irreversibility_experiment(man: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    if man.n_samples < 2 {
        return Err(Error::InvalidParameter(
            "reversal sweep needs at least 2 trials".into(),
        ));
    }
    let spin = man.spin_state()?;
    let eps_list = man
        .epsilon_list
        .clone()
        .unwrap_or_else(default_epsilon_list);
    if eps_list.is_empty() || eps_list.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::InvalidParameter(
            "reversal strengths must be finite and nonnegative".into(),
        ));
    }
    let t_reverse = match man.t_reverse {
        Some(t) => t,
        None => detect_reverse_time(man)?,
    };
    if !(t_reverse.is_finite() && t_reverse > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reversal time must be positive, got {t_reverse}"
        )));
    }
    let mut base_rng = man.stream(0).rng();
    let base_model = build_model(man.n, spin, man.epsilon, &mut base_rng)?;
    let inset_epsilon = pick_inset_epsilon(&eps_list);
    let mut rows = Vec::with_capacity(eps_list.len() * man.n_samples);
    let mut per_epsilon = Vec::with_capacity(eps_list.len());
    let mut inset = Vec::new();
    let mut resamples = 0usize;
    for &epsilon in &eps_list {
        let model = MeasurementModel {
            epsilon,
            ..base_model.clone()
        };
        let outs = par::map_indexed(man.n_samples, |k| {
            let series_points = if inset_epsilon == Some(epsilon) && k == 0 {
                INSET_POINTS
            } else {
                0
            };
            reverse_trial(
                &model,
                man.stream(k as u64 + 1),
                t_reverse,
                series_points,
            )
        });
        let mut trace_dists = Vec::with_capacity(man.n_samples);
        let mut frob_dists = Vec::with_capacity(man.n_samples);
        for (k, out) in outs.into_iter().enumerate() {
            let (outcome, rejected) = out?;
            resamples += rejected;
            if !outcome.series.is_empty() {
                inset = outcome.series;
            }
            rows.push(ReverseRow {
                epsilon,
                stream_index: k as u64 + 1,
                trace_distance: outcome.trace_distance,
                frobenius_distance: outcome.frobenius_distance,
            });
            trace_dists.push(outcome.trace_distance);
            frob_dists.push(outcome.frobenius_distance);
        }
        per_epsilon.push(EpsilonStat {
            epsilon,
            median_trace_distance: median(&mut trace_dists),
            median_frobenius_distance: median(&mut frob_dists),
        });
    }
    let summary = ReverseSummary {
        t_reverse,
        per_epsilon,
        inset_epsilon,
        inset,
        resamples,
    };
    Ok(RunRecord {
        manifest: man.clone(),
        rows: Rows::Reverse(rows),
        summary: Summary::Reverse(summary),
        resamples,
        wall_time: start.elapsed(),
    })
}

/// Monte Carlo equilibrium probabilities against the closed forms for a
/// ladder of apparatus sizes, one row per size.
pub fn born_convergence_experiment(man: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    if man.n_samples < 2 {
        return Err(Error::InvalidParameter(
            "convergence study needs at least 2 draws per size".into(),
        ));
    }
    let spin = man.spin_state()?;
    let n_list = man.n_list.clone().unwrap_or_else(|| vec![4, 6, 8]);
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("empty size list".into()));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    let mut entries = Vec::with_capacity(n_list.len());
    let mut resamples = 0usize;
    for &n in &n_list {
        let layout = make_layout(n)?;
        let outs = par::map_indexed(man.n_samples, |k| {
            typicality_draw(n, spin, man.epsilon, man.stream(k as u64))
        });
        let mut vals = Vec::with_capacity(man.n_samples);
        for out in outs {
            let ((p_plus, _, _), rejected) = out?;
            vals.push(p_plus);
            resamples += rejected;
        }
        let (mc_mean, std) = mean_std(&vals);
        let mc_stderr = std / (vals.len() as f64).sqrt();
        let analytic_p_plus = avg_equilibrium_probability(&layout, &spin, Outcome::Plus);
        let analytic_p_zero = avg_prob_zero(&layout);
        rows.push(BornRow {
            n,
            analytic_p_plus,
            mc_mean,
            mc_stderr,
            analytic_p_zero,
        });
        entries.push(BornEntry {
            n,
            analytic_p_plus,
            analytic_p_zero,
            mc_mean,
            mc_stderr,
            textbook_gap: (analytic_p_plus - spin.p_plus()).abs(),
        });
    }
    Ok(RunRecord {
        manifest: man.clone(),
        rows: Rows::Born(rows),
        summary: Summary::Born(BornSummary { entries, resamples }),
        resamples,
        wall_time: start.elapsed(),
    })
}

/// Closed-form outcome probabilities for the manifest's size and spin.
/// No sampling is involved; the seed is irrelevant.
pub fn analytic_record(man: &ExperimentManifest) -> Result<RunRecord> {
    let start = Instant::now();
    let spin = man.spin_state()?;
    let layout = make_layout(man.n)?;
    let p_plus = avg_equilibrium_probability(&layout, &spin, Outcome::Plus);
    let p_minus = avg_equilibrium_probability(&layout, &spin, Outcome::Minus);
    let p_zero = avg_prob_zero(&layout);
    let rows = vec![
        AnalyticRow {
            outcome: "+1".into(),
            probability: p_plus,
        },
        AnalyticRow {
            outcome: "0".into(),
            probability: p_zero,
        },
        AnalyticRow {
            outcome: "-1".into(),
            probability: p_minus,
        },
    ];
    let summary = AnalyticSummary {
        n: man.n,
        d0: layout.d0,
        d1: layout.d1,
        p_plus,
        p_zero,
        p_minus,
    };
    Ok(RunRecord {
        manifest: man.clone(),
        rows: Rows::Analytic(rows),
        summary: Summary::Analytic(summary),
        resamples: 0,
        wall_time: start.elapsed(),
    })
}
