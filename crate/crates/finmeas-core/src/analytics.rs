//! Closed-form ensemble averages for the model: equilibrium outcome
//! probabilities, the average equilibrium state and its large-N limit, the
//! post-measurement table, fluctuation bounds, and Haar projector averages.
//!
//! Everything here is exact arithmetic on sector dimensions (all binomials
//! involved fit comfortably in 64 bits); these are the oracles the dynamics
//! ensembles are tested against.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ApparatusLayout, JointState, SpinState};
use crate::rmt::CMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Plus,
    Minus,
}

/// Ensemble-average equilibrium probability of the +1 or -1 outcome:
/// |c|^2 d1 / (d0 + d1 + 1).
pub fn avg_equilibrium_probability(
    layout: &ApparatusLayout,
    spin: &SpinState,
    outcome: Outcome,
) -> f64 {
    let weight = match outcome {
        Outcome::Plus => spin.p_plus(),
        Outcome::Minus => spin.p_minus(),
    };
    weight * layout.d1 as f64 / (layout.sector_dim() + 1) as f64
}

/// Ensemble-average equilibrium probability of the 0 outcome:
/// (d0 + 1) / (d0 + d1 + 1). Spin-independent.
pub fn avg_prob_zero(layout: &ApparatusLayout) -> f64 {
    (layout.d0 + 1) as f64 / (layout.sector_dim() + 1) as f64
}

/// Upper bound on the time-variance of an outcome probability around its
/// equilibrium value: |c|^4 2^N / d0^2.
pub fn equilibration_bound(
    layout: &ApparatusLayout,
    spin: &SpinState,
    outcome: Outcome,
) -> f64 {
    let weight = match outcome {
        Outcome::Plus => spin.p_plus(),
        Outcome::Minus => spin.p_minus(),
    };
    let d0 = layout.d0 as f64;
    weight * weight * layout.apparatus_dim() as f64 / (d0 * d0)
}

fn block_diag_state(
    d: usize,
    segments_pp: &[(usize, usize, f64)],
    segments_mm: &[(usize, usize, f64)],
) -> JointState {
    let mut state = JointState::zeros(d);
    for &(start, end, value) in segments_pp {
        for i in start..end {
            state.bpp[(i, i)] = Complex64::new(value, 0.0);
        }
    }
    for &(start, end, value) in segments_mm {
        for i in start..end {
            state.bmm[(i, i)] = Complex64::new(value, 0.0);
        }
    }
    state
}

/// Ensemble average of the time-averaged state, in block coordinates:
/// uniform weight 1/(d+1) on each H(+/-1) level and (d0+1)/(d0(d+1)) on each
/// H0 level, within the respective spin branch; the cross block averages to
/// zero.
pub fn avg_equilibrium_state(layout: &ApparatusLayout, spin: &SpinState) -> JointState {
    let (d0, d1) = (layout.d0, layout.d1);
    let d = layout.sector_dim();
    let side = 1.0 / (d + 1) as f64;
    let center = (d0 + 1) as f64 / ((d + 1) as f64 * d0 as f64);
    let (ap, am) = (spin.p_plus(), spin.p_minus());
    block_diag_state(
        d,
        &[(0, d1, ap * side), (d1, d, ap * center)],
        &[(0, d0, am * center), (d0, d, am * side)],
    )
}

/// Large-N limit of the average equilibrium state: all weight on the
/// outcome-(+/-1) sectors.
pub fn limit_state(layout: &ApparatusLayout, spin: &SpinState) -> JointState {
    let (d0, d1) = (layout.d0, layout.d1);
    let d = layout.sector_dim();
    let w = 1.0 / d1 as f64;
    block_diag_state(
        d,
        &[(0, d1, spin.p_plus() * w)],
        &[(d0, d, spin.p_minus() * w)],
    )
}

/// The three post-measurement branches in outcome order (+1, 0, -1):
/// each row is (probability, conditional state).
pub fn post_measurement_table(
    layout: &ApparatusLayout,
    spin: &SpinState,
) -> [(f64, JointState); 3] {
    let (d0, d1) = (layout.d0, layout.d1);
    let d = layout.sector_dim();
    let (ap, am) = (spin.p_plus(), spin.p_minus());
    let p_side = d1 as f64 / (d + 1) as f64;
    let p_zero = avg_prob_zero(layout);
    let plus = block_diag_state(d, &[(0, d1, 1.0 / d1 as f64)], &[]);
    let minus = block_diag_state(d, &[], &[(d0, d, 1.0 / d1 as f64)]);
    let zero = block_diag_state(
        d,
        &[(d1, d, ap / d0 as f64)],
        &[(0, d0, am / d0 as f64)],
    );
    [
        (ap * p_side, plus),
        (p_zero, zero),
        (am * p_side, minus),
    ]
}

/// Haar average of P A P over rank-one projectors P onto a Haar-random
/// vector: (A + 1) / (d(d+1)), valid for trace-one A.
pub fn pap_average(a: &CMat) -> Result<CMat> {
    let (r, c) = a.dim();
    if r != c || r == 0 {
        return Err(Error::ShapeMismatch {
            expected: (r, r),
            got: (r, c),
        });
    }
    let trace: Complex64 = a.diag().sum();
    if (trace - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::Contract(format!(
            "projector average requires unit trace, got {trace}"
        )));
    }
    let d = r as f64;
    let mut out = a.clone();
    for i in 0..r {
        out[(i, i)] += Complex64::new(1.0, 0.0);
    }
    out.mapv_inplace(|z| z / (d * (d + 1.0)));
    Ok(out)
}

/// Bundle of the closed-form equilibrium quantities for one layout and spin.
#[derive(Clone, Debug)]
pub struct EquilibriumSummary {
    pub p_plus: f64,
    pub p_zero: f64,
    pub p_minus: f64,
    pub state: JointState,
    pub layout: ApparatusLayout,
}

pub fn equilibrium_summary(layout: &ApparatusLayout, spin: &SpinState) -> EquilibriumSummary {
    EquilibriumSummary {
        p_plus: avg_equilibrium_probability(layout, spin, Outcome::Plus),
        p_zero: avg_prob_zero(layout),
        p_minus: avg_equilibrium_probability(layout, spin, Outcome::Minus),
        state: avg_equilibrium_state(layout, spin),
        layout: *layout,
    }
}
