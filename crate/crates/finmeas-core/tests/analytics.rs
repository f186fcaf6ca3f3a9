use ndarray::Array2;
use num_complex::Complex64;

use finmeas_core::analytics::{
    avg_equilibrium_probability, avg_equilibrium_state, avg_prob_zero, equilibration_bound,
    equilibrium_summary, limit_state, pap_average, post_measurement_table, Outcome,
};
use finmeas_core::dynamics::{sample_nondegenerate, time_averaged_state};
use finmeas_core::model::{
    build_model, initial_state, make_layout, outcome_probabilities, JointState, SpinState,
};
use finmeas_core::rmt::{sample_haar_state, CMat};
use finmeas_core::rng::RngStream;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn even_spin() -> SpinState {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    SpinState::new(c(a, 0.0), c(a, 0.0)).unwrap()
}

fn max_entry_gap(a: &JointState, b: &JointState) -> f64 {
    let block = |x: &CMat, y: &CMat| {
        x.iter()
            .zip(y.iter())
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    };
    block(&a.bpp, &b.bpp)
        .max(block(&a.bmm, &b.bmm))
        .max(block(&a.bpm, &b.bpm))
}

#[test]
fn closed_form_probability_table() {
    let lay6 = make_layout(6).unwrap();
    let p = avg_equilibrium_probability(&lay6, &even_spin(), Outcome::Plus);
    assert!((p - 11.0 / 43.0).abs() < 2e-16, "got {p}");

    for (n, want) in [(4usize, 7.0 / 12.0), (6, 21.0 / 43.0), (8, 71.0 / 164.0)] {
        let lay = make_layout(n).unwrap();
        assert_eq!(avg_prob_zero(&lay), want, "N = {n}");
    }

    let lay8 = make_layout(8).unwrap();
    let spin = SpinState::new(c(0.5, 0.0), c(0.0, 3f64.sqrt() / 2.0)).unwrap();
    let p = avg_equilibrium_probability(&lay8, &spin, Outcome::Plus);
    assert!((p - 93.0 / 656.0).abs() < 1e-15, "got {p}");
    let q = avg_equilibrium_probability(&lay8, &spin, Outcome::Minus);
    assert!((q - 3.0 * 93.0 / (4.0 * 164.0)).abs() < 1e-15, "got {q}");
}

#[test]
fn outcome_probabilities_sum_to_one() {
    let pinned = [
        SpinState::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap(),
        SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap(),
    ];
    for n in (2..=16).step_by(2) {
        let lay = make_layout(n).unwrap();
        for spin in [pinned[0], pinned[1], even_spin()] {
            let sum = avg_equilibrium_probability(&lay, &spin, Outcome::Plus)
                + avg_prob_zero(&lay)
                + avg_equilibrium_probability(&lay, &spin, Outcome::Minus);
            assert!((sum - 1.0).abs() <= 4e-16, "N = {n}: sum {sum}");
        }
    }
}

#[test]
fn fluctuation_bound_values() {
    let lay8 = make_layout(8).unwrap();
    let bound = equilibration_bound(&lay8, &even_spin(), Outcome::Plus);
    assert!((bound - 0.25 * 256.0 / 4900.0).abs() < 1e-15, "got {bound}");
    assert!((bound - 0.013061224489795918).abs() < 1e-14);

    // 2^N / d0^2 ~ pi N / (2 d0): the bound falls off exponentially, and the
    // scaled ratio drifts down slowly within a narrow band
    let up = SpinState::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
    let mut prev = f64::INFINITY;
    for n in [8usize, 10, 12, 14, 16] {
        let lay = make_layout(n).unwrap();
        let ratio = equilibration_bound(&lay, &up, Outcome::Plus) * (1 << n) as f64 / n as f64;
        assert!(ratio > 1.62 && ratio < 1.68, "N = {n}: ratio {ratio}");
        assert!(ratio < prev, "N = {n}");
        prev = ratio;
    }
    assert_eq!(equilibration_bound(&lay8, &up, Outcome::Minus), 0.0);
}

#[test]
fn average_equilibrium_state_is_a_valid_diagonal_state() {
    let lay = make_layout(4).unwrap();
    let spin = SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let state = avg_equilibrium_state(&lay, &spin);
    let (d0, d1) = (lay.d0, lay.d1);
    let d = lay.sector_dim();

    assert!((state.trace() - 1.0).abs() < 1e-14);
    assert!(state.bpm.iter().all(|z| *z == c(0.0, 0.0)));
    for ((i, j), z) in state.bpp.indexed_iter() {
        if i != j {
            assert_eq!(*z, c(0.0, 0.0));
        }
    }
    let side = 1.0 / (d + 1) as f64;
    let center = (d0 + 1) as f64 / ((d + 1) as f64 * d0 as f64);
    for i in 0..d1 {
        assert!((state.bpp[(i, i)].re - 0.36 * side).abs() < 1e-16);
        assert!((state.bmm[(d0 + i, d0 + i)].re - 0.64 * side).abs() < 1e-16);
    }
    for i in 0..d0 {
        assert!((state.bpp[(d1 + i, d1 + i)].re - 0.36 * center).abs() < 1e-16);
        assert!((state.bmm[(i, i)].re - 0.64 * center).abs() < 1e-16);
    }

    let (p_plus, p_zero, p_minus) = outcome_probabilities(&state, &lay).unwrap();
    assert!((p_plus - avg_equilibrium_probability(&lay, &spin, Outcome::Plus)).abs() < 1e-15);
    assert!((p_zero - avg_prob_zero(&lay)).abs() < 1e-15);
    assert!((p_minus - avg_equilibrium_probability(&lay, &spin, Outcome::Minus)).abs() < 1e-15);
}

#[test]
fn average_equilibrium_state_matches_sampled_equilibria() {
    let n = 4usize;
    let spin = SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let draws = 600usize;
    let lay = make_layout(n).unwrap();
    let mut mean = JointState::zeros(lay.sector_dim());
    for k in 0..draws {
        let mut rng = RngStream::new(90, k as u64).rng();
        let model = build_model(n, spin, 0.1, &mut rng).unwrap();
        let (_, cache, _) = sample_nondegenerate(&model, &mut rng).unwrap();
        let averaged = time_averaged_state(&cache, &initial_state(&model)).unwrap();
        mean.add_assign(&averaged);
    }
    mean.scale(1.0 / draws as f64);

    let predicted = avg_equilibrium_state(&lay, &spin);
    let gap = max_entry_gap(&mean, &predicted);
    println!("sampled equilibrium vs closed form: max entry gap {gap:.2e}");
    assert!(gap < 8e-3, "got {gap}");
}

#[test]
fn limit_state_becomes_exact_as_the_apparatus_grows() {
    let spin = SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let mut prev = f64::INFINITY;
    for n in [4usize, 6, 8, 10] {
        let lay = make_layout(n).unwrap();
        let limit = limit_state(&lay, &spin);
        assert!((limit.trace() - 1.0).abs() < 1e-14);
        let gap = limit
            .trace_distance_to(&avg_equilibrium_state(&lay, &spin))
            .unwrap();
        // the entire gap is the equilibrium weight still parked on H0
        assert!((gap - avg_prob_zero(&lay)).abs() < 1e-12, "N = {n}");
        assert!(gap < prev, "N = {n}: {gap} !< {prev}");
        prev = gap;
    }
}

#[test]
fn post_measurement_branches_partition_the_equilibrium() {
    let lay = make_layout(6).unwrap();
    let spin = SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let table = post_measurement_table(&lay, &spin);

    let want = [
        avg_equilibrium_probability(&lay, &spin, Outcome::Plus),
        avg_prob_zero(&lay),
        avg_equilibrium_probability(&lay, &spin, Outcome::Minus),
    ];
    let mut total = 0.0;
    for ((p, state), w) in table.iter().zip(want) {
        assert!((p - w).abs() < 1e-15);
        assert!((state.trace() - 1.0).abs() < 1e-13);
        total += p;
    }
    assert!((total - 1.0).abs() < 1e-15);

    // branch states are mutually orthogonal, with disjoint level supports
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                assert_eq!(table[i].1.overlap(&table[j].1), 0.0);
            }
        }
    }

    // mixing the branches with their own weights reproduces the average state
    let mut mixture = JointState::zeros(lay.sector_dim());
    for (p, state) in &table {
        let mut part = state.clone();
        part.scale(*p);
        mixture.add_assign(&part);
    }
    let gap = max_entry_gap(&mixture, &avg_equilibrium_state(&lay, &spin));
    assert!(gap <= 1e-15, "got {gap}");
}

#[test]
fn projector_average_closed_form() {
    let mut a: CMat = Array2::zeros((2, 2));
    a[(0, 0)] = c(0.3, 0.0);
    a[(0, 1)] = c(0.1, 0.2);
    a[(1, 0)] = c(0.1, -0.2);
    a[(1, 1)] = c(0.7, 0.0);
    let out = pap_average(&a).unwrap();
    assert!((out[(0, 0)] - c(1.3 / 6.0, 0.0)).norm() < 1e-15);
    assert!((out[(0, 1)] - c(0.1 / 6.0, 0.2 / 6.0)).norm() < 1e-15);
    assert!((out[(1, 1)] - c(1.7 / 6.0, 0.0)).norm() < 1e-15);
    let tr: Complex64 = out.diag().sum();
    assert!((tr - c(0.5, 0.0)).norm() < 1e-15);

    let mut bad = a.clone();
    bad[(1, 1)] = c(0.9, 0.0);
    assert!(pap_average(&bad).is_err());
    assert!(pap_average(&Array2::zeros((2, 3))).is_err());
    assert!(pap_average(&Array2::zeros((0, 0))).is_err());
}

fn random_trace_one(d: usize, rng: &mut impl rand::Rng) -> CMat {
    let mut a: CMat = Array2::zeros((d, d));
    for (w, _) in [(0.5, 0), (0.3, 0), (0.2, 0)] {
        let v = sample_haar_state(d, rng).unwrap();
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += v[i] * v[j].conj() * w;
            }
        }
    }
    a
}

#[test]
fn projector_average_matches_monte_carlo() {
    for (d, seed) in [(3usize, 70u64), (6, 71), (12, 72)] {
        let mut rng = RngStream::new(seed, 0).rng();
        let a = random_trace_one(d, &mut rng);
        let predicted = pap_average(&a).unwrap();

        let m = 20_000usize;
        let mut mean: CMat = Array2::zeros((d, d));
        let mut checkpoints = Vec::new();
        for k in 1..=m {
            let v = sample_haar_state(d, &mut rng).unwrap();
            let mut quad = c(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    quad += v[i].conj() * a[(i, j)] * v[j];
                }
            }
            for i in 0..d {
                for j in 0..d {
                    mean[(i, j)] += quad * v[i] * v[j].conj();
                }
            }
            if k == 50 || k == 800 || k == m {
                let gap = mean
                    .iter()
                    .zip(predicted.iter())
                    .map(|(s, p)| (s / k as f64 - p).norm())
                    .fold(0.0, f64::max);
                checkpoints.push(gap);
            }
        }
        println!(
            "d = {d}: sampling error {:.2e} -> {:.2e} -> {:.2e}",
            checkpoints[0], checkpoints[1], checkpoints[2]
        );
        assert!(checkpoints[2] < checkpoints[0], "d = {d}");
        assert!(checkpoints[2] < 3e-3, "d = {d}: gap {}", checkpoints[2]);
    }
}

#[test]
fn summary_bundles_the_closed_forms() {
    let lay = make_layout(6).unwrap();
    let spin = SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
    let s = equilibrium_summary(&lay, &spin);
    assert_eq!(
        s.p_plus,
        avg_equilibrium_probability(&lay, &spin, Outcome::Plus)
    );
    assert_eq!(s.p_zero, avg_prob_zero(&lay));
    assert_eq!(
        s.p_minus,
        avg_equilibrium_probability(&lay, &spin, Outcome::Minus)
    );
    assert_eq!(s.state.bpp, avg_equilibrium_state(&lay, &spin).bpp);
    assert_eq!(s.layout, lay);
}
