use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use finmeas_core::model::{
    build_model, initial_state, make_layout, outcome_probabilities, JointState, Metric, SpinState,
};
use finmeas_core::oracle;
use finmeas_core::rmt::{frobenius_distance, trace_distance};
use finmeas_core::rng::RngStream;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn half_spin() -> SpinState {
    SpinState::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap()
}

#[test]
fn layout_dimensions_match_binomials() {
    let expect = [
        (2usize, 2usize, 1usize),
        (4, 6, 5),
        (6, 20, 22),
        (8, 70, 93),
        (10, 252, 386),
        (16, 12870, 26333),
    ];
    for (n, d0, d1) in expect {
        let lay = make_layout(n).unwrap();
        assert_eq!((lay.d0, lay.d1), (d0, d1), "N = {n}");
        assert_eq!(lay.d0 + 2 * lay.d1, 1usize << n);
        assert_eq!(lay.sector_dim(), d0 + d1);
        assert_eq!(lay.apparatus_dim(), 1usize << n);
    }
    assert!(make_layout(0).is_err());
    assert!(make_layout(3).is_err());
    assert!(make_layout(18).is_err());
}

#[test]
fn spin_state_checks_norm() {
    assert!(SpinState::new(c(1.0, 0.0), c(0.0, 0.0)).is_ok());
    assert!(SpinState::new(c(1.0, 0.0), c(0.5, 0.0)).is_err());
    let s = SpinState::normalized(c(3.0, 0.0), c(0.0, 4.0)).unwrap();
    assert!((s.p_plus() - 0.36).abs() < 1e-15);
    assert!((s.p_minus() - 0.64).abs() < 1e-15);
    assert!(SpinState::normalized(c(0.0, 0.0), c(0.0, 0.0)).is_err());
    assert!(SpinState::normalized(c(f64::NAN, 0.0), c(1.0, 0.0)).is_err());
}

#[test]
fn model_building_is_deterministic_and_validated() {
    let spin = half_spin();
    let a = build_model(4, spin, 0.1, &mut RngStream::new(11, 2).rng()).unwrap();
    let b = build_model(4, spin, 0.1, &mut RngStream::new(11, 2).rng()).unwrap();
    assert_eq!(a.h_plus_block.matrix(), b.h_plus_block.matrix());
    assert_eq!(a.h_minus_block.matrix(), b.h_minus_block.matrix());
    assert_ne!(a.h_plus_block.matrix(), a.h_minus_block.matrix());
    assert!(build_model(4, spin, -0.5, &mut RngStream::new(11, 2).rng()).is_err());
    assert!(build_model(4, spin, f64::NAN, &mut RngStream::new(11, 2).rng()).is_err());
}

#[test]
fn initial_state_is_microcanonical_on_the_middle_sector() {
    let spin = half_spin();
    let model = build_model(4, spin, 0.1, &mut RngStream::new(1, 0).rng()).unwrap();
    let lay = model.layout;
    let state = initial_state(&model);
    assert!((state.trace() - 1.0).abs() < 1e-14);

    // support pattern: only H0 rows of bpp (offset d1), H0 rows of bmm
    for ((i, j), z) in state.bpp.indexed_iter() {
        if i == j && i >= lay.d1 {
            assert!((z.re - spin.p_plus() / lay.d0 as f64).abs() < 1e-15);
        } else {
            assert_eq!(*z, c(0.0, 0.0));
        }
    }
    for ((i, j), z) in state.bmm.indexed_iter() {
        if i == j && i < lay.d0 {
            assert!((z.re - spin.p_minus() / lay.d0 as f64).abs() < 1e-15);
        } else {
            assert_eq!(*z, c(0.0, 0.0));
        }
    }

    // rho is the projector mixture P/d0: rho^2 = rho/d0 on the full space
    let full = oracle::embed_state(&lay, &state).unwrap();
    let sq = full.dot(&full);
    let mut err = 0.0f64;
    for (a, b) in sq.iter().zip(full.iter()) {
        err += (a - b / lay.d0 as f64).norm_sqr();
    }
    assert!(err.sqrt() < 1e-13, "projector defect {}", err.sqrt());

    let (vals, _) = full.eigh(UPLO::Lower).unwrap();
    assert!(vals.iter().all(|l| *l > -1e-12));

    let (p_plus, p_zero, p_minus) = outcome_probabilities(&state, &lay).unwrap();
    assert_eq!(p_plus, 0.0);
    assert_eq!(p_minus, 0.0);
    assert_eq!(p_zero, 1.0);
}

#[test]
fn embedding_round_trips_bitwise() {
    for n in [2usize, 4] {
        let spin = half_spin();
        let model = build_model(n, spin, 0.2, &mut RngStream::new(3, 7).rng()).unwrap();
        let state = initial_state(&model);
        let full = oracle::embed_state(&model.layout, &state).unwrap();
        let back = oracle::extract_blocks(&model.layout, &full).unwrap();
        assert_eq!(back.bpp, state.bpp);
        assert_eq!(back.bmm, state.bmm);
        assert_eq!(back.bpm, state.bpm);
    }
}

#[test]
fn block_distances_match_full_space_distances() {
    let spin_a = half_spin();
    let spin_b = SpinState::new(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
    let model_a = build_model(4, spin_a, 0.1, &mut RngStream::new(5, 0).rng()).unwrap();
    let model_b = build_model(4, spin_b, 0.1, &mut RngStream::new(5, 0).rng()).unwrap();
    let lay = model_a.layout;
    let sa = initial_state(&model_a);
    let sb = initial_state(&model_b);

    let fa = oracle::embed_state(&lay, &sa).unwrap();
    let fb = oracle::embed_state(&lay, &sb).unwrap();

    let td_block = sa.trace_distance_to(&sb).unwrap();
    let td_full = trace_distance(&fa, &fb).unwrap();
    assert!((td_block - td_full).abs() < 1e-12, "{td_block} vs {td_full}");

    let fd_block = sa.frobenius_distance_to(&sb).unwrap();
    let fd_full = frobenius_distance(&fa, &fb).unwrap();
    assert!((fd_block - fd_full).abs() < 1e-12, "{fd_block} vs {fd_full}");

    assert_eq!(sa.distance_to(&sb, Metric::Trace).unwrap(), td_block);
    assert_eq!(sa.distance_to(&sb, Metric::Frobenius).unwrap(), fd_block);
}

#[test]
fn overlap_matches_full_space_trace() {
    let spin = half_spin();
    let model = build_model(4, spin, 0.1, &mut RngStream::new(6, 0).rng()).unwrap();
    let lay = model.layout;
    let sa = initial_state(&model);
    let model2 = build_model(
        4,
        SpinState::new(c(0.0, 1.0), c(0.0, 0.0)).unwrap(),
        0.1,
        &mut RngStream::new(6, 1).rng(),
    )
    .unwrap();
    let sb = initial_state(&model2);

    let fa = oracle::embed_state(&lay, &sa).unwrap();
    let fb = oracle::embed_state(&lay, &sb).unwrap();
    let prod = fa.dot(&fb);
    let tr: Complex64 = prod.diag().sum();
    let direct = sa.overlap(&sb);
    assert!((direct - tr.re).abs() < 1e-13, "{direct} vs {}", tr.re);

    // purity of the microcanonical mixture is 1/d0
    let self_overlap = sa.overlap(&sa);
    assert!((self_overlap - 1.0 / lay.d0 as f64).abs() < 1e-13);
}

#[test]
fn metric_parses_and_serializes() {
    assert_eq!("trace".parse::<Metric>().unwrap(), Metric::Trace);
    assert_eq!("frobenius".parse::<Metric>().unwrap(), Metric::Frobenius);
    assert!("fro".parse::<Metric>().is_err());
    assert_eq!(Metric::Trace.to_string(), "trace");
    assert_eq!(Metric::Frobenius.to_string(), "frobenius");
    assert_eq!(serde_json::to_string(&Metric::Trace).unwrap(), "\"trace\"");
    assert_eq!(
        serde_json::from_str::<Metric>("\"frobenius\"").unwrap(),
        Metric::Frobenius
    );
}

#[test]
fn joint_state_arithmetic() {
    let mut a = JointState::zeros(3);
    a.bpp[(0, 0)] = c(1.0, 0.0);
    a.bpm[(1, 2)] = c(0.0, 2.0);
    let mut b = JointState::zeros(3);
    b.bmm[(2, 2)] = c(4.0, 0.0);
    b.add_assign(&a);
    assert_eq!(b.bpp[(0, 0)], c(1.0, 0.0));
    assert_eq!(b.bmm[(2, 2)], c(4.0, 0.0));
    b.scale(0.5);
    assert_eq!(b.bpm[(1, 2)], c(0.0, 1.0));
    assert!((b.trace() - 2.5).abs() < 1e-15);

    let comp = b.compressed();
    assert_eq!(comp.dim(), (6, 6));
    assert_eq!(comp[(1, 5)], c(0.0, 1.0));
    assert_eq!(comp[(5, 1)], c(0.0, -1.0));

    let other = JointState::zeros(4);
    assert!(b.trace_distance_to(&other).is_err());
}
