//! Built-in cross-checks. Each verifies one numerical route against an
//! independent one on a small instance and prints a single line; the first
//! failure aborts with a message that becomes a numeric-failure exit.

use ndarray::Array2;
use num_complex::Complex64;

use finmeas_core::analytics::pap_average;
use finmeas_core::dynamics::{evolve, sample_nondegenerate, time_averaged_state};
use finmeas_core::model::{build_model, initial_state, SpinState};
use finmeas_core::oracle;
use finmeas_core::rmt::{
    eig, haar_column_fourth_moment, sample_haar_state, trace_distance, CMat, HermitianOperator,
};
use finmeas_core::rng::RngStream;

pub fn run(seed: u64) -> Result<(), String> {
    fourth_moment(seed)?;
    projector_average(seed)?;
    block_vs_dense(seed)?;
    dephasing_quadrature(seed)?;
    println!("selftest: all checks passed");
    Ok(())
}

fn fourth_moment(seed: u64) -> Result<(), String> {
    let d = 4usize;
    let expected = haar_column_fourth_moment(d, 0, 1, 0, 1).map_err(|e| e.to_string())?;
    let mut rng = RngStream::new(seed, 0).rng();
    let m = 20_000usize;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for k in 1..=m {
        let v = sample_haar_state(d, &mut rng).map_err(|e| e.to_string())?;
        let q = v[0].norm_sqr() * v[1].norm_sqr();
        let delta = q - mean;
        mean += delta / k as f64;
        m2 += delta * (q - mean);
    }
    let se = (m2 / (m as f64 - 1.0) / m as f64).sqrt();
    let z = (mean - expected).abs() / se;
    if z > 4.0 {
        return Err(format!(
            "fourth moment: sampled {mean} vs {expected}, z = {z:.2} > 4"
        ));
    }
    println!("selftest: haar fourth moment    sampled {mean:.6} vs {expected} (z = {z:.2})");
    Ok(())
}

fn projector_average(seed: u64) -> Result<(), String> {
    let d = 6usize;
    let mut a: CMat = Array2::zeros((d, d));
    for i in 0..3 {
        a[(i, i)] = Complex64::new(1.0 / 3.0, 0.0);
    }
    let expected = pap_average(&a).map_err(|e| e.to_string())?;
    let m = 5_000usize;
    let mut rng = RngStream::new(seed, 1).rng();
    let mut mean: CMat = Array2::zeros((d, d));
    for _ in 0..m {
        let v = sample_haar_state(d, &mut rng).map_err(|e| e.to_string())?;
        let quad: f64 = (0..3).map(|i| v[i].norm_sqr() / 3.0).sum();
        for i in 0..d {
            for j in 0..d {
                mean[(i, j)] += quad * v[i] * v[j].conj();
            }
        }
    }
    mean.mapv_inplace(|z| z / m as f64);
    let worst = mean
        .iter()
        .zip(expected.iter())
        .map(|(s, e)| (s - e).norm())
        .fold(0.0, f64::max);
    if worst > 5e-3 {
        return Err(format!(
            "projector average: worst entry gap {worst:.3e} > 5e-3 at {m} draws"
        ));
    }
    println!("selftest: projector average     worst entry gap {worst:.2e} over {m} draws");
    Ok(())
}

fn block_vs_dense(seed: u64) -> Result<(), String> {
    let spin = SpinState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))
        .map_err(|e| e.to_string())?;
    let model =
        build_model(2, spin, 0.3, &mut RngStream::new(seed, 2).rng()).map_err(|e| e.to_string())?;
    let (v, cache, _) = sample_nondegenerate(&model, &mut RngStream::new(seed, 3).rng())
        .map_err(|e| e.to_string())?;
    let state0 = initial_state(&model);
    let t = 1.1f64;
    let blocks = evolve(&cache, &state0, t).map_err(|e| e.to_string())?;

    let lay = model.layout;
    let hp = model
        .h_plus_block
        .add_scaled(model.epsilon, &v.v_plus_block)
        .map_err(|e| e.to_string())?;
    let hm = model
        .h_minus_block
        .add_scaled(model.epsilon, &v.v_minus_block)
        .map_err(|e| e.to_string())?;
    let h_full =
        oracle::full_hamiltonian(&lay, hp.matrix(), hm.matrix()).map_err(|e| e.to_string())?;
    let rho_full = oracle::embed_state(&lay, &state0).map_err(|e| e.to_string())?;
    let direct = oracle::evolve_full(&h_full, &rho_full, t).map_err(|e| e.to_string())?;
    let embedded = oracle::embed_state(&lay, &blocks).map_err(|e| e.to_string())?;
    let td = trace_distance(&embedded, &direct).map_err(|e| e.to_string())?;
    if td > 1e-10 {
        return Err(format!("block vs dense: trace distance {td:.3e} > 1e-10"));
    }
    println!("selftest: block vs dense        trace distance {td:.2e} at t = {t}");
    Ok(())
}

fn dephasing_quadrature(seed: u64) -> Result<(), String> {
    let spin = SpinState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8))
        .map_err(|e| e.to_string())?;
    let model =
        build_model(2, spin, 0.1, &mut RngStream::new(seed, 4).rng()).map_err(|e| e.to_string())?;
    let (v, cache, _) = sample_nondegenerate(&model, &mut RngStream::new(seed, 5).rng())
        .map_err(|e| e.to_string())?;
    let state0 = initial_state(&model);
    let averaged = time_averaged_state(&cache, &state0).map_err(|e| e.to_string())?;

    let lay = model.layout;
    let hp = model
        .h_plus_block
        .add_scaled(model.epsilon, &v.v_plus_block)
        .map_err(|e| e.to_string())?;
    let hm = model
        .h_minus_block
        .add_scaled(model.epsilon, &v.v_minus_block)
        .map_err(|e| e.to_string())?;
    let h_full =
        oracle::full_hamiltonian(&lay, hp.matrix(), hm.matrix()).map_err(|e| e.to_string())?;
    let spec = eig(&HermitianOperator::new(h_full).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rho_full = oracle::embed_state(&lay, &state0).map_err(|e| e.to_string())?;
    let quad =
        oracle::time_average_quadrature(&spec, &rho_full, 2e4, 200_000).map_err(|e| e.to_string())?;
    let embedded = oracle::embed_state(&lay, &averaged).map_err(|e| e.to_string())?;
    let worst = embedded
        .iter()
        .zip(quad.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if worst > 5e-3 {
        return Err(format!(
            "dephasing quadrature: worst entry gap {worst:.3e} > 5e-3"
        ));
    }
    println!("selftest: dephasing quadrature  worst entry gap {worst:.2e} at T = 2e4");
    Ok(())
}
