use std::f64::consts::SQRT_2;

use bode_limits::lti::{closed_loop_system, Channel, Injection, LoopRealization, RationalTF};
use bode_limits::stochsim::{
    exact_discretize, output_covariance, simulate, stationary_covariance, NoiseSpec, SignalBundle, SimParams,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn lag(a: f64) -> RationalTF {
    RationalTF::zpk(vec![], vec![Complex64::new(-a, 0.0)], 1.0).unwrap()
}

fn lag_loop(c: f64, noise: &NoiseSpec) -> LoopRealization {
    closed_loop_system(&lag(1.0), &RationalTF::constant(c), Injection::ControlNoise, &noise.filter()).unwrap()
}

fn stats(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    (var, m4 / (var * var))
}

fn channel_variances(lp: &LoopRealization) -> Vec<f64> {
    let p = stationary_covariance(&lp.system).unwrap();
    output_covariance(&lp.system, &p).diagonal().iter().copied().collect()
}

#[test]
fn ou_chain_reaches_unit_variance() {
    let noise = NoiseSpec::ou(1.0, SQRT_2).unwrap();
    let lp = lag_loop(0.0, &noise);
    let b = simulate(&lp, &SimParams { dt: 0.5, duration: 1.0e6, seed: 5 }).unwrap();
    let (var, _) = stats(b.channel(Channel::U).unwrap());
    assert!((var - 1.0).abs() < 0.03, "{var}");
    let u = b.channel(Channel::U).unwrap();
    let w = b.channel(Channel::W).unwrap();
    assert_eq!(u, w);
    assert!(b.channel(Channel::V).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn lag_loop_matches_lyapunov_and_is_gaussian() {
    let noise = NoiseSpec::ou(1.0, 1.0).unwrap();
    let lp = lag_loop(1.0, &noise);
    let want = channel_variances(&lp);
    let b = simulate(&lp, &SimParams { dt: 0.1, duration: 2.0e5, seed: 9 }).unwrap();
    assert_eq!(b.len(), 2_000_000);
    let mut trace_bound = 0.0;
    for (i, ch) in lp.outputs.iter().enumerate() {
        let (var, kurt) = stats(b.channel(*ch).unwrap());
        assert!((var / want[i] - 1.0).abs() < 0.03, "{ch:?}: {var} vs {}", want[i]);
        assert!((kurt - 3.0).abs() < 0.05, "{ch:?} kurtosis {kurt}");
        trace_bound += want[i];
    }
    // running mean square of the channels stays near its stationary value
    let mut acc = 0.0;
    let mut sup: f64 = 0.0;
    for k in 0..b.len() {
        acc += lp.outputs.iter().map(|c| b.channel(*c).unwrap()[k].powi(2)).sum::<f64>();
        if k >= 1000 {
            sup = sup.max(acc / (k + 1) as f64);
        }
    }
    assert!(sup < 5.0 * trace_bound, "{sup} vs {trace_bound}");
}

/// Stationary covariance of `x+ = A x + e`, `cov e = Q`, by doubling.
fn discrete_stationary(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let (mut m, mut s) = (a.clone(), q.clone());
    for _ in 0..64 {
        s = &s + &m * &s * m.transpose();
        m = &m * &m;
    }
    s
}

#[test]
fn exact_discretization_has_no_step_bias() {
    let noise = NoiseSpec::ou(1.0, 1.0).unwrap();
    let lp = lag_loop(3.0, &noise);
    let p = stationary_covariance(&lp.system).unwrap();
    for dt in [0.01, 0.02, 0.2, 0.4] {
        let d = exact_discretize(&lp.system, dt).unwrap();
        let pd = discrete_stationary(&d.a_d, &d.q_d);
        let rel = (&pd - &p).norm() / p.norm();
        assert!(rel < 1e-9, "dt {dt}: {rel}");
    }
    let want = channel_variances(&lp);
    let mut prev: Option<Vec<f64>> = None;
    for dt in [0.01, 0.02] {
        let b = simulate(&lp, &SimParams { dt, duration: 4.0e4, seed: 21 }).unwrap();
        let got: Vec<f64> = lp.outputs.iter().map(|c| stats(b.channel(*c).unwrap()).0).collect();
        for (g, w) in got.iter().zip(&want) {
            assert!((g / w - 1.0).abs() < 0.03);
        }
        if let Some(p) = prev {
            for (a, b) in p.iter().zip(&got) {
                assert!((a / b - 1.0).abs() < 0.03);
            }
        }
        prev = Some(got);
    }
}

#[test]
fn bundle_independent_of_thread_count() {
    let noise = NoiseSpec::ou(2.0, 1.0).unwrap();
    let lp = lag_loop(1.0, &noise);
    let params = SimParams { dt: 0.01, duration: 600.0, seed: 77 };
    let run = |threads: usize| -> SignalBundle {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&lp, &params).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.channels, b.channels);
    assert_eq!(a.burn_in_samples, b.burn_in_samples);
    let mut bin = Vec::new();
    a.write_binary(&mut bin).unwrap();
    let back = SignalBundle::read_binary(bin.as_slice()).unwrap();
    assert_eq!(back.channels, a.channels);
}
