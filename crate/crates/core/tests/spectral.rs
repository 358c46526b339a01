use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use bode_limits::limits::{IntegralKind, IntegralStatus, Weight};
use bode_limits::lti::{closed_loop_system, Channel, Injection, RationalTF};
use bode_limits::spectral::{
    bode_like_integral, coherence, default_nperseg, mi_rate_pinsker, mi_rate_pinsker_band, sensitivity_like, CrossSpectra,
    WelchOptions,
};
use bode_limits::stochsim::{simulate, NoiseSpec, SignalBundle, SimParams};
use num_complex::Complex64;

/// Two independent unit-variance OU paths with rate 1, as channels U and V.
fn independent_ou(dt: f64, seed: u64) -> SignalBundle {
    let noise = NoiseSpec::ou(1.0, SQRT_2).unwrap();
    let g = RationalTF::zpk(vec![], vec![Complex64::new(-1.0, 0.0)], 1.0).unwrap();
    let lp = closed_loop_system(&g, &RationalTF::constant(0.0), Injection::ControlNoise, &noise.filter()).unwrap();
    let run = |s| simulate(&lp, &SimParams { dt, duration: 2.0e6 * dt, seed: s }).unwrap();
    let (a, b) = (run(seed), run(seed + 1));
    let mut ch = BTreeMap::new();
    ch.insert(Channel::U, a.channel(Channel::U).unwrap().to_vec());
    ch.insert(Channel::V, b.channel(Channel::U).unwrap().to_vec());
    SignalBundle::new(dt, ch, seed, a.burn_in_samples).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn ou_spectrum_matches_analytic_form() {
    let b = independent_ou(0.05, 3);
    assert_eq!(default_nperseg(b.len()), 32768);
    let opts = WelchOptions {
        nperseg: Some(8192),
        overlap: 0.5,
    };
    let cs = CrossSpectra::compute(&b, &[Channel::U, Channel::V], opts).unwrap();
    let phi = cs.estimate(Channel::U, Channel::U).unwrap();
    let errs: Vec<f64> = phi
        .omega
        .iter()
        .zip(&phi.values)
        .filter(|(w, _)| (0.1..=10.0).contains(*w))
        .map(|(w, v)| (v.re / (2.0 / (1.0 + w * w)) - 1.0).abs())
        .collect();
    let me = median(errs);
    assert!(me < 0.05, "{me}");
    assert!(phi.values.iter().all(|v| v.im == 0.0 && v.re >= 0.0));

    // Parseval against the sample variance
    let x = b.steady(Channel::U).unwrap();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    assert!((phi.variance() / var - 1.0).abs() < 0.03, "{} vs {var}", phi.variance());

    let uv = cs.estimate(Channel::U, Channel::V).unwrap();
    let vu = cs.estimate(Channel::V, Channel::U).unwrap();
    assert!(uv.values.iter().zip(&vu.values).all(|(a, b)| *a == b.conj()));

    let vv = cs.estimate(Channel::V, Channel::V).unwrap();
    let coh = coherence(&phi, &vv, &uv).unwrap();
    let mid: Vec<f64> = phi
        .omega
        .iter()
        .zip(&coh)
        .filter(|(w, _)| (0.1..=10.0).contains(*w))
        .map(|(_, c)| *c)
        .collect();
    assert!(median(mid) < 0.05);
}

#[test]
fn mi_rate_null_symmetry_and_ceiling() {
    let dt = 1.0;
    let b = independent_ou(dt, 11);
    let cs = CrossSpectra::compute(&b, &[Channel::U, Channel::V], WelchOptions::default()).unwrap();
    let (uu, vv) = (cs.estimate(Channel::U, Channel::U).unwrap(), cs.estimate(Channel::V, Channel::V).unwrap());
    let (uv, vu) = (cs.estimate(Channel::U, Channel::V).unwrap(), cs.estimate(Channel::V, Channel::U).unwrap());
    let duration = b.len() as f64 * dt;
    let band = Some((2.0 * std::f64::consts::PI / (duration / 10.0), 0.8 * std::f64::consts::PI / dt));
    let null = mi_rate_pinsker_band(&uu, &vv, &uv, band).unwrap();
    assert!(null.value < 0.01, "{}", null.value);
    assert!(!null.unreliable);

    let ab = mi_rate_pinsker(&uu, &vv, &uv).unwrap().value;
    let ba = mi_rate_pinsker(&vv, &uu, &vu).unwrap().value;
    assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1e-300));

    let same = mi_rate_pinsker(&uu, &uu, &uu).unwrap();
    assert!(same.unreliable);
    assert_eq!(same.clip_fraction, 1.0);
}

#[test]
fn self_ratio_integrates_to_zero() {
    let b = independent_ou(0.05, 5);
    let cs = CrossSpectra::compute(&b, &[Channel::U], WelchOptions::default()).unwrap();
    let phi = cs.estimate(Channel::U, Channel::U).unwrap();
    let curve = sensitivity_like(&phi, &phi, IntegralKind::Sensitivity).unwrap();
    assert!(curve.value.iter().all(|&v| v == 1.0));
    let r = bode_like_integral(&curve, Weight::Unweighted).unwrap();
    assert_eq!(r.status, IntegralStatus::Converged);
    assert_eq!(r.value, 0.0);
}
