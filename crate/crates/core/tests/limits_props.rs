use bode_limits::limits::{
    bode_quadrature, bode_quadrature_with, classical_oracle, IntegralStatus, LogIntegralOptions,
    OracleKind, Weight,
};
use bode_limits::limits::quad::QuadOptions;
use bode_limits::lti::{gang_of_four, Poly, RationalTF};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Loop `L = (P - D)/D` whose closed-loop polynomial is the Hurwitz `P`.
fn placed_loop(ol: Vec<Complex64>, cl: Vec<Complex64>) -> Option<RationalTF> {
    let d = Poly::from_roots(&ol, 1.0);
    let p = Poly::from_roots(&cl, 1.0);
    let n = p.add(&d.scale(-1.0));
    if n.is_zero() {
        return None;
    }
    let num: Vec<f64> = n.coeffs.iter().rev().copied().collect();
    let den: Vec<f64> = d.coeffs.iter().rev().copied().collect();
    RationalTF::from_coeffs(&num, &den).ok()
}

fn root_set(max_pairs: usize, re: std::ops::Range<f64>) -> impl Strategy<Value = Vec<Complex64>> {
    (
        prop::collection::vec(re.clone(), 0..=2),
        prop::collection::vec((re, 0.2f64..3.0), 0..=max_pairs),
    )
        .prop_map(|(reals, pairs)| {
            let mut v: Vec<Complex64> = reals.into_iter().map(|x| c(x, 0.0)).collect();
            for (a, b) in pairs {
                v.push(c(a, b));
                v.push(c(a, -b));
            }
            v
        })
}

/// Stable loops of relative degree at least two, open-loop unstable poles allowed.
fn rd2_loop() -> impl Strategy<Value = RationalTF> {
    (
        prop::collection::vec(0.1f64..2.0, 1..=2),
        root_set(1, -4.0..-0.3),
        root_set(1, -3.0..-0.3),
        -12.0f64..-1.0,
    )
        .prop_filter_map("degenerate loop", |(unst, stab, cl_rest, spare)| {
            let mut ol: Vec<Complex64> = unst.iter().map(|&x| c(x, 0.0)).collect();
            ol.extend(stab);
            ol.push(c(spare, 0.0));
            if ol.len() < 3 {
                ol.push(c(-5.0, 0.0));
            }
            let n = ol.len();
            let mut cl: Vec<Complex64> = cl_rest.into_iter().take(n - 1).collect();
            while cl.len() < n - 1 {
                cl.push(c(-1.0 - cl.len() as f64, 0.0));
            }
            if cl.len().is_multiple_of(2) && cl.len() >= 2 && cl[cl.len() - 1].im != 0.0 && cl[cl.len() - 2].im == 0.0 {
                return None;
            }
            // last closed-loop root fixes the sum of roots
            let sum_ol: f64 = ol.iter().map(|r| r.re).sum();
            let sum_cl: f64 = cl.iter().map(|r| r.re).sum();
            let last = sum_ol - sum_cl;
            if last > -0.2 || cl.iter().any(|r| r.im != 0.0 && !cl.contains(&r.conj())) {
                return None;
            }
            cl.push(c(last, 0.0));
            let l = placed_loop(ol, cl)?;
            (l.relative_degree() >= 2).then_some(l)
        })
}

/// Stable type-2 loops `L = (P - s^2 D')/(s^2 D')`.
fn type2_loop() -> impl Strategy<Value = RationalTF> {
    (root_set(1, -4.0..0.5), root_set(1, -3.0..-0.3), prop::collection::vec(-3.0f64..-0.3, 1..=2))
        .prop_filter_map("degenerate loop", |(rest, cl_pairs, cl_reals)| {
            let mut ol = vec![c(0.0, 0.0), c(0.0, 0.0)];
            ol.extend(rest);
            let mut cl: Vec<Complex64> = cl_reals.into_iter().map(|x| c(x, 0.0)).collect();
            cl.extend(cl_pairs);
            while cl.len() < ol.len() {
                cl.push(c(-0.7 - 0.9 * cl.len() as f64, 0.0));
            }
            if cl.len() > ol.len() {
                return None;
            }
            let l = placed_loop(ol, cl)?;
            (l.origin_order() == 2 && l.relative_degree() >= 1).then_some(l)
        })
}

fn t_uw(l: &RationalTF) -> RationalTF {
    gang_of_four(l, &RationalTF::constant(1.0)).unwrap().t_uw
}

fn t_yd(l: &RationalTF) -> RationalTF {
    gang_of_four(l, &RationalTF::constant(1.0)).unwrap().t_yd
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn sensitivity_quadrature_matches_classical(l in rd2_loop()) {
        let oracle = classical_oracle(&l, OracleKind::Sensitivity).unwrap();
        let q = bode_quadrature(&t_uw(&l), Weight::Unweighted).unwrap();
        prop_assert_eq!(q.status, IntegralStatus::Converged);
        prop_assert!((q.value - oracle).abs() <= 1e-3 * (1.0 + oracle.abs()), "{} vs {}", q.value, oracle);
    }

    #[test]
    fn complementary_quadrature_matches_classical(l in type2_loop()) {
        let oracle = classical_oracle(&l, OracleKind::Complementary).unwrap();
        let q = bode_quadrature(&t_yd(&l), Weight::InvOmegaSq).unwrap();
        prop_assert_eq!(q.status, IntegralStatus::Converged);
        prop_assert!((q.value - oracle).abs() <= 1e-3 * (1.0 + oracle.abs()), "{} vs {}", q.value, oracle);
    }

    #[test]
    fn weighted_equals_unweighted_after_inversion(l in type2_loop()) {
        let t = t_yd(&l);
        let a = bode_quadrature(&t, Weight::InvOmegaSq).unwrap();
        let b = bode_quadrature(&t.frequency_invert(), Weight::Unweighted).unwrap();
        prop_assert!((a.value - b.value).abs() <= 1e-6 * (1.0 + a.value.abs()));
    }

    #[test]
    fn bounds_ignore_controller_gain(l in rd2_loop(), k in 0.05f64..0.5) {
        let c = RationalTF::constant(k);
        let rep1 = bode_limits::limits::corollary3_report(&l, &c, 0.02);
        let rep2 = bode_limits::limits::corollary3_report(&l, &RationalTF::constant(2.0 * k), 0.02);
        // stability may differ between the two gains; compare whenever both are valid
        if let (Ok(r1), Ok(r2)) = (rep1, rep2) {
            prop_assert_eq!(r1.bounds.sens_bound, r2.bounds.sens_bound);
            prop_assert_eq!(r1.bounds.comp_bound, r2.bounds.comp_bound);
            prop_assert_eq!(r1.bounds.plant_log_integral, r2.bounds.plant_log_integral);
            prop_assert_eq!(r1.bounds.plant_log_integral_weighted, r2.bounds.plant_log_integral_weighted);
        }
    }

    #[test]
    fn all_pass_integrates_to_zero(zs in root_set(2, 0.1..5.0), k in prop::bool::ANY) {
        prop_assume!(!zs.is_empty());
        let poles: Vec<Complex64> = zs.iter().map(|z| -z.conj()).collect();
        let gain = if k { 1.0 } else { -1.0 };
        let t = RationalTF::zpk(zs, poles, gain).unwrap();
        for w in [Weight::Unweighted, Weight::InvOmegaSq] {
            let q = bode_quadrature(&t, w).unwrap();
            prop_assert!(q.value.abs() < 1e-6, "{:?} {}", w, q.value);
        }
    }

    #[test]
    fn panel_doubling_invariance(l in rd2_loop()) {
        let t = t_uw(&l);
        let a = bode_quadrature(&t, Weight::Unweighted).unwrap();
        let opts = LogIntegralOptions { quad: QuadOptions { initial_panels: 2, ..QuadOptions::default() }, ..Default::default() };
        let b = bode_quadrature_with(&t, Weight::Unweighted, &opts).unwrap();
        let tol = 2.0 * a.abs_error_estimate.max(b.abs_error_estimate).max(1e-12);
        prop_assert!((a.value - b.value).abs() <= tol, "{} vs {} tol {}", a.value, b.value, tol);
    }
}
