use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::plan::{run_loop, LoopRun, RunSummary, SimPlan};
use super::{VerifyError, VerifyOptions};
use crate::limits::{
    bode_quadrature, judge, precondition_failure, BoundReport, Extended, IntegralKind, IntegralResult, IntegralStatus,
    Verdict, Weight,
};
use crate::lti::{gang_of_four, Channel, GangOfFour, Injection, RationalTF};
use crate::spectral::{
    bode_like_integral_with, mi_rate_difference, mi_rate_pinsker_band, sensitivity_from_spectra, BodeLikeOptions,
    CrossSpectra, SpectralEstimate,
};
use crate::stochsim::{NoiseSpec, SignalBundle};

/// A scalar error metric held against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ToleranceCheck {
    fn new(name: &str, value: f64, tolerance: f64) -> Self {
        ToleranceCheck {
            name: name.into(),
            value,
            tolerance,
            pass: value.is_finite() && value < tolerance,
            note: None,
        }
    }
}

/// One inequality `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub relation: String,
    pub lhs: f64,
    pub lhs_error: f64,
    pub rhs: Extended,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub kind: IntegralKind,
    pub analytic_bound: Extended,
    pub quadrature_value: IntegralResult,
    pub empirical_integral: Option<IntegralResult>,
    /// The same weighted integral estimated on the forward measurement loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_empirical_integral: Option<IntegralResult>,
    pub mi_rate_difference: Option<f64>,
    pub mi_rate_difference_error: Option<f64>,
    pub checks: Vec<InequalityCheck>,
    pub verdict: Verdict,
    pub slack_used: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub value: f64,
    pub clip_fraction: f64,
    pub unreliable: bool,
    pub band: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub records: Vec<ChainRecord>,
    pub identities: Vec<ToleranceCheck>,
    pub mi_rates: BTreeMap<String, MiSummary>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveCheck {
    pub kind: IntegralKind,
    pub injection: Injection,
    pub median_rel_error: f64,
    pub quadrature: IntegralResult,
    pub empirical: Option<IntegralResult>,
    pub integral_match: bool,
    pub curve_pass: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub samples: CurveSamples,
}

/// Log-thinned samples of an estimated curve and its transfer-function reference.
///
/// Inverse-loop curves are on the inverted frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSamples {
    pub omega: Vec<f64>,
    pub reference: Vec<f64>,
    pub estimate: Vec<f64>,
    /// `ln(estimate)`, divided by `w^2` for weighted integrals on the forward axis.
    pub integrand: Vec<f64>,
}

const DENSE_SAMPLES: usize = 64;
const LOG_SAMPLES: usize = 192;

fn thinned_indices(n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n.min(DENSE_SAMPLES)).collect();
    if n > DENSE_SAMPLES {
        let (a, b) = ((DENSE_SAMPLES as f64).ln(), ((n - 1) as f64).ln());
        for i in 0..=LOG_SAMPLES {
            let k = (a + (b - a) * i as f64 / LOG_SAMPLES as f64).exp().round() as usize;
            if k > *idx.last().unwrap() && k < n {
                idx.push(k);
            }
        }
    }
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub records: Vec<CurveCheck>,
    pub runs: Vec<RunSummary>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixReport {
    pub stationarity: ToleranceCheck,
    pub identities: Vec<ToleranceCheck>,
    pub skipped: bool,
    pub pass: bool,
}

fn rank(v: Verdict) -> u8 {
    match v {
        Verdict::Holds => 0,
        Verdict::HoldsWithEquality => 1,
        Verdict::SkippedDivergent => 2,
        Verdict::SkippedPrecondition => 3,
        Verdict::Violated => 4,
    }
}

pub fn worst(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
    vs.into_iter().max_by_key(|&v| rank(v)).unwrap_or(Verdict::Holds)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Status a divergent closed-loop integral should show on data, when the
/// quadrature reports it as singular.
fn expected_status(tf: &RationalTF, weight: Weight, q: &IntegralResult) -> IntegralStatus {
    if q.status != IntegralStatus::Singular || weight != Weight::InvOmegaSq {
        return q.status;
    }
    if tf.is_zero() || tf.zeros().iter().any(|z| z.norm() == 0.0) {
        return IntegralStatus::DivergentMinus;
    }
    let l0 = tf.dc_log_mag();
    if l0 > 0.0 {
        IntegralStatus::DivergentPlus
    } else if l0 < 0.0 {
        IntegralStatus::DivergentMinus
    } else {
        IntegralStatus::Singular
    }
}

fn integrals_match(quad: IntegralStatus, q: f64, e: &IntegralResult, opts: &VerifyOptions) -> bool {
    match (quad, e.status) {
        (IntegralStatus::Converged, IntegralStatus::Converged) => {
            (e.value - q).abs() <= opts.lemma_integral_abs.max(opts.lemma_integral_rel * q.abs())
        }
        (a, b) => a == b && a != IntegralStatus::Singular,
    }
}

fn bode_opts(run: &LoopRun) -> BodeLikeOptions {
    BodeLikeOptions {
        omega_peak: Some(run.omega_peak),
        omega_hi: Some(0.8 * PI / run.dt),
        ..Default::default()
    }
}

/// Channels whose PSD ratio estimates each kind on a given loop variant.
fn curve_channels(kind: IntegralKind) -> (Channel, Channel) {
    match kind {
        IntegralKind::Sensitivity => (Channel::U, Channel::W),
        IntegralKind::LoadDisturbance => (Channel::Y, Channel::W),
        IntegralKind::Complementary => (Channel::Y, Channel::D),
        IntegralKind::Noise => (Channel::U, Channel::D),
    }
}

fn empirical_integral(run: &LoopRun, kind: IntegralKind, weight: Weight) -> Result<IntegralResult, VerifyError> {
    let (n, d) = curve_channels(kind);
    let curve = sensitivity_from_spectra(&run.spectra, n, d, kind)?;
    Ok(bode_like_integral_with(&curve, weight, &bode_opts(run))?)
}

struct MiPieces {
    diff: f64,
    err: f64,
}

fn est(cs: &CrossSpectra, h: Option<usize>, a: Channel, b: Channel) -> Result<SpectralEstimate, VerifyError> {
    Ok(match h {
        Some(h) => cs.half(h, a, b)?,
        None => cs.estimate(a, b)?,
    })
}

/// `I(x; fb) - I(noise; fb)` with its split-half spread.
fn mi_difference(run: &LoopRun, x: Channel, noise: Channel, fb: Channel) -> Result<MiPieces, VerifyError> {
    let band = Some(run.mi_band());
    let at = |h: Option<usize>| -> Result<f64, VerifyError> {
        let cs = &run.spectra;
        Ok(mi_rate_difference(
            &est(cs, h, x, x)?,
            &est(cs, h, noise, noise)?,
            &est(cs, h, fb, fb)?,
            &est(cs, h, x, fb)?,
            &est(cs, h, noise, fb)?,
            band,
        )?
        .value())
    };
    let diff = at(None)?;
    let err = 0.5 * (at(Some(0))? - at(Some(1))?).abs();
    Ok(MiPieces { diff, err })
}

fn mi_rate(run: &LoopRun, x: Channel, y: Channel) -> Result<MiSummary, VerifyError> {
    let cs = &run.spectra;
    let m = mi_rate_pinsker_band(
        &cs.estimate(x, x)?,
        &cs.estimate(y, y)?,
        &cs.estimate(x, y)?,
        Some(run.mi_band()),
    )?;
    Ok(MiSummary {
        value: m.value,
        clip_fraction: m.clip_fraction,
        unreliable: m.unreliable,
        band: m.truncation_band,
    })
}

fn check(relation: &str, lhs: Option<(f64, f64)>, rhs: Extended, slack: f64, skip: Option<Verdict>) -> InequalityCheck {
    let (l, e) = lhs.unwrap_or((f64::NAN, 0.0));
    let verdict = match (skip, rhs.finite()) {
        (Some(v), _) => v,
        (None, Some(r)) if l.is_finite() => judge(l, e, r, slack),
        _ => Verdict::SkippedDivergent,
    };
    InequalityCheck {
        relation: relation.into(),
        lhs: l,
        lhs_error: e,
        rhs,
        verdict,
    }
}

fn converged_pair(r: &Option<IntegralResult>) -> Option<(f64, f64)> {
    r.as_ref().filter(|r| r.is_converged()).map(|r| (r.value, r.abs_error_estimate))
}

/// Inputs shared by the inequality chains of one loop.
struct ChainInputs<'a> {
    gof: &'a GangOfFour,
    bounds: &'a BoundReport,
    loop_rd: i64,
    loop_type: i64,
}

fn chain_record(
    ci: &ChainInputs,
    kind: IntegralKind,
    empirical: Result<IntegralResult, VerifyError>,
    mi: Result<MiPieces, VerifyError>,
    mi_bound: f64,
    plant_term: Extended,
    opts: &VerifyOptions,
) -> Result<ChainRecord, VerifyError> {
    let quad = bode_quadrature(kind.transfer(ci.gof), kind.weight())?;
    let bound = kind.bound(ci.bounds);
    let mut notes = Vec::new();
    let skip = precondition_failure(kind, ci.loop_rd, ci.loop_type).map(|why| {
        notes.push(why);
        Verdict::SkippedPrecondition
    });
    let empirical = match empirical {
        Ok(e) => Some(e),
        Err(e) => {
            notes.push(format!("empirical integral unavailable: {e}"));
            None
        }
    };
    let mi = match mi {
        Ok(m) => Some(m),
        Err(e) => {
            notes.push(format!("rate difference unavailable: {e}"));
            None
        }
    };
    let emp = converged_pair(&empirical);
    let mi_pair = mi.as_ref().map(|m| (m.diff, m.err));
    // integral >= rate difference (+ plant term)
    let chain_rhs = match (mi.as_ref(), plant_term) {
        (Some(m), Extended::Finite(p)) => Extended::Finite(m.diff + p),
        (Some(_), other) => other,
        (None, _) => Extended::Undefined,
    };
    let plant_label = match kind {
        IntegralKind::Sensitivity | IntegralKind::Complementary => "",
        IntegralKind::LoadDisturbance => " + plant_log",
        IntegralKind::Noise => " - plant_log_weighted",
    };
    let checks = vec![
        check(
            &format!("empirical_integral >= mi_difference{plant_label}"),
            emp,
            chain_rhs,
            opts.slack_coeff,
            skip,
        ),
        check("mi_difference >= zero_pole_sum", mi_pair, Extended::Finite(mi_bound), opts.slack_coeff, skip),
        check("empirical_integral >= analytic_bound", emp, bound, opts.slack_coeff, skip),
    ];
    if let Some(e) = &empirical {
        if !e.is_converged() {
            notes.push(format!("empirical integral status {:?}", e.status));
        }
    }
    let verdict = worst(checks.iter().map(|c| c.verdict));
    Ok(ChainRecord {
        kind,
        analytic_bound: bound,
        quadrature_value: quad,
        empirical_integral: empirical,
        forward_empirical_integral: None,
        mi_rate_difference: mi.as_ref().map(|m| m.diff),
        mi_rate_difference_error: mi.as_ref().map(|m| m.err),
        checks,
        verdict,
        slack_used: opts.slack_coeff * (1.0 + bound.finite().map_or(0.0, f64::abs)),
        notes,
    })
}

fn plant_term(r: &IntegralResult, sign: f64) -> Extended {
    match r.status {
        IntegralStatus::Converged => Extended::Finite(sign * r.value),
        IntegralStatus::DivergentPlus if sign > 0.0 => Extended::PlusInfinity,
        IntegralStatus::DivergentMinus if sign < 0.0 => Extended::PlusInfinity,
        IntegralStatus::DivergentPlus | IntegralStatus::DivergentMinus => Extended::MinusInfinity,
        IntegralStatus::Singular => Extended::Undefined,
    }
}

fn chain_inputs<'a>(gof: &'a GangOfFour, bounds: &'a BoundReport, g: &RationalTF, c: &RationalTF) -> ChainInputs<'a> {
    let l = g.mul(c);
    ChainInputs {
        gof,
        bounds,
        loop_rd: l.relative_degree(),
        loop_type: l.origin_order(),
    }
}

/// Chains on the control-noise loop from an existing run.
pub(crate) fn control_chain_from_run(
    g: &RationalTF,
    c: &RationalTF,
    bounds: &BoundReport,
    run: &LoopRun,
    opts: &VerifyOptions,
) -> Result<ChainReport, VerifyError> {
    let gof = gang_of_four(g, c)?;
    let ci = chain_inputs(&gof, bounds, g, c);
    let mut mi_rates = BTreeMap::new();
    for (name, x) in [("u;v", Channel::U), ("y;v", Channel::Y), ("w;v", Channel::W)] {
        mi_rates.insert(name.to_string(), mi_rate(run, x, Channel::V)?);
    }
    let sens = chain_record(
        &ci,
        IntegralKind::Sensitivity,
        empirical_integral(run, IntegralKind::Sensitivity, Weight::Unweighted),
        mi_difference(run, Channel::U, Channel::W, Channel::V),
        bounds.sens_bound,
        Extended::Finite(0.0),
        opts,
    )?;
    let load = chain_record(
        &ci,
        IntegralKind::LoadDisturbance,
        empirical_integral(run, IntegralKind::LoadDisturbance, Weight::Unweighted),
        mi_difference(run, Channel::Y, Channel::W, Channel::V),
        bounds.sens_bound,
        plant_term(&bounds.plant_log_integral, 1.0),
        opts,
    )?;
    let identities = vec![ToleranceCheck::new(
        "|I(u;v) - I(y;v)|",
        (mi_rates["u;v"].value - mi_rates["y;v"].value).abs(),
        opts.identity_tol,
    )];
    Ok(ChainReport {
        records: vec![sens, load],
        identities,
        mi_rates,
        runs: vec![run.summary()],
    })
}

/// Chains on the inverse measurement loop; `forward` adds the direct weighted estimates.
pub(crate) fn measurement_chain_from_run(
    g: &RationalTF,
    c: &RationalTF,
    bounds: &BoundReport,
    run: &LoopRun,
    forward: Option<&LoopRun>,
    opts: &VerifyOptions,
) -> Result<ChainReport, VerifyError> {
    let gof = gang_of_four(g, c)?;
    let ci = chain_inputs(&gof, bounds, g, c);
    let mut mi_rates = BTreeMap::new();
    for (name, x) in [("y~;e~", Channel::Y), ("u~;e~", Channel::U), ("d~;e~", Channel::D)] {
        mi_rates.insert(name.to_string(), mi_rate(run, x, Channel::E)?);
    }
    let mut records = Vec::new();
    for (kind, x, term) in [
        (IntegralKind::Complementary, Channel::Y, Extended::Finite(0.0)),
        (IntegralKind::Noise, Channel::U, plant_term(&bounds.plant_log_integral_weighted, -1.0)),
    ] {
        // weighted forward integral = unweighted integral on the inverted axis
        let mut rec = chain_record(
            &ci,
            kind,
            empirical_integral(run, kind, Weight::Unweighted),
            mi_difference(run, x, Channel::D, Channel::E),
            bounds.comp_bound,
            term,
            opts,
        )?;
        if let Some(f) = forward {
            match empirical_integral(f, kind, Weight::InvOmegaSq) {
                Ok(r) => rec.forward_empirical_integral = Some(r),
                Err(e) => rec.notes.push(format!("forward estimate unavailable: {e}")),
            }
        }
        records.push(rec);
    }
    let identities = vec![ToleranceCheck::new(
        "|I(y~;e~) - I(u~;e~)|",
        (mi_rates["y~;e~"].value - mi_rates["u~;e~"].value).abs(),
        opts.identity_tol,
    )];
    let mut runs = vec![run.summary()];
    if let Some(f) = forward {
        runs.push(f.summary());
    }
    Ok(ChainReport {
        records,
        identities,
        mi_rates,
        runs,
    })
}

pub fn check_control_noise_chain(
    g: &RationalTF,
    c: &RationalTF,
    noise: Option<&NoiseSpec>,
    plan: &SimPlan,
    opts: &VerifyOptions,
) -> Result<ChainReport, VerifyError> {
    let bounds = crate::limits::analytic_bounds(g, crate::lti::MARGIN_TOL)?;
    let run = run_loop(g, c, Injection::ControlNoise, noise, plan, 0)?;
    control_chain_from_run(g, c, &bounds, &run, opts)
}

pub fn check_measurement_noise_chain(
    g: &RationalTF,
    c: &RationalTF,
    noise: Option<&NoiseSpec>,
    plan: &SimPlan,
    opts: &VerifyOptions,
) -> Result<ChainReport, VerifyError> {
    let bounds = crate::limits::analytic_bounds(g, crate::lti::MARGIN_TOL)?;
    let run = run_loop(g, c, Injection::InverseMeasurement, noise, plan, 1)?;
    let fwd = run_loop(g, c, Injection::MeasurementNoise, noise, plan, 2)?;
    measurement_chain_from_run(g, c, &bounds, &run, Some(&fwd), opts)
}

fn curve_check(
    gof: &GangOfFour,
    kind: IntegralKind,
    run: &LoopRun,
    opts: &VerifyOptions,
) -> Result<CurveCheck, VerifyError> {
    let tf = kind.transfer(gof);
    let inverted = run.injection == Injection::InverseMeasurement;
    let reference = if inverted { tf.frequency_invert() } else { tf.clone() };
    let (n, d) = curve_channels(kind);
    let curve = sensitivity_from_spectra(&run.spectra, n, d, kind)?;
    let (lo, hi) = run.mid_band();
    let errs: Vec<f64> = curve
        .omega
        .iter()
        .zip(&curve.value)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(&w, &v)| {
            let want = reference.log_mag_jw(w).exp();
            if want == 0.0 && v == 0.0 {
                0.0
            } else {
                (v - want).abs() / want
            }
        })
        .collect();
    let med = median(errs);
    let weight = kind.weight();
    let quad = bode_quadrature(tf, weight)?;
    let want_status = expected_status(tf, weight, &quad);
    // inverse-loop curves carry the weighted integral as an unweighted one
    let emp_weight = if inverted { Weight::Unweighted } else { weight };
    let (empirical, note) = match bode_like_integral_with(&curve, emp_weight, &bode_opts(run)) {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let integral_match = empirical
        .as_ref()
        .is_some_and(|e| integrals_match(want_status, quad.value, e, opts));
    let curve_pass = med.is_finite() && med < opts.lemma_curve_tol;
    let mut samples = CurveSamples {
        omega: Vec::new(),
        reference: Vec::new(),
        estimate: Vec::new(),
        integrand: Vec::new(),
    };
    for k in thinned_indices(curve.omega.len()) {
        let (w, v) = (curve.omega[k], curve.value[k]);
        samples.omega.push(w);
        samples.reference.push(reference.log_mag_jw(w).exp());
        samples.estimate.push(v);
        samples.integrand.push(match emp_weight {
            Weight::Unweighted => v.ln(),
            Weight::InvOmegaSq => v.ln() / (w * w),
        });
    }
    Ok(CurveCheck {
        kind,
        injection: run.injection,
        median_rel_error: med,
        quadrature: quad,
        empirical,
        integral_match,
        curve_pass,
        pass: integral_match && curve_pass,
        note,
        samples,
    })
}

pub(crate) fn lemma1_from_runs(
    g: &RationalTF,
    c: &RationalTF,
    control: &LoopRun,
    inverse: Option<&LoopRun>,
    opts: &VerifyOptions,
) -> Result<Lemma1Report, VerifyError> {
    let gof = gang_of_four(g, c)?;
    let mut records = Vec::new();
    let mut runs = vec![control.summary()];
    for kind in [IntegralKind::Sensitivity, IntegralKind::LoadDisturbance] {
        records.push(curve_check(&gof, kind, control, opts)?);
    }
    if let Some(inv) = inverse {
        runs.push(inv.summary());
        for kind in [IntegralKind::Complementary, IntegralKind::Noise] {
            records.push(curve_check(&gof, kind, inv, opts)?);
        }
    }
    let pass = records.iter().all(|r| r.pass);
    Ok(Lemma1Report { records, runs, pass })
}

pub fn check_lemma1(
    g: &RationalTF,
    c: &RationalTF,
    noise: Option<&NoiseSpec>,
    plan: &SimPlan,
    opts: &VerifyOptions,
) -> Result<Lemma1Report, VerifyError> {
    let control = run_loop(g, c, Injection::ControlNoise, noise, plan, 0)?;
    let inverse = if c.is_zero() {
        None
    } else {
        Some(run_loop(g, c, Injection::InverseMeasurement, noise, plan, 1)?)
    };
    lemma1_from_runs(g, c, &control, inverse.as_ref(), opts)
}

fn rel_err(est: Complex64, want: Complex64) -> f64 {
    let d = (est - want).norm();
    if d == 0.0 {
        0.0
    } else {
        d / want.norm()
    }
}

pub(crate) fn appendix_from_spectra(
    cs: &CrossSpectra,
    mid: (f64, f64),
    g: &RationalTF,
    c: &RationalTF,
    stationarity: f64,
    opts: &VerifyOptions,
) -> Result<AppendixReport, VerifyError> {
    let l = g.mul(c);
    let (u, v, w, y) = (Channel::U, Channel::V, Channel::W, Channel::Y);
    let (puu, pvv, pww, pyy) = (cs.estimate(u, u)?, cs.estimate(v, v)?, cs.estimate(w, w)?, cs.estimate(y, y)?);
    let (puv, pvu) = (cs.estimate(u, v)?, cs.estimate(v, u)?);
    let idx: Vec<usize> = (0..cs.omega.len())
        .filter(|&k| cs.omega[k] >= mid.0 && cs.omega[k] <= mid.1)
        .collect();
    let eval = |tf: &RationalTF, w: f64| -> Result<Complex64, VerifyError> { Ok(tf.eval(Complex64::new(0.0, w))?) };
    let mut e = [Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for &k in &idx {
        let om = cs.omega[k];
        let lj = eval(&l, om)?;
        let gj = eval(g, om)?;
        let su = puu.values[k];
        e[0].push(rel_err(pww.values[k], su + puv.values[k] + pvu.values[k] + pvv.values[k]));
        e[1].push(rel_err(puv.values[k], lj.conj() * su));
        e[2].push(rel_err(pvu.values[k], lj * su));
        e[3].push(rel_err(pvv.values[k], su * lj.norm_sqr()));
        e[4].push(rel_err(pyy.values[k], su * gj.norm_sqr()));
    }
    let names = [
        "phi_w = phi_u + phi_uv + phi_vu + phi_v",
        "phi_uv = L(-jw) phi_u",
        "phi_vu = L(jw) phi_u",
        "phi_v = |L(jw)|^2 phi_u",
        "phi_y = |G(jw)|^2 phi_u",
    ];
    let stat = ToleranceCheck::new("half-record variance mismatch", stationarity, opts.stationarity_tol);
    let skipped = !stat.pass;
    let identities: Vec<ToleranceCheck> = names
        .iter()
        .zip(e)
        .map(|(n, errs)| ToleranceCheck::new(n, median(errs), opts.appendix_tol))
        .collect();
    let pass = !skipped && identities.iter().all(|c| c.pass);
    Ok(AppendixReport {
        stationarity: stat,
        identities,
        skipped,
        pass,
    })
}

/// Spectral identities of the control-noise loop, checked on a simulated bundle.
pub fn check_appendix_identities(
    bundle: &SignalBundle,
    g: &RationalTF,
    c: &RationalTF,
    opts: &VerifyOptions,
) -> Result<AppendixReport, VerifyError> {
    let chans = [Channel::U, Channel::V, Channel::W, Channel::Y];
    let cs = CrossSpectra::compute(bundle, &chans, Default::default())?;
    let mut stationarity: f64 = 0.0;
    for ch in chans {
        let (v0, v1) = (cs.half(0, ch, ch)?.variance(), cs.half(1, ch, ch)?.variance());
        if v0 > 0.0 || v1 > 0.0 {
            stationarity = stationarity.max((v0 - v1).abs() / v0.max(v1));
        }
    }
    let peak = super::plan::variant_poles(g, c, Injection::ControlNoise)?
        .iter()
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let dw = cs.omega[0];
    let mid = ((0.1 * peak).max(10.0 * dw), (10.0 * peak).min(0.25 * PI / cs.dt));
    appendix_from_spectra(&cs, mid, g, c, stationarity, opts)
}
