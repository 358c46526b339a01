use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{
    appendix_from_spectra, control_chain_from_run, lemma1_from_runs, measurement_chain_from_run, worst,
    AppendixReport, ChainRecord, Lemma1Report, MiSummary, ToleranceCheck,
};
use super::plan::{run_loop, RunSummary, SimPlan};
use super::{Defaults, VerifyOptions};
use crate::limits::{analytic_bounds, corollary3_report, Corollary3Report, Verdict, Weight};
use crate::lti::{Injection, RationalTF, MARGIN_TOL};
use crate::stochsim::NoiseSpec;

/// A plant/controller pair to check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    pub plant: RationalTF,
    pub controller: RationalTF,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub system_id: String,
    pub verdict: Verdict,
    pub analytic: Option<Corollary3Report>,
    pub records: Vec<ChainRecord>,
    pub identities: Vec<ToleranceCheck>,
    pub mi_rates: std::collections::BTreeMap<String, MiSummary>,
    pub lemma1: Option<Lemma1Report>,
    pub appendix: Option<AppendixReport>,
    pub simulation: Vec<RunSummary>,
    pub notes: Vec<String>,
    /// Set when quadrature or a linear-algebra solver failed.
    pub numeric_failure: bool,
    pub defaults: Defaults,
}

impl LimitReport {
    fn empty(id: &str, opts: &VerifyOptions, plan: &SimPlan) -> Self {
        LimitReport {
            system_id: id.into(),
            verdict: Verdict::Holds,
            analytic: None,
            records: Vec::new(),
            identities: Vec::new(),
            mi_rates: Default::default(),
            lemma1: None,
            appendix: None,
            simulation: Vec::new(),
            notes: Vec::new(),
            numeric_failure: false,
            defaults: Defaults::from_options(opts, plan),
        }
    }

    pub fn has_violation(&self) -> bool {
        self.verdict == Verdict::Violated
    }

    /// Drop the records of integrals whose weight is not listed.
    pub fn retain_weights(&mut self, weights: &[Weight]) {
        self.records.retain(|r| weights.contains(&r.kind.weight()));
        if let Some(l) = self.lemma1.as_mut() {
            l.records.retain(|r| weights.contains(&r.kind.weight()));
            l.pass = l.records.iter().all(|r| r.pass);
        }
        if let Some(a) = self.analytic.as_mut() {
            a.records.retain(|r| weights.contains(&r.kind.weight()));
        }
        self.verdict = report_verdict(&self.records);
    }
}

fn r(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Four reference loops: an unstable pole at equality, a type-2 loop with a
/// right half-plane zero, a stable minimum-phase loop, and a loop with both.
pub fn bundled_systems() -> Vec<SystemSpec> {
    let zpk = |z: Vec<Complex64>, p: Vec<Complex64>, k: f64| RationalTF::zpk(z, p, k).expect("valid bundled system");
    vec![
        SystemSpec {
            id: "unstable_pole".into(),
            plant: zpk(vec![], vec![r(1.0)], 1.0),
            controller: zpk(vec![], vec![r(-2.0)], 4.0),
            noise: None,
        },
        SystemSpec {
            id: "nmp_type2".into(),
            plant: zpk(vec![r(2.0), r(-1.0)], vec![r(0.0), r(0.0)], -1.0),
            controller: RationalTF::constant(0.5),
            noise: None,
        },
        SystemSpec {
            id: "minimum_phase".into(),
            plant: zpk(vec![r(-2.0), r(-3.0)], vec![r(-1.0), r(-6.0)], 1.0),
            controller: zpk(vec![r(-30.0), r(-4.0)], vec![r(0.0), r(0.0), r(-12.0), r(-12.0)], 30.0),
            noise: None,
        },
        SystemSpec {
            id: "mixed".into(),
            plant: zpk(vec![r(10.0), r(-2.0)], vec![r(1.0), r(-20.0)], 1.0),
            controller: zpk(vec![r(-50.0)], vec![r(-20.0), r(-20.0), r(-3.0)], -50.0),
            noise: None,
        },
    ]
}

/// Every checker on one system. Failures become notes and skipped verdicts.
pub fn analyze_system(sys: &SystemSpec, index: u64, plan: &SimPlan, opts: &VerifyOptions) -> LimitReport {
    let mut rep = LimitReport::empty(&sys.id, opts, plan);
    let (g, c) = (&sys.plant, &sys.controller);
    let analytic = match corollary3_report(g, c, opts.slack_coeff) {
        Ok(a) => a,
        Err(e) => {
            rep.numeric_failure = e.is_numeric();
            rep.notes.push(format!("analysis skipped: {e}"));
            rep.verdict = Verdict::SkippedPrecondition;
            return rep;
        }
    };
    rep.analytic = Some(analytic);
    let bounds = match analytic_bounds(g, MARGIN_TOL) {
        Ok(b) => b,
        Err(e) => {
            rep.numeric_failure = e.is_numeric();
            rep.notes.push(format!("bounds unavailable: {e}"));
            rep.verdict = Verdict::SkippedPrecondition;
            return rep;
        }
    };
    let noise = sys.noise.as_ref();
    let stream = |k: u64| index * 16 + k;
    let control = run_loop(g, c, Injection::ControlNoise, noise, plan, stream(0));
    let inverse = run_loop(g, c, Injection::InverseMeasurement, noise, plan, stream(1));
    let forward = run_loop(g, c, Injection::MeasurementNoise, noise, plan, stream(2));

    match &control {
        Ok(run) => {
            match control_chain_from_run(g, c, &bounds, run, opts) {
                Ok(ch) => {
                    rep.records.extend(ch.records);
                    rep.identities.extend(ch.identities);
                    rep.mi_rates.extend(ch.mi_rates);
                }
                Err(e) => rep.notes.push(format!("control-noise chain failed: {e}")),
            }
            match appendix_from_spectra(&run.spectra, run.mid_band(), g, c, run.stationarity, opts) {
                Ok(a) => rep.appendix = Some(a),
                Err(e) => rep.notes.push(format!("appendix identities failed: {e}")),
            }
            rep.simulation.push(run.summary());
        }
        Err(e) => rep.notes.push(format!("control-noise loop not simulated: {e}")),
    }
    match &inverse {
        Ok(run) => {
            match measurement_chain_from_run(g, c, &bounds, run, forward.as_ref().ok(), opts) {
                Ok(ch) => {
                    rep.records.extend(ch.records);
                    rep.identities.extend(ch.identities);
                    rep.mi_rates.extend(ch.mi_rates);
                }
                Err(e) => rep.notes.push(format!("measurement chain failed: {e}")),
            }
            rep.simulation.push(run.summary());
        }
        Err(e) => rep.notes.push(format!("inverse measurement loop not simulated: {e}")),
    }
    match &forward {
        Ok(run) => rep.simulation.push(run.summary()),
        Err(e) => rep.notes.push(format!("forward measurement loop not simulated: {e}")),
    }
    if let Ok(ctrl) = &control {
        match lemma1_from_runs(g, c, ctrl, inverse.as_ref().ok(), opts) {
            Ok(l) => rep.lemma1 = Some(l),
            Err(e) => rep.notes.push(format!("transfer-function comparison failed: {e}")),
        }
    }
    rep.verdict = report_verdict(&rep.records);
    rep
}

/// Worst verdict over the records that were judged; skipped only when all were.
fn report_verdict(records: &[ChainRecord]) -> Verdict {
    let judged: Vec<Verdict> = records
        .iter()
        .map(|r| r.verdict)
        .filter(|v| !matches!(v, Verdict::SkippedDivergent | Verdict::SkippedPrecondition))
        .collect();
    if judged.is_empty() {
        worst(records.iter().map(|r| r.verdict).chain([Verdict::SkippedPrecondition]))
    } else {
        worst(judged)
    }
}

pub fn run_full_suite(systems: &[SystemSpec], plan: &SimPlan, opts: &VerifyOptions) -> Vec<LimitReport> {
    systems
        .par_iter()
        .enumerate()
        .map(|(i, s)| analyze_system(s, i as u64, plan, opts))
        .collect()
}

pub fn suite_verdict(reports: &[LimitReport]) -> Verdict {
    if reports.iter().any(LimitReport::has_violation) {
        Verdict::Violated
    } else {
        Verdict::Holds
    }
}
