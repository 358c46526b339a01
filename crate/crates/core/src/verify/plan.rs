use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::lti::{gang_of_four, Channel, Injection, LoopRealization, RationalTF};
use crate::spectral::{CrossSpectra, WelchOptions};
use crate::stochsim::{simulate, NoiseSpec, SimParams};

/// Step as a fraction of the inverse of the fastest closed-loop mode.
pub const DT_FACTOR: f64 = 0.022;
pub const DEFAULT_SAMPLES: usize = 2_000_000;

/// How each loop is simulated; unset fields are derived from the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub dt: Option<f64>,
    /// Step used when `dt` is unset, times the inverse of the fastest mode.
    pub dt_factor: f64,
    pub duration: Option<f64>,
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub nperseg: Option<usize>,
}

impl Default for SimPlan {
    fn default() -> Self {
        SimPlan {
            dt: None,
            dt_factor: DT_FACTOR,
            duration: None,
            n_samples: DEFAULT_SAMPLES,
            trials: 1,
            seed: 0,
            nperseg: None,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one simulation, derived from the master seed and its position in the run.
pub fn derive_seed(master: u64, stream: u64, trial: u64) -> u64 {
    splitmix(splitmix(master ^ splitmix(stream)) ^ trial)
}

impl SimPlan {
    pub fn params_for(&self, omega_peak: f64, stream: u64, trial: usize) -> Result<SimParams, VerifyError> {
        if self.trials == 0 {
            return Err(VerifyError::Config("trials must be at least 1".into()));
        }
        let dt = self.dt.unwrap_or(self.dt_factor / omega_peak);
        let duration = self.duration.unwrap_or(self.n_samples as f64 * dt);
        Ok(SimParams {
            dt,
            duration,
            seed: derive_seed(self.seed, stream, trial as u64),
        })
    }
}

/// Spectral matrix pooled over the trials of one loop variant.
#[derive(Debug, Clone)]
pub struct LoopRun {
    pub injection: Injection,
    pub realization: LoopRealization,
    pub spectra: CrossSpectra,
    pub dt: f64,
    pub duration: f64,
    pub omega_peak: f64,
    pub seeds: Vec<u64>,
    /// Largest relative difference between half-record variances over the channels.
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub injection: Injection,
    pub dt: f64,
    pub duration: f64,
    pub trials: usize,
    pub nperseg: usize,
    pub segments: usize,
    pub omega_peak: f64,
    pub seeds: Vec<u64>,
    pub stationarity: f64,
}

impl LoopRun {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            injection: self.injection,
            dt: self.dt,
            duration: self.duration,
            trials: self.seeds.len(),
            nperseg: self.spectra.nperseg,
            segments: self.spectra.segments(),
            omega_peak: self.omega_peak,
            seeds: self.seeds.clone(),
            stationarity: self.stationarity,
        }
    }

    /// Band for the rate integrals: `[2pi/(duration/10), 0.8 pi/dt]`.
    pub fn mi_band(&self) -> (f64, f64) {
        (2.0 * PI / (self.duration / 10.0), 0.8 * PI / self.dt)
    }

    /// Pointwise comparison band around the loop bandwidth.
    pub fn mid_band(&self) -> (f64, f64) {
        let dw = self.spectra.omega[0];
        let nyq = PI / self.dt;
        ((0.1 * self.omega_peak).max(10.0 * dw), (10.0 * self.omega_peak).min(0.25 * nyq))
    }
}

/// Closed-loop poles of the variant, on its own frequency axis.
pub fn variant_poles(g: &RationalTF, c: &RationalTF, injection: Injection) -> Result<Vec<Complex64>, VerifyError> {
    let poles = gang_of_four(g, c)?.closed_loop_poles;
    Ok(match injection {
        Injection::InverseMeasurement => poles.iter().filter(|p| p.norm() > 0.0).map(|p| p.inv()).collect(),
        _ => poles,
    })
}

/// Stable realization of one loop variant and its fastest mode magnitude.
pub fn prepare_loop(
    g: &RationalTF,
    c: &RationalTF,
    injection: Injection,
    noise: Option<&NoiseSpec>,
) -> Result<(LoopRealization, f64), VerifyError> {
    let noise = match noise {
        Some(n) => n.clone(),
        None => NoiseSpec::default_for_poles(&variant_poles(g, c, injection)?)?,
    };
    let realization = noise.loop_realization(g, c, injection)?;
    if !realization.stable {
        return Err(VerifyError::Unstable(format!("{injection:?} loop is not mean-square stable")));
    }
    let omega_peak = realization
        .system
        .eigenvalues()?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    Ok((realization, omega_peak))
}

pub fn run_loop(
    g: &RationalTF,
    c: &RationalTF,
    injection: Injection,
    noise: Option<&NoiseSpec>,
    plan: &SimPlan,
    stream: u64,
) -> Result<LoopRun, VerifyError> {
    let (realization, omega_peak) = prepare_loop(g, c, injection, noise)?;
    let chans: Vec<Channel> = realization.outputs.clone();
    let mut spectra: Option<CrossSpectra> = None;
    let mut seeds = Vec::new();
    let mut params = None;
    for t in 0..plan.trials.max(1) {
        let p = plan.params_for(omega_peak, stream, t)?;
        let bundle = simulate(&realization, &p)?;
        let cs = CrossSpectra::compute(
            &bundle,
            &chans,
            WelchOptions {
                nperseg: plan.nperseg,
                overlap: 0.5,
            },
        )?;
        match spectra.as_mut() {
            None => spectra = Some(cs),
            Some(acc) => acc.merge(&cs)?,
        }
        seeds.push(p.seed);
        params = Some(p);
    }
    let spectra = spectra.expect("at least one trial");
    let p = params.expect("at least one trial");
    let mut stationarity: f64 = 0.0;
    for &ch in &chans {
        let v0 = spectra.half(0, ch, ch)?.variance();
        let v1 = spectra.half(1, ch, ch)?.variance();
        if v0 > 0.0 || v1 > 0.0 {
            stationarity = stationarity.max((v0 - v1).abs() / v0.max(v1));
        }
    }
    Ok(LoopRun {
        injection,
        realization,
        spectra,
        dt: p.dt,
        duration: p.duration,
        omega_peak,
        seeds,
        stationarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(1, 0, 0);
        assert_eq!(a, derive_seed(1, 0, 0));
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
    }

    #[test]
    fn auto_step_tracks_bandwidth() {
        let p = SimPlan::default().params_for(10.0, 0, 0).unwrap();
        assert!((p.dt - 0.0022).abs() < 1e-15);
        assert_eq!(p.n_samples(), DEFAULT_SAMPLES);
        let bad = SimPlan {
            trials: 0,
            ..Default::default()
        };
        assert!(bad.params_for(1.0, 0, 0).is_err());
    }
}
