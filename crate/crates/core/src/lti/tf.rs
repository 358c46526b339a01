use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{pair_conjugates, sort_roots, Poly};
use super::LtiError;

/// Relative residual below which a pole and a zero are treated as common.
pub const CANCEL_TOL: f64 = 1e-8;
const CONJ_TOL: f64 = 1e-9;

/// SISO rational transfer function in zero/pole/gain form,
/// `gain * prod(s - z) / prod(s - p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
    improper: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    cancelled: Vec<Complex64>,
}

impl RationalTF {
    /// Proper transfer function from zeros, poles and gain.
    pub fn zpk(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> Result<Self, LtiError> {
        let tf = Self::build(zeros, poles, gain)?;
        if tf.improper {
            return Err(LtiError::Improper {
                zeros: tf.zeros.len(),
                poles: tf.poles.len(),
            });
        }
        Ok(tf)
    }

    /// Like [`RationalTF::zpk`] but accepts more zeros than poles and sets the flag.
    pub fn zpk_improper(
        zeros: Vec<Complex64>,
        poles: Vec<Complex64>,
        gain: f64,
    ) -> Result<Self, LtiError> {
        Self::build(zeros, poles, gain)
    }

    /// From real coefficients, highest power first.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, LtiError> {
        if num.iter().chain(den).any(|c| !c.is_finite()) {
            return Err(LtiError::NonFinite);
        }
        let n = Poly::from_descending(num);
        let d = Poly::from_descending(den);
        if d.is_zero() {
            return Err(LtiError::ZeroDenominator);
        }
        if n.is_zero() {
            return Ok(Self::zero());
        }
        let gain = n.leading() / d.leading();
        Self::zpk(n.roots()?, d.roots()?, gain)
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        RationalTF {
            zeros: vec![],
            poles: vec![],
            gain: c,
            improper: false,
            cancelled: vec![],
        }
    }

    pub fn zero() -> Self {
        RationalTF {
            zeros: vec![],
            poles: vec![],
            gain: 0.0,
            improper: false,
            cancelled: vec![],
        }
    }

    fn build(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> Result<Self, LtiError> {
        if !gain.is_finite() || zeros.iter().chain(&poles).any(|r| !r.re.is_finite() || !r.im.is_finite()) {
            return Err(LtiError::NonFinite);
        }
        if gain == 0.0 {
            return Ok(Self::zero());
        }
        let zeros = symmetrize(zeros)?;
        let poles = symmetrize(poles)?;
        let (zeros, poles, cancelled) = cancel_common(zeros, poles);
        Ok(RationalTF {
            improper: zeros.len() > poles.len(),
            zeros,
            poles,
            gain,
            cancelled,
        })
    }

    pub fn zeros(&self) -> &[Complex64] {
        &self.zeros
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn is_improper(&self) -> bool {
        self.improper
    }

    pub fn is_zero(&self) -> bool {
        self.gain == 0.0
    }

    /// Pole/zero pairs removed at construction (the pole value is kept).
    pub fn cancelled(&self) -> &[Complex64] {
        &self.cancelled
    }

    /// Number of poles minus number of zeros.
    pub fn relative_degree(&self) -> i64 {
        self.poles.len() as i64 - self.zeros.len() as i64
    }

    /// Poles at the origin minus zeros at the origin (system type).
    pub fn origin_order(&self) -> i64 {
        let p = self.poles.iter().filter(|r| r.norm() == 0.0).count() as i64;
        let z = self.zeros.iter().filter(|r| r.norm() == 0.0).count() as i64;
        p - z
    }

    pub fn numerator(&self) -> Poly {
        Poly::from_roots(&self.zeros, self.gain)
    }

    pub fn denominator(&self) -> Poly {
        Poly::from_roots(&self.poles, 1.0)
    }

    /// `log|c| + sum log|z| - sum log|p|` over nonzero roots; equals `log|T(0)|`
    /// when there are no roots at the origin.
    pub fn dc_log_mag(&self) -> f64 {
        let mut acc = self.gain.abs().ln();
        for z in self.zeros.iter().filter(|r| r.norm() > 0.0) {
            acc += z.norm().ln();
        }
        for p in self.poles.iter().filter(|r| r.norm() > 0.0) {
            acc -= p.norm().ln();
        }
        acc
    }

    /// Evaluate `T(s)`; errors when `s` sits on a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64, LtiError> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        for p in &self.poles {
            let dist = (s - p).norm();
            if dist <= 1e-12 * (1.0 + p.norm()) {
                return Err(LtiError::PoleProximity { pole: *p, distance: dist });
            }
        }
        let mut log = Complex64::new(self.gain.abs().ln(), if self.gain < 0.0 { std::f64::consts::PI } else { 0.0 });
        for z in &self.zeros {
            let d = s - z;
            if d.norm() == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            log += d.ln();
        }
        for p in &self.poles {
            log -= (s - p).ln();
        }
        let v = log.exp();
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(LtiError::NonFinite);
        }
        Ok(v)
    }

    /// `log|T(j w)|`, accurate at both ends of the frequency axis.
    pub fn log_mag_jw(&self, w: f64) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let scale = self.max_root_magnitude();
        let w = w.abs();
        if w > scale && w > 0.0 {
            // expansion about infinity: log|jw - r| = log w + 0.5 log1p((|r|^2 - 2 w Im r)/w^2)
            let term = |r: &Complex64| 0.5 * ((r.norm_sqr() - 2.0 * w * r.im) / (w * w)).ln_1p();
            let mut acc = self.gain.abs().ln() - self.relative_degree() as f64 * w.ln();
            acc += self.zeros.iter().map(term).sum::<f64>();
            acc -= self.poles.iter().map(term).sum::<f64>();
            acc
        } else {
            // expansion about the origin: log|jw - r| = log|r| + 0.5 log1p((w^2 - 2 w Im r)/|r|^2)
            let term = |r: &Complex64| {
                if r.norm() == 0.0 {
                    w.ln()
                } else {
                    0.5 * ((w * w - 2.0 * w * r.im) / r.norm_sqr()).ln_1p()
                }
            };
            let mut acc = self.dc_log_mag();
            acc += self.zeros.iter().map(term).sum::<f64>();
            acc -= self.poles.iter().map(term).sum::<f64>();
            acc
        }
    }

    pub fn max_root_magnitude(&self) -> f64 {
        self.zeros
            .iter()
            .chain(&self.poles)
            .map(|r| r.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest nonzero root magnitude, if any.
    pub fn min_nonzero_root_magnitude(&self) -> Option<f64> {
        self.zeros
            .iter()
            .chain(&self.poles)
            .map(|r| r.norm())
            .filter(|&m| m > 0.0)
            .min_by(f64::total_cmp)
    }

    /// The map `s -> 1/s`: returns `T(1/s)` as a rational function of `s`.
    pub fn frequency_invert(&self) -> RationalTF {
        if self.is_zero() {
            return Self::zero();
        }
        let nonzero = |r: &&Complex64| r.norm() > 0.0;
        let mut num = Complex64::new(self.gain, 0.0);
        let mut zeros = Vec::new();
        let mut poles = Vec::new();
        for z in self.zeros.iter().filter(nonzero) {
            num *= -z;
            zeros.push(z.inv());
        }
        for p in self.poles.iter().filter(nonzero) {
            num /= -p;
            poles.push(p.inv());
        }
        let gain = num.re;
        let k = self.relative_degree();
        let origin = Complex64::new(0.0, 0.0);
        if k > 0 {
            zeros.extend(std::iter::repeat_n(origin, k as usize));
        } else {
            poles.extend(std::iter::repeat_n(origin, (-k) as usize));
        }
        Self::build(zeros, poles, gain).expect("inverting a valid transfer function")
    }

    /// `1 / T(s)`.
    pub fn reciprocal(&self) -> Result<RationalTF, LtiError> {
        if self.is_zero() {
            return Err(LtiError::ZeroTransferFunction);
        }
        Self::build(self.poles.clone(), self.zeros.clone(), 1.0 / self.gain)
    }

    pub fn mul(&self, other: &RationalTF) -> RationalTF {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let zeros = self.zeros.iter().chain(&other.zeros).copied().collect();
        let poles = self.poles.iter().chain(&other.poles).copied().collect();
        Self::build(zeros, poles, self.gain * other.gain).expect("product of valid transfer functions")
    }
}

/// Inverse of the frequency map on a plant: `1 / G(1/s)`.
pub fn inverse_plant(g: &RationalTF) -> Result<RationalTF, LtiError> {
    g.frequency_invert().reciprocal()
}

fn symmetrize(roots: Vec<Complex64>) -> Result<Vec<Complex64>, LtiError> {
    for r in &roots {
        if r.im == 0.0 {
            continue;
        }
        let tol = CONJ_TOL * r.norm().max(1.0);
        if !roots.iter().any(|q| (q - r.conj()).norm() <= tol) {
            return Err(LtiError::NotConjugateSymmetric { root: *r });
        }
    }
    let mut out = pair_conjugates(roots);
    sort_roots(&mut out);
    Ok(out)
}

/// Relative residual of `prod(s - p)` at `z`, scaled by `prod(|z| + |p|)`.
fn relative_residual(z: Complex64, poles: &[Complex64]) -> f64 {
    let mut r = 1.0;
    for p in poles {
        let scale = z.norm() + p.norm();
        if scale == 0.0 {
            return 0.0;
        }
        r *= (z - p).norm() / scale;
    }
    r
}

pub(crate) fn cancel_common(
    zeros: Vec<Complex64>,
    mut poles: Vec<Complex64>,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let mut kept = Vec::with_capacity(zeros.len());
    let mut cancelled = Vec::new();
    for z in zeros {
        if !poles.is_empty() && relative_residual(z, &poles) <= CANCEL_TOL {
            let idx = poles
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - z).norm().total_cmp(&(b.1 - z).norm()))
                .map(|(i, _)| i)
                .unwrap();
            cancelled.push(poles.remove(idx));
        } else {
            kept.push(z);
        }
    }
    (kept, poles, cancelled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coeffs_roundtrip_marginal_poles() {
        let t = RationalTF::from_coeffs(&[1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(t.poles().len(), 2);
        for p in t.poles() {
            assert!(p.re.abs() < 1e-15);
            assert_relative_eq!(p.im.abs(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cancellation_reported() {
        let t = RationalTF::zpk(vec![c(-1.0, 0.0)], vec![c(-1.0, 0.0), c(-2.0, 0.0)], 3.0).unwrap();
        assert!(t.zeros().is_empty());
        assert_eq!(t.poles(), &[c(-2.0, 0.0)]);
        assert_eq!(t.cancelled(), &[c(-1.0, 0.0)]);
    }

    #[test]
    fn rejects_asymmetric_and_improper() {
        assert!(RationalTF::zpk(vec![], vec![c(-1.0, 1.0)], 1.0).is_err());
        assert!(RationalTF::zpk(vec![c(-1.0, 0.0)], vec![], 1.0).is_err());
        assert!(RationalTF::zpk_improper(vec![c(-1.0, 0.0)], vec![], 1.0).unwrap().is_improper());
    }

    #[test]
    fn eval_and_pole_proximity() {
        let t = RationalTF::from_coeffs(&[1.0, 2.0], &[1.0, 3.0, 2.0]).unwrap();
        // (s+2)/((s+1)(s+2)) = 1/(s+1)
        assert_eq!(t.poles().len(), 1);
        let v = t.eval(c(0.0, 1.0)).unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(v.im, -0.5, epsilon = 1e-14);
        assert!(matches!(t.eval(c(-1.0, 0.0)), Err(LtiError::PoleProximity { .. })));
    }

    #[test]
    fn inverse_plant_example() {
        // G = (s-2)/(s(s+3))  ->  (1+3s)/(s(1-2s))
        let g = RationalTF::zpk(vec![c(2.0, 0.0)], vec![c(0.0, 0.0), c(-3.0, 0.0)], 1.0).unwrap();
        let gi = inverse_plant(&g).unwrap();
        let want = RationalTF::from_coeffs(&[3.0, 1.0], &[-2.0, 1.0, 0.0]).unwrap();
        for w in [0.1, 0.7, 2.0, 15.0] {
            let a = gi.eval(c(0.3, w)).unwrap();
            let b = want.eval(c(0.3, w)).unwrap();
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn frequency_invert_matches_substitution() {
        let t = RationalTF::zpk(
            vec![c(1.0, 2.0), c(1.0, -2.0), c(0.0, 0.0)],
            vec![c(-1.0, 0.0), c(-0.5, 3.0), c(-0.5, -3.0), c(0.0, 0.0), c(4.0, 0.0)],
            -2.5,
        )
        .unwrap();
        let ti = t.frequency_invert();
        for s in [c(0.2, 0.9), c(-1.3, 0.4), c(2.0, -5.0)] {
            let a = ti.eval(s).unwrap();
            let b = t.eval(s.inv()).unwrap();
            assert_relative_eq!(a.re, b.re, max_relative = 1e-12, epsilon = 1e-14);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn log_mag_both_branches_agree() {
        let t = RationalTF::zpk(vec![c(3.0, 0.0), c(-1.0, 0.0)], vec![c(-2.0, 1.0), c(-2.0, -1.0)], 1.5).unwrap();
        for w in [1e-4, 0.3, 2.0, 2.5, 40.0, 1e5] {
            let direct = t.eval(c(0.0, w)).unwrap().norm().ln();
            assert_relative_eq!(t.log_mag_jw(w), direct, epsilon = 1e-12, max_relative = 1e-10);
        }
    }
}
