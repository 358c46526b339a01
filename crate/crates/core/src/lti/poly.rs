//! Real polynomials in ascending coefficient order and their roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::LtiError;

/// Real polynomial, `coeffs[k]` multiplies `s^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    /// Build from coefficients listed highest power first.
    pub fn from_descending(c: &[f64]) -> Self {
        Poly::new(c.iter().rev().copied().collect())
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `gain * prod (s - r)`. Complex roots must come in conjugate pairs.
    pub fn from_roots(roots: &[Complex64], gain: f64) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, a) in acc.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            acc = next;
        }
        Poly::new(acc.into_iter().map(|c| c.re * gain).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Sum of `|a_k| |s|^k`, the scale against which residuals are judged.
    pub fn eval_scale(&self, s: Complex64) -> f64 {
        let m = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * m + c.abs())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Poly::new(out)
    }

    pub fn scale(&self, c: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// All complex roots, conjugate-symmetric, via companion eigenvalues
    /// followed by Newton polishing.
    pub fn roots(&self) -> Result<Vec<Complex64>, LtiError> {
        if self.is_zero() {
            return Err(LtiError::ZeroPolynomial);
        }
        // roots at the origin are split off exactly
        let lead_zeros = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let reduced = Poly::new(self.coeffs[lead_zeros..].to_vec());
        let n = reduced.degree();
        let mut roots = vec![Complex64::new(0.0, 0.0); lead_zeros];
        if n == 0 {
            return Ok(roots);
        }
        let lead = reduced.leading();
        let monic: Vec<f64> = reduced.coeffs.iter().map(|c| c / lead).collect();
        let raw: Vec<Complex64> = if n == 1 {
            vec![Complex64::new(-monic[0], 0.0)]
        } else if n == 2 {
            quadratic_roots(monic[1], monic[0])
        } else {
            let mut comp = DMatrix::<f64>::zeros(n, n);
            for i in 1..n {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                comp[(i, n - 1)] = -monic[i];
            }
            let schur = nalgebra::linalg::Schur::try_new(comp, f64::EPSILON, 10_000)
                .ok_or(LtiError::EigenFailure)?;
            schur.complex_eigenvalues().iter().copied().collect()
        };
        let dp = reduced.derivative();
        let polished: Vec<Complex64> = raw.iter().map(|&r| newton_polish(&reduced, &dp, r)).collect();
        roots.extend(pair_conjugates(polished));
        Ok(roots)
    }
}

fn quadratic_roots(b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        let q = -0.5 * (b + sign * disc.sqrt());
        let r2 = if q != 0.0 { c / q } else { 0.0 };
        vec![Complex64::new(q, 0.0), Complex64::new(r2, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn newton_polish(p: &Poly, dp: &Poly, r: Complex64) -> Complex64 {
    let mut best = r;
    let mut best_res = p.eval(r).norm();
    let mut x = r;
    for _ in 0..3 {
        let d = dp.eval(x);
        if d.norm() == 0.0 {
            break;
        }
        let next = x - p.eval(x) / d;
        let res = p.eval(next).norm();
        if !res.is_finite() || res >= best_res {
            break;
        }
        best = next;
        best_res = res;
        x = next;
    }
    best
}

/// Make the root set exactly conjugate-symmetric. Near-real pairs are
/// snapped onto the real axis.
pub(crate) fn pair_conjugates(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    let snap = |r: Complex64| r.im.abs() <= 1e-7 * r.norm().max(1.0);
    let mut out = Vec::with_capacity(roots.len());
    while let Some(r) = roots.pop() {
        if r.im == 0.0 {
            out.push(r);
            continue;
        }
        // nearest remaining candidate for the conjugate partner
        let target = r.conj();
        let partner = roots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
            .map(|(i, _)| i);
        match partner {
            Some(i) => {
                let q = roots.swap_remove(i);
                let re = 0.5 * (r.re + q.re);
                let im = 0.5 * (r.im - q.im).abs();
                if snap(Complex64::new(re, im)) {
                    out.push(Complex64::new(r.re, 0.0));
                    out.push(Complex64::new(q.re, 0.0));
                } else {
                    out.push(Complex64::new(re, im));
                    out.push(Complex64::new(re, -im));
                }
            }
            None => out.push(Complex64::new(r.re, 0.0)),
        }
    }
    sort_roots(&mut out);
    out
}

/// Deterministic ordering: by real part, then imaginary part.
pub fn sort_roots(r: &mut [Complex64]) {
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
