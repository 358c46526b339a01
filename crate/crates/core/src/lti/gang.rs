use num_complex::Complex64;
use serde::Serialize;

use super::poly::Poly;
use super::tf::cancel_common;
use super::{LtiError, RationalTF};

/// The four closed-loop maps of the loop `u = w - C(y + d)`, `y = G u`.
#[derive(Debug, Clone, Serialize)]
pub struct GangOfFour {
    /// `1/(1+L)`, from w to u.
    pub t_uw: RationalTF,
    /// `G/(1+L)`, from w to y.
    pub t_yw: RationalTF,
    /// `C/(1+L)`, from d to u (sign dropped).
    pub t_ud: RationalTF,
    /// `L/(1+L)`, from d to y (sign dropped).
    pub t_yd: RationalTF,
    /// Roots of `den(G) den(C) + num(G) num(C)`.
    pub closed_loop_poles: Vec<Complex64>,
    /// Closed-loop poles cancelled in at least one of the four maps.
    pub cancellations: Vec<Complex64>,
    pub unstable_cancellation: bool,
}

pub fn loop_gain(g: &RationalTF, c: &RationalTF) -> RationalTF {
    g.mul(c)
}

pub fn characteristic_polynomial(g: &RationalTF, c: &RationalTF) -> Poly {
    g.denominator()
        .mul(&c.denominator())
        .add(&g.numerator().mul(&c.numerator()))
}

pub fn gang_of_four(g: &RationalTF, c: &RationalTF) -> Result<GangOfFour, LtiError> {
    if g.is_improper() || c.is_improper() {
        return Err(LtiError::Improper {
            zeros: g.zeros().len().max(c.zeros().len()),
            poles: g.poles().len().min(c.poles().len()),
        });
    }
    if g.is_zero() {
        return Err(LtiError::ZeroTransferFunction);
    }
    let order = g.poles().len() + c.poles().len();
    // well-posedness: 1 + L(inf) must not vanish
    if !c.is_zero() && g.relative_degree() == 0 && c.relative_degree() == 0 {
        let lim = 1.0 + g.gain() * c.gain();
        if lim.abs() <= 1e-12 {
            return Err(LtiError::IllPosedLoop);
        }
    }
    let p = characteristic_polynomial(g, c);
    if p.degree() != order {
        return Err(LtiError::IllPosedLoop);
    }
    let cl = p.roots()?;
    let lead = p.leading();

    let mut cancellations: Vec<Complex64> = Vec::new();
    let mut make = |zeros: Vec<Complex64>, gain: f64| -> Result<RationalTF, LtiError> {
        if gain == 0.0 {
            return Ok(RationalTF::zero());
        }
        let (z, poles, gone) = cancel_common(zeros, cl.clone());
        for q in gone {
            if !cancellations.iter().any(|x| (x - q).norm() <= 1e-9 * q.norm().max(1.0)) {
                cancellations.push(q);
            }
        }
        RationalTF::zpk(z, poles, gain)
    };
    let cat = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> { a.iter().chain(b).copied().collect() };

    let t_uw = make(cat(g.poles(), c.poles()), 1.0 / lead)?;
    let t_yw = make(cat(g.zeros(), c.poles()), g.gain() / lead)?;
    let t_ud = make(cat(g.poles(), c.zeros()), c.gain() / lead)?;
    let t_yd = make(cat(g.zeros(), c.zeros()), g.gain() * c.gain() / lead)?;
    let unstable_cancellation = cancellations.iter().any(|q| q.re >= -1e-9);
    Ok(GangOfFour {
        t_uw,
        t_yw,
        t_ud,
        t_yd,
        closed_loop_poles: cl,
        cancellations,
        unstable_cancellation,
    })
}
