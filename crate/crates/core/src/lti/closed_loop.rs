use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ss::{is_mean_square_stable, realize, StateSpace};
use super::tf::inverse_plant;
use super::{LtiError, RationalTF};

/// Where the exogenous noise enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// `u = w - v`, `y = G u`, `v = C y`.
    ControlNoise,
    /// `e = d - y`, `u = C e`, `y = G u`.
    MeasurementNoise,
    /// The measurement chain on the inverted frequency axis:
    /// `y = d - e`, `u = G~^{-1} y`, `e = C~^{-1} u`.
    InverseMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    U,
    V,
    W,
    Y,
    D,
    E,
}

impl Channel {
    pub const ALL: [Channel; 6] = [Channel::U, Channel::V, Channel::W, Channel::Y, Channel::D, Channel::E];

    pub fn name(self) -> &'static str {
        match self {
            Channel::U => "u",
            Channel::V => "v",
            Channel::W => "w",
            Channel::Y => "y",
            Channel::D => "d",
            Channel::E => "e",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Closed-loop realization driven by unit-intensity white noise through the shaping filter.
#[derive(Debug, Clone, Serialize)]
pub struct LoopRealization {
    pub system: StateSpace,
    pub outputs: Vec<Channel>,
    pub injection: Injection,
    pub stable: bool,
}

impl LoopRealization {
    pub fn output_index(&self, ch: Channel) -> Option<usize> {
        self.outputs.iter().position(|&c| c == ch)
    }
}

/// Realize the loop with the noise produced by `shape` driven by unit white noise.
///
/// Output order is `(u, v, w, y)` for control noise and `(e, y, d, u)` for
/// both measurement variants. In the inverse variant the channels live on
/// the inverted frequency axis.
pub fn closed_loop_system(
    g: &RationalTF,
    c: &RationalTF,
    injection: Injection,
    shape: &RationalTF,
) -> Result<LoopRealization, LtiError> {
    if shape.is_zero() || shape.relative_degree() < 1 {
        return Err(LtiError::NoiseShape(
            "noise shaping filter must be nonzero and strictly proper".into(),
        ));
    }
    if shape.poles().iter().any(|p| p.re >= 0.0) {
        return Err(LtiError::NoiseShape("noise shaping filter must be stable".into()));
    }
    let n = realize(shape)?;
    let (first, second, reorder): (StateSpace, StateSpace, [usize; 4]) = match injection {
        // chain rows come out as (a, c, n, b)
        Injection::ControlNoise => (realize(g)?, realize(c)?, [0, 1, 2, 3]),
        Injection::MeasurementNoise => (realize(c)?, realize(g)?, [0, 1, 2, 3]),
        Injection::InverseMeasurement => {
            let gi = inverse_plant(g).map_err(|_| LtiError::Unrealizable("plant is identically zero".into()))?;
            let ci = inverse_plant(c).map_err(|_| {
                LtiError::Unrealizable("controller is identically zero, inverse loop undefined".into())
            })?;
            if gi.is_improper() || ci.is_improper() {
                return Err(LtiError::Unrealizable(
                    "inverse loop needs as many origin poles as origin zeros in G and C".into(),
                ));
            }
            (realize(&gi)?, realize(&ci)?, [1, 0, 2, 3])
        }
    };
    let chain = feedback_chain(&first, &second, &n)?;
    let rows: Vec<usize> = reorder.to_vec();
    let c_out = DMatrix::from_fn(4, chain.order(), |i, j| chain.c[(rows[i], j)]);
    let system = StateSpace::new(chain.a, chain.b, c_out, DMatrix::zeros(4, 1))?;
    let outputs = match injection {
        Injection::ControlNoise => vec![Channel::U, Channel::V, Channel::W, Channel::Y],
        _ => vec![Channel::E, Channel::Y, Channel::D, Channel::U],
    };
    let stable = is_mean_square_stable(&system, 1e-9)?;
    Ok(LoopRealization {
        system,
        outputs,
        injection,
        stable,
    })
}

/// `a = n - c`, `b = first(a)`, `c = second(b)`, `n = shape(white)`.
/// Output rows are `(a, c, n, b)`.
fn feedback_chain(first: &StateSpace, second: &StateSpace, shape: &StateSpace) -> Result<StateSpace, LtiError> {
    let (nn, n1, n2) = (shape.order(), first.order(), second.order());
    let total = nn + n1 + n2;
    let d1 = first.d[(0, 0)];
    let d2 = second.d[(0, 0)];
    let den = 1.0 + d1 * d2;
    if den.abs() <= 1e-12 {
        return Err(LtiError::IllPosedLoop);
    }
    let kappa = 1.0 / den;
    let (o1, o2) = (nn, nn + n1);

    let mut ra = DMatrix::<f64>::zeros(1, total);
    for j in 0..nn {
        ra[(0, j)] = kappa * shape.c[(0, j)];
    }
    for j in 0..n1 {
        ra[(0, o1 + j)] = -kappa * d2 * first.c[(0, j)];
    }
    for j in 0..n2 {
        ra[(0, o2 + j)] = -kappa * second.c[(0, j)];
    }
    let mut rb = &ra * d1;
    for j in 0..n1 {
        rb[(0, o1 + j)] += first.c[(0, j)];
    }
    let mut rc = &rb * d2;
    for j in 0..n2 {
        rc[(0, o2 + j)] += second.c[(0, j)];
    }
    let mut rn = DMatrix::<f64>::zeros(1, total);
    for j in 0..nn {
        rn[(0, j)] = shape.c[(0, j)];
    }

    let mut a = DMatrix::<f64>::zeros(total, total);
    a.view_mut((0, 0), (nn, nn)).copy_from(&shape.a);
    a.view_mut((o1, o1), (n1, n1)).copy_from(&first.a);
    a.view_mut((o2, o2), (n2, n2)).copy_from(&second.a);
    for i in 0..n1 {
        for j in 0..total {
            a[(o1 + i, j)] += first.b[(i, 0)] * ra[(0, j)];
        }
    }
    for i in 0..n2 {
        for j in 0..total {
            a[(o2 + i, j)] += second.b[(i, 0)] * rb[(0, j)];
        }
    }
    let mut b = DMatrix::<f64>::zeros(total, 1);
    for i in 0..nn {
        b[(i, 0)] = shape.b[(i, 0)];
    }
    let mut c = DMatrix::<f64>::zeros(4, total);
    c.row_mut(0).copy_from(&ra.row(0));
    c.row_mut(1).copy_from(&rc.row(0));
    c.row_mut(2).copy_from(&rn.row(0));
    c.row_mut(3).copy_from(&rb.row(0));
    StateSpace::new(a, b, c, DMatrix::zeros(4, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::gang_of_four;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn ou() -> RationalTF {
        RationalTF::zpk(vec![], vec![r(-1.4)], 1.0).unwrap()
    }

    // channel transfer from the white input, divided by the shaping filter
    fn channel_tf(lr: &LoopRealization, ch: Channel, s: Complex64, shape: &RationalTF) -> Complex64 {
        let h = lr.system.transfer(s).unwrap();
        h[(lr.output_index(ch).unwrap(), 0)] / shape.eval(s).unwrap()
    }

    #[test]
    fn control_loop_matches_gang() {
        let g = RationalTF::zpk(vec![r(2.0)], vec![r(1.0), r(-3.0)], -1.5).unwrap();
        let c = RationalTF::zpk(vec![r(-0.5)], vec![r(-4.0)], 2.0).unwrap();
        let gof = gang_of_four(&g, &c).unwrap();
        let lr = closed_loop_system(&g, &c, Injection::ControlNoise, &ou()).unwrap();
        for s in [Complex64::new(0.0, 0.7), Complex64::new(0.5, 3.0)] {
            let u = channel_tf(&lr, Channel::U, s, &ou());
            let y = channel_tf(&lr, Channel::Y, s, &ou());
            let w = channel_tf(&lr, Channel::W, s, &ou());
            let v = channel_tf(&lr, Channel::V, s, &ou());
            let tu = gof.t_uw.eval(s).unwrap();
            let ty = gof.t_yw.eval(s).unwrap();
            assert_relative_eq!((u - tu).norm(), 0.0, epsilon = 1e-11);
            assert_relative_eq!((y - ty).norm(), 0.0, epsilon = 1e-11);
            assert_relative_eq!((w - 1.0).norm(), 0.0, epsilon = 1e-11);
            assert_relative_eq!((u + v - w).norm(), 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn measurement_loop_matches_gang() {
        let g = RationalTF::zpk(vec![], vec![r(1.0)], 1.0).unwrap();
        let c = RationalTF::zpk(vec![], vec![r(-2.0)], 4.0).unwrap();
        let gof = gang_of_four(&g, &c).unwrap();
        let lr = closed_loop_system(&g, &c, Injection::MeasurementNoise, &ou()).unwrap();
        assert!(lr.stable);
        let s = Complex64::new(0.1, 1.3);
        let y = channel_tf(&lr, Channel::Y, s, &ou());
        let u = channel_tf(&lr, Channel::U, s, &ou());
        assert_relative_eq!((y - gof.t_yd.eval(s).unwrap()).norm(), 0.0, epsilon = 1e-11);
        assert_relative_eq!((u - gof.t_ud.eval(s).unwrap()).norm(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn inverse_loop_is_frequency_inverted() {
        // biproper NMP type-2 plant with a static controller
        let g = RationalTF::zpk(vec![r(2.0), r(-1.0)], vec![r(0.0), r(0.0)], -1.0).unwrap();
        let c = RationalTF::constant(0.5);
        let gof = gang_of_four(&g, &c).unwrap();
        let lr = closed_loop_system(&g, &c, Injection::InverseMeasurement, &ou()).unwrap();
        assert!(lr.stable);
        let s = Complex64::new(0.2, 0.8);
        let y = channel_tf(&lr, Channel::Y, s, &ou());
        let u = channel_tf(&lr, Channel::U, s, &ou());
        let want_y = gof.t_yd.eval(s.inv()).unwrap();
        let want_u = gof.t_ud.eval(s.inv()).unwrap();
        assert_relative_eq!((y - want_y).norm(), 0.0, epsilon = 1e-11);
        assert_relative_eq!((u - want_u).norm(), 0.0, epsilon = 1e-11);
    }

    #[test]
    fn shape_must_be_strictly_proper() {
        let g = RationalTF::zpk(vec![], vec![r(-1.0)], 1.0).unwrap();
        let shape = RationalTF::constant(1.0);
        assert!(closed_loop_system(&g, &RationalTF::constant(1.0), Injection::ControlNoise, &shape).is_err());
    }
}
