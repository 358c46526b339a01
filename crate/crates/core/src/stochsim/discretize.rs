use nalgebra::{DMatrix, SymmetricEigen};

use super::SimError;
use crate::lti::StateSpace;

/// Sampled version of `dx = A x dt + B dW`, `y = C x + D w`.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub dt: f64,
    pub a_d: DMatrix<f64>,
    /// Zero-order-hold input matrix for deterministic inputs.
    pub b_zoh: DMatrix<f64>,
    /// Covariance of the noise added over one step.
    pub q_d: DMatrix<f64>,
    /// `noise_factor * noise_factor^T = q_d`, columns of zero variance dropped.
    pub noise_factor: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

fn checked_exp(m: DMatrix<f64>) -> Result<DMatrix<f64>, SimError> {
    let e = m.exp();
    if e.iter().all(|x| x.is_finite()) {
        Ok(e)
    } else {
        Err(SimError::MatrixExponential)
    }
}

/// Exact discretization with the Van Loan block exponential.
pub fn exact_discretize(ss: &StateSpace, dt: f64) -> Result<DiscreteSystem, SimError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = ss.order();
    let m = ss.n_inputs();
    if n == 0 {
        return Ok(DiscreteSystem {
            dt,
            a_d: DMatrix::zeros(0, 0),
            b_zoh: DMatrix::zeros(0, m),
            q_d: DMatrix::zeros(0, 0),
            noise_factor: DMatrix::zeros(0, 0),
            c: ss.c.clone(),
            d: ss.d.clone(),
        });
    }
    let bbt = &ss.b * ss.b.transpose();
    let mut vl = DMatrix::<f64>::zeros(2 * n, 2 * n);
    vl.view_mut((0, 0), (n, n)).copy_from(&(-&ss.a * dt));
    vl.view_mut((0, n), (n, n)).copy_from(&(&bbt * dt));
    vl.view_mut((n, n), (n, n)).copy_from(&(ss.a.transpose() * dt));
    let f = checked_exp(vl)?;
    let f22 = f.view((n, n), (n, n)).into_owned();
    let f12 = f.view((0, n), (n, n)).into_owned();
    let a_d = f22.transpose();
    let q = &a_d * f12;
    let q_d = (&q + q.transpose()) * 0.5;

    let mut zoh = DMatrix::<f64>::zeros(n + m, n + m);
    zoh.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * dt));
    zoh.view_mut((0, n), (n, m)).copy_from(&(&ss.b * dt));
    let b_zoh = checked_exp(zoh)?.view((0, n), (n, m)).into_owned();

    Ok(DiscreteSystem {
        dt,
        a_d,
        b_zoh,
        noise_factor: psd_factor(&q_d),
        q_d,
        c: ss.c.clone(),
        d: ss.d.clone(),
    })
}

/// Factor of a symmetric positive semidefinite matrix, negative eigenvalues clipped.
pub fn psd_factor(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(q.clone());
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    DMatrix::from_fn(n, cols.len(), |i, j| {
        let k = cols[j];
        eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, b: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn scalar_decay() {
        let d = exact_discretize(&scalar(-1.0, 1.0), 0.1).unwrap();
        assert_relative_eq!(d.a_d[(0, 0)], (-0.1f64).exp(), epsilon = 1e-15);
        // (1 - e^{-2 dt}) / 2
        assert_relative_eq!(d.q_d[(0, 0)], 0.5 * (1.0 - (-0.2f64).exp()), epsilon = 1e-15);
    }

    #[test]
    fn brownian_increment() {
        let d = exact_discretize(&scalar(0.0, 1.0), 0.37).unwrap();
        assert_relative_eq!(d.a_d[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.q_d[(0, 0)], 0.37, epsilon = 1e-15);
        assert_relative_eq!(d.b_zoh[(0, 0)], 0.37, epsilon = 1e-15);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.0, 0.0, -3.0]);
        let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        let ss = StateSpace::new(a, b, DMatrix::zeros(1, 3), DMatrix::zeros(1, 1)).unwrap();
        let d = exact_discretize(&ss, 0.05).unwrap();
        let l = &d.noise_factor;
        let r = l * l.transpose() - &d.q_d;
        assert!(r.amax() < 1e-15);
    }
}
