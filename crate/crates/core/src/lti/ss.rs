use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::{LtiError, RationalTF};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self, LtiError> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(StateSpace { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// `C (sI - A)^{-1} B + D`.
    pub fn transfer(&self, s: Complex64) -> Result<DMatrix<Complex64>, LtiError> {
        let n = self.order();
        let dc = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(dc);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let b = self.b.map(|x| Complex64::new(x, 0.0));
        let x = m.lu().solve(&b).ok_or(LtiError::Singular)?;
        let c = self.c.map(|x| Complex64::new(x, 0.0));
        Ok(c * x + dc)
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>, LtiError> {
        if self.order() == 0 {
            return Ok(vec![]);
        }
        let schur = nalgebra::linalg::Schur::try_new(self.a.clone(), f64::EPSILON, 10_000)
            .ok_or(LtiError::EigenFailure)?;
        Ok(schur.complex_eigenvalues().iter().copied().collect())
    }
}

/// Controllable canonical realization of a proper transfer function.
pub fn realize(tf: &RationalTF) -> Result<StateSpace, LtiError> {
    if tf.is_improper() {
        return Err(LtiError::Improper {
            zeros: tf.zeros().len(),
            poles: tf.poles().len(),
        });
    }
    let n = tf.poles().len();
    let num = tf.numerator();
    let den = tf.denominator();
    let d0 = if tf.relative_degree() == 0 { tf.gain() } else { 0.0 };
    if n == 0 {
        return StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(1, 0),
            DMatrix::from_element(1, 1, d0),
        );
    }
    // strictly proper remainder num - d0 * den
    let rem = num.add(&den.scale(-d0));
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den.coeffs[j];
    }
    let mut b = DMatrix::<f64>::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let c = DMatrix::<f64>::from_fn(1, n, |_, j| *rem.coeffs.get(j).unwrap_or(&0.0));
    StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d0))
}

/// True when every eigenvalue of `A` has real part below `-tol`.
pub fn is_mean_square_stable(ss: &StateSpace, tol: f64) -> Result<bool, LtiError> {
    Ok(ss.eigenvalues()?.iter().all(|l| l.re < -tol))
}
