use nalgebra::DMatrix;

use super::SimError;
use crate::lti::{is_mean_square_stable, StateSpace};

/// Solve `A P + P A^T + B B^T = 0` for a Hurwitz `A`.
pub fn stationary_covariance(ss: &StateSpace) -> Result<DMatrix<f64>, SimError> {
    let n = ss.order();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !is_mean_square_stable(ss, 0.0)? {
        return Err(SimError::NotHurwitz);
    }
    // (I kron A + A kron I) vec(P) = -vec(B B^T), column-major vec
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(&ss.a) + ss.a.kronecker(&eye);
    let q = &ss.b * ss.b.transpose();
    let rhs = DMatrix::from_iterator(n * n, 1, q.iter().map(|x| -x));
    let sol = k.lu().solve(&rhs).ok_or(SimError::Singular)?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Output covariance `C P C^T`.
pub fn output_covariance(ss: &StateSpace, p: &DMatrix<f64>) -> DMatrix<f64> {
    &ss.c * p * ss.c.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_ou() {
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 2f64.sqrt()),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert_relative_eq!(stationary_covariance(&ss).unwrap()[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn block_structure_preserved() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, -2.0, 1.0, 0.0, -1.0, -2.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.5]);
        let ss = StateSpace::new(a, b, DMatrix::zeros(1, 3), DMatrix::zeros(1, 2)).unwrap();
        let p = stationary_covariance(&ss).unwrap();
        assert_eq!(p[(0, 1)], 0.0);
        assert_eq!(p[(0, 2)], 0.0);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_unstable() {
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(stationary_covariance(&ss), Err(SimError::NotHurwitz)));
    }
}
