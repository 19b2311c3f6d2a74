use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix order accepted by [`permanent`].
pub const MAX_PERMANENT_ORDER: usize = 30;

fn check_square(m: &DMatrix<Complex64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Permanent by Ryser's inclusion–exclusion formula with Gray-code subset
/// order, O(2ⁿ n).
pub fn permanent(m: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = check_square(m)?;
    match n {
        0 => return Ok(Complex64::new(1.0, 0.0)),
        1 => return Ok(m[(0, 0)]),
        2 => return Ok(m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)]),
        _ => {}
    }
    if n > MAX_PERMANENT_ORDER {
        return Err(Error::Resource(format!(
            "permanent of order {n} exceeds the limit {MAX_PERMANENT_ORDER}"
        )));
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        let bit = 1u64 << col;
        gray ^= bit;
        if gray & bit != 0 {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s += m[(i, col)];
            }
        } else {
            for (i, s) in row_sums.iter_mut().enumerate() {
                *s -= m[(i, col)];
            }
        }
        let prod = row_sums
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &s| acc * s);
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}

/// Determinant via LU factorisation.
pub fn determinant(m: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = check_square(m)?;
    match n {
        0 => Ok(Complex64::new(1.0, 0.0)),
        1 => Ok(m[(0, 0)]),
        2 => Ok(m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]),
        _ => Ok(m.clone().lu().determinant()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_and_ones() {
        let id = DMatrix::<Complex64>::identity(3, 3);
        assert_eq!(permanent(&id).unwrap(), c(1.0));
        let ones = DMatrix::from_element(3, 3, c(1.0));
        assert!((permanent(&ones).unwrap() - c(6.0)).norm() < 1e-12);
        let ones5 = DMatrix::from_element(5, 5, c(1.0));
        assert!((permanent(&ones5).unwrap() - c(120.0)).norm() < 1e-9);
    }

    #[test]
    fn non_square_is_a_shape_error() {
        let m = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(permanent(&m), Err(Error::Shape(_))));
        assert!(matches!(determinant(&m), Err(Error::Shape(_))));
    }

    #[test]
    fn too_large_is_a_resource_error() {
        let m = DMatrix::<Complex64>::zeros(31, 31);
        assert!(matches!(permanent(&m), Err(Error::Resource(_))));
    }

    #[test]
    fn determinant_of_triangular() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c(2.0), c(1.0), c(5.0), c(0.0), c(3.0), c(1.0), c(0.0), c(0.0), c(-1.0)],
        );
        assert!((determinant(&m).unwrap() - c(-6.0)).norm() < 1e-12);
    }
}
