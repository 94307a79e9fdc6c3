//! Pseudo-inverse of Hermitian positive semidefinite Gram matrices.
//!
//! The matrix is first scaled to unit diagonal, so that the relative
//! truncation `lambda < rcond * lambda_max` measures linear dependence rather
//! than disparity in element norms.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PseudoInverse<T: ComplexField> {
    pub matrix: DMatrix<T>,
    pub rank: usize,
}

fn scales<T: ComplexField<RealField = f64>>(g: &DMatrix<T>) -> Vec<f64> {
    (0..g.nrows())
        .map(|i| {
            let d = g[(i, i)].clone().real();
            if d > 0.0 {
                d.sqrt()
            } else {
                1.0
            }
        })
        .collect()
}

fn equilibrated_eigen<T: ComplexField<RealField = f64>>(
    g: &DMatrix<T>,
) -> Result<(SymmetricEigen<T, nalgebra::Dyn>, Vec<f64>)> {
    let n = g.nrows();
    if n != g.ncols() {
        return Err(Error::DimMismatch {
            left: n,
            right: g.ncols(),
        });
    }
    let s = scales(g);
    let scaled = DMatrix::from_fn(n, n, |i, j| {
        let avg = (g[(i, j)].clone() + g[(j, i)].clone().conjugate()) * T::from_real(0.5);
        avg * T::from_real(1.0 / (s[i] * s[j]))
    });
    if scaled.iter().any(|z| !z.clone().modulus().is_finite()) {
        return Err(Error::InvalidArgument(
            "Gram matrix has non-finite entries".into(),
        ));
    }
    let eig = SymmetricEigen::try_new(scaled, f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::ConvergenceFailure { dim: n })?;
    Ok((eig, s))
}

fn threshold(eigenvalues: &[f64], rcond: f64) -> f64 {
    let max = eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x));
    rcond * max
}

/// Numerical rank of the unit-diagonal rescaling of `g`.
pub fn equilibrated_rank<T: ComplexField<RealField = f64>>(
    g: &DMatrix<T>,
    rcond: f64,
) -> Result<usize> {
    if g.nrows() == 0 {
        return Ok(0);
    }
    let (eig, _) = equilibrated_eigen(g)?;
    let ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let cut = threshold(&ev, rcond);
    Ok(ev.iter().filter(|&&x| x > cut && x > 0.0).count())
}

pub fn pinv_hermitian<T: ComplexField<RealField = f64>>(
    g: &DMatrix<T>,
    rcond: f64,
) -> Result<PseudoInverse<T>> {
    let n = g.nrows();
    let (eig, s) = equilibrated_eigen(g)?;
    let ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let cut = threshold(&ev, rcond);
    let v = &eig.eigenvectors;
    let mut inv = DMatrix::<T>::zeros(n, n);
    let mut rank = 0;
    for (k, &lambda) in ev.iter().enumerate() {
        if lambda <= cut || lambda <= 0.0 {
            continue;
        }
        rank += 1;
        let col = v.column(k);
        let scaled = col.map(|z| z * T::from_real(1.0 / lambda));
        inv += scaled * col.adjoint();
    }
    for i in 0..n {
        for j in 0..n {
            inv[(i, j)] *= T::from_real(1.0 / (s[i] * s[j]));
        }
    }
    Ok(PseudoInverse { matrix: inv, rank })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_full_rank() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = pinv_hermitian(&g, 1e-10).unwrap();
        assert_eq!(p.rank, 2);
        assert!((&g * &p.matrix - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn rank_deficient_satisfies_penrose_identity() {
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 4.0]);
        let p = pinv_hermitian(&g, 1e-10).unwrap();
        assert_eq!(p.rank, 2);
        assert!((&g * &p.matrix * &g - &g).amax() < 1e-13);
    }

    #[test]
    fn rank_ignores_scale() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-20]);
        assert_eq!(equilibrated_rank(&g, 1e-10).unwrap(), 2);
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(equilibrated_rank(&z, 1e-10).unwrap(), 0);
    }
}
