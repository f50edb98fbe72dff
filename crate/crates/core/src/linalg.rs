//! Dense linear-algebra helpers shared across the crate: matrix exponential,
//! Lyapunov solves, SPD square roots, spectral quantities, subspace tools.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Matrix exponential by diagonal Pade approximation with scaling and squaring.
///
/// Uses the order-6 diagonal approximant with the input scaled so its
/// infinity norm is below 0.25; accurate to well under 1e-12 relative error
/// for the modestly sized, modestly conditioned matrices used here.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }

    // Infinity norm = max absolute row sum.
    let norm = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);

    let theta = 0.25;
    let s = if norm > theta {
        (norm / theta).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s as i32);

    // p(x)/p(-x) with p the [6/6] Pade numerator.
    const B: [f64; 7] = [
        1.0,
        1.0 / 2.0,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    // Odd part: A (b1 I + b3 A^2 + b5 A^4); even part: b0 I + b2 A^2 + b4 A^4 + b6 A^6.
    let u = &scaled * (&id * B[1] + &a2 * B[3] + &a4 * B[5]);
    let v = &id * B[0] + &a2 * B[2] + &a4 * B[4] + &a6 * B[6];

    let num = &v + &u;
    let den = &v - &u;
    let mut result = den
        .full_piv_lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for a scaled input");

    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Solves the continuous Lyapunov equation `A^T P + P A + Q = 0`.
///
/// Vectorizes to a Kronecker linear system; fails if the spectrum of A makes
/// the equation singular (eigenvalue pair summing to zero). The result is
/// symmetrized before returning.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::InvalidInput(
            "lyapunov solve needs square A and Q of equal size".into(),
        ));
    }
    let id = DMatrix::<f64>::identity(n, n);
    // vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P).
    let at = a.transpose();
    let coeff = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
    let lu = coeff.full_piv_lu();
    let vec_p = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("lyapunov system is singular".into()))?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + &p.transpose()) * 0.5;

    let residual = (&at * &p + &p * a + q).norm();
    let scale = q.norm().max(1.0);
    if !residual.is_finite() || residual > 1e-8 * scale {
        return Err(Error::Numerical(format!(
            "lyapunov residual {residual:.3e} too large"
        )));
    }
    Ok(p)
}

/// Symmetric part of a matrix.
pub fn sym(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + &a.transpose()) * 0.5
}

/// Eigenvalue range (min, max) of the symmetric part of `a`.
pub fn sym_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    let eig = sym(a).symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Smallest eigenvalue of the symmetric part.
pub fn lambda_min_sym(a: &DMatrix<f64>) -> f64 {
    sym_eig_range(a).0
}

/// Largest eigenvalue of the symmetric part.
pub fn lambda_max_sym(a: &DMatrix<f64>) -> f64 {
    sym_eig_range(a).1
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sqrtm_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(a, 0.5)
}

/// Inverse principal square root of a symmetric positive definite matrix.
pub fn inv_sqrtm_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(a, -0.5)
}

fn spd_power(a: &DMatrix<f64>, pow: f64) -> Result<DMatrix<f64>> {
    let eig = sym(a).symmetric_eigen();
    let n = a.nrows();
    let mut lo = f64::INFINITY;
    for v in eig.eigenvalues.iter() {
        lo = lo.min(*v);
    }
    if lo <= 0.0 {
        return Err(Error::Numerical(format!(
            "matrix not positive definite (lambda_min = {lo:.3e})"
        )));
    }
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = eig.eigenvalues[i].powf(pow);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    sv.iter().fold(0.0_f64, |acc, v| acc.max(*v))
}

/// Real parts of the eigenvalues.
pub fn eigen_real_parts(a: &DMatrix<f64>) -> Vec<f64> {
    a.complex_eigenvalues().iter().map(|c| c.re).collect()
}

/// All eigenvalues strictly in the open left half plane (margin `tol`).
pub fn is_hurwitz(a: &DMatrix<f64>, tol: f64) -> bool {
    eigen_real_parts(a).iter().all(|re| *re < -tol)
}

/// All eigenvalues strictly in the open right half plane (margin `tol`).
pub fn is_anti_hurwitz(a: &DMatrix<f64>, tol: f64) -> bool {
    eigen_real_parts(a).iter().all(|re| *re > tol)
}

/// Numerical rank with a relative singular-value cutoff.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let s0 = sv.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    if s0 == 0.0 {
        return 0;
    }
    sv.iter().filter(|v| **v > rel_tol * s0).count()
}

/// Orthonormal basis for the right null space, one column per basis vector.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd requested v_t");
    let s0 = svd.singular_values.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    let r = if s0 == 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|v| **v > rel_tol * s0)
            .count()
    };
    // v_t has min(nrows, ncols) rows; null directions live past row r, plus
    // any column dimensions the SVD never touched.
    let mut basis = Vec::new();
    for i in r..v_t.nrows() {
        basis.push(v_t.row(i).transpose());
    }
    if v_t.nrows() < cols {
        // Complete the basis by orthogonalizing coordinate vectors against V.
        let mut have: Vec<DVector<f64>> = (0..v_t.nrows())
            .map(|i| v_t.row(i).transpose())
            .collect();
        have.extend(basis.iter().cloned());
        for j in 0..cols {
            let mut cand = DVector::zeros(cols);
            cand[j] = 1.0;
            for b in &have {
                let proj = b.dot(&cand);
                cand -= b * proj;
            }
            let nrm = cand.norm();
            if nrm > 1e-10 {
                let unit = cand / nrm;
                have.push(unit.clone());
                basis.push(unit);
            }
        }
    }
    let k = basis.len();
    let mut out = DMatrix::zeros(cols, k);
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Minimum-norm least-squares solution of `A x = b` via the SVD.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidInput("lstsq dimension mismatch".into()));
    }
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12)
        .map_err(|e| Error::Numerical(format!("svd solve failed: {e}")))
}

/// Solves `A x = b` exactly; errors when A is singular.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::InvalidInput("square solve dimension mismatch".into()));
    }
    a.clone()
        .full_piv_lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("matrix is singular".into()))
}

/// Inverse via LU; errors when singular.
pub fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("inverse needs a square matrix".into()));
    }
    a.clone()
        .full_piv_lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("matrix is singular".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frob_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm()
    }

    #[test]
    fn expm_matches_rotation_closed_form() {
        for &theta in &[0.1, 1.0, 3.5, -2.0] {
            let a = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
            let e = expm(&a);
            let want = DMatrix::from_row_slice(
                2,
                2,
                &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
            );
            assert!(frob_diff(&e, &want) < 1e-12, "theta={theta}");
        }
    }

    #[test]
    fn expm_nilpotent_and_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(frob_diff(&expm(&a), &want) < 1e-14);

        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -3.0]);
        let e = expm(&d);
        assert_relative_eq!(e[(0, 0)], 2f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(e[(1, 1)], (-3f64).exp(), max_relative = 1e-12);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn expm_lower_triangular_closed_form() {
        // exp of [[a,0],[c,b]] has off-diagonal c (e^a - e^b)/(a - b).
        let (a, b, c) = (0.9_f64, 0.5_f64, 0.2_f64);
        for &tau in &[0.3, 1.7, -4.0, 12.0] {
            let g = DMatrix::from_row_slice(2, 2, &[a, 0.0, c, b]) * tau;
            let e = expm(&g);
            let e11 = (a * tau).exp();
            let e22 = (b * tau).exp();
            let e21 = c * tau * (e11 - e22) / (a * tau - b * tau);
            assert_relative_eq!(e[(0, 0)], e11, max_relative = 1e-11);
            assert_relative_eq!(e[(1, 1)], e22, max_relative = 1e-11);
            assert_relative_eq!(e[(1, 0)], e21, max_relative = 1e-10);
            assert!(e[(0, 1)].abs() < 1e-12);
        }
    }

    #[test]
    fn expm_inverse_identity() {
        let a = DMatrix::from_row_slice(3, 3, &[0.2, 1.0, -0.3, 0.0, -0.5, 2.0, 0.7, 0.1, 0.4]);
        let prod = expm(&a) * expm(&(-&a));
        assert!(frob_diff(&prod, &DMatrix::identity(3, 3)) < 1e-11);
    }

    #[test]
    fn expm_scaling_branch_agrees_with_squared_small_step() {
        // e^A = (e^{A/16})^16; the left side exercises the scaling path.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 8.0, -8.0, 0.0]);
        let big = expm(&a);
        let mut small = expm(&(&a / 16.0));
        for _ in 0..4 {
            small = &small * &small;
        }
        assert!(frob_diff(&big, &small) < 1e-10);
    }

    #[test]
    fn lyapunov_solution_residual_and_symmetry() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -7.0, -10.0]);
        let q = DMatrix::identity(2, 2);
        let p = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &p + &p * &a + &q;
        assert!(res.norm() < 1e-10);
        assert!(frob_diff(&p, &p.transpose()) < 1e-14);
        // Known solution for this companion pair.
        assert_relative_eq!(p[(0, 0)], 1.1142857142857143, max_relative = 1e-9);
        assert_relative_eq!(p[(0, 1)], 0.07142857142857142, max_relative = 1e-9);
        assert_relative_eq!(p[(1, 1)], 0.05714285714285714, max_relative = 1e-9);
    }

    #[test]
    fn lyapunov_rejects_singular_spectrum() {
        // Eigenvalues +1 and -1 sum to zero; no solution exists.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(solve_lyapunov(&a, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn sqrtm_roundtrip() {
        let x = DMatrix::from_row_slice(2, 2, &[14.5, -6.0, -6.0, 5.0]);
        let s = sqrtm_spd(&x).unwrap();
        assert!(frob_diff(&(&s * &s), &x) < 1e-10);
        let si = inv_sqrtm_spd(&x).unwrap();
        assert!(frob_diff(&(&s * &si), &DMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn sqrtm_rejects_indefinite() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sqrtm_spd(&x).is_err());
    }

    #[test]
    fn spectral_norm_matches_hand_value() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert_relative_eq!(spectral_norm(&a), 4.0, max_relative = 1e-12);
    }

    #[test]
    fn hurwitz_checks() {
        let am = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -7.0, -10.0]);
        assert!(is_hurwitz(&am, 1e-9));
        assert!(!is_anti_hurwitz(&am, 1e-9));
        let gd = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.2, 0.5]);
        assert!(is_anti_hurwitz(&gd, 1e-9));
        assert!(!is_hurwitz(&gd, 1e-9));
    }

    #[test]
    fn rank_and_nullspace() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&a, 1e-10), 1);
        let ns = nullspace(&a, 1e-10);
        assert_eq!(ns.ncols(), 2);
        // Null space columns annihilated by A and orthonormal.
        assert!((&a * &ns).norm() < 1e-10);
        assert!(frob_diff(&(ns.transpose() * &ns), &DMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn lstsq_consistent_and_minimum_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0]);
        let x = lstsq_min_norm(&a, &b).unwrap();
        // Minimum-norm solution of x1+x2=2 is (1,1).
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn invert_singular_reports_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(invert(&a).is_err());
    }
}
