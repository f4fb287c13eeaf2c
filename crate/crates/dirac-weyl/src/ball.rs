//! Matrix balls of Moebius-transform values and their semi-radii.
//!
//! For Im z above the potential bound, the gram matrix u* j u has a
//! negative-definite lower-right block, which makes the set of admissible
//! Weyl-disc members a matrix ball: center plus left/right semi-radii
//! acting on an arbitrary contraction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    cid, herm_inv_sqrt, herm_solve, herm_sqrt, hermitize, j_signature, min_herm_eig,
    min_singular_value, op_norm, CMat,
};

/// The Weyl disc at one (x, z): every member is
/// `center + rho_l * omega * rho_r` with a contraction omega.
#[derive(Clone, Debug)]
pub struct MatrixBall {
    /// m2 x m1 ball center.
    pub center: CMat,
    /// Left semi-radius, m2 x m2 Hermitian positive.
    pub rho_l: CMat,
    /// Right semi-radius, m1 x m1 Hermitian nonnegative.
    pub rho_r: CMat,
    pub x: f64,
    pub z: Complex64,
}

impl MatrixBall {
    pub fn member(&self, omega: &CMat) -> CMat {
        &self.center + &self.rho_l * omega * &self.rho_r
    }

    /// Scalar size proxy: product of the semi-radius operator norms; bounds
    /// the distance from the center to any member.
    pub fn radius_product(&self) -> f64 {
        op_norm(&self.rho_l) * op_norm(&self.rho_r)
    }
}

/// Extract the ball from a gram matrix u(x,z)* j u(x,z).
///
/// Requires the lower-right block to be negative definite, which holds for
/// Im z > M; otherwise reports a domain error.
pub fn matrix_ball(gram: &CMat, m1: usize, x: f64, z: Complex64) -> Result<MatrixBall> {
    let m = gram.nrows();
    let m2 = m - m1;
    let a11 = gram.view((0, 0), (m1, m1)).into_owned();
    let a21 = gram.view((m1, 0), (m2, m1)).into_owned();
    let a12 = gram.view((0, m1), (m1, m2)).into_owned();
    let neg_a22 = -gram.view((m1, m1), (m2, m2)).into_owned();

    let min = min_herm_eig(&neg_a22);
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context: "-A22 block of the gram matrix (z outside the half-plane or breakdown)",
            min_eig: min,
        });
    }
    let rho_l = herm_inv_sqrt(&neg_a22, "-A22 block of the gram matrix")?;
    // center = -A22^{-1} A21 = (-A22)^{-1} A21
    let center = herm_solve(&neg_a22, &a21, "-A22 block of the gram matrix")?;
    // Schur complement A11 - A12 A22^{-1} A21 = A11 + A12 * center.
    let schur = hermitize(&(&a11 + &a12 * &center));
    let rho_r = herm_sqrt(&schur);
    Ok(MatrixBall {
        center,
        rho_l,
        rho_r,
        x,
        z,
    })
}

/// The Hermitian form [I phi*] gram [I; phi]; nonnegative exactly when phi
/// belongs to the ball of that gram matrix.
pub fn hermitian_form(gram: &CMat, phi: &CMat) -> CMat {
    let m1 = phi.ncols();
    let m2 = phi.nrows();
    let mut e = CMat::zeros(m1 + m2, m1);
    for i in 0..m1 {
        e[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..m2 {
        for j in 0..m1 {
            e[(m1 + i, j)] = phi[(i, j)];
        }
    }
    hermitize(&(e.adjoint() * gram * e))
}

/// Smallest eigenvalue of the membership form; >= -tol certifies membership.
pub fn membership_defect(gram: &CMat, phi: &CMat) -> f64 {
    min_herm_eig(&hermitian_form(gram, phi))
}

/// Moebius transform of a pair through the inverse fundamental solution:
/// `[0 I] u_inv P ([I 0] u_inv P)^{-1}`.
///
/// `u_inv` must be u(x, conj z)* (the exact inverse); the pair is an m x m1
/// matrix of full column rank satisfying the half-plane positivity
/// conditions. A singular upper block signals an invalid pair or z outside
/// the half-plane.
pub fn mobius(u_inv: &CMat, pair: &CMat, m1: usize) -> Result<CMat> {
    let m = u_inv.nrows();
    let m2 = m - m1;
    let q = u_inv * pair;
    let top = q.view((0, 0), (m1, m1)).into_owned();
    let bottom = q.view((m1, 0), (m2, m1)).into_owned();
    let smin = min_singular_value(&top);
    let scale = op_norm(&top).max(1e-300);
    if smin < 1e-12 * scale {
        return Err(Error::SingularPair { sigma: smin });
    }
    // bottom * top^{-1} via transposed solve.
    let xt = top
        .transpose()
        .lu()
        .solve(&bottom.transpose())
        .ok_or(Error::SingularPair { sigma: smin })?;
    Ok(xt.transpose())
}

/// Defects of the pair positivity conditions at one z: returns the smallest
/// eigenvalues of (P* P, P* j P); the first must be positive, the second
/// nonnegative.
pub fn property_j_defect(pair: &CMat, m1: usize) -> (f64, f64) {
    let m = pair.nrows();
    let j = j_signature(m1, m - m1);
    let grammian = pair.adjoint() * pair;
    let jform = pair.adjoint() * j * pair;
    (min_herm_eig(&grammian), min_herm_eig(&jform))
}

/// Stack [I; alpha] into the m x m1 pair used throughout the tests.
pub fn pair_from_contraction(alpha: &CMat) -> CMat {
    let m2 = alpha.nrows();
    let m1 = alpha.ncols();
    let mut p = CMat::zeros(m1 + m2, m1);
    for i in 0..m1 {
        p[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..m2 {
        for j in 0..m1 {
            p[(m1 + i, j)] = alpha[(i, j)];
        }
    }
    p
}

#[allow(unused)]
fn _unused(m: &CMat) -> CMat {
    cid(m.nrows())
}
