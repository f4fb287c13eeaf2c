//! Dense complex linear algebra helpers shared across the crate.
//!
//! Everything here operates on small (m <= ~10) dense matrices, so plain
//! O(n^3) algorithms are the right tool. Hermitian square roots go through
//! an eigendecomposition with eigenvalue clamping; the matrix exponential is
//! scaling-and-squaring with a degree-13 Pade core.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn cid(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest entry magnitude; infinity if any entry is non-finite.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |acc, c| {
        let m = c.re.abs().max(c.im.abs());
        if m.is_finite() {
            acc.max(m)
        } else {
            f64::INFINITY
        }
    })
}

pub fn all_finite(a: &CMat) -> bool {
    a.iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// Operator 2-norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.clone().svd(false, false);
    svd.singular_values.max()
}

/// 1-norm (max absolute column sum), used to pick the exponential scaling.
fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| a[(i, j)].norm()).sum();
        best = best.max(s);
    }
    best
}

const PADE13_THETA: f64 = 5.371920351148152;
const PADE13_B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling-and-squaring with the [13/13] Pade
/// approximant (Higham's fixed-order variant; ample for m x m blocks with
/// m of order ten).
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    let norm = one_norm(a);
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * real(0.5_f64.powi(s));

    let id = cid(n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * real(PADE13_B[13]) + &a4 * real(PADE13_B[11]) + &a2 * real(PADE13_B[9]);
    let u = &scaled
        * (&a6 * u_inner
            + &a6 * real(PADE13_B[7])
            + &a4 * real(PADE13_B[5])
            + &a2 * real(PADE13_B[3])
            + &id * real(PADE13_B[1]));
    let v_inner = &a6 * real(PADE13_B[12]) + &a4 * real(PADE13_B[10]) + &a2 * real(PADE13_B[8]);
    let v = &a6 * v_inner
        + &a6 * real(PADE13_B[6])
        + &a4 * real(PADE13_B[4])
        + &a2 * real(PADE13_B[2])
        + &id * real(PADE13_B[0]);

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Pade denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Force exact Hermitian symmetry: (a + a*)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * real(0.5)
}

/// Eigendecomposition of a Hermitian matrix; input is symmetrized first.
/// Returns (eigenvalues ascending is NOT guaranteed by nalgebra; we sort),
/// with eigenvectors as columns in matching order.
pub fn herm_eig(a: &CMat) -> (DVector<f64>, CMat) {
    let se = SymmetricEigen::new(hermitize(a));
    let n = se.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| se.eigenvalues[i]));
    let vecs = CMat::from_fn(n, n, |r, c| se.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn min_herm_eig(a: &CMat) -> f64 {
    let (vals, _) = herm_eig(a);
    vals[0]
}

pub fn max_herm_eig(a: &CMat) -> f64 {
    let (vals, _) = herm_eig(a);
    vals[vals.len() - 1]
}

fn herm_fn(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eig(a);
    let n = vals.len();
    let d = CMat::from_fn(n, n, |r, c| if r == c { real(f(vals[r])) } else { ZERO });
    &vecs * d * vecs.adjoint()
}

/// Hermitian square root of a positive semi-definite matrix; negative
/// eigenvalues from round-off are clamped to zero.
pub fn herm_sqrt(a: &CMat) -> CMat {
    herm_fn(a, |l| l.max(0.0).sqrt())
}

/// Inverse Hermitian square root. Fails if the smallest eigenvalue is not
/// strictly positive at working precision; eigenvalues are clamped below at
/// 1e-14 to bridge near-singular but provably positive inputs.
pub fn herm_inv_sqrt(a: &CMat, context: &'static str) -> Result<CMat> {
    let (vals, vecs) = herm_eig(a);
    let min = vals[0];
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            context,
            min_eig: min,
        });
    }
    let n = vals.len();
    let d = CMat::from_fn(n, n, |r, c| {
        if r == c {
            real(1.0 / vals[r].max(1e-14).sqrt())
        } else {
            ZERO
        }
    });
    Ok(&vecs * d * vecs.adjoint())
}

/// Hermitian solve via Cholesky; errors if not positive definite.
pub fn herm_solve(a: &CMat, rhs: &CMat, context: &'static str) -> Result<CMat> {
    match Cholesky::new(hermitize(a)) {
        Some(ch) => Ok(ch.solve(rhs)),
        None => Err(Error::NotPositiveDefinite {
            context,
            min_eig: min_herm_eig(a),
        }),
    }
}

/// Condition number estimate from the full SVD (fine at these sizes).
pub fn cond_2(a: &CMat) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn min_singular_value(a: &CMat) -> f64 {
    a.clone().svd(false, false).singular_values.min()
}

/// diag(I_{m1}, -I_{m2}) in the ambient dimension m1 + m2.
pub fn j_signature(m1: usize, m2: usize) -> CMat {
    CMat::from_fn(m1 + m2, m1 + m2, |r, c| {
        if r != c {
            ZERO
        } else if r < m1 {
            ONE
        } else {
            -ONE
        }
    })
}
