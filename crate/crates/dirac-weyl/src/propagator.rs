//! Fundamental solution u(x, z) of the first-order system
//! u' = (izj + jV(x)) u, u(0, z) = I, on the potential grid.
//!
//! Each cell is propagated by the exact exponential of the cell-constant
//! coefficient matrix with the midpoint-sampled potential, which preserves
//! the inverse identity u(x, conj z)* u(x, z) = I per cell and is second
//! order for smooth potentials.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PotentialGrid;
use crate::linalg::{cid, expm, hermitize, max_abs, real, CMat};

/// Entry magnitude beyond which propagation reports overflow instead of
/// silently degrading; exp((Im z) x) growth is intrinsic, not a bug.
const OVERFLOW_LIMIT: f64 = 1e300;

/// Cumulative fundamental solution at every grid node for one fixed z.
pub struct Propagator<'a> {
    grid: &'a PotentialGrid,
    z: Complex64,
    us: Vec<CMat>,
}

impl<'a> Propagator<'a> {
    pub fn new(grid: &'a PotentialGrid, z: Complex64) -> Result<Self> {
        let m = grid.m();
        let h = grid.h();
        let mut us = Vec::with_capacity(grid.n() + 1);
        us.push(cid(m));
        for k in 0..grid.n() {
            let coeff = grid.coefficient(&grid.cell_mid_v(k), z) * real(h);
            let step = expm(&coeff);
            let next = &step * &us[k];
            if max_abs(&next) > OVERFLOW_LIMIT {
                return Err(Error::Overflow { cell: k });
            }
            us.push(next);
        }
        Ok(Propagator { grid, z, us })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn grid(&self) -> &PotentialGrid {
        self.grid
    }

    /// u(x_k, z).
    pub fn u(&self, k: usize) -> &CMat {
        &self.us[k]
    }

    /// The Weyl gram matrix u(x_k, z)* j u(x_k, z), symmetrized to round-off.
    pub fn gram(&self, k: usize) -> CMat {
        let j = self.grid.j();
        hermitize(&(self.us[k].adjoint() * j * &self.us[k]))
    }
}

/// u(x_k, z) as a one-off evaluation.
pub fn propagate(grid: &PotentialGrid, x_index: usize, z: Complex64) -> Result<CMat> {
    if x_index > grid.n() {
        return Err(Error::Invalid(format!(
            "node index {x_index} out of range 0..={}",
            grid.n()
        )));
    }
    // Only cells up to x_index are needed; propagate a prefix.
    let m = grid.m();
    let h = grid.h();
    let mut u = cid(m);
    for k in 0..x_index {
        let coeff = grid.coefficient(&grid.cell_mid_v(k), z) * real(h);
        u = expm(&coeff) * u;
        if max_abs(&u) > OVERFLOW_LIMIT {
            return Err(Error::Overflow { cell: k });
        }
    }
    Ok(u)
}

/// u(x_k, z)* j u(x_k, z); Hermitian, and bounded above by j on the Weyl
/// half-plane Im z > M.
pub fn weyl_gram(grid: &PotentialGrid, x_index: usize, z: Complex64) -> Result<CMat> {
    let u = propagate(grid, x_index, z)?;
    Ok(hermitize(&(u.adjoint() * grid.j() * u)))
}

/// The inverse of u(x, z), computed as u(x, conj z)* rather than by
/// numerical inversion; this is an exact algebraic identity of the system.
pub fn u_inverse(grid: &PotentialGrid, x_index: usize, z: Complex64) -> Result<CMat> {
    Ok(propagate(grid, x_index, z.conj())?.adjoint())
}

/// Boundary rows beta(x) = [I 0] u(x, 0), gamma(x) = [0 I] u(x, 0) sampled
/// at every node. beta is m1 x m, gamma is m2 x m; the rows stay
/// orthonormal and mutually orthogonal along the interval.
pub struct BoundaryRows {
    pub beta: Vec<CMat>,
    pub gamma: Vec<CMat>,
}

impl BoundaryRows {
    /// Worst orthogonality defect over all nodes:
    /// max of ||beta beta* - I||, ||gamma gamma* - I||, ||beta gamma*||.
    pub fn orthogonality_defect(&self) -> f64 {
        let m1 = self.beta[0].nrows();
        let m2 = self.gamma[0].nrows();
        let mut worst = 0.0_f64;
        for (b, g) in self.beta.iter().zip(&self.gamma) {
            worst = worst.max((b * b.adjoint() - cid(m1)).norm());
            worst = worst.max((g * g.adjoint() - cid(m2)).norm());
            worst = worst.max((b * g.adjoint()).norm());
        }
        worst
    }
}

pub fn boundary_rows(grid: &PotentialGrid) -> Result<BoundaryRows> {
    let prop = Propagator::new(grid, Complex64::new(0.0, 0.0))?;
    let (m1, m) = (grid.m1(), grid.m());
    let mut beta = Vec::with_capacity(grid.n() + 1);
    let mut gamma = Vec::with_capacity(grid.n() + 1);
    for k in 0..=grid.n() {
        let u = prop.u(k);
        beta.push(u.rows(0, m1).into_owned());
        gamma.push(u.rows(m1, m - m1).into_owned());
    }
    Ok(BoundaryRows { beta, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::op_norm;

    fn ci(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_potential_closed_form() {
        // v = 0, z = i, x = 1: u = diag(e^{-1}, e^{1}).
        let grid = PotentialGrid::zero(1, 1, 1.0, 16).unwrap();
        let u = propagate(&grid, 16, ci(0.0, 1.0)).unwrap();
        assert!((u[(0, 0)] - ci((-1.0f64).exp(), 0.0)).norm() < 1e-12);
        assert!((u[(1, 1)] - ci(1.0f64.exp(), 0.0)).norm() < 1e-12);
        assert_eq!(u[(0, 1)], ci(0.0, 0.0));
        assert_eq!(u[(1, 0)], ci(0.0, 0.0));
    }

    #[test]
    fn normalization_at_zero() {
        let grid = PotentialGrid::constant_scalar(ci(0.5, 0.2), 1.0, 8).unwrap();
        let u = propagate(&grid, 0, ci(1.3, 2.0)).unwrap();
        assert_eq!((u - cid(2)).norm(), 0.0);
    }

    #[test]
    fn constant_potential_matches_exponential_oracle() {
        // v = 0.5, z = 2i, x = 1: u = exp([[-2, 0.5], [-0.5, 2]]).
        // Oracle: Taylor-series exponential, independent of the Pade path.
        let grid = PotentialGrid::constant_scalar(ci(0.5, 0.0), 1.0, 64).unwrap();
        let z = ci(0.0, 2.0);
        let u = propagate(&grid, 64, z).unwrap();
        let coeff = grid.coefficient(grid.sample(0), z);
        assert!((coeff[(0, 0)] - ci(-2.0, 0.0)).norm() < 1e-15);
        assert!((coeff[(0, 1)] - ci(0.5, 0.0)).norm() < 1e-15);
        assert!((coeff[(1, 0)] - ci(-0.5, 0.0)).norm() < 1e-15);
        assert!((coeff[(1, 1)] - ci(2.0, 0.0)).norm() < 1e-15);
        let oracle = taylor_exp(&coeff);
        let err = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (u[(i, j)] - oracle[(i, j)]).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-10, "entrywise error {err}");
    }

    fn taylor_exp(a: &CMat) -> CMat {
        let n = a.nrows();
        let s = 8;
        let scaled = a * real(0.5_f64.powi(s));
        let mut sum = cid(n);
        let mut term = cid(n);
        for k in 1..40 {
            term = &term * &scaled * real(1.0 / k as f64);
            sum += &term;
        }
        let mut r = sum;
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }

    #[test]
    fn inverse_identity_along_grid() {
        let grid = PotentialGrid::from_fn(1, 2, 1.0, 50, |x| {
            CMat::from_fn(1, 2, |_, c| ci(0.4 * (1.0 + x * c as f64).sin(), 0.3 * x.cos()))
        })
        .unwrap();
        for z in [ci(0.0, 2.0), ci(1.0, 3.0), ci(-2.0, 0.7), ci(1.5, 0.0)] {
            let p = Propagator::new(&grid, z).unwrap();
            let pc = Propagator::new(&grid, z.conj()).unwrap();
            for k in [0, 13, 50] {
                let prod = pc.u(k).adjoint() * p.u(k);
                assert!(
                    (prod - cid(3)).norm() < 1e-11,
                    "identity failed at node {k}, z = {z}"
                );
            }
        }
    }

    #[test]
    fn gram_zero_potential_diagonal() {
        let eta = 1.5;
        let grid = PotentialGrid::zero(1, 1, 1.0, 10).unwrap();
        let p = Propagator::new(&grid, ci(0.0, eta)).unwrap();
        for k in [0usize, 4, 10] {
            let x = grid.node(k);
            let a = p.gram(k);
            assert!((a[(0, 0)] - ci((-2.0 * eta * x).exp(), 0.0)).norm() < 1e-12);
            assert!((a[(1, 1)] + ci((2.0 * eta * x).exp(), 0.0)).norm() < 1e-9);
            assert!(a[(0, 1)].norm() < 1e-12);
        }
        // x = 0 gives exactly j.
        assert_eq!((p.gram(0) - grid.j()).norm(), 0.0);
    }

    #[test]
    fn gram_dominated_by_j_in_weyl_domain() {
        let grid = crate::synth::random_smooth_potential(7, 1, 2, 1.0, 60, 1.0).unwrap();
        let z = ci(0.4, 3.0);
        let p = Propagator::new(&grid, z).unwrap();
        let j = grid.j();
        for k in 0..=grid.n() {
            let diff = &j - p.gram(k);
            let min = crate::linalg::min_herm_eig(&diff);
            assert!(min >= -1e-9, "j - gram lost positivity at node {k}: {min}");
        }
    }

    #[test]
    fn gram_monotone_nonincreasing() {
        let grid = crate::synth::random_smooth_potential(3, 2, 1, 1.0, 40, 0.8).unwrap();
        let p = Propagator::new(&grid, ci(-0.3, 2.0)).unwrap();
        for k in 0..grid.n() {
            let diff = p.gram(k) - p.gram(k + 1);
            assert!(
                crate::linalg::min_herm_eig(&diff) >= -1e-9,
                "monotonicity failed between nodes {k} and {}",
                k + 1
            );
        }
    }

    #[test]
    fn boundary_rows_zero_and_constant() {
        let zero = PotentialGrid::zero(1, 1, 1.0, 8).unwrap();
        let rows = boundary_rows(&zero).unwrap();
        for k in 0..=8 {
            assert!((rows.beta[k][(0, 0)] - ci(1.0, 0.0)).norm() < 1e-14);
            assert!(rows.beta[k][(0, 1)].norm() < 1e-14);
            assert!((rows.gamma[k][(0, 1)] - ci(1.0, 0.0)).norm() < 1e-14);
        }

        // Constant scalar v = c: u(x, 0) = exp(x jV); rows must match and
        // stay orthonormal to 1e-10.
        let c = ci(0.7, -0.2);
        let grid = PotentialGrid::constant_scalar(c, 1.0, 32).unwrap();
        let rows = boundary_rows(&grid).unwrap();
        for k in [5usize, 32] {
            let x = grid.node(k);
            let coeff = grid.coefficient(grid.sample(0), ci(0.0, 0.0)) * real(x);
            let oracle = taylor_exp(&coeff);
            assert!((&rows.beta[k] - oracle.rows(0, 1).into_owned()).norm() < 1e-10);
            assert!((&rows.gamma[k] - oracle.rows(1, 1).into_owned()).norm() < 1e-10);
        }
        assert!(rows.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn derivative_consistency_recovers_potential() {
        // beta' gamma* = v at interior nodes to O(h^2); beta' beta* = 0,
        // gamma' gamma* = 0.
        let grid = PotentialGrid::from_fn(1, 1, 1.0, 200, |x| {
            CMat::from_element(1, 1, ci(0.3 + 0.2 * (2.0 * std::f64::consts::PI * x).sin(), 0.1 * x))
        })
        .unwrap();
        let rows = boundary_rows(&grid).unwrap();
        let h = grid.h();
        let mut worst_v = 0.0_f64;
        let mut worst_orth = 0.0_f64;
        for k in 1..grid.n() {
            let db = (&rows.beta[k + 1] - &rows.beta[k - 1]) * real(0.5 / h);
            let dg = (&rows.gamma[k + 1] - &rows.gamma[k - 1]) * real(0.5 / h);
            worst_v = worst_v.max((&db * rows.gamma[k].adjoint() - grid.sample(k)).norm());
            worst_orth = worst_orth.max((&db * rows.beta[k].adjoint()).norm());
            worst_orth = worst_orth.max((&dg * rows.gamma[k].adjoint()).norm());
        }
        assert!(worst_v < 5e-4, "beta' gamma* vs v: {worst_v}");
        assert!(worst_orth < 5e-4, "tangency defect: {worst_orth}");
    }

    #[test]
    fn refinement_is_second_order() {
        let f = |x: f64| CMat::from_element(1, 1, ci(0.5 * (1.5 * x).cos(), 0.2 * x * x));
        let z = ci(0.5, 2.0);
        let err = |n: usize| {
            let grid = PotentialGrid::from_fn(1, 1, 1.0, n, f).unwrap();
            let fine = PotentialGrid::from_fn(1, 1, 1.0, 4 * n, f).unwrap();
            let a = propagate(&grid, n, z).unwrap();
            let b = propagate(&fine, 4 * n, z).unwrap();
            op_norm(&(a - b))
        };
        let e1 = err(20);
        let e2 = err(40);
        let ratio = e1 / e2;
        assert!(
            (2.8..5.5).contains(&ratio),
            "expected ~4x error drop per doubling, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn overflow_reports_cell_index() {
        let grid = PotentialGrid::zero(1, 1, 1.0, 10).unwrap();
        match Propagator::new(&grid, ci(0.0, 8000.0)) {
            Err(Error::Overflow { cell }) => assert!(cell < 10),
            Err(other) => panic!("expected overflow, got {other:?}"),
            Ok(_) => panic!("expected overflow, propagation succeeded"),
        }
    }
}
