//! The Weyl function of the system: limit of the shrinking ball centers,
//! with the achieved radius product as a computable error bound, plus the
//! square-integrability criterion that singles the function out.

use num_complex::Complex64;

use crate::ball::{matrix_ball, MatrixBall};
use crate::error::Result;
use crate::grid::PotentialGrid;
use crate::linalg::{cid, CMat};
use crate::propagator::Propagator;

/// One Weyl-function sample: the ball center at the stopping node, the
/// radius product achieved there, and whether the interval end was reached
/// before the requested radius.
#[derive(Clone, Debug)]
pub struct WeylSample {
    pub z: Complex64,
    pub phi: CMat,
    pub error_bound: f64,
    pub truncated: bool,
    /// Node coordinate where the sample was taken.
    pub x_star: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct WeylOptions {
    /// Required excess of Im z over the potential bound. The shrinkage rate
    /// of the ball degenerates as Im z approaches the bound, so a strictly
    /// positive default guards the conditioning.
    pub margin: f64,
}

impl Default for WeylOptions {
    fn default() -> Self {
        WeylOptions { margin: 0.25 }
    }
}

/// Walk the grid until the ball radius product drops below `target_radius`
/// (or the interval ends) and return the center there.
///
/// With `target_radius = 0` the sample is always taken at x = l with the
/// achieved bound reported and the truncated flag set.
pub fn weyl_function(
    grid: &PotentialGrid,
    z: Complex64,
    target_radius: f64,
    opts: &WeylOptions,
) -> Result<WeylSample> {
    grid.spectral_point(z).require_margin(opts.margin)?;
    let prop = Propagator::new(grid, z)?;
    let m1 = grid.m1();
    if target_radius > 0.0 {
        for k in 0..=grid.n() {
            let ball = matrix_ball(&prop.gram(k), m1, grid.node(k), z)?;
            let product = ball.radius_product();
            if product <= target_radius {
                return Ok(WeylSample {
                    z,
                    phi: ball.center.clone(),
                    error_bound: product,
                    truncated: false,
                    x_star: ball.x,
                });
            }
        }
    }
    let ball = matrix_ball(&prop.gram(grid.n()), m1, grid.l(), z)?;
    let product = ball.radius_product();
    Ok(WeylSample {
        z,
        phi: ball.center.clone(),
        error_bound: product,
        truncated: product > target_radius,
        x_star: ball.x,
    })
}

/// Trapezoid value of the integral of tr([I phi*] u* u [I; phi]) over the
/// grid; stays bounded for the Weyl function and grows like exp(2 Im z x)
/// for any other candidate, which makes it a uniqueness diagnostic.
pub fn l2_criterion(grid: &PotentialGrid, phi: &CMat, z: Complex64) -> Result<f64> {
    let prop = Propagator::new(grid, z)?;
    let m1 = grid.m1();
    let m2 = grid.m2();
    let mut e = CMat::zeros(m1 + m2, m1);
    for i in 0..m1 {
        e[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..m2 {
        for j in 0..m1 {
            e[(m1 + i, j)] = phi[(i, j)];
        }
    }
    let h = grid.h();
    let mut total = 0.0;
    for k in 0..=grid.n() {
        let col = prop.u(k) * &e;
        let val = (col.adjoint() * col).trace().re;
        let w = if k == 0 || k == grid.n() { 0.5 } else { 1.0 };
        total += w * h * val;
    }
    Ok(total)
}

/// Closed-form Weyl function of the constant scalar potential c on the
/// semi-axis: i (sqrt(z^2 + c^2) - z) / c, branch with positive imaginary
/// square root. Used as an oracle wherever a constant potential appears.
pub fn constant_potential_weyl(c: Complex64, z: Complex64) -> Complex64 {
    if c.norm() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut w = (z * z + Complex64::new(c.norm_sqr(), 0.0)).sqrt();
    if w.im < 0.0 {
        w = -w;
    }
    Complex64::new(0.0, 1.0) * (w - z) / c
}

#[allow(unused)]
fn _unused() -> CMat {
    cid(1)
}
