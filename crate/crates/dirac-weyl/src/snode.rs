//! The structured-operator backbone: the profile Phi1, the kernel operator
//! S = I + integral of s(x,t), the Volterra integration operator A with its
//! closed-form resolvent, the transfer matrix w_A, and the factorization
//! check tying the transfer matrix back to the fundamental solution.
//!
//! Discretization is a trapezoid Nystroem scheme on the same uniform grid as
//! the potential. The full-interval operator is factored once (Cholesky);
//! restrictions to [0, x_k] reuse the leading triangle of the factor with a
//! rank-m2 endpoint-weight correction, so the whole sweep over k costs one
//! factorization plus triangular solves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PotentialGrid;
use crate::linalg::{cid, hermitize, max_abs, op_norm, real, CMat, CVec, I, ONE, ZERO};
use crate::propagator::propagate;

/// The m2 x m1 profile on [0, l] with its derivative samples. The value at
/// the origin is pinned to zero; the derivative is what the kernel consumes.
#[derive(Clone, Debug)]
pub struct Phi1Profile {
    samples: Vec<CMat>,
    derivative: Vec<CMat>,
    h: f64,
}

impl Phi1Profile {
    /// Build from node samples; the derivative comes from central
    /// differences with one-sided second-order stencils at the endpoints.
    /// The origin sample is snapped to zero (it must already be small).
    pub fn from_samples(mut samples: Vec<CMat>, h: f64) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::Invalid("profile needs at least 3 nodes".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Invalid(format!("step h = {h} must be positive")));
        }
        let (m2, m1) = (samples[0].nrows(), samples[0].ncols());
        for (k, s) in samples.iter().enumerate() {
            if s.nrows() != m2 || s.ncols() != m1 {
                return Err(Error::Invalid(format!("profile sample {k} has wrong shape")));
            }
            if !crate::linalg::all_finite(s) {
                return Err(Error::Invalid(format!("profile sample {k} not finite")));
            }
        }
        samples[0] = CMat::zeros(m2, m1);
        let n = samples.len() - 1;
        let mut derivative = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let d = if k == 0 {
                (&samples[1] * real(4.0) - &samples[2] - &samples[0] * real(3.0)) * real(0.5 / h)
            } else if k == n {
                (&samples[n] * real(3.0) - &samples[n - 1] * real(4.0) + &samples[n - 2])
                    * real(0.5 / h)
            } else {
                (&samples[k + 1] - &samples[k - 1]) * real(0.5 / h)
            };
            derivative.push(d);
        }
        Ok(Phi1Profile {
            samples,
            derivative,
            h,
        })
    }

    pub fn from_fn(m2: usize, m1: usize, l: f64, n: usize, f: impl Fn(f64) -> CMat) -> Result<Self> {
        let h = l / n as f64;
        let samples = (0..=n)
            .map(|k| {
                let v = f(k as f64 * h);
                debug_assert_eq!((v.nrows(), v.ncols()), (m2, m1));
                v
            })
            .collect();
        Self::from_samples(samples, h)
    }

    pub fn n(&self) -> usize {
        self.samples.len() - 1
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn l(&self) -> f64 {
        self.h * self.n() as f64
    }
    pub fn m1(&self) -> usize {
        self.samples[0].ncols()
    }
    pub fn m2(&self) -> usize {
        self.samples[0].nrows()
    }
    pub fn sample(&self, k: usize) -> &CMat {
        &self.samples[k]
    }
    pub fn derivative(&self, k: usize) -> &CMat {
        &self.derivative[k]
    }
    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }
}

fn trapezoid_weight(k: usize, n: usize, h: f64) -> f64 {
    if k == 0 || k == n {
        0.5 * h
    } else {
        h
    }
}

/// Kernel blocks s(x_i, x_j) for i <= j, mirrored Hermitian; the zeta
/// integral is a cumulative trapezoid along each diagonal.
fn kernel_blocks(profile: &Phi1Profile) -> Vec<Vec<CMat>> {
    let n = profile.n();
    let m2 = profile.m2();
    let h = profile.h;
    let d = &profile.derivative;
    let mut blocks = vec![vec![CMat::zeros(m2, m2); n + 1]; n + 1];
    for diag in 0..=n {
        // Running full-weight sum T_i = sum_{p=0..i} D_p D_{p+diag}^*.
        let mut running = CMat::zeros(m2, m2);
        for i in 0..=(n - diag) {
            let j = i + diag;
            running += &d[i] * d[j].adjoint();
            if i >= 1 {
                // Trapezoid: halve the p = 0 and p = i contributions.
                let s = (&running - (&d[0] * d[diag].adjoint() + &d[i] * d[j].adjoint()) * real(0.5))
                    * real(h);
                blocks[i][j] = s.clone();
                blocks[j][i] = s.adjoint();
            }
            // i = 0: zero-length integral, block stays zero.
        }
    }
    blocks
}

/// The discretized kernel operator in symmetrized coordinates together with
/// its Cholesky factor; leading triangles solve every restriction to
/// [0, x_k] after a rank-m2 endpoint-weight correction.
pub struct SKernel {
    n: usize,
    m2: usize,
    h: f64,
    /// Lower Cholesky factor of I + W^{1/2} K W^{1/2}.
    chol_l: CMat,
    min_diag: f64,
}

/// Assemble and factor the kernel operator. Cholesky failure means the
/// profile is not one generated by a bounded potential at this resolution.
pub fn s_kernel(profile: &Phi1Profile) -> Result<SKernel> {
    let n = profile.n();
    let m2 = profile.m2();
    let h = profile.h;
    let blocks = kernel_blocks(profile);
    let size = (n + 1) * m2;
    let mut m = CMat::zeros(size, size);
    for i in 0..=n {
        let wi = trapezoid_weight(i, n, h).sqrt();
        for j in 0..=n {
            let wj = trapezoid_weight(j, n, h).sqrt();
            let b = &blocks[i][j];
            for r in 0..m2 {
                for c in 0..m2 {
                    m[(i * m2 + r, j * m2 + c)] = b[(r, c)] * real(wi * wj);
                }
            }
        }
        for r in 0..m2 {
            m[(i * m2 + r, i * m2 + r)] += ONE;
        }
    }
    let m = hermitize(&m);
    let chol = nalgebra::Cholesky::new(m).ok_or(Error::NotPositiveDefinite {
        context: "kernel operator (corrupted profile or too-coarse grid)",
        min_eig: f64::NAN,
    })?;
    let chol_l = chol.l();
    let min_diag = (0..size)
        .map(|i| chol_l[(i, i)].re)
        .fold(f64::INFINITY, f64::min);
    Ok(SKernel {
        n,
        m2,
        h,
        chol_l,
        min_diag,
    })
}

impl SKernel {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m2(&self) -> usize {
        self.m2
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Smallest Cholesky pivot; a strictly positive value certifies the
    /// factorization went through without breakdown.
    pub fn min_pivot(&self) -> f64 {
        self.min_diag
    }

    fn forward_sub(&self, s: usize, b: &CMat) -> CMat {
        let l = &self.chol_l;
        let cols = b.ncols();
        let mut y = b.clone_owned();
        for i in 0..s {
            for c in 0..cols {
                let mut acc = y[(i, c)];
                for k in 0..i {
                    acc -= l[(i, k)] * y[(k, c)];
                }
                y[(i, c)] = acc / l[(i, i)];
            }
        }
        y
    }

    fn backward_sub(&self, s: usize, b: &CMat) -> CMat {
        let l = &self.chol_l;
        let cols = b.ncols();
        let mut x = b.clone_owned();
        for i in (0..s).rev() {
            for c in 0..cols {
                let mut acc = x[(i, c)];
                for k in (i + 1)..s {
                    acc -= l[(k, i)].conj() * x[(k, c)];
                }
                x[(i, c)] = acc / l[(i, i)].conj();
            }
        }
        x
    }

    /// Solve with the leading principal block of the symmetrized operator.
    fn solve_block(&self, s: usize, b: &CMat) -> CMat {
        self.backward_sub(s, &self.forward_sub(s, b))
    }

    /// Solve the restricted Nystroem system (S on [0, x_k]) for a grid
    /// function given as node blocks (m2 x cols each); returns node blocks.
    ///
    /// For interior k the right-endpoint trapezoid weight of the restriction
    /// differs from the full-interval weight at that node; the difference is
    /// a rank-m2 update handled by a Woodbury step against the shared factor.
    pub fn solve_restricted(&self, k: usize, f: &[CMat]) -> Result<Vec<CMat>> {
        let m2 = self.m2;
        if k > self.n || f.len() != k + 1 {
            return Err(Error::Invalid(format!(
                "restriction solve: node {k}, got {} blocks",
                f.len()
            )));
        }
        if k == 0 {
            // Zero-length interval: S restricts to the identity.
            return Ok(vec![f[0].clone()]);
        }
        let cols = f[0].ncols();
        let s = (k + 1) * m2;
        let sqrt2 = real(std::f64::consts::SQRT_2);

        // Stack W_k^{1/2} f, where W_k are the [0, x_k] trapezoid weights.
        let mut rhs = CMat::zeros(s, cols);
        for i in 0..=k {
            let w = trapezoid_weight(i, k, self.h).sqrt();
            for r in 0..m2 {
                for c in 0..cols {
                    rhs[(i * m2 + r, c)] = f[i][(r, c)] * real(w);
                }
            }
        }

        let corrected = if k == self.n {
            // Full interval: leading block IS the operator.
            self.solve_block(s, &rhs)
        } else {
            // T_k = D (M_k + E E*) D with D scaling the last node block by
            // 1/sqrt(2) and E the injection of that block.
            let mut c0 = rhs; // D^{-1} rhs
            for r in 0..m2 {
                for c in 0..cols {
                    c0[(k * m2 + r, c)] *= sqrt2;
                }
            }
            let w0 = self.solve_block(s, &c0);
            // Woodbury: (M + EE*)^{-1} = M^{-1} - M^{-1}E (I + E*M^{-1}E)^{-1} E*M^{-1}.
            let mut e = CMat::zeros(s, m2);
            for r in 0..m2 {
                e[(k * m2 + r, r)] = ONE;
            }
            let me = self.solve_block(s, &e);
            let cap = cid(m2) + e.adjoint() * &me;
            let ew = e.adjoint() * &w0;
            let corr = cap
                .lu()
                .solve(&ew)
                .ok_or(Error::NotPositiveDefinite {
                    context: "endpoint-correction capacitance",
                    min_eig: f64::NAN,
                })?;
            let mut w = w0 - &me * corr;
            for r in 0..m2 {
                for c in 0..cols {
                    w[(k * m2 + r, c)] *= sqrt2; // y = D^{-1} w
                }
            }
            w
        };

        // Unscale: g = W_k^{-1/2} y.
        let mut out = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let w = trapezoid_weight(i, k, self.h).sqrt();
            let mut block = CMat::zeros(m2, cols);
            for r in 0..m2 {
                for c in 0..cols {
                    block[(r, c)] = corrected[(i * m2 + r, c)] / real(w);
                }
            }
            out.push(block);
        }
        Ok(out)
    }
}

/// Closed-form resolvent of the Volterra integration operator:
/// ((I - zA)^{-1} f)(x) = f(x) - iz * integral_0^x exp(i (t - x) z) f(t) dt,
/// evaluated by a cumulative trapezoid with the exponential factored per
/// cell so the recursion never differences large terms.
pub fn resolvent_a(f: &[CMat], z: Complex64, h: f64) -> Vec<CMat> {
    let n = f.len();
    let mut out = Vec::with_capacity(n);
    out.push(f[0].clone());
    if n == 1 {
        return out;
    }
    let shape = (f[0].nrows(), f[0].ncols());
    let decay = (-I * z * real(h)).exp();
    let mut acc = CMat::zeros(shape.0, shape.1);
    for k in 1..n {
        acc = (&acc + &f[k - 1] * real(0.5 * h)) * decay + &f[k] * real(0.5 * h);
        out.push(&f[k] - &acc * (I * z));
    }
    out
}

/// The triple (A, S, Pi): implicit Volterra operator, factored kernel
/// operator, and the profile columns [Phi1, I].
pub struct SNode {
    pub profile: Phi1Profile,
    pub kernel: SKernel,
}

impl SNode {
    pub fn new(profile: Phi1Profile) -> Result<Self> {
        let kernel = s_kernel(&profile)?;
        Ok(SNode { profile, kernel })
    }

    fn m(&self) -> usize {
        self.profile.m1() + self.profile.m2()
    }

    /// Node blocks of Pi restricted to [0, x_r]: each block is the m2 x m
    /// matrix [Phi1(x_i), I].
    fn pi_blocks(&self, r: usize) -> Vec<CMat> {
        let m1 = self.profile.m1();
        let m2 = self.profile.m2();
        (0..=r)
            .map(|i| {
                let mut b = CMat::zeros(m2, m1 + m2);
                b.view_mut((0, 0), (m2, m1)).copy_from(self.profile.sample(i));
                for d in 0..m2 {
                    b[(d, m1 + d)] = ONE;
                }
                b
            })
            .collect()
    }

    /// Trapezoid pairing Pi* g = integral of Pi(t)* g(t) over [0, x_r].
    fn pi_pairing(&self, r: usize, g: &[CMat]) -> CMat {
        let cols = g[0].ncols();
        let mut acc = CMat::zeros(self.m(), cols);
        let pi = self.pi_blocks(r);
        for i in 0..=r {
            let w = trapezoid_weight(i, r, self.profile.h());
            acc += pi[i].adjoint() * &g[i] * real(w);
        }
        acc
    }

    /// Transfer matrix w_A(r, z) = I - iz Pi* S_r^{-1} (I - zA_r)^{-1} P_r Pi.
    pub fn transfer_matrix(&self, r_index: usize, z: Complex64) -> Result<CMat> {
        let m = self.m();
        if r_index == 0 {
            return Ok(cid(m));
        }
        if r_index > self.profile.n() {
            return Err(Error::Invalid(format!(
                "transfer matrix index {r_index} out of range"
            )));
        }
        let pi = self.pi_blocks(r_index);
        let resolved = resolvent_a(&pi, z, self.profile.h());
        let solved = self.kernel.solve_restricted(r_index, &resolved)?;
        let paired = self.pi_pairing(r_index, &solved);
        Ok(cid(m) - paired * (I * z))
    }

    /// The m x m matrix Pi* S_r^{-1} P_r Pi whose r-derivative drives the
    /// transfer matrix ODE.
    pub fn pi_gram_restricted(&self, r_index: usize) -> Result<CMat> {
        let m = self.m();
        if r_index == 0 {
            return Ok(CMat::zeros(m, m));
        }
        let pi = self.pi_blocks(r_index);
        let solved = self.kernel.solve_restricted(r_index, &pi)?;
        Ok(self.pi_pairing(r_index, &solved))
    }
}

/// Dense assembly of the triple in symmetrized (weighted) coordinates, for
/// residual checks of the defining identity AS - SA* = -i Pi Pi* and for
/// positivity reports. Everything here is plain matrix algebra once built.
pub struct SNodeDense {
    pub a: CMat,
    pub s: CMat,
    pub pi: CMat,
}

pub fn assemble_dense(profile: &Phi1Profile) -> SNodeDense {
    let n = profile.n();
    let m2 = profile.m2();
    let m1 = profile.m1();
    let h = profile.h();
    let size = (n + 1) * m2;

    let weights: Vec<f64> = (0..=n).map(|k| trapezoid_weight(k, n, h)).collect();

    // A f (x_i) = -i * trapezoid integral of f over [0, x_i], conjugated by
    // the weight scaling: A~ = W^{1/2} A W^{-1/2}.
    let mut a = CMat::zeros(size, size);
    for i in 1..=n {
        for jn in 0..=i {
            let cij = trapezoid_weight(jn, i, h);
            let scale = (weights[i] / weights[jn]).sqrt();
            let val = -I * real(cij * scale);
            for r in 0..m2 {
                a[(i * m2 + r, jn * m2 + r)] = val;
            }
        }
    }

    let blocks = kernel_blocks(profile);
    let mut s = CMat::zeros(size, size);
    for i in 0..=n {
        for jn in 0..=n {
            let w = (weights[i] * weights[jn]).sqrt();
            for r in 0..m2 {
                for c in 0..m2 {
                    s[(i * m2 + r, jn * m2 + c)] = blocks[i][jn][(r, c)] * real(w);
                }
            }
        }
        for r in 0..m2 {
            s[(i * m2 + r, i * m2 + r)] += ONE;
        }
    }
    let s = hermitize(&s);

    let m = m1 + m2;
    let mut pi = CMat::zeros(size, m);
    for i in 0..=n {
        let w = weights[i].sqrt();
        let phi = profile.sample(i);
        for r in 0..m2 {
            for c in 0..m1 {
                pi[(i * m2 + r, c)] = phi[(r, c)] * real(w);
            }
            pi[(i * m2 + r, m1 + r)] = real(w);
        }
    }

    SNodeDense { a, s, pi }
}

/// Operator-norm estimate by power iteration on E E*; deterministic start,
/// ample accuracy for residual reporting.
fn op_norm_estimate(e: &CMat) -> f64 {
    let n = e.ncols();
    let mut v = CVec::from_fn(n, |i, _| Complex64::new(1.0 / ((i + 1) as f64), 0.5));
    let mut norm = 0.0;
    for _ in 0..60 {
        let w = e.adjoint() * (e * &v);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        norm = wn.sqrt();
        v = w * real(1.0 / wn);
    }
    norm
}

/// Residual of the structure identity together with the smallest eigenvalue
/// of the assembled kernel operator.
pub struct IdentityReport {
    pub residual: f64,
    pub min_eig: f64,
}

pub fn identity_residual(profile: &Phi1Profile) -> IdentityReport {
    let dense = assemble_dense(profile);
    let lhs = &dense.a * &dense.s - &dense.s * dense.a.adjoint();
    let rhs = &dense.pi * dense.pi.adjoint() * (-I);
    let residual = op_norm_estimate(&(lhs - rhs));
    let min_eig = crate::linalg::min_herm_eig(&dense.s);
    IdentityReport { residual, min_eig }
}

/// Relative residual of u(x, z) = e^{ixz} u(x, 0) w_A(x, 2z); a small value
/// certifies the direct-plus-inverse chain that produced the profile.
pub fn factorization_residual(
    grid: &PotentialGrid,
    snode: &SNode,
    x_index: usize,
    z: Complex64,
) -> Result<f64> {
    let u = propagate(grid, x_index, z)?;
    let u0 = propagate(grid, x_index, ZERO.into())?;
    let w = snode.transfer_matrix(x_index, z * real(2.0))?;
    let x = grid.node(x_index);
    let phase = (I * z * real(x)).exp();
    let rhs = u0 * w * phase;
    if max_abs(&rhs) == 0.0 {
        return Ok(op_norm(&u));
    }
    Ok(op_norm(&(&u - &rhs)) / op_norm(&u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn ci(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn profile_snaps_origin_and_differentiates() {
        let p = Phi1Profile::from_fn(1, 1, 1.0, 50, |x| {
            CMat::from_element(1, 1, ci(x * x, -x))
        })
        .unwrap();
        assert_eq!(p.sample(0).norm(), 0.0);
        // derivative of x^2 - ix at x = 0.5 is 1 - i
        let d = p.derivative(25);
        assert!((d[(0, 0)] - ci(1.0, -1.0)).norm() < 1e-8);
        // one-sided endpoint stencils are second order too
        assert!((p.derivative(0)[(0, 0)] - ci(0.0, -1.0)).norm() < 1e-8);
        assert!((p.derivative(50)[(0, 0)] - ci(2.0, -1.0)).norm() < 1e-8);
    }

    #[test]
    fn zero_profile_gives_identity_kernel() {
        let p = Phi1Profile::from_fn(2, 1, 1.0, 10, |_| CMat::zeros(2, 1)).unwrap();
        let k = s_kernel(&p).unwrap();
        // Solving must return the input unchanged.
        let f: Vec<CMat> = (0..=10)
            .map(|i| CMat::from_element(2, 1, ci(i as f64, 1.0)))
            .collect();
        let g = k.solve_restricted(10, &f).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_profile_kernel_is_min_x_t() {
        // Phi1(x) = x c with scalar c: s(x, t) = |c|^2 min(x, t).
        let c = ci(0.8, -0.3);
        let p = Phi1Profile::from_fn(1, 1, 1.0, 20, |x| CMat::from_element(1, 1, c * x)).unwrap();
        let blocks = kernel_blocks(&p);
        let h = p.h();
        let c2 = c.norm_sqr();
        for i in 0..=20usize {
            for j in i..=20usize {
                let expect = c2 * (i as f64 * h).min(j as f64 * h);
                assert!(
                    (blocks[i][j][(0, 0)].re - expect).abs() < 1e-10,
                    "kernel ({i},{j}): {} vs {expect}",
                    blocks[i][j][(0, 0)].re
                );
            }
        }
    }

    #[test]
    fn restricted_solve_matches_direct_subassembly() {
        // Oracle: assemble the sub-interval Nystroem matrix from scratch and
        // solve densely; the shared-factor path must agree.
        let p = synth::random_profile(3, 1, 2, 1.0, 24, 1.0);
        let kern = s_kernel(&p).unwrap();
        let blocks = kernel_blocks(&p);
        let h = p.h();
        for k in [1usize, 7, 15, 24] {
            let f: Vec<CMat> = (0..=k)
                .map(|i| CMat::from_fn(2, 1, |r, _| ci((i + r) as f64 * 0.1, -(i as f64) * 0.05)))
                .collect();
            let fast = kern.solve_restricted(k, &f).unwrap();

            let m2 = 2;
            let size = (k + 1) * m2;
            let mut dense = CMat::zeros(size, size);
            for i in 0..=k {
                for j in 0..=k {
                    let w = trapezoid_weight(j, k, h);
                    for r in 0..m2 {
                        for c in 0..m2 {
                            dense[(i * m2 + r, j * m2 + c)] = blocks[i][j][(r, c)] * real(w);
                        }
                    }
                }
                for r in 0..m2 {
                    dense[(i * m2 + r, i * m2 + r)] += ONE;
                }
            }
            let mut rhs = CMat::zeros(size, 1);
            for i in 0..=k {
                for r in 0..m2 {
                    rhs[(i * m2 + r, 0)] = f[i][(r, 0)];
                }
            }
            let sol = dense.lu().solve(&rhs).unwrap();
            for i in 0..=k {
                for r in 0..m2 {
                    let diff = (fast[i][(r, 0)] - sol[(i * m2 + r, 0)]).norm();
                    assert!(diff < 1e-10, "node {i} row {r} at k = {k}: diff {diff}");
                }
            }
        }
    }

    #[test]
    fn resolvent_trivial_cases() {
        let f: Vec<CMat> = (0..=16)
            .map(|i| CMat::from_element(1, 1, ci(1.0 + i as f64, -0.5)))
            .collect();
        // z = 0: unchanged.
        let same = resolvent_a(&f, ci(0.0, 0.0), 0.1);
        for (a, b) in f.iter().zip(&same) {
            assert_eq!((a - b).norm(), 0.0);
        }
        // Constant input: (I - zA)^{-1} g = e^{-ixz} g.
        let g: Vec<CMat> = vec![CMat::from_element(1, 1, ci(0.7, 0.4)); 41];
        let h = 0.05;
        let z = ci(1.3, 0.8);
        let out = resolvent_a(&g, z, h);
        for (k, o) in out.iter().enumerate() {
            let x = k as f64 * h;
            let expect = g[0][(0, 0)] * (-I * z * real(x)).exp();
            assert!(
                (o[(0, 0)] - expect).norm() < 1e-3 * expect.norm().max(1.0),
                "node {k}: {} vs {expect}",
                o[(0, 0)]
            );
        }
    }

    #[test]
    fn resolvent_inverts_forward_operator() {
        // Apply the discretized (I - zA) then the resolvent; recover f.
        let n = 160;
        let h = 1.0 / n as f64;
        let z = ci(0.9, 1.4);
        let f: Vec<CMat> = (0..=n)
            .map(|k| {
                let x = k as f64 * h;
                CMat::from_element(1, 1, ci((3.0 * x).sin(), (2.0 * x).cos()))
            })
            .collect();
        // Forward: g = f - z A f with A = -i cumulative trapezoid.
        let mut g = Vec::with_capacity(n + 1);
        let mut acc = ci(0.0, 0.0);
        for k in 0..=n {
            if k > 0 {
                acc += (f[k - 1][(0, 0)] + f[k][(0, 0)]) * 0.5 * h;
            }
            let af = -I * acc;
            g.push(CMat::from_element(1, 1, f[k][(0, 0)] - z * af));
        }
        let back = resolvent_a(&g, z, h);
        let worst = back
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(worst < 2e-4, "round trip error {worst}");
    }

    #[test]
    fn transfer_matrix_trivial_cases() {
        let p = synth::random_profile(5, 1, 1, 1.0, 30, 1.0);
        let node = SNode::new(p).unwrap();
        let w0 = node.transfer_matrix(0, ci(1.0, 2.0)).unwrap();
        assert_eq!((w0 - cid(2)).norm(), 0.0);

        // Zero profile: w(r, z) = diag(I, e^{-irz}).
        let zp = Phi1Profile::from_fn(1, 1, 1.0, 40, |_| CMat::zeros(1, 1)).unwrap();
        let znode = SNode::new(zp).unwrap();
        let z = ci(0.7, 1.1);
        for r in [10usize, 40] {
            let w = znode.transfer_matrix(r, z).unwrap();
            let x = r as f64 * (1.0 / 40.0);
            let expect = (-I * z * real(x)).exp();
            assert!((w[(0, 0)] - ONE).norm() < 1e-10);
            assert!(w[(0, 1)].norm() < 1e-10);
            assert!(w[(1, 0)].norm() < 1e-10);
            assert!(
                (w[(1, 1)] - expect).norm() < 3e-4 * expect.norm(),
                "r = {r}: {} vs {expect}",
                w[(1, 1)]
            );
        }
    }

    #[test]
    fn transfer_matrix_differential_characterization() {
        // d/dr w_A = -iz H(r) w_A with H = d/dr (Pi* S_r^{-1} P_r Pi);
        // both sides by finite differences, residual O(h).
        let p = synth::random_profile(8, 1, 1, 1.0, 80, 0.8);
        let node = SNode::new(p).unwrap();
        let z = ci(0.4, 1.2);
        let h = node.profile.h();
        let mut worst = 0.0_f64;
        for r in [20usize, 40, 60] {
            let wm = node.transfer_matrix(r - 1, z).unwrap();
            let w0 = node.transfer_matrix(r, z).unwrap();
            let wp = node.transfer_matrix(r + 1, z).unwrap();
            let dw = (&wp - &wm) * real(0.5 / h);
            let gm = node.pi_gram_restricted(r - 1).unwrap();
            let gp = node.pi_gram_restricted(r + 1).unwrap();
            let hr = (&gp - &gm) * real(0.5 / h);
            let resid = op_norm(&(&dw + hr * &w0 * (I * z)));
            worst = worst.max(resid);
        }
        assert!(worst < 0.1, "differential residual {worst}");
    }

    #[test]
    fn identity_residual_is_first_order() {
        let residual_at = |n: usize| {
            let p = synth::random_profile(21, 1, 1, 1.0, n, 1.0);
            identity_residual(&p)
        };
        let r100 = residual_at(100);
        let r200 = residual_at(200);
        let r400 = residual_at(400);
        assert!(r100.min_eig > 0.0);
        assert!(r200.min_eig > 0.0);
        assert!(r400.min_eig > 0.0);
        let order = (r100.residual / r400.residual).log2() / 2.0;
        assert!(
            order >= 0.9,
            "observed order {order} ({} / {} / {})",
            r100.residual,
            r200.residual,
            r400.residual
        );
        let h = 1.0 / 100.0;
        assert!(r100.residual <= 20.0 * h, "residual {} vs C h", r100.residual);
    }

    #[test]
    fn transfer_matrix_tends_to_identity_at_origin() {
        let p = synth::random_profile(2, 2, 1, 1.0, 64, 1.0);
        let node = SNode::new(p).unwrap();
        let z = ci(0.5, 1.5);
        let mut prev = f64::INFINITY;
        for r in [16usize, 8, 4, 2] {
            let w = node.transfer_matrix(r, z).unwrap();
            let dev = op_norm(&(w - cid(3)));
            assert!(dev < prev + 1e-12);
            prev = dev;
        }
        assert!(prev < 0.2);
    }
}
