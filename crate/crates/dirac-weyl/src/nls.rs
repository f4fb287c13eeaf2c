//! Zero-curvature data for the focusing matrix nonlinear Schroedinger flow,
//! time propagation of the boundary matrix R(t, z), and the linear
//! fractional evolution of the Weyl function.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Signature;
use crate::linalg::{cid, cond_2, j_signature, max_abs, max_herm_eig, op_norm, real, CMat, I};

/// Supplies the solution field v(x, t) and its x-derivative on demand.
///
/// The zero and plane-wave models are exact solutions of the flow; sampled
/// models interpolate user data bilinearly and only carry the zero-curvature
/// residual as a runtime proxy for the smoothness hypotheses.
#[derive(Clone, Debug)]
pub enum SolutionModel {
    Zero { m1: usize, m2: usize },
    PlaneWave { amplitude: Complex64 },
    Sampled(SampledModel),
}

impl SolutionModel {
    pub fn signature(&self) -> Signature {
        match self {
            SolutionModel::Zero { m1, m2 } => Signature { m1: *m1, m2: *m2 },
            SolutionModel::PlaneWave { .. } => Signature { m1: 1, m2: 1 },
            SolutionModel::Sampled(s) => Signature { m1: s.m1, m2: s.m2 },
        }
    }

    pub fn v(&self, x: f64, t: f64) -> CMat {
        match self {
            SolutionModel::Zero { m1, m2 } => CMat::zeros(*m1, *m2),
            SolutionModel::PlaneWave { amplitude } => {
                let phase = (-I * real(amplitude.norm_sqr() * t)).exp();
                CMat::from_element(1, 1, amplitude * phase)
            }
            SolutionModel::Sampled(s) => {
                let _ = x;
                s.interp(&s.v, x, t)
            }
        }
    }

    pub fn v_x(&self, x: f64, t: f64) -> CMat {
        match self {
            SolutionModel::Zero { m1, m2 } => CMat::zeros(*m1, *m2),
            SolutionModel::PlaneWave { .. } => CMat::zeros(1, 1),
            SolutionModel::Sampled(s) => s.interp(&s.vx, x, t),
        }
    }

    /// Sup of the field norm; exact for presets, sampled max otherwise.
    pub fn norm_sup(&self) -> f64 {
        match self {
            SolutionModel::Zero { .. } => 0.0,
            SolutionModel::PlaneWave { amplitude } => amplitude.norm(),
            SolutionModel::Sampled(s) => s
                .v
                .iter()
                .map(op_norm)
                .fold(0.0_f64, f64::max),
        }
    }
}

/// Field samples on a rectangle [x0, x1] x [0, t1]; x-derivatives are
/// precomputed by central differences and both fields interpolate
/// bilinearly with clamping at the edges.
#[derive(Clone, Debug)]
pub struct SampledModel {
    pub m1: usize,
    pub m2: usize,
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub t1: f64,
    pub nt: usize,
    /// Row-major [it][ix].
    v: Vec<CMat>,
    vx: Vec<CMat>,
}

/// JSON schema for sampled models: grid extents plus one row per (t, x)
/// node, each row 2*m1*m2 floats (Re, Im row-major).
#[derive(Debug, Deserialize)]
pub struct SampledModelSpec {
    pub m1: usize,
    pub m2: usize,
    pub x0: f64,
    pub x1: f64,
    pub nx: usize,
    pub t1: f64,
    pub nt: usize,
    pub samples: Vec<Vec<f64>>,
}

impl SampledModel {
    pub fn from_spec(spec: &SampledModelSpec) -> Result<Self> {
        let (m1, m2) = (spec.m1, spec.m2);
        let rows = (spec.nx + 1) * (spec.nt + 1);
        if spec.nx < 2 || spec.nt < 1 || spec.x1 <= spec.x0 || spec.t1 <= 0.0 {
            return Err(Error::Invalid("sampled model grid is degenerate".into()));
        }
        if spec.samples.len() != rows {
            return Err(Error::Invalid(format!(
                "sampled model expects {rows} rows, got {}",
                spec.samples.len()
            )));
        }
        let mut v = Vec::with_capacity(rows);
        for (k, row) in spec.samples.iter().enumerate() {
            if row.len() != 2 * m1 * m2 {
                return Err(Error::Invalid(format!(
                    "sampled model row {k} has {} values, expected {}",
                    row.len(),
                    2 * m1 * m2
                )));
            }
            v.push(CMat::from_fn(m1, m2, |i, j| {
                let base = 2 * (i * m2 + j);
                Complex64::new(row[base], row[base + 1])
            }));
        }
        let hx = (spec.x1 - spec.x0) / spec.nx as f64;
        let mut vx = Vec::with_capacity(rows);
        for it in 0..=spec.nt {
            for ix in 0..=spec.nx {
                let at = |i: usize| &v[it * (spec.nx + 1) + i];
                let d = if ix == 0 {
                    (at(1) * real(4.0) - at(2) - at(0) * real(3.0)) * real(0.5 / hx)
                } else if ix == spec.nx {
                    (at(spec.nx) * real(3.0) - at(spec.nx - 1) * real(4.0) + at(spec.nx - 2))
                        * real(0.5 / hx)
                } else {
                    (at(ix + 1) - at(ix - 1)) * real(0.5 / hx)
                };
                vx.push(d);
            }
        }
        Ok(SampledModel {
            m1,
            m2,
            x0: spec.x0,
            x1: spec.x1,
            nx: spec.nx,
            t1: spec.t1,
            nt: spec.nt,
            v,
            vx,
        })
    }

    fn interp(&self, field: &[CMat], x: f64, t: f64) -> CMat {
        let hx = (self.x1 - self.x0) / self.nx as f64;
        let ht = self.t1 / self.nt as f64;
        let fx = ((x - self.x0) / hx).clamp(0.0, self.nx as f64);
        let ft = (t / ht).clamp(0.0, self.nt as f64);
        let ix = (fx.floor() as usize).min(self.nx - 1);
        let it = (ft.floor() as usize).min(self.nt - 1);
        let ax = fx - ix as f64;
        let at = ft - it as f64;
        let idx = |r: usize, c: usize| &field[r * (self.nx + 1) + c];
        idx(it, ix) * real((1.0 - ax) * (1.0 - at))
            + idx(it, ix + 1) * real(ax * (1.0 - at))
            + idx(it + 1, ix) * real((1.0 - ax) * at)
            + idx(it + 1, ix + 1) * real(ax * at)
    }
}

/// G(x, t, z) = izj + jV.
pub fn g_matrix(sig: Signature, v: &CMat, z: Complex64) -> CMat {
    let j = sig.j();
    &j * (I * z) + &j * sig.embed(v)
}

/// F(x, t, z) = i(z^2 j - iz jV - (V_x + jV^2)/2)
///            = i z^2 j + z jV - (i/2) V_x - (i/2) j V^2.
pub fn f_matrix(sig: Signature, v: &CMat, v_x: &CMat, z: Complex64) -> CMat {
    let j = sig.j();
    let bv = sig.embed(v);
    let bvx = sig.embed(v_x);
    let jv = &j * &bv;
    &j * (I * z * z) + jv * z - &bvx * (I * real(0.5)) - &j * (&bv * &bv) * (I * real(0.5))
}

/// Finite-difference residual of the compatibility equation
/// G_t - F_x + [G, F] at one point; second order in the step for exact
/// solutions of the flow.
pub fn zero_curvature_residual(
    model: &SolutionModel,
    x: f64,
    t: f64,
    z: Complex64,
    h: f64,
) -> f64 {
    let sig = model.signature();
    let g_t = (g_matrix(sig, &model.v(x, t + h), z) - g_matrix(sig, &model.v(x, t - h), z))
        * real(0.5 / h);
    let f_at = |xx: f64| f_matrix(sig, &model.v(xx, t), &model.v_x(xx, t), z);
    let f_x = (f_at(x + h) - f_at(x - h)) * real(0.5 / h);
    let g = g_matrix(sig, &model.v(x, t), z);
    let f = f_matrix(sig, &model.v(x, t), &model.v_x(x, t), z);
    let comm = &g * &f - &f * &g;
    op_norm(&(g_t - f_x + comm))
}

/// R(t, z) on a uniform time grid, from R_t = F(0, t, z) R, R(0) = I,
/// integrated with the classical fourth-order one-step method.
pub struct TimePropagator {
    pub z: Complex64,
    pub ts: Vec<f64>,
    pub rs: Vec<CMat>,
}

impl TimePropagator {
    pub fn at_end(&self) -> &CMat {
        self.rs.last().expect("at least the initial node")
    }
}

pub fn evolve_r(model: &SolutionModel, z: Complex64, t_final: f64, nt: usize) -> Result<TimePropagator> {
    if nt == 0 || !(t_final >= 0.0) {
        return Err(Error::Invalid(format!(
            "time evolution needs nt >= 1 and T >= 0 (got nt = {nt}, T = {t_final})"
        )));
    }
    let sig = model.signature();
    let m = sig.m();
    let tau = t_final / nt as f64;
    let f_at = |t: f64| f_matrix(sig, &model.v(0.0, t), &model.v_x(0.0, t), z);
    let mut ts = Vec::with_capacity(nt + 1);
    let mut rs = Vec::with_capacity(nt + 1);
    ts.push(0.0);
    rs.push(cid(m));
    for k in 0..nt {
        let t = k as f64 * tau;
        let f0 = f_at(t);
        let fm = f_at(t + 0.5 * tau);
        let f1 = f_at(t + tau);
        let cur = &rs[k];
        let k1 = &f0 * cur;
        let k2 = &fm * &(cur + &k1 * real(0.5 * tau));
        let k3 = &fm * &(cur + &k2 * real(0.5 * tau));
        let k4 = &f1 * &(cur + &k3 * real(tau));
        let next = cur + (k1 + k2 * real(2.0) + k3 * real(2.0) + k4) * real(tau / 6.0);
        if max_abs(&next) > 1e300 || !crate::linalg::all_finite(&next) {
            return Err(Error::Overflow { cell: k });
        }
        ts.push(t + tau);
        rs.push(next);
    }
    Ok(TimePropagator { z, ts, rs })
}

/// Linear fractional evolution of the Weyl function through the blocks of
/// R: phi -> (R21 + R22 phi)(R11 + R12 phi)^{-1}. Returns the value and the
/// condition number of the denominator; errors beyond the cap, which bounds
/// the region where the formula is numerically trustworthy.
pub fn evolve_weyl(phi0: &CMat, r: &CMat, cond_cap: f64) -> Result<(CMat, f64)> {
    let m2 = phi0.nrows();
    let m1 = phi0.ncols();
    let r11 = r.view((0, 0), (m1, m1));
    let r12 = r.view((0, m1), (m1, m2));
    let r21 = r.view((m1, 0), (m2, m1));
    let r22 = r.view((m1, m1), (m2, m2));
    let den = r11 + r12 * phi0;
    // Cancellation-aware conditioning: the sum may be tiny while both
    // addends are large, which a bare condition number of `den` misses.
    let scale = op_norm(&r11.into_owned())
        .max(op_norm(&(r12 * phi0)))
        .max(op_norm(&den));
    let smin = crate::linalg::min_singular_value(&den);
    let cond = if smin > 0.0 {
        (scale / smin).max(cond_2(&den))
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > cond_cap {
        return Err(Error::IllConditioned {
            cond,
            cap: cond_cap,
        });
    }
    let num = r21 + r22 * phi0;
    let xt = den
        .transpose()
        .lu()
        .solve(&num.transpose())
        .ok_or(Error::IllConditioned {
            cond,
            cap: cond_cap,
        })?;
    Ok((xt.transpose(), cond))
}

/// Largest eigenvalue of R(t,z)* j R(t,z) - j; nonpositive values certify
/// the contractivity that keeps evolved Weyl functions non-expansive.
pub fn j_contractivity_defect(r: &CMat, m1: usize) -> f64 {
    let m = r.nrows();
    let j = j_signature(m1, m - m1);
    max_herm_eig(&(r.adjoint() * &j * r - &j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PotentialGrid;
    use crate::weyl::{constant_potential_weyl, weyl_function, WeylOptions};

    fn ci(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn plane_wave_is_exact_solution() {
        let model = SolutionModel::PlaneWave {
            amplitude: ci(1.0, 0.0),
        };
        let res = zero_curvature_residual(&model, 0.3, 0.2, ci(2.0, 3.0), 1e-3);
        assert!(res < 1e-5, "plane-wave residual {res}");
        let zero = SolutionModel::Zero { m1: 1, m2: 2 };
        assert!(zero_curvature_residual(&zero, 0.0, 0.1, ci(1.0, 1.0), 1e-3) < 1e-14);
    }

    #[test]
    fn corrupted_field_fails_compatibility() {
        // Scale the field by 1.1 for t > 0: the cubic term breaks.
        #[derive(Clone, Debug)]
        struct Corrupted;
        let base = SolutionModel::PlaneWave {
            amplitude: ci(1.0, 0.0),
        };
        let sig = base.signature();
        let v = |x: f64, t: f64| {
            let scale = if t > 0.0 { 1.1 } else { 1.0 };
            base.v(x, t) * real(scale)
        };
        let _ = Corrupted;
        let h = 1e-3;
        let (x, t, z) = (0.1, 0.2, ci(2.0, 3.0));
        let g_t = (g_matrix(sig, &v(x, t + h), z) - g_matrix(sig, &v(x, t - h), z)) * real(0.5 / h);
        let f_of = |xx: f64| f_matrix(sig, &v(xx, t), &CMat::zeros(1, 1), z);
        let f_x = (f_of(x + h) - f_of(x - h)) * real(0.5 / h);
        let g = g_matrix(sig, &v(x, t), z);
        let f = f_of(x);
        let res = op_norm(&(g_t - f_x + (&g * &f - &f * &g)));
        assert!(res >= 1e-2, "corrupted residual only {res}");
    }

    #[test]
    fn f_matrix_skew_symmetry() {
        let sig = Signature { m1: 1, m2: 2 };
        let v = CMat::from_fn(1, 2, |_, c| ci(0.4 + c as f64 * 0.2, -0.3));
        let vx = CMat::from_fn(1, 2, |_, c| ci(-0.1, 0.05 * (c as f64 + 1.0)));
        let z = ci(1.3, 0.8);
        let f = f_matrix(sig, &v, &vx, z);
        let fc = f_matrix(sig, &v, &vx, z.conj());
        assert!((fc.adjoint() + f).norm() < 1e-13);
    }

    #[test]
    fn zero_model_evolves_diagonally() {
        let model = SolutionModel::Zero { m1: 1, m2: 1 };
        let z = ci(1.0, 2.0);
        let t = 0.4;
        let prop = evolve_r(&model, z, t, 400).unwrap();
        let r = prop.at_end();
        let expect = (I * z * z * real(t)).exp();
        assert!((r[(0, 0)] - expect).norm() < 1e-10 * expect.norm().max(1.0));
        assert!((r[(1, 1)] - (-I * z * z * real(t)).exp()).norm() < 1e-10);
        assert!(r[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn t_zero_returns_identity() {
        let model = SolutionModel::PlaneWave {
            amplitude: ci(1.0, 0.0),
        };
        let prop = evolve_r(&model, ci(0.0, 4.0), 0.0, 1).unwrap();
        assert!((prop.at_end() - cid(2)).norm() < 1e-15);
    }

    #[test]
    fn plane_wave_matches_fine_step_reference() {
        let model = SolutionModel::PlaneWave {
            amplitude: ci(1.0, 0.0),
        };
        let z = ci(1.0, 2.5);
        let t = 0.3;
        let coarse = evolve_r(&model, z, t, 200).unwrap();
        let fine = evolve_r(&model, z, t, 3200).unwrap();
        let err = op_norm(&(coarse.at_end() - fine.at_end()));
        assert!(err < 1e-6, "reference deviation {err}");
    }

    #[test]
    fn lft_trivial_and_zero_model() {
        let phi0 = CMat::from_element(1, 1, ci(0.3, 0.1));
        let (same, cond) = evolve_weyl(&phi0, &cid(2), 1e8).unwrap();
        assert!((same - &phi0).norm() < 1e-15);
        assert!((cond - 1.0).abs() < 1e-12);

        // Zero model: phi(t) = e^{-2iz^2 t} phi0.
        let model = SolutionModel::Zero { m1: 1, m2: 1 };
        let z = ci(0.7, 1.9);
        let t = 0.25;
        let prop = evolve_r(&model, z, t, 400).unwrap();
        let (phi, _) = evolve_weyl(&phi0, prop.at_end(), 1e8).unwrap();
        let expect = phi0[(0, 0)] * (-real(2.0) * I * z * z * real(t)).exp();
        assert!((phi[(0, 0)] - expect).norm() < 1e-9);

        let zero0 = CMat::zeros(1, 1);
        let (still, _) = evolve_weyl(&zero0, prop.at_end(), 1e8).unwrap();
        assert!(still.norm() < 1e-14);
    }

    #[test]
    fn plane_wave_evolution_consistent_with_direct_problem() {
        // LFT-evolved phi at t must equal the Weyl function of the evolved
        // constant potential; both at z = 4i, t = 0.1.
        let amp = ci(1.0, 0.0);
        let model = SolutionModel::PlaneWave { amplitude: amp };
        let z = ci(0.0, 4.0);
        let t = 0.1;
        let l = 3.0;
        let n = 300;

        let phi0 = {
            let grid = PotentialGrid::constant_scalar(amp, l, n).unwrap();
            weyl_function(&grid, z, 0.0, &WeylOptions::default()).unwrap().phi
        };
        let prop = evolve_r(&model, z, t, 1000).unwrap();
        let (evolved, _) = evolve_weyl(&phi0, prop.at_end(), 1e8).unwrap();

        let v_t = model.v(0.0, t)[(0, 0)];
        let grid_t = PotentialGrid::constant_scalar(v_t, l, n).unwrap();
        let direct = weyl_function(&grid_t, z, 0.0, &WeylOptions::default())
            .unwrap()
            .phi;
        let err = (evolved[(0, 0)] - direct[(0, 0)]).norm();
        assert!(err < 1e-4, "evolution consistency error {err}");

        // And the closed form agrees as a second, independent oracle.
        let closed = constant_potential_weyl(v_t, z);
        assert!((direct[(0, 0)] - closed).norm() < 1e-6);
    }

    #[test]
    fn lft_group_property() {
        let model = SolutionModel::PlaneWave {
            amplitude: ci(1.0, 0.0),
        };
        let z = ci(0.5, 3.0);
        let nt = 800;
        let prop = evolve_r(&model, z, 0.4, nt).unwrap();
        let phi0 = CMat::from_element(1, 1, ci(0.1, 0.05));
        let mid = nt / 2;
        let r1 = &prop.rs[mid];
        let r2 = prop.at_end();
        // Composition factor R(t1 -> t2) = R(t2) R(t1)^{-1}.
        let factor = r2 * r1.clone().try_inverse().unwrap();
        let (step1, _) = evolve_weyl(&phi0, r1, 1e8).unwrap();
        let (step2, _) = evolve_weyl(&step1, &factor, 1e8).unwrap();
        let (direct, _) = evolve_weyl(&phi0, r2, 1e8).unwrap();
        assert!(
            (step2 - direct).norm() < 1e-6,
            "group property residual too large"
        );
    }

    #[test]
    fn contractivity_in_the_quarter_plane() {
        // Large Im z and Re z with the right sign keeps R j-contractive;
        // the evolved image of the actual initial Weyl value then stays
        // non-expansive (it is the Weyl function of the evolved system).
        // Deeper in the quarter plane the e^{|Im(i z^2 t)|} splitting pushes
        // the LFT denominator past the conditioning cap, so the scan stays
        // at moderate z.
        let amp = ci(1.0, 0.0);
        let model = SolutionModel::PlaneWave { amplitude: amp };
        for z in [ci(3.0, 3.0), ci(4.0, 3.5), ci(5.0, 4.0)] {
            let prop = evolve_r(&model, z, 0.2, 400).unwrap();
            let defect = j_contractivity_defect(prop.at_end(), 1);
            assert!(defect <= 1e-8, "defect {defect} at z = {z}");

            let phi0 = CMat::from_element(1, 1, constant_potential_weyl(amp, z));
            let (phi, _) = evolve_weyl(&phi0, prop.at_end(), 1e8).unwrap();
            assert!(
                op_norm(&phi) <= 1.0 + 1e-8,
                "evolved Weyl value expanded at z = {z}: {}",
                op_norm(&phi)
            );
        }
    }

    #[test]
    fn conditioning_cap_is_enforced() {
        let phi0 = CMat::from_element(1, 1, ci(1.0, 0.0));
        let mut r = cid(2);
        r[(0, 0)] = ci(1.0, 0.0);
        r[(0, 1)] = ci(-1.0, 1e-12);
        match evolve_weyl(&phi0, &r, 1e8) {
            Err(Error::IllConditioned { .. }) => {}
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_model_round_trips_plane_wave() {
        // Sample the plane wave and check the interpolated model stays close
        // to the analytic one, residual diagnostic included.
        let amp = ci(0.8, 0.0);
        let exact = SolutionModel::PlaneWave { amplitude: amp };
        let (nx, nt) = (40, 60);
        let (x0, x1, t1) = (-0.5, 0.5, 0.3);
        let mut samples = Vec::new();
        for it in 0..=nt {
            for ix in 0..=nx {
                let t = t1 * it as f64 / nt as f64;
                let _x = x0 + (x1 - x0) * ix as f64 / nx as f64;
                let v = exact.v(0.0, t)[(0, 0)];
                samples.push(vec![v.re, v.im]);
            }
        }
        let spec = SampledModelSpec {
            m1: 1,
            m2: 1,
            x0,
            x1,
            nx,
            t1,
            nt,
            samples,
        };
        let model = SolutionModel::Sampled(SampledModel::from_spec(&spec).unwrap());
        let dv = (model.v(0.0, 0.15) - exact.v(0.0, 0.15)).norm();
        assert!(dv < 1e-3, "interpolation error {dv}");
        // Residual proxy is small but not machine-zero for sampled data.
        let res = zero_curvature_residual(&model, 0.0, 0.15, ci(1.0, 2.0), 1e-2);
        assert!(res < 0.05, "sampled residual {res}");
    }
}
