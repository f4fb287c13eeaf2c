//! Seeded synthetic inputs for randomized suites: smooth bounded potentials,
//! profiles, and contractions. All generators are deterministic in the seed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::grid::PotentialGrid;
use crate::linalg::{op_norm, real, CMat};
use crate::snode::Phi1Profile;

fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn unit(r: &mut ChaCha12Rng) -> f64 {
    r.random::<f64>() * 2.0 - 1.0
}

/// A smooth m1 x m2 potential built from a low-order trigonometric sum and
/// rescaled so the max operator norm over the nodes equals `target_bound`.
pub fn random_smooth_potential(
    seed: u64,
    m1: usize,
    m2: usize,
    l: f64,
    n: usize,
    target_bound: f64,
) -> Result<PotentialGrid> {
    let mut r = rng(seed);
    let modes = 3;
    let mut coeff_cos = Vec::new();
    let mut coeff_sin = Vec::new();
    for _ in 0..=modes {
        coeff_cos.push(CMat::from_fn(m1, m2, |_, _| {
            Complex64::new(unit(&mut r), unit(&mut r))
        }));
        coeff_sin.push(CMat::from_fn(m1, m2, |_, _| {
            Complex64::new(unit(&mut r), unit(&mut r))
        }));
    }
    let value = |x: f64| {
        let mut v = CMat::zeros(m1, m2);
        for (k, (cc, cs)) in coeff_cos.iter().zip(&coeff_sin).enumerate() {
            let w = std::f64::consts::PI * k as f64 * x / l;
            v += cc * real(w.cos()) + cs * real(w.sin());
        }
        v
    };
    let h = l / n as f64;
    let max = (0..=n)
        .map(|k| op_norm(&value(k as f64 * h)))
        .fold(0.0_f64, f64::max);
    let scale = if max > 0.0 { target_bound / max } else { 0.0 };
    PotentialGrid::from_fn(m1, m2, l, n, |x| value(x) * real(scale))
}

/// A smooth m2 x m1 profile with value 0 at the origin, for exercising the
/// kernel machinery on inputs that did not come from a potential.
pub fn random_profile(seed: u64, m1: usize, m2: usize, l: f64, n: usize, scale: f64) -> Phi1Profile {
    let mut r = rng(seed);
    let modes = 3;
    let coeffs: Vec<CMat> = (1..=modes)
        .map(|_| CMat::from_fn(m2, m1, |_, _| Complex64::new(unit(&mut r), unit(&mut r))))
        .collect();
    let lin = CMat::from_fn(m2, m1, |_, _| Complex64::new(unit(&mut r), unit(&mut r)));
    let h = l / n as f64;
    let samples: Vec<CMat> = (0..=n)
        .map(|k| {
            let x = k as f64 * h;
            let mut v = &lin * real(scale * x / l);
            for (m, c) in coeffs.iter().enumerate() {
                let w = std::f64::consts::PI * (m + 1) as f64 * x / l;
                v += c * real(scale * w.sin() / (m + 1) as f64 / 4.0);
            }
            v
        })
        .collect();
    Phi1Profile::from_samples(samples, h).expect("synthetic profile is valid")
}

/// Random m2 x m1 matrix with operator norm at most one.
pub fn random_contraction(seed: u64, m2: usize, m1: usize) -> CMat {
    let mut r = rng(seed);
    let raw = CMat::from_fn(m2, m1, |_, _| Complex64::new(unit(&mut r), unit(&mut r)));
    let norm = op_norm(&raw);
    if norm <= 1.0 {
        raw
    } else {
        // Rescale slightly inside the ball to stay clear of the boundary.
        raw * real(0.999 / norm)
    }
}

/// Random property-compatible pair [I; alpha] with a contraction alpha,
/// stacked to an m x m1 matrix.
pub fn random_pair(seed: u64, m1: usize, m2: usize) -> CMat {
    let alpha = random_contraction(seed, m2, m1);
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
