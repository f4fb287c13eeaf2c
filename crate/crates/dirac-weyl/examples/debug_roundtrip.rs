// Scratch diagnostic for the inverse chain on the constant potential.
use dirac_weyl::grid::PotentialGrid;
use dirac_weyl::inverse::*;
use dirac_weyl::propagator::boundary_rows;
use dirac_weyl::snode::s_kernel;
use dirac_weyl::weyl::WeylOptions;
use num_complex::Complex64;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let a: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100.0);
    let margin: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let c = 0.5;
    let l = 1.0;
    let grid = PotentialGrid::constant_scalar(Complex64::new(c, 0.0), l, n).unwrap();
    let eta = grid.norm_bound() + margin;
    let nxi = default_nxi(a, l, eta);
    println!("eta={eta} a={a} nxi={nxi}");
    let data = weyl_line_from_grid(&grid, eta, a, nxi, &WeylOptions::default()).unwrap();

    let rec = inverse_pipeline(&data, l, n, &FourierOptions::default()).unwrap();
    println!("diag: beta_orth={:.3e} gamma_orth={:.3e} cross={:.3e} tang={:.3e}",
        rec.diagnostics.beta_orthonormality,
        rec.diagnostics.gamma.orthonormality,
        rec.diagnostics.gamma.cross,
        rec.diagnostics.gamma.tangency);

    let mut worst = (0.0f64, 0usize);
    for k in 0..=(7 * n / 10) {
        let e = (&rec.v[k] - grid.sample(k)).norm();
        if e > worst.0 {
            worst = (e, k);
        }
    }
    println!("interior v worst {:?}", worst);
    for k in [0, 1, 2, 3, 5, 10, 60, 100, 140, 180, n*7/10, n] {
        println!(
            "  k={k:3} v={:+.5}{:+.5}i  err={:.3e}",
            rec.v[k][(0, 0)].re,
            rec.v[k][(0, 0)].im,
            (&rec.v[k] - grid.sample(k)).norm()
        );
    }

    // beta/gamma interior errors
    let profile = recover_phi1(&data, l, n, &FourierOptions::default()).unwrap();
    let kernel = s_kernel(&profile).unwrap();
    let beta = recover_beta(&profile, &kernel).unwrap();
    let rows = boundary_rows(&grid).unwrap();
    let comp = complete_gamma(&beta, profile.h()).unwrap();
    let mut wb = (0.0f64, 0usize);
    let mut wg = (0.0f64, 0usize);
    for k in 0..=(7 * n / 10) {
        let e = (&beta[k] - &rows.beta[k]).norm();
        if e > wb.0 { wb = (e, k); }
        let e2 = (&comp.gamma[k] - &rows.gamma[k]).norm();
        if e2 > wg.0 { wg = (e2, k); }
    }
    println!("interior beta worst {:?}  gamma worst {:?}", wb, wg);
}
