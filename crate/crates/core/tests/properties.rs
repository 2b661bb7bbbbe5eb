mod common;

use approx::assert_abs_diff_eq;
use bernstein_sparse::cdpath::{cd_fit, CdOptions};
use bernstein_sparse::data::Dataset;
use bernstein_sparse::divergence::{dphi, scaled_conjugate};
use bernstein_sparse::penalty::PenaltySpec;
use bernstein_sparse::threshold::threshold;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn rho() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(0.0), Just(0.5), Just(1.0), -3.0..1.0f64]
}

proptest! {
    #[test]
    fn subadditive(rho in rho(), s in 1e-6..1e2f64, t in 1e-6..1e2f64) {
        let p = PenaltySpec::new(rho, 1.0).unwrap();
        let lhs = p.phi(s + t).unwrap();
        let rhs = p.phi(s).unwrap() + p.phi(t).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-14));
    }

    #[test]
    fn ordered_in_rho(a in -3.0..1.0f64, b in -3.0..1.0f64, s in 1e-4..1e2f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (pl, ph) = (PenaltySpec::new(lo, 1.0).unwrap(), PenaltySpec::new(hi, 1.0).unwrap());
        prop_assert!(pl.phi(s).unwrap() >= ph.phi(s).unwrap() * (1.0 - 1e-13));
        prop_assert!(pl.phi_d1(s).unwrap() >= ph.phi_d1(s).unwrap() * (1.0 - 1e-13));
    }

    #[test]
    fn increasing_and_concave(rho in rho(), s in 0.0..50.0f64, h in 1e-3..1.0f64) {
        let p = PenaltySpec::new(rho, 1.0).unwrap();
        prop_assert!(p.phi_d1(s).unwrap() > 0.0);
        prop_assert!(p.phi_d1(s + h).unwrap() <= p.phi_d1(s).unwrap());
        prop_assert!(p.phi(s + h).unwrap() >= p.phi(s).unwrap());
    }

    #[test]
    fn threshold_shrinks_and_is_odd(rho in rho(), la in -2.0..2.0f64, u in 0.0..1.0f64, z in -6.0..6.0f64) {
        let alpha = 10f64.powf(la);
        let spec = PenaltySpec::new(rho, alpha).unwrap();
        let eta = u * spec.continuity_limit() + 1e-12;
        let s = threshold(&spec, z, eta).unwrap().estimate;
        prop_assert!(s.abs() <= z.abs());
        prop_assert!(s == 0.0 || s.signum() == z.signum());
        prop_assert_eq!(threshold(&spec, -z, eta).unwrap().estimate, -s);
    }

    #[test]
    fn threshold_monotone_in_z(rho in rho(), la in -2.0..2.0f64, u in 0.0..1.0f64, z in -6.0..6.0f64, dz in 1e-3..1.0f64) {
        let spec = PenaltySpec::new(rho, 10f64.powf(la)).unwrap();
        let eta = u * spec.continuity_limit() + 1e-12;
        let a = threshold(&spec, z, eta).unwrap().estimate;
        let b = threshold(&spec, z + dz, eta).unwrap().estimate;
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn divergence_nonnegative(rho in rho(), w in prop::collection::vec(1e-3..10.0f64, 1..6), scale in 0.1..3.0f64) {
        let eta: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let d = dphi(rho, &w, &eta).unwrap();
        prop_assert!(d >= -1e-12);
        prop_assert!(dphi(rho, &w, &w).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn scaled_conjugate_consistent(rho in rho(), alpha in 0.05..20.0f64, eta in 0.05..5.0f64, s in 0.0..10.0f64) {
        let v = scaled_conjugate(rho, alpha, eta, s).unwrap();
        let direct = eta / alpha * common::phi(rho, alpha * s);
        prop_assert!((v - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn standardize_invariants(seed in 0u64..1000, n in 3usize..30, p in 1usize..6) {
        let x = Array2::from_shape_fn((n, p), |(i, j)| ((i * 31 + j * 17 + seed as usize) % 13) as f64 * 1.7 + (i * j) as f64);
        let y = Array1::from_shape_fn(n, |i| (i as f64 * 0.37 + seed as f64).sin());
        if let Ok(d) = Dataset::standardize(x.view(), y.view()) {
            for col in d.x().columns() {
                prop_assert!(col.sum().abs() / n as f64 <= 1e-10);
                prop_assert!((col.dot(&col).sqrt() - 1.0).abs() <= 1e-10);
            }
            prop_assert!(d.y().sum().abs() / n as f64 <= 1e-10);
        }
    }
}

/// Centered design with orthonormal columns, via QR of a centered matrix.
fn orthonormal_design(n: usize, p: usize, seed: u64) -> Array2<f64> {
    let mut m = DMatrix::from_fn(n, p, |i, j| (((i as u64 + 1) * 7919 + (j as u64 + 3) * 104729 + seed) % 1009) as f64 / 1009.0);
    for mut c in m.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    let q = m.qr().q();
    Array2::from_shape_fn((n, p), |(i, j)| q[(i, j)])
}

#[test]
fn separable_on_orthonormal_design() {
    for (seed, rho, alpha) in [(1, 0.0, 2.0), (2, -1.0, 1.0), (3, 0.5, 3.0), (4, 1.0, 1.5)] {
        let x = orthonormal_design(12, 6, seed);
        let y = Array1::from_shape_fn(12, |i| (i as f64 * 1.3).cos() * 3.0);
        let d = Dataset::standardize(x.view(), y.view()).unwrap();
        for (a, b) in d.x().iter().zip(x.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let spec = PenaltySpec::new(rho, alpha).unwrap();
        let eta = 0.5 * spec.continuity_limit();
        let fit = cd_fit(&d, &spec, eta, &[0.0; 6], &CdOptions::default()).unwrap();
        for j in 0..6 {
            let want = threshold(&spec, d.xty()[j], eta).unwrap().estimate;
            assert_abs_diff_eq!(fit.coefficients[j], want, epsilon = 1e-8);
        }
    }
}

#[test]
fn tiny_eta_gives_least_squares() {
    let x = Array2::from_shape_fn((30, 4), |(i, j)| ((i * (j + 2)) % 7) as f64 + (i as f64 * 0.1 * (j + 1) as f64).sin());
    let y = Array1::from_shape_fn(30, |i| i as f64 * 0.5 + (i as f64).cos());
    let d = Dataset::standardize(x.view(), y.view()).unwrap();
    let spec = PenaltySpec::new(0.0, 1e-8).unwrap();
    let opts = CdOptions { tol: 1e-13, max_sweeps: 1_000_000, ..Default::default() };
    let fit = cd_fit(&d, &spec, 1e-12, &[0.0; 4], &opts).unwrap();
    let xm = DMatrix::from_fn(30, 4, |i, j| d.x()[[i, j]]);
    let ym = nalgebra::DVector::from_iterator(30, d.y().iter().copied());
    let ols = (xm.transpose() * &xm).lu().solve(&(xm.transpose() * ym)).unwrap();
    for j in 0..4 {
        assert_abs_diff_eq!(fit.coefficients[j], ols[j], epsilon = 1e-6);
    }
}
