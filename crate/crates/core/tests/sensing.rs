mod common;

use std::f64::consts::PI;

use common::{c, random_matrix, random_psd};
use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_isac::channel::{sensing_matrix, steering_derivatives, ula_steering, CMatrix};
use ris_isac::optimizer::target_crb;
use ris_isac::sensing::*;
use ris_isac::derive_geometry;

fn blocks(theta: f64, phi: f64, beta: Complex64, n: usize, r: &CMatrix) -> FisherBlocks {
    let a = ula_steering(theta, phi, n, PI).entries;
    let g = a.conjugate() * a.transpose();
    let (gt, gp) = steering_derivatives(theta, phi, n, PI);
    fisher_information(&g, &gt, &gp, beta, r, 100, 1e-12).unwrap()
}

fn random_blocks(rng: &mut ChaCha8Rng) -> FisherBlocks {
    let m = random_matrix(4, 4, rng);
    let m: Matrix4<f64> = Matrix4::from_fn(|i, j| m[(i, j)].re);
    let f = m * m.transpose() + Matrix4::identity() * 0.1;
    FisherBlocks {
        f_angles: f.fixed_view::<2, 2>(0, 0).into(),
        f_cross: f.fixed_view::<2, 2>(0, 2).into(),
        f_gain: Matrix2::from_diagonal_element(f[(2, 2)] + f[(3, 3)]),
    }
}

#[test]
fn sinr_identity_example() {
    let i = CMatrix::identity(6, 6);
    assert!((sensing_sinr(&i, &CMatrix::zeros(6, 6), &i, 1.0) - 6.0).abs() < 1e-12);
}

#[test]
fn frobenius_and_trace_forms_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a_i = random_matrix(8, 8, &mut rng);
        let a_j = random_matrix(8, 8, &mut rng);
        let w = random_matrix(8, 12, &mut rng);
        let r = &w * w.adjoint();
        let x = sensing_sinr(&a_i, &a_j, &w, 0.3);
        let y = sensing_sinr_cov(&a_i, &a_j, &r, 0.3);
        assert!(common::rel_err(x, y) < 1e-10);
    }
}

#[test]
fn symmetric_targets_have_equal_sinr() {
    let a = ula_steering(0.4, -0.2, 8, PI);
    let beta = Complex64::from_polar(2e-6, 0.3);
    let r = CMatrix::identity(8, 8) * c(4.0 / 8.0);
    let w = CMatrix::identity(8, 8) * c((4.0f64 / 8.0).sqrt());
    let a_l = sensing_matrix(beta, &a);
    let a_e = sensing_matrix(beta, &a);
    let x = sensing_sinr_cov(&a_l, &a_e, &r, 1e-12);
    let y = sensing_sinr_cov(&a_e, &a_l, &r, 1e-12);
    assert!((x - y).abs() < 1e-9);
    assert!(common::rel_err(sensing_sinr(&a_l, &a_e, &w, 1e-12), x) < 1e-10);
}

#[test]
fn fisher_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let theta = rng.random_range(-PI..PI);
        let phi = rng.random_range(-1.3..1.3);
        let beta = Complex64::from_polar(rng.random_range(1e-7..1e-5), rng.random_range(0.0..2.0 * PI));
        let r = random_psd(8, 3, &mut rng);
        let f = blocks(theta, phi, beta, 8, &r).full();
        let oracle = common::fd_fisher(theta, phi, beta, 8, PI, &r, 100, 1e-12);
        assert!(common::rel_err_matrix4(&f, &oracle) < 1e-5);
    }
}

#[test]
fn fisher_is_symmetric_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let r = random_psd(8, 8, &mut rng);
    let f = blocks(0.7, 0.2, Complex64::from_polar(1e-6, 2.0), 8, &r).full();
    assert!((f - f.transpose()).norm() <= 1e-9 * f.norm());
    assert!(f.symmetric_eigen().eigenvalues.min() >= -1e-9 * f.norm());
}

#[test]
fn degenerate_fisher_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let r1 = random_psd(1, 1, &mut rng);
    let f = blocks(0.4, 0.2, c(1e-6), 1, &r1);
    assert_eq!(f.f_angles, Matrix2::zeros());
    assert!(crb_aod(&f).is_err());

    let r = random_psd(8, 8, &mut rng);
    let f = blocks(0.0, 0.3, c(1e-6), 8, &r);
    assert_eq!(f.f_angles[(0, 0)], 0.0);
}

#[test]
fn non_psd_covariance_is_rejected() {
    let g = CMatrix::identity(2, 2);
    let mut r = CMatrix::identity(2, 2);
    r[(1, 1)] = c(-1.0);
    assert!(matches!(
        fisher_information(&g, &g, &g, c(1.0), &r, 10, 1.0),
        Err(SensingError::NotPsd(_))
    ));
    let mut skew = CMatrix::identity(2, 2);
    skew[(0, 1)] = c(0.5);
    assert!(fisher_information(&g, &g, &g, c(1.0), &skew, 10, 1.0).is_err());
}

#[test]
fn linear_array_joint_bound_is_unidentifiable() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let r = random_psd(8, 8, &mut rng);
    let f = blocks(-2.4, -0.15, Complex64::from_polar(1e-6, 0.5), 8, &r);
    assert!(matches!(crb_aod(&f), Err(SensingError::Unidentifiable(_))));
    let per = crb_per_angle(&f).unwrap();
    assert!(!per.joint);
    assert!(per.crb[(0, 0)] > 0.0 && per.crb[(1, 1)] > 0.0);
}

#[test]
fn block_diagonal_bound_is_plain_inverse() {
    let f = FisherBlocks {
        f_angles: Matrix2::new(3.0, 0.5, 0.5, 1.0),
        f_cross: Matrix2::zeros(),
        f_gain: Matrix2::from_diagonal_element(2.0),
    };
    let crb = crb_aod(&f).unwrap();
    assert!(crb.joint);
    assert!((crb.crb - f.f_angles.try_inverse().unwrap()).norm() < 1e-14);
    assert!((crb.root_combined_deg - crb.crb.trace().sqrt().to_degrees()).abs() < 1e-12);
}

#[test]
fn schur_bound_equals_full_inverse_block() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let f = random_blocks(&mut rng);
        let crb = crb_aod(&f).unwrap();
        let inv = f.full().try_inverse().unwrap();
        let block: Matrix2<f64> = inv.fixed_view::<2, 2>(0, 0).into();
        assert!((crb.crb - block).norm() <= 1e-8 * block.norm());
    }
}

#[test]
fn bounds_scale_inversely_with_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let r = random_psd(8, 8, &mut rng);
    let beta = Complex64::from_polar(1e-6, 1.0);
    for c_scale in [0.5, 2.0, 7.0] {
        let base = blocks(-2.4, -0.15, beta, 8, &r);
        let scaled = blocks(-2.4, -0.15, beta, 8, &(&r * c(c_scale)));
        let a = crb_per_angle(&base).unwrap().crb;
        let b = crb_per_angle(&scaled).unwrap().crb;
        assert!((a / c_scale - b).norm() <= 1e-9 * b.norm());
    }
    let f = random_blocks(&mut rng);
    let scaled = FisherBlocks {
        f_angles: f.f_angles * 3.0,
        f_cross: f.f_cross * 3.0,
        f_gain: f.f_gain * 3.0,
    };
    let a = crb_aod(&f).unwrap().crb;
    let b = crb_aod(&scaled).unwrap().crb;
    assert!((a / 3.0 - b).norm() <= 1e-9 * b.norm());
}

#[test]
fn farther_eavesdropper_has_larger_bound() {
    let cfg = common::table1();
    let geo = derive_geometry(&cfg).unwrap();
    let ch = ris_isac::channel::draw_channels(&cfg, &geo, 1);
    let r = DMatrix::identity(8, 8) * c(cfg.total_power_w / 8.0);
    let far = target_crb(&cfg, &ch.eaves, &r).unwrap();
    let mut near_target = ch.eaves.clone();
    near_target.distance = geo.d_legit;
    near_target.beta = Complex64::from_polar(
        ris_isac::channel::round_trip_gain(cfg.wavelength(), cfg.rcs_m2, geo.d_legit),
        ch.eaves.beta.arg(),
    );
    let near = target_crb(&cfg, &near_target, &r).unwrap();
    assert!(far.crb[(0, 0)] > near.crb[(0, 0)]);
    assert!(far.root_combined_deg > near.root_combined_deg);
}

proptest! {
    #[test]
    fn fisher_is_linear_in_covariance(seed in 0u64..1000, theta in -3.0f64..3.0, phi in -1.2f64..1.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r1 = random_psd(6, 2, &mut rng);
        let r2 = random_psd(6, 3, &mut rng);
        let beta = Complex64::from_polar(1e-6, seed as f64);
        let sum = blocks(theta, phi, beta, 6, &(&r1 + &r2)).full();
        let parts = blocks(theta, phi, beta, 6, &r1).full() + blocks(theta, phi, beta, 6, &r2).full();
        prop_assert!((sum - parts).norm() <= 1e-9 * sum.norm().max(1e-300));
    }
}
