mod common;

use std::f64::consts::PI;

use common::{c, fro, random_matrix, random_psd, random_vector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_isac::channel::{draw_attack, draw_channels, sensing_matrix, ula_steering, CMatrix, CVector};
use ris_isac::comm::{user_sinr_direct, LiftedChannels};
use ris_isac::optimizer::*;
use ris_isac::rng::trial_seed;
use ris_isac::{derive_geometry, ScenarioConfig};

fn b_matrix(a: &CMatrix, noise: f64) -> CMatrix {
    a.adjoint() * a * c(1.0 / noise)
}

fn lambda_max(m: &CMatrix) -> f64 {
    sdr_core::hermitian_eigen(m).unwrap().0[0]
}

fn gamma(a_i: &CMatrix, a_j: &CMatrix, r: &CMatrix, noise: f64) -> f64 {
    ris_isac::sensing::sensing_sinr_cov(a_i, a_j, r, noise)
}

#[test]
fn single_target_reaches_power_times_top_eigenvalue() {
    let opts = DesignOptions::default();
    for (theta, phi, p_t) in [(-2.46, -0.16, 4.0), (0.7, 0.3, 1.0), (2.0, -0.5, 10.0)] {
        let beta = Complex64::from_polar(1.83e-6, 0.4);
        let a_l = sensing_matrix(beta, &ula_steering(theta, phi, 8, PI));
        let a_e = CMatrix::zeros(8, 8);
        let d = solve_p2(&a_l, &a_e, p_t, f64::INFINITY, 1e-12, &opts).unwrap();
        let optimum = p_t * lambda_max(&b_matrix(&a_l, 1e-12));
        assert!(common::rel_err(d.min_sinr, optimum) < 0.01, "{} vs {optimum}", d.min_sinr);
        assert_eq!(d.gamma.len(), 1);
        let sweep = (0..3600)
            .map(|i| {
                let t = -PI + 2.0 * PI * i as f64 / 3600.0;
                let v = ula_steering(t, 0.0, 8, PI).entries;
                let r = &v * v.adjoint() * c(p_t / 8.0);
                gamma(&a_l, &a_e, &r, 1e-12)
            })
            .fold(0.0, f64::max);
        assert!(common::rel_err(d.min_sinr, sweep) < 0.01);
        assert!(d.r.trace().re <= p_t + 1e-8);
    }
}

#[test]
fn symmetric_targets_balance() {
    let opts = DesignOptions::default();
    let beta = Complex64::from_polar(1e-6, 0.0);
    let a_l = sensing_matrix(beta, &ula_steering(PI / 2.0, 0.0, 8, PI));
    let a_e = sensing_matrix(beta, &ula_steering(0.25f64.acos(), 0.0, 8, PI));
    let inner = (ula_steering(PI / 2.0, 0.0, 8, PI).entries.adjoint() * ula_steering(0.25f64.acos(), 0.0, 8, PI).entries)[(0, 0)];
    assert!(inner.norm() < 1e-12);
    let d = solve_p2(&a_l, &a_e, 2.0, 100.0, 1e-12, &opts).unwrap();
    let gl = gamma(&a_l, &a_e, &d.r, 1e-12);
    let ge = gamma(&a_e, &a_l, &d.r, 1e-12);
    assert!((gl - ge).abs() <= 1e-3, "{gl} {ge}");
    let x = 64.0;
    assert!((d.min_sinr - x / (x + 1.0)).abs() < 2e-3);
}

#[test]
fn zero_power_gives_zero_covariance() {
    let beta = Complex64::from_polar(1e-6, 0.0);
    let a_l = sensing_matrix(beta, &ula_steering(0.3, 0.1, 8, PI));
    let a_e = sensing_matrix(beta, &ula_steering(1.3, 0.1, 8, PI));
    let d = solve_p2(&a_l, &a_e, 0.0, 100.0, 1e-12, &DesignOptions::default()).unwrap();
    assert_eq!(fro(&d.r), 0.0);
    assert_eq!(d.min_sinr, 0.0);
}

#[test]
fn more_power_never_hurts() {
    let opts = DesignOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..4 {
        let a_l = random_matrix(4, 4, &mut rng);
        let a_e = random_matrix(4, 4, &mut rng);
        let lo = solve_p2(&a_l, &a_e, 0.5, f64::INFINITY, 1.0, &opts).unwrap();
        let hi = solve_p2(&a_l, &a_e, 1.0, f64::INFINITY, 1.0, &opts).unwrap();
        assert!(hi.min_sinr >= lo.min_sinr - opts.bisection_tol);
    }
}

#[test]
fn cap_is_respected_and_flagged() {
    let beta = Complex64::from_polar(1.83e-6, 0.4);
    let a_l = sensing_matrix(beta, &ula_steering(-2.46, -0.16, 8, PI));
    let a_e = CMatrix::zeros(8, 8);
    let d = solve_p2(&a_l, &a_e, 4.0, 20.0, 1e-12, &DesignOptions::default()).unwrap();
    assert!(d.cap_binding);
    assert!(d.min_sinr <= 20.0 * (1.0 + 1e-6));
    assert!(d.min_sinr >= 20.0 - 2e-3);
}

#[test]
fn invalid_p2_inputs() {
    let z = CMatrix::zeros(4, 4);
    let opts = DesignOptions::default();
    assert!(solve_p2(&z, &z, 1.0, 10.0, 1.0, &opts).is_err());
    let a = random_matrix(4, 4, &mut ChaCha8Rng::seed_from_u64(1));
    assert!(solve_p2(&a, &z, -1.0, 10.0, 1.0, &opts).is_err());
    assert!(solve_p2(&a, &z, 1.0, 10.0, 0.0, &opts).is_err());
}

#[test]
fn extract_w_isotropic_single_user() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let r = CMatrix::identity(4, 4) * c(0.5);
    let g = vec![random_vector(4, &mut rng)];
    let s = extract_w(&r, 1, &g).unwrap();
    assert_eq!(s.w.shape(), (4, 5));
    assert!(fro(&(&s.w * s.w.adjoint() - &r)) <= 1e-10);
    let col = s.assignment[0].unwrap();
    let gain = |j: usize| (g[0].transpose() * s.w.column(j))[(0, 0)].norm();
    for j in 1..5 {
        assert!(gain(0) >= gain(j) - 1e-12, "column {col}");
    }
}

#[test]
fn extract_w_rank_one_starves_second_user() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let v = random_vector(4, &mut rng);
    let r = &v * v.adjoint();
    let g = vec![random_vector(4, &mut rng), random_vector(4, &mut rng)];
    let s = extract_w(&r, 2, &g).unwrap();
    assert_eq!(s.assignment.iter().filter(|a| a.is_none()).count(), 1);
    let starved = s.assignment.iter().position(|a| a.is_none()).unwrap();
    assert!(s.w.column(starved).iter().all(|x| x.norm() == 0.0));
    assert!(fro(&(&s.w * s.w.adjoint() - &r)) <= 1e-10 * fro(&r));
}

#[test]
fn extract_w_reconstructs_random_covariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..20 {
        let r = random_psd(8, 8, &mut rng);
        let g: Vec<CVector> = (0..4).map(|_| random_vector(8, &mut rng)).collect();
        let s = extract_w(&r, 4, &g).unwrap();
        assert!(fro(&(&s.w * s.w.adjoint() - &r)) <= 1e-8 * fro(&r));
        let mut cols: Vec<usize> = s.assignment.iter().map(|a| a.unwrap()).collect();
        cols.sort();
        cols.dedup();
        assert_eq!(cols.len(), 4);
    }
}

fn small_lifted(seed: u64, n_l: usize) -> LiftedChannels {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LiftedChannels {
        g_legit: vec![random_vector(n_l, &mut rng)],
        h_legit: random_matrix(n_l, 2, &mut rng),
        g_malicious: vec![CVector::zeros(0)],
        h_malicious: CMatrix::zeros(0, 2),
        w: random_matrix(2, 3, &mut rng),
    }
}

fn sinr_at(l: &LiftedChannels, z: &CVector, k: usize, noise: f64) -> f64 {
    let empty = CVector::zeros(l.h_malicious.nrows());
    let zm = CVector::from_element(l.h_malicious.nrows(), c(1.0));
    let gm = l.g_malicious.get(k).cloned().unwrap_or(empty);
    user_sinr_direct(&l.g_legit[k], &gm, z, &zm, &l.h_legit, &l.h_malicious, &l.w, k, noise).unwrap()
}

#[test]
fn two_element_phases_match_grid_search() {
    let opts = DesignOptions::default();
    for seed in 0..3 {
        let l = small_lifted(100 + seed, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = solve_p3(&l, &[0.0], 0.5, &opts, &mut rng).unwrap();
        let mut best = 0.0f64;
        for a in 0..360 {
            for b in 0..360 {
                let z = CVector::from_vec(vec![
                    Complex64::from_polar(1.0, (a as f64).to_radians()),
                    Complex64::from_polar(1.0, (b as f64).to_radians()),
                ]);
                best = best.max(sinr_at(&l, &z, 0, 0.5));
            }
        }
        assert!(p.achieved >= 0.98 * best, "{} vs {best}", p.achieved);
        assert!(p.achieved <= p.sdr_bound * (1.0 + 1e-9));
        assert!(common::rel_err(p.achieved, sinr_at(&l, &p.z, 0, 0.5)) < 1e-9);
    }
}

#[test]
fn identical_users_get_equal_sinr() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let g = random_vector(9, &mut rng);
    let w0 = random_vector(3, &mut rng);
    let mut w = random_matrix(3, 5, &mut rng);
    w.set_column(0, &w0);
    w.set_column(1, &(&w0 * Complex64::new(0.0, 1.0)));
    let l = LiftedChannels {
        g_legit: vec![g.clone(), g],
        h_legit: random_matrix(9, 3, &mut rng),
        g_malicious: vec![CVector::zeros(0), CVector::zeros(0)],
        h_malicious: CMatrix::zeros(0, 3),
        w,
    };
    let p = solve_p3(&l, &[0.0, 0.0], 1.0, &DesignOptions::default(), &mut rng).unwrap();
    let a = sinr_at(&l, &p.z, 0, 1.0);
    let b = sinr_at(&l, &p.z, 1, 1.0);
    assert!((a - b).abs() <= 1e-6 * a.max(1.0));
}

#[test]
fn phase_design_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let l = LiftedChannels {
        g_legit: (0..3).map(|_| random_vector(16, &mut rng)).collect(),
        h_legit: random_matrix(16, 4, &mut rng),
        g_malicious: (0..3).map(|_| random_vector(4, &mut rng)).collect(),
        h_malicious: random_matrix(4, 4, &mut rng),
        w: random_matrix(4, 7, &mut rng),
    };
    let opts = DesignOptions::default();
    let p = solve_p3(&l, &[0.3, 0.1, 0.0], 2.0, &opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    for i in 0..16 {
        assert!((p.z_matrix[(i, i)].re - 1.0).abs() <= 1e-6);
        assert!((p.z[i].norm() - 1.0).abs() <= 1e-9);
    }
    assert!(sdr_core::hermitian_eigen(&p.z_matrix).unwrap().0.last().unwrap() >= &-1e-7);
    assert!(p.achieved <= p.sdr_bound * (1.0 + 1e-9));
    assert!(p.randomization_gap > 0.0 && p.randomization_gap <= 1.0 + 1e-9);
    let again = solve_p3(&l, &[0.3, 0.1, 0.0], 2.0, &opts, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(p.z, again.z);
}

fn reference(n_l: usize, n_m: usize) -> (ScenarioConfig, DesignOptions) {
    let cfg = common::table1_sized(n_l, n_m);
    let mut opts = DesignOptions::from_config(&cfg);
    opts.randomization_samples = 200;
    (cfg, opts)
}

#[test]
fn covariance_design_ignores_the_surfaces() {
    let (a, _) = reference(16, 16);
    let (b, opts) = reference(36, 49);
    let seed = trial_seed(9, 0);
    let ca = draw_channels(&a, &derive_geometry(&a).unwrap(), seed);
    let cb = draw_channels(&b, &derive_geometry(&b).unwrap(), seed);
    let pa = solve_p2(&ca.legit.response, &ca.eaves.response, a.total_power_w, a.sensing_sinr_cap, a.noise_power_w, &opts).unwrap();
    let pb = solve_p2(&cb.legit.response, &cb.eaves.response, b.total_power_w, b.sensing_sinr_cap, b.noise_power_w, &opts).unwrap();
    assert_eq!(pa.r, pb.r);
    assert_eq!(pa.min_sinr.to_bits(), pb.min_sinr.to_bits());
}

#[test]
fn pipeline_feasibility_and_unit_modulus() {
    let (cfg, opts) = reference(16, 16);
    let geo = derive_geometry(&cfg).unwrap();
    for t in 0..3 {
        let seed = trial_seed(3, t);
        let ch = draw_channels(&cfg, &geo, seed);
        let sol = solve_p1(&cfg, &ch, &draw_attack(&cfg, seed), &opts).unwrap();
        let w = &sol.transmit.w;
        assert_eq!(w.shape(), (8, 12));
        assert!((w * w.adjoint()).trace().re <= cfg.total_power_w + 1e-8);
        assert!(fro(&(w * w.adjoint() - &sol.transmit.r)) <= 1e-8 * fro(&sol.transmit.r));
        assert!(sol.phases.z.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-9));
        assert!(sol.phases.achieved <= sol.phases.sdr_bound * (1.0 + 1e-9));
        let m = &sol.metrics;
        assert!(m.secrecy.iter().all(|&s| s >= 0.0));
        assert!((m.secrecy_sum - m.secrecy.iter().sum::<f64>()).abs() < 1e-12);
        assert!(m.crb_eaves.is_some());
        let served_min = sol.phases.served.iter().map(|&k| m.eta[k]).fold(f64::INFINITY, f64::min);
        assert!(common::rel_err(served_min, sol.phases.achieved) < 1e-9);
    }
}

#[test]
fn global_phase_keeps_achieved_objective() {
    let (cfg, opts) = reference(16, 16);
    let geo = derive_geometry(&cfg).unwrap();
    let seed = trial_seed(4, 0);
    let ch = draw_channels(&cfg, &geo, seed);
    let z_m = draw_attack(&cfg, seed);
    let sol = solve_p1(&cfg, &ch, &z_m, &opts).unwrap();
    let rotated = &sol.phases.z * Complex64::from_polar(1.0, 1.234);
    let m = measure(&cfg, &ch, &sol.transmit, &rotated, &z_m).unwrap();
    let min = |eta: &[f64]| sol.phases.served.iter().map(|&k| eta[k]).fold(f64::INFINITY, f64::min);
    assert!(common::rel_err(min(&m.eta), sol.phases.achieved) < 1e-9);
}

#[test]
fn silent_transmitter_has_no_secrecy() {
    let (mut cfg, opts) = reference(16, 16);
    cfg.set_total_power_dbw(f64::NEG_INFINITY);
    let geo = derive_geometry(&cfg).unwrap();
    let seed = trial_seed(5, 0);
    let ch = draw_channels(&cfg, &geo, seed);
    let sol = solve_p1(&cfg, &ch, &draw_attack(&cfg, seed), &opts).unwrap();
    assert_eq!(sol.metrics.secrecy_sum, 0.0);
    assert!(sol.phases.served.is_empty());
}

#[test]
fn removing_the_malicious_surface_does_not_hurt() {
    let (with, opts) = reference(36, 144);
    let (without, _) = reference(36, 0);
    for t in 0..3 {
        let seed = trial_seed(6, t);
        let ch_w = draw_channels(&with, &derive_geometry(&with).unwrap(), seed);
        let ch_0 = draw_channels(&without, &derive_geometry(&without).unwrap(), seed);
        let a = solve_p1(&with, &ch_w, &draw_attack(&with, seed), &opts).unwrap();
        let b = solve_p1(&without, &ch_0, &draw_attack(&without, seed), &opts).unwrap();
        assert_eq!(a.transmit.w, b.transmit.w);
        assert!(
            b.metrics.secrecy_sum >= a.metrics.secrecy_sum,
            "trial {t}: {} < {}",
            b.metrics.secrecy_sum,
            a.metrics.secrecy_sum
        );
    }
}

#[test]
fn starved_users_have_zero_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let v = random_vector(4, &mut rng);
    let r = &v * v.adjoint();
    let g: Vec<CVector> = (0..2).map(|_| random_vector(4, &mut rng)).collect();
    let s = extract_w(&r, 2, &g).unwrap();
    let k = s.assignment.iter().position(|a| a.is_none()).unwrap();
    let h = DMatrix::from_fn(3, 4, |i, j| c((i + j) as f64));
    let gl = random_vector(3, &mut rng);
    let z = CVector::from_element(3, c(1.0));
    let eta = user_sinr_direct(&gl, &CVector::zeros(0), &z, &CVector::zeros(0), &h, &CMatrix::zeros(0, 4), &s.w, k, 1.0).unwrap();
    assert_eq!(eta, 0.0);
}
