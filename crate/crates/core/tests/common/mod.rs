#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use ris_isac::ScenarioConfig;

pub fn config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/table1.toml")
}

pub fn table1() -> ScenarioConfig {
    ris_isac::load_config(config_path()).expect("reference config loads")
}

/// Reference scenario with both surfaces resized.
pub fn table1_sized(n_legit: usize, n_malicious: usize) -> ScenarioConfig {
    let mut cfg = table1();
    cfg.ris_legit = ris_isac::scenario::RisShape::square(n_legit).unwrap();
    cfg.ris_malicious = if n_malicious == 0 {
        ris_isac::scenario::RisShape::new(0, 0)
    } else {
        ris_isac::scenario::RisShape::square(n_malicious).unwrap()
    };
    cfg
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn cn(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| cn(rng))
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| cn(rng))
}

pub fn random_psd(n: usize, rank: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = random_matrix(n, rank, rng);
    &a * a.adjoint()
}

pub fn unit_vector(n: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn fro(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Fisher matrix over `(θ, φ, Re β, Im β)` from central differences of the
/// echo mean `β a^H a` under white Gaussian noise, with `X X^H = L_s R`.
pub fn fd_fisher(
    theta: f64,
    phi: f64,
    beta: Complex64,
    count: usize,
    nu: f64,
    r: &DMatrix<Complex64>,
    block_length: usize,
    noise: f64,
) -> nalgebra::Matrix4<f64> {
    let mean = |p: [f64; 4]| {
        let a = ris_isac::channel::ula_steering(p[0], p[1], count, nu).entries;
        a.conjugate() * a.transpose() * Complex64::new(p[2], p[3])
    };
    let base = [theta, phi, beta.re, beta.im];
    let steps = [1e-6, 1e-6, 1e-6 * beta.norm(), 1e-6 * beta.norm()];
    let derivs: Vec<DMatrix<Complex64>> = (0..4)
        .map(|i| {
            let (mut up, mut down) = (base, base);
            up[i] += steps[i];
            down[i] -= steps[i];
            (mean(up) - mean(down)) / c(2.0 * steps[i])
        })
        .collect();
    let scale = 2.0 * block_length as f64 / noise;
    nalgebra::Matrix4::from_fn(|i, j| scale * (&derivs[j] * r * derivs[i].adjoint()).trace().re)
}

pub fn rel_err_matrix4(a: &nalgebra::Matrix4<f64>, b: &nalgebra::Matrix4<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}
