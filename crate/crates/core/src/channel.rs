//! Steering vectors, fading channels, radar responses and the malicious attack.
//!
//! Row vectors of the system model (steering vectors, user channels, RIS phase
//! vectors) are stored as column vectors holding the same entries. With `a` the
//! entries of a ULA steering vector, the rank-one response `a^H a` is therefore
//! `conj(a) a^T`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::rng::{substream, Stream};
use crate::scenario::{Aod, Geometry, ScenarioConfig};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringKind {
    Ula,
    UpaX,
    UpaZ,
    Upa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVector,
    pub kind: SteeringKind,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn ramp(step: f64, count: usize) -> CVector {
    CVector::from_fn(count, |t, _| Complex64::from_polar(1.0, step * t as f64))
}

/// Entry `t` is `exp(j ν (t-1) cosθ cosφ)`.
pub fn ula_steering(theta: f64, phi: f64, count: usize, nu: f64) -> SteeringVector {
    SteeringVector {
        entries: ramp(nu * theta.cos() * phi.cos(), count),
        kind: SteeringKind::Ula,
    }
}

pub fn upa_steering_x(theta: f64, phi: f64, nx: usize, nu: f64) -> SteeringVector {
    SteeringVector {
        entries: ramp(nu * theta.cos() * phi.cos(), nx),
        kind: SteeringKind::UpaX,
    }
}

pub fn upa_steering_z(phi: f64, nz: usize, nu: f64) -> SteeringVector {
    SteeringVector {
        entries: ramp(nu * phi.sin(), nz),
        kind: SteeringKind::UpaZ,
    }
}

/// `b^x ⊗ b^z`: element `(p, q)` sits at index `p * nz + q`.
pub fn upa_steering(theta: f64, phi: f64, nx: usize, nz: usize, nu: f64) -> SteeringVector {
    let bx = upa_steering_x(theta, phi, nx, nu).entries;
    let bz = upa_steering_z(phi, nz, nu).entries;
    SteeringVector {
        entries: bx.kronecker(&bz),
        kind: SteeringKind::Upa,
    }
}

/// Line-of-sight BS-to-RIS product `b_RIS^H a_BS`, shape `N × T_x`.
pub fn los_bs_ris(ris: &SteeringVector, bs: &SteeringVector) -> CMatrix {
    ris.entries.conjugate() * bs.entries.transpose()
}

/// `sqrt(L_0 / d^α)`.
pub fn path_gain(reference_loss: f64, d: f64, alpha: f64) -> f64 {
    (reference_loss / d.powf(alpha)).sqrt()
}

pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `sqrt(L_0/d^α) (sqrt(κ/(1+κ)) los + sqrt(1/(1+κ)) N)` with `N` i.i.d. `CN(0, 1)`.
pub fn rician_channel<R: Rng + ?Sized>(
    los: &CMatrix,
    kappa: f64,
    reference_loss: f64,
    d: f64,
    alpha: f64,
    rng: &mut R,
) -> CMatrix {
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    let scale = path_gain(reference_loss, d, alpha);
    let mut out = CMatrix::zeros(los.nrows(), los.ncols());
    for j in 0..los.ncols() {
        for i in 0..los.nrows() {
            let n = standard_complex_normal(rng);
            out[(i, j)] = (los[(i, j)] * w_los + n * w_nlos) * scale;
        }
    }
    out
}

/// `|β| = sqrt(λ² S / (64 π³ d⁴))`.
pub fn round_trip_gain(wavelength: f64, rcs: f64, d: f64) -> f64 {
    (wavelength * wavelength * rcs / (64.0 * PI.powi(3) * d.powi(4))).sqrt()
}

/// `A = β a^H a`.
pub fn sensing_matrix(beta: Complex64, a: &SteeringVector) -> CMatrix {
    a.entries.conjugate() * a.entries.transpose() * beta
}

/// Derivatives of `a^H a` with respect to `θ` and `φ`.
pub fn steering_derivatives(theta: f64, phi: f64, count: usize, nu: f64) -> (CMatrix, CMatrix) {
    let a = ula_steering(theta, phi, count, nu).entries;
    let rate_theta = -nu * theta.sin() * phi.cos();
    let rate_phi = -nu * theta.cos() * phi.sin();
    let build = |rate: f64| {
        CMatrix::from_fn(count, count, |s, t| {
            let g = a[s].conj() * a[t];
            g * Complex64::new(0.0, rate * (t as f64 - s as f64))
        })
    };
    (build(rate_theta), build(rate_phi))
}

/// Unit-modulus entries with phases i.i.d. uniform on `[0, 2π)`.
pub fn malicious_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
}

/// A sensing target seen from the BS.
#[derive(Debug, Clone)]
pub struct Target {
    pub aod: Aod,
    pub distance: f64,
    pub steering: SteeringVector,
    pub beta: Complex64,
    /// `A = β a^H a`.
    pub response: CMatrix,
}

/// One realization of every channel object of a trial.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// BS to legitimate RIS, `N_L × T_x`.
    pub h_legit: CMatrix,
    /// BS to malicious RIS, `N_M × T_x`.
    pub h_malicious: CMatrix,
    /// Legitimate RIS to each user, `N_L` entries each.
    pub g_legit: Vec<CVector>,
    /// Malicious RIS to each user, `N_M` entries each.
    pub g_malicious: Vec<CVector>,
    pub legit: Target,
    pub eaves: Target,
    pub rng_seed: u64,
}

impl ChannelSet {
    /// `g_{L,k} H_L` with all legitimate phases at zero, as `T_x` entries per user.
    pub fn effective_user_rows(&self) -> Vec<CVector> {
        self.g_legit
            .iter()
            .map(|g| self.h_legit.transpose() * g)
            .collect()
    }
}

/// Unit-modulus RIS configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct RisPhases {
    pub z_legit: CVector,
    pub z_malicious: CVector,
}

fn target<R: Rng + ?Sized>(cfg: &ScenarioConfig, d: f64, aod: Aod, rng: &mut R) -> Target {
    let steering = ula_steering(aod.theta, aod.phi, cfg.tx_antennas, cfg.nu_tx());
    let chi = rng.random_range(0.0..2.0 * PI);
    let beta = Complex64::from_polar(round_trip_gain(cfg.wavelength(), cfg.rcs_m2, d), chi);
    let response = sensing_matrix(beta, &steering);
    Target {
        aod,
        distance: d,
        steering,
        beta,
        response,
    }
}

/// Draws the channels of the trial with seed `trial_seed`.
pub fn draw_channels(cfg: &ScenarioConfig, geo: &Geometry, trial_seed: u64) -> ChannelSet {
    let nu_t = cfg.nu_tx();
    let nu_r = cfg.nu_ris();
    let kappa = cfg.rician_factor;
    let l0 = cfg.reference_loss;

    let bs_link = |shape: crate::scenario::RisShape, d: f64, bs_aod: Aod, ris_aod: Aod, stream: Stream| {
        let a = ula_steering(bs_aod.theta, bs_aod.phi, cfg.tx_antennas, nu_t);
        let b = upa_steering(ris_aod.theta, ris_aod.phi, shape.nx, shape.nz, nu_r);
        let los = los_bs_ris(&b, &a);
        let mut rng = substream(trial_seed, stream);
        rician_channel(&los, kappa, l0, d, cfg.path_loss_exponent_bs_ris, &mut rng)
    };
    let h_legit = bs_link(cfg.ris_legit, geo.d_legit, geo.aod_legit, geo.ris_aod_legit, Stream::LegitBsRis);
    let h_malicious = bs_link(
        cfg.ris_malicious,
        geo.d_eaves,
        geo.aod_eaves,
        geo.ris_aod_malicious,
        Stream::MaliciousBsRis,
    );

    let user_links = |shape: crate::scenario::RisShape, dists: &[f64], aods: &[Aod], stream: Stream| {
        let mut rng = substream(trial_seed, stream);
        dists
            .iter()
            .zip(aods)
            .map(|(&d, aod)| {
                let b = upa_steering(aod.theta, aod.phi, shape.nx, shape.nz, nu_r);
                let los = CMatrix::from_column_slice(b.len(), 1, b.entries.as_slice());
                let g = rician_channel(&los, kappa, l0, d, cfg.path_loss_exponent_ris_user, &mut rng);
                g.column(0).into_owned()
            })
            .collect::<Vec<_>>()
    };
    let g_legit = user_links(
        cfg.ris_legit,
        &geo.user_distance_legit,
        &geo.user_aod_legit,
        Stream::LegitRisUser,
    );
    let g_malicious = user_links(
        cfg.ris_malicious,
        &geo.user_distance_malicious,
        &geo.user_aod_malicious,
        Stream::MaliciousRisUser,
    );

    let mut rng = substream(trial_seed, Stream::TargetPhases);
    let legit = target(cfg, geo.d_legit, geo.aod_legit, &mut rng);
    let eaves = target(cfg, geo.d_eaves, geo.aod_eaves, &mut rng);

    ChannelSet {
        h_legit,
        h_malicious,
        g_legit,
        g_malicious,
        legit,
        eaves,
        rng_seed: trial_seed,
    }
}

/// The malicious RIS configuration of the trial with seed `trial_seed`.
pub fn draw_attack(cfg: &ScenarioConfig, trial_seed: u64) -> CVector {
    malicious_phases(cfg.n_malicious(), &mut substream(trial_seed, Stream::Attack))
}
