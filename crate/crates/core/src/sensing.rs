//! Sensing SINR, Fisher information and the Cramér–Rao bound on a target's
//! angle pair.
//!
//! The echo of a target with gain `β` and steering product `G = a^H a` is
//! `β G X` for transmit block `X` with `X X^H = L_s R_x`. The unknowns are the
//! angles `ϑ = (θ, φ)` and the nuisance gain `δ = (Re β, Im β)`.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::channel::CMatrix;

#[derive(Debug, thiserror::Error)]
pub enum SensingError {
    #[error("covariance is not Hermitian positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("unidentifiable geometry: {0}")]
    Unidentifiable(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().sum()
}

fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

/// `‖A_i W‖_F² / (‖A_j W‖_F² + σ²)`.
pub fn sensing_sinr(a_i: &CMatrix, a_j: &CMatrix, w: &CMatrix, noise: f64) -> f64 {
    frobenius_sq(&(a_i * w)) / (frobenius_sq(&(a_j * w)) + noise)
}

/// `Tr(A_i^H A_i R) / (Tr(A_j^H A_j R) + σ²)`.
pub fn sensing_sinr_cov(a_i: &CMatrix, a_j: &CMatrix, r: &CMatrix, noise: f64) -> f64 {
    let num = trace(&(a_i.adjoint() * a_i * r)).re;
    let den = trace(&(a_j.adjoint() * a_j * r)).re;
    num / (den + noise)
}

/// Blocks of the real 4×4 Fisher matrix over `(θ, φ, Re β, Im β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherBlocks {
    pub f_angles: Matrix2<f64>,
    /// Rows `θ, φ`; columns `Re β, Im β`.
    pub f_cross: Matrix2<f64>,
    pub f_gain: Matrix2<f64>,
}

impl FisherBlocks {
    pub fn full(&self) -> Matrix4<f64> {
        let mut f = Matrix4::zeros();
        f.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.f_angles);
        f.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.f_cross);
        f.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.f_cross.transpose());
        f.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.f_gain);
        f
    }
}

fn check_psd(r: &CMatrix) -> Result<(), SensingError> {
    if !r.is_square() {
        return Err(SensingError::Shape("covariance is not square".into()));
    }
    let scale = r.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    for j in 0..r.ncols() {
        for i in 0..j {
            if (r[(i, j)] - r[(j, i)].conj()).norm() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
                return Err(SensingError::NotPsd(f64::NAN));
            }
        }
    }
    if scale == 0.0 {
        return Ok(());
    }
    let (values, _) = sdr_core::hermitian_eigen(r).map_err(|e| SensingError::Shape(e.to_string()))?;
    let lmin = values.last().copied().unwrap_or(0.0);
    let lmax = values.first().copied().unwrap_or(0.0);
    if lmin < -1e-9 * lmax.abs().max(scale) {
        return Err(SensingError::NotPsd(lmin));
    }
    Ok(())
}

/// Fisher information of the angle pair and gain.
///
/// `g` is the steering product `a^H a` and `g_theta`, `g_phi` its angle
/// derivatives; none of them include `β`.
pub fn fisher_information(
    g: &CMatrix,
    g_theta: &CMatrix,
    g_phi: &CMatrix,
    beta: Complex64,
    r: &CMatrix,
    block_length: usize,
    noise: f64,
) -> Result<FisherBlocks, SensingError> {
    let n = g.nrows();
    for (name, m) in [("g", g), ("g_theta", g_theta), ("g_phi", g_phi), ("r", r)] {
        if m.shape() != (n, n) {
            return Err(SensingError::Shape(format!("{name} is {:?}, expected {n}x{n}", m.shape())));
        }
    }
    check_psd(r)?;
    let scale = 2.0 * block_length as f64 / noise;
    let derivs = [g_theta, g_phi];
    let mut f_angles = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let t = trace(&(derivs[b] * r * derivs[a].adjoint()));
            f_angles[(a, b)] = scale * beta.norm_sqr() * t.re;
        }
    }
    let mut f_cross = Matrix2::zeros();
    for a in 0..2 {
        let t = beta.conj() * trace(&(g * r * derivs[a].adjoint()));
        f_cross[(a, 0)] = scale * t.re;
        f_cross[(a, 1)] = scale * (t * Complex64::new(0.0, 1.0)).re;
    }
    let gain = scale * trace(&(g * r * g.adjoint())).re;
    Ok(FisherBlocks {
        f_angles,
        f_cross,
        f_gain: Matrix2::from_diagonal_element(gain),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbResult {
    /// Bound on the angle-pair error covariance, rad².
    pub crb: Matrix2<f64>,
    pub root_theta_deg: f64,
    pub root_phi_deg: f64,
    /// `sqrt(Tr CRB)` in degrees.
    pub root_combined_deg: f64,
    /// False for the per-angle bound of [`crb_per_angle`].
    pub joint: bool,
}

const MAX_CONDITION: f64 = 1e12;

fn angle_information(f: &FisherBlocks) -> Result<Matrix2<f64>, SensingError> {
    let gain_inv = f
        .f_gain
        .try_inverse()
        .filter(|_| f.f_gain.determinant() > 0.0)
        .ok_or_else(|| SensingError::Unidentifiable("gain block is singular".into()))?;
    let schur = f.f_angles - f.f_cross * gain_inv * f.f_cross.transpose();
    Ok((schur + schur.transpose()) * 0.5)
}

fn result(crb: Matrix2<f64>, joint: bool) -> CrbResult {
    CrbResult {
        crb,
        root_theta_deg: crb[(0, 0)].max(0.0).sqrt().to_degrees(),
        root_phi_deg: crb[(1, 1)].max(0.0).sqrt().to_degrees(),
        root_combined_deg: crb.trace().max(0.0).sqrt().to_degrees(),
        joint,
    }
}

/// Inverse of the Schur complement of the gain block.
pub fn crb_aod(f: &FisherBlocks) -> Result<CrbResult, SensingError> {
    let schur = angle_information(f)?;
    let eig = schur.symmetric_eigen();
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Err(SensingError::Unidentifiable(format!(
            "angle information is singular (eigenvalues {lmin:.3e}, {lmax:.3e})"
        )));
    }
    let crb = schur
        .try_inverse()
        .ok_or_else(|| SensingError::Unidentifiable("angle information is singular".into()))?;
    Ok(result(crb, true))
}

/// Bound on each angle with the other one known: the reciprocal diagonal of the
/// Schur complement, with the gain still a nuisance.
///
/// A linear array only resolves `cosθ cosφ`, so its joint angle information
/// has rank one and [`crb_aod`] rejects it; this bound stays finite.
pub fn crb_per_angle(f: &FisherBlocks) -> Result<CrbResult, SensingError> {
    let schur = angle_information(f)?;
    let (a, b) = (schur[(0, 0)], schur[(1, 1)]);
    if !(a > 0.0) || !(b > 0.0) {
        return Err(SensingError::Unidentifiable(format!(
            "an angle carries no information (diagonal {a:.3e}, {b:.3e})"
        )));
    }
    Ok(result(Matrix2::new(1.0 / a, 0.0, 0.0, 1.0 / b), false))
}
