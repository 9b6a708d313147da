//! User SINR in direct and lifted form, eavesdropper SINR and secrecy rates.

use num_complex::Complex64;

use crate::channel::{CMatrix, CVector, SteeringVector};
use crate::sensing::CrbResult;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("beam index {index} out of range for {columns} columns")]
    IndexOutOfRange { index: usize, columns: usize },
    #[error("{0} is not Hermitian")]
    NotHermitian(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

fn check_index(k: usize, w: &CMatrix) -> Result<(), MetricsError> {
    if k < w.ncols() {
        Ok(())
    } else {
        Err(MetricsError::IndexOutOfRange {
            index: k,
            columns: w.ncols(),
        })
    }
}

/// `(g Ω H)` as `T_x` entries: `H^T (g ∘ z)`.
pub fn cascade(g: &CVector, z: &CVector, h: &CMatrix) -> Result<CVector, MetricsError> {
    if g.len() != z.len() || h.nrows() != g.len() {
        return Err(MetricsError::Shape(format!(
            "channel of {} entries, phases of {}, BS link with {} rows",
            g.len(),
            z.len(),
            h.nrows()
        )));
    }
    Ok(h.transpose() * g.component_mul(z))
}

fn beam_power(e: &CVector, w: &CMatrix, j: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for t in 0..e.len() {
        acc += e[t] * w[(t, j)];
    }
    acc.norm_sqr()
}

/// Malicious-path power `‖g_M Ω_M H_M W‖²` at one user.
pub fn malicious_power(g_m: &CVector, z_m: &CVector, h_m: &CMatrix, w: &CMatrix) -> Result<f64, MetricsError> {
    let e = cascade(g_m, z_m, h_m)?;
    Ok((0..w.ncols()).map(|j| beam_power(&e, w, j)).sum())
}

/// SINR of the user served by column `k` of `W`.
#[allow(clippy::too_many_arguments)]
pub fn user_sinr_direct(
    g_l: &CVector,
    g_m: &CVector,
    z_l: &CVector,
    z_m: &CVector,
    h_l: &CMatrix,
    h_m: &CMatrix,
    w: &CMatrix,
    k: usize,
    noise: f64,
) -> Result<f64, MetricsError> {
    check_index(k, w)?;
    let e = cascade(g_l, z_l, h_l)?;
    let signal = beam_power(&e, w, k);
    let interference: f64 = (0..w.ncols()).filter(|&j| j != k).map(|j| beam_power(&e, w, j)).sum();
    let malicious = malicious_power(g_m, z_m, h_m, w)?;
    Ok(signal / (interference + malicious + noise))
}

/// Per-user cascades and beams from which every lifted matrix is built.
///
/// With `u_kj = conj(g_k ∘ H w_j)`, the lifted matrix is
/// `C_kj = u_kj u_kj^H = conj(g_k) g_k^T ∘ conj(H w_j) (H w_j)^T`, so that
/// `|g_k Ω H w_j|² = Tr(C_kj Z)` for `Z = z z^H`.
#[derive(Debug, Clone)]
pub struct LiftedChannels {
    pub g_legit: Vec<CVector>,
    pub h_legit: CMatrix,
    pub g_malicious: Vec<CVector>,
    pub h_malicious: CMatrix,
    pub w: CMatrix,
}

impl LiftedChannels {
    pub fn num_users(&self) -> usize {
        self.g_legit.len()
    }

    /// `conj(diag(g_k) H_L)`: `u_kj = V_k conj(w_j)`.
    pub fn legit_factor(&self, k: usize) -> CMatrix {
        let g = &self.g_legit[k];
        CMatrix::from_fn(self.h_legit.nrows(), self.h_legit.ncols(), |l, t| {
            (g[l] * self.h_legit[(l, t)]).conj()
        })
    }

    fn hadamard(g: &CVector, hw: &CVector) -> CMatrix {
        let g_bar = g.conjugate() * g.transpose();
        let h_bar = hw.conjugate() * hw.transpose();
        g_bar.component_mul(&h_bar)
    }

    /// `C_{L,k,j}`; `j = k` is the signal term.
    pub fn legit(&self, k: usize, j: usize) -> CMatrix {
        let hw = &self.h_legit * self.w.column(j);
        Self::hadamard(&self.g_legit[k], &hw)
    }

    pub fn signal(&self, k: usize) -> CMatrix {
        self.legit(k, k)
    }

    /// `C_{L,k,j}` for every column `j ≠ k`.
    pub fn interference(&self, k: usize) -> Vec<CMatrix> {
        (0..self.w.ncols()).filter(|&j| j != k).map(|j| self.legit(k, j)).collect()
    }

    /// `C_{M,k} = Σ_j C_{M,k,j}`.
    pub fn malicious(&self, k: usize) -> CMatrix {
        let n = self.h_malicious.nrows();
        let mut c = CMatrix::zeros(n, n);
        for j in 0..self.w.ncols() {
            let hw = &self.h_malicious * self.w.column(j);
            c += Self::hadamard(&self.g_malicious[k], &hw);
        }
        c
    }
}

fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn check_hermitian(m: &CMatrix, what: &'static str) -> Result<(), MetricsError> {
    if !m.is_square() {
        return Err(MetricsError::NotHermitian(what));
    }
    let scale = m.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    for j in 0..m.ncols() {
        for i in 0..=j {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-10 * scale {
                return Err(MetricsError::NotHermitian(what));
            }
        }
    }
    Ok(())
}

/// `Tr(C_k Z_L) / (Σ_j Tr(C_kj Z_L) + Tr(C_{M,k} Z_M) + σ²)`.
pub fn user_sinr_lifted(
    signal: &CMatrix,
    interference: &[CMatrix],
    malicious: &CMatrix,
    z_l: &CMatrix,
    z_m: &CMatrix,
    noise: f64,
) -> Result<f64, MetricsError> {
    check_hermitian(signal, "signal matrix")?;
    for c in interference {
        check_hermitian(c, "interference matrix")?;
    }
    check_hermitian(malicious, "malicious matrix")?;
    check_hermitian(z_l, "legitimate phase matrix")?;
    check_hermitian(z_m, "malicious phase matrix")?;
    if z_l.nrows() != signal.nrows() || z_m.nrows() != malicious.nrows() {
        return Err(MetricsError::Shape("phase matrix does not match channel dimension".into()));
    }
    let num = re_trace_product(signal, z_l);
    let den: f64 = interference.iter().map(|c| re_trace_product(c, z_l)).sum::<f64>()
        + re_trace_product(malicious, z_m)
        + noise;
    Ok(num / den)
}

/// `|β_E| |a_E w_k|² / (Σ_{j≠k} |β_E| |a_E w_j|² + σ²)`.
pub fn eavesdropper_sinr(
    a_e: &SteeringVector,
    beta_e: Complex64,
    w: &CMatrix,
    k: usize,
    noise: f64,
) -> Result<f64, MetricsError> {
    check_index(k, w)?;
    if a_e.len() != w.nrows() {
        return Err(MetricsError::Shape(format!(
            "steering vector of {} entries for {} antennas",
            a_e.len(),
            w.nrows()
        )));
    }
    let gain = beta_e.norm();
    let signal = gain * beam_power(&a_e.entries, w, k);
    let leak: f64 = (0..w.ncols())
        .filter(|&j| j != k)
        .map(|j| gain * beam_power(&a_e.entries, w, j))
        .sum();
    Ok(signal / (leak + noise))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyRates {
    pub rate: Vec<f64>,
    pub rate_eaves: Vec<f64>,
    pub secrecy: Vec<f64>,
    pub sum: f64,
}

/// `S_k = max(log2(1+η_k) - log2(1+η_{E,k}), 0)` in bits/s/Hz.
pub fn secrecy_rates(eta: &[f64], eta_eaves: &[f64]) -> SecrecyRates {
    let rate: Vec<f64> = eta.iter().map(|&x| (1.0 + x).log2()).collect();
    let rate_eaves: Vec<f64> = eta_eaves.iter().map(|&x| (1.0 + x).log2()).collect();
    let secrecy: Vec<f64> = rate.iter().zip(&rate_eaves).map(|(r, e)| (r - e).max(0.0)).collect();
    let sum = secrecy.iter().sum();
    SecrecyRates {
        rate,
        rate_eaves,
        secrecy,
        sum,
    }
}

/// Everything measured on one optimized trial.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub eta: Vec<f64>,
    pub eta_eaves: Vec<f64>,
    pub rate: Vec<f64>,
    pub rate_eaves: Vec<f64>,
    pub secrecy: Vec<f64>,
    pub secrecy_sum: f64,
    pub gamma_legit: f64,
    pub gamma_eaves: f64,
    /// `None` when the angle pair is unidentifiable, e.g. at zero power.
    pub crb_legit: Option<CrbResult>,
    pub crb_eaves: Option<CrbResult>,
}
