//! Two-stage design: transmit covariance for sensing, beam extraction, then
//! legitimate RIS phases for the users.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use sdr_core::{
    bisect_levels, bisect_maxmin, psd_factorize, rank_one_recover, ConstraintMatrix, LevelFamily, Objective,
    SdpError, Sense, SolverSettings, TraceLpSdp,
};

use crate::channel::{steering_derivatives, CMatrix, CVector, ChannelSet};
use crate::comm::{
    eavesdropper_sinr, malicious_power, secrecy_rates, user_sinr_direct, LiftedChannels, MetricsError, MetricsReport,
};
use crate::rng::{substream, Stream};
use crate::scenario::ScenarioConfig;
use crate::sensing::{crb_aod, crb_per_angle, fisher_information, sensing_sinr, CrbResult};

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Relative eigenvalue threshold below which covariance directions are dropped.
const RANK_TOL: f64 = 1e-9;
/// Level-assisted probes before falling back to midpoints.
const LEVEL_STEPS: usize = 12;

#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    pub bisection_tol: f64,
    pub solver: SolverSettings,
    pub randomization_samples: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-3,
            solver: SolverSettings::default(),
            randomization_samples: 1000,
        }
    }
}

impl DesignOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            bisection_tol: cfg.experiment.bisection_tol,
            solver: SolverSettings::with_tol(cfg.experiment.solver_tol),
            randomization_samples: cfg.experiment.randomization_samples,
        }
    }
}

/// Sensing-optimal transmit covariance.
#[derive(Debug, Clone)]
pub struct CovarianceDesign {
    pub r: CMatrix,
    /// Sensing SINR of each sensed target at `r`.
    pub gamma: Vec<f64>,
    pub min_sinr: f64,
    /// Smallest level shown infeasible.
    pub upper: f64,
    /// True when the optimum sits at the sensing SINR cap.
    pub cap_binding: bool,
    pub solves: usize,
}

fn is_zero(m: &CMatrix) -> bool {
    m.iter().all(|v| *v == Complex64::new(0.0, 0.0))
}

fn re_trace(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn largest_eigenvalue(m: &CMatrix) -> Result<f64, SdpError> {
    let (values, _) = sdr_core::hermitian_eigen(m)?;
    Ok(values.first().copied().unwrap_or(0.0).max(0.0))
}

/// Maximizes `min(γ_L, γ_E)` subject to `γ_i ≤ ρ_s` and `Tr R ≤ P_T`.
///
/// A target whose response is identically zero is not sensed and drops out of
/// the minimum; an infinite `rho_s` removes the cap.
pub fn solve_p2(
    a_l: &CMatrix,
    a_e: &CMatrix,
    p_t: f64,
    rho_s: f64,
    noise: f64,
    opts: &DesignOptions,
) -> Result<CovarianceDesign, OptimizerError> {
    let n = a_l.nrows();
    if a_l.shape() != (n, n) || a_e.shape() != (n, n) || n == 0 {
        return Err(OptimizerError::Invalid("sensing matrices must be square and equal in size".into()));
    }
    if !(p_t >= 0.0) || !p_t.is_finite() {
        return Err(OptimizerError::Invalid(format!("transmit power {p_t} is not a finite non-negative value")));
    }
    if !(noise > 0.0) || !(rho_s > 0.0) {
        return Err(OptimizerError::Invalid("noise power and SINR cap must be positive".into()));
    }
    let b: Vec<CMatrix> = [a_l, a_e].iter().map(|a| a.adjoint() * *a * Complex64::new(1.0 / noise, 0.0)).collect();
    let sensed: Vec<usize> = (0..2).filter(|&i| !is_zero(&b[i])).collect();
    if sensed.is_empty() {
        return Err(OptimizerError::Invalid("both sensing responses are zero".into()));
    }
    let gammas = |r: &CMatrix| -> Vec<f64> {
        sensed
            .iter()
            .map(|&i| re_trace(&b[i], r) / (re_trace(&b[1 - i], r) + 1.0))
            .collect()
    };
    if p_t == 0.0 {
        let r = CMatrix::zeros(n, n);
        return Ok(CovarianceDesign {
            gamma: gammas(&r),
            r,
            min_sinr: 0.0,
            upper: 0.0,
            cap_binding: false,
            solves: 0,
        });
    }

    let mut bound = f64::INFINITY;
    for &i in &sensed {
        bound = bound.min(p_t * largest_eigenvalue(&b[i])?);
    }
    let t_hi = bound.min(rho_s) + opts.bisection_tol;
    let eye = CMatrix::identity(n, n);
    let build = |t: f64| {
        let mut p = TraceLpSdp::new(n, Objective::Feasibility);
        for &i in &sensed {
            let j = 1 - i;
            p.push(ConstraintMatrix::Dense(&b[i] - &b[j] * Complex64::new(t, 0.0)), Sense::Ge, t);
            if rho_s.is_finite() {
                p.push_hard(
                    ConstraintMatrix::Dense(&b[i] - &b[j] * Complex64::new(rho_s, 0.0)),
                    Sense::Le,
                    rho_s,
                );
            }
        }
        p.push_hard(ConstraintMatrix::Dense(eye.clone()), Sense::Le, p_t);
        p
    };
    let bis = bisect_maxmin(build, 0.0, t_hi, opts.bisection_tol, &opts.solver)?;
    let mut r = hermitian_part(&bis.solution.x);
    let tr = r.trace().re;
    if tr > p_t {
        r *= Complex64::new(p_t / tr, 0.0);
    }
    let gamma = gammas(&r);
    let min_sinr = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CovarianceDesign {
        r,
        gamma,
        min_sinr,
        upper: bis.upper,
        cap_binding: rho_s.is_finite() && bis.level >= rho_s - 2.0 * opts.bisection_tol,
        solves: bis.solves,
    })
}

fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Beamformer `W = [W_c | W_s]` with `K + T_x` columns.
#[derive(Debug, Clone)]
pub struct BeamSplit {
    pub w: CMatrix,
    /// Eigen-beam index serving each user, `None` for a user left without a beam.
    pub assignment: Vec<Option<usize>>,
}

/// Factors `R = V V^H` and matches users to distinct eigen-beams greedily by
/// `|g̃_k v_c|`, ties going to the lower column index.
pub fn extract_w(r: &CMatrix, num_users: usize, effective: &[CVector]) -> Result<BeamSplit, OptimizerError> {
    let n = r.nrows();
    if effective.len() != num_users || effective.iter().any(|g| g.len() != n) {
        return Err(OptimizerError::Invalid(format!(
            "need {num_users} effective channels of {n} entries"
        )));
    }
    let v = if is_zero(r) {
        CMatrix::zeros(n, n)
    } else {
        psd_factorize(r, RANK_TOL, n)?
    };
    let live: Vec<usize> = (0..n).filter(|&c| v.column(c).iter().any(|x| x.norm() > 0.0)).collect();
    let gain = |k: usize, c: usize| -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..n {
            acc += effective[k][t] * v[(t, c)];
        }
        acc.norm()
    };
    let mut assignment = vec![None; num_users];
    let mut used = vec![false; n];
    for _ in 0..num_users.min(live.len()) {
        let mut best: Option<(f64, usize, usize)> = None;
        for &c in &live {
            if used[c] {
                continue;
            }
            for k in 0..num_users {
                if assignment[k].is_some() {
                    continue;
                }
                let g = gain(k, c);
                if best.is_none_or(|(bg, _, _)| g > bg) {
                    best = Some((g, c, k));
                }
            }
        }
        if let Some((_, c, k)) = best {
            assignment[k] = Some(c);
            used[c] = true;
        }
    }
    let starved = assignment.iter().filter(|a| a.is_none()).count();
    if starved > 0 {
        log::warn!("covariance has rank {} < {num_users} users; {starved} users get no beam", live.len());
    }
    let mut w = CMatrix::zeros(n, num_users + n);
    for (k, a) in assignment.iter().enumerate() {
        if let Some(c) = a {
            w.set_column(k, &v.column(*c));
        }
    }
    let mut next = num_users;
    for c in 0..n {
        if !used[c] {
            w.set_column(next, &v.column(c));
            next += 1;
        }
    }
    Ok(BeamSplit { w, assignment })
}

#[derive(Debug, Clone)]
pub struct TransmitDesign {
    pub r: CMatrix,
    pub w: CMatrix,
    pub assignment: Vec<Option<usize>>,
    pub min_sensing_sinr: f64,
    pub cap_binding: bool,
}

/// Optimized legitimate RIS configuration.
#[derive(Debug, Clone)]
pub struct PhaseDesign {
    /// Relaxed solution with unit diagonal.
    pub z_matrix: CMatrix,
    pub z: CVector,
    /// Upper bound on the relaxed max-min SINR.
    pub sdr_bound: f64,
    /// Largest level certified feasible for the relaxation.
    pub sdr_level: f64,
    /// Min SINR over served users at `z`.
    pub achieved: f64,
    pub randomization_gap: f64,
    /// Users with a nonzero beam; the max-min runs over these.
    pub served: Vec<usize>,
    pub solves: usize,
}

/// Lifted user constraints of the phase design, normalized so that the margin of
/// each row is measured in SINR units at the anchor point.
struct PhaseFamily {
    n: usize,
    factors: Vec<CMatrix>,
    signal: Vec<CMatrix>,
    leak: Vec<CMatrix>,
    floor: Vec<f64>,
}

impl PhaseFamily {
    fn denominators(&self, z: &CMatrix) -> Vec<f64> {
        (0..self.factors.len())
            .map(|k| {
                let core = self.factors[k].adjoint() * z * &self.factors[k];
                re_trace(&self.leak[k], &core) + self.floor[k]
            })
            .collect()
    }
}

impl LevelFamily for PhaseFamily {
    fn problem(&mut self, t: f64, anchor: Option<&DMatrix<Complex64>>) -> TraceLpSdp {
        let eye;
        let z = match anchor {
            Some(z) => z,
            None => {
                eye = CMatrix::identity(self.n, self.n);
                &eye
            }
        };
        let den = self.denominators(z);
        let mut p = TraceLpSdp::new(self.n, Objective::MaxMargin).with_unit_diagonal();
        for k in 0..self.factors.len() {
            let s = 1.0 / den[k];
            let q = (&self.signal[k] - &self.leak[k] * Complex64::new(t, 0.0)) * Complex64::new(s, 0.0);
            p.push(
                ConstraintMatrix::LowRank {
                    v: self.factors[k].clone(),
                    q,
                },
                Sense::Ge,
                t * self.floor[k] * s,
            );
        }
        p
    }

    fn level(&self, x: &DMatrix<Complex64>) -> f64 {
        (0..self.factors.len())
            .map(|k| {
                let core = self.factors[k].adjoint() * x * &self.factors[k];
                re_trace(&self.signal[k], &core) / (re_trace(&self.leak[k], &core) + self.floor[k])
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn unit_diagonal(z: &CMatrix) -> CMatrix {
    let d: Vec<f64> = (0..z.nrows()).map(|l| z[(l, l)].re.max(f64::MIN_POSITIVE).sqrt()).collect();
    let mut out = CMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] / (d[i] * d[j]));
    for l in 0..z.nrows() {
        out[(l, l)] = Complex64::new(1.0, 0.0);
    }
    hermitian_part(&out)
}

/// Per-user beam responses `diag(g_k) H_L W`, so that `z^T P_k` holds every
/// beam's amplitude at user `k`.
fn beam_responses(lifted: &LiftedChannels) -> Vec<CMatrix> {
    let hw = &lifted.h_legit * &lifted.w;
    lifted
        .g_legit
        .iter()
        .map(|g| CMatrix::from_fn(hw.nrows(), hw.ncols(), |l, j| g[l] * hw[(l, j)]))
        .collect()
}

/// Maximizes the smallest user SINR over unit-modulus legitimate phases by
/// bisection on the relaxation, then Gaussian randomization.
///
/// `interference[k]` is the malicious-path power at user `k`.
pub fn solve_p3<R: Rng + ?Sized>(
    lifted: &LiftedChannels,
    interference: &[f64],
    noise: f64,
    opts: &DesignOptions,
    rng: &mut R,
) -> Result<PhaseDesign, OptimizerError> {
    let users = lifted.num_users();
    let n = lifted.h_legit.nrows();
    if interference.len() != users || interference.iter().any(|&v| !(v >= 0.0)) {
        return Err(OptimizerError::Invalid(
            "need one non-negative malicious power per user".into(),
        ));
    }
    if !(noise > 0.0) {
        return Err(OptimizerError::Invalid("noise power must be positive".into()));
    }
    if n == 0 {
        return Err(OptimizerError::Invalid("legitimate RIS has no elements".into()));
    }
    let served: Vec<usize> = (0..users)
        .filter(|&k| k < lifted.w.ncols() && lifted.w.column(k).iter().any(|x| x.norm() > 0.0))
        .collect();
    let ones = CVector::from_element(n, Complex64::new(1.0, 0.0));
    if served.is_empty() {
        return Ok(PhaseDesign {
            z_matrix: ones.clone() * ones.adjoint(),
            z: ones,
            sdr_bound: 0.0,
            sdr_level: 0.0,
            achieved: 0.0,
            randomization_gap: 1.0,
            served,
            solves: 0,
        });
    }

    let conj_r = (&lifted.w * lifted.w.adjoint()).conjugate();
    let mut family = PhaseFamily {
        n,
        factors: Vec::new(),
        signal: Vec::new(),
        leak: Vec::new(),
        floor: Vec::new(),
    };
    let mut t_hi = f64::INFINITY;
    for &k in &served {
        let v = lifted.legit_factor(k);
        let wk = lifted.w.column(k).conjugate();
        let s = &wk * wk.adjoint();
        let u = &v * &wk;
        let l1: f64 = u.iter().map(|x| x.norm()).sum();
        let floor = interference[k] + noise;
        t_hi = t_hi.min(l1 * l1 / floor);
        family.leak.push(&conj_r - &s);
        family.signal.push(s);
        family.factors.push(v);
        family.floor.push(floor);
    }
    let t_hi = t_hi + opts.bisection_tol;
    let bis = bisect_levels(&mut family, 0.0, t_hi, opts.bisection_tol, LEVEL_STEPS, &opts.solver)?;
    let z_matrix = unit_diagonal(&hermitian_part(&bis.solution.x));

    let responses = beam_responses(lifted);
    let objective = |z: &CVector| -> f64 {
        served
            .iter()
            .map(|&k| {
                let amp = responses[k].transpose() * z;
                let total: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
                let sig = amp[k].norm_sqr();
                sig / (total - sig + interference[k] + noise)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let rec = rank_one_recover(&z_matrix, objective, opts.randomization_samples, rng)?;
    let bound = bis.upper;
    Ok(PhaseDesign {
        z_matrix,
        z: rec.z,
        sdr_bound: bound,
        sdr_level: bis.level,
        achieved: rec.value,
        randomization_gap: if bound > 0.0 { rec.value / bound } else { 1.0 },
        served,
        solves: bis.solves,
    })
}

/// Output of the full pipeline on one trial.
#[derive(Debug, Clone)]
pub struct P1Solution {
    pub transmit: TransmitDesign,
    pub phases: PhaseDesign,
    pub metrics: MetricsReport,
}

/// Transmit design only: covariance and beams.
pub fn design_transmit(cfg: &ScenarioConfig, ch: &ChannelSet, opts: &DesignOptions) -> Result<TransmitDesign, OptimizerError> {
    let cov = solve_p2(
        &ch.legit.response,
        &ch.eaves.response,
        cfg.total_power_w,
        cfg.sensing_sinr_cap,
        cfg.noise_power_w,
        opts,
    )?;
    let split = extract_w(&cov.r, cfg.num_users, &ch.effective_user_rows())?;
    Ok(TransmitDesign {
        r: cov.r,
        w: split.w,
        assignment: split.assignment,
        min_sensing_sinr: cov.min_sinr,
        cap_binding: cov.cap_binding,
    })
}

/// Cramér–Rao bound of a target's angle pair under covariance `r`: the joint
/// bound when the angle information is invertible, else the per-angle bound.
pub fn target_crb(cfg: &ScenarioConfig, target: &crate::channel::Target, r: &CMatrix) -> Option<CrbResult> {
    let a = &target.steering.entries;
    let g = a.conjugate() * a.transpose();
    let (gt, gp) = steering_derivatives(target.aod.theta, target.aod.phi, cfg.tx_antennas, cfg.nu_tx());
    let f = fisher_information(&g, &gt, &gp, target.beta, r, cfg.coherent_block_length, cfg.noise_power_w).ok()?;
    crb_aod(&f).or_else(|_| crb_per_angle(&f)).ok()
}

/// Runs the covariance design, beam extraction and phase design, then measures
/// every metric with the optimized `z_L` and the attack `z_m`.
pub fn solve_p1(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    z_m: &CVector,
    opts: &DesignOptions,
) -> Result<P1Solution, OptimizerError> {
    let noise = cfg.noise_power_w;
    let transmit = design_transmit(cfg, ch, opts)?;
    let w = &transmit.w;
    let users = cfg.num_users;
    let interference = (0..users)
        .map(|k| malicious_power(&ch.g_malicious[k], z_m, &ch.h_malicious, w))
        .collect::<Result<Vec<_>, _>>()?;
    let lifted = LiftedChannels {
        g_legit: ch.g_legit.clone(),
        h_legit: ch.h_legit.clone(),
        g_malicious: ch.g_malicious.clone(),
        h_malicious: ch.h_malicious.clone(),
        w: w.clone(),
    };
    let mut rng = substream(ch.rng_seed, Stream::Randomization);
    let phases = solve_p3(&lifted, &interference, noise, opts, &mut rng)?;
    let metrics = measure(cfg, ch, &transmit, &phases.z, z_m)?;
    Ok(P1Solution {
        transmit,
        phases,
        metrics,
    })
}

/// Every reported metric for fixed beams and phases.
pub fn measure(
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    transmit: &TransmitDesign,
    z_l: &CVector,
    z_m: &CVector,
) -> Result<MetricsReport, OptimizerError> {
    let noise = cfg.noise_power_w;
    let w = &transmit.w;
    let mut eta = Vec::with_capacity(cfg.num_users);
    let mut eta_eaves = Vec::with_capacity(cfg.num_users);
    for k in 0..cfg.num_users {
        eta.push(user_sinr_direct(
            &ch.g_legit[k],
            &ch.g_malicious[k],
            z_l,
            z_m,
            &ch.h_legit,
            &ch.h_malicious,
            w,
            k,
            noise,
        )?);
        eta_eaves.push(eavesdropper_sinr(&ch.eaves.steering, ch.eaves.beta, w, k, noise)?);
    }
    let s = secrecy_rates(&eta, &eta_eaves);
    Ok(MetricsReport {
        eta,
        eta_eaves,
        rate: s.rate,
        rate_eaves: s.rate_eaves,
        secrecy: s.secrecy,
        secrecy_sum: s.sum,
        gamma_legit: sensing_sinr(&ch.legit.response, &ch.eaves.response, w, noise),
        gamma_eaves: sensing_sinr(&ch.eaves.response, &ch.legit.response, w, noise),
        crb_legit: target_crb(cfg, &ch.legit, &transmit.r),
        crb_eaves: target_crb(cfg, &ch.eaves, &transmit.r),
    })
}
