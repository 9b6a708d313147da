//! Monte Carlo runner, figure presets and CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::channel::{draw_attack, draw_channels};
use crate::optimizer::{design_transmit, measure, solve_p1, DesignOptions};
use crate::rng::trial_seed;
use crate::scenario::{derive_geometry, linear_to_db, ConfigError, Placement, RisShape, ScenarioConfig};

/// Users reported individually in the CSV.
pub const CSV_USERS: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVar {
    #[serde(rename = "P_T")]
    TotalPower,
    #[serde(rename = "N_M")]
    MaliciousElements,
    #[serde(rename = "N_L")]
    LegitElements,
    #[serde(rename = "d_E^x")]
    EavesOffset,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::TotalPower => "P_T",
            SweepVar::MaliciousElements => "N_M",
            SweepVar::LegitElements => "N_L",
            SweepVar::EavesOffset => "d_E^x",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    pub powers_dbw: Vec<f64>,
    pub n_legit: Option<usize>,
    pub n_malicious: Option<usize>,
}

const POWERS_WIDE: [f64; 6] = [-3.0, 0.0, 3.0, 6.0, 9.0, 12.0];
const POWERS_LOW: [f64; 4] = [-3.0, 0.0, 3.0, 6.0];

/// Built-in presets; `custom` runs the configuration as given.
pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "fig3",
            description: "sum secrecy rate vs P_T for N_M in {49,144,256}, N_L = 144",
            sweep: SweepVar::MaliciousElements,
            grid: vec![49.0, 144.0, 256.0],
            powers_dbw: POWERS_WIDE.to_vec(),
            n_legit: Some(144),
            n_malicious: None,
        },
        Preset {
            name: "fig4",
            description: "sum secrecy rate vs P_T for N_L in {36,100,121,144}, N_M = 36",
            sweep: SweepVar::LegitElements,
            grid: vec![36.0, 100.0, 121.0, 144.0],
            powers_dbw: POWERS_WIDE.to_vec(),
            n_legit: None,
            n_malicious: Some(36),
        },
        Preset {
            name: "fig5",
            description: "sum secrecy rate vs N_L in {36,100,121,144} for P_T in {-3,0,3,6} dBW, N_M = 36",
            sweep: SweepVar::LegitElements,
            grid: vec![36.0, 100.0, 121.0, 144.0],
            powers_dbw: POWERS_LOW.to_vec(),
            n_legit: None,
            n_malicious: Some(36),
        },
        Preset {
            name: "fig6",
            description: "sum secrecy rate vs N_M from 25 to 225 for P_T in {-3,0,3,6} dBW, N_L = 100",
            sweep: SweepVar::MaliciousElements,
            grid: vec![25.0, 49.0, 81.0, 121.0, 169.0, 225.0],
            powers_dbw: POWERS_LOW.to_vec(),
            n_legit: Some(100),
            n_malicious: None,
        },
        Preset {
            name: "fig7",
            description: "sensing SINR of both targets vs P_T for E-UAV horizontal offset 25..50 m",
            sweep: SweepVar::EavesOffset,
            grid: vec![25.0, 30.0, 35.0, 40.0, 45.0, 50.0],
            powers_dbw: POWERS_WIDE.to_vec(),
            n_legit: None,
            n_malicious: None,
        },
        Preset {
            name: "fig8",
            description: "root CRB of the E-UAV vs horizontal offset 25..55 m",
            sweep: SweepVar::EavesOffset,
            grid: vec![25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0],
            powers_dbw: POWERS_LOW.to_vec(),
            n_legit: None,
            n_malicious: None,
        },
        Preset {
            name: "custom",
            description: "the configuration as given, at its own transmit power",
            sweep: SweepVar::TotalPower,
            grid: Vec::new(),
            powers_dbw: Vec::new(),
            n_legit: None,
            n_malicious: None,
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub preset: String,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    /// Transmit powers run at every grid value.
    pub powers_dbw: Vec<f64>,
    pub n_legit: Option<usize>,
    pub n_malicious: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    /// Plan for `preset` with trial count and seed taken from `cfg` unless given.
    pub fn from_preset(p: &Preset, cfg: &ScenarioConfig, trials: Option<usize>, seed: Option<u64>) -> Self {
        let (grid, powers) = if p.name == "custom" {
            let dbw = cfg.total_power_dbw();
            (vec![dbw], vec![dbw])
        } else {
            (p.grid.clone(), p.powers_dbw.clone())
        };
        Self {
            preset: p.name.to_string(),
            sweep: p.sweep,
            grid,
            powers_dbw: powers,
            n_legit: p.n_legit,
            n_malicious: p.n_malicious,
            trials: trials.unwrap_or(cfg.experiment.trials),
            seed: seed.unwrap_or(cfg.experiment.seed),
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.grid.is_empty() {
            return Err(HarnessError::Plan("grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(HarnessError::Plan("trials must be at least 1".into()));
        }
        if self.sweep != SweepVar::TotalPower && self.powers_dbw.is_empty() {
            return Err(HarnessError::Plan("no transmit powers given".into()));
        }
        Ok(())
    }

    /// `(grid value, power in dBW)` pairs in output order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        if self.sweep == SweepVar::TotalPower {
            return self.grid.iter().map(|&g| (g, g)).collect();
        }
        let mut out = Vec::with_capacity(self.grid.len() * self.powers_dbw.len());
        for &g in &self.grid {
            for &p in &self.powers_dbw {
                out.push((g, p));
            }
        }
        out
    }
}

fn square_shape(field: &str, n: f64) -> Result<RisShape, ConfigError> {
    if n == 0.0 && field == "N_M" {
        return Ok(RisShape::new(0, 0));
    }
    if n.fract() != 0.0 || n < 1.0 {
        return Err(ConfigError::Invalid {
            field: field.into(),
            reason: format!("{n} is not a positive element count"),
        });
    }
    RisShape::square(n as usize).ok_or_else(|| ConfigError::Invalid {
        field: field.into(),
        reason: format!("{n} elements do not form a square array"),
    })
}

/// The scenario at one grid point.
pub fn point_config(
    base: &ScenarioConfig,
    plan: &ExperimentPlan,
    grid_value: f64,
    power_dbw: f64,
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = base.clone();
    if let Some(n) = plan.n_legit {
        cfg.ris_legit = square_shape("N_L", n as f64)?;
    }
    if let Some(n) = plan.n_malicious {
        cfg.ris_malicious = square_shape("N_M", n as f64)?;
    }
    match plan.sweep {
        SweepVar::TotalPower => {}
        SweepVar::MaliciousElements => cfg.ris_malicious = square_shape("N_M", grid_value)?,
        SweepVar::LegitElements => cfg.ris_legit = square_shape("N_L", grid_value)?,
        SweepVar::EavesOffset => match &mut cfg.placement {
            Placement::Positions(p) => p.eaves_uav[0] = p.bs[0] - grid_value,
            Placement::Direct(_) => {
                return Err(ConfigError::Invalid {
                    field: "geometry".into(),
                    reason: "sweeping the E-UAV offset needs node positions".into(),
                })
            }
        },
    }
    cfg.set_total_power_dbw(power_dbw);
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrialStatus {
    Ok,
    CapBinding,
    Failed,
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Ok => "ok",
            TrialStatus::CapBinding => "cap_binding",
            TrialStatus::Failed => "failed",
        })
    }
}

/// One detail row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub preset: String,
    pub grid_var: SweepVar,
    pub grid_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub p_t_dbw: f64,
    pub n_legit: usize,
    pub n_malicious: usize,
    pub secrecy_sum: Option<f64>,
    pub secrecy: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_eaves: Vec<f64>,
    pub gamma_legit_db: Option<f64>,
    pub gamma_eaves_db: Option<f64>,
    pub root_crb_theta_deg: Option<f64>,
    pub root_crb_phi_deg: Option<f64>,
    pub root_crb_comb_deg: Option<f64>,
    pub sdr_bound: Option<f64>,
    pub rand_gap: Option<f64>,
    pub status: TrialStatus,
}

pub const RESULT_COLUMNS: [&str; 29] = [
    "preset",
    "grid_var",
    "grid_value",
    "trial",
    "seed",
    "P_T_dBW",
    "N_L",
    "N_M",
    "S_R_sum",
    "S_R_k1",
    "S_R_k2",
    "S_R_k3",
    "S_R_k4",
    "eta_k1",
    "eta_k2",
    "eta_k3",
    "eta_k4",
    "etaE_k1",
    "etaE_k2",
    "etaE_k3",
    "etaE_k4",
    "gamma_L_dB",
    "gamma_E_dB",
    "rootCRB_theta_deg",
    "rootCRB_phi_deg",
    "rootCRB_comb_deg",
    "sdr_bound",
    "rand_gap",
    "status",
];

/// Numeric columns averaged in the aggregates.
pub const METRIC_COLUMNS: [&str; 20] = [
    "S_R_sum",
    "S_R_k1",
    "S_R_k2",
    "S_R_k3",
    "S_R_k4",
    "eta_k1",
    "eta_k2",
    "eta_k3",
    "eta_k4",
    "etaE_k1",
    "etaE_k2",
    "etaE_k3",
    "etaE_k4",
    "gamma_L_dB",
    "gamma_E_dB",
    "rootCRB_theta_deg",
    "rootCRB_phi_deg",
    "rootCRB_comb_deg",
    "sdr_bound",
    "rand_gap",
];

fn fmt_num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

impl TrialRow {
    fn user(v: &[f64], k: usize) -> Option<f64> {
        v.get(k).copied()
    }

    /// Values of [`METRIC_COLUMNS`] in order.
    pub fn metrics(&self) -> [Option<f64>; 20] {
        let s = &self.secrecy;
        let e = &self.eta;
        let x = &self.eta_eaves;
        [
            self.secrecy_sum,
            Self::user(s, 0),
            Self::user(s, 1),
            Self::user(s, 2),
            Self::user(s, 3),
            Self::user(e, 0),
            Self::user(e, 1),
            Self::user(e, 2),
            Self::user(e, 3),
            Self::user(x, 0),
            Self::user(x, 1),
            Self::user(x, 2),
            Self::user(x, 3),
            self.gamma_legit_db,
            self.gamma_eaves_db,
            self.root_crb_theta_deg,
            self.root_crb_phi_deg,
            self.root_crb_comb_deg,
            self.sdr_bound,
            self.rand_gap,
        ]
    }

    pub fn record(&self) -> Vec<String> {
        let mut out = vec![
            self.preset.clone(),
            self.grid_var.to_string(),
            format!("{}", self.grid_value),
            self.trial.to_string(),
            self.seed.to_string(),
            format!("{}", self.p_t_dbw),
            self.n_legit.to_string(),
            self.n_malicious.to_string(),
        ];
        out.extend(self.metrics().iter().map(|v| fmt_num(*v)));
        out.push(self.status.to_string());
        out
    }
}

/// How much of the pipeline a trial runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Covariance, beams and phases.
    Full,
    /// Covariance and beams only, with the legitimate phases left at zero.
    /// Sensing SINR and CRB are identical to [`Stage::Full`].
    Sensing,
}

/// Runs one trial of `cfg` and turns it into a row.
pub fn run_trial(
    cfg: &ScenarioConfig,
    plan: &ExperimentPlan,
    grid_value: f64,
    trial: usize,
    stage: Stage,
) -> TrialRow {
    let seed = trial_seed(plan.seed, trial as u64);
    let mut row = TrialRow {
        preset: plan.preset.clone(),
        grid_var: plan.sweep,
        grid_value,
        trial,
        seed,
        p_t_dbw: cfg.total_power_dbw(),
        n_legit: cfg.n_legit(),
        n_malicious: cfg.n_malicious(),
        secrecy_sum: None,
        secrecy: Vec::new(),
        eta: Vec::new(),
        eta_eaves: Vec::new(),
        gamma_legit_db: None,
        gamma_eaves_db: None,
        root_crb_theta_deg: None,
        root_crb_phi_deg: None,
        root_crb_comb_deg: None,
        sdr_bound: None,
        rand_gap: None,
        status: TrialStatus::Failed,
    };
    let geo = match derive_geometry(cfg) {
        Ok(g) => g,
        Err(e) => {
            log::error!("trial {trial} at {grid_value}: {e}");
            return row;
        }
    };
    let ch = draw_channels(cfg, &geo, seed);
    let z_m = draw_attack(cfg, seed);
    let opts = DesignOptions::from_config(cfg);
    let solved = match stage {
        Stage::Full => solve_p1(cfg, &ch, &z_m, &opts).map(|s| (s.transmit.cap_binding, Some(s.phases), s.metrics)),
        Stage::Sensing => design_transmit(cfg, &ch, &opts).and_then(|t| {
            let ones = crate::channel::CVector::from_element(cfg.n_legit(), num_complex::Complex64::new(1.0, 0.0));
            measure(cfg, &ch, &t, &ones, &z_m).map(|m| (t.cap_binding, None, m))
        }),
    };
    match solved {
        Ok((cap, phases, m)) => {
            row.secrecy_sum = Some(m.secrecy_sum);
            row.secrecy = m.secrecy;
            row.eta = m.eta;
            row.eta_eaves = m.eta_eaves;
            row.gamma_legit_db = Some(linear_to_db(m.gamma_legit));
            row.gamma_eaves_db = Some(linear_to_db(m.gamma_eaves));
            if let Some(c) = m.crb_eaves {
                row.root_crb_theta_deg = Some(c.root_theta_deg);
                row.root_crb_phi_deg = Some(c.root_phi_deg);
                row.root_crb_comb_deg = Some(c.root_combined_deg);
            }
            if let Some(p) = phases {
                row.sdr_bound = Some(p.sdr_bound);
                row.rand_gap = Some(p.randomization_gap);
            }
            row.status = if cap { TrialStatus::CapBinding } else { TrialStatus::Ok };
        }
        Err(e) => log::error!("trial {trial} at {} = {grid_value}: {e}", plan.sweep),
    }
    row
}

/// Mean and standard error of each metric at one `(grid value, power)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub preset: String,
    pub grid_var: SweepVar,
    pub grid_value: f64,
    pub p_t_dbw: f64,
    pub n_legit: usize,
    pub n_malicious: usize,
    pub trials: usize,
    pub flagged: usize,
    pub mean: Vec<Option<f64>>,
    pub stderr: Vec<Option<f64>>,
}

impl AggregateRow {
    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = [
            "preset", "grid_var", "grid_value", "P_T_dBW", "N_L", "N_M", "trials", "flagged",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for c in METRIC_COLUMNS {
            h.push(format!("mean_{c}"));
            h.push(format!("se_{c}"));
        }
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut out = vec![
            self.preset.clone(),
            self.grid_var.to_string(),
            format!("{}", self.grid_value),
            format!("{}", self.p_t_dbw),
            self.n_legit.to_string(),
            self.n_malicious.to_string(),
            self.trials.to_string(),
            self.flagged.to_string(),
        ];
        for (m, s) in self.mean.iter().zip(&self.stderr) {
            out.push(fmt_num(*m));
            out.push(fmt_num(*s));
        }
        out
    }

    /// Mean of the named metric column.
    pub fn mean_of(&self, column: &str) -> Option<f64> {
        METRIC_COLUMNS.iter().position(|c| *c == column).and_then(|i| self.mean[i])
    }
}

fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Aggregates over unflagged rows, one per `(grid value, power)` in ascending
/// order; the order of `rows` does not matter.
pub fn aggregate(rows: &[TrialRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(u64, u64), Vec<&TrialRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.grid_value.to_bits(), r.p_t_dbw.to_bits())).or_default().push(r);
    }
    let mut order: Vec<(u64, u64)> = groups.keys().copied().collect();
    order.sort_by(|a, b| {
        f64::from_bits(a.0)
            .total_cmp(&f64::from_bits(b.0))
            .then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1)))
    });
    order
        .iter()
        .map(|key| {
            let mut group = groups[key].clone();
            group.sort_by_key(|r| r.trial);
            let first = group[0];
            let good: Vec<&TrialRow> = group.iter().copied().filter(|r| r.status != TrialStatus::Failed).collect();
            let mut mean = Vec::with_capacity(METRIC_COLUMNS.len());
            let mut stderr = Vec::with_capacity(METRIC_COLUMNS.len());
            for i in 0..METRIC_COLUMNS.len() {
                let vals: Vec<f64> = good.iter().filter_map(|r| r.metrics()[i]).filter(|v| !v.is_nan()).collect();
                let (m, s) = mean_se(&vals);
                mean.push(m);
                stderr.push(s);
            }
            AggregateRow {
                preset: first.preset.clone(),
                grid_var: first.grid_var,
                grid_value: first.grid_value,
                p_t_dbw: first.p_t_dbw,
                n_legit: first.n_legit,
                n_malicious: first.n_malicious,
                trials: group.len(),
                flagged: group.len() - good.len(),
                mean,
                stderr,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentResult {
    pub fn flagged_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.status == TrialStatus::Failed).count() as f64 / self.rows.len() as f64
    }

    /// Rows at one grid value and power, in trial order.
    pub fn rows_at(&self, grid_value: f64, p_t_dbw: f64) -> Vec<&TrialRow> {
        self.rows
            .iter()
            .filter(|r| r.grid_value == grid_value && r.p_t_dbw == p_t_dbw)
            .collect()
    }

    pub fn aggregate_at(&self, grid_value: f64, p_t_dbw: f64) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.grid_value == grid_value && a.p_t_dbw == p_t_dbw)
    }
}

/// Runs every `(grid point, trial)` of `plan`.
///
/// Work is spread over the available cores; rows are stored by index so the
/// output does not depend on the schedule.
pub fn run_experiment(plan: &ExperimentPlan, base: &ScenarioConfig, stage: Stage) -> Result<ExperimentResult, HarnessError> {
    plan.validate()?;
    let points = plan.points();
    let configs = points
        .iter()
        .map(|&(g, p)| point_config(base, plan, g, p))
        .collect::<Result<Vec<_>, _>>()?;
    for c in &configs {
        derive_geometry(c).map_err(|e| ConfigError::Invalid {
            field: "geometry".into(),
            reason: e.to_string(),
        })?;
    }
    let jobs = points.len() * plan.trials;
    let slots: Vec<Mutex<Option<TrialRow>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(jobs.max(1));
    let started = Instant::now();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::Relaxed);
                if job >= jobs {
                    break;
                }
                let (pi, trial) = (job / plan.trials, job % plan.trials);
                let mut row = run_trial(&configs[pi], plan, points[pi].0, trial, stage);
                row.p_t_dbw = points[pi].1;
                log::debug!(
                    "{} {}={} P_T={} trial {trial}: {}",
                    plan.preset,
                    plan.sweep,
                    points[pi].0,
                    points[pi].1,
                    row.status
                );
                *slots[job].lock().unwrap_or_else(|e| e.into_inner()) = Some(row);
            });
        }
    });
    log::info!("{} trials in {:.1} s", jobs, started.elapsed().as_secs_f64());
    let rows: Vec<TrialRow> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every job ran"))
        .collect();
    let aggregates = aggregate(&rows);
    Ok(ExperimentResult { rows, aggregates })
}

pub fn write_results_csv<W: Write>(rows: &[TrialRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "results".into(),
        source,
    })?;
    Ok(())
}

pub fn write_aggregates_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AggregateRow::header())?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "aggregates".into(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub solver_version: String,
    pub plan: ExperimentPlan,
    pub config: ScenarioConfig,
    pub master_seed: u64,
    pub trial_seeds: Vec<u64>,
    pub rows: usize,
    pub flagged: usize,
    /// SHA-256 over the plan, config, seeds and both CSV files.
    pub content_hash: String,
    pub wall_clock_s: f64,
}

/// Writes `results.csv`, `aggregates.csv` and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    plan: &ExperimentPlan,
    cfg: &ScenarioConfig,
    result: &ExperimentResult,
    wall_clock_s: f64,
) -> Result<Manifest, HarnessError> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| HarnessError::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut results = Vec::new();
    write_results_csv(&result.rows, &mut results)?;
    let mut aggregates = Vec::new();
    write_aggregates_csv(&result.aggregates, &mut aggregates)?;

    let mut plan_out = plan.clone();
    plan_out.out_dir = None;
    let trial_seeds: Vec<u64> = (0..plan.trials as u64).map(|t| trial_seed(plan.seed, t)).collect();
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&plan_out).unwrap_or_default());
    hasher.update(serde_json::to_vec(cfg).unwrap_or_default());
    hasher.update(serde_json::to_vec(&trial_seeds).unwrap_or_default());
    hasher.update(&results);
    hasher.update(&aggregates);
    let content_hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        solver_version: sdr_core::VERSION.into(),
        plan: plan_out,
        config: cfg.clone(),
        master_seed: plan.seed,
        trial_seeds,
        rows: result.rows.len(),
        flagged: result.rows.iter().filter(|r| r.status == TrialStatus::Failed).count(),
        content_hash,
        wall_clock_s,
    };
    let path = dir.join("results.csv");
    std::fs::write(&path, &results).map_err(io(&path))?;
    let path = dir.join("aggregates.csv");
    std::fs::write(&path, &aggregates).map_err(io(&path))?;
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(&path, json + "\n").map_err(io(&path))?;
    Ok(manifest)
}

/// Paired bootstrap of the mean difference `a - b`.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub mean_diff: f64,
    sorted: Vec<f64>,
}

impl Bootstrap {
    /// Empirical `p` quantile of the resampled mean differences.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p * (n - 1) as f64).round() as usize).min(n - 1);
        self.sorted[idx]
    }

    /// Two-sided percentile interval at confidence `level`.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        let a = (1.0 - level) / 2.0;
        (self.quantile(a), self.quantile(1.0 - a))
    }
}

/// Resamples trial indices with replacement, keeping `a[i]` and `b[i]` paired.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Bootstrap {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    assert!(!a.is_empty() && resamples > 0, "bootstrap needs data and resamples");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorted: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    sorted.sort_by(f64::total_cmp);
    Bootstrap {
        mean_diff: d.iter().sum::<f64>() / n as f64,
        sorted,
    }
}
