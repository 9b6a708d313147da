//! Configuration loading, validation and geometry.
//!
//! Angles are degrees in the file and radians everywhere else. Powers in the
//! file are dBW (or dB for ratios) and are stored linear.
//!
//! Axes: `x` and `y` span the ground plane and `z` points up. For a link with
//! offset `Δ = to - from`, the horizontal angle is `θ = atan2(Δy, Δx)` in
//! `(-π, π]` and the vertical angle is `φ = atan2(-Δz, |Δ_xy|)`, so a node above
//! the origin of the link has negative `φ`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("{0} coincide (zero distance)")]
    Coincident(String),
    #[error("geometry has {got} users but the system has {expected}")]
    UserCount { expected: usize, got: usize },
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A decibel quantity written either as a bare number or as text like `"4 dB"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Db {
    Num(f64),
    Text(String),
}

impl Db {
    fn value(&self, field: &str) -> Result<f64, ConfigError> {
        match self {
            Db::Num(v) => Ok(*v),
            Db::Text(s) => {
                let t = s.trim();
                let t = t
                    .strip_suffix("dBW")
                    .or_else(|| t.strip_suffix("dB"))
                    .unwrap_or(t)
                    .trim();
                t.parse::<f64>()
                    .map_err(|_| invalid(field, format!("cannot parse {s:?} as a dB value")))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    rf: RawRf,
    geometry: RawGeometry,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    carrier_frequency_hz: f64,
    tx_antennas: usize,
    num_users: usize,
    ris_legit: [usize; 2],
    ris_malicious: [usize; 2],
    coherent_block_length: usize,
    sensing_sinr_cap_db: Option<Db>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRf {
    rician_factor_db: Db,
    path_loss_exponent_bs_ris: f64,
    path_loss_exponent_ris_user: f64,
    rcs_m2: f64,
    reference_loss_db: Db,
    noise_power_dbw: Db,
    total_power_dbw: Db,
    element_spacing_tx_m: Option<f64>,
    element_spacing_ris_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    bs: Option<[f64; 3]>,
    legit_uav: Option<[f64; 3]>,
    eaves_uav: Option<[f64; 3]>,
    users: Option<Vec<[f64; 3]>>,
    direct: Option<RawDirect>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirect {
    d_legit_m: f64,
    d_eaves_m: f64,
    aod_legit_deg: [f64; 2],
    aod_eaves_deg: [f64; 2],
    user_distance_legit_m: Vec<f64>,
    user_distance_malicious_m: Vec<f64>,
    user_aod_legit_deg: Vec<[f64; 2]>,
    user_aod_malicious_deg: Vec<[f64; 2]>,
    ris_aod_legit_deg: Option<[f64; 2]>,
    ris_aod_malicious_deg: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    trials: usize,
    seed: u64,
    randomization_samples: usize,
    bisection_tol: f64,
    solver_tol: f64,
}

impl Default for RawExperiment {
    fn default() -> Self {
        let e = ExperimentSettings::default();
        Self {
            trials: e.trials,
            seed: e.seed,
            randomization_samples: e.randomization_samples,
            bisection_tol: e.bisection_tol,
            solver_tol: e.solver_tol,
        }
    }
}

/// Planar array size `nx × nz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisShape {
    pub nx: usize,
    pub nz: usize,
}

impl RisShape {
    pub fn new(nx: usize, nz: usize) -> Self {
        Self { nx, nz }
    }

    /// Square array with `n` elements, if `n` is a perfect square.
    pub fn square(n: usize) -> Option<Self> {
        let s = (n as f64).sqrt().round() as usize;
        (s * s == n).then_some(Self { nx: s, nz: s })
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for RisShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.nx, self.nz)
    }
}

/// Angle pair in radians: horizontal `theta`, vertical `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aod {
    pub theta: f64,
    pub phi: f64,
}

impl Aod {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Self {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    /// The direction pointing back along the same line.
    pub fn reversed(&self) -> Self {
        Self::new(wrap_angle(self.theta + PI), -self.phi)
    }
}

/// Wraps to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub bs: [f64; 3],
    pub legit_uav: [f64; 3],
    pub eaves_uav: [f64; 3],
    pub users: Vec<[f64; 3]>,
}

/// Distances and angles given directly rather than through coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectGeometry {
    pub d_legit: f64,
    pub d_eaves: f64,
    pub aod_legit: Aod,
    pub aod_eaves: Aod,
    pub user_distance_legit: Vec<f64>,
    pub user_distance_malicious: Vec<f64>,
    pub user_aod_legit: Vec<Aod>,
    pub user_aod_malicious: Vec<Aod>,
    pub ris_aod_legit: Option<Aod>,
    pub ris_aod_malicious: Option<Aod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Placement {
    Positions(Positions),
    Direct(DirectGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub trials: usize,
    pub seed: u64,
    pub randomization_samples: usize,
    pub bisection_tol: f64,
    pub solver_tol: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            randomization_samples: 1000,
            bisection_tol: 1e-3,
            solver_tol: 1e-7,
        }
    }
}

/// Fully resolved scenario with every quantity in linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub carrier_frequency_hz: f64,
    pub tx_antennas: usize,
    pub num_users: usize,
    pub ris_legit: RisShape,
    pub ris_malicious: RisShape,
    pub coherent_block_length: usize,
    pub rician_factor: f64,
    pub path_loss_exponent_bs_ris: f64,
    pub path_loss_exponent_ris_user: f64,
    pub rcs_m2: f64,
    pub reference_loss: f64,
    pub noise_power_w: f64,
    pub total_power_w: f64,
    pub sensing_sinr_cap: f64,
    pub element_spacing_tx_m: f64,
    pub element_spacing_ris_m: f64,
    pub placement: Placement,
    pub experiment: ExperimentSettings,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn finite_point(field: &str, p: [f64; 3]) -> Result<[f64; 3], ConfigError> {
    if p.iter().all(|v| v.is_finite()) {
        Ok(p)
    } else {
        Err(invalid(field, "coordinates must be finite"))
    }
}

fn angle_pair(field: &str, a: [f64; 2]) -> Result<Aod, ConfigError> {
    let [t, p] = a;
    if !t.is_finite() || !p.is_finite() {
        return Err(invalid(field, "angles must be finite"));
    }
    if p.abs() > 90.0 {
        return Err(invalid(field, format!("vertical angle {p} deg is outside [-90, 90]")));
    }
    Ok(Aod::new(wrap_angle(t.to_radians()), p.to_radians()))
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let s = &raw.system;
        let carrier = positive("system.carrier_frequency_hz", s.carrier_frequency_hz)?;
        if s.tx_antennas < 2 {
            return Err(invalid(
                "system.tx_antennas",
                "at least 2 antennas are needed for an identifiable angle estimate",
            ));
        }
        if s.num_users == 0 {
            return Err(invalid("system.num_users", "must be at least 1"));
        }
        if s.num_users > s.tx_antennas {
            return Err(invalid(
                "system.num_users",
                format!("{} users exceed {} transmit antennas", s.num_users, s.tx_antennas),
            ));
        }
        if s.ris_legit[0] == 0 || s.ris_legit[1] == 0 {
            return Err(invalid("system.ris_legit", "both dimensions must be at least 1"));
        }
        if (s.ris_malicious[0] == 0) != (s.ris_malicious[1] == 0) {
            return Err(invalid(
                "system.ris_malicious",
                "dimensions must both be positive, or both zero for no malicious surface",
            ));
        }
        if s.coherent_block_length == 0 {
            return Err(invalid("system.coherent_block_length", "must be at least 1"));
        }
        let cap_db = match &s.sensing_sinr_cap_db {
            Some(d) => finite("system.sensing_sinr_cap_db", d.value("system.sensing_sinr_cap_db")?)?,
            None => 20.0,
        };

        let rf = &raw.rf;
        let kappa_db = finite("rf.rician_factor_db", rf.rician_factor_db.value("rf.rician_factor_db")?)?;
        let l0_db = finite("rf.reference_loss_db", rf.reference_loss_db.value("rf.reference_loss_db")?)?;
        let noise_dbw = finite("rf.noise_power_dbw", rf.noise_power_dbw.value("rf.noise_power_dbw")?)?;
        let power_dbw = rf.total_power_dbw.value("rf.total_power_dbw")?;
        if power_dbw.is_nan() || power_dbw == f64::INFINITY {
            return Err(invalid("rf.total_power_dbw", format!("must be finite or -inf, got {power_dbw}")));
        }
        let wavelength = SPEED_OF_LIGHT / carrier;
        let spacing_tx = match rf.element_spacing_tx_m {
            Some(v) => positive("rf.element_spacing_tx_m", v)?,
            None => wavelength / 2.0,
        };
        let spacing_ris = match rf.element_spacing_ris_m {
            Some(v) => positive("rf.element_spacing_ris_m", v)?,
            None => wavelength / 2.0,
        };

        let placement = resolve_placement(&raw.geometry, s.num_users)?;

        let e = &raw.experiment;
        if e.trials == 0 {
            return Err(invalid("experiment.trials", "must be at least 1"));
        }
        if e.randomization_samples == 0 {
            return Err(invalid("experiment.randomization_samples", "must be at least 1"));
        }

        let cfg = Self {
            carrier_frequency_hz: carrier,
            tx_antennas: s.tx_antennas,
            num_users: s.num_users,
            ris_legit: RisShape::new(s.ris_legit[0], s.ris_legit[1]),
            ris_malicious: RisShape::new(s.ris_malicious[0], s.ris_malicious[1]),
            coherent_block_length: s.coherent_block_length,
            rician_factor: db_to_linear(kappa_db),
            path_loss_exponent_bs_ris: positive("rf.path_loss_exponent_bs_ris", rf.path_loss_exponent_bs_ris)?,
            path_loss_exponent_ris_user: positive("rf.path_loss_exponent_ris_user", rf.path_loss_exponent_ris_user)?,
            rcs_m2: positive("rf.rcs_m2", rf.rcs_m2)?,
            reference_loss: db_to_linear(l0_db),
            noise_power_w: db_to_linear(noise_dbw),
            total_power_w: db_to_linear(power_dbw),
            sensing_sinr_cap: db_to_linear(cap_db),
            element_spacing_tx_m: spacing_tx,
            element_spacing_ris_m: spacing_ris,
            placement,
            experiment: ExperimentSettings {
                trials: e.trials,
                seed: e.seed,
                randomization_samples: e.randomization_samples,
                bisection_tol: positive("experiment.bisection_tol", e.bisection_tol)?,
                solver_tol: positive("experiment.solver_tol", e.solver_tol)?,
            },
        };
        derive_geometry(&cfg).map_err(|e| invalid("geometry", e.to_string()))?;
        Ok(cfg)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// `2π d_T / λ`.
    pub fn nu_tx(&self) -> f64 {
        2.0 * PI * self.element_spacing_tx_m / self.wavelength()
    }

    /// `2π d_R / λ`.
    pub fn nu_ris(&self) -> f64 {
        2.0 * PI * self.element_spacing_ris_m / self.wavelength()
    }

    pub fn n_legit(&self) -> usize {
        self.ris_legit.len()
    }

    pub fn n_malicious(&self) -> usize {
        self.ris_malicious.len()
    }

    pub fn total_power_dbw(&self) -> f64 {
        linear_to_db(self.total_power_w)
    }

    pub fn set_total_power_dbw(&mut self, dbw: f64) {
        self.total_power_w = db_to_linear(dbw);
    }
}

fn resolve_placement(g: &RawGeometry, users: usize) -> Result<Placement, ConfigError> {
    let any_position = g.bs.is_some() || g.legit_uav.is_some() || g.eaves_uav.is_some() || g.users.is_some();
    if any_position {
        let need = |name: &str, v: Option<[f64; 3]>| {
            v.ok_or_else(|| invalid(&format!("geometry.{name}"), "missing while other positions are given"))
                .and_then(|p| finite_point(&format!("geometry.{name}"), p))
        };
        let bs = need("bs", g.bs)?;
        let legit_uav = need("legit_uav", g.legit_uav)?;
        let eaves_uav = need("eaves_uav", g.eaves_uav)?;
        let list = g
            .users
            .as_ref()
            .ok_or_else(|| invalid("geometry.users", "missing while other positions are given"))?;
        if list.len() != users {
            return Err(invalid(
                "geometry.users",
                format!("{} positions given for {users} users", list.len()),
            ));
        }
        let list = list
            .iter()
            .enumerate()
            .map(|(k, p)| finite_point(&format!("geometry.users[{k}]"), *p))
            .collect::<Result<Vec<_>, _>>()?;
        if g.direct.is_some() {
            log::debug!("geometry: positions given, ignoring [geometry.direct]");
        }
        return Ok(Placement::Positions(Positions {
            bs,
            legit_uav,
            eaves_uav,
            users: list,
        }));
    }
    let d = g
        .direct
        .as_ref()
        .ok_or_else(|| invalid("geometry", "give either node positions or a [geometry.direct] table"))?;
    let count = |field: &str, n: usize| {
        if n == users {
            Ok(())
        } else {
            Err(invalid(field, format!("{n} entries given for {users} users")))
        }
    };
    count("geometry.direct.user_distance_legit_m", d.user_distance_legit_m.len())?;
    count("geometry.direct.user_distance_malicious_m", d.user_distance_malicious_m.len())?;
    count("geometry.direct.user_aod_legit_deg", d.user_aod_legit_deg.len())?;
    count("geometry.direct.user_aod_malicious_deg", d.user_aod_malicious_deg.len())?;
    let dists = |field: &str, v: &[f64]| -> Result<Vec<f64>, ConfigError> {
        v.iter()
            .enumerate()
            .map(|(k, &x)| positive(&format!("{field}[{k}]"), x))
            .collect()
    };
    let angles = |field: &str, v: &[[f64; 2]]| -> Result<Vec<Aod>, ConfigError> {
        v.iter()
            .enumerate()
            .map(|(k, &a)| angle_pair(&format!("{field}[{k}]"), a))
            .collect()
    };
    Ok(Placement::Direct(DirectGeometry {
        d_legit: positive("geometry.direct.d_legit_m", d.d_legit_m)?,
        d_eaves: positive("geometry.direct.d_eaves_m", d.d_eaves_m)?,
        aod_legit: angle_pair("geometry.direct.aod_legit_deg", d.aod_legit_deg)?,
        aod_eaves: angle_pair("geometry.direct.aod_eaves_deg", d.aod_eaves_deg)?,
        user_distance_legit: dists("geometry.direct.user_distance_legit_m", &d.user_distance_legit_m)?,
        user_distance_malicious: dists("geometry.direct.user_distance_malicious_m", &d.user_distance_malicious_m)?,
        user_aod_legit: angles("geometry.direct.user_aod_legit_deg", &d.user_aod_legit_deg)?,
        user_aod_malicious: angles("geometry.direct.user_aod_malicious_deg", &d.user_aod_malicious_deg)?,
        ris_aod_legit: d
            .ris_aod_legit_deg
            .map(|a| angle_pair("geometry.direct.ris_aod_legit_deg", a))
            .transpose()?,
        ris_aod_malicious: d
            .ris_aod_malicious_deg
            .map(|a| angle_pair("geometry.direct.ris_aod_malicious_deg", a))
            .transpose()?,
    }))
}

/// Distances (m) and angle pairs (rad) of every link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    /// BS to L-UAV, which also carries the legitimate RIS.
    pub d_legit: f64,
    /// BS to E-UAV, which also carries the malicious RIS.
    pub d_eaves: f64,
    pub aod_legit: Aod,
    pub aod_eaves: Aod,
    /// Angles at each RIS toward the BS.
    pub ris_aod_legit: Aod,
    pub ris_aod_malicious: Aod,
    pub user_distance_legit: Vec<f64>,
    pub user_distance_malicious: Vec<f64>,
    pub user_aod_legit: Vec<Aod>,
    pub user_aod_malicious: Vec<Aod>,
}

/// Distance and angle pair of the link `from -> to`.
pub fn link(from: [f64; 3], to: [f64; 3]) -> (f64, Aod) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let dz = to[2] - from[2];
    let rho = dx.hypot(dy);
    let d = rho.hypot(dz);
    (d, Aod::new(wrap_angle(dy.atan2(dx)), (-dz).atan2(rho)))
}

/// Position reached from `from` by travelling `d` along `aod`; inverse of [`link`].
pub fn displace(from: [f64; 3], d: f64, aod: Aod) -> [f64; 3] {
    [
        from[0] + d * aod.phi.cos() * aod.theta.cos(),
        from[1] + d * aod.phi.cos() * aod.theta.sin(),
        from[2] - d * aod.phi.sin(),
    ]
}

pub fn derive_geometry(cfg: &ScenarioConfig) -> Result<Geometry, GeometryError> {
    match &cfg.placement {
        Placement::Positions(p) => from_positions(p, cfg.num_users),
        Placement::Direct(d) => {
            if d.user_distance_legit.len() != cfg.num_users {
                return Err(GeometryError::UserCount {
                    expected: cfg.num_users,
                    got: d.user_distance_legit.len(),
                });
            }
            Ok(Geometry {
                d_legit: d.d_legit,
                d_eaves: d.d_eaves,
                aod_legit: d.aod_legit,
                aod_eaves: d.aod_eaves,
                ris_aod_legit: d.ris_aod_legit.unwrap_or_else(|| d.aod_legit.reversed()),
                ris_aod_malicious: d.ris_aod_malicious.unwrap_or_else(|| d.aod_eaves.reversed()),
                user_distance_legit: d.user_distance_legit.clone(),
                user_distance_malicious: d.user_distance_malicious.clone(),
                user_aod_legit: d.user_aod_legit.clone(),
                user_aod_malicious: d.user_aod_malicious.clone(),
            })
        }
    }
}

fn checked(from: [f64; 3], to: [f64; 3], what: impl FnOnce() -> String) -> Result<(f64, Aod), GeometryError> {
    let (d, a) = link(from, to);
    if d > 0.0 {
        Ok((d, a))
    } else {
        Err(GeometryError::Coincident(what()))
    }
}

fn from_positions(p: &Positions, users: usize) -> Result<Geometry, GeometryError> {
    if p.users.len() != users {
        return Err(GeometryError::UserCount {
            expected: users,
            got: p.users.len(),
        });
    }
    let (d_legit, aod_legit) = checked(p.bs, p.legit_uav, || "BS and L-UAV".into())?;
    let (d_eaves, aod_eaves) = checked(p.bs, p.eaves_uav, || "BS and E-UAV".into())?;
    let (_, ris_aod_legit) = link(p.legit_uav, p.bs);
    let (_, ris_aod_malicious) = link(p.eaves_uav, p.bs);
    let mut geo = Geometry {
        d_legit,
        d_eaves,
        aod_legit,
        aod_eaves,
        ris_aod_legit,
        ris_aod_malicious,
        user_distance_legit: Vec::with_capacity(users),
        user_distance_malicious: Vec::with_capacity(users),
        user_aod_legit: Vec::with_capacity(users),
        user_aod_malicious: Vec::with_capacity(users),
    };
    for (k, u) in p.users.iter().enumerate() {
        let (dl, al) = checked(p.legit_uav, *u, || format!("L-RIS and user {}", k + 1))?;
        let (dm, am) = checked(p.eaves_uav, *u, || format!("M-RIS and user {}", k + 1))?;
        geo.user_distance_legit.push(dl);
        geo.user_aod_legit.push(al);
        geo.user_distance_malicious.push(dm);
        geo.user_aod_malicious.push(am);
    }
    Ok(geo)
}
