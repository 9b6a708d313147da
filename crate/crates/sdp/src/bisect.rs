//! Bisection over the level `t` of a max-min problem whose feasible set
//! shrinks as `t` grows.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::problem::{SdpSolution, SdpStatus, SolverSettings, TraceLpSdp};
use crate::{solve_sdp_with, SdpError};

const MAX_WIDENINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct Bisection {
    /// Largest level certified feasible.
    pub level: f64,
    /// Smallest level found infeasible (or the final bracket end).
    pub upper: f64,
    /// Solution at `level`.
    pub solution: SdpSolution,
    pub solves: usize,
    pub widened: bool,
}

/// A family of feasibility problems indexed by level `t`, with a way to read
/// off the level a given point actually achieves.
pub trait LevelFamily {
    /// `anchor` is the most recent feasible point, if any.
    fn problem(&mut self, t: f64, anchor: Option<&DMatrix<Complex64>>) -> TraceLpSdp;
    fn level(&self, x: &DMatrix<Complex64>) -> f64;
}

struct Plain<F>(F);

impl<F: FnMut(f64) -> TraceLpSdp> LevelFamily for Plain<F> {
    fn problem(&mut self, t: f64, _anchor: Option<&DMatrix<Complex64>>) -> TraceLpSdp {
        (self.0)(t)
    }

    fn level(&self, _x: &DMatrix<Complex64>) -> f64 {
        f64::NEG_INFINITY
    }
}

/// Largest `t` in `[t_lo, t_hi]` (to within `tol_t`) whose problem is feasible.
///
/// Uses arithmetic midpoints, so a bracket that contains the optimum is closed in at
/// most `ceil(log2((t_hi - t_lo) / tol_t)) + 1` solves, counting the check at `t_lo`.
pub fn bisect_maxmin<F>(
    build: F,
    t_lo: f64,
    t_hi: f64,
    tol_t: f64,
    settings: &SolverSettings,
) -> Result<Bisection, SdpError>
where
    F: FnMut(f64) -> TraceLpSdp,
{
    run(&mut Plain(build), t_lo, t_hi, tol_t, 0, settings)
}

/// Like [`bisect_maxmin`], but after each feasible solve raises the lower end to the
/// level the solution achieves and probes just above it; falls back to midpoints
/// after `max_level_steps` such probes.
pub fn bisect_levels<F: LevelFamily>(
    family: &mut F,
    t_lo: f64,
    t_hi: f64,
    tol_t: f64,
    max_level_steps: usize,
    settings: &SolverSettings,
) -> Result<Bisection, SdpError> {
    run(family, t_lo, t_hi, tol_t, max_level_steps, settings)
}

fn run<F: LevelFamily>(
    family: &mut F,
    t_lo: f64,
    t_hi: f64,
    tol_t: f64,
    max_level_steps: usize,
    settings: &SolverSettings,
) -> Result<Bisection, SdpError> {
    if !(tol_t > 0.0) || !(t_hi >= t_lo) || !t_lo.is_finite() || !t_hi.is_finite() {
        return Err(SdpError::InvalidProblem(format!(
            "bad bisection bracket [{t_lo}, {t_hi}] with tolerance {tol_t}"
        )));
    }
    let mut solves = 1;
    let first = solve_sdp_with(&family.problem(t_lo, None), settings)?;
    if first.status != SdpStatus::Optimal {
        return Err(SdpError::InfeasibleScenario(t_lo));
    }
    let mut lo = t_lo.max(family.level(&first.x));
    let mut best = first;
    let mut hi = t_hi;
    let mut certified = false;
    let mut widened = false;
    let mut level_steps = 0;
    let mut widenings = 0;
    loop {
        while hi - lo > tol_t {
            let t = if level_steps < max_level_steps {
                level_steps += 1;
                lo + 0.5 * tol_t
            } else {
                0.5 * (lo + hi)
            };
            solves += 1;
            let sol = solve_sdp_with(&family.problem(t, Some(&best.x)), settings)?;
            match sol.status {
                SdpStatus::Optimal => {
                    lo = t.max(family.level(&sol.x));
                    best = sol;
                }
                SdpStatus::Infeasible | SdpStatus::Inaccurate => {
                    if sol.status == SdpStatus::Inaccurate {
                        log::warn!("inaccurate solve at level {t:.6e}; treated as infeasible");
                    }
                    hi = t;
                    certified = true;
                }
            }
        }
        if certified || widenings >= MAX_WIDENINGS {
            break;
        }
        // No probe failed: the upper end itself must be checked.
        let t = hi.max(lo);
        solves += 1;
        let sol = solve_sdp_with(&family.problem(t, Some(&best.x)), settings)?;
        if sol.status == SdpStatus::Optimal {
            log::warn!("upper bisection bound {t:.6e} is feasible; widening the bracket");
            widened = true;
            widenings += 1;
            lo = t.max(family.level(&sol.x));
            best = sol;
            hi = lo + 2.0 * (lo - t_lo).max(tol_t);
        } else {
            hi = t;
            certified = true;
            break;
        }
    }
    if !certified {
        return Err(SdpError::Unbounded(hi));
    }
    Ok(Bisection {
        level: lo,
        upper: hi.max(lo),
        solution: best,
        solves,
        widened,
    })
}
