use faer::{c64, Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ipm::{Exit, Params, Row, RowOp, StdForm};
use crate::problem::{ConstraintMatrix, Objective, Sense, SdpSolution, SdpStatus, SolverSettings, TraceLpSdp};
use crate::SdpError;

pub(crate) fn to_faer(m: &DMatrix<Complex64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn to_nalgebra(m: &Mat<c64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Solves `problem` with default settings at relative tolerance `tol`.
pub fn solve_sdp(problem: &TraceLpSdp, tol: f64) -> Result<SdpSolution, SdpError> {
    solve_sdp_with(problem, &SolverSettings::with_tol(tol))
}

pub fn solve_sdp_with(problem: &TraceLpSdp, settings: &SolverSettings) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let bound = trace_bound(problem)?;
    match &problem.objective {
        Objective::Feasibility => Ok(margin_solve(problem, settings, bound, true)),
        Objective::MaxMargin => Ok(margin_solve(problem, settings, bound, false)),
        Objective::Maximize(c) => optimize(problem, settings, bound, c, -1.0),
        Objective::Minimize(c) => optimize(problem, settings, bound, c, 1.0),
    }
}

fn row_op(matrix: &ConstraintMatrix) -> RowOp {
    match matrix {
        ConstraintMatrix::Dense(a) => RowOp::Dense(to_faer(a)),
        ConstraintMatrix::LowRank { v, q } => RowOp::LowRank {
            v: to_faer(v),
            q: to_faer(q),
            dense: to_faer(&matrix.to_dense()),
        },
    }
}

fn min_eigenvalue(a: &DMatrix<Complex64>) -> f64 {
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .ok()
        .and_then(|v| v.first().copied())
        .unwrap_or(f64::NAN)
}

/// Upper bound on `Tr X` over the feasible set.
fn trace_bound(problem: &TraceLpSdp) -> Result<f64, SdpError> {
    if problem.unit_diagonal {
        return Ok(problem.n as f64);
    }
    let mut best = f64::INFINITY;
    for c in &problem.constraints {
        if c.sense != Sense::Le {
            continue;
        }
        if let ConstraintMatrix::Dense(a) = &c.matrix {
            let lam = min_eigenvalue(a);
            if lam > 0.0 {
                best = best.min((c.rhs / lam).max(0.0));
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(SdpError::InvalidProblem(
            "feasible set is unbounded: set a unit diagonal or add a positive definite <= constraint".into(),
        ))
    }
}

fn diag_rows(problem: &TraceLpSdp) -> Vec<Row> {
    if !problem.unit_diagonal {
        return Vec::new();
    }
    (0..problem.n)
        .map(|l| Row {
            op: RowOp::Diag(l),
            vars: Vec::new(),
            rhs: 1.0,
        })
        .collect()
}

fn reference_point(problem: &TraceLpSdp, bound: f64) -> DMatrix<Complex64> {
    let scale = if problem.unit_diagonal { 1.0 } else { bound / problem.n as f64 };
    DMatrix::from_diagonal_element(problem.n, problem.n, Complex64::new(scale, 0.0))
}

/// Margin reformulation: `s = u + s_lb`, `u ≥ 0`, `u + v = s_ub - s_lb`, maximize `u`.
fn margin_solve(problem: &TraceLpSdp, settings: &SolverSettings, bound: f64, stop_early: bool) -> SdpSolution {
    let x0 = reference_point(problem, bound);
    let ineq: Vec<usize> = (0..problem.constraints.len())
        .filter(|&i| problem.constraints[i].sense != Sense::Eq)
        .collect();
    let soft: Vec<usize> = ineq
        .iter()
        .copied()
        .filter(|&i| problem.constraints[i].margin_weight > 0.0)
        .collect();
    let m0 = soft
        .iter()
        .map(|&i| problem.constraints[i].slack(&x0) / problem.constraints[i].margin_weight)
        .fold(f64::INFINITY, f64::min);
    let s_lb = if m0.is_finite() { m0 - (1.0 + m0.abs()) } else { -1.0 };
    let s_ub = soft
        .iter()
        .map(|&i| {
            let c = &problem.constraints[i];
            (c.rhs.abs() + c.matrix.to_dense().norm() * bound) / c.margin_weight
        })
        .fold(f64::INFINITY, f64::min);
    let s_ub = if s_ub.is_finite() { s_ub + 1.0 } else { 1.0 };

    let n_slack = ineq.len();
    let u = n_slack;
    let v = n_slack + 1;
    let mut rows = Vec::new();
    let mut slack_idx = 0;
    for c in &problem.constraints {
        let op = row_op(&c.matrix);
        let row = match c.sense {
            Sense::Ge => {
                slack_idx += 1;
                let w = c.margin_weight;
                Row {
                    op,
                    vars: margin_vars(slack_idx - 1, u, -1.0, w),
                    rhs: c.rhs + w * s_lb,
                }
            }
            Sense::Le => {
                slack_idx += 1;
                let w = c.margin_weight;
                Row {
                    op,
                    vars: margin_vars(slack_idx - 1, u, 1.0, w),
                    rhs: c.rhs - w * s_lb,
                }
            }
            Sense::Eq => Row {
                op,
                vars: Vec::new(),
                rhs: c.rhs,
            },
        };
        rows.push(row);
    }
    rows.extend(diag_rows(problem));
    rows.push(Row {
        op: RowOp::Empty,
        vars: vec![(u, 1.0), (v, 1.0)],
        rhs: s_ub - s_lb,
    });
    let mut c_vec = vec![0.0; n_slack + 2];
    c_vec[u] = -1.0;
    let form = StdForm {
        n: problem.n,
        rows,
        c_mat: None,
        c_vec,
    };
    let params = Params {
        tol: settings.tol,
        max_iter: settings.max_iter,
        step_fraction: settings.step_fraction,
    };
    let weights: Vec<Option<f64>> = problem
        .constraints
        .iter()
        .map(|c| (c.sense != Sense::Eq).then_some(c.margin_weight))
        .collect();
    let mut verdict = None;
    let outcome = form.solve(&params, |pr, it| {
        if !stop_early {
            return false;
        }
        let s = it.xs[u] + s_lb;
        if pr.rel_p <= settings.tol && s > 0.0 {
            let certified = weights.iter().zip(pr.r_p).all(|(w, r)| match w {
                Some(w) if *w > 0.0 => r.abs() < w * s,
                Some(_) => r.abs() <= settings.tol * (1.0 + s),
                None => true,
            });
            if certified {
                verdict = Some((SdpStatus::Optimal, s));
                return true;
            }
        }
        let upper = s_lb - pr.dobj;
        if pr.rel_d <= settings.tol && pr.rel_gap < 1.0 && upper < -settings.feas_tol {
            verdict = Some((SdpStatus::Infeasible, upper));
            return true;
        }
        false
    });
    let s = outcome.it.xs[u] + s_lb;
    let (status, objective) = match (outcome.exit, verdict) {
        (Exit::Early, Some(v)) => v,
        (Exit::Converged, _) => {
            if s < -settings.feas_tol {
                (SdpStatus::Infeasible, s)
            } else {
                (SdpStatus::Optimal, s)
            }
        }
        _ => (SdpStatus::Inaccurate, s),
    };
    log::debug!(
        "margin solve n={} status {:?} margin {:.3e} iters {}",
        problem.n,
        status,
        objective,
        outcome.iterations
    );
    SdpSolution {
        x: to_nalgebra(&outcome.it.x),
        status,
        objective,
        tolerance: outcome.merit,
        iterations: outcome.iterations,
    }
}

fn margin_vars(slack: usize, u: usize, sign: f64, weight: f64) -> Vec<(usize, f64)> {
    if weight > 0.0 {
        vec![(slack, sign), (u, sign * weight)]
    } else {
        vec![(slack, sign)]
    }
}

fn optimize(
    problem: &TraceLpSdp,
    settings: &SolverSettings,
    bound: f64,
    c: &DMatrix<Complex64>,
    sign: f64,
) -> Result<SdpSolution, SdpError> {
    let phase1 = margin_solve(problem, settings, bound, true);
    if phase1.status == SdpStatus::Infeasible {
        return Ok(SdpSolution {
            objective: f64::NAN,
            ..phase1
        });
    }
    let mut rows = Vec::new();
    let mut n_slack = 0;
    for con in &problem.constraints {
        let op = row_op(&con.matrix);
        let vars = match con.sense {
            Sense::Ge => {
                n_slack += 1;
                vec![(n_slack - 1, -1.0)]
            }
            Sense::Le => {
                n_slack += 1;
                vec![(n_slack - 1, 1.0)]
            }
            Sense::Eq => Vec::new(),
        };
        rows.push(Row { op, vars, rhs: con.rhs });
    }
    rows.extend(diag_rows(problem));
    let mut cm = to_faer(c);
    for j in 0..cm.ncols() {
        for i in 0..cm.nrows() {
            cm[(i, j)] *= sign;
        }
    }
    let form = StdForm {
        n: problem.n,
        rows,
        c_mat: Some(cm),
        c_vec: vec![0.0; n_slack],
    };
    let params = Params {
        tol: settings.tol,
        max_iter: settings.max_iter,
        step_fraction: settings.step_fraction,
    };
    let outcome = form.solve(&params, |_, _| false);
    let status = if outcome.exit == Exit::Converged {
        SdpStatus::Optimal
    } else {
        SdpStatus::Inaccurate
    };
    Ok(SdpSolution {
        x: to_nalgebra(&outcome.it.x),
        status,
        objective: sign * 0.5 * (outcome.pobj + outcome.dobj),
        tolerance: outcome.merit,
        iterations: outcome.iterations,
    })
}
