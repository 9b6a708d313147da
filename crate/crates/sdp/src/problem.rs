//! Problem and solution types for trace-linear SDPs over the Hermitian PSD cone.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::SdpError;

/// Hermitian coefficient matrix of a trace-linear constraint `Re Tr(A X)`.
#[derive(Debug, Clone)]
pub enum ConstraintMatrix {
    Dense(DMatrix<Complex64>),
    /// `A = V Q V^H` with `V` of shape `n x r` and Hermitian `Q` of shape `r x r`.
    LowRank {
        v: DMatrix<Complex64>,
        q: DMatrix<Complex64>,
    },
}

impl ConstraintMatrix {
    pub fn dim(&self) -> usize {
        match self {
            ConstraintMatrix::Dense(a) => a.nrows(),
            ConstraintMatrix::LowRank { v, .. } => v.nrows(),
        }
    }

    /// Dense `n x n` form.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match self {
            ConstraintMatrix::Dense(a) => a.clone(),
            ConstraintMatrix::LowRank { v, q } => v * q * v.adjoint(),
        }
    }

    /// `Re Tr(A X)`.
    pub fn apply(&self, x: &DMatrix<Complex64>) -> f64 {
        match self {
            ConstraintMatrix::Dense(a) => {
                let mut acc = 0.0;
                for j in 0..a.ncols() {
                    for i in 0..a.nrows() {
                        acc += (a[(i, j)] * x[(j, i)]).re;
                    }
                }
                acc
            }
            ConstraintMatrix::LowRank { v, q } => {
                let core = v.adjoint() * x * v;
                let mut acc = 0.0;
                for j in 0..q.ncols() {
                    for i in 0..q.nrows() {
                        acc += (q[(i, j)] * core[(j, i)]).re;
                    }
                }
                acc
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub matrix: ConstraintMatrix,
    pub sense: Sense,
    pub rhs: f64,
    /// Weight of the common margin in this row under `Feasibility`/`MaxMargin`;
    /// zero keeps the row exact.
    pub margin_weight: f64,
}

impl Constraint {
    pub fn new(matrix: ConstraintMatrix, sense: Sense, rhs: f64) -> Self {
        Self {
            matrix,
            sense,
            rhs,
            margin_weight: 1.0,
        }
    }

    /// Signed slack at `x`: non-negative iff satisfied (for `Eq`, minus the absolute residual).
    pub fn slack(&self, x: &DMatrix<Complex64>) -> f64 {
        let v = self.matrix.apply(x);
        match self.sense {
            Sense::Le => self.rhs - v,
            Sense::Ge => v - self.rhs,
            Sense::Eq => -(v - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    /// Find any point satisfying every constraint.
    Feasibility,
    /// Maximize the common margin `s` by which every inequality holds:
    /// `Tr(A X) >= b + w s` for `Ge` rows and `Tr(A X) <= b - w s` for `Le` rows,
    /// with `w` the row's margin weight.
    MaxMargin,
    Maximize(DMatrix<Complex64>),
    Minimize(DMatrix<Complex64>),
}

/// `X` is `n x n` Hermitian PSD; `unit_diagonal` adds `X_ll = 1` for every `l`.
///
/// The feasible set must be bounded: either `unit_diagonal` is set or some `Le`
/// row has a positive definite matrix.
#[derive(Debug, Clone)]
pub struct TraceLpSdp {
    pub n: usize,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    pub unit_diagonal: bool,
}

impl TraceLpSdp {
    pub fn new(n: usize, objective: Objective) -> Self {
        Self {
            n,
            objective,
            constraints: Vec::new(),
            unit_diagonal: false,
        }
    }

    pub fn with_unit_diagonal(mut self) -> Self {
        self.unit_diagonal = true;
        self
    }

    pub fn push(&mut self, matrix: ConstraintMatrix, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint::new(matrix, sense, rhs));
    }

    /// Adds a row that the margin never relaxes.
    pub fn push_hard(&mut self, matrix: ConstraintMatrix, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint {
            margin_weight: 0.0,
            ..Constraint::new(matrix, sense, rhs)
        });
    }

    /// Largest constraint violation of `x`, including the unit diagonal.
    pub fn max_violation(&self, x: &DMatrix<Complex64>) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(-c.slack(x));
        }
        if self.unit_diagonal {
            for l in 0..self.n {
                worst = worst.max((x[(l, l)].re - 1.0).abs());
            }
        }
        worst
    }

    pub(crate) fn validate(&self) -> Result<(), SdpError> {
        if self.n == 0 {
            return Err(SdpError::InvalidProblem("dimension must be positive".into()));
        }
        if self.n > crate::MAX_DIMENSION {
            return Err(SdpError::TooLarge(self.n));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !(c.margin_weight >= 0.0) || !c.margin_weight.is_finite() {
                return Err(SdpError::InvalidProblem(format!("constraint {i}: bad margin weight")));
            }
            if !c.rhs.is_finite() {
                return Err(SdpError::InvalidProblem(format!("constraint {i}: non-finite rhs")));
            }
            match &c.matrix {
                ConstraintMatrix::Dense(a) => {
                    if a.nrows() != self.n || a.ncols() != self.n {
                        return Err(SdpError::InvalidProblem(format!(
                            "constraint {i}: expected {n}x{n} matrix",
                            n = self.n
                        )));
                    }
                    check_hermitian(a, &format!("constraint {i}"))?;
                }
                ConstraintMatrix::LowRank { v, q } => {
                    if v.nrows() != self.n || q.nrows() != v.ncols() || q.ncols() != v.ncols() {
                        return Err(SdpError::InvalidProblem(format!(
                            "constraint {i}: low-rank factor shapes do not match"
                        )));
                    }
                    check_hermitian(q, &format!("constraint {i} core"))?;
                }
            }
        }
        match &self.objective {
            Objective::Maximize(c) | Objective::Minimize(c) => {
                if c.nrows() != self.n || c.ncols() != self.n {
                    return Err(SdpError::InvalidProblem("objective matrix has wrong shape".into()));
                }
                check_hermitian(c, "objective")?;
            }
            Objective::Feasibility | Objective::MaxMargin => {}
        }
        Ok(())
    }
}

fn check_hermitian(a: &DMatrix<Complex64>, what: &str) -> Result<(), SdpError> {
    let scale = a.iter().map(|v| v.norm()).fold(0.0_f64, f64::max).max(1e-300);
    for j in 0..a.ncols() {
        for i in 0..=j {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            if d > 1e-10 * scale || !a[(i, j)].re.is_finite() || !a[(i, j)].im.is_finite() {
                return Err(SdpError::InvalidProblem(format!("{what} is not Hermitian")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: DMatrix<Complex64>,
    pub status: SdpStatus,
    /// Objective value; the margin `s` for `Feasibility` and `MaxMargin`.
    pub objective: f64,
    /// Largest of the relative primal residual, dual residual and gap at exit.
    pub tolerance: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Margin below which a `Feasibility`/`MaxMargin` problem is declared infeasible.
    pub feas_tol: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100,
            feas_tol: 1e-7,
            step_fraction: 0.98,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}
