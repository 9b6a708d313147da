//! Infeasible-start primal-dual interior-point method (HKM direction,
//! Mehrotra predictor-corrector) for
//!
//! ```text
//! min  <C, X> + c^T x   s.t.  Re Tr(A_i X) + (B x)_i = b_i,  X ⪰ 0,  x ≥ 0
//! ```
//!
//! over complex Hermitian `X` and a non-negative scalar block `x`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{c64, Mat, MatRef, Scale, Side};

pub(crate) enum RowOp {
    /// Scalar-only row.
    Empty,
    /// `E_ll`.
    Diag(usize),
    Dense(Mat<c64>),
    LowRank {
        v: Mat<c64>,
        q: Mat<c64>,
        dense: Mat<c64>,
    },
}

impl RowOp {
    fn dot(&self, m: MatRef<'_, c64>) -> f64 {
        match self {
            RowOp::Empty => 0.0,
            RowOp::Diag(l) => m[(*l, *l)].re,
            RowOp::Dense(a) => re_trace_product(a.as_ref(), m),
            RowOp::LowRank { v, q, .. } => {
                let core = v.adjoint() * m * v.as_ref();
                re_trace_product(q.as_ref(), core.as_ref())
            }
        }
    }

    fn add_scaled(&self, y: f64, out: &mut Mat<c64>) {
        match self {
            RowOp::Empty => {}
            RowOp::Diag(l) => out[(*l, *l)].re += y,
            RowOp::Dense(a) | RowOp::LowRank { dense: a, .. } => {
                let n = out.nrows();
                for j in 0..n {
                    for i in 0..n {
                        out[(i, j)] += a[(i, j)] * y;
                    }
                }
            }
        }
    }

    /// `X A S^{-1}`.
    fn sandwich(&self, x: &Mat<c64>, sinv: &Mat<c64>) -> Option<Mat<c64>> {
        match self {
            RowOp::Empty | RowOp::Diag(_) => None,
            RowOp::Dense(a) => Some(x * a * sinv),
            RowOp::LowRank { v, q, .. } => {
                let xv = x * v;
                let sv = sinv * v;
                Some(&xv * q * sv.adjoint())
            }
        }
    }

    fn fro_norm(&self) -> f64 {
        match self {
            RowOp::Empty => 0.0,
            RowOp::Diag(_) => 1.0,
            RowOp::Dense(a) | RowOp::LowRank { dense: a, .. } => a.norm_l2(),
        }
    }
}

pub(crate) struct Row {
    pub op: RowOp,
    pub vars: Vec<(usize, f64)>,
    pub rhs: f64,
}

pub(crate) struct StdForm {
    pub n: usize,
    pub rows: Vec<Row>,
    pub c_mat: Option<Mat<c64>>,
    pub c_vec: Vec<f64>,
}

#[derive(Clone)]
pub(crate) struct Iterate {
    pub x: Mat<c64>,
    pub s: Mat<c64>,
    pub y: Vec<f64>,
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
}

pub(crate) struct Progress<'a> {
    pub rel_p: f64,
    pub rel_d: f64,
    pub rel_gap: f64,
    pub dobj: f64,
    pub r_p: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Exit {
    Converged,
    Early,
    MaxIter,
    Stalled,
}

pub(crate) struct Outcome {
    pub it: Iterate,
    pub exit: Exit,
    pub iterations: usize,
    pub merit: f64,
    pub pobj: f64,
    pub dobj: f64,
}

pub(crate) struct Params {
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

struct Direction {
    dx_mat: Mat<c64>,
    ds_mat: Mat<c64>,
    dy: Vec<f64>,
    dx: Vec<f64>,
    dz: Vec<f64>,
}

pub(crate) fn re_trace_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let u = a[(i, j)];
            let w = b[(j, i)];
            acc += u.re * w.re - u.im * w.im;
        }
    }
    acc
}

pub(crate) fn hermitian_part(m: &mut Mat<c64>) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Largest `alpha` with `L L^H + alpha D ⪰ 0`, given the Cholesky factor `L`.
fn max_psd_step(l: MatRef<'_, c64>, d: &Mat<c64>) -> f64 {
    let mut y = d.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, y.as_mut(), faer::Par::Seq);
    let mut t = y.adjoint().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, t.as_mut(), faer::Par::Seq);
    hermitian_part(&mut t);
    match t.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => {
            let lam = ev.first().copied().unwrap_or(0.0);
            if lam < 0.0 {
                -1.0 / lam
            } else {
                f64::INFINITY
            }
        }
        Err(_) => 0.0,
    }
}

fn max_ray_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (&x, &dx) in v.iter().zip(dv) {
        if dx < 0.0 {
            a = a.min(-x / dx);
        }
    }
    a
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl StdForm {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn p(&self) -> usize {
        self.c_vec.len()
    }

    fn adjoint_op(&self, y: &[f64]) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(self.n, self.n);
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi != 0.0 {
                row.op.add_scaled(yi, &mut out);
            }
        }
        out
    }

    fn bt(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        for (row, &yi) in self.rows.iter().zip(y) {
            for &(k, c) in &row.vars {
                out[k] += c * yi;
            }
        }
        out
    }

    fn initial_point(&self) -> Iterate {
        let n = self.n as f64;
        let mut xi: f64 = 10.0_f64.max(n.sqrt());
        let mut eta: f64 = 10.0_f64.max(n.sqrt());
        for row in &self.rows {
            let f = row.op.fro_norm() + row.vars.iter().map(|v| v.1 * v.1).sum::<f64>().sqrt();
            xi = xi.max(n.sqrt() * (1.0 + row.rhs.abs()) / (1.0 + f));
            eta = eta.max(f);
        }
        if let Some(c) = &self.c_mat {
            eta = eta.max(c.norm_l2());
        }
        eta = eta.max(norm2(&self.c_vec));
        let mut x = Mat::<c64>::zeros(self.n, self.n);
        let mut s = Mat::<c64>::zeros(self.n, self.n);
        for i in 0..self.n {
            x[(i, i)] = c64::new(xi, 0.0);
            s[(i, i)] = c64::new(eta, 0.0);
        }
        Iterate {
            x,
            s,
            y: vec![0.0; self.m()],
            xs: vec![xi; self.p()],
            zs: vec![eta; self.p()],
        }
    }

    fn schur(&self, it: &Iterate, sinv: &Mat<c64>) -> Mat<f64> {
        let m = self.m();
        let mut mm = Mat::<f64>::zeros(m, m);
        let diag: Vec<(usize, usize)> = self
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| match r.op {
                RowOp::Diag(l) => Some((i, l)),
                _ => None,
            })
            .collect();
        for &(i, l) in &diag {
            for &(j, k) in &diag {
                mm[(i, j)] = (it.x[(l, k)] * sinv[(k, l)]).re;
            }
        }
        for (j, row) in self.rows.iter().enumerate() {
            if let Some(pj) = row.op.sandwich(&it.x, sinv) {
                for (i, other) in self.rows.iter().enumerate() {
                    let v = other.op.dot(pj.as_ref());
                    mm[(i, j)] = v;
                    mm[(j, i)] = v;
                }
            }
        }
        let mut var_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.p()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, c) in &row.vars {
                var_rows[k].push((i, c));
            }
        }
        for (k, list) in var_rows.iter().enumerate() {
            let d = it.xs[k] / it.zs[k];
            for &(i, ci) in list {
                for &(j, cj) in list {
                    mm[(i, j)] += ci * cj * d;
                }
            }
        }
        mm
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        sinv: &Mat<c64>,
        chol_m: &faer::linalg::solvers::Llt<f64>,
        r_p: &[f64],
        r_d_mat: &Mat<c64>,
        x_rd_sinv: &Mat<c64>,
        r_d: &[f64],
        g_mat: &Mat<c64>,
        g: &[f64],
    ) -> Direction {
        let h = g_mat - x_rd_sinv;
        let d: Vec<f64> = it.xs.iter().zip(&it.zs).map(|(x, z)| x / z).collect();
        let mut rhs = Mat::<f64>::zeros(self.m(), 1);
        for (i, row) in self.rows.iter().enumerate() {
            let mut v = r_p[i] - row.op.dot(h.as_ref());
            for &(k, c) in &row.vars {
                v -= c * (g[k] - d[k] * r_d[k]);
            }
            rhs[(i, 0)] = v;
        }
        let sol = chol_m.solve(rhs.as_ref());
        let dy: Vec<f64> = (0..self.m()).map(|i| sol[(i, 0)]).collect();
        let ds_mat = r_d_mat - self.adjoint_op(&dy);
        let mut dx_mat = g_mat - &it.x * &ds_mat * sinv;
        hermitian_part(&mut dx_mat);
        let btdy = self.bt(&dy);
        let dz: Vec<f64> = r_d.iter().zip(&btdy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = (0..self.p()).map(|k| g[k] - d[k] * dz[k]).collect();
        Direction {
            dx_mat,
            ds_mat,
            dy,
            dx,
            dz,
        }
    }

    pub(crate) fn solve(
        &self,
        params: &Params,
        mut early: impl FnMut(&Progress<'_>, &Iterate) -> bool,
    ) -> Outcome {
        let n = self.n;
        let m = self.m();
        let p = self.p();
        let b: Vec<f64> = self.rows.iter().map(|r| r.rhs).collect();
        let b_norm = norm2(&b);
        let c_norm = self.c_mat.as_ref().map_or(0.0, |c| c.norm_l2()) + norm2(&self.c_vec);
        let mut it = self.initial_point();
        let mut best: Option<(f64, Iterate, f64, f64)> = None;
        let mut stalls = 0;
        for iter in 0..=params.max_iter {
            let mut r_p = b.clone();
            for (i, row) in self.rows.iter().enumerate() {
                r_p[i] -= row.op.dot(it.x.as_ref());
                for &(k, c) in &row.vars {
                    r_p[i] -= c * it.xs[k];
                }
            }
            let mut r_d_mat = match &self.c_mat {
                Some(c) => c - &it.s,
                None => -&it.s,
            };
            r_d_mat -= self.adjoint_op(&it.y);
            let bty = self.bt(&it.y);
            let r_d: Vec<f64> = (0..p).map(|k| self.c_vec[k] - bty[k] - it.zs[k]).collect();
            let pobj = self.c_mat.as_ref().map_or(0.0, |c| re_trace_product(c.as_ref(), it.x.as_ref()))
                + self.c_vec.iter().zip(&it.xs).map(|(a, b)| a * b).sum::<f64>();
            let dobj: f64 = b.iter().zip(&it.y).map(|(a, b)| a * b).sum();
            let rel_p = norm2(&r_p) / (1.0 + b_norm);
            let rel_d = (r_d_mat.norm_l2() + norm2(&r_d)) / (1.0 + c_norm);
            let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let merit = rel_p.max(rel_d).max(rel_gap);
            log::trace!("ipm iter {iter}: p {rel_p:.2e} d {rel_d:.2e} gap {rel_gap:.2e} pobj {pobj:.6e}");
            if best.as_ref().is_none_or(|bst| merit < bst.0) {
                best = Some((merit, it.clone(), pobj, dobj));
            }
            let finish = |exit: Exit, it: Iterate| Outcome {
                it,
                exit,
                iterations: iter,
                merit,
                pobj,
                dobj,
            };
            if merit <= params.tol {
                return finish(Exit::Converged, it);
            }
            let progress = Progress {
                rel_p,
                rel_d,
                rel_gap,
                dobj,
                r_p: &r_p,
            };
            if early(&progress, &it) {
                return finish(Exit::Early, it);
            }
            if iter == params.max_iter || stalls >= 3 {
                break;
            }

            let mu = (re_trace_product(it.x.as_ref(), it.s.as_ref())
                + it.xs.iter().zip(&it.zs).map(|(a, b)| a * b).sum::<f64>())
                / (n + p) as f64;
            let (Ok(llt_s), Ok(llt_x)) = (it.s.llt(Side::Lower), it.x.llt(Side::Lower)) else {
                stalls = usize::MAX;
                break;
            };
            let mut sinv = llt_s.inverse();
            hermitian_part(&mut sinv);
            let mut mm = self.schur(&it, &sinv);
            let scale = (0..m).map(|i| mm[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
            let mut chol_m = None;
            let mut reg = 0.0;
            for _ in 0..6 {
                if let Ok(c) = mm.llt(Side::Lower) {
                    chol_m = Some(c);
                    break;
                }
                let add = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
                for i in 0..m {
                    mm[(i, i)] += add - reg;
                }
                reg = add;
            }
            let Some(chol_m) = chol_m else {
                stalls = usize::MAX;
                break;
            };
            let x_rd_sinv = &it.x * &r_d_mat * &sinv;

            let g_aff = -&it.x;
            let g_aff_vec: Vec<f64> = it.xs.iter().map(|x| -x).collect();
            let aff = self.direction(&it, &sinv, &chol_m, &r_p, &r_d_mat, &x_rd_sinv, &r_d, &g_aff, &g_aff_vec);
            let ap = 1.0_f64
                .min(max_psd_step(llt_x.L(), &aff.dx_mat))
                .min(max_ray_step(&it.xs, &aff.dx));
            let ad = 1.0_f64
                .min(max_psd_step(llt_s.L(), &aff.ds_mat))
                .min(max_ray_step(&it.zs, &aff.dz));
            let xa = &it.x + &aff.dx_mat * Scale(c64::new(ap, 0.0));
            let sa = &it.s + &aff.ds_mat * Scale(c64::new(ad, 0.0));
            let mut lin = 0.0;
            for k in 0..p {
                lin += (it.xs[k] + ap * aff.dx[k]) * (it.zs[k] + ad * aff.dz[k]);
            }
            let mu_aff = (re_trace_product(xa.as_ref(), sa.as_ref()) + lin) / (n + p) as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            let g_mat = &sinv * Scale(c64::new(sigma * mu, 0.0)) - &it.x - &aff.dx_mat * &aff.ds_mat * &sinv;
            let g_vec: Vec<f64> = (0..p)
                .map(|k| (sigma * mu - aff.dx[k] * aff.dz[k]) / it.zs[k] - it.xs[k])
                .collect();
            let dir = self.direction(&it, &sinv, &chol_m, &r_p, &r_d_mat, &x_rd_sinv, &r_d, &g_mat, &g_vec);
            let tau = params.step_fraction;
            let ap = 1.0_f64.min(
                tau * max_psd_step(llt_x.L(), &dir.dx_mat).min(max_ray_step(&it.xs, &dir.dx)),
            );
            let ad = 1.0_f64.min(
                tau * max_psd_step(llt_s.L(), &dir.ds_mat).min(max_ray_step(&it.zs, &dir.dz)),
            );
            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            it.x += &dir.dx_mat * Scale(c64::new(ap, 0.0));
            it.s += &dir.ds_mat * Scale(c64::new(ad, 0.0));
            hermitian_part(&mut it.x);
            hermitian_part(&mut it.s);
            for i in 0..m {
                it.y[i] += ad * dir.dy[i];
            }
            for k in 0..p {
                it.xs[k] += ap * dir.dx[k];
                it.zs[k] += ad * dir.dz[k];
            }
        }
        let (merit, it, pobj, dobj) = best.expect("at least one iterate is evaluated");
        Outcome {
            it,
            exit: if stalls > 0 { Exit::Stalled } else { Exit::MaxIter },
            iterations: params.max_iter,
            merit,
            pobj,
            dobj,
        }
    }
}
