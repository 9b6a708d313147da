use faer::Side;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::solver::to_faer;
use crate::SdpError;

/// Eigen-pairs of a Hermitian matrix sorted by descending eigenvalue.
pub fn hermitian_eigen(x: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>), SdpError> {
    let n = x.nrows();
    let eig = to_faer(x)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SdpError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let values: Vec<f64> = (0..n).rev().map(|i| s[i].re).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Factor `X = V V^H` with `V = U Λ^{1/2}`, columns in descending eigenvalue order.
///
/// Eigenvalues below `rank_tol * λ_max` are dropped and the factor is zero-padded to
/// `width` columns.
pub fn psd_factorize(x: &DMatrix<Complex64>, rank_tol: f64, width: usize) -> Result<DMatrix<Complex64>, SdpError> {
    if x.nrows() != x.ncols() {
        return Err(SdpError::InvalidProblem("matrix is not square".into()));
    }
    let n = x.nrows();
    let (values, vectors) = hermitian_eigen(x)?;
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    let lmin = values.last().copied().unwrap_or(0.0);
    if lmin < -rank_tol * lmax.max(f64::MIN_POSITIVE) && lmin < -f64::EPSILON * lmax {
        return Err(SdpError::Indefinite(lmin));
    }
    let keep = values
        .iter()
        .take_while(|&&l| l > 0.0 && l >= rank_tol * lmax)
        .count();
    if keep > width {
        return Err(SdpError::InvalidProblem(format!(
            "rank {keep} exceeds requested factor width {width}"
        )));
    }
    let mut v = DMatrix::zeros(n, width);
    for j in 0..keep {
        let r = values[j].sqrt();
        for i in 0..n {
            v[(i, j)] = vectors[(i, j)] * r;
        }
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub z: DVector<Complex64>,
    pub value: f64,
    /// True when the best candidate was the projected leading eigenvector.
    pub from_eigenvector: bool,
}

fn project_unit(v: &DVector<Complex64>) -> DVector<Complex64> {
    v.map(|c| {
        let r = c.norm();
        if r > 0.0 {
            c / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Gaussian randomization for `Z ≈ z z^H` with unit-modulus `z`.
///
/// Candidates are the phase-projected leading eigenvector of `Z` followed by
/// `num_samples` phase-projected draws from `CN(0, Z)`; the first candidate with the
/// largest objective wins.
pub fn rank_one_recover<R: Rng + ?Sized>(
    z: &DMatrix<Complex64>,
    mut objective: impl FnMut(&DVector<Complex64>) -> f64,
    num_samples: usize,
    rng: &mut R,
) -> Result<Recovery, SdpError> {
    let n = z.nrows();
    let (values, vectors) = hermitian_eigen(z)?;
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    let lead = project_unit(&vectors.column(0).into_owned());
    let mut best = Recovery {
        value: objective(&lead),
        z: lead,
        from_eigenvector: true,
    };
    let rank = values.iter().take_while(|&&l| l > 1e-12 * lmax && l > 0.0).count();
    let factor = DMatrix::from_fn(n, rank, |i, j| vectors[(i, j)] * values[j].sqrt());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..num_samples {
        let u = DVector::from_fn(rank, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * h, im * h)
        });
        let cand = project_unit(&(&factor * u));
        let val = objective(&cand);
        if val > best.value {
            best = Recovery {
                z: cand,
                value: val,
                from_eigenvector: false,
            };
        }
    }
    Ok(best)
}
