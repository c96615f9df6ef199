//! Gaussian beliefs and the unscented-transform measurement update for scalar
//! measurements with additive Gaussian noise.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalue floor applied to every covariance produced by an update.
pub const COV_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let m = mean.len();
        if cov.nrows() != m || cov.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: cov.nrows(),
            });
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * cov.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric"));
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or(Error::NotPositiveDefinite("Cholesky factorization failed"))?
            .l();
        Ok(Self { mean, cov, chol })
    }

    /// Symmetrizes and eigenvalue-floors `cov` before construction.
    pub fn new_floored(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let cov = symmetrize_and_floor(cov, COV_FLOOR);
        Self::new(mean, cov)
    }

    pub fn isotropic(mean: DVector<f64>, var: f64) -> Result<Self> {
        let m = mean.len();
        Self::new(mean, DMatrix::identity(m, m) * var)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L Lᵀ = cov`.
    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol * n
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let m = self.dim();
        let d = x - &self.mean;
        let y = self
            .chol
            .solve_lower_triangular(&d)
            .expect("Cholesky factor has a positive diagonal");
        let log_det: f64 = self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (m as f64 * (2.0 * PI).ln() + log_det + y.norm_squared())
    }

    /// Inverse covariance through the Cholesky factor.
    pub fn precision(&self) -> DMatrix<f64> {
        let l_inv = self
            .chol
            .clone()
            .solve_lower_triangular(&DMatrix::identity(self.dim(), self.dim()))
            .expect("Cholesky factor has a positive diagonal");
        let p = l_inv.transpose() * l_inv;
        (&p + p.transpose()) * 0.5
    }
}

/// `(C + Cᵀ)/2` with eigenvalues raised to at least `floor`.
pub fn symmetrize_and_floor(cov: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Sigma-point spread parameter of the basic unscented transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtParams {
    pub kappa: f64,
}

impl UtParams {
    /// The classic choice `κ = 3 − M`.
    pub fn classic(dim: usize) -> Self {
        Self {
            kappa: 3.0 - dim as f64,
        }
    }

    pub fn check(&self, dim: usize) -> Result<f64> {
        let lambda = dim as f64 + self.kappa;
        if lambda > 0.0 {
            Ok(lambda)
        } else {
            Err(Error::InvalidConfig(format!(
                "UT spread requires M + κ > 0, got M = {dim}, κ = {}",
                self.kappa
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPointSet {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl SigmaPointSet {
    pub fn mean(&self) -> DVector<f64> {
        let m = self.points[0].len();
        self.points
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(m), |acc, (p, &w)| acc + p * w)
    }

    pub fn scatter(&self, center: &DVector<f64>) -> DMatrix<f64> {
        let m = center.len();
        self.points
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(m, m), |acc, (p, &w)| {
                let d = p - center;
                acc + &d * d.transpose() * w
            })
    }
}

/// `2M + 1` points: the mean, then `mean ± column i of √((M+κ)·C)` for each `i`.
pub fn sigma_points(b: &GaussianBelief, p: UtParams) -> Result<SigmaPointSet> {
    let m = b.dim();
    let lambda = p.check(m)?;
    let root = b.chol_factor() * lambda.sqrt();
    let mut points = Vec::with_capacity(2 * m + 1);
    let mut weights = Vec::with_capacity(2 * m + 1);
    points.push(b.mean().clone());
    weights.push(p.kappa / lambda);
    for i in 0..m {
        let col = root.column(i);
        points.push(b.mean() + col);
        points.push(b.mean() - col);
        weights.push(0.5 / lambda);
        weights.push(0.5 / lambda);
    }
    Ok(SigmaPointSet { points, weights })
}

/// Unscented update of `prior` with scalar measurement `z = h(x) + v`, `v ~ N(0, noise_var)`.
pub fn unscented_update<H>(prior: &GaussianBelief, z: f64, h: H, noise_var: f64, p: UtParams) -> Result<GaussianBelief>
where
    H: Fn(&DVector<f64>) -> f64,
{
    let sp = sigma_points(prior, p)?;
    update_with_sigma_points(prior, &sp, z, h, noise_var)
}

pub(crate) fn update_with_sigma_points<H>(
    prior: &GaussianBelief,
    sp: &SigmaPointSet,
    z: f64,
    h: H,
    noise_var: f64,
) -> Result<GaussianBelief>
where
    H: Fn(&DVector<f64>) -> f64,
{
    let m = prior.dim();
    let predicted: Vec<f64> = sp.points.iter().map(&h).collect();
    let z_hat: f64 = predicted.iter().zip(&sp.weights).map(|(y, w)| w * y).sum();
    let mut s = noise_var;
    let mut cxz = DVector::zeros(m);
    for ((pt, &y), &w) in sp.points.iter().zip(&predicted).zip(&sp.weights) {
        let dy = y - z_hat;
        s += w * dy * dy;
        cxz += (pt - prior.mean()) * (w * dy);
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveInnovation(s));
    }
    let gain = &cxz / s;
    let mean = prior.mean() + &gain * (z - z_hat);
    let cov = prior.cov() - &gain * gain.transpose() * s;
    GaussianBelief::new_floored(mean, cov)
}
