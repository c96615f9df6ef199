//! Multivariate monomial basis used to expand local log-likelihoods.
//!
//! Monomials are evaluated in whitened coordinates `y = L⁻¹(x − c)`. The map
//! must be the same at every sensor for expansion coefficients to be summable,
//! so it is built either from the consensus-fused proposal density or from a
//! fixed affine map of the deployment region onto `[−1, 1]²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussfilter::GaussianBelief;
use crate::network::Region;

/// All multi-indices of `dim` variables with total degree at most `degree`,
/// in graded lexicographic order: by total degree, then with larger leading
/// exponents first. The constant index comes first.
pub fn enumerate_exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn compositions(total: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(total - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }

    assert!(dim >= 1, "basis needs at least one variable");
    let mut out = Vec::new();
    for d in 0..=degree {
        compositions(d, dim, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Affine map `y = L⁻¹(x − c)` with lower-triangular `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    center: DVector<f64>,
    factor: DMatrix<f64>,
}

impl Whitening {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: DVector::zeros(dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    /// Center at the belief mean, scale by its Cholesky factor.
    pub fn from_belief(belief: &GaussianBelief) -> Self {
        Self {
            center: belief.mean().clone(),
            factor: belief.chol_factor().clone(),
        }
    }

    /// Like [`Whitening::from_belief`], but factorizes a raw covariance.
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let b = GaussianBelief::new(mean, cov)?;
        Ok(Self::from_belief(&b))
    }

    /// Maps the region rectangle onto `[−1, 1]²`.
    pub fn from_region(region: Region) -> Self {
        Self {
            center: DVector::from_vec(vec![region.width / 2.0, region.height / 2.0]),
            factor: DMatrix::from_diagonal(&DVector::from_vec(vec![region.width / 2.0, region.height / 2.0])),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor
            .solve_lower_triangular(&(x - &self.center))
            .expect("whitening factor is invertible")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    degree: u32,
    exponents: Vec<Vec<u32>>,
    whitening: Whitening,
}

impl MonomialBasis {
    pub fn new(degree: u32, whitening: Whitening) -> Self {
        let exponents = enumerate_exponents(whitening.dim(), degree);
        Self {
            degree,
            exponents,
            whitening,
        }
    }

    pub fn dim(&self) -> usize {
        self.whitening.dim()
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of basis functions, constant included.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn whitening(&self) -> &Whitening {
        &self.whitening
    }

    /// Basis values at an already-whitened point.
    pub fn eval_whitened(&self, y: &DVector<f64>) -> DVector<f64> {
        let deg = self.degree as usize;
        // powers[i][p] = y_i^p
        let powers: Vec<Vec<f64>> = y
            .iter()
            .map(|&yi| {
                let mut p = Vec::with_capacity(deg + 1);
                let mut acc = 1.0;
                for _ in 0..=deg {
                    p.push(acc);
                    acc *= yi;
                }
                p
            })
            .collect();
        DVector::from_iterator(
            self.exponents.len(),
            self.exponents
                .iter()
                .map(|e| e.iter().zip(&powers).map(|(&p, pw)| pw[p as usize]).product::<f64>()),
        )
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval_whitened(&self.whitening.apply(x))
    }

    /// Design matrix with one row per point.
    pub fn design_matrix(&self, points: &[DVector<f64>]) -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(points.len(), self.len());
        for (j, x) in points.iter().enumerate() {
            phi.row_mut(j).copy_from(&self.eval(x).transpose());
        }
        phi
    }
}

/// Expansion coefficients aligned with a [`MonomialBasis`] ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector(pub DVector<f64>);

impl CoefficientVector {
    pub fn zeros(len: usize) -> Self {
        Self(DVector::zeros(len))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsFit {
    pub coefficients: CoefficientVector,
    /// Numerical rank of the design matrix.
    pub rank: usize,
    pub rank_deficient: bool,
    pub residual_norm: f64,
}

/// Relative pivot threshold for numerical rank.
const RANK_TOL: f64 = 1e-12;

/// Least-squares coefficients of `targets` over the basis at `points`.
///
/// Rank is detected from a column-pivoted QR factorization. Full-rank systems
/// are solved from that factorization; rank-deficient ones fall back to the
/// minimum-norm SVD solution and set `rank_deficient`.
pub fn fit_least_squares(basis: &MonomialBasis, points: &[DVector<f64>], targets: &[f64]) -> Result<LsFit> {
    if points.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: targets.len(),
        });
    }
    let phi = basis.design_matrix(points);
    let t = DVector::from_column_slice(targets);
    solve_least_squares(phi, &t)
}

/// Householder QR with column-norm pivoting applied to `[A | b]` in place.
///
/// On return the upper triangle of `a` holds `R`, `b` holds `Qᵀb`, and
/// `perm[i]` is the original column sitting at position `i`.
fn pivoted_qr_in_place(a: &mut DMatrix<f64>, b: &mut DVector<f64>) -> Vec<usize> {
    let (rows, cols) = a.shape();
    let mut perm: Vec<usize> = (0..cols).collect();
    for k in 0..rows.min(cols) {
        let (best, _) = (k..cols)
            .map(|j| (j, a.column(j).rows(k, rows - k).norm_squared()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best != k {
            a.swap_columns(k, best);
            perm.swap(k, best);
        }

        let mut v = a.column(k).rows(k, rows - k).into_owned();
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        v[0] += if v[0] > 0.0 { norm } else { -norm };
        let vnorm_sq = v.norm_squared();
        for j in k..cols {
            let mut col = a.column_mut(j);
            let mut col = col.rows_mut(k, rows - k);
            let s = 2.0 * v.dot(&col) / vnorm_sq;
            col.axpy(-s, &v, 1.0);
        }
        let mut tail = b.rows_mut(k, rows - k);
        let s = 2.0 * v.dot(&tail) / vnorm_sq;
        tail.axpy(-s, &v, 1.0);
    }
    perm
}

pub(crate) fn solve_least_squares(phi: DMatrix<f64>, t: &DVector<f64>) -> Result<LsFit> {
    let (rows, cols) = phi.shape();
    let mut r = phi.clone();
    let mut qtb = t.clone();
    let perm = pivoted_qr_in_place(&mut r, &mut qtb);

    let lead = if cols > 0 && rows > 0 { r[(0, 0)].abs() } else { 0.0 };
    let tol = RANK_TOL * lead * rows.max(cols) as f64;
    let rank = (0..rows.min(cols)).take_while(|&i| r[(i, i)].abs() > tol).count();

    let alpha = if rank == cols {
        let mut x = DVector::zeros(cols);
        for i in (0..cols).rev() {
            let mut acc = qtb[i];
            for j in (i + 1)..cols {
                acc -= r[(i, j)] * x[j];
            }
            x[i] = acc / r[(i, i)];
        }
        let mut sol = DVector::zeros(cols);
        for (pos, &orig) in perm.iter().enumerate() {
            sol[orig] = x[pos];
        }
        sol
    } else {
        let svd = phi.clone().svd(true, true);
        let eps = svd.singular_values.max() * RANK_TOL * rows.max(cols) as f64;
        svd.solve(t, eps)
            .map_err(|_| Error::NotPositiveDefinite("SVD solve failed"))?
    };

    let residual_norm = (&phi * &alpha - t).norm();
    Ok(LsFit {
        coefficients: CoefficientVector(alpha),
        rank,
        rank_deficient: rank < cols,
        residual_norm,
    })
}
