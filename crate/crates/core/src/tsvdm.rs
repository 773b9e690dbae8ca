//! The t-SVDM and the inner-problem solvers built on facewise SVDs in the
//! transform domain.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{complete_basis, Matrix, ThinSvd};
use crate::tensor::{map_slices, starm_product, starm_transpose, Dims, Tensor3, Transform};

/// Relative threshold (against the largest transform-domain singular value)
/// below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Economic SVD of every frontal slice of `a_hat`.
pub fn facewise_svd(a_hat: &Tensor3) -> Vec<ThinSvd> {
    (0..a_hat.n3()).map(|k| ThinSvd::new(&a_hat.slice(k))).collect()
}

fn largest_singular_value(svds: &[ThinSvd]) -> f64 {
    svds.iter().filter_map(|s| s.s.iter().next().copied()).fold(0.0, f64::max)
}

/// Singular values of each transform-domain slice, nonincreasing.
pub fn transform_singular_values(a: &Tensor3, m: &Transform) -> Result<Vec<DVector<f64>>> {
    let a_hat = m.forward(a)?;
    Ok((0..a.n3()).map(|k| crate::linalg::singular_values(&a_hat.slice(k))).collect())
}

pub fn check_truncation(k: usize, dims: Dims) -> Result<()> {
    let max = dims.0.min(dims.1);
    if k == 0 || k > max {
        Err(Error::RankOutOfRange { k, max })
    } else {
        Ok(())
    }
}

/// `A = U ⋆_M S ⋆_M Vᵀ` with ⋆_M-orthogonal `U` (n1×n1×n3), `V` (n2×n2×n3)
/// and f-diagonal `S` whose tubes are ordered by Frobenius norm.
#[derive(Clone, Debug)]
pub struct TsvdmFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub transform: Transform,
}

impl TsvdmFactors {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        let us = starm_product(&self.u, &self.s, &self.transform)?;
        starm_product(&us, &starm_transpose(&self.v), &self.transform)
    }

    /// `‖S[i, i, :]‖_F` for `i < min(n1, n2)`.
    pub fn singular_tube_norms(&self) -> Vec<f64> {
        let r = self.s.n1().min(self.s.n2());
        (0..r).map(|i| (0..self.s.n3()).map(|k| self.s.get(i, i, k).powi(2)).sum::<f64>().sqrt()).collect()
    }

    pub fn truncate(&self, k: usize) -> Result<TruncatedTsvdm> {
        check_truncation(k, self.s.dims())?;
        Ok(TruncatedTsvdm {
            u: self.u.sub_tensor(0..self.u.n1(), 0..k),
            s: self.s.sub_tensor(0..k, 0..k),
            v: self.v.sub_tensor(0..self.v.n1(), 0..k),
            transform: self.transform.clone(),
        })
    }
}

/// Leading `k` singular tubes: `U[:, :k, :]`, `S[:k, :k, :]`, `V[:, :k, :]`.
#[derive(Clone, Debug)]
pub struct TruncatedTsvdm {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub transform: Transform,
}

impl TruncatedTsvdm {
    pub fn k(&self) -> usize {
        self.s.n1()
    }

    pub fn reconstruct(&self) -> Result<Tensor3> {
        let us = starm_product(&self.u, &self.s, &self.transform)?;
        starm_product(&us, &starm_transpose(&self.v), &self.transform)
    }

    /// Projection `U_k ⋆_M U_kᵀ ⋆_M X` onto the span of the left factor.
    pub fn project(&self, x: &Tensor3) -> Result<Tensor3> {
        let coeffs = starm_product(&starm_transpose(&self.u), x, &self.transform)?;
        starm_product(&self.u, &coeffs, &self.transform)
    }
}

pub fn tsvdm(a: &Tensor3, m: &Transform) -> Result<TsvdmFactors> {
    let (n1, n2, n3) = a.dims();
    let a_hat = m.forward(a)?;
    let svds = facewise_svd(&a_hat);
    let cutoff = largest_singular_value(&svds) * 1e-14;
    let mut u_hat = Vec::with_capacity(n3);
    let mut s_hat = Vec::with_capacity(n3);
    let mut v_hat = Vec::with_capacity(n3);
    for svd in &svds {
        // Columns paired with numerically zero singular values are replaced
        // by a completed orthonormal basis; they carry no weight in S.
        let keep = svd.s.iter().take_while(|&&s| s > cutoff).count();
        u_hat.push(complete_basis(&svd.u.columns(0, keep).into_owned(), n1));
        v_hat.push(complete_basis(&svd.v.columns(0, keep).into_owned(), n2));
        let mut s = Matrix::zeros(n1, n2);
        for j in 0..keep {
            s[(j, j)] = svd.s[j];
        }
        s_hat.push(s);
    }
    Ok(TsvdmFactors {
        u: m.inverse(&Tensor3::from_slices(&u_hat)?)?,
        s: m.inverse(&Tensor3::from_slices(&s_hat)?)?,
        v: m.inverse(&Tensor3::from_slices(&v_hat)?)?,
        transform: m.clone(),
    })
}

/// Optimal t-rank-`k` approximation `A_k`, assembled slicewise in the
/// transform domain.
pub fn low_rank_approx(a: &Tensor3, m: &Transform, k: usize) -> Result<Tensor3> {
    check_truncation(k, a.dims())?;
    let a_hat = m.forward(a)?;
    let ak_hat = map_slices(&a_hat, |_, s| ThinSvd::new(&s.into_owned()).reconstruct_truncated(k))?;
    m.inverse(&ak_hat)
}

/// `Σ_i Σ_{j ≥ k} σ̂_j(Â_i)²`, which equals `‖A − A_k‖_F²`.
pub fn discarded_energy(a: &Tensor3, m: &Transform, k: usize) -> Result<f64> {
    check_truncation(k, a.dims())?;
    let svals = transform_singular_values(a, m)?;
    Ok(svals.iter().map(|s| s.iter().skip(k).map(|v| v * v).sum::<f64>()).sum())
}

/// Number of singular tubes with norm above `RANK_TOL · σ_max`.
pub fn t_rank(a: &Tensor3, m: &Transform) -> Result<usize> {
    let svals = transform_singular_values(a, m)?;
    let sigma_max = svals.iter().map(|s| s[0]).fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let r = a.n1().min(a.n2());
    let tol = RANK_TOL * sigma_max;
    Ok((0..r).filter(|&i| svals.iter().map(|s| s[i] * s[i]).sum::<f64>().sqrt() > tol).count())
}

/// Sum over transform-domain slices of their matrix ranks.
pub fn implicit_rank(a: &Tensor3, m: &Transform) -> Result<usize> {
    let svals = transform_singular_values(a, m)?;
    let sigma_max = svals.iter().map(|s| s[0]).fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let tol = RANK_TOL * sigma_max;
    Ok(svals.iter().map(|s| s.iter().filter(|&&v| v > tol).count()).sum())
}

/// ⋆_M-pseudoinverse `A† = V ⋆_M S† ⋆_M Uᵀ`, via slicewise Moore–Penrose
/// inverses in the transform domain.
pub fn pseudoinverse(a: &Tensor3, m: &Transform) -> Result<Tensor3> {
    let a_hat = m.forward(a)?;
    let svds = facewise_svd(&a_hat);
    let tol = RANK_TOL * largest_singular_value(&svds);
    let slices: Vec<Matrix> = svds.iter().map(|svd| filtered_inverse(svd, |s| if s > tol { 1.0 / s } else { 0.0 })).collect();
    m.inverse(&Tensor3::from_slices(&slices)?)
}

/// `V diag(f(σ)) Uᵀ`.
fn filtered_inverse(svd: &ThinSvd, f: impl Fn(f64) -> f64) -> Matrix {
    let mut out = Matrix::zeros(svd.v.nrows(), svd.u.nrows());
    for j in 0..svd.rank() {
        let w = f(svd.s[j]);
        if w != 0.0 {
            out.ger(w, &svd.v.column(j), &svd.u.column(j), 1.0);
        }
    }
    out
}

/// Largest singular value over all transform-domain slices.
pub fn operator_norm(a: &Tensor3, m: &Transform) -> Result<f64> {
    let svals = transform_singular_values(a, m)?;
    Ok(svals.iter().map(|s| s[0]).fold(0.0, f64::max))
}

/// Slicewise least squares `argmin ‖Â_i X̂_i − B̂_i‖_F` in the transform
/// domain. Rank-deficient slices get the minimum-norm solution.
pub fn solve_normal_equations(a: &Tensor3, b: &Tensor3, m: &Transform) -> Result<Tensor3> {
    solve_regularized(a, b, m, 0.0)
}

/// Slicewise Tikhonov solve `argmin ½‖Â X̂ − B̂‖² + λ/2 ‖X̂‖²`; `λ = 0` is the
/// plain minimum-norm least-squares solution.
pub fn solve_regularized(a: &Tensor3, b: &Tensor3, m: &Transform, lambda: f64) -> Result<Tensor3> {
    if a.n1() != b.n1() || a.n3() != b.n3() {
        return Err(Error::DimensionMismatch(format!("regression model {:?} and observations {:?}", a.dims(), b.dims())));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("negative regularization {lambda}")));
    }
    let a_hat = m.forward(a)?;
    let b_hat = m.forward(b)?;
    let svds = facewise_svd(&a_hat);
    let tol = RANK_TOL * largest_singular_value(&svds);
    let slices: Vec<Matrix> = svds
        .iter()
        .enumerate()
        .map(|(k, svd)| {
            let pinv = filtered_inverse(svd, |s| if s > tol { s / (s * s + lambda) } else { 0.0 });
            pinv * b_hat.slice_view(k)
        })
        .collect();
    m.inverse(&Tensor3::from_slices(&slices)?)
}
