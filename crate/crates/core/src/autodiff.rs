//! Reverse-mode derivatives of the building blocks: mode-3 product, ⋆_M
//! product, the economic matrix SVD and the truncated t-SVDM, together with a
//! finite-difference checker.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{expm, skew_part, Matrix, ThinSvd};
use crate::tensor::{mode3_product, mode3_unfold, starm_product, starm_transpose, Dims, Tensor3, Transform};
use crate::tsvdm::{check_truncation, facewise_svd, RANK_TOL};

/// Relative gap `|σ_j² − σ_i²| < GAP_TOL · σ_max²` below which a pair of
/// singular values is treated as degenerate.
pub const GAP_TOL: f64 = 1e-8;

/// Cotangent of `A` for `B = A ×₃ M`: `dB ×₃ Mᵀ`.
pub fn grad_mode3_wrt_tensor(db: &Tensor3, m: &Matrix) -> Result<Tensor3> {
    if db.n3() != m.nrows() {
        return Err(Error::DimensionMismatch(format!("cotangent has n3 = {} but matrix is {:?}", db.n3(), m.shape())));
    }
    mode3_product(db, &m.transpose())
}

/// Cotangent of `M` for `B = A ×₃ M`: `unfold₃(dB) · unfold₃(A)ᵀ`.
pub fn grad_mode3_wrt_matrix(db: &Tensor3, a: &Tensor3) -> Result<Matrix> {
    if db.n1() != a.n1() || db.n2() != a.n2() {
        return Err(Error::DimensionMismatch(format!("cotangent {:?} for input {:?}", db.dims(), a.dims())));
    }
    Ok(mode3_unfold(db) * mode3_unfold(a).transpose())
}

#[derive(Clone, Debug)]
pub struct StarmGrad {
    pub da: Tensor3,
    pub db: Tensor3,
    pub dm: Matrix,
}

/// Reverse mode of `C = A ⋆_M B` with cotangent `dC`.
pub fn grad_starm(dc: &Tensor3, a: &Tensor3, b: &Tensor3, m: &Transform) -> Result<StarmGrad> {
    let c = starm_product(a, b, m)?;
    if dc.dims() != c.dims() {
        return Err(Error::DimensionMismatch(format!("cotangent {:?} for product {:?}", dc.dims(), c.dims())));
    }
    let da = starm_product(dc, &starm_transpose(b), m)?;
    let db = starm_product(&starm_transpose(a), dc, m)?;
    let inner = mode3_unfold(&c) * mode3_unfold(dc).transpose()
        + mode3_unfold(&da) * mode3_unfold(a).transpose()
        + mode3_unfold(&db) * mode3_unfold(b).transpose();
    let dm = m.matrix() * inner;
    Ok(StarmGrad { da, db, dm })
}

#[derive(Clone, Debug)]
pub struct SvdGrad {
    pub grad: Matrix,
    /// Set when a near-degenerate pair of singular values was met with a
    /// nonzero cotangent and its coupling term was dropped.
    pub degenerate: bool,
}

/// Vector-Jacobian product of the economic SVD `A = U Σ Vᵀ`.
///
/// `du` is m×r, `ds` is r×r (only its diagonal is read) and `dv` is n×r.
/// Coupling terms use `F_ij = 1/(σ_j² − σ_i²)`; near-degenerate pairs get
/// `F_ij = 0` and raise the `degenerate` flag, and `Σ⁻¹` is taken as a
/// pseudo-inverse below `RANK_TOL · σ_max`.
pub fn svd_grad(du: &Matrix, ds: &Matrix, dv: &Matrix, svd: &ThinSvd) -> Result<SvdGrad> {
    let (m, r) = svd.u.shape();
    let n = svd.v.nrows();
    if du.shape() != (m, r) || dv.shape() != (n, r) || ds.shape() != (r, r) {
        return Err(Error::DimensionMismatch(format!(
            "SVD cotangents {:?}, {:?}, {:?} for factors {:?}, {}, {:?}",
            du.shape(),
            ds.shape(),
            dv.shape(),
            svd.u.shape(),
            r,
            svd.v.shape()
        )));
    }
    let s = &svd.s;
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        let touched = du.iter().chain(ds.iter()).chain(dv.iter()).any(|&x| x != 0.0);
        return Ok(SvdGrad { grad: Matrix::zeros(m, n), degenerate: touched });
    }
    let gap_tol = GAP_TOL * s_max * s_max;
    let rank_tol = RANK_TOL * s_max;

    let utdu = svd.u.transpose() * du;
    let vtdv = svd.v.transpose() * dv;
    let mut degenerate = false;
    let mut inner = Matrix::zeros(r, r);
    for j in 0..r {
        for i in 0..r {
            if i == j {
                inner[(i, i)] = ds[(i, i)];
                continue;
            }
            let ju = utdu[(i, j)] - utdu[(j, i)];
            let jv = vtdv[(i, j)] - vtdv[(j, i)];
            let gap = s[j] * s[j] - s[i] * s[i];
            if gap.abs() < gap_tol {
                if ju != 0.0 || jv != 0.0 {
                    degenerate = true;
                }
                continue;
            }
            inner[(i, j)] = (ju * s[j] + s[i] * jv) / gap;
        }
    }
    let s_inv: Vec<f64> = s.iter().map(|&v| if v > rank_tol { 1.0 / v } else { 0.0 }).collect();

    let mut grad = &svd.u * &inner * svd.v.transpose();
    // (I − UUᵀ) dU Σ⁻¹ Vᵀ
    let mut du_perp = du - &svd.u * &utdu;
    for (j, w) in s_inv.iter().enumerate() {
        du_perp.column_mut(j).scale_mut(*w);
    }
    grad += du_perp * svd.v.transpose();
    // U Σ⁻¹ dVᵀ (I − VVᵀ)
    let mut dv_perp = dv - &svd.v * &vtdv;
    for (j, w) in s_inv.iter().enumerate() {
        dv_perp.column_mut(j).scale_mut(*w);
    }
    grad += &svd.u * dv_perp.transpose();
    Ok(SvdGrad { grad, degenerate })
}

fn content_hash(a: &Tensor3, m: &Transform) -> u64 {
    let mut h = DefaultHasher::new();
    a.dims().hash(&mut h);
    for v in a.data() {
        v.to_bits().hash(&mut h);
    }
    for v in m.matrix().iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Forward quantities of a truncated t-SVDM, cached for the backward pass.
#[derive(Clone, Debug)]
pub struct GradContext {
    dims: Dims,
    hash: u64,
    k: usize,
    a_hat: Tensor3,
    ak_hat: Tensor3,
    svds: Vec<ThinSvd>,
}

impl GradContext {
    pub fn new(a: &Tensor3, m: &Transform, k: usize) -> Result<Self> {
        check_truncation(k, a.dims())?;
        let a_hat = m.forward(a)?;
        let svds = facewise_svd(&a_hat);
        let slices: Vec<Matrix> = svds.iter().map(|s| s.reconstruct_truncated(k)).collect();
        let ak_hat = Tensor3::from_slices(&slices)?;
        Ok(GradContext { dims: a.dims(), hash: content_hash(a, m), k, a_hat, ak_hat, svds })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `A_k` in the transform domain.
    pub fn ak_hat(&self) -> &Tensor3 {
        &self.ak_hat
    }

    pub fn a_hat(&self) -> &Tensor3 {
        &self.a_hat
    }

    pub fn slice_svds(&self) -> &[ThinSvd] {
        &self.svds
    }

    /// `A_k` in the spatial domain.
    pub fn low_rank(&self, m: &Transform) -> Result<Tensor3> {
        m.inverse(&self.ak_hat)
    }

    pub fn matches(&self, a: &Tensor3, m: &Transform, k: usize) -> bool {
        self.dims == a.dims() && self.k == k && self.hash == content_hash(a, m)
    }
}

#[derive(Clone, Debug)]
pub struct TsvdmGrad {
    pub grad: Matrix,
    pub degenerate_slices: Vec<usize>,
}

/// Euclidean gradient of `M ↦ ⟨R, A_k(M)⟩`, where `A_k(M)` is the t-rank-`k`
/// truncation of `A` under `M`.
///
/// Reverse pass: the outer `×₃ Mᵀ`, then on each transform-domain slice the
/// truncated-SVD cotangents (zero beyond index `k`) pushed through
/// [`svd_grad`], then the inner `×₃ M`.
pub fn tsvdm_grad_wrt_m(r: &Tensor3, a: &Tensor3, m: &Transform, k: usize, ctx: &GradContext) -> Result<TsvdmGrad> {
    if !ctx.matches(a, m, k) {
        return Err(Error::ContextMismatch);
    }
    if r.dims() != a.dims() {
        return Err(Error::DimensionMismatch(format!("cotangent {:?} for tensor {:?}", r.dims(), a.dims())));
    }
    // A_k = Â_k ×₃ Mᵀ: gradient for the matrix Mᵀ, transposed.
    let mut grad = grad_mode3_wrt_matrix(r, &ctx.ak_hat)?.transpose();
    let r_hat = grad_mode3_wrt_tensor(r, &m.matrix().transpose())?;

    let mut degenerate_slices = Vec::new();
    let mut da_slices = Vec::with_capacity(a.n3());
    for (i, svd) in ctx.svds.iter().enumerate() {
        let rs = r_hat.slice(i);
        let rank = svd.rank();
        let kk = k.min(rank);
        let mut du = Matrix::zeros(svd.u.nrows(), rank);
        let mut dv = Matrix::zeros(svd.v.nrows(), rank);
        let mut ds = Matrix::zeros(rank, rank);
        for j in 0..kk {
            let uj = svd.u.column(j);
            let vj = svd.v.column(j);
            let rv = &rs * vj;
            let rtu = rs.transpose() * uj;
            du.column_mut(j).copy_from(&(&rv * svd.s[j]));
            dv.column_mut(j).copy_from(&(&rtu * svd.s[j]));
            ds[(j, j)] = uj.dot(&rv);
        }
        let g = svd_grad(&du, &ds, &dv, svd)?;
        if g.degenerate {
            degenerate_slices.push(i);
        }
        da_slices.push(g.grad);
    }
    if !degenerate_slices.is_empty() {
        log::warn!("near-degenerate singular values in slices {degenerate_slices:?}");
    }
    let da_hat = Tensor3::from_slices(&da_slices)?;
    grad += grad_mode3_wrt_matrix(&da_hat, a)?;
    Ok(TsvdmGrad { grad, degenerate_slices })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdMode {
    /// Random directions `D` in the ambient matrix space.
    Euclidean,
    /// Geodesics `x · exp(tΩ)` on the orthogonal group, compared through
    /// `⟨g, xΩ⟩`.
    Geodesic,
}

pub const FD_DIRECTIONS: usize = 10;

/// Central-difference step `1e-6 · (1 + ‖x‖_F)`.
pub fn fd_step(x_norm: f64) -> f64 {
    1e-6 * (1.0 + x_norm)
}

/// `|fd − an|` relative to the largest directional derivative the gradient
/// admits over unit directions (`scale`), so near-orthogonal directions do not
/// inflate the error.
fn relative_error(fd: f64, an: f64, scale: f64, floor: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(scale).max(floor)
}

/// Largest relative disagreement between `⟨g, d⟩` and central differences
/// of `f` over `FD_DIRECTIONS` seeded random unit directions.
pub fn finite_diff_check(f: impl Fn(&Matrix) -> f64, x: &Matrix, g: &Matrix, mode: FdMode, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = x.shape();
    let h = fd_step(x.norm());
    let floor = 1e-10 * (1.0 + f(x).abs());
    let scale = match mode {
        FdMode::Euclidean => g.norm(),
        FdMode::Geodesic => skew_part(&(x.transpose() * g)).norm(),
    };
    let mut worst = 0.0f64;
    for _ in 0..FD_DIRECTIONS {
        let raw = Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        let (fd, an) = match mode {
            FdMode::Euclidean => {
                let d = &raw / raw.norm();
                let (plus, minus) = (x + &d * h, x - &d * h);
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                // Pair with the perturbation actually applied after rounding.
                (fd, g.dot(&((&plus - &minus) / (2.0 * h))))
            }
            FdMode::Geodesic => {
                let omega = skew_part(&raw);
                let omega = &omega / omega.norm().max(f64::MIN_POSITIVE);
                let plus = x * expm(&(&omega * h));
                let minus = x * expm(&(&omega * -h));
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                (fd, g.dot(&(x * &omega)))
            }
        };
        worst = worst.max(relative_error(fd, an, scale, floor));
    }
    worst
}

/// Euclidean finite-difference check for scalar functions of a tensor.
pub fn finite_diff_check_tensor(f: impl Fn(&Tensor3) -> f64, x: &Tensor3, g: &Tensor3, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = fd_step(x.frobenius_norm());
    let floor = 1e-10 * (1.0 + f(x).abs());
    let mut worst = 0.0f64;
    for _ in 0..FD_DIRECTIONS {
        let raw = Tensor3::random_normal(x.dims(), &mut rng);
        let d = raw.scale(1.0 / raw.frobenius_norm());
        let (plus, minus) = (x.axpy(h, &d), x.axpy(-h, &d));
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let applied = (&plus - &minus).scale(0.5 / h);
        worst = worst.max(relative_error(fd, g.dot(&applied), g.frobenius_norm(), floor));
    }
    worst
}
