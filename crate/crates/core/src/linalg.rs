//! Dense linear-algebra helpers shared by the tensor, factorization and
//! optimization modules.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;

/// Economic SVD `a = u * diag(s) * vᵀ` with `r = min(rows, cols)` columns,
/// singular values sorted nonincreasing and a deterministic sign gauge: the
/// largest-magnitude entry of every left singular vector is nonnegative.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: Matrix,
    pub s: DVector<f64>,
    pub v: Matrix,
}

impl ThinSvd {
    pub fn new(a: &Matrix) -> Self {
        let (mut u, s, mut v) = if a.nrows() >= a.ncols() {
            jacobi_svd(a)
        } else {
            let (u, s, v) = jacobi_svd(&a.transpose());
            (v, s, u)
        };
        for j in 0..s.len() {
            let mut pivot = 0.0f64;
            for i in 0..u.nrows() {
                if u[(i, j)].abs() > pivot.abs() {
                    pivot = u[(i, j)];
                }
            }
            if pivot < 0.0 {
                u.column_mut(j).neg_mut();
                v.column_mut(j).neg_mut();
            }
        }
        ThinSvd { u, s, v }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.s) * self.v.transpose()
    }

    /// Rank-`k` reconstruction `u[:, :k] diag(s[:k]) v[:, :k]ᵀ`.
    pub fn reconstruct_truncated(&self, k: usize) -> Matrix {
        let k = k.min(self.s.len());
        let mut out = Matrix::zeros(self.u.nrows(), self.v.nrows());
        for j in 0..k {
            out.ger(self.s[j], &self.u.column(j), &self.v.column(j), 1.0);
        }
        out
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: &Matrix) -> DVector<f64> {
    ThinSvd::new(a).s
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// SVD of a matrix with `rows >= cols`.
fn jacobi_svd(a: &Matrix) -> (Matrix, DVector<f64>, Matrix) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    if n == 0 {
        return jacobi_core(a.clone());
    }
    // A P = Q R with column pivoting, then Jacobi on Rᵀ: the pivoted factor
    // is close to diagonal, so few sweeps are needed.
    let qr = a.clone().col_piv_qr();
    let mut perm = Matrix::identity(n, n);
    qr.p().permute_columns(&mut perm);
    let r = qr.r();
    let (vr, s, ur) = jacobi_core(r.transpose());
    (qr.q() * ur, s, perm * vr)
}

/// One-sided Jacobi: plane rotations orthogonalize the columns of `w`,
/// accumulated into `v`; the column norms are the singular values. Columns
/// whose norm is negligible get an orthonormal completion so `u` always has
/// orthonormal columns.
fn jacobi_core(mut w: Matrix) -> (Matrix, DVector<f64>, Matrix) {
    let (m, n) = w.shape();
    let mut v = Matrix::identity(n, n);
    // Columns below this squared norm are rounding noise; rotating them
    // cannot change the factorization beyond working precision.
    let floor = (f64::EPSILON * w.norm()).powi(2);
    let mut sq = vec![0.0; n];
    for _ in 0..JACOBI_MAX_SWEEPS {
        for (j, x) in sq.iter_mut().enumerate() {
            *x = dot(column(&w, j), column(&w, j));
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (sq[p], sq[q]);
                if alpha <= floor || beta <= floor {
                    continue;
                }
                let gamma = dot(column(&w, p), column(&w, q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(w.as_mut_slice(), m, p, q, c, s);
                rotate_columns(v.as_mut_slice(), n, p, q, c, s);
                sq[p] = alpha - t * gamma;
                sq[q] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| dot(column(&w, j), column(&w, j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s_max = order.first().map_or(0.0, |&j| norms[j]);
    let cutoff = s_max * f64::EPSILON * m as f64;
    let s = DVector::from_iterator(n, order.iter().map(|&j| norms[j]));
    let v = Matrix::from_columns(&order.iter().map(|&j| v.column(j).into_owned()).collect::<Vec<_>>());
    let kept = order.iter().take_while(|&&j| norms[j] > cutoff && norms[j] > 0.0).count();
    let cols: Vec<DVector<f64>> = order[..kept].iter().map(|&j| w.column(j) / norms[j]).collect();
    let u = if kept == n {
        Matrix::from_columns(&cols)
    } else {
        let head = if kept == 0 { Matrix::zeros(m, 0) } else { Matrix::from_columns(&cols) };
        complete_basis(&head, m).columns(0, n).into_owned()
    };
    (u, s, v)
}

fn column(x: &Matrix, j: usize) -> &[f64] {
    let m = x.nrows();
    &x.as_slice()[j * m..(j + 1) * m]
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `[x_p, x_q] ← [c x_p − s x_q, s x_p + c x_q]` on column-major storage.
fn rotate_columns(data: &mut [f64], rows: usize, p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = data.split_at_mut(q * rows);
    let xp = &mut left[p * rows..(p + 1) * rows];
    let xq = &mut right[..rows];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Extends the orthonormal columns of `q` to an orthonormal basis of `R^n`.
/// The leading columns of the result are exactly the columns of `q`; the
/// remaining ones are obtained by twice-orthogonalized Gram–Schmidt on the
/// standard basis vectors, greedily taking the largest residual.
pub fn complete_basis(q: &Matrix, n: usize) -> Matrix {
    assert_eq!(q.nrows(), n, "basis rows must match the ambient dimension");
    let mut cols: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    while cols.len() < n {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for e in 0..n {
            let mut w = DVector::zeros(n);
            w[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dot(&w);
                    w.axpy(-proj, c, 1.0);
                }
            }
            let nrm = w.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(w);
            }
        }
        let w = best.expect("n > 0");
        cols.push(w / best_norm);
    }
    Matrix::from_columns(&cols)
}

/// `‖QᵀQ − I‖_F`.
pub fn orthogonality_residual(q: &Matrix) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - Matrix::identity(n, n)).norm()
}

pub fn skew_part(a: &Matrix) -> Matrix {
    (a - a.transpose()) * 0.5
}

/// Nearest orthogonal matrix in Frobenius norm (orthogonal polar factor).
pub fn polar_orthogonal(a: &Matrix) -> Matrix {
    let svd = ThinSvd::new(a);
    &svd.u * svd.v.transpose()
}

/// Pairwise (cascade) summation of squares, independent of any parallel
/// schedule.
pub fn pairwise_sum_sq(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().map(|v| v * v).sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum_sq(&values[..mid]) + pairwise_sum_sq(&values[mid..])
    }
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// Backward-error bounds for each Padé degree in the 1-norm.
const THETA: [f64; 5] =
    [1.495585217958292e-2, 2.539_398_330_063_23e-1, 9.504178996162932e-1, 2.097847961257068e0, 5.371920351148152e0];

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let mut even_pow = ident.clone();
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for j in 0..b.len() / 2 {
        u_inner += &even_pow * b[2 * j + 1];
        v += &even_pow * b[2 * j];
        even_pow = &even_pow * &a2;
    }
    (a * u_inner, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (a * u_inner, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant whose degree is chosen from the 1-norm.
pub fn expm(a: &Matrix) -> Matrix {
    assert!(a.is_square(), "expm requires a square matrix");
    let n = a.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let s = ((norm / THETA[4]).log2().ceil()).max(0.0) as i32;
        let scaled = a / 2f64.powi(s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den.lu().solve(&num).expect("Padé denominator is nonsingular within the degree bounds");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
