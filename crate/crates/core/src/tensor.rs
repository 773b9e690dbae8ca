//! Dense order-3 tensors and the ⋆_M product machinery.
//!
//! Storage is slice-major: frontal slice `k` occupies a contiguous block of
//! `n1 * n2` entries, stored column-major. Entry `(i, j, k)` (0-based) lives at
//! `k * n1 * n2 + i + j * n1`, so the mode-3 unfolding column for tube
//! `(i, j)` is `K = i + j * n1` (the 1-based `K(i, j) = i + (j - 1) n1`).

use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{DMatrixView, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{orthogonality_residual, pairwise_sum_sq, Matrix};

/// Maximum `‖MᵀM − I‖_F` accepted for a transform.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

pub type Dims = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let expected = dims.0 * dims.1 * dims.2;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for dims {:?} ({} expected)",
                data.len(),
                dims,
                expected
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        check_dims(dims).expect("positive dims");
        Tensor3 { dims, data: vec![0.0; dims.0 * dims.1 * dims.2] }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dims);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    let idx = t.offset(i, j, k);
                    t.data[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Stacks equally-shaped matrices as frontal slices.
    pub fn from_slices(slices: &[Matrix]) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::InvalidArgument("no frontal slices".into()))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for s in slices {
            if s.shape() != (n1, n2) {
                return Err(Error::DimensionMismatch(format!("slice shape {:?} differs from {:?}", s.shape(), (n1, n2))));
            }
            data.extend_from_slice(s.as_slice());
        }
        Tensor3::new((n1, n2, slices.len()), data)
    }

    pub fn random_normal<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Self {
        check_dims(dims).expect("positive dims");
        let data = (0..dims.0 * dims.1 * dims.2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.dims.0
    }

    pub fn n2(&self) -> usize {
        self.dims.1
    }

    pub fn n3(&self) -> usize {
        self.dims.2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.dims.0 * self.dims.1 + i + j * self.dims.0
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.offset(i, j, k);
        self.data[idx] = value;
    }

    pub fn slice_view(&self, k: usize) -> DMatrixView<'_, f64> {
        let len = self.dims.0 * self.dims.1;
        DMatrixView::from_slice(&self.data[k * len..(k + 1) * len], self.dims.0, self.dims.1)
    }

    /// Frontal slice `A[:, :, k]` as an owned matrix.
    pub fn slice(&self, k: usize) -> Matrix {
        self.slice_view(k).into_owned()
    }

    pub fn slices(&self) -> Vec<Matrix> {
        (0..self.n3()).map(|k| self.slice(k)).collect()
    }

    pub fn tube(&self, i: usize, j: usize) -> Tube {
        Tube((0..self.n3()).map(|k| self.get(i, j, k)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        pairwise_sum_sq(&self.data).sqrt()
    }

    /// Frobenius inner product `⟨A, B⟩`.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims, "dot of tensors with different dims");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        self.map(|v| v * alpha)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, other.dims, "axpy of tensors with different dims");
        Tensor3 { dims: self.dims, data: self.data.iter().zip(&other.data).map(|(a, b)| a + alpha * b).collect() }
    }

    /// Sub-tensor with rows `rows`, columns `cols` and all frontal slices.
    pub fn sub_tensor(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Tensor3 {
        let dims = (rows.len(), cols.len(), self.n3());
        Tensor3::from_fn(dims, |i, j, k| self.get(rows.start + i, cols.start + j, k))
    }

    /// `max |A - B|` entrywise.
    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_dims(dims: Dims) -> Result<()> {
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        Err(Error::InvalidDims(dims))
    } else {
        Ok(())
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl<'a> Add<&'a Tensor3> for &'a Tensor3 {
    type Output = Tensor3;
    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.axpy(1.0, rhs)
    }
}

impl<'a> Sub<&'a Tensor3> for &'a Tensor3 {
    type Output = Tensor3;
    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &Tensor3 {
    type Output = Tensor3;
    fn neg(self) -> Tensor3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;
    fn mul(self, rhs: f64) -> Tensor3 {
        self.scale(rhs)
    }
}

/// A 1×1×n3 fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct Tube(pub Vec<f64>);

impl Tube {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl From<Tube> for Tensor3 {
    fn from(t: Tube) -> Tensor3 {
        let n3 = t.0.len();
        Tensor3::new((1, 1, n3), t.0).expect("non-empty tube")
    }
}

impl TryFrom<Tensor3> for Tube {
    type Error = Error;
    fn try_from(t: Tensor3) -> Result<Tube> {
        if t.n1() != 1 || t.n2() != 1 {
            return Err(Error::DimensionMismatch(format!("{:?} is not a tube", t.dims())));
        }
        Ok(Tube(t.data))
    }
}

/// Provenance of a transformation matrix.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Identity,
    Dct,
    RandomOrthogonal { seed: u64 },
    DataDependent,
    Permutation,
    Learned,
    Custom,
}

/// An orthogonal n3×n3 matrix `M` defining the ⋆_M algebra. `M⁻¹` is always
/// taken to be `Mᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    matrix: Matrix,
    kind: TransformKind,
}

impl Transform {
    pub fn new(matrix: Matrix, kind: TransformKind) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!("transform must be square and non-empty, got {:?}", matrix.shape())));
        }
        let residual = orthogonality_residual(&matrix);
        if !(residual <= ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal { residual, tol: ORTHOGONALITY_TOL });
        }
        Ok(Transform { matrix, kind })
    }

    pub fn n3(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn with_kind(mut self, kind: TransformKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.matrix)
    }

    /// `−M`, which flips the sign of every ⋆_M product.
    pub fn negated(&self) -> Transform {
        Transform { matrix: -&self.matrix, kind: TransformKind::Custom }
    }

    /// `Q M` for an orthogonal `Q` (row permutations, sign flips).
    pub fn left_multiplied(&self, q: &Matrix) -> Result<Transform> {
        Transform::new(q * &self.matrix, TransformKind::Custom)
    }

    /// Move to the transform domain: `A ×₃ M`.
    pub fn forward(&self, a: &Tensor3) -> Result<Tensor3> {
        mode3_product(a, &self.matrix)
    }

    /// Return to the spatial domain: `Â ×₃ Mᵀ`.
    pub fn inverse(&self, a_hat: &Tensor3) -> Result<Tensor3> {
        mode3_product(a_hat, &self.matrix.transpose())
    }

    fn check_n3(&self, n3: usize) -> Result<()> {
        if self.n3() != n3 {
            return Err(Error::DimensionMismatch(format!("transform is {0}×{0} but tensor has n3 = {1}", self.n3(), n3)));
        }
        Ok(())
    }
}

/// Mode-3 unfolding: the n3 × (n1·n2) matrix whose columns are the tubes.
pub fn mode3_unfold(a: &Tensor3) -> Matrix {
    let (n1, n2, n3) = a.dims();
    Matrix::from_row_slice(n3, n1 * n2, a.data())
}

/// Inverse of [`mode3_unfold`].
pub fn mode3_fold(x: &Matrix, dims: Dims) -> Result<Tensor3> {
    check_dims(dims)?;
    let (n1, n2, n3) = dims;
    if x.shape() != (n3, n1 * n2) {
        return Err(Error::DimensionMismatch(format!("cannot fold a {:?} matrix into dims {:?}", x.shape(), dims)));
    }
    Tensor3::new(dims, x.transpose().as_slice().to_vec())
}

/// `A ×₃ M = fold₃(M · unfold₃(A))` for `M` of shape p × n3.
pub fn mode3_product(a: &Tensor3, m: &Matrix) -> Result<Tensor3> {
    let (n1, n2, n3) = a.dims();
    if m.ncols() != n3 {
        return Err(Error::DimensionMismatch(format!("mode-3 product needs {} columns, matrix is {:?}", n3, m.shape())));
    }
    // With slice-major storage the data is the (n1·n2) × n3 matrix unfold₃(A)ᵀ.
    let tubes = DMatrixView::from_slice(a.data(), n1 * n2, n3);
    let out = tubes * m.transpose();
    Tensor3::new((n1, n2, m.nrows()), out.as_slice().to_vec())
}

/// Facewise product: slice k of the result is `A[:, :, k] · B[:, :, k]`.
pub fn facewise_product(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    let (n1, p, n3) = a.dims();
    let (p2, n2, n3b) = b.dims();
    if p != p2 || n3 != n3b {
        return Err(Error::DimensionMismatch(format!("facewise product of {:?} and {:?}", a.dims(), b.dims())));
    }
    let mut data = Vec::with_capacity(n1 * n2 * n3);
    for k in 0..n3 {
        let c = a.slice_view(k) * b.slice_view(k);
        data.extend_from_slice(c.as_slice());
    }
    Tensor3::new((n1, n2, n3), data)
}

/// Applies `f` to every frontal slice.
pub fn map_slices(a: &Tensor3, mut f: impl FnMut(usize, DMatrixView<'_, f64>) -> Matrix) -> Result<Tensor3> {
    let slices: Vec<Matrix> = (0..a.n3()).map(|k| f(k, a.slice_view(k))).collect();
    Tensor3::from_slices(&slices)
}

/// `A ⋆_M B = ((A ×₃ M) △ (B ×₃ M)) ×₃ Mᵀ`.
pub fn starm_product(a: &Tensor3, b: &Tensor3, m: &Transform) -> Result<Tensor3> {
    m.check_n3(a.n3())?;
    m.check_n3(b.n3())?;
    if a.n2() != b.n1() {
        return Err(Error::DimensionMismatch(format!("⋆_M product of {:?} and {:?}", a.dims(), b.dims())));
    }
    let c_hat = facewise_product(&m.forward(a)?, &m.forward(b)?)?;
    m.inverse(&c_hat)
}

/// Tubal product `a ⋆_M b = (â ⊙ b̂) ×₃ Mᵀ`.
pub fn tubal_product(a: &Tube, b: &Tube, m: &Transform) -> Result<Tube> {
    if a.len() != m.n3() || b.len() != m.n3() {
        return Err(Error::DimensionMismatch(format!(
            "tubes of lengths {} and {} with a {}-point transform",
            a.len(),
            b.len(),
            m.n3()
        )));
    }
    let mm = m.matrix();
    let a_hat = mm * a.to_vector();
    let b_hat = mm * b.to_vector();
    let c = mm.transpose() * a_hat.component_mul(&b_hat);
    Ok(Tube(c.as_slice().to_vec()))
}

/// Structured matrix `R_M[a] = Mᵀ diag(M a) M` with `R_M[a] vec(b) = vec(a ⋆_M b)`.
pub fn r_matrix(a: &Tube, m: &Transform) -> Result<Matrix> {
    if a.len() != m.n3() {
        return Err(Error::DimensionMismatch(format!("tube of length {} with a {}-point transform", a.len(), m.n3())));
    }
    let mm = m.matrix();
    let d = Matrix::from_diagonal(&(mm * a.to_vector()));
    Ok(mm.transpose() * d * mm)
}

/// `R_M[a] = M⁻¹ diag(M a) M` for an arbitrary invertible `M`, using an
/// explicit inverse. Diagnostic only; the product and optimizer paths never
/// accept non-orthogonal transforms.
pub fn r_matrix_general(a: &Tube, m: &Matrix) -> Result<Matrix> {
    if !m.is_square() || a.len() != m.nrows() {
        return Err(Error::DimensionMismatch(format!("tube of length {} with a {:?} matrix", a.len(), m.shape())));
    }
    let inv = m.clone().try_inverse().ok_or_else(|| Error::Degenerate("transform matrix is singular".into()))?;
    let d = Matrix::from_diagonal(&(m * a.to_vector()));
    Ok(inv * d * m)
}

/// ⋆_M transpose: transposes each frontal slice.
pub fn starm_transpose(a: &Tensor3) -> Tensor3 {
    map_slices(a, |_, s| s.transpose()).expect("slices share a shape")
}

/// The identity tube `e = 1 ×₃ M⁻¹`.
pub fn identity_tube(m: &Transform) -> Tube {
    let ones = DVector::from_element(m.n3(), 1.0);
    Tube((m.matrix().transpose() * ones).as_slice().to_vec())
}

/// f-diagonal m × m × n3 tensor with identity tubes on its diagonal.
pub fn identity_tensor(size: usize, m: &Transform) -> Tensor3 {
    let e = identity_tube(m);
    Tensor3::from_fn((size, size, m.n3()), |i, j, k| if i == j { e.0[k] } else { 0.0 })
}

/// True when every off-diagonal entry of every frontal slice is within `tol`.
pub fn is_f_diagonal(a: &Tensor3, tol: f64) -> bool {
    let (n1, n2, n3) = a.dims();
    (0..n3).all(|k| (0..n2).all(|j| (0..n1).all(|i| i == j || a.get(i, j, k).abs() <= tol)))
}

pub fn frobenius_norm(a: &Tensor3) -> f64 {
    a.frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn unfold_single_tube() {
        let a = Tensor3::new((1, 1, 3), vec![1.0, 2.0, 3.0]).unwrap();
        let u = mode3_unfold(&a);
        assert_eq!(u, Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]));
        assert_eq!(mode3_fold(&u, (1, 1, 3)).unwrap(), a);
    }

    #[test]
    fn unfold_orders_tubes_by_column_index() {
        // A[:, :, 1] = [[1, 3], [2, 4]]
        let a = Tensor3::from_slices(&[Matrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0])]).unwrap();
        assert_eq!(mode3_unfold(&a), Matrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn fold_places_entries_by_tube_index() {
        let x = Matrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let t = mode3_fold(&x, (2, 2, 2)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(t[(i, j, k)], x[(k, i + j * 2)]);
                }
            }
        }
    }

    #[test]
    fn fold_unfold_round_trip() {
        let a = Tensor3::random_normal((3, 4, 5), &mut rng(1));
        assert_eq!(mode3_fold(&mode3_unfold(&a), a.dims()).unwrap(), a);
        assert!(mode3_fold(&mode3_unfold(&a), (4, 3, 4)).is_err());
    }

    #[test]
    fn mode3_with_identity_and_hadamard_2x2() {
        let a = Tensor3::random_normal((2, 3, 4), &mut rng(2));
        assert_eq!(mode3_product(&a, &Matrix::identity(4, 4)).unwrap(), a);

        let t = Tensor3::new((1, 1, 2), vec![1.0, 1.0]).unwrap();
        let h = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]) / 2f64.sqrt();
        let out = mode3_product(&t, &h).unwrap();
        assert_relative_eq!(out.get(0, 0, 0), 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(out.get(0, 0, 1), 0.0, epsilon = 1e-15);
        assert!(mode3_product(&t, &Matrix::identity(3, 3)).is_err());
    }

    #[test]
    fn mode3_rectangular_matches_unfold_definition() {
        let a = Tensor3::random_normal((2, 3, 4), &mut rng(3));
        let m = Matrix::from_fn(2, 4, |i, j| (i + 2 * j) as f64 - 1.5);
        let out = mode3_product(&a, &m).unwrap();
        let expected = mode3_fold(&(&m * mode3_unfold(&a)), (2, 3, 2)).unwrap();
        assert_relative_eq!(out.data(), expected.data(), epsilon = 1e-14);
    }

    #[test]
    fn mode3_orthogonal_preserves_norm() {
        let a = Tensor3::random_normal((3, 4, 6), &mut rng(4));
        let m = transforms::random_orthogonal(6, 9);
        let out = m.forward(&a).unwrap();
        assert_relative_eq!(out.frobenius_norm(), a.frobenius_norm(), max_relative = 1e-12);
    }

    #[test]
    fn facewise_matches_per_slice_products() {
        let a = Tensor3::random_normal((2, 3, 4), &mut rng(5));
        let b = Tensor3::random_normal((3, 2, 4), &mut rng(6));
        let c = facewise_product(&a, &b).unwrap();
        for k in 0..4 {
            let expected = a.slice(k) * b.slice(k);
            assert_relative_eq!(c.slice(k), expected, epsilon = 1e-14);
        }
        assert!(facewise_product(&a, &a).is_err());

        let eye = Tensor3::from_slices(&vec![Matrix::identity(3, 3); 2]).unwrap();
        assert_eq!(facewise_product(&eye, &eye).unwrap(), eye);

        let x = Tensor3::random_normal((2, 3, 1), &mut rng(7));
        let y = Tensor3::random_normal((3, 5, 1), &mut rng(8));
        assert_relative_eq!(facewise_product(&x, &y).unwrap().slice(0), x.slice(0) * y.slice(0), epsilon = 1e-14);
    }

    #[test]
    fn starm_with_identity_is_facewise() {
        let a = Tensor3::random_normal((2, 3, 4), &mut rng(9));
        let b = Tensor3::random_normal((3, 2, 4), &mut rng(10));
        let id = transforms::identity(4);
        assert_relative_eq!(
            starm_product(&a, &b, &id).unwrap().data(),
            facewise_product(&a, &b).unwrap().data(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn identity_tensor_is_neutral() {
        for m in [transforms::identity(5), transforms::dct(5), transforms::random_orthogonal(5, 3)] {
            let a = Tensor3::random_normal((3, 4, 5), &mut rng(11));
            let left = identity_tensor(3, &m);
            let right = identity_tensor(4, &m);
            assert!(is_f_diagonal(&left, 0.0));
            assert!(starm_product(&left, &a, &m).unwrap().max_abs_diff(&a) <= 1e-12);
            assert!(starm_product(&a, &right, &m).unwrap().max_abs_diff(&a) <= 1e-12);
        }
        let id = identity_tensor(2, &transforms::identity(3));
        for k in 0..3 {
            assert_eq!(id.slice(k), Matrix::identity(2, 2));
        }
    }

    #[test]
    fn tubal_product_cases() {
        let a = Tube(vec![1.0, -2.0, 0.5]);
        let b = Tube(vec![3.0, 4.0, -1.0]);
        let id = transforms::identity(3);
        assert_eq!(tubal_product(&a, &b, &id).unwrap(), Tube(vec![3.0, -8.0, -0.5]));

        let m = transforms::random_orthogonal(3, 1);
        let e = identity_tube(&m);
        let ae = tubal_product(&a, &e, &m).unwrap();
        assert_relative_eq!(ae.as_slice(), a.as_slice(), epsilon = 1e-14);

        let r = r_matrix(&a, &m).unwrap();
        let via_r = &r * b.to_vector();
        let direct = tubal_product(&a, &b, &m).unwrap();
        assert_relative_eq!(via_r.as_slice(), direct.as_slice(), epsilon = 1e-12);

        let as_tensor = starm_product(&Tensor3::from(a.clone()), &Tensor3::from(b.clone()), &m).unwrap();
        assert_relative_eq!(as_tensor.data(), direct.as_slice(), epsilon = 1e-14);
        assert!(tubal_product(&a, &Tube(vec![1.0]), &m).is_err());
    }

    #[test]
    fn r_matrix_identity_and_summation_algebras() {
        let a = Tube(vec![2.0, 3.0, 5.0]);
        let r = r_matrix(&a, &transforms::identity(3)).unwrap();
        assert_eq!(r, Matrix::from_diagonal(&a.to_vector()));

        // Lower-triangular summation matrix.
        let s = Matrix::from_fn(3, 3, |i, j| if j <= i { 1.0 } else { 0.0 });
        let r = r_matrix_general(&a, &s).unwrap();
        let (a1, a2, a3) = (2.0, 3.0, 5.0);
        let expected = Matrix::from_row_slice(3, 3, &[a1, 0.0, 0.0, a2, a1 + a2, 0.0, a3, a3, a1 + a2 + a3]);
        assert_relative_eq!(r, expected, epsilon = 1e-12);
        assert!(r_matrix_general(&a, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn transpose_cases() {
        let a = Tensor3::random_normal((2, 3, 1), &mut rng(12));
        assert_eq!(starm_transpose(&a).slice(0), a.slice(0).transpose());
        let b = Tensor3::random_normal((2, 3, 4), &mut rng(13));
        assert_eq!(starm_transpose(&starm_transpose(&b)), b);
    }

    #[test]
    fn norm_cases() {
        assert_eq!(Tensor3::zeros((2, 2, 2)).frobenius_norm(), 0.0);
        let t = Tensor3::new((1, 1, 2), vec![3.0, 4.0]).unwrap();
        assert_eq!(t.frobenius_norm(), 5.0);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(Tensor3::new((2, 2, 2), vec![0.0; 7]).is_err());
        assert!(Tensor3::new((0, 2, 2), vec![]).is_err());
        assert!(Transform::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), TransformKind::Custom).is_err());
        let a = Tensor3::zeros((2, 2, 3));
        assert!(starm_product(&a, &a, &transforms::identity(2)).is_err());
    }

    #[test]
    fn tube_tensor_conversion() {
        let t = Tube(vec![1.0, 2.0]);
        let x: Tensor3 = t.clone().into();
        assert_eq!(x.dims(), (1, 1, 2));
        assert_eq!(Tube::try_from(x).unwrap(), t);
        assert!(Tube::try_from(Tensor3::zeros((2, 1, 2))).is_err());
    }
}
