//! Constructors for the transformation matrices used as initial guesses and
//! baselines.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{complete_basis, orthogonality_residual, Matrix, ThinSvd};
use crate::tensor::{mode3_unfold, Tensor3, Transform, TransformKind, ORTHOGONALITY_TOL};

pub fn identity(n3: usize) -> Transform {
    assert!(n3 >= 1, "transform size must be positive");
    Transform::new(Matrix::identity(n3, n3), TransformKind::Identity).expect("identity is orthogonal")
}

/// Orthonormal DCT-II: `M[i, j] = c_i cos(π i (2j + 1) / (2 n3))`.
pub fn dct_matrix(n3: usize) -> Matrix {
    let n = n3 as f64;
    Matrix::from_fn(n3, n3, |i, j| {
        let c = if i == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        c * (PI * i as f64 * (2 * j + 1) as f64 / (2.0 * n)).cos()
    })
}

pub fn dct(n3: usize) -> Transform {
    assert!(n3 >= 1, "transform size must be positive");
    Transform::new(dct_matrix(n3), TransformKind::Dct).expect("DCT-II is orthonormal")
}

/// Orthogonal factor of a seeded standard-normal matrix, with the signs of
/// the triangular factor's diagonal folded in so the result is unique.
pub fn random_orthogonal(n3: usize, seed: u64) -> Transform {
    assert!(n3 >= 1, "transform size must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Matrix::from_fn(n3, n3, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n3 {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Transform::new(q, TransformKind::RandomOrthogonal { seed }).expect("QR factor is orthogonal")
}

/// `Zᵀ`, where `Z` is the full left singular basis of `unfold₃(A)`. Rows are
/// ordered by decreasing singular value; rank-deficient unfoldings are
/// completed to an orthonormal basis.
pub fn data_dependent(a: &Tensor3) -> Result<Transform> {
    if a.data().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("data-dependent transform of a zero tensor".into()));
    }
    let unfolded = mode3_unfold(a);
    let n3 = unfolded.nrows();
    let svd = ThinSvd::new(&unfolded);
    let tol = svd.s[0] * 1e-12;
    let keep = svd.s.iter().take_while(|&&s| s > tol).count();
    let z = complete_basis(&svd.u.columns(0, keep).into_owned(), n3);
    Transform::new(z.transpose(), TransformKind::DataDependent)
}

/// Permutation matrix `P` with `P[i, perm[i]] = 1`, so `(P M)` row `i` is
/// row `perm[i]` of `M`.
pub fn permutation_matrix(perm: &[usize]) -> Result<Matrix> {
    let n = perm.len();
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(Matrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 }))
}

pub fn permutation(perm: &[usize]) -> Result<Transform> {
    Transform::new(permutation_matrix(perm)?, TransformKind::Permutation)
}

/// True iff `m` is square and `‖MᵀM − I‖_F ≤ 1e-10`.
pub fn validate(m: &Matrix) -> bool {
    m.is_square() && m.nrows() > 0 && orthogonality_residual(m) <= ORTHOGONALITY_TOL
}

/// A transform recipe, as written on the command line or in a config file:
/// `identity`, `dct`, `random:SEED`, `data`, `perm:2,0,1` or `file:PATH`.
#[derive(Clone, Debug, PartialEq)]
pub enum TransformSpec {
    Identity,
    Dct,
    RandomOrthogonal(u64),
    DataDependent,
    Permutation(Vec<usize>),
    FromFile(PathBuf),
}

impl TransformSpec {
    /// Materializes the matrix for transforms of size `n3`; `data` is needed
    /// for the data-dependent choice.
    pub fn build(&self, n3: usize, data: Option<&Tensor3>) -> Result<Transform> {
        let t = match self {
            TransformSpec::Identity => identity(n3),
            TransformSpec::Dct => dct(n3),
            TransformSpec::RandomOrthogonal(seed) => random_orthogonal(n3, *seed),
            TransformSpec::DataDependent => {
                let a = data.ok_or_else(|| Error::InvalidArgument("data-dependent transform needs a data tensor".into()))?;
                data_dependent(a)?
            }
            TransformSpec::Permutation(p) => permutation(p)?,
            TransformSpec::FromFile(path) => {
                let m = crate::harness::io::read_matrix(path)?;
                Transform::new(m, TransformKind::Custom)?
            }
        };
        if t.n3() != n3 {
            return Err(Error::DimensionMismatch(format!("transform is {0}×{0}, data needs {1}×{1}", t.n3(), n3)));
        }
        Ok(t)
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized transform '{s}'"));
        match s {
            "identity" => return Ok(TransformSpec::Identity),
            "dct" => return Ok(TransformSpec::Dct),
            "data" => return Ok(TransformSpec::DataDependent),
            _ => {}
        }
        let (head, tail) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "random" => Ok(TransformSpec::RandomOrthogonal(tail.parse().map_err(|_| bad())?)),
            "file" => Ok(TransformSpec::FromFile(PathBuf::from(tail))),
            "perm" => {
                let p = tail
                    .split(',')
                    .map(|v| v.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                Ok(TransformSpec::Permutation(p))
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransformSpec::Identity => write!(f, "identity"),
            TransformSpec::Dct => write!(f, "dct"),
            TransformSpec::RandomOrthogonal(s) => write!(f, "random:{s}"),
            TransformSpec::DataDependent => write!(f, "data"),
            TransformSpec::Permutation(p) => {
                let parts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "perm:{}", parts.join(","))
            }
            TransformSpec::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::mode3_fold;
    use approx::assert_relative_eq;

    #[test]
    fn identity_cases() {
        assert_eq!(identity(1).matrix(), &Matrix::identity(1, 1));
        assert_eq!(identity(3).matrix(), &Matrix::identity(3, 3));
        assert_eq!(identity(3).orthogonality_residual(), 0.0);
    }

    #[test]
    fn dct_small_cases() {
        assert_relative_eq!(dct(1).matrix()[(0, 0)], 1.0, epsilon = 1e-15);
        let h = 1.0 / 2f64.sqrt();
        let expected = Matrix::from_row_slice(2, 2, &[h, h, h, -h]);
        assert_relative_eq!(dct(2).matrix().clone(), expected, epsilon = 1e-15);
    }

    #[test]
    fn dct_is_orthonormal() {
        for n in [2, 4, 8, 16] {
            let m = dct(n);
            assert!(m.orthogonality_residual() <= 1e-12);
            for row in m.matrix().row_iter() {
                assert_relative_eq!(row.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn random_orthogonal_is_deterministic() {
        let a = random_orthogonal(6, 42);
        let b = random_orthogonal(6, 42);
        assert_eq!(a, b);
        assert!(a.orthogonality_residual() <= 1e-12);
        let det = a.matrix().determinant();
        assert!((det.abs() - 1.0).abs() <= 1e-10);
        assert_ne!(random_orthogonal(6, 43).matrix(), a.matrix());
    }

    #[test]
    fn data_dependent_recovers_orthogonal_rows() {
        // unfold₃(A) = diag(3, 2, 1) Q for an orthogonal Q (n3 = 3, n1 n2 = 3).
        let q = random_orthogonal(3, 5).into_matrix();
        let w = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let rot = random_orthogonal(3, 6).into_matrix();
        let unfolded = &rot * &w * &q;
        let a = mode3_fold(&unfolded, (3, 1, 3)).unwrap();
        let m = data_dependent(&a).unwrap();
        assert!(m.orthogonality_residual() <= 1e-10);
        // Rows of M are the columns of rot, up to sign.
        for i in 0..3 {
            let row = m.matrix().row(i).transpose();
            let col = rot.column(i);
            assert_relative_eq!(row.dot(&col).abs(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn data_dependent_orders_slice_energy() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor3::random_normal((2, 3, 5), &mut rng);
        let m = data_dependent(&a).unwrap();
        assert!(m.orthogonality_residual() <= 1e-10);
        let a_hat = m.forward(&a).unwrap();
        let energies: Vec<f64> = (0..5).map(|k| a_hat.slice(k).norm()).collect();
        for w in energies.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        assert!(data_dependent(&Tensor3::zeros((2, 2, 2))).is_err());
    }

    #[test]
    fn data_dependent_completes_rank_deficient_unfolding() {
        // n1 n2 = 2 < n3 = 4: the left factor must be completed.
        let a = Tensor3::new((2, 1, 4), (0..8).map(|v| v as f64 + 1.0).collect()).unwrap();
        let m = data_dependent(&a).unwrap();
        assert_eq!(m.n3(), 4);
        assert!(m.orthogonality_residual() <= 1e-10);
    }

    #[test]
    fn validate_cases() {
        assert!(validate(&Matrix::identity(3, 3)));
        assert!(validate(dct(5).matrix()));
        assert!(!validate(&Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])));
        assert!(!validate(&Matrix::zeros(2, 3)));
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("identity".parse::<TransformSpec>().unwrap(), TransformSpec::Identity);
        assert_eq!("random:7".parse::<TransformSpec>().unwrap(), TransformSpec::RandomOrthogonal(7));
        assert_eq!("perm:1,0".parse::<TransformSpec>().unwrap(), TransformSpec::Permutation(vec![1, 0]));
        assert!("random:x".parse::<TransformSpec>().is_err());
        assert!("fourier".parse::<TransformSpec>().is_err());
        let spec: TransformSpec = "dct".parse().unwrap();
        assert_eq!(spec.to_string(), "dct");
        assert!(permutation(&[0, 0]).is_err());
        let p = permutation(&[2, 0, 1]).unwrap();
        assert_eq!(p.matrix()[(0, 2)], 1.0);
    }
}
