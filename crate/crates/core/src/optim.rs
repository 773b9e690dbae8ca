//! Riemannian gradient descent over the orthogonal group for the reduced
//! (variable-projection) objectives, and an alternating-descent baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_starm, tsvdm_grad_wrt_m, GradContext};
use crate::error::{Error, Result};
use crate::linalg::{expm, orthogonality_residual, polar_orthogonal, skew_part, Matrix};
use crate::tensor::{starm_product, Tensor3, Transform, TransformKind, ORTHOGONALITY_TOL};
use crate::tsvdm::{check_truncation, solve_regularized};

#[derive(Clone, Debug)]
pub enum Objective {
    /// `½‖A ⋆_M X − B‖_F² + λ/2 ‖X‖_F²`, minimized over `X`.
    Regression { a: Tensor3, b: Tensor3, lambda: f64 },
    /// `½‖A − A_k(M)‖_F²` with the optimal t-rank-`k` approximation.
    LowRank { a: Tensor3, k: usize },
}

impl Objective {
    pub fn regression(a: Tensor3, b: Tensor3, lambda: f64) -> Result<Self> {
        if a.n1() != b.n1() || a.n3() != b.n3() {
            return Err(Error::DimensionMismatch(format!("regression model {:?} and observations {:?}", a.dims(), b.dims())));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("regularization must be nonnegative, got {lambda}")));
        }
        Ok(Objective::Regression { a, b, lambda })
    }

    pub fn low_rank(a: Tensor3, k: usize) -> Result<Self> {
        check_truncation(k, a.dims())?;
        Ok(Objective::LowRank { a, k })
    }

    pub fn n3(&self) -> usize {
        match self {
            Objective::Regression { a, .. } | Objective::LowRank { a, .. } => a.n3(),
        }
    }

    /// The data tensor `A`.
    pub fn data(&self) -> &Tensor3 {
        match self {
            Objective::Regression { a, .. } | Objective::LowRank { a, .. } => a,
        }
    }
}

/// Reduced objective value with the inner solution `X(M)` (for the low-rank
/// objective, `X(M) = A_k(M)`).
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub x: Tensor3,
    ctx: Option<GradContext>,
}

fn as_transform(m: &Matrix) -> Result<Transform> {
    Transform::new(m.clone(), TransformKind::Learned)
}

pub fn reduced_objective(obj: &Objective, m: &Transform) -> Result<Evaluation> {
    match obj {
        Objective::Regression { a, b, lambda } => {
            let x = solve_regularized(a, b, m, *lambda)?;
            let value = regression_value(a, b, *lambda, &x, m)?;
            Ok(Evaluation { value, x, ctx: None })
        }
        Objective::LowRank { a, k } => {
            let ctx = GradContext::new(a, m, *k)?;
            let x = ctx.low_rank(m)?;
            let value = 0.5 * (a - &x).frobenius_norm().powi(2);
            Ok(Evaluation { value, x, ctx: Some(ctx) })
        }
    }
}

/// Full objective `Φ(M, X)` of the regression problem.
pub fn regression_value(a: &Tensor3, b: &Tensor3, lambda: f64, x: &Tensor3, m: &Transform) -> Result<f64> {
    let r = &starm_product(a, x, m)? - b;
    let mut v = 0.5 * r.frobenius_norm().powi(2);
    if lambda > 0.0 {
        v += 0.5 * lambda * x.frobenius_norm().powi(2);
    }
    Ok(v)
}

/// Partial gradients of the regression objective at a fixed `X`.
pub struct RegressionPartials {
    pub dm: Matrix,
    pub dx: Tensor3,
}

pub fn regression_partials(a: &Tensor3, b: &Tensor3, lambda: f64, x: &Tensor3, m: &Transform) -> Result<RegressionPartials> {
    let r = &starm_product(a, x, m)? - b;
    let g = grad_starm(&r, a, x, m)?;
    let dx = if lambda > 0.0 { g.db.axpy(lambda, x) } else { g.db };
    Ok(RegressionPartials { dm: g.dm, dx })
}

/// Euclidean gradient of the reduced objective at `M`. Because `X(M)` is an
/// inner optimum, this is the partial derivative in `M` at fixed `X(M)`.
pub fn euclidean_gradient(obj: &Objective, m: &Transform, eval: &Evaluation) -> Result<Matrix> {
    match obj {
        Objective::Regression { a, b, lambda } => Ok(regression_partials(a, b, *lambda, &eval.x, m)?.dm),
        Objective::LowRank { a, k } => {
            let fresh;
            let ctx = match &eval.ctx {
                Some(c) => c,
                None => {
                    fresh = GradContext::new(a, m, *k)?;
                    &fresh
                }
            };
            let resid = &eval.x - a;
            Ok(tsvdm_grad_wrt_m(&resid, a, m, *k, ctx)?.grad)
        }
    }
}

/// `Ω = (MᵀG − GᵀM)/2`.
pub fn tangent_skew(m: &Matrix, g: &Matrix) -> Matrix {
    skew_part(&(m.transpose() * g))
}

/// Projection of `G` onto the tangent space at `M`: `MΩ`.
pub fn riemannian_gradient(m: &Matrix, g: &Matrix) -> Matrix {
    m * tangent_skew(m, g)
}

/// Exponential retraction `M exp(Ω)`. A slightly non-skew `Ω` is replaced by
/// its skew part.
pub fn retract(m: &Matrix, omega: &Matrix) -> Matrix {
    let asym = (omega + omega.transpose()).norm() * 0.5;
    let omega = if asym > 0.0 {
        if asym > 1e-12 {
            log::warn!("retraction input is not skew-symmetric (symmetric part {asym:.3e}); symmetrizing");
        }
        skew_part(omega)
    } else {
        omega.clone()
    };
    m * expm(&omega)
}

fn reorthonormalize(m: Matrix) -> Matrix {
    if orthogonality_residual(&m) > ORTHOGONALITY_TOL {
        polar_orthogonal(&m)
    } else {
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    Fixed {
        alpha: f64,
    },
    Backtracking {
        alpha0: f64,
        rho: f64,
        c: f64,
        max_backtracks: usize,
        /// Start each search at `min(alpha0, previous step / rho)` instead of
        /// `alpha0`.
        #[serde(default)]
        warm_start: bool,
    },
}

impl StepRule {
    pub fn backtracking() -> Self {
        StepRule::Backtracking { alpha0: 1.0, rho: 0.5, c: 1e-4, max_backtracks: 50, warm_start: false }
    }

    pub fn warm_backtracking() -> Self {
        StepRule::Backtracking { alpha0: 1.0, rho: 0.5, c: 1e-4, max_backtracks: 50, warm_start: true }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("fixed step must be positive, got {alpha}")))
            }
            StepRule::Backtracking { alpha0, rho, c, .. } => {
                if !(alpha0 > 0.0 && alpha0.is_finite()) {
                    Err(Error::Config(format!("alpha0 must be positive, got {alpha0}")))
                } else if !(rho > 0.0 && rho < 1.0) {
                    Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")))
                } else if !(c > 0.0 && c < 1.0) {
                    Err(Error::Config(format!("c must lie in (0, 1), got {c}")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for StepRule {
    type Err = Error;

    /// `backtrack`, `backtrack:warm` or `fixed:ALPHA`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backtrack" | "backtracking" => return Ok(StepRule::backtracking()),
            "backtrack:warm" | "backtracking:warm" => return Ok(StepRule::warm_backtracking()),
            _ => {}
        }
        match s.split_once(':') {
            Some(("fixed", a)) => a
                .parse()
                .map(|alpha| StepRule::Fixed { alpha })
                .map_err(|_| Error::InvalidArgument(format!("bad step size in '{s}'"))),
            _ => Err(Error::InvalidArgument(format!("unrecognized step rule '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    Riemannian,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step: StepRule,
    pub stop: StopCriterion,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iters: 1000,
            grad_tol: 1e-10,
            step: StepRule::backtracking(),
            stop: StopCriterion::Riemannian,
            seed: 0,
            log_every: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol >= 0.0) {
            return Err(Error::Config(format!("grad_tol must be nonnegative, got {}", self.grad_tol)));
        }
        self.step.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub riem_grad_norm: f64,
    pub eucl_grad_norm: f64,
    /// Step length that produced this iterate (0 for the starting point).
    pub step: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct OptimTrace {
    pub records: Vec<IterRecord>,
    pub m: Transform,
    pub x: Tensor3,
    pub status: Status,
    /// Largest `‖MᵀM − I‖_F` seen over all iterates.
    pub max_orthogonality_residual: f64,
}

impl OptimTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map(|r| r.iter).unwrap_or(0)
    }
}

fn log_record(cfg: &OptimConfig, rec: &IterRecord) {
    if cfg.log_every > 0 && rec.iter.is_multiple_of(cfg.log_every) {
        log::info!(
            "iter {:>6}  obj {:.6e}  |grad_R| {:.3e}  |grad_E| {:.3e}  step {:.3e}",
            rec.iter,
            rec.objective,
            rec.riem_grad_norm,
            rec.eucl_grad_norm,
            rec.step
        );
    }
}

/// Riemannian gradient descent on the reduced objective starting at `m0`.
pub fn optimize(obj: &Objective, m0: &Transform, cfg: &OptimConfig) -> Result<OptimTrace> {
    optimize_with(obj, m0, cfg, |_, _| {})
}

/// As [`optimize`], calling `observe` with every recorded iterate.
pub fn optimize_with(
    obj: &Objective,
    m0: &Transform,
    cfg: &OptimConfig,
    mut observe: impl FnMut(&IterRecord, &Matrix),
) -> Result<OptimTrace> {
    cfg.validate()?;
    if m0.n3() != obj.n3() {
        return Err(Error::DimensionMismatch(format!("initial transform is {0}×{0}, data needs n3 = {1}", m0.n3(), obj.n3())));
    }
    let start = Instant::now();
    let mut m = m0.matrix().clone();
    let mut t = m0.clone().with_kind(TransformKind::Learned);
    let mut eval = reduced_objective(obj, &t)?;
    let mut records = Vec::new();
    let mut max_resid = orthogonality_residual(&m);
    let mut step_taken = 0.0;
    let mut status = Status::MaxIters;

    for iter in 0..=cfg.max_iters {
        let g = euclidean_gradient(obj, &t, &eval)?;
        let omega = tangent_skew(&m, &g);
        let riem = omega.norm();
        let rec = IterRecord {
            iter,
            objective: eval.value,
            riem_grad_norm: riem,
            eucl_grad_norm: g.norm(),
            step: step_taken,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        log_record(cfg, &rec);
        observe(&rec, &m);
        let gate = match cfg.stop {
            StopCriterion::Riemannian => rec.riem_grad_norm,
            StopCriterion::Euclidean => rec.eucl_grad_norm,
        };
        records.push(rec);
        if gate <= cfg.grad_tol {
            status = Status::Converged;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }

        let accepted = match cfg.step {
            StepRule::Fixed { alpha } => {
                let cand = reorthonormalize(retract(&m, &(&omega * -alpha)));
                let ct = as_transform(&cand)?;
                let ce = reduced_objective(obj, &ct)?;
                Some((alpha, cand, ct, ce))
            }
            StepRule::Backtracking { alpha0, rho, c, max_backtracks, warm_start } => {
                let mut step = if warm_start && step_taken > 0.0 { (step_taken / rho).min(alpha0) } else { alpha0 };
                let mut found = None;
                for _ in 0..=max_backtracks {
                    let cand = reorthonormalize(retract(&m, &(&omega * -step)));
                    let ct = as_transform(&cand)?;
                    let ce = reduced_objective(obj, &ct)?;
                    if ce.value <= eval.value - c * step * riem * riem {
                        found = Some((step, cand, ct, ce));
                        break;
                    }
                    step *= rho;
                }
                found
            }
        };
        match accepted {
            Some((step, cand, ct, ce)) => {
                step_taken = step;
                m = cand;
                t = ct;
                eval = ce;
                max_resid = max_resid.max(orthogonality_residual(&m));
            }
            None => {
                log::warn!("line search failed at iteration {iter}");
                status = Status::LineSearchFailed;
                break;
            }
        }
    }
    Ok(OptimTrace { records, m: t, x: eval.x, status, max_orthogonality_residual: max_resid })
}

/// Alternating descent on the full regression objective: a gradient step in
/// `X` followed by a Riemannian gradient step in `M`, each with its own line
/// search when backtracking is configured.
pub fn alternating_descent(obj: &Objective, m0: &Transform, x0: &Tensor3, cfg: &OptimConfig) -> Result<OptimTrace> {
    cfg.validate()?;
    let (a, b, lambda) = match obj {
        Objective::Regression { a, b, lambda } => (a, b, *lambda),
        Objective::LowRank { .. } => {
            return Err(Error::InvalidArgument("alternating descent needs a regression objective".into()))
        }
    };
    if x0.dims() != (a.n2(), b.n2(), a.n3()) {
        return Err(Error::DimensionMismatch(format!(
            "initial representation {:?}, expected {:?}",
            x0.dims(),
            (a.n2(), b.n2(), a.n3())
        )));
    }
    if m0.n3() != a.n3() {
        return Err(Error::DimensionMismatch(format!("initial transform is {0}×{0}, data needs n3 = {1}", m0.n3(), a.n3())));
    }
    let start = Instant::now();
    let mut m = m0.matrix().clone();
    let mut t = m0.clone().with_kind(TransformKind::Learned);
    let mut x = x0.clone();
    let mut value = regression_value(a, b, lambda, &x, &t)?;
    let mut records = Vec::new();
    let mut max_resid = orthogonality_residual(&m);
    let mut step_taken = 0.0;
    let mut status = Status::MaxIters;

    for iter in 0..=cfg.max_iters {
        let p = regression_partials(a, b, lambda, &x, &t)?;
        let omega = tangent_skew(&m, &p.dm);
        let riem = (omega.norm_squared() + p.dx.frobenius_norm().powi(2)).sqrt();
        let eucl = (p.dm.norm_squared() + p.dx.frobenius_norm().powi(2)).sqrt();
        let rec = IterRecord {
            iter,
            objective: value,
            riem_grad_norm: riem,
            eucl_grad_norm: eucl,
            step: step_taken,
            elapsed_s: start.elapsed().as_secs_f64(),
        };
        log_record(cfg, &rec);
        let gate = match cfg.stop {
            StopCriterion::Riemannian => riem,
            StopCriterion::Euclidean => eucl,
        };
        records.push(rec);
        if gate <= cfg.grad_tol {
            status = Status::Converged;
            break;
        }
        if iter == cfg.max_iters {
            break;
        }

        // X update.
        let gx2 = p.dx.frobenius_norm().powi(2);
        let x_step = match cfg.step {
            StepRule::Fixed { alpha } => {
                let cand = x.axpy(-alpha, &p.dx);
                let v = regression_value(a, b, lambda, &cand, &t)?;
                Some((cand, v))
            }
            StepRule::Backtracking { alpha0, rho, c, max_backtracks, .. } => {
                let mut beta = alpha0;
                let mut found = None;
                for _ in 0..=max_backtracks {
                    let cand = x.axpy(-beta, &p.dx);
                    let v = regression_value(a, b, lambda, &cand, &t)?;
                    if v <= value - c * beta * gx2 {
                        found = Some((cand, v));
                        break;
                    }
                    beta *= rho;
                }
                found
            }
        };
        let Some((x_new, v_new)) = x_step else {
            log::warn!("representation line search failed at iteration {iter}");
            status = Status::LineSearchFailed;
            break;
        };
        x = x_new;
        value = v_new;

        // M update with the new X held fixed.
        let dm = regression_partials(a, b, lambda, &x, &t)?.dm;
        let omega = tangent_skew(&m, &dm);
        let om2 = omega.norm_squared();
        let m_step = match cfg.step {
            StepRule::Fixed { alpha } => {
                let cand = reorthonormalize(retract(&m, &(&omega * -alpha)));
                let ct = as_transform(&cand)?;
                let v = regression_value(a, b, lambda, &x, &ct)?;
                Some((alpha, cand, ct, v))
            }
            StepRule::Backtracking { alpha0, rho, c, max_backtracks, .. } => {
                let mut step = alpha0;
                let mut found = None;
                for _ in 0..=max_backtracks {
                    let cand = reorthonormalize(retract(&m, &(&omega * -step)));
                    let ct = as_transform(&cand)?;
                    let v = regression_value(a, b, lambda, &x, &ct)?;
                    if v <= value - c * step * om2 {
                        found = Some((step, cand, ct, v));
                        break;
                    }
                    step *= rho;
                }
                found
            }
        };
        let Some((step, cand, ct, v)) = m_step else {
            log::warn!("transform line search failed at iteration {iter}");
            status = Status::LineSearchFailed;
            break;
        };
        step_taken = step;
        m = cand;
        t = ct;
        value = v;
        max_resid = max_resid.max(orthogonality_residual(&m));
    }
    Ok(OptimTrace { records, m: t, x, status, max_orthogonality_residual: max_resid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, FdMode};
    use crate::harness::experiments::{angle_objective, angle_rotation, angle_value};
    use crate::transforms;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn value_at(obj: &Objective, q: &Matrix) -> f64 {
        reduced_objective(obj, &Transform::new(q.clone(), TransformKind::Custom).unwrap()).unwrap().value
    }

    #[test]
    fn angle_closed_form() {
        let obj = angle_objective();
        for theta in [0.0, PI / 8.0, PI / 4.0, 0.37, 2.0] {
            let v = value_at(&obj, angle_rotation(theta).matrix());
            assert_relative_eq!(v, 3.0 - 16.0 / (7.0 + (4.0 * theta).cos()), epsilon = 1e-10);
            assert_relative_eq!(v, angle_value(theta), epsilon = 1e-10);
        }
        assert_relative_eq!(value_at(&obj, angle_rotation(0.0).matrix()), 1.0, epsilon = 1e-12);
        assert_relative_eq!(value_at(&obj, angle_rotation(PI / 4.0).matrix()), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn angle_derivative() {
        let obj = angle_objective();
        let j = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        for theta in [0.1, PI / 8.0, 0.9, 2.3] {
            let t = angle_rotation(theta);
            let eval = reduced_objective(&obj, &t).unwrap();
            let g = euclidean_gradient(&obj, &t, &eval).unwrap();
            // dQ/dθ = Q J.
            let deriv = g.dot(&(t.matrix() * &j));
            let c = 7.0 + (4.0 * theta).cos();
            assert_relative_eq!(deriv, -64.0 * (4.0 * theta).sin() / (c * c), epsilon = 1e-8);
        }
    }

    #[test]
    fn low_rank_value_without_truncation_is_zero() {
        let a = Tensor3::random_normal((3, 2, 4), &mut rng(1));
        let obj = Objective::low_rank(a, 2).unwrap();
        let eval = reduced_objective(&obj, &transforms::dct(4)).unwrap();
        assert!(eval.value <= 1e-24);
        assert!(Objective::low_rank(Tensor3::zeros((3, 2, 4)), 3).is_err());
    }

    #[test]
    fn regression_at_constructed_optimum() {
        let mut r = rng(2);
        let m = transforms::random_orthogonal(3, 5);
        let a = Tensor3::random_normal((6, 2, 3), &mut r);
        let x0 = Tensor3::random_normal((2, 3, 3), &mut r);
        let b = starm_product(&a, &x0, &m).unwrap();
        let obj = Objective::regression(a, b.clone(), 0.0).unwrap();
        let eval = reduced_objective(&obj, &m).unwrap();
        assert!(eval.value <= 1e-16 * b.frobenius_norm().powi(2));
        let g = euclidean_gradient(&obj, &m, &eval).unwrap();
        assert!(g.norm() <= 1e-12 * b.frobenius_norm().powi(2));
    }

    #[test]
    fn reduced_gradients_match_geodesic_differences() {
        for seed in 0..20u64 {
            let mut r = rng(10 + seed);
            let m = transforms::random_orthogonal(4, seed);
            let a = Tensor3::random_normal((6, 2, 4), &mut r);
            let b = Tensor3::random_normal((6, 2, 4), &mut r);
            for lambda in [0.0, 0.1] {
                let obj = Objective::regression(a.clone(), b.clone(), lambda).unwrap();
                let eval = reduced_objective(&obj, &m).unwrap();
                let g = euclidean_gradient(&obj, &m, &eval).unwrap();
                let err = finite_diff_check(|q| value_at(&obj, q), m.matrix(), &g, FdMode::Geodesic, seed);
                assert!(err <= 1e-5, "regression seed {seed}, lambda {lambda}: {err}");
            }
            let a = Tensor3::random_normal((4, 3, 4), &mut r);
            let obj = Objective::low_rank(a, 1 + (seed as usize % 2)).unwrap();
            let eval = reduced_objective(&obj, &m).unwrap();
            let g = euclidean_gradient(&obj, &m, &eval).unwrap();
            let err = finite_diff_check(|q| value_at(&obj, q), m.matrix(), &g, FdMode::Geodesic, seed);
            assert!(err <= 1e-5, "low-rank seed {seed}: {err}");
        }
    }

    #[test]
    fn riemannian_gradient_cases() {
        let i3 = Matrix::identity(3, 3);
        let s = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(riemannian_gradient(&i3, &s).norm(), 0.0);
        let k = skew_part(&Matrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, -3.0, 0.0, 4.0, 1.0, 2.0, 0.0]));
        assert_relative_eq!(riemannian_gradient(&i3, &k), k, epsilon = 1e-15);
        let m = transforms::random_orthogonal(4, 3).into_matrix();
        let g = Matrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64).sin());
        let omega = m.transpose() * riemannian_gradient(&m, &g);
        assert!((&omega + omega.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn retraction_cases() {
        let m = transforms::random_orthogonal(4, 4).into_matrix();
        assert_relative_eq!(retract(&m, &Matrix::zeros(4, 4)), m, epsilon = 0.0);
        let theta = 0.7;
        let omega = Matrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let rot = retract(&Matrix::identity(2, 2), &omega);
        assert_relative_eq!(rot, angle_rotation(theta).into_matrix(), epsilon = 1e-14);
        let g = Matrix::from_fn(4, 4, |i, j| ((3 * i + j) as f64).cos() * 3.0);
        let out = retract(&m, &skew_part(&g));
        assert!(orthogonality_residual(&out) <= 1e-10);
        // A non-skew input is symmetrized rather than rejected.
        let out = retract(&m, &g);
        assert!(orthogonality_residual(&out) <= 1e-10);
    }

    #[test]
    fn optimize_from_minimizer_stops_immediately() {
        let obj = angle_objective();
        let cfg = OptimConfig { grad_tol: 1e-8, step: StepRule::Fixed { alpha: 0.1 }, ..OptimConfig::default() };
        let trace = optimize(&obj, &angle_rotation(PI / 4.0), &cfg).unwrap();
        assert!(trace.iterations() <= 1);
        assert_eq!(trace.status, Status::Converged);
        assert!(trace.records.last().unwrap().riem_grad_norm <= 1e-8);
    }

    #[test]
    fn optimize_angle_fixed_step() {
        let obj = angle_objective();
        let cfg = OptimConfig { max_iters: 500, step: StepRule::Fixed { alpha: 0.1 }, ..OptimConfig::default() };
        let trace = optimize(&obj, &angle_rotation(PI / 8.0), &cfg).unwrap();
        let mm = trace.m.matrix();
        let theta = mm[(1, 0)].atan2(mm[(0, 0)]);
        assert!((theta - PI / 4.0).abs() <= 1e-4);
        assert_relative_eq!(trace.final_objective(), 1.0 / 3.0, epsilon = 1e-10);
        assert!(trace.max_orthogonality_residual <= 1e-8);
    }

    #[test]
    fn backtracking_is_monotone() {
        let mut r = rng(5);
        let a = Tensor3::random_normal((8, 2, 3), &mut r);
        let b = Tensor3::random_normal((8, 1, 3), &mut r);
        let obj = Objective::regression(a, b, 0.0).unwrap();
        let cfg = OptimConfig { max_iters: 50, ..OptimConfig::default() };
        let trace = optimize(&obj, &transforms::random_orthogonal(3, 1), &cfg).unwrap();
        for w in trace.records.windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
        assert!(trace.max_orthogonality_residual <= 1e-8);

        let cfg = OptimConfig { max_iters: 0, ..OptimConfig::default() };
        let trace = optimize(&obj, &transforms::identity(3), &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn regression_invariance_at_optimum() {
        let mut r = rng(6);
        let m = transforms::random_orthogonal(4, 7);
        let a = Tensor3::random_normal((10, 2, 4), &mut r);
        let b = Tensor3::random_normal((10, 2, 4), &mut r);
        let obj = Objective::regression(a, b, 0.0).unwrap();
        let cfg = OptimConfig { max_iters: 200, ..OptimConfig::default() };
        let trace = optimize(&obj, &m, &cfg).unwrap();
        let best = trace.m.matrix().clone();
        let base = value_at(&obj, &best);
        let p = transforms::permutation_matrix(&[2, 0, 3, 1]).unwrap();
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]));
        assert_relative_eq!(value_at(&obj, &(&p * &best)), base, epsilon = 1e-9);
        assert_relative_eq!(value_at(&obj, &(&d * &best)), base, epsilon = 1e-9);
    }

    #[test]
    fn alternating_step_matches_varpro_gradient() {
        let mut r = rng(8);
        let m = transforms::random_orthogonal(3, 2);
        let a = Tensor3::random_normal((8, 2, 3), &mut r);
        let b = Tensor3::random_normal((8, 2, 3), &mut r);
        let obj = Objective::regression(a.clone(), b.clone(), 0.0).unwrap();
        let eval = reduced_objective(&obj, &m).unwrap();
        let g = euclidean_gradient(&obj, &m, &eval).unwrap();
        let p = regression_partials(&a, &b, 0.0, &eval.x, &m).unwrap();
        assert_relative_eq!(p.dm, g, epsilon = 1e-12);
        assert!(p.dx.frobenius_norm() <= 1e-10);
    }

    #[test]
    fn alternating_descent_zero_gradient_start() {
        let m = transforms::dct(2);
        let a = Tensor3::random_normal((5, 2, 2), &mut rng(9));
        let x0 = Tensor3::random_normal((2, 1, 2), &mut rng(10));
        let b = starm_product(&a, &x0, &m).unwrap();
        let obj = Objective::regression(a, b, 0.0).unwrap();
        let cfg = OptimConfig { max_iters: 10, grad_tol: 1e-12, ..OptimConfig::default() };
        let trace = alternating_descent(&obj, &m, &x0, &cfg).unwrap();
        assert_eq!(trace.status, Status::Converged);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.m.matrix(), m.matrix());
        assert_eq!(trace.x, x0);
    }

    #[test]
    fn step_rule_parsing_and_validation() {
        assert_eq!("fixed:0.5".parse::<StepRule>().unwrap(), StepRule::Fixed { alpha: 0.5 });
        assert_eq!("backtrack".parse::<StepRule>().unwrap(), StepRule::backtracking());
        assert_eq!("backtrack:warm".parse::<StepRule>().unwrap(), StepRule::warm_backtracking());
        assert!("fixed:x".parse::<StepRule>().is_err());
        assert!(StepRule::Fixed { alpha: -1.0 }.validate().is_err());
        assert!(StepRule::Backtracking { alpha0: 1.0, rho: 1.5, c: 1e-4, max_backtracks: 5, warm_start: false }
            .validate()
            .is_err());
        assert!(StepRule::Backtracking { alpha0: 1.0, rho: 0.5, c: 0.0, max_backtracks: 5, warm_start: false }
            .validate()
            .is_err());
    }
}
