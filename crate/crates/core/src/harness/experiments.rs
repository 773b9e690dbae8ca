//! Experiment drivers: the two-parameter angle problem, synthetic t-linear
//! regression with a DCT ground truth, snapshot-tensor compression (ROM) and
//! a synthetic low-transform-rank generator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::wave::{self, Snapshots, WaveConfig};
use crate::linalg::{Matrix, ThinSvd};
use crate::optim::{alternating_descent, optimize, optimize_with, Objective, OptimConfig, OptimTrace, Status, StepRule};
use crate::tensor::{facewise_product, Dims, Tensor3, Transform, TransformKind};
use crate::transforms::{self, TransformSpec};
use crate::tsvdm::{check_truncation, low_rank_approx, transform_singular_values};

// ---------------------------------------------------------------- angle

/// Data of the 3×2×2 / 3×1×2 regression problem whose reduced objective
/// over rotations is `3 − 16/(7 + cos 4θ)`.
pub fn angle_tensors() -> (Tensor3, Tensor3) {
    let a1 = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let a2 = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let a = Tensor3::from_slices(&[a1, a2]).expect("conformable slices");
    let b = Tensor3::from_fn((3, 1, 2), |_, _, _| 1.0);
    (a, b)
}

pub fn angle_objective() -> Objective {
    let (a, b) = angle_tensors();
    Objective::regression(a, b, 0.0).expect("conformable")
}

/// `Q(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn angle_rotation(theta: f64) -> Transform {
    let (s, c) = theta.sin_cos();
    Transform::new(Matrix::from_row_slice(2, 2, &[c, -s, s, c]), TransformKind::Custom).expect("rotation")
}

pub fn angle_value(theta: f64) -> f64 {
    3.0 - 16.0 / (7.0 + (4.0 * theta).cos())
}

pub fn angle_derivative(theta: f64) -> f64 {
    let c = 7.0 + (4.0 * theta).cos();
    -64.0 * (4.0 * theta).sin() / (c * c)
}

/// Angle of a 2×2 rotation, `atan2(M[1,0], M[0,0])`.
pub fn rotation_angle(m: &Matrix) -> f64 {
    m[(1, 0)].atan2(m[(0, 0)])
}

/// The minimizer `(2j + 1)π/4` closest to `theta`.
pub fn nearest_minimizer(theta: f64) -> f64 {
    let j = ((theta / (PI / 4.0) - 1.0) / 2.0).round();
    (2.0 * j + 1.0) * PI / 4.0
}

#[derive(Clone, Debug, Serialize)]
pub struct AngleRun {
    pub theta0: f64,
    pub theta: Vec<f64>,
    pub objective: Vec<f64>,
    pub abs_derivative: Vec<f64>,
    pub riem_grad_norm: Vec<f64>,
    pub status: Status,
}

impl AngleRun {
    pub fn final_theta(&self) -> f64 {
        *self.theta.last().expect("at least the starting point")
    }
}

/// Fixed-step Riemannian descent on `Q(θ)`, recording the angle of each
/// iterate.
pub fn run_angle(theta0: f64, alpha: f64, max_iters: usize, grad_tol: f64) -> Result<AngleRun> {
    let obj = angle_objective();
    let cfg = OptimConfig { max_iters, grad_tol, step: StepRule::Fixed { alpha }, ..OptimConfig::default() };
    let mut theta = Vec::new();
    let mut riem = Vec::new();
    let mut objective = Vec::new();
    // Angles are unwrapped so trajectories through ±π stay continuous.
    let trace = optimize_with(&obj, &angle_rotation(theta0), &cfg, |rec, m| {
        let mut t = rotation_angle(m);
        if let Some(&last) = theta.last() {
            let last: f64 = last;
            t += (2.0 * PI) * ((last - t) / (2.0 * PI)).round();
        } else {
            t += (2.0 * PI) * ((theta0 - t) / (2.0 * PI)).round();
        }
        theta.push(t);
        riem.push(rec.riem_grad_norm);
        objective.push(rec.objective);
    })?;
    let abs_derivative = theta.iter().map(|&t| angle_derivative(t).abs()).collect();
    Ok(AngleRun { theta0, theta, objective, abs_derivative, riem_grad_norm: riem, status: trace.status })
}

/// Geometric-mean ratio `‖g_j‖/‖g_{j−1}‖` over the last `window` steps.
pub fn contraction_ratio(norms: &[f64], window: usize) -> Option<f64> {
    if window == 0 || norms.len() < window + 1 {
        return None;
    }
    let tail = &norms[norms.len() - window - 1..];
    let (first, last) = (tail[0], tail[window]);
    if first <= 0.0 || last <= 0.0 {
        return None;
    }
    Some((last / first).powf(1.0 / window as f64))
}

// ------------------------------------------------- synthetic regression

#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub a: Tensor3,
    pub b: Tensor3,
    pub m_true: Transform,
}

/// Transform-domain slices `[1, z]` and `β_i + α_i z` with
/// `α_i = β_i = −1 + 2i/n3` (1-based `i`) and `z ~ U(−1, 1)`, mapped to the
/// spatial domain with the DCT and perturbed by `η` times standard normal
/// noise.
pub fn synthetic_regression(n3: usize, n1: usize, noise: f64, seed: u64) -> Result<SyntheticProblem> {
    if n3 == 0 || n1 == 0 {
        return Err(Error::InvalidArgument("synthetic regression needs positive sizes".into()));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a_hat = Tensor3::zeros((n1, 2, n3));
    let mut b_hat = Tensor3::zeros((n1, 1, n3));
    for i in 0..n3 {
        let coef = -1.0 + 2.0 * (i + 1) as f64 / n3 as f64;
        for r in 0..n1 {
            let z: f64 = rng.random_range(-1.0..1.0);
            a_hat.set(r, 0, i, 1.0);
            a_hat.set(r, 1, i, z);
            b_hat.set(r, 0, i, coef + coef * z);
        }
    }
    let m_true = transforms::dct(n3);
    let mut a = m_true.inverse(&a_hat)?;
    let mut b = m_true.inverse(&b_hat)?;
    if noise > 0.0 {
        a = a.axpy(noise, &Tensor3::random_normal(a.dims(), &mut rng));
        b = b.axpy(noise, &Tensor3::random_normal(b.dims(), &mut rng));
    }
    Ok(SyntheticProblem { a, b, m_true })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Largest transform size for which the equivalence-class error is computed.
pub const MAX_RECOVERY_N3: usize = 4;

/// `min ‖M − P D M_true‖_F` over row permutations `P` and sign matrices `D`;
/// `None` above [`MAX_RECOVERY_N3`].
pub fn transformation_error(m: &Matrix, m_true: &Matrix) -> Option<f64> {
    let n = m.nrows();
    if n > MAX_RECOVERY_N3 || m.shape() != m_true.shape() {
        return None;
    }
    let mut best = f64::INFINITY;
    for perm in permutations(n) {
        // For a fixed permutation the sign of each row is chosen independently.
        let mut total = 0.0;
        for (i, &p) in perm.iter().enumerate() {
            let plus = (m.row(i) - m_true.row(p)).norm_squared();
            let minus = (m.row(i) + m_true.row(p)).norm_squared();
            total += plus.min(minus);
        }
        best = best.min(total);
    }
    Some(best.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Varpro,
    Altdesc,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varpro" => Ok(Method::Varpro),
            "altdesc" => Ok(Method::Altdesc),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}' (varpro or altdesc)"))),
        }
    }
}

/// Runs one method on a synthetic problem. Alternating descent starts from
/// `X₀ = 0`.
pub fn run_synthetic(problem: &SyntheticProblem, method: Method, m0: &Transform, cfg: &OptimConfig) -> Result<OptimTrace> {
    let obj = Objective::regression(problem.a.clone(), problem.b.clone(), 0.0)?;
    match method {
        Method::Varpro => optimize(&obj, m0, cfg),
        Method::Altdesc => {
            let x0 = Tensor3::zeros((problem.a.n2(), problem.b.n2(), problem.a.n3()));
            alternating_descent(&obj, m0, &x0, cfg)
        }
    }
}

// ------------------------------------------- low-transform-rank tensors

/// Tensor whose slices are exactly rank `rank` under a hidden random
/// orthogonal transform, plus `noise` times standard normal entries.
pub fn low_transform_rank_tensor(dims: Dims, rank: usize, noise: f64, seed: u64) -> Result<(Tensor3, Transform)> {
    check_truncation(rank, dims)?;
    let hidden = transforms::random_orthogonal(dims.2, seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = Tensor3::random_normal((dims.0, rank, dims.2), &mut rng);
    let right = Tensor3::random_normal((rank, dims.1, dims.2), &mut rng);
    let a_hat = facewise_product(&left, &right)?;
    let mut a = hidden.inverse(&a_hat)?;
    if noise > 0.0 {
        a = a.axpy(noise, &Tensor3::random_normal(dims, &mut rng));
    }
    Ok((a, hidden))
}

// ------------------------------------------------------------------ ROM

/// `‖X − X_k‖_F / ‖X‖_F` globally and per frontal slice (parameter), where
/// `X_k = U_k ⋆_M U_kᵀ ⋆_M X`.
pub fn projection_errors(x: &Tensor3, m: &Transform, k: usize) -> Result<(f64, Vec<f64>)> {
    let xk = low_rank_approx(x, m, k)?;
    let diff = x - &xk;
    let global = diff.frobenius_norm() / x.frobenius_norm();
    let per = (0..x.n3())
        .map(|l| {
            let denom = x.slice_view(l).norm();
            if denom == 0.0 {
                0.0
            } else {
                diff.slice_view(l).norm() / denom
            }
        })
        .collect();
    Ok((global, per))
}

/// Percentage of each transform-domain slice's energy carried by each of
/// its singular values.
pub fn energy_percentages(x: &Tensor3, m: &Transform) -> Result<Vec<Vec<f64>>> {
    let svals = transform_singular_values(x, m)?;
    Ok(svals
        .iter()
        .map(|s| {
            let total: f64 = s.iter().map(|v| v * v).sum();
            if total == 0.0 {
                vec![0.0; s.len()]
            } else {
                s.iter().map(|v| 100.0 * v * v / total).collect()
            }
        })
        .collect())
}

pub fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RomEntry {
    pub name: String,
    pub global_error: f64,
    pub per_parameter_error: Vec<f64>,
    /// `[slice][j]`: percentage of slice energy in singular value `j`.
    pub energy_percent: Vec<Vec<f64>>,
    #[serde(skip)]
    pub transform: Transform,
    #[serde(skip)]
    pub trace: Option<OptimTrace>,
}

#[derive(Clone, Debug)]
pub struct RomResult {
    pub snapshots: Snapshots,
    pub k: usize,
    pub heuristics: Vec<RomEntry>,
    pub learned: Vec<RomEntry>,
}

impl RomResult {
    pub fn best_heuristic_error(&self) -> f64 {
        self.heuristics.iter().map(|e| e.global_error).fold(f64::INFINITY, f64::min)
    }
}

fn rom_entry(name: String, x: &Tensor3, m: Transform, k: usize, trace: Option<OptimTrace>) -> Result<RomEntry> {
    let (global_error, per_parameter_error) = projection_errors(x, &m, k)?;
    let energy_percent = energy_percentages(x, &m)?;
    Ok(RomEntry { name, global_error, per_parameter_error, energy_percent, transform: m, trace })
}

/// Generates snapshots, evaluates the heuristic transforms `I`, DCT and `Zᵀ`,
/// and learns `M` by low-t-rank optimization from each of `inits`.
pub fn run_rom(wave_cfg: &WaveConfig, k: usize, cfg: &OptimConfig, inits: &[TransformSpec]) -> Result<RomResult> {
    let snapshots = wave::generate(wave_cfg)?;
    let x = &snapshots.tensor;
    check_truncation(k, x.dims())?;
    let n3 = x.n3();
    let heuristic_specs =
        [("identity", TransformSpec::Identity), ("dct", TransformSpec::Dct), ("data", TransformSpec::DataDependent)];
    let mut heuristics = Vec::new();
    for (name, spec) in heuristic_specs {
        let m = spec.build(n3, Some(x))?;
        heuristics.push(rom_entry(name.to_string(), x, m, k, None)?);
    }
    let obj = Objective::low_rank(x.clone(), k)?;
    let mut learned = Vec::new();
    for spec in inits {
        let m0 = spec.build(n3, Some(x))?;
        let trace = optimize(&obj, &m0, cfg)?;
        let m = trace.m.clone();
        learned.push(rom_entry(format!("learned from {spec}"), x, m, k, Some(trace))?);
    }
    Ok(RomResult { snapshots, k, heuristics, learned })
}

/// Rank-`k` captured energy per slice, in percent.
pub fn captured_energy(p: &[Vec<f64>], k: usize) -> Vec<f64> {
    p.iter().map(|s| s.iter().take(k).sum()).collect()
}

/// Singular values of every transform-domain slice (for reports).
pub fn slice_spectra(x: &Tensor3, m: &Transform) -> Result<Vec<Vec<f64>>> {
    Ok(transform_singular_values(x, m)?.iter().map(|s| s.iter().cloned().collect()).collect())
}

/// Rank-`k` left factor `U_k` (n1×k×n3) under `M`, for persisting a basis.
pub fn left_basis(x: &Tensor3, m: &Transform, k: usize) -> Result<Tensor3> {
    check_truncation(k, x.dims())?;
    let x_hat = m.forward(x)?;
    let slices: Vec<Matrix> = (0..x.n3()).map(|i| ThinSvd::new(&x_hat.slice(i)).u.columns(0, k).into_owned()).collect();
    m.inverse(&Tensor3::from_slices(&slices)?)
}
