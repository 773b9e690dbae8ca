//! Command drivers, reports and file formats.

pub mod config;
pub mod experiments;
pub mod io;
pub mod wave;

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::optim::{optimize, IterRecord, Objective, OptimTrace};
use crate::tensor::{Tensor3, Transform};
use crate::tsvdm::{discarded_energy, tsvdm};
use config::{parse_transform, AngleConfig, OptimizeConfig, RomConfig, SyntheticConfig, TsvdmConfig};
use experiments::{run_angle, run_rom, run_synthetic, synthetic_regression, transformation_error};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TRACE_HEADER: &str = "iter,objective,riem_grad_norm,eucl_grad_norm,step,elapsed_s";

pub fn trace_csv(records: &[IterRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.riem_grad_norm),
            fmt_f64(r.eucl_grad_norm),
            fmt_f64(r.step),
            fmt_f64(r.elapsed_s)
        );
    }
    out
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    io::write_atomic(path, &bytes)
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn trace_summary(trace: &OptimTrace) -> Value {
    json!({
        "status": trace.status,
        "iterations": trace.iterations(),
        "final_objective": trace.final_objective(),
        "final_riem_grad_norm": trace.records.last().map(|r| r.riem_grad_norm),
        "max_orthogonality_residual": trace.max_orthogonality_residual,
    })
}

fn energy_fractions(a_hat: &Tensor3) -> Vec<f64> {
    let total = a_hat.frobenius_norm().powi(2);
    (0..a_hat.n3()).map(|k| if total == 0.0 { 0.0 } else { a_hat.slice_view(k).norm_squared() / total }).collect()
}

/// Truncated t-SVDM of a tensor file: writes `U.stm`, `S.stm`, `V.stm`,
/// `M.stmm` and `report.json` in the output directory.
pub fn run_tsvdm_command(cfg: &TsvdmConfig) -> Result<Value> {
    cfg.validate()?;
    let a = io::read_tensor(&cfg.input)?;
    let m = parse_transform(&cfg.transform, cfg.seed)?.build(a.n3(), Some(&a))?;
    let r = a.n1().min(a.n2());
    let k = cfg.k.unwrap_or(r);
    let factors = tsvdm(&a, &m)?.truncate(k)?;
    let ak = factors.reconstruct()?;
    let norm = a.frobenius_norm();
    let rel = if norm == 0.0 { 0.0 } else { (&a - &ak).frobenius_norm() / norm };
    let discarded = discarded_energy(&a, &m, k)?;
    ensure_dir(&cfg.output)?;
    io::write_tensor(&cfg.output.join("U.stm"), &factors.u, None)?;
    io::write_tensor(&cfg.output.join("S.stm"), &factors.s, None)?;
    io::write_tensor(&cfg.output.join("V.stm"), &factors.v, None)?;
    io::write_matrix(&cfg.output.join("M.stmm"), m.matrix())?;
    let a_hat = m.forward(&a)?;
    let ak_hat = m.forward(&ak)?;
    let captured: Vec<f64> = (0..a.n3())
        .map(|i| {
            let e = a_hat.slice_view(i).norm_squared();
            if e == 0.0 {
                1.0
            } else {
                ak_hat.slice_view(i).norm_squared() / e
            }
        })
        .collect();
    let report = json!({
        "command": "tsvdm",
        "dims": [a.n1(), a.n2(), a.n3()],
        "transform": cfg.transform,
        "k": k,
        "relative_error": rel,
        "discarded_energy": discarded,
        "slice_energy_fraction": energy_fractions(&a_hat),
        "slice_captured_fraction": captured,
        "singular_tube_norms": tsvdm(&a, &m)?.singular_tube_norms(),
    });
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

fn persist_trace(dir: &Path, trace: &OptimTrace) -> Result<()> {
    ensure_dir(dir)?;
    io::write_matrix(&dir.join("M.stmm"), trace.m.matrix())?;
    io::write_tensor(&dir.join("X.stm"), &trace.x, None)?;
    io::write_atomic(&dir.join("trace.csv"), trace_csv(&trace.records).as_bytes())
}

/// Learns `M` for a regression or low-rank objective read from tensor files.
pub fn run_optimize_command(cfg: &OptimizeConfig) -> Result<Value> {
    cfg.validate()?;
    let a = io::read_tensor(&cfg.input)?;
    let obj = match &cfg.observations {
        Some(p) => Objective::regression(a.clone(), io::read_tensor(p)?, cfg.lambda)?,
        None => Objective::low_rank(a.clone(), cfg.k.expect("validated"))?,
    };
    let m0 = parse_transform(&cfg.transform, cfg.seed)?.build(a.n3(), Some(&a))?;
    let trace = optimize(&obj, &m0, &cfg.optim)?;
    persist_trace(&cfg.output, &trace)?;
    let report = json!({
        "command": "optimize",
        "objective": if cfg.observations.is_some() { "regression" } else { "low_rank" },
        "initial_transform": cfg.transform,
        "initial_objective": trace.records.first().map(|r| r.objective),
        "trace": trace_summary(&trace),
    });
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// Angle trajectories: one CSV per starting angle plus a summary.
pub fn run_angle_command(cfg: &AngleConfig) -> Result<Value> {
    cfg.validate()?;
    ensure_dir(&cfg.output)?;
    let mut runs = Vec::new();
    for (idx, &theta0) in cfg.theta0.iter().enumerate() {
        let run = run_angle(theta0, cfg.alpha, cfg.iters, cfg.tol)?;
        let mut csv = String::from("iter,theta,objective,abs_derivative,riem_grad_norm\n");
        for j in 0..run.theta.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                j,
                fmt_f64(run.theta[j]),
                fmt_f64(run.objective[j]),
                fmt_f64(run.abs_derivative[j]),
                fmt_f64(run.riem_grad_norm[j])
            );
        }
        io::write_atomic(&cfg.output.join(format!("angle_{idx}.csv")), csv.as_bytes())?;
        runs.push(json!({
            "theta0": theta0,
            "final_theta": run.final_theta(),
            "nearest_minimizer": experiments::nearest_minimizer(run.final_theta()),
            "iterations": run.theta.len() - 1,
            "final_objective": run.objective.last(),
            "contraction_ratio": experiments::contraction_ratio(&run.riem_grad_norm, 20),
            "status": run.status,
        }));
    }
    let report = json!({ "command": "angle", "alpha": cfg.alpha, "runs": runs });
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// Synthetic regression with a DCT ground truth.
pub fn run_synthetic_command(cfg: &SyntheticConfig) -> Result<Value> {
    cfg.validate()?;
    let n3 = cfg.n3();
    let problem = synthetic_regression(n3, cfg.n1, cfg.noise, cfg.seed)?;
    let m0 = parse_transform(&cfg.transform, cfg.seed)?.build(n3, Some(&problem.a))?;
    let trace = run_synthetic(&problem, cfg.method, &m0, &cfg.optim)?;
    persist_trace(&cfg.output, &trace)?;
    let report = json!({
        "command": "synthetic",
        "n3": n3,
        "noise": cfg.noise,
        "method": cfg.method,
        "trace": trace_summary(&trace),
        "transformation_error": transformation_error(trace.m.matrix(), problem.m_true.matrix()),
        "elapsed_s": trace.records.last().map(|r| r.elapsed_s),
    });
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// Wave-equation snapshot compression with heuristic and learned transforms.
pub fn run_rom_command(cfg: &RomConfig) -> Result<Value> {
    cfg.validate()?;
    let inits = cfg.inits.iter().map(|s| parse_transform(s, cfg.seed)).collect::<Result<Vec<_>>>()?;
    let result = run_rom(&cfg.wave, cfg.k, &cfg.optim, &inits)?;
    ensure_dir(&cfg.output)?;
    let x = &result.snapshots.tensor;
    io::write_tensor(
        &cfg.output.join("snapshots.stm"),
        x,
        Some(&json!({"speeds": result.snapshots.speeds, "dt": result.snapshots.dt})),
    )?;
    let mut entries = Vec::new();
    for (idx, e) in result.heuristics.iter().chain(&result.learned).enumerate() {
        let stem = format!("transform_{idx}");
        io::write_matrix(&cfg.output.join(format!("{stem}.stmm")), e.transform.matrix())?;
        let basis = experiments::left_basis(x, &e.transform, cfg.k)?;
        io::write_tensor(&cfg.output.join(format!("{stem}_basis.stm")), &basis, None)?;
        if let Some(t) = &e.trace {
            io::write_atomic(&cfg.output.join(format!("{stem}_trace.csv")), trace_csv(&t.records).as_bytes())?;
        }
        let mut v = serde_json::to_value(e)?;
        v["file"] = json!(format!("{stem}.stmm"));
        if let Some(t) = &e.trace {
            v["trace"] = trace_summary(t);
        }
        entries.push(v);
    }
    let report = json!({
        "command": "rom",
        "dims": [x.n1(), x.n2(), x.n3()],
        "k": cfg.k,
        "speeds": result.snapshots.speeds,
        "dt": result.snapshots.dt,
        "substeps": result.snapshots.substeps,
        "best_heuristic_error": result.best_heuristic_error(),
        "transforms": entries,
    });
    write_json(&cfg.output.join("report.json"), &report)?;
    Ok(report)
}

/// Seeded synthetic tensor with low transform-domain rank.
pub fn run_generate_command(dims: (usize, usize, usize), rank: usize, noise: f64, seed: u64, output: &Path) -> Result<Value> {
    if !(noise >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise must be nonnegative, got {noise}")));
    }
    let (a, hidden): (Tensor3, Transform) = experiments::low_transform_rank_tensor(dims, rank, noise, seed)?;
    let meta = json!({"generator": "low_transform_rank", "rank": rank, "noise": noise, "seed": seed});
    io::write_tensor(output, &a, Some(&meta))?;
    Ok(json!({
        "command": "generate",
        "dims": [dims.0, dims.1, dims.2],
        "rank": rank,
        "noise": noise,
        "seed": seed,
        "hidden_transform_orthogonality": hidden.orthogonality_residual(),
    }))
}
