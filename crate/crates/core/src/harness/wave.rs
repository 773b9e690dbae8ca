//! Leapfrog finite-difference solver for `u_tt = c² u_xx` on `[-1, 1]` with
//! fixed ends, used to generate snapshot tensors (space × time × speed).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Courant number targeted when choosing the internal time step.
const COURANT: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    /// Interior grid nodes; the spacing is `2 / (n_space + 1)`.
    pub n_space: usize,
    /// Snapshots, equispaced on `[0, t_final]` including both ends.
    pub n_time: usize,
    pub t_final: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub n_speeds: usize,
}

impl Default for WaveConfig {
    fn default() -> Self {
        WaveConfig { n_space: 64, n_time: 31, t_final: 5.0, c_min: 0.1, c_max: 5.0, n_speeds: 50 }
    }
}

impl WaveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_space < 2 || self.n_time < 2 || self.n_speeds < 1 {
            return Err(Error::Config("wave grid needs n_space ≥ 2, n_time ≥ 2, n_speeds ≥ 1".into()));
        }
        if !(self.t_final > 0.0) || !(self.c_min > 0.0) || !(self.c_max >= self.c_min) {
            return Err(Error::Config("wave parameters need t_final > 0 and 0 < c_min ≤ c_max".into()));
        }
        Ok(())
    }

    pub fn speeds(&self) -> Vec<f64> {
        if self.n_speeds == 1 {
            return vec![self.c_min];
        }
        let step = (self.c_max - self.c_min) / (self.n_speeds - 1) as f64;
        (0..self.n_speeds).map(|i| self.c_min + step * i as f64).collect()
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_space).map(|i| -1.0 + h * (i + 1) as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.n_space + 1) as f64
    }
}

pub fn initial_displacement(x: f64) -> f64 {
    (0.5 * PI * x).cos().atan()
}

pub fn initial_velocity(x: f64) -> f64 {
    2.0 * (PI * x).sin()
}

/// Snapshot tensor plus the solver's internal step bookkeeping.
#[derive(Clone, Debug)]
pub struct Snapshots {
    pub tensor: Tensor3,
    pub speeds: Vec<f64>,
    /// Internal time step used for each speed.
    pub dt: Vec<f64>,
    /// Leapfrog steps between consecutive snapshots for each speed.
    pub substeps: Vec<usize>,
}

/// Solves one wave speed from the given initial displacement and velocity,
/// returning `n_space × n_time` snapshots (column-major), the internal time
/// step and the number of steps per snapshot interval.
pub fn simulate(cfg: &WaveConfig, c: f64, u0: impl Fn(f64) -> f64, v0: impl Fn(f64) -> f64) -> (Vec<f64>, f64, usize) {
    let n = cfg.n_space;
    let h = cfg.spacing();
    let interval = cfg.t_final / (cfg.n_time - 1) as f64;
    let max_dt = COURANT * h / c;
    let substeps = (interval / max_dt).ceil().max(1.0) as usize;
    let dt = interval / substeps as f64;
    let r2 = (c * dt / h).powi(2);
    let x = cfg.grid();

    let laplace = |u: &[f64], i: usize| {
        let left = if i == 0 { 0.0 } else { u[i - 1] };
        let right = if i + 1 == n { 0.0 } else { u[i + 1] };
        left - 2.0 * u[i] + right
    };

    let mut prev: Vec<f64> = x.iter().map(|&v| u0(v)).collect();
    let mut out = Vec::with_capacity(n * cfg.n_time);
    out.extend_from_slice(&prev);
    // Taylor start: u¹ = u⁰ + dt v⁰ + ½ (c dt / h)² L u⁰.
    let mut cur: Vec<f64> = (0..n).map(|i| prev[i] + dt * v0(x[i]) + 0.5 * r2 * laplace(&prev, i)).collect();
    let mut steps_done = 1;
    let total = substeps * (cfg.n_time - 1);
    for snap in 1..cfg.n_time {
        let target = snap * substeps;
        while steps_done < target {
            let next: Vec<f64> = (0..n).map(|i| 2.0 * cur[i] - prev[i] + r2 * laplace(&cur, i)).collect();
            prev = std::mem::replace(&mut cur, next);
            steps_done += 1;
        }
        out.extend_from_slice(&cur);
    }
    debug_assert_eq!(steps_done, total.max(1));
    (out, dt, substeps)
}

pub fn generate(cfg: &WaveConfig) -> Result<Snapshots> {
    cfg.validate()?;
    let speeds = cfg.speeds();
    let mut data = Vec::with_capacity(cfg.n_space * cfg.n_time * speeds.len());
    let mut dts = Vec::with_capacity(speeds.len());
    let mut subs = Vec::with_capacity(speeds.len());
    for &c in &speeds {
        let (snap, dt, substeps) = simulate(cfg, c, initial_displacement, initial_velocity);
        data.extend_from_slice(&snap);
        dts.push(dt);
        subs.push(substeps);
    }
    let tensor = Tensor3::new((cfg.n_space, cfg.n_time, speeds.len()), data)?;
    Ok(Snapshots { tensor, speeds, dt: dts, substeps: subs })
}
