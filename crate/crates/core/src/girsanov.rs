//! Girsanov reweighting on the grid.
//!
//! For a driftless path `X = X_0 + Z` the drift is evaluated at left
//! endpoints, `B_i = Σ_{j<i} b(t_j, X_j) Δt`, carried to Brownian
//! coordinates by `q = K̃⁻¹ B / Δt`, and paired with `ΔW* = K̃⁻¹ (X - X_0)`:
//! `log Z_{t_i} = Σ_{j≤i} q_j ΔW*_j - ½ Σ_{j≤i} q_j² Δt`. Since `q_j` only
//! depends on the path before `t_{j-1}`, reweighting turns `X` into the
//! Euler scheme with drift, exactly in law.

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftFunctional;
use crate::error::{Error, Result};
use crate::paths::{bm_increments, drift_q_transform, fundamental_row, volterra_row, DiscretizedKernel, PathEnsemble, PathKind, TimeGrid};
use crate::rng::domain;
use crate::stats::{pairwise_sum, Estimate};

pub const DEFAULT_NOVIKOV_CAP: f64 = 0.25;

/// Estimates with fewer effective samples than this are flagged.
pub const MIN_ESS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NovikovPartition {
    /// `0 = i_0 < i_1 < … = N`.
    pub indices: Vec<usize>,
}

/// Greedy left-to-right partition with trapezoid mass per segment at most
/// `cap`.
pub fn novikov_partition(bound: &[f64], dt: f64, cap: f64) -> Result<NovikovPartition> {
    if bound.len() < 2 {
        return Err(Error::InvalidParameter("bound needs at least two grid values".into()));
    }
    if !(cap > 0.0) {
        return Err(Error::InvalidParameter(format!("cap must be positive, got {cap}")));
    }
    if let Some(v) = bound.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("bound must be non-negative, got {v}")));
    }
    let slack = cap * (1.0 + 1e-9);
    let mut indices = vec![0];
    let mut mass = 0.0;
    for k in 1..bound.len() {
        let step = 0.5 * (bound[k - 1] + bound[k]) * dt;
        if step > slack {
            return Err(Error::StepExceedsCap { step: k, mass: step, cap });
        }
        if mass + step > slack {
            indices.push(k - 1);
            mass = 0.0;
        }
        mass += step;
    }
    indices.push(bound.len() - 1);
    Ok(NovikovPartition { indices })
}

/// `B_0..B_N` from left-point drift values `b_0..b_{N-1}`.
pub fn cumulative_drift(drift_values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(drift_values.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for b in drift_values {
        acc += b * dt;
        out.push(acc);
    }
    out
}

/// `log Z_{t_0..t_N}` from `q_1..q_N` and `[0, ΔW*_1..ΔW*_N]`.
pub fn log_weight_process(q: &[f64], dw_star: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dw_star.len());
    let mut acc = 0.0;
    out.push(0.0);
    for (qj, dw) in q.iter().zip(&dw_star[1..]) {
        acc += qj * dw - 0.5 * qj * qj * dt;
        out.push(acc);
    }
    out
}

/// Per-path `log Z_{t_i}` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights {
    pub grid: TimeGrid,
    pub m: usize,
    pub values: Vec<f64>,
}

impl LogWeights {
    pub fn from_rows(grid: TimeGrid, rows: Vec<Vec<f64>>) -> Self {
        let m = rows.len();
        LogWeights { grid, m, values: rows.concat() }
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let w = self.grid.steps + 1;
        &self.values[p * w..(p + 1) * w]
    }

    /// `log Z_{t_i}` across paths.
    pub fn at(&self, i: usize) -> Vec<f64> {
        self.values.chunks(self.grid.steps + 1).map(|r| r[i]).collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.at(self.grid.steps)
    }
}

/// Weight process of one driftless path `x` under `drift`.
pub fn path_log_weights(kernel: &DiscretizedKernel, drift: &DriftFunctional, x: &[f64]) -> Result<Vec<f64>> {
    let grid = kernel.grid;
    let dt = grid.dt();
    let b: Vec<f64> = (0..grid.steps).map(|j| drift.eval(grid.t(j), x[j], None)).collect();
    let q = drift_q_transform(kernel, &cumulative_drift(&b, dt))?;
    let dw = fundamental_row(kernel, x)?;
    Ok(log_weight_process(&q, &dw, dt))
}

/// `log Z` at every node for every path of a driftless ensemble.
pub fn girsanov_log_weights(kernel: &DiscretizedKernel, drift: &DriftFunctional, paths: &PathEnsemble) -> Result<LogWeights> {
    if paths.kind != PathKind::VolterraPath {
        return Err(Error::ShapeMismatch(format!("expected driftless paths, got {:?}", paths.kind)));
    }
    if paths.grid != kernel.grid {
        return Err(Error::ShapeMismatch("ensemble and kernel grids differ".into()));
    }
    let grid = kernel.grid;
    let dt = grid.dt();
    if drift.is_zero() {
        return Ok(LogWeights { grid, m: paths.m, values: vec![0.0; paths.values.len()] });
    }
    let shared_q = if drift.is_state_free() {
        let b: Vec<f64> = (0..grid.steps).map(|j| drift.eval(grid.t(j), 0.0, None)).collect();
        Some(drift_q_transform(kernel, &cumulative_drift(&b, dt))?)
    } else {
        None
    };
    let rows: Result<Vec<Vec<f64>>> = paths
        .values
        .par_chunks(paths.width())
        .map(|x| match &shared_q {
            Some(q) => Ok(log_weight_process(q, &fundamental_row(kernel, x)?, dt)),
            None => path_log_weights(kernel, drift, x),
        })
        .collect();
    Ok(LogWeights::from_rows(grid, rows?))
}

/// `log Z_{t_index}` per path.
pub fn girsanov_log_weight(kernel: &DiscretizedKernel, drift: &DriftFunctional, paths: &PathEnsemble, t_index: usize) -> Result<Vec<f64>> {
    if t_index > kernel.grid.steps {
        return Err(Error::InvalidParameter(format!("time index {t_index} beyond grid")));
    }
    Ok(girsanov_log_weights(kernel, drift, paths)?.at(t_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImportanceEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub self_normalized: f64,
    pub self_normalized_stderr: f64,
    pub ess: f64,
    pub low_ess: bool,
}

impl ImportanceEstimate {
    pub fn as_estimate(&self) -> Estimate {
        Estimate { mean: self.estimate, stderr: self.stderr, n: self.ess as usize }
    }
}

/// `mean(w φ)` with unnormalized weights, plus the self-normalized variant.
pub fn importance_expectation(values: &[f64], log_weights: &[f64]) -> Result<ImportanceEstimate> {
    if values.len() != log_weights.len() || values.is_empty() {
        return Err(Error::ShapeMismatch(format!("{} values vs {} weights", values.len(), log_weights.len())));
    }
    let w: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
    let wphi: Vec<f64> = w.iter().zip(values).map(|(a, b)| a * b).collect();
    let main = Estimate::of(&wphi);
    let wsum = pairwise_sum(&w);
    let sn = pairwise_sum(&wphi) / wsum;
    let resid: Vec<f64> = w.iter().zip(values).map(|(wi, v)| (wi * (v - sn)).powi(2)).collect();
    let sn_se = pairwise_sum(&resid).sqrt() / wsum;
    let wstat = Estimate::of(&w);
    let var_w = wstat.stderr.powi(2) * w.len() as f64;
    let ess = w.len() as f64 / (1.0 + var_w);
    Ok(ImportanceEstimate {
        estimate: main.mean,
        stderr: main.stderr,
        self_normalized: sn,
        self_normalized_stderr: sn_se,
        ess,
        low_ess: ess < MIN_ESS,
    })
}

/// Same, with `φ` applied to each path.
pub fn importance_expectation_of(paths: &PathEnsemble, log_weights: &[f64], phi: impl Fn(&[f64]) -> f64) -> Result<ImportanceEstimate> {
    let values: Vec<f64> = paths.rows().map(phi).collect();
    importance_expectation(&values, log_weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightMeanRow {
    pub index: usize,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// `mean(exp log Z_{t_i})` against 1 at 3 standard errors, per index.
pub fn weight_mean_check(weights: &LogWeights, indices: &[usize]) -> Vec<WeightMeanRow> {
    indices
        .iter()
        .map(|&i| {
            let w: Vec<f64> = weights.at(i).iter().map(|l| l.exp()).collect();
            let e = Estimate::of(&w);
            WeightMeanRow { index: i, t: weights.grid.t(i), mean: e.mean, stderr: e.stderr, pass: e.within(1.0, 3.0) }
        })
        .collect()
}

/// Driftless paths `X = x0 + K̃ ΔW`, one Brownian stream per path.
pub fn driftless_paths(kernel: &DiscretizedKernel, x0: f64, m: usize, seed: u64) -> Result<PathEnsemble> {
    let grid = kernel.grid;
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|p| {
            let z = volterra_row(kernel, &bm_increments(&grid, seed, domain::BROWNIAN, p));
            z.into_iter().map(|v| v + x0).collect()
        })
        .collect();
    PathEnsemble::new(grid, PathKind::VolterraPath, seed, m, rows.concat())
}

/// Euler scheme `X_{i+1} = X_i + b(t_i, X_i) Δt + ΔZ_i`.
pub fn euler_paths(kernel: &DiscretizedKernel, drift: &DriftFunctional, x0: f64, m: usize, seed: u64) -> Result<PathEnsemble> {
    let grid = kernel.grid;
    let dt = grid.dt();
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|p| {
            let z = volterra_row(kernel, &bm_increments(&grid, seed, domain::BROWNIAN, p));
            let mut x = Vec::with_capacity(z.len());
            x.push(x0);
            for i in 0..grid.steps {
                let next = x[i] + drift.eval(grid.t(i), x[i], None) * dt + (z[i + 1] - z[i]);
                x.push(next);
            }
            x
        })
        .collect();
    PathEnsemble::new(grid, PathKind::VolterraPath, seed, m, rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::paths::discretize_kernel;

    #[test]
    fn novikov_examples() {
        assert_eq!(novikov_partition(&[0.0; 11], 0.1, 0.25).unwrap().indices, vec![0, 10]);
        let p = novikov_partition(&[1.0; 11], 0.1, 0.3).unwrap();
        assert_eq!(p.indices, vec![0, 3, 6, 9, 10]);
        assert!(matches!(novikov_partition(&[1.0; 11], 0.1, 0.05), Err(Error::StepExceedsCap { .. })));
        assert!(novikov_partition(&[-1.0, 0.0], 0.1, 0.3).is_err());
    }

    #[test]
    fn zero_drift_gives_unit_weights() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let k = discretize_kernel(&KernelSpec::fbm(0.3, 1.0).unwrap(), g).unwrap();
        let x = driftless_paths(&k, 0.0, 10, 1).unwrap();
        let lw = girsanov_log_weights(&k, &DriftFunctional::Zero, &x).unwrap();
        assert!(lw.values.iter().all(|&v| v == 0.0));
        let rows = weight_mean_check(&lw, &[2, 8]);
        assert!(rows.iter().all(|r| r.mean == 1.0 && r.pass));
    }

    #[test]
    fn brownian_constant_drift_is_classical_exponential() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let k = discretize_kernel(&KernelSpec::fbm(0.5, 1.0).unwrap(), g).unwrap();
        let theta = 0.7;
        let x = driftless_paths(&k, 0.0, 20, 4).unwrap();
        let lw = girsanov_log_weight(&k, &DriftFunctional::Constant { theta }, &x, 16).unwrap();
        for (row, l) in x.rows().zip(lw) {
            let want = theta * row[16] - 0.5 * theta * theta;
            assert!((l - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_and_per_path_q_agree_for_constant_drift() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let k = discretize_kernel(&KernelSpec::fbm(0.7, 1.0).unwrap(), g).unwrap();
        let x = driftless_paths(&k, 0.0, 4, 2).unwrap();
        let d = DriftFunctional::Constant { theta: 0.4 };
        let fast = girsanov_log_weights(&k, &d, &x).unwrap();
        for p in 0..4 {
            let slow = path_log_weights(&k, &d, x.row(p)).unwrap();
            for (a, b) in fast.row(p).iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_weight_is_progressive() {
        // Changing the path after t_i leaves log Z_{t_i} untouched.
        let g = TimeGrid::new(1.0, 10).unwrap();
        let k = discretize_kernel(&KernelSpec::fbm(0.3, 1.0).unwrap(), g).unwrap();
        let d = DriftFunctional::Linear { theta0: 0.2, theta1: -0.5 };
        let x = driftless_paths(&k, 0.1, 1, 3).unwrap();
        let base = path_log_weights(&k, &d, x.row(0)).unwrap();
        let mut y = x.row(0).to_vec();
        for v in &mut y[6..] {
            *v += 1.0;
        }
        let moved = path_log_weights(&k, &d, &y).unwrap();
        assert_eq!(base[..6], moved[..6]);
    }

    #[test]
    fn importance_with_unit_weights_is_plain_mean() {
        let r = importance_expectation(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-15);
        assert!((r.self_normalized - 2.0).abs() < 1e-15);
        assert_eq!(r.ess, 3.0);
        assert!(r.low_ess);
        assert!(importance_expectation(&[1.0], &[0.0, 0.0]).is_err());
    }
}
