//! Grid discretization: Brownian and Volterra paths, and the two triangular
//! transforms `Z ↔ W*` and `b ↔ Q^b`.
//!
//! `K̃[i][j]` is the average of `K(t_i, ·)` over the cell `(t_{j-1}, t_j]`,
//! taken from the exact cross-covariance `∫_0^s K(t,r) dr`, so that
//! `Z_{t_i} = Σ_j K̃[i][j] ΔW_j` is exact for piecewise-constant integrands.
//! The alternative innovation factor is the Cholesky factor of the exact
//! covariance on the grid, scaled by `Δt^{-1/2}`: it reproduces the law of
//! `Z` on the nodes exactly and makes the grid `W*` exactly Brownian, at the
//! cost of drifting away from `K` in the first few columns.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::discrete::increment_autocovariance;
use crate::kernels::{HurstParam, KernelSpec};
use crate::linalg::{cholesky_lower, LowerTriangular};
use crate::rng::{self, domain};

/// Largest grid accepted by [`discretize_kernel`].
pub const MAX_GRID: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 1 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_i = i T / N`; `t_N` is exactly `T`.
    pub fn t(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.t(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedKernel {
    pub grid: TimeGrid,
    /// Row `i-1`, column `j-1` holds `K̃[i][j]`.
    pub matrix: LowerTriangular,
}

/// Builds `K̃` for `spec` on `grid`.
pub fn discretize_kernel(spec: &KernelSpec, grid: TimeGrid) -> Result<DiscretizedKernel> {
    let n = grid.steps;
    if n > MAX_GRID {
        return Err(Error::InvalidParameter(format!("grid of {n} steps exceeds {MAX_GRID}")));
    }
    let dt = grid.dt();
    if spec.is_brownian() {
        return Ok(DiscretizedKernel { grid, matrix: LowerTriangular::from_fn(n, |_, _| 1.0) });
    }
    let rows: Vec<Result<Vec<f64>>> = (1..=n)
        .into_par_iter()
        .map(|i| {
            let t = grid.t(i);
            let mut cum = Vec::with_capacity(i + 1);
            cum.push(0.0);
            for j in 1..=i {
                cum.push(spec.cumulative_k(t, grid.t(j))?);
            }
            Ok(cum.windows(2).map(|w| (w[1] - w[0]) / dt).collect())
        })
        .collect();
    let mut matrix = LowerTriangular::zeros(n);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| Error::KernelDiscretization(e.to_string()))?;
        for (j, v) in row.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::KernelDiscretization(format!("non-finite entry at ({}, {})", i + 1, j + 1)));
            }
            matrix.set(i, j, v);
        }
    }
    for i in 0..n {
        let d = matrix.get(i, i);
        if !(d.abs() > 0.0) {
            return Err(Error::KernelDiscretization(format!("zero diagonal entry at {}", i + 1)));
        }
    }
    Ok(DiscretizedKernel { grid, matrix })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelScheme {
    #[default]
    CellAverage,
    Innovation,
}

impl std::str::FromStr for KernelScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell-average" => Ok(KernelScheme::CellAverage),
            "innovation" => Ok(KernelScheme::Innovation),
            _ => Err(Error::Parse(format!("unknown kernel scheme '{s}'"))),
        }
    }
}

pub fn discretize(spec: &KernelSpec, grid: TimeGrid, scheme: KernelScheme) -> Result<DiscretizedKernel> {
    match scheme {
        KernelScheme::CellAverage => discretize_kernel(spec, grid),
        KernelScheme::Innovation => innovation_kernel(spec, grid),
    }
}

/// `chol([R(t_i, t_j)]) / √Δt`.
pub fn innovation_kernel(spec: &KernelSpec, grid: TimeGrid) -> Result<DiscretizedKernel> {
    let n = grid.steps;
    if n > MAX_GRID {
        return Err(Error::InvalidParameter(format!("grid of {n} steps exceeds {MAX_GRID}")));
    }
    let cov = DMatrix::from_fn(n, n, |i, j| spec.covariance(grid.t(i + 1), grid.t(j + 1)));
    let chol = cholesky_lower(cov).map_err(|_| Error::KernelDiscretization("covariance is not positive definite".into()))?;
    let scale = grid.dt().sqrt();
    Ok(DiscretizedKernel { grid, matrix: LowerTriangular::from_fn(n, |i, j| chol.get(i, j) / scale) })
}

impl DiscretizedKernel {
    /// `Cov(K̃ ΔW) = K̃ K̃ᵀ Δt` on the nodes `t_1..t_N`.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let k = self.matrix.to_dmatrix();
        &k * k.transpose() * self.grid.dt()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    BmIncrements,
    VolterraPath,
    WStarIncrements,
    DriftQ,
}

impl PathKind {
    fn code(self) -> u8 {
        match self {
            PathKind::BmIncrements => 0,
            PathKind::VolterraPath => 1,
            PathKind::WStarIncrements => 2,
            PathKind::DriftQ => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => PathKind::BmIncrements,
            1 => PathKind::VolterraPath,
            2 => PathKind::WStarIncrements,
            3 => PathKind::DriftQ,
            _ => return Err(Error::Parse(format!("unknown ensemble kind {c}"))),
        })
    }
}

/// `m` rows of `N + 1` values. Increment kinds keep a zero in column 0 so
/// that column `i` always refers to the cell ending at `t_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub kind: PathKind,
    pub seed: u64,
    pub m: usize,
    pub values: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(grid: TimeGrid, kind: PathKind, seed: u64, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * (grid.steps + 1) {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {m} paths of {} nodes",
                values.len(),
                grid.steps + 1
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at flat index {i}")));
        }
        Ok(PathEnsemble { grid, kind, seed, m, values })
    }

    fn from_rows(grid: TimeGrid, kind: PathKind, seed: u64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        Self::new(grid, kind, seed, m, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.grid.steps + 1
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let w = self.width();
        &self.values[p * w..(p + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.width())
    }

    /// Column `i` across paths.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    fn expect(&self, kind: PathKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("expected {kind:?} ensemble, got {:?}", self.kind)))
        }
    }

    /// Cumulative sums of an increment ensemble, `W_{t_0..t_N}` per path.
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| {
                let mut acc = 0.0;
                r.iter()
                    .map(|x| {
                        acc += x;
                        acc
                    })
                    .collect()
            })
            .collect()
    }
}

/// Standard Brownian increments of one path, `[0, ΔW_1, .., ΔW_N]`.
pub fn bm_increments(grid: &TimeGrid, seed: u64, stream_domain: u64, path: u64) -> Vec<f64> {
    let mut row = vec![0.0; grid.steps + 1];
    rng::fill_normal(&mut rng::stream(seed, stream_domain, path), &mut row[1..], grid.dt().sqrt());
    row
}

pub fn sample_bm(grid: TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let rows: Vec<Vec<f64>> =
        (0..m as u64).into_par_iter().map(|p| bm_increments(&grid, seed, domain::BROWNIAN, p)).collect();
    PathEnsemble::from_rows(grid, PathKind::BmIncrements, seed, rows)
}

/// `[0, (K̃ ΔW)_1, .., (K̃ ΔW)_N]` for one row of increments.
pub fn volterra_row(kernel: &DiscretizedKernel, increments: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(increments.len());
    z.push(0.0);
    z.extend(kernel.matrix.mul_vec(&increments[1..]));
    z
}

pub fn volterra_paths(kernel: &DiscretizedKernel, bm: &PathEnsemble) -> Result<PathEnsemble> {
    bm.expect(PathKind::BmIncrements)?;
    check_grid(kernel, &bm.grid)?;
    let rows: Vec<Vec<f64>> = bm.values.par_chunks(bm.width()).map(|r| volterra_row(kernel, r)).collect();
    PathEnsemble::from_rows(bm.grid, PathKind::VolterraPath, bm.seed, rows)
}

fn check_grid(kernel: &DiscretizedKernel, grid: &TimeGrid) -> Result<()> {
    if kernel.grid != *grid {
        return Err(Error::ShapeMismatch(format!("kernel grid {:?} vs ensemble grid {:?}", kernel.grid, grid)));
    }
    Ok(())
}

/// Exact-covariance paths from the Cholesky factor of `[R(t_i, t_j)]`.
pub fn cholesky_oracle_paths(spec: &KernelSpec, grid: TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
    let n = grid.steps;
    let cov = DMatrix::from_fn(n, n, |i, j| spec.covariance(grid.t(i + 1), grid.t(j + 1)));
    let chol = cholesky_lower(cov)?;
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|p| {
            let mut g = vec![0.0; n];
            rng::fill_normal(&mut rng::stream(seed, domain::CHOLESKY, p), &mut g, 1.0);
            let mut z = Vec::with_capacity(n + 1);
            z.push(0.0);
            z.extend(chol.mul_vec(&g));
            z
        })
        .collect();
    PathEnsemble::from_rows(grid, PathKind::VolterraPath, seed, rows)
}

/// Durbin–Levinson coefficients for stationary increments: row `k` predicts
/// increment `k` from the previous ones, with innovation variance `var[k]`.
struct Hosking {
    phi: Vec<Vec<f64>>,
    var: Vec<f64>,
}

impl Hosking {
    fn new(gamma: &[f64]) -> Result<Self> {
        let n = gamma.len();
        let mut phi: Vec<Vec<f64>> = vec![Vec::new()];
        let mut var = vec![gamma[0]];
        for k in 1..n {
            let prev = &phi[k - 1];
            let num = gamma[k] - (0..k - 1).map(|j| prev[j] * gamma[k - 1 - j]).sum::<f64>();
            let a = num / var[k - 1];
            let mut row: Vec<f64> = (0..k - 1).map(|j| prev[j] - a * prev[k - 2 - j]).collect();
            row.push(a);
            let v = var[k - 1] * (1.0 - a * a);
            if !(v > 0.0) {
                return Err(Error::Cholesky);
            }
            phi.push(row);
            var.push(v);
        }
        Ok(Hosking { phi, var })
    }

    /// Increments `x_k = Σ_j φ_{k,j} x_{k-1-j} + √v_k g_k`.
    fn sample(&self, g: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = Vec::with_capacity(g.len());
        for (k, gk) in g.iter().enumerate() {
            let mean: f64 = self.phi[k].iter().enumerate().map(|(j, p)| p * x[k - 1 - j]).sum();
            x.push(mean + self.var[k].sqrt() * gk);
        }
        x
    }
}

/// Exact fBm on the grid from the stationary increment recursion; an
/// independent sampler for checking the transforms.
pub fn hosking_paths(h: HurstParam, grid: TimeGrid, m: usize, seed: u64) -> Result<PathEnsemble> {
    let n = grid.steps;
    let scale = grid.dt().powf(2.0 * h.value());
    let gamma: Vec<f64> = (0..n as u64).map(|k| scale * increment_autocovariance(h, k)).collect();
    let rec = Hosking::new(&gamma)?;
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|p| {
            let mut g = vec![0.0; n];
            rng::fill_normal(&mut rng::stream(seed, domain::CHOLESKY ^ 0x484f, p), &mut g, 1.0);
            let mut acc = 0.0;
            std::iter::once(0.0)
                .chain(rec.sample(&g).into_iter().map(|x| {
                    acc += x;
                    acc
                }))
                .collect()
        })
        .collect();
    PathEnsemble::from_rows(grid, PathKind::VolterraPath, seed, rows)
}

/// `ΔW*` of one path: solves `K̃ ΔW* = Z - Z_0`.
pub fn fundamental_row(kernel: &DiscretizedKernel, z: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = z[1..].iter().map(|v| v - z[0]).collect();
    let mut w = Vec::with_capacity(z.len());
    w.push(0.0);
    w.extend(kernel.matrix.solve(&rhs)?);
    Ok(w)
}

pub fn fundamental_transform(kernel: &DiscretizedKernel, z: &PathEnsemble) -> Result<PathEnsemble> {
    z.expect(PathKind::VolterraPath)?;
    check_grid(kernel, &z.grid)?;
    let rows: Result<Vec<Vec<f64>>> = z.values.par_chunks(z.width()).map(|r| fundamental_row(kernel, r)).collect();
    PathEnsemble::from_rows(z.grid, PathKind::WStarIncrements, z.seed, rows?)
}

/// Grid values `q_1..q_N` of `Q^b` from the cumulative drift `B_0..B_N`:
/// solves `K̃ (q Δt) = B`.
pub fn drift_q_transform(kernel: &DiscretizedKernel, cumulative: &[f64]) -> Result<Vec<f64>> {
    let n = kernel.steps();
    if cumulative.len() != n + 1 {
        return Err(Error::ShapeMismatch(format!("cumulative drift of length {} on {n} steps", cumulative.len())));
    }
    if cumulative[0] != 0.0 {
        return Err(Error::InvalidParameter(format!("cumulative drift must start at 0, got {}", cumulative[0])));
    }
    let dt = kernel.grid.dt();
    Ok(kernel.matrix.solve(&cumulative[1..])?.into_iter().map(|x| x / dt).collect())
}

/// `Σ_{j ≤ upto} q_j² Δt`, with `q` indexed from cell 1.
pub fn rkhs_norm_sq(q: &[f64], upto: usize, dt: f64) -> f64 {
    q[..upto.min(q.len())].iter().map(|x| x * x * dt).sum()
}

const MAGIC: &[u8; 8] = b"VMRFENS1";

/// Header `magic, steps: u64, horizon: f64, m: u64, kind: u8, seed: u64`,
/// then `m × (N+1)` little-endian doubles, row-major.
pub fn write_binary(ens: &PathEnsemble, mut out: impl Write) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(ens.grid.steps as u64).to_le_bytes())?;
    out.write_all(&ens.grid.horizon.to_le_bytes())?;
    out.write_all(&(ens.m as u64).to_le_bytes())?;
    out.write_all(&[ens.kind.code()])?;
    out.write_all(&ens.seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(ens.values.len() * 8);
    for v in &ens.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary(mut input: impl Read) -> Result<PathEnsemble> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("not an ensemble file".into()));
    }
    let mut b8 = [0u8; 8];
    let mut u64_at = |input: &mut dyn Read| -> Result<[u8; 8]> {
        input.read_exact(&mut b8)?;
        Ok(b8)
    };
    let steps = u64::from_le_bytes(u64_at(&mut input)?) as usize;
    let horizon = f64::from_le_bytes(u64_at(&mut input)?);
    let m = u64::from_le_bytes(u64_at(&mut input)?) as usize;
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    let seed = u64::from_le_bytes(u64_at(&mut input)?);
    let grid = TimeGrid::new(horizon, steps)?;
    let mut raw = Vec::new();
    input.read_to_end(&mut raw)?;
    if raw.len() != m * (steps + 1) * 8 {
        return Err(Error::Parse(format!("expected {} body bytes, found {}", m * (steps + 1) * 8, raw.len())));
    }
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    PathEnsemble::new(grid, PathKind::from_code(kind[0])?, seed, m, values)
}

/// One row per path, columns `t_0..t_N`.
pub fn write_csv(ens: &PathEnsemble, mut out: impl Write) -> Result<()> {
    let header: Vec<String> = ens.grid.nodes().iter().map(|t| format!("t={t}")).collect();
    writeln!(out, "path,{}", header.join(","))?;
    for (p, row) in ens.rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{p},{}", cells.join(","))?;
    }
    Ok(())
}
