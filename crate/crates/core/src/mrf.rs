//! Interacting systems `dX^u = b_u(t, X^u, X^{N_u}) dt + dZ^u` on finite
//! graphs: Euler simulation, per-vertex Girsanov weights and their clique
//! bookkeeping, a conditional-independence test, truncation sweeps and
//! entropy bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftFunctional;
use crate::error::{Error, Result};
use crate::girsanov::{cumulative_drift, log_weight_process};
use crate::graph::{boundary, boundary2, closed_neighborhood, truncate, truncated_drift, two_cliques, Graph, LocallyFinite, Vertex, VertexDrifts, VertexSet};
use crate::kernels::KernelSpec;
use crate::paths::{bm_increments, discretize, drift_q_transform, fundamental_row, volterra_row, DiscretizedKernel, KernelScheme, PathEnsemble, PathKind, TimeGrid};
use crate::rng::{self, domain};
use crate::stats::{pairwise_sum, Estimate};

/// Per-vertex initial law; the joint law is the product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialLaw {
    Point { x: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl InitialLaw {
    fn sample(&self, seed: u64, path: u64) -> f64 {
        match *self {
            InitialLaw::Point { x } => x,
            InitialLaw::Gaussian { mean, sd } => mean + sd * rng::normal(&mut rng::stream(seed, domain::INITIAL, path)),
        }
    }
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Point { x: 0.0 }
    }
}

impl FromStr for InitialLaw {
    type Err = Error;

    /// `point:x` or `gauss:mean,sd`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("initial law '{s}'"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<f64> = args.split(',').map(|a| a.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        match (name, nums.as_slice()) {
            ("point", [x]) => Ok(InitialLaw::Point { x: *x }),
            ("gauss", [mean, sd]) if *sd >= 0.0 => Ok(InitialLaw::Gaussian { mean: *mean, sd: *sd }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialLaw::Point { x } => write!(f, "point:{x}"),
            InitialLaw::Gaussian { mean, sd } => write!(f, "gauss:{mean},{sd}"),
        }
    }
}

/// Graph, drifts, per-vertex Hurst indices and initial law.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub graph: Graph,
    pub drifts: VertexDrifts,
    pub hurst: f64,
    pub hurst_overrides: BTreeMap<Vertex, f64>,
    pub initial: InitialLaw,
}

impl SystemSpec {
    pub fn new(graph: Graph, drifts: VertexDrifts, hurst: f64, initial: InitialLaw) -> Self {
        SystemSpec { graph, drifts, hurst, hurst_overrides: BTreeMap::new(), initial }
    }

    pub fn with_hurst(mut self, v: Vertex, h: f64) -> Self {
        self.hurst_overrides.insert(v, h);
        self
    }

    pub fn hurst_of(&self, v: Vertex) -> f64 {
        self.hurst_overrides.get(&v).copied().unwrap_or(self.hurst)
    }

    /// Same system with every drift set to zero (the reference law `P*`).
    pub fn driftless(&self) -> Self {
        SystemSpec { drifts: VertexDrifts::uniform(DriftFunctional::Zero), ..self.clone() }
    }
}

/// One discretized kernel per distinct Hurst index.
#[derive(Debug, Clone)]
pub struct SystemKernels {
    pub grid: TimeGrid,
    by_hurst: Vec<(f64, DiscretizedKernel)>,
    vertex_kernel: BTreeMap<Vertex, usize>,
}

impl SystemKernels {
    pub fn build(spec: &SystemSpec, grid: TimeGrid, scheme: KernelScheme) -> Result<Self> {
        let mut by_hurst: Vec<(f64, DiscretizedKernel)> = Vec::new();
        let mut vertex_kernel = BTreeMap::new();
        for v in spec.graph.vertices() {
            let h = spec.hurst_of(v);
            let idx = match by_hurst.iter().position(|(hh, _)| *hh == h) {
                Some(i) => i,
                None => {
                    by_hurst.push((h, discretize(&KernelSpec::fbm(h, grid.horizon)?, grid, scheme)?));
                    by_hurst.len() - 1
                }
            };
            vertex_kernel.insert(v, idx);
        }
        Ok(SystemKernels { grid, by_hurst, vertex_kernel })
    }

    pub fn of(&self, v: Vertex) -> Result<&DiscretizedKernel> {
        self.vertex_kernel.get(&v).map(|&i| &self.by_hurst[i].1).ok_or_else(|| Error::Graph(format!("no kernel for vertex {v}")))
    }
}

/// Joint samples: `paths[k]` holds vertex `vertices[k]`, row `p` of every
/// entry belongs to the same draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemEnsemble {
    pub grid: TimeGrid,
    pub m: usize,
    pub seed: u64,
    pub initial: InitialLaw,
    pub vertices: Vec<Vertex>,
    pub paths: Vec<PathEnsemble>,
}

impl SystemEnsemble {
    pub fn index_of(&self, v: Vertex) -> Result<usize> {
        self.vertices.binary_search(&v).map_err(|_| Error::Graph(format!("vertex {v} not in ensemble")))
    }

    pub fn vertex(&self, v: Vertex) -> Result<&PathEnsemble> {
        Ok(&self.paths[self.index_of(v)?])
    }
}

/// Noise seed of vertex `v`; keyed by vertex label so a vertex sees the
/// same noise on every graph that contains it.
pub fn vertex_seed(seed: u64, v: Vertex) -> u64 {
    rng::derive(seed, domain::VERTEX, v as u64)
}

struct Layout {
    vertices: Vec<Vertex>,
    neighbors: Vec<Vec<usize>>,
}

fn layout(g: &Graph) -> Layout {
    let vertices: Vec<Vertex> = g.vertices().collect();
    let neighbors = vertices
        .iter()
        .map(|&v| g.neighbors(v).iter().map(|u| vertices.binary_search(u).unwrap()).collect())
        .collect();
    Layout { vertices, neighbors }
}

fn neighbor_mean(nbrs: &[usize], x: &[Vec<f64>], i: usize) -> Option<f64> {
    if nbrs.is_empty() {
        None
    } else {
        Some(nbrs.iter().map(|&k| x[k][i]).sum::<f64>() / nbrs.len() as f64)
    }
}

/// Euler scheme `X^u_{i+1} = X^u_i + b_u(t_i, ·) Δt + ΔZ^u_i` with
/// independent Volterra noise per vertex.
pub fn simulate_system_euler(spec: &SystemSpec, kernels: &SystemKernels, m: usize, seed: u64) -> Result<SystemEnsemble> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let grid = kernels.grid;
    let lay = layout(&spec.graph);
    let nv = lay.vertices.len();
    let ks: Vec<&DiscretizedKernel> = lay.vertices.iter().map(|&v| kernels.of(v)).collect::<Result<_>>()?;
    let drifts: Vec<DriftFunctional> = lay.vertices.iter().map(|&v| spec.drifts.get(v)).collect();
    let seeds: Vec<u64> = lay.vertices.iter().map(|&v| vertex_seed(seed, v)).collect();
    let dt = grid.dt();
    let rows: Vec<Vec<Vec<f64>>> = (0..m as u64)
        .into_par_iter()
        .map(|p| {
            let z: Vec<Vec<f64>> =
                (0..nv).map(|k| volterra_row(ks[k], &bm_increments(&grid, seeds[k], domain::BROWNIAN, p))).collect();
            let mut x: Vec<Vec<f64>> = (0..nv)
                .map(|k| {
                    let mut row = vec![0.0; grid.steps + 1];
                    row[0] = spec.initial.sample(seeds[k], p);
                    row
                })
                .collect();
            for i in 0..grid.steps {
                let t = grid.t(i);
                let b: Vec<f64> =
                    (0..nv).map(|k| drifts[k].eval(t, x[k][i], neighbor_mean(&lay.neighbors[k], &x, i))).collect();
                for k in 0..nv {
                    x[k][i + 1] = x[k][i] + b[k] * dt + (z[k][i + 1] - z[k][i]);
                }
            }
            x
        })
        .collect();
    let paths = (0..nv)
        .map(|k| {
            let flat: Vec<f64> = rows.iter().flat_map(|r| r[k].iter().copied()).collect();
            PathEnsemble::new(grid, PathKind::VolterraPath, seed, m, flat)
        })
        .collect::<Result<_>>()?;
    Ok(SystemEnsemble { grid, m, seed, initial: spec.initial, vertices: lay.vertices, paths })
}

/// Log-weights of every clique; `{u} ∪ N_u` carries `log Z^u`, the other
/// 2-cliques carry 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueFactorization {
    pub cliques: Vec<VertexSet>,
    /// `factors[c][p]`.
    pub factors: Vec<Vec<f64>>,
}

impl CliqueFactorization {
    pub fn total(&self) -> Vec<f64> {
        let m = self.factors.first().map_or(0, |f| f.len());
        (0..m).map(|p| self.factors.iter().map(|f| f[p]).sum()).collect()
    }

    pub fn nonzero(&self) -> Vec<&VertexSet> {
        self.cliques.iter().zip(&self.factors).filter(|(_, f)| f.iter().any(|&x| x != 0.0)).map(|(c, _)| c).collect()
    }
}

/// `log Z^u_t` per vertex and path, their sum, and the clique bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemWeights {
    pub t_index: usize,
    pub vertices: Vec<Vertex>,
    /// `per_vertex[k][p]`.
    pub per_vertex: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub factorization: CliqueFactorization,
}

impl SystemWeights {
    /// `Σ_{u ∈ set} log Z^u` per path.
    pub fn restricted(&self, set: &VertexSet) -> Vec<f64> {
        let m = self.total.len();
        let ks: Vec<usize> = self.vertices.iter().enumerate().filter(|(_, v)| set.contains(v)).map(|(k, _)| k).collect();
        (0..m).map(|p| ks.iter().map(|&k| self.per_vertex[k][p]).sum()).collect()
    }
}

/// Girsanov weights of a driftless ensemble with respect to the drifts of
/// `spec`; vertex `u` reads its own path and its neighbours'.
pub fn system_log_weights(spec: &SystemSpec, kernels: &SystemKernels, ens: &SystemEnsemble, t_index: usize) -> Result<SystemWeights> {
    let grid = kernels.grid;
    if ens.grid != grid {
        return Err(Error::ShapeMismatch("ensemble and kernel grids differ".into()));
    }
    if t_index > grid.steps {
        return Err(Error::InvalidParameter(format!("time index {t_index} beyond grid")));
    }
    let lay = layout(&spec.graph);
    if lay.vertices != ens.vertices {
        return Err(Error::ShapeMismatch("ensemble vertices differ from the graph".into()));
    }
    let dt = grid.dt();
    let per_vertex: Vec<Vec<f64>> = lay
        .vertices
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let drift = spec.drifts.get(v);
            if drift.is_zero() {
                return Ok(vec![0.0; ens.m]);
            }
            let kern = kernels.of(v)?;
            (0..ens.m)
                .into_par_iter()
                .map(|p| {
                    let rows: Vec<Vec<f64>> = lay.neighbors[k].iter().map(|&j| ens.paths[j].row(p).to_vec()).collect();
                    let nb_idx: Vec<usize> = (0..rows.len()).collect();
                    let x = ens.paths[k].row(p);
                    let b: Vec<f64> =
                        (0..grid.steps).map(|i| drift.eval(grid.t(i), x[i], neighbor_mean(&nb_idx, &rows, i))).collect();
                    let q = drift_q_transform(kern, &cumulative_drift(&b, dt))?;
                    let dw = fundamental_row(kern, x)?;
                    Ok(log_weight_process(&q, &dw, dt)[t_index])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let cliques = two_cliques(&spec.graph);
    let mut factors = vec![vec![0.0; ens.m]; cliques.len()];
    for (k, &v) in lay.vertices.iter().enumerate() {
        let c = cliques.binary_search(&closed_neighborhood(&spec.graph, v)).expect("closed neighbourhoods are 2-cliques");
        for p in 0..ens.m {
            factors[c][p] += per_vertex[k][p];
        }
    }
    // summed clique by clique so the factorization reproduces it bit for bit
    let factorization = CliqueFactorization { cliques, factors };
    let total = factorization.total();
    Ok(SystemWeights { t_index, vertices: lay.vertices, per_vertex, total, factorization })
}

/// How the separator paths enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeparatorSummary {
    /// Values at `k` equispaced times `t_{N/k}, .., t_N`.
    Points { k: usize },
    /// Every grid value.
    FullPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiOptions {
    /// Equispaced values summarising each vertex path of `A` and `B`.
    pub summary_points: usize,
    pub separator: SeparatorSummary,
    pub perms: usize,
    pub seed: u64,
}

impl Default for CiOptions {
    fn default() -> Self {
        CiOptions { summary_points: 4, separator: SeparatorSummary::FullPath, perms: 500, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CITestReport {
    pub a: VertexSet,
    pub b: VertexSet,
    pub separator: VertexSet,
    pub statistic: f64,
    pub p_value: f64,
    pub m: usize,
    pub perms: usize,
    pub seed: u64,
    pub separator_features: usize,
}

fn summary_indices(steps: usize, k: usize) -> Vec<usize> {
    let k = k.clamp(1, steps);
    (1..=k).map(|i| (i * steps + k / 2) / k).collect()
}

fn features(ens: &SystemEnsemble, set: &VertexSet, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    let mut cols = Vec::new();
    for &v in set {
        let e = ens.vertex(v)?;
        for &i in idx {
            cols.push(e.column(i));
        }
    }
    Ok(cols)
}

fn weighted_center(col: &[f64], w: &[f64], wsum: f64) -> Vec<f64> {
    let mean = pairwise_sum(&col.iter().zip(w).map(|(x, w)| x * w).collect::<Vec<_>>()) / wsum;
    col.iter().map(|x| x - mean).collect()
}

/// Weighted least-squares residuals of every `y` column on `[1, design]`.
fn residualize(ys: Vec<Vec<f64>>, design: &[Vec<f64>], w: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = w.len();
    let wsum = pairwise_sum(w);
    let ys: Vec<Vec<f64>> = ys.iter().map(|y| weighted_center(y, w, wsum)).collect();
    // Standardised, constant-free design columns.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for c in design {
        let c = weighted_center(c, w, wsum);
        let var = c.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>() / wsum;
        if var > 1e-20 {
            let sd = var.sqrt();
            cols.push(c.into_iter().map(|x| x / sd).collect());
        }
    }
    let d = cols.len();
    if d == 0 {
        return Ok(ys);
    }
    if d + 2 > m {
        return Err(Error::SeparatorDegenerate(format!("{d} separator features for {m} paths")));
    }
    let x = DMatrix::from_fn(m, d, |i, j| cols[j][i]);
    let xw = DMatrix::from_fn(m, d, |i, j| cols[j][i] * w[i]);
    let gram = xw.transpose() * &x / wsum;
    let eig_min = gram.clone().symmetric_eigenvalues().min();
    if !(eig_min > 1e-10) {
        return Err(Error::SeparatorDegenerate(format!("smallest design eigenvalue {eig_min:e}")));
    }
    let chol = gram.cholesky().ok_or_else(|| Error::SeparatorDegenerate("design Gram matrix not positive definite".into()))?;
    ys.into_iter()
        .map(|y| {
            let rhs = xw.transpose() * DVector::from_vec(y.clone()) / wsum;
            let beta = chol.solve(&rhs);
            let fit = &x * beta;
            Ok(y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect())
        })
        .collect()
}

fn max_abs_corr(ra: &[Vec<f64>], rb: &[Vec<f64>], w: &[f64], perm: Option<&[usize]>) -> f64 {
    let mut best: f64 = 0.0;
    let na: Vec<f64> = ra.iter().map(|a| a.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()).collect();
    let nb: Vec<f64> = rb.iter().map(|b| b.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()).collect();
    for (a, sa) in ra.iter().zip(&na) {
        for (b, sb) in rb.iter().zip(&nb) {
            let dot: f64 = match perm {
                None => (0..w.len()).map(|p| w[p] * a[p] * b[p]).sum(),
                Some(pi) => (0..w.len()).map(|p| w[p] * a[p] * b[pi[p]]).sum(),
            };
            if *sa > 0.0 && *sb > 0.0 {
                best = best.max((dot / (sa * sb)).abs());
            }
        }
    }
    best
}

/// Residual-correlation test of `X^A ⊥ X^B | X^S`: summaries of `A` and `B`
/// are regressed on the separator features under importance weights, and
/// the largest residual correlation is compared with its permutation law.
pub fn conditional_independence_test(
    ens: &SystemEnsemble,
    log_weights: Option<&[f64]>,
    a: &VertexSet,
    b: &VertexSet,
    s: &VertexSet,
    opts: &CiOptions,
) -> Result<CITestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("A and B must be non-empty".into()));
    }
    if b.iter().any(|v| a.contains(v) || s.contains(v)) || a.iter().any(|v| s.contains(v)) {
        return Err(Error::InvalidParameter("A, B and S must be disjoint".into()));
    }
    if opts.perms < 500 {
        return Err(Error::InvalidParameter(format!("need at least 500 permutations, got {}", opts.perms)));
    }
    let m = ens.m;
    let w: Vec<f64> = match log_weights {
        Some(lw) if lw.len() == m => {
            let shift = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = lw.iter().map(|l| (l - shift).exp()).collect();
            let scale = m as f64 / pairwise_sum(&raw);
            raw.into_iter().map(|x| x * scale).collect()
        }
        Some(lw) => return Err(Error::ShapeMismatch(format!("{} weights for {m} paths", lw.len()))),
        None => vec![1.0; m],
    };
    let steps = ens.grid.steps;
    let ab_idx = summary_indices(steps, opts.summary_points);
    let s_idx: Vec<usize> = match opts.separator {
        SeparatorSummary::Points { k } => summary_indices(steps, k),
        SeparatorSummary::FullPath => (0..=steps).collect(),
    };
    let design = features(ens, s, &s_idx)?;
    let ra = residualize(features(ens, a, &ab_idx)?, &design, &w)?;
    let rb = residualize(features(ens, b, &ab_idx)?, &design, &w)?;
    let statistic = max_abs_corr(&ra, &rb, &w, None);
    let exceed: usize = (0..opts.perms as u64)
        .into_par_iter()
        .map(|k| {
            let mut pi: Vec<usize> = (0..m).collect();
            pi.shuffle(&mut rng::stream(opts.seed, domain::PERMUTATION, k));
            usize::from(max_abs_corr(&ra, &rb, &w, Some(&pi)) >= statistic)
        })
        .sum();
    Ok(CITestReport {
        a: a.clone(),
        b: b.clone(),
        separator: s.clone(),
        statistic,
        p_value: (1 + exceed) as f64 / (opts.perms + 1) as f64,
        m,
        perms: opts.perms,
        seed: opts.seed,
        separator_features: design.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub n: usize,
    pub vertices: usize,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub a: VertexSet,
    pub clip: f64,
    pub rows: Vec<TruncationRow>,
    /// `est(n_{k+1}) - est(n_k)`.
    pub differences: Vec<f64>,
    /// Last difference below the first plus three combined standard errors
    /// of the last pair.
    pub pass: bool,
}

/// `E[ψ(X^A)]` under the truncated systems `G_n`, with
/// `ψ = clip(mean_{a∈A} X^a_T, ±clip)`. Noise is keyed by vertex, so the
/// sweep uses common random numbers across `n`.
#[allow(clippy::too_many_arguments)]
pub fn truncation_convergence(
    g: &dyn LocallyFinite,
    drifts: &VertexDrifts,
    hurst: f64,
    initial: InitialLaw,
    a: &VertexSet,
    clip: f64,
    n_list: &[usize],
    grid: TimeGrid,
    m: usize,
    seed: u64,
) -> Result<TruncationReport> {
    if n_list.len() < 2 {
        return Err(Error::InvalidParameter("need at least two truncation levels".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let t = truncate(g, n)?;
        let inner = t.ball(n.saturating_sub(3));
        if !a.is_subset(&inner) {
            return Err(Error::InvalidParameter(format!("A must lie within distance {} of the root", n - 3)));
        }
        let spec = SystemSpec::new(t.graph.clone(), truncated_drift(drifts, &t), hurst, initial);
        let kernels = SystemKernels::build(&spec, grid, KernelScheme::default())?;
        let ens = simulate_system_euler(&spec, &kernels, m, seed)?;
        let cols: Vec<&PathEnsemble> = a.iter().map(|&v| ens.vertex(v)).collect::<Result<_>>()?;
        let vals: Vec<f64> = (0..m)
            .map(|p| {
                let mean = cols.iter().map(|e| e.row(p)[grid.steps]).sum::<f64>() / cols.len() as f64;
                mean.clamp(-clip, clip)
            })
            .collect();
        rows.push(TruncationRow { n, vertices: t.graph.len(), estimate: Estimate::of(&vals) });
    }
    let differences: Vec<f64> = rows.windows(2).map(|w| w[1].estimate.mean - w[0].estimate.mean).collect();
    let (first, last) = (rows.len() - 2, rows.len() - 1);
    let combined = (rows[first].estimate.stderr.powi(2) + rows[last].estimate.stderr.powi(2)).sqrt();
    let pass = differences[differences.len() - 1].abs() < differences[0].abs() + 3.0 * combined;
    Ok(TruncationReport { a: a.clone(), clip, rows, differences, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub a: VertexSet,
    /// Vertices whose closed neighbourhood meets `A`.
    pub relevant: VertexSet,
    /// `mean(Z log Z)` over the relevant factor.
    pub estimate: Estimate,
    /// `mean(-log Z)`, the reverse direction; reported only.
    pub reverse: Estimate,
    pub c_t: f64,
    pub bound: f64,
    pub second_moment: f64,
    pub pass: bool,
}

/// Smallest singular value of the leading `k × k` block of `K̃`.
fn min_singular(kernel: &DiscretizedKernel, k: usize) -> f64 {
    let m = DMatrix::from_fn(k, k, |i, j| kernel.matrix.get(i, j));
    m.singular_values().min()
}

/// Entropy of the clique-restricted weight against `P*` at `t_index`,
/// bounded by `C_t |A|` where
/// `C_t = (1 + Δ) max_u M_u² κ_u (1 + m₂)`, `κ_u = σ_min(K̃_u)^{-2} Σ_{i≤k} t_i² / Δt`,
/// `Δ` the maximum degree and `m₂` the largest weighted mean of
/// `sup_{i≤k} (X^v_i)²` over the vertices the relevant drifts read.
pub fn entropy_estimate(
    spec: &SystemSpec,
    kernels: &SystemKernels,
    ens: &SystemEnsemble,
    weights: &SystemWeights,
    a: &VertexSet,
) -> Result<EntropyReport> {
    let g = &spec.graph;
    let relevant: VertexSet = a.union(&boundary(g, a)).copied().collect();
    let lz = weights.restricted(&relevant);
    let zlogz: Vec<f64> = lz.iter().map(|l| l.exp() * l).collect();
    let neg: Vec<f64> = lz.iter().map(|l| -l).collect();
    let estimate = Estimate::of(&zlogz);
    let reverse = Estimate::of(&neg);

    let k = weights.t_index;
    let grid = kernels.grid;
    let dt = grid.dt();
    let time_sq: f64 = (1..=k).map(|i| grid.t(i).powi(2)).sum();
    let mut growth: f64 = 0.0;
    for &u in &relevant {
        if k == 0 {
            break;
        }
        let m_u = spec.drifts.get(u).certificate();
        let sigma = min_singular(kernels.of(u)?, k);
        growth = growth.max(m_u * m_u * time_sq / dt / (sigma * sigma));
    }
    let read: VertexSet = relevant.union(&boundary(g, &relevant)).copied().collect();
    let mut second_moment: f64 = 0.0;
    for &v in &read {
        let e = ens.vertex(v)?;
        let vals: Vec<f64> = (0..ens.m)
            .map(|p| lz[p].exp() * e.row(p)[..=k].iter().map(|x| x * x).fold(0.0, f64::max))
            .collect();
        second_moment = second_moment.max(Estimate::of(&vals).mean);
    }
    let c_t = (1.0 + g.max_degree() as f64) * growth * (1.0 + second_moment);
    let bound = c_t * a.len() as f64;
    Ok(EntropyReport {
        a: a.clone(),
        relevant,
        estimate,
        reverse,
        c_t,
        bound,
        second_moment,
        pass: estimate.mean <= bound,
    })
}

/// `∂²A` within a finite graph, as used for the separator of the test.
pub fn separator(g: &Graph, a: &VertexSet) -> VertexSet {
    boundary2(g, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vs: &[Vertex]) -> VertexSet {
        vs.iter().copied().collect()
    }

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn path_spec(drift: DriftFunctional, h: f64) -> SystemSpec {
        SystemSpec::new(Graph::path(5), VertexDrifts::uniform(drift), h, InitialLaw::Point { x: 0.0 })
    }

    #[test]
    fn zero_drift_is_initial_plus_noise() {
        let spec = path_spec(DriftFunctional::Zero, 0.3).with_hurst(2, 0.7);
        let k = SystemKernels::build(&spec, grid(8), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec, &k, 10, 3).unwrap();
        for (idx, &v) in ens.vertices.iter().enumerate() {
            let kern = k.of(v).unwrap();
            for p in 0..10 {
                let z = volterra_row(kern, &bm_increments(&ens.grid, vertex_seed(3, v), domain::BROWNIAN, p as u64));
                for (a, b) in ens.paths[idx].row(p).iter().zip(&z) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vertex_noise_is_shared_across_graphs() {
        let small = SystemSpec::new(Graph::path(2), VertexDrifts::uniform(DriftFunctional::Zero), 0.4, InitialLaw::default());
        let big = path_spec(DriftFunctional::Zero, 0.4);
        let g = grid(6);
        let e1 = simulate_system_euler(&small, &SystemKernels::build(&small, g, KernelScheme::default()).unwrap(), 5, 9).unwrap();
        let e2 = simulate_system_euler(&big, &SystemKernels::build(&big, g, KernelScheme::default()).unwrap(), 5, 9).unwrap();
        assert_eq!(e1.vertex(1).unwrap().values, e2.vertex(1).unwrap().values);
    }

    #[test]
    fn clique_factors_sum_to_total() {
        let spec = path_spec("neighbor:0.3,-0.5,0.8".parse().unwrap(), 0.3);
        let k = SystemKernels::build(&spec, grid(8), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec.driftless(), &k, 50, 1).unwrap();
        let w = system_log_weights(&spec, &k, &ens, 8).unwrap();
        assert_eq!(w.factorization.total(), w.total);
        for (p, b) in w.total.iter().enumerate() {
            let by_vertex: f64 = w.per_vertex.iter().map(|x| x[p]).sum();
            assert!((by_vertex - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn single_drifted_vertex_gives_one_factor() {
        let drifts = VertexDrifts::uniform(DriftFunctional::Zero).with(1, DriftFunctional::Constant { theta: 0.5 });
        let spec = SystemSpec::new(Graph::path(5), drifts, 0.5, InitialLaw::default());
        let k = SystemKernels::build(&spec, grid(4), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec.driftless(), &k, 20, 2).unwrap();
        let w = system_log_weights(&spec, &k, &ens, 4).unwrap();
        assert_eq!(w.factorization.nonzero(), vec![&set(&[0, 1, 2])]);
        let zero = system_log_weights(&spec.driftless(), &k, &ens, 4).unwrap();
        assert!(zero.factorization.nonzero().is_empty());
    }

    #[test]
    fn ci_test_rejects_obvious_dependence() {
        // Separator {1} misses vertex 2, which drives both 0 and 4 here.
        let mut g = Graph::path(3);
        g.add_edge(2, 4).unwrap();
        g.add_edge(2, 0).unwrap();
        let spec = SystemSpec::new(g, VertexDrifts::uniform("neighbor:0,0,3".parse().unwrap()), 0.5, InitialLaw::default());
        let k = SystemKernels::build(&spec, grid(8), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec, &k, 800, 5).unwrap();
        let r = conditional_independence_test(&ens, None, &set(&[0]), &set(&[4]), &set(&[1]), &CiOptions::default()).unwrap();
        assert!(r.p_value < 0.01, "{r:?}");
        assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn ci_test_input_checks() {
        let spec = path_spec(DriftFunctional::Zero, 0.5);
        let k = SystemKernels::build(&spec, grid(4), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec, &k, 3, 1).unwrap();
        let opts = CiOptions::default();
        assert!(conditional_independence_test(&ens, None, &set(&[0]), &set(&[1]), &set(&[1]), &opts).is_err());
        assert!(matches!(
            conditional_independence_test(&ens, None, &set(&[0]), &set(&[4]), &set(&[1, 2]), &opts),
            Err(Error::SeparatorDegenerate(_))
        ));
    }

    #[test]
    fn initial_law_parsing() {
        assert_eq!("point:1.5".parse::<InitialLaw>().unwrap(), InitialLaw::Point { x: 1.5 });
        assert_eq!("gauss:0,2".parse::<InitialLaw>().unwrap().to_string(), "gauss:0,2");
        assert!("gauss:0,-1".parse::<InitialLaw>().is_err());
    }

    #[test]
    fn zero_drift_entropy_vanishes() {
        let spec = path_spec(DriftFunctional::Zero, 0.3);
        let k = SystemKernels::build(&spec, grid(8), KernelScheme::default()).unwrap();
        let ens = simulate_system_euler(&spec, &k, 50, 1).unwrap();
        let w = system_log_weights(&spec, &k, &ens, 8).unwrap();
        let r = entropy_estimate(&spec, &k, &ens, &w, &set(&[2])).unwrap();
        assert_eq!(r.estimate.mean, 0.0);
        assert!(r.pass);
        assert_eq!(r.relevant, set(&[1, 2, 3]));
    }
}
