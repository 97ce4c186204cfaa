//! The acceptance suite as library code, shared by `selftest` and the
//! `acceptance` test target. Every report is a pure function of the seed;
//! wall-clock time is measured by the caller and kept out of the report.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::discrete::{build_covariance, gershgorin_margin, martingale_orthogonality_stat, recursive_inverse};
use crate::drift::DriftFunctional;
use crate::error::Result;
use crate::girsanov::{driftless_paths, girsanov_log_weights, importance_expectation, weight_mean_check};
use crate::graph::{boundary2, Graph, GraphSpec, Vertex, VertexDrifts, VertexSet};
use crate::kernels::{fbm_q_unit_drift, HurstParam, KernelSpec};
use crate::mrf::{
    conditional_independence_test, entropy_estimate, simulate_system_euler, system_log_weights, truncation_convergence, CiOptions,
    InitialLaw, SeparatorSummary, SystemKernels, SystemSpec,
};
use crate::paths::{discretize, drift_q_transform, fundamental_transform, hosking_paths, volterra_row, KernelScheme, TimeGrid};
use crate::quadrature::QuadratureSpec;
use crate::rng::{self, domain};
use crate::stats::{agree, ks_uniform, Estimate};

/// Wall-clock budgets in seconds, by criterion.
pub const BUDGETS: [f64; 10] = [10.0, 60.0, 60.0, 5.0, 120.0, 300.0, 600.0, 300.0, 120.0, f64::INFINITY];

pub const NAMES: [&str; 10] = [
    "kernel isometry",
    "discrete fundamental martingale",
    "fundamental transform",
    "drift transform",
    "girsanov martingale",
    "weak-solution equivalence",
    "2-MRF contract",
    "truncation convergence",
    "entropy bound",
    "determinism",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Divides every path count by 20 (floor 2000). Used for smoke runs;
    /// the stated contracts are only meaningful at full size.
    pub quick: bool,
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        SuiteConfig { seed, quick: false }
    }

    fn paths(&self, full: usize) -> usize {
        if self.quick {
            (full / 20).max(2000).min(full)
        } else {
            full
        }
    }

    fn reps(&self, full: usize) -> usize {
        if self.quick {
            (full / 5).max(10).min(full)
        } else {
            full
        }
    }

    fn sub(&self, key: u64) -> u64 {
        rng::derive(self.seed, domain::REPETITION, key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub summary: String,
    pub details: Value,
}

impl CriterionReport {
    fn new(id: usize, pass: bool, summary: String, details: Value) -> Self {
        CriterionReport { id, name: NAMES[id - 1].to_string(), pass, summary, details }
    }

    pub fn line(&self) -> String {
        format!("criterion {:>2} {:<32} {}  {}", self.id, self.name, if self.pass { "PASS" } else { "FAIL" }, self.summary)
    }
}

/// Runs criterion `id` in `1..=9`; criterion 10 needs the CLI and lives in
/// [`crate::cli`].
pub fn run(id: usize, cfg: &SuiteConfig) -> Result<CriterionReport> {
    match id {
        1 => kernel_isometry(),
        2 => discrete_martingale(cfg),
        3 => fundamental_transform_check(cfg),
        4 => drift_transform_check(),
        5 => girsanov_martingale(cfg),
        6 => weak_solution(cfg),
        7 => mrf_contract(cfg),
        8 => truncation(cfg),
        9 => entropy(cfg),
        _ => Err(crate::Error::InvalidParameter(format!("no library criterion {id}"))),
    }
}

pub fn kernel_isometry() -> Result<CriterionReport> {
    let quad = QuadratureSpec::with_panels(64)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for h in [0.3, 0.5, 0.7] {
        let spec = KernelSpec::fbm(h, 1.0)?;
        // The residual only sees (min, max) of its arguments, so the upper
        // triangle of the 8x8 grid covers every probe.
        let pairs: Vec<(usize, usize)> = (1..=8).flat_map(|i| (i..=8).map(move |j| (i, j))).collect();
        let res: Vec<f64> = pairs
            .into_par_iter()
            .map(|(i, j)| spec.isometry_residual(i as f64 / 8.0, j as f64 / 8.0, &quad))
            .collect::<Result<_>>()?;
        let w = res.iter().copied().fold(0.0, f64::max);
        worst = worst.max(w);
        rows.push(json!({ "hurst": h, "max_residual": w }));
    }
    Ok(CriterionReport::new(1, worst < 1e-4, format!("max residual {worst:.2e} < 1e-4"), json!({ "per_hurst": rows })))
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn discrete_martingale(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let mut inv_worst: f64 = 0.0;
    let mut lambda_min = f64::INFINITY;
    for h in [0.3, 0.5, 0.7] {
        let hp = HurstParam::new(h)?;
        for n in 1..=64 {
            let cov = build_covariance(hp, n);
            let (state, lambdas) = recursive_inverse(&cov.matrix)?;
            let dense = cov.matrix.clone().lu().try_inverse().ok_or(crate::Error::Cholesky)?;
            inv_worst = inv_worst.max(max_abs(&(&state.inv - &dense)));
            lambda_min = lambdas.iter().copied().fold(lambda_min, f64::min);
        }
    }
    let gersh = gershgorin_margin(HurstParam::new(0.3)?, 64);
    let m = cfg.paths(100_000);
    let mut ortho = Vec::new();
    let mut ortho_ok = true;
    for h in [0.3, 0.5, 0.7] {
        for n in [2usize, 4, 8] {
            let s = martingale_orthogonality_stat(HurstParam::new(h)?, n, m, cfg.sub(200 + n as u64))?;
            let ok = s.estimate.abs() < 3.0 * s.stderr;
            ortho_ok &= ok;
            ortho.push(json!({ "hurst": h, "n": n, "estimate": s.estimate, "stderr": s.stderr, "pass": ok }));
        }
    }
    let pass = inv_worst < 1e-8 && lambda_min > 0.0 && gersh >= 0.5 && ortho_ok;
    Ok(CriterionReport::new(
        2,
        pass,
        format!("inverse err {inv_worst:.1e}, min lambda {lambda_min:.3e}, gershgorin {gersh:.3}, orthogonality {}", ok_word(ortho_ok)),
        json!({
            "inverse_max_abs_error": inv_worst,
            "min_lambda": lambda_min,
            "gershgorin_margin_h03": gersh,
            "paths": m,
            "orthogonality": ortho,
        }),
    ))
}

fn ok_word(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "failed"
    }
}

/// Quarter nodes of a 32-step grid, used as covariance probes.
const PROBES: [usize; 4] = [8, 16, 24, 32];

pub fn fundamental_transform_check(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 32)?;
    let m = cfg.paths(100_000);
    let mut round_trip: f64 = 0.0;
    let mut cov_rows = Vec::new();
    let mut cov_ok = true;
    for (k, h) in [0.3, 0.7].into_iter().enumerate() {
        let spec = KernelSpec::fbm(h, 1.0)?;
        let kernel = discretize(&spec, grid, KernelScheme::Innovation)?;
        let z = hosking_paths(HurstParam::new(h)?, grid, m, cfg.sub(300 + k as u64))?;
        let w = fundamental_transform(&kernel, &z)?;
        for p in 0..m.min(2000) {
            let back = volterra_row(&kernel, w.row(p));
            for (a, b) in back.iter().zip(z.row(p)) {
                round_trip = round_trip.max((a - b).abs());
            }
        }
        let cum = w.cumulative();
        for (a, &i) in PROBES.iter().enumerate() {
            for &j in &PROBES[a..] {
                let prod: Vec<f64> = cum.iter().map(|r| r[i] * r[j]).collect();
                let e = Estimate::of(&prod);
                let target = grid.t(i).min(grid.t(j));
                let ok = e.within(target, 3.0);
                cov_ok &= ok;
                cov_rows.push(json!({ "hurst": h, "t": grid.t(i), "s": grid.t(j), "estimate": e.mean, "stderr": e.stderr, "pass": ok }));
            }
        }
    }
    let pass = round_trip < 1e-10 && cov_ok;
    Ok(CriterionReport::new(
        3,
        pass,
        format!("round trip {round_trip:.1e}, Cov(W*) vs min(t,s) {}", ok_word(cov_ok)),
        json!({ "round_trip_max_abs": round_trip, "paths": m, "scheme": "innovation", "sampler": "hosking", "covariance": cov_rows }),
    ))
}

pub fn drift_transform_check() -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 128)?;
    let h = 0.3;
    let kernel = discretize(&KernelSpec::fbm(h, 1.0)?, grid, KernelScheme::CellAverage)?;
    let cumulative = grid.nodes();
    let q = drift_q_transform(&kernel, &cumulative)?;
    let dt = grid.dt();
    let recon = kernel.matrix.mul_vec(&q.iter().map(|x| x * dt).collect::<Vec<_>>());
    let recon_err = recon.iter().zip(&cumulative[1..]).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let lam = fbm_q_unit_drift(HurstParam::new(h)?, 1.0)?;
    let mut closed_err: f64 = 0.0;
    for (j, qj) in q.iter().enumerate() {
        let (a, b) = (grid.t(j), grid.t(j + 1));
        if a < 0.1 {
            continue;
        }
        let avg = lam * (b.powf(1.5 - h) - a.powf(1.5 - h)) / ((1.5 - h) * (b - a));
        closed_err = closed_err.max((qj - avg).abs());
    }
    let pass = recon_err < 1e-10 && closed_err < 1e-3;
    Ok(CriterionReport::new(
        4,
        pass,
        format!("reconstruction {recon_err:.1e}, closed form {closed_err:.2e} < 1e-3 on t >= 0.1"),
        json!({ "steps": 128, "reconstruction_max_abs": recon_err, "closed_form_max_abs": closed_err }),
    ))
}

pub fn girsanov_martingale(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 32)?;
    let m = cfg.paths(100_000);
    let indices = [4usize, 8, 16, 24, 32];
    let drifts: [DriftFunctional; 2] = [DriftFunctional::Constant { theta: 0.7 }, DriftFunctional::BoundedTanh { theta: 1.0, scale: 1.0 }];
    let mut rows = Vec::new();
    let mut all = true;
    for (k, h) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let kernel = discretize(&KernelSpec::fbm(h, 1.0)?, grid, KernelScheme::CellAverage)?;
        let paths = driftless_paths(&kernel, 0.0, m, cfg.sub(500 + k as u64))?;
        for d in &drifts {
            let lw = girsanov_log_weights(&kernel, d, &paths)?;
            for r in weight_mean_check(&lw, &indices) {
                all &= r.pass;
                rows.push(json!({ "hurst": h, "drift": d.to_string(), "t": r.t, "mean": r.mean, "stderr": r.stderr, "pass": r.pass }));
            }
        }
    }
    Ok(CriterionReport::new(
        5,
        all,
        format!("{} weight means within 3 stderr of 1: {}", rows.len(), ok_word(all)),
        json!({ "paths": m, "rows": rows }),
    ))
}

fn moments(vals: &[f64]) -> [Vec<f64>; 2] {
    [vals.to_vec(), vals.iter().map(|x| x * x).collect()]
}

pub fn weak_solution(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 32)?;
    let m = cfg.paths(100_000);
    let cases: Vec<(&str, Graph, DriftFunctional, Vertex)> = vec![
        ("single vertex", Graph::path(1), DriftFunctional::Linear { theta0: 0.5, theta1: -1.0 }, 0),
        ("path:5", Graph::path(5), DriftFunctional::NeighborLinear { theta0: 0.3, theta1: -0.5, theta2: 0.4 }, 2),
    ];
    let mut rows = Vec::new();
    let mut all = true;
    for (c, (label, graph, drift, probe)) in cases.into_iter().enumerate() {
        for (k, h) in [0.3, 0.7].into_iter().enumerate() {
            let spec = SystemSpec::new(graph.clone(), VertexDrifts::uniform(drift), h, InitialLaw::Point { x: 0.0 });
            let kernels = SystemKernels::build(&spec, grid, KernelScheme::CellAverage)?;
            let key = 600 + 10 * c as u64 + k as u64;
            let direct = simulate_system_euler(&spec, &kernels, m, cfg.sub(key))?;
            let free = simulate_system_euler(&spec.driftless(), &kernels, m, cfg.sub(key + 1000))?;
            let lw = system_log_weights(&spec, &kernels, &free, grid.steps)?;
            let xd = direct.vertex(probe)?.column(grid.steps);
            let xf = free.vertex(probe)?.column(grid.steps);
            for (name, (d, f)) in ["E[X_T]", "E[X_T^2]"].iter().zip(moments(&xd).into_iter().zip(moments(&xf))) {
                let de = Estimate::of(&d);
                let ie = importance_expectation(&f, &lw.total)?;
                let ok = agree(&de, &ie.as_estimate(), 3.0);
                all &= ok;
                rows.push(json!({
                    "case": label, "hurst": h, "vertex": probe, "moment": name,
                    "euler": de.mean, "euler_stderr": de.stderr,
                    "reweighted": ie.estimate, "reweighted_stderr": ie.stderr, "ess": ie.ess, "pass": ok,
                }));
            }
        }
    }
    Ok(CriterionReport::new(
        6,
        all,
        format!("{} Euler vs reweighted comparisons within combined 3 sigma: {}", rows.len(), ok_word(all)),
        json!({ "paths": m, "rows": rows }),
    ))
}

fn set(vs: &[Vertex]) -> VertexSet {
    vs.iter().copied().collect()
}

/// Rejection count of the CI test over seeded repetitions.
fn ci_repetitions(
    spec: &SystemSpec,
    kernels: &SystemKernels,
    reps: usize,
    m: usize,
    s: &VertexSet,
    base: u64,
) -> Result<Vec<f64>> {
    (0..reps as u64)
        .map(|r| {
            let seed = rng::derive(base, domain::REPETITION, r);
            let ens = simulate_system_euler(spec, kernels, m, seed)?;
            let opts = CiOptions { summary_points: 4, separator: SeparatorSummary::FullPath, perms: 500, seed };
            Ok(conditional_independence_test(&ens, None, &set(&[0]), &set(&[4]), s, &opts)?.p_value)
        })
        .collect()
}

pub fn mrf_contract(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 16)?;
    let m = 1000;
    let graph = Graph::path(5);
    let sep = boundary2(&graph, &set(&[0]));
    let coupled = SystemSpec::new(
        graph.clone(),
        VertexDrifts::uniform(DriftFunctional::NeighborLinear { theta0: 0.2, theta1: -0.5, theta2: 1.5 }),
        0.3,
        InitialLaw::Point { x: 0.0 },
    );
    let kernels = SystemKernels::build(&coupled, grid, KernelScheme::CellAverage)?;
    let reps = cfg.reps(50);
    let p_coupled = ci_repetitions(&coupled, &kernels, reps, m, &sep, cfg.sub(700))?;
    let rejections = p_coupled.iter().filter(|&&p| p < 0.05).count();
    let sigma = (0.05f64 * 0.95 / reps as f64).sqrt();
    let rate = rejections as f64 / reps as f64;
    let contract_ok = rate <= 0.05 + 3.0 * sigma;

    let null_reps = cfg.reps(200);
    let p_null = ci_repetitions(&coupled.driftless(), &kernels, null_reps, m, &sep, cfg.sub(701))?;
    let ks = ks_uniform(&p_null);
    let null_ok = ks < 0.1;

    let power_reps = cfg.reps(50);
    let p_small = ci_repetitions(&coupled, &kernels, power_reps, m, &set(&[1]), cfg.sub(702))?;
    let power = p_small.iter().filter(|&&p| p < 0.05).count() as f64 / power_reps as f64;

    Ok(CriterionReport::new(
        7,
        contract_ok && null_ok,
        format!("rejection rate {rate:.3} <= {:.3}, null KS {ks:.3} < 0.1, power with S={{1}} {power:.2}", 0.05 + 3.0 * sigma),
        json!({
            "separator": sep, "paths": m, "steps": grid.steps, "perms": 500,
            "repetitions": reps, "rejections": rejections, "rejection_rate": rate, "threshold": 0.05 + 3.0 * sigma,
            "null_repetitions": null_reps, "null_ks": ks,
            "power_separator": [1], "power_rejection_rate": power,
        }),
    ))
}

pub fn truncation(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 32)?;
    let m = cfg.paths(20_000);
    let zline: GraphSpec = "zline".parse()?;
    let drifts = VertexDrifts::uniform(DriftFunctional::NeighborLinear { theta0: 0.5, theta1: -0.5, theta2: 0.8 });
    let r = truncation_convergence(
        zline.presented(),
        &drifts,
        0.7,
        InitialLaw::Point { x: 0.0 },
        &set(&[0]),
        10.0,
        &[4, 5, 6, 7],
        grid,
        m,
        cfg.sub(800),
    )?;
    let d = &r.differences;
    Ok(CriterionReport::new(
        8,
        r.pass,
        format!("|est7-est6| = {:.2e} vs |est5-est4| = {:.2e} + 3 combined stderr", d[2].abs(), d[0].abs()),
        serde_json::to_value(&r).map_err(|e| crate::Error::Parse(e.to_string()))?,
    ))
}

pub fn entropy(cfg: &SuiteConfig) -> Result<CriterionReport> {
    let grid = TimeGrid::new(1.0, 32)?;
    let m = cfg.paths(100_000);
    let spec = SystemSpec::new(
        Graph::path(5),
        VertexDrifts::uniform(DriftFunctional::NeighborLinear { theta0: 0.3, theta1: -0.5, theta2: 0.8 }),
        0.3,
        InitialLaw::Point { x: 0.0 },
    );
    let kernels = SystemKernels::build(&spec, grid, KernelScheme::CellAverage)?;
    let free = simulate_system_euler(&spec.driftless(), &kernels, m, cfg.sub(900))?;
    let weights = system_log_weights(&spec, &kernels, &free, grid.steps)?;
    let mut rows = Vec::new();
    let mut bound_ok = true;
    for a in [set(&[2]), set(&[1, 2]), set(&[1, 2, 3])] {
        let r = entropy_estimate(&spec, &kernels, &free, &weights, &a)?;
        bound_ok &= r.pass;
        rows.push(serde_json::to_value(&r).map_err(|e| crate::Error::Parse(e.to_string()))?);
    }

    let theta = 0.7;
    let single = SystemSpec::new(Graph::path(1), VertexDrifts::uniform(DriftFunctional::Constant { theta }), 0.5, InitialLaw::Point { x: 0.0 });
    let sk = SystemKernels::build(&single, grid, KernelScheme::CellAverage)?;
    let sfree = simulate_system_euler(&single.driftless(), &sk, m, cfg.sub(901))?;
    let sw = system_log_weights(&single, &sk, &sfree, grid.steps)?;
    let sr = entropy_estimate(&single, &sk, &sfree, &sw, &set(&[0]))?;
    let exact = theta * theta / 2.0;
    let brownian_ok = sr.estimate.within(exact, 3.0);
    Ok(CriterionReport::new(
        9,
        bound_ok && brownian_ok,
        format!(
            "bound holds for |A| = 1,2,3: {}; Brownian entropy {:.4} +- {:.4} vs {exact:.4}",
            ok_word(bound_ok),
            sr.estimate.mean,
            sr.estimate.stderr
        ),
        json!({ "paths": m, "path_graph": rows, "brownian": { "theta": theta, "exact": exact, "estimate": sr.estimate, "pass": brownian_ok } }),
    ))
}
