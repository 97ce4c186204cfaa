//! Discrete-time fundamental martingale of fBm increments.
//!
//! With unit-step autocovariance `A(k)` the increments `Z_1..Z_n` of fBm on
//! the grid `{i/n}` have covariance `R_n = n^{-2H} (A(|i-j|))`. The martingale
//! is `M_n = 1ᵀ R_n⁻¹ Z_n`; the inverse is grown one row at a time by
//! bordering, which exposes the conditional variance `λ_n` of each new
//! increment given the past.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::HurstParam;
use crate::linalg::cholesky_lower;
use crate::rng::{self, domain};
use crate::stats::Estimate;

/// Steps with `λ_n` at or below this are treated as deterministic.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// `½(|k-1|^{2H} + |k+1|^{2H} - 2|k|^{2H})`.
pub fn increment_autocovariance(h: HurstParam, k: u64) -> f64 {
    let e = 2.0 * h.value();
    let k = k as f64;
    let p = |x: f64| if x == 0.0 { 0.0 } else { x.abs().powf(e) };
    0.5 * (p(k - 1.0) + p(k + 1.0) - 2.0 * p(k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementCovariance {
    pub h: HurstParam,
    pub n: usize,
    /// Grid step; entries are `step^{2H} A(|i-j|)`.
    pub step: f64,
    pub matrix: DMatrix<f64>,
}

impl IncrementCovariance {
    /// Covariance of `n` increments on the grid of step `step`.
    pub fn with_step(h: HurstParam, n: usize, step: f64) -> Self {
        let scale = step.powf(2.0 * h.value());
        let a: Vec<f64> = (0..n as u64).map(|k| scale * increment_autocovariance(h, k)).collect();
        let matrix = DMatrix::from_fn(n, n, |i, j| a[i.abs_diff(j)]);
        IncrementCovariance { h, n, step, matrix }
    }
}

/// `R_n` for `n` increments of fBm on `[0, 1]`.
pub fn build_covariance(h: HurstParam, n: usize) -> IncrementCovariance {
    IncrementCovariance::with_step(h, n, 1.0 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseState {
    pub inv: DMatrix<f64>,
    /// `λ` of the most recent extension (the single entry for `n = 1`).
    pub lnd_margin: f64,
}

impl InverseState {
    pub fn initial(r11: f64) -> Result<Self> {
        if r11 <= LAMBDA_FLOOR {
            return Err(Error::LocalDeterminism { step: 0, lambda: r11 });
        }
        Ok(InverseState { inv: DMatrix::from_element(1, 1, 1.0 / r11), lnd_margin: r11 })
    }

    pub fn dim(&self) -> usize {
        self.inv.nrows()
    }
}

/// Extends `R_n⁻¹` to `R_{n+1}⁻¹` given the new column `R_{+n}` and corner
/// `R_{++}`.
pub fn schur_extend_inverse(state: &InverseState, border: &[f64], corner: f64) -> Result<InverseState> {
    let n = state.dim();
    if border.len() != n {
        return Err(Error::ShapeMismatch(format!("border of length {} for a size-{n} inverse", border.len())));
    }
    let r = DVector::from_column_slice(border);
    let u = &state.inv * &r;
    let lambda = corner - r.dot(&u);
    if !(lambda > LAMBDA_FLOOR) {
        return Err(Error::LocalDeterminism { step: n, lambda });
    }
    let mut inv = DMatrix::zeros(n + 1, n + 1);
    let top = &state.inv + &u * u.transpose() / lambda;
    inv.view_mut((0, 0), (n, n)).copy_from(&top);
    for i in 0..n {
        inv[(i, n)] = -u[i] / lambda;
        inv[(n, i)] = -u[i] / lambda;
    }
    inv[(n, n)] = 1.0 / lambda;
    Ok(InverseState { inv, lnd_margin: lambda })
}

/// Recursive inverse of a symmetric matrix together with every `λ_k`.
pub fn recursive_inverse(matrix: &DMatrix<f64>) -> Result<(InverseState, Vec<f64>)> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::ShapeMismatch(format!("expected a non-empty square matrix, got {}x{}", n, matrix.ncols())));
    }
    let mut state = InverseState::initial(matrix[(0, 0)])?;
    let mut lambdas = vec![state.lnd_margin];
    for k in 1..n {
        let border: Vec<f64> = (0..k).map(|i| matrix[(i, k)]).collect();
        state = schur_extend_inverse(&state, &border, matrix[(k, k)])?;
        lambdas.push(state.lnd_margin);
    }
    Ok((state, lambdas))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalWeights {
    pub hurst: f64,
    pub n: usize,
    pub step: f64,
    /// `1ᵀ R⁻¹` for the step-scaled covariance.
    pub w: Vec<f64>,
    /// `1ᵀ A⁻¹` for the unit-step Toeplitz matrix; `w = step^{-2H} · unscaled`.
    pub unscaled: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Weights on the grid of step `step`.
pub fn fundamental_weights_with_step(h: HurstParam, n: usize, step: f64) -> Result<FundamentalWeights> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one increment".into()));
    }
    let cov = IncrementCovariance::with_step(h, n, step);
    let (state, lambdas) = recursive_inverse(&cov.matrix)?;
    let w: Vec<f64> = (0..n).map(|j| state.inv.column(j).sum()).collect();
    let scale = step.powf(2.0 * h.value());
    let unscaled = w.iter().map(|x| x * scale).collect();
    Ok(FundamentalWeights { hurst: h.value(), n, step, w, unscaled, lambdas })
}

/// `w = 1ᵀ R_n⁻¹` on `[0, 1]`.
pub fn fundamental_weights(h: HurstParam, n: usize) -> Result<FundamentalWeights> {
    fundamental_weights_with_step(h, n, 1.0 / n as f64)
}

/// `A(0) - Σ_{k=1}^{n-1} |A(k)|`.
pub fn gershgorin_margin(h: HurstParam, n: usize) -> f64 {
    let off: f64 = (1..n as u64).map(|k| increment_autocovariance(h, k).abs()).sum();
    increment_autocovariance(h, 0) - off
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthogonalityStat {
    pub estimate: f64,
    pub stderr: f64,
}

/// MC estimate of `E[M_n (M_{n+1} - M_n)]` from `m_paths` exact samples of
/// `n + 1` increments.
pub fn martingale_orthogonality_stat(h: HurstParam, n: usize, m_paths: usize, seed: u64) -> Result<OrthogonalityStat> {
    if m_paths < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 paths, got {m_paths}")));
    }
    let step = 1.0 / (n + 1) as f64;
    let cov = IncrementCovariance::with_step(h, n + 1, step);
    let chol = cholesky_lower(cov.matrix)?;
    let w_n = fundamental_weights_with_step(h, n, step)?.w;
    let w_next = fundamental_weights_with_step(h, n + 1, step)?.w;
    let samples: Vec<f64> = (0..m_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut g = vec![0.0; n + 1];
            rng::fill_normal(&mut rng::stream(seed, domain::DISCRETE, p), &mut g, 1.0);
            let z = chol.mul_vec(&g);
            let m_n: f64 = w_n.iter().zip(&z).map(|(a, b)| a * b).sum();
            let m_next: f64 = w_next.iter().zip(&z).map(|(a, b)| a * b).sum();
            m_n * (m_next - m_n)
        })
        .collect();
    let e = Estimate::of(&samples);
    Ok(OrthogonalityStat { estimate: e.mean, stderr: e.stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(h: f64) -> HurstParam {
        HurstParam::new(h).unwrap()
    }

    #[test]
    fn autocovariance_examples() {
        for h in [0.1, 0.3, 0.5, 0.9] {
            assert_eq!(increment_autocovariance(hp(h), 0), 1.0);
        }
        for k in 1..6 {
            assert_eq!(increment_autocovariance(hp(0.5), k), 0.0);
        }
        let want = 0.5 * (2f64.powf(0.6) - 2.0);
        assert!((increment_autocovariance(hp(0.3), 1) - want).abs() < 1e-15);
        assert!((want + 0.242141).abs() < 1e-5);
    }

    #[test]
    fn brownian_covariance_is_scaled_identity() {
        let c = build_covariance(hp(0.5), 4);
        assert_eq!(c.matrix, DMatrix::identity(4, 4) * 0.25);
    }

    #[test]
    fn two_step_covariance() {
        let c = build_covariance(hp(0.3), 2);
        let s = 2f64.powf(-0.6);
        assert!((c.matrix[(0, 0)] - s).abs() < 1e-15);
        assert!((c.matrix[(0, 1)] - s * increment_autocovariance(hp(0.3), 1)).abs() < 1e-15);
    }

    #[test]
    fn brownian_lambdas_and_weights() {
        let w = fundamental_weights(hp(0.5), 5).unwrap();
        for (x, l) in w.w.iter().zip(&w.lambdas) {
            assert!((x - 5.0).abs() < 1e-12);
            assert!((l - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn determinism_floor_signal() {
        let singular = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(recursive_inverse(&singular), Err(Error::LocalDeterminism { step: 1, .. })));
    }

    #[test]
    fn gershgorin_brownian_is_one() {
        for n in [2, 5, 40] {
            assert_eq!(gershgorin_margin(hp(0.5), n), 1.0);
        }
    }

    #[test]
    fn orthogonality_requires_enough_paths() {
        assert!(martingale_orthogonality_stat(hp(0.3), 2, 10, 0).is_err());
    }
}
