//! Gauss-Legendre quadrature for integrands with algebraic endpoint
//! singularities.
//!
//! An integral over `[a, b]` is split at the midpoint. Each half is covered by
//! `panels / 2` panels graded geometrically toward its outer endpoint; the innermost panel
//! uses the substitution `u = a + w v^{1/γ}` with `γ = α + 1`, which turns a
//! leading factor `(u - a)^α` into a smooth integrand. Integrands receive the
//! distances to both endpoints so that `(u - a)^α` is never formed by
//! cancellation.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            weights[i] = 0.5 * w;
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Plain rule over `[lo, hi]`.
    pub fn apply(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let w = hi - lo;
        let mut acc = 0.0;
        for (x, wt) in self.nodes.iter().zip(&self.weights) {
            acc += wt * f(lo + w * x);
        }
        acc * w
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature evaluation point: the abscissa and its distances to the
/// interval endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_left: f64,
    pub from_right: f64,
}

/// Panel count, rule order and the absolute tolerance used by checked
/// integration.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    panels: usize,
    abs_tol: f64,
    rule: Arc<GaussLegendre>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::new(48, 16, 1e-9).expect("default quadrature is valid")
    }
}

impl QuadratureSpec {
    pub const MIN_PANELS: usize = 8;

    pub fn new(panels: usize, order: usize, abs_tol: f64) -> Result<Self> {
        if panels < Self::MIN_PANELS {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least {} panels, got {panels}",
                Self::MIN_PANELS
            )));
        }
        if !(abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if order < 2 {
            return Err(Error::InvalidParameter(format!("rule order must be >= 2, got {order}")));
        }
        Ok(QuadratureSpec { panels, abs_tol, rule: Arc::new(GaussLegendre::new(order)) })
    }

    pub fn with_panels(panels: usize) -> Result<Self> {
        Self::new(panels, 16, 1e-9)
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    /// Same rule with twice the panels.
    pub fn refined(&self) -> Self {
        QuadratureSpec { panels: self.panels * 2, abs_tol: self.abs_tol, rule: self.rule.clone() }
    }

    /// `∫_a^b f`, where `f` behaves like `(x-a)^left_exp` near `a` and like
    /// `(b-x)^right_exp` near `b`. Exponents must exceed -1.
    pub fn integrate<F>(&self, a: f64, b: f64, left_exp: f64, right_exp: f64, f: F) -> f64
    where
        F: Fn(Node) -> f64,
    {
        debug_assert!(left_exp > -1.0 && right_exp > -1.0, "non-integrable endpoint exponent");
        let len = b - a;
        if !(len > 0.0) {
            return 0.0;
        }
        let half = 0.5 * len;
        let left = self.graded_half(half, left_exp, |o| f(Node { x: a + o, from_left: o, from_right: len - o }));
        let right = self.graded_half(half, right_exp, |o| f(Node { x: b - o, from_left: len - o, from_right: o }));
        left + right
    }

    /// `∫_a^b f` with all panels graded toward `a` only, for integrands that
    /// are smooth at `b` but vary on the scale of the distance to `a`.
    pub fn integrate_toward_left<F>(&self, a: f64, b: f64, left_exp: f64, f: F) -> f64
    where
        F: Fn(Node) -> f64,
    {
        let len = b - a;
        if !(len > 0.0) {
            return 0.0;
        }
        let mut acc = 0.0;
        let mut hi = len;
        for _ in 0..self.panels {
            let lo = 0.5 * hi;
            acc += self.rule.apply(lo, hi, |o| f(Node { x: a + o, from_left: o, from_right: len - o }));
            hi = lo;
        }
        let inv = 1.0 / (left_exp + 1.0);
        let inner = self.rule.apply(0.0, 1.0, |v| {
            let o = hi * v.powf(inv);
            f(Node { x: a + o, from_left: o, from_right: len - o }) * v.powf(inv - 1.0)
        });
        acc + inner * hi * inv
    }

    /// Integral over offsets `o ∈ [0, half]` measured from the singular end.
    fn graded_half(&self, half: f64, exp: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut hi = half;
        for _ in 0..self.panels / 2 {
            let lo = 0.5 * hi;
            acc += self.rule.apply(lo, hi, &g);
            hi = lo;
        }
        // innermost panel [0, hi]: o = hi * v^{1/γ}
        let gamma = exp + 1.0;
        let inv = 1.0 / gamma;
        let jac_pow = inv - 1.0;
        let inner = self.rule.apply(0.0, 1.0, |v| {
            let o = hi * v.powf(inv);
            g(o) * v.powf(jac_pow)
        });
        acc + inner * hi * inv
    }

    /// Integrates with this spec and with doubled panels; fails when the two
    /// estimates differ by more than `abs_tol`.
    pub fn integrate_checked<F>(&self, a: f64, b: f64, left_exp: f64, right_exp: f64, f: F) -> Result<f64>
    where
        F: Fn(Node) -> f64,
    {
        let coarse = self.integrate(a, b, left_exp, right_exp, &f);
        let fine = self.refined().integrate(a, b, left_exp, right_exp, &f);
        let achieved = (fine - coarse).abs();
        if !fine.is_finite() || achieved > self.abs_tol {
            return Err(Error::QuadFailure { requested: self.abs_tol, achieved });
        }
        Ok(fine)
    }
}
