//! Volterra kernels for fractional Brownian motion and for the
//! Mishura/Sonine family.
//!
//! For fBm with Hurst index `H` the process is `Z_t = ∫_0^t K(t,s) dW_s` and
//! the inverse kernel `L` recovers the driving Brownian motion,
//! `W*_t = ∫_0^t L(t,s) dZ_s`. `H = 1/2` short-circuits to `K = L = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{Node, QuadratureSpec};
use crate::special::{beta, beta_inc};

/// Hurst index, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(HurstParam(h))
        } else {
            Err(Error::InvalidParameter(format!("Hurst index must lie in (0,1), got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

impl fmt::Display for HurstParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The constant `c_H` in front of the fBm kernel.
pub fn normalization_constant(h: HurstParam) -> Result<f64> {
    let h = h.value();
    if h == 0.5 {
        return Err(Error::DegenerateKernel);
    }
    let sq = if h > 0.5 {
        h * (2.0 * h - 1.0) / beta(2.0 - 2.0 * h, h - 0.5)
    } else {
        2.0 * h / ((1.0 - 2.0 * h) * beta(1.0 - 2.0 * h, h + 0.5))
    };
    Ok(sq.sqrt())
}

/// Constant that turns the bracketed inverse-kernel expression into the
/// kernel `L` for which `∫ L dZ` is a standard Brownian motion.
pub fn inverse_kernel_constant(h: HurstParam) -> Result<f64> {
    let c = normalization_constant(h)?;
    let hv = h.value();
    Ok(if hv > 0.5 { (PI * (hv - 0.5)).sin() / (PI * c) } else { (PI * hv).cos() / (PI * c) })
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Functions `c, h` with `∫_0^t c(s) h(t-s) ds = 1` for all `t`.
///
/// The exponents describe the leading power of each function at zero and
/// steer the quadrature substitution.
#[derive(Clone)]
pub struct SoninePair {
    pub c: ScalarFn,
    pub h: ScalarFn,
    pub c_exponent: f64,
    pub h_exponent: f64,
}

impl fmt::Debug for SoninePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SoninePair")
            .field("c_exponent", &self.c_exponent)
            .field("h_exponent", &self.h_exponent)
            .finish()
    }
}

impl SoninePair {
    /// `c(u) = u^{α-1}`, `h(u) = sin(πα)/π · u^{-α}` for `α ∈ (0,1)`.
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("Sonine power must lie in (0,1), got {alpha}")));
        }
        let k = (PI * alpha).sin() / PI;
        Ok(SoninePair {
            c: Arc::new(move |u: f64| u.powf(alpha - 1.0)),
            h: Arc::new(move |u: f64| k * u.powf(-alpha)),
            c_exponent: alpha - 1.0,
            h_exponent: -alpha,
        })
    }

    /// `|∫_0^t c(s) h(t-s) ds - 1|`.
    pub fn residual(&self, t: f64, quad: &QuadratureSpec) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("Sonine residual needs t > 0, got {t}")));
        }
        let (c, h) = (&self.c, &self.h);
        let v = quad.integrate_checked(0.0, t, self.c_exponent, self.h_exponent, |n| {
            c(n.from_left) * h(n.from_right)
        })?;
        Ok((v - 1.0).abs())
    }
}

/// `sonine_residual` as a free function.
pub fn sonine_residual(pair: &SoninePair, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    pair.residual(t, quad)
}

/// Kernel `K(t,s) = a(s) ∫_s^t b(u) c(u-s) du` with inverse
/// `L(t,s) = h(t-s)/(a(t)b(s)) + 1/b(s) ∫_s^t a'(v) h(v-s)/a(v)^2 dv`.
#[derive(Clone)]
pub struct MishuraKernel {
    pub a: ScalarFn,
    pub a_prime: ScalarFn,
    pub b: ScalarFn,
    pub pair: SoninePair,
    /// Leading power of `a` at zero.
    pub a_exponent: f64,
    /// Integrability exponents `(p, q, r)` of `a, b, c`.
    pub integrability: (f64, f64, f64),
}

impl fmt::Debug for MishuraKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MishuraKernel")
            .field("pair", &self.pair)
            .field("a_exponent", &self.a_exponent)
            .field("integrability", &self.integrability)
            .finish()
    }
}

impl MishuraKernel {
    /// Checks the declared exponents: `p ≥ 2`, `q, r ≥ 1` and
    /// `1/p + 1/q + 1/r ≤ 3/2`.
    pub fn new(
        a: ScalarFn,
        a_prime: ScalarFn,
        b: ScalarFn,
        pair: SoninePair,
        a_exponent: f64,
        integrability: (f64, f64, f64),
    ) -> Result<Self> {
        let (p, q, r) = integrability;
        if !(p >= 2.0 && q >= 1.0 && r >= 1.0) {
            return Err(Error::InvalidParameter(format!("integrability exponents out of range: {integrability:?}")));
        }
        let sum = 1.0 / p + 1.0 / q + 1.0 / r;
        if sum > 1.5 {
            return Err(Error::InvalidParameter(format!("1/p + 1/q + 1/r = {sum} exceeds 3/2")));
        }
        Ok(MishuraKernel { a, a_prime, b, pair, a_exponent, integrability })
    }

    /// The fBm kernel for `H > 1/2` written in Mishura form.
    pub fn fbm(h: HurstParam) -> Result<Self> {
        let hv = h.value();
        if hv <= 0.5 {
            return Err(Error::InvalidParameter(format!("Mishura form of fBm needs H > 1/2, got {hv}")));
        }
        let ch = normalization_constant(h)?;
        let pair = SoninePair::power(hv - 0.5)?;
        let p = 2.0;
        let r = (0.99 / (1.5 - hv)).max(1.0);
        Self::new(
            Arc::new(move |s: f64| ch * s.powf(0.5 - hv)),
            Arc::new(move |s: f64| ch * (0.5 - hv) * s.powf(-0.5 - hv)),
            Arc::new(move |u: f64| u.powf(hv - 0.5)),
            pair,
            0.5 - hv,
            (p, f64::INFINITY, r),
        )
    }

    pub fn kernel(&self, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
        if s >= t {
            return Ok(0.0);
        }
        if s <= 0.0 {
            return Err(Error::BoundarySingularity { s });
        }
        let (b, c) = (&self.b, &self.pair.c);
        let inner = quad.integrate(s, t, self.pair.c_exponent, 0.0, |n| b(n.x) * c(n.from_left));
        Ok((self.a)(s) * inner)
    }

    /// Inverse kernel `L(t,s)`.
    pub fn inverse_kernel(&self, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
        if s >= t {
            return Ok(0.0);
        }
        if s <= 0.0 {
            return Err(Error::BoundarySingularity { s });
        }
        let at = (self.a)(t);
        let bs = (self.b)(s);
        if at == 0.0 || bs == 0.0 || !at.is_finite() || !bs.is_finite() {
            return Err(Error::KernelDegenerate(format!("a(t) = {at}, b(s) = {bs}")));
        }
        let (a, ap, h) = (&self.a, &self.a_prime, &self.pair.h);
        let integral = quad.integrate(s, t, self.pair.h_exponent, 0.0, |n| {
            let av = a(n.x);
            ap(n.x) * h(n.from_left) / (av * av)
        });
        Ok((h)(t - s) / (at * bs) + integral / bs)
    }
}

/// `mishura_L` as a free function.
pub fn mishura_l(kernel: &MishuraKernel, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    kernel.inverse_kernel(t, s, quad)
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    FBm(HurstParam),
    Mishura(Arc<MishuraKernel>),
}

/// A Volterra kernel family on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    horizon: f64,
    quad: QuadratureSpec,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let quad = QuadratureSpec::new(40, 12, 1e-9)?;
        Ok(KernelSpec { family, horizon, quad })
    }

    pub fn fbm(h: f64, horizon: f64) -> Result<Self> {
        Self::new(KernelFamily::FBm(HurstParam::new(h)?), horizon)
    }

    pub fn mishura(kernel: MishuraKernel, horizon: f64) -> Result<Self> {
        Self::new(KernelFamily::Mishura(Arc::new(kernel)), horizon)
    }

    /// Replaces the quadrature used for pointwise kernel evaluation.
    pub fn with_quadrature(mut self, quad: QuadratureSpec) -> Self {
        self.quad = quad;
        self
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hurst(&self) -> Option<HurstParam> {
        match self.family {
            KernelFamily::FBm(h) => Some(h),
            KernelFamily::Mishura(_) => None,
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self.family, KernelFamily::FBm(h) if h.is_brownian())
    }

    /// `R(t,s) = E[Z_t Z_s]`.
    pub fn covariance(&self, t: f64, s: f64) -> f64 {
        match &self.family {
            KernelFamily::FBm(h) => fbm_covariance(h.value(), t, s),
            KernelFamily::Mishura(k) => {
                let m = t.min(s);
                if m <= 0.0 {
                    return 0.0;
                }
                let q = &self.quad;
                q.integrate(0.0, m, 2.0 * k.a_exponent, 0.0, |n| {
                    let u = n.x;
                    k.kernel(t, u, q).unwrap_or(f64::NAN) * k.kernel(s, u, q).unwrap_or(f64::NAN)
                })
            }
        }
    }

    /// `K(t,s)`, zero for `s ≥ t`.
    pub fn kernel_k(&self, t: f64, s: f64) -> Result<f64> {
        if s >= t {
            return Ok(0.0);
        }
        if s <= 0.0 {
            return Err(Error::BoundarySingularity { s });
        }
        match &self.family {
            KernelFamily::FBm(h) if h.is_brownian() => Ok(1.0),
            KernelFamily::FBm(h) => fbm_kernel(*h, t, s, t - s, &self.quad),
            KernelFamily::Mishura(k) => k.kernel(t, s, &self.quad),
        }
    }

    fn kernel_k_gap(&self, t: f64, s: f64, gap: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::FBm(h) if !h.is_brownian() && gap > 0.0 && s > 0.0 => fbm_kernel(*h, t, s, gap, &self.quad),
            _ => self.kernel_k(t, s),
        }
    }

    /// `L(t,s)`, zero for `s ≥ t`.
    pub fn kernel_l(&self, t: f64, s: f64) -> Result<f64> {
        if s >= t {
            return Ok(0.0);
        }
        if s <= 0.0 {
            return Err(Error::BoundarySingularity { s });
        }
        match &self.family {
            KernelFamily::FBm(h) if h.is_brownian() => Ok(1.0),
            KernelFamily::FBm(h) => Ok(inverse_kernel_constant(*h)? * inverse_kernel_shape(*h, t, s, &self.quad)?),
            KernelFamily::Mishura(k) => k.inverse_kernel(t, s, &self.quad),
        }
    }

    /// `∫_0^s K(t,r) dr`, the cross-covariance `E[Z_t W_s]`.
    pub fn cumulative_k(&self, t: f64, s: f64) -> Result<f64> {
        let s = s.min(t);
        if s <= 0.0 {
            return Ok(0.0);
        }
        match &self.family {
            KernelFamily::FBm(h) if h.is_brownian() => Ok(s),
            KernelFamily::FBm(h) => fbm_cumulative_kernel(*h, t, s, &self.quad),
            KernelFamily::Mishura(k) => {
                let q = &self.quad;
                let v = q.integrate(0.0, s, k.a_exponent, 0.0, |n| k.kernel(t, n.x, q).unwrap_or(f64::NAN));
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::KernelDiscretization(format!("non-finite cumulative kernel at t={t}, s={s}")))
                }
            }
        }
    }

    /// `|∫_0^{t∧s} K(t,u) K(s,u) du - R(t,s)|`.
    pub fn isometry_residual(&self, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
        if !(t > 0.0 && s > 0.0) {
            return Err(Error::InvalidParameter(format!("isometry residual needs t, s > 0, got ({t}, {s})")));
        }
        if self.is_brownian() {
            return Ok((t.min(s) - self.covariance(t, s)).abs());
        }
        let m = t.min(s);
        let (left, right) = match &self.family {
            KernelFamily::FBm(h) => {
                let hv = h.value();
                (-(2.0 * hv - 1.0).abs(), if t == s { 2.0 * hv - 1.0 } else { hv - 0.5 })
            }
            KernelFamily::Mishura(k) => (2.0 * k.a_exponent, 0.0),
        };
        let far = t.max(s) - m;
        let v = quad.integrate_checked(0.0, m, left, right, |n| {
            let u = n.x;
            let k_near = self.kernel_k_gap(m, u, n.from_right);
            let k_far = self.kernel_k_gap(t.max(s), u, far + n.from_right);
            k_near.unwrap_or(f64::NAN) * k_far.unwrap_or(f64::NAN)
        })?;
        Ok((v - self.covariance(t, s)).abs())
    }
}

/// `½(t^{2H} + s^{2H} - |t-s|^{2H})`.
pub fn fbm_covariance(h: f64, t: f64, s: f64) -> f64 {
    if h == 0.5 {
        return t.min(s);
    }
    if t == s {
        return t.abs().powf(2.0 * h);
    }
    let e = 2.0 * h;
    0.5 * (t.abs().powf(e) + s.abs().powf(e) - (t - s).abs().powf(e))
}

/// `K(t,s)` with the gap `t - s` supplied separately, so that cells next to
/// the diagonal keep full relative precision.
fn fbm_kernel(h: HurstParam, t: f64, s: f64, gap: f64, quad: &QuadratureSpec) -> Result<f64> {
    let hv = h.value();
    let ch = normalization_constant(h)?;
    if hv > 0.5 {
        // Integrated by parts so the remaining integrand is bounded:
        // ∫_s^t (u-s)^{b-1} u^b du = (t-s)^b t^b / b - ∫_s^t (u-s)^b u^{b-1} du, b = H - 1/2.
        let b = hv - 0.5;
        let rest = quad.integrate(0.0, gap, b, 0.0, |n| n.x.powf(b) * (s + n.x).powf(b - 1.0));
        Ok(ch * s.powf(-b) * ((gap * t).powf(b) / b - rest))
    } else {
        // s^{1/2-H} ∫_s^t u^{H-3/2}(u-s)^{H-1/2} du = s^{H-1/2} ∫_{s/t}^1 x^{-2H}(1-x)^{H-1/2} dx
        let tail = beta_inc(hv + 0.5, 1.0 - 2.0 * hv, gap / t);
        let lead = (t * gap / s).powf(hv - 0.5);
        Ok(ch * (lead - (hv - 0.5) * s.powf(hv - 0.5) * tail))
    }
}

/// The bracketed expression of the fBm inverse kernel, without the
/// normalizing constant.
pub fn inverse_kernel_shape(h: HurstParam, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    if s >= t {
        return Ok(0.0);
    }
    if s <= 0.0 {
        return Err(Error::BoundarySingularity { s });
    }
    let hv = h.value();
    if hv == 0.5 {
        return Ok(1.0);
    }
    if hv > 0.5 {
        let e = 0.5 - hv;
        let integral = quad.integrate(s, t, e, 0.0, |n| n.from_left.powf(e) * n.x.powf(hv - 1.5));
        Ok((s * (t - s) / t).powf(e) - (hv - 0.5) * s.powf(e) * integral)
    } else {
        // By parts with β = 1/2 - H:
        // ∫_s^t (r-s)^{β-1} r^{-β} dr = ((t-s)/t)^β / β + ∫_s^t (r-s)^β r^{-β-1} dr.
        let b = 0.5 - hv;
        let rest = quad.integrate(s, t, b, 0.0, |n| n.from_left.powf(b) * n.x.powf(-b - 1.0));
        Ok(s.powf(b) * (((t - s) / t).powf(b) / b + rest))
    }
}

/// `∫_0^s K(t,r) dr` for fBm, reduced to one-dimensional integrals of
/// incomplete Beta functions.
fn fbm_cumulative_kernel(h: HurstParam, t: f64, s: f64, quad: &QuadratureSpec) -> Result<f64> {
    let hv = h.value();
    let ch = normalization_constant(h)?;
    let p = hv + 0.5;
    if hv > 0.5 {
        let (a, b) = (1.5 - hv, hv - 0.5);
        let full = beta(a, b);
        let tail = quad.integrate_toward_left(s, t, 0.0, |n| n.x.powf(hv - 0.5) * beta_inc(a, b, s / n.x));
        Ok(ch * (full * s.powf(p) / p + tail))
    } else {
        let (a, b) = (1.5 - hv, hv + 0.5);
        let full = beta(a, b);
        let lead = t.powf(p) * beta_inc(a, b, s / t);
        let tail = quad.integrate_toward_left(s, t, 0.0, |n| n.x.powf(hv - 0.5) * beta_inc(a, b, s / n.x));
        Ok(ch * (lead - (hv - 0.5) * (full * s.powf(p) / p + tail)))
    }
}

/// Drift transform in closed form for `H < 1/2`:
/// `Q(t) = λ_H t^{H-1/2} ∫_0^t (t-s)^{-H-1/2} s^{1/2-H} b(s) ds`.
pub fn fbm_q_closed_form(
    h: HurstParam,
    t: f64,
    drift: impl Fn(f64) -> f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let hv = h.value();
    if hv >= 0.5 {
        return Err(Error::InvalidParameter(format!("closed-form drift transform needs H < 1/2, got {hv}")));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let lam = inverse_kernel_constant(h)?;
    let integral = quad.integrate(0.0, t, 0.5 - hv, -hv - 0.5, |n: Node| {
        n.from_right.powf(-hv - 0.5) * n.from_left.powf(0.5 - hv) * drift(n.x)
    });
    Ok(lam * t.powf(hv - 0.5) * integral)
}

/// `Q(t)` for the unit drift `b ≡ 1`, `H < 1/2`:
/// `λ_H B(3/2-H, 1/2-H) t^{1/2-H}`.
pub fn fbm_q_unit_drift(h: HurstParam, t: f64) -> Result<f64> {
    let hv = h.value();
    if hv >= 0.5 {
        return Err(Error::InvalidParameter(format!("closed-form drift transform needs H < 1/2, got {hv}")));
    }
    Ok(inverse_kernel_constant(h)? * beta(1.5 - hv, 0.5 - hv) * t.powf(0.5 - hv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSpec {
        QuadratureSpec::with_panels(64).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(HurstParam::new(0.5).unwrap().is_brownian());
    }

    #[test]
    fn brownian_normalization_is_degenerate() {
        let h = HurstParam::new(0.5).unwrap();
        assert_eq!(normalization_constant(h), Err(Error::DegenerateKernel));
    }

    #[test]
    fn kernel_approaches_brownian_at_half() {
        let c = normalization_constant(HurstParam::new(0.499).unwrap()).unwrap();
        assert!((c - 1.0).abs() < 1e-2, "c_H = {c}");
        for h in [0.499, 0.501] {
            let k = KernelSpec::fbm(h, 1.0).unwrap().kernel_k(1.0, 0.5).unwrap();
            assert!((k - 1.0).abs() < 1e-2, "K at H={h}: {k}");
        }
    }

    #[test]
    fn covariance_examples() {
        let bm = KernelSpec::fbm(0.5, 1.0).unwrap();
        assert!((bm.covariance(0.3, 0.7) - 0.3).abs() < 1e-15);
        for h in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let k = KernelSpec::fbm(h, 1.0).unwrap();
            assert!((k.covariance(1.0, 1.0) - 1.0).abs() < 1e-15);
        }
        let k = KernelSpec::fbm(0.3, 1.0).unwrap();
        assert!((k.covariance(1.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn volterra_support_and_brownian_kernels() {
        let bm = KernelSpec::fbm(0.5, 1.0).unwrap();
        assert_eq!(bm.kernel_k(0.9, 0.2).unwrap(), 1.0);
        assert_eq!(bm.kernel_l(1.0, 0.1).unwrap(), 1.0);
        let k3 = KernelSpec::fbm(0.3, 1.0).unwrap();
        assert_eq!(k3.kernel_k(0.5, 0.8).unwrap(), 0.0);
        let k7 = KernelSpec::fbm(0.7, 1.0).unwrap();
        assert_eq!(k7.kernel_l(0.2, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn boundary_singularity_signal() {
        let k = KernelSpec::fbm(0.3, 1.0).unwrap();
        assert!(matches!(k.kernel_k(1.0, 0.0), Err(Error::BoundarySingularity { .. })));
        assert!(matches!(k.kernel_l(1.0, -0.1), Err(Error::BoundarySingularity { .. })));
    }

    #[test]
    fn cumulative_kernel_matches_direct_quadrature() {
        for h in [0.3, 0.7] {
            let k = KernelSpec::fbm(h, 1.0).unwrap();
            for &(t, s) in &[(1.0, 0.5), (1.0, 1.0), (0.6, 0.05), (0.9, 0.89)] {
                let f = k.cumulative_k(t, s).unwrap();
                let direct = q().integrate(0.0, s, -(h - 0.5f64).abs(), if s == t { h - 0.5 } else { 0.0 }, |n| {
                    k.kernel_k(t, n.x).unwrap()
                });
                assert!((f - direct).abs() < 1e-7, "H={h} t={t} s={s}: {f} vs {direct}");
            }
        }
    }

    #[test]
    fn mishura_brownian_sonine_pair_gives_h() {
        let pair = SoninePair::power(0.25).unwrap();
        let one: ScalarFn = Arc::new(|_| 1.0);
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let k = MishuraKernel::new(one.clone(), zero, one, pair.clone(), 0.0, (2.0, f64::INFINITY, 2.0)).unwrap();
        let (t, s) = (1.0, 0.4);
        let l = k.inverse_kernel(t, s, &q()).unwrap();
        assert!((l - (pair.h)(t - s)).abs() < 1e-14);
        assert_eq!(k.inverse_kernel(0.3, 0.5, &q()).unwrap(), 0.0);
    }

    #[test]
    fn mishura_rejects_bad_exponents() {
        let one: ScalarFn = Arc::new(|_| 1.0);
        let pair = SoninePair::power(0.5).unwrap();
        assert!(MishuraKernel::new(one.clone(), one.clone(), one.clone(), pair.clone(), 0.0, (2.0, f64::INFINITY, 2.0)).is_ok());
        assert!(MishuraKernel::new(one.clone(), one.clone(), one.clone(), pair.clone(), 0.0, (1.5, f64::INFINITY, 2.0)).is_err());
        assert!(MishuraKernel::new(one.clone(), one.clone(), one, pair, 0.0, (2.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn mishura_degenerate_signal() {
        let one: ScalarFn = Arc::new(|_| 1.0);
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let pair = SoninePair::power(0.5).unwrap();
        let k = MishuraKernel::new(zero.clone(), zero, one, pair, 0.0, (2.0, f64::INFINITY, 2.0)).unwrap();
        assert!(matches!(k.inverse_kernel(1.0, 0.5, &q()), Err(Error::KernelDegenerate(_))));
    }

    #[test]
    fn sonine_constant_pair() {
        let one: ScalarFn = Arc::new(|_| 1.0);
        let pair = SoninePair { c: one.clone(), h: one, c_exponent: 0.0, h_exponent: 0.0 };
        assert!(pair.residual(1.0, &q()).unwrap() < 1e-15);
    }

    #[test]
    fn quadrature_failure_propagates() {
        let k = KernelSpec::fbm(0.3, 1.0).unwrap();
        let strict = QuadratureSpec::new(8, 2, 1e-15).unwrap();
        assert!(matches!(k.isometry_residual(1.0, 0.5, &strict), Err(Error::QuadFailure { .. })));
    }
}
