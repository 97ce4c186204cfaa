use nalgebra::DMatrix;
use volterra_mrf::kernels::*;
use volterra_mrf::quadrature::QuadratureSpec;

/// Stirling series after shifting the argument above 12.
fn ln_gamma_oracle(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 12.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

fn beta_oracle(a: f64, b: f64) -> f64 {
    (ln_gamma_oracle(a) + ln_gamma_oracle(b) - ln_gamma_oracle(a + b)).exp()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_s^t (u-s)^{β-1} g(u) du` with `v = (u-s)^β`, which leaves a smooth integrand.
fn singular_left(s: f64, t: f64, beta: f64, g: impl Fn(f64) -> f64) -> f64 {
    let top = (t - s).powf(beta);
    simpson(&|v: f64| g(s + v.powf(1.0 / beta)) / beta, 0.0, top, 1e-10)
}

fn hurst(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

#[test]
fn normalization_constant_against_log_gamma_oracle() {
    let c75 = normalization_constant(hurst(0.75)).unwrap();
    let want75 = (0.75 * 0.5 / beta_oracle(0.5, 0.25)).sqrt();
    assert!((c75 - want75).abs() < 1e-12, "{c75} vs {want75}");
    let c25 = normalization_constant(hurst(0.25)).unwrap();
    let want25 = (0.5 / (0.5 * beta_oracle(0.5, 0.75))).sqrt();
    assert!((c25 - want25).abs() < 1e-12, "{c25} vs {want25}");
}

#[test]
fn kernel_k_h07_against_adaptive_simpson() {
    let (h, t, s): (f64, f64, f64) = (0.7, 1.0, 0.5);
    let spec = KernelSpec::fbm(h, 1.0).unwrap();
    let ch = normalization_constant(hurst(h)).unwrap();
    let oracle = ch * s.powf(0.5 - h) * singular_left(s, t, h - 0.5, |u| u.powf(h - 0.5));
    let got = spec.kernel_k(t, s).unwrap();
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn kernel_k_h03_closed_form_against_adaptive_simpson() {
    let h = 0.3;
    let spec = KernelSpec::fbm(h, 1.0).unwrap();
    let ch = normalization_constant(hurst(h)).unwrap();
    for &(t, s) in &[(1.0, 0.5), (0.8, 0.05), (0.4, 0.39)] {
        let tail = singular_left(s, t, h + 0.5, |u| u.powf(h - 1.5));
        let oracle = ch * ((t * (t - s) / s).powf(h - 0.5) - (h - 0.5) * s.powf(0.5 - h) * tail);
        let got = spec.kernel_k(t, s).unwrap();
        assert!((got - oracle).abs() < 1e-8, "({t},{s}): {got} vs {oracle}");
    }
}

#[test]
fn inverse_kernel_shape_h03_against_adaptive_simpson() {
    let (h, t, s): (f64, f64, f64) = (0.3, 1.0, 0.5);
    let oracle = s.powf(0.5 - h) * singular_left(s, t, 0.5 - h, |r| r.powf(h - 0.5));
    let got = inverse_kernel_shape(hurst(h), t, s, &QuadratureSpec::with_panels(64).unwrap()).unwrap();
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn inverse_kernel_shape_h07_against_adaptive_simpson() {
    let (h, t, s): (f64, f64, f64) = (0.7, 1.0, 0.3);
    let integral = singular_left(s, t, 1.5 - h, |r| r.powf(h - 1.5));
    let oracle = (s * (t - s) / t).powf(0.5 - h) - (h - 0.5) * s.powf(0.5 - h) * integral;
    let got = inverse_kernel_shape(hurst(h), t, s, &QuadratureSpec::with_panels(64).unwrap()).unwrap();
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn isometry_on_probe_grid() {
    let quad = QuadratureSpec::with_panels(64).unwrap();
    for h in [0.3, 0.5, 0.7] {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        for i in 1..=8 {
            for j in 1..=8 {
                let (t, s) = (i as f64 / 8.0, j as f64 / 8.0);
                let r = spec.isometry_residual(t, s, &quad).unwrap();
                assert!(r < 1e-4, "H={h} ({t},{s}): {r}");
            }
        }
    }
}

#[test]
fn isometry_at_h_extremes() {
    let quad = QuadratureSpec::with_panels(64).unwrap();
    for h in [0.1, 0.9] {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        for &(t, s) in &[(1.0, 1.0), (1.0, 0.3), (0.5, 0.45)] {
            let r = spec.isometry_residual(t, s, &quad).unwrap();
            assert!(r < 1e-4, "H={h} ({t},{s}): {r}");
        }
    }
}

/// `E[W*_t Z_r] = ∫_0^t L(t,s) ∂_s R(s,r) ds` must equal `∫_0^{t∧r} K(r,u) du`,
/// which pins down the normalization of `L`.
#[test]
fn inverse_kernel_recovers_cross_covariance() {
    let quad = QuadratureSpec::with_panels(48).unwrap();
    for h in [0.3, 0.7] {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        let d_r = |s: f64, r: f64| {
            let sign = if s > r { 1.0 } else { -1.0 };
            h * (s.powf(2.0 * h - 1.0) - sign * (s - r).abs().powf(2.0 * h - 1.0))
        };
        for &(t, r) in &[(1.0, 1.0), (1.0, 0.5), (0.6, 1.0)] {
            let lhs = if r < t {
                quad.integrate(0.0, r, h - 0.5, 2.0 * h - 1.0, |n| spec.kernel_l(t, n.x).unwrap() * d_r(n.x, r))
                    + quad.integrate(r, t, 2.0 * h - 1.0, -(h - 0.5f64).abs(), |n| {
                        spec.kernel_l(t, n.x).unwrap() * d_r(n.x, r)
                    })
            } else {
                quad.integrate(0.0, t, h - 0.5, -(h - 0.5f64).abs(), |n| spec.kernel_l(t, n.x).unwrap() * d_r(n.x, r))
            };
            let rhs = spec.cumulative_k(r, t.min(r)).unwrap();
            assert!((lhs - rhs).abs() < 1e-3, "H={h} t={t} r={r}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn mishura_fbm_matches_kernel_l_and_k() {
    let h = 0.7;
    let spec = KernelSpec::fbm(h, 1.0).unwrap();
    let mk = MishuraKernel::fbm(hurst(h)).unwrap();
    let quad = QuadratureSpec::with_panels(64).unwrap();
    for &(t, s) in &[(1.0, 0.5), (0.9, 0.1), (0.5, 0.45)] {
        let l = spec.kernel_l(t, s).unwrap();
        let ml = mishura_l(&mk, t, s, &quad).unwrap();
        assert!((l - ml).abs() < 1e-4, "L({t},{s}): {l} vs {ml}");
        let k = spec.kernel_k(t, s).unwrap();
        let mkk = mk.kernel(t, s, &quad).unwrap();
        assert!((k - mkk).abs() < 1e-4, "K({t},{s}): {k} vs {mkk}");
    }
}

#[test]
fn mishura_covariance_matches_fbm() {
    let spec = KernelSpec::mishura(MishuraKernel::fbm(hurst(0.7)).unwrap(), 1.0).unwrap();
    for &(t, s) in &[(1.0, 1.0), (1.0, 0.5)] {
        let r = spec.covariance(t, s);
        assert!((r - fbm_covariance(0.7, t, s)).abs() < 1e-4, "{r}");
    }
}

#[test]
fn sonine_power_pair_residuals() {
    let quad = QuadratureSpec::with_panels(64).unwrap();
    let pair = SoninePair::power(0.25).unwrap();
    for t in [1.0, 0.5] {
        assert!(sonine_residual(&pair, t, &quad).unwrap() < 1e-6);
    }
    // Same identity through the Beta oracle.
    let b = beta_oracle(0.25, 0.75);
    assert!((b * (std::f64::consts::PI * 0.25).sin() / std::f64::consts::PI - 1.0).abs() < 1e-12);
}

#[test]
fn covariance_matrix_is_positive_semidefinite() {
    for h in [0.3, 0.5, 0.7] {
        let spec = KernelSpec::fbm(h, 1.0).unwrap();
        let m = DMatrix::from_fn(16, 16, |i, j| spec.covariance((i + 1) as f64 / 16.0, (j + 1) as f64 / 16.0));
        let min = m.symmetric_eigenvalues().min();
        assert!(min >= -1e-10, "H={h}: {min}");
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
    }
}

#[test]
fn kernels_degenerate_to_brownian() {
    let spec = KernelSpec::fbm(0.5, 2.0).unwrap();
    for &(t, s) in &[(1.0, 0.2), (2.0, 1.9), (0.3, 0.01)] {
        assert_eq!(spec.kernel_k(t, s).unwrap(), 1.0);
        assert_eq!(spec.kernel_l(t, s).unwrap(), 1.0);
        assert_eq!(spec.covariance(t, s), s);
        assert_eq!(spec.cumulative_k(t, s).unwrap(), s);
    }
}

#[test]
fn q_transform_closed_form_solves_reconstruction() {
    // ∫_0^t K(t,s) Q(s) ds = t for the unit drift.
    let h = hurst(0.3);
    let spec = KernelSpec::fbm(0.3, 1.0).unwrap();
    let quad = QuadratureSpec::with_panels(64).unwrap();
    for t in [1.0, 0.4] {
        let v = quad.integrate(0.0, t, -0.2, -0.2, |n| spec.kernel_k(t, n.x).unwrap() * fbm_q_unit_drift(h, n.x).unwrap());
        assert!((v - t).abs() < 1e-6, "t={t}: {v}");
        let general = fbm_q_closed_form(h, t, |_| 1.0, &quad).unwrap();
        assert!((general - fbm_q_unit_drift(h, t).unwrap()).abs() < 1e-8);
    }
}
