use nalgebra::DMatrix;
use volterra_mrf::discrete::*;
use volterra_mrf::kernels::{fbm_covariance, HurstParam};

fn hp(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[test]
fn recursive_inverse_matches_dense_lu() {
    for i in 1..=9 {
        let h = hp(i as f64 / 10.0);
        for n in [1, 2, 5, 17, 64] {
            let cov = build_covariance(h, n);
            let (state, lambdas) = recursive_inverse(&cov.matrix).unwrap();
            let dense = cov.matrix.clone().lu().try_inverse().unwrap();
            // Compare relative to the size of the inverse, whose entries scale like n^{2H}.
            let scale = max_abs(&dense).max(1.0);
            assert!(max_abs(&(&state.inv - &dense)) / scale < 1e-8, "H={h} n={n}");
            let ident = &state.inv * &cov.matrix - DMatrix::identity(n, n);
            assert!(max_abs(&ident) < 1e-8, "H={h} n={n}: {}", max_abs(&ident));
            assert!(lambdas.iter().all(|&l| l > 0.0));
        }
    }
}

#[test]
fn extension_chain_to_five() {
    for h in [0.3, 0.7] {
        let cov = build_covariance(hp(h), 5);
        let mut state = InverseState::initial(cov.matrix[(0, 0)]).unwrap();
        for k in 1..5 {
            let border: Vec<f64> = (0..k).map(|i| cov.matrix[(i, k)]).collect();
            state = schur_extend_inverse(&state, &border, cov.matrix[(k, k)]).unwrap();
            assert!(state.lnd_margin > 0.0);
        }
        let dense = cov.matrix.clone().lu().try_inverse().unwrap();
        assert!(max_abs(&(&state.inv - &dense)) < 1e-8);
    }
}

#[test]
fn covariance_matches_differenced_fbm_covariance() {
    let h = 0.7;
    let n = 3;
    let cov = build_covariance(hp(h), n);
    let t = |i: usize| i as f64 / n as f64;
    for i in 1..=n {
        for j in 1..=n {
            let r = |a: usize, b: usize| fbm_covariance(h, t(a), t(b));
            let want = r(i, j) - r(i - 1, j) - r(i, j - 1) + r(i - 1, j - 1);
            assert!((cov.matrix[(i - 1, j - 1)] - want).abs() < 1e-14);
        }
    }
}

/// The listing builds F = 2|eI|^{2H} - |eI-e|^{2H} - |eI+e|^{2H} over I = 0..n-1,
/// inverts toeplitz(F) and sums columns.
fn listing(h: f64, n: usize, e: f64) -> Vec<f64> {
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let x = e * i as f64;
            2.0 * x.abs().powf(2.0 * h) - (x - e).abs().powf(2.0 * h) - (x + e).abs().powf(2.0 * h)
        })
        .collect();
    let r = DMatrix::from_fn(n, n, |i, j| f[i.abs_diff(j)]);
    let s = r.lu().try_inverse().unwrap();
    (0..n).map(|j| s.column(j).sum()).collect()
}

#[test]
fn weights_match_listing_procedure() {
    let (h, n, e) = (0.3, 5, 0.1);
    let w = fundamental_weights_with_step(hp(h), n, e).unwrap();
    let l = listing(h, n, e);
    for (a, b) in w.w.iter().zip(&l) {
        // toeplitz(F) = -2 e^{2H} A, hence L = -w/2.
        assert!((-0.5 * a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn weights_solve_defining_identity() {
    let h = hp(0.7);
    let w = fundamental_weights(h, 3).unwrap();
    let cov = build_covariance(h, 3);
    for j in 0..3 {
        let v: f64 = (0..3).map(|i| w.w[i] * cov.matrix[(i, j)]).sum();
        assert!((v - 1.0).abs() < 1e-8);
    }
}

#[test]
fn gershgorin_margins() {
    assert!(gershgorin_margin(hp(0.3), 10) >= 0.5);
    for n in 2..=64 {
        assert!(gershgorin_margin(hp(0.3), n) >= 0.5);
    }
    let direct = 1.0 - (1..10u64).map(|k| increment_autocovariance(hp(0.7), k).abs()).sum::<f64>();
    assert_eq!(gershgorin_margin(hp(0.7), 10), direct);
}

#[test]
fn weights_do_not_depend_on_data() {
    let a = fundamental_weights(hp(0.4), 12).unwrap();
    let b = fundamental_weights(hp(0.4), 12).unwrap();
    assert_eq!(a, b);
}
