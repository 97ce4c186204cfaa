//! Weights of the discrete fundamental martingale, built by the recursive
//! bordered inverse, next to the dense solve they must agree with.

use volterra_mrf::discrete::{fundamental_weights, gershgorin_margin, IncrementCovariance};
use volterra_mrf::kernels::HurstParam;

fn main() -> volterra_mrf::Result<()> {
    let n = 8;
    for h in [0.3, 0.5, 0.7] {
        let hp = HurstParam::new(h)?;
        let w = fundamental_weights(hp, n)?;
        let cov = IncrementCovariance::with_step(hp, n, 1.0 / n as f64);
        let dense = cov.matrix.clone().try_inverse().expect("covariance is positive definite");
        let dense_w: Vec<f64> = (0..n).map(|j| (0..n).map(|i| dense[(i, j)]).sum()).collect();
        let err = w.w.iter().zip(&dense_w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("H = {h}: gershgorin margin {:.3}, max |recursive - dense| {err:.1e}", gershgorin_margin(hp, n));
        println!("  w      = {:?}", w.w.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
        println!("  lambda = {:?}", w.lambdas.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
