//! K, L and the covariance for a few Hurst values, and how far the
//! isometry ∫K(t,r)K(s,r)dr = R(t,s) is from holding numerically.

use volterra_mrf::kernels::{normalization_constant, HurstParam, KernelSpec};
use volterra_mrf::quadrature::QuadratureSpec;

fn main() -> volterra_mrf::Result<()> {
    let quad = QuadratureSpec::with_panels(64)?;
    for h in [0.3, 0.5, 0.7] {
        let spec = KernelSpec::fbm(h, 1.0)?;
        let hp = HurstParam::new(h)?;
        if hp.is_brownian() {
            // K is the indicator here, and c_H degenerates to 0
            println!("H = {h}: Brownian case");
        } else {
            println!("H = {h}: c_H = {:.6}", normalization_constant(hp)?);
        }
        for (t, s) in [(1.0, 0.25), (1.0, 0.75), (0.5, 0.1)] {
            println!(
                "  K({t},{s}) = {:>9.5}  L({t},{s}) = {:>9.5}  R = {:.5}  residual {:.1e}",
                spec.kernel_k(t, s)?,
                spec.kernel_l(t, s)?,
                spec.covariance(t, s),
                spec.isometry_residual(t, s, &quad)?
            );
        }
    }
    Ok(())
}
