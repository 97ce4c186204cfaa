//! Exact fBm paths mapped to their Brownian driver W* and back, then the
//! drift transform q of the unit drift against its closed form.

use volterra_mrf::kernels::{fbm_q_unit_drift, HurstParam, KernelSpec};
use volterra_mrf::paths::{discretize, drift_q_transform, fundamental_transform, hosking_paths, volterra_row, KernelScheme, TimeGrid};
use volterra_mrf::stats::Estimate;

fn main() -> volterra_mrf::Result<()> {
    let h = 0.3;
    let grid = TimeGrid::new(1.0, 32)?;
    let kernel = discretize(&KernelSpec::fbm(h, 1.0)?, grid, KernelScheme::Innovation)?;
    let z = hosking_paths(HurstParam::new(h)?, grid, 20_000, 7)?;
    let w = fundamental_transform(&kernel, &z)?;

    let back = volterra_row(&kernel, w.row(0));
    let err = back.iter().zip(z.row(0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip on path 0: {err:.1e}");

    let cum = w.cumulative();
    for (i, j) in [(8, 8), (8, 32), (32, 32)] {
        let e = Estimate::of(&cum.iter().map(|r| r[i] * r[j]).collect::<Vec<_>>());
        println!("Cov(W*_{:.2}, W*_{:.2}) = {:.4} ± {:.4}, target {:.4}", grid.t(i), grid.t(j), e.mean, e.stderr, grid.t(i).min(grid.t(j)));
    }

    let fine = TimeGrid::new(1.0, 128)?;
    let kernel = discretize(&KernelSpec::fbm(h, 1.0)?, fine, KernelScheme::CellAverage)?;
    let q = drift_q_transform(&kernel, &fine.nodes())?;
    for j in [16, 64, 127] {
        let t = fine.t(j) + 0.5 * fine.dt();
        println!("q near t = {t:.3}: grid {:.4}, closed form {:.4}", q[j], fbm_q_unit_drift(HurstParam::new(h)?, t)?);
    }
    Ok(())
}
