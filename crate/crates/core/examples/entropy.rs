//! Relative entropy of the drifted system against the driftless one,
//! restricted to the factors that touch A, next to the bound C_t|A|.

use volterra_mrf::graph::{Graph, VertexDrifts, VertexSet};
use volterra_mrf::mrf::{entropy_estimate, simulate_system_euler, system_log_weights, InitialLaw, SystemKernels, SystemSpec};
use volterra_mrf::paths::{KernelScheme, TimeGrid};

fn main() -> volterra_mrf::Result<()> {
    let spec = SystemSpec::new(Graph::path(5), VertexDrifts::uniform("neighbor:0.3,-0.5,0.8".parse()?), 0.3, InitialLaw::default());
    let grid = TimeGrid::new(1.0, 16)?;
    let kernels = SystemKernels::build(&spec, grid, KernelScheme::CellAverage)?;
    let free = simulate_system_euler(&spec.driftless(), &kernels, 20_000, 5)?;
    let weights = system_log_weights(&spec, &kernels, &free, grid.steps)?;
    for a in [VertexSet::from([2]), [1, 2].into(), [1, 2, 3].into()] {
        let r = entropy_estimate(&spec, &kernels, &free, &weights, &a)?;
        println!("A = {a:?}: H = {:.4} ± {:.4}, bound {:.1}", r.estimate.mean, r.estimate.stderr, r.bound);
    }
    Ok(())
}
