//! Conditional independence of the ends of a 5-vertex path given the
//! second-order boundary of one end, and what happens when the separator
//! is too small.

use volterra_mrf::graph::{boundary2, Graph, VertexDrifts, VertexSet};
use volterra_mrf::mrf::{conditional_independence_test, simulate_system_euler, CiOptions, InitialLaw, SystemKernels, SystemSpec};
use volterra_mrf::paths::{KernelScheme, TimeGrid};

fn main() -> volterra_mrf::Result<()> {
    let g = Graph::path(5);
    let drift = VertexDrifts::uniform("neighbor:0.2,-0.5,1.5".parse()?);
    let spec = SystemSpec::new(g.clone(), drift, 0.3, InitialLaw::default());
    let kernels = SystemKernels::build(&spec, TimeGrid::new(1.0, 16)?, KernelScheme::CellAverage)?;
    let ens = simulate_system_euler(&spec, &kernels, 2000, 11)?;

    let a: VertexSet = [0].into();
    let b: VertexSet = [4].into();
    let opts = CiOptions { seed: 11, ..CiOptions::default() };
    for s in [boundary2(&g, &a), [1].into()] {
        let r = conditional_independence_test(&ens, None, &a, &b, &s, &opts)?;
        println!("S = {s:?}: statistic {:.4}, p = {:.3}", r.statistic, r.p_value);
    }
    Ok(())
}
