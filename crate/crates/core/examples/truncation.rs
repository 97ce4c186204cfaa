//! A functional of vertex 0 on the integer line, computed on growing
//! finite truncations with shared noise.

use volterra_mrf::graph::{VertexDrifts, ZLine};
use volterra_mrf::mrf::{truncation_convergence, InitialLaw};
use volterra_mrf::paths::TimeGrid;

fn main() -> volterra_mrf::Result<()> {
    let drifts = VertexDrifts::uniform("neighbor:0.5,-0.5,0.8".parse()?);
    let r = truncation_convergence(&ZLine, &drifts, 0.7, InitialLaw::default(), &[0].into(), 10.0, &[4, 5, 6, 7], TimeGrid::new(1.0, 32)?, 10_000, 3)?;
    for row in &r.rows {
        println!("n = {}: {} vertices, E[clip X_0(1)^2] = {:.6} ± {:.4}", row.n, row.vertices, row.estimate.mean, row.estimate.stderr);
    }
    println!("successive differences {:?}", r.differences);
    Ok(())
}
