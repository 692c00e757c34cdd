//! Weighted Sobolev and Poincaré quotients over a seeded field suite.

use ckn_lab::grid::Grid;
use ckn_lab::inequality::{run_inequality_suite, suite_max};
use ckn_lab::params::{Integrability, WeightParams};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, -0.5, -0.2, Integrability::Infinite)?;
    for n in [12, 24] {
        let g = Grid::cube(1.0, n)?;
        let rows = run_inequality_suite(&p, &g, 7, 20)?;
        let (ckn, poincare) = suite_max(&rows);
        println!("n = {n}: max ckn quotient {ckn:.6}, max poincare quotient {poincare:.6}");
    }
    Ok(())
}
