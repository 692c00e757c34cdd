//! Hölder exponent of the solution with unit source, against its bound.

use ckn_lab::experiments::regularity::unit_source_report;
use ckn_lab::grid::{Grid, Spacing};
use ckn_lab::params::{Integrability, WeightParams};
use ckn_lab::regularity::RegularitySettings;
use ckn_lab::solver::SolverSettings;

fn main() -> ckn_lab::error::Result<()> {
    let g = Grid::radial(3, 0.0, 1.0, 1024, Spacing::Uniform)?;
    let p = WeightParams::validate_for_holder(3, 0.3, 0.4, Integrability::Infinite)?;
    let solver = SolverSettings { tol: 1e-12, max_iter: 10_000 };
    let rep = unit_source_report(&p, &g, 1.0, solver, RegularitySettings { seed: 13, ..Default::default() })?;
    print!("{}", rep.to_text());
    Ok(())
}
