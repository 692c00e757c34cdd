//! Replacing a field by its weighted-harmonic part inside a ball.

use ckn_lab::grid::Grid;
use ckn_lab::inequality::test_field_suite;
use ckn_lab::measure::BallSpec;
use ckn_lab::params::{Integrability, WeightParams};
use ckn_lab::solver::{harmonic_replacement, SolverSettings};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, 0.3, 0.4, Integrability::Infinite)?;
    let g = Grid::cube(1.0, 16)?;
    let ball = BallSpec::new(vec![0.1, 0.0, 0.0], 0.6)?;
    for u in test_field_suite(&p, &g, 3, 4)? {
        let w = harmonic_replacement(&p, &u, &ball, SolverSettings::default())?;
        let (eu, ew) = (u.dirichlet_energy(&p)?, w.dirichlet_energy(&p)?);
        println!("{:>24}: energy {eu:.6} -> {ew:.6}", u.name());
    }
    Ok(())
}
