//! Oscillation decay of a weighted-harmonic field at the origin.

use ckn_lab::experiments::inequalities::{degree_one_exponent, harmonic_alpha_h, DEFAULT_RADII_CELLS};
use ckn_lab::grid::Grid;
use ckn_lab::params::{Integrability, WeightParams};
use ckn_lab::solver::SolverSettings;

fn main() -> ckn_lab::error::Result<()> {
    let g = Grid::cube(1.0, 48)?;
    for a in [0.0, -0.5, 0.4] {
        let p = WeightParams::validate(3, a, a, Integrability::Infinite)?;
        let est = harmonic_alpha_h(&p, &g, &DEFAULT_RADII_CELLS, SolverSettings::default())?;
        println!("a = {a:5}: alpha_h = {:.4} (slope {:.4}), degree-one exponent {:.4}", est.alpha_h, est.raw_slope, degree_one_exponent(&p));
    }
    Ok(())
}
