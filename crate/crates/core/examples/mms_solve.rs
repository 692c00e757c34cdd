//! Radial manufactured solution on a sequence of graded meshes.

use ckn_lab::field::DiscreteField;
use ckn_lab::grid::{Grid, Spacing};
use ckn_lab::params::{Integrability, WeightParams};
use ckn_lab::solver::exact::exact_radial_mms;
use ckn_lab::solver::{assemble, solve, SolverSettings};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, 0.25, 0.25, Integrability::Infinite)?;
    let exact = exact_radial_mms(&p, 0.0, 1.0)?;
    let mut prev: Option<f64> = None;
    for level in 0..4 {
        let g = Grid::radial(3, 0.0, 1.0, 64 << level, Spacing::Graded(3.0))?;
        let f = DiscreteField::sample_radial(g.clone(), "f", |r| exact.f(r))?;
        let bc = DiscreteField::sample_radial(g.clone(), "u", |r| exact.u(r))?;
        let (u, rep) = solve(&assemble(&p, &f, &bc)?, SolverSettings { tol: 1e-12, max_iter: 10_000 })?;
        let err = u.zip_with(&bc, |x, y| x - y)?.max_abs();
        let order = prev.map(|e| (e / err).log2());
        println!("cells {:5}: error {err:.3e}, order {order:.3?}, residual {:.1e}", 64 << level, rep.relative_residual);
        prev = Some(err);
    }
    Ok(())
}
