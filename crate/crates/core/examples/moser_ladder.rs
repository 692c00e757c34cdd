//! Integrability ladder for the critical bubble.

use ckn_lab::experiments::iteration::bubble_ladder;
use ckn_lab::grid::{Grid, Spacing};
use ckn_lab::params::{Integrability, WeightParams};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, 0.0, 0.0, Integrability::Infinite)?;
    let g = Grid::radial(3, 0.0, 1.0, 512, Spacing::Uniform)?;
    let (_, states) = bubble_ladder(&p, &g, 0.2, 2)?;
    for s in states {
        println!(
            "k {}: q {:.4}, norm {:.6e}, margin {:.4}, interpolation {:?}",
            s.k, s.q_k, s.norm_q, s.subdomain_margin, s.interpolation_ratio
        );
    }
    Ok(())
}
