//! Derived exponents for one admissible parameter triple.

use ckn_lab::params::{Integrability, WeightParams};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, 0.3, 0.4, Integrability::Finite(6.0))?;
    println!("p = {:.6}, bp = {:.6}", p.p(), p.bp());
    println!("s threshold = {:.6}", p.s_threshold());
    let bound = p.holder_bound(0.9)?;
    println!("alpha_sup = {:.6} ({})", bound.alpha_sup, bound.limiting_branch.as_str());
    println!("k0 = {}", p.k0_threshold()?);
    for (k, q) in p.moser_ladder(4).iter().enumerate() {
        println!("q_{k} = {q:.6}");
    }
    Ok(())
}
