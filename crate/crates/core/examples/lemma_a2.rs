//! Random instances of the scale-iteration lemma against extremal profiles.

use ckn_lab::moser::{lemma_a2_property_check, random_a2_instance};

fn main() -> ckn_lab::error::Result<()> {
    for i in 0..5 {
        let inst = random_a2_instance(17, i)?;
        let rep = lemma_a2_property_check(&inst, 200, 17 + i as u64);
        let worst = rep.trials.iter().map(|t| t.worst_ratio).fold(0.0, f64::max);
        println!("{}: tau {:.4}, violations {}, worst ratio {worst:.3e}", inst.family.descriptor(), inst.envelope.tau, rep.violations);
    }
    Ok(())
}
