//! Ball measures: closed form at the origin, quadrature elsewhere.

use ckn_lab::measure::{ball_measure, doubling_ratio, BallSpec};
use ckn_lab::params::{Integrability, WeightParams};

fn main() -> ckn_lab::error::Result<()> {
    let p = WeightParams::validate(3, -0.5, -0.2, Integrability::Infinite)?;
    for d in [0.0, 0.5, 2.0] {
        let ball = BallSpec::new(vec![d, 0.0, 0.0], 1.0)?;
        let m = ball_measure(&p, &ball, 1e-12)?;
        println!("|x0| = {d}: mu(B) = {:.12} ({:?}, err {:e})", m.value, m.method, m.est_error);
    }
    println!("doubling at the origin, tau = 0.5: {:.6}", doubling_ratio(&p, &[0.0; 3], 1.0, 0.5)?);
    Ok(())
}
