//! Splits the segment `{(x + s omega, s)}` of a sign-changing potential into
//! sign components and integrates `|F|^{1/2}` over each.

use sl2cocycle::torus::{decompose_segment, line_integrals, TorusPotential, TorusTerm};

fn main() -> sl2cocycle::Result<()> {
    let omega = (5f64.sqrt() - 1.0) / 2.0;
    let potential = TorusPotential {
        constant: 0.2,
        terms: vec![
            TorusTerm { j1: 1, j2: 0, cos: 1.0, sin: 0.0 },
            TorusTerm { j1: 0, j2: 1, cos: 0.0, sin: 0.7 },
        ],
    };
    for x in [0.0, 0.25, 0.5, 0.75] {
        let decomp = decompose_segment(&potential, omega, x, 1e-13)?;
        let ints = line_integrals(&decomp, &potential, omega, 1e-10)?;
        println!("x = {x:.2}: {} components", decomp.count());
        for (k, (phi, lambda)) in ints.pairs.iter().enumerate() {
            println!("  k = {}: phi_hat = {phi:.6}, lambda_hat = {lambda:.6}", k + 1);
        }
    }
    Ok(())
}
