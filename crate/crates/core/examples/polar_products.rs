//! Long hyperbolic products in polar form, checked against dense matrices
//! while the dense product is still representable, with the certified
//! lower bound for aligned chains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sl2cocycle::polar::{audit_chain, product_lower_bound, FactorSequence, Matrix2};
use sl2cocycle::precision::DoubleDouble;

fn main() -> sl2cocycle::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let factors: Vec<(f64, f64)> = (0..400)
        .map(|_| (rng.gen_range(-0.4..0.4), rng.gen_range(3.0..5.0)))
        .collect();
    let seq = FactorSequence::new(factors.clone(), 0.4f64.cos());

    // dense comparison on a short prefix
    let short = FactorSequence::new(factors[..30].to_vec(), seq.min_abs_cos());
    let polar = short.product::<f64>()?;
    let mut dense = Matrix2::rotation(0.0);
    for &(phi, lambda) in &factors[..30] {
        dense = Matrix2::rotation(phi).mul(&Matrix2::stretch(lambda)).mul(&dense);
    }
    println!("30 steps: mu = {:.6}, dense/polar rel diff = {:.2e}", polar.mu, polar.densify()?.rel_diff(&dense));

    let full = seq.product::<DoubleDouble>()?;
    let bound = product_lower_bound(&seq)?;
    println!("{} steps: log||A|| = {:.6} (double-double)", seq.len(), full.log_norm().hi());
    println!("certified lower bound {:.6}, C_A = {:.4}", bound.log_norm_bound, bound.c_a);
    println!("chi drift <= {:.3e}", bound.chi_bound);

    let audit = audit_chain(&seq)?;
    println!("audit clean: {}", audit.is_clean());
    Ok(())
}
