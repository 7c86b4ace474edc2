//! Exponential-dichotomy scan for constant phases, where the resonant
//! coupling values are known in closed form.

use sl2cocycle::analysis::{theorem3_scan, Theorem3Options};
use sl2cocycle::cocycle::PhaseFamily;
use sl2cocycle::precision::Precision;
use sl2cocycle::rotation::cf_expand;

fn main() -> sl2cocycle::Result<()> {
    let omega = cf_expand("0.6180339887498948482045868343656381177203", 30)?;
    let family = PhaseFamily::constant(1.3, 1.0)?;
    let grid: Vec<f64> = (0..40).map(|i| 0.05 + 0.15 * i as f64 / 39.0).collect();
    let report = theorem3_scan(&omega, &family, &grid, &Theorem3Options::default(), Precision::Double)?;

    println!("excluded measure {:.3e} (bound {:.3e})", report.excluded_measure, report.bound);
    for row in report.rows.iter().step_by(5) {
        println!("{row:?}");
    }
    println!("surviving points all dichotomic: {}", report.survivors_uh);
    Ok(())
}
