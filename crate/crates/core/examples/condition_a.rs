//! Builds a rotation number satisfying the growth condition and reports
//! its continued-fraction data next to the golden mean, which fails it.

use sl2cocycle::rotation::{
    brjuno_sum, build_condition_a_omega, check_condition_a, cf_expand, ConditionABuild, ConditionAConstants, Spacing,
};

fn main() -> sl2cocycle::Result<()> {
    let constants = ConditionAConstants {
        c_omega: 10.0,
        c_eps: 3.0,
        c_delta: 0.5,
        gamma: 0.5,
    };
    let build = ConditionABuild {
        constants,
        spacing: Spacing::EveryIndex,
        depth: 5,
        prefix: vec![3],
        filler: 1,
    };
    let (omega, report) = build_condition_a_omega(&build)?;
    println!("omega = {:.15} = [{}]", omega.value(), omega.to_quotient_text());
    for (n, (p, q)) in omega.convergents().iter().enumerate() {
        println!("  p_{n}/q_{n} = {p}/{q}");
    }
    println!("chain {:?}, C_B = {:.4}, pass = {}", report.chain, report.c_b, report.pass);

    let golden = cf_expand("0.6180339887498948482045868343656381177203", 30)?;
    let brjuno = brjuno_sum(golden.convergents(), 20)?;
    let verdict = check_condition_a(golden.convergents(), constants, brjuno.c_b);
    println!(
        "golden mean: C_B = {:.6} (tail <= {:.1e}), condition holds: {}",
        brjuno.c_b, brjuno.tail_bound, verdict.pass
    );
    Ok(())
}
