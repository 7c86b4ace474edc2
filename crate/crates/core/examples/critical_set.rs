//! Runs the critical-set construction for the phase `1 + 0.3 sin 2 pi x` over a rotation
//! number with regular growth, and prints each level.

use sl2cocycle::cocycle::{CocycleSpec, PhaseFamily, Profile};
use sl2cocycle::critical::{iterate_to_limit, EpsilonStatus, PipelineContext};
use sl2cocycle::precision::Precision;
use sl2cocycle::rotation::{build_condition_a_omega, ConditionABuild, ConditionAConstants, Spacing};

fn main() -> sl2cocycle::Result<()> {
    let (omega, report) = build_condition_a_omega(&ConditionABuild {
        constants: ConditionAConstants {
            c_omega: 10.0,
            c_eps: 3.0,
            c_delta: 0.5,
            gamma: 0.5,
        },
        spacing: Spacing::EveryIndex,
        depth: 5,
        prefix: vec![3],
        filler: 1,
    })?;
    let family = PhaseFamily::single(Profile::sine(1.0, 0.3), Profile::constant(1.0))?;
    let spec = CocycleSpec::new(omega, 0.12, family)?;
    let mut ctx = PipelineContext::new(spec, report)?;
    ctx.precision = Precision::Extended;

    let run = iterate_to_limit(&ctx, 0.12, 1, 0.0)?;
    for level in &run.levels {
        println!(
            "level {}: q = {}, kappa = {:.3}, delta = {:.3e}, {} centers, max drift {:.3e}",
            level.level,
            level.layer.tau,
            level.layer.kappa,
            level.layer.delta,
            level.centers.len(),
            level.max_drift
        );
    }
    match &run.status {
        EpsilonStatus::Excluded { label, level, reason } => {
            println!("excluded at level {level} ({}): {reason}", label.as_str())
        }
        other => println!("status: {other:?}"),
    }

    // one level deeper, some couplings meet a secondary return
    for eps in [0.12, 0.14, 0.16, 0.18, 0.2, 0.22] {
        let run = iterate_to_limit(&ctx, eps, 2, 0.0)?;
        let status = match &run.status {
            EpsilonStatus::Excluded { label, level, .. } => format!("excluded at level {level} ({})", label.as_str()),
            other => format!("{other:?}"),
        };
        println!("eps = {eps:.2}: {status}");
    }
    Ok(())
}
