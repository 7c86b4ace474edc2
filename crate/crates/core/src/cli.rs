//! Batch commands behind the `sl2cocycle` binary.
//!
//! Every command writes into an output directory. CSV files carry the
//! config hash and working precision as trailing columns; JSON files wrap
//! their payload as `{ "config_hash", "precision_bits", "data" }`. Nothing
//! time- or host-dependent is written, so identical configs give
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::analysis::{theorem3_scan, theorem4_scan, Theorem3Options, Theorem4Options};
use crate::cocycle::{CocycleSpec, PhaseFamily};
use crate::config::{Dec, PhaseConfig, ProfileConfig, RunConfig};
use crate::critical::{
    constant_phase_exclusion, critical_count, exclusion_ledger, initial_critical_set, iterate_to_limit, EpsilonRun, PipelineContext,
};
use crate::error::{Error, Result};
use crate::rotation::{brjuno_sum, ConditionAReport, RotationNumber};
use crate::torus::{decompose_segment, line_integrals};

/// Overall verdict of a command, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    /// `0` pass, `10` fail, `11` inconclusive; errors exit with `1`.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 10,
            Outcome::Inconclusive => 11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CommandReport {
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
    pub notice: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    Theorem3,
    Theorem4,
}

impl FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem3" => Ok(ScanMode::Theorem3),
            "theorem4" => Ok(ScanMode::Theorem4),
            other => Err(Error::Config(format!("unknown scan mode `{other}` (expected theorem3 or theorem4)"))),
        }
    }
}

/// Writes files into one directory, stamping each with the config hash.
struct Sink {
    dir: PathBuf,
    hash: String,
    bits: u32,
    files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    precision_bits: u32,
    data: &'a T,
}

impl Sink {
    fn new(cfg: &RunConfig, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            hash: cfg.hash(),
            bits: cfg.precision().bits(),
            files: Vec::new(),
        })
    }

    fn json<T: Serialize>(&mut self, name: &str, data: &T) -> Result<()> {
        let path = self.dir.join(name);
        let stamped = Stamped {
            config_hash: &self.hash,
            precision_bits: self.bits,
            data,
        };
        let mut text = serde_json::to_string_pretty(&stamped)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        let bits = self.bits.to_string();
        w.write_record(header.iter().copied().chain(["config_hash", "precision_bits"]))?;
        for row in rows {
            w.write_record(row.iter().map(String::as_str).chain([self.hash.as_str(), bits.as_str()]))?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, outcome: Outcome, notice: Option<String>) -> CommandReport {
        CommandReport {
            outcome,
            files: self.files,
            notice,
        }
    }
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Convergents, Brjuno partial sums and (when constants are known) the
/// condition-(A) report of the configured rotation number.
pub fn cmd_cf(cfg: &RunConfig, out: &Path) -> Result<CommandReport> {
    let (omega, report) = cfg.omega()?;
    let mut sink = Sink::new(cfg, out)?;
    let conv = omega.convergents();
    let rows: Vec<Vec<String>> = (0..=conv.depth())
        .map(|n| {
            let a = if n == 0 { "0".to_string() } else { omega.quotients()[n - 1].to_string() };
            vec![s(n), a, conv.p(n).to_string(), conv.q(n).to_string()]
        })
        .collect();
    sink.csv("convergents.csv", &["n", "a_n", "p_n", "q_n"], &rows)?;
    let brjuno = brjuno_sum(conv, conv.depth().saturating_sub(1))?;
    sink.json("brjuno.json", &brjuno)?;
    let outcome = match &report {
        Some(r) => {
            sink.json("condition_a.json", r)?;
            if r.pass {
                Outcome::Pass
            } else {
                Outcome::Fail
            }
        }
        None => Outcome::Pass,
    };
    Ok(sink.finish(outcome, None))
}

fn require_family(cfg: &RunConfig, what: &str) -> Result<PhaseFamily> {
    cfg.phase_family()?
        .ok_or_else(|| Error::Config(format!("{what} needs a `phases` section")))
}

fn require_condition_a(report: Option<ConditionAReport>) -> Result<ConditionAReport> {
    let report = report.ok_or_else(|| {
        Error::Config("condition (A) constants are required: use an `omega.builder` or give `condition_a`".into())
    })?;
    if !report.pass {
        return Err(Error::ConditionA(format!(
            "the rotation number fails condition (A): the growth q_(n+1) > C_omega q_n^(1+gamma) does not hold \
             along a usable subsequence (violations: {:?})",
            report.violations
        )));
    }
    Ok(report)
}

fn pipeline(cfg: &RunConfig, omega: RotationNumber, family: PhaseFamily, report: ConditionAReport) -> Result<PipelineContext> {
    let eps0 = cfg.epsilon.as_ref().map_or(0.1, |s| s.lo.value());
    let spec = CocycleSpec::new(omega, eps0, family)?;
    let mut ctx = PipelineContext::new(spec, report)?;
    ctx.kappa_max = cfg.thresholds.kappa_max.value();
    ctx.c_delta_shift = cfg.thresholds.c_delta_shift.value();
    ctx.precision = cfg.precision();
    Ok(ctx)
}

/// Level-by-level critical sets over the configured sweep, the exclusion
/// ledger and the `(eps, N(eps))` table.
pub fn cmd_critical_set(cfg: &RunConfig, out: &Path) -> Result<CommandReport> {
    let family = require_family(cfg, "critical-set")?;
    let grid = cfg.epsilon.as_ref().map(|s| s.grid()).unwrap_or_default();
    let mut sink = Sink::new(cfg, out)?;
    let counts = grid
        .iter()
        .map(|&e| Ok(vec![s(e), s(critical_count(&family, e)?)]))
        .collect::<Result<Vec<_>>>()?;
    if family.is_constant() {
        let notice = "all phases are constant: no critical points; computing the resonance exclusion set instead";
        let mut rows = Vec::new();
        if let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) {
            if hi > lo {
                let ex = constant_phase_exclusion(&family, (lo, hi))?;
                rows = ex
                    .exclusion
                    .intervals
                    .iter()
                    .map(|i| vec![s(i.lo), s(i.hi), s(i.label.as_str()), s(i.level)])
                    .collect();
            }
        }
        sink.csv("exclusions.csv", &["lo", "hi", "label", "level"], &rows)?;
        sink.csv("counts.csv", &["epsilon", "count"], &counts)?;
        return Ok(sink.finish(Outcome::Pass, Some(notice.into())));
    }
    let (omega, report) = cfg.omega()?;
    let report = require_condition_a(report)?;
    let ctx = pipeline(cfg, omega, family, report)?;
    let runs: Vec<EpsilonRun> = crate::par_map(&grid, |&e| iterate_to_limit(&ctx, e, cfg.max_level, 0.0))?;
    let mut points = Vec::new();
    for run in &runs {
        for (j, p) in initial_critical_set(ctx.family(), run.epsilon)?.points.iter().enumerate() {
            points.push(vec![s(run.epsilon), s(0), s(j), s(p.x), s(p.k), s(p.branch), s(0.0)]);
        }
        for l in &run.levels {
            for (j, r) in l.refinements.iter().enumerate() {
                points.push(vec![
                    s(run.epsilon),
                    s(l.level + 1),
                    s(j),
                    s(r.new.x),
                    s(r.new.k),
                    s(r.new.branch),
                    s(r.drift),
                ]);
            }
        }
    }
    sink.json("critical_levels.json", &runs)?;
    sink.csv("critical_points.csv", &["epsilon", "level", "j", "x", "k", "branch", "drift"], &points)?;
    let mut ledger = Vec::new();
    if let (Some(&lo), Some(&hi)) = (grid.first(), grid.last()) {
        if hi > lo {
            let ex = exclusion_ledger(&ctx, (lo, hi), cfg.max_level, grid.len())?;
            ledger = ex
                .intervals
                .iter()
                .map(|i| vec![s(i.lo), s(i.hi), s(i.label.as_str()), s(i.level)])
                .collect();
        }
    }
    sink.csv("exclusions.csv", &["lo", "hi", "label", "level"], &ledger)?;
    let status: Vec<Vec<String>> = runs
        .iter()
        .map(|r| vec![s(r.epsilon), s(r.critical_set.count()), s(status_text(&r.status))])
        .collect();
    sink.csv("status.csv", &["epsilon", "count", "status"], &status)?;
    sink.csv("counts.csv", &["epsilon", "count"], &counts)?;
    Ok(sink.finish(Outcome::Pass, None))
}

fn status_text(status: &crate::critical::EpsilonStatus) -> String {
    use crate::critical::EpsilonStatus::*;
    match status {
        Surviving => "surviving".into(),
        Empty => "empty".into(),
        Excluded { label, level, .. } => format!("excluded-{}-{level}", label.as_str()),
    }
}

/// Hyperbolicity scan over the sweep: the resonance picture for constant
/// phases, the critical-set picture otherwise.
pub fn cmd_scan(cfg: &RunConfig, out: &Path, mode: ScanMode) -> Result<CommandReport> {
    let family = require_family(cfg, "scan")?;
    let grid = cfg.epsilon.as_ref().map(|s| s.grid()).unwrap_or_default();
    let (omega, report) = cfg.omega()?;
    let mut sink = Sink::new(cfg, out)?;
    match mode {
        ScanMode::Theorem3 => {
            if !family.is_constant() {
                return Err(Error::Config("theorem3 mode needs constant phases; use theorem4".into()));
            }
            let opts = Theorem3Options {
                schedule: cfg.schedule(&omega),
                grid_size: cfg.grid_size,
                slack: cfg.thresholds.slack.value(),
                max_jump: cfg.thresholds.max_jump.value(),
            };
            let rep = theorem3_scan(&omega, &family, &grid, &opts, cfg.precision())?;
            let verdicts: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        s(r.epsilon),
                        s(r.excluded),
                        s(r.uh),
                        s(r.inconclusive),
                        s(r.lambda_min),
                        s(r.threshold),
                        s(r.lambda0_estimate),
                    ]
                })
                .collect();
            sink.csv(
                "verdicts.csv",
                &["epsilon", "excluded", "uh", "inconclusive", "lambda_min", "threshold", "lambda0"],
                &verdicts,
            )?;
            sink.json("witnesses.json", &rep)?;
            let table: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| vec![s(r.epsilon), s(r.lambda0_estimate), s(r.excluded), s(r.uh)])
                .collect();
            sink.csv("table.csv", &["epsilon", "lambda0", "excluded", "uh"], &table)?;
            let survivors = rep.rows.iter().filter(|r| !r.excluded);
            let outcome = if !rep.survivors_uh {
                Outcome::Fail
            } else if survivors.clone().any(|r| r.inconclusive) {
                Outcome::Inconclusive
            } else {
                Outcome::Pass
            };
            Ok(sink.finish(outcome, None))
        }
        ScanMode::Theorem4 => {
            if family.is_constant() {
                return Err(Error::Config("theorem4 mode needs non-constant phases; use theorem3".into()));
            }
            let report = require_condition_a(report)?;
            let ctx = pipeline(cfg, omega, family, report)?;
            let opts = Theorem4Options {
                max_level: cfg.max_level,
                h_samples: cfg.h_samples,
                seed: cfg.seed,
                witness_ratio: cfg.thresholds.witness_ratio.value(),
            };
            let rep = theorem4_scan(&ctx, &grid, &opts)?;
            let verdicts: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    let min_ratio = r.witnesses.iter().map(|w| w.ratio).reduce(f64::min);
                    vec![
                        s(r.epsilon),
                        status_text(&r.status),
                        s(r.critical_points),
                        opt(r.kappa0),
                        opt(r.c_a),
                        opt(r.bound),
                        opt(r.lambda_h.as_ref().map(|l| l.mean)),
                        opt(r.h_fraction),
                        opt(r.median_rate_tau0),
                        opt(min_ratio),
                        opt(r.bound_holds()),
                    ]
                })
                .collect();
            sink.csv(
                "verdicts.csv",
                &[
                    "epsilon",
                    "status",
                    "critical_points",
                    "kappa0",
                    "c_a",
                    "bound",
                    "lambda0_h",
                    "h_fraction",
                    "median_rate_tau0",
                    "min_witness_ratio",
                    "bound_holds",
                ],
                &verdicts,
            )?;
            #[derive(Serialize)]
            struct WitnessEntry<'a> {
                epsilon: f64,
                witnesses: &'a [crate::analysis::Witness],
            }
            let witnesses: Vec<WitnessEntry> = rep
                .rows
                .iter()
                .filter(|r| r.surviving())
                .map(|r| WitnessEntry {
                    epsilon: r.epsilon,
                    witnesses: &r.witnesses,
                })
                .collect();
            sink.json("witnesses.json", &witnesses)?;
            sink.json("report.json", &rep)?;
            let table: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        s(r.epsilon),
                        opt(r.lambda_h.as_ref().map(|l| l.mean)),
                        s(!r.surviving()),
                        // a surviving eps with a witness is not uniformly hyperbolic
                        s(r.surviving() && !r.has_witness(opts.witness_ratio)),
                    ]
                })
                .collect();
            sink.csv("table.csv", &["epsilon", "lambda0", "excluded", "uh"], &table)?;
            let outcome = if rep.bound_violations.is_empty() && rep.missing_witnesses.is_empty() {
                Outcome::Pass
            } else {
                Outcome::Fail
            };
            Ok(sink.finish(outcome, None))
        }
    }
}

/// Reads a torus potential off along the lines `(x + omega s, s)` and
/// tabulates the derived phase pairs; optionally scans the result.
pub fn cmd_schrodinger(cfg: &RunConfig, out: &Path) -> Result<CommandReport> {
    let pcfg = cfg
        .potential
        .as_ref()
        .ok_or_else(|| Error::Config("schrodinger needs a `potential` section".into()))?;
    let potential = pcfg.potential();
    if !potential.attains_both_signs() {
        return Err(Error::Hypothesis(
            "the potential has one sign on the whole torus: no turning points, nothing to ingest".into(),
        ));
    }
    let (omega, _) = cfg.omega()?;
    let w = omega.value();
    let xs = crate::analysis::circle_grid(pcfg.x_grid);
    let tables = crate::par_map(&xs, |&x| {
        let d = decompose_segment(&potential, w, x, pcfg.root_tol.value())?;
        let li = line_integrals(&d, &potential, w, 1e-10)?;
        Ok((d.count(), li))
    })?;
    let mut sink = Sink::new(cfg, out)?;
    let mut rows = Vec::new();
    let mut comps = Vec::new();
    for (&x, (count, li)) in xs.iter().zip(&tables) {
        comps.push(vec![s(x), s(count), s(li.error_estimate)]);
        for (k, (phi, lambda)) in li.pairs.iter().enumerate() {
            rows.push(vec![s(x), s(k + 1), s(phi), s(lambda)]);
        }
    }
    sink.csv("phases.csv", &["x", "k", "phi_hat", "lambda_hat"], &rows)?;
    sink.csv("components.csv", &["x", "components", "quadrature_error"], &comps)?;
    if !pcfg.chain_scan {
        return Ok(sink.finish(Outcome::Pass, None));
    }
    // chain into a scan when the pairs do not depend on x
    let first = &tables[0].1.pairs;
    let constant = tables.iter().all(|(_, li)| {
        li.pairs.len() == first.len()
            && li
                .pairs
                .iter()
                .zip(first)
                .all(|(a, b)| (a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8)
    });
    if !constant || first.is_empty() {
        return Ok(sink.finish(
            Outcome::Pass,
            Some("derived phases depend on x: scan skipped (only x-constant phases are chained)".into()),
        ));
    }
    let mut chained = cfg.clone();
    chained.potential = None;
    chained.phases = Some(
        first
            .iter()
            .map(|&(phi, lambda)| PhaseConfig {
                phi_hat: ProfileConfig {
                    constant: Dec::from(phi),
                    cos: vec![],
                    sin: vec![],
                },
                lambda_hat: ProfileConfig {
                    constant: Dec::from(lambda),
                    cos: vec![],
                    sin: vec![],
                },
            })
            .collect(),
    );
    let mut files = sink.files;
    let scan = cmd_scan(&chained, &out.join("scan"), ScanMode::Theorem3)?;
    files.extend(scan.files);
    Ok(CommandReport {
        outcome: scan.outcome,
        files,
        notice: None,
    })
}
