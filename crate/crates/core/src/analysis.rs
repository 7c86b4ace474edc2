//! Lyapunov exponents, hyperbolicity verdicts, property (H) and the two
//! desk-scale parameter scans.
//!
//! Growth rates are read off the polar forms directly: `mu_n(x) / n` is the
//! exact log-norm of `M(x, n)`, so no dense product is ever formed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cocycle::{append_fiber, orbit_guard, CocycleSpec, PhaseFamily};
use crate::critical::{
    constant_phase_exclusion, exclusion_ledger, iterate_to_limit, EpsilonExclusion, EpsilonStatus, ExclusionLabel,
    Layer, PipelineContext, ResonanceExclusion,
};
use crate::error::{Error, Result};
use crate::polar::{certified_constant, PolarForm};
use crate::precision::{DoubleDouble, Precision, Real};
use crate::rotation::RotationNumber;

/// A verdict closer than this (relative) to its threshold is inconclusive.
pub const INCONCLUSIVE_BAND: f64 = 0.1;

fn check_schedule(schedule: &[u64]) -> Result<()> {
    if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "schedule must be strictly increasing positive step counts, got {schedule:?}"
        )));
    }
    Ok(())
}

/// `M(x, n)` at every `n` of an increasing schedule.
fn polar_schedule<R: Real>(spec: &CocycleSpec, x: f64, schedule: &[u64]) -> Result<Vec<PolarForm<f64>>> {
    let last = *schedule.last().expect("checked non-empty");
    orbit_guard(spec, last as i64)?;
    let mut out = Vec::with_capacity(schedule.len());
    let mut state = PolarForm::<R>::identity();
    let mut next = schedule.iter().peekable();
    for (j, y) in spec.omega.orbit(x).take(last as usize).enumerate() {
        state = append_fiber(&state, spec, y).map_err(|e| e.at_level(j))?;
        if next.peek() == Some(&&(j as u64 + 1)) {
            next.next();
            out.push(state.cast::<f64>());
        }
    }
    Ok(out)
}

fn polar_schedule_at(spec: &CocycleSpec, x: f64, schedule: &[u64], precision: Precision) -> Result<Vec<PolarForm<f64>>> {
    check_schedule(schedule)?;
    match precision {
        Precision::Double => polar_schedule::<f64>(spec, x, schedule),
        Precision::Extended => polar_schedule::<DoubleDouble>(spec, x, schedule),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub x: f64,
    pub n: u64,
    /// `mu_n(x) / n` at the last schedule point.
    pub value: f64,
    pub schedule: Vec<(u64, f64)>,
}

impl LyapunovEstimate {
    /// Largest change between consecutive schedule values; small once the
    /// finite-time exponent has settled.
    pub fn trend(&self) -> f64 {
        self.schedule
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).abs())
            .fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.schedule.iter().map(|s| s.1).fold(f64::INFINITY, f64::min)
    }
}

/// `(1/n) log ||M(x, n)||` along an increasing schedule of `n`.
pub fn finite_lyapunov(spec: &CocycleSpec, x: f64, schedule: &[u64], precision: Precision) -> Result<LyapunovEstimate> {
    let forms = polar_schedule_at(spec, x, schedule, precision)?;
    let schedule: Vec<(u64, f64)> = schedule
        .iter()
        .zip(&forms)
        .map(|(&n, p)| (n, p.mu / n as f64))
        .collect();
    let &(n, value) = schedule.last().expect("checked non-empty");
    Ok(LyapunovEstimate { x, n, value, schedule })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratedLyapunov {
    pub n: u64,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
}

impl IntegratedLyapunov {
    pub fn from_values(n: u64, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("no samples to average".into()));
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Ok(IntegratedLyapunov {
            n,
            count,
            mean,
            std_dev: var.sqrt(),
            std_error: (var / count as f64).sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Midpoint grid `(i + 1/2) / size` on the circle.
pub fn circle_grid(size: usize) -> Vec<f64> {
    (0..size).map(|i| (i as f64 + 0.5) / size as f64).collect()
}

/// Mean and spread of `mu_n(x)/n` over the midpoint grid.
pub fn integrated_lyapunov(spec: &CocycleSpec, grid_size: usize, n: u64, precision: Precision) -> Result<IntegratedLyapunov> {
    integrated_lyapunov_on(spec, &circle_grid(grid_size), n, precision)
}

/// Mean and spread of `mu_n(x)/n` over the given points.
pub fn integrated_lyapunov_on(spec: &CocycleSpec, xs: &[f64], n: u64, precision: Precision) -> Result<IntegratedLyapunov> {
    let values = crate::par_map(xs, |&x| finite_lyapunov(spec, x, &[n], precision).map(|e| e.value))?;
    IntegratedLyapunov::from_values(n, &values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UhThresholds {
    /// Required growth rate at every schedule point (nats per step).
    pub lambda_min: f64,
    /// Largest tolerated jump of the contracted direction between
    /// neighbouring grid points (radians, modulo pi).
    pub max_jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EDVerdict {
    pub uh: bool,
    /// The deciding quantity sits within the inconclusive band of its
    /// threshold.
    pub inconclusive: bool,
    pub thresholds: UhThresholds,
    /// Smallest `mu_n(x)/n` over grid and schedule.
    pub lambda_min: f64,
    /// Mean of `mu_n(x)/n` over the grid at the last schedule point.
    pub mean_rate: f64,
    /// `min (mu_n(x) - lambda_min_threshold * n)`: `log C` in
    /// `||M(x, n)|| >= C e^{Lambda n}`.
    pub log_c_witness: f64,
    pub grid: Vec<f64>,
    /// Most contracted input direction of `M(x, n_last)` per grid point.
    pub direction_field: Vec<f64>,
    pub discontinuity_score: f64,
    /// Grid points failing the growth or the continuity test.
    pub witnesses: Vec<f64>,
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Norm-growth and direction-continuity test for uniform hyperbolicity on
/// a midpoint grid.
pub fn uh_test(
    spec: &CocycleSpec,
    grid_size: usize,
    schedule: &[u64],
    thresholds: UhThresholds,
    precision: Precision,
) -> Result<EDVerdict> {
    check_schedule(schedule)?;
    if grid_size == 0 {
        return Err(Error::InvalidInput("uh test needs a non-empty grid".into()));
    }
    let grid = circle_grid(grid_size);
    let forms = crate::par_map(&grid, |&x| polar_schedule_at(spec, x, schedule, precision))?;
    let mut lambda_min = f64::INFINITY;
    let mut log_c = f64::INFINITY;
    let mut slow = vec![false; grid_size];
    for (i, row) in forms.iter().enumerate() {
        for (&n, p) in schedule.iter().zip(row) {
            let rate = p.mu / n as f64;
            lambda_min = lambda_min.min(rate);
            log_c = log_c.min(p.mu - thresholds.lambda_min * n as f64);
            if rate < thresholds.lambda_min {
                slow[i] = true;
            }
        }
    }
    let direction_field: Vec<f64> = forms
        .iter()
        .map(|row| row.last().expect("non-empty schedule").contracting_direction())
        .collect();
    let mut jumpy = vec![false; grid_size];
    let mut discontinuity_score: f64 = 0.0;
    for i in 0..grid_size {
        let j = (i + 1) % grid_size;
        let gap = angle_gap(direction_field[i], direction_field[j]);
        discontinuity_score = discontinuity_score.max(gap);
        if gap > thresholds.max_jump {
            jumpy[i] = true;
            jumpy[j] = true;
        }
    }
    let mean_rate = forms
        .iter()
        .map(|row| row.last().expect("non-empty schedule").mu)
        .sum::<f64>()
        / (grid_size as f64 * *schedule.last().expect("non-empty") as f64);
    let witnesses = grid
        .iter()
        .zip(slow.iter().zip(&jumpy))
        .filter(|(_, (s, j))| **s || **j)
        .map(|(&x, _)| x)
        .collect();
    let near = |v: f64, t: f64| (v - t).abs() < INCONCLUSIVE_BAND * t.abs();
    Ok(EDVerdict {
        uh: lambda_min >= thresholds.lambda_min && discontinuity_score <= thresholds.max_jump,
        inconclusive: near(lambda_min, thresholds.lambda_min) || near(discontinuity_score, thresholds.max_jump),
        thresholds,
        lambda_min,
        mean_rate,
        log_c_witness: log_c,
        grid,
        direction_field,
        discontinuity_score,
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HReport {
    pub x: f64,
    pub passes_h: bool,
    /// `(level, step)` of the first visit to a forbidden layer.
    pub first_violation: Option<(usize, u64)>,
    pub horizon: u64,
}

/// Checks that the orbit of `x` stays out of layer 0 for steps
/// `0..tau_0` and out of layer `n` for steps `tau_{n-1}..tau_n`.
pub fn property_h(omega: &RotationNumber, x: f64, layers: &[Layer]) -> Result<HReport> {
    let horizon = layers.last().map_or(0, |l| l.tau);
    if layers.windows(2).any(|w| w[0].tau >= w[1].tau) {
        return Err(Error::InvalidInput("layer return times must increase".into()));
    }
    if let Some(min_delta) = layers.iter().map(|l| l.delta).reduce(f64::min) {
        let err = omega.position_error(horizon as i64);
        if err > 1e-3 * min_delta {
            return Err(Error::PrecisionExhausted(format!(
                "orbit error {err:.3e} over {horizon} steps is not small against delta = {min_delta:.3e}"
            )));
        }
    }
    let mut level = 0;
    for (k, m) in omega.multiples().take(horizon as usize).enumerate() {
        let k = k as u64;
        while k >= layers[level].tau {
            level += 1;
        }
        let y = (x + m).rem_euclid(1.0);
        if layers[level].contains(y) {
            return Ok(HReport {
                x,
                passes_h: false,
                first_violation: Some((level, k)),
                horizon,
            });
        }
    }
    Ok(HReport {
        x,
        passes_h: true,
        first_violation: None,
        horizon,
    })
}

/// `1 - 2 sum_n p_n tau_n delta_n`: the share of the circle guaranteed to
/// have property (H), with `p_n` the number of centers of layer `n`.
pub fn property_h_floor(layers: &[Layer]) -> f64 {
    1.0 - 2.0
        * layers
            .iter()
            .map(|l| l.centers.len() as f64 * l.tau as f64 * l.delta)
            .sum::<f64>()
}

/// `(1 - kappa0) lambda0 / eps + log C_A - C_B`.
pub fn lyapunov_lower_bound(lambda0: f64, kappa0: f64, c_a: f64, c_b: f64, eps: f64) -> Result<f64> {
    if !(lambda0 > 0.0 && eps > 0.0 && c_a > 0.0 && c_a <= 1.0 && c_b >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lower bound needs lambda0, eps > 0, C_A in (0, 1], C_B >= 0; got {lambda0}, {eps}, {c_a}, {c_b}"
        )));
    }
    if !(0.0..1.0).contains(&kappa0) {
        return Err(Error::InvalidInput(format!("kappa0 must lie in [0, 1), got {kappa0}")));
    }
    Ok((1.0 - kappa0) * lambda0 / eps + c_a.ln() - c_b)
}

/// Least-squares slope of `log y` against `1/eps`, the exponential rate
/// of a quantity behaving like `e^{-c/eps}`.
pub fn exponential_rate(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, y)| *e > 0.0 && *y > 0.0)
        .map(|&(e, y)| (1.0 / e, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Options {
    pub schedule: Vec<u64>,
    pub grid_size: usize,
    /// The growth threshold is `(1 - slack)` times the single-factor rate.
    pub slack: f64,
    pub max_jump: f64,
}

impl Default for Theorem3Options {
    fn default() -> Self {
        Theorem3Options {
            schedule: vec![1, 2, 3, 5, 8, 13, 21, 34],
            grid_size: 16,
            slack: 0.1,
            max_jump: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Row {
    pub epsilon: f64,
    pub excluded: bool,
    /// `sum_k (lambda_hat_k + eps log|cos(phi_hat_k/eps)|) / eps`.
    pub factor_rate: f64,
    pub threshold: f64,
    pub uh: bool,
    pub inconclusive: bool,
    pub lambda_min: f64,
    pub lambda0_estimate: f64,
    pub discontinuity_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub rows: Vec<Theorem3Row>,
    pub exclusion: Option<ResonanceExclusion>,
    /// `leb` of the excluded set inside the scanned range.
    pub excluded_measure: f64,
    /// `2 sum delta_{k,j}` over resonances meeting the range.
    pub bound: f64,
    /// Every surviving `eps` is uniformly hyperbolic.
    pub survivors_uh: bool,
    /// Rows with `uh = false` that lie outside the excluded set.
    pub unexpected_failures: Vec<f64>,
}

/// Resonance exclusion plus a hyperbolicity verdict at every `eps`.
pub fn theorem3_scan(
    omega: &RotationNumber,
    family: &PhaseFamily,
    eps_grid: &[f64],
    opts: &Theorem3Options,
    precision: Precision,
) -> Result<Theorem3Report> {
    if eps_grid.is_empty() {
        return Ok(Theorem3Report {
            rows: Vec::new(),
            exclusion: None,
            excluded_measure: 0.0,
            bound: 0.0,
            survivors_uh: true,
            unexpected_failures: Vec::new(),
        });
    }
    let lo = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eps_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exclusion = constant_phase_exclusion(family, (lo, hi.max(lo * (1.0 + 1e-12))))?;
    let spec0 = CocycleSpec::new(omega.clone(), lo, family.clone())?;
    let rows = crate::par_map(eps_grid, |&eps| {
        let spec = spec0.with_epsilon(eps)?;
        let factor_rate: f64 = family
            .entries()
            .iter()
            .map(|e| {
                let c = (e.phi_hat.value(0.0) / eps).cos().abs();
                (e.lambda_hat.value(0.0) + eps * c.ln()) / eps
            })
            .sum();
        let threshold = ((1.0 - opts.slack) * factor_rate).max(f64::MIN_POSITIVE);
        let v = uh_test(
            &spec,
            opts.grid_size,
            &opts.schedule,
            UhThresholds {
                lambda_min: threshold,
                max_jump: opts.max_jump,
            },
            precision,
        )?;
        Ok(Theorem3Row {
            epsilon: eps,
            excluded: exclusion.exclusion.contains(eps),
            factor_rate,
            threshold,
            uh: v.uh,
            inconclusive: v.inconclusive,
            lambda_min: v.lambda_min,
            lambda0_estimate: v.mean_rate,
            discontinuity_score: v.discontinuity_score,
        })
    })?;
    let survivors_uh = rows.iter().filter(|r| !r.excluded).all(|r| r.uh);
    let unexpected_failures = rows.iter().filter(|r| !r.excluded && !r.uh).map(|r| r.epsilon).collect();
    Ok(Theorem3Report {
        excluded_measure: exclusion.exclusion.measure(),
        bound: exclusion.bound,
        exclusion: Some(exclusion),
        rows,
        survivors_uh,
        unexpected_failures,
    })
}

/// `leb` of the resonance set below `eps0`. Resonances below `eps0/1000`
/// carry widths of order `e^{-500 lambda0/eps0}` and are dropped.
pub fn resonance_measure_below(family: &PhaseFamily, eps0: f64) -> Result<f64> {
    Ok(constant_phase_exclusion(family, (eps0 * 1e-3, eps0))?.exclusion.measure())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Options {
    pub max_level: usize,
    /// Samples tested for property (H).
    pub h_samples: usize,
    pub seed: u64,
    /// A witness must grow slower than this fraction of the (H) median.
    pub witness_ratio: f64,
}

impl Default for Theorem4Options {
    fn default() -> Self {
        Theorem4Options {
            max_level: 1,
            h_samples: 256,
            seed: 0x5eed,
            witness_ratio: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub k: usize,
    /// `(1/tau_0) log ||M(x, tau_0)||`.
    pub rate: f64,
    /// `rate` over the (H) median at the same time.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Row {
    pub epsilon: f64,
    pub status: EpsilonStatus,
    pub critical_points: usize,
    pub kappa0: Option<f64>,
    pub c_a: Option<f64>,
    pub c_b: f64,
    /// Lower bound on the integrated exponent; absent when `C_A <= 0`
    /// makes it vacuous.
    pub bound: Option<f64>,
    pub tau0: Option<u64>,
    pub horizon: Option<u64>,
    pub h_fraction: Option<f64>,
    pub h_floor: Option<f64>,
    /// Exponent at the horizon over samples with property (H).
    pub lambda_h: Option<IntegratedLyapunov>,
    /// Median of `(1/tau_0) log ||M(x, tau_0)||` over (H) samples.
    pub median_rate_tau0: Option<f64>,
    pub witnesses: Vec<Witness>,
}

impl Theorem4Row {
    pub fn surviving(&self) -> bool {
        self.status.survives()
    }

    /// `None` when not measured.
    pub fn bound_holds(&self) -> Option<bool> {
        let mean = self.lambda_h.as_ref()?.mean;
        Some(self.bound.is_none_or(|b| mean >= b))
    }

    pub fn has_witness(&self, ratio: f64) -> bool {
        self.witnesses.iter().any(|w| w.ratio < ratio)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Report {
    pub options: Theorem4Options,
    pub rows: Vec<Theorem4Row>,
    pub surviving: usize,
    pub bound_violations: Vec<f64>,
    pub missing_witnesses: Vec<f64>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Level pipeline, property (H) sampling, the integrated-exponent bound and
/// the planted non-hyperbolicity witnesses at every `eps`.
pub fn theorem4_scan(ctx: &PipelineContext, eps_grid: &[f64], opts: &Theorem4Options) -> Result<Theorem4Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples: Vec<f64> = (0..opts.h_samples).map(|_| rng.gen::<f64>()).collect();
    let rows = crate::par_map(eps_grid, |&eps| theorem4_row(ctx, eps, opts, &samples))?;
    let surviving = rows.iter().filter(|r| r.surviving()).count();
    let bound_violations = rows
        .iter()
        .filter(|r| r.bound_holds() == Some(false))
        .map(|r| r.epsilon)
        .collect();
    let missing_witnesses = rows
        .iter()
        .filter(|r| r.surviving() && !r.has_witness(opts.witness_ratio))
        .map(|r| r.epsilon)
        .collect();
    Ok(Theorem4Report {
        options: opts.clone(),
        rows,
        surviving,
        bound_violations,
        missing_witnesses,
    })
}

fn theorem4_row(ctx: &PipelineContext, eps: f64, opts: &Theorem4Options, samples: &[f64]) -> Result<Theorem4Row> {
    let run = iterate_to_limit(ctx, eps, opts.max_level, 0.0)?;
    let c_b = ctx.report.c_b;
    let mut row = Theorem4Row {
        epsilon: eps,
        status: run.status.clone(),
        critical_points: run.critical_set.count(),
        kappa0: run.levels.first().map(|l| l.layer.kappa),
        c_a: None,
        c_b,
        bound: None,
        tau0: run.levels.first().map(|l| l.layer.tau),
        horizon: None,
        h_fraction: None,
        h_floor: None,
        lambda_h: None,
        median_rate_tau0: None,
        witnesses: Vec::new(),
    };
    if !run.status.survives() {
        return Ok(row);
    }
    let spec = ctx.spec.with_epsilon(eps)?;
    let layers = run.layers();
    let tau0 = layers[0].tau;
    let horizon = layers.last().expect("surviving runs have layers").tau;
    let lambda0 = ctx.lambda0();
    let kappa0 = layers_kappa0(&run)?;
    // factors on (H) orbits keep |cos phi| above roughly e^{-kappa0 lambda0/eps}
    let delta = (-kappa0 * lambda0 / eps).exp();
    let c_a = certified_constant(delta, lambda0 / eps);
    row.c_a = Some(c_a);
    row.bound = if c_a > 0.0 {
        Some(lyapunov_lower_bound(lambda0, kappa0, c_a, c_b, eps)?)
    } else {
        None
    };
    row.horizon = Some(horizon);
    row.h_floor = Some(property_h_floor(&layers));
    let mut h_points = Vec::new();
    for &x in samples {
        if property_h(&spec.omega, x, &layers)?.passes_h {
            h_points.push(x);
        }
    }
    row.h_fraction = Some(h_points.len() as f64 / samples.len().max(1) as f64);
    let schedule: Vec<u64> = if horizon > tau0 { vec![tau0, horizon] } else { vec![tau0] };
    let mut at_tau0 = Vec::with_capacity(h_points.len());
    let mut at_horizon = Vec::with_capacity(h_points.len());
    for &x in &h_points {
        let est = finite_lyapunov(&spec, x, &schedule, ctx.precision)?;
        at_tau0.push(est.schedule[0].1);
        at_horizon.push(est.value);
    }
    if !h_points.is_empty() {
        row.lambda_h = Some(IntegratedLyapunov::from_values(horizon, &at_horizon)?);
    }
    row.median_rate_tau0 = median(at_tau0);
    if let Some(med) = row.median_rate_tau0 {
        for p in &run.critical_set.points {
            let rate = finite_lyapunov(&spec, p.x, &[tau0], ctx.precision)?.value;
            row.witnesses.push(Witness {
                x: p.x,
                k: p.k,
                rate,
                ratio: rate / med,
            });
        }
    }
    Ok(row)
}

fn layers_kappa0(run: &crate::critical::EpsilonRun) -> Result<f64> {
    run.levels
        .first()
        .map(|l| l.layer.kappa)
        .ok_or_else(|| Error::InvalidInput("run has no level-0 layer".into()))
}

/// Excluded measure inside `[(1 - width) eps, eps]` for each `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub epsilon: f64,
    pub window: (f64, f64),
    pub measure: f64,
    pub secondary: f64,
    pub slope: f64,
    pub resolution: f64,
}

pub fn exclusion_trend(
    ctx: &PipelineContext,
    eps_points: &[f64],
    width: f64,
    max_level: usize,
    grid: usize,
) -> Result<(Vec<TrendPoint>, Option<f64>)> {
    if !(width > 0.0 && width < 1.0) {
        return Err(Error::InvalidInput(format!("relative window width must lie in (0, 1), got {width}")));
    }
    let mut points = Vec::with_capacity(eps_points.len());
    for &eps in eps_points {
        let window = ((1.0 - width) * eps, eps);
        let ex: EpsilonExclusion = exclusion_ledger(ctx, window, max_level, grid)?;
        points.push(TrendPoint {
            epsilon: eps,
            window,
            measure: ex.measure(),
            secondary: ex.total(ExclusionLabel::Secondary),
            slope: ex.total(ExclusionLabel::Slope),
            resolution: ex.resolution,
        });
    }
    let rate = exponential_rate(&points.iter().map(|p| (p.epsilon, p.measure)).collect::<Vec<_>>());
    Ok((points, rate))
}
