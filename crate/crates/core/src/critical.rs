//! The inductive construction of the critical set.
//!
//! Level 0 consists of the points where some phase `phi_k(x) = phi_hat_k(x)/eps`
//! sits at an odd multiple of `pi/2`. Around each point sits an interval of
//! radius `delta_n` (the layer); the layer radius is tied to a return time
//! `q` of the rotation through `delta_n = 1 / (C_omega q^{1+gamma})`. A value
//! of `eps` survives a level when no interval meets a *different* interval
//! before it first meets itself. Surviving points are then moved to the
//! zero of `cos(phi_k(x) - chi(x))`, where `chi` is the frame angle of the
//! product over one return time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cocycle::{bisect, CocycleSpec, PhaseFamily, Profile};
use crate::error::{Error, Result};
use crate::polar::{polar_append, PolarForm};
use crate::precision::{DoubleDouble, Precision, Real};
use crate::rotation::{ConditionAConstants, ConditionAReport, RotationNumber};

/// Distance on the unit circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// A level-`n` critical point with its identity across levels and `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    /// Index of the owning factor (0-based).
    pub k: usize,
    /// `phi_k(x) = pi (branch + 1/2)` at level 0.
    pub branch: i64,
    /// Monotone piece of `phi_hat_k` containing the point.
    pub piece: usize,
}

impl CriticalPoint {
    pub fn target_angle(&self) -> f64 {
        PI * (self.branch as f64 + 0.5)
    }

    fn same_identity(&self, other: &CriticalPoint) -> bool {
        self.k == other.k && self.branch == other.branch && self.piece == other.piece
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSetApprox {
    pub level: usize,
    pub epsilon: f64,
    /// Sorted by `x`.
    pub points: Vec<CriticalPoint>,
}

impl CriticalSetApprox {
    /// `N(eps)`.
    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }
}

/// Monotone pieces `[t_a, t_b]` of a non-constant profile (`t_b` may exceed 1).
fn monotone_pieces(p: &Profile) -> Vec<(f64, f64)> {
    let crit = p.critical_points(2048);
    if crit.is_empty() {
        return Vec::new();
    }
    let mut out: Vec<(f64, f64)> = crit.windows(2).map(|w| (w[0], w[1])).collect();
    out.push((*crit.last().unwrap(), crit[0] + 1.0));
    out
}

/// Branch indices `i` with `pi eps (i + 1/2)` strictly between `lo` and `hi`.
fn branches_between(lo: f64, hi: f64, eps: f64) -> std::ops::RangeInclusive<i64> {
    let s = PI * eps;
    let i_min = (lo / s - 0.5).floor() as i64 + 1;
    let i_max = (hi / s - 0.5).ceil() as i64 - 1;
    i_min..=i_max
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// `N(eps)` without locating the points.
pub fn critical_count(family: &PhaseFamily, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let mut n = 0usize;
    for e in family.entries() {
        if e.phi_hat.is_constant() {
            continue;
        }
        for (a, b) in monotone_pieces(&e.phi_hat) {
            let (va, vb) = (e.phi_hat.value(a), e.phi_hat.value(b));
            let r = branches_between(va.min(vb), va.max(vb), eps);
            n += (r.end() - r.start() + 1).max(0) as usize;
        }
    }
    Ok(n)
}

/// Level-0 critical set: every `x` with `phi_hat_k(x) = pi eps (i + 1/2)`.
///
/// Roots are bracketed exactly on the monotone pieces of each `phi_hat_k`
/// and bisected to machine precision. A target value within `1e-12` of a
/// local extremum makes the count unstable (the point is being born or
/// dies) and is reported as a root-finding error.
pub fn initial_critical_set(family: &PhaseFamily, eps: f64) -> Result<CriticalSetApprox> {
    check_eps(eps)?;
    let mut points = Vec::new();
    for (k, e) in family.entries().iter().enumerate() {
        let p = &e.phi_hat;
        if p.is_constant() {
            let c = (p.value(0.0) / eps).cos();
            if c.abs() < 1e-12 {
                return Err(Error::Degenerate(format!(
                    "constant phi_hat_{} sits on a resonance at eps = {eps}",
                    k + 1
                )));
            }
            continue;
        }
        for (piece, (a, b)) in monotone_pieces(p).into_iter().enumerate() {
            let (va, vb) = (p.value(a), p.value(b));
            let (lo, hi) = (va.min(vb), va.max(vb));
            let margin = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            for i in branches_between(lo, hi, eps) {
                let level = PI * eps * (i as f64 + 0.5);
                if level - lo < margin || hi - level < margin {
                    return Err(Error::RootFinding(format!(
                        "critical value {level:.15} touches an extremum of phi_hat_{} at eps = {eps}; \
                         the count is unstable here",
                        k + 1
                    )));
                }
                let f = |x: f64| p.value(x) - level;
                let x = bisect(f, a, b, f(a), 1e-16).rem_euclid(1.0);
                points.push(CriticalPoint {
                    x,
                    k,
                    branch: i,
                    piece,
                });
            }
        }
    }
    points.sort_by(|u, v| u.x.total_cmp(&v.x));
    Ok(CriticalSetApprox {
        level: 0,
        epsilon: eps,
        points,
    })
}

/// `N(eps)` is constant on `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsWindow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Maximal intervals of constant `N(eps)` inside `[lo, hi]`, from a grid
/// scan with change points bisected to relative `1e-10`.
pub fn epsilon_windows(family: &PhaseFamily, lo: f64, hi: f64, grid: usize) -> Result<Vec<EpsWindow>> {
    check_eps(lo)?;
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("empty epsilon range [{lo}, {hi}]")));
    }
    let grid = grid.max(2);
    let eps_at = |i: usize| lo + (hi - lo) * i as f64 / (grid - 1) as f64;
    let mut windows = Vec::new();
    let mut start = lo;
    let mut count = critical_count(family, lo)?;
    let mut prev_eps = lo;
    for i in 1..grid {
        let e = eps_at(i);
        let c = critical_count(family, e)?;
        if c != count {
            // bisect the change point
            let (mut a, mut b) = (prev_eps, e);
            while (b - a) > 1e-10 * b {
                let m = 0.5 * (a + b);
                if critical_count(family, m)? == count {
                    a = m;
                } else {
                    b = m;
                }
            }
            let cut = 0.5 * (a + b);
            windows.push(EpsWindow { lo: start, hi: cut, count });
            start = cut;
            count = c;
        }
        prev_eps = e;
    }
    windows.push(EpsWindow { lo: start, hi, count });
    Ok(windows)
}

/// `d rho_{j,j'} / d eps` by a centered difference of step `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationDerivative {
    pub value: f64,
    /// `|value| >= c_rho`.
    pub separated: bool,
}

pub fn separation_derivative(
    family: &PhaseFamily,
    eps: f64,
    pair: (usize, usize),
    h: f64,
    c_rho: f64,
) -> Result<SeparationDerivative> {
    let base = initial_critical_set(family, eps)?;
    let (j, j2) = pair;
    if j >= base.count() || j2 >= base.count() {
        return Err(Error::InvalidInput(format!(
            "pair ({j}, {j2}) out of range for {} critical points",
            base.count()
        )));
    }
    if j == j2 {
        return Ok(SeparationDerivative {
            value: 0.0,
            separated: c_rho <= 0.0,
        });
    }
    let (pj, pj2) = (base.points[j], base.points[j2]);
    let rho_at = |e: f64| -> Result<f64> {
        let set = initial_critical_set(family, e)?;
        let find = |p: &CriticalPoint| {
            set.points
                .iter()
                .find(|q| q.same_identity(p))
                .map(|q| q.x)
                .ok_or_else(|| {
                    Error::RootFinding(format!(
                        "critical point (k={}, branch={}) is born or dies within eps +- {h}",
                        p.k, p.branch
                    ))
                })
        };
        Ok(circle_dist(find(&pj)?, find(&pj2)?))
    };
    let value = (rho_at(eps + h)? - rho_at(eps - h)?) / (2.0 * h);
    Ok(SeparationDerivative {
        value,
        separated: value.abs() >= c_rho,
    })
}

/// The chosen layer radius and its return time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerChoice {
    pub level: usize,
    /// Position in the condition-(A) chain.
    pub chain_pos: usize,
    /// Convergent index `n_{J}`.
    pub conv_index: usize,
    /// `tau = q_{n_J}`.
    pub tau: u64,
    /// `q_{n_J + 1}`.
    pub q_next: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl LayerChoice {
    /// `1/q_{n_J+1} < delta`, the right half of the sandwich.
    pub fn sandwiched(&self) -> bool {
        1.0 / self.q_next < self.delta
    }
}

/// Picks the layer of a given level.
///
/// Level 0 uses the largest chain element whose
/// `kappa = (eps / lambda0) log(C_omega q^{1+gamma})` does not exceed
/// `kappa_max`; level `n` uses the `n`-th chain element after it.
pub fn choose_kappa(
    omega: &RotationNumber,
    report: &ConditionAReport,
    eps: f64,
    lambda0: f64,
    level: usize,
    kappa_max: f64,
) -> Result<LayerChoice> {
    check_eps(eps)?;
    let c = &report.constants;
    let conv = omega.convergents();
    let kappa_of = |n: usize| eps / lambda0 * (c.c_omega.ln() + (1.0 + c.gamma) * conv.ln_q(n));
    let j0 = report
        .chain
        .iter()
        .rposition(|&n| kappa_of(n) <= kappa_max)
        .ok_or_else(|| {
            Error::ConditionA(format!(
                "no chain element has kappa <= {kappa_max} at eps = {eps} (smallest is {:.4})",
                report.chain.first().map(|&n| kappa_of(n)).unwrap_or(f64::NAN)
            ))
        })?;
    let pos = j0 + level;
    let &n = report.chain.get(pos).ok_or_else(|| {
        Error::ConditionA(format!(
            "level {level} needs chain element {pos}, only {} available",
            report.chain.len()
        ))
    })?;
    if n + 1 > conv.depth() {
        return Err(Error::DepthExhausted(format!("q_{} is not available", n + 1)));
    }
    let tau = conv
        .q_u64(n)
        .ok_or_else(|| Error::DepthExhausted(format!("return time q_{n} overflows u64")))?;
    let kappa = kappa_of(n);
    let delta = (-(c.c_omega.ln() + (1.0 + c.gamma) * conv.ln_q(n))).exp();
    Ok(LayerChoice {
        level,
        chain_pos: pos,
        conv_index: n,
        tau,
        q_next: conv.q_f64(n + 1),
        kappa,
        delta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollisionKind {
    Primary,
    Secondary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub j: usize,
    pub j2: usize,
    pub time: u64,
    pub kind: CollisionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionLog {
    pub delta: f64,
    pub horizon: u64,
    pub events: Vec<Collision>,
}

impl CollisionLog {
    /// Common primary time, if every interval returns within the horizon.
    pub fn primary_time(&self) -> Option<u64> {
        let times: Vec<u64> = self
            .events
            .iter()
            .filter(|e| e.kind == CollisionKind::Primary)
            .map(|e| e.time)
            .collect();
        let first = *times.first()?;
        times.iter().all(|&t| t == first).then_some(first)
    }

    pub fn first_secondary(&self) -> Option<u64> {
        self.events
            .iter()
            .filter(|e| e.kind == CollisionKind::Secondary)
            .map(|e| e.time)
            .min()
    }

    pub fn secondary_before(&self, tau: u64) -> bool {
        self.first_secondary().is_some_and(|t| t < tau)
    }
}

/// First collision times of the intervals `(c_j - delta, c_j + delta)`:
/// the least `k` in `1..=horizon` with `dist(c_j + k omega, c_j') < 2 delta`.
pub fn collision_times(centers: &[f64], delta: f64, omega: &RotationNumber, horizon: u64) -> Result<CollisionLog> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("layer radius must be positive, got {delta}")));
    }
    let err = omega.position_error(horizon as i64);
    if err > 1e-3 * delta {
        return Err(Error::PrecisionExhausted(format!(
            "orbit error {err:.3e} over {horizon} steps is not small against the layer radius {delta:.3e}"
        )));
    }
    let n = centers.len();
    let mut first = vec![vec![None::<u64>; n]; n];
    let mut remaining = n * n;
    // c_j + k omega is near c_j' iff frac(k omega) is near c_j' - c_j
    let mut gaps: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (j, &c) in centers.iter().enumerate() {
        for (j2, &c2) in centers.iter().enumerate() {
            gaps.push(((c2 - c).rem_euclid(1.0), j, j2));
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r = 2.0 * delta;
    let hit = |first: &mut Vec<Vec<Option<u64>>>, remaining: &mut usize, y: f64, k: u64| {
        let from = gaps.partition_point(|g| g.0 <= y - r);
        for &(g, j, j2) in gaps[from..].iter().take_while(|g| g.0 < y + r) {
            if circle_dist(y, g) < r && first[j][j2].is_none() {
                first[j][j2] = Some(k);
                *remaining -= 1;
            }
        }
    };
    for (k, y) in omega.multiples().enumerate().skip(1).take(horizon as usize) {
        // gaps near 0 and 1 are the same point on the circle
        hit(&mut first, &mut remaining, y, k as u64);
        if y < r {
            hit(&mut first, &mut remaining, y + 1.0, k as u64);
        } else if y > 1.0 - r {
            hit(&mut first, &mut remaining, y - 1.0, k as u64);
        }
        if remaining == 0 {
            break;
        }
    }
    let mut events = Vec::new();
    for (j, row) in first.iter().enumerate() {
        for (j2, t) in row.iter().enumerate() {
            if let Some(time) = *t {
                events.push(Collision {
                    j,
                    j2,
                    time,
                    kind: if j == j2 {
                        CollisionKind::Primary
                    } else {
                        CollisionKind::Secondary
                    },
                });
            }
        }
    }
    Ok(CollisionLog {
        delta,
        horizon,
        events,
    })
}

/// Polar form of `M(sigma x, steps) * A_K(x) ... A_{k+1}(x)`: everything
/// applied after the factor `R(phi_k) Z(lambda_k)` at `x`.
pub fn left_product<R: Real>(spec: &CocycleSpec, x: f64, k: usize, steps: u64) -> Result<PolarForm<R>> {
    let factors = spec.factors_r::<R>(x)?;
    let mut state = PolarForm::<R>::identity();
    for &(phi, lambda) in factors.iter().skip(k + 1) {
        state = polar_append(&state, phi, lambda)?;
    }
    for y in spec.omega.orbit(x).skip(1).take(steps as usize) {
        for (phi, lambda) in spec.factors_r::<R>(y)? {
            state = polar_append(&state, phi, lambda)?;
        }
    }
    Ok(state)
}

/// `chi` of [`left_product`] together with its derivatives and the
/// smallest `mu` seen across the interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiProfile {
    pub x: f64,
    pub chi: f64,
    pub d1: f64,
    pub d2: f64,
    /// Minimum of `mu` over samples of the interval.
    pub mu_floor: f64,
    /// Step used for the finite differences.
    pub h: f64,
}

fn chi_value<R: Real>(spec: &CocycleSpec, x: f64, k: usize, steps: u64) -> Result<(f64, f64)> {
    let p = left_product::<R>(spec, x, k, steps)?;
    Ok((p.chi.to_f64(), p.mu.to_f64()))
}

pub fn chi_profile<R: Real>(spec: &CocycleSpec, center: f64, delta: f64, k: usize, steps: u64) -> Result<ChiProfile> {
    let h = delta / 100.0;
    let (c0, mu0) = chi_value::<R>(spec, center, k, steps)?;
    let (cp, _) = chi_value::<R>(spec, center + h, k, steps)?;
    let (cm, _) = chi_value::<R>(spec, center - h, k, steps)?;
    let mut mu_floor = mu0;
    for i in [-1.0, 1.0] {
        let (_, mu) = chi_value::<R>(spec, center + 0.9 * delta * i, k, steps)?;
        mu_floor = mu_floor.min(mu);
    }
    Ok(ChiProfile {
        x: center,
        chi: c0,
        d1: (cp - cm) / (2.0 * h),
        d2: (cp - 2.0 * c0 + cm) / (h * h),
        mu_floor,
        h,
    })
}

/// Coefficients of the local quadratic for the shift of a critical point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftQuadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ShiftQuadratic {
    /// From `phi_k', phi_k''` and a `chi` profile at the old point.
    pub fn new(phi1: f64, phi2: f64, chi: &ChiProfile) -> Self {
        let t = chi.chi.tan();
        let g = phi1 - chi.d1;
        ShiftQuadratic {
            a: 0.5 * (phi2 - chi.d2 + t * g * g),
            b: 0.5 * g,
            c: -t,
        }
    }

    /// The three uniqueness conditions on `(-delta, delta)`.
    pub fn conditions(&self, delta: f64, c_delta: f64) -> [bool; 3] {
        let ratio = if self.b == 0.0 {
            f64::INFINITY
        } else {
            (self.a * self.c / (self.b * self.b)).abs()
        };
        let b_over_a = if self.a == 0.0 {
            f64::INFINITY
        } else {
            (self.b / self.a).abs()
        };
        [
            ratio < c_delta,
            b_over_a > delta / (1.0 - c_delta),
            (self.c / (2.0 * self.b)).abs() < delta * (1.0 + c_delta),
        ]
    }

    pub fn initial_shift(&self) -> f64 {
        if self.b == 0.0 {
            0.0
        } else {
            -self.c / (2.0 * self.b)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub old: CriticalPoint,
    pub new: CriticalPoint,
    pub drift: f64,
    pub quadratic: ShiftQuadratic,
    pub chi: ChiProfile,
    pub newton_iterations: usize,
}

/// Moves `point` to the zero of `cos(phi_k(x) - chi(x))` inside its layer
/// interval.
///
/// `chi_at` returns the frame angle at `x`; `profile` carries its
/// derivatives at the old point. Starting from the quadratic's shift, the
/// root is polished by Newton until the step drops below `tol`, then certified by a sign change of the
/// cosine across a small bracket and by monotonicity of `phi_k - chi` on
/// the interval.
#[allow(clippy::too_many_arguments)]
pub fn refine_critical_point(
    family: &PhaseFamily,
    eps: f64,
    point: CriticalPoint,
    delta: f64,
    c_delta: f64,
    tol: f64,
    chi_at: &dyn Fn(f64) -> Result<f64>,
    profile: ChiProfile,
) -> Result<Refinement> {
    let p = &family.entries()[point.k].phi_hat;
    let phi1 = p.derivative(point.x) / eps;
    let phi2 = p.second_derivative(point.x) / eps;
    let quad = ShiftQuadratic::new(phi1, phi2, &profile);
    let ok = quad.conditions(delta, c_delta);
    if !ok.iter().all(|&b| b) {
        return Err(Error::Hypothesis(format!(
            "shift equation at x = {:.12} violates the uniqueness conditions {ok:?} \
             (A = {:.3e}, B = {:.3e}, C = {:.3e}, delta = {delta:.3e})",
            point.x, quad.a, quad.b, quad.c
        )));
    }
    let target = point.target_angle();
    let u = |x: f64| -> Result<f64> { Ok(p.value(x) / eps - chi_at(x)? - target) };
    let du = |x: f64| p.derivative(x) / eps - profile.d1;
    let mut x = point.x + quad.initial_shift();
    let mut iterations = 0;
    loop {
        let step = u(x)? / du(x);
        x -= step;
        iterations += 1;
        if step.abs() < tol.max(8.0 * f64::EPSILON) {
            break;
        }
        if iterations >= 20 || !x.is_finite() {
            return Err(Error::RootFinding(format!(
                "Newton did not converge near x = {:.12} (last step {step:.3e})",
                point.x
            )));
        }
    }
    if circle_dist(x, point.x) >= delta {
        return Err(Error::RootFinding(format!(
            "refined point left its interval: |{x:.12} - {:.12}| >= {delta:.3e}",
            point.x
        )));
    }
    // monotonicity of the argument across the interval
    let s0 = du(point.x).signum();
    for i in -4..=4 {
        let y = point.x + delta * i as f64 / 4.0 * 0.999;
        if (p.derivative(y) / eps - profile.d1).signum() != s0 {
            return Err(Error::RootFinding(format!(
                "phi_k - chi is not monotone on the interval around {:.12}",
                point.x
            )));
        }
    }
    // sign-change certificate on a bracket around the root
    let w = (4.0 * tol).max(64.0 * f64::EPSILON * x.abs().max(1.0));
    let (ul, ur) = (u(x - w)?, u(x + w)?);
    if ul.signum() == ur.signum() && ul != 0.0 && ur != 0.0 {
        return Err(Error::RootFinding(format!(
            "no sign change of cos(phi_k - chi) across [{:.12}, {:.12}]",
            x - w,
            x + w
        )));
    }
    let new = CriticalPoint {
        x: x.rem_euclid(1.0),
        ..point
    };
    Ok(Refinement {
        old: point,
        new,
        drift: circle_dist(new.x, point.x),
        quadratic: quad,
        chi: profile,
        newton_iterations: iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionLabel {
    /// A secondary collision precedes the primary return.
    Secondary,
    /// The slope condition at a critical point fails.
    Slope,
    /// A constant phase resonates.
    Resonance,
}

impl ExclusionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionLabel::Secondary => "secondary",
            ExclusionLabel::Slope => "slope",
            ExclusionLabel::Resonance => "resonance",
        }
    }
}

/// The `delta`-neighbourhood of the level-`n` critical points and the
/// time it first returns onto itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub level: usize,
    pub delta: f64,
    pub tau: u64,
    pub centers: Vec<f64>,
}

impl Layer {
    pub fn contains(&self, y: f64) -> bool {
        self.centers.iter().any(|&c| circle_dist(y, c) < self.delta)
    }
}

/// Per-level outcome of the pipeline at one `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub layer: LayerChoice,
    pub centers: Vec<f64>,
    pub primary_time: Option<u64>,
    pub first_secondary: Option<u64>,
    pub refinements: Vec<Refinement>,
    pub max_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum EpsilonStatus {
    Surviving,
    /// No critical points: nothing to construct.
    Empty,
    Excluded {
        label: ExclusionLabel,
        level: usize,
        reason: String,
    },
}

impl EpsilonStatus {
    pub fn survives(&self) -> bool {
        matches!(self, EpsilonStatus::Surviving)
    }

    pub fn excluded_with(&self, label: ExclusionLabel) -> bool {
        matches!(self, EpsilonStatus::Excluded { label: l, .. } if *l == label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub status: EpsilonStatus,
    pub levels: Vec<LevelReport>,
    /// Deepest constructed approximation.
    pub critical_set: CriticalSetApprox,
}

impl EpsilonRun {
    pub fn layers(&self) -> Vec<Layer> {
        self.levels
            .iter()
            .map(|l| Layer {
                level: l.level,
                delta: l.layer.delta,
                tau: l.layer.tau,
                centers: l.centers.clone(),
            })
            .collect()
    }
}

/// Everything fixed across an `eps` sweep.
#[derive(Clone, Debug)]
pub struct PipelineContext {
    pub spec: CocycleSpec,
    pub report: ConditionAReport,
    pub kappa_max: f64,
    /// `C_Delta` of the shift-uniqueness conditions.
    pub c_delta_shift: f64,
    pub precision: Precision,
}

impl PipelineContext {
    pub fn new(spec: CocycleSpec, report: ConditionAReport) -> Result<Self> {
        let family = spec
            .phases()
            .ok_or_else(|| Error::InvalidInput("the critical-set pipeline needs a phase family".into()))?;
        family.check_nondegenerate(1e-9)?;
        if !report.pass {
            return Err(Error::ConditionA(format!(
                "rotation number fails condition (A): violations {:?}",
                report.violations
            )));
        }
        Ok(PipelineContext {
            spec,
            report,
            kappa_max: 0.9,
            c_delta_shift: 0.5,
            precision: Precision::Double,
        })
    }

    pub fn family(&self) -> &PhaseFamily {
        self.spec.phases().expect("checked at construction")
    }

    pub fn constants(&self) -> ConditionAConstants {
        self.report.constants
    }

    pub fn lambda0(&self) -> f64 {
        self.family().lambda0()
    }

    /// Slope floor `exp(-lambda0 kappa0 gamma / ((1 + gamma) eps))`.
    pub fn slope_floor(&self, eps: f64, kappa0: f64) -> f64 {
        let g = self.constants().gamma;
        (-self.lambda0() * kappa0 * g / ((1.0 + g) * eps)).exp()
    }
}

/// Runs the level pipeline at one `eps` up to `max_level` (or until the
/// points stop moving by more than `tol`).
pub fn iterate_to_limit(ctx: &PipelineContext, eps: f64, max_level: usize, tol: f64) -> Result<EpsilonRun> {
    match ctx.precision {
        Precision::Double => run_levels::<f64>(ctx, eps, max_level, tol),
        Precision::Extended => run_levels::<DoubleDouble>(ctx, eps, max_level, tol),
    }
}

fn run_levels<R: Real>(ctx: &PipelineContext, eps: f64, max_level: usize, tol: f64) -> Result<EpsilonRun> {
    let spec = ctx.spec.with_epsilon(eps)?;
    let family = ctx.family();
    let mut set = initial_critical_set(family, eps)?;
    let mut run = EpsilonRun {
        epsilon: eps,
        status: EpsilonStatus::Surviving,
        levels: Vec::new(),
        critical_set: set.clone(),
    };
    if set.count() == 0 {
        run.status = EpsilonStatus::Empty;
        return Ok(run);
    }
    let exclude = |run: &mut EpsilonRun, label, level, reason: String| {
        run.status = EpsilonStatus::Excluded { label, level, reason };
    };
    for level in 0..=max_level {
        let layer = choose_kappa(&spec.omega, &ctx.report, eps, ctx.lambda0(), level, ctx.kappa_max)
            .map_err(|e| e.at_level(level))?;
        let centers = set.centers();
        let log = collision_times(&centers, layer.delta, &spec.omega, layer.tau).map_err(|e| e.at_level(level))?;
        let mut report = LevelReport {
            level,
            layer,
            centers,
            primary_time: log.primary_time(),
            first_secondary: log.first_secondary(),
            refinements: Vec::new(),
            max_drift: 0.0,
        };
        if log.secondary_before(layer.tau) {
            let t = log.first_secondary().unwrap_or(0);
            run.levels.push(report);
            exclude(&mut run, ExclusionLabel::Secondary, level, format!("secondary collision at step {t} < {}", layer.tau));
            break;
        }
        if level == 0 {
            let floor = ctx.slope_floor(eps, layer.kappa);
            for p in &set.points {
                let slope = family.entries()[p.k].phi_hat.derivative(p.x).abs() / eps;
                if slope < floor {
                    run.levels.push(report);
                    exclude(
                        &mut run,
                        ExclusionLabel::Slope,
                        0,
                        format!("|phi'| = {slope:.3e} below {floor:.3e} at x = {:.9}", p.x),
                    );
                    run.critical_set = set;
                    return Ok(run);
                }
            }
        }
        if level == max_level {
            run.levels.push(report);
            break;
        }
        // move every point to the zero of cos(phi_k - chi)
        let next_delta = choose_kappa(&spec.omega, &ctx.report, eps, ctx.lambda0(), level + 1, ctx.kappa_max)
            .map(|c| c.delta)
            .unwrap_or(layer.delta * 1e-3);
        let steps = layer.tau - 1;
        let mut refined = Vec::with_capacity(set.count());
        for &p in &set.points {
            let profile = chi_profile::<R>(&spec, p.x, layer.delta, p.k, steps).map_err(|e| e.at_level(level))?;
            let chi_at = |x: f64| -> Result<f64> { Ok(chi_value::<R>(&spec, x, p.k, steps)?.0) };
            match refine_critical_point(family, eps, p, layer.delta, ctx.c_delta_shift, 1e-3 * next_delta, &chi_at, profile) {
                Ok(r) => refined.push(r),
                Err(Error::Hypothesis(msg)) => {
                    run.levels.push(report);
                    exclude(&mut run, ExclusionLabel::Slope, level, msg);
                    run.critical_set = set;
                    return Ok(run);
                }
                Err(e) => return Err(e.at_level(level)),
            }
        }
        report.max_drift = refined.iter().map(|r| r.drift).fold(0.0, f64::max);
        let drift = report.max_drift;
        let mut points: Vec<CriticalPoint> = refined.iter().map(|r| r.new).collect();
        points.sort_by(|u, v| u.x.total_cmp(&v.x));
        report.refinements = refined;
        run.levels.push(report);
        set = CriticalSetApprox {
            level: level + 1,
            epsilon: eps,
            points,
        };
        if drift < tol {
            break;
        }
    }
    run.critical_set = set;
    Ok(run)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedInterval {
    pub lo: f64,
    pub hi: f64,
    pub label: ExclusionLabel,
    pub level: usize,
}

impl ExcludedInterval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Excluded parameter values inside a window, with per-label totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonExclusion {
    pub window: (f64, f64),
    pub intervals: Vec<ExcludedInterval>,
    /// Resolution of the scan that found the intervals.
    pub resolution: f64,
}

impl EpsilonExclusion {
    pub fn total(&self, label: ExclusionLabel) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.label == label)
            .map(ExcludedInterval::length)
            .sum()
    }

    /// Measure of the union of all intervals.
    pub fn measure(&self) -> f64 {
        let mut iv: Vec<(f64, f64)> = self.intervals.iter().map(|i| (i.lo, i.hi)).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for (lo, hi) in iv {
            match cur {
                Some((a, b)) if lo <= b => cur = Some((a, b.max(hi))),
                Some((a, b)) => {
                    total += b - a;
                    cur = Some((lo, hi));
                }
                None => cur = Some((lo, hi)),
            }
        }
        if let Some((a, b)) = cur {
            total += b - a;
        }
        total
    }

    pub fn contains(&self, eps: f64) -> bool {
        self.intervals.iter().any(|i| i.lo < eps && eps < i.hi)
    }
}

/// Why a parameter value is excluded, if it is.
pub type ExclusionClass = Option<(ExclusionLabel, usize)>;

/// Scans `window` on `grid` points, groups consecutive points of the same
/// exclusion class into intervals and bisects each class change to
/// relative `rel_tol`.
///
/// Intervals narrower than the grid spacing can be missed; the spacing is
/// reported as the resolution.
pub fn scan_classified(
    window: (f64, f64),
    grid: usize,
    rel_tol: f64,
    classify: &(dyn Fn(f64) -> Result<ExclusionClass> + Sync),
) -> Result<EpsilonExclusion> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("empty epsilon window [{lo}, {hi}]")));
    }
    let grid = grid.max(2);
    let eps: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let classes = crate::par_map(&eps, |&e| classify(e))?;
    let edge = |a: f64, b: f64, class: ExclusionClass| -> Result<f64> {
        let (mut a, mut b) = (a, b);
        while b - a > rel_tol * b.abs().max(f64::MIN_POSITIVE) {
            let m = 0.5 * (a + b);
            if classify(m)? == class {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    };
    // class changes between neighbouring grid points, refined in parallel
    let changes: Vec<usize> = (1..grid).filter(|&i| classes[i] != classes[i - 1]).collect();
    let cuts = crate::par_map(&changes, |&i| edge(eps[i - 1], eps[i], classes[i - 1]))?;
    let mut intervals = Vec::new();
    let mut start = lo;
    for (k, end) in cuts.iter().copied().chain(std::iter::once(hi)).enumerate() {
        let class = if k < changes.len() { classes[changes[k] - 1] } else { classes[grid - 1] };
        if let Some((label, level)) = class {
            intervals.push(ExcludedInterval {
                lo: start,
                hi: end,
                label,
                level,
            });
        }
        start = end;
    }
    Ok(EpsilonExclusion {
        window,
        intervals,
        resolution: (hi - lo) / (grid - 1) as f64,
    })
}

/// [`scan_classified`] for a yes/no predicate.
pub fn scan_exclusion(
    window: (f64, f64),
    grid: usize,
    rel_tol: f64,
    label: ExclusionLabel,
    level: usize,
    excluded: &(dyn Fn(f64) -> Result<bool> + Sync),
) -> Result<EpsilonExclusion> {
    scan_classified(window, grid, rel_tol, &|e| Ok(excluded(e)?.then_some((label, level))))
}

/// Exclusion class of one `eps` under the level pipeline. A critical
/// point being born or dying exactly at `eps` is not an exclusion.
pub fn classify_epsilon(ctx: &PipelineContext, eps: f64, max_level: usize) -> Result<ExclusionClass> {
    match iterate_to_limit(ctx, eps, max_level, 0.0) {
        Ok(run) => Ok(match run.status {
            EpsilonStatus::Excluded { label, level, .. } => Some((label, level)),
            _ => None,
        }),
        Err(Error::RootFinding(_)) => Ok(None),
        Err(Error::Level { source, .. }) if matches!(*source, Error::RootFinding(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// All exclusions (secondary collisions and slope failures, every level up
/// to `max_level`) inside `window`.
pub fn exclusion_ledger(ctx: &PipelineContext, window: (f64, f64), max_level: usize, grid: usize) -> Result<EpsilonExclusion> {
    scan_classified(window, grid, 1e-8, &|e| classify_epsilon(ctx, e, max_level))
}

/// Parameter values in `window` where a secondary collision at `level`
/// precedes the primary return.
pub fn exclusion_secondary(ctx: &PipelineContext, window: (f64, f64), level: usize, grid: usize) -> Result<EpsilonExclusion> {
    scan_exclusion(window, grid, 1e-10, ExclusionLabel::Secondary, level, &|e| {
        Ok(classify_epsilon(ctx, e, level)? == Some((ExclusionLabel::Secondary, level)))
    })
}

/// Resonance intervals of constant phases, with the certified cosine floor
/// outside them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceExclusion {
    pub exclusion: EpsilonExclusion,
    /// Resonance centers `eps_{k,j}` inside the window.
    pub centers: Vec<f64>,
    /// `2 sum delta_{k,j}` over the listed resonances.
    pub bound: f64,
    /// `exp(-lambda0 / (2 eps0))` with `eps0` the window's upper end.
    pub cos_floor: f64,
}

/// Excludes `(eps_{k,j} - delta_{k,j}, eps_{k,j} + delta_{k,j})` around each
/// resonance `phi_k / eps_{k,j} = pi (j + 1/2)` of a constant phase, with
/// `delta_{k,j} = eps_{k,j} |phi_k|^{-1} exp(-lambda0 / (2 eps_{k,j}))`.
pub fn constant_phase_exclusion(family: &PhaseFamily, window: (f64, f64)) -> Result<ResonanceExclusion> {
    let (lo, hi) = window;
    check_eps(lo)?;
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!("empty epsilon range [{lo}, {hi}]")));
    }
    if !family.entries().iter().all(|e| e.phi_hat.is_constant()) {
        return Err(Error::InvalidInput("resonance exclusion needs constant phases".into()));
    }
    let lambda0 = family.lambda0();
    let mut intervals = Vec::new();
    let mut centers = Vec::new();
    let mut bound = 0.0;
    for e in family.entries() {
        let phi = e.phi_hat.value(0.0).abs();
        if phi == 0.0 {
            continue;
        }
        // eps_j = phi / (pi (j + 1/2)) decreases in j; only those whose
        // interval can meet the window matter
        let j_lo = ((phi / (PI * hi * 1.5)) - 0.5).floor().max(0.0) as i64;
        let mut j = j_lo;
        loop {
            let c = phi / (PI * (j as f64 + 0.5));
            let d = c / phi * (-lambda0 / (2.0 * c)).exp();
            if c + d <= lo {
                break;
            }
            if c - d < hi {
                centers.push(c);
                bound += 2.0 * d;
                intervals.push(ExcludedInterval {
                    lo: (c - d).max(lo),
                    hi: (c + d).min(hi),
                    label: ExclusionLabel::Resonance,
                    level: 0,
                });
            }
            j += 1;
        }
    }
    intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(ResonanceExclusion {
        exclusion: EpsilonExclusion {
            window,
            intervals,
            resolution: 0.0,
        },
        centers,
        bound,
        cos_floor: (-lambda0 / (2.0 * hi)).exp(),
    })
}
