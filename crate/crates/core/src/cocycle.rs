//! The cocycle `A_eps(x) = prod_k R(phi_k(x)) Z(lambda_k(x))` over the
//! rotation `x -> x + omega`, with `phi_k = phi_hat_k / eps` and
//! `lambda_k = lambda_hat_k / eps`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::{polar_append, polar_inverse, FactorSequence, PolarForm};
use crate::precision::Real;
use crate::rotation::RotationNumber;
use crate::torus::{decompose_segment, line_integrals, TorusPotential};

const TAU: f64 = 2.0 * PI;

/// A smooth function on the circle with closed-form derivatives:
/// `c + sum_j (a_j cos 2 pi j x + b_j sin 2 pi j x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    Trig {
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    /// `a + b sin 2 pi x`.
    pub fn sine(a: f64, b: f64) -> Self {
        Profile::Trig {
            constant: a,
            cos: vec![],
            sin: vec![b],
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Profile::Constant { .. } => true,
            Profile::Trig { cos, sin, .. } => cos.iter().chain(sin).all(|&c| c == 0.0),
        }
    }

    /// Highest harmonic present.
    pub fn degree(&self) -> usize {
        match self {
            Profile::Constant { .. } => 0,
            Profile::Trig { cos, sin, .. } => cos.len().max(sin.len()),
        }
    }

    /// `d`-th derivative at `x`, in working precision.
    pub fn derivative_r<R: Real>(&self, x: R, d: u32) -> R {
        match self {
            Profile::Constant { value } => {
                if d == 0 {
                    R::from_f64(*value)
                } else {
                    R::zero()
                }
            }
            Profile::Trig { constant, cos, sin } => {
                let mut acc = if d == 0 { R::from_f64(*constant) } else { R::zero() };
                let two_pi = R::pi().mul_f64(2.0);
                for j in 1..=cos.len().max(sin.len()) {
                    let a = cos.get(j - 1).copied().unwrap_or(0.0);
                    let b = sin.get(j - 1).copied().unwrap_or(0.0);
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let w = two_pi.mul_f64(j as f64);
                    let (s, c) = (w * x).sin_cos();
                    // d-th derivative of a cos + b sin cycles with period 4
                    let (cc, ss) = match d % 4 {
                        0 => (a, b),
                        1 => (b, -a),
                        2 => (-a, -b),
                        _ => (-b, a),
                    };
                    let scale = (TAU * j as f64).powi(d as i32);
                    acc = acc + (c.mul_f64(cc) + s.mul_f64(ss)).mul_f64(scale);
                }
                acc
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative_r(x, 0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.derivative_r(x, 1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.derivative_r(x, 2)
    }

    /// Roots of the first derivative in `[0, 1)`, located on a grid of
    /// `grid` cells and refined by bisection.
    pub fn critical_points(&self, grid: usize) -> Vec<f64> {
        if self.is_constant() {
            return Vec::new();
        }
        let grid = grid.max(8 * self.degree() + 8);
        let h = 1.0 / grid as f64;
        let mut out = Vec::new();
        let mut prev = self.derivative(0.0);
        for i in 0..grid {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let fb = self.derivative(b);
            if prev == 0.0 {
                out.push(a);
            } else if prev * fb < 0.0 {
                out.push(bisect(|x| self.derivative(x), a, b, prev, 1e-15));
            }
            prev = fb;
        }
        out.retain(|&x| x < 1.0);
        out
    }

    /// Minimum and maximum over the circle.
    pub fn extrema(&self) -> (f64, f64) {
        if let Profile::Constant { value } = self {
            return (*value, *value);
        }
        let mut lo = self.value(0.0);
        let mut hi = lo;
        for x in self.critical_points(512) {
            let v = self.value(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Total variation over one period.
    pub fn total_variation(&self) -> f64 {
        let mut pts = self.critical_points(512);
        if pts.is_empty() {
            return 0.0;
        }
        pts.push(pts[0] + 1.0);
        pts.windows(2)
            .map(|w| (self.value(w[1]) - self.value(w[0])).abs())
            .sum()
    }
}

pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m == a || m == b {
            return m;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// One factor pair `(phi_hat_k, lambda_hat_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub phi_hat: Profile,
    pub lambda_hat: Profile,
}

/// The factor family `k = 1..K`, with factor 1 applied first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PhaseEntry>", into = "Vec<PhaseEntry>")]
pub struct PhaseFamily {
    entries: Vec<PhaseEntry>,
    lambda0: f64,
}

impl TryFrom<Vec<PhaseEntry>> for PhaseFamily {
    type Error = Error;

    fn try_from(entries: Vec<PhaseEntry>) -> Result<Self> {
        PhaseFamily::new(entries)
    }
}

impl From<PhaseFamily> for Vec<PhaseEntry> {
    fn from(f: PhaseFamily) -> Self {
        f.entries
    }
}

impl PhaseFamily {
    pub fn new(entries: Vec<PhaseEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("a phase family needs at least one factor".into()));
        }
        let lambda0 = entries
            .iter()
            .map(|e| e.lambda_hat.extrema().0)
            .fold(f64::INFINITY, f64::min);
        if !(lambda0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_hat must be strictly positive, minimum is {lambda0}"
            )));
        }
        Ok(PhaseFamily { entries, lambda0 })
    }

    pub fn single(phi_hat: Profile, lambda_hat: Profile) -> Result<Self> {
        Self::new(vec![PhaseEntry { phi_hat, lambda_hat }])
    }

    pub fn constant(phi_hat: f64, lambda_hat: f64) -> Result<Self> {
        Self::single(Profile::constant(phi_hat), Profile::constant(lambda_hat))
    }

    pub fn entries(&self) -> &[PhaseEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `min_{k,x} lambda_hat_k(x)`.
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn is_constant(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.phi_hat.is_constant() && e.lambda_hat.is_constant())
    }

    /// Every `phi_hat_k` is non-constant and its critical points are
    /// non-degenerate: `|phi_hat''| >= tol` wherever `phi_hat' = 0`.
    pub fn check_nondegenerate(&self, tol: f64) -> Result<()> {
        for (k, e) in self.entries.iter().enumerate() {
            if e.phi_hat.is_constant() {
                return Err(Error::Hypothesis(format!("phi_hat_{} is constant", k + 1)));
            }
            for x in e.phi_hat.critical_points(4096) {
                let d2 = e.phi_hat.second_derivative(x).abs();
                if d2 < tol {
                    return Err(Error::Hypothesis(format!(
                        "phi_hat_{} has a degenerate critical point at x = {x:.6} (|phi''| = {d2:.3e})",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where the factors come from: closed-form families or a torus potential
/// read off along the line `(x + omega s, s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum PhaseModel {
    Family { phases: PhaseFamily },
    Schrodinger { potential: TorusPotential, root_tol: f64 },
}

#[derive(Clone, Debug)]
pub struct CocycleSpec {
    pub omega: RotationNumber,
    pub epsilon: f64,
    pub model: PhaseModel,
}

impl CocycleSpec {
    pub fn new(omega: RotationNumber, epsilon: f64, phases: PhaseFamily) -> Result<Self> {
        Self::with_model(omega, epsilon, PhaseModel::Family { phases })
    }

    pub fn with_model(omega: RotationNumber, epsilon: f64, model: PhaseModel) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::NonFinite("epsilon"));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        if omega.is_rational() {
            return Err(Error::InvalidInput(format!(
                "rotation number {omega} is rational; the cocycle needs an irrational rotation"
            )));
        }
        Ok(CocycleSpec { omega, epsilon, model })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::with_model(self.omega.clone(), epsilon, self.model.clone())
    }

    pub fn phases(&self) -> Option<&PhaseFamily> {
        match &self.model {
            PhaseModel::Family { phases } => Some(phases),
            PhaseModel::Schrodinger { .. } => None,
        }
    }

    /// Scaled factors `(phi_k(x), lambda_k(x))` at working precision.
    pub fn factors_r<R: Real>(&self, x: f64) -> Result<Vec<(R, R)>> {
        let inv = R::one() / R::from_f64(self.epsilon);
        match &self.model {
            PhaseModel::Family { phases } => {
                let xr = R::from_f64(x);
                Ok(phases
                    .entries
                    .iter()
                    .map(|e| {
                        (
                            e.phi_hat.derivative_r(xr, 0) * inv,
                            e.lambda_hat.derivative_r(xr, 0) * inv,
                        )
                    })
                    .collect())
            }
            PhaseModel::Schrodinger { potential, root_tol } => {
                let decomp = decompose_segment(potential, self.omega.value(), x, *root_tol)?;
                let hat = line_integrals(&decomp, potential, self.omega.value(), 1e-12)?;
                Ok(hat
                    .pairs
                    .iter()
                    .map(|&(p, l)| (R::from_f64(p) * inv, R::from_f64(l) * inv))
                    .collect())
            }
        }
    }
}

/// Scaled factor chain of the fiber map at `x`.
pub fn eval_factors(spec: &CocycleSpec, x: f64) -> Result<FactorSequence> {
    let factors: Vec<(f64, f64)> = spec.factors_r::<f64>(x)?;
    let mut seq = FactorSequence::new(factors, 1.0);
    seq.delta = seq.min_abs_cos();
    Ok(seq)
}

/// Polar form of `A_eps(x)`.
pub fn fiber_map<R: Real>(spec: &CocycleSpec, x: f64) -> Result<PolarForm<R>> {
    append_fiber(&PolarForm::identity(), spec, x)
}

pub(crate) fn append_fiber<R: Real>(state: &PolarForm<R>, spec: &CocycleSpec, x: f64) -> Result<PolarForm<R>> {
    let mut state = *state;
    for (phi, lambda) in spec.factors_r::<R>(x)? {
        state = polar_append(&state, phi, lambda)?;
    }
    Ok(state)
}

pub(crate) fn orbit_guard(spec: &CocycleSpec, n: i64) -> Result<()> {
    let err = spec.omega.position_error(n);
    // a position error of err moves phi_k by about err |phi_hat'| / eps
    if err / spec.epsilon > 1e-9 {
        return Err(Error::PrecisionExhausted(format!(
            "orbit of length {n} drifts by {err:.3e}; supply more partial quotients"
        )));
    }
    Ok(())
}

/// Polar forms of `M(x, 1), ..., M(x, n)` for `n >= 0`.
pub fn cocycle_trajectory<R: Real>(spec: &CocycleSpec, x: f64, n: usize) -> Result<Vec<PolarForm<R>>> {
    orbit_guard(spec, n as i64)?;
    let mut out = Vec::with_capacity(n);
    let mut state = PolarForm::identity();
    for (j, xj) in spec.omega.orbit(x).take(n).enumerate() {
        state = append_fiber(&state, spec, xj).map_err(|e| e.at_level(j))?;
        out.push(state);
    }
    Ok(out)
}

/// Polar form of `M(x, n) = A(sigma^{n-1} x) ... A(x)`; negative `n` gives
/// `M(x, -n) = M(sigma^{-n} x, n)^{-1}`.
pub fn cocycle_matrix<R: Real>(spec: &CocycleSpec, x: f64, n: i64) -> Result<PolarForm<R>> {
    orbit_guard(spec, n)?;
    if n == 0 {
        return Ok(PolarForm::identity());
    }
    let steps = n.unsigned_abs() as usize;
    let start = if n > 0 { x } else { spec.omega.shift(x, n) };
    let mut state = PolarForm::identity();
    for xj in spec.omega.orbit(start).take(steps) {
        state = append_fiber(&state, spec, xj)?;
    }
    if n > 0 {
        Ok(state)
    } else {
        polar_inverse(&state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::Matrix2;
    use crate::precision::DoubleDouble;

    fn golden() -> RotationNumber {
        RotationNumber::from_quotients(&[1; 60]).unwrap()
    }

    fn spec(phases: PhaseFamily, eps: f64) -> CocycleSpec {
        CocycleSpec::new(golden(), eps, phases).unwrap()
    }

    #[test]
    fn constant_factors_scale_by_epsilon() {
        let s = spec(PhaseFamily::constant(0.3, 1.0).unwrap(), 0.1);
        let f = eval_factors(&s, 0.7).unwrap();
        assert!((f.factors[0].0 - 3.0).abs() < 1e-14);
        assert!((f.factors[0].1 - 10.0).abs() < 1e-14);
    }

    #[test]
    fn trig_profile_value_and_derivatives() {
        let p = Profile::sine(0.3, 0.1);
        assert!((p.value(0.25) - 0.4).abs() < 1e-15);
        let h = 1e-5;
        for &x in &[0.0, 0.13, 0.5, 0.91] {
            let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            assert!((fd - p.derivative(x)).abs() < 1e-8);
            let fd2 = (p.derivative(x + h) - p.derivative(x - h)) / (2.0 * h);
            assert!((fd2 - p.second_derivative(x)).abs() < 1e-6);
        }
        let dd = p.derivative_r(DoubleDouble::from_f64(0.25), 0);
        assert!((dd - DoubleDouble::from_f64(0.3) - DoubleDouble::from_f64(0.1)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn sine_profile_critical_points_and_variation() {
        let p = Profile::sine(1.0, 0.3);
        let c = p.critical_points(64);
        assert_eq!(c.len(), 2);
        assert!((c[0] - 0.25).abs() < 1e-14 && (c[1] - 0.75).abs() < 1e-14);
        assert!((p.total_variation() - 1.2).abs() < 1e-12);
        assert_eq!(p.extrema(), (0.7, 1.3));
    }

    #[test]
    fn degenerate_critical_points_are_detected() {
        let ok = PhaseFamily::single(Profile::sine(1.0, 0.3), Profile::constant(1.0)).unwrap();
        assert!(ok.check_nondegenerate(1e-6).is_ok());
        let flat = PhaseFamily::constant(1.0, 1.0).unwrap();
        assert!(flat.check_nondegenerate(1e-6).is_err());
        // sin^3-like: sin(2 pi x) - sin(6 pi x)/3 has vanishing second derivative at x = 1/4?
        // Use 3 sin x - sin 3x = 4 sin^3 x, flat at x = 0 and 1/2.
        let cubic = Profile::Trig {
            constant: 0.0,
            cos: vec![],
            sin: vec![3.0, 0.0, -1.0],
        };
        let fam = PhaseFamily::single(cubic, Profile::constant(1.0)).unwrap();
        assert!(matches!(fam.check_nondegenerate(1e-3), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(PhaseFamily::single(Profile::constant(0.0), Profile::sine(0.5, 0.6)).is_err());
        let f = PhaseFamily::single(Profile::constant(0.0), Profile::sine(1.0, 0.25)).unwrap();
        assert!((f.lambda0() - 0.75).abs() < 1e-14);
    }

    #[test]
    fn rational_rotation_is_refused() {
        let w = RotationNumber::rational_from_quotients(&[1, 3]).unwrap();
        assert!(CocycleSpec::new(w, 0.1, PhaseFamily::constant(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn single_diagonal_factor() {
        let s = spec(PhaseFamily::constant(0.0, 1.0).unwrap(), 0.5);
        let p: PolarForm = fiber_map(&s, 0.2).unwrap();
        assert!(p.theta.abs() < 1e-15 && p.chi.abs() < 1e-15);
        assert!((p.mu - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_squares_to_minus_identity() {
        let s = spec(PhaseFamily::constant(PI / 2.0 * 0.5, 1.0).unwrap(), 0.5);
        let m: PolarForm = cocycle_matrix(&s, 0.0, 2).unwrap();
        assert!(m.mu.abs() < 1e-12, "{}", m.mu);
    }

    #[test]
    fn two_factor_fiber_matches_dense_product() {
        let fam = PhaseFamily::new(vec![
            PhaseEntry {
                phi_hat: Profile::sine(0.1, 0.05),
                lambda_hat: Profile::constant(0.2),
            },
            PhaseEntry {
                phi_hat: Profile::constant(0.07),
                lambda_hat: Profile::sine(0.3, 0.1),
            },
        ])
        .unwrap();
        let s = spec(fam, 0.1);
        for &x in &[0.0, 0.31, 0.77] {
            let f = eval_factors(&s, x).unwrap();
            let mut dense = Matrix2::IDENTITY;
            for &(p, l) in &f.factors {
                dense = Matrix2::rotation(p).mul(&Matrix2::stretch(l)).mul(&dense);
            }
            let polar: PolarForm = fiber_map(&s, x).unwrap();
            assert!(polar.densify().unwrap().rel_diff(&dense) < 1e-12);
            assert!(polar.densify().unwrap().is_sl2(1e-9));
        }
    }

    #[test]
    fn negative_times_invert() {
        let fam = PhaseFamily::single(Profile::sine(0.05, 0.02), Profile::constant(0.1)).unwrap();
        let s = spec(fam, 0.2);
        let x = 0.37;
        for n in 1..5i64 {
            let fwd: PolarForm = cocycle_matrix(&s, s.omega.shift(x, -n), n).unwrap();
            let back: PolarForm = cocycle_matrix(&s, x, -n).unwrap();
            let prod = back.densify().unwrap().mul(&fwd.densify().unwrap());
            assert!(prod.rel_diff(&Matrix2::IDENTITY) < 1e-10, "{n}");
        }
        let id: PolarForm = cocycle_matrix(&s, x, 0).unwrap();
        assert_eq!(id, PolarForm::identity());
    }

    #[test]
    fn constant_family_growth_matches_spectral_radius() {
        let s = spec(PhaseFamily::constant(0.05, 0.2).unwrap(), 0.5);
        let a = Matrix2::rotation(0.1).mul(&Matrix2::stretch(0.4));
        let tr = a.0[0][0] + a.0[1][1];
        let rho = (tr.abs() + (tr * tr - 4.0).sqrt()) / 2.0;
        let n = 400;
        let m: PolarForm = cocycle_matrix(&s, 0.0, n).unwrap();
        assert!((m.mu / n as f64 - rho.ln()).abs() < 5e-3);
    }
}
