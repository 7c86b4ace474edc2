//! Products of rotations `R(phi)` and diagonal stretches `Z(lambda)` kept in
//! polar form `R(theta + chi) Z(mu) R(-chi)`.
//!
//! Conventions:
//! `R(phi) = [[cos phi, sin phi], [-sin phi, cos phi]]`, `Z(l) = diag(e^l, e^-l)`.
//! `mu >= 0` always, `theta` lives in `(-pi, pi]`, and `chi` is only defined
//! modulo `pi`; along a chain its branch is carried by continuity.
//!
//! No operation here ever forms `e^mu` for a stored `mu`. The only
//! exponentials are `e^{-2 mu}`, which underflow harmlessly to zero.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::Real;

/// Largest `mu` for which a dense 2x2 matrix may be formed.
pub fn dense_mu_limit() -> f64 {
    0.4 * f64::MAX.ln()
}

/// Plain 2x2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix2(pub [[f64; 2]; 2]);

impl Matrix2 {
    pub const IDENTITY: Matrix2 = Matrix2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn rotation(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        Matrix2([[c, s], [-s, c]])
    }

    pub fn stretch(lambda: f64) -> Self {
        Matrix2([[lambda.exp(), 0.0], [0.0, (-lambda).exp()]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn is_sl2(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }

    pub fn mul(&self, rhs: &Matrix2) -> Matrix2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Matrix2(out)
    }

    /// Inverse of a determinant-one matrix (adjugate).
    pub fn sl2_inverse(&self) -> Matrix2 {
        let m = &self.0;
        Matrix2([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let m = &self.0;
        let t = m.iter().flatten().map(|v| v * v).sum::<f64>();
        let d = self.det();
        ((t + (t * t - 4.0 * d * d).max(0.0).sqrt()) / 2.0).sqrt()
    }

    /// Largest entrywise difference, relative to the larger of the two norms.
    pub fn rel_diff(&self, other: &Matrix2) -> f64 {
        let mut diff = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                diff = diff.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        diff / self.norm().max(other.norm()).max(1.0)
    }

    /// Polar decomposition of a determinant-one matrix.
    pub fn to_polar(&self) -> Result<PolarForm<f64>> {
        if !self.0.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("matrix entry"));
        }
        let m = &self.0;
        // rotation/reflection split: M = [[e+f, g-h], [g+h, e-f]] in the usual basis,
        // rewritten for the clockwise R used here
        let e = (m[0][0] + m[1][1]) / 2.0;
        let f = (m[0][0] - m[1][1]) / 2.0;
        let g = (m[1][0] + m[0][1]) / 2.0;
        let h = (m[1][0] - m[0][1]) / 2.0;
        let q = e.hypot(h);
        let r = f.hypot(g);
        let mu = (q + r).ln().max(0.0);
        let a1 = g.atan2(f);
        let a2 = h.atan2(e);
        let theta = -a2;
        let chi = if r == 0.0 { 0.0 } else { (a2 - a1) / 2.0 };
        Ok(PolarForm::normalized(theta, chi, mu, 0.0))
    }
}

/// `R(theta + chi) Z(mu) R(-chi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarForm<R: Real = f64> {
    pub theta: R,
    pub chi: R,
    pub mu: R,
}

/// Plain-f64 snapshot of a [`PolarForm`] for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarRecord {
    pub theta: f64,
    pub chi: f64,
    pub mu: f64,
}

fn wrap_angle<R: Real>(theta: R) -> R {
    let two_pi = R::pi().mul_f64(2.0);
    let k = (theta.to_f64() / (2.0 * PI)).round();
    let mut t = theta - two_pi.mul_f64(k);
    if t.to_f64() <= -PI {
        t = t + two_pi;
    } else if t.to_f64() > PI {
        t = t - two_pi;
    }
    t
}

/// Representative of `chi` modulo `pi` closest to `reference`.
fn nearest_branch<R: Real>(chi: R, reference: R) -> R {
    // Half-open window (reference - pi/2, reference + pi/2].
    let k = ((chi - reference).to_f64() / PI - 0.5).ceil();
    if k == 0.0 {
        chi
    } else {
        chi - R::pi().mul_f64(k)
    }
}

impl<R: Real> PolarForm<R> {
    pub fn identity() -> Self {
        PolarForm {
            theta: R::zero(),
            chi: R::zero(),
            mu: R::zero(),
        }
    }

    /// Builds a normal-form value: `theta` wrapped, `mu` made non-negative,
    /// `chi` on the branch closest to `chi_ref`.
    pub fn normalized(theta: R, chi: R, mu: R, chi_ref: R) -> Self {
        let (theta, chi, mu) = if mu < R::zero() {
            // Z(-m) = R(pi/2) Z(m) R(-pi/2)
            (theta, chi + R::frac_pi_2(), -mu)
        } else {
            (theta, chi, mu)
        };
        PolarForm {
            theta: wrap_angle(theta),
            chi: nearest_branch(chi, chi_ref),
            mu,
        }
    }

    pub fn from_f64(theta: f64, chi: f64, mu: f64) -> Self {
        PolarForm {
            theta: R::from_f64(theta),
            chi: R::from_f64(chi),
            mu: R::from_f64(mu),
        }
    }

    pub fn record(&self) -> PolarRecord {
        PolarRecord {
            theta: self.theta.to_f64(),
            chi: self.chi.to_f64(),
            mu: self.mu.to_f64(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.chi.is_finite() && self.mu.is_finite()
    }

    /// `log ||.||` of the represented matrix.
    pub fn log_norm(&self) -> R {
        self.mu
    }

    /// `chi` reduced to `(-pi/2, pi/2]`.
    pub fn chi_mod_pi(&self) -> f64 {
        nearest_branch(self.chi, R::zero()).to_f64()
    }

    pub fn cast<S: Real>(&self) -> PolarForm<S> {
        PolarForm {
            theta: S::from_f64(self.theta.to_f64()),
            chi: S::from_f64(self.chi.to_f64()),
            mu: S::from_f64(self.mu.to_f64()),
        }
    }

    /// Dense matrix, refused above [`dense_mu_limit`].
    pub fn densify(&self) -> Result<Matrix2> {
        let mu = self.mu.to_f64();
        let limit = dense_mu_limit();
        if !(mu <= limit) {
            return Err(Error::DenseOverflow { mu, limit });
        }
        let theta = self.theta.to_f64();
        let chi = self.chi.to_f64();
        Ok(Matrix2::rotation(theta + chi)
            .mul(&Matrix2::stretch(mu))
            .mul(&Matrix2::rotation(-chi)))
    }

    /// Angle (counter-clockwise from e1, modulo pi) of the input direction
    /// `R(chi) e1` that the matrix stretches the most.
    pub fn expanding_direction(&self) -> f64 {
        -self.chi_mod_pi()
    }

    /// Most contracted input direction, orthogonal to [`Self::expanding_direction`].
    pub fn contracting_direction(&self) -> f64 {
        let a = self.expanding_direction() + FRAC_PI_2;
        if a > FRAC_PI_2 {
            a - PI
        } else {
            a
        }
    }
}

fn check_finite<R: Real>(x: R, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Polar form of `Z(mu2) R(phi) Z(mu1)`, with `chi` on the branch nearest `chi_ref`.
pub fn zrz_polar_near<R: Real>(mu2: R, phi: R, mu1: R, chi_ref: R) -> Result<PolarForm<R>> {
    check_finite(mu1, "mu1")?;
    check_finite(mu2, "mu2")?;
    check_finite(phi, "phi")?;
    if mu1 < R::zero() || mu2 < R::zero() {
        return Err(Error::InvalidInput(format!(
            "log-stretches must be non-negative, got {:?} and {:?}",
            mu2.to_f64(),
            mu1.to_f64()
        )));
    }
    let one = R::one();
    let two = R::from_f64(2.0);
    let b1 = (-(mu1 * two)).exp();
    let b2 = (-(mu2 * two)).exp();
    let (s, c) = phi.sin_cos();

    // Z(mu2) R(phi) Z(mu1) = e^{mu1+mu2} [[c, b1 s], [-b2 s, b1 b2 c]]
    let b12 = b1 * b2;
    let e = c * (one + b12) / two;
    let f = c * (one - b12) / two;
    let g = s * (b1 - b2) / two;
    let h = -(s * (b1 + b2)) / two;
    let sigma = e.hypot(h) + f.hypot(g);

    if sigma.is_zero() {
        // cos(phi) == 0 exactly and both e^{-2mu} underflowed:
        // Z(mu2) R(phi) = R(phi) Z(-mu2) for a quarter turn.
        let d = mu1 - mu2;
        return Ok(PolarForm::normalized(phi, R::zero(), d, chi_ref));
    }

    let mut mu = mu1 + mu2 + sigma.ln();
    if mu < R::zero() {
        // rounding below the SL(2) floor of 1
        mu = R::zero();
    }
    let theta = (s * (b1 + b2)).atan2(c * (one + b12));
    let num = -(two * s * c * b1 * (one - b2 * b2));
    let den = c * c * (one - b12 * b12) - s * s * (b1 * b1 - b2 * b2);
    let chi = if num.is_zero() && den.is_zero() {
        chi_ref
    } else {
        num.atan2(den) / two
    };
    Ok(PolarForm::normalized(theta, chi, mu, chi_ref))
}

/// Polar form of `Z(mu2) R(phi) Z(mu1)`.
pub fn zrz_polar<R: Real>(mu2: R, phi: R, mu1: R) -> Result<PolarForm<R>> {
    zrz_polar_near(mu2, phi, mu1, R::zero())
}

/// Polar form of `R(phi) Z(lambda) * state`.
pub fn polar_append<R: Real>(state: &PolarForm<R>, phi: R, lambda: R) -> Result<PolarForm<R>> {
    check_finite(phi, "phi")?;
    let inner = zrz_polar(lambda, state.theta + state.chi, state.mu)?;
    let chi = state.chi + inner.chi;
    let theta = phi + inner.theta - state.chi;
    Ok(PolarForm {
        theta: wrap_angle(theta),
        chi,
        mu: inner.mu,
    })
}

/// Polar form of `a * b`.
pub fn polar_mul<R: Real>(a: &PolarForm<R>, b: &PolarForm<R>) -> Result<PolarForm<R>> {
    // R(ta+ca) [Z(ma) R(tb+cb-ca) Z(mb)] R(-cb)
    let inner = zrz_polar(a.mu, b.theta + b.chi - a.chi, b.mu)?;
    let chi = b.chi + inner.chi;
    let theta = a.theta + a.chi + inner.theta - b.chi;
    Ok(PolarForm {
        theta: wrap_angle(theta),
        chi,
        mu: inner.mu,
    })
}

/// Polar form of the inverse matrix.
pub fn polar_inverse<R: Real>(state: &PolarForm<R>) -> Result<PolarForm<R>> {
    if !state.is_finite() {
        return Err(Error::NonFinite("polar form"));
    }
    // R(chi) Z(-mu) R(-theta-chi) = R(chi + pi/2) Z(mu) R(-(theta + chi + pi/2))
    let chi = state.theta + state.chi + R::frac_pi_2();
    let theta = -state.theta;
    Ok(PolarForm::normalized(theta, chi, state.mu, R::zero()))
}

/// Alternating factor chain `A_k = R(phi_k) Z(lambda_k)`, applied with `k = 1` first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSequence {
    pub factors: Vec<(f64, f64)>,
    /// Lower bound on `|cos phi_k|`.
    pub delta: f64,
}

impl FactorSequence {
    pub fn new(factors: Vec<(f64, f64)>, delta: f64) -> Self {
        FactorSequence { factors, delta }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn lambda_floor(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(_, l)| l)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_abs_cos(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(p, _)| p.cos().abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty factor sequence".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        for (k, &(p, l)) in self.factors.iter().enumerate() {
            if !p.is_finite() || !l.is_finite() {
                return Err(Error::NonFinite("factor"));
            }
            if l <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "factor {k}: lambda = {l} is not positive"
                )));
            }
            if p.cos().abs() < self.delta {
                return Err(Error::InvalidInput(format!(
                    "factor {k}: |cos phi| = {} below delta = {}",
                    p.cos().abs(),
                    self.delta
                )));
            }
        }
        Ok(())
    }

    /// Polar forms of `A^1, ..., A^k`.
    pub fn trajectory<R: Real>(&self) -> Result<Vec<PolarForm<R>>> {
        let mut out = Vec::with_capacity(self.len());
        let mut state = PolarForm::<R>::identity();
        for &(p, l) in &self.factors {
            state = polar_append(&state, R::from_f64(p), R::from_f64(l))?;
            out.push(state);
        }
        Ok(out)
    }

    pub fn product<R: Real>(&self) -> Result<PolarForm<R>> {
        Ok(self
            .trajectory()?
            .pop()
            .unwrap_or_else(PolarForm::identity))
    }
}

/// Lower-bound data for a factor chain satisfying the cone hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBound {
    pub steps: usize,
    pub lambda0: f64,
    pub delta: f64,
    /// Certified `log ||A^k|| >= k log(C_A delta e^{lambda0})`.
    pub log_norm_bound: f64,
    /// `C_A = 1 - 4 s (delta e^{lambda0})^{-2}` with
    /// `s = min(1, sqrt(1 - delta^2) + e^{-lambda0})`; exactly aligned
    /// factors (`delta = 1`) lose almost nothing.
    pub c_a: f64,
    /// Per-step increment floor `lambda0 + log delta - 2 delta^-2 e^{-4 lambda0}`.
    pub mu_floor: f64,
    /// `|theta_n - phi_n| (mod pi) <= 2 delta^-1 e^{-2 lambda0}`.
    pub theta_bound: f64,
    /// Bounds on `|chi_n - chi_{n-1}|` for `n = 2..=k`.
    pub chi_step_bounds: Vec<f64>,
    /// Sum of the step bounds: total `chi` drift.
    pub chi_bound: f64,
}

/// `C_A` for factors with `|cos phi| >= delta` and `lambda >= lambda0`;
/// positive only when `delta e^{lambda0} > 2`.
pub fn certified_constant(delta: f64, lambda0: f64) -> f64 {
    let x = delta * lambda0.exp();
    let s = ((1.0 - delta * delta).max(0.0).sqrt() + (-lambda0).exp()).min(1.0);
    1.0 - 4.0 * s / (x * x)
}

pub fn product_lower_bound(seq: &FactorSequence) -> Result<ProductBound> {
    seq.validate()?;
    let delta = seq.delta;
    let lambda0 = seq.lambda_floor();
    let x = delta * lambda0.exp();
    if x <= 2.0 {
        return Err(Error::Hypothesis(format!(
            "delta e^lambda0 = {x:.4} must exceed 2"
        )));
    }
    let k = seq.len();
    let c_a = certified_constant(delta, lambda0);
    let log_norm_bound = k as f64 * (c_a * x).ln();
    let loss = 2.0 * delta.powi(-2) * (-4.0 * lambda0).exp();
    let mu_floor = lambda0 + delta.ln() - loss;
    let theta_bound = 2.0 / delta * (-2.0 * lambda0).exp();
    let chi_step_bounds: Vec<f64> = (2..=k)
        .map(|n| {
            let n = n as f64;
            let log_b = (3.0 - 2.0 * n) * delta.ln() - 2.0 * (n - 1.0) * lambda0
                - 2.0 * (n - 2.0) * (1.0 - loss).ln();
            log_b.exp()
        })
        .collect();
    let chi_bound = chi_step_bounds.iter().sum();
    Ok(ProductBound {
        steps: k,
        lambda0,
        delta,
        log_norm_bound,
        c_a,
        mu_floor,
        theta_bound,
        chi_step_bounds,
        chi_bound,
    })
}

/// Measured deviations of a chain from the step-wise bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainAudit {
    pub steps: usize,
    /// `(n, measured - bound)` for every violated `theta` tracking bound.
    pub theta_violations: Vec<(usize, f64)>,
    pub chi_violations: Vec<(usize, f64)>,
    pub mu_increment_violations: Vec<(usize, f64)>,
    pub norm_violations: Vec<(usize, f64)>,
    pub min_mu_increment: f64,
}

impl ChainAudit {
    pub fn is_clean(&self) -> bool {
        self.theta_violations.is_empty()
            && self.chi_violations.is_empty()
            && self.mu_increment_violations.is_empty()
            && self.norm_violations.is_empty()
    }
}

/// Checks every prefix of `seq` against [`product_lower_bound`].
///
/// `log ||A^n||` is taken from a dense product while it is representable and
/// from the polar `mu` afterwards.
pub fn audit_chain(seq: &FactorSequence) -> Result<ChainAudit> {
    let bound = product_lower_bound(seq)?;
    let traj = seq.trajectory::<f64>()?;
    let mut audit = ChainAudit {
        steps: traj.len(),
        min_mu_increment: f64::INFINITY,
        ..Default::default()
    };
    let per_step = (bound.c_a * bound.delta * bound.lambda0.exp()).ln();
    let mut dense = Some(Matrix2::IDENTITY);
    for (i, state) in traj.iter().enumerate() {
        let n = i + 1;
        let (phi, lambda) = seq.factors[i];
        dense = dense.and_then(|m| {
            let next = Matrix2::rotation(phi)
                .mul(&Matrix2::stretch(lambda))
                .mul(&m);
            (next.max_abs() < 1e150).then_some(next)
        });
        let log_norm = match dense {
            Some(m) => m.norm().ln(),
            None => state.mu,
        };
        let norm_floor = n as f64 * per_step;
        if log_norm < norm_floor * (1.0 - 1e-12) {
            audit.norm_violations.push((n, norm_floor - log_norm));
        }
        if n < 2 {
            continue;
        }
        let prev = &traj[i - 1];
        // theta tracks phi up to the sign ambiguity R(pi) = -I
        let d = (state.theta - phi).rem_euclid(PI);
        let d = d.min(PI - d);
        if d > bound.theta_bound {
            audit.theta_violations.push((n, d - bound.theta_bound));
        }
        let dchi = (state.chi - prev.chi).abs();
        let cb = bound.chi_step_bounds[n - 2];
        if dchi > cb {
            audit.chi_violations.push((n, dchi - cb));
        }
        let inc = state.mu - prev.mu;
        audit.min_mu_increment = audit.min_mu_increment.min(inc);
        if inc < bound.mu_floor - 1e-12 * state.mu.max(1.0) {
            audit.mu_increment_violations.push((n, bound.mu_floor - inc));
        }
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::DoubleDouble;

    #[test]
    fn pure_rotation() {
        let p = zrz_polar(0.0, 0.7, 0.0).unwrap();
        assert!((p.theta - 0.7).abs() < 1e-15);
        assert_eq!(p.chi, 0.0);
        assert!(p.mu.abs() < 1e-15);
    }

    #[test]
    fn pure_stretch_adds() {
        let p = zrz_polar(3.0, 0.0, 2.0).unwrap();
        assert_eq!(p.theta, 0.0);
        assert_eq!(p.chi, 0.0);
        assert!((p.mu - 5.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            zrz_polar(f64::NAN, 0.1, 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            zrz_polar(1.0, 0.1, -1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn quarter_turn_with_underflowed_stretches_is_exact() {
        // cos(phi) == 0 exactly is only reachable through the sigma == 0 branch
        // when both e^{-2mu} underflow; check the generic path stays sane too.
        let p = zrz_polar(500.0, std::f64::consts::FRAC_PI_2, 800.0).unwrap();
        assert!(p.is_finite());
        assert!(p.mu > 0.0);
        let p = zrz_polar(4.0, std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        // Z(4) R(pi/2) Z(1) = R(pi/2) Z(-3)
        assert!((p.mu - 3.0).abs() < 1e-12);
        let m = p.densify().unwrap();
        let want = Matrix2::stretch(4.0)
            .mul(&Matrix2::rotation(std::f64::consts::FRAC_PI_2))
            .mul(&Matrix2::stretch(1.0));
        assert!(m.rel_diff(&want) < 1e-12);
    }

    #[test]
    fn append_to_identity_is_single_factor() {
        let p = polar_append(&PolarForm::identity(), 0.4, 2.5).unwrap();
        assert!((p.theta - 0.4).abs() < 1e-15);
        assert_eq!(p.chi, 0.0);
        assert!((p.mu - 2.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_of_diagonal() {
        let inv = polar_inverse(&PolarForm::<f64>::from_f64(0.0, 0.0, 3.0)).unwrap();
        assert!((inv.chi - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(inv.mu, 3.0);
        assert!(inv.theta.abs() < 1e-15);
        let id = polar_inverse(&PolarForm::<f64>::identity()).unwrap();
        assert!(id.densify().unwrap().rel_diff(&Matrix2::IDENTITY) < 1e-15);
    }

    #[test]
    fn densify_guard() {
        let big = PolarForm::<f64>::from_f64(0.1, 0.0, 400.0);
        assert!(matches!(big.densify(), Err(Error::DenseOverflow { .. })));
        let ok = PolarForm::<f64>::from_f64(0.1, 0.2, 20.0);
        assert!(ok.densify().unwrap().is_sl2(1e-12 * 1e17));
    }

    #[test]
    fn dense_round_trip() {
        let p = PolarForm::<f64>::from_f64(1.1, -0.3, 2.0);
        let q = p.densify().unwrap().to_polar().unwrap();
        assert!((q.theta - p.theta).abs() < 1e-13);
        assert!((q.chi_mod_pi() - p.chi_mod_pi()).abs() < 1e-13);
        assert!((q.mu - p.mu).abs() < 1e-13);
    }

    #[test]
    fn huge_exponents_stay_finite() {
        let seq = FactorSequence::new(vec![(0.3, 400.0); 50], 0.9);
        let p = seq.product::<f64>().unwrap();
        assert!(p.is_finite());
        assert!(p.mu > 50.0 * (400.0 + 0.3f64.cos().ln()) - 1e-6);
    }

    #[test]
    fn extended_backend_agrees_with_double() {
        let seq = FactorSequence::new(vec![(0.3, 5.0), (-1.2, 4.0), (2.0, 6.5)], 0.3);
        let a = seq.product::<f64>().unwrap();
        let b = seq.product::<DoubleDouble>().unwrap();
        assert!((a.mu - b.mu.to_f64()).abs() < 1e-13);
        assert!((a.theta - b.theta.to_f64()).abs() < 1e-13);
        assert!((a.chi - b.chi.to_f64()).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_pure_diagonal() {
        let seq = FactorSequence::new(vec![(0.0, 10.0); 7], 1.0);
        let b = product_lower_bound(&seq).unwrap();
        assert!((b.log_norm_bound - 70.0).abs() < 1e-10);
        assert!((b.mu_floor - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_rejects_weak_hyperbolicity() {
        let seq = FactorSequence::new(vec![(1.2, 1.0); 3], 0.3);
        assert!(matches!(
            product_lower_bound(&seq),
            Err(Error::Hypothesis(_))
        ));
        let seq = FactorSequence::new(vec![(1.5, 5.0); 3], 0.3);
        assert!(matches!(
            product_lower_bound(&seq),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn quarter_turn_collapses_growth() {
        let base = vec![(0.3, 5.0); 4];
        let mut with = base.clone();
        with.insert(2, (FRAC_PI_2, 5.0));
        let a = FactorSequence::new(base, 0.0).product::<f64>().unwrap();
        let b = FactorSequence::new(with, 0.0).product::<f64>().unwrap();
        assert!(b.mu < a.mu);
    }
}
