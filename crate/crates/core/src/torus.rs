//! Reading the factor chain off a potential on the two-torus.
//!
//! For the Schrödinger equation `eps^2 y'' = F(theta1, theta2) y` the
//! one-period map along `I(x) = {(x + omega s, s) : s in [0, 1)}` is a product
//! of rotations (where `F < 0`) and stretches (where `F > 0`). The angles
//! and log-stretches are line integrals of `|F|^{1/2}` over the sign
//! components of `F` restricted to `I(x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cocycle::bisect;
use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;

/// One harmonic `c cos 2pi(j1 t1 + j2 t2) + s sin 2pi(j1 t1 + j2 t2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusTerm {
    pub j1: i32,
    pub j2: i32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Trigonometric polynomial `F` on the two-torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPotential {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TorusTerm>,
}

impl TorusPotential {
    pub fn constant(c: f64) -> Self {
        TorusPotential {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let (s, c) = (TAU * (t.j1 as f64 * t1 + t.j2 as f64 * t2)).sin_cos();
            acc + t.cos * c + t.sin * s
        })
    }

    /// `F(x + omega s, s)` and its `s`-derivative.
    pub fn along(&self, omega: f64, x: f64, s: f64) -> (f64, f64) {
        let t1 = x + omega * s;
        self.terms.iter().fold((self.constant, 0.0), |(v, d), t| {
            let w = TAU * (t.j1 as f64 * omega + t.j2 as f64);
            let (sn, cs) = (TAU * (t.j1 as f64 * t1 + t.j2 as f64 * s)).sin_cos();
            (v + t.cos * cs + t.sin * sn, d + w * (t.sin * cs - t.cos * sn))
        })
    }

    /// Sum of absolute coefficients: a bound on `|F|`.
    pub fn scale(&self) -> f64 {
        self.terms
            .iter()
            .fold(self.constant.abs(), |a, t| a + t.cos.abs() + t.sin.abs())
    }

    /// Largest `|j1 omega + j2|`: the fastest oscillation along `I(x)`.
    pub fn max_frequency(&self, omega: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.j1 as f64 * omega + t.j2 as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Does `F` take both signs on the torus (checked on a 256 x 256 grid)?
    pub fn attains_both_signs(&self) -> bool {
        let n = 256;
        let (mut pos, mut neg) = (false, false);
        for i in 0..n {
            for j in 0..n {
                let v = self.eval(i as f64 / n as f64, j as f64 / n as f64);
                pos |= v > 0.0;
                neg |= v < 0.0;
            }
        }
        pos && neg
    }
}

/// A maximal sign component of `F` along `I(x)`, as an `s`-interval.
///
/// A wrapped component joins the end of the segment to its start; it is
/// reported with `start < 0`, i.e. as `(r_last - 1, r_first)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub start: f64,
    pub end: f64,
    /// `+1` where `F > 0`, `-1` where `F < 0`.
    pub sign: i8,
}

impl Component {
    pub fn wrapped(&self) -> bool {
        self.start < 0.0
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Pieces inside `[0, 1]`.
    fn pieces(&self) -> Vec<(f64, f64)> {
        if self.wrapped() {
            vec![(self.start + 1.0, 1.0), (0.0, self.end)]
        } else {
            vec![(self.start, self.end)]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentDecomposition {
    pub x: f64,
    pub roots: Vec<f64>,
    /// Ordered by increasing `start`.
    pub components: Vec<Component>,
    /// `F` has one sign along the whole segment.
    pub sign_definite: bool,
}

impl SegmentDecomposition {
    /// `K(x)`.
    pub fn count(&self) -> usize {
        self.components.len()
    }
}

/// Locates the sign components of `s -> F(x + omega s, s)` on `[0, 1)`.
///
/// Roots are bracketed on a grid fine enough for the highest harmonic and
/// refined by bisection to `root_tol`. The end components are merged when
/// `F` has the same sign at both ends of the segment. A root where the
/// derivative nearly vanishes is a tangency and is rejected.
pub fn decompose_segment(potential: &TorusPotential, omega: f64, x: f64, root_tol: f64) -> Result<SegmentDecomposition> {
    if !(root_tol >= 1e-15) {
        return Err(Error::RootFinding(format!(
            "root tolerance {root_tol:e} is below what double precision resolves on [0, 1)"
        )));
    }
    if !omega.is_finite() || !x.is_finite() {
        return Err(Error::NonFinite("segment"));
    }
    let scale = potential.scale().max(f64::MIN_POSITIVE);
    let freq = potential.max_frequency(omega);
    let grid = (4096.0f64).max(64.0 * freq).min(1.0e7) as usize;
    let g = |s: f64| potential.along(omega, x, s).0;
    let slope_floor = 1e-7 * scale * TAU * freq.max(1.0);
    let h = 1.0 / grid as f64;

    let mut roots = Vec::new();
    let mut prev = g(0.0);
    if prev == 0.0 {
        roots.push(0.0);
    }
    for i in 0..grid {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        let fb = g(b);
        if prev != 0.0 && fb != 0.0 && (prev < 0.0) != (fb < 0.0) {
            roots.push(bisect(g, a, b, prev, root_tol));
        } else if fb == 0.0 && i + 1 < grid {
            roots.push(b);
        } else if prev.abs() < 1e-9 * scale && potential.along(omega, x, a).1.abs() < slope_floor {
            return Err(Error::Degenerate(format!(
                "F nearly touches zero tangentially at s = {a:.6} for x = {x:.6}"
            )));
        }
        prev = fb;
    }
    for &r in &roots {
        let slope = potential.along(omega, x, r).1.abs();
        if slope < slope_floor {
            return Err(Error::Degenerate(format!(
                "tangential root of F at s = {r:.9} for x = {x:.6} (slope {slope:.3e})"
            )));
        }
    }

    let sign_at = |s: f64| if g(s) > 0.0 { 1i8 } else { -1i8 };
    if roots.is_empty() {
        return Ok(SegmentDecomposition {
            x,
            roots,
            components: vec![Component {
                start: 0.0,
                end: 1.0,
                sign: sign_at(0.5),
            }],
            sign_definite: true,
        });
    }

    let mut components = Vec::with_capacity(roots.len() + 1);
    for w in roots.windows(2) {
        components.push(Component {
            start: w[0],
            end: w[1],
            sign: sign_at(0.5 * (w[0] + w[1])),
        });
    }
    let first = roots[0];
    let last = *roots.last().unwrap();
    let head = (first > 0.0).then(|| sign_at(0.5 * first));
    let tail = (last < 1.0).then(|| sign_at(0.5 * (last + 1.0)));
    match (head, tail) {
        (Some(a), Some(b)) if a == b => components.insert(
            0,
            Component {
                start: last - 1.0,
                end: first,
                sign: a,
            },
        ),
        (head, tail) => {
            if let Some(sign) = head {
                components.insert(0, Component { start: 0.0, end: first, sign });
            }
            if let Some(sign) = tail {
                components.push(Component { start: last, end: 1.0, sign });
            }
        }
    }
    Ok(SegmentDecomposition {
        x,
        roots,
        components,
        sign_definite: false,
    })
}

/// The integrated factor data at one `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineIntegrals {
    /// `int |F|^{1/2} dl` per component, in component order.
    pub values: Vec<f64>,
    /// `(phi_hat_k, lambda_hat_k)`, applied with `k = 1` first.
    pub pairs: Vec<(f64, f64)>,
    /// Sum of the quadrature error estimates.
    pub error_estimate: f64,
}

/// `int |F|^{1/2} dl` over each component, `dl = sqrt(1 + omega^2) ds`.
///
/// Each piece `[a, b]` is mapped by `s = a + (b - a)(1 - cos pi t)/2`, which
/// turns the square-root endpoint behaviour into a smooth integrand before
/// the double-exponential rule is applied.
///
/// Factors are paired as `R(phi_k) Z(lambda_k)`: each positive component
/// provides a stretch and the negative component following it the rotation
/// applied after it. A negative component before the first positive one is
/// paired with a zero stretch.
pub fn line_integrals(decomp: &SegmentDecomposition, potential: &TorusPotential, omega: f64, tol: f64) -> Result<LineIntegrals> {
    let arc = (1.0 + omega * omega).sqrt();
    let mut values = Vec::with_capacity(decomp.count());
    let mut error_estimate = 0.0;
    for c in &decomp.components {
        let mut total = 0.0;
        for (a, b) in c.pieces() {
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let f = |t: f64| {
                let (st, ct) = (PI * t).sin_cos();
                let s = a + half * (1.0 - ct);
                potential.along(omega, decomp.x, s).0.abs().sqrt() * half * PI * st
            };
            let out = quadrature::double_exponential::integrate(f, 0.0, 1.0, tol);
            if !out.integral.is_finite() || !(out.error_estimate <= 1e3 * tol.max(1e-15)) {
                return Err(Error::Quadrature(format!(
                    "component [{a:.6}, {b:.6}] at x = {:.6}: estimate {:.3e}",
                    decomp.x, out.error_estimate
                )));
            }
            total += out.integral;
            error_estimate += out.error_estimate * arc;
        }
        values.push(total * arc);
    }

    let mut pairs = Vec::new();
    let comps = &decomp.components;
    let mut i = 0;
    while i < comps.len() {
        if comps[i].sign > 0 {
            let lambda = values[i];
            let phi = if comps.get(i + 1).is_some_and(|c| c.sign < 0) {
                i += 1;
                values[i]
            } else {
                0.0
            };
            pairs.push((phi, lambda));
        } else {
            pairs.push((values[i], 0.0));
        }
        i += 1;
    }
    Ok(LineIntegrals {
        values,
        pairs,
        error_estimate,
    })
}
