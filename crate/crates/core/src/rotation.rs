//! Continued-fraction arithmetic for the rotation number.
//!
//! A [`RotationNumber`] is stored canonically as its partial quotients
//! `[0; a_1, a_2, ...]`; the real value is derived from the deepest
//! convergent. Circle distances `dist(m omega, 0)` are computed exactly from
//! the rational convergent with an explicit error guard, so they stay
//! meaningful even when they are far below `f64::EPSILON`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{DoubleDouble, Real};

/// Natural logarithm of an arbitrarily large integer.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Convergents `p_n / q_n`, `n = 0..=N`, with `p_0/q_0 = 0/1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergents {
    p: Vec<BigUint>,
    q: Vec<BigUint>,
}

impl Convergents {
    pub fn from_quotients(quotients: &[BigUint]) -> Self {
        let mut p = Vec::with_capacity(quotients.len() + 1);
        let mut q = Vec::with_capacity(quotients.len() + 1);
        // p_{-1} = 1, q_{-1} = 0
        let (mut p_prev, mut q_prev) = (BigUint::one(), BigUint::zero());
        p.push(BigUint::zero());
        q.push(BigUint::one());
        for a in quotients {
            let pn = a * p.last().unwrap() + &p_prev;
            let qn = a * q.last().unwrap() + &q_prev;
            p_prev = p.last().unwrap().clone();
            q_prev = q.last().unwrap().clone();
            p.push(pn);
            q.push(qn);
        }
        Convergents { p, q }
    }

    /// Index of the deepest convergent.
    pub fn depth(&self) -> usize {
        self.q.len() - 1
    }

    pub fn p(&self, n: usize) -> &BigUint {
        &self.p[n]
    }

    pub fn q(&self, n: usize) -> &BigUint {
        &self.q[n]
    }

    pub fn q_f64(&self, n: usize) -> f64 {
        self.q[n].to_f64().unwrap_or(f64::INFINITY)
    }

    /// `q_n` as a machine integer, if it fits.
    pub fn q_u64(&self, n: usize) -> Option<u64> {
        self.q[n].to_u64()
    }

    pub fn ln_q(&self, n: usize) -> f64 {
        ln_big(&self.q[n])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BigUint, &BigUint)> {
        self.p.iter().zip(self.q.iter())
    }
}

/// Rotation number `omega = [0; a_1, a_2, ..., a_N]`.
#[derive(Clone, Debug)]
pub struct RotationNumber {
    quotients: Vec<BigUint>,
    conv: Convergents,
    precision_bits: u32,
    rational: bool,
    value: DoubleDouble,
}

impl PartialEq for RotationNumber {
    fn eq(&self, other: &Self) -> bool {
        self.quotients == other.quotients && self.rational == other.rational
    }
}

impl RotationNumber {
    fn build(quotients: Vec<BigUint>, precision_bits: u32, rational: bool) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::InvalidInput("at least one partial quotient is required".into()));
        }
        if quotients.iter().any(|a| a.is_zero()) {
            return Err(Error::InvalidInput("partial quotients must be positive".into()));
        }
        let conv = Convergents::from_quotients(&quotients);
        let n = conv.depth();
        let value = DoubleDouble::from_ratio(conv.p(n), conv.q(n));
        Ok(RotationNumber {
            quotients,
            conv,
            precision_bits,
            rational,
            value,
        })
    }

    pub fn from_quotients(quotients: &[u64]) -> Result<Self> {
        Self::from_big_quotients(quotients.iter().map(|&a| BigUint::from(a)).collect())
    }

    pub fn from_big_quotients(quotients: Vec<BigUint>) -> Result<Self> {
        let conv = Convergents::from_quotients(&quotients);
        let bits = default_bits(&conv);
        Self::build(quotients, bits, false)
    }

    /// Marks the quotient list as a complete (rational) expansion.
    pub fn rational_from_quotients(quotients: &[u64]) -> Result<Self> {
        let q: Vec<BigUint> = quotients.iter().map(|&a| BigUint::from(a)).collect();
        Self::build(q, u32::MAX, true)
    }

    pub fn quotients(&self) -> &[BigUint] {
        &self.quotients
    }

    pub fn convergents(&self) -> &Convergents {
        &self.conv
    }

    pub fn depth(&self) -> usize {
        self.quotients.len()
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    /// True when the expansion terminated: the number is exactly `p_N / q_N`.
    pub fn is_rational(&self) -> bool {
        self.rational
    }

    pub fn value(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn value_dd(&self) -> DoubleDouble {
        self.value
    }

    /// Upper bound on `|omega - p_N/q_N|`, zero for rational numbers.
    pub fn truncation_error(&self) -> f64 {
        if self.rational {
            return 0.0;
        }
        let n = self.conv.depth();
        let next = self.conv.q(n) + if n > 0 { self.conv.q(n - 1).clone() } else { BigUint::zero() };
        (-(self.conv.ln_q(n) + ln_big(&next))).exp()
    }

    /// Comma-separated partial quotients, e.g. `"1,1,1"`.
    pub fn to_quotient_text(&self) -> String {
        self.quotients
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a comma-separated quotient list.
    pub fn parse_quotients(text: &str) -> Result<Self> {
        let quotients = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<BigUint>()
                    .map_err(|e| Error::InvalidInput(format!("bad partial quotient {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_big_quotients(quotients)
    }

    /// `frac(m omega)` and the distance of `m omega` to the nearest integer.
    fn residue(&self, m: u64) -> Result<(f64, f64)> {
        if m == 0 {
            return Ok((0.0, 0.0));
        }
        let n = self.conv.depth();
        let q = self.conv.q(n);
        let r = (self.conv.p(n) * BigUint::from(m)) % q;
        let other = q - &r;
        let near = if r <= other { &r } else { &other };
        let frac = f64::from_ratio(&r, q);
        let dist = f64::from_ratio(near, q);
        let err = m as f64 * self.truncation_error();
        if err > 0.0 && !(err < 1e-3 * dist) {
            return Err(Error::PrecisionExhausted(format!(
                "m = {m}: truncation error {err:.3e} is not small against the distance {dist:.3e}; \
                 supply more partial quotients"
            )));
        }
        Ok((frac, dist))
    }

    /// `dist(sigma^m(x), x) = ||m omega||`, independent of `x`.
    pub fn orbit_distance(&self, m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::InvalidInput("orbit distance needs m >= 1".into()));
        }
        self.residue(m).map(|(_, d)| d)
    }

    /// `frac(m omega)` with the same error guard as [`Self::orbit_distance`].
    pub fn frac_multiple(&self, m: u64) -> Result<f64> {
        self.residue(m).map(|(f, _)| f)
    }

    /// `sigma^m(x) = x + m omega mod 1`.
    pub fn orbit_point(&self, x: f64, m: u64) -> Result<f64> {
        Ok(wrap_unit(x + self.frac_multiple(m)?))
    }

    /// Iterator over `x, x + omega, x + 2 omega, ...` (mod 1) in
    /// double-double arithmetic.
    pub fn orbit(&self, x: f64) -> Orbit {
        Orbit {
            x: DoubleDouble::from_f64(wrap_unit(x)),
            omega: self.value,
        }
    }

    /// `frac(k omega)` for `k = 0, 1, 2, ...`.
    ///
    /// Uses exact residues `k p_N mod q_N` of the deepest convergent while
    /// `q_N < 2^126`, so the only error is the truncation of the quotient
    /// list (see [`Self::position_error`]); falls back to double-double
    /// accumulation beyond that.
    pub fn multiples(&self) -> Multiples {
        let n = self.conv.depth();
        let (p, q) = (self.conv.p(n), self.conv.q(n));
        if let (Ok(p), Ok(q)) = (u64::try_from(p), u64::try_from(q)) {
            if q < 1u64 << 62 {
                return Multiples::Exact64 {
                    r: 0,
                    p: p % q,
                    q,
                    inv_q: 1.0 / q as f64,
                };
            }
        }
        match (u128::try_from(p), u128::try_from(q)) {
            (Ok(p), Ok(q)) if q < 1u128 << 126 => Multiples::Exact {
                r: 0,
                p: p % q,
                q,
                qf: q as f64,
            },
            _ => Multiples::Accumulated(self.orbit(0.0)),
        }
    }

    /// `x + m omega mod 1` for any sign of `m`, in double-double arithmetic.
    ///
    /// The position error is about `|m|` times the truncation error of the
    /// stored quotients; callers needing a hard guarantee check
    /// [`Self::position_error`] first.
    pub fn shift(&self, x: f64, m: i64) -> f64 {
        let t = DoubleDouble::from_f64(wrap_unit(x)) + self.value.mul_f64(m as f64);
        let k = t.hi().floor();
        let mut y = t - DoubleDouble::from_f64(k);
        if y.to_f64() < 0.0 {
            y += DoubleDouble::from_f64(1.0);
        }
        wrap_unit(y.to_f64())
    }

    /// Bound on the position error of `shift(x, m)`.
    pub fn position_error(&self, m: i64) -> f64 {
        let m = m.unsigned_abs() as f64;
        m * (self.truncation_error() + 2.0 * DoubleDouble::EPSILON) + f64::EPSILON
    }

    /// Smallest convergent denominator `q_n` with `1/q_{n+1} <= delta`.
    ///
    /// When `1/q_{n+1} < delta <= 1/(2 q_n)` this is the first time a
    /// `delta`-interval returns onto itself.
    pub fn first_return_finer_than(&self, delta: f64) -> Result<(BigUint, usize)> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        let depth = self.conv.depth();
        let ln_inv = -delta.ln();
        for n in 1..depth {
            if self.conv.ln_q(n + 1) >= ln_inv {
                return Ok((self.conv.q(n).clone(), n));
            }
        }
        Err(Error::DepthExhausted(format!(
            "no q_(n+1) >= 1/delta = {:.3e} among {depth} convergents",
            1.0 / delta
        )))
    }
}

impl fmt::Display for RotationNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[0; {}]", self.to_quotient_text())
    }
}

/// `2 log2 q_N`: the truncation `p_N/q_N` is within `2^-bits` of the limit.
fn default_bits(conv: &Convergents) -> u32 {
    let n = conv.depth();
    (2 * conv.q(n).bits()).saturating_sub(2).min(u32::MAX as u64) as u32
}

fn wrap_unit(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Rotation orbit with double-double accumulation.
#[derive(Clone, Debug)]
pub struct Orbit {
    x: DoubleDouble,
    omega: DoubleDouble,
}

impl Iterator for Orbit {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let out = self.x.to_f64();
        let mut next = self.x + self.omega;
        if next.to_f64() >= 1.0 {
            next -= DoubleDouble::from_f64(1.0);
        }
        self.x = next;
        Some(if out >= 1.0 { 0.0 } else { out })
    }
}

/// Iterator returned by [`RotationNumber::multiples`].
#[derive(Clone, Debug)]
pub enum Multiples {
    Exact64 { r: u64, p: u64, q: u64, inv_q: f64 },
    Exact { r: u128, p: u128, q: u128, qf: f64 },
    Accumulated(Orbit),
}

impl Iterator for Multiples {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        match self {
            Multiples::Exact64 { r, p, q, inv_q } => {
                let out = *r as f64 * *inv_q;
                *r += *p;
                if *r >= *q {
                    *r -= *q;
                }
                Some(if out >= 1.0 { 0.0 } else { out })
            }
            Multiples::Exact { r, p, q, qf } => {
                let out = *r as f64 / *qf;
                // r, p < q < 2^126, so the sum cannot overflow
                *r += *p;
                if *r >= *q {
                    *r -= *q;
                }
                Some(if out >= 1.0 { 0.0 } else { out })
            }
            Multiples::Accumulated(o) => o.next(),
        }
    }
}

/// Continued-fraction expansion of a decimal string such as
/// `"0.6180339887498948482045868343656"`.
///
/// Only quotients supported by the input's precision are returned: each
/// accepted `q_n` satisfies `q_n^2 < 2^bits` where `bits` is the binary
/// precision of the decimal. Asking for more is a precision error. An
/// expansion that terminates early is flagged rational.
pub fn cf_expand(decimal: &str, depth: usize) -> Result<RotationNumber> {
    let (num, den, bits) = parse_decimal(decimal)?;
    cf_expand_ratio(&num, &den, bits, depth)
}

/// Expansion of an `f64`; the binary value is taken at 53-bit precision.
pub fn cf_expand_f64(omega: f64, depth: usize) -> Result<RotationNumber> {
    if !omega.is_finite() {
        return Err(Error::NonFinite("omega"));
    }
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::InvalidInput(format!("omega must lie in (0, 1), got {omega}")));
    }
    // omega = m 2^-e exactly
    let scale = 2f64.powi(60);
    let m = (omega * scale).round() as u64;
    let num = BigUint::from(m);
    let den = BigUint::one() << 60u32;
    cf_expand_ratio(&num, &den, 53, depth)
}

/// Expansion of `num/den` treated as a `bits`-bit approximation.
pub fn cf_expand_ratio(num: &BigUint, den: &BigUint, bits: u32, depth: usize) -> Result<RotationNumber> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    if num.is_zero() || num >= den {
        return Err(Error::InvalidInput("omega must lie in (0, 1)".into()));
    }
    let limit_bits = bits as u64;
    let (mut a_num, mut a_den) = (den.clone(), num.clone());
    let mut quotients = Vec::with_capacity(depth);
    let (mut q_prev, mut q) = (BigUint::zero(), BigUint::one());
    let mut rational = false;
    while quotients.len() < depth {
        let a = &a_num / &a_den;
        let r = &a_num % &a_den;
        let q_next = &a * &q + &q_prev;
        if q_next.pow(2u32).bits() > limit_bits {
            return Err(Error::PrecisionExhausted(format!(
                "quotient {} needs q^2 < 2^{bits}, but q has {} bits",
                quotients.len() + 1,
                q_next.bits()
            )));
        }
        quotients.push(a);
        q_prev = std::mem::replace(&mut q, q_next);
        if r.is_zero() {
            rational = true;
            break;
        }
        a_num = std::mem::replace(&mut a_den, r);
    }
    RotationNumber::build(quotients, bits, rational)
}

/// `"0.d1d2...dk"` as `(digits, 10^k, floor(k log2 10))`.
fn parse_decimal(text: &str) -> Result<(BigUint, BigUint, u32)> {
    let t = text.trim();
    let frac = t
        .strip_prefix("0.")
        .or_else(|| t.strip_prefix('.'))
        .ok_or_else(|| Error::InvalidInput(format!("omega must be written as 0.ddd, got {t:?}")))?;
    if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::InvalidInput(format!("bad decimal {t:?}")));
    }
    let num: BigUint = frac.parse().map_err(|e| Error::InvalidInput(format!("{e}")))?;
    let den = BigUint::from(10u32).pow(frac.len() as u32);
    let bits = (frac.len() as f64 * std::f64::consts::LOG2_10).floor() as u32;
    Ok((num, den, bits))
}

/// Alias matching the naming of [`cf_expand`].
pub fn omega_from_quotients(quotients: &[u64]) -> Result<RotationNumber> {
    RotationNumber::from_quotients(quotients)
}

/// Partial sums of `sum_{n>=1} log(2 q_{n+1}) / q_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrjunoReport {
    pub partial_sums: Vec<f64>,
    /// Last partial sum, in nats.
    pub c_b: f64,
    pub depth: usize,
    /// Estimated size of the omitted tail; infinite when the last terms do
    /// not decay.
    pub tail_bound: f64,
}

impl BrjunoReport {
    /// The sum has settled to within `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        self.tail_bound.is_finite() && self.tail_bound <= tol
    }

    /// Upper estimate for the full sum.
    pub fn upper_estimate(&self) -> f64 {
        self.c_b + self.tail_bound
    }
}

/// Brjuno partial sums up to `depth` terms; needs `q_{depth+1}`.
///
/// The tail estimate uses `q_{n+2} >= 2 q_n`: pairs of terms shrink at least
/// like `2^-k` once the numerators stop outgrowing that factor, so it is
/// `t r / (1 - r)` with `t` the last pair and `r` the observed pair ratio
/// (or `1/2`, whichever is larger).
pub fn brjuno_sum(conv: &Convergents, depth: usize) -> Result<BrjunoReport> {
    if depth == 0 {
        return Err(Error::InvalidInput("Brjuno depth must be at least 1".into()));
    }
    if depth + 1 > conv.depth() {
        return Err(Error::DepthExhausted(format!(
            "Brjuno sum to {depth} terms needs q_{}, only {} convergents available",
            depth + 1,
            conv.depth()
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let terms: Vec<f64> = (1..=depth)
        .map(|n| (ln2 + conv.ln_q(n + 1)) / conv.q_f64(n))
        .collect();
    let mut partial_sums = Vec::with_capacity(depth);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    let tail_bound = if depth >= 4 {
        let last = terms[depth - 1] + terms[depth - 2];
        let prev = terms[depth - 3] + terms[depth - 4];
        let r = (last / prev).max(0.5);
        if r < 1.0 {
            last * r / (1.0 - r)
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(BrjunoReport {
        c_b: acc,
        partial_sums,
        depth,
        tail_bound,
    })
}

/// Constants of the regular-growth condition (A).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAConstants {
    pub c_omega: f64,
    pub c_eps: f64,
    pub c_delta: f64,
    pub gamma: f64,
}

impl ConditionAConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.c_omega) && ok(self.c_eps) && ok(self.c_delta) && ok(self.gamma)) {
            return Err(Error::InvalidInput(format!(
                "condition (A) constants must be positive: {self:?}"
            )));
        }
        if self.c_delta >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "C_delta must be below 1, got {}",
                self.c_delta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    /// Growth `q_{n+1} > C_omega q_n^{1+gamma}` stops before the available
    /// depth ends.
    Growth,
    /// No later subsequence element grows fast enough.
    ChainLower,
    /// The next chain element grows too fast.
    ChainUpper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub which: Inequality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAReport {
    pub constants: ConditionAConstants,
    pub c_b: f64,
    /// Indices `n_j` with `q_{n_j+1} > C_omega q_{n_j}^{1+gamma}`.
    pub subsequence: Vec<usize>,
    /// Chain elements, as convergent indices `n_{J_k}`.
    pub chain: Vec<usize>,
    pub pass: bool,
    pub violations: Vec<Violation>,
}

impl ConditionAReport {
    /// `q_{n_{J_k}}` for the chain, as `f64`.
    pub fn chain_denominators(&self, conv: &Convergents) -> Vec<f64> {
        self.chain.iter().map(|&n| conv.q_f64(n)).collect()
    }
}

fn growth_holds(conv: &Convergents, n: usize, c: &ConditionAConstants) -> bool {
    conv.ln_q(n + 1) > c.c_omega.ln() + (1.0 + c.gamma) * conv.ln_q(n)
}

/// The two sides of the chain inequality between consecutive elements with
/// denominators `q` (current) and `q'` (next): `(lower ok, upper ok)`.
fn chain_step(ln_q: f64, q: f64, ln_q_next: f64, c: &ConditionAConstants, c_b: f64) -> (bool, bool) {
    let g1 = 1.0 + c.gamma;
    let lower = (ln_q + (1.0 / c.c_delta).ln() / g1) / q;
    let middle = ln_q_next / q;
    let upper = c.c_eps - c_b / g1 * (1.0 - c.c_delta - 1.0 / q) - c.c_omega.ln() / (g1 * q);
    (lower < middle, middle < upper)
}

/// Checks condition (A) on the available convergents.
///
/// The growth subsequence is every `n >= 1` satisfying the growth
/// inequality; since it must be infinite, it is also required to reach the
/// second half of the available indices. The chain starts at the first
/// subsequence element and repeatedly takes the earliest later element that
/// clears the lower chain bound; that element must also respect the upper
/// bound.
pub fn check_condition_a(conv: &Convergents, constants: ConditionAConstants, c_b: f64) -> ConditionAReport {
    let mut report = ConditionAReport {
        constants,
        c_b,
        subsequence: Vec::new(),
        chain: Vec::new(),
        pass: false,
        violations: Vec::new(),
    };
    if constants.validate().is_err() {
        return report;
    }
    let last = conv.depth();
    report.subsequence = (1..last).filter(|&n| growth_holds(conv, n, &constants)).collect();
    let Some(&first) = report.subsequence.first() else {
        return report;
    };
    let tail_start = (last / 2).max(1);
    if report.subsequence.last().is_none_or(|&n| n < tail_start) && last > 2 {
        let after = report.subsequence.last().copied().unwrap_or(0) + 1;
        report.violations.push(Violation {
            index: after,
            which: Inequality::Growth,
        });
    }
    report.chain.push(first);
    let mut pos = 0;
    loop {
        let cur = report.chain[report.chain.len() - 1];
        let (ln_q, q) = (conv.ln_q(cur), conv.q_f64(cur));
        let rest = &report.subsequence[pos + 1..];
        if rest.is_empty() {
            break;
        }
        let found = rest
            .iter()
            .enumerate()
            .find(|(_, &n)| chain_step(ln_q, q, conv.ln_q(n), &constants, c_b).0);
        match found {
            None => {
                report.violations.push(Violation {
                    index: cur,
                    which: Inequality::ChainLower,
                });
                break;
            }
            Some((off, &n)) => {
                if !chain_step(ln_q, q, conv.ln_q(n), &constants, c_b).1 {
                    report.violations.push(Violation {
                        index: cur,
                        which: Inequality::ChainUpper,
                    });
                    break;
                }
                report.chain.push(n);
                pos += off + 1;
            }
        }
    }
    report.pass = report.violations.is_empty();
    report
}

/// Which convergent indices receive a large quotient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    EveryIndex,
    /// Every `k`-th index starting at the first free one.
    Every(usize),
    Indices(Vec<usize>),
}

impl Spacing {
    fn selects(&self, n: usize, first: usize) -> bool {
        match self {
            Spacing::EveryIndex => n >= first,
            Spacing::Every(k) => n >= first && (n - first).is_multiple_of((*k).max(1)),
            Spacing::Indices(v) => v.contains(&n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionABuild {
    pub constants: ConditionAConstants,
    pub spacing: Spacing,
    /// Number of partial quotients to produce.
    pub depth: usize,
    /// Fixed leading quotients.
    #[serde(default)]
    pub prefix: Vec<u64>,
    /// Quotient used at unselected indices.
    #[serde(default = "one")]
    pub filler: u64,
}

fn one() -> u64 {
    1
}

/// Smallest integer `a` with `a q + q_prev > C q^{1+gamma}`.
fn forcing_quotient(q: &BigUint, q_prev: &BigUint, c_omega: f64, gamma: f64) -> BigUint {
    // target = C q^gamma, evaluated in the log domain and rounded up
    let ln_target = c_omega.ln() + gamma * ln_big(q);
    let a = if ln_target < 700.0 {
        BigUint::from(ln_target.exp().ceil().max(1.0) as u128)
    } else {
        let bits = ln_target / std::f64::consts::LN_2;
        let shift = (bits - 60.0).floor();
        let mant = (bits - shift).exp2().ceil() as u64;
        BigUint::from(mant) << (shift as u64)
    };
    let mut a = a + 1u32;
    // one extra unit absorbs log-domain rounding
    while a > BigUint::one() {
        let smaller = &a - 1u32;
        let qn = &smaller * q + q_prev;
        if ln_big(&qn) > c_omega.ln() + (1.0 + gamma) * ln_big(q) + 1e-12 {
            a = smaller;
        } else {
            break;
        }
    }
    a
}

/// Constructs partial quotients that force the growth inequality at the
/// selected indices, then validates the result with [`check_condition_a`].
///
/// Fails with [`Error::ConditionA`] when the validation does not pass (for
/// example when the spacing is too sparse for the chain's upper bound).
pub fn build_condition_a_omega(spec: &ConditionABuild) -> Result<(RotationNumber, ConditionAReport)> {
    spec.constants.validate()?;
    if spec.depth == 0 || spec.prefix.len() > spec.depth {
        return Err(Error::InvalidInput(format!(
            "depth {} must be positive and cover the prefix of length {}",
            spec.depth,
            spec.prefix.len()
        )));
    }
    if spec.filler == 0 || spec.prefix.contains(&0) {
        return Err(Error::InvalidInput("quotients must be positive".into()));
    }
    let c = spec.constants;
    let mut quotients: Vec<BigUint> = spec.prefix.iter().map(|&a| BigUint::from(a)).collect();
    let first_free = spec.prefix.len().max(1);
    while quotients.len() < spec.depth {
        let n = quotients.len();
        let conv = Convergents::from_quotients(&quotients);
        let a = if n >= 1 && spec.spacing.selects(n, first_free) {
            forcing_quotient(conv.q(n), conv.q(n - 1), c.c_omega, c.gamma)
        } else {
            BigUint::from(spec.filler)
        };
        quotients.push(a);
    }
    let omega = RotationNumber::from_big_quotients(quotients)?;
    let conv = omega.convergents();
    let brjuno_depth = conv.depth().saturating_sub(1).max(1);
    let c_b = if conv.depth() >= 2 {
        brjuno_sum(conv, brjuno_depth)?.c_b
    } else {
        0.0
    };
    let report = check_condition_a(conv, c, c_b);
    if !report.pass {
        return Err(Error::ConditionA(format!(
            "constructed {} fails validation: subsequence {:?}, chain {:?}, violations {:?}",
            omega, report.subsequence, report.chain, report.violations
        )));
    }
    Ok((omega, report))
}
