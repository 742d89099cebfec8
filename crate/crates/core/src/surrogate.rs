//! Convex surrogates for the abstain loss and their thresholded predictors.
//!
//! Three families are provided: Crammer-Singer (`n` scores), one-vs-all
//! hinge (`n` scores) and binary encoded predictions (BEP, `⌈log2 n⌉`
//! scores). Each has an α-generalized form for abstain costs in `[0, 1/2]`
//! that coincides with the base surrogate at `α = 1/2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Error, Result};
use crate::loss::{argmax, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    /// Crammer-Singer multiclass hinge.
    Cs,
    /// One-vs-all binary hinge.
    Ova,
    /// Binary encoded predictions.
    Bep,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 3] = [SurrogateKind::Cs, SurrogateKind::Ova, SurrogateKind::Bep];

    /// Whether `tau` lies in the open interval for which the excess-risk
    /// bound holds: `(0, 1)` for CS/BEP and `(-1, 1)` for OVA.
    pub fn tau_is_calibrated(self, tau: f64) -> bool {
        match self {
            SurrogateKind::Cs | SurrogateKind::Bep => tau > 0.0 && tau < 1.0,
            SurrogateKind::Ova => tau > -1.0 && tau < 1.0,
        }
    }

    /// Constant `c(τ)` in `lhs ≥ c(τ)·regret`.
    pub fn bound_constant(self, tau: f64) -> f64 {
        match self {
            SurrogateKind::Cs | SurrogateKind::Bep => 2.0 * tau.min(1.0 - tau),
            SurrogateKind::Ova => 2.0 * (1.0 - tau.abs()),
        }
    }

    /// Threshold used when no rejection is wanted (validation phase).
    pub fn never_reject_tau(self) -> f64 {
        match self {
            SurrogateKind::Cs | SurrogateKind::Bep => 0.0,
            SurrogateKind::Ova => -1.0,
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateKind::Cs => "cs",
            SurrogateKind::Ova => "ova",
            SurrogateKind::Bep => "bep",
        })
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cs" => Ok(SurrogateKind::Cs),
            "ova" => Ok(SurrogateKind::Ova),
            "bep" => Ok(SurrogateKind::Bep),
            _ => domain(format!("unknown surrogate '{s}' (expected cs, ova or bep)")),
        }
    }
}

/// Bijection between classes and sign vectors in `{-1, +1}^d`.
///
/// When `n` is not a power of two the unused codes act as dummy classes
/// that never occur; decoding one of them yields `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodeTable", into = "CodeTable")]
pub struct CodeMap {
    n: usize,
    d: usize,
    codes: Vec<Vec<f64>>,
    inverse: Vec<Option<usize>>,
}

#[derive(Serialize, Deserialize)]
struct CodeTable {
    n: usize,
    d: usize,
    codes: Vec<Vec<f64>>,
}

impl TryFrom<CodeTable> for CodeMap {
    type Error = Error;

    fn try_from(t: CodeTable) -> Result<Self> {
        let map = CodeMap::from_codes(t.codes)?;
        if map.n != t.n || map.d != t.d {
            return domain("code table header disagrees with its codes");
        }
        Ok(map)
    }
}

impl From<CodeMap> for CodeTable {
    fn from(m: CodeMap) -> Self {
        CodeTable {
            n: m.n,
            d: m.d,
            codes: m.codes,
        }
    }
}

/// Code length `⌈log2 n⌉`.
pub fn code_length(n: usize) -> usize {
    (usize::BITS - (n.max(2) - 1).leading_zeros()) as usize
}

fn code_index(signs: impl Iterator<Item = f64>) -> usize {
    signs.fold(0, |acc, s| (acc << 1) | usize::from(s > 0.0))
}

impl CodeMap {
    /// Default code: class `y` gets the `d`-bit binary form of `y`
    /// (most significant bit first) with `-1` in place of `0`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("class count must be at least 2, got {n}"));
        }
        let d = code_length(n);
        let codes = (0..n)
            .map(|y| {
                (0..d)
                    .map(|j| if (y >> (d - 1 - j)) & 1 == 1 { 1.0 } else { -1.0 })
                    .collect()
            })
            .collect();
        Self::from_codes(codes)
    }

    /// Custom code table; must be injective with entries in `{-1, +1}` and
    /// length `⌈log2 n⌉`.
    pub fn from_codes(codes: Vec<Vec<f64>>) -> Result<Self> {
        let n = codes.len();
        if n < 2 {
            return domain(format!("class count must be at least 2, got {n}"));
        }
        let d = code_length(n);
        let mut inverse = vec![None; 1 << d];
        for (y, c) in codes.iter().enumerate() {
            check_len(d, c.len())?;
            if c.iter().any(|&s| s != 1.0 && s != -1.0) {
                return domain(format!("code of class {y} has entries outside {{-1, +1}}"));
            }
            let k = code_index(c.iter().copied());
            if let Some(other) = inverse[k] {
                return domain(format!("classes {other} and {y} share a code"));
            }
            inverse[k] = Some(y);
        }
        Ok(Self {
            n,
            d,
            codes,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn code(&self, y: usize) -> &[f64] {
        &self.codes[y]
    }

    /// Class whose code equals `sign(-u)`, with `sign(0) = 1`.
    pub fn decode_negated(&self, u: &[f64]) -> Option<usize> {
        self.inverse[code_index(u.iter().map(|&v| if -v >= 0.0 { 1.0 } else { -1.0 }))]
    }
}

/// `γ(a) = max(a, -1)`.
fn clip_below(a: f64) -> f64 {
    a.max(-1.0)
}

fn hinge(a: f64) -> f64 {
    a.max(0.0)
}

fn check_class(y: usize, n: usize) -> Result<()> {
    if y < n {
        Ok(())
    } else {
        domain(format!("class {y} outside 0..{n}"))
    }
}

/// Largest entry of `u` other than index `y`, and its index.
fn max_excluding(u: &[f64], y: usize) -> (usize, f64) {
    let mut best = usize::MAX;
    let mut val = f64::NEG_INFINITY;
    for (j, &v) in u.iter().enumerate() {
        if j != y && v > val {
            best = j;
            val = v;
        }
    }
    (best, val)
}

/// `(max_{j≠y} u_j - u_y + 1)_+`
pub fn psi_cs(y: usize, u: &[f64]) -> Result<f64> {
    if u.len() < 2 {
        return domain("Crammer-Singer scores need at least two entries");
    }
    check_class(y, u.len())?;
    Ok(hinge(max_excluding(u, y).1 - u[y] + 1.0))
}

/// `Σ_i 1(y=i)(1-u_i)_+ + 1(y≠i)(1+u_i)_+`
pub fn psi_ova(y: usize, u: &[f64]) -> Result<f64> {
    check_class(y, u.len())?;
    Ok(u
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == y { hinge(1.0 - v) } else { hinge(1.0 + v) })
        .sum())
}

/// `(max_j B_j(y) u_j + 1)_+`
pub fn psi_bep(y: usize, u: &[f64], code: &CodeMap) -> Result<f64> {
    check_len(code.d(), u.len())?;
    check_class(y, code.n())?;
    Ok(hinge(bep_margin(code.code(y), u) + 1.0))
}

fn bep_margin(b: &[f64], u: &[f64]) -> f64 {
    b.iter()
        .zip(u)
        .map(|(b, u)| b * u)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Surrogate family, abstain cost, threshold and (for BEP) code map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub n: usize,
    pub alpha: f64,
    pub tau: f64,
    pub code: Option<CodeMap>,
}

impl SurrogateSpec {
    /// Builds a spec with the default code map for BEP.
    ///
    /// `tau` is only required to be finite; use
    /// [`SurrogateKind::tau_is_calibrated`] to check whether the
    /// excess-risk guarantee applies.
    pub fn new(kind: SurrogateKind, n: usize, alpha: f64, tau: f64) -> Result<Self> {
        let code = match kind {
            SurrogateKind::Bep => Some(CodeMap::new(n)?),
            _ => None,
        };
        Self::with_code(kind, n, alpha, tau, code)
    }

    pub fn with_code(
        kind: SurrogateKind,
        n: usize,
        alpha: f64,
        tau: f64,
        code: Option<CodeMap>,
    ) -> Result<Self> {
        if n < 2 {
            return domain(format!("class count must be at least 2, got {n}"));
        }
        if !(0.0..=0.5).contains(&alpha) {
            return domain(format!("surrogate abstain cost must lie in [0, 1/2], got {alpha}"));
        }
        if !tau.is_finite() {
            return domain("threshold must be finite");
        }
        match (kind, &code) {
            (SurrogateKind::Bep, Some(c)) if c.n() != n => {
                return domain(format!("code map covers {} classes, spec has {n}", c.n()))
            }
            (SurrogateKind::Bep, None) => return domain("BEP surrogate requires a code map"),
            _ => {}
        }
        Ok(Self {
            kind,
            n,
            alpha,
            tau,
            code,
        })
    }

    /// Length of the score vector: `n` for CS/OVA, `d` for BEP.
    pub fn output_dim(&self) -> usize {
        match &self.code {
            Some(c) if self.kind == SurrogateKind::Bep => c.d(),
            _ => self.n,
        }
    }

    pub fn code_map(&self) -> Option<&CodeMap> {
        self.code.as_ref()
    }

    fn bep_code(&self) -> &CodeMap {
        self.code.as_ref().expect("BEP spec carries a code map")
    }

    /// Base surrogate (the `α = 1/2` member of the family).
    pub fn psi(&self, y: usize, u: &[f64]) -> Result<f64> {
        check_len(self.output_dim(), u.len())?;
        match self.kind {
            SurrogateKind::Cs => psi_cs(y, u),
            SurrogateKind::Ova => psi_ova(y, u),
            SurrogateKind::Bep => psi_bep(y, u, self.bep_code()),
        }
    }

    /// α-generalized surrogate with `γ(a) = max(a, -1)` clipping.
    pub fn psi_alpha(&self, y: usize, u: &[f64]) -> Result<f64> {
        check_len(self.output_dim(), u.len())?;
        check_class(y, self.n)?;
        Ok(self.psi_alpha_unchecked(y, u))
    }

    pub(crate) fn psi_alpha_unchecked(&self, y: usize, u: &[f64]) -> f64 {
        let a = self.alpha;
        match self.kind {
            SurrogateKind::Cs => {
                let m = u
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != y)
                    .map(|(_, &v)| clip_below(v - u[y]))
                    .fold(f64::NEG_INFINITY, f64::max);
                2.0 * (a * m).max((1.0 - a) * m) + 2.0 * a
            }
            SurrogateKind::Ova => {
                let s: f64 = u
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if i == y {
                            a * hinge(1.0 - v)
                        } else {
                            (1.0 - a) * hinge(1.0 + v)
                        }
                    })
                    .sum();
                2.0 * s
            }
            SurrogateKind::Bep => {
                let b = self.bep_code().code(y);
                let m = b
                    .iter()
                    .zip(u)
                    .map(|(b, u)| clip_below(b * u))
                    .fold(f64::NEG_INFINITY, f64::max);
                2.0 * (a * m).max((1.0 - a) * m) + 2.0 * a
            }
        }
    }

    /// Value and one subgradient (written into `grad`) of the
    /// α-generalized surrogate at `u`.
    pub(crate) fn psi_alpha_subgradient(&self, y: usize, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let a = self.alpha;
        let slope = |m: f64| if m >= 0.0 { 2.0 * (1.0 - a) } else { 2.0 * a };
        match self.kind {
            SurrogateKind::Cs => {
                let (j, top) = max_excluding(u, y);
                let m = top - u[y];
                if m >= -1.0 {
                    let c = slope(m);
                    grad[j] += c;
                    grad[y] -= c;
                }
            }
            SurrogateKind::Ova => {
                for (i, &v) in u.iter().enumerate() {
                    if i == y {
                        if v < 1.0 {
                            grad[i] = -2.0 * a;
                        }
                    } else if v > -1.0 {
                        grad[i] = 2.0 * (1.0 - a);
                    }
                }
            }
            SurrogateKind::Bep => {
                let b = self.bep_code().code(y);
                let mut j = 0;
                for k in 1..b.len() {
                    if b[k] * u[k] > b[j] * u[j] {
                        j = k;
                    }
                }
                let m = b[j] * u[j];
                if m >= -1.0 {
                    grad[j] = slope(m) * b[j];
                }
            }
        }
        self.psi_alpha_unchecked(y, u)
    }

    /// Per-point confidence statistic compared against τ: top-two gap
    /// (CS), largest score (OVA) or smallest absolute coordinate (BEP).
    pub fn margin(&self, u: &[f64]) -> f64 {
        match self.kind {
            SurrogateKind::Cs => {
                let (a, b) = top_two(u);
                a - b
            }
            SurrogateKind::Ova => argmax(u).1,
            SurrogateKind::Bep => u.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn predict(&self, u: &[f64]) -> Prediction {
        self.predict_with_tau(u, self.tau)
    }

    pub fn predict_with_tau(&self, u: &[f64], tau: f64) -> Prediction {
        match self.kind {
            SurrogateKind::Cs => pred_cs(u, tau),
            SurrogateKind::Ova => pred_ova(u, tau),
            SurrogateKind::Bep => pred_bep(u, tau, self.bep_code()),
        }
    }
}

/// Largest and second-largest entries (equal on ties).
fn top_two(u: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in u {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

/// Argmax when the top-two gap exceeds `tau`, otherwise reject.
pub fn pred_cs(u: &[f64], tau: f64) -> Prediction {
    let (first, second) = top_two(u);
    if first - second > tau {
        Prediction::Class(argmax(u).0)
    } else {
        Prediction::Reject
    }
}

/// Argmax (smallest index on ties) when the largest score exceeds `tau`.
pub fn pred_ova(u: &[f64], tau: f64) -> Prediction {
    let (y, top) = argmax(u);
    if top > tau {
        Prediction::Class(y)
    } else {
        Prediction::Reject
    }
}

/// Reject when some coordinate is within `tau` of zero, otherwise decode
/// `sign(-u)`. Dummy codes decode to rejection.
pub fn pred_bep(u: &[f64], tau: f64, code: &CodeMap) -> Prediction {
    if u.iter().any(|v| v.abs() <= tau) {
        return Prediction::Reject;
    }
    code.decode_negated(u)
        .map_or(Prediction::Reject, Prediction::Class)
}

/// Every region `U^τ_k` whose defining predicate holds at `u`, evaluated
/// from the explicit set descriptions rather than through the predictor.
pub fn region_memberships(u: &[f64], tau: f64, spec: &SurrogateSpec) -> Vec<Prediction> {
    let mut out = Vec::new();
    match spec.kind {
        SurrogateKind::Cs => {
            for y in 0..u.len() {
                if u.iter().enumerate().all(|(j, &v)| j == y || u[y] > v + tau) {
                    out.push(Prediction::Class(y));
                }
            }
            let (first, second) = top_two(u);
            if first <= second + tau {
                out.push(Prediction::Reject);
            }
        }
        SurrogateKind::Ova => {
            for y in 0..u.len() {
                let is_argmax = u[..y].iter().all(|&v| u[y] > v) && u[y + 1..].iter().all(|&v| u[y] >= v);
                if u[y] > tau && is_argmax {
                    out.push(Prediction::Class(y));
                }
            }
            if u.iter().all(|&v| v <= tau) {
                out.push(Prediction::Reject);
            }
        }
        SurrogateKind::Bep => {
            let code = spec.bep_code();
            for y in 0..code.n() {
                if bep_margin(code.code(y), u) < -tau {
                    out.push(Prediction::Class(y));
                }
            }
            let dummy = out.is_empty()
                && u.iter().all(|v| v.abs() > tau)
                && code.decode_negated(u).is_none();
            if u.iter().any(|v| v.abs() <= tau) || dummy {
                out.push(Prediction::Reject);
            }
        }
    }
    out
}

/// The region of the score space containing `u`.
pub fn region_of(u: &[f64], tau: f64, spec: &SurrogateSpec) -> Prediction {
    region_memberships(u, tau, spec)
        .first()
        .copied()
        .unwrap_or(Prediction::Reject)
}
