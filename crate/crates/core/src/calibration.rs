//! Numerical certification of the excess-risk transforms.
//!
//! For a conditional distribution `p` and a score vector `u`, the pointwise
//! inequality checked here is
//!
//! ```text
//! p^T ψ(u) - min_{c ∈ C} p^T ψ(c)  ≥  c(τ) · (p^T ℓ_{pred(u)} - min_t p^T ℓ_t)
//! ```
//!
//! where `C` is the finite candidate set of reference minimizers for the
//! surrogate (`{e_y} ∪ {0}` for CS, `{2e_y - 1} ∪ {-1}` for OVA and
//! `{-B(y)} ∪ {0}` for BEP) and `c(τ)` is `2 min(τ, 1-τ)` (CS/BEP) or
//! `2 (1 - |τ|)` (OVA). The α-generalized surrogates are checked against
//! the abstain(α) loss with the same candidates.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{check_len, domain, Result};
use crate::loss::{bayes_conditional_risk, bayes_predict, AbstainLoss, Prediction, SimplexVector};
use crate::surrogate::{SurrogateKind, SurrogateSpec};

/// Slack below which a bound check counts as failed.
pub const SLACK_TOL: f64 = -1e-9;

/// The five cases of the appendix proofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ProofCase {
    /// Some class is Bayes-optimal and is predicted.
    Case1a,
    /// Some class is Bayes-optimal but the predictor abstains.
    Case1b,
    /// Some class is Bayes-optimal but another class is predicted.
    Case1c,
    /// Abstaining is Bayes-optimal and the predictor abstains.
    Case2a,
    /// Abstaining is Bayes-optimal but a class is predicted.
    Case2b,
}

impl ProofCase {
    pub const ALL: [ProofCase; 5] = [
        ProofCase::Case1a,
        ProofCase::Case1b,
        ProofCase::Case1c,
        ProofCase::Case2a,
        ProofCase::Case2b,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProofCase::Case1a => "1a",
            ProofCase::Case1b => "1b",
            ProofCase::Case1c => "1c",
            ProofCase::Case2a => "2a",
            ProofCase::Case2b => "2b",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn classify(p: &SimplexVector, alpha: f64, pred: Prediction) -> Self {
        match (bayes_predict(p, alpha), pred) {
            (Prediction::Class(y), Prediction::Class(t)) if y == t => ProofCase::Case1a,
            (Prediction::Class(_), Prediction::Reject) => ProofCase::Case1b,
            (Prediction::Class(_), Prediction::Class(_)) => ProofCase::Case1c,
            (Prediction::Reject, Prediction::Reject) => ProofCase::Case2a,
            (Prediction::Reject, Prediction::Class(_)) => ProofCase::Case2b,
        }
    }
}

/// `Σ_y p_y ψ^α(y, u)`.
pub fn conditional_surrogate_risk(spec: &SurrogateSpec, p: &SimplexVector, u: &[f64]) -> Result<f64> {
    check_len(spec.n, p.len())?;
    check_len(spec.output_dim(), u.len())?;
    Ok(p.as_slice()
        .iter()
        .enumerate()
        .map(|(y, &py)| py * spec.psi_alpha_unchecked(y, u))
        .sum())
}

/// Reference minimizers of the conditional surrogate risk: one per class
/// followed by the abstention candidate.
pub fn candidate_set(spec: &SurrogateSpec) -> Vec<Vec<f64>> {
    let n = spec.n;
    let mut out: Vec<Vec<f64>> = match spec.kind {
        SurrogateKind::Cs => (0..n)
            .map(|y| (0..n).map(|j| if j == y { 1.0 } else { 0.0 }).collect())
            .collect(),
        SurrogateKind::Ova => (0..n)
            .map(|y| (0..n).map(|j| if j == y { 1.0 } else { -1.0 }).collect())
            .collect(),
        SurrogateKind::Bep => {
            let code = spec.code_map().expect("BEP spec carries a code map");
            (0..n)
                .map(|y| code.code(y).iter().map(|b| -b).collect())
                .collect()
        }
    };
    out.push(match spec.kind {
        SurrogateKind::Ova => vec![-1.0; n],
        _ => vec![0.0; spec.output_dim()],
    });
    out
}

/// Minimum conditional surrogate risk over the candidate set.
pub fn candidate_optimum(spec: &SurrogateSpec, p: &SimplexVector) -> Result<f64> {
    let mut best = f64::INFINITY;
    for c in candidate_set(spec) {
        best = best.min(conditional_surrogate_risk(spec, p, &c)?);
    }
    Ok(best)
}

/// Closed form of [`candidate_optimum`]:
/// `min(2α, 2(1 - max p))` for CS/BEP and `min(4α, 4(1 - max p))` for OVA.
pub fn candidate_optimum_closed_form(kind: SurrogateKind, p: &SimplexVector, alpha: f64) -> f64 {
    let scale = match kind {
        SurrogateKind::Ova => 4.0,
        _ => 2.0,
    };
    scale * alpha.min(1.0 - p.max().1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBound {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub case: ProofCase,
}

/// Clips every coordinate to `[-1, 1]`.
pub fn clip_unit(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v.clamp(-1.0, 1.0)).collect()
}

/// Evaluates both sides of the pointwise excess-risk inequality at `(p, u)`
/// using the spec's surrogate, abstain cost and threshold. OVA scores are
/// clipped to `[-1, 1]` first.
pub fn check_pointwise_bound(spec: &SurrogateSpec, p: &SimplexVector, u: &[f64]) -> Result<PointwiseBound> {
    if !spec.kind.tau_is_calibrated(spec.tau) {
        return domain(format!(
            "threshold {} outside the calibrated interval for {}",
            spec.tau, spec.kind
        ));
    }
    check_len(spec.output_dim(), u.len())?;
    check_len(spec.n, p.len())?;
    let clipped;
    let u = if spec.kind == SurrogateKind::Ova {
        clipped = clip_unit(u);
        &clipped[..]
    } else {
        u
    };
    Ok(pointwise_unchecked(spec, p, u))
}

fn pointwise_unchecked(spec: &SurrogateSpec, p: &SimplexVector, u: &[f64]) -> PointwiseBound {
    let loss = AbstainLoss::new(spec.n, spec.alpha).expect("spec alpha within [0, 1/2]");
    let lhs = conditional_surrogate_risk(spec, p, u).expect("dimensions checked")
        - candidate_optimum(spec, p).expect("dimensions checked");
    let pred = spec.predict(u);
    let regret = p.dot(&loss.column(pred)) - bayes_conditional_risk(p, spec.alpha);
    let rhs = spec.kind.bound_constant(spec.tau) * regret;
    PointwiseBound {
        lhs,
        rhs,
        slack: lhs - rhs,
        case: ProofCase::classify(p, spec.alpha, pred),
    }
}

/// Uniform draw from the probability simplex.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SimplexVector {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    SimplexVector::from_weights(w)
}

/// Mixture over the simplex that puts substantial mass near vertices and
/// on two-class edges, so both "some class dominates" and "abstain is
/// optimal" regimes are well covered for small α.
fn sample_p_mixture<R: Rng + ?Sized>(rng: &mut R, n: usize, alpha: f64) -> SimplexVector {
    match rng.random_range(0..3) {
        0 => sample_simplex(rng, n),
        1 => {
            let k = rng.random_range(0..n);
            let spread = (2.0 * alpha.max(0.05)).min(1.0);
            let s = rng.random_range(0.0..spread);
            let q = sample_simplex(rng, n);
            let w = q
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, &qi)| s * qi + if i == k { 1.0 - s } else { 0.0 })
                .collect();
            SimplexVector::from_weights(w)
        }
        _ => {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let t: f64 = rng.random();
            let mut w = vec![0.0; n];
            w[a] = t;
            w[b] += 1.0 - t;
            SimplexVector::from_weights(w)
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Score sampler mixing isotropic Gaussians, perturbed candidates and
/// points straddling the rejection boundary of a chosen class.
fn sample_u_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &SurrogateSpec,
    p: &SimplexVector,
    candidates: &[Vec<f64>],
) -> Vec<f64> {
    let k = spec.output_dim();
    let n = spec.n;
    let target = if rng.random_bool(0.5) {
        p.max().0
    } else {
        rng.random_range(0..n)
    };
    match rng.random_range(0..3) {
        0 => {
            let s = [0.3, 1.0, 3.0][rng.random_range(0..3)];
            (0..k).map(|_| s * normal(rng)).collect()
        }
        1 => {
            let c = if rng.random_bool(0.5) {
                &candidates[target]
            } else {
                &candidates[n]
            };
            let s = [0.05, 0.3][rng.random_range(0..2)];
            c.iter().map(|v| v + s * normal(rng)).collect()
        }
        _ => {
            let tau = spec.tau;
            let delta = 0.15 * normal(rng);
            match spec.kind {
                SurrogateKind::Cs => {
                    let mut u: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
                    let top = u
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != target)
                        .map(|(_, &v)| v)
                        .fold(f64::NEG_INFINITY, f64::max);
                    u[target] = top + tau + delta;
                    u
                }
                SurrogateKind::Ova => {
                    let top = tau + delta;
                    (0..k)
                        .map(|j| {
                            if j == target {
                                top
                            } else {
                                rng.random_range(-1.2..top.max(-1.0) + 1e-9)
                            }
                        })
                        .collect()
                }
                SurrogateKind::Bep => {
                    let b = spec.code_map().expect("BEP code").code(target);
                    let mut u: Vec<f64> = b
                        .iter()
                        .map(|bj| -bj * (tau + (0.5 * normal(rng)).abs()))
                        .collect();
                    let j0 = rng.random_range(0..k);
                    u[j0] = -b[j0] * (tau + delta);
                    u
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: SurrogateKind,
    pub n: usize,
    pub tau: f64,
    pub alpha: f64,
    pub samples: usize,
    pub min_slack: f64,
    /// `(p, u)` attaining `min_slack` (with OVA scores already clipped).
    pub witness: (Vec<f64>, Vec<f64>),
    /// Hits per proof case in the order 1a, 1b, 1c, 2a, 2b.
    pub case_hits: [u64; 5],
    /// Samples whose score beat every candidate (negative left side).
    pub candidates_beaten: u64,
    pub pass: bool,
}

impl BoundReport {
    pub fn hits(&self, case: ProofCase) -> u64 {
        self.case_hits[case.index()]
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kind: SurrogateKind,
    pub n: usize,
    pub taus: Vec<f64>,
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
}

struct Partial {
    min_slack: f64,
    witness: (Vec<f64>, Vec<f64>),
    hits: [u64; 5],
    beaten: u64,
}

const CHUNK: usize = 4096;

fn run_chunk(spec: &SurrogateSpec, seed: u64, count: usize) -> Partial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = candidate_set(spec);
    let mut part = Partial {
        min_slack: f64::INFINITY,
        witness: (Vec::new(), Vec::new()),
        hits: [0; 5],
        beaten: 0,
    };
    for _ in 0..count {
        let p = sample_p_mixture(&mut rng, spec.n, spec.alpha);
        let mut u = sample_u_mixture(&mut rng, spec, &p, &candidates);
        if spec.kind == SurrogateKind::Ova {
            u = clip_unit(&u);
        }
        let b = pointwise_unchecked(spec, &p, &u);
        part.hits[b.case.index()] += 1;
        if b.lhs < -1e-12 {
            part.beaten += 1;
        }
        if b.slack < part.min_slack {
            part.min_slack = b.slack;
            part.witness = (p.as_slice().to_vec(), u);
        }
    }
    part
}

/// Samples `(p, u)` pairs for every threshold in the config and reports the
/// smallest slack of the pointwise inequality. Deterministic for a given
/// seed regardless of thread count.
pub fn sweep_bound(cfg: &SweepConfig) -> Result<Vec<BoundReport>> {
    if cfg.samples == 0 {
        return domain("sweep needs at least one sample");
    }
    let mut reports = Vec::with_capacity(cfg.taus.len());
    for (ti, &tau) in cfg.taus.iter().enumerate() {
        let spec = SurrogateSpec::new(cfg.kind, cfg.n, cfg.alpha, tau)?;
        if !cfg.kind.tau_is_calibrated(tau) {
            return domain(format!("threshold {tau} outside the calibrated interval for {}", cfg.kind));
        }
        let chunks: Vec<(u64, usize)> = (0..cfg.samples.div_ceil(CHUNK))
            .map(|c| {
                let seed = cfg
                    .seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add(((ti as u64) << 32) | c as u64);
                (seed, CHUNK.min(cfg.samples - c * CHUNK))
            })
            .collect();
        let parts: Vec<Partial> = crate::par::map(&chunks, |&(seed, count)| run_chunk(&spec, seed, count));
        let mut min_slack = f64::INFINITY;
        let mut witness = (Vec::new(), Vec::new());
        let mut hits = [0u64; 5];
        let mut beaten = 0;
        for part in parts {
            for (h, x) in hits.iter_mut().zip(part.hits) {
                *h += x;
            }
            beaten += part.beaten;
            if part.min_slack < min_slack {
                min_slack = part.min_slack;
                witness = part.witness;
            }
        }
        reports.push(BoundReport {
            kind: cfg.kind,
            n: cfg.n,
            tau,
            alpha: cfg.alpha,
            samples: cfg.samples,
            min_slack,
            witness,
            case_hits: hits,
            candidates_beaten: beaten,
            pass: min_slack >= SLACK_TOL,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub kind: SurrogateKind,
    pub n: usize,
    pub trials: usize,
    /// Largest absolute deviation over all equality identities.
    pub worst_equality_dev: f64,
    /// Smallest slack over all inequality identities.
    pub worst_inequality_slack: f64,
    pub pass: bool,
}

fn random_scores<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    match rng.random_range(0..3) {
        0 => (0..k).map(|_| 2.0 * normal(rng)).collect(),
        // small integers produce exact ties and zeros
        1 => (0..k).map(|_| rng.random_range(-2i32..=2) as f64).collect(),
        _ => (0..k).map(|_| 0.2 * normal(rng)).collect(),
    }
}

/// Checks the per-surrogate identities used by the proofs on random
/// `(p, u, y)` triples, at `α = 1/2`.
pub fn lemma_identities_check(kind: SurrogateKind, n: usize, trials: usize, seed: u64) -> Result<LemmaReport> {
    if trials == 0 {
        return domain("lemma check needs at least one trial");
    }
    let spec = SurrogateSpec::new(kind, n, 0.5, 0.5)?;
    let k = spec.output_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eq_dev: f64 = 0.0;
    let mut ineq: f64 = f64::INFINITY;
    let risk = |p: &SimplexVector, u: &[f64]| -> f64 {
        p.as_slice()
            .iter()
            .enumerate()
            .map(|(y, &py)| py * spec.psi(y, u).expect("dimensions checked"))
            .sum()
    };
    let psi = |y: usize, u: &[f64]| spec.psi(y, u).expect("dimensions checked");
    let candidates = candidate_set(&spec);
    for _ in 0..trials {
        let p = sample_p_mixture(&mut rng, n, 0.5);
        let y = rng.random_range(0..n);
        let u = random_scores(&mut rng, k);
        let py = p.as_slice()[y];
        let (class_scale, abstain_value) = match kind {
            SurrogateKind::Ova => (4.0, 2.0),
            _ => (2.0, 1.0),
        };
        eq_dev = eq_dev
            .max((risk(&p, &candidates[y]) - class_scale * (1.0 - py)).abs())
            .max((risk(&p, &candidates[n]) - abstain_value).abs());
        match kind {
            SurrogateKind::Cs => {
                let mut sorted = u.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                let (u1, u2) = (sorted[0], sorted[1]);
                for (j, &uj) in u.iter().enumerate() {
                    let bound = if uj == u1 { u2 - u1 + 1.0 } else { u1 - u2 + 1.0 };
                    ineq = ineq.min(psi(j, &u) - bound);
                }
            }
            SurrogateKind::Ova => {
                let total: f64 = u.iter().sum();
                for j in 0..n {
                    ineq = ineq.min(psi(j, &u) - (total - 2.0 * u[j] + n as f64));
                }
            }
            SurrogateKind::Bep => {
                let code = spec.code_map().expect("BEP code");
                let min_abs = u.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
                let decoded = code.decode_negated(&u);
                for j in 0..n {
                    let bound = if Some(j) == decoded { 1.0 - min_abs } else { 1.0 + min_abs };
                    ineq = ineq.min(psi(j, &u) - bound);
                }
            }
        }
    }
    Ok(LemmaReport {
        kind,
        n,
        trials,
        worst_equality_dev: eq_dev,
        worst_inequality_slack: ineq,
        pass: eq_dev <= 1e-12 && ineq >= -1e-12,
    })
}

/// One grid point of the simplex partition; `region` is a 1-based target
/// (4 = reject).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimplexCell {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub region: usize,
}

/// Bayes decision over a regular grid on the 3-class simplex with
/// `resolution` steps per edge.
pub fn emit_simplex_partition(alpha: f64, resolution: usize) -> Result<Vec<SimplexCell>> {
    if resolution < 10 {
        return domain(format!("resolution must be at least 10, got {resolution}"));
    }
    AbstainLoss::new(3, alpha)?;
    let r = resolution as f64;
    let mut out = Vec::with_capacity((resolution + 1) * (resolution + 2) / 2);
    for i in 0..=resolution {
        for j in 0..=(resolution - i) {
            let k = resolution - i - j;
            let p = SimplexVector::from_weights(vec![i as f64, j as f64, k as f64]);
            out.push(SimplexCell {
                p1: i as f64 / r,
                p2: j as f64 / r,
                p3: k as f64 / r,
                region: bayes_predict(&p, alpha).target(3),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreCell {
    pub u1: f64,
    pub u2: f64,
    pub region: usize,
}

/// Predictor regions over a `resolution × resolution` grid on
/// `[-range, range]^2`. BEP uses `n = 4` (two code bits); CS and OVA use
/// `n = 2`. Regions are 1-based targets.
pub fn emit_score_partition(kind: SurrogateKind, tau: f64, range: f64, resolution: usize) -> Result<Vec<ScoreCell>> {
    if resolution < 2 {
        return domain("score grid needs at least two points per axis");
    }
    if !(range > 0.0) {
        return domain("grid range must be positive");
    }
    let n = match kind {
        SurrogateKind::Bep => 4,
        _ => 2,
    };
    let spec = SurrogateSpec::new(kind, n, 0.5, tau)?;
    let step = 2.0 * range / (resolution - 1) as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for a in 0..resolution {
        for b in 0..resolution {
            let u = [-range + a as f64 * step, -range + b as f64 * step];
            out.push(ScoreCell {
                u1: u[0],
                u2: u[1],
                region: spec.predict(&u).target(n),
            });
        }
    }
    Ok(out)
}

pub fn write_simplex_csv<W: Write>(mut w: W, cells: &[SimplexCell]) -> std::io::Result<()> {
    writeln!(w, "p1,p2,p3,region")?;
    for c in cells {
        writeln!(w, "{},{},{},{}", c.p1, c.p2, c.p3, c.region)?;
    }
    Ok(())
}

pub fn write_score_csv<W: Write>(mut w: W, cells: &[ScoreCell]) -> std::io::Result<()> {
    writeln!(w, "u1,u2,region")?;
    for c in cells {
        writeln!(w, "{},{},{}", c.u1, c.u2, c.region)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(p: &[f64]) -> SimplexVector {
        SimplexVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn cs_lemma_example() {
        let spec = SurrogateSpec::new(SurrogateKind::Cs, 3, 0.5, 0.5).unwrap();
        let r = conditional_surrogate_risk(&spec, &sv(&[0.2, 0.5, 0.3]), &[0.0, 1.0, 0.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ova_abstain_candidate_risk_is_two() {
        let spec = SurrogateSpec::new(SurrogateKind::Ova, 3, 0.5, 0.0).unwrap();
        let r = conditional_surrogate_risk(&spec, &sv(&[0.1, 0.7, 0.2]), &[-1.0; 3]).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bep_lemma_example() {
        let spec = SurrogateSpec::new(SurrogateKind::Bep, 4, 0.5, 0.5).unwrap();
        let u = [0.3, -0.8];
        // sign(-u) = (-1, +1) decodes to the second class
        assert_eq!(spec.code_map().unwrap().decode_negated(&u), Some(1));
        assert!(spec.psi(2, &u).unwrap() >= 1.3 - 1e-15);
        assert!(spec.psi(0, &u).unwrap() >= 1.3 - 1e-15);
    }

    #[test]
    fn candidate_optimum_examples() {
        let cs = SurrogateSpec::new(SurrogateKind::Cs, 3, 0.5, 0.5).unwrap();
        assert!((candidate_optimum(&cs, &sv(&[0.8, 0.1, 0.1])).unwrap() - 0.4).abs() < 1e-15);
        let third = SimplexVector::uniform(3);
        assert!((candidate_optimum(&cs, &third).unwrap() - 1.0).abs() < 1e-15);
        let ova = SurrogateSpec::new(SurrogateKind::Ova, 3, 0.5, 0.0).unwrap();
        assert_eq!(candidate_optimum(&ova, &SimplexVector::vertex(3, 0)).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_examples() {
        let cs = SurrogateSpec::new(SurrogateKind::Cs, 3, 0.5, 0.5).unwrap();
        let b = check_pointwise_bound(&cs, &sv(&[0.8, 0.1, 0.1]), &[0.0; 3]).unwrap();
        assert!((b.lhs - 0.6).abs() < 1e-12);
        assert!((b.rhs - 0.3).abs() < 1e-12);
        assert!((b.slack - 0.3).abs() < 1e-12);
        assert_eq!(b.case, ProofCase::Case1b);

        let bep = SurrogateSpec::new(SurrogateKind::Bep, 4, 0.5, 0.5).unwrap();
        let b = check_pointwise_bound(&bep, &SimplexVector::vertex(4, 0), &[1.0, 1.0]).unwrap();
        assert_eq!((b.lhs, b.rhs, b.slack), (0.0, 0.0, 0.0));

        let ova = SurrogateSpec::new(SurrogateKind::Ova, 3, 0.5, 0.0).unwrap();
        let b = check_pointwise_bound(&ova, &sv(&[0.5, 0.5, 0.0]), &[1.0, -1.0, -1.0]).unwrap();
        assert!(b.lhs.abs() < 1e-15 && b.rhs.abs() < 1e-15 && b.slack.abs() < 1e-15);
    }

    #[test]
    fn pointwise_rejects_uncalibrated_tau() {
        let cs = SurrogateSpec::new(SurrogateKind::Cs, 3, 0.5, 0.0).unwrap();
        assert!(check_pointwise_bound(&cs, &SimplexVector::uniform(3), &[0.0; 3]).is_err());
        let ova = SurrogateSpec::new(SurrogateKind::Ova, 3, 0.5, -1.0).unwrap();
        assert!(check_pointwise_bound(&ova, &SimplexVector::uniform(3), &[0.0; 3]).is_err());
    }

    #[test]
    fn candidate_optimum_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in SurrogateKind::ALL {
            for &n in &[2usize, 3, 4, 8] {
                for &alpha in &[0.1, 0.25, 0.5] {
                    let spec = SurrogateSpec::new(kind, n, alpha, 0.5).unwrap();
                    for _ in 0..500 {
                        let p = sample_p_mixture(&mut rng, n, alpha);
                        let a = candidate_optimum(&spec, &p).unwrap();
                        let b = candidate_optimum_closed_form(kind, &p, alpha);
                        assert!((a - b).abs() < 1e-12, "{kind} n={n} {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn candidate_scores_have_nonnegative_lhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in SurrogateKind::ALL {
            let spec = SurrogateSpec::new(kind, 4, 0.5, 0.5).unwrap();
            for _ in 0..1000 {
                let p = sample_simplex(&mut rng, 4);
                let opt = candidate_optimum(&spec, &p).unwrap();
                for c in candidate_set(&spec) {
                    let b = check_pointwise_bound(&spec, &p, &c).unwrap();
                    assert!(b.lhs >= -1e-15);
                    let risk = conditional_surrogate_risk(&spec, &p, &c).unwrap();
                    assert_eq!(b.lhs.abs() < 1e-12, (risk - opt).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn small_sweeps_pass() {
        for (kind, taus) in [
            (SurrogateKind::Cs, vec![0.5]),
            (SurrogateKind::Bep, vec![0.25, 0.5, 0.75]),
            (SurrogateKind::Ova, vec![-0.5]),
        ] {
            let n = if kind == SurrogateKind::Bep { 8 } else { 4 };
            let reports = sweep_bound(&SweepConfig {
                kind,
                n,
                taus,
                alpha: 0.5,
                samples: 20_000,
                seed: 1,
            })
            .unwrap();
            for r in reports {
                assert!(r.pass, "{r:?}");
                assert_eq!(r.case_hits.iter().sum::<u64>(), 20_000);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig {
            kind: SurrogateKind::Cs,
            n: 3,
            taus: vec![0.3],
            alpha: 0.25,
            samples: 10_000,
            seed: 42,
        };
        assert_eq!(sweep_bound(&cfg).unwrap(), sweep_bound(&cfg).unwrap());
    }

    #[test]
    fn lemma_checks_pass() {
        for kind in SurrogateKind::ALL {
            for n in [2, 3, 4, 8] {
                let r = lemma_identities_check(kind, n, 2000, 9).unwrap();
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn simplex_partition_examples() {
        let find = |cells: &[SimplexCell], p: [f64; 3]| {
            cells
                .iter()
                .find(|c| (c.p1 - p[0]).abs() < 1e-9 && (c.p2 - p[1]).abs() < 1e-9)
                .unwrap()
                .region
        };
        let third = emit_simplex_partition(1.0 / 3.0, 20).unwrap();
        assert_eq!(find(&third, [0.9, 0.05, 0.05]), 1);
        let half = emit_simplex_partition(0.5, 30).unwrap();
        assert_eq!(find(&half, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]), 4);
        let high = emit_simplex_partition(0.9, 50).unwrap();
        assert!(high.iter().all(|c| c.region <= 3));
        assert_eq!(high.len(), 51 * 52 / 2);
        assert!(emit_simplex_partition(0.5, 5).is_err());
    }

    #[test]
    fn score_partition_examples() {
        let cells = emit_score_partition(SurrogateKind::Bep, 0.5, 1.0, 3).unwrap();
        let at = |u1: f64, u2: f64| cells.iter().find(|c| c.u1 == u1 && c.u2 == u2).unwrap().region;
        assert_eq!(at(1.0, 1.0), 1);
        assert_eq!(at(0.0, 0.0), 5);
        assert_eq!(at(-1.0, -1.0), 4);
    }

    #[test]
    fn reject_area_grows_with_tau() {
        for kind in SurrogateKind::ALL {
            let reject = match kind {
                SurrogateKind::Bep => 5,
                _ => 3,
            };
            let mut last = 0usize;
            for i in 0..=10 {
                let tau = if kind == SurrogateKind::Ova { -1.0 + 0.2 * i as f64 } else { 0.1 * i as f64 };
                let cells = emit_score_partition(kind, tau, 2.0, 41).unwrap();
                let count = cells.iter().filter(|c| c.region == reject).count();
                assert!(count >= last);
                last = count;
            }
        }
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_simplex_csv(&mut buf, &emit_simplex_partition(0.5, 10).unwrap()).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("p1,p2,p3,region\n"));
        let mut buf = Vec::new();
        write_score_csv(&mut buf, &emit_score_partition(SurrogateKind::Cs, 0.5, 1.0, 5).unwrap()).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("u1,u2,region\n"));
    }
}
