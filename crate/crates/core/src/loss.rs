//! The abstain(α) loss and its Bayes-optimal decision rule.
//!
//! Classes are indexed from zero throughout the crate. A prediction is
//! either one of the `n` classes or [`Prediction::Reject`]; the 1-based
//! "target" numbering `1..=n+1` (with `n+1` meaning reject) is only used at
//! I/O boundaries via [`Prediction::target`] and [`Prediction::from_target`].

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};

/// Absolute tolerance used for equality in argmin/argmax sets and for
/// simplex normalization.
pub const EQ_TOL: f64 = 1e-12;

/// A decision: one of the classes, or abstention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Prediction {
    Class(usize),
    Reject,
}

impl Prediction {
    /// 1-based target index: classes map to `1..=n`, rejection to `n + 1`.
    pub fn target(self, n: usize) -> usize {
        match self {
            Prediction::Class(c) => c + 1,
            Prediction::Reject => n + 1,
        }
    }

    pub fn from_target(t: usize, n: usize) -> Result<Self> {
        match t {
            0 => domain(format!("target {t} outside 1..={}", n + 1)),
            t if t <= n => Ok(Prediction::Class(t - 1)),
            t if t == n + 1 => Ok(Prediction::Reject),
            _ => domain(format!("target {t} outside 1..={}", n + 1)),
        }
    }

    pub fn is_reject(self) -> bool {
        matches!(self, Prediction::Reject)
    }
}

/// The `n × (n+1)` abstain(α) loss matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbstainLoss {
    n: usize,
    alpha: f64,
}

impl AbstainLoss {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return domain(format!("class count must be at least 2, got {n}"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return domain(format!("abstain cost must lie in [0, 1], got {alpha}"));
        }
        Ok(Self { n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Loss of predicting `t` when the truth is class `y`.
    pub fn value(&self, y: usize, t: Prediction) -> Result<f64> {
        if y >= self.n {
            return domain(format!("class {y} outside 0..{}", self.n));
        }
        match t {
            Prediction::Reject => Ok(self.alpha),
            Prediction::Class(c) if c >= self.n => {
                domain(format!("predicted class {c} outside 0..{}", self.n))
            }
            Prediction::Class(c) if c == y => Ok(0.0),
            Prediction::Class(_) => Ok(1.0),
        }
    }

    /// Column `ℓ_t` of the loss matrix.
    pub fn column(&self, t: Prediction) -> Vec<f64> {
        (0..self.n)
            .map(|y| match t {
                Prediction::Reject => self.alpha,
                Prediction::Class(c) if c == y => 0.0,
                Prediction::Class(_) => 1.0,
            })
            .collect()
    }

    /// All `n + 1` actions in target order.
    pub fn actions(&self) -> impl Iterator<Item = Prediction> {
        (0..self.n)
            .map(Prediction::Class)
            .chain(std::iter::once(Prediction::Reject))
    }
}

/// A conditional class distribution `p(y | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return domain("empty probability vector");
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return domain(format!("probabilities must be finite and nonnegative: {p:?}"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > EQ_TOL {
            return domain(format!("probabilities sum to {sum}, not 1"));
        }
        Ok(Self(p))
    }

    /// Point mass on class `y`.
    pub fn vertex(n: usize, y: usize) -> Self {
        let mut p = vec![0.0; n];
        p[y] = 1.0;
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Builds a simplex vector from nonnegative weights by normalizing.
    pub(crate) fn from_weights(w: Vec<f64>) -> Self {
        let s: f64 = w.iter().sum();
        Self(w.into_iter().map(|v| v / s).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest probability and its (smallest) index.
    pub fn max(&self) -> (usize, f64) {
        argmax(&self.0)
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Index and value of the maximum entry; ties go to the smallest index.
pub(crate) fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    (best, v[best])
}

/// Chow's rule: predict the most likely class when its probability is at
/// least `1 - alpha`, otherwise abstain.
pub fn bayes_predict(p: &SimplexVector, alpha: f64) -> Prediction {
    let (y, py) = p.max();
    if py >= 1.0 - alpha {
        Prediction::Class(y)
    } else {
        Prediction::Reject
    }
}

/// Every action minimizing the conditional risk `p^T ℓ_t`, found by
/// enumerating all `n + 1` columns.
pub fn bayes_predict_bruteforce(p: &SimplexVector, loss: &AbstainLoss) -> Result<Vec<Prediction>> {
    check_len(loss.n(), p.len())?;
    let risks: Vec<(Prediction, f64)> = loss
        .actions()
        .map(|t| (t, p.dot(&loss.column(t))))
        .collect();
    let best = risks.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(risks
        .into_iter()
        .filter(|&(_, r)| r - best <= EQ_TOL)
        .map(|(t, _)| t)
        .collect())
}

/// Conditional risk `p^T ℓ_t`.
pub fn conditional_risk(p: &SimplexVector, loss: &AbstainLoss, t: Prediction) -> Result<f64> {
    check_len(loss.n(), p.len())?;
    if let Prediction::Class(c) = t {
        if c >= loss.n() {
            return domain(format!("predicted class {c} outside 0..{}", loss.n()));
        }
    }
    Ok(p.dot(&loss.column(t)))
}

/// Bayes-optimal conditional risk `min_t p^T ℓ_t = min(1 - max p, α)`.
pub fn bayes_conditional_risk(p: &SimplexVector, alpha: f64) -> f64 {
    (1.0 - p.max().1).min(alpha)
}

/// Mean abstain loss split into its misclassification and rejection parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub risk: f64,
    /// Misclassified accepted points, as a fraction of all points.
    pub error_rate: f64,
    pub reject_rate: f64,
}

pub fn empirical_risk(
    labels: &[usize],
    predictions: &[Prediction],
    loss: &AbstainLoss,
) -> Result<RiskReport> {
    check_len(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return domain("empirical risk of an empty sample");
    }
    let mut total = 0.0;
    let mut errors = 0usize;
    let mut rejects = 0usize;
    for (&y, &t) in labels.iter().zip(predictions) {
        total += loss.value(y, t)?;
        match t {
            Prediction::Reject => rejects += 1,
            Prediction::Class(c) if c != y => errors += 1,
            Prediction::Class(_) => {}
        }
    }
    let m = labels.len() as f64;
    Ok(RiskReport {
        risk: total / m,
        error_rate: errors as f64 / m,
        reject_rate: rejects as f64 / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Prediction::{Class, Reject};

    fn sv(p: &[f64]) -> SimplexVector {
        SimplexVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn loss_values() {
        let l = AbstainLoss::new(3, 0.5).unwrap();
        assert_eq!(l.value(1, Class(1)).unwrap(), 0.0);
        assert_eq!(l.value(0, Class(2)).unwrap(), 1.0);
        let l = AbstainLoss::new(3, 0.3).unwrap();
        assert_eq!(l.value(0, Reject).unwrap(), 0.3);
        assert!(l.value(3, Class(0)).is_err());
        assert!(l.value(0, Class(3)).is_err());
        assert!(AbstainLoss::new(1, 0.5).is_err());
        assert!(AbstainLoss::new(3, 1.5).is_err());
    }

    #[test]
    fn loss_columns() {
        let l = AbstainLoss::new(4, 0.2).unwrap();
        for t in l.actions() {
            let col = l.column(t);
            match t {
                Class(_) => assert_eq!(col.iter().filter(|&&v| v == 0.0).count(), 1),
                Reject => assert!(col.iter().all(|&v| v == 0.2)),
            }
        }
    }

    #[test]
    fn target_numbering() {
        assert_eq!(Prediction::from_target(4, 3).unwrap(), Reject);
        assert_eq!(Prediction::from_target(1, 3).unwrap(), Class(0));
        assert!(Prediction::from_target(0, 3).is_err());
        assert!(Prediction::from_target(5, 3).is_err());
        assert_eq!(Class(2).target(3), 3);
        assert_eq!(Reject.target(3), 4);
    }

    #[test]
    fn chow_rule_examples() {
        assert_eq!(bayes_predict(&sv(&[0.6, 0.3, 0.1]), 0.5), Class(0));
        assert_eq!(bayes_predict(&sv(&[0.4, 0.35, 0.25]), 0.5), Reject);
        let third = 1.0 / 3.0;
        assert_eq!(
            bayes_predict(&SimplexVector::from_weights(vec![third; 3]), 0.7),
            Class(0)
        );
    }

    #[test]
    fn bruteforce_examples() {
        let l = AbstainLoss::new(3, 0.5).unwrap();
        assert_eq!(
            bayes_predict_bruteforce(&sv(&[0.6, 0.3, 0.1]), &l).unwrap(),
            vec![Class(0)]
        );
        assert_eq!(
            bayes_predict_bruteforce(&sv(&[0.5, 0.5, 0.0]), &l).unwrap(),
            vec![Class(0), Class(1), Reject]
        );
        assert_eq!(
            bayes_predict_bruteforce(&sv(&[1.0, 0.0, 0.0]), &l).unwrap(),
            vec![Class(0)]
        );
    }

    #[test]
    fn conditional_risk_examples() {
        let l = AbstainLoss::new(3, 0.5).unwrap();
        let p = sv(&[0.6, 0.3, 0.1]);
        assert!((conditional_risk(&p, &l, Reject).unwrap() - 0.5).abs() < 1e-15);
        assert!((conditional_risk(&p, &l, Class(0)).unwrap() - 0.4).abs() < 1e-15);
        assert!((conditional_risk(&p, &l, Class(1)).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn empirical_risk_examples() {
        let l3 = AbstainLoss::new(3, 0.5).unwrap();
        let r = empirical_risk(&[0, 1], &[Class(0), Class(2)], &l3).unwrap();
        assert_eq!((r.risk, r.error_rate, r.reject_rate), (0.5, 0.5, 0.0));

        let l2 = AbstainLoss::new(2, 0.5).unwrap();
        let r = empirical_risk(&[0, 1], &[Reject, Reject], &l2).unwrap();
        assert_eq!((r.risk, r.error_rate, r.reject_rate), (0.5, 0.0, 1.0));

        let r = empirical_risk(&[0, 0, 1, 1], &[Class(0), Reject, Class(1), Reject], &l2).unwrap();
        assert_eq!((r.risk, r.error_rate, r.reject_rate), (0.25, 0.0, 0.5));

        assert!(empirical_risk(&[], &[], &l2).is_err());
        assert!(empirical_risk(&[0], &[], &l2).is_err());
    }

    #[test]
    fn simplex_validation() {
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexVector::new(vec![]).is_err());
    }

    /// Δ_3 grid at step 0.02 with a fixed set of abstain costs.
    fn grid_points() -> Vec<SimplexVector> {
        let mut out = Vec::new();
        for i in 0..=50 {
            for j in 0..=(50 - i) {
                let k = 50 - i - j;
                out.push(SimplexVector::from_weights(vec![i as f64, j as f64, k as f64]));
            }
        }
        out
    }

    const ALPHAS: [f64; 6] = [0.0, 0.2, 1.0 / 3.0, 0.5, 0.6, 0.9];

    #[test]
    fn chow_rule_agrees_with_enumeration_on_grid() {
        for &alpha in &ALPHAS {
            let l = AbstainLoss::new(3, alpha).unwrap();
            for p in grid_points() {
                let set = bayes_predict_bruteforce(&p, &l).unwrap();
                assert!(set.contains(&bayes_predict(&p, alpha)), "{p:?} {alpha}");
                let r = conditional_risk(&p, &l, bayes_predict(&p, alpha)).unwrap();
                assert!((r - bayes_conditional_risk(&p, alpha)).abs() <= EQ_TOL);
            }
        }
    }

    #[test]
    fn never_abstains_above_critical_cost() {
        // (n - 1) / n = 2/3 for n = 3
        for p in grid_points() {
            assert_ne!(bayes_predict(&p, 0.9), Reject);
        }
    }

    #[test]
    fn risk_decomposes_into_errors_and_rejects() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(2..6);
            let alpha = rng.random::<f64>();
            let l = AbstainLoss::new(n, alpha).unwrap();
            let m = rng.random_range(1..40);
            let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
            let preds: Vec<Prediction> = (0..m)
                .map(|_| Prediction::from_target(rng.random_range(1..=n + 1), n).unwrap())
                .collect();
            let r = empirical_risk(&labels, &preds, &l).unwrap();
            assert!((r.risk - (r.error_rate + alpha * r.reject_rate)).abs() < 1e-12);
        }
    }
}
