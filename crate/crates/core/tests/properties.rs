use abstain::calibration::{candidate_set, check_pointwise_bound, clip_unit};
use abstain::data::{calibrate_tau_from_margins, parse_sparse, synthetic_posterior, write_sparse, Dataset};
use abstain::kernel::{GramMatrix, KernelSpec};
use abstain::loss::{
    bayes_conditional_risk, bayes_predict, conditional_risk, empirical_risk, AbstainLoss, Prediction, SimplexVector,
};
use abstain::solver::project_capped_simplex;
use abstain::surrogate::{region_memberships, region_of, SurrogateKind, SurrogateSpec};
use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = SurrogateKind> {
    prop_oneof![Just(SurrogateKind::Cs), Just(SurrogateKind::Ova), Just(SurrogateKind::Bep)]
}

fn simplex(n: usize) -> impl Strategy<Value = SimplexVector> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("nonzero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| SimplexVector::new(w.iter().map(|v| v / s).collect()).ok()).flatten()
    })
}

/// `(spec, y, u, v)` with scores of the spec's output dimension.
fn spec_and_scores() -> impl Strategy<Value = (SurrogateSpec, usize, Vec<f64>, Vec<f64>)> {
    (kind(), 2usize..=9, 0.0f64..=0.5).prop_flat_map(|(k, n, alpha)| {
        let spec = SurrogateSpec::new(k, n, alpha, 0.5).unwrap();
        let dim = spec.output_dim();
        (
            Just(spec),
            0..n,
            prop::collection::vec(-3.0f64..3.0, dim),
            prop::collection::vec(-3.0f64..3.0, dim),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn surrogates_are_convex((spec, y, u, v) in spec_and_scores()) {
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = spec.psi_alpha(y, &mid).unwrap();
        let rhs = 0.5 * (spec.psi_alpha(y, &u).unwrap() + spec.psi_alpha(y, &v).unwrap());
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn exactly_one_region_holds((spec, _y, u, _v) in spec_and_scores(), t in 0.0f64..1.0) {
        // thresholds from the kind's calibrated range
        let tau = if spec.kind == SurrogateKind::Ova { 2.0 * t - 1.0 } else { t };
        let regions = region_memberships(&u, tau, &spec);
        prop_assert_eq!(regions.len(), 1);
        prop_assert_eq!(regions[0], spec.predict_with_tau(&u, tau));
        prop_assert_eq!(region_of(&u, tau, &spec), regions[0]);
    }

    #[test]
    fn ova_clipping_never_increases_loss(
        n in 2usize..=8,
        y in 0usize..8,
        u in prop::collection::vec(-4.0f64..4.0, 8),
    ) {
        let spec = SurrogateSpec::new(SurrogateKind::Ova, n, 0.5, 0.0).unwrap();
        let y = y % n;
        let u = &u[..n];
        prop_assert!(spec.psi(y, &clip_unit(u)).unwrap() <= spec.psi(y, u).unwrap());
    }

    #[test]
    fn bayes_rule_attains_bayes_risk(p in simplex(5), alpha in 0.0f64..1.0) {
        let loss = AbstainLoss::new(5, alpha).unwrap();
        let r = conditional_risk(&p, &loss, bayes_predict(&p, alpha)).unwrap();
        assert_abs_diff_eq!(r, bayes_conditional_risk(&p, alpha), epsilon = 1e-12);
        for t in loss.actions() {
            prop_assert!(conditional_risk(&p, &loss, t).unwrap() >= r - 1e-12);
        }
    }

    #[test]
    fn empirical_risk_decomposes(
        pairs in prop::collection::vec((0usize..4, 0usize..5), 1..200),
        alpha in 0.0f64..1.0,
    ) {
        let loss = AbstainLoss::new(4, alpha).unwrap();
        let labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<Prediction> = pairs.iter().map(|p| Prediction::from_target(p.1 + 1, 4).unwrap()).collect();
        let r = empirical_risk(&labels, &preds, &loss).unwrap();
        assert_abs_diff_eq!(r.risk, r.error_rate + alpha * r.reject_rate, epsilon = 1e-12);
    }

    #[test]
    fn projection_beats_feasible_points(
        t in prop::collection::vec(-2.0f64..2.0, 1..=6),
        seeds in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 7), 100),
    ) {
        let a = project_capped_simplex(&t);
        prop_assert!(a.iter().all(|&v| v >= 0.0));
        prop_assert!(a.iter().sum::<f64>() <= 1.0 + 1e-12);
        let dist = |z: &[f64]| z.iter().zip(&t).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        for w in seeds {
            // w[d] acts as a slack coordinate so that Σz ranges over [0, 1]
            let w = &w[..=t.len()];
            let s: f64 = w.iter().sum::<f64>().max(1e-12);
            let z: Vec<f64> = w[..t.len()].iter().map(|v| v / s).collect();
            prop_assert!(dist(&a) <= dist(&z) + 1e-12);
        }
    }

    #[test]
    fn candidate_scores_have_nonnegative_regret(k in kind(), n in 2usize..=8, alpha in 0.0f64..=0.5, p in simplex(8)) {
        let w: Vec<f64> = p.as_slice()[..n].iter().map(|v| v + 1e-3).collect();
        let s: f64 = w.iter().sum();
        let p = SimplexVector::new(w.iter().map(|v| v / s).collect()).unwrap();
        let tau = if k == SurrogateKind::Ova { 0.0 } else { 0.5 };
        let spec = SurrogateSpec::new(k, n, alpha, tau).unwrap();
        for c in candidate_set(&spec) {
            let b = check_pointwise_bound(&spec, &p, &c).unwrap();
            prop_assert!(b.lhs >= -1e-12);
            prop_assert!(b.slack >= -1e-9);
        }
    }

    #[test]
    fn calibrated_tau_is_monotone(
        k in kind(),
        margins in prop::collection::vec(-2.0f64..2.0, 1..300),
        a in 0.0f64..0.99,
        b in 0.0f64..0.99,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t_lo = calibrate_tau_from_margins(k, &margins, lo).unwrap();
        let t_hi = calibrate_tau_from_margins(k, &margins, hi).unwrap();
        prop_assert!(t_lo <= t_hi);
        let rejected = margins.iter().filter(|&&r| r <= t_hi).count();
        prop_assert!(rejected <= (hi * margins.len() as f64 + 1e-9).floor() as usize);
    }

    #[test]
    fn sparse_round_trip(
        rows in prop::collection::vec(
            (0usize..5, prop::collection::vec(prop_oneof![Just(0.0), -1e3f64..1e3, -1e-8f64..1e-8], 6)),
            1..40,
        ),
    ) {
        let features: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let names: Vec<String> = ["-3", "0", "2", "7", "11"].iter().map(|s| s.to_string()).collect();
        let data = Dataset::with_label_names(features, labels, names).unwrap();
        let mut buf = Vec::new();
        write_sparse(&mut buf, &data).unwrap();
        let mut back = parse_sparse(buf.as_slice()).unwrap();
        back.pad_to(6).unwrap();
        let back = back.align_labels(&data.label_names).unwrap();
        prop_assert_eq!(&back.features, &data.features);
        prop_assert_eq!(&back.labels, &data.labels);
        let mut again = Vec::new();
        write_sparse(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gram_matrices_are_psd(
        pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 1..=50),
        gamma in 0.05f64..5.0,
        linear in any::<bool>(),
    ) {
        let spec = if linear { KernelSpec::linear() } else { KernelSpec::gaussian(gamma).unwrap() };
        let g = GramMatrix::new(&spec, &pts).unwrap();
        let m = g.len();
        let k = DMatrix::from_fn(m, m, |i, j| g.get(i, j));
        prop_assert!((&k - k.transpose()).abs().max() <= 1e-12);
        let min_eig = k.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= -1e-8, "smallest eigenvalue {}", min_eig);
    }

    #[test]
    fn posterior_is_a_distribution(
        protos in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 1..=8),
        x in prop::collection::vec(-6.0f64..6.0, 2),
        sigma in 0.05f64..2.0,
    ) {
        let p = synthetic_posterior(&protos, sigma, &x).unwrap();
        prop_assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        assert_abs_diff_eq!(p.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // direct normalization oracle
        let w: Vec<f64> = protos
            .iter()
            .map(|v| (-((v[0] - x[0]).powi(2) + (v[1] - x[1]).powi(2)) / (2.0 * sigma * sigma)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        if z > 1e-200 {
            for (a, b) in p.as_slice().iter().zip(&w) {
                assert_abs_diff_eq!(*a, b / z, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn zero_threshold_never_abstains_on_generic_scores() {
    let spec = SurrogateSpec::new(SurrogateKind::Cs, 5, 0.5, 0.0).unwrap();
    let bep = SurrogateSpec::new(SurrogateKind::Bep, 8, 0.5, 0.0).unwrap();
    for i in 0..1000 {
        let u: Vec<f64> = (0..5).map(|j| ((i * 7 + j * 13 + 1) as f64 * 0.37).sin()).collect();
        assert!(!spec.predict(&u).is_reject());
        assert!(!bep.predict(&u[..3]).is_reject());
    }
}
