use abstain_demo::{bayes_region, hinge_values, parse_kind, score_regions, simplex_regions};

#[test]
fn simplex_regions_follow_alpha() {
    let half = simplex_regions(0.5, 50).unwrap();
    assert_eq!(half.len(), 51 * 52 / 2);
    assert!(half.contains(&4));
    assert!(!simplex_regions(0.9, 50).unwrap().contains(&4));
    // the uniform point rejects whenever α < 2/3
    assert_eq!(bayes_region([1.0 / 3.0; 3], 0.5).unwrap(), 4);
    assert_eq!(bayes_region([0.8, 0.1, 0.1], 0.5).unwrap(), 1);
}

#[test]
fn score_regions_cover_every_class() {
    let bep = score_regions("bep", 0.5, 2.0, 41).unwrap();
    assert_eq!(bep.len(), 41 * 41);
    for r in 1..=5u8 {
        assert!(bep.contains(&r), "region {r}");
    }
    let cs = score_regions("cs", 0.0, 2.0, 41).unwrap();
    // τ = 0 rejects only the tied diagonal u1 = u2
    assert_eq!(cs.iter().filter(|&&r| r == 3).count(), 41);
    assert!(score_regions("svm", 0.5, 2.0, 41).is_err());
    assert!(parse_kind("ova").is_ok());
}

#[test]
fn hinge_matches_closed_form() {
    for alpha in [0.1, 0.3, 0.5] {
        let v = hinge_values(alpha, -2.0, 2.0, 401).unwrap();
        for (i, &h) in v.iter().enumerate() {
            let z = -2.0 + i as f64 * 0.01;
            let expect = if z <= -1.0 {
                0.0
            } else if z <= 0.0 {
                2.0 * alpha * (z + 1.0)
            } else {
                2.0 * (1.0 - alpha) * z + 2.0 * alpha
            };
            assert!((h - expect).abs() < 1e-12, "alpha {alpha}, z {z}: {h} vs {expect}");
        }
    }
    assert!(hinge_values(0.5, 1.0, 1.0, 10).is_err());
    assert!(hinge_values(0.7, -1.0, 1.0, 10).is_err());
}
