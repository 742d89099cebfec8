/// Euclidean projection onto the capped simplex `{a : a ≥ 0, Σ a ≤ 1}`.
///
/// Negative entries are clamped first; if the clamped vector already sums to
/// at most one it is the projection. Otherwise the sum constraint is active
/// and the result is the projection onto the probability simplex, found by
/// sorting and subtracting the uniform threshold that makes the positive
/// parts sum to one (O(d log d)).
pub fn project_capped_simplex(t: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = t.iter().map(|v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    let mut sorted = clamped;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    t.iter().map(|v| (v - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let a = project_capped_simplex(&[0.7, 0.6]);
        assert!((a[0] - 0.55).abs() < 1e-15 && (a[1] - 0.45).abs() < 1e-15);
        assert_eq!(project_capped_simplex(&[-0.2, 0.3]), vec![0.0, 0.3]);
        assert_eq!(project_capped_simplex(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(project_capped_simplex(&[3.0]), vec![1.0]);
        assert_eq!(project_capped_simplex(&[-3.0, -1.0, -0.5]), vec![0.0; 3]);
    }

    #[test]
    fn dense_grid_agrees_in_two_dimensions() {
        // brute-force minimum over a fine grid of the feasible triangle
        let targets = [[0.9, 0.4], [-0.3, 1.4], [0.2, 0.1], [1.5, 1.5], [0.5, -2.0]];
        let steps = 400;
        for t in targets {
            let a = project_capped_simplex(&t);
            let dist = |x: f64, y: f64| (x - t[0]).powi(2) + (y - t[1]).powi(2);
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    best = best.min(dist(i as f64 / steps as f64, j as f64 / steps as f64));
                }
            }
            assert!(dist(a[0], a[1]) <= best + 1e-12);
            assert!(dist(a[0], a[1]) >= best - 1e-4);
        }
    }
}
