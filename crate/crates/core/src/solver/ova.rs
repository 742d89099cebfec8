//! One-vs-all training: `n` independent binary hinge problems
//! `min_f Σ_i (1 - s_i f(x_i))_+ + (λ/2)||f||²`, each solved by coordinate
//! ascent on the box-constrained dual
//! `max_{β ∈ [0,1]^m} Σ β_i - (1/2λ) β^⊤ (S K S) β`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, KernelSpec};
use crate::solver::model::KernelModel;
use crate::surrogate::SurrogateKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvaOptions {
    pub max_epochs: usize,
    /// Largest projected-gradient violation tolerated at termination.
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for OvaOptions {
    fn default() -> Self {
        Self {
            max_epochs: 10_000,
            kkt_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryReport {
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
    pub max_violation: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OvaReport {
    /// Sum of the per-class primal objectives.
    pub objective: f64,
    pub classes: Vec<BinaryReport>,
    pub converged: bool,
}

/// Dual solution of one binary problem: `β_i` and the scores
/// `f(x_i) = (1/λ) Σ_r K_ir s_r β_r`.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub beta: Vec<f64>,
    pub scores: Vec<f64>,
    pub report: BinaryReport,
}

fn projected_gradient(beta: f64, g: f64) -> f64 {
    if beta <= 0.0 {
        g.max(0.0)
    } else if beta >= 1.0 {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}

/// Solves the binary hinge dual for signs `s ∈ {±1}^m`.
pub fn solve_binary(gram: &GramMatrix, signs: &[f64], lambda: f64, opts: &OvaOptions) -> Result<BinarySolution> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("regularization must be positive, got {lambda}")));
    }
    let m = gram.len();
    crate::error::check_len(m, signs.len())?;
    let mut beta = vec![0.0; m];
    let mut f = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).filter(|&i| gram.diag(i) > 0.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut epochs = 0;
    let mut violation = f64::INFINITY;
    while epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        violation = 0.0;
        for &i in &order {
            let g = 1.0 - signs[i] * f[i];
            let pg = projected_gradient(beta[i], g);
            violation = f64::max(violation, pg);
            if pg == 0.0 {
                continue;
            }
            let new = (beta[i] + lambda * g / gram.diag(i)).clamp(0.0, 1.0);
            let delta = new - beta[i];
            if delta == 0.0 {
                continue;
            }
            beta[i] = new;
            let step = signs[i] * delta / lambda;
            for (fr, k) in f.iter_mut().zip(gram.row(i).iter()) {
                *fr += k * step;
            }
        }
        epochs += 1;
        if !violation.is_finite() {
            return Err(Error::Solver("binary dual produced non-finite values".into()));
        }
        if violation < opts.kkt_tol {
            break;
        }
    }
    // rebuild scores to shed accumulated rounding
    let sb: Vec<f64> = signs.iter().zip(&beta).map(|(s, b)| s * b / lambda).collect();
    let f = gram.mul_vec(&sb);
    let half_norm: f64 = 0.5 * sb.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() * lambda;
    let hinge: f64 = signs.iter().zip(&f).map(|(s, fi)| (1.0 - s * fi).max(0.0)).sum();
    let dual = beta.iter().sum::<f64>() - half_norm;
    Ok(BinarySolution {
        beta,
        scores: f,
        report: BinaryReport {
            epochs,
            primal: hinge + half_norm,
            dual,
            max_violation: violation,
            converged: violation < opts.kkt_tol,
        },
    })
}

/// Trains one binary problem per class, concurrently when enabled.
pub fn train_ova(data: &Dataset, kernel: &KernelSpec, lambda: f64, opts: &OvaOptions) -> Result<(KernelModel, OvaReport)> {
    let gram = GramMatrix::new(kernel, &data.features)?;
    let classes: Vec<usize> = (0..data.n_classes).collect();
    let solved = crate::par::map(&classes, |&c| {
        let signs: Vec<f64> = data
            .labels
            .iter()
            .map(|&y| if y == c { 1.0 } else { -1.0 })
            .collect();
        let class_opts = OvaOptions {
            seed: opts.seed.wrapping_add(c as u64),
            ..*opts
        };
        solve_binary(&gram, &signs, lambda, &class_opts).map(|sol| (signs, sol))
    });
    let m = data.len();
    let mut coefficients = vec![vec![0.0; data.n_classes]; m];
    let mut reports = Vec::with_capacity(data.n_classes);
    for (c, res) in solved.into_iter().enumerate() {
        let (signs, sol) = res?;
        for i in 0..m {
            coefficients[i][c] = signs[i] * sol.beta[i] / lambda;
        }
        reports.push(sol.report);
    }
    let report = OvaReport {
        objective: reports.iter().map(|r| r.primal).sum(),
        converged: reports.iter().all(|r| r.converged),
        classes: reports,
    };
    let model = KernelModel::from_coefficients(SurrogateKind::Ova, 0.5, data, *kernel, lambda, None, coefficients);
    Ok((model, report))
}
