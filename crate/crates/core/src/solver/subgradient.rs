//! Kernel subgradient descent on
//! `R(β) = Σ_i ψ(y_i, f(x_i)) + (λ/2) Σ_j β_{·,j}^⊤ K β_{·,j}`
//! for any surrogate in the α-generalized family.
//!
//! Steps are taken in function space: the subgradient of the loss term at
//! `f` is `Σ_i g_i k(x_i, ·)`, so in coefficients the update direction is
//! `G + λβ`. Training-point scores `Kβ` are maintained incrementally, which
//! makes evaluating `R` at every step cost `O(m k)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, KernelSpec};
use crate::solver::model::KernelModel;
use crate::surrogate::{SurrogateKind, SurrogateSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientOptions {
    pub steps: usize,
    pub seed: u64,
    /// Initial step size; `None` picks `1 / (λ + max_r Σ_i |K_ri|)`.
    pub eta0: Option<f64>,
    /// Examples per stochastic step; `None` uses the full sum.
    pub batch: Option<usize>,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self {
            steps: 10_000,
            seed: 0,
            eta0: None,
            batch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgradientReport {
    pub steps: usize,
    pub eta0: f64,
    pub initial_objective: f64,
    /// Smallest objective over all iterates and the averaged model.
    pub best_objective: f64,
    pub averaged_objective: f64,
    /// `(step, running best)` at roughly a thousand evenly spaced steps.
    pub trace: Vec<(usize, f64)>,
}

struct Iterate {
    beta: Vec<f64>,
    scores: Vec<f64>,
}

fn objective(spec: &SurrogateSpec, labels: &[usize], it: &Iterate, k: usize, lambda: f64) -> f64 {
    let loss: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| spec.psi_alpha_unchecked(y, &it.scores[i * k..(i + 1) * k]))
        .sum();
    let quad: f64 = it.beta.iter().zip(&it.scores).map(|(b, s)| b * s).sum();
    loss + 0.5 * lambda * quad
}

/// Minimizes the regularized surrogate risk with step `η₀/√t`, averaging the
/// second half of the iterates.
///
/// Returns the averaged model; the report carries the best objective seen.
pub fn train_subgradient(
    data: &Dataset,
    kind: SurrogateKind,
    alpha: f64,
    kernel: &KernelSpec,
    lambda: f64,
    opts: &SubgradientOptions,
) -> Result<(KernelModel, SubgradientReport)> {
    if opts.steps == 0 {
        return Err(Error::Domain("subgradient training needs at least one step".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("regularization must be positive, got {lambda}")));
    }
    let spec = SurrogateSpec::new(kind, data.n_classes, alpha, KernelModel::default_tau(kind))?;
    let gram = GramMatrix::new(kernel, &data.features)?;
    let m = gram.len();
    let k = spec.output_dim();
    let labels = &data.labels;

    let eta0 = match opts.eta0 {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(Error::Domain(format!("step size must be positive, got {e}"))),
        None => {
            let spread = (0..m)
                .map(|r| gram.row(r).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            1.0 / (lambda + spread)
        }
    };
    let batch = opts.batch.map(|b| b.clamp(1, m));

    let mut it = Iterate {
        beta: vec![0.0; m * k],
        scores: vec![0.0; m * k],
    };
    let initial = objective(&spec, labels, &it, k, lambda);
    let limit = 10.0 * initial;
    let mut best = initial;
    let mut avg = Iterate {
        beta: vec![0.0; m * k],
        scores: vec![0.0; m * k],
    };
    let avg_start = opts.steps / 2 + 1;
    let mut avg_count = 0usize;
    let trace_every = (opts.steps / 1000).max(1);
    let mut trace = vec![(0, initial)];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut grad = vec![0.0; k];
    let mut active: Vec<(usize, Vec<f64>)> = Vec::new();

    for t in 1..=opts.steps {
        active.clear();
        let (indices, scale): (Vec<usize>, f64) = match batch {
            Some(b) => ((0..b).map(|_| rng.random_range(0..m)).collect(), m as f64 / b as f64),
            None => ((0..m).collect(), 1.0),
        };
        for i in indices {
            spec.psi_alpha_subgradient(labels[i], &it.scores[i * k..(i + 1) * k], &mut grad);
            if grad.iter().any(|&g| g != 0.0) {
                active.push((i, grad.iter().map(|g| g * scale).collect()));
            }
        }

        let eta = eta0 / (t as f64).sqrt();
        let shrink = 1.0 - eta * lambda;
        for b in it.beta.iter_mut() {
            *b *= shrink;
        }
        for (i, g) in &active {
            for (b, gj) in it.beta[i * k..(i + 1) * k].iter_mut().zip(g) {
                *b -= eta * gj;
            }
        }
        let active = &active;
        let gram = &gram;
        crate::par::for_each_chunk_mut(&mut it.scores, k, |r, s| {
            for v in s.iter_mut() {
                *v *= shrink;
            }
            let row = gram.row(r);
            for (i, g) in active {
                let w = eta * row[*i];
                if w != 0.0 {
                    for (v, gj) in s.iter_mut().zip(g) {
                        *v -= w * gj;
                    }
                }
            }
        });

        let obj = objective(&spec, labels, &it, k, lambda);
        if !obj.is_finite() || (initial > 0.0 && obj > limit) {
            return Err(Error::Divergence {
                step: t,
                objective: obj,
                initial,
            });
        }
        best = best.min(obj);

        if t >= avg_start {
            avg_count += 1;
            let w = 1.0 / avg_count as f64;
            for (a, b) in avg.beta.iter_mut().zip(&it.beta) {
                *a += w * (b - *a);
            }
            for (a, s) in avg.scores.iter_mut().zip(&it.scores) {
                *a += w * (s - *a);
            }
        }
        if t % trace_every == 0 || t == opts.steps {
            trace.push((t, best));
        }
    }

    let averaged = objective(&spec, labels, &avg, k, lambda);
    best = best.min(averaged);
    if let Some(last) = trace.last_mut() {
        last.1 = best;
    }

    let coefficients: Vec<Vec<f64>> = avg.beta.chunks(k).map(<[f64]>::to_vec).collect();
    let mut model = KernelModel::from_coefficients(
        kind,
        alpha,
        data,
        *kernel,
        lambda,
        spec.code_map().cloned(),
        coefficients,
    );
    model.tau = spec.tau;
    Ok((
        model,
        SubgradientReport {
            steps: opts.steps,
            eta0,
            initial_objective: initial,
            best_objective: best,
            averaged_objective: averaged,
            trace,
        },
    ))
}
