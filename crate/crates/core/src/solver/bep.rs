//! Dual block coordinate ascent for the BEP surrogate.
//!
//! Primal, for codes `b^i = B(y_i) ∈ {±1}^d`:
//!
//! ```text
//! min_{w, ξ}  Σ_i ξ_i + (λ/2) Σ_j ||w_j||²
//!   s.t.      ξ_i ≥ b^i_j <w_j, x_i> + 1,   ξ_i ≥ 0
//! ```
//!
//! Each example owns a block of `d + 1` dual variables on the probability
//! simplex (`α_{i,0}` is the multiplier of `ξ_i ≥ 0`). With the other blocks
//! fixed, maximizing over block `i` is a Euclidean projection of
//! `t_j = (λ - b^i_j c_j(i)) / K_ii` onto the capped simplex, where
//! `c_j(i) = Σ_{i'≠i} K_{i,i'} b^{i'}_j α_{i',j}`.
//!
//! The dual value reported here is the full Lagrangian dual
//! `Σ_{i,j≥1} α_{i,j} - (1/2λ) Σ_j ||Σ_i α_{i,j} b^i_j x_i||²`, which equals
//! the primal optimum at the solution. Dropping the constant `m` gives the
//! textbook form `-Σ_i α_{i,0} - ...`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, KernelSpec};
use crate::solver::model::KernelModel;
use crate::solver::projection::project_capped_simplex;
use crate::surrogate::{CodeMap, SurrogateKind};

/// Tolerance on the per-block simplex constraint.
const FEASIBILITY_TOL: f64 = 1e-10;
/// Cache drift beyond which the aggregate cache is rebuilt.
const DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockOutcome {
    Updated { dual_increase: f64 },
    /// `K_ii = 0`: the block cannot be updated and keeps its value.
    Skipped,
}

/// Dual variables and cached aggregates for one training run.
#[derive(Debug, Clone)]
pub struct BepDualState<'g> {
    gram: &'g GramMatrix,
    lambda: f64,
    m: usize,
    d: usize,
    /// `b^i_j`, row-major `m × d`.
    codes: Vec<f64>,
    /// `α_{i,j}`, row-major `m × (d + 1)`; column 0 is `α_{i,0}`.
    alpha: Vec<f64>,
    /// `s_{i,j} = Σ_{i'} K_{i,i'} b^{i'}_j α_{i',j}`, row-major `m × d`.
    /// Scores at training points are `-s / λ`.
    cache: Vec<f64>,
}

impl<'g> BepDualState<'g> {
    /// Feasible start `α_{i,0} = 1`, all other variables zero (`w = 0`).
    pub fn new(gram: &'g GramMatrix, labels: &[usize], code: &CodeMap, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("regularization must be positive, got {lambda}")));
        }
        let m = gram.len();
        crate::error::check_len(m, labels.len())?;
        let d = code.d();
        let mut codes = Vec::with_capacity(m * d);
        for &y in labels {
            if y >= code.n() {
                return Err(Error::Domain(format!("label {y} outside 0..{}", code.n())));
            }
            codes.extend_from_slice(code.code(y));
        }
        let mut alpha = vec![0.0; m * (d + 1)];
        for i in 0..m {
            alpha[i * (d + 1)] = 1.0;
        }
        Ok(Self {
            gram,
            lambda,
            m,
            d,
            codes,
            alpha,
            cache: vec![0.0; m * d],
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn code_len(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `(α_{i,0}, α_{i,1}, …, α_{i,d})`.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.alpha[i * (self.d + 1)..(i + 1) * (self.d + 1)]
    }

    pub fn code(&self, i: usize) -> &[f64] {
        &self.codes[i * self.d..(i + 1) * self.d]
    }

    /// Overwrites block `i` (which must be feasible) and updates the cache.
    pub fn set_block(&mut self, i: usize, block: &[f64]) -> Result<()> {
        crate::error::check_len(self.d + 1, block.len())?;
        if block.iter().any(|&v| v < 0.0) || (block.iter().sum::<f64>() - 1.0).abs() > FEASIBILITY_TOL {
            return Err(Error::Domain(format!("block {block:?} is not on the simplex")));
        }
        let old: Vec<f64> = self.block(i)[1..].to_vec();
        let delta: Vec<f64> = block[1..].iter().zip(&old).map(|(a, b)| a - b).collect();
        let w = self.d + 1;
        self.alpha[i * w..(i + 1) * w].copy_from_slice(block);
        self.apply_delta(i, &delta);
        Ok(())
    }

    fn apply_delta(&mut self, i: usize, delta: &[f64]) {
        let d = self.d;
        let scaled: Vec<f64> = delta
            .iter()
            .zip(self.code(i))
            .map(|(dl, b)| dl * b)
            .collect();
        if scaled.iter().all(|&v| v == 0.0) {
            return;
        }
        let row = self.gram.row(i);
        for (r, &k) in row.iter().enumerate() {
            let c = &mut self.cache[r * d..(r + 1) * d];
            for (cj, sj) in c.iter_mut().zip(&scaled) {
                *cj += k * sj;
            }
        }
    }

    /// `c_j(i)` from the cache.
    fn others_aggregate(&self, i: usize) -> Vec<f64> {
        let kii = self.gram.diag(i);
        let b = self.code(i);
        let a = &self.block(i)[1..];
        (0..self.d)
            .map(|j| self.cache[i * self.d + j] - kii * b[j] * a[j])
            .collect()
    }

    /// `c_j(i)` recomputed from the dual variables in O(m d).
    fn others_aggregate_direct(&self, i: usize) -> Vec<f64> {
        let row = self.gram.row(i);
        let mut c = vec![0.0; self.d];
        for r in (0..self.m).filter(|&r| r != i) {
            let b = self.code(r);
            let a = &self.block(r)[1..];
            for j in 0..self.d {
                c[j] += row[r] * b[j] * a[j];
            }
        }
        c
    }

    /// Projection target `t_j = b^i_j g^i_j` where
    /// `g^i_j = (λ / K_ii) (b^i_j - c_j(i) / λ)`.
    pub fn block_target(&self, i: usize) -> Vec<f64> {
        self.target_from(i, &self.others_aggregate(i))
    }

    /// Same target computed in the simplified form
    /// `(λ / K_ii)(1 - b^i_j c_j(i) / λ)` from freshly recomputed aggregates.
    pub fn block_target_direct(&self, i: usize) -> Vec<f64> {
        let c = self.others_aggregate_direct(i);
        let kii = self.gram.diag(i);
        self.code(i)
            .iter()
            .zip(&c)
            .map(|(b, cj)| (self.lambda / kii) * (1.0 - b * cj / self.lambda))
            .collect()
    }

    fn target_from(&self, i: usize, c: &[f64]) -> Vec<f64> {
        let kii = self.gram.diag(i);
        self.code(i)
            .iter()
            .zip(c)
            .map(|(b, cj)| {
                let g = (self.lambda / kii) * (b - cj / self.lambda);
                b * g
            })
            .collect()
    }

    /// Exactly maximizes the dual over block `i`.
    pub fn block_update(&mut self, i: usize) -> BlockOutcome {
        let kii = self.gram.diag(i);
        if kii <= 0.0 {
            return BlockOutcome::Skipped;
        }
        let c = self.others_aggregate(i);
        let t = self.target_from(i, &c);
        let new = project_capped_simplex(&t);
        let w = self.d + 1;
        let old: Vec<f64> = self.alpha[i * w + 1..(i + 1) * w].to_vec();
        let b: Vec<f64> = self.code(i).to_vec();
        let mut increase = 0.0;
        let mut delta = vec![0.0; self.d];
        for j in 0..self.d {
            delta[j] = new[j] - old[j];
            increase += delta[j] * (1.0 - b[j] * c[j] / self.lambda)
                - kii / (2.0 * self.lambda) * (new[j] * new[j] - old[j] * old[j]);
        }
        let total: f64 = new.iter().sum();
        self.alpha[i * w] = (1.0 - total).max(0.0);
        self.alpha[i * w + 1..(i + 1) * w].copy_from_slice(&new);
        self.apply_delta(i, &delta);
        BlockOutcome::Updated {
            dual_increase: increase,
        }
    }

    /// `Σ_i Σ_j b^i_j α_{i,j} s_{i,j}`, i.e. `λ² Σ_j ||w_j||²`.
    fn quadratic(&self) -> f64 {
        let mut q = 0.0;
        for i in 0..self.m {
            let a = &self.block(i)[1..];
            let b = self.code(i);
            for j in 0..self.d {
                q += b[j] * a[j] * self.cache[i * self.d + j];
            }
        }
        q
    }

    /// Lagrangian dual value (primal-comparable; includes the constant `m`).
    pub fn dual_objective(&self) -> f64 {
        let linear: f64 = (0..self.m).map(|i| self.block(i)[1..].iter().sum::<f64>()).sum();
        linear - self.quadratic() / (2.0 * self.lambda)
    }

    /// Dual in the form `-Σ α_{i,0} - (1/2λ) Σ Σ K μ`, i.e. without the `m`.
    pub fn reduced_dual_objective(&self) -> f64 {
        self.dual_objective() - self.m as f64
    }

    /// Scores `f_j(x_i)` at the training points.
    pub fn training_scores(&self) -> Vec<f64> {
        self.cache.iter().map(|s| -s / self.lambda).collect()
    }

    /// Primal objective at `w(α)`.
    pub fn primal_objective(&self) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.m {
            let b = self.code(i);
            let worst = (0..self.d)
                .map(|j| -b[j] * self.cache[i * self.d + j] / self.lambda)
                .fold(f64::NEG_INFINITY, f64::max);
            loss += (worst + 1.0).max(0.0);
        }
        loss + self.quadratic() / (2.0 * self.lambda)
    }

    pub fn duality_gap(&self) -> f64 {
        self.primal_objective() - self.dual_objective()
    }

    /// Rebuilds the aggregate cache from the dual variables.
    pub fn refresh_cache(&mut self) {
        let d = self.d;
        let mut cache = vec![0.0; self.m * d];
        for r in 0..self.m {
            let row = self.gram.row(r);
            let c = &mut cache[r * d..(r + 1) * d];
            for i in 0..self.m {
                let k = row[i];
                if k == 0.0 {
                    continue;
                }
                let b = self.code(i);
                let a = &self.block(i)[1..];
                for j in 0..d {
                    c[j] += k * b[j] * a[j];
                }
            }
        }
        self.cache = cache;
    }

    /// Largest difference between the cached and recomputed projection
    /// targets at block `i`.
    pub fn target_drift(&self, i: usize) -> f64 {
        if self.gram.diag(i) <= 0.0 {
            return 0.0;
        }
        self.block_target(i)
            .iter()
            .zip(self.block_target_direct(i))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Verifies nonnegativity and the per-block simplex constraint.
    pub fn check_feasibility(&self) -> Result<()> {
        for i in 0..self.m {
            let blk = self.block(i);
            let sum: f64 = blk.iter().sum();
            if blk.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > FEASIBILITY_TOL {
                return Err(Error::Internal(format!("dual block {i} infeasible: {blk:?}")));
            }
        }
        Ok(())
    }

    /// Representer coefficients `β_{i,j} = -α_{i,j} b^i_j / λ`.
    pub fn coefficients(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|i| {
                self.block(i)[1..]
                    .iter()
                    .zip(self.code(i))
                    .map(|(a, b)| -a * b / self.lambda)
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BepOptions {
    pub max_epochs: usize,
    /// Stop when the per-epoch dual increase relative to `1 + |dual|` falls
    /// below this. Disabled (zero) by default: near the optimum the dual
    /// creeps up slowly while the gap is still well above `gap_tol`.
    pub dual_tol: f64,
    /// Stop when `gap ≤ gap_tol · (1 + |primal|)`.
    pub gap_tol: f64,
    /// Seed of the per-epoch block permutation.
    pub seed: u64,
}

impl Default for BepOptions {
    fn default() -> Self {
        Self {
            max_epochs: 1_000_000,
            dual_tol: 0.0,
            gap_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BepReport {
    pub epochs: usize,
    pub primal: f64,
    /// Lagrangian dual (includes the constant `m`).
    pub dual: f64,
    pub gap: f64,
    pub converged: bool,
    pub skipped_blocks: usize,
    pub cache_refreshes: usize,
}

/// Runs block coordinate ascent on the BEP dual from the feasible start
/// until the duality gap or the dual progress falls below tolerance.
pub fn train_bep(data: &Dataset, kernel: &KernelSpec, lambda: f64, opts: &BepOptions) -> Result<(KernelModel, BepReport)> {
    let gram = GramMatrix::new(kernel, &data.features)?;
    let code = CodeMap::new(data.n_classes)?;
    let mut state = BepDualState::new(&gram, &data.labels, &code, lambda)?;
    let report = solve_bep(&mut state, opts)?;
    let model = KernelModel::from_coefficients(
        SurrogateKind::Bep,
        0.5,
        data,
        *kernel,
        lambda,
        Some(code),
        state.coefficients(),
    );
    Ok((model, report))
}

/// Drives an existing state to convergence.
pub fn solve_bep(state: &mut BepDualState<'_>, opts: &BepOptions) -> Result<BepReport> {
    let m = state.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..m).collect();
    let skipped = (0..m).filter(|&i| state.gram.diag(i) <= 0.0).count();
    let mut dual = state.dual_objective();
    let mut refreshes = 0;
    let mut epochs = 0;
    let mut converged = false;
    while epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            state.block_update(i);
        }
        epochs += 1;

        let probe = order[0];
        if state.target_drift(probe) > DRIFT_TOL {
            state.refresh_cache();
            refreshes += 1;
        }

        let new_dual = state.dual_objective();
        if !new_dual.is_finite() {
            return Err(Error::Solver(format!("dual objective became {new_dual}")));
        }
        let primal = state.primal_objective();
        let gap = primal - new_dual;
        let progress = (new_dual - dual) / (1.0 + dual.abs());
        dual = new_dual;
        if gap <= opts.gap_tol * (1.0 + primal.abs()) || (opts.dual_tol > 0.0 && progress < opts.dual_tol) {
            converged = true;
            break;
        }
    }
    state.refresh_cache();
    state.check_feasibility()?;
    let primal = state.primal_objective();
    let dual = state.dual_objective();
    Ok(BepReport {
        epochs,
        primal,
        dual,
        gap: primal - dual,
        converged,
        skipped_blocks: skipped,
        cache_refreshes: refreshes,
    })
}
