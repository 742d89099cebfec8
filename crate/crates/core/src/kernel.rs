//! Kernel functions and Gram matrices.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Gaussian,
}

/// `k(x, x') = <x, x'>` or `exp(-gamma ||x - x'||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Width parameter; ignored by the linear kernel.
    pub gamma: f64,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: 0.0,
        }
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return domain(format!("gaussian kernel width must be positive, got {gamma}"));
        }
        Ok(Self {
            kind: KernelKind::Gaussian,
            gamma,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Linear => Ok(()),
            KernelKind::Gaussian => Self::gaussian(self.gamma).map(|_| ()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(x.len(), y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelKind::Gaussian => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

/// Largest number of points for which the Gram matrix is stored densely
/// (8192 points is 512 MiB of `f64`). Larger problems recompute entries.
pub const DEFAULT_DENSE_CAP: usize = 8192;

#[derive(Debug, Clone)]
enum Storage {
    Dense(Vec<f64>),
    OnTheFly { spec: KernelSpec, points: Vec<Vec<f64>> },
}

/// Symmetric kernel matrix over a fixed point set.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    m: usize,
    diag: Vec<f64>,
    storage: Storage,
}

impl GramMatrix {
    pub fn new(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<Self> {
        Self::with_cap(spec, points, DEFAULT_DENSE_CAP)
    }

    pub fn with_cap(spec: &KernelSpec, points: &[Vec<f64>], dense_cap: usize) -> Result<Self> {
        spec.validate()?;
        let m = points.len();
        if m == 0 {
            return domain("Gram matrix of an empty point set");
        }
        let dim = points[0].len();
        for p in points {
            check_len(dim, p.len())?;
        }
        let diag: Vec<f64> = points.iter().map(|x| spec.eval_unchecked(x, x)).collect();
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::Solver("non-finite kernel value".into()));
        }
        let storage = if m <= dense_cap {
            Storage::Dense(dense_gram(spec, points))
        } else {
            Storage::OnTheFly {
                spec: *spec,
                points: points.to_vec(),
            }
        };
        if let Storage::Dense(k) = &storage {
            if k.iter().any(|v| !v.is_finite()) {
                return Err(crate::Error::Solver("non-finite kernel value".into()));
            }
        }
        Ok(Self { m, diag, storage })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(k) => k[i * self.m + j],
            Storage::OnTheFly { spec, points } => spec.eval_unchecked(&points[i], &points[j]),
        }
    }

    pub fn row(&self, i: usize) -> Cow<'_, [f64]> {
        match &self.storage {
            Storage::Dense(k) => Cow::Borrowed(&k[i * self.m..(i + 1) * self.m]),
            Storage::OnTheFly { spec, points } => Cow::Owned(
                points
                    .iter()
                    .map(|p| spec.eval_unchecked(&points[i], p))
                    .collect(),
            ),
        }
    }

    /// `K v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn dense_gram(spec: &KernelSpec, points: &[Vec<f64>]) -> Vec<f64> {
    let m = points.len();
    let upper_row = |i: usize| -> Vec<f64> {
        (i..m)
            .map(|j| spec.eval_unchecked(&points[i], &points[j]))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let upper: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(upper_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let upper: Vec<Vec<f64>> = (0..m).map(upper_row).collect();

    let mut k = vec![0.0; m * m];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            k[i * m + j] = v;
            k[j * m + i] = v;
        }
    }
    k
}

pub fn gram(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    GramMatrix::new(spec, points)
}
