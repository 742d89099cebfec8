use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_len, domain, Error, Result};
use crate::kernel::KernelSpec;
use crate::loss::Prediction;
use crate::surrogate::{CodeMap, SurrogateKind, SurrogateSpec};

pub const MODEL_VERSION: u32 = 1;

/// A trained kernel expansion `f_j(x) = Σ_i β_{i,j} k(x_i, x)` together with
/// the decision rule that turns scores into predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelModel {
    pub version: u32,
    pub kind: SurrogateKind,
    /// Abstain cost the surrogate was trained for.
    pub alpha: f64,
    pub tau: f64,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub n_classes: usize,
    /// Original label of each dense class index.
    pub labels: Vec<String>,
    pub code_map: Option<CodeMap>,
    pub support_points: Vec<Vec<f64>>,
    /// `m × k` with `k = d` for BEP and `n` otherwise.
    pub beta: Vec<Vec<f64>>,
}

impl KernelModel {
    /// Default threshold: the calibrated midpoint for CS/BEP, zero for OVA.
    pub fn default_tau(kind: SurrogateKind) -> f64 {
        match kind {
            SurrogateKind::Ova => 0.0,
            _ => 0.5,
        }
    }

    /// Builds a model from per-example coefficients, dropping examples whose
    /// coefficients are all zero.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_coefficients(
        kind: SurrogateKind,
        alpha: f64,
        data: &Dataset,
        kernel: KernelSpec,
        lambda: f64,
        code_map: Option<CodeMap>,
        coefficients: Vec<Vec<f64>>,
    ) -> Self {
        let (support_points, beta): (Vec<_>, Vec<_>) = data
            .features
            .iter()
            .zip(coefficients)
            .filter(|(_, b)| b.iter().any(|&v| v != 0.0))
            .map(|(x, b)| (x.clone(), b))
            .unzip();
        Self {
            version: MODEL_VERSION,
            kind,
            alpha,
            tau: Self::default_tau(kind),
            kernel,
            lambda,
            n_classes: data.n_classes,
            labels: data.label_names.clone(),
            code_map,
            support_points,
            beta,
        }
    }

    /// Score vector length.
    pub fn output_dim(&self) -> usize {
        match (&self.kind, &self.code_map) {
            (SurrogateKind::Bep, Some(c)) => c.d(),
            _ => self.n_classes,
        }
    }

    /// Feature dimension of the support points, if any.
    pub fn input_dim(&self) -> Option<usize> {
        self.support_points.first().map(Vec::len)
    }

    pub fn spec(&self) -> Result<SurrogateSpec> {
        SurrogateSpec::with_code(self.kind, self.n_classes, self.alpha, self.tau, self.code_map.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::Version(self.version));
        }
        self.kernel.validate()?;
        self.spec()?;
        if self.labels.len() != self.n_classes {
            return domain(format!(
                "model lists {} labels for {} classes",
                self.labels.len(),
                self.n_classes
            ));
        }
        check_len(self.support_points.len(), self.beta.len())?;
        let k = self.output_dim();
        for row in &self.beta {
            check_len(k, row.len())?;
        }
        if let Some(dim) = self.input_dim() {
            for x in &self.support_points {
                check_len(dim, x.len())?;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        match self.input_dim() {
            Some(dim) => check_len(dim, x.len()),
            None => Ok(()),
        }
    }

    /// Score vector at `x`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut u = vec![0.0; self.output_dim()];
        for (sx, b) in self.support_points.iter().zip(&self.beta) {
            let k = self.kernel.eval_unchecked(sx, x);
            for (uj, bj) in u.iter_mut().zip(b) {
                *uj += bj * k;
            }
        }
        Ok(u)
    }

    pub fn scores(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for x in points {
            self.check_input(x)?;
        }
        Ok(crate::par::map(points, |x| {
            self.score(x).expect("dimensions checked")
        }))
    }

    /// Predictions with the model's threshold or `tau_override`.
    pub fn predict(&self, points: &[Vec<f64>], tau_override: Option<f64>) -> Result<Vec<Prediction>> {
        let spec = self.spec()?;
        let tau = tau_override.unwrap_or(self.tau);
        if !tau.is_finite() {
            return domain("threshold must be finite");
        }
        Ok(self
            .scores(points)?
            .iter()
            .map(|u| spec.predict_with_tau(u, tau))
            .collect())
    }

    /// Rejection margins of the model's decision rule.
    pub fn margins(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let spec = self.spec()?;
        Ok(self.scores(points)?.iter().map(|u| spec.margin(u)).collect())
    }

    /// `(λ/2) Σ_j β_{·,j}^⊤ K β_{·,j}` over the support set.
    pub fn regularizer(&self) -> f64 {
        let m = self.support_points.len();
        let mut total = 0.0;
        for a in 0..m {
            for b in 0..m {
                let k = self.kernel.eval_unchecked(&self.support_points[a], &self.support_points[b]);
                let dot: f64 = self.beta[a].iter().zip(&self.beta[b]).map(|(x, y)| x * y).sum();
                total += k * dot;
            }
        }
        0.5 * self.lambda * total
    }

    /// Regularized empirical surrogate risk on `data`.
    pub fn objective(&self, data: &Dataset) -> Result<f64> {
        let spec = self.spec()?;
        let scores = self.scores(&data.features)?;
        let mut loss = 0.0;
        for (u, &y) in scores.iter().zip(&data.labels) {
            loss += spec.psi_alpha(y, u)?;
        }
        Ok(loss + self.regularizer())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("version").and_then(serde_json::Value::as_u64) {
            Some(ver) if ver == MODEL_VERSION as u64 => {}
            Some(ver) => return Err(Error::Version(ver as u32)),
            None => return domain("model document has no version"),
        }
        let model: Self = serde_json::from_value(v)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut BufReader::new(File::open(path)?), &mut s)?;
        Self::from_json(&s)
    }
}
