//! Datasets: the Gaussian-prototype synthetic family, sparse text files,
//! splits, and reject-rate threshold calibration.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Error, Result};
use crate::loss::SimplexVector;
use crate::solver::KernelModel;
use crate::surrogate::SurrogateKind;

/// Labelled examples with dense features and classes `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Original label of each class index.
    pub label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset whose label names are `1..=n_classes`.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (1..=n_classes).map(|c| c.to_string()).collect();
        Self::with_label_names(features, labels, names)
    }

    pub fn with_label_names(features: Vec<Vec<f64>>, labels: Vec<usize>, label_names: Vec<String>) -> Result<Self> {
        let n_classes = label_names.len();
        if features.is_empty() {
            return domain("dataset has no examples");
        }
        check_len(features.len(), labels.len())?;
        let dim = features[0].len();
        for x in &features {
            check_len(dim, x.len())?;
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return domain(format!("label {y} outside 0..{n_classes}"));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Examples at `indices`, keeping the class numbering.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::with_label_names(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.label_names.clone(),
        )
    }

    /// The first `m` examples.
    pub fn head(&self, m: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..m.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Classes present in the data.
    pub fn label_set(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Zero-pads every feature vector to `dim` entries.
    pub fn pad_to(&mut self, dim: usize) -> Result<()> {
        if dim < self.dim() {
            return domain(format!("cannot shrink features from {} to {dim}", self.dim()));
        }
        for x in &mut self.features {
            x.resize(dim, 0.0);
        }
        Ok(())
    }

    /// Re-expresses the labels in terms of `names`, e.g. those of a model
    /// trained on a different file.
    pub fn align_labels(&self, names: &[String]) -> Result<Self> {
        let labels = self
            .labels
            .iter()
            .map(|&y| {
                let name = &self.label_names[y];
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Domain(format!("label {name} unknown to the model")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_label_names(self.features.clone(), labels, names.to_vec())
    }
}

/// The Gaussian-prototype family: `y` uniform on `n` classes,
/// `x = v_y + σ u` with `u ~ N(0, I_2)` and prototypes `v_y ~ N(0, I_2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    /// Per-axis noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_classes: 8,
            sigma: 0.65,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 1 {
            return domain("synthetic family needs at least one class");
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return domain(format!("noise scale must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    /// Prototype vectors, fixed by the seed.
    pub fn prototypes(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_classes)
            .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect()
    }

    /// `m` examples from an independent random stream; different streams
    /// give independent samples over the same prototypes.
    pub fn sample(&self, m: usize, stream: u64) -> Result<Dataset> {
        self.validate()?;
        if m == 0 {
            return domain("sample size must be at least 1");
        }
        let protos = self.prototypes();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream + 1);
        let mut features = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            let y = rng.random_range(0..self.n_classes);
            let v = &protos[y];
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            features.push(vec![v[0] + self.sigma * a, v[1] + self.sigma * b]);
            labels.push(y);
        }
        Dataset::new(features, labels, self.n_classes)
    }

    pub fn posterior(&self, x: &[f64]) -> Result<SimplexVector> {
        synthetic_posterior(&self.prototypes(), self.sigma, x)
    }
}

/// Training sample from stream 0 together with the prototypes.
pub fn generate_synthetic(spec: &SyntheticSpec, m: usize) -> Result<(Dataset, Vec<Vec<f64>>)> {
    Ok((spec.sample(m, 0)?, spec.prototypes()))
}

/// `p(y|x) ∝ exp(-||x - v_y||² / 2σ²)` under a uniform prior.
pub fn synthetic_posterior(prototypes: &[Vec<f64>], sigma: f64, x: &[f64]) -> Result<SimplexVector> {
    if prototypes.is_empty() {
        return domain("posterior needs at least one prototype");
    }
    let logits = prototypes
        .iter()
        .map(|v| {
            check_len(v.len(), x.len())?;
            let d2: f64 = v.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(-d2 / (2.0 * sigma * sigma))
        })
        .collect::<Result<Vec<f64>>>()?;
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    Ok(SimplexVector::from_weights(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of the Bayes abstain(α) risk
/// `E_x min(1 - max_y p(y|x), α)` for the synthetic family.
pub fn bayes_risk_monte_carlo(spec: &SyntheticSpec, alpha: f64, samples: usize, seed: u64) -> Result<MonteCarloEstimate> {
    spec.validate()?;
    if samples == 0 {
        return domain("need at least one Monte Carlo sample");
    }
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("abstain cost must lie in [0, 1], got {alpha}"));
    }
    const CHUNK: usize = 1 << 15;
    let protos = spec.prototypes();
    let chunks: Vec<(u64, usize)> = (0..samples.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(samples - c * CHUNK)))
        .collect();
    let sums = crate::par::map(&chunks, |&(stream, count)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let y = rng.random_range(0..spec.n_classes);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let x = [protos[y][0] + spec.sigma * a, protos[y][1] + spec.sigma * b];
            let p = synthetic_posterior(&protos, spec.sigma, &x).expect("two-dimensional prototypes");
            let r = (1.0 - p.max().1).min(alpha);
            s += r;
            s2 += r * r;
        }
        (s, s2)
    });
    let (s, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let n = samples as f64;
    let mean = s / n;
    let var = if samples > 1 {
        ((s2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

fn parse_error<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

/// Parses `label idx:val idx:val ...` lines with 1-based, strictly
/// increasing indices. Blank lines are skipped. Labels are mapped to
/// `0..n` in numeric order (lexicographic if any label is not a number).
pub fn parse_sparse<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut raw: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0;
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = no + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let Some((idx, val)) = tok.split_once(':') else {
                return parse_error(lineno, format!("expected idx:val, found {tok:?}"));
            };
            let idx: usize = match idx.parse() {
                Ok(i) if i >= 1 => i,
                _ => return parse_error(lineno, format!("bad feature index {idx:?}")),
            };
            let val: f64 = match val.parse() {
                Ok(v) => v,
                Err(_) => return parse_error(lineno, format!("bad feature value {val:?}")),
            };
            if !val.is_finite() {
                return parse_error(lineno, format!("non-finite feature value {val}"));
            }
            if idx <= last {
                return parse_error(lineno, format!("feature index {idx} does not increase past {last}"));
            }
            last = idx;
            entries.push((idx, val));
        }
        dim = dim.max(last);
        raw.push((label.to_string(), entries));
    }
    if raw.is_empty() {
        return domain("sparse file contains no examples");
    }

    let mut names: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    }
    let mut features = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    for (label, entries) in raw {
        let mut x = vec![0.0; dim];
        for (idx, val) in entries {
            x[idx - 1] = val;
        }
        features.push(x);
        labels.push(names.iter().position(|n| *n == label).expect("label collected above"));
    }
    Dataset::with_label_names(features, labels, names)
}

pub fn read_sparse(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_sparse(BufReader::new(File::open(path)?))
}

/// Writes nonzero features in the sparse format using each class's
/// original label; values use the shortest round-trip decimal form.
pub fn write_sparse<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    for (x, &y) in data.features.iter().zip(&data.labels) {
        write!(w, "{}", data.label_names[y])?;
        for (j, v) in x.iter().enumerate() {
            if *v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_sparse(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sparse(&mut w, data)?;
    w.flush()?;
    Ok(())
}

/// CSV with header `y,x1,x2,...`.
pub fn write_csv<W: Write>(mut w: W, data: &Dataset) -> Result<()> {
    write!(w, "y")?;
    for j in 1..=data.dim() {
        write!(w, ",x{j}")?;
    }
    writeln!(w)?;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        write!(w, "{}", data.label_names[y])?;
        for v in x {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Seeded shuffle, then the first `round(fraction·m)` examples (at least
/// one, and leaving at least one when `m ≥ 2`) form the training part.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return domain(format!("split fraction must lie in (0, 1), got {fraction}"));
    }
    let m = data.len();
    if m < 2 {
        return domain("cannot split fewer than two examples");
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * m as f64).round() as usize).clamp(1, m - 1);
    Ok((data.subset(&idx[..n_train])?, data.subset(&idx[n_train..])?))
}

/// Threshold at which `margin ≤ τ` rejects `floor(target · m)` of the given
/// margins, or fewer when ties straddle the cut.
///
/// `target = 0` yields a threshold strictly below every margin: `0` for
/// CS/BEP when all margins are positive, and a value below `-1` for OVA.
pub fn calibrate_tau_from_margins(kind: SurrogateKind, margins: &[f64], target: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target) {
        return domain(format!("reject target must lie in [0, 1), got {target}"));
    }
    if margins.is_empty() {
        return domain("no margins to calibrate on");
    }
    if margins.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite margin".into()));
    }
    let mut r = margins.to_vec();
    r.sort_by(f64::total_cmp);
    let k = (target * r.len() as f64 + 1e-9).floor() as usize;
    if k == 0 {
        return Ok(match kind {
            SurrogateKind::Ova => r[0].min(kind.never_reject_tau()).next_down(),
            _ if r[0] > 0.0 => 0.0,
            _ => r[0].next_down(),
        });
    }
    let tau = r[k - 1];
    Ok(if k < r.len() && r[k] == tau { tau.next_down() } else { tau })
}

/// Calibrates the model's threshold to a target reject rate on `data`.
pub fn calibrate_tau(model: &KernelModel, data: &Dataset, target: f64) -> Result<f64> {
    let margins = model.margins(&data.features)?;
    calibrate_tau_from_margins(model.kind, &margins, target)
}
