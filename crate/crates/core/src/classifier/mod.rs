//! Multi-class soft-margin RBF support vector machine trained by SMO.
//!
//! Features are z-scored with parameters fitted on the training data, one
//! binary machine is trained per unordered pair of classes, and prediction is
//! a one-vs-one majority vote.

pub mod kernel;
pub mod persist;
pub mod scaling;
pub mod smo;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::parallel::{self, Execution};

pub use kernel::rbf_kernel;
pub use scaling::{fit_scaling, ScalingParams};
pub use smo::SmoParams;

pub const MODEL_VERSION: u32 = 1;

/// Multipliers below this are not kept as support vectors.
const SUPPORT_EPS: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// Penalty `C`.
    pub c: f64,
    /// RBF width `gamma`.
    pub gamma: f64,
    /// KKT tolerance.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: 1.0 / FEATURE_COUNT as f64,
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

impl SvmParams {
    pub fn with(c: f64, gamma: f64) -> Self {
        SvmParams {
            c,
            gamma,
            ..Self::default()
        }
    }

    fn smo(&self) -> SmoParams {
        SmoParams {
            c: self.c,
            gamma: self.gamma,
            tol: self.tol,
            max_passes: self.max_passes,
        }
    }
}

/// Feature vectors with class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let d = LabeledDataset { vectors, labels };
        d.validate()?;
        Ok(d)
    }

    pub fn push(&mut self, vector: Vec<f64>, label: impl Into<String>) {
        self.vectors.push(vector);
        self.labels.push(label.into());
    }

    pub fn push_features(&mut self, f: &FeatureVector, label: impl Into<String>) {
        self.push(f.to_array().to_vec(), label);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.is_empty() {
            return Err(Error::insufficient("dataset is empty"));
        }
        if self.vectors.len() != self.labels.len() {
            return Err(Error::rejected("dataset vectors and labels differ in length"));
        }
        let dim = self.vectors[0].len();
        if dim == 0 || self.vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::rejected("dataset vectors differ in dimension"));
        }
        if self.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::rejected("dataset contains non-finite features"));
        }
        if self.labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
            return Err(Error::rejected("class labels must be non-empty and contain no whitespace"));
        }
        Ok(())
    }

    /// Distinct labels in sort order.
    pub fn classes(&self) -> Vec<String> {
        self.labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn count(&self, label: &str) -> usize {
        self.labels.iter().filter(|l| *l == label).count()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

/// One binary machine; the positive class is the pair's smaller label.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub alphas_signed: Vec<f64>,
    pub bias: f64,
    pub kernel_gamma: f64,
    pub penalty: f64,
    pub label_pair: (String, String),
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas_signed)
            .map(|(sv, a)| a * rbf_kernel(sv, x, self.kernel_gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Winning label; a decision value of exactly 0 goes to the positive label.
    pub fn vote(&self, x: &[f64]) -> &str {
        if self.decision(x) >= 0.0 {
            &self.label_pair.0
        } else {
            &self.label_pair.1
        }
    }
}

/// Trains one binary machine on already-standardized data holding exactly two labels.
pub fn train_binary(data: &LabeledDataset, params: &SvmParams) -> Result<BinarySvmModel> {
    data.validate()?;
    let classes = data.classes();
    if classes.len() != 2 {
        return Err(Error::rejected(format!(
            "binary training needs exactly 2 classes, got {}",
            classes.len()
        )));
    }
    let y: Vec<f64> = data
        .labels
        .iter()
        .map(|l| if *l == classes[0] { 1.0 } else { -1.0 })
        .collect();
    let sol = smo::solve(&data.vectors, &y, &params.smo())?;

    let mut support_vectors = Vec::new();
    let mut alphas_signed = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > SUPPORT_EPS {
            support_vectors.push(data.vectors[i].clone());
            alphas_signed.push(a * y[i]);
        }
    }
    let [pos, neg]: [String; 2] = classes.try_into().expect("two classes checked above");
    Ok(BinarySvmModel {
        support_vectors,
        alphas_signed,
        bias: sol.bias,
        kernel_gamma: params.gamma,
        penalty: params.c,
        label_pair: (pos, neg),
    })
}

/// One-vs-one ensemble with its feature scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel {
    pub version: u32,
    pub classes: Vec<String>,
    /// One machine per pair `(i, j)`, `i < j`, in row-major pair order.
    pub binaries: Vec<BinarySvmModel>,
    pub scaling: ScalingParams,
}

impl MulticlassSvmModel {
    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }

    pub fn predict_raw(&self, vector: &[f64]) -> &str {
        let z = self.scaling.apply(vector);
        let mut votes = vec![0usize; self.classes.len()];
        for b in &self.binaries {
            let winner = b.vote(&z);
            // classes are sorted, so binary search finds the index
            let idx = self
                .classes
                .binary_search_by(|c| c.as_str().cmp(winner))
                .expect("binary labels come from the class list");
            votes[idx] += 1;
        }
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        &self.classes[best]
    }

    pub fn predict(&self, features: &FeatureVector) -> &str {
        self.predict_raw(&features.to_array())
    }

    pub fn has_class(&self, label: &str) -> bool {
        self.classes.binary_search_by(|c| c.as_str().cmp(label)).is_ok()
    }
}

pub fn train(data: &LabeledDataset, params: &SvmParams) -> Result<MulticlassSvmModel> {
    train_with(data, params, Execution::default())
}

/// Like [`train`], with explicit scheduling of the pairwise subproblems.
pub fn train_with(
    data: &LabeledDataset,
    params: &SvmParams,
    exec: Execution,
) -> Result<MulticlassSvmModel> {
    train_min_per_class(data, params, exec, 2)
}

/// Cross-validation folds may leave a single sample of a class in training;
/// the dual is still well posed there.
pub(crate) fn train_min_per_class(
    data: &LabeledDataset,
    params: &SvmParams,
    exec: Execution,
    min_per_class: usize,
) -> Result<MulticlassSvmModel> {
    data.validate()?;
    let classes = data.classes();
    if classes.len() < 2 {
        return Err(Error::InsufficientClassData {
            class: classes.into_iter().next().unwrap_or_default(),
            count: data.len(),
            required: 2,
        });
    }
    for c in &classes {
        let count = data.count(c);
        if count < min_per_class {
            return Err(Error::InsufficientClassData {
                class: c.clone(),
                count,
                required: min_per_class,
            });
        }
    }

    let scaling = fit_scaling(&data.vectors)?;
    let scaled: Vec<Vec<f64>> = data.vectors.iter().map(|v| scaling.apply(v)).collect();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..data.len()).filter(|&i| data.labels[i] == *c).collect())
        .collect();

    let pairs: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|i| (i + 1..classes.len()).map(move |j| (i, j)))
        .collect();
    let binaries = parallel::try_map(exec, &pairs, |&(i, j)| {
        let idx: Vec<usize> = members[i].iter().chain(&members[j]).copied().collect();
        let sub = LabeledDataset {
            vectors: idx.iter().map(|&k| scaled[k].clone()).collect(),
            labels: idx.iter().map(|&k| data.labels[k].clone()).collect(),
        };
        train_binary(&sub, params)
    })?;

    Ok(MulticlassSvmModel {
        version: MODEL_VERSION,
        classes,
        binaries,
        scaling,
    })
}
