//! Multiclass gradient-boosted decision trees.
//!
//! Softmax objective. Each iteration fits one depth-limited regression tree
//! per class on the weighted gradients `w (p_c - 1{y = c})` and hessians
//! `w p_c (1 - p_c)`, with Newton leaf values `-lr G / (H + l2)`. Splits are
//! searched over per-feature quantile histograms. Logits start at zero.

mod metrics;
mod tree;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::FeatureSchema;
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
pub use metrics::{confusion_matrix, macro_f1, per_class_f1, ConfusionMatrix};
use tree::{BinMapper, Binned, GrowParams, Node, Tree, LEAF};

/// Class id → sample weight.
pub type ClassWeights = BTreeMap<u8, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_iterations: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// At most 255.
    pub n_bins: usize,
    pub l2_leaf_reg: f64,
    /// Row fraction sampled per iteration; 1.0 uses every row.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_iterations: 1000,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 20,
            n_bins: 255,
            l2_leaf_reg: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Validation(format!("invalid GBT parameter: {what}")));
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return bad("max_depth and min_samples_leaf must be positive");
        }
        if !(2..=255).contains(&self.n_bins) {
            return bad("n_bins must be in 2..=255");
        }
        if self.l2_leaf_reg < 0.0 || !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("l2_leaf_reg must be >= 0 and subsample in (0, 1]");
        }
        Ok(())
    }
}

/// Row-major feature matrix tagged with its schema hash.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema_hash: u64,
    n_cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(schema: &FeatureSchema, rows: &[Vec<f64>]) -> Result<Self> {
        Self::with_hash(schema.hash(), schema.len(), rows)
    }

    /// Matrix with generated column names `f0, f1, ...`.
    pub fn anonymous(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let schema = FeatureSchema::new((0..n_cols).map(|i| format!("f{i}")).collect());
        Self::new(&schema, rows)
    }

    pub fn with_hash(schema_hash: u64, n_cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            schema_hash,
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema_hash
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    params: GbtParams,
    schema_hash: u64,
    n_features: usize,
    classes: Vec<u8>,
    /// `trees[iteration][class]`.
    trees: Vec<Vec<Tree>>,
}

/// `N / (K · N_c)` over the classes present in `labels`.
pub fn balanced_weights(labels: &[u8]) -> Result<ClassWeights> {
    if labels.is_empty() {
        return Err(Error::Validation("cannot weight an empty label set".into()));
    }
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &y in labels {
        *counts.entry(y).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    Ok(counts
        .into_iter()
        .map(|(c, nc)| (c, n / (k * nc as f64)))
        .collect())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Weighted cross-entropy of one sample and its gradient w.r.t. the logits.
pub fn softmax_loss_grad(logits: &[f64], target: usize, weight: f64) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -weight * p[target].max(f64::MIN_POSITIVE).ln();
    let grad = p
        .iter()
        .enumerate()
        .map(|(c, pc)| weight * (pc - if c == target { 1.0 } else { 0.0 }))
        .collect();
    (loss, grad)
}

fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Fit a model; see [`fit_traced`] for the per-iteration training loss.
pub fn fit(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &ClassWeights,
    params: &GbtParams,
) -> Result<GbtModel> {
    fit_traced(x, y, weights, params).map(|(m, _)| m)
}

/// Fit and return the weighted mean training log-loss before the first and
/// after every iteration (`n_iterations + 1` values).
pub fn fit_traced(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &ClassWeights,
    params: &GbtParams,
) -> Result<(GbtModel, Vec<f64>)> {
    params.validate()?;
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", y.len())));
    }
    if x.data.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("feature matrix contains NaN".into()));
    }
    let classes: Vec<u8> = {
        let mut c = y.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    if classes.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least two classes, got {:?}",
            classes
        )));
    }
    let target: Vec<usize> = y
        .iter()
        .map(|c| classes.binary_search(c).unwrap())
        .collect();
    let sample_w: Vec<f64> = y
        .iter()
        .map(|c| {
            weights
                .get(c)
                .copied()
                .filter(|w| *w > 0.0 && w.is_finite())
                .ok_or_else(|| Error::Validation(format!("no positive weight for class {c}")))
        })
        .collect::<Result<_>>()?;
    let w_total: f64 = sample_w.iter().sum();

    let columns: Vec<Vec<f64>> = (0..x.n_cols)
        .map(|f| (0..n).map(|r| x.data[r * x.n_cols + f]).collect())
        .collect();
    let mapper = BinMapper::fit(&columns, params.n_bins);
    let binned = Binned {
        n_rows: n,
        data: columns
            .iter()
            .enumerate()
            .flat_map(|(f, col)| col.iter().map(move |&v| (f, v)))
            .map(|(f, v)| mapper.bin(f, v))
            .collect(),
    };
    drop(columns);

    let k = classes.len();
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        l2: params.l2_leaf_reg,
        learning_rate: params.learning_rate,
    };
    let mut logits = vec![0.0; n * k];
    let mut trees = Vec::with_capacity(params.n_iterations);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let loss_of = |logits: &[f64]| -> f64 {
        (0..n)
            .map(|i| softmax_loss_grad(&logits[i * k..(i + 1) * k], target[i], sample_w[i]).0)
            .sum::<f64>()
            / w_total
    };
    let mut trace = vec![loss_of(&logits)];

    for _ in 0..params.n_iterations {
        let probs: Vec<f64> = (0..n)
            .flat_map(|i| softmax(&logits[i * k..(i + 1) * k]))
            .collect();
        let rows: Vec<u32> = if params.subsample < 1.0 {
            (0..n as u32)
                .filter(|_| rng.random::<f64>() < params.subsample)
                .collect()
        } else {
            (0..n as u32).collect()
        };
        let iteration: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let mut grad = vec![0.0; n];
                let mut hess = vec![0.0; n];
                for i in 0..n {
                    let p = probs[i * k + c];
                    let yc = if target[i] == c { 1.0 } else { 0.0 };
                    grad[i] = sample_w[i] * (p - yc);
                    hess[i] = sample_w[i] * (p * (1.0 - p)).max(1e-16);
                }
                tree::grow(&binned, &mapper, rows.clone(), &grad, &hess, &grow)
            })
            .collect();
        for i in 0..n {
            for (c, t) in iteration.iter().enumerate() {
                logits[i * k + c] += t.predict_binned(&binned, i);
            }
        }
        trees.push(iteration);
        trace.push(loss_of(&logits));
    }

    Ok((
        GbtModel {
            params: params.clone(),
            schema_hash: x.schema_hash,
            n_features: x.n_cols,
            classes,
            trees,
        },
        trace,
    ))
}

const MODEL_MAGIC: &[u8; 8] = b"LMGBTMDL";
const MODEL_VERSION: u32 = 1;

impl GbtModel {
    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn params(&self) -> &GbtParams {
        &self.params
    }

    pub fn schema_hash(&self) -> u64 {
        self.schema_hash
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_iterations(&self) -> usize {
        self.trees.len()
    }

    fn check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.schema_hash != self.schema_hash || x.n_cols != self.n_features {
            return Err(Error::Schema(format!(
                "model expects schema {:016x} with {} features, got {:016x} with {}",
                self.schema_hash, self.n_features, x.schema_hash, x.n_cols
            )));
        }
        Ok(())
    }

    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0; self.classes.len()];
        for iteration in &self.trees {
            for (z, t) in logits.iter_mut().zip(iteration) {
                *z += t.predict(row);
            }
        }
        softmax(&logits)
    }

    /// Class probabilities, columns ordered as [`GbtModel::classes`].
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.check(x)?;
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.proba_row(x.row(i)))
            .collect())
    }

    /// Arg-max class ids, ties to the lowest id.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .iter()
            .map(|p| self.classes[argmax_lowest(p)])
            .collect())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        let p = &self.params;
        w.u64(p.n_iterations as u64);
        w.f64(p.learning_rate);
        w.u32(p.max_depth as u32);
        w.u32(p.min_samples_leaf as u32);
        w.u32(p.n_bins as u32);
        w.f64(p.l2_leaf_reg);
        w.f64(p.subsample);
        w.u64(p.seed);
        w.u64(self.schema_hash);
        w.u32(self.n_features as u32);
        w.len_prefixed(self.classes.len());
        self.classes.iter().for_each(|&c| w.u8(c));
        w.len_prefixed(self.trees.len());
        for iteration in &self.trees {
            for t in iteration {
                w.len_prefixed(t.nodes.len());
                for n in &t.nodes {
                    w.u32(n.feature);
                    w.u8(n.bin);
                    w.f64(n.threshold);
                    w.u32(n.left);
                    w.u32(n.right);
                    w.f64(n.value);
                }
            }
        }
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::format(
                "model",
                format!("unsupported version {version}"),
            ));
        }
        let params = GbtParams {
            n_iterations: r.u64()? as usize,
            learning_rate: r.f64()?,
            max_depth: r.u32()? as usize,
            min_samples_leaf: r.u32()? as usize,
            n_bins: r.u32()? as usize,
            l2_leaf_reg: r.f64()?,
            subsample: r.f64()?,
            seed: r.u64()?,
        };
        let schema_hash = r.u64()?;
        let n_features = r.u32()? as usize;
        let n_classes = r.len_prefixed(1)?;
        let classes: Vec<u8> = (0..n_classes).map(|_| r.u8()).collect::<Result<_>>()?;
        let n_iter = r.len_prefixed(4 * n_classes)?;
        let mut trees = Vec::with_capacity(n_iter);
        for _ in 0..n_iter {
            let mut iteration = Vec::with_capacity(n_classes);
            for _ in 0..n_classes {
                let n_nodes = r.len_prefixed(29)?;
                let nodes: Vec<Node> = (0..n_nodes)
                    .map(|_| {
                        Ok(Node {
                            feature: r.u32()?,
                            bin: r.u8()?,
                            threshold: r.f64()?,
                            left: r.u32()?,
                            right: r.u32()?,
                            value: r.f64()?,
                        })
                    })
                    .collect::<Result<_>>()?;
                validate_tree(&nodes, n_features)?;
                iteration.push(Tree { nodes });
            }
            trees.push(iteration);
        }
        Ok(Self {
            params,
            schema_hash,
            n_features,
            classes,
            trees,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_into(&mut w);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model");
        let m = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::data::write_atomic(path.as_ref(), &self.to_bytes()).map(|_| ())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Children must point forward so traversal always terminates.
fn validate_tree(nodes: &[Node], n_features: usize) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::format("model", "empty tree"));
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.feature == LEAF {
            continue;
        }
        let ok = (n.feature as usize) < n_features
            && (n.left as usize) > i
            && (n.right as usize) > i
            && (n.left as usize) < nodes.len()
            && (n.right as usize) < nodes.len();
        if !ok {
            return Err(Error::format("model", format!("invalid tree node {i}")));
        }
    }
    Ok(())
}
