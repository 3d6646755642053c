//! Per-missing-modality training, K-fold majority voting and the ablation grid.
//!
//! A [`ModelBundle`] holds, for each of the three masks, `K` fold models and
//! one model fitted on every row. A model for mask `m` is trained on windows
//! in which both of `m`'s available modalities are present, i.e. complete
//! windows and windows missing exactly `m`. At prediction time a window is
//! routed by its detected mask; complete windows are scored by all three
//! families and their votes pooled.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{extract_all, AblationConfig, FeatureSchema, WindowFeatures};
use crate::binfmt::{Reader, Writer};
use crate::data::{write_atomic, Location, ModalityKind, ModalityMask, RawWindow};
use crate::error::{Error, Result};
use crate::features::FeatureOptions;
use crate::model::{
    balanced_weights, confusion_matrix, fit, macro_f1, ConfusionMatrix, FeatureMatrix, GbtModel,
    GbtParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub k: usize,
    pub seed: u64,
    pub params: GbtParams,
    pub features: FeatureOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            k: 3,
            seed: 0,
            params: GbtParams::default(),
            features: FeatureOptions::default(),
        }
    }
}

/// Stratified, shuffled K-fold split. Each class is shuffled with the seeded
/// generator, the classes are concatenated in id order and position `i` goes
/// to fold `i mod k`, so fold sizes differ by at most one overall and per
/// class. Returns `(train, test)` index lists, both ascending.
pub fn kfold_split(labels: &[u8], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Validation(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::Validation(format!(
            "cannot split {n} rows into {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: BTreeSet<u8> = labels.iter().copied().collect();
    let mut order = Vec::with_capacity(n);
    for c in classes {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

/// Unstratified split of `0..n`.
pub fn kfold_split_n(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    kfold_split(&vec![0; n], k, seed)
}

/// Majority vote over per-model probability vectors (columns ordered as
/// `classes`). Each model votes for its arg-max (lowest id on ties); the
/// modal class wins, ties go to the highest summed probability and then the
/// lowest id.
pub fn vote(probas: &[Vec<f64>], classes: &[u8]) -> Result<u8> {
    if probas.is_empty() || classes.is_empty() {
        return Err(Error::Validation(
            "vote needs at least one model and one class".into(),
        ));
    }
    let k = classes.len();
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0; k];
    for p in probas {
        if p.len() != k {
            return Err(Error::Shape(format!(
                "{} probabilities for {k} classes",
                p.len()
            )));
        }
        counts[argmax(p)] += 1;
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut best = 0;
    for c in 1..k {
        if counts[c] > counts[best] || (counts[c] == counts[best] && sums[c] > sums[best]) {
            best = c;
        }
    }
    Ok(classes[best])
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn mask_index(mask: ModalityMask) -> usize {
    mask.missing.index()
}

/// Masks whose family scores a window: its own, or all three for a complete
/// window.
fn routes(w: &WindowFeatures) -> Vec<ModalityMask> {
    match w.missing {
        Some(m) => vec![ModalityMask::new(m)],
        None => ModalityMask::ALL.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Fold(usize),
    Full,
}

/// The models trained for one mask.
#[derive(Debug)]
pub struct MaskModels {
    pub mask: ModalityMask,
    pub schema: Arc<FeatureSchema>,
    /// Window ids held out by each fold.
    pub fold_test_ids: Vec<Vec<u64>>,
    pub folds: Vec<GbtModel>,
    pub full: GbtModel,
    /// Rows the full model was fitted on.
    pub n_train: usize,
}

#[derive(Debug, Default)]
struct Usage {
    /// `fold_rows[mask * k + fold]`.
    fold_rows: Vec<AtomicU64>,
    full_rows: [AtomicU64; 3],
    misrouted: AtomicU64,
}

/// Rows scored by each model since training, loading or the last reset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSnapshot {
    /// `fold_rows[mask][fold]`, masks in `Acc, Gyr, Mag` order.
    pub fold_rows: Vec<Vec<u64>>,
    pub full_rows: [u64; 3],
    /// Attempts to score a window with a family it does not belong to.
    pub misrouted: u64,
}

#[derive(Debug)]
pub struct ModelBundle {
    pub config: AblationConfig,
    pub k: usize,
    pub seed: u64,
    pub features: FeatureOptions,
    /// Union of every model's classes, ascending.
    pub classes: Vec<u8>,
    /// Indexed by the missing modality.
    pub masks: Vec<MaskModels>,
    usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub window_id: u64,
    pub missing: Option<ModalityKind>,
    pub label: u8,
}

fn labelled_rows(feats: &[WindowFeatures], mask: ModalityMask) -> (Vec<&WindowFeatures>, Vec<u8>) {
    let rows: Vec<&WindowFeatures> = feats
        .iter()
        .filter(|w| w.label.is_some() && w.supports(mask))
        .collect();
    let labels = rows.iter().map(|w| w.label.unwrap().id()).collect();
    (rows, labels)
}

fn matrix(
    rows: &[&WindowFeatures],
    config: &AblationConfig,
    mask: ModalityMask,
    schema: &FeatureSchema,
) -> Result<FeatureMatrix> {
    let data: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|w| w.assemble(config, mask))
        .collect::<Result<_>>()?;
    FeatureMatrix::new(schema, &data)
}

fn fit_subset(
    x: &[&WindowFeatures],
    y: &[u8],
    idx: &[usize],
    config: &AblationConfig,
    mask: ModalityMask,
    schema: &FeatureSchema,
    params: &GbtParams,
) -> Result<GbtModel> {
    let rows: Vec<&WindowFeatures> = idx.iter().map(|&i| x[i]).collect();
    let labels: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
    let fm = matrix(&rows, config, mask, schema)?;
    fit(&fm, &labels, &balanced_weights(&labels)?, params)
}

/// Train `K` fold models and one full model for every mask.
pub fn train_bundle(
    train: &[WindowFeatures],
    config: &AblationConfig,
    opts: &PipelineOptions,
) -> Result<ModelBundle> {
    let k = opts.k;
    let masks: Vec<MaskModels> = ModalityMask::ALL
        .par_iter()
        .map(|&mask| {
            let (rows, labels) = labelled_rows(train, mask);
            if rows.is_empty() {
                return Err(Error::Validation(format!(
                    "no training windows usable for mask {mask}"
                )));
            }
            let schema = Arc::new(FeatureSchema::for_config(config, mask));
            let splits = kfold_split(&labels, k, opts.seed)?;
            let all: Vec<usize> = (0..rows.len()).collect();
            // Slot k is the full fit.
            let mut models: Vec<GbtModel> = (0..=k)
                .into_par_iter()
                .map(|slot| {
                    let idx = if slot < k { &splits[slot].0 } else { &all };
                    fit_subset(&rows, &labels, idx, config, mask, &schema, &opts.params)
                })
                .collect::<Result<_>>()?;
            let full = models.pop().unwrap();
            Ok(MaskModels {
                mask,
                schema,
                fold_test_ids: splits
                    .iter()
                    .map(|(_, test)| test.iter().map(|&i| rows[i].window_id).collect())
                    .collect(),
                folds: models,
                full,
                n_train: rows.len(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ModelBundle::assemble(
        config.clone(),
        k,
        opts.seed,
        opts.features,
        masks,
    ))
}

/// Extract features from raw windows, then [`train_bundle`].
pub fn train_bundle_raw(
    train: &[RawWindow],
    config: &AblationConfig,
    opts: &PipelineOptions,
) -> Result<ModelBundle> {
    train_bundle(&extract_all(train, opts.features)?, config, opts)
}

impl ModelBundle {
    fn assemble(
        config: AblationConfig,
        k: usize,
        seed: u64,
        features: FeatureOptions,
        masks: Vec<MaskModels>,
    ) -> Self {
        let classes: BTreeSet<u8> = masks
            .iter()
            .flat_map(|m| m.folds.iter().chain([&m.full]))
            .flat_map(|g| g.classes().iter().copied())
            .collect();
        let usage = Usage {
            fold_rows: (0..3 * k).map(|_| AtomicU64::new(0)).collect(),
            ..Usage::default()
        };
        Self {
            config,
            k,
            seed,
            features,
            classes: classes.into_iter().collect(),
            masks,
            usage,
        }
    }

    pub fn model_count(&self) -> usize {
        self.masks.iter().map(|m| m.folds.len() + 1).sum()
    }

    pub fn mask_models(&self, mask: ModalityMask) -> &MaskModels {
        &self.masks[mask_index(mask)]
    }

    pub fn usage(&self) -> UsageSnapshot {
        let load = |a: &AtomicU64| a.load(Ordering::Relaxed);
        UsageSnapshot {
            fold_rows: (0..3)
                .map(|m| {
                    (0..self.k)
                        .map(|f| load(&self.usage.fold_rows[m * self.k + f]))
                        .collect()
                })
                .collect(),
            full_rows: std::array::from_fn(|m| load(&self.usage.full_rows[m])),
            misrouted: load(&self.usage.misrouted),
        }
    }

    pub fn reset_usage(&self) {
        let zero = |a: &AtomicU64| a.store(0, Ordering::Relaxed);
        self.usage.fold_rows.iter().for_each(zero);
        self.usage.full_rows.iter().for_each(zero);
        zero(&self.usage.misrouted);
    }

    fn model(&self, mask: ModalityMask, slot: Slot) -> &GbtModel {
        let mm = &self.masks[mask_index(mask)];
        match slot {
            Slot::Fold(f) => &mm.folds[f],
            Slot::Full => &mm.full,
        }
    }

    fn record(&self, mask: ModalityMask, slot: Slot, rows: usize) {
        let counter = match slot {
            Slot::Fold(f) => &self.usage.fold_rows[mask_index(mask) * self.k + f],
            Slot::Full => &self.usage.full_rows[mask_index(mask)],
        };
        counter.fetch_add(rows as u64, Ordering::Relaxed);
    }

    /// Probabilities in bundle class order for a prebuilt matrix.
    fn score_matrix(
        &self,
        mask: ModalityMask,
        slot: Slot,
        x: &FeatureMatrix,
    ) -> Result<Vec<Vec<f64>>> {
        let model = self.model(mask, slot);
        let local = model.predict_proba(x)?;
        self.record(mask, slot, x.n_rows());
        let cols: Vec<usize> = model
            .classes()
            .iter()
            .map(|c| self.classes.binary_search(c).unwrap())
            .collect();
        Ok(local
            .into_iter()
            .map(|p| {
                let mut out = vec![0.0; self.classes.len()];
                for (j, v) in cols.iter().zip(p) {
                    out[*j] = v;
                }
                out
            })
            .collect())
    }

    /// Score windows with one model of `mask`'s family, refusing any window
    /// that does not belong to that family.
    fn score(
        &self,
        mask: ModalityMask,
        slot: Slot,
        windows: &[&WindowFeatures],
    ) -> Result<Vec<Vec<f64>>> {
        if let Some(w) = windows
            .iter()
            .find(|w| w.missing.is_some_and(|m| m != mask.missing))
        {
            self.usage.misrouted.fetch_add(1, Ordering::Relaxed);
            return Err(Error::Validation(format!(
                "window {} is missing {} but was routed to the {mask} models",
                w.window_id,
                w.missing.unwrap()
            )));
        }
        let mm = &self.masks[mask_index(mask)];
        let x = matrix(windows, &self.config, mask, &mm.schema)?;
        self.score_matrix(mask, slot, &x)
    }

    fn predict_with(&self, windows: &[WindowFeatures], slots: &[Slot]) -> Result<Vec<Prediction>> {
        let mut probas: Vec<Vec<Vec<f64>>> = vec![Vec::new(); windows.len()];
        for mask in ModalityMask::ALL {
            let idx: Vec<usize> = (0..windows.len())
                .filter(|&i| routes(&windows[i]).contains(&mask))
                .collect();
            if idx.is_empty() {
                continue;
            }
            let rows: Vec<&WindowFeatures> = idx.iter().map(|&i| &windows[i]).collect();
            for &slot in slots {
                for (p, &i) in self.score(mask, slot, &rows)?.into_iter().zip(&idx) {
                    probas[i].push(p);
                }
            }
        }
        windows
            .iter()
            .zip(probas)
            .map(|(w, p)| {
                Ok(Prediction {
                    window_id: w.window_id,
                    missing: w.missing,
                    label: vote(&p, &self.classes)?,
                })
            })
            .collect()
    }

    /// Majority vote of the fold models.
    pub fn predict_mv(&self, windows: &[WindowFeatures]) -> Result<Vec<Prediction>> {
        let slots: Vec<Slot> = (0..self.k).map(Slot::Fold).collect();
        self.predict_with(windows, &slots)
    }

    /// Arg-max of the full-fit model.
    pub fn predict_full(&self, windows: &[WindowFeatures]) -> Result<Vec<Prediction>> {
        self.predict_with(windows, &[Slot::Full])
    }

    /// Fold-model probabilities (bundle class order) for rows already
    /// assembled for `mask`, for example read back from an extracted feature
    /// file. The schema must match. Pass each row's list to [`vote`].
    pub fn fold_probas_rows(
        &self,
        mask: ModalityMask,
        schema: &FeatureSchema,
        rows: &[Vec<f64>],
    ) -> Result<Vec<Vec<Vec<f64>>>> {
        let x = FeatureMatrix::new(schema, rows)?;
        let mut probas: Vec<Vec<Vec<f64>>> = vec![Vec::new(); rows.len()];
        for f in 0..self.k {
            for (acc, p) in probas
                .iter_mut()
                .zip(self.score_matrix(mask, Slot::Fold(f), &x)?)
            {
                acc.push(p);
            }
        }
        Ok(probas)
    }

    /// MV predictions on labelled windows, scored overall and per mask.
    pub fn evaluate(&self, windows: &[WindowFeatures]) -> Result<Evaluation> {
        let labelled: Vec<WindowFeatures> = windows
            .iter()
            .filter(|w| w.label.is_some())
            .cloned()
            .collect();
        let pred = self.predict_mv(&labelled)?;
        let truth: Vec<u8> = labelled.iter().map(|w| w.label.unwrap().id()).collect();
        let labels: Vec<u8> = pred.iter().map(|p| p.label).collect();
        let classes = union_classes(&truth, &labels);
        let mut per_mask = Vec::new();
        for mask in ModalityMask::ALL {
            let idx: Vec<usize> = (0..labelled.len())
                .filter(|&i| labelled[i].missing == Some(mask.missing))
                .collect();
            if idx.is_empty() {
                continue;
            }
            let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
            let p: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            per_mask.push(MaskEvaluation {
                mask: mask.to_string(),
                n_windows: idx.len(),
                macro_f1: macro_f1(&t, &p, &classes)?,
                confusion: confusion_matrix(&t, &p, &classes)?,
            });
        }
        Ok(Evaluation {
            n_windows: labelled.len(),
            macro_f1: score_or_none(&truth, &labels)?,
            per_mask,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(BUNDLE_MAGIC);
        w.u32(BUNDLE_VERSION);
        w.str(&self.config.to_string());
        w.u32(self.k as u32);
        w.u64(self.seed);
        w.u8(self.features.znorm as u8);
        for mm in &self.masks {
            w.u8(mm.mask.missing.id());
            w.u64(mm.n_train as u64);
            w.len_prefixed(mm.schema.len());
            mm.schema.names().iter().for_each(|n| w.str(n));
            for ids in &mm.fold_test_ids {
                w.len_prefixed(ids.len());
                ids.iter().for_each(|&id| w.u64(id));
            }
            mm.folds.iter().for_each(|m| m.write_into(&mut w));
            mm.full.write_into(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model bundle");
        r.expect_magic(BUNDLE_MAGIC)?;
        let version = r.u32()?;
        if version != BUNDLE_VERSION {
            return Err(Error::format(
                "model bundle",
                format!("unsupported version {version}"),
            ));
        }
        let config: AblationConfig = r.str()?.parse()?;
        let k = r.u32()? as usize;
        if !(2..=64).contains(&k) {
            return Err(Error::format(
                "model bundle",
                format!("invalid fold count {k}"),
            ));
        }
        let seed = r.u64()?;
        let features = FeatureOptions {
            znorm: r.u8()? != 0,
        };
        let mut masks = Vec::with_capacity(3);
        for expected in ModalityMask::ALL {
            let id = r.u8()?;
            if id != expected.missing.id() {
                return Err(Error::format(
                    "model bundle",
                    format!("unexpected mask id {id}"),
                ));
            }
            let n_train = r.u64()? as usize;
            let n_names = r.len_prefixed(4)?;
            let names = (0..n_names).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
            let schema = Arc::new(FeatureSchema::new(names));
            let fold_test_ids = (0..k)
                .map(|_| {
                    let n = r.len_prefixed(8)?;
                    (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let folds = (0..k)
                .map(|_| GbtModel::read_from(&mut r))
                .collect::<Result<Vec<_>>>()?;
            let full = GbtModel::read_from(&mut r)?;
            for m in folds.iter().chain([&full]) {
                if m.schema_hash() != schema.hash() {
                    return Err(Error::format(
                        "model bundle",
                        "model does not match its schema",
                    ));
                }
            }
            masks.push(MaskModels {
                mask: expected,
                schema,
                fold_test_ids,
                folds,
                full,
                n_train,
            });
        }
        r.finish()?;
        Ok(Self::assemble(config, k, seed, features, masks))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

const BUNDLE_MAGIC: &[u8; 8] = b"LMBUNDLE";
const BUNDLE_VERSION: u32 = 1;

/// Extract features with the bundle's options, then predict by majority vote.
pub fn majority_vote_predict(
    bundle: &ModelBundle,
    windows: &[RawWindow],
) -> Result<Vec<Prediction>> {
    bundle.predict_mv(&extract_all(windows, bundle.features)?)
}

fn union_classes(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter()
        .chain(b)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Macro F1 over the union of true and predicted classes; `None` when empty.
fn score_or_none(truth: &[u8], pred: &[u8]) -> Result<Option<f64>> {
    if truth.is_empty() {
        return Ok(None);
    }
    macro_f1(truth, pred, &union_classes(truth, pred)).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEvaluation {
    pub mask: String,
    pub n_windows: usize,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_windows: usize,
    pub macro_f1: Option<f64>,
    pub per_mask: Vec<MaskEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OofScores {
    /// Macro F1 per mask, `Acc, Gyr, Mag` order.
    pub per_mask: [f64; 3],
    /// `(window_id, true, predicted)` per mask.
    pub predictions: [Vec<(u64, u8, u8)>; 3],
}

/// Score every training window once with the fold model that held it out.
pub fn oof_score(bundle: &ModelBundle, train: &[WindowFeatures]) -> Result<OofScores> {
    let by_id: HashMap<u64, &WindowFeatures> = train.iter().map(|w| (w.window_id, w)).collect();
    let mut per_mask = [0.0; 3];
    let mut predictions: [Vec<(u64, u8, u8)>; 3] = Default::default();
    for mm in &bundle.masks {
        let mi = mask_index(mm.mask);
        for (f, ids) in mm.fold_test_ids.iter().enumerate() {
            let rows: Vec<&WindowFeatures> = ids
                .iter()
                .map(|id| {
                    by_id.get(id).copied().ok_or_else(|| {
                        Error::Validation(format!(
                            "held-out window {id} not among the given windows"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let probas = bundle.score(mm.mask, Slot::Fold(f), &rows)?;
            for (w, p) in rows.iter().zip(probas) {
                let truth = w.label.ok_or_else(|| {
                    Error::Validation(format!("window {} has no label", w.window_id))
                })?;
                predictions[mi].push((w.window_id, truth.id(), bundle.classes[argmax(&p)]));
            }
        }
        let t: Vec<u8> = predictions[mi].iter().map(|p| p.1).collect();
        let p: Vec<u8> = predictions[mi].iter().map(|p| p.2).collect();
        per_mask[mi] = macro_f1(&t, &p, &union_classes(&t, &p))?;
    }
    Ok(OofScores {
        per_mask,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub mask: String,
    pub oof: f64,
    pub val: Option<f64>,
}

/// One configuration's scores, mirroring one row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: AblationConfig,
    /// Full-fit models on all validation windows.
    pub val: Option<f64>,
    /// Fold-model majority vote on all validation windows.
    pub val_mv: Option<f64>,
    pub per_mask: Vec<MaskScores>,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub k: usize,
    pub seed: u64,
    pub n_iterations: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Sorted by overall Val, best first.
    pub rows: Vec<AblationRow>,
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "config",
    "val",
    "val_mv",
    "acc0_oof",
    "acc0_val",
    "gyr0_oof",
    "gyr0_val",
    "mag0_oof",
    "mag0_val",
    "n_features",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl AblationReport {
    pub fn to_tsv(&self) -> String {
        let mut out = REPORT_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}\t{}\t{}", r.config, cell(r.val), cell(r.val_mv));
            for m in &r.per_mask {
                let _ = write!(out, "\t{}\t{}", cell(Some(m.oof)), cell(m.val));
            }
            let _ = writeln!(out, "\t{}", r.n_features);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Write `ablation.tsv` and `ablation.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        Ok(vec![
            write_atomic(&dir.join("ablation.tsv"), self.to_tsv().as_bytes())?,
            write_atomic(&dir.join("ablation.json"), self.to_json().as_bytes())?,
        ])
    }
}

/// Train and score one bundle per configuration.
pub fn run_ablation(
    train: &[WindowFeatures],
    val: &[WindowFeatures],
    configs: &[AblationConfig],
    opts: &PipelineOptions,
) -> Result<AblationReport> {
    if configs.is_empty() {
        return Err(Error::Validation("no configurations to evaluate".into()));
    }
    let val: Vec<WindowFeatures> = val.iter().filter(|w| w.label.is_some()).cloned().collect();
    let truth: Vec<u8> = val.iter().map(|w| w.label.unwrap().id()).collect();
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let bundle = train_bundle(train, config, opts)?;
        let oof = oof_score(&bundle, train)?;
        let full: Vec<u8> = bundle.predict_full(&val)?.iter().map(|p| p.label).collect();
        let mv: Vec<u8> = bundle.predict_mv(&val)?.iter().map(|p| p.label).collect();
        let per_mask = ModalityMask::ALL
            .iter()
            .map(|&mask| {
                let idx: Vec<usize> = (0..val.len())
                    .filter(|&i| val[i].missing == Some(mask.missing))
                    .collect();
                let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
                let p: Vec<u8> = idx.iter().map(|&i| full[i]).collect();
                Ok(MaskScores {
                    mask: mask.to_string(),
                    oof: oof.per_mask[mask_index(mask)],
                    val: score_or_none(&t, &p)?,
                })
            })
            .collect::<Result<_>>()?;
        rows.push(AblationRow {
            config: config.clone(),
            val: score_or_none(&truth, &full)?,
            val_mv: score_or_none(&truth, &mv)?,
            per_mask,
            n_features: bundle.masks[0].schema.len(),
        });
    }
    let mean_oof = |r: &AblationRow| r.per_mask.iter().map(|m| m.oof).sum::<f64>();
    rows.sort_by(|a, b| {
        let key = |r: &AblationRow| r.val.unwrap_or(f64::NEG_INFINITY);
        key(b)
            .total_cmp(&key(a))
            .then(mean_oof(b).total_cmp(&mean_oof(a)))
    });
    Ok(AblationReport {
        k: opts.k,
        seed: opts.seed,
        n_iterations: opts.params.n_iterations,
        n_train: train.len(),
        n_val: val.len(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalFlags {
    pub exclude_hand: bool,
    pub include_validation: bool,
}

/// Training rows for the final model: train minus Hand windows if requested,
/// plus validation windows if requested. Validation ids are shifted past the
/// largest train id so ids stay unique.
pub fn final_training_set(
    train: &[WindowFeatures],
    val: &[WindowFeatures],
    flags: FinalFlags,
) -> Vec<WindowFeatures> {
    let mut rows: Vec<WindowFeatures> = train
        .iter()
        .filter(|w| !(flags.exclude_hand && w.location == Location::Hand))
        .cloned()
        .collect();
    if flags.include_validation {
        let offset = train.iter().map(|w| w.window_id + 1).max().unwrap_or(0);
        rows.extend(val.iter().cloned().map(|mut w| {
            w.window_id += offset;
            w
        }));
    }
    rows
}

pub fn final_model(
    train: &[WindowFeatures],
    val: &[WindowFeatures],
    config: &AblationConfig,
    flags: FinalFlags,
    opts: &PipelineOptions,
) -> Result<ModelBundle> {
    train_bundle(&final_training_set(train, val, flags), config, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthOptions};

    fn small_opts(iters: usize) -> PipelineOptions {
        PipelineOptions {
            params: GbtParams {
                n_iterations: iters,
                min_samples_leaf: 2,
                ..GbtParams::default()
            },
            ..PipelineOptions::default()
        }
    }

    #[test]
    fn nine_into_three() {
        let s = kfold_split_n(9, 3, 1).unwrap();
        let mut all: Vec<usize> = s.iter().flat_map(|(_, t)| t.clone()).collect();
        all.sort();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert!(s.iter().all(|(tr, te)| te.len() == 3 && tr.len() == 6));
        assert_eq!(s, kfold_split_n(9, 3, 1).unwrap());
        assert!(kfold_split_n(2, 3, 0).is_err());
    }

    #[test]
    fn stratified_thirty_each() {
        let labels: Vec<u8> = (0..90).map(|i| (i / 30) as u8 + 1).collect();
        for (_, test) in kfold_split(&labels, 3, 5).unwrap() {
            for c in 1..=3 {
                assert_eq!(test.iter().filter(|&&i| labels[i] == c).count(), 10);
            }
        }
    }

    #[test]
    fn vote_rules() {
        let classes = [1, 2, 3];
        let a = vec![0.8, 0.1, 0.1];
        let b = vec![0.1, 0.8, 0.1];
        assert_eq!(
            vote(&[a.clone(), a.clone(), b.clone()], &classes).unwrap(),
            1
        );
        // One vote each; summed probabilities favour class 2.
        let p1 = vec![0.40, 0.35, 0.25];
        let p2 = vec![0.30, 0.45, 0.25];
        let p3 = vec![0.20, 0.35, 0.45];
        assert_eq!(vote(&[p1, p2, p3], &classes).unwrap(), 2);
        // Identical sums and counts: lowest id.
        assert_eq!(vote(&[a.clone(), b.clone()], &[1, 2, 3]).unwrap(), 1);
        assert_eq!(vote(std::slice::from_ref(&b), &classes).unwrap(), 2);
    }

    #[test]
    fn bundle_round_trip_and_routing() {
        let raw = synth_dataset(&SynthOptions::new(60, 2, 3).masked(true)).unwrap();
        let feats = extract_all(&raw, FeatureOptions::default()).unwrap();
        let config: AblationConfig = "smv".parse().unwrap();
        let bundle = train_bundle(&feats, &config, &small_opts(5)).unwrap();
        assert_eq!(bundle.model_count(), 12);

        let before = bundle.predict_mv(&feats).unwrap();
        let restored = ModelBundle::from_bytes(&bundle.to_bytes()).unwrap();
        assert_eq!(restored.predict_mv(&feats).unwrap(), before);

        let u = restored.usage();
        for mask in ModalityMask::ALL {
            let n = feats
                .iter()
                .filter(|w| w.missing == Some(mask.missing))
                .count() as u64;
            assert!(u.fold_rows[mask_index(mask)].iter().all(|&c| c == n));
            assert_eq!(u.full_rows[mask_index(mask)], 0);
        }
        assert_eq!(u.misrouted, 0);

        let wrong: Vec<&WindowFeatures> = feats
            .iter()
            .filter(|w| w.missing == Some(ModalityKind::Gyr))
            .take(1)
            .collect();
        assert!(restored
            .score(ModalityMask::new(ModalityKind::Acc), Slot::Full, &wrong)
            .is_err());
        assert_eq!(restored.usage().misrouted, 1);
    }

    #[test]
    fn final_training_rows() {
        let raw = synth_dataset(&SynthOptions::new(24, 2, 1)).unwrap();
        let feats = extract_all(&raw, FeatureOptions::default()).unwrap();
        let hands = feats
            .iter()
            .filter(|w| w.location == Location::Hand)
            .count();
        assert!(hands > 0);
        let no_hand = final_training_set(
            &feats,
            &[],
            FinalFlags {
                exclude_hand: true,
                include_validation: false,
            },
        );
        assert_eq!(no_hand.len(), feats.len() - hands);
        let with_val = final_training_set(
            &feats,
            &feats[..5],
            FinalFlags {
                exclude_hand: false,
                include_validation: true,
            },
        );
        assert_eq!(with_val.len(), feats.len() + 5);
        let ids: BTreeSet<u64> = with_val.iter().map(|w| w.window_id).collect();
        assert_eq!(ids.len(), with_val.len());
    }
}
