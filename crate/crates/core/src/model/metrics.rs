use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[i][j]`: true class `classes[i]` predicted as `classes[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u8>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        match self.total() {
            0 => 0.0,
            t => diag as f64 / t as f64,
        }
    }
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8], classes: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let index = |c: u8| {
        classes
            .iter()
            .position(|&k| k == c)
            .ok_or_else(|| Error::Validation(format!("class {c} not in {classes:?}")))
    };
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// F1 per class; a class with no true and no predicted samples scores 0.
pub fn per_class_f1(y_true: &[u8], y_pred: &[u8], classes: &[u8]) -> Result<Vec<f64>> {
    let cm = confusion_matrix(y_true, y_pred, classes)?;
    let k = classes.len();
    Ok((0..k)
        .map(|i| {
            let tp = cm.counts[i][i] as f64;
            let fn_: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| cm.counts[i][j] as f64)
                .sum();
            let fp: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| cm.counts[j][i] as f64)
                .sum();
            let denom = 2.0 * tp + fp + fn_;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect())
}

/// Unweighted mean of the per-class F1 over `classes`.
pub fn macro_f1(y_true: &[u8], y_pred: &[u8], classes: &[u8]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::Validation(
            "macro F1 needs at least one class".into(),
        ));
    }
    let f = per_class_f1(y_true, y_pred, classes)?;
    Ok(f.iter().sum::<f64>() / f.len() as f64)
}
