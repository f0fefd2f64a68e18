use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores with binary labels (`true` = anomalous).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("score {s} is not finite")));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn class_counts(&self) -> (u64, u64) {
        let pos = self.labels.iter().filter(|&&l| l).count() as u64;
        (pos, self.labels.len() as u64 - pos)
    }

    /// Groups of equal scores in ascending score order, as
    /// `(score, positives, negatives)`.
    fn tie_groups(&self) -> Vec<(f64, u64, u64)> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_unstable_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
        let mut groups: Vec<(f64, u64, u64)> = Vec::new();
        for i in order {
            let s = self.scores[i];
            let (p, n) = (u64::from(self.labels[i]), u64::from(!self.labels[i]));
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    g.1 += p;
                    g.2 += n;
                }
                _ => groups.push((s, p, n)),
            }
        }
        groups
    }
}

/// Mann-Whitney estimate of the ROC area, ties counted as one half.
pub fn roc_auc(set: &ScoredSet) -> Result<f64> {
    let (pos, neg) = set.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC AUC needs both classes ({pos} positives, {neg} negatives)"
        )));
    }
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    for (_, p, n) in set.tie_groups() {
        twice_wins += u128::from(p) * (2 * neg_below + u128::from(n));
        neg_below += u128::from(n);
    }
    Ok(twice_wins as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Step-wise average precision over descending score groups.
pub fn average_precision(set: &ScoredSet) -> Result<f64> {
    let (pos, _) = set.class_counts();
    if pos == 0 {
        return Err(Error::UndefinedMetric("average precision needs a positive".into()));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for (_, p, n) in set.tie_groups().into_iter().rev() {
        tp += p;
        fp += n;
        if p > 0 {
            ap += (p as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

/// One ROC point per distinct score, from the highest threshold down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fprs: Vec<f64>,
    pub tprs: Vec<f64>,
}

pub fn roc_curve(set: &ScoredSet) -> Result<RocCurve> {
    let (pos, neg) = set.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("ROC curve needs both classes".into()));
    }
    let mut curve = RocCurve {
        thresholds: vec![f64::INFINITY],
        fprs: vec![0.0],
        tprs: vec![0.0],
    };
    let (mut tp, mut fp) = (0u64, 0u64);
    for (s, p, n) in set.tie_groups().into_iter().rev() {
        tp += p;
        fp += n;
        curve.thresholds.push(s);
        curve.fprs.push(fp as f64 / neg as f64);
        curve.tprs.push(tp as f64 / pos as f64);
    }
    Ok(curve)
}
