//! Overlap, agreement and classification metrics, and ROC analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub dice: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    /// Both masks were empty for this class; all scores set to 1.
    pub both_empty: bool,
}

pub fn overlap_from_counts(tp: u64, fp: u64, fn_: u64) -> Overlap {
    if tp + fp + fn_ == 0 {
        return Overlap {
            dice: 1.0,
            jaccard: 1.0,
            precision: 1.0,
            recall: 1.0,
            both_empty: true,
        };
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    Overlap {
        dice: ratio(2 * tp, 2 * tp + fp + fn_),
        jaccard: ratio(tp, tp + fp + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        both_empty: false,
    }
}

/// Overlap of the pixels equal to `class` in two label grids.
pub fn overlap_metrics<T: PartialEq>(pred: &Grid<T>, gt: &Grid<T>, class: &T) -> Result<Overlap> {
    pred.check_dims(gt, "prediction", "ground truth")?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(overlap_from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n: usize,
    pub mae: f64,
    /// Sample standard deviation of the absolute errors.
    pub mae_sd: f64,
    /// `None` when either input has zero variance.
    pub pearson_r: Option<f64>,
    /// ICC(2,1); `None` when undefined.
    pub icc: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

/// Two-way random effects, absolute agreement, single measurement.
pub fn icc_2_1(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let k = 2.0;
    let gm = (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (n * k);
    let ss_total: f64 = a.iter().chain(b).map(|v| (v - gm).powi(2)).sum();
    let ss_rows: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| k * ((x + y) / k - gm).powi(2))
        .sum();
    let ss_cols = n * ((mean(a) - gm).powi(2) + (mean(b) - gm).powi(2));
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);
    let msr = ss_rows / (n - 1.0);
    let msc = ss_cols / (k - 1.0);
    let mse = ss_err / ((n - 1.0) * (k - 1.0));
    let den = msr + (k - 1.0) * mse + k * (msc - mse) / n;
    (den > 0.0).then(|| (msr - mse) / den)
}

pub fn agreement_metrics(auto: &[f64], manual: &[f64]) -> Result<Agreement> {
    if auto.len() != manual.len() {
        return Err(Error::LengthMismatch {
            left: auto.len(),
            right: manual.len(),
        });
    }
    if auto.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "{} pair(s), need at least 3",
            auto.len()
        )));
    }
    let err: Vec<f64> = auto
        .iter()
        .zip(manual)
        .map(|(a, m)| (a - m).abs())
        .collect();
    let mae = mean(&err);
    let var = err.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / (err.len() - 1) as f64;
    Ok(Agreement {
        n: auto.len(),
        mae,
        mae_sd: var.sqrt(),
        pearson_r: pearson(auto, manual),
        icc: icc_2_1(auto, manual),
    })
}

/// Counts indexed by `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// No predictions of this class; precision reported as 0.
    pub no_predictions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

/// Metrics over labels `0..labels.len()`.
pub fn classification_metrics(
    pred: &[usize],
    truth: &[usize],
    labels: &[&str],
) -> Result<Classification> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InsufficientSamples("no samples".into()));
    }
    let k = labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::InvalidParameter(format!(
                "label {} outside 0..{k}",
                p.max(t)
            )));
        }
        counts[t][p] += 1;
    }
    let confusion = ConfusionMatrix {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        counts,
    };
    let correct: u64 = (0..k).map(|c| confusion.counts[c][c]).sum();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion.counts[c][c] as f64;
            let predicted = confusion.col_sum(c);
            let support = confusion.row_sum(c);
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if support == 0 {
                0.0
            } else {
                tp / support as f64
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: labels[c].to_string(),
                precision,
                recall,
                f1,
                support,
                no_predictions: predicted == 0,
            }
        })
        .collect();
    let macro_of = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(Classification {
        accuracy: correct as f64 / pred.len() as f64,
        macro_precision: macro_of(|m| m.precision),
        macro_recall: macro_of(|m| m.recall),
        macro_f1: macro_of(|m| m.f1),
        per_class,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Youden {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Distinct scores, descending; a sample is called positive when its
    /// score is at least the threshold.
    pub thresholds: Vec<f64>,
    /// `(fpr, tpr)`: the origin followed by one point per threshold.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub youden_best: Youden,
}

pub fn roc(scores: &[(f64, bool)]) -> Result<RocResult> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    if scores.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::InvalidParameter("non-finite score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut thresholds = Vec::new();
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(t);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    let mut best: Option<Youden> = None;
    for (t, &(fpr, tpr)) in thresholds.iter().zip(&points[1..]) {
        let y = Youden {
            threshold: *t,
            sensitivity: tpr,
            specificity: 1.0 - fpr,
            index: tpr - fpr,
        };
        let better = match &best {
            None => true,
            Some(b) => y.index > b.index || (y.index == b.index && y.sensitivity > b.sensitivity),
        };
        if better {
            best = Some(y);
        }
    }
    Ok(RocResult {
        thresholds,
        points,
        auc,
        youden_best: best.expect("at least one threshold"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_covered() {
        let gt = Grid::from_fn(4, 4, |y, _| y < 2);
        let pred = Grid::from_fn(4, 4, |y, _| y < 1);
        let o = overlap_metrics(&pred, &gt, &true).unwrap();
        assert_eq!((o.recall, o.precision, o.jaccard), (0.5, 1.0, 0.5));
        assert!((o.dice - 2.0 / 3.0).abs() < 1e-15);
        let e = overlap_metrics(&pred, &pred, &true).unwrap();
        assert_eq!(e.dice, 1.0);
    }

    #[test]
    fn empty_vs_empty() {
        let g = Grid::filled(3, 3, 0u8);
        let o = overlap_metrics(&g, &g, &4u8).unwrap();
        assert!(o.both_empty && o.dice == 1.0 && o.recall == 1.0);
    }

    #[test]
    fn agreement_identity_and_offset() {
        let a = [1.0, 4.0, 2.0, 8.0, 5.0];
        let s = agreement_metrics(&a, &a).unwrap();
        assert_eq!((s.mae, s.pearson_r, s.icc), (0.0, Some(1.0), Some(1.0)));
        let b: Vec<f64> = a.iter().map(|v| v + 2.0).collect();
        let s = agreement_metrics(&b, &a).unwrap();
        assert_eq!(s.mae, 2.0);
        assert!((s.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        assert!(s.icc.unwrap() < 1.0);
        assert!(agreement_metrics(&a, &a[..3]).is_err());
    }

    #[test]
    fn hand_counted_classification() {
        let c = classification_metrics(&[0, 1, 1, 1], &[0, 0, 1, 1], &["neg", "pos"]).unwrap();
        assert_eq!(c.accuracy, 0.75);
        let p = &c.per_class[1];
        assert!((p.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.recall, 1.0);
        assert!((p.f1 - 0.8).abs() < 1e-15);
        assert_eq!(c.confusion.counts, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn roc_cases() {
        let sep = roc(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]).unwrap();
        assert_eq!(sep.auc, 1.0);
        assert_eq!(sep.youden_best.index, 1.0);
        assert_eq!(sep.youden_best.threshold, 0.8);
        let flat = roc(&[(0.5, true), (0.5, false), (0.5, true)]).unwrap();
        assert_eq!(flat.auc, 0.5);
        assert!(matches!(roc(&[(0.1, true)]), Err(Error::SingleClass)));
    }
}
