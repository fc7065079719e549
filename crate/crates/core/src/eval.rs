//! Regression and thresholded classification metrics.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

pub use crate::data::mean_judgment;
use crate::data::{Dataset, RatioStat, TruthClass, CLICKBAIT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::Prediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    /// NaN when the truth has zero variance.
    pub r2: f64,
    pub r2_defined: bool,
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} truths", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Invalid("no predictions to score".into()));
    }
    Ok(())
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let sae: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    let mean_t = truth.iter().sum::<f64>() / n;
    let sst: f64 = truth.iter().map(|t| (t - mean_t) * (t - mean_t)).sum();
    let mse = sse / n;
    let (r2, r2_defined) = if sst > 0.0 { (1.0 - sse / sst, true) } else { (f64::NAN, false) };
    Ok(RegressionMetrics {
        mse,
        rmse: mse.sqrt(),
        mae: sae / n,
        r2,
        r2_defined,
    })
}

pub fn binarize(score: f64, threshold: f64) -> TruthClass {
    if score >= threshold {
        TruthClass::Clickbait
    } else {
        TruthClass::NoClickbait
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False where the ratio had a zero denominator and was reported as 0.
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, true)
    } else {
        (0.0, false)
    }
}

/// Clickbait is the positive class; scores equal to the threshold count as positive.
pub fn classification_metrics(scores: &[f64], truth: &[TruthClass], threshold: f64) -> Result<ClassificationMetrics> {
    if scores.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} truths", scores.len(), truth.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &t) in scores.iter().zip(truth) {
        match (binarize(s, threshold), t) {
            (TruthClass::Clickbait, TruthClass::Clickbait) => tp += 1,
            (TruthClass::Clickbait, TruthClass::NoClickbait) => fp += 1,
            (TruthClass::NoClickbait, TruthClass::Clickbait) => fn_ += 1,
            _ => {}
        }
    }
    let (precision, precision_defined) = ratio(tp as f64, (tp + fp) as f64);
    let (recall, recall_defined) = ratio(tp as f64, (tp + fn_) as f64);
    let (f1, f1_defined) = ratio(2.0 * precision * recall, precision + recall);
    Ok(ClassificationMetrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f1,
        precision_defined,
        recall_defined,
        f1_defined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    pub r2_defined: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
    pub threshold: f64,
    pub ratio: RatioStat,
}

impl MetricsReport {
    pub fn from_scores(pred: &[f64], truth: &[f64], threshold: f64) -> Result<Self> {
        let reg = regression_metrics(pred, truth)?;
        let classes: Vec<TruthClass> = truth.iter().map(|&t| binarize(t, threshold)).collect();
        let cls = classification_metrics(pred, &classes, threshold)?;
        Ok(MetricsReport {
            n: pred.len(),
            mse: reg.mse,
            rmse: reg.rmse,
            mae: reg.mae,
            r2: reg.r2,
            r2_defined: reg.r2_defined,
            precision: cls.precision,
            recall: cls.recall,
            f1: cls.f1,
            precision_defined: cls.precision_defined,
            recall_defined: cls.recall_defined,
            f1_defined: cls.f1_defined,
            threshold,
            ratio: RatioStat::from_scores(truth.iter().copied()),
        })
    }

    /// Scores predictions against a labelled dataset; every post needs
    /// exactly one prediction and no prediction may be unmatched.
    pub fn evaluate(preds: &[Prediction], truth: &Dataset) -> Result<Self> {
        let mut by_id: HashMap<&str, f64> = HashMap::with_capacity(preds.len());
        for p in preds {
            if by_id.insert(p.id.as_str(), p.clickbait_score).is_some() {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        let targets = truth.targets()?;
        let mut pred = Vec::with_capacity(targets.len());
        for post in truth.posts() {
            let s = by_id
                .remove(post.id.as_str())
                .ok_or_else(|| Error::Invalid(format!("no prediction for `{}`", post.id)))?;
            pred.push(s);
        }
        if let Some(extra) = by_id.keys().next() {
            return Err(Error::Invalid(format!("prediction `{extra}` has no truth")));
        }
        Self::from_scores(&pred, &targets, CLICKBAIT_THRESHOLD)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let flag = |ok: bool| if ok { "" } else { "  (undefined)" };
        let _ = writeln!(s, "n          {}", self.n);
        let _ = writeln!(s, "MSE        {:.4}", self.mse);
        let _ = writeln!(s, "RMSE       {:.4}", self.rmse);
        let _ = writeln!(s, "MAE        {:.4}", self.mae);
        let _ = writeln!(s, "R2         {:.4}{}", self.r2, flag(self.r2_defined));
        let _ = writeln!(s, "Precision  {:.4}{}", self.precision, flag(self.precision_defined));
        let _ = writeln!(s, "Recall     {:.4}{}", self.recall, flag(self.recall_defined));
        let _ = writeln!(s, "F1         {:.4}{}", self.f1, flag(self.f1_defined));
        let _ = writeln!(s, "Ratio      {}", self.ratio.display_ratio());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use TruthClass::*;

    #[test]
    fn hand_computed_pair() {
        let m = regression_metrics(&[0.2, 0.4], &[0.3, 0.8]).unwrap();
        assert_abs_diff_eq!(m.mse, 0.085, epsilon = 1e-15);
        assert_abs_diff_eq!(m.rmse, 0.291_547_594_742_265, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mae, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn perfect_and_mean_predictions() {
        let t = [0.1, 0.5, 0.9];
        let m = regression_metrics(&t, &t).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae, m.r2), (0.0, 0.0, 0.0, 1.0));
        let mean = regression_metrics(&[0.5; 3], &t).unwrap();
        assert_abs_diff_eq!(mean.r2, 0.0, epsilon = 1e-12);
        let flat = regression_metrics(&[0.1, 0.2], &[0.3, 0.3]).unwrap();
        assert!(flat.r2.is_nan() && !flat.r2_defined);
        assert!(regression_metrics(&[], &[]).is_err());
        assert!(regression_metrics(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn threshold_goes_positive() {
        assert_eq!(binarize(0.5, 0.5), Clickbait);
        assert_eq!(binarize(0.4999, 0.5), NoClickbait);
        assert_eq!(binarize(1.0, 0.5), Clickbait);
    }

    #[test]
    fn classification_cases() {
        let c = classification_metrics(&[0.6, 0.4, 0.7, 0.2], &[Clickbait, Clickbait, NoClickbait, NoClickbait], 0.5).unwrap();
        assert_eq!((c.true_positives, c.false_positives, c.false_negatives), (1, 1, 1));
        assert_eq!((c.precision, c.recall, c.f1), (0.5, 0.5, 0.5));
        let all = classification_metrics(&[0.9, 0.1], &[Clickbait, NoClickbait], 0.5).unwrap();
        assert_eq!(all.f1, 1.0);
        let none = classification_metrics(&[0.1, 0.1], &[Clickbait, NoClickbait], 0.5).unwrap();
        assert!(!none.precision_defined && none.f1 == 0.0 && !none.f1_defined);
    }

    proptest! {
        #[test]
        fn power_mean_and_permutation(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..40),
            rot in 0usize..40,
        ) {
            let p: Vec<f64> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<f64> = pairs.iter().map(|x| x.1).collect();
            let m = regression_metrics(&p, &t).unwrap();
            prop_assert!(m.mse >= 0.0 && m.mae >= 0.0);
            prop_assert!(m.mae <= m.rmse + 1e-12);
            prop_assert!((m.rmse - m.mse.sqrt()).abs() <= 1e-12);
            let k = rot % pairs.len();
            let (mut p2, mut t2) = (p.clone(), t.clone());
            p2.rotate_left(k);
            t2.rotate_left(k);
            let m2 = regression_metrics(&p2, &t2).unwrap();
            prop_assert!((m.mse - m2.mse).abs() < 1e-12 && (m.mae - m2.mae).abs() < 1e-12);
        }

        #[test]
        fn extra_true_positive_never_lowers_recall(
            scores in proptest::collection::vec(0.0f64..=1.0, 0..20),
            truth in proptest::collection::vec(proptest::bool::ANY, 0..20),
        ) {
            let n = scores.len().min(truth.len());
            let classes: Vec<TruthClass> = truth[..n].iter().map(|&b| if b { Clickbait } else { NoClickbait }).collect();
            let a = classification_metrics(&scores[..n], &classes, 0.5).unwrap();
            let mut s2 = scores[..n].to_vec();
            let mut c2 = classes.clone();
            s2.push(0.9);
            c2.push(Clickbait);
            let b = classification_metrics(&s2, &c2, 0.5).unwrap();
            prop_assert!(b.recall >= a.recall);
        }
    }
}
