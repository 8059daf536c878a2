//! Accuracy, confusion matrix and per-class precision/recall.

use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Evaluation over the steps that carry a gold label. Classes are 0-based;
/// `confusion[gold][pred]`. With no gold steps `accuracy` is NaN and
/// `no_data` is set; NaN serialises as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    #[serde(with = "nan_as_null")]
    pub accuracy: f64,
    pub no_data: bool,
    pub confusion: Vec<Vec<u64>>,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
}

pub fn evaluate(pred: &[usize], gold: &[Option<usize>], n_classes: usize) -> Result<EvalReport, PipelineError> {
    if pred.len() != gold.len() {
        return Err(PipelineError::LengthMismatch(pred.len(), gold.len()));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (&p, g) in pred.iter().zip(gold) {
        let Some(g) = *g else { continue };
        if p >= n_classes || g >= n_classes {
            return Err(PipelineError::InvalidLabel(format!(
                "class {} outside 0..{n_classes}",
                p.max(g)
            )));
        }
        confusion[g][p] += 1;
    }
    Ok(EvalReport::from_confusion(confusion))
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let k = confusion.len();
        let n: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let precision = (0..k)
            .map(|j| ratio(confusion[j][j], (0..k).map(|i| confusion[i][j]).sum()))
            .collect();
        let recall = (0..k).map(|i| ratio(confusion[i][i], confusion[i].iter().sum())).collect();
        Self {
            n: n as usize,
            accuracy: ratio(correct, n).unwrap_or(f64::NAN),
            no_data: n == 0,
            confusion,
            precision,
            recall,
        }
    }

    /// Pools two reports over the same class set.
    pub fn merge(&self, other: &EvalReport) -> Result<EvalReport, PipelineError> {
        if self.confusion.len() != other.confusion.len() {
            return Err(PipelineError::LengthMismatch(self.confusion.len(), other.confusion.len()));
        }
        let confusion = self
            .confusion
            .iter()
            .zip(&other.confusion)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(Self::from_confusion(confusion))
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_right() {
        let r = evaluate(&[0, 1], &[Some(0), Some(2)], 3).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion[2][1], 1);
        assert_eq!(r.confusion[0][0], 1);
        assert_eq!(r.precision, vec![Some(1.0), Some(0.0), None]);
        assert_eq!(r.recall, vec![Some(1.0), None, Some(0.0)]);
    }

    #[test]
    fn no_data_is_nan_and_null() {
        let r = evaluate(&[1, 0], &[None, None], 2).unwrap();
        assert!(r.no_data && r.accuracy.is_nan());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"accuracy\":null"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert!(back.accuracy.is_nan());
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[0], &[], 2), Err(PipelineError::LengthMismatch(1, 0))));
        assert!(evaluate(&[2], &[Some(0)], 2).is_err());
    }

    proptest! {
        #[test]
        fn confusion_accounts_for_every_gold_step(
            pairs in prop::collection::vec((0usize..4, prop::option::of(0usize..4)), 0..40)
        ) {
            let (pred, gold): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = evaluate(&pred, &gold, 4).unwrap();
            let labelled = gold.iter().filter(|g| g.is_some()).count();
            prop_assert_eq!(r.n, labelled);
            prop_assert_eq!(r.confusion.iter().flatten().sum::<u64>() as usize, labelled);
            if labelled > 0 {
                let hits = pred.iter().zip(&gold).filter(|(p, g)| **g == Some(**p)).count();
                prop_assert!((r.accuracy - hits as f64 / labelled as f64).abs() < 1e-15);
                prop_assert!((0.0..=1.0).contains(&r.accuracy));
            }
            let split = pred.len() / 2;
            let a = evaluate(&pred[..split], &gold[..split], 4).unwrap();
            let b = evaluate(&pred[split..], &gold[split..], 4).unwrap();
            prop_assert_eq!(a.merge(&b).unwrap().confusion, r.confusion);
        }
    }
}
