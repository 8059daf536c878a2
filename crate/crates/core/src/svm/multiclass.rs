//! One-vs-rest composition of binary machines with the feature subset and
//! scaler baked in, so a model maps raw feature vectors to labels on its own.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelMatrix, PolyKernel};
use super::smo::{default_max_iter, solve_smo, validate_rows, BinarySvm};
use super::SvmError;
use crate::selection::{FeatureSubset, LabeledDataset};

pub const SVM_FORMAT: &str = "engage-svm";
pub const SVM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub degree: u32,
    /// `None` means 1 / (number of input features after subsetting).
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            degree: 3,
            gamma: None,
            coef0: 1.0,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

/// Per-feature z-score standardisation fitted on training rows. Constant
/// features are centred but not rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub machines: Vec<BinarySvm>,
    pub scaler: Scaler,
    pub feature_subset: Option<FeatureSubset>,
    /// Dimension of the raw vectors the model accepts.
    pub input_dim: usize,
}

/// Trains one machine per class against all other classes.
///
/// Classes are ordered as in [`LabeledDataset::class_set`]. The Gram matrix
/// is shared by all machines since they see the same rows.
pub fn train_multiclass(data: &LabeledDataset, cfg: &SvmConfig, subset: Option<FeatureSubset>) -> Result<SvmModel, SvmError> {
    let classes = data.class_set();
    if classes.len() < 2 {
        return Err(SvmError::SingleClassInput);
    }
    for class in &classes {
        let size = data.rows.iter().filter(|r| &r.label == class).count();
        if size < 2 {
            return Err(SvmError::ClassTooSmall {
                class: class.clone(),
                size,
            });
        }
    }
    let input_dim = data.dim();
    if let Some(s) = &subset {
        if let Some(&bad) = s.indices.iter().find(|&&i| i >= input_dim) {
            return Err(SvmError::DimensionMismatch {
                expected: input_dim,
                got: bad + 1,
            });
        }
    }
    let raw: Vec<Vec<f64>> = data.rows.iter().map(|r| r.features.clone()).collect();
    validate_rows(&raw)?;

    let selected: Vec<Vec<f64>> = match &subset {
        Some(s) => raw.iter().map(|r| s.apply(r)).collect(),
        None => raw,
    };
    let scaler = Scaler::fit(&selected);
    let x: Vec<Vec<f64>> = selected.iter().map(|r| scaler.transform(r)).collect();
    let dim = x[0].len().max(1);
    let kernel = PolyKernel {
        degree: cfg.degree,
        gamma: cfg.gamma.unwrap_or(1.0 / dim as f64),
        coef0: cfg.coef0,
    };
    let gram = KernelMatrix::new(&kernel, &x);
    let max_iter = cfg.max_iter.unwrap_or_else(|| default_max_iter(x.len()));

    let machines = classes
        .iter()
        .map(|class| {
            let y: Vec<f64> = data.rows.iter().map(|r| if &r.label == class { 1.0 } else { -1.0 }).collect();
            let sol = solve_smo(&gram, &y, cfg.c, cfg.tol, max_iter)?;
            Ok(BinarySvm::from_solution(&sol, &x, &y, kernel, cfg.c))
        })
        .collect::<Result<Vec<_>, SvmError>>()?;

    Ok(SvmModel {
        format: SVM_FORMAT.into(),
        version: SVM_VERSION,
        classes,
        machines,
        scaler,
        feature_subset: subset,
        input_dim,
    })
}

impl SvmModel {
    /// Subset and scale a raw vector into the machines' input space.
    pub fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        if x.len() != self.input_dim {
            return Err(SvmError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(match &self.feature_subset {
            Some(s) => self.scaler.transform(&s.apply(x)),
            None => self.scaler.transform(x),
        })
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        let z = self.prepare(x)?;
        Ok(self.machines.iter().map(|m| m.decision(&z)).collect())
    }

    /// Index into `classes` of the largest decision value; the earliest
    /// class wins ties.
    pub fn predict_index(&self, x: &[f64]) -> Result<usize, SvmError> {
        let values = self.decision_values(x)?;
        let mut best = 0;
        for (i, &v) in values.iter().enumerate().skip(1) {
            if v > values[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str, SvmError> {
        Ok(&self.classes[self.predict_index(x)?])
    }

    /// Prediction for a model trained on integer level labels.
    pub fn predict_level(&self, x: &[f64]) -> Result<u32, SvmError> {
        let label = self.predict(x)?;
        label.parse().map_err(|_| SvmError::LabelNotLevel(label.to_string()))
    }

    /// Integer levels of all classes, in class order.
    pub fn levels(&self) -> Result<Vec<u32>, SvmError> {
        self.classes
            .iter()
            .map(|c| c.parse().map_err(|_| SvmError::LabelNotLevel(c.clone())))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, SvmError> {
        let model: Self = serde_json::from_str(s).map_err(|e| SvmError::UnsupportedModel(e.to_string()))?;
        if model.format != SVM_FORMAT || model.version != SVM_VERSION {
            return Err(SvmError::UnsupportedModel(format!("{} v{}", model.format, model.version)));
        }
        if model.machines.len() != model.classes.len() || model.classes.len() < 2 {
            return Err(SvmError::UnsupportedModel("machine count does not match classes".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{FeatureSubset, LabeledRow};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, per_class: usize) -> LabeledDataset {
        let centers = [(-4.0, 0.0), (4.0, 0.0), (0.0, 5.0)];
        let noise = Normal::new(0.0, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for i in 0..per_class {
                rows.push(LabeledRow {
                    id: format!("{c}-{i}"),
                    features: vec![cx + noise.sample(&mut rng), cy + noise.sample(&mut rng), 1.0],
                    label: ["a", "b", "c"][c].into(),
                    speaker: "s".into(),
                    group: "g".into(),
                });
            }
        }
        LabeledDataset::new(rows).unwrap()
    }

    fn accuracy(model: &SvmModel, data: &LabeledDataset) -> f64 {
        let hits = data
            .rows
            .iter()
            .filter(|r| model.predict(&r.features).unwrap() == r.label)
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn three_blobs() {
        let data = blobs(1, 100);
        let model = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        assert_eq!(model.classes, ["a", "b", "c"]);
        assert!(accuracy(&model, &data) >= 0.99);
        assert_eq!(model.predict(&[-4.0, 0.0, 1.0]).unwrap(), "a");
        assert_eq!(model.predict(&[0.0, 5.0, 1.0]).unwrap(), "c");
    }

    #[test]
    fn two_classes_give_mirrored_machines() {
        let mut data = blobs(2, 30);
        data.rows.retain(|r| r.label != "c");
        let model = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        for r in &data.rows {
            let v = model.decision_values(&r.features).unwrap();
            assert!(v[0].signum() == -v[1].signum());
            assert!((v[0] + v[1]).abs() < 1e-2, "{v:?}");
        }
    }

    #[test]
    fn exact_tie_goes_to_first_class() {
        let mut data = blobs(3, 20);
        data.rows.retain(|r| r.label != "c");
        let mut model = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        model.machines[1] = model.machines[0].clone();
        assert_eq!(model.predict(&[0.0, 0.0, 1.0]).unwrap(), "a");
    }

    #[test]
    fn errors() {
        let data = blobs(4, 10);
        let model = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        assert_eq!(
            model.predict(&[1.0]),
            Err(SvmError::DimensionMismatch { expected: 3, got: 1 })
        );
        assert!(matches!(
            model.predict_level(&[0.0, 0.0, 1.0]),
            Err(SvmError::LabelNotLevel(_))
        ));

        let mut tiny = data.clone();
        tiny.rows.retain(|r| r.label != "c" || r.id == "2-0");
        assert_eq!(
            train_multiclass(&tiny, &SvmConfig::default(), None),
            Err(SvmError::ClassTooSmall {
                class: "c".into(),
                size: 1
            })
        );
    }

    #[test]
    fn subset_and_serialisation_round_trip() {
        let data = blobs(5, 25);
        let subset = FeatureSubset {
            indices: vec![1, 0],
            weights: vec![0.9, 0.8],
        };
        let model = train_multiclass(&data, &SvmConfig::default(), Some(subset)).unwrap();
        let back = SvmModel::from_json(&model.to_json()).unwrap();
        for r in &data.rows {
            let a = model.decision_values(&r.features).unwrap();
            let b = back.decision_values(&r.features).unwrap();
            assert_eq!(
                a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
        let bad = model.to_json().replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(SvmModel::from_json(&bad), Err(SvmError::UnsupportedModel(_))));
    }

    #[test]
    fn relabelling_permutes_predictions() {
        let data = blobs(6, 30);
        let rename = |l: &str| match l {
            "a" => "z",
            "b" => "m",
            _ => "b",
        };
        let mut renamed = data.clone();
        for r in &mut renamed.rows {
            r.label = rename(&r.label).into();
        }
        let m1 = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        let m2 = train_multiclass(&renamed, &SvmConfig::default(), None).unwrap();
        for x in [[-3.0, 0.5, 1.0], [3.5, -0.5, 1.0], [0.2, 4.0, 1.0], [0.0, 1.5, 1.0]] {
            assert_eq!(rename(m1.predict(&x).unwrap()), m2.predict(&x).unwrap());
        }
    }

    #[test]
    fn levels() {
        let mut data = blobs(7, 20);
        for r in &mut data.rows {
            r.label = match r.label.as_str() {
                "a" => "1",
                "b" => "2",
                _ => "3",
            }
            .into();
        }
        let model = train_multiclass(&data, &SvmConfig::default(), None).unwrap();
        assert_eq!(model.levels().unwrap(), vec![1, 2, 3]);
        assert!((1..=3).contains(&model.predict_level(&[4.0, 0.0, 1.0]).unwrap()));
    }
}
