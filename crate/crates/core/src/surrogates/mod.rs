//! Classifiers other than the MLP, and a common interface.

mod knn;
mod logreg;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use knn::{train_knn, KnnModel, DEFAULT_K};
pub use logreg::{objective, train_logreg, LogRegModel, DEFAULT_C, MAX_ITERATIONS, TOLERANCE};

use crate::error::{Error, Result};
use crate::nn::MlpModel;

/// Anything that maps an encoded row to a class.
pub trait Classifier: Sync {
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

impl Classifier for MlpModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        MlpModel::predict(self, x)
    }
}

impl Classifier for LogRegModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        LogRegModel::predict(self, x)
    }
}

impl Classifier for KnnModel {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        KnnModel::predict(self, x)
    }
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Mlp(MlpModel),
    LogReg(LogRegModel),
    Knn(KnnModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::LogReg(_) => "logreg",
            Model::Knn(_) => "knn",
        }
    }

    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            Model::Mlp(m) => m,
            Model::LogReg(m) => m,
            Model::Knn(m) => m,
        }
    }

    pub fn as_mlp(&self) -> Option<&MlpModel> {
        match self {
            Model::Mlp(m) => Some(m),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Envelope {
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("models serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let envelope: Envelope = serde_json::from_str(text)?;
        if envelope.version != MODEL_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported model version {}",
                envelope.version
            )));
        }
        Ok(envelope.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text).map_err(|e| Error::json(path, e))
    }
}

impl Classifier for Model {
    fn predict(&self, x: &[f64]) -> Result<usize> {
        self.as_classifier().predict(x)
    }
}

/// Fraction of rows a classifier labels correctly.
pub fn accuracy_of(model: &dyn Classifier, rows: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut correct = 0;
    for (x, &y) in rows.iter().zip(labels) {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_round_trips_bit_exactly() {
        let mut mlp = MlpModel::init(&[4, 3, 2], 9).unwrap();
        mlp.weights[0][0] = 0.1 + 0.2;
        let model = Model::Mlp(mlp);
        let text = model.to_json();
        assert!(text.contains("\"kind\":\"mlp\"") && text.contains("\"version\":1"));
        let back = Model::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = Model::Mlp(MlpModel::init(&[2, 2], 1).unwrap())
            .to_json()
            .replace("\"version\":1", "\"version\":9");
        assert!(Model::from_json(&text).is_err());
    }
}
