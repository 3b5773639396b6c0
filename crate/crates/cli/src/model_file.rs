//! Trained-parameter files written by `train` and read by `eval`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qsnn::classical::{classical_p_yes, ClassicalNN};
use qsnn::network::{forward, QsnnParameters, QsnnTopology, StageSettings, WordSequence};
use qsnn::{QsnnError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Coherent { params: QsnnParameters },
    Incoherent { params: QsnnParameters },
    Classical { network: ClassicalNN, stages: StageSettings },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub vocabulary: Vec<String>,
    #[serde(flatten)]
    pub model: SavedModel,
}

/// Output probabilities of one sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub p_yes: f64,
    pub p_no: f64,
    pub p_undetermined: f64,
}

impl ModelFile {
    pub fn topology(&self) -> Result<QsnnTopology> {
        QsnnTopology::fully_connected(self.vocabulary.len())
    }

    pub fn validate(&self) -> Result<()> {
        let topology = self.topology()?;
        match &self.model {
            SavedModel::Coherent { params } | SavedModel::Incoherent { params } => params.validate(&topology),
            SavedModel::Classical { network, stages } => {
                network.validate()?;
                if network.inputs() != self.vocabulary.len() {
                    return Err(QsnnError::InvalidParameters(format!(
                        "classical network has {} inputs for {} words",
                        network.inputs(),
                        self.vocabulary.len()
                    )));
                }
                stages.validate()
            }
        }
    }

    pub fn predict(&self, seq: &WordSequence) -> Result<Prediction> {
        let topology = self.topology()?;
        match &self.model {
            SavedModel::Coherent { params } | SavedModel::Incoherent { params } => {
                let r = forward(&topology, params, seq)?;
                Ok(Prediction {
                    p_yes: r.p_yes,
                    p_no: r.p_no,
                    p_undetermined: r.p_undetermined,
                })
            }
            SavedModel::Classical { network, stages } => {
                let p_yes = classical_p_yes(&topology, network, stages, seq)?;
                Ok(Prediction {
                    p_yes,
                    p_no: 1.0 - p_yes,
                    p_undetermined: 0.0,
                })
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("model files serialize");
        fs::write(path, text + "\n").map_err(|e| QsnnError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QsnnError::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| QsnnError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let topology = QsnnTopology::fully_connected(2).unwrap();
        let params = QsnnParameters::new(
            &topology,
            vec![std::f64::consts::PI / 7.0],
            vec![0.123456789012345, -0.7, 1.0 / 3.0, 2f64.sqrt()],
            StageSettings::default(),
        )
        .unwrap();
        let file = ModelFile {
            vocabulary: vocab(),
            model: SavedModel::Coherent { params },
        };
        file.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, file);
        let seq = WordSequence(vec![1, 2]);
        assert_eq!(back.predict(&seq).unwrap(), file.predict(&seq).unwrap());
    }

    #[test]
    fn classical_predictions_sum_to_one() {
        let file = ModelFile {
            vocabulary: vocab(),
            model: SavedModel::Classical {
                network: ClassicalNN::new([vec![0.5, -0.5], vec![1.0, 0.2]], [0.0, 0.1]).unwrap(),
                stages: StageSettings::default(),
            },
        };
        let p = file.predict(&WordSequence(vec![2, 1])).unwrap();
        assert_eq!(p.p_undetermined, 0.0);
        assert!((p.p_yes + p.p_no - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let file = ModelFile {
            vocabulary: vocab(),
            model: SavedModel::Classical {
                network: ClassicalNN::zeros(3),
                stages: StageSettings::default(),
            },
        };
        file.save(&path).unwrap();
        assert!(matches!(ModelFile::load(&path), Err(QsnnError::InvalidParameters(_))));
        fs::write(&path, "{\"kind\": \"coherent\"}").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(QsnnError::Parse { .. })));
    }
}
