//! Labeled datasets: JSON files, the shipped corpora, and conversion to
//! index form.
//!
//! File layout:
//!
//! ```json
//! {
//!   "vocabulary": ["moon", "shine"],
//!   "role": "train",
//!   "pairs": [{"id": "s1", "sequence": ["moon", "shine"], "label": "Yes"}]
//! }
//! ```
//!
//! `role` and `id` are optional. Words map to neuron indices `1..=V` in
//! vocabulary order.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QsnnError, Result};
use crate::network::{Label, QsnnTopology, WordSequence};
use crate::training::TrainingPair;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    #[default]
    Train,
    Test,
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetRole::Train => "train",
            DatasetRole::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub id: Option<String>,
    pub words: Vec<String>,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    vocabulary: Vec<String>,
    pairs: Vec<LabeledSequence>,
    role: DatasetRole,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    vocabulary: Vec<String>,
    #[serde(default)]
    role: DatasetRole,
    pairs: Vec<PairFile>,
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    sequence: Vec<String>,
    label: String,
}

impl LabeledDataset {
    pub fn new(vocabulary: Vec<String>, pairs: Vec<LabeledSequence>, role: DatasetRole) -> Result<Self> {
        if vocabulary.is_empty() {
            return Err(QsnnError::InvalidConfig("vocabulary is empty".into()));
        }
        for (i, w) in vocabulary.iter().enumerate() {
            if vocabulary[..i].contains(w) {
                return Err(QsnnError::InvalidConfig(format!("word {w:?} listed twice in vocabulary")));
            }
        }
        for (n, p) in pairs.iter().enumerate() {
            if let Some(w) = p.words.iter().find(|w| !vocabulary.contains(w)) {
                return Err(QsnnError::UnknownWord { word: w.clone(), pair: n });
            }
        }
        Ok(LabeledDataset { vocabulary, pairs, role })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn pairs(&self) -> &[LabeledSequence] {
        &self.pairs
    }

    pub fn role(&self) -> DatasetRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    /// 1-based neuron index of `word`.
    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.vocabulary.iter().position(|w| w == word).map(|i| i + 1)
    }

    pub fn topology(&self) -> Result<QsnnTopology> {
        QsnnTopology::fully_connected(self.vocab_size())
    }

    pub fn sequences(&self) -> Vec<WordSequence> {
        self.pairs
            .iter()
            .map(|p| {
                WordSequence(
                    p.words
                        .iter()
                        .map(|w| self.word_index(w).expect("validated on construction"))
                        .collect(),
                )
            })
            .collect()
    }

    pub fn training_pairs(&self) -> Vec<TrainingPair> {
        self.sequences()
            .into_iter()
            .zip(&self.pairs)
            .map(|(sequence, p)| TrainingPair { sequence, label: p.label })
            .collect()
    }

    /// Column identifiers: the explicit id, else the words joined by `-`.
    pub fn ids(&self) -> Vec<String> {
        self.pairs
            .iter()
            .map(|p| p.id.clone().unwrap_or_else(|| p.words.join("-")))
            .collect()
    }

    /// Fails unless `vocabulary` is exactly this dataset's vocabulary.
    pub fn ensure_vocabulary(&self, vocabulary: &[String]) -> Result<()> {
        if self.vocabulary != vocabulary {
            return Err(QsnnError::InvalidConfig(
                "datasets use different vocabularies".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            vocabulary: self.vocabulary.clone(),
            role: self.role,
            pairs: self
                .pairs
                .iter()
                .map(|p| PairFile {
                    id: p.id.clone(),
                    sequence: p.words.clone(),
                    label: p.label.as_str().to_string(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("dataset serializes") + "\n"
    }
}

/// Parses dataset JSON; `origin` only labels error messages.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<LabeledDataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| QsnnError::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let pairs = file
        .pairs
        .into_iter()
        .enumerate()
        .map(|(n, p)| {
            let label = p.label.parse::<Label>().map_err(|_| QsnnError::UnknownLabel {
                label: p.label.clone(),
                pair: n,
            })?;
            Ok(LabeledSequence { id: p.id, words: p.sequence, label })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(file.vocabulary, pairs, file.role)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| QsnnError::io(path, e))?;
    parse_dataset(&text, path)
}

pub fn write_dataset(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset.to_json()).map_err(|e| QsnnError::io(path, e))
}

const ACCELERATE: &str = include_str!("../data/accelerate.json");
const VERSE_TRAIN: &str = include_str!("../data/verse_train.json");
const VERSE_TEST: &str = include_str!("../data/verse_test.json");
const VERSE_CORRUPTED: &str = include_str!("../data/verse_corrupted.json");

pub const BUILTIN_NAMES: [&str; 2] = ["accelerate", "verse-default"];

fn builtin(text: &str, name: &str) -> LabeledDataset {
    parse_dataset(text, Path::new(name)).expect("shipped corpus is valid")
}

/// `(train, test)` for a shipped corpus. The test half of `accelerate` is
/// its training set.
pub fn builtin_corpus(name: &str) -> Result<(LabeledDataset, LabeledDataset)> {
    match name {
        "accelerate" => {
            let train = builtin(ACCELERATE, "accelerate.json");
            let test = LabeledDataset { role: DatasetRole::Test, ..train.clone() };
            Ok((train, test))
        }
        "verse-default" => Ok((
            builtin(VERSE_TRAIN, "verse_train.json"),
            builtin(VERSE_TEST, "verse_test.json"),
        )),
        other => Err(QsnnError::UnknownCorpus(other.to_string())),
    }
}

/// Training set of `name` with some labels flipped, for label-noise runs.
pub fn builtin_corrupted(name: &str) -> Result<LabeledDataset> {
    match name {
        "verse-default" => Ok(builtin(VERSE_CORRUPTED, "verse_corrupted.json")),
        other => Err(QsnnError::UnknownCorpus(format!("{other} (no corrupted set)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn minimal_file_gives_two_pair_task() {
        let text = r#"{"vocabulary": ["w1", "w2"],
            "pairs": [{"sequence": ["w1", "w2"], "label": "Yes"},
                      {"sequence": ["w2", "w1"], "label": "No"}]}"#;
        let d = parse_dataset(text, Path::new("mem")).unwrap();
        assert_eq!(d.role(), DatasetRole::Train);
        assert_eq!(
            d.training_pairs(),
            vec![
                TrainingPair { sequence: WordSequence(vec![1, 2]), label: Label::Yes },
                TrainingPair { sequence: WordSequence(vec![2, 1]), label: Label::No },
            ]
        );
        assert_eq!(d.ids(), strings(&["w1-w2", "w2-w1"]));
    }

    #[test]
    fn empty_pairs_are_allowed() {
        let d = parse_dataset(r#"{"vocabulary": ["a"], "pairs": []}"#, Path::new("mem")).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn unknown_word_is_named() {
        let text = r#"{"vocabulary": ["a"], "pairs": [{"sequence": ["a"], "label": "No"},
            {"sequence": ["a", "zebra"], "label": "Yes"}]}"#;
        match parse_dataset(text, Path::new("mem")) {
            Err(QsnnError::UnknownWord { word, pair }) => {
                assert_eq!(word, "zebra");
                assert_eq!(pair, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_label_is_named() {
        let text = r#"{"vocabulary": ["a"], "pairs": [{"sequence": ["a"], "label": "Maybe"}]}"#;
        assert!(matches!(
            parse_dataset(text, Path::new("mem")),
            Err(QsnnError::UnknownLabel { label, pair: 0 }) if label == "Maybe"
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_dataset("{\"vocabulary\": [\"a\",\n ]}", Path::new("bad.json")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.json") && msg.contains("line 2"), "{msg}");
        let err = parse_dataset(r#"{"vocabulary": ["a"]}"#, Path::new("x.json")).unwrap_err();
        assert!(err.to_string().contains("pairs"));
    }

    #[test]
    fn duplicate_vocabulary_rejected() {
        assert!(LabeledDataset::new(strings(&["a", "a"]), vec![], DatasetRole::Train).is_err());
        assert!(LabeledDataset::new(vec![], vec![], DatasetRole::Train).is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for name in BUILTIN_NAMES {
            let (train, test) = builtin_corpus(name).unwrap();
            for d in [train, test] {
                let path = dir.path().join(format!("{name}-{}.json", d.role()));
                write_dataset(&d, &path).unwrap();
                assert_eq!(load_dataset(&path).unwrap(), d);
            }
        }
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_dataset("/definitely/not/here.json").unwrap_err();
        assert!(matches!(err, QsnnError::Io { .. }));
        assert!(err.to_string().contains("/definitely/not/here.json"));
    }

    #[test]
    fn accelerate_corpus_shape() {
        let (train, test) = builtin_corpus("accelerate").unwrap();
        assert_eq!(train.vocab_size(), 2);
        assert_eq!(train.len(), 2);
        assert_eq!(test.role(), DatasetRole::Test);
        assert_eq!(test.training_pairs(), train.training_pairs());
        assert_eq!(train.training_pairs()[0].sequence, WordSequence(vec![1, 2]));
        assert_eq!(train.training_pairs()[0].label, Label::Yes);
        assert_eq!(train.training_pairs()[1].label, Label::No);
    }

    #[test]
    fn verse_corpus_shape() {
        let (train, test) = builtin_corpus("verse-default").unwrap();
        assert_eq!(train.vocab_size(), 8);
        assert_eq!(train.len(), 12);
        assert_eq!(test.len(), 4);
        assert_eq!(test.role(), DatasetRole::Test);
        test.ensure_vocabulary(train.vocabulary()).unwrap();
        assert!(test.pairs().iter().all(|p| p.label == Label::Yes));
        let ids = test.ids();
        assert_eq!(ids.iter().filter(|i| i.starts_with("verse")).count(), 2);
        assert_eq!(ids.iter().filter(|i| i.starts_with("normal")).count(), 2);
        assert!(train.pairs().iter().any(|p| p.label == Label::Yes));
        assert!(train.pairs().iter().any(|p| p.label == Label::No));
    }

    #[test]
    fn verses_are_unseen_orders() {
        let (train, test) = builtin_corpus("verse-default").unwrap();
        let seen = train.sequences();
        for (p, s) in test.pairs().iter().zip(test.sequences()) {
            if p.id.as_deref().is_some_and(|i| i.starts_with("verse")) {
                assert!(!seen.contains(&s));
                let mut sorted = s.0.clone();
                sorted.sort();
                let reorders_a_yes = train.training_pairs().iter().any(|t| {
                    let mut w = t.sequence.0.clone();
                    w.sort();
                    t.label == Label::Yes && w == sorted
                });
                assert!(reorders_a_yes, "{:?}", p.id);
            }
        }
    }

    #[test]
    fn corrupted_set_only_flips_labels() {
        let (train, _) = builtin_corpus("verse-default").unwrap();
        let bad = builtin_corrupted("verse-default").unwrap();
        assert_eq!(bad.sequences(), train.sequences());
        assert!(bad.pairs().iter().zip(train.pairs()).any(|(a, b)| a.label != b.label));
        crate::training::check_corruption(&train.training_pairs(), &bad.training_pairs()).unwrap();
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(matches!(builtin_corpus("poems"), Err(QsnnError::UnknownCorpus(_))));
        assert!(builtin_corrupted("accelerate").is_err());
    }
}
