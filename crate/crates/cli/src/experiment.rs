//! Multi-sample runs shared by the experiment subcommands.
//!
//! Sample `s` of every model is seeded with `seed ^ s`, so all models start
//! from the same output-rate draw. Samples run in parallel and are gathered
//! in sample order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use qsnn::classical::{classical_train, initial_classical};
use qsnn::network::{QsnnTopology, StageSettings, WordSequence};
use qsnn::report::{summarize, summarize_tracked, SummaryRow, TrackedRow};
use qsnn::training::{
    train, CorrectionSchedule, GradientMethod, InitSpec, Mode, Record, TrainConfig, TrainingPair,
};
use qsnn::{QsnnError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Classical,
    Incoherent,
    Coherent { h_init: f64 },
}

impl ModelKind {
    pub fn name(&self) -> String {
        match self {
            ModelKind::Classical => "classical".into(),
            ModelKind::Incoherent => "incoherent".into(),
            ModelKind::Coherent { h_init } => format!("coherent_h{h_init}"),
        }
    }

    pub fn is_quantum(&self) -> bool {
        !matches!(self, ModelKind::Classical)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Output-rate initialization: a per-sample draw, or one sample per grid
/// value with every rate equal to that value.
#[derive(Clone, Debug, PartialEq)]
pub enum GammaInit {
    Draw(InitSpec),
    Grid(Vec<f64>),
}

impl FromStr for GammaInit {
    type Err = QsnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("grid:") {
            Some(rest) => {
                let values = rest
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| QsnnError::InvalidConfig(format!("cannot parse grid {s:?}")))?;
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(QsnnError::InvalidConfig(format!("bad grid {s:?}")));
                }
                Ok(GammaInit::Grid(values))
            }
            None => Ok(GammaInit::Draw(s.parse()?)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub samples: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub gamma_init: GammaInit,
    pub stages: StageSettings,
    pub models: Vec<ModelKind>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(QsnnError::InvalidConfig("samples must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(QsnnError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.models.is_empty() {
            return Err(QsnnError::InvalidConfig("no models selected".into()));
        }
        for m in &self.models {
            if let ModelKind::Coherent { h_init } = m {
                if !h_init.is_finite() {
                    return Err(QsnnError::InvalidConfig(format!("bad h init {h_init}")));
                }
            }
        }
        self.stages.validate()
    }

    /// `(seed, rate initialization)` per sample. A grid fixes the sample count.
    pub fn sample_plan(&self) -> Vec<(u64, InitSpec)> {
        match &self.gamma_init {
            GammaInit::Draw(spec) => (0..self.samples).map(|s| (self.seed ^ s as u64, spec.clone())).collect(),
            GammaInit::Grid(values) => values
                .iter()
                .enumerate()
                .map(|(s, &v)| (self.seed ^ s as u64, InitSpec::Const(v)))
                .collect(),
        }
    }

    fn train_config(&self, model: ModelKind, seed: u64, gamma_init: InitSpec) -> TrainConfig {
        let (mode, h_init) = match model {
            ModelKind::Coherent { h_init } => (Mode::Coherent, h_init),
            _ => (Mode::Incoherent, 0.0),
        };
        TrainConfig {
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            mode,
            h_init: InitSpec::Const(h_init),
            gamma_init,
            seed,
            gradient_method: GradientMethod::Analytic,
            correction: None,
            stages: self.stages,
            tracked: Vec::new(),
        }
    }
}

/// Training data for one experiment.
#[derive(Clone, Debug)]
pub struct Task {
    pub topology: QsnnTopology,
    pub pairs: Vec<TrainingPair>,
    pub tracked: Vec<WordSequence>,
    pub correction: Option<CorrectionSchedule>,
}

#[derive(Clone, Debug)]
pub struct ModelRun {
    pub model: ModelKind,
    pub histories: Vec<Vec<Record>>,
    pub summary: Vec<SummaryRow>,
    pub tracked: Vec<TrackedRow>,
}

impl ModelRun {
    pub fn mean_loss_at(&self, iteration: usize) -> Option<f64> {
        self.summary.iter().find(|r| r.iteration == iteration).map(|r| r.loss.mean)
    }
}

pub fn run_model(task: &Task, config: &ExperimentConfig, model: ModelKind) -> Result<ModelRun> {
    config.validate()?;
    let plan = config.sample_plan();
    let results: Vec<Result<Vec<Record>>> = plan
        .into_par_iter()
        .map(|(seed, gamma_init)| {
            let mut tc = config.train_config(model, seed, gamma_init);
            tc.tracked = task.tracked.clone();
            tc.correction = task.correction.clone();
            match model {
                ModelKind::Classical => {
                    let nn = initial_classical(&task.topology, &tc)?;
                    Ok(classical_train(&task.topology, nn, &task.pairs, &tc)?.records)
                }
                _ => Ok(train(&task.topology, &task.pairs, &tc)?.records),
            }
        })
        .collect();
    let histories = results.into_iter().collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[Record]> = histories.iter().map(|h| h.as_slice()).collect();
    Ok(ModelRun {
        model,
        summary: summarize(&refs)?,
        tracked: summarize_tracked(&refs)?,
        histories,
    })
}

pub fn run_all(task: &Task, config: &ExperimentConfig) -> Result<Vec<ModelRun>> {
    config.models.iter().map(|&m| run_model(task, config, m)).collect()
}

/// First iteration at or after `from` from which the curve stays within
/// `tol` of its last value.
pub fn settle_iteration(curve: &[(usize, f64)], from: usize, tol: f64) -> Option<usize> {
    let last = curve.last()?.1;
    let mut settled = None;
    for &(iteration, v) in curve.iter().rev() {
        if iteration < from || (v - last).abs() > tol {
            break;
        }
        settled = Some(iteration);
    }
    settled
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsnn::network::Label;

    fn two_pair_task() -> Task {
        Task {
            topology: QsnnTopology::fully_connected(2).unwrap(),
            pairs: vec![
                TrainingPair {
                    sequence: WordSequence(vec![1, 2]),
                    label: Label::Yes,
                },
                TrainingPair {
                    sequence: WordSequence(vec![2, 1]),
                    label: Label::No,
                },
            ],
            tracked: vec![WordSequence(vec![1, 2])],
            correction: None,
        }
    }

    fn config(models: Vec<ModelKind>) -> ExperimentConfig {
        ExperimentConfig {
            samples: 3,
            iterations: 4,
            learning_rate: 0.5,
            seed: 9,
            gamma_init: GammaInit::Draw(InitSpec::Uniform { low: -1.0, high: 1.0 }),
            stages: StageSettings::default(),
            models,
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            "grid:0.1,0.3".parse::<GammaInit>().unwrap(),
            GammaInit::Grid(vec![0.1, 0.3])
        );
        assert_eq!(
            "const:0.2".parse::<GammaInit>().unwrap(),
            GammaInit::Draw(InitSpec::Const(0.2))
        );
        assert!("grid:".parse::<GammaInit>().is_err());
        assert!("grid:a".parse::<GammaInit>().is_err());
        assert!("normal:0:1".parse::<GammaInit>().is_err());
    }

    #[test]
    fn sample_seeds_are_xored() {
        let mut c = config(vec![ModelKind::Incoherent]);
        c.seed = 6;
        let seeds: Vec<u64> = c.sample_plan().iter().map(|p| p.0).collect();
        assert_eq!(seeds, vec![6, 7, 4]);
        c.gamma_init = GammaInit::Grid(vec![0.1, 0.5]);
        let plan = c.sample_plan();
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].1, InitSpec::Const(0.5));
    }

    #[test]
    fn quantum_models_share_initial_loss_when_h_does_not_matter() {
        let mut c = config(vec![ModelKind::Incoherent, ModelKind::Coherent { h_init: 0.0 }]);
        c.samples = 1;
        c.iterations = 0;
        let runs = run_all(&two_pair_task(), &c).unwrap();
        assert_eq!(runs[0].summary.len(), 1);
        assert_eq!(runs[0].histories[0][0].loss, runs[1].histories[0][0].loss);
    }

    #[test]
    fn parallel_matches_serial() {
        let c = config(vec![ModelKind::Coherent { h_init: 0.1 }, ModelKind::Classical]);
        let task = two_pair_task();
        for model in &c.models {
            let run = run_model(&task, &c, *model).unwrap();
            for (s, (seed, gamma_init)) in c.sample_plan().into_iter().enumerate() {
                let mut tc = c.train_config(*model, seed, gamma_init);
                tc.tracked = task.tracked.clone();
                let serial = match model {
                    ModelKind::Classical => {
                        classical_train(&task.topology, initial_classical(&task.topology, &tc).unwrap(), &task.pairs, &tc)
                            .unwrap()
                            .records
                    }
                    _ => train(&task.topology, &task.pairs, &tc).unwrap().records,
                };
                assert_eq!(run.histories[s], serial);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = config(vec![]);
        assert!(c.validate().is_err());
        c.models = vec![ModelKind::Incoherent];
        c.samples = 0;
        assert!(c.validate().is_err());
        c.samples = 1;
        c.learning_rate = -1.0;
        assert!(c.validate().is_err());
        c.learning_rate = 0.1;
        c.stages.t_d = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn settle_points() {
        let curve = [(0, 1.0), (1, 0.5), (2, 0.19), (3, 0.16), (4, 0.15)];
        assert_eq!(settle_iteration(&curve, 0, 0.05), Some(2));
        assert_eq!(settle_iteration(&curve, 3, 0.05), Some(3));
        assert_eq!(settle_iteration(&curve, 0, 0.0), Some(4));
        assert_eq!(settle_iteration(&[], 0, 0.05), None);
        let bump = [(0, 0.1), (1, 0.9), (2, 0.1)];
        assert_eq!(settle_iteration(&bump, 0, 0.05), Some(2));
    }
}
