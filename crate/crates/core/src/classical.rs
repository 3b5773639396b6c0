//! Affine + softmax comparison network.
//!
//! The input is the vector of word-neuron populations after the input stage,
//! so both model families see the same encoding. Outputs are ordered
//! `(y_no, y_yes)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QsnnError, Result};
use crate::network::{Label, QsnnTopology, StageSettings, WordSequence};
use crate::training::{
    check_corruption, encode_pairs, encode_sequences, loss_from_success, Record, TrainConfig, TrainingHistory,
    TrainingPair,
};

const NO: usize = 0;
const YES: usize = 1;

fn output_row(label: Label) -> usize {
    match label {
        Label::No => NO,
        Label::Yes => YES,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalNN {
    /// `weights[o][i]`, output `o` in `(No, Yes)` order.
    pub weights: [Vec<f64>; 2],
    pub biases: [f64; 2],
}

impl ClassicalNN {
    pub fn new(weights: [Vec<f64>; 2], biases: [f64; 2]) -> Result<Self> {
        let nn = ClassicalNN { weights, biases };
        nn.validate()?;
        Ok(nn)
    }

    pub fn zeros(inputs: usize) -> Self {
        ClassicalNN {
            weights: [vec![0.0; inputs], vec![0.0; inputs]],
            biases: [0.0; 2],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights[0].len() != self.weights[1].len() {
            return Err(QsnnError::InvalidParameters("weight rows differ in length".into()));
        }
        if self.weights.iter().flatten().chain(&self.biases).any(|v| !v.is_finite()) {
            return Err(QsnnError::InvalidParameters("non-finite classical parameter".into()));
        }
        Ok(())
    }
}

/// One input vector with its label.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalSample {
    pub x: Vec<f64>,
    pub label: Label,
}

pub fn word_populations(rho_in: &crate::linalg::ComplexMatrix, vocab_size: usize) -> Vec<f64> {
    (1..=vocab_size).map(|w| rho_in.get(w, w).re).collect()
}

pub fn classical_inputs(
    topology: &QsnnTopology,
    stages: &StageSettings,
    pairs: &[TrainingPair],
) -> Result<Vec<ClassicalSample>> {
    Ok(encode_pairs(topology, stages, pairs)?
        .into_iter()
        .map(|e| ClassicalSample {
            x: word_populations(&e.rho_in, topology.vocab_size()),
            label: e.label,
        })
        .collect())
}

/// `softmax(W x + b)` as `(y_no, y_yes)`.
pub fn classical_forward(nn: &ClassicalNN, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != nn.inputs() {
        return Err(QsnnError::DimensionMismatch(format!(
            "classical input has length {}, network expects {}",
            x.len(),
            nn.inputs()
        )));
    }
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(QsnnError::InvalidParameters("populations must be finite and non-negative".into()));
    }
    let z: Vec<f64> = (0..2)
        .map(|o| nn.biases[o] + nn.weights[o].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect();
    let top = z[0].max(z[1]);
    let e0 = (z[0] - top).exp();
    let e1 = (z[1] - top).exp();
    Ok((e0 / (e0 + e1), e1 / (e0 + e1)))
}

fn label_output(nn: &ClassicalNN, s: &ClassicalSample) -> Result<f64> {
    let (no, yes) = classical_forward(nn, &s.x)?;
    Ok(match s.label {
        Label::No => no,
        Label::Yes => yes,
    })
}

/// `1 − (1/N) Σ l_s · y_s`.
pub fn classical_loss(nn: &ClassicalNN, data: &[ClassicalSample]) -> Result<f64> {
    let y = data.iter().map(|s| label_output(nn, s)).collect::<Result<Vec<_>>>()?;
    loss_from_success(&y)
}

/// Gradient of [`classical_loss`], laid out like the network itself.
pub fn classical_gradient(nn: &ClassicalNN, data: &[ClassicalSample]) -> Result<ClassicalNN> {
    if data.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut g = ClassicalNN::zeros(nn.inputs());
    for s in data {
        let (no, yes) = classical_forward(nn, &s.x)?;
        let y = [no, yes];
        let c = output_row(s.label);
        for j in 0..2 {
            let kron = if j == c { 1.0 } else { 0.0 };
            let dz = -y[c] * (kron - y[j]) / n;
            g.biases[j] += dz;
            for (gw, xv) in g.weights[j].iter_mut().zip(&s.x) {
                *gw += dz * xv;
            }
        }
    }
    Ok(g)
}

fn step(nn: &ClassicalNN, g: &ClassicalNN, eta: f64) -> ClassicalNN {
    let mut next = nn.clone();
    for o in 0..2 {
        next.biases[o] -= eta * g.biases[o];
        for (w, gw) in next.weights[o].iter_mut().zip(&g.weights[o]) {
            *w -= eta * gw;
        }
    }
    next
}

/// Same random stream as the output rates of the quantum model:
/// `weights[o][i]` takes the draw for channel `word i → output o`.
pub fn initial_classical(topology: &QsnnTopology, config: &TrainConfig) -> Result<ClassicalNN> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draws = config.gamma_init.draw(topology.output_channels().len(), &mut rng)?;
    let mut nn = ClassicalNN::zeros(topology.vocab_size());
    for (c, v) in topology.output_channels().iter().zip(draws) {
        nn.weights[output_row(c.output)][c.word - 1] = v;
    }
    nn.validate()?;
    Ok(nn)
}

/// Gradient descent from `nn`. Uses the learning rate, iteration count,
/// correction schedule and tracked sequences of `config`.
pub fn classical_train(
    topology: &QsnnTopology,
    nn: ClassicalNN,
    dataset: &[TrainingPair],
    config: &TrainConfig,
) -> Result<TrainingHistory<ClassicalNN>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    nn.validate()?;
    let clean = classical_inputs(topology, &config.stages, dataset)?;
    let corrupted = match &config.correction {
        Some(c) => {
            check_corruption(dataset, &c.corrupted)?;
            Some((classical_inputs(topology, &config.stages, &c.corrupted)?, c.correct_at))
        }
        None => None,
    };
    let tracked: Vec<Vec<f64>> = encode_sequences(topology, &config.stages, &config.tracked)?
        .iter()
        .map(|rho| word_populations(rho, topology.vocab_size()))
        .collect();

    let mut nn = nn;
    let mut records = Vec::with_capacity(config.iterations + 1);
    for iteration in 0..=config.iterations {
        let active = match &corrupted {
            Some((data, at)) if iteration < *at => data,
            _ => &clean,
        };
        let loss = classical_loss(&nn, active)?;
        if !loss.is_finite() {
            return Err(QsnnError::NonFiniteLoss {
                iteration,
                detail: "classical network".into(),
            });
        }
        let tracked_p_yes = tracked
            .iter()
            .map(|x| Ok(classical_forward(&nn, x)?.1))
            .collect::<Result<Vec<_>>>()?;
        records.push(Record {
            iteration,
            loss,
            robustness: None,
            tracked_p_yes,
        });
        if iteration < config.iterations {
            let g = classical_gradient(&nn, active)?;
            nn = step(&nn, &g, config.learning_rate);
            if nn.validate().is_err() {
                return Err(QsnnError::NonFiniteLoss {
                    iteration: iteration + 1,
                    detail: "classical parameters diverged".into(),
                });
            }
        }
    }
    Ok(TrainingHistory {
        records,
        final_params: nn,
    })
}

/// `p_yes` of the classical network on a word sequence.
pub fn classical_p_yes(
    topology: &QsnnTopology,
    nn: &ClassicalNN,
    stages: &StageSettings,
    seq: &WordSequence,
) -> Result<f64> {
    let rho = encode_sequences(topology, stages, std::slice::from_ref(seq))?.remove(0);
    Ok(classical_forward(nn, &word_populations(&rho, topology.vocab_size()))?.1)
}
