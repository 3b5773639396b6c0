//! Network topology, parameters and the three-stage forward pass.
//!
//! Neuron layout: index 0 is the input neuron, indices `1..=V` are word
//! neurons and `V+1..` are the output neurons in label order. A sequence is
//! encoded by opening input channels `γ_in|w⟩⟨0|` one word at a time, mixed
//! by the Hamiltonian `Σ_k h_k (|i_k⟩⟨j_k| + |j_k⟩⟨i_k|)` for `T^U`, and read
//! out through jump operators `γ_k|o_k⟩⟨i_k|` for `T^D`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QsnnError, Result};
use crate::lindblad::{evolve, unitary, DensityMatrix, GeneratorSpec, SuperPropagator};
use crate::linalg::{unvec, vec, ComplexMatrix, C64};

pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Yes,
    No,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Yes, Label::No];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Yes => "Yes",
            Label::No => "No",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Yes" => Ok(Label::Yes),
            "No" => Ok(Label::No),
            other => Err(other.to_string()),
        }
    }
}

/// Directed dissipative link from a word neuron to an output neuron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputChannel {
    pub word: usize,
    pub output: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsnnTopology {
    vocab_size: usize,
    labels: Vec<Label>,
    hamiltonian_pairs: Vec<(usize, usize)>,
    output_channels: Vec<OutputChannel>,
}

impl QsnnTopology {
    pub fn new(
        vocab_size: usize,
        hamiltonian_pairs: Vec<(usize, usize)>,
        output_channels: Vec<OutputChannel>,
    ) -> Result<Self> {
        if vocab_size == 0 {
            return Err(QsnnError::InvalidTopology("vocabulary is empty".into()));
        }
        let word = |w: usize| (1..=vocab_size).contains(&w);
        let mut seen = Vec::with_capacity(hamiltonian_pairs.len());
        for &(i, j) in &hamiltonian_pairs {
            if !word(i) || !word(j) || i == j {
                return Err(QsnnError::InvalidTopology(format!(
                    "hamiltonian pair ({i}, {j}) must join two distinct word neurons"
                )));
            }
            let key = (i.min(j), i.max(j));
            if seen.contains(&key) {
                return Err(QsnnError::InvalidTopology(format!("duplicate pair ({i}, {j})")));
            }
            seen.push(key);
        }
        for (k, c) in output_channels.iter().enumerate() {
            if !word(c.word) {
                return Err(QsnnError::InvalidTopology(format!(
                    "output channel from {} does not start at a word neuron",
                    c.word
                )));
            }
            if output_channels[..k].contains(c) {
                return Err(QsnnError::InvalidTopology(format!(
                    "duplicate channel {} -> {}",
                    c.word, c.output
                )));
            }
        }
        Ok(QsnnTopology {
            vocab_size,
            labels: Label::ALL.to_vec(),
            hamiltonian_pairs,
            output_channels,
        })
    }

    /// Every word pair coupled and every word wired to every output.
    ///
    /// Pairs are ordered `(1,2), (1,3), …, (V−1,V)`; channels are ordered by
    /// word, then by label.
    pub fn fully_connected(vocab_size: usize) -> Result<Self> {
        let pairs = (1..=vocab_size)
            .flat_map(|i| (i + 1..=vocab_size).map(move |j| (i, j)))
            .collect();
        let channels = (1..=vocab_size)
            .flat_map(|word| Label::ALL.map(|output| OutputChannel { word, output }))
            .collect();
        Self::new(vocab_size, pairs, channels)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn hamiltonian_pairs(&self) -> &[(usize, usize)] {
        &self.hamiltonian_pairs
    }

    pub fn output_channels(&self) -> &[OutputChannel] {
        &self.output_channels
    }

    /// `d = 1 + V + L`.
    pub fn dim(&self) -> usize {
        1 + self.vocab_size + self.labels.len()
    }

    pub fn output_index(&self, label: Label) -> usize {
        let pos = self
            .labels
            .iter()
            .position(|&l| l == label)
            .expect("labels hold every Label variant");
        1 + self.vocab_size + pos
    }

    /// `H_k = |i⟩⟨j| + |j⟩⟨i|` for pair `k`.
    pub fn coupling_operator(&self, k: usize) -> ComplexMatrix {
        let (i, j) = self.hamiltonian_pairs[k];
        let d = self.dim();
        &ComplexMatrix::outer_basis(d, i, j) + &ComplexMatrix::outer_basis(d, j, i)
    }

    /// `E_k = |o⟩⟨i|` for channel `k`; the jump operator is `γ_k E_k`.
    pub fn channel_operator(&self, k: usize) -> ComplexMatrix {
        let c = self.output_channels[k];
        ComplexMatrix::outer_basis(self.dim(), self.output_index(c.output), c.word)
    }

    pub fn hamiltonian(&self, h: &[f64]) -> ComplexMatrix {
        let d = self.dim();
        let mut m = ComplexMatrix::zeros(d, d);
        for (k, &hk) in h.iter().enumerate() {
            if hk != 0.0 {
                m = &m + &self.coupling_operator(k).scale_real(hk);
            }
        }
        m
    }

    pub fn output_lindblads(&self, gamma: &[f64]) -> Vec<ComplexMatrix> {
        gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g != 0.0)
            .map(|(k, &g)| self.channel_operator(k).scale_real(g))
            .collect()
    }
}

/// Fixed encoding rate and stage durations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSettings {
    pub gamma_in: f64,
    pub t_in: f64,
    pub t_u: f64,
    pub t_d: f64,
}

impl Default for StageSettings {
    fn default() -> Self {
        StageSettings {
            gamma_in: 1.0,
            t_in: 10.0,
            t_u: 1.0,
            t_d: 10.0,
        }
    }
}

impl StageSettings {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_in", self.gamma_in),
            ("t_in", self.t_in),
            ("t_u", self.t_u),
            ("t_d", self.t_d),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(QsnnError::InvalidParameters(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Trainable coherent strengths `h` and output rates `gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QsnnParameters {
    pub h: Vec<f64>,
    pub gamma: Vec<f64>,
    pub stages: StageSettings,
}

impl QsnnParameters {
    pub fn new(topology: &QsnnTopology, h: Vec<f64>, gamma: Vec<f64>, stages: StageSettings) -> Result<Self> {
        let p = QsnnParameters { h, gamma, stages };
        p.validate(topology)?;
        Ok(p)
    }

    pub fn validate(&self, topology: &QsnnTopology) -> Result<()> {
        if self.h.len() != topology.hamiltonian_pairs().len() {
            return Err(QsnnError::InvalidParameters(format!(
                "{} coherent strengths for {} pairs",
                self.h.len(),
                topology.hamiltonian_pairs().len()
            )));
        }
        if self.gamma.len() != topology.output_channels().len() {
            return Err(QsnnError::InvalidParameters(format!(
                "{} rates for {} channels",
                self.gamma.len(),
                topology.output_channels().len()
            )));
        }
        if self.h.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(QsnnError::InvalidParameters("non-finite parameter".into()));
        }
        self.stages.validate()
    }
}

/// Word indices in `1..=V`, in reading order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordSequence(pub Vec<usize>);

impl WordSequence {
    pub fn validate(&self, topology: &QsnnTopology) -> Result<()> {
        let v = topology.vocab_size();
        match self.0.iter().find(|&&w| w == 0 || w > v) {
            Some(&index) => Err(QsnnError::InvalidWord {
                index,
                vocab_size: v,
            }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> WordSequence {
        WordSequence(self.0.iter().rev().copied().collect())
    }
}

#[derive(Clone, Debug)]
pub struct ForwardResult {
    pub rho_out: DensityMatrix,
    pub p_yes: f64,
    pub p_no: f64,
    pub p_undetermined: f64,
}

/// Input stage: `k` equal segments of `T^in/k`; the channel of word `i`
/// opens at segment `i` and stays open. A repeated word re-opens a channel
/// that is already open, which changes nothing.
pub fn encode_input(topology: &QsnnTopology, params: &QsnnParameters, seq: &WordSequence) -> Result<DensityMatrix> {
    seq.validate(topology)?;
    let d = topology.dim();
    let mut rho = DensityMatrix::basis(d, 0)?;
    if seq.is_empty() {
        return Ok(rho);
    }
    let tau = params.stages.t_in / seq.len() as f64;
    let mut open: Vec<usize> = Vec::with_capacity(seq.len());
    for &w in &seq.0 {
        if !open.contains(&w) {
            open.push(w);
        }
        let channels = open
            .iter()
            .map(|&o| ComplexMatrix::outer_basis(d, o, 0).scale_real(params.stages.gamma_in))
            .collect();
        let spec = GeneratorSpec::dissipative(d, channels)?;
        rho = evolve(&rho, &spec.propagator(tau)?)?;
    }
    Ok(rho)
}

/// Coherent stage `e^{𝓛_H T^U}`.
pub fn unitary_stage(rho_in: &DensityMatrix, topology: &QsnnTopology, params: &QsnnParameters) -> Result<DensityMatrix> {
    let spec = GeneratorSpec::coherent(topology.hamiltonian(&params.h))?;
    evolve(rho_in, &spec.propagator(params.stages.t_u)?)
}

/// Dissipative read-out stage `e^{𝓛_D T^D}`.
pub fn output_stage(rho_u: &DensityMatrix, topology: &QsnnTopology, params: &QsnnParameters) -> Result<DensityMatrix> {
    let spec = GeneratorSpec::dissipative(topology.dim(), topology.output_lindblads(&params.gamma))?;
    evolve(rho_u, &spec.propagator(params.stages.t_d)?)
}

pub fn forward(topology: &QsnnTopology, params: &QsnnParameters, seq: &WordSequence) -> Result<ForwardResult> {
    params.validate(topology)?;
    let rho_in = encode_input(topology, params, seq)?;
    let rho_u = unitary_stage(&rho_in, topology, params)?;
    let rho_out = output_stage(&rho_u, topology, params)?;
    let p_yes = rho_out.population(topology.output_index(Label::Yes));
    let p_no = rho_out.population(topology.output_index(Label::No));
    Ok(ForwardResult {
        p_undetermined: 1.0 - p_yes - p_no,
        rho_out,
        p_yes,
        p_no,
    })
}

/// Label with the larger probability; ties go to `Yes`.
pub fn classify(result: &ForwardResult) -> Label {
    if result.p_yes >= result.p_no {
        Label::Yes
    } else {
        Label::No
    }
}

/// Unitary and dissipative stages evaluated once for a parameter point, for
/// repeated use across many encoded inputs.
#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    dim: usize,
    unitary: ComplexMatrix,
    dissipative: SuperPropagator,
    yes: usize,
    no: usize,
}

impl CompiledNetwork {
    pub fn new(topology: &QsnnTopology, params: &QsnnParameters) -> Result<Self> {
        params.validate(topology)?;
        let d = topology.dim();
        let unitary = unitary(&topology.hamiltonian(&params.h), params.stages.t_u)?;
        let dissipative = GeneratorSpec::dissipative(d, topology.output_lindblads(&params.gamma))?
            .propagator(params.stages.t_d)?;
        Ok(CompiledNetwork {
            dim: d,
            unitary,
            dissipative,
            yes: topology.output_index(Label::Yes),
            no: topology.output_index(Label::No),
        })
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn dissipative(&self) -> &SuperPropagator {
        &self.dissipative
    }

    /// `ρ_U = U ρ_in U†`.
    pub fn coherent_state(&self, rho_in: &ComplexMatrix) -> ComplexMatrix {
        &(&self.unitary * rho_in) * &self.unitary.adjoint()
    }

    /// Output state as a matrix (not validated).
    pub fn output_state(&self, rho_in: &ComplexMatrix) -> Result<ComplexMatrix> {
        let y = vec(&self.coherent_state(rho_in))?;
        unvec(&(self.dissipative.matrix() * &y), self.dim)
    }

    /// `(p_yes, p_no)` for an encoded input.
    pub fn probabilities(&self, rho_in: &ComplexMatrix) -> Result<(f64, f64)> {
        let y = vec(&self.coherent_state(rho_in))?;
        let row = |o: usize| -> f64 {
            let r = o * self.dim + o;
            let lam = self.dissipative.matrix().as_array();
            (0..y.rows()).map(|c| lam[[r, c]] * y.get(c, 0)).sum::<C64>().re
        };
        Ok((row(self.yes), row(self.no)))
    }
}
