//! Loss, gradients, robustness and the gradient-descent loop.
//!
//! For a labeled pair `s` the success probability is
//! `p_s = Tr(Ω^s ρ_out^s)` with `Ω^s = |l_s⟩⟨l_s|`; the loss is `1 − mean p_s`.
//!
//! Derivatives go through the two trainable stages:
//!
//! * `h_k`: the coherent propagator is `Ū⊗U` with `U = e^{−iHT^U}`, so
//!   `dρ_U = dU ρ U† + U ρ dU†` where `dU` is the Fréchet derivative of the
//!   exponential along `−iH_kT^U`.
//! * `γ_k`: `∂𝓛_D/∂γ_k = 2γ_k D[E_k]` with `E_k = |o⟩⟨i|`.
//!
//! Both are evaluated in closed form (see `ParameterPoint`); the tests check
//! them against the generic block-exponential derivative of the full
//! Liouvillian and against central differences.
//!
//! The input stage has no trainable parameters; encoded states are cached per
//! dataset.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QsnnError, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};
use crate::network::{
    encode_input, CompiledNetwork, Label, QsnnParameters, QsnnTopology, StageSettings, WordSequence,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub sequence: WordSequence,
    pub label: Label,
}

/// Loss gradient split by parameter family.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub h: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// A pair with its input stage already applied.
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub rho_in: ComplexMatrix,
    pub label: Label,
}

pub fn encode_pairs(
    topology: &QsnnTopology,
    stages: &StageSettings,
    pairs: &[TrainingPair],
) -> Result<Vec<EncodedPair>> {
    let params = zero_parameters(topology, *stages)?;
    pairs
        .iter()
        .map(|p| {
            Ok(EncodedPair {
                rho_in: encode_input(topology, &params, &p.sequence)?.matrix().clone(),
                label: p.label,
            })
        })
        .collect()
}

pub fn encode_sequences(
    topology: &QsnnTopology,
    stages: &StageSettings,
    seqs: &[WordSequence],
) -> Result<Vec<ComplexMatrix>> {
    let params = zero_parameters(topology, *stages)?;
    seqs.iter()
        .map(|s| Ok(encode_input(topology, &params, s)?.matrix().clone()))
        .collect()
}

fn zero_parameters(topology: &QsnnTopology, stages: StageSettings) -> Result<QsnnParameters> {
    QsnnParameters::new(
        topology,
        vec![0.0; topology.hamiltonian_pairs().len()],
        vec![0.0; topology.output_channels().len()],
        stages,
    )
}

/// `1 − mean(successes)`.
pub fn loss_from_success(successes: &[f64]) -> Result<f64> {
    if successes.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    Ok(1.0 - successes.iter().sum::<f64>() / successes.len() as f64)
}

/// Success probability of every pair, without derivatives.
pub fn success_probabilities(net: &CompiledNetwork, encoded: &[EncodedPair]) -> Result<Vec<f64>> {
    encoded
        .iter()
        .map(|e| {
            let (yes, no) = net.probabilities(&e.rho_in)?;
            Ok(match e.label {
                Label::Yes => yes,
                Label::No => no,
            })
        })
        .collect()
}

pub fn loss(topology: &QsnnTopology, params: &QsnnParameters, dataset: &[TrainingPair]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let encoded = encode_pairs(topology, &params.stages, dataset)?;
    let net = CompiledNetwork::new(topology, params)?;
    loss_from_success(&success_probabilities(&net, &encoded)?)
}

/// Success probability of one pair and its partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSensitivity {
    pub success: f64,
    pub d_h: Vec<f64>,
    pub d_gamma: Vec<f64>,
}

/// Analytic per-pair derivatives. With `with_h == false` the `d_h` vectors
/// are left empty.
pub fn sensitivities(
    topology: &QsnnTopology,
    params: &QsnnParameters,
    encoded: &[EncodedPair],
    with_h: bool,
) -> Result<Vec<PairSensitivity>> {
    let point = ParameterPoint::new(topology, params)?;
    let n_gamma = params.gamma.len();
    encoded
        .iter()
        .map(|e| {
            let l = point.label_slot(e.label);
            let q = &point.weights[l];
            let rho_u = point.coherent_state(&e.rho_in);
            let pops: Vec<f64> = (0..point.dim).map(|i| rho_u.get(i, i).re).collect();
            let success = q.iter().zip(&pops).map(|(w, p)| w * p).sum();
            let d_gamma = (0..n_gamma)
                .map(|k| point.weight_grads[k][l] * pops[point.channel_word[k]])
                .collect();
            let d_h = if with_h {
                point.coherent_sensitivity(&e.rho_in, q)
            } else {
                Vec::new()
            };
            Ok(PairSensitivity { success, d_h, d_gamma })
        })
        .collect()
}

/// Closed forms of both trainable stages at one parameter point.
///
/// The read-out channels only move population from word neurons to output
/// neurons, so `p_l = Σ_i q_{l,i} ρ_U[i,i]` with
/// `q_{l,i} = R_{il} (1 − e^{−Γ_i T^D}) / Γ_i` for word `i`, where `R_{il}` is
/// the summed squared rate from `i` to output `l` and `Γ_i = Σ_l R_{il}`.
/// The coherent stage uses `H = V diag(λ) V†`, which also gives the
/// derivative `dU = V (G ∘ V† (−iT^U H_k) V) V†` through the divided
/// differences `G` of the exponential.
struct ParameterPoint<'a> {
    topology: &'a QsnnTopology,
    dim: usize,
    t_u: f64,
    v: ComplexMatrix,
    v_adj: ComplexMatrix,
    u: ComplexMatrix,
    u_adj: ComplexMatrix,
    divided: ComplexMatrix,
    /// `weights[l][i] = q_{l,i}`, `l` indexing `topology.labels()`.
    weights: Vec<Vec<f64>>,
    /// `weight_grads[k][l] = ∂q_{l,i_k}/∂γ_k`.
    weight_grads: Vec<Vec<f64>>,
    channel_word: Vec<usize>,
}

impl<'a> ParameterPoint<'a> {
    fn new(topology: &'a QsnnTopology, params: &QsnnParameters) -> Result<Self> {
        params.validate(topology)?;
        let d = topology.dim();
        let labels = topology.labels();
        let t_u = params.stages.t_u;
        let t_d = params.stages.t_d;

        let (lambda, v) = topology.hamiltonian(&params.h).hermitian_eigen()?;
        let v_adj = v.adjoint();
        let phase: Vec<C64> = lambda.iter().map(|&x| C64::from_polar(1.0, -x * t_u)).collect();
        let u = ComplexMatrix::from_fn(d, d, |(i, j)| (0..d).map(|m| v.get(i, m) * phase[m] * v_adj.get(m, j)).sum())?;
        let u_adj = u.adjoint();
        let divided = ComplexMatrix::from_fn(d, d, |(i, j)| {
            let half = -0.5 * t_u * (lambda[i] - lambda[j]);
            C64::from_polar(1.0, -0.5 * t_u * (lambda[i] + lambda[j])) * sinc(half)
        })?;

        let channels = topology.output_channels();
        let slot = |label: Label| labels.iter().position(|&x| x == label).expect("channel label in topology");
        let mut rates = vec![vec![0.0; labels.len()]; d];
        for (c, g) in channels.iter().zip(&params.gamma) {
            rates[c.word][slot(c.output)] += g * g;
        }
        let total: Vec<f64> = rates.iter().map(|r| r.iter().sum()).collect();
        let mut weights = vec![vec![0.0; d]; labels.len()];
        for (l, &label) in labels.iter().enumerate() {
            for i in 1..=topology.vocab_size() {
                weights[l][i] = rates[i][l] * decay_fraction(total[i], t_d);
            }
            weights[l][topology.output_index(label)] = 1.0;
        }
        let weight_grads = channels
            .iter()
            .zip(&params.gamma)
            .map(|(c, &g)| {
                let i = c.word;
                let f = decay_fraction(total[i], t_d);
                let df = decay_fraction_slope(total[i], t_d);
                (0..labels.len())
                    .map(|l| {
                        let own = if l == slot(c.output) { f } else { 0.0 };
                        2.0 * g * (own + rates[i][l] * df)
                    })
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        if weights.iter().chain(&weight_grads).flatten().any(|w| !w.is_finite()) {
            return Err(QsnnError::InvalidParameters("output rates overflow".into()));
        }

        Ok(ParameterPoint {
            topology,
            dim: d,
            t_u,
            v,
            v_adj,
            u,
            u_adj,
            divided,
            weights,
            weight_grads,
            channel_word: channels.iter().map(|c| c.word).collect(),
        })
    }

    fn label_slot(&self, label: Label) -> usize {
        self.topology
            .labels()
            .iter()
            .position(|&x| x == label)
            .expect("label in topology")
    }

    fn coherent_state(&self, rho_in: &ComplexMatrix) -> ComplexMatrix {
        &(&self.u * rho_in) * &self.u_adj
    }

    fn p_yes(&self, rho_in: &ComplexMatrix) -> f64 {
        let rho_u = self.coherent_state(rho_in);
        let q = &self.weights[self.label_slot(Label::Yes)];
        (0..self.dim).map(|i| q[i] * rho_u.get(i, i).re).sum()
    }

    /// `∂p/∂h_k = 2 Re Tr(dU_k ρ U† Q)` for the diagonal read-out `Q = diag(q)`.
    fn coherent_sensitivity(&self, rho_in: &ComplexMatrix, q: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let right = &(rho_in * &self.u_adj) * &ComplexMatrix::from_fn(d, d, |(i, j)| {
            if i == j {
                C64::new(q[i], 0.0)
            } else {
                ZERO
            }
        })
        .expect("finite weights");
        // Tr(V (G∘X) V† A) = Σ_ij G_ij X_ij (V† A V)_ji
        let rotated = &(&self.v_adj * &right) * &self.v;
        let minus_i_tu = C64::new(0.0, -self.t_u);
        self.topology
            .hamiltonian_pairs()
            .iter()
            .map(|&(a, b)| {
                let mut acc = ZERO;
                for i in 0..d {
                    for j in 0..d {
                        let x = (self.v_adj.get(i, a) * self.v.get(b, j) + self.v_adj.get(i, b) * self.v.get(a, j))
                            * minus_i_tu;
                        acc += self.divided.get(i, j) * x * rotated.get(j, i);
                    }
                }
                2.0 * acc.re
            })
            .collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(1 − e^{−ΓT}) / Γ`, equal to `T` at `Γ = 0`.
fn decay_fraction(total: f64, t: f64) -> f64 {
    let x = total * t;
    if x < 1e-2 {
        // T Σ_n (−x)^n / (n+1)!
        let mut term = t;
        let mut sum = 0.0;
        for n in 0..12 {
            sum += term;
            term *= -x / (n as f64 + 2.0);
        }
        sum
    } else {
        -(-x).exp_m1() / total
    }
}

/// Derivative of [`decay_fraction`] with respect to `Γ`.
fn decay_fraction_slope(total: f64, t: f64) -> f64 {
    let x = total * t;
    if x < 1e-2 {
        // T² Σ_{n≥1} n (−x)^{n−1} (−1) / (n+1)!
        let mut sum = 0.0;
        let mut power = 1.0;
        let mut fact = 2.0;
        for n in 1..13 {
            sum -= n as f64 * power / fact;
            power *= -x;
            fact *= n as f64 + 2.0;
        }
        t * t * sum
    } else {
        (x * (-x).exp() + (-x).exp_m1()) / (total * total)
    }
}

/// Central-difference version of [`sensitivities`].
pub fn finite_diff_sensitivities(
    topology: &QsnnTopology,
    params: &QsnnParameters,
    encoded: &[EncodedPair],
    epsilon: f64,
    with_h: bool,
) -> Result<Vec<PairSensitivity>> {
    if !(1e-8..=1e-3).contains(&epsilon) {
        return Err(QsnnError::InvalidConfig(format!(
            "finite-difference step {epsilon:e} outside [1e-8, 1e-3]"
        )));
    }
    let probs = |p: &QsnnParameters| -> Result<Vec<f64>> {
        success_probabilities(&CompiledNetwork::new(topology, p)?, encoded)
    };
    let base = probs(params)?;
    let mut out: Vec<PairSensitivity> = base
        .iter()
        .map(|&success| PairSensitivity {
            success,
            d_h: Vec::new(),
            d_gamma: Vec::new(),
        })
        .collect();
    let central = |select: fn(&mut QsnnParameters) -> &mut Vec<f64>, k: usize| -> Result<Vec<f64>> {
        let mut plus = params.clone();
        select(&mut plus)[k] += epsilon;
        let mut minus = params.clone();
        select(&mut minus)[k] -= epsilon;
        let (fp, fm) = (probs(&plus)?, probs(&minus)?);
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * epsilon)).collect())
    };
    if with_h {
        for k in 0..params.h.len() {
            for (o, v) in out.iter_mut().zip(central(|p| &mut p.h, k)?) {
                o.d_h.push(v);
            }
        }
    }
    for k in 0..params.gamma.len() {
        for (o, v) in out.iter_mut().zip(central(|p| &mut p.gamma, k)?) {
            o.d_gamma.push(v);
        }
    }
    Ok(out)
}

/// `∂Loss/∂θ = −mean_s ∂p_s/∂θ`.
pub fn aggregate_gradient(sens: &[PairSensitivity], n_h: usize, n_gamma: usize) -> Gradient {
    let n = sens.len() as f64;
    let mean = |len: usize, pick: fn(&PairSensitivity) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|k| -sens.iter().map(|s| pick(s).get(k).copied().unwrap_or(0.0)).sum::<f64>() / n)
            .collect()
    };
    Gradient {
        h: mean(n_h, |s| &s.d_h),
        gamma: mean(n_gamma, |s| &s.d_gamma),
    }
}

/// `1 − (1/N)(1/n) Σ_s Σ_i (∂p_s/∂γ_i)²`.
pub fn robustness_from(sens: &[PairSensitivity], n_gamma: usize) -> f64 {
    if sens.is_empty() || n_gamma == 0 {
        return 1.0;
    }
    let total: f64 = sens.iter().flat_map(|s| s.d_gamma.iter()).map(|v| v * v).sum();
    1.0 - total / (sens.len() as f64 * n_gamma as f64)
}

pub fn gradient(topology: &QsnnTopology, params: &QsnnParameters, dataset: &[TrainingPair]) -> Result<Gradient> {
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let encoded = encode_pairs(topology, &params.stages, dataset)?;
    let sens = sensitivities(topology, params, &encoded, true)?;
    Ok(aggregate_gradient(&sens, params.h.len(), params.gamma.len()))
}

pub fn finite_diff_gradient(
    topology: &QsnnTopology,
    params: &QsnnParameters,
    dataset: &[TrainingPair],
    epsilon: f64,
) -> Result<Gradient> {
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let encoded = encode_pairs(topology, &params.stages, dataset)?;
    let sens = finite_diff_sensitivities(topology, params, &encoded, epsilon, true)?;
    Ok(aggregate_gradient(&sens, params.h.len(), params.gamma.len()))
}

pub fn robustness(topology: &QsnnTopology, params: &QsnnParameters, dataset: &[TrainingPair]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let encoded = encode_pairs(topology, &params.stages, dataset)?;
    let sens = sensitivities(topology, params, &encoded, false)?;
    Ok(robustness_from(&sens, params.gamma.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Coherent,
    Incoherent,
}

/// `θ' = θ − η ∂Loss/∂θ`; `h` only moves in coherent mode.
pub fn sgd_step(params: &QsnnParameters, grads: &Gradient, eta: f64, mode: Mode) -> QsnnParameters {
    let mut next = params.clone();
    if mode == Mode::Coherent {
        for (h, g) in next.h.iter_mut().zip(&grads.h) {
            *h -= eta * g;
        }
    }
    for (gamma, g) in next.gamma.iter_mut().zip(&grads.gamma) {
        *gamma -= eta * g;
    }
    next
}

/// How to fill a parameter vector at iteration 0.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Uniform { low: f64, high: f64 },
    Const(f64),
    Explicit(Vec<f64>),
}

impl InitSpec {
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match self {
            InitSpec::Uniform { low, high } => Ok((0..n).map(|_| rng.random_range(*low..*high)).collect()),
            InitSpec::Const(v) => Ok(vec![*v; n]),
            InitSpec::Explicit(values) if values.len() == n => Ok(values.clone()),
            InitSpec::Explicit(values) => Err(QsnnError::InvalidConfig(format!(
                "explicit initialization has {} values, expected {n}",
                values.len()
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            InitSpec::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            InitSpec::Const(v) => v.is_finite(),
            InitSpec::Explicit(vs) => vs.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(QsnnError::InvalidConfig(format!("bad initialization {self:?}")))
        }
    }
}

impl FromStr for InitSpec {
    type Err = QsnnError;

    /// `uniform:LOW:HIGH` or `const:V`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || QsnnError::InvalidConfig(format!("cannot parse initialization {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        let spec = match parts.as_slice() {
            ["uniform", lo, hi] => InitSpec::Uniform {
                low: num(lo)?,
                high: num(hi)?,
            },
            ["const", v] => InitSpec::Const(num(v)?),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GradientMethod {
    Analytic,
    FiniteDifference { epsilon: f64 },
}

/// Train on `corrupted` for iterations `< correct_at`, then on the clean set.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionSchedule {
    pub corrupted: Vec<TrainingPair>,
    pub correct_at: usize,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub mode: Mode,
    pub h_init: InitSpec,
    pub gamma_init: InitSpec,
    pub seed: u64,
    pub gradient_method: GradientMethod,
    pub correction: Option<CorrectionSchedule>,
    pub stages: StageSettings,
    /// Sequences whose `p_yes` is recorded every iteration.
    pub tracked: Vec<WordSequence>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            iterations: 2000,
            mode: Mode::Coherent,
            h_init: InitSpec::Const(0.1),
            gamma_init: InitSpec::Uniform { low: -1.0, high: 1.0 },
            seed: 0,
            gradient_method: GradientMethod::Analytic,
            correction: None,
            stages: StageSettings::default(),
            tracked: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(QsnnError::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        self.h_init.validate()?;
        self.gamma_init.validate()?;
        self.stages.validate()?;
        if let GradientMethod::FiniteDifference { epsilon } = self.gradient_method {
            if !(1e-8..=1e-3).contains(&epsilon) {
                return Err(QsnnError::InvalidConfig(format!(
                    "finite-difference step {epsilon:e} outside [1e-8, 1e-3]"
                )));
            }
        }
        Ok(())
    }
}

/// Checks that a corrupted set only differs from the clean one in labels.
pub fn check_corruption(clean: &[TrainingPair], corrupted: &[TrainingPair]) -> Result<()> {
    if clean.len() != corrupted.len() {
        return Err(QsnnError::InvalidConfig(format!(
            "corrupted set has {} pairs, clean set has {}",
            corrupted.len(),
            clean.len()
        )));
    }
    if let Some(i) = clean.iter().zip(corrupted).position(|(a, b)| a.sequence != b.sequence) {
        return Err(QsnnError::InvalidConfig(format!(
            "pair {i} has a different sequence in the corrupted set"
        )));
    }
    Ok(())
}

/// One row of a training curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub iteration: usize,
    pub loss: f64,
    pub robustness: Option<f64>,
    pub tracked_p_yes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingHistory<P> {
    pub records: Vec<Record>,
    pub final_params: P,
}

/// Draws the output rates first, then `h`, from `ChaCha8Rng::seed_from_u64(seed)`.
/// Incoherent mode pins `h` at zero without consuming randomness.
pub fn initial_parameters(topology: &QsnnTopology, config: &TrainConfig) -> Result<QsnnParameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gamma = config.gamma_init.draw(topology.output_channels().len(), &mut rng)?;
    let m = topology.hamiltonian_pairs().len();
    let h = match config.mode {
        Mode::Coherent => config.h_init.draw(m, &mut rng)?,
        Mode::Incoherent => vec![0.0; m],
    };
    QsnnParameters::new(topology, h, gamma, config.stages)
}

pub fn train(
    topology: &QsnnTopology,
    dataset: &[TrainingPair],
    config: &TrainConfig,
) -> Result<TrainingHistory<QsnnParameters>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(QsnnError::EmptyDataset);
    }
    let clean = encode_pairs(topology, &config.stages, dataset)?;
    let corrupted = match &config.correction {
        Some(c) => {
            check_corruption(dataset, &c.corrupted)?;
            Some((encode_pairs(topology, &config.stages, &c.corrupted)?, c.correct_at))
        }
        None => None,
    };
    let tracked = encode_sequences(topology, &config.stages, &config.tracked)?;
    let with_h = config.mode == Mode::Coherent;

    let mut params = initial_parameters(topology, config)?;
    let mut records = Vec::with_capacity(config.iterations + 1);
    for iteration in 0..=config.iterations {
        let active = match &corrupted {
            Some((pairs, at)) if iteration < *at => pairs,
            _ => &clean,
        };
        let sens = match config.gradient_method {
            GradientMethod::Analytic => sensitivities(topology, &params, active, with_h)?,
            GradientMethod::FiniteDifference { epsilon } => {
                finite_diff_sensitivities(topology, &params, active, epsilon, with_h)?
            }
        };
        let successes: Vec<f64> = sens.iter().map(|s| s.success).collect();
        let loss = loss_from_success(&successes)?;
        if !loss.is_finite() {
            return Err(QsnnError::NonFiniteLoss {
                iteration,
                detail: format!("parameters {params:?}"),
            });
        }
        let point = ParameterPoint::new(topology, &params)?;
        let tracked_p_yes = tracked.iter().map(|rho| point.p_yes(rho)).collect();
        records.push(Record {
            iteration,
            loss,
            robustness: Some(robustness_from(&sens, params.gamma.len())),
            tracked_p_yes,
        });
        if iteration < config.iterations {
            let grad = aggregate_gradient(&sens, params.h.len(), params.gamma.len());
            params = sgd_step(&params, &grad, config.learning_rate, config.mode);
            if params.h.iter().chain(&params.gamma).any(|v| !(v * v).is_finite()) {
                return Err(QsnnError::NonFiniteLoss {
                    iteration: iteration + 1,
                    detail: "parameters diverged".into(),
                });
            }
        }
    }
    Ok(TrainingHistory {
        records,
        final_params: params,
    })
}
