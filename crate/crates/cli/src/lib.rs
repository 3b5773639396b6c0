//! Experiment harness: multi-sample training runs written as CSV files.

pub mod args;
pub mod experiment;
pub mod model_file;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use args::{Cli, Command, CommonArgs, EvalArgs, LabelNoiseArgs, ModeArg, VerseArgs};
use experiment::{run_all, ExperimentConfig, GammaInit, ModelKind, ModelRun, Task};
use model_file::{ModelFile, SavedModel};
use qsnn::classical::{classical_train, initial_classical};
use qsnn::corpus::{builtin_corpus, builtin_corrupted, load_dataset, LabeledDataset};
use qsnn::network::StageSettings;
use qsnn::report::{write_history, write_robustness_summary, write_summary, write_tracked_summary};
use qsnn::training::{check_corruption, train, CorrectionSchedule, InitSpec, Mode, TrainConfig};
use qsnn::{QsnnError, Result};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code(err: &QsnnError) -> i32 {
    match err {
        QsnnError::NonFiniteLoss { .. } => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

struct Defaults {
    corpus: &'static str,
    iterations: usize,
    learning_rate: f64,
    gamma_init: &'static str,
}

const ACCELERATE: Defaults = Defaults {
    corpus: "accelerate",
    iterations: 200,
    learning_rate: 0.5,
    gamma_init: "uniform:-1:1",
};
const VERSE: Defaults = Defaults {
    corpus: "verse-default",
    iterations: 500,
    learning_rate: 0.1,
    gamma_init: "uniform:-1:1",
};
const LABEL_NOISE: Defaults = Defaults {
    corpus: "verse-default",
    iterations: 300,
    learning_rate: 0.1,
    gamma_init: "grid:0.1,0.3,0.5,0.7",
};
const TRAIN: Defaults = Defaults {
    corpus: "accelerate",
    iterations: 2000,
    learning_rate: 0.5,
    gamma_init: "uniform:-1:1",
};

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Accelerate(a) => accelerate(&a, stdout),
        Command::Verse(a) => verse(&a, stdout),
        Command::LabelNoise(a) => label_noise(&a, stdout),
        Command::Robustness(a) => robustness(&a, stdout),
        Command::Train(a) => train_one(&a, stdout),
        Command::Eval(a) => eval(&a, stdout),
    }
}

fn stages(a: &CommonArgs) -> Result<StageSettings> {
    let d = StageSettings::default();
    let s = StageSettings {
        gamma_in: a.gamma_in.unwrap_or(d.gamma_in),
        t_in: a.t_in.unwrap_or(d.t_in),
        t_u: a.t_u.unwrap_or(d.t_u),
        t_d: a.t_d.unwrap_or(d.t_d),
    };
    s.validate().map_err(|e| QsnnError::InvalidConfig(e.to_string()))?;
    Ok(s)
}

fn models(a: &CommonArgs, allow_classical: bool) -> Result<Vec<ModelKind>> {
    let hs = if a.h_init.is_empty() { vec![0.1] } else { a.h_init.clone() };
    let coherent = hs.iter().map(|&h_init| ModelKind::Coherent { h_init });
    let mut out = Vec::new();
    match a.mode.unwrap_or(ModeArg::All) {
        ModeArg::Classical if !allow_classical => {
            return Err(QsnnError::InvalidConfig("this subcommand has no classical model".into()))
        }
        ModeArg::Classical => out.push(ModelKind::Classical),
        ModeArg::Incoherent => out.push(ModelKind::Incoherent),
        ModeArg::Coherent => out.extend(coherent),
        ModeArg::All => {
            if allow_classical {
                out.push(ModelKind::Classical);
            }
            out.push(ModelKind::Incoherent);
            out.extend(coherent);
        }
    }
    Ok(out)
}

fn experiment_config(a: &CommonArgs, d: &Defaults, allow_classical: bool) -> Result<ExperimentConfig> {
    let config = ExperimentConfig {
        samples: a.samples,
        iterations: a.iters.unwrap_or(d.iterations),
        learning_rate: a.lr.unwrap_or(d.learning_rate),
        seed: a.seed,
        gamma_init: a.gamma_init.as_deref().unwrap_or(d.gamma_init).parse()?,
        stages: stages(a)?,
        models: models(a, allow_classical)?,
    };
    config.validate()?;
    Ok(config)
}

fn corpus_name<'a>(a: &'a Option<String>, d: &Defaults) -> &'a str {
    a.as_deref().unwrap_or(d.corpus)
}

/// `(train, test)` from `--dataset` or the shipped corpus.
fn datasets(a: &CommonArgs, d: &Defaults) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    match &a.dataset {
        Some(path) => Ok((load_dataset(path)?, None)),
        None => {
            let (train, test) = builtin_corpus(corpus_name(&a.corpus, d))?;
            Ok((train, Some(test)))
        }
    }
}

fn out_dir(a: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let dir = a.clone().unwrap_or_else(|| Path::new("results").join(name));
    fs::create_dir_all(&dir).map_err(|e| QsnnError::io(&dir, e))?;
    Ok(dir)
}

fn say(stdout: &mut dyn Write, line: String) {
    // a closed stdout must not abort a finished run
    let _ = writeln!(stdout, "{line}");
}

fn plain_task(train: &LabeledDataset) -> Result<Task> {
    Ok(Task {
        topology: train.topology()?,
        pairs: train.training_pairs(),
        tracked: Vec::new(),
        correction: None,
    })
}

fn report_losses(runs: &[ModelRun], stdout: &mut dyn Write) {
    for run in runs {
        if let Some(last) = run.summary.last() {
            say(
                stdout,
                format!("{:<16} iteration {:>5}  mean loss {:.6}", run.model.name(), last.iteration, last.loss.mean),
            );
        }
    }
}

/// Runs behind `accelerate`: every model on the two-pair task.
pub fn accelerate_runs(a: &CommonArgs) -> Result<Vec<ModelRun>> {
    let config = experiment_config(a, &ACCELERATE, true)?;
    let (train, _) = datasets(a, &ACCELERATE)?;
    run_all(&plain_task(&train)?, &config)
}

/// Runs behind `robustness`: the quantum models of `accelerate`.
pub fn robustness_runs(a: &CommonArgs) -> Result<Vec<ModelRun>> {
    let config = experiment_config(a, &ACCELERATE, false)?;
    let (train, _) = datasets(a, &ACCELERATE)?;
    run_all(&plain_task(&train)?, &config)
}

/// Runs behind `verse`, with the test-sequence ids in tracking order.
pub fn verse_runs(a: &VerseArgs) -> Result<(Vec<String>, Vec<ModelRun>)> {
    let c = &a.common;
    let config = experiment_config(c, &VERSE, true)?;
    let (train, builtin_test) = datasets(c, &VERSE)?;
    let test = match (&a.test, builtin_test) {
        (Some(path), _) => load_dataset(path)?,
        (None, Some(t)) => t,
        (None, None) => return Err(QsnnError::InvalidConfig("--dataset needs --test".into())),
    };
    test.ensure_vocabulary(train.vocabulary())?;
    let task = Task {
        tracked: test.sequences(),
        ..plain_task(&train)?
    };
    Ok((test.ids(), run_all(&task, &config)?))
}

/// Runs behind `label-noise`.
pub fn label_noise_runs(a: &LabelNoiseArgs) -> Result<Vec<ModelRun>> {
    let c = &a.common;
    let config = experiment_config(c, &LABEL_NOISE, false)?;
    let (clean, corrupted) = match (&c.dataset, &a.corrupted) {
        (Some(d), Some(k)) => (load_dataset(d)?, load_dataset(k)?),
        (None, None) => {
            let name = corpus_name(&c.corpus, &LABEL_NOISE);
            (builtin_corpus(name)?.0, builtin_corrupted(name)?)
        }
        _ => {
            return Err(QsnnError::InvalidConfig(
                "--dataset and --corrupted must be given together".into(),
            ))
        }
    };
    corrupted.ensure_vocabulary(clean.vocabulary())?;
    let pairs = clean.training_pairs();
    let corrupted = corrupted.training_pairs();
    check_corruption(&pairs, &corrupted)?;
    let task = Task {
        correction: Some(CorrectionSchedule {
            corrupted,
            correct_at: a.correct_at,
        }),
        ..plain_task(&clean)?
    };
    run_all(&task, &config)
}

pub fn accelerate(a: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let runs = accelerate_runs(a)?;
    let dir = out_dir(&a.out, "accelerate")?;
    for run in &runs {
        write_summary(&run.summary, dir.join(format!("{}_loss.csv", run.model.name())))?;
    }
    report_losses(&runs, stdout);
    Ok(())
}

pub fn robustness(a: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let runs = robustness_runs(a)?;
    let dir = out_dir(&a.out, "robustness")?;
    for run in &runs {
        write_robustness_summary(&run.summary, dir.join(format!("{}_robustness.csv", run.model.name())))?;
        if let Some(r) = run.summary.last().and_then(|r| r.robustness) {
            say(stdout, format!("{:<16} final mean robustness {:.9}", run.model.name(), r.mean));
        }
    }
    Ok(())
}

pub fn verse(a: &VerseArgs, stdout: &mut dyn Write) -> Result<()> {
    let (ids, runs) = verse_runs(a)?;
    let dir = out_dir(&a.common.out, "verse")?;
    for run in &runs {
        let name = run.model.name();
        write_summary(&run.summary, dir.join(format!("{name}_loss.csv")))?;
        write_tracked_summary(&run.tracked, &ids, dir.join(format!("{name}_p_yes.csv")))?;
    }
    report_losses(&runs, stdout);
    for run in &runs {
        if let Some(last) = run.tracked.last() {
            let cells: Vec<String> =
                ids.iter().zip(&last.p_yes).map(|(id, s)| format!("{id} {:.4}", s.mean)).collect();
            say(stdout, format!("{:<16} p_yes  {}", run.model.name(), cells.join("  ")));
        }
    }
    Ok(())
}

pub fn label_noise(a: &LabelNoiseArgs, stdout: &mut dyn Write) -> Result<()> {
    let runs = label_noise_runs(a)?;
    let dir = out_dir(&a.common.out, "label-noise")?;
    for run in &runs {
        write_summary(&run.summary, dir.join(format!("{}_loss.csv", run.model.name())))?;
    }
    report_losses(&runs, stdout);
    Ok(())
}

pub fn train_one(a: &CommonArgs, stdout: &mut dyn Write) -> Result<()> {
    let (data, _) = datasets(a, &TRAIN)?;
    let topology = data.topology()?;
    let gamma_init = match a.gamma_init.as_deref().unwrap_or(TRAIN.gamma_init).parse()? {
        GammaInit::Draw(spec) => spec,
        GammaInit::Grid(_) => return Err(QsnnError::InvalidConfig("train takes no grid".into())),
    };
    let h_init = match a.h_init.as_slice() {
        [] => 0.1,
        [h] => *h,
        _ => return Err(QsnnError::InvalidConfig("train takes a single --h-init".into())),
    };
    let mode = a.mode.unwrap_or(ModeArg::Coherent);
    let tc = TrainConfig {
        learning_rate: a.lr.unwrap_or(TRAIN.learning_rate),
        iterations: a.iters.unwrap_or(TRAIN.iterations),
        mode: if mode == ModeArg::Coherent { Mode::Coherent } else { Mode::Incoherent },
        h_init: InitSpec::Const(h_init),
        gamma_init,
        seed: a.seed,
        stages: stages(a)?,
        tracked: data.sequences(),
        ..TrainConfig::default()
    };
    let pairs = data.training_pairs();
    let (records, model) = match mode {
        ModeArg::All => return Err(QsnnError::InvalidConfig("train needs a single --mode".into())),
        ModeArg::Classical => {
            let h = classical_train(&topology, initial_classical(&topology, &tc)?, &pairs, &tc)?;
            let model = SavedModel::Classical {
                network: h.final_params,
                stages: tc.stages,
            };
            (h.records, model)
        }
        ModeArg::Coherent => {
            let h = train(&topology, &pairs, &tc)?;
            (h.records, SavedModel::Coherent { params: h.final_params })
        }
        ModeArg::Incoherent => {
            let h = train(&topology, &pairs, &tc)?;
            (h.records, SavedModel::Incoherent { params: h.final_params })
        }
    };
    let dir = out_dir(&a.out, "train")?;
    write_history(&records, &data.ids(), dir.join("history.csv"))?;
    ModelFile {
        vocabulary: data.vocabulary().to_vec(),
        model,
    }
    .save(&dir.join("params.json"))?;
    if let Some(last) = records.last() {
        say(stdout, format!("iteration {} loss {}", last.iteration, last.loss));
    }
    Ok(())
}

pub fn eval(a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = ModelFile::load(&a.params)?;
    let data = match (&a.dataset, &a.corpus) {
        (Some(path), _) => load_dataset(path)?,
        (None, Some(name)) => builtin_corpus(name)?.1,
        (None, None) => {
            let found = ["accelerate", "verse-default"]
                .iter()
                .map(|n| builtin_corpus(n).map(|c| c.1))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .find(|d| d.vocabulary() == model.vocabulary.as_slice());
            found.ok_or_else(|| QsnnError::InvalidConfig("no shipped corpus matches; pass --dataset".into()))?
        }
    };
    data.ensure_vocabulary(&model.vocabulary)?;
    let mut rows = vec!["id,label,p_yes,p_no,p_undetermined,predicted".to_string()];
    for ((id, seq), pair) in data.ids().iter().zip(data.sequences()).zip(data.pairs()) {
        let p = model.predict(&seq)?;
        let predicted = if p.p_yes >= p.p_no { "Yes" } else { "No" };
        rows.push(format!(
            "{id},{},{},{},{},{predicted}",
            pair.label, p.p_yes, p.p_no, p.p_undetermined
        ));
    }
    for row in &rows {
        say(stdout, row.clone());
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| QsnnError::io(dir, e))?;
        let path = dir.join("eval.csv");
        fs::write(&path, rows.join("\n") + "\n").map_err(|e| QsnnError::io(&path, e))?;
    }
    Ok(())
}
