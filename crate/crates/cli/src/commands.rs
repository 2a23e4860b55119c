use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use switchseg::bench::{bench_dc_forward, BenchConfig};
use switchseg::discrete::EmConfig;
use switchseg::experiment::{bad_init_params, gsarm, usarm};
use switchseg::model::{Boundary, FilterMode, Model};
use switchseg::pipeline::{decode, fit, sample, smooth};
use switchseg::synth::{
    gen_sarm_switching, gen_switching_sinusoid, reference_duration_law, segmentation_error,
    segmentation_error_best_permutation, SarmParams,
};

use crate::io::{
    read_model, read_regimes, read_series, write_json, write_labeled, write_model, write_posterior,
    write_segmentation, SeriesFile,
};
use crate::svg::{render, Timeline};
use crate::{BenchArgs, BoundaryArg, Cli, Command, EvalArgs, FilterModeArg, FitArgs, GenerateArgs, InferArgs, Preset};

pub const THREADS_ENV: &str = "SWITCHSEG_THREADS";

/// 2 for numerical failures inside the library, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|c| c.downcast_ref::<switchseg::Error>().is_some_and(switchseg::Error::is_numerical));
    if numerical {
        2
    } else {
        1
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, cli.seed),
        Command::Fit(a) => fit_cmd(a),
        Command::Smooth(a) => infer(a, Task::Smooth, cli.seed),
        Command::Viterbi(a) => infer(a, Task::Viterbi, cli.seed),
        Command::Sample(a) => infer(a, Task::Sample, cli.seed),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a, cli.seed),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))
}

#[derive(Serialize)]
struct GenerateMeta {
    preset: &'static str,
    seed: u64,
    n_obs: usize,
    n_segments: usize,
    /// 1-based first step of every segment.
    segment_starts: Vec<usize>,
}

fn generate(a: &GenerateArgs, seed: u64) -> Result<()> {
    create_dir(&a.out)?;
    let (name, data) = match a.model {
        Preset::SarmReference => {
            let p = SarmParams::reference_defaults();
            let law = reference_duration_law(p.n_regimes());
            let data = gen_sarm_switching(&p, &law, a.switches, seed)?;
            write_model(&a.out.join("gsarm.json"), &gsarm(&p)?)?;
            write_model(&a.out.join("usarm.json"), &usarm(&p, &law)?)?;
            let bad = bad_init_params();
            write_model(&a.out.join("gsarm_init.json"), &gsarm(&bad)?)?;
            write_model(&a.out.join("usarm_init.json"), &usarm(&bad, &law)?)?;
            ("sarm-paper", data)
        }
        Preset::Sinusoid => ("sinusoid", gen_switching_sinusoid(seed)?),
    };
    write_labeled(&a.out.join("series.csv"), &data)?;
    write_json(
        &a.out.join("meta.json"),
        &GenerateMeta {
            preset: name,
            seed,
            n_obs: data.series.len(),
            n_segments: data.true_boundaries.len(),
            segment_starts: data.true_boundaries.iter().map(|b| b + 1).collect(),
        },
    )
}

#[derive(Serialize)]
struct FitReport {
    model_type: &'static str,
    iterations: usize,
    converged: bool,
    log_likelihood_trace: Vec<f64>,
}

fn fit_cmd(a: &FitArgs) -> Result<()> {
    let init = read_model(&a.model)?;
    let data = read_series(&a.data)?;
    let cfg = EmConfig {
        max_iter: a.max_iter,
        tol: a.tol,
        learn_initial: !a.fixed_transition,
        learn_transition: !a.fixed_transition,
    };
    let r = fit(&init, &data.series, &cfg)?;
    create_dir(&a.out)?;
    write_model(&a.out.join("model.json"), &r.model)?;
    write_json(
        &a.out.join("fit.json"),
        &FitReport {
            model_type: r.model.type_name(),
            iterations: r.trace.len().saturating_sub(1),
            converged: r.converged,
            log_likelihood_trace: r.trace,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Smooth,
    Viterbi,
    Sample,
}

fn apply_overrides(mut model: Model, a: &InferArgs) -> Result<Model> {
    if let Some(b) = a.boundary {
        let b = match b {
            BoundaryArg::Relaxed => Boundary::Relaxed,
            BoundaryArg::Strict => Boundary::Strict,
        };
        match &mut model {
            Model::DurationDc(m) | Model::DurationIc(m) => m.boundary = b,
            Model::Segmental(m) => m.boundary = b,
            m => bail!("--boundary does not apply to {} models", m.type_name()),
        }
    }
    if let Some(f) = a.filter_mode {
        let f = match f {
            FilterModeArg::Collapsed => FilterMode::Collapsed,
            FilterModeArg::Exact => FilterMode::Exact,
        };
        match model {
            Model::Slgssm(m) => model = Model::Slgssm(m.with_mode(f)),
            m => bail!("--filter-mode does not apply to {} models", m.type_name()),
        }
    }
    Ok(model)
}

/// Worker cap from `SWITCHSEG_THREADS`, else the available parallelism.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("{THREADS_ENV} must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, usize::from)),
    }
}

/// Deterministic per-file seed.
fn child_seed(root: u64, index: usize) -> u64 {
    let mut z = root.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Serialize)]
struct InferReport {
    task: &'static str,
    model_type: &'static str,
    data: String,
    n_obs: usize,
    n_regimes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_joint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    segmentation_error: Option<f64>,
}

fn infer_one(model: &Model, task: Task, path: &Path, out: &Path, seed: u64) -> Result<()> {
    let SeriesFile { series, regimes: truth } = read_series(path)?;
    create_dir(out)?;
    let mut report = InferReport {
        task: match task {
            Task::Smooth => "smooth",
            Task::Viterbi => "viterbi",
            Task::Sample => "sample",
        },
        model_type: model.type_name(),
        data: path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
        n_obs: series.len(),
        n_regimes: model.n_regimes(),
        log_likelihood: None,
        log_joint: None,
        seed: None,
        segmentation_error: None,
    };
    let (regimes, gamma) = match task {
        Task::Smooth => {
            let s = smooth(model, &series)?;
            write_posterior(&out.join("posterior.csv"), &s.gamma)?;
            write_segmentation(&out.join("segmentation.csv"), &s.regimes, None)?;
            report.log_likelihood = Some(s.log_likelihood);
            (s.regimes, Some(s.gamma))
        }
        Task::Viterbi => {
            let d = decode(model, &series)?;
            write_segmentation(&out.join("segmentation.csv"), &d.regimes, d.counts.as_deref())?;
            report.log_joint = Some(d.log_joint);
            (d.regimes, None)
        }
        Task::Sample => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = sample(model, &series, &mut rng)?;
            write_segmentation(&out.join("segmentation.csv"), &r, None)?;
            report.seed = Some(seed);
            (r, None)
        }
    };
    if let Some(t) = &truth {
        report.segmentation_error = Some(segmentation_error(&regimes, t)?);
    }
    let values = (series.dim() == 1).then(|| series.values());
    let title = format!("{} {} {}", report.task, report.model_type, report.data);
    let svg = render(&Timeline { title: &title, values, estimate: &regimes, truth: truth.as_deref(), gamma: gamma.as_ref() });
    fs::write(out.join("timeline.svg"), svg)?;
    write_json(&out.join("report.json"), &report)
}

fn infer(a: &InferArgs, task: Task, seed: u64) -> Result<()> {
    let model = apply_overrides(read_model(&a.model)?, a)?;
    let jobs: Vec<(usize, &PathBuf, PathBuf)> = if a.data.len() == 1 {
        vec![(0, &a.data[0], a.out.clone())]
    } else {
        let mut seen = std::collections::BTreeSet::new();
        a.data
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let stem = p.file_stem().map_or_else(|| format!("series_{i}"), |s| s.to_string_lossy().into_owned());
                let name = if seen.insert(stem.clone()) { stem } else { format!("{stem}_{i}") };
                (i, p, a.out.join(name))
            })
            .collect()
    };
    let cap = thread_cap()?;
    for chunk in jobs.chunks(cap) {
        let results: Vec<Result<()>> = std::thread::scope(|sc| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(i, p, out)| {
                    let model = &model;
                    sc.spawn(move || {
                        infer_one(model, task, p, out, child_seed(seed, *i))
                            .with_context(|| format!("processing {}", p.display()))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for r in results {
            r?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    error: f64,
    n_obs: usize,
    permuted: bool,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let truth = read_regimes(&a.truth)?;
    let est = read_regimes(&a.estimate)?;
    let error = if a.permute {
        segmentation_error_best_permutation(&est, &truth)?
    } else {
        segmentation_error(&est, &truth)?
    };
    let report = EvalReport { error, n_obs: truth.len(), permuted: a.permute };
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            print_json(&report)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn bench(a: &BenchArgs, seed: u64) -> Result<()> {
    let cfg = BenchConfig {
        n_obs: a.n_obs,
        n_regimes: a.regimes,
        d_max: a.d_max.clone(),
        regime_sweep: a.regime_sweep.clone(),
        reps: a.reps,
        seed,
    };
    if cfg.n_obs == 0 || cfg.n_regimes == 0 || cfg.d_max.contains(&0) || cfg.regime_sweep.contains(&0) {
        bail!("bench sizes must be positive");
    }
    let report = bench_dc_forward(&cfg)?;
    match &a.out {
        Some(p) => write_json(p, &report),
        None => {
            print_json(&report)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn child_seeds_differ_and_repeat() {
        assert_eq!(child_seed(7, 0), child_seed(7, 0));
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
        assert_ne!(child_seed(7, 0), child_seed(8, 0));
    }

    #[test]
    fn numerical_errors_map_to_two() {
        let e = anyhow::Error::new(switchseg::Error::ImpossibleData { t: 3 }).context("outer");
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(switchseg::Error::InvalidInput("x".into()));
        assert_eq!(exit_code(&e), 1);
    }
}
