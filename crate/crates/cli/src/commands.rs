//! Subcommands that build, train or query a network.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use leafnet::ccdc::Series;
use leafnet::dataio::write_canonical;
use leafnet::interpret::{activation_max, grad_cam, tsne};
use leafnet::model::ModelState;
use leafnet::training::{crossval, evaluate, fit, Evaluation, FoldReport};
use leafnet::{Dataset, Rng, Scalar, Tensor};

use crate::config::RunConfig;
use crate::data::{load_for_model, load_model, load_primary, load_test, save_model};
use crate::error::{CliError, CliResult, Context, EXIT_DATA};
use crate::output::Output;

/// Seeds of the independent runs.
fn run_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.repeats as u64).map(|r| cfg.train.seed + r).collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `name` with `.seed{s}` before the extension when there are several runs.
fn per_seed(name: &str, seed: u64, repeats: usize) -> String {
    if repeats == 1 {
        return name.to_string();
    }
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}.seed{seed}.{ext}"),
        None => format!("{name}.seed{seed}"),
    }
}

fn model_path(cfg: &RunConfig, out: &Output, seed: u64) -> PathBuf {
    match &cfg.model {
        Some(p) if cfg.repeats == 1 => p.clone(),
        Some(p) => {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "model.lnm".into());
            p.with_file_name(per_seed(&name, seed, cfg.repeats))
        }
        None => out.path(&per_seed("model.lnm", seed, cfg.repeats)),
    }
}

#[derive(Serialize)]
struct TrainRun {
    seed: u64,
    model: PathBuf,
    epochs_run: usize,
    best_epoch: usize,
    stopped_early: bool,
    val_accuracy: f64,
    val_loss: f64,
    test: Option<Evaluation>,
}

#[derive(Serialize)]
struct TrainSummary {
    class_names: Vec<String>,
    train_samples: usize,
    test_samples: Option<usize>,
    runs: Vec<TrainRun>,
    mean_test_accuracy: Option<f64>,
    std_test_accuracy: Option<f64>,
}

pub fn train<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_primary(&cfg.data)?;
    let test = load_test(&cfg.data, &ds.class_names)?;
    if let Some(t) = &test {
        if t.series_len() != ds.series_len() {
            return Err(CliError::new(
                EXIT_DATA,
                "dataio",
                format!("test series length {} differs from training length {}", t.series_len(), ds.series_len()),
            ));
        }
    }
    let arch = cfg.arch.build(ds.series_len(), ds.num_classes())?;
    let out = Output::create(cfg)?;
    let mut runs = Vec::new();
    for seed in run_seeds(cfg) {
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;
        let model = ModelState::<T>::build(arch.clone(), &mut Rng::new(seed)).ctx("model")?;
        log::info!("training seed {seed}: {} parameters, {} samples", model.parameter_count(), ds.len());
        let (model, history) = fit(model, &ds, &train_cfg).ctx("training")?;
        let path = model_path(cfg, &out, seed);
        save_model(&model, &path, &ds.class_names, seed, cfg)?;
        out.write_csv(&per_seed("history.csv", seed, cfg.repeats), &history.to_csv())?;
        let test_eval = test.as_ref().map(|t| evaluate(&model, t)).transpose().ctx("training")?;
        if let Some(e) = &test_eval {
            log::info!("seed {seed}: test accuracy {:.4}", e.accuracy);
        }
        let best = history.best();
        runs.push(TrainRun {
            seed,
            model: path,
            epochs_run: history.epochs.len(),
            best_epoch: best.epoch,
            stopped_early: history.stopped_early,
            val_accuracy: best.val_accuracy,
            val_loss: best.val_loss,
            test: test_eval,
        });
    }
    let accuracies: Vec<f64> = runs.iter().filter_map(|r| r.test.as_ref().map(|e| e.accuracy)).collect();
    let stats = (!accuracies.is_empty()).then(|| mean_std(&accuracies));
    let summary = TrainSummary {
        class_names: ds.class_names.clone(),
        train_samples: ds.len(),
        test_samples: test.as_ref().map(Dataset::len),
        runs,
        mean_test_accuracy: stats.map(|s| s.0),
        std_test_accuracy: stats.map(|s| s.1),
    };
    out.write_json("train.json", &summary)?;
    if let Some((mean, std)) = stats {
        println!("test accuracy {mean:.4} ± {std:.4} over {} runs", accuracies.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    class_names: Vec<String>,
    samples: usize,
    #[serde(flatten)]
    evaluation: Evaluation,
}

pub fn eval<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let loaded = load_model::<T>(cfg.require_model()?)?;
    let ds = load_for_model(&cfg.data, &loaded)?;
    let evaluation = evaluate(&loaded.model, &ds).ctx("training")?;
    let out = Output::create(cfg)?;
    let mut csv = String::from("id,label,predicted\n");
    for ((s, l), p) in ds.samples.iter().zip(&ds.labels).zip(&evaluation.predictions) {
        let _ = writeln!(csv, "{},{l},{p}", s.id);
    }
    out.write_csv("predictions.csv", &csv)?;
    println!("accuracy {:.4} ({} samples)", evaluation.accuracy, ds.len());
    let class_names = loaded.class_names.unwrap_or_else(|| ds.class_names.clone());
    out.write_json("eval.json", &EvalSummary { class_names, samples: ds.len(), evaluation })?;
    Ok(())
}

#[derive(Serialize)]
struct CrossvalRepeat {
    seed: u64,
    reports: Vec<FoldReport>,
}

#[derive(Serialize)]
struct CrossvalSummary {
    class_names: Vec<String>,
    samples: usize,
    repeats: Vec<CrossvalRepeat>,
}

pub fn crossvalidate<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_primary(&cfg.data)?;
    let arch = cfg.arch.build(ds.series_len(), ds.num_classes())?;
    let cv = cfg.crossval.to_core()?;
    let out = Output::create(cfg)?;
    let mut repeats = Vec::new();
    for seed in run_seeds(cfg) {
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;
        let reports = crossval::<T>(&ds, &arch, &train_cfg, &cv, seed).ctx("crossval")?;
        for r in &reports {
            let name = format!("crossval.{}.csv", r.pipeline.replace('+', "_"));
            out.write_csv(&per_seed(&name, seed, cfg.repeats), &r.to_csv())?;
            println!("seed {seed} {}: mean {:.4} ± {:.4} (best {:.4}, worst {:.4})", r.pipeline, r.mean, r.std, r.best, r.worst);
        }
        repeats.push(CrossvalRepeat { seed, reports });
    }
    out.write_json(
        "crossval.json",
        &CrossvalSummary { class_names: ds.class_names.clone(), samples: ds.len(), repeats },
    )?;
    Ok(())
}

fn feature_matrix<T: Scalar>(model: &ModelState<T>, ds: &Dataset) -> CliResult<Tensor<f64>> {
    let feats = model.extract_features(&ds.all::<T>()).ctx("model")?;
    let shape = feats.shape().to_vec();
    Tensor::new(shape, feats.data().iter().map(|v| v.as_f64()).collect()).ctx("model")
}

pub fn features<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let loaded = load_model::<T>(cfg.require_model()?)?;
    let ds = load_for_model(&cfg.data, &loaded)?;
    let feats = feature_matrix(&loaded.model, &ds)?;
    let width = feats.shape()[1];
    let samples = ds
        .samples
        .iter()
        .zip(feats.data().chunks(width))
        .map(|(s, row)| Series { id: s.id.clone(), values: row.to_vec() })
        .collect();
    let mut out_ds = Dataset::new(samples, ds.labels.clone(), ds.class_names.clone()).ctx("dataio")?;
    out_ds.manifest = ds.manifest.clone();
    let out = Output::create(cfg)?;
    let path = out.path("features.csv");
    write_canonical(&out_ds, &path, &out.comments()).ctx("output")?;
    log::info!("wrote {} × {width} features to {}", ds.len(), path.display());
    Ok(())
}

/// Samples named in `interpret.samples`, or all of them.
fn selected(cfg: &RunConfig, ds: &Dataset) -> CliResult<Vec<usize>> {
    if cfg.interpret.samples.is_empty() {
        return Ok((0..ds.len()).collect());
    }
    cfg.interpret
        .samples
        .iter()
        .map(|id| {
            ds.samples
                .iter()
                .position(|s| &s.id == id)
                .ok_or_else(|| CliError::new(EXIT_DATA, "interpret", format!("no sample with id {id:?}")))
        })
        .collect()
}

fn check_class(class: usize, classes: usize) -> CliResult<()> {
    if class >= classes {
        return Err(CliError::config(format!("class {class} out of range for {classes} classes")));
    }
    Ok(())
}

fn join_values(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn value_header(len: usize) -> String {
    (0..len).map(|i| format!("v{i}")).collect::<Vec<_>>().join(",")
}

pub fn gradcam<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let loaded = load_model::<T>(cfg.require_model()?)?;
    let ds = load_for_model(&cfg.data, &loaded)?;
    let classes = loaded.model.config.num_classes;
    if let Some(c) = cfg.interpret.class {
        check_class(c, classes)?;
    }
    let mut csv = format!("id,label,class,is_zero,{}\n", value_header(ds.series_len()));
    for i in selected(cfg, &ds)? {
        let class = cfg.interpret.class.unwrap_or(ds.labels[i]);
        let map = grad_cam(&loaded.model, &ds.samples[i], class).ctx("interpret")?;
        let _ = writeln!(csv, "{},{},{class},{},{}", map.series_id, ds.labels[i], map.is_zero, join_values(&map.values));
    }
    Output::create(cfg)?.write_csv("gradcam.csv", &csv)?;
    Ok(())
}

pub fn actmax<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let loaded = load_model::<T>(cfg.require_model()?)?;
    let model = &loaded.model;
    let classes = model.config.num_classes;
    let targets: Vec<usize> = match cfg.interpret.class {
        Some(c) => {
            check_class(c, classes)?;
            vec![c]
        }
        None => (0..classes).collect(),
    };
    let name = |c: usize| loaded.class_names.as_ref().map_or_else(|| c.to_string(), |n| n[c].clone());
    let mut csv = format!("class,class_name,{}\n", value_header(model.config.input_length));
    let mut trace = String::from("class,step,objective\n");
    for c in targets {
        let result = activation_max(model, c, &cfg.actmax).ctx("interpret")?;
        let _ = writeln!(csv, "{c},{},{}", name(c), join_values(&result.series.values));
        for (step, v) in result.objective_trace.iter().enumerate() {
            let _ = writeln!(trace, "{c},{step},{v}");
        }
        log::info!("class {c}: objective {} -> {}", result.initial_objective(), result.final_objective());
    }
    let out = Output::create(cfg)?;
    out.write_csv("actmax.csv", &csv)?;
    out.write_csv("actmax_trace.csv", &trace)?;
    Ok(())
}

/// Embeds the model's features when a model is given, the raw series
/// otherwise.
pub fn embed<T: Scalar>(cfg: &RunConfig) -> CliResult<()> {
    let (ds, points) = match &cfg.model {
        Some(path) => {
            let loaded = load_model::<T>(path)?;
            let ds = load_for_model(&cfg.data, &loaded)?;
            let feats = feature_matrix(&loaded.model, &ds)?;
            (ds, feats)
        }
        None => {
            let ds = load_primary(&cfg.data)?;
            let raw = ds.all::<f64>();
            (ds, raw)
        }
    };
    let result = tsne(&points, &cfg.tsne).ctx("interpret")?;
    let ids: Vec<String> = ds.samples.iter().map(|s| s.id.clone()).collect();
    let mut kl = String::from("iteration,kl\n");
    for (it, v) in &result.kl_trace {
        let _ = writeln!(kl, "{it},{v}");
    }
    let out = Output::create(cfg)?;
    out.write_csv("tsne.csv", &result.to_csv(&ids, &ds.labels))?;
    out.write_csv("tsne_kl.csv", &kl)?;
    Ok(())
}
