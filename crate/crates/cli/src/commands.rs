use std::fs;
use std::path::Path;

use feedback_core::corpus::{
    format_annotations, length_bucket_stats, load_annotations, load_corpus, save_annotations,
    save_corpus, split_train_test, Annotations, Corpus, FeedbackRecord, Task,
};
use feedback_core::embeddings::{train_word2vec, W2vConfig};
use feedback_core::eval::format_table;
use feedback_core::features::parse_feature_set;
use feedback_core::maxent::TrainConfig;
use feedback_core::pipeline::{
    grid_specs, run_experiment, EmbeddingSource, ExperimentSpec, ExperimentSummary, ModelKind,
    TrainedModel,
};
use feedback_core::preprocess::{preprocess_corpus, StopwordList};
use feedback_core::recurrent::NetworkConfig;
use feedback_core::report::{analyze_batch, build_report, emit, ReportMetadata};
use feedback_core::synth::{generate, SynthConfig};
use feedback_core::{Error, TrainedModel64};

use crate::args::*;
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_mix<const N: usize>(flag: &str, list: &str) -> CliResult<[f64; N]> {
    let values: Vec<f64> = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("--{flag}: {e}")))?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| usage(format!("--{flag} needs {N} comma-separated values, got {}", v.len())))
}

fn load_input(args: &CorpusArgs) -> CliResult<(Corpus, StopwordList)> {
    let mut corpus = load_corpus(&args.corpus)?;
    if let Some(path) = &args.annotations {
        corpus = corpus.with_annotations(load_annotations(path)?)?;
    }
    let stopwords = match &args.stopwords {
        Some(path) => StopwordList::load(path)?,
        None => StopwordList::default(),
    };
    Ok((corpus, stopwords))
}

fn write_text(path: &Path, content: &str) -> CliResult<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e).into())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e).into())
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    let config = SynthConfig {
        size: args.size,
        separability: args.separability,
        seed: args.seed,
        sentiment_mix: parse_mix("sentiment-mix", &args.sentiment_mix)?,
        topic_mix: parse_mix("topic-mix", &args.topic_mix)?,
        semesters: args
            .semesters
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect(),
        ..SynthConfig::default()
    };
    if config.size < 10 || !(0.0..=1.0).contains(&config.separability) {
        return Err(usage("--size must be at least 10 and --separability within [0, 1]"));
    }
    let corpus = generate(&config)?;
    save_corpus(&args.out, corpus.records())?;
    if let Some(path) = &args.annotations_out {
        save_annotations(path, corpus.annotations().expect("synthetic corpora are annotated"))?;
    }
    log::info!("wrote {} records to {}", corpus.len(), args.out.display());
    Ok(())
}

/// Renumbers ids to match line numbers of the written file and carries annotations along.
fn renumber(corpus: &Corpus) -> (Vec<FeedbackRecord>, Option<Annotations>) {
    let mut annotations = corpus.annotations().map(|_| Annotations::new());
    let records = corpus
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let id = format!("{:06}", i + 1);
            if let (Some(out), Some(a)) = (annotations.as_mut(), corpus.annotation(&r.id)) {
                out.insert(id.clone(), a.to_vec());
            }
            FeedbackRecord { id, ..r.clone() }
        })
        .collect();
    (records, annotations)
}

pub fn split(args: &SplitArgs) -> CliResult<()> {
    if !(args.ratio > 0.0 && args.ratio < 1.0) {
        return Err(usage("--ratio must lie strictly between 0 and 1"));
    }
    let (corpus, _) = load_input(&args.input)?;
    let (train, test) = split_train_test(&corpus, args.ratio, args.seed)?;
    for (part, path) in [(&train, &args.train_out), (&test, &args.test_out)] {
        let (records, annotations) = renumber(part);
        save_corpus(path, &records)?;
        if let Some(a) = annotations {
            let ann_path = path.with_extension("ann");
            write_text(&ann_path, &format_annotations(&a))?;
        }
    }
    println!("train {} / test {}", train.len(), test.len());
    Ok(())
}

pub fn stats(args: &StatsArgs) -> CliResult<()> {
    let (corpus, stopwords) = load_input(&args.input)?;
    let stats = length_bucket_stats(&corpus, args.task, &stopwords)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats).map_err(Error::from)?);
    } else {
        print!("{}", stats.to_table());
    }
    Ok(())
}

fn w2v_config(args: &W2vArgs, seed: u64) -> W2vConfig {
    W2vConfig {
        dim: args.w2v_dim,
        window: args.w2v_window,
        negative: args.w2v_negative,
        epochs: args.w2v_epochs,
        learning_rate: args.w2v_lr,
        min_count: args.w2v_min_count,
        seed,
    }
}

pub fn train_embeddings(args: &EmbeddingArgs) -> CliResult<()> {
    let config = w2v_config(&args.w2v, args.seed);
    config.validate().map_err(|e| usage(e.to_string()))?;
    let (corpus, stopwords) = load_input(&args.input)?;
    let sentences: Vec<Vec<String>> = preprocess_corpus(&corpus, &stopwords).into_values().collect();
    let table = train_word2vec::<f64>(&sentences, &config)?;
    table.save_text(&args.out)?;
    log::info!("{} vectors of dimension {} written", table.len(), table.dim());
    Ok(())
}

/// Builds and validates the experiment before any file is read.
fn experiment_spec(task: Task, model: ModelKind, p: &ModelArgs) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(task, model);
    if let Some(list) = &p.features {
        spec.features = parse_feature_set(list).map_err(|e| usage(e.to_string()))?;
    }
    spec.embeddings = match (&p.embeddings, p.train_embeddings) {
        (Some(_), true) => return Err(usage("--embeddings and --train-embeddings are exclusive")),
        (Some(path), false) => Some(EmbeddingSource::File(path.clone())),
        (None, true) => Some(EmbeddingSource::TrainOnSplit),
        (None, false) => None,
    };
    spec.split_ratio = p.split;
    spec.seed = p.seed;
    spec.top_k = p.top_k;
    spec.min_df = p.min_df;
    spec.nb_alpha = p.alpha;
    spec.maxent = TrainConfig {
        learning_rate: p.maxent_lr,
        epochs: p.maxent_epochs,
        sigma2: p.sigma2,
        tolerance: p.maxent_tol,
        seed: p.seed,
        random_init: false,
    };
    spec.network = NetworkConfig {
        layers: p.layers,
        hidden: p.hidden,
        embedding_dim: p.w2v.w2v_dim,
        epochs: p.epochs,
        learning_rate: p.lr,
        dropout: p.dropout,
        seed: p.seed,
        clip_norm: (p.clip > 0.0).then_some(p.clip),
        peephole: !p.no_peephole,
        init_scale: p.init_scale,
        fine_tune_embeddings: p.fine_tune,
    };
    spec.word2vec = w2v_config(&p.w2v, p.seed);
    spec.averaging = p.averaging;
    if model.is_recurrent() || !spec.features.is_empty() {
        spec.validate().map_err(|e| usage(e.to_string()))?;
    }
    Ok(spec)
}

pub fn run(args: &RunArgs) -> CliResult<()> {
    let spec = experiment_spec(args.task, args.model, &args.params)?;
    spec.validate().map_err(|e| usage(e.to_string()))?;
    if spec.needs_annotations() && args.input.annotations.is_none() {
        return Err(usage("dep/pos features need --annotations"));
    }
    let (corpus, stopwords) = load_input(&args.input)?;
    let outcome = run_experiment(&spec, &corpus, &stopwords)?;
    create_dir(&args.out)?;
    outcome.model.save(args.out.join("model.json"))?;
    write_text(&args.out.join("metrics.json"), &(outcome.metrics_json()? + "\n"))?;
    write_text(&args.out.join("row.txt"), &format!("{}\n", outcome.row))?;
    println!("{}", outcome.row);
    Ok(())
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let tasks: &[Task] = match args.task {
        GridTask::Sentiment => &[Task::Sentiment],
        GridTask::Topic => &[Task::Topic],
        GridTask::Both => &[Task::Sentiment, Task::Topic],
    };
    if args.params.features.is_some() {
        return Err(usage("grid chooses feature sets itself; drop --features"));
    }
    let base = experiment_spec(tasks[0], ModelKind::Nb, &args.params)?;
    let plans: Vec<(Task, Vec<ExperimentSpec>)> = tasks.iter().map(|&t| (t, grid_specs(&base, t))).collect();
    for (_, specs) in &plans {
        for s in specs {
            s.validate().map_err(|e| usage(e.to_string()))?;
        }
    }
    let (corpus, stopwords) = load_input(&args.input)?;
    create_dir(&args.out)?;
    let mut summaries: Vec<ExperimentSummary> = Vec::new();
    let mut tables = String::new();
    for (task, specs) in &plans {
        let mut rows = Vec::new();
        let mut skipped = Vec::new();
        for spec in specs {
            if spec.needs_annotations() && corpus.annotations().is_none() {
                log::warn!("skipping {} {}: no --annotations", spec.model.display_name(), spec.features_label());
                skipped.push(format!("{} | {}", spec.model.display_name(), spec.features_label()));
                continue;
            }
            log::info!("{task}: {} {}", spec.model.display_name(), spec.features_label());
            let outcome = run_experiment(spec, &corpus, &stopwords)?;
            rows.push((
                outcome.summary.model.clone(),
                outcome.summary.features.clone(),
                outcome.summary.metrics.averaged(spec.averaging),
            ));
            summaries.push(outcome.summary);
        }
        tables.push_str(&format_table(&format!("{task} ({:?} average, %)", base.averaging), &rows));
        for row in skipped {
            tables.push_str(&format!("skipped (needs --annotations): {row}\n"));
        }
        tables.push('\n');
    }
    write_text(&args.out.join("grid.json"), &(serde_json::to_string_pretty(&summaries).map_err(Error::from)? + "\n"))?;
    write_text(&args.out.join("table.txt"), &tables)?;
    print!("{tables}");
    Ok(())
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model: TrainedModel64 = TrainedModel::load(&args.model_path)?;
    if let Some(text) = &args.text {
        if model.needs_annotations() {
            return Err(usage("this model uses dep/pos features; classify an annotated --corpus instead"));
        }
        let p = model.predict_text(text, None)?;
        println!("{}{}", p.label, if p.flagged { "\tflagged" } else { "" });
        return Ok(());
    }
    let path = args.corpus.as_ref().expect("clap enforces --text or --corpus");
    let mut corpus = load_corpus(path)?;
    if let Some(a) = &args.annotations {
        corpus = corpus.with_annotations(load_annotations(a)?)?;
    }
    for r in corpus.records() {
        let p = model.predict_record(&corpus, r)?;
        println!("{}\t{}{}", r.id, p.label, if p.flagged { "\tflagged" } else { "" });
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> CliResult<()> {
    if args.formats.is_empty() {
        return Err(usage("--formats needs at least one of json, csv, svg"));
    }
    let sentiment: TrainedModel64 = TrainedModel::load(&args.sentiment_model)?;
    let topic: TrainedModel64 = TrainedModel::load(&args.topic_model)?;
    let mut corpus = load_corpus(&args.corpus)?;
    if let Some(a) = &args.annotations {
        corpus = corpus.with_annotations(load_annotations(a)?)?;
    }
    let labeled = analyze_batch(&corpus, &sentiment, &topic)?;
    let metadata = ReportMetadata {
        sentiment_model: format!("{} ({})", sentiment.model.display_name(), args.sentiment_model.display()),
        topic_model: format!("{} ({})", topic.model.display_name(), args.topic_model.display()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let bundle = build_report(&labeled, metadata);
    let files = emit(&bundle, &args.formats, &args.out)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
