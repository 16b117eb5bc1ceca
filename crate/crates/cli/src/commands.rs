use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;
use top2vec_core::metric::{build_stats, evaluate as score, load_external_topics, TopicSpec};
use top2vec_core::synthetic::ThemedCorpus;
use top2vec_core::topics::{search_documents, TopicModel};
use top2vec_core::{
    compose_query, load_corpus, load_model, reduce as reduce_points, run_pipeline, save_model, ClusterConfig,
    EmbeddingConfig, Error, ModelArchive, PipelineConfig, ReductionConfig, WorkerMode,
};

use crate::manifest::RunManifest;
use crate::{EvaluateArgs, ExportArgs, ExportWhat, GenerateArgs, ReduceArgs, SearchArgs, TopicsArgs, TrainArgs};

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => std::io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn save(archive: &ModelArchive, path: &Path) -> Result<()> {
    save_model(archive, path)?;
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let config = PipelineConfig {
        embedding: EmbeddingConfig {
            vector_size: a.vector_size,
            window: a.window,
            epochs: a.epochs,
            initial_learning_rate: a.initial_learning_rate,
            final_learning_rate: a.final_learning_rate,
            min_count: a.min_count,
            subsample_threshold: a.subsample_threshold,
            seed: a.seed,
            worker_mode: if a.parallel { WorkerMode::Parallel } else { WorkerMode::Deterministic },
        },
        reduction: ReductionConfig {
            n_neighbors: a.n_neighbors,
            n_components: a.n_components,
            metric: a.metric.into(),
            min_dist: a.min_dist,
            layout_epochs: a.layout_epochs,
            negative_sample_rate: a.negative_sample_rate,
            seed: a.seed,
        },
        clustering: ClusterConfig {
            min_cluster_size: a.min_cluster_size,
            min_samples: a.min_samples,
        },
        topic_words: a.topic_words,
    };
    let mut manifest = RunManifest::new("train", &config)?;
    manifest.seed = Some(a.seed);
    manifest.input(&a.corpus.corpus)?;

    let start = Instant::now();
    let docs = load_corpus(&a.corpus.corpus, a.corpus.format.into()).map_err(|e| e.in_stage("corpus"))?;
    manifest.timing("corpus", start.elapsed());
    let out = run_pipeline(&docs, &config)?;
    for (stage, t) in &out.timings {
        manifest.timing(stage, *t);
    }
    let start = Instant::now();
    save(&out.archive, &a.output)?;
    manifest.timing("save", start.elapsed());
    manifest.write_for(&a.output)?;

    let labeling = &out.archive.labeling;
    println!(
        "{} topics found in {} documents ({} noise); vocabulary {} words",
        labeling.cluster_count,
        docs.len(),
        labeling.noise_count(),
        out.archive.embedding.vocabulary().len()
    );
    Ok(())
}

pub fn topics(a: TopicsArgs) -> Result<()> {
    let archive = load_model(&a.archive)?;
    let model = archive.topics.with_word_count(&archive.embedding, a.top_n)?;
    let summaries = model.summaries();
    let out = if a.format.json {
        serde_json::to_string_pretty(&summaries)? + "\n"
    } else if a.format.csv {
        let mut s = String::from("topic_id,size,words\n");
        for t in &summaries {
            let words: Vec<&str> = t.words.iter().map(|w| w.word.as_str()).collect();
            writeln!(s, "{},{},{}", t.topic_id, t.size, words.join(" "))?;
        }
        s
    } else {
        let mut s = String::new();
        for t in &summaries {
            let words: Vec<&str> = t.words.iter().map(|w| w.word.as_str()).collect();
            writeln!(s, "topic {:>3}  {:>6} docs  {}", t.topic_id, t.size, words.join(" "))?;
        }
        s
    };
    write_output(None, &out)
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    let mut manifest = RunManifest::new("reduce", json!({ "to": a.to }))?;
    manifest.input(&a.archive)?;
    let mut archive = load_model(&a.archive)?;
    let before = archive.topics.len();
    let start = Instant::now();
    archive.topics = archive.topics.reduce(&archive.embedding, a.to)?;
    manifest.timing("reduce", start.elapsed());
    save(&archive, &a.output)?;
    manifest.write_for(&a.output)?;
    println!("reduced {before} topics to {}", archive.topics.len());
    Ok(())
}

#[derive(Serialize)]
struct SearchResults {
    documents: Vec<(String, f64)>,
    topics: Vec<(usize, f64)>,
}

pub fn search(a: SearchArgs) -> Result<()> {
    let archive = load_model(&a.archive)?;
    let emb = &archive.embedding;
    // Resolve everything first so every unknown word is reported at once.
    let all: Vec<&str> = a.words.iter().chain(&a.not_words).map(String::as_str).collect();
    emb.vocabulary().lookup_all(&all)?;
    let vectors = |ws: &[String]| -> Result<Vec<Vec<f64>>> {
        Ok(ws.iter().map(|w| emb.vector_for_word(w)).collect::<top2vec_core::Result<_>>()?)
    };
    let query = compose_query(&vectors(&a.words)?, &vectors(&a.not_words)?)?;
    let results = SearchResults {
        documents: search_documents(emb, &query, a.top_n)?,
        topics: archive
            .topics
            .search_topics(&query, a.top_n)?
            .into_iter()
            .map(|(i, s)| (archive.topics.topics[i].id, s))
            .collect(),
    };
    let out = if a.json {
        serde_json::to_string_pretty(&results)? + "\n"
    } else {
        let mut s = String::from("documents\n");
        for (id, sim) in &results.documents {
            writeln!(s, "  {sim:.4}  {id}")?;
        }
        s.push_str("topics\n");
        for (id, sim) in &results.topics {
            writeln!(s, "  {sim:.4}  topic {id}")?;
        }
        s
    };
    write_output(None, &out)
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::new(
        "evaluate",
        json!({ "top_n": a.top_n, "topics": a.topics, "log_base": a.log_base }),
    )?;
    manifest.input(&a.archive)?;
    manifest.input(&a.corpus.corpus)?;
    let archive = load_model(&a.archive)?;
    let docs = load_corpus(&a.corpus.corpus, a.corpus.format.into())?;
    let vocab = archive.embedding.vocabulary();
    let stats = build_stats(&docs, vocab)?.with_log_base(a.log_base)?;
    let spec = match &a.external {
        Some(path) => {
            manifest.input(path)?;
            let spec = load_external_topics(path, vocab, &stats)?;
            if let Some(k) = a.topics.filter(|&k| k != spec.len()) {
                return Err(Error::InvalidInput(format!("external file has {} topics, --topics asked for {k}", spec.len())).into());
            }
            spec
        }
        None => {
            let mut model: TopicModel = archive.topics.clone();
            if let Some(k) = a.topics {
                model = model.reduce(&archive.embedding, k)?;
            }
            if model.n_words < a.top_n {
                model = model.with_word_count(&archive.embedding, a.top_n)?;
            }
            TopicSpec::from_model(&model, &stats, vocab)?
        }
    };
    let report = score(&spec, &stats, a.top_n)?;
    let out = if a.format.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else if a.format.csv {
        report.to_csv()
    } else {
        let unit = if report.log_base == 2.0 { "bits".to_owned() } else { format!("log base {}", report.log_base) };
        let mut s = String::new();
        for t in &report.per_topic {
            writeln!(s, "topic {:>3}  {:>10.4}  {}", t.topic_id, t.pwi, t.words.join(" "))?;
        }
        writeln!(s, "total PWI {:.4} {unit} (K = {}, n = {})", report.total, report.k, report.n)?;
        s
    };
    write_output(None, &out)?;
    if let Some(path) = &a.output {
        let file = if a.format.csv { report.to_csv() } else { serde_json::to_string_pretty(&report)? + "\n" };
        write_output(Some(path), &file)?;
        manifest.write_for(path)?;
    }
    Ok(())
}

pub fn export(a: ExportArgs) -> Result<()> {
    let archive = load_model(&a.archive)?;
    let emb = &archive.embedding;
    let ids = emb.doc_ids();
    let mut manifest = RunManifest::new("export", json!({ "what": a.what.name() }))?;
    manifest.input(&a.archive)?;
    let mut s = String::new();
    match a.what {
        ExportWhat::Coords2d => {
            let config = ReductionConfig {
                n_components: 2,
                ..archive.reduction_config.clone()
            };
            manifest.config = serde_json::to_value(&config)?;
            manifest.seed = Some(config.seed);
            let start = Instant::now();
            let coords = reduce_points(emb.doc_vectors(), &config)?;
            manifest.timing("reduction", start.elapsed());
            s.push_str("doc_id,x,y,label\n");
            for (i, id) in ids.iter().enumerate() {
                writeln!(s, "{id},{},{},{}", coords[[i, 0]], coords[[i, 1]], archive.labeling.labels[i])?;
            }
        }
        ExportWhat::Labels => {
            s.push_str("doc_id,cluster,topic\n");
            for (i, id) in ids.iter().enumerate() {
                let topic = archive.topics.topics[archive.topics.assignment[i]].id;
                writeln!(s, "{id},{},{topic}", archive.labeling.labels[i])?;
            }
        }
        ExportWhat::Vectors => {
            s.push_str("doc_id");
            for k in 0..emb.dim() {
                write!(s, ",v{k}")?;
            }
            s.push('\n');
            for (i, id) in ids.iter().enumerate() {
                s.push_str(id);
                for x in emb.doc_vector(i) {
                    write!(s, ",{x}")?;
                }
                s.push('\n');
            }
        }
    }
    write_output(a.output.as_deref(), &s)?;
    if let Some(path) = &a.output {
        manifest.write_for(path)?;
    }
    Ok(())
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    if a.themes == 0 || a.words_per_theme == 0 || a.docs == 0 || a.mean_length < 2 {
        return Err(Error::InvalidConfig("themes, words per theme and docs must be positive, mean length at least 2".into()).into());
    }
    let corpus = ThemedCorpus::new(a.themes, a.words_per_theme, a.filler_words);
    let docs = corpus.documents(a.docs, a.mean_length, a.seed);
    let mut s = String::new();
    for d in &docs {
        writeln!(s, "{}", json!({ "id": d.id, "text": d.raw }))?;
    }
    write_output(Some(&a.output), &s).with_context(|| "writing corpus")?;
    let mut manifest = RunManifest::new(
        "generate",
        json!({
            "themes": a.themes,
            "words_per_theme": a.words_per_theme,
            "filler_words": a.filler_words,
            "docs": a.docs,
            "mean_length": a.mean_length,
        }),
    )?;
    manifest.seed = Some(a.seed);
    manifest.write_for(&a.output)?;
    println!("wrote {} documents to {}", docs.len(), a.output.display());
    Ok(())
}
