use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use qclp_core::classic::{self, LineConfig, SkipGramConfig, WalkConfig};
use qclp_core::corpus;
use qclp_core::graph::Adjacency;
use qclp_core::llm::{self, Cache, LlmClient, LlmClientConfig, MergeMethod, Transport};
use qclp_core::timedecay::{self, TimeDecayConfig};
use qclp_core::{seed, ConceptVocab, EdgeSplit, EmbeddingMatrix, EmbeddingSource, TemporalGraph};
use serde_json::json;

use super::{
    check_fresh, file_parts, hash_with_inputs, read_embedding, require_dir, require_file, required, write_embedding,
};
use crate::cli::{FeatureMethod, FeaturizeArgs, LlmArgs, MergeArgs, MergeKind};
use crate::manifest::input_checksums;
use crate::usage;

pub const AUXILIARY_ONLY: &str = "time-decay embeddings are auxiliary-only and cannot be used as standalone \
     features; pass --concat-with <features> to append them to another embedding";

pub fn featurize(a: &FeaturizeArgs, master: u64, transport: Arc<dyn Transport>) -> Result<()> {
    if a.method == FeatureMethod::Timedecay && a.concat_with.is_none() {
        return Err(usage(AUXILIARY_ONLY));
    }
    let (dir, name) = file_parts(&a.out)?;
    let mut input_paths: Vec<PathBuf> = Vec::new();
    let mut config = json!({
        "command": "featurize",
        "method": format!("{:?}", a.method),
        "normalize": a.normalize,
        "out": name,
    });
    match a.method {
        FeatureMethod::Deepwalk | FeatureMethod::Node2vec | FeatureMethod::Line => {
            let split = required(&a.split, "--split", "for graph embeddings")?;
            require_dir(split, "--split")?;
            input_paths.extend([split.join("train.tsv"), split.join("split_meta.json")]);
            config["graph"] = json!({
                "dim": a.dim, "p": a.p, "q": a.q, "num_walks": a.num_walks, "walk_len": a.walk_len,
                "window": a.window, "epochs": a.epochs, "neg_k": a.neg_k, "lr": a.lr,
                "seed": seed::derive(master, "featurize", &[]),
            });
        }
        FeatureMethod::Llm => {
            let vocab = required(&a.vocab, "--vocab", "for llm features")?;
            require_file(vocab, "--vocab")?;
            input_paths.push(vocab.clone());
            config["llm"] = llm_fingerprint(&a.llm);
            config["dim"] = json!(a.dim);
        }
        FeatureMethod::Timedecay => {
            let split = required(&a.split, "--split", "for time-decay features (training window)")?;
            let edges = required(&a.edges, "--edges", "for time-decay features")?;
            let base = required(&a.concat_with, "--concat-with", "")?;
            require_dir(split, "--split")?;
            require_file(edges, "--edges")?;
            require_file(base, "--concat-with")?;
            input_paths.extend([split.join("split_meta.json"), edges.clone(), base.clone()]);
            config["timedecay"] = json!({ "lambda": a.lambda, "td_dim": a.td_dim, "alpha": a.alpha });
        }
    }
    let refs: Vec<&Path> = input_paths.iter().map(PathBuf::as_path).collect();
    let inputs = input_checksums(&refs)?;
    let hash = hash_with_inputs(config, &inputs);
    let Some(mut manifest) = check_fresh(&dir, &name, &hash)? else {
        return Ok(());
    };

    let mut m = match a.method {
        FeatureMethod::Deepwalk | FeatureMethod::Node2vec | FeatureMethod::Line => graph_features(a, master)?,
        FeatureMethod::Llm => llm_features(a, transport)?,
        FeatureMethod::Timedecay => time_decay_features(a)?,
    };
    if a.normalize {
        m.l2_normalize_rows();
    }
    if !m.is_finite() {
        anyhow::bail!("{} features contain non-finite values", m.source);
    }
    log::info!("{} features: {} x {}", m.source, m.n(), m.dim());
    write_embedding(&m, &a.out)?;
    manifest.record(&dir, &name, "featurize", &hash, inputs, &[&name])?;
    manifest.save(&dir)
}

fn graph_features(a: &FeaturizeArgs, master: u64) -> Result<EmbeddingMatrix> {
    let split_dir = a.split.as_ref().expect("checked");
    let (split, meta) = EdgeSplit::read_dir(split_dir)?;
    let adj = Adjacency::from_edges(meta.nodes, &split.train_pos);
    let walk = WalkConfig {
        num_walks: a.num_walks,
        walk_len: a.walk_len,
        p: a.p,
        q: a.q,
        seed: seed::derive(master, "walks", &[]),
    };
    let sg = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        neg_k: a.neg_k,
        epochs: a.epochs,
        lr: a.lr,
        seed: seed::derive(master, "skipgram", &[]),
    };
    Ok(match a.method {
        FeatureMethod::Deepwalk => classic::deepwalk(&adj, &walk, &sg)?,
        FeatureMethod::Node2vec => classic::node2vec(&adj, &walk, &sg)?,
        _ => classic::train_line(
            &adj,
            &LineConfig {
                dim: a.dim,
                neg_k: a.neg_k,
                epochs: a.epochs,
                lr: a.lr,
                seed: seed::derive(master, "line", &[]),
            },
        )?,
    })
}

fn time_decay_features(a: &FeaturizeArgs) -> Result<EmbeddingMatrix> {
    let (_, meta) = EdgeSplit::read_dir(a.split.as_ref().expect("checked"))?;
    let records = corpus::read_records_tsv(a.edges.as_ref().expect("checked"))?;
    let first_year = records
        .iter()
        .map(|r| r.year)
        .min()
        .ok_or_else(|| usage("--edges: no co-occurrence records"))?;
    if first_year > meta.spec.train_end {
        return Err(usage("--edges: no records fall inside the training window"));
    }
    let g = TemporalGraph::build(&records, meta.nodes)?;
    let cfg = TimeDecayConfig {
        alpha: a.alpha,
        ..TimeDecayConfig::for_training_window(first_year, meta.spec.train_end, a.lambda, a.td_dim)
    };
    let td = timedecay::time_decay_embedding(&g, &cfg)?;
    let base_path = a.concat_with.as_ref().expect("checked");
    let base = read_embedding(base_path, EmbeddingSource::Other("base".into()))?;
    Ok(base.concat(&td)?)
}

fn cache_dir(a: &LlmArgs) -> PathBuf {
    a.cache
        .clone()
        .or_else(|| std::env::var_os("QCLP_CACHE_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(".qclp-cache"))
}

fn llm_fingerprint(a: &LlmArgs) -> serde_json::Value {
    json!({
        "model": a.model, "embed_model": a.embed_model, "max_tokens": a.max_tokens,
        "cache": cache_dir(a), "fixtures_only": a.fixtures_only,
    })
}

fn client(a: &LlmArgs, model: &str, embedding: bool, transport: &Arc<dyn Transport>) -> Result<LlmClient> {
    let endpoint = if embedding {
        a.embed_endpoint.as_ref().or(a.endpoint.as_ref())
    } else {
        a.endpoint.as_ref()
    };
    let endpoint = match (endpoint, a.fixtures_only) {
        (Some(e), _) => e.clone(),
        (None, true) => String::new(),
        (None, false) => return Err(usage("--endpoint is required unless --fixtures-only is set")),
    };
    let base = if embedding {
        LlmClientConfig::embedding(&endpoint, model)
    } else {
        LlmClientConfig::chat(&endpoint, model)
    };
    let cfg = LlmClientConfig {
        max_tokens: a.max_tokens,
        timeout_secs: a.timeout,
        max_retries: a.max_retries,
        rate_limit: a.rate_limit,
        ..base
    };
    let cache = Cache::new(cache_dir(a));
    Ok(if a.fixtures_only {
        LlmClient::fixtures_only(cfg, cache)
    } else {
        LlmClient::new(cfg, cache, Arc::clone(transport))
    })
}

fn embedder(a: &LlmArgs, transport: &Arc<dyn Transport>) -> Result<LlmClient> {
    let model = required(&a.embed_model, "--embed-model", "for llm features")?;
    client(a, model, true, transport)
}

fn check_dim(m: &EmbeddingMatrix, dim: usize) -> Result<()> {
    if m.dim() != dim {
        anyhow::bail!(
            "embedding model returned {}-dimensional vectors, expected --dim {dim}",
            m.dim()
        );
    }
    Ok(())
}

fn llm_features(a: &FeaturizeArgs, transport: Arc<dyn Transport>) -> Result<EmbeddingMatrix> {
    let vocab = ConceptVocab::load(a.vocab.as_ref().expect("checked"))?;
    let model = required(&a.llm.model, "--model", "for llm features")?;
    let generator = client(&a.llm, model, false, &transport)?;
    let embedder = embedder(&a.llm, &transport)?;
    let m = llm::featurize(vocab.concepts(), &generator, &embedder)?;
    check_dim(&m, a.dim)?;
    Ok(m)
}

fn named_inputs(specs: &[String]) -> Result<Vec<(String, PathBuf)>> {
    specs
        .iter()
        .map(|s| {
            let (name, path) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("expected name=path, got {s:?}")))?;
            if name.is_empty() {
                return Err(usage(format!("empty name in {s:?}")));
            }
            Ok((name.to_string(), PathBuf::from(path)))
        })
        .collect()
}

pub fn merge(a: &MergeArgs, transport: Arc<dyn Transport>) -> Result<()> {
    let (dir, name) = file_parts(&a.out)?;
    let named = named_inputs(&a.inputs)?;
    let mut input_paths: Vec<PathBuf> = Vec::new();
    match a.method {
        MergeKind::Mean | MergeKind::Max => {
            if named.len() < 2 {
                return Err(usage("--inputs needs at least two feature files"));
            }
        }
        MergeKind::Select => {
            if named.is_empty() {
                return Err(usage("--inputs needs at least one feature file"));
            }
            let choices = required(&a.choices, "--choices", "for select")?;
            require_file(choices, "--choices")?;
            input_paths.push(choices.clone());
        }
        MergeKind::Summarize => {
            if a.models.len() < 2 {
                return Err(usage("--models needs at least two generator model ids"));
            }
            required(&a.llm.model, "--model", "(the summarizing model)")?;
            let vocab = required(&a.vocab, "--vocab", "for summarize")?;
            require_file(vocab, "--vocab")?;
            input_paths.push(vocab.clone());
        }
    }
    for (_, p) in &named {
        require_file(p, "--inputs")?;
        input_paths.push(p.clone());
    }
    let refs: Vec<&Path> = input_paths.iter().map(PathBuf::as_path).collect();
    let inputs = input_checksums(&refs)?;
    let config = json!({
        "command": "merge",
        "method": format!("{:?}", a.method),
        "names": named.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "models": a.models,
        "llm": llm_fingerprint(&a.llm),
        "dim": a.dim,
        "out": name,
    });
    let hash = hash_with_inputs(config, &inputs);
    let Some(mut manifest) = check_fresh(&dir, &name, &hash)? else {
        return Ok(());
    };

    let read_all = || -> Result<BTreeMap<String, EmbeddingMatrix>> {
        named
            .iter()
            .map(|(n, p)| Ok((n.clone(), read_embedding(p, EmbeddingSource::Llm(n.clone()))?)))
            .collect()
    };
    let m = match a.method {
        MergeKind::Mean | MergeKind::Max => {
            let mats = read_all()?;
            let refs: Vec<&EmbeddingMatrix> = mats.values().collect();
            let method = if a.method == MergeKind::Mean {
                MergeMethod::MeanPool
            } else {
                MergeMethod::MaxPool
            };
            llm::pool_matrices(&refs, method)?
        }
        MergeKind::Select => {
            let path = a.choices.as_ref().expect("checked");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let choices: Vec<String> = text
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            llm::select_per_concept(&choices, &read_all()?)?
        }
        MergeKind::Summarize => summarize(a, &transport)?,
    };
    log::info!("merged features: {} x {}", m.n(), m.dim());
    write_embedding(&m, &a.out)?;
    manifest.record(&dir, &name, "merge", &hash, inputs, &[&name])?;
    manifest.save(&dir)
}

fn summarize(a: &MergeArgs, transport: &Arc<dyn Transport>) -> Result<EmbeddingMatrix> {
    let vocab = ConceptVocab::load(a.vocab.as_ref().expect("checked"))?;
    let mut texts_by_model = BTreeMap::new();
    for model in &a.models {
        let gen = client(&a.llm, model, false, transport)?;
        let texts = vocab
            .concepts()
            .iter()
            .map(|c| Ok(gen.generate_feature_text(c)?.text))
            .collect::<Result<Vec<_>>>()?;
        texts_by_model.insert(model.clone(), texts);
    }
    let summarizer = client(&a.llm, a.llm.model.as_ref().expect("checked"), false, transport)?;
    let m = llm::featurize_summaries(
        vocab.concepts(),
        &texts_by_model,
        &summarizer,
        &embedder(&a.llm, transport)?,
    )?;
    check_dim(&m, a.dim)?;
    Ok(m)
}
