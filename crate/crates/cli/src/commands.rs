//! Subcommand implementations. Each one reads and computes everything first
//! and returns the files to write, so a failure leaves the output directory
//! untouched.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;
use suspense::agreement::{mean_reading_times, AnnotatorScreen};
use suspense::evaluation::human_curves;
use suspense::turning_points::{mean_ci, per_tp_errors, TP_COUNT};
use suspense::{
    annotation_alpha, build_corpus_trees, compute_series, default_branching, fit_mapping,
    load_annotations, load_continuations, load_embeddings, load_sentiment, load_stories,
    load_tp_gold, mock_embed_corpus, per_annotator_alpha, predict_tps, read_measure_csv,
    screen_annotators, theory_baseline, write_measure_csv, write_measure_jsonl, CandidateSource,
    ContinuationSet, DistanceMetric, FitTarget, MeasureConfig, MeasureSeries, ScreeningThresholds,
    SeriesInputs,
};

use crate::config::RunConfig;
use crate::plot;

pub const TP_SCHEMA: &str = "suspense.turning_points/1";
pub const AGREEMENT_SCHEMA: &str = "suspense.agreement/1";

/// A file produced by a command, held in memory until every step succeeded.
pub struct Output {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Output {
    fn new(cfg: &RunConfig, name: &str, bytes: Vec<u8>) -> Self {
        Output {
            path: cfg.out.join(name),
            bytes,
        }
    }
}

pub fn write_outputs(outputs: &[Output]) -> Result<()> {
    for o in outputs {
        if let Some(dir) = o.path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let mut f =
            File::create(&o.path).with_context(|| format!("creating {}", o.path.display()))?;
        f.write_all(&o.bytes)?;
        info!("wrote {}", o.path.display());
    }
    Ok(())
}

fn read_series(cfg: &RunConfig) -> Result<Vec<MeasureSeries>> {
    let path = cfg.require(&cfg.measures_file, "measures_file")?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_measure_csv(file).with_context(|| format!("reading {}", path.display()))
}

pub fn analyze(cfg: &RunConfig) -> Result<Vec<Output>> {
    let corpus = load_stories(cfg.require(&cfg.stories, "stories")?)?;
    let embeddings = load_embeddings(cfg.require(&cfg.embeddings, "embeddings")?)?;
    embeddings.check_covers(&corpus)?;
    let sentiment = cfg.sentiment.as_ref().map(load_sentiment).transpose()?;

    let wants_candidates = cfg.measures.iter().any(|m| m.uses_candidates());
    let (trees, source) = if let Some(path) = &cfg.continuations {
        let set = load_continuations(path, &embeddings)?;
        let generated = set
            .stories
            .values()
            .flat_map(|t| t.values())
            .flat_map(|t| &t.nodes)
            .all(|n| n.source == CandidateSource::Generated);
        let source = if generated && !set.stories.is_empty() {
            CandidateSource::Generated
        } else {
            CandidateSource::Corpus
        };
        (set, source)
    } else if cfg.sample_candidates && wants_candidates {
        let branching = cfg
            .branching
            .clone()
            .unwrap_or_else(|| default_branching(cfg.rollout));
        let mut set = ContinuationSet::default();
        for story in corpus.iter() {
            let trees = build_corpus_trees(story, &corpus, &embeddings, &branching, cfg.seed)?;
            set.stories.insert(story.id.clone(), trees);
        }
        (set, CandidateSource::Corpus)
    } else {
        (ContinuationSet::default(), CandidateSource::Corpus)
    };

    let mut measures = Vec::new();
    for m in &cfg.measures {
        if !measures.contains(m) {
            measures.push(*m);
        }
    }
    let mc = MeasureConfig {
        measures,
        metric: cfg.metric.unwrap_or(DistanceMetric::L1),
        rollout: cfg.rollout,
        temperature: cfg.temperature,
        alpha_mode: cfg.alpha_mode,
        candidate_alpha: cfg.candidate_alpha,
        baseline_similarity: cfg.baseline_similarity,
        source,
    };

    let mut all = Vec::new();
    for story in corpus.iter() {
        let inputs = SeriesInputs {
            embeddings: &embeddings,
            trees: trees.get(&story.id),
            sentiment: sentiment.as_ref(),
        };
        all.extend(compute_series(story, inputs, &mc)?);
    }

    let mut csv = Vec::new();
    write_measure_csv(&all, &mut csv)?;
    let mut jsonl = Vec::new();
    write_measure_jsonl(&all, &mut jsonl)?;
    Ok(vec![
        Output::new(cfg, "measures.csv", csv),
        Output::new(cfg, "measures.jsonl", jsonl),
    ])
}

pub fn evaluate(cfg: &RunConfig) -> Result<Vec<Output>> {
    let corpus = load_stories(cfg.require(&cfg.stories, "stories")?)?;
    let annotations = load_annotations(cfg.require(&cfg.annotations, "annotations")?)?;
    let series = read_series(cfg)?;
    let mapping = if cfg.fit_mapping {
        let m = fit_mapping(&annotations, FitTarget::CrossAnnotatorMean, cfg.folds)?;
        info!("fitted mapping {:?}", m.values());
        m
    } else {
        cfg.judgment_mapping()?
    };
    let curves = human_curves(&corpus, &annotations, &mapping)?;
    let report = suspense::evaluate_corpus(&series, &curves, cfg.ci_p)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut json = Vec::new();
    report.write_json(&mut json)?;
    json.push(b'\n');
    Ok(vec![
        Output::new(cfg, "report.csv", csv),
        Output::new(cfg, "report.json", json),
    ])
}

#[derive(Serialize)]
struct TpRow {
    synopsis_id: String,
    measure: String,
    #[serde(rename = "D")]
    d: f64,
    d_ci_lo: Option<f64>,
    d_ci_hi: Option<f64>,
    err_1: f64,
    err_2: f64,
    err_3: f64,
    err_4: f64,
    err_5: f64,
    pred: String,
    gold: String,
}

impl TpRow {
    fn per_synopsis(id: &str, measure: &str, pred: &[usize], gold: &[usize], errs: &[f64]) -> Self {
        let join = |xs: &[usize]| {
            xs.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        TpRow {
            synopsis_id: id.to_string(),
            measure: measure.to_string(),
            d: errs.iter().sum::<f64>() / TP_COUNT as f64,
            d_ci_lo: None,
            d_ci_hi: None,
            err_1: errs[0],
            err_2: errs[1],
            err_3: errs[2],
            err_4: errs[3],
            err_5: errs[4],
            pred: join(pred),
            gold: join(gold),
        }
    }

    fn summary(measure: &str, rows: &[TpRow], p: f64) -> Option<Self> {
        let col =
            |f: fn(&TpRow) -> f64| -> f64 { rows.iter().map(f).sum::<f64>() / rows.len() as f64 };
        let ds: Vec<f64> = rows.iter().map(|r| r.d).collect();
        let (d, ci) = mean_ci(&ds, p)?;
        Some(TpRow {
            synopsis_id: "ALL".into(),
            measure: measure.to_string(),
            d,
            d_ci_lo: ci.map(|c| c.0),
            d_ci_hi: ci.map(|c| c.1),
            err_1: col(|r| r.err_1),
            err_2: col(|r| r.err_2),
            err_3: col(|r| r.err_3),
            err_4: col(|r| r.err_4),
            err_5: col(|r| r.err_5),
            pred: String::new(),
            gold: String::new(),
        })
    }
}

pub fn turning_points(cfg: &RunConfig) -> Result<Vec<Output>> {
    let gold = load_tp_gold(cfg.require(&cfg.tp_gold, "tp_gold")?)?;
    let series = read_series(cfg)?;
    let tp = cfg.tp_config();
    let gold: BTreeMap<&str, &[usize]> = gold
        .iter()
        .map(|g| (g.synopsis_id.as_str(), g.tp_indices.as_slice()))
        .collect();

    let mut by_measure: Vec<(String, Vec<TpRow>)> = Vec::new();
    let mut theory: BTreeMap<String, TpRow> = BTreeMap::new();
    let mut predictions = Vec::new();
    for s in &series {
        let Some(g) = gold.get(s.story_id.as_str()) else {
            warn!("synopsis `{}`: no gold turning points, skipped", s.story_id);
            continue;
        };
        let n = s.values.len();
        let pred = predict_tps(&s.story_id, s.measure.as_str(), &s.values, &tp, n)
            .with_context(|| format!("synopsis `{}`, measure {}", s.story_id, s.measure))?;
        let errs = per_tp_errors(&pred.indices, g, n)?;
        let row = TpRow::per_synopsis(&s.story_id, s.measure.as_str(), &pred.indices, g, &errs);
        match by_measure.iter_mut().find(|(m, _)| m == s.measure.as_str()) {
            Some((_, rows)) => rows.push(row),
            None => by_measure.push((s.measure.to_string(), vec![row])),
        }
        predictions.push(pred);
        theory.entry(s.story_id.clone()).or_insert_with(|| {
            let base = theory_baseline(n, &tp.positions);
            let errs = per_tp_errors(&base, g, n).expect("five indices, n >= 5");
            TpRow::per_synopsis(&s.story_id, "Theory", &base, g, &errs)
        });
    }
    if by_measure.is_empty() {
        bail!("no measure series matches any gold synopsis");
    }
    let theory: Vec<TpRow> = theory.into_values().collect();
    by_measure.push(("Theory".into(), theory));

    let mut out = Vec::new();
    writeln!(out, "#schema={TP_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(&mut out);
    for (m, rows) in &by_measure {
        for r in rows {
            w.serialize(r)?;
        }
        if let Some(all) = TpRow::summary(m, rows, cfg.ci_p) {
            w.serialize(all)?;
        }
    }
    w.flush()?;
    drop(w);

    let mut preds = Vec::new();
    for p in &predictions {
        serde_json::to_writer(&mut preds, p)?;
        preds.push(b'\n');
    }
    Ok(vec![
        Output::new(cfg, "tp_report.csv", out),
        Output::new(cfg, "tp_predictions.jsonl", preds),
    ])
}

#[derive(Serialize)]
struct AgreementReport<'a> {
    schema: &'a str,
    level: suspense::MetricLevel,
    alpha: f64,
    thresholds: ScreeningThresholds,
    annotators: Vec<AnnotatorScreen>,
    flagged: Vec<String>,
}

pub fn agreement(cfg: &RunConfig) -> Result<Vec<Output>> {
    let annotations = load_annotations(cfg.require(&cfg.annotations, "annotations")?)?;
    let alpha = annotation_alpha(&annotations, cfg.level)?;
    let per = per_annotator_alpha(&annotations, cfg.level);
    let rts = mean_reading_times(&annotations);
    let thresholds = ScreeningThresholds {
        min_alpha: cfg.min_alpha,
        min_rt_ms: cfg.min_rt_ms,
    };
    let annotators = screen_annotators(&per, &rts, thresholds);
    let flagged = annotators
        .iter()
        .filter(|a| a.flagged())
        .map(|a| a.annotator_id.clone())
        .collect();
    let report = AgreementReport {
        schema: AGREEMENT_SCHEMA,
        level: cfg.level,
        alpha,
        thresholds,
        annotators,
        flagged,
    };
    let mut json = serde_json::to_vec_pretty(&report)?;
    json.push(b'\n');
    println!("alpha ({:?}) = {alpha:.4}", cfg.level);
    for f in &report.flagged {
        println!("flagged: {f}");
    }
    Ok(vec![Output::new(cfg, "agreement.json", json)])
}

pub fn mock_embed(cfg: &RunConfig) -> Result<Vec<Output>> {
    let corpus = load_stories(cfg.require(&cfg.stories, "stories")?)?;
    let set = mock_embed_corpus(&corpus, cfg.dim, cfg.seed);
    let mut out = Vec::new();
    set.write_jsonl(&mut out)?;
    Ok(vec![Output::new(cfg, "embeddings.jsonl", out)])
}

pub fn plot(cfg: &RunConfig) -> Result<Vec<Output>> {
    let story_id = cfg
        .story_id
        .as_deref()
        .context("missing `story_id` in configuration")?;
    let series = read_series(cfg)?;
    let chosen: Vec<&MeasureSeries> = series.iter().filter(|s| s.story_id == story_id).collect();
    if chosen.is_empty() {
        bail!("story `{story_id}` not found in the measure file");
    }
    let svg = plot::render(story_id, &chosen);
    let name = format!("{}.svg", sanitize(story_id));
    Ok(vec![Output::new(cfg, &name, svg.into_bytes())])
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
