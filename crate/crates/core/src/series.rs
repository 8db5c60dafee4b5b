//! Per-story measure series and their CSV/JSONL form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuation::{
    path_distribution, realized_probability, CandidateSource, ContinuationError, StoryTrees,
};
use crate::embedding::{alpha_weight_with, AlphaMode, EmbeddingError, EmbeddingSet, SentimentSet};
use crate::measures::{
    baseline_embedding_change, ely_surprise, entropy, hale_surprise, hale_uncertainty_reduction,
    jaccard, weighted_uncertainty, DistanceMetric, MeasureError,
};
use crate::story::Story;
use crate::vector::cosine;

/// Schema tag written at the top of measure files.
pub const MEASURE_SCHEMA: &str = "suspense.measures/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "S_Hale")]
    SHale,
    #[serde(rename = "U_Hale")]
    UHale,
    #[serde(rename = "S_Ely")]
    SEly,
    #[serde(rename = "U_Ely")]
    UEly,
    #[serde(rename = "S_alphaEly")]
    SAlphaEly,
    #[serde(rename = "U_alphaEly")]
    UAlphaEly,
    WordOverlap,
    EmbedChange,
    AlphaBaseline,
}

impl Measure {
    pub const ALL: [Measure; 9] = [
        Measure::SHale,
        Measure::UHale,
        Measure::SEly,
        Measure::UEly,
        Measure::SAlphaEly,
        Measure::UAlphaEly,
        Measure::WordOverlap,
        Measure::EmbedChange,
        Measure::AlphaBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::SHale => "S_Hale",
            Measure::UHale => "U_Hale",
            Measure::SEly => "S_Ely",
            Measure::UEly => "U_Ely",
            Measure::SAlphaEly => "S_alphaEly",
            Measure::UAlphaEly => "U_alphaEly",
            Measure::WordOverlap => "WordOverlap",
            Measure::EmbedChange => "EmbedChange",
            Measure::AlphaBaseline => "AlphaBaseline",
        }
    }

    /// Whether the measure reads rollout trees.
    pub fn uses_candidates(self) -> bool {
        matches!(
            self,
            Measure::SHale | Measure::UHale | Measure::UEly | Measure::UAlphaEly
        )
    }

    pub fn uses_metric(self) -> bool {
        matches!(
            self,
            Measure::SEly | Measure::UEly | Measure::SAlphaEly | Measure::UAlphaEly
        )
    }

    pub fn uses_sentiment(self) -> bool {
        matches!(self, Measure::SAlphaEly | Measure::AlphaBaseline)
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Measure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

/// Provenance of a series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesConfig {
    pub metric: Option<DistanceMetric>,
    pub rollout: Option<usize>,
    pub source: Option<CandidateSource>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSeries {
    pub story_id: String,
    pub measure: Measure,
    /// One slot per sentence index; `None` where the measure is undefined.
    pub values: Vec<Option<f64>>,
    pub config: SeriesConfig,
}

impl MeasureSeries {
    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|x| (i, x)))
    }

    /// Index of the largest present value; earliest wins ties.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.present() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureConfig {
    pub measures: Vec<Measure>,
    pub metric: DistanceMetric,
    pub rollout: usize,
    pub temperature: f64,
    pub alpha_mode: AlphaMode,
    /// Importance weight for candidates with no known sentiment.
    pub candidate_alpha: f64,
    /// Report the baselines as raw similarity instead of change.
    pub baseline_similarity: bool,
    pub source: CandidateSource,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            measures: vec![Measure::SEly],
            metric: DistanceMetric::L1,
            rollout: 1,
            temperature: 1.0,
            alpha_mode: AlphaMode::Magnitude,
            candidate_alpha: 1.0,
            baseline_similarity: false,
            source: CandidateSource::Corpus,
        }
    }
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("story `{story_id}`: measure needs rollout candidates but none exist (first position {position})")]
    MissingTree { story_id: String, position: usize },
    #[error("story `{0}`: sentiment scores required")]
    MissingSentimentFile(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Continuation(#[from] ContinuationError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Everything the measures read besides the story itself.
#[derive(Debug, Clone, Copy)]
pub struct SeriesInputs<'a> {
    pub embeddings: &'a EmbeddingSet,
    pub trees: Option<&'a StoryTrees>,
    pub sentiment: Option<&'a SentimentSet>,
}

/// Computes every requested measure over one story.
///
/// Backward measures start at the second non-skipped sentence. Forward
/// measures are present wherever a rollout tree exists; entropy reduction
/// also needs a tree at the previous non-skipped sentence.
pub fn compute_series(
    story: &Story,
    inputs: SeriesInputs<'_>,
    config: &MeasureConfig,
) -> Result<Vec<MeasureSeries>, SeriesError> {
    if config.measures.is_empty() {
        return Ok(Vec::new());
    }
    let n = story.len();
    let active = story.active_indices();
    let first = active.first().copied().unwrap_or(0);

    let needs_embeddings = config
        .measures
        .iter()
        .any(|m| !matches!(m, Measure::WordOverlap | Measure::AlphaBaseline));
    let matrix = inputs.embeddings.get(&story.id);
    if needs_embeddings {
        match matrix {
            Some(m) => m.check_covers(story)?,
            None if !active.is_empty() => {
                return Err(EmbeddingError::MissingSentence(story.id.clone(), first).into())
            }
            None => {}
        }
    }
    let emb = |i: usize| -> &[f64] { matrix.and_then(|m| m.get(i)).unwrap_or(&[]) };

    let needs_trees = config.measures.iter().any(|m| m.uses_candidates());
    let empty = StoryTrees::new();
    let trees = inputs.trees.unwrap_or(&empty);
    if needs_trees && trees.is_empty() && !active.is_empty() {
        return Err(SeriesError::MissingTree {
            story_id: story.id.clone(),
            position: first,
        });
    }

    let needs_sentiment = config.measures.iter().any(|m| m.uses_sentiment());
    let alpha_at = |i: usize| -> Result<f64, SeriesError> {
        let s = inputs
            .sentiment
            .ok_or_else(|| SeriesError::MissingSentimentFile(story.id.clone()))?;
        let score = s
            .score(&story.id, i)
            .ok_or_else(|| EmbeddingError::MissingSentiment(story.id.clone(), i))?;
        Ok(alpha_weight_with(score, config.alpha_mode)?)
    };
    if needs_sentiment && inputs.sentiment.is_none() {
        return Err(SeriesError::MissingSentimentFile(story.id.clone()));
    }

    let mut out: BTreeMap<Measure, Vec<Option<f64>>> = config
        .measures
        .iter()
        .map(|&m| (m, vec![None; n]))
        .collect();
    let mut set = |m: Measure, i: usize, v: f64| {
        if let Some(slot) = out.get_mut(&m) {
            slot[i] = Some(v);
        }
    };
    let wants = |m: Measure| config.measures.contains(&m);

    for pair in active.windows(2) {
        let (prev, cur) = (pair[0], pair[1]);
        if wants(Measure::SEly) || wants(Measure::SAlphaEly) {
            let d = ely_surprise(emb(prev), emb(cur), config.metric)?;
            set(Measure::SEly, cur, d);
            if wants(Measure::SAlphaEly) {
                set(Measure::SAlphaEly, cur, alpha_at(cur)? * d);
            }
        }
        if wants(Measure::EmbedChange) {
            let v = if config.baseline_similarity {
                cosine(emb(prev), emb(cur)).ok_or(MeasureError::ZeroNormVector)?
            } else {
                baseline_embedding_change(emb(prev), emb(cur))?
            };
            set(Measure::EmbedChange, cur, v);
        }
        if wants(Measure::WordOverlap) {
            let sim = jaccard(&story.sentences[prev].tokens, &story.sentences[cur].tokens);
            set(
                Measure::WordOverlap,
                cur,
                if config.baseline_similarity {
                    sim
                } else {
                    1.0 - sim
                },
            );
        }
        if wants(Measure::SHale) {
            if let Some(tree) = trees.get(&prev) {
                let alts: Vec<&[f64]> = tree
                    .children_of(None)
                    .map(|c| c.embedding.as_slice())
                    .collect();
                let p = realized_probability(emb(prev), emb(cur), &alts, config.temperature)?;
                set(Measure::SHale, cur, hale_surprise(p)?);
            }
        }
    }

    let forward = wants(Measure::UHale) || wants(Measure::UEly) || wants(Measure::UAlphaEly);
    let mut prev_entropy: Option<f64> = None;
    for &t in &active {
        if wants(Measure::AlphaBaseline) {
            set(Measure::AlphaBaseline, t, alpha_at(t)?);
        }
        if !forward {
            continue;
        }
        let Some(tree) = trees.get(&t) else {
            prev_entropy = None;
            continue;
        };
        let dist = path_distribution(tree, config.rollout, config.temperature)?;
        let h = entropy(&dist.probs)?;
        if let Some(hp) = prev_entropy {
            set(Measure::UHale, t, hale_uncertainty_reduction(hp, h));
        }
        prev_entropy = Some(h);

        if wants(Measure::UEly) || wants(Measure::UAlphaEly) {
            let by_id: BTreeMap<usize, &crate::continuation::CandidateNode> =
                tree.nodes.iter().map(|n| (n.node_id, n)).collect();
            let mut weighted = Vec::with_capacity(dist.node_ids.len());
            for (id, &p) in dist.node_ids.iter().zip(&dist.probs) {
                let node = by_id[id];
                let alpha = if wants(Measure::UAlphaEly) {
                    candidate_alpha(node, inputs.sentiment, config)?
                } else {
                    1.0
                };
                weighted.push((node.embedding.as_slice(), p, alpha));
            }
            if wants(Measure::UEly) {
                let plain: Vec<(&[f64], f64, f64)> =
                    weighted.iter().map(|&(v, p, _)| (v, p, 1.0)).collect();
                set(
                    Measure::UEly,
                    t,
                    weighted_uncertainty(emb(t), &plain, config.metric)?,
                );
            }
            if wants(Measure::UAlphaEly) {
                set(
                    Measure::UAlphaEly,
                    t,
                    weighted_uncertainty(emb(t), &weighted, config.metric)?,
                );
            }
        }
    }

    let source = trees
        .values()
        .next()
        .and_then(|t| t.nodes.first())
        .map(|n| n.source);
    Ok(config
        .measures
        .iter()
        .map(|&m| MeasureSeries {
            story_id: story.id.clone(),
            measure: m,
            values: out[&m].clone(),
            config: SeriesConfig {
                metric: m.uses_metric().then_some(config.metric),
                rollout: match m {
                    Measure::SHale => Some(1),
                    m if m.uses_candidates() => Some(config.rollout),
                    _ => None,
                },
                source: if m.uses_candidates() {
                    source.or(Some(config.source))
                } else {
                    None
                },
                temperature: m.uses_candidates().then_some(config.temperature),
            },
        })
        .collect())
}

/// Importance weight of a rollout candidate: the sentiment of its source
/// sentence when it was sampled from the corpus and that sentiment is known,
/// else the configured default.
fn candidate_alpha(
    node: &crate::continuation::CandidateNode,
    sentiment: Option<&SentimentSet>,
    config: &MeasureConfig,
) -> Result<f64, SeriesError> {
    let score = node
        .origin
        .as_ref()
        .zip(sentiment)
        .and_then(|(o, s)| s.score(&o.story_id, o.sentence_idx));
    match score {
        Some(s) => Ok(alpha_weight_with(s, config.alpha_mode)?),
        None => Ok(config.candidate_alpha),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MeasureRow {
    story_id: String,
    sentence_idx: usize,
    measure: Measure,
    value: Option<f64>,
    metric: Option<DistanceMetric>,
    rollout: Option<usize>,
    source: Option<CandidateSource>,
}

fn rows(series: &[MeasureSeries]) -> impl Iterator<Item = MeasureRow> + '_ {
    series.iter().flat_map(|s| {
        s.values.iter().enumerate().map(move |(i, v)| MeasureRow {
            story_id: s.story_id.clone(),
            sentence_idx: i,
            measure: s.measure,
            value: *v,
            metric: s.config.metric,
            rollout: s.config.rollout,
            source: s.config.source,
        })
    })
}

/// Writes `story_id, sentence_idx, measure, value, metric, rollout, source`
/// rows under a `#schema=` comment line. Absent values are empty cells.
pub fn write_measure_csv<W: Write>(series: &[MeasureSeries], mut out: W) -> csv::Result<()> {
    writeln!(out, "#schema={MEASURE_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows(series) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_measure_jsonl<W: Write>(series: &[MeasureSeries], mut out: W) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Tagged<'a> {
        schema: &'a str,
        #[serde(flatten)]
        row: MeasureRow,
    }
    for row in rows(series) {
        serde_json::to_writer(
            &mut out,
            &Tagged {
                schema: MEASURE_SCHEMA,
                row,
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a measure CSV back into series, one per (story, measure), in file
/// order. Series length is one past the largest sentence index seen.
pub fn read_measure_csv<R: Read>(input: R) -> csv::Result<Vec<MeasureSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    type Slots = BTreeMap<usize, Option<f64>>;
    let mut grouped: IndexMap<(String, Measure), (SeriesConfig, Slots)> = IndexMap::new();
    for row in reader.deserialize::<MeasureRow>() {
        let row = row?;
        let entry = grouped
            .entry((row.story_id.clone(), row.measure))
            .or_insert_with(|| {
                (
                    SeriesConfig {
                        metric: row.metric,
                        rollout: row.rollout,
                        source: row.source,
                        temperature: None,
                    },
                    BTreeMap::new(),
                )
            });
        entry.1.insert(row.sentence_idx, row.value);
    }
    Ok(grouped
        .into_iter()
        .map(|((story_id, measure), (config, vals))| {
            let len = vals.keys().next_back().map_or(0, |k| k + 1);
            let mut values = vec![None; len];
            for (i, v) in vals {
                values[i] = v;
            }
            MeasureSeries {
                story_id,
                measure,
                values,
                config,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::{build_corpus_trees, CandidateNode, RolloutTree};
    use crate::embedding::{mock_embed_corpus, EmbeddingMatrix, SentimentScores};
    use crate::story::{Corpus, Split};

    fn single(story: &Story, vectors: &[Vec<f64>]) -> EmbeddingSet {
        let mut set = EmbeddingSet::default();
        set.insert(EmbeddingMatrix {
            story_id: story.id.clone(),
            dim: vectors[0].len(),
            vectors: vectors.iter().cloned().enumerate().collect(),
        });
        set
    }

    #[test]
    fn identical_embeddings_give_zero_surprise() {
        let story = Story::from_texts("s", &["one two three", "four five six"]);
        let emb = single(&story, &[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let out = compute_series(
            &story,
            SeriesInputs {
                embeddings: &emb,
                trees: None,
                sentiment: None,
            },
            &MeasureConfig::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].values, vec![None, Some(0.0)]);
    }

    #[test]
    fn empty_measure_list() {
        let story = Story::from_texts("s", &["one two three", "four five six"]);
        let emb = EmbeddingSet::default();
        let cfg = MeasureConfig {
            measures: vec![],
            ..Default::default()
        };
        let out = compute_series(
            &story,
            SeriesInputs {
                embeddings: &emb,
                trees: None,
                sentiment: None,
            },
            &cfg,
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn forward_measures_need_trees() {
        let story = Story::from_texts("s", &["one two three", "four five six"]);
        let emb = single(&story, &[vec![1.0, 2.0], vec![1.0, 2.0]]);
        let cfg = MeasureConfig {
            measures: vec![Measure::UEly],
            ..Default::default()
        };
        let err = compute_series(
            &story,
            SeriesInputs {
                embeddings: &emb,
                trees: None,
                sentiment: None,
            },
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, SeriesError::MissingTree { position: 0, .. }));
    }

    #[test]
    fn skipped_sentences_stay_absent() {
        let story = Story::from_texts(
            "s",
            &["one two three", "Oh!", "four five six", "seven eight nine"],
        );
        let emb = single(
            &story,
            &[
                vec![0.0, 0.0],
                vec![9.0, 9.0],
                vec![1.0, 0.0],
                vec![1.0, 2.0],
            ],
        );
        let cfg = MeasureConfig {
            measures: vec![Measure::SEly, Measure::WordOverlap],
            ..Default::default()
        };
        let out = compute_series(
            &story,
            SeriesInputs {
                embeddings: &emb,
                trees: None,
                sentiment: None,
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(out[0].values, vec![None, None, Some(1.0), Some(2.0)]);
        assert_eq!(out[1].values, vec![None, None, Some(1.0), Some(1.0)]);
    }

    fn hand_tree(position: usize, context: Vec<f64>, cands: &[Vec<f64>]) -> RolloutTree {
        let nodes = cands
            .iter()
            .enumerate()
            .map(|(i, v)| CandidateNode {
                node_id: i,
                parent_id: None,
                depth: 1,
                embedding: v.clone(),
                source: CandidateSource::Generated,
                text: None,
                origin: None,
            })
            .collect();
        RolloutTree::new("s", position, context, nodes).unwrap()
    }

    #[test]
    fn hand_checked_forward_measures() {
        let story = Story::from_texts("s", &["one two three", "four five six", "seven eight nine"]);
        let e = [vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let emb = single(&story, &e);
        let mut trees = StoryTrees::new();
        // position 0: two candidates with equal cosine -> uniform, H = ln 2
        trees.insert(
            0,
            hand_tree(0, e[0].clone(), &[vec![1.0, 1.0], vec![1.0, -1.0]]),
        );
        // position 1: four equal-cosine candidates -> uniform, H = ln 4
        trees.insert(
            1,
            hand_tree(
                1,
                e[1].clone(),
                &[
                    vec![1.0, 1.0],
                    vec![-1.0, 1.0],
                    vec![1.0, 1.0],
                    vec![-1.0, 1.0],
                ],
            ),
        );
        let mut sentiment = SentimentSet::default();
        sentiment.stories.insert(
            "s".into(),
            SentimentScores {
                story_id: "s".into(),
                scores: [(0, 0.5), (1, -0.25), (2, 0.0)].into(),
            },
        );
        let cfg = MeasureConfig {
            measures: vec![
                Measure::SHale,
                Measure::UHale,
                Measure::UEly,
                Measure::UAlphaEly,
                Measure::SAlphaEly,
                Measure::AlphaBaseline,
            ],
            candidate_alpha: 2.0,
            ..Default::default()
        };
        let out = compute_series(
            &story,
            SeriesInputs {
                embeddings: &emb,
                trees: Some(&trees),
                sentiment: Some(&sentiment),
            },
            &cfg,
        )
        .unwrap();
        let get = |m: Measure| out.iter().find(|s| s.measure == m).unwrap().values.clone();

        // S_Hale at 1: actual [0,1] has cos 0 with context [1,0]; both
        // alternatives have cos 1/sqrt2. p = 1 / (1 + 2 e^{1/sqrt2}).
        let p = 1.0 / (1.0 + 2.0 * (1.0 / 2f64.sqrt()).exp());
        let s_hale = get(Measure::SHale);
        assert_eq!(s_hale[0], None);
        assert!((s_hale[1].unwrap() + p.ln()).abs() < 1e-12);
        // at 2: actual [1,1] and all four alternatives share cos 1/sqrt2
        // with context [0,1], so p = 1/5
        assert!((s_hale[2].unwrap() - 5f64.ln()).abs() < 1e-12);

        let u_hale = get(Measure::UHale);
        assert_eq!(u_hale[0], None);
        assert!((u_hale[1].unwrap() - (2f64.ln() - 4f64.ln())).abs() < 1e-12);

        // U_Ely at 0: L1 distances from [1,0] to [1,1] and [1,-1] are both 1.
        let u_ely = get(Measure::UEly);
        assert!((u_ely[0].unwrap() - 1.0).abs() < 1e-12);
        // at 1: distances from [0,1]: [1,1]->1, [-1,1]->1 => 1
        assert!((u_ely[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(u_ely[2], None);
        let u_alpha = get(Measure::UAlphaEly);
        assert!((u_alpha[0].unwrap() - 2.0).abs() < 1e-12);

        // S_alphaEly at 1: alpha(-0.25) = 0.5, L1([1,0],[0,1]) = 2
        let s_alpha = get(Measure::SAlphaEly);
        assert!((s_alpha[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            get(Measure::AlphaBaseline),
            vec![Some(0.5), Some(0.5), Some(0.0)]
        );
    }

    #[test]
    fn corpus_alpha_uses_source_sentiment() {
        let mut corpus = Corpus::new(Split::Test);
        corpus
            .insert(Story::from_texts(
                "a",
                &["alpha beta gamma", "delta epsilon zeta"],
            ))
            .unwrap();
        corpus
            .insert(Story::from_texts(
                "b",
                &["eta theta iota", "kappa lambda mu"],
            ))
            .unwrap();
        let emb = mock_embed_corpus(&corpus, 8, 1);
        let story = corpus.get("a").unwrap();
        let trees = build_corpus_trees(story, &corpus, &emb, &[2], 3).unwrap();
        let mut sentiment = SentimentSet::default();
        sentiment.stories.insert(
            "b".into(),
            SentimentScores {
                story_id: "b".into(),
                scores: [(0, -0.5), (1, -0.5)].into(),
            },
        );
        let cfg = MeasureConfig {
            measures: vec![Measure::UEly, Measure::UAlphaEly],
            ..Default::default()
        };
        let out = compute_series(
            story,
            SeriesInputs {
                embeddings: &emb,
                trees: Some(&trees),
                sentiment: Some(&sentiment),
            },
            &cfg,
        )
        .unwrap();
        // every candidate comes from story b with alpha 1.0 = |-0.5| * 2
        for (u, ua) in out[0].values.iter().zip(&out[1].values) {
            assert!((u.unwrap() - ua.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let series = vec![MeasureSeries {
            story_id: "s".into(),
            measure: Measure::UEly,
            values: vec![None, Some(0.5), Some(1.25)],
            config: SeriesConfig {
                metric: Some(DistanceMetric::L1),
                rollout: Some(2),
                source: Some(CandidateSource::Generated),
                temperature: None,
            },
        }];
        let mut buf = Vec::new();
        write_measure_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#schema=suspense.measures/1\nstory_id,sentence_idx,measure,value,metric,rollout,source\n"));
        assert!(text.contains("s,0,U_Ely,,L1,2,generated\n"));
        assert_eq!(read_measure_csv(buf.as_slice()).unwrap(), series);
    }
}
