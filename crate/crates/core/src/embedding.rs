//! Sentence embeddings, sentiment scores and the importance weights derived
//! from them.
//!
//! Real embeddings and sentiment come from files. [`mock_embed`] provides a
//! deterministic bag-of-hashed-tokens embedder so the whole pipeline can run
//! without a neural encoder.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::story::{Corpus, Story};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: line {line_no}: malformed record: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("story `{0}` sentence {1}: vector dimension differs from the rest of the file")]
    DimMismatch(String, usize),
    #[error("story `{0}` sentence {1}: non-finite vector component")]
    NonFiniteComponent(String, usize),
    #[error("story `{0}` sentence {1}: no embedding for a non-skipped sentence")]
    MissingSentence(String, usize),
    #[error("story `{0}` sentence {1}: duplicate record")]
    DuplicateSentence(String, usize),
    #[error("story `{0}` sentence {1}: empty vector")]
    EmptyVector(String, usize),
    #[error("sentiment score {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("story `{0}` sentence {1}: no sentiment score")]
    MissingSentiment(String, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-sentence vectors of one story, keyed by sentence index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub story_id: String,
    pub dim: usize,
    pub vectors: BTreeMap<usize, Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn get(&self, idx: usize) -> Option<&[f64]> {
        self.vectors.get(&idx).map(Vec::as_slice)
    }

    /// Fails with `MissingSentence` if any non-skipped sentence lacks a vector.
    pub fn check_covers(&self, story: &Story) -> Result<(), EmbeddingError> {
        for s in story.active() {
            if !self.vectors.contains_key(&s.index) {
                return Err(EmbeddingError::MissingSentence(story.id.clone(), s.index));
            }
        }
        Ok(())
    }
}

/// Embedding matrices for many stories, keyed by story id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingSet {
    pub matrices: IndexMap<String, EmbeddingMatrix>,
}

impl EmbeddingSet {
    pub fn get(&self, story_id: &str) -> Option<&EmbeddingMatrix> {
        self.matrices.get(story_id)
    }

    pub fn insert(&mut self, m: EmbeddingMatrix) {
        self.matrices.insert(m.story_id.clone(), m);
    }

    pub fn dim(&self) -> Option<usize> {
        self.matrices.values().next().map(|m| m.dim)
    }

    /// Checks every story of the corpus is fully covered.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<(), EmbeddingError> {
        for story in corpus.iter() {
            match self.get(&story.id) {
                Some(m) => m.check_covers(story)?,
                None => {
                    if let Some(first) = story.active().next() {
                        return Err(EmbeddingError::MissingSentence(
                            story.id.clone(),
                            first.index,
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for m in self.matrices.values() {
            for (idx, v) in &m.vectors {
                let rec = EmbeddingRecord {
                    story_id: m.story_id.clone(),
                    sentence_idx: *idx,
                    vector: v.clone(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    story_id: String,
    sentence_idx: usize,
    vector: Vec<f64>,
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet, EmbeddingError> {
    let path = path.as_ref();
    read_embeddings(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

/// Parses embedding JSONL. The first vector fixes the dimension for the file.
pub fn read_embeddings<R: BufRead>(reader: R, name: &str) -> Result<EmbeddingSet, EmbeddingError> {
    let mut set = EmbeddingSet::default();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // serde_json rejects NaN literals, so parse components leniently first
        let rec = parse_embedding_line(&line).map_err(|reason| EmbeddingError::MalformedLine {
            path: name.to_string(),
            line_no: i + 1,
            reason,
        })?;
        let (sid, idx) = (rec.story_id, rec.sentence_idx);
        if rec.vector.is_empty() {
            return Err(EmbeddingError::EmptyVector(sid, idx));
        }
        if rec.vector.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFiniteComponent(sid, idx));
        }
        match dim {
            None => dim = Some(rec.vector.len()),
            Some(d) if d != rec.vector.len() => return Err(EmbeddingError::DimMismatch(sid, idx)),
            _ => {}
        }
        let m = set
            .matrices
            .entry(sid.clone())
            .or_insert_with(|| EmbeddingMatrix {
                story_id: sid.clone(),
                dim: rec.vector.len(),
                vectors: BTreeMap::new(),
            });
        if m.vectors.insert(idx, rec.vector).is_some() {
            return Err(EmbeddingError::DuplicateSentence(sid, idx));
        }
    }
    Ok(set)
}

fn parse_embedding_line(line: &str) -> Result<EmbeddingRecord, String> {
    #[derive(Deserialize)]
    struct Raw {
        story_id: String,
        sentence_idx: usize,
        vector: Vec<serde_json::Value>,
    }
    let raw: Raw = serde_json::from_str(line)
        .or_else(|_| serde_json::from_str(&sanitize_non_finite(line)))
        .map_err(|e| e.to_string())?;
    let vector = raw
        .vector
        .into_iter()
        .map(|v| match v {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| "bad number".to_string()),
            serde_json::Value::Null => Ok(f64::NAN),
            serde_json::Value::String(s) => s.parse::<f64>().map_err(|e| e.to_string()),
            other => Err(format!("not a number: {other}")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbeddingRecord {
        story_id: raw.story_id,
        sentence_idx: raw.sentence_idx,
        vector,
    })
}

/// Rewrites bare `NaN`/`Infinity` tokens (as emitted by numpy's json) to
/// `null` so the record can still be located and rejected as non-finite.
fn sanitize_non_finite(line: &str) -> String {
    line.replace("-Infinity", "null")
        .replace("Infinity", "null")
        .replace("NaN", "null")
}

/// Deterministic test embedder: each token hashes to a seeded pseudo-random
/// vector in `[-1, 1]^dim`; a sentence is the L2-normalised sum of its token
/// vectors. Skipped sentences get no vector.
pub fn mock_embed(story: &Story, dim: usize, seed: u64) -> EmbeddingMatrix {
    assert!(dim >= 2, "mock_embed needs dim >= 2");
    let vectors = story
        .active()
        .map(|s| (s.index, mock_vector(&s.tokens, dim, seed)))
        .collect();
    EmbeddingMatrix {
        story_id: story.id.clone(),
        dim,
        vectors,
    }
}

pub fn mock_embed_corpus(corpus: &Corpus, dim: usize, seed: u64) -> EmbeddingSet {
    let mut set = EmbeddingSet::default();
    for story in corpus.iter() {
        set.insert(mock_embed(story, dim, seed));
    }
    set
}

fn mock_vector(tokens: &[String], dim: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for tok in tokens {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(tok.as_bytes()) ^ seed.rotate_left(17));
        for x in v.iter_mut() {
            *x += rng.random_range(-1.0..1.0);
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // no tokens: fall back to a fixed unit axis
        v[0] = 1.0;
        return v;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// How sentiment scores turn into importance weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    /// `|score|` times the sign-dependent multiplier; never negative.
    #[default]
    Magnitude,
    /// Raw `score` times the multiplier; negative for negative sentiment.
    Signed,
}

impl std::str::FromStr for AlphaMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "magnitude" => Ok(AlphaMode::Magnitude),
            "signed" => Ok(AlphaMode::Signed),
            other => Err(format!("unknown alpha mode `{other}`")),
        }
    }
}

pub const POSITIVE_MULTIPLIER: f64 = 1.0;
pub const NEGATIVE_MULTIPLIER: f64 = 2.0;

/// Importance weight of a sentiment score: negative sentiment counts double.
pub fn alpha_weight(score: f64) -> Result<f64, EmbeddingError> {
    alpha_weight_with(score, AlphaMode::Magnitude)
}

pub fn alpha_weight_with(score: f64, mode: AlphaMode) -> Result<f64, EmbeddingError> {
    if !(-1.0..=1.0).contains(&score) {
        return Err(EmbeddingError::OutOfRange(score));
    }
    let mult = if score >= 0.0 {
        POSITIVE_MULTIPLIER
    } else {
        NEGATIVE_MULTIPLIER
    };
    Ok(match mode {
        AlphaMode::Magnitude => score.abs() * mult,
        AlphaMode::Signed => score * mult,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentScores {
    pub story_id: String,
    pub scores: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSeries {
    pub story_id: String,
    pub alphas: BTreeMap<usize, f64>,
}

impl SentimentScores {
    pub fn alphas(&self, mode: AlphaMode) -> Result<AlphaSeries, EmbeddingError> {
        let alphas = self
            .scores
            .iter()
            .map(|(&i, &s)| alpha_weight_with(s, mode).map(|a| (i, a)))
            .collect::<Result<_, _>>()?;
        Ok(AlphaSeries {
            story_id: self.story_id.clone(),
            alphas,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentimentSet {
    pub stories: IndexMap<String, SentimentScores>,
}

impl SentimentSet {
    pub fn get(&self, story_id: &str) -> Option<&SentimentScores> {
        self.stories.get(story_id)
    }

    pub fn score(&self, story_id: &str, idx: usize) -> Option<f64> {
        self.get(story_id).and_then(|s| s.scores.get(&idx).copied())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for s in self.stories.values() {
            for (idx, score) in &s.scores {
                let rec = SentimentRecord {
                    story_id: s.story_id.clone(),
                    sentence_idx: *idx,
                    score: *score,
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SentimentRecord {
    story_id: String,
    sentence_idx: usize,
    score: f64,
}

pub fn load_sentiment(path: impl AsRef<Path>) -> Result<SentimentSet, EmbeddingError> {
    let path = path.as_ref();
    read_sentiment(
        BufReader::new(File::open(path)?),
        &path.display().to_string(),
    )
}

pub fn read_sentiment<R: BufRead>(reader: R, name: &str) -> Result<SentimentSet, EmbeddingError> {
    let mut set = SentimentSet::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentimentRecord =
            serde_json::from_str(&line).map_err(|e| EmbeddingError::MalformedLine {
                path: name.to_string(),
                line_no: i + 1,
                reason: e.to_string(),
            })?;
        if !(-1.0..=1.0).contains(&rec.score) {
            return Err(EmbeddingError::OutOfRange(rec.score));
        }
        let entry = set
            .stories
            .entry(rec.story_id.clone())
            .or_insert_with(|| SentimentScores {
                story_id: rec.story_id.clone(),
                scores: BTreeMap::new(),
            });
        if entry.scores.insert(rec.sentence_idx, rec.score).is_some() {
            return Err(EmbeddingError::DuplicateSentence(
                rec.story_id,
                rec.sentence_idx,
            ));
        }
    }
    Ok(set)
}
