//! Story corpora: loading, sentence cleaning, tokenization and the skip rule.
//!
//! Input is pre-segmented. Each line of a story file is one JSON object
//! `{"id": "...", "sentences": ["...", ...]}`. Sentences are cleaned on load
//! (symbol-run collapse and trim), tokenized, and marked as skipped when they
//! carry fewer than [`MIN_TOKENS`] tokens. Skipped sentences keep their index
//! but receive no measure values downstream.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentences with fewer tokens than this are skipped.
pub const MIN_TOKENS: usize = 3;

#[derive(Debug, Error)]
pub enum StoryError {
    #[error("{path}: line {line_no}: malformed story record: {reason}")]
    MalformedLine {
        path: String,
        line_no: usize,
        reason: String,
    },
    #[error("duplicate story id `{0}`")]
    DuplicateStoryId(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub skipped: bool,
}

impl Sentence {
    /// Cleans and tokenizes `raw`, deciding the skip flag.
    pub fn new(index: usize, raw: &str) -> Self {
        let text = clean_sentence(raw);
        let tokens = tokenize(&text);
        let skipped = tokens.len() < MIN_TOKENS;
        Sentence {
            index,
            text,
            tokens,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Story {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Story {
    pub fn from_texts<S: AsRef<str>>(id: impl Into<String>, texts: &[S]) -> Self {
        Story {
            id: id.into(),
            sentences: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Sentence::new(i, t.as_ref()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentences that carry measure values, in story order.
    pub fn active(&self) -> impl Iterator<Item = &Sentence> {
        self.sentences.iter().filter(|s| !s.skipped)
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active().map(|s| s.index).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    #[default]
    Test,
}

/// Stories keyed by id, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub split: Split,
    pub stories: IndexMap<String, Story>,
}

impl Corpus {
    pub fn new(split: Split) -> Self {
        Corpus {
            split,
            stories: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, story: Story) -> Result<(), StoryError> {
        if self.stories.contains_key(&story.id) {
            return Err(StoryError::DuplicateStoryId(story.id));
        }
        self.stories.insert(story.id.clone(), story);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Story> {
        self.stories.get(id)
    }

    pub fn len(&self) -> usize {
        self.stories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stories.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Story> {
        self.stories.values()
    }

    /// Writes the corpus back out as story JSONL (cleaned sentence texts).
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for story in self.iter() {
            let record = StoryRecord {
                id: story.id.clone(),
                sentences: story.sentences.iter().map(|s| s.text.clone()).collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoryRecord {
    id: String,
    sentences: Vec<String>,
}

/// Loads a story JSONL file. Blank lines are ignored.
pub fn load_stories(path: impl AsRef<Path>) -> Result<Corpus, StoryError> {
    load_stories_with_split(path, Split::default())
}

pub fn load_stories_with_split(path: impl AsRef<Path>, split: Split) -> Result<Corpus, StoryError> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    read_stories(reader, &path.display().to_string(), split)
}

pub fn read_stories<R: BufRead>(reader: R, name: &str, split: Split) -> Result<Corpus, StoryError> {
    let mut corpus = Corpus::new(split);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StoryRecord =
            serde_json::from_str(&line).map_err(|e| StoryError::MalformedLine {
                path: name.to_string(),
                line_no: i + 1,
                reason: e.to_string(),
            })?;
        corpus.insert(Story::from_texts(record.id, &record.sentences))?;
    }
    Ok(corpus)
}

/// Collapses every run of three or more identical non-alphanumeric
/// characters to a single character, then trims surrounding whitespace.
pub fn clean_sentence(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let mut j = i + 1;
        while j < chars.len() && chars[j] == c {
            j += 1;
        }
        let run = j - i;
        if run >= 3 && !c.is_alphanumeric() {
            out.push(c);
        } else {
            out.extend(std::iter::repeat_n(c, run));
        }
        i = j;
    }
    out.trim().to_string()
}

/// Lowercase whitespace tokenization with leading and trailing punctuation
/// stripped from each token. Punctuation-only tokens vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

pub fn should_skip(text: &str) -> bool {
    tokenize(text).len() < MIN_TOKENS
}
