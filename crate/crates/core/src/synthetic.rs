//! Engineered fixtures: stories with a planted twist and synopses with
//! planted turning-point peaks.
//!
//! Every sentence of a twist story has eight words. Ordinary sentences name
//! the whole story-specific cast and draw the rest from a genre vocabulary
//! shared by all stories, until one sentence is written entirely in words
//! that appear nowhere else. Sentences after the twist keep the cast, echo
//! two of the twist words and draw three genre words. Under [`crate::mock_embed`]
//! the twist is the largest embedding jump in the story and the sentence
//! farthest from anything sampled out of other stories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::story::{Corpus, Split, Story};

const GENRE_WORDS: usize = 8;
const CAST_WORDS: usize = 3;
const TWIST_WORDS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TwistStory {
    pub story: Story,
    /// Sentence index of the planted twist.
    pub twist: usize,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String], k: usize) -> Vec<&'a str> {
    rand::seq::index::sample(rng, words.len(), k)
        .into_iter()
        .map(|i| words[i].as_str())
        .collect()
}

fn sentence(words: Vec<&str>) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// One story of `len` sentences with the twist at `twist`.
pub fn twist_story(id: &str, len: usize, twist: usize, seed: u64) -> TwistStory {
    assert!(
        twist > 0 && twist < len,
        "twist must have a sentence before it"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genre: Vec<String> = (0..GENRE_WORDS).map(|i| format!("genre{i}")).collect();
    let cast: Vec<String> = (0..CAST_WORDS).map(|i| format!("{id}cast{i}")).collect();
    let twist_vocab: Vec<String> = (0..TWIST_WORDS).map(|i| format!("{id}twist{i}")).collect();

    let texts: Vec<String> = (0..len)
        .map(|t| {
            let mut words: Vec<&str> = Vec::new();
            if t == twist {
                words.extend(pick(&mut rng, &twist_vocab, TWIST_WORDS));
            } else if t < twist {
                words.extend(pick(&mut rng, &cast, CAST_WORDS));
                words.extend(pick(&mut rng, &genre, 5));
            } else {
                words.extend(pick(&mut rng, &cast, CAST_WORDS));
                words.extend(pick(&mut rng, &twist_vocab, 2));
                words.extend(pick(&mut rng, &genre, 3));
            }
            sentence(words)
        })
        .collect();
    TwistStory {
        story: Story::from_texts(id, &texts),
        twist,
    }
}

/// `count` twist stories of 15 to 25 sentences, twist placed between 30%
/// and 80% of the story.
pub fn twist_corpus(count: usize, seed: u64) -> (Corpus, Vec<TwistStory>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = Corpus::new(Split::Test);
    let mut stories = Vec::with_capacity(count);
    for k in 0..count {
        let len = rng.random_range(15..=25);
        let lo = (len as f64 * 0.3).ceil() as usize;
        let hi = (len as f64 * 0.8).floor() as usize;
        let twist = rng.random_range(lo..=hi);
        let ts = twist_story(&format!("story{k:02}"), len, twist, rng.random());
        corpus
            .insert(ts.story.clone())
            .expect("generated ids are unique");
        stories.push(ts);
    }
    (corpus, stories)
}

/// A series of length `n` with low noise everywhere and a clear peak at each
/// of `peaks`.
pub fn planted_peak_series(n: usize, peaks: &[usize], seed: u64) -> Vec<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(0.0..1.0))).collect();
    for &p in peaks {
        s[p] = Some(10.0);
    }
    s
}
