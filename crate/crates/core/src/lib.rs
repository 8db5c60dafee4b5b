//! Measures of narrative suspense over sequences of sentence embeddings.
//!
//! A story is read one sentence at a time. After each sentence the reader is
//! in a state, represented by a sentence embedding, and has expectations
//! about what comes next, represented by candidate continuations with
//! probabilities. This crate computes
//!
//! * surprise, looking backward: how unlikely the sentence that just arrived
//!   was ([`hale_surprise`]), or how far it moved the story state
//!   ([`ely_surprise`]);
//! * uncertainty reduction, looking forward: how much the entropy over the
//!   continuations dropped ([`hale_uncertainty_reduction`]), or how far the
//!   story state is expected to move next ([`ely_uncertainty`]);
//!
//! along with importance-weighted variants, simple change baselines, and the
//! tooling to evaluate all of them against human suspense judgements and
//! turning-point annotations.
//!
//! ```
//! use suspense::{ely_surprise, ely_uncertainty, DistanceMetric};
//!
//! let before = [0.0, 1.0];
//! let now = [1.0, 1.0];
//! assert_eq!(ely_surprise(&before, &now, DistanceMetric::L1).unwrap(), 1.0);
//!
//! // two equally likely futures, at L1 distance 2 and 4
//! let futures = [(vec![1.0, 3.0], 0.5), (vec![3.0, 3.0], 0.5)];
//! assert_eq!(ely_uncertainty(&now, &futures, DistanceMetric::L1).unwrap(), 3.0);
//! ```
//!
//! The guide in `book/` walks through each part with runnable examples.

pub mod agreement;
pub mod annotation;
pub mod continuation;
pub mod correlation;
pub mod embedding;
pub mod evaluation;
pub mod measures;
pub mod series;
pub mod story;
pub mod synthetic;
pub mod turning_points;
pub mod vector;

#[cfg(doctest)]
mod book;

pub use agreement::{
    annotation_alpha, krippendorff_alpha, per_annotator_alpha, screen_annotators, AgreementError,
    MetricLevel, ScreeningThresholds,
};
pub use annotation::{
    fit_mapping, load_annotations, to_absolute, AnnotationError, AnnotationSet, FitTarget,
    JudgmentMapping, RelativeLabel,
};
pub use continuation::{
    build_corpus_trees, conditional_probabilities, default_branching, load_continuations,
    path_distribution, realized_probability, sample_corpus_candidates, CandidateNode,
    CandidateSource, ContinuationDistribution, ContinuationError, ContinuationSet, RolloutTree,
    StoryTrees,
};
pub use correlation::{fisher_ci, kendall, spearman, CorrelationError};
pub use embedding::{
    alpha_weight, alpha_weight_with, load_embeddings, load_sentiment, mock_embed,
    mock_embed_corpus, AlphaMode, AlphaSeries, EmbeddingError, EmbeddingMatrix, EmbeddingSet,
    SentimentScores, SentimentSet,
};
pub use evaluation::{
    evaluate_corpus, evaluate_model, human_upper_bound, CorrelationReport, EvalError,
};
pub use measures::{
    alpha_ely_surprise, alpha_ely_uncertainty, baseline_embedding_change, baseline_word_overlap,
    ely_surprise, ely_uncertainty, entropy, hale_surprise, hale_uncertainty_reduction, zscore,
    DistanceMetric, MeasureError,
};
pub use series::{
    compute_series, read_measure_csv, write_measure_csv, write_measure_jsonl, Measure,
    MeasureConfig, MeasureSeries, SeriesError, SeriesInputs,
};
pub use story::{
    clean_sentence, load_stories, should_skip, tokenize, Corpus, Sentence, Split, Story, StoryError,
};
pub use turning_points::{
    load_tp_gold, predict_tps, theory_baseline, tp_distance, TpConfig, TpError, TpGold,
    TpPrediction,
};
